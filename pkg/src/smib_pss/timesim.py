"""Step-disturbance response of a linear model and response metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import StateSpaceModel


@dataclass(frozen=True)
class SimConfig:
    t_end: float = 10.0
    dt: float = 0.01
    disturbance: float = 0.1

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.dt < self.t_end:
            raise ValueError("dt must lie in (0, t_end)")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    labels: tuple[str, ...]
    overflow: bool = False

    def signal(self, label: str) -> np.ndarray:
        try:
            i = self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown state label {label!r}") from None
        return self.states[:, i]


@dataclass(frozen=True)
class ResponseMetrics:
    ise_speed: float
    ise_angle: float
    peak_overshoot: float
    settling_time: float | None  # None: not settled within the horizon


def internal_step(A: np.ndarray, dt: float) -> float:
    """RK4 step: ``min(dt, T_min / 10)`` with ``1/T_min`` the largest
    Gershgorin disc reach of ``A``."""
    reach = float(np.max(np.sum(np.abs(A), axis=1))) if A.size else 0.0
    if reach == 0.0:
        return dt
    return min(dt, 0.1 / reach)


def rk4_sample_map(A: np.ndarray, b: np.ndarray, dt: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Affine map ``x -> Phi x + gamma`` of classic RK4 over one output
    sample (an integer number of internal steps of size <= ``h``) for
    ``dx/dt = A x + b``."""
    n = A.shape[0]
    n_sub = max(1, math.ceil(dt / h - 1e-12))
    h = dt / n_sub
    I = np.eye(n)
    hA = h * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    step = I + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
    inc = h * (I + hA / 2 + hA2 / 6 + hA3 / 24) @ b

    # compose n_sub steps by binary powering of the affine map
    Phi, gamma = I, np.zeros(n)
    P, q = step, inc
    k = n_sub
    while k:
        if k & 1:
            Phi, gamma = P @ Phi, P @ gamma + q
        P, q = P @ P, P @ q + q
        k >>= 1
    return Phi, gamma


def simulate(model: StateSpaceModel, cfg: SimConfig = SimConfig()) -> Trajectory:
    """Response of ``dx/dt = A x + b_dist * dP_L`` from rest to a step
    ``cfg.disturbance`` applied at t = 0."""
    n_samples = int(round(cfg.t_end / cfg.dt))
    times = np.arange(n_samples + 1) * cfg.dt
    A = model.A
    b = model.b_dist * cfg.disturbance
    Phi, gamma = rk4_sample_map(A, b, cfg.dt, internal_step(A, cfg.dt))

    X = np.zeros((n_samples + 1, model.n))
    overflow = False
    x = X[0]
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n_samples + 1):
            x = Phi @ x + gamma
            if not np.all(np.isfinite(x)):
                overflow = True
                X, times = X[:k], times[:k]
                break
            X[k] = x
    return Trajectory(times, X, tuple(model.labels), overflow)


def ise(traj: Trajectory, state_label: str) -> float:
    e = traj.signal(state_label)
    return float(np.trapezoid(e * e, traj.times)) if len(e) > 1 else 0.0


def settling_time(times, signal, band: float, reference: float = 0.0) -> float | None:
    dev = np.abs(np.asarray(signal) - reference)
    outside = np.nonzero(dev > band)[0]
    if outside.size == 0:
        return float(times[0])
    last = outside[-1]
    if last == len(dev) - 1:
        return None
    return float(times[last + 1])


def response_metrics(
    traj: Trajectory,
    state_label: str = "domega",
    settle_band: float = 0.02,
    band_floor: float = 1e-5,
    reference: float = 0.0,
) -> ResponseMetrics:
    """ISE of speed and angle, peak |deviation| of ``state_label`` and its
    settling time into ``settle_band * peak`` (floored at ``band_floor``)
    around ``reference``."""
    s = traj.signal(state_label)
    peak = float(np.max(np.abs(s))) if s.size else 0.0
    band = max(settle_band * peak, band_floor)
    return ResponseMetrics(
        ise_speed=ise(traj, "domega") if "domega" in traj.labels else math.nan,
        ise_angle=ise(traj, "ddelta") if "ddelta" in traj.labels else math.nan,
        peak_overshoot=peak,
        settling_time=settling_time(traj.times, s, band, reference),
    )


def steady_state(model: StateSpaceModel, disturbance: float) -> np.ndarray:
    """Equilibrium ``-A^-1 b dP_L`` (meaningful only for stable models)."""
    return -np.linalg.solve(model.A, model.b_dist * disturbance)


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t",) + traj.labels)
        for t, row in zip(traj.times, traj.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    return path


def read_trajectory_csv(path) -> Trajectory:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))
    return Trajectory(data[:, 0], data[:, 1:], tuple(header[1:]))
