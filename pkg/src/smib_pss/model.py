"""Linearized single-machine infinite-bus model with IEEE Type 1 excitation,
non-reheat steam governor-turbine and a two-stage lead-lag stabilizer.

State ordering is fixed:

    open loop   domega, ddelta, dEq_prime, dEfd, dVr, dVe, dPg, dTm
    closed loop the above + dP1, dP2, dUe

``domega`` is in per unit of synchronous speed, so the angle equation reads
``d(ddelta)/dt = omega_0 * domega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

OPEN_LOOP_LABELS: tuple[str, ...] = (
    "domega", "ddelta", "dEq_prime", "dEfd", "dVr", "dVe", "dPg", "dTm",
)
PSS_LABELS: tuple[str, ...] = ("dP1", "dP2", "dUe")
CLOSED_LOOP_LABELS: tuple[str, ...] = OPEN_LOOP_LABELS + PSS_LABELS

# row/column indices, shared by the builders below
W, D_, EQ, EFD, VR, VE, PG, TM, P1, P2, UE = range(11)

# Bounds on the stabilizer decision vector [K_s, T1, T2].
PSS_LOWER = (5.0, 0.1, 0.1)
PSS_UPPER = (60.0, 1.0, 1.0)


class InfeasibleOperatingPoint(ValueError):
    """The requested (P, Q, V_t) cannot be reached through the given network."""


class InvalidParameterError(ValueError):
    pass


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise InvalidParameterError(msg)


@dataclass(frozen=True)
class MachineParams:
    x_d: float = 0.973
    x_d_prime: float = 0.190
    x_q: float = 0.550
    M: float = 9.26
    D: float = 0.0
    T_do_prime: float = 7.76
    omega_0: float = 2.0 * math.pi * 60.0

    def __post_init__(self):
        _require(self.x_d > self.x_d_prime > 0, "need x_d > x_d_prime > 0")
        _require(self.x_q > 0, "x_q must be positive")
        _require(self.M > 0, "M must be positive")
        _require(self.D >= 0, "D must be non-negative")
        _require(self.T_do_prime > 0, "T_do_prime must be positive")
        _require(self.omega_0 > 0, "omega_0 must be positive")


@dataclass(frozen=True)
class LineLoadParams:
    R: float = 0.034
    X_e: float = 0.997
    G: float = 0.249
    B: float = 0.262
    V_t0: float = 1.05

    def __post_init__(self):
        _require(self.X_e > 0, "X_e must be positive")
        _require(self.V_t0 > 0, "V_t0 must be positive")
        _require(self.R >= 0, "R must be non-negative")


@dataclass(frozen=True)
class ExcitationParams:
    K_A: float = 190.0
    T_A: float = 0.0056
    K_E: float = 0.166
    T_E: float = 0.208
    K_F: float = 0.00097
    T_F: float = 0.148
    S_E: float = 0.0

    def __post_init__(self):
        _require(self.K_A > 0, "K_A must be positive")
        _require(self.T_A > 0, "T_A must be positive (an 8-state model needs a dynamic amplifier)")
        _require(self.T_E > 0, "T_E must be positive")
        _require(self.T_F > 0, "T_F must be positive")
        _require(self.K_F >= 0, "K_F must be non-negative")


@dataclass(frozen=True)
class GovernorTurbineParams:
    T_GS: float = 0.2
    T_TS: float = 0.3
    R_p: float = 0.05
    # carried for completeness; no equation of the model uses them
    R_T: float = 0.4
    delta_T_ref: float = 0.0

    def __post_init__(self):
        _require(self.T_GS > 0, "T_GS must be positive")
        _require(self.T_TS > 0, "T_TS must be positive")
        _require(self.R_p > 0, "R_p must be positive")


@dataclass(frozen=True)
class SystemParams:
    machine: MachineParams = field(default_factory=MachineParams)
    line: LineLoadParams = field(default_factory=LineLoadParams)
    exc: ExcitationParams = field(default_factory=ExcitationParams)
    gt: GovernorTurbineParams = field(default_factory=GovernorTurbineParams)


@dataclass(frozen=True)
class OperatingCondition:
    P: float = 0.4
    Q: float = 0.008
    delta_P_L: float = 0.1
    x_e_scale: float = 1.0
    k_a_scale: float = 1.0

    def __post_init__(self):
        _require(self.P > 0, "P must be positive")
        _require(self.x_e_scale > 0, "x_e_scale must be positive")
        _require(self.k_a_scale > 0, "k_a_scale must be positive")


@dataclass(frozen=True)
class HeffronConstants:
    K1: float
    K2: float
    K3: float
    K4: float
    K5: float
    K6: float

    def __post_init__(self):
        if not self.K3 > 0:
            raise InfeasibleOperatingPoint(f"K3 = {self.K3} is not positive")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.K1, self.K2, self.K3, self.K4, self.K5, self.K6)


@dataclass(frozen=True)
class PssParams:
    K_s: float
    T1: float
    T2: float
    T_w: float = 10.0

    @classmethod
    def from_vector(cls, x, T_w: float = 10.0) -> "PssParams":
        return cls(float(x[0]), float(x[1]), float(x[2]), T_w)

    def as_vector(self) -> np.ndarray:
        return np.array([self.K_s, self.T1, self.T2])

    def in_bounds(self) -> bool:
        return all(lo <= v <= hi for v, lo, hi in zip(self.as_vector(), PSS_LOWER, PSS_UPPER))


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """``dx/dt = A x + b_dist * delta_P_L``."""

    A: np.ndarray
    b_dist: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        n = len(self.labels)
        if self.A.shape != (n, n) or self.b_dist.shape != (n,):
            raise ValueError("A, b_dist and labels disagree in size")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b_dist))):
            raise ValueError("model has non-finite entries")

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown state label {label!r}") from None


# ---------------------------------------------------------------------------
# Operating point and K-constants


@dataclass(frozen=True)
class _Network:
    """Thevenin view of the network seen from the machine terminals.

    ``V`` is the Thevenin source magnitude; ``delta`` is the rotor angle
    measured from that source (differs from the infinite-bus angle by a
    constant, so its deviations are identical).
    """

    R: float
    X: float
    V: float
    delta: float
    Eq_prime: float


def _network(machine: MachineParams, line: LineLoadParams, op: OperatingCondition) -> _Network:
    X_e = line.X_e * op.x_e_scale
    Vt = complex(line.V_t0, 0.0)
    It = ((op.P + 1j * op.Q) / Vt).conjugate()
    Z = complex(line.R, X_e)
    Y_load = complex(line.G, line.B)
    denom = 1.0 + Z * Y_load
    if abs(denom) < 1e-12:
        raise InfeasibleOperatingPoint("network: 1 + Z*Y_load vanishes, no Thevenin equivalent")
    V_inf = Vt - Z * (It - Y_load * Vt)
    if abs(V_inf) < 1e-9:
        raise InfeasibleOperatingPoint("network: infinite-bus voltage collapses to zero")
    V_th = V_inf / denom
    Z_th = Z / denom
    EQ = Vt + 1j * machine.x_q * It
    if abs(EQ) < 1e-9:
        raise InfeasibleOperatingPoint("stator: q-axis voltage behind x_q is zero")
    rot = np.exp(-1j * (np.angle(EQ) - math.pi / 2))
    i_d = (It * rot).real
    v_q = (Vt * rot).imag
    Eq_prime = v_q + machine.x_d_prime * i_d
    if Eq_prime <= 0:
        raise InfeasibleOperatingPoint(f"field: E_q' = {Eq_prime:.4g} is not positive")
    delta = float(np.angle(EQ) - np.angle(V_th))
    delta = (delta + math.pi) % (2 * math.pi) - math.pi
    if not -math.pi / 2 < delta < math.pi / 2:
        raise InfeasibleOperatingPoint(
            f"swing: rotor angle {math.degrees(delta):.1f} deg lies beyond the steady-state limit"
        )
    if Z_th.imag <= 0:
        raise InfeasibleOperatingPoint("network: Thevenin reactance is not inductive")
    return _Network(Z_th.real, Z_th.imag, abs(V_th), delta, Eq_prime)


def _network_matrix(machine: MachineParams, net: _Network) -> np.ndarray:
    # [[R, -(X+x_q)], [X+x_d', R]] @ [i_d, i_q] = [-V sin d, E_q' - V cos d]
    return np.array([
        [net.R, -(net.X + machine.x_q)],
        [net.X + machine.x_d_prime, net.R],
    ])


def network_quantities(machine: MachineParams, net: _Network, delta: float, Eq_prime: float) -> np.ndarray:
    """Electrical torque, armature-reaction term ``(x_d - x_d') i_d`` and
    terminal voltage for a given rotor angle and transient EMF."""
    i_d, i_q = np.linalg.solve(
        _network_matrix(machine, net),
        [-net.V * math.sin(delta), Eq_prime - net.V * math.cos(delta)],
    )
    v_d = machine.x_q * i_q
    v_q = Eq_prime - machine.x_d_prime * i_d
    Te = Eq_prime * i_q + (machine.x_q - machine.x_d_prime) * i_d * i_q
    return np.array([Te, (machine.x_d - machine.x_d_prime) * i_d, math.hypot(v_d, v_q)])


def compute_heffron_constants(
    machine: MachineParams, line: LineLoadParams, op: OperatingCondition
) -> HeffronConstants:
    """K1..K6 about the operating point ``op``.

    Local load ``G + jB`` is folded into a Thevenin equivalent together with
    the line ``R + jX_e`` before linearizing. ``op.x_e_scale`` is applied to
    the line reactance here.
    """
    net = _network(machine, line, op)
    Minv = np.linalg.inv(_network_matrix(machine, net))
    d, E, V = net.delta, net.Eq_prime, net.V
    i_d, i_q = Minv @ [-V * math.sin(d), E - V * math.cos(d)]
    did_dd, diq_dd = Minv @ [-V * math.cos(d), V * math.sin(d)]
    did_dE, diq_dE = Minv[:, 1]

    xq, xdp, xd = machine.x_q, machine.x_d_prime, machine.x_d
    K1 = E * diq_dd + (xq - xdp) * (i_q * did_dd + i_d * diq_dd)
    K2 = i_q + E * diq_dE + (xq - xdp) * (i_q * did_dE + i_d * diq_dE)
    K3 = 1.0 / (1.0 + (xd - xdp) * did_dE)
    K4 = (xd - xdp) * did_dd

    v_d = xq * i_q
    v_q = E - xdp * i_d
    Vt = math.hypot(v_d, v_q)
    K5 = (v_d * xq * diq_dd - v_q * xdp * did_dd) / Vt
    K6 = (v_d * xq * diq_dE + v_q * (1.0 - xdp * did_dE)) / Vt
    return HeffronConstants(K1, K2, K3, K4, K5, K6)


def heffron_constants_fd(
    machine: MachineParams, line: LineLoadParams, op: OperatingCondition, step: float = 1e-6
) -> HeffronConstants:
    """Finite-difference cross-check of :func:`compute_heffron_constants`.

    Perturbs the rotor angle and E_q' in the nonlinear network solution and
    takes central differences.
    """
    net = _network(machine, line, op)
    d, E = net.delta, net.Eq_prime

    def f(dd, EE):
        return network_quantities(machine, net, dd, EE)

    g_d = (f(d + step, E) - f(d - step, E)) / (2 * step)
    g_E = (f(d, E + step) - f(d, E - step)) / (2 * step)
    return HeffronConstants(
        K1=g_d[0], K2=g_E[0], K3=1.0 / (1.0 + g_E[1]), K4=g_d[1], K5=g_d[2], K6=g_E[2],
    )


# ---------------------------------------------------------------------------
# State matrices


def build_open_loop(
    machine: MachineParams,
    line: LineLoadParams,
    exc: ExcitationParams,
    gt: GovernorTurbineParams,
    op: OperatingCondition,
) -> StateSpaceModel:
    K = compute_heffron_constants(machine, line, op)
    K_A = exc.K_A * op.k_a_scale
    m = machine
    A = np.zeros((8, 8))

    A[W, W] = -m.D / m.M
    A[W, D_] = -K.K1 / m.M
    A[W, EQ] = -K.K2 / m.M
    A[W, TM] = 1.0 / m.M

    A[D_, W] = m.omega_0

    A[EQ, D_] = -K.K4 / m.T_do_prime
    A[EQ, EQ] = -1.0 / (K.K3 * m.T_do_prime)
    A[EQ, EFD] = 1.0 / m.T_do_prime

    KES = exc.K_E + exc.S_E
    A[EFD, EFD] = -KES / exc.T_E
    A[EFD, VR] = 1.0 / exc.T_E

    A[VR, D_] = -K_A * K.K5 / exc.T_A
    A[VR, EQ] = -K_A * K.K6 / exc.T_A
    A[VR, VR] = -1.0 / exc.T_A
    A[VR, VE] = -K_A / exc.T_A

    # rate feedback driven by dEfd/dt, substituted from the exciter row
    A[VE, EFD] = -exc.K_F * KES / (exc.T_E * exc.T_F)
    A[VE, VR] = exc.K_F / (exc.T_E * exc.T_F)
    A[VE, VE] = -1.0 / exc.T_F

    A[PG, W] = -1.0 / (gt.R_p * gt.T_GS)
    A[PG, PG] = -1.0 / gt.T_GS

    A[TM, PG] = 1.0 / gt.T_TS
    A[TM, TM] = -1.0 / gt.T_TS

    b = np.zeros(8)
    b[W] = -1.0 / m.M
    return StateSpaceModel(A, b, OPEN_LOOP_LABELS)


def build_closed_loop(
    machine: MachineParams,
    line: LineLoadParams,
    exc: ExcitationParams,
    gt: GovernorTurbineParams,
    pss: PssParams,
    op: OperatingCondition,
) -> StateSpaceModel:
    """Open-loop dynamics plus the stabilizer states dP1, dP2, dUe.

    Each filter output is a state. The washout is driven by ``K_s * domega``;
    derivative feedthrough of each block is eliminated by substituting the
    upstream state's derivative, which also routes the load disturbance into
    the stabilizer rows of ``b_dist``.
    """
    if pss.T2 <= 0:
        raise InvalidParameterError("T2 must be positive")
    if pss.T_w <= 0:
        raise InvalidParameterError("T_w must be positive")
    if pss.T1 < 0:
        raise InvalidParameterError("T1 must be non-negative")

    ol = build_open_loop(machine, line, exc, gt, op)
    A = np.zeros((11, 11))
    A[:8, :8] = ol.A
    b = np.zeros(11)
    b[:8] = ol.b_dist

    lead = pss.T1 / pss.T2
    # T_w dP1/dt = -P1 + K_s T_w domega'
    A[P1] = pss.K_s * A[W]
    A[P1, P1] -= 1.0 / pss.T_w
    b[P1] = pss.K_s * b[W]
    # T2 dP2/dt = P1 - P2 + T1 dP1'
    A[P2] = lead * A[P1]
    A[P2, P1] += 1.0 / pss.T2
    A[P2, P2] -= 1.0 / pss.T2
    b[P2] = lead * b[P1]
    # T2 dUe/dt = P2 - Ue + T1 dP2'
    A[UE] = lead * A[P2]
    A[UE, P2] += 1.0 / pss.T2
    A[UE, UE] -= 1.0 / pss.T2
    b[UE] = lead * b[P2]

    K_A = exc.K_A * op.k_a_scale
    A[VR, UE] = K_A / exc.T_A
    return StateSpaceModel(A, b, CLOSED_LOOP_LABELS)


def build_open_loop_for(system: SystemParams, op: OperatingCondition) -> StateSpaceModel:
    return build_open_loop(system.machine, system.line, system.exc, system.gt, op)


def build_closed_loop_for(system: SystemParams, pss: PssParams, op: OperatingCondition) -> StateSpaceModel:
    return build_closed_loop(system.machine, system.line, system.exc, system.gt, pss, op)


def pss_frequency_response(pss: PssParams, omega: float) -> complex:
    """Stabilizer gain ``dUe/domega`` at ``s = j*omega``."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    s = 1j * omega
    lead_lag = (1 + s * pss.T1) / (1 + s * pss.T2)
    return complex(pss.K_s * lead_lag**2 * (s * pss.T_w) / (1 + s * pss.T_w))


def with_overrides(system: SystemParams, **blocks) -> SystemParams:
    """Return ``system`` with named sub-blocks updated, e.g.
    ``with_overrides(sys, exc={"K_A": 200})``."""
    kw = {}
    for name, changes in blocks.items():
        kw[name] = replace(getattr(system, name), **changes)
    return replace(system, **kw)
