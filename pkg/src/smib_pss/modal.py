"""Eigenvalues, damping ratios and electromechanical-mode identification."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .model import StateSpaceModel

ZETA_THRESHOLD = 0.06
EM_BAND_HZ = (0.1, 3.0)
ROTOR_LABELS = ("domega", "ddelta")
# imaginary parts below this are treated as real eigenvalues
_IMAG_TOL = 1e-9


@dataclass(frozen=True)
class Mode:
    sigma: float
    omega: float
    zeta: float
    freq_hz: float
    is_em: bool = False

    @property
    def eigenvalue(self) -> complex:
        return complex(self.sigma, self.omega)

    @property
    def is_complex(self) -> bool:
        return self.omega > 0


@dataclass(frozen=True)
class ModeSet:
    modes: list[Mode]
    zeta_threshold: float = ZETA_THRESHOLD
    min_em_zeta: float = field(init=False)

    def __post_init__(self):
        em = [m.zeta for m in self.modes if m.is_em]
        object.__setattr__(self, "min_em_zeta", min(em) if em else math.nan)

    @property
    def em_modes(self) -> list[Mode]:
        return [m for m in self.modes if m.is_em]

    def passes(self) -> bool:
        return self.min_em_zeta >= self.zeta_threshold


def eigenvalues(A) -> np.ndarray:
    """All eigenvalues of a dense real square matrix, with multiplicity."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    # LinAlgError on non-convergence propagates
    return np.linalg.eigvals(A)


def damping_ratio(sigma: float, omega: float) -> float:
    r = math.hypot(sigma, omega)
    if r == 0.0:
        raise ValueError("damping ratio undefined at the origin")
    return -sigma / r


def _mode(lam: complex) -> Mode:
    sigma, omega = float(lam.real), abs(float(lam.imag))
    if omega <= _IMAG_TOL * max(1.0, abs(sigma)):
        omega = 0.0
        zeta = 1.0 if sigma <= 0 else -1.0
    else:
        zeta = damping_ratio(sigma, omega)
    return Mode(sigma, omega, zeta, omega / (2 * math.pi))


def modes_from_eigenvalues(eigs) -> list[Mode]:
    """Collapse conjugate pairs to their ``omega >= 0`` member."""
    out = []
    for lam in sorted(eigs, key=lambda z: (z.real, z.imag)):
        m = _mode(lam)
        if m.omega > 0 and lam.imag < 0:
            continue
        out.append(m)
    return out


def participation_factors(A) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and normalized participation matrix (states x modes,
    each column summing to one)."""
    w, vl, vr = sla.eig(np.asarray(A, dtype=float), left=True, right=True)
    # scale left vectors so that vl^H vr = I
    scale = np.einsum("ij,ij->j", vl.conj(), vr)
    if np.any(np.abs(scale) < 1e-12 * np.linalg.norm(vl, axis=0) * np.linalg.norm(vr, axis=0)):
        raise np.linalg.LinAlgError("eigenvector basis is defective")
    p = np.abs(vl.conj() * vr / scale)
    return w, p / p.sum(axis=0, keepdims=True)


def _in_band(m: Mode) -> bool:
    lo, hi = EM_BAND_HZ
    return m.is_complex and lo <= m.freq_hz <= hi


def classify_em_modes(modes: list[Mode], A, labels) -> list[Mode]:
    """Flag electromechanical modes.

    A mode qualifies when it oscillates at 0.1-3 Hz and the rotor states
    (speed plus angle) participate either more than any other pair of
    states or by more than 0.2 in total.
    """
    labels = tuple(labels)
    try:
        rotor = [labels.index(s) for s in ROTOR_LABELS]
    except ValueError:
        rotor = []
    if not rotor:
        return [replace(m, is_em=_in_band(m)) for m in modes]
    try:
        w, p = participation_factors(A)
    except np.linalg.LinAlgError:
        warnings.warn("defective eigenvector basis; using frequency band only", RuntimeWarning)
        return [replace(m, is_em=_in_band(m)) for m in modes]

    others = [i for i in range(len(labels)) if i not in rotor]
    out = []
    for m in modes:
        if not _in_band(m):
            out.append(replace(m, is_em=False))
            continue
        k = int(np.argmin(np.abs(w - m.eigenvalue)))
        col = p[:, k]
        rotor_share = float(col[rotor].sum())
        top = np.sort(col[others])[::-1]
        best_pair = float(top[:2].sum())
        out.append(replace(m, is_em=rotor_share > best_pair or rotor_share > 0.2))
    return out


def analyze(model: StateSpaceModel, zeta_threshold: float = ZETA_THRESHOLD) -> ModeSet:
    modes = modes_from_eigenvalues(eigenvalues(model.A))
    return ModeSet(classify_em_modes(modes, model.A, model.labels), zeta_threshold)


def objective_from_modes(ms: ModeSet) -> float:
    if ms.em_modes:
        return ms.min_em_zeta
    complex_z = [m.zeta for m in ms.modes if m.is_complex]
    if complex_z:
        return min(complex_z)
    return min((m.zeta for m in ms.modes), default=-1.0)


def objective_j(model: StateSpaceModel) -> float:
    """Minimum damping ratio over electromechanical modes.

    With no electromechanical mode the minimum over all complex modes is
    used instead, and with no complex mode at all the minimum over the real
    ones (+1 when all decay, -1 if any grows).
    """
    return objective_from_modes(analyze(model))
