"""Concurrence, negativity, heralding and target-manifold diagnostics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NotXState, WeightTooSmall
from .hilbert import (
    E,
    G,
    DensityMatrix,
    JointPureState,
    SidebandWindow,
    Slot,
    SubsystemLayout,
    partial_trace,
    partial_transpose,
)
from .linalg import hermitian_eigvals, matrix_sqrt_psd, trace_norm_hermitian

log = logging.getLogger(__name__)

X_TOL = 1e-8
WEIGHT_MIN = 1e-12
# sidebands whose marginal population is below this are dropped before the
# partial-transpose spectrum is taken; exact for exchange-only states
SUPPORT_TOL = 1e-26

SQRT3_AREA = math.asin(1 / math.sqrt(3))

# TLS-pair basis order in the [TLS1, TLS2] layout with g = 0, e = 1
GG, GE, EG, EE = 0, 1, 2, 3
_X_MASK = np.zeros((4, 4), dtype=bool)
_X_MASK[np.diag_indices(4)] = True
_X_MASK[GE, EG] = _X_MASK[EG, GE] = _X_MASK[GG, EE] = _X_MASK[EE, GG] = True


class Outcome(str, Enum):
    GG = "gg"
    GE = "ge"
    EG = "eg"
    EE = "ee"

    @property
    def levels(self) -> tuple:
        return tuple(G if c == "g" else E for c in self.value)


class Sign(str, Enum):
    PLUS = "plus"
    MINUS = "minus"

    @property
    def offset(self) -> int:
        return 1 if self is Sign.PLUS else -1


def _matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def is_x_state(rho, tol: float = X_TOL) -> bool:
    m = _matrix(rho)
    return m.shape == (4, 4) and bool(np.all(np.abs(m[~_X_MASK]) < tol))


def concurrence_x_state(rho) -> float:
    """Concurrence of a two-qubit X state from its populations and coherences.

    Both anti-diagonal coherences are used; with no gg-ee coherence this is
    2 max(0, |rho_eg,ge| - sqrt(rho_gg,gg rho_ee,ee)).
    """
    m = _matrix(rho)
    if m.shape != (4, 4):
        raise NotXState(f"expected a 4x4 two-qubit matrix, got {m.shape}")
    if not is_x_state(m):
        raise NotXState(f"entries outside the X pattern reach {np.max(np.abs(m[~_X_MASK])):.3e}")
    p = np.clip(np.diag(m).real, 0.0, None)
    single = abs(m[EG, GE]) - math.sqrt(p[GG] * p[EE])
    double = abs(m[GG, EE]) - math.sqrt(p[GE] * p[EG])
    return 2.0 * max(0.0, single, double)


_SYSY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence_wootters(rho) -> float:
    """Wootters concurrence via the Hermitian product sqrt(rho) rho~ sqrt(rho)."""
    m = _matrix(rho)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 two-qubit matrix, got {m.shape}")
    flipped = _SYSY @ m.conj() @ _SYSY
    root = matrix_sqrt_psd(m)
    r = root @ flipped @ root
    lam = np.sqrt(np.clip(hermitian_eigvals(0.5 * (r + r.conj().T)), 0.0, None))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence(rho) -> float:
    """X-state formula when applicable, otherwise Wootters (logged)."""
    if is_x_state(rho):
        return concurrence_x_state(rho)
    log.warning("TLS state is not X-shaped; using the Wootters concurrence")
    return concurrence_wootters(rho)


def closed_form_C12(g_t: float) -> float:
    c2, s2 = math.cos(g_t) ** 2, math.sin(g_t) ** 2
    return max(0.0, c2 * c2 - 2.0 * s2 * c2)


def closed_form_Pgg(g_t: float) -> float:
    return (math.sin(g_t) * math.cos(g_t)) ** 2


def transfer_law(alpha: float) -> float:
    """Heralded log-negativity as a function of the resource amplitude alpha."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return math.log2(1.0 + 2.0 * alpha * math.sqrt(max(0.0, 1.0 - alpha * alpha)))


def tls_xstate_benchmark(g_t: float) -> np.ndarray:
    """Closed-form TLS-pair reduced state of the resonant Bell-resource run."""
    c2, s2 = math.cos(g_t) ** 2, math.sin(g_t) ** 2
    m = np.zeros((4, 4), dtype=complex)
    m[GG, GG] = m[EE, EE] = s2 * c2
    m[EG, EG] = m[GE, GE] = 0.5 * (c2 * c2 + s2 * s2)
    m[EG, GE] = m[GE, EG] = 0.5 * c2 * c2
    return m


def sudden_death_time(g: float, T: float) -> float | None:
    """First time the resonant square-pulse concurrence hits zero, if within the pulse."""
    if not (g > 0 and T > 0):
        raise ValueError("pulse area and duration must be positive")
    t = SQRT3_AREA / (g / T)
    return t if t <= T * (1 + 1e-12) else None


def _support(rho: np.ndarray, dims: tuple, tol: float) -> tuple:
    """Per-subsystem index sets whose marginal population exceeds ``tol``."""
    diag = np.diag(rho).real.reshape(dims)
    keep = []
    for ax in range(len(dims)):
        marg = diag.sum(axis=tuple(i for i in range(len(dims)) if i != ax))
        idx = np.flatnonzero(marg > tol)
        keep.append(idx if idx.size else np.arange(dims[ax]))
    return tuple(keep)


def log_negativity(rho, cut_slot=Slot.B, layout: SubsystemLayout | None = None, support_tol: float = SUPPORT_TOL) -> float:
    """log2 of the trace norm of the partial transpose on ``cut_slot``."""
    if isinstance(rho, DensityMatrix):
        layout, m = rho.layout, rho.matrix
    else:
        m = np.asarray(rho, dtype=complex)
    if layout is None:
        raise ValueError("raw arrays need an explicit layout")
    if support_tol > 0 and layout.flat_dim > 16:
        keep = _support(m, layout.dims, support_tol)
        if any(k.size < d for k, d in zip(keep, layout.dims)):
            flat = np.ravel_multi_index(np.meshgrid(*keep, indexing="ij"), layout.dims).reshape(-1)
            m = m[np.ix_(flat, flat)]
            layout = SubsystemLayout(tuple(k.size for k in keep), layout.labels)
    pt = partial_transpose(m, cut_slot, layout)
    return max(0.0, math.log2(trace_norm_hermitian(0.5 * (pt + pt.conj().T))))


@dataclass
class HeraldOutcome:
    tls_outcome: Outcome
    probability: float
    conditional_state: np.ndarray | None  # normalized flat electron-pair amplitudes (A, B)
    empty: bool = False


def herald(psi: JointPureState, outcome) -> HeraldOutcome:
    """Project both TLSs on ``outcome`` and renormalize the electron pair."""
    outcome = Outcome(outcome)
    s1, s2 = outcome.levels
    branch = psi.tensor()[:, :, s1, s2].reshape(-1)
    prob = float(np.vdot(branch, branch).real)
    if prob <= 0.0:
        return HeraldOutcome(outcome, 0.0, None, empty=True)
    return HeraldOutcome(outcome, prob, branch / math.sqrt(prob))


def electron_pair_layout(window: SidebandWindow) -> SubsystemLayout:
    return SubsystemLayout((window.dim, window.dim), (Slot.A, Slot.B))


def electron_bell(window: SidebandWindow, sign=Sign.PLUS) -> np.ndarray:
    """(|+-0> + |0+->)/sqrt 2 on the electron pair, flat (A, B) ordering."""
    o = Sign(sign).offset
    d, n0 = window.dim, window.n0
    v = np.zeros((d, d), dtype=complex)
    v[window.index(n0 + o), window.index(n0)] = v[window.index(n0), window.index(n0 + o)] = 1 / math.sqrt(2)
    return v.reshape(-1)


def manifold_indices(window: SidebandWindow, sign) -> tuple:
    """Flat (A, B) indices of |sign 0> and |0 sign>."""
    o = Sign(sign).offset
    d, n0 = window.dim, window.n0
    return (
        window.index(n0 + o) * d + window.index(n0),
        window.index(n0) * d + window.index(n0 + o),
    )


def qubit_log_negativity(rho2: np.ndarray) -> float:
    """Restricted-manifold log-negativity under |s0> -> |1>_A|0>_B, |0s> -> |0>_A|1>_B."""
    embedded = np.zeros((4, 4), dtype=complex)
    idx = [2, 1]  # |10>, |01> in the two-qubit basis
    embedded[np.ix_(idx, idx)] = rho2
    two_qubits = SubsystemLayout((2, 2), (Slot.A, Slot.B))
    pt = partial_transpose(embedded, Slot.B, two_qubits)
    return max(0.0, math.log2(trace_norm_hermitian(pt)))


@dataclass
class ManifoldReport:
    sign: Sign
    weight: float
    restricted_state: np.ndarray  # 2x2 in the basis [|s0>, |0s>]
    log_negativity: float


def manifold_report(rho_ab, sign, window: SidebandWindow) -> ManifoldReport:
    m = _matrix(rho_ab)
    idx = list(manifold_indices(window, sign))
    block = m[np.ix_(idx, idx)]
    w2 = float(np.trace(block).real)
    if w2 < WEIGHT_MIN:
        raise WeightTooSmall(f"target-manifold weight {w2:.3e} below {WEIGHT_MIN:.0e}")
    rho2 = block / w2
    return ManifoldReport(Sign(sign), w2, rho2, qubit_log_negativity(rho2))


def manifold_weight(rho_ab, sign, window: SidebandWindow) -> float:
    m = _matrix(rho_ab)
    i, j = manifold_indices(window, sign)
    return float(m[i, i].real + m[j, j].real)


def tls_reduced(psi: JointPureState) -> DensityMatrix:
    return partial_trace(psi, (Slot.TLS1, Slot.TLS2))


def electron_reduced(psi: JointPureState) -> DensityMatrix:
    return partial_trace(psi, (Slot.A, Slot.B))


def expected_restricted_state(alpha: float, phi: float, sign=Sign.PLUS) -> np.ndarray:
    """Heralded 2x2 electron state for the resource alpha|eg> + beta e^{i phi}|ge>.

    The plus branch carries alpha on |+0>; the minus branch swaps the roles, so
    |-0> carries beta e^{i phi}.
    """
    beta = math.sqrt(max(0.0, 1 - alpha * alpha))
    if Sign(sign) is Sign.PLUS:
        v = np.array([alpha, beta * np.exp(1j * phi)])
    else:
        v = np.array([beta * np.exp(1j * phi), alpha])
    return np.outer(v, v.conj())
