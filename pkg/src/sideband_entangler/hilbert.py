"""Truncated four-partite Hilbert space: electron A, electron B, TLS 1, TLS 2.

Ordering is fixed as ``[A, B, TLS1, TLS2]`` with the last label fastest, the
TLS basis is ``[g, e]`` and every electron ladder is ascending in ``n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyKeepSet,
    IndexOutOfRange,
    UnknownSlot,
    ValidationError,
)

G, E = 0, 1


class Slot(str, Enum):
    A = "A"
    B = "B"
    TLS1 = "TLS1"
    TLS2 = "TLS2"

    def __str__(self) -> str:
        return self.value


def _slot(label) -> Slot:
    try:
        return Slot(label)
    except ValueError:
        raise UnknownSlot(f"unknown subsystem label {label!r}") from None


@dataclass(frozen=True)
class SidebandWindow:
    """Electron ladder ``n_min..n_max`` around the reference sideband ``n0``."""

    n_min: int = -10
    n_max: int = 10
    n0: int = 0

    def __post_init__(self):
        if self.n_min > self.n0 - 2 or self.n_max < self.n0 + 2:
            raise ValidationError(
                f"window [{self.n_min}, {self.n_max}] must contain n0 +/- 2 (n0 = {self.n0})"
            )

    @classmethod
    def around(cls, n0: int = 0, half_width: int = 10) -> "SidebandWindow":
        return cls(n0 - half_width, n0 + half_width, n0)

    @property
    def dim(self) -> int:
        return self.n_max - self.n_min + 1

    @property
    def sidebands(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def index(self, n: int) -> int:
        if not self.n_min <= n <= self.n_max:
            raise IndexOutOfRange(f"sideband {n} outside [{self.n_min}, {self.n_max}]")
        return n - self.n_min

    def ket(self, n: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(n)] = 1.0
        return v


@dataclass(frozen=True)
class SubsystemLayout:
    dims: tuple
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "labels", tuple(_slot(s) for s in self.labels))
        if len(self.dims) != len(self.labels) or len(set(self.labels)) != len(self.labels):
            raise DimensionMismatch("dims and labels must pair one-to-one without repeats")
        if any(d < 1 for d in self.dims):
            raise DimensionMismatch(f"non-positive subsystem dimension in {self.dims}")

    @classmethod
    def four_partite(cls, window: SidebandWindow) -> "SubsystemLayout":
        d = window.dim
        return cls((d, d, 2, 2), (Slot.A, Slot.B, Slot.TLS1, Slot.TLS2))

    @property
    def flat_dim(self) -> int:
        return int(np.prod(self.dims))

    def position(self, label) -> int:
        s = _slot(label)
        if s not in self.labels:
            raise UnknownSlot(f"{s} not in layout {[str(x) for x in self.labels]}")
        return self.labels.index(s)

    def restrict(self, keep: Iterable) -> "SubsystemLayout":
        keep = {_slot(k) for k in keep}
        pairs = [(d, s) for d, s in zip(self.dims, self.labels) if s in keep]
        return SubsystemLayout(tuple(d for d, _ in pairs), tuple(s for _, s in pairs))


def flat_index(layout: SubsystemLayout, multi: Sequence[int]) -> int:
    """Mixed-radix index, last subsystem fastest."""
    if len(multi) != len(layout.dims):
        raise IndexOutOfRange(f"expected {len(layout.dims)} indices, got {len(multi)}")
    idx = 0
    for i, d in zip(multi, layout.dims):
        if not 0 <= i < d:
            raise IndexOutOfRange(f"index {i} outside [0, {d})")
        idx = idx * d + int(i)
    return idx


def unflat_index(layout: SubsystemLayout, idx: int) -> tuple:
    if not 0 <= idx < layout.flat_dim:
        raise IndexOutOfRange(f"flat index {idx} outside [0, {layout.flat_dim})")
    out = []
    for d in reversed(layout.dims):
        idx, r = divmod(idx, d)
        out.append(r)
    return tuple(reversed(out))


@dataclass
class JointPureState:
    layout: SubsystemLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != self.layout.flat_dim:
            raise DimensionMismatch(
                f"{self.amplitudes.size} amplitudes for flat dimension {self.layout.flat_dim}"
            )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)


@dataclass
class DensityMatrix:
    layout: SubsystemLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        n = self.layout.flat_dim
        if self.matrix.shape != (n, n):
            raise DimensionMismatch(f"matrix shape {self.matrix.shape} for flat dimension {n}")

    def validate(self, trace_tol: float = 1e-8, herm_tol: float = 1e-10, psd_tol: float = 1e-8):
        """Raise ``ValidationError`` unless Hermitian, unit trace and PSD."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > herm_tol:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > trace_tol:
            raise ValidationError(f"trace {np.trace(m).real:.12g} != 1")
        wmin = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if wmin < -psd_tol:
            raise ValidationError(f"minimum eigenvalue {wmin:.3e} is negative")
        return self


def ladder_b(window: SidebandWindow) -> np.ndarray:
    """Lowering operator b|n> = |n-1>; the bottom sideband maps to zero."""
    return np.eye(window.dim, k=1, dtype=complex)


def sideband_number(window: SidebandWindow) -> np.ndarray:
    return np.diag(window.sidebands.astype(complex))


def pauli_ops() -> tuple:
    """(sigma_plus, sigma_minus, sigma_z) in the basis [g, e]."""
    sp = np.array([[0, 0], [1, 0]], dtype=complex)
    sz = np.diag([-1.0, 1.0]).astype(complex)
    return sp, sp.T.copy(), sz


def embed(op, slot, layout: SubsystemLayout) -> np.ndarray:
    """``op`` on ``slot`` tensored with identities elsewhere."""
    op = np.asarray(op, dtype=complex)
    pos = layout.position(slot)
    if op.shape != (layout.dims[pos],) * 2:
        raise DimensionMismatch(
            f"operator shape {op.shape} does not fit slot {slot} of dimension {layout.dims[pos]}"
        )
    factors = [op if i == pos else np.eye(d) for i, d in enumerate(layout.dims)]
    return reduce(np.kron, factors)


def partial_trace(state, keep, layout: SubsystemLayout | None = None) -> DensityMatrix:
    """Reduced density matrix on ``keep`` (kept slots stay in layout order).

    ``state`` is a ``JointPureState``, a ``DensityMatrix`` or a raw vector /
    matrix together with ``layout``.
    """
    if isinstance(state, (JointPureState, DensityMatrix)):
        layout = state.layout
        data = state.amplitudes if isinstance(state, JointPureState) else state.matrix
    else:
        if layout is None:
            raise DimensionMismatch("raw arrays need an explicit layout")
        data = np.asarray(state, dtype=complex)
    keep_set = {_slot(k) for k in keep}
    if not keep_set:
        raise EmptyKeepSet("keep set is empty")
    for k in keep_set:
        layout.position(k)
    kept = [i for i, s in enumerate(layout.labels) if s in keep_set]
    traced = [i for i in range(len(layout.dims)) if i not in kept]
    out_layout = layout.restrict(keep_set)
    dk = out_layout.flat_dim

    if data.ndim == 1:
        t = data.reshape(layout.dims).transpose(kept + traced).reshape(dk, -1)
        rho = t @ t.conj().T
    else:
        n = len(layout.dims)
        t = data.reshape(layout.dims + layout.dims)
        letters = "abcdefghijklmnopqrstuvwxyz"
        row = [letters[i] for i in range(n)]
        col = [letters[n + i] if i in kept else letters[i] for i in range(n)]
        out = "".join(row[i] for i in kept) + "".join(col[i] for i in kept)
        rho = np.einsum("".join(row) + "".join(col) + "->" + out, t).reshape(dk, dk)
    return DensityMatrix(out_layout, rho)


def partial_transpose(rho, slot, layout: SubsystemLayout | None = None) -> np.ndarray:
    """Transpose of the ``slot`` factor of a density matrix."""
    if isinstance(rho, DensityMatrix):
        layout, m = rho.layout, rho.matrix
    else:
        if layout is None:
            raise DimensionMismatch("raw arrays need an explicit layout")
        m = np.asarray(rho, dtype=complex)
    pos = layout.position(slot)
    n = len(layout.dims)
    axes = list(range(2 * n))
    axes[pos], axes[n + pos] = axes[n + pos], axes[pos]
    size = layout.flat_dim
    return m.reshape(layout.dims + layout.dims).transpose(axes).reshape(size, size)
