"""Physical parameters, coupling envelopes and interaction-picture Hamiltonians.

Units: hbar = 1, frequencies in units of the sideband spacing by default
(``omega = 1``), times in units of ``1/omega``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import reduce

import numpy as np

from .errors import ValidationError
from .hilbert import SidebandWindow, SubsystemLayout, ladder_b, pauli_ops, sideband_number, embed, Slot


EDGE_SLACK = 1e-12


class Shape(str, Enum):
    SQUARE = "square"
    RAISED_COSINE = "raised_cosine"
    GAUSSIAN = "gaussian"


class Generator(str, Enum):
    RWA = "rwa"
    FULL = "full"


@dataclass(frozen=True)
class PulseEnvelope:
    """Real coupling envelope supported on ``[0, duration]`` with fixed total area."""

    shape: Shape = Shape.SQUARE
    area: float = math.pi / 4
    duration: float = 10.0
    sigma_fraction: float = 0.15

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if not self.duration > 0:
            raise ValidationError(f"pulse duration must be positive, got {self.duration}")
        if not self.area >= 0:
            raise ValidationError(f"pulse area must be nonnegative, got {self.area}")
        if self.shape is Shape.GAUSSIAN and not self.sigma_fraction > 0:
            raise ValidationError("gaussian sigma_fraction must be positive")

    @property
    def _gauss(self):
        # amplitude and width of the truncated bell, rescaled to the exact area
        sigma = self.sigma_fraction * self.duration
        mass = sigma * math.sqrt(2 * math.pi) * math.erf(self.duration / (2 * math.sqrt(2) * sigma))
        return self.area / mass, sigma

    def value(self, t: float) -> float:
        T = self.duration
        # integrator stage times land on the pulse edges only up to round-off
        slack = EDGE_SLACK * T
        if t < -slack or t > T + slack:
            return 0.0
        t = min(max(t, 0.0), T)
        if self.shape is Shape.SQUARE:
            return self.area / T
        if self.shape is Shape.RAISED_COSINE:
            return self.area / T * (1.0 - math.cos(2 * math.pi * t / T))
        amp, sigma = self._gauss
        return amp * math.exp(-((t - T / 2) ** 2) / (2 * sigma**2))

    def accumulated(self, t: float) -> float:
        T = self.duration
        if t <= 0:
            return 0.0
        if t >= T:
            return self.area
        if self.shape is Shape.SQUARE:
            return self.area * t / T
        if self.shape is Shape.RAISED_COSINE:
            return self.area / T * (t - T / (2 * math.pi) * math.sin(2 * math.pi * t / T))
        amp, sigma = self._gauss
        r = math.sqrt(2) * sigma
        return amp * sigma * math.sqrt(math.pi / 2) * (math.erf((t - T / 2) / r) + math.erf(T / 2 / r))

    @property
    def peak(self) -> float:
        return self.value(self.duration / 2)


def envelope_value(env: PulseEnvelope, t: float) -> float:
    return env.value(t)


def pulse_area(env: PulseEnvelope, t: float) -> float:
    """Integrated coupling from 0 to ``t``."""
    return env.accumulated(t)


@dataclass(frozen=True)
class ProtocolParams:
    omega: float = 1.0
    omega0: float = 1.0
    envelope_A: PulseEnvelope = field(default_factory=PulseEnvelope)
    envelope_B: PulseEnvelope = field(default_factory=PulseEnvelope)
    alpha: float = 1 / math.sqrt(2)
    phi: float = 0.0
    window: SidebandWindow = field(default_factory=SidebandWindow)
    step_fraction: float = 0.02

    def __post_init__(self):
        if not self.omega > 0 or not self.omega0 > 0:
            raise ValidationError("omega and omega0 must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not math.isfinite(self.phi):
            raise ValidationError("phi must be finite")
        if not self.step_fraction > 0:
            raise ValidationError("step_fraction must be positive")

    @classmethod
    def symmetric(cls, shape=Shape.SQUARE, area=math.pi / 4, duration=10.0, sigma_fraction=0.15, **kw):
        env = PulseEnvelope(shape, area, duration, sigma_fraction)
        return cls(envelope_A=env, envelope_B=env, **kw)

    def with_(self, **kw) -> "ProtocolParams":
        return replace(self, **kw)

    @property
    def beta(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.alpha**2))

    @property
    def detuning(self) -> float:
        return self.omega - self.omega0

    @property
    def omega_plus(self) -> float:
        return self.omega + self.omega0

    @property
    def duration(self) -> float:
        return max(self.envelope_A.duration, self.envelope_B.duration)

    @property
    def g0_max(self) -> float:
        return max(self.envelope_A.peak, self.envelope_B.peak)

    def envelope(self, slot) -> PulseEnvelope:
        return self.envelope_A if Slot(slot) is Slot.A else self.envelope_B

    def step_size(self) -> float:
        """Largest RK4 step allowed: step_fraction over the fastest rate."""
        rate = max(self.omega_plus, self.g0_max, abs(self.detuning), 1.0 / self.duration)
        return self.step_fraction / rate


class ArmOperators:
    """Constant pieces of one electron-TLS arm generator on C^D (x) C^2."""

    def __init__(self, window: SidebandWindow):
        b = ladder_b(window)
        sp, sm, _ = pauli_ops()
        self.window = window
        self.dim = 2 * window.dim
        self.exchange_down = np.kron(b, sp)  # b s+, rotates at -Delta
        self.exchange_up = np.kron(b.conj().T, sm)  # b^dag s-, rotates at +Delta
        self.counter_down = np.kron(b, sm)  # b s-, rotates at -Omega_plus
        self.counter_up = np.kron(b.conj().T, sp)  # b^dag s+, rotates at +Omega_plus

    def generator(self, coupling: float, t: float, detuning: float, omega_plus: float, kind: Generator):
        if coupling == 0.0:
            return np.zeros((self.dim, self.dim), dtype=complex)
        ph = np.exp(-1j * detuning * t)
        h = ph * self.exchange_down + ph.conjugate() * self.exchange_up
        if Generator(kind) is Generator.FULL:
            pp = np.exp(-1j * omega_plus * t)
            h = h + pp * self.counter_down + pp.conjugate() * self.counter_up
        return coupling * h


def arm_hamiltonian(p: ProtocolParams, slot, t: float, kind=Generator.FULL, ops: ArmOperators | None = None):
    """Single-arm interaction-picture generator on (electron of ``slot``) x (its TLS)."""
    ops = ops or ArmOperators(p.window)
    return ops.generator(p.envelope(slot).value(t), t, p.detuning, p.omega_plus, kind)


def _joint_from_arms(p: ProtocolParams, t: float, kind) -> np.ndarray:
    ops = ArmOperators(p.window)
    d = p.window.dim
    hA = arm_hamiltonian(p, Slot.A, t, kind, ops).reshape(d, 2, d, 2)
    hB = arm_hamiltonian(p, Slot.B, t, kind, ops).reshape(d, 2, d, 2)
    eye_d, eye_2 = np.eye(d), np.eye(2)
    # arm matrices are indexed (row sideband, row level, col sideband, col level);
    # the flat layout orders each side as (a, b, s1, s2)
    full = np.einsum("asAS,bB,tT->abstABST", hA, eye_d, eye_2)
    full = full + np.einsum("btBT,aA,sS->abstABST", hB, eye_d, eye_2)
    n = d * d * 4
    return full.reshape(n, n)


def hamiltonian_full_interaction_picture(p: ProtocolParams, t: float) -> np.ndarray:
    """Dense bilinear generator with both co- and counter-rotating terms."""
    return _joint_from_arms(p, t, Generator.FULL)


def hamiltonian_rwa_interaction_picture(p: ProtocolParams, t: float) -> np.ndarray:
    """Dense exchange-only generator, detuned terms rotating at ``omega - omega0``."""
    return _joint_from_arms(p, t, Generator.RWA)


def excitation_number(window: SidebandWindow) -> np.ndarray:
    """n_A + n_B + (sz_1 + sz_2)/2, conserved by the exchange generator."""
    layout = SubsystemLayout.four_partite(window)
    n = sideband_number(window)
    _, _, sz = pauli_ops()
    return (
        embed(n, Slot.A, layout)
        + embed(n, Slot.B, layout)
        + 0.5 * (embed(sz, Slot.TLS1, layout) + embed(sz, Slot.TLS2, layout))
    )
