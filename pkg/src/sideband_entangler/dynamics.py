"""Time evolution of the electron-pair / TLS-pair state.

Internally a joint state is held "arm-major" as a ``(2D, 2D)`` matrix
``X[(a, s1), (b, s2)] = psi[a, b, s1, s2]`` so that the two arm generators act
as ``H_A @ X + X @ H_B.T``. Public results use the flat ``[A, B, TLS1, TLS2]``
ordering of :mod:`hilbert`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import EdgeSupport, NormDrift, OffResonance
from .hilbert import E, G, JointPureState, SidebandWindow, Slot, SubsystemLayout
from .linalg import rk4_step
from .model import ArmOperators, Generator, ProtocolParams

log = logging.getLogger(__name__)

NORM_DRIFT_LIMIT = 1e-5
LEAKAGE_ALARM = 1e-6


def to_flat(x: np.ndarray, d: int) -> np.ndarray:
    return x.reshape(d, 2, d, 2).transpose(0, 2, 1, 3).reshape(-1)


def from_flat(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, 2, 2).transpose(0, 2, 1, 3).reshape(2 * d, 2 * d)


def arm_ket(window: SidebandWindow, n: int, s: int) -> np.ndarray:
    v = np.zeros(2 * window.dim, dtype=complex)
    v[2 * window.index(n) + s] = 1.0
    return v


def initial_arm_matrix(p: ProtocolParams) -> np.ndarray:
    """|n0, n0> (x) (alpha|eg> + beta e^{i phi}|ge>) in arm-major form."""
    w = p.window
    e_, g_ = arm_ket(w, w.n0, E), arm_ket(w, w.n0, G)
    return p.alpha * np.outer(e_, g_) + p.beta * np.exp(1j * p.phi) * np.outer(g_, e_)


def initial_state(p: ProtocolParams) -> JointPureState:
    return JointPureState(SubsystemLayout.four_partite(p.window), to_flat(initial_arm_matrix(p), p.window.dim))


def closed_form_rwa_apply(window: SidebandWindow, g_t: float, psi: np.ndarray) -> np.ndarray:
    """Resonant exchange rotation by area ``g_t`` on one arm (index ``2*i + s``).

    |n,g> -> cos g |n,g> - i sin g |n-1,e>,  |n,e> -> cos g |n,e> - i sin g |n+1,g>.
    """
    psi = np.asarray(psi, dtype=complex).reshape(window.dim, 2)
    if np.any(psi[0] != 0) or np.any(psi[-1] != 0):
        raise EdgeSupport("closed-form map needs zero amplitude on the edge sidebands")
    c, s = math.cos(g_t), math.sin(g_t)
    out = c * psi
    out[:-1, E] += -1j * s * psi[1:, G]
    out[1:, G] += -1j * s * psi[:-1, E]
    return out.reshape(-1)


def closed_form_four_partite(p: ProtocolParams, t: float) -> JointPureState:
    """Exact resonant exchange-only state at time ``t`` (each arm rotated by its own area)."""
    if p.detuning != 0:
        raise OffResonance(f"closed form needs omega == omega0 (detuning {p.detuning})")
    w = p.window
    gA, gB = p.envelope_A.accumulated(t), p.envelope_B.accumulated(t)
    a_e = closed_form_rwa_apply(w, gA, arm_ket(w, w.n0, E))
    a_g = closed_form_rwa_apply(w, gA, arm_ket(w, w.n0, G))
    b_e = closed_form_rwa_apply(w, gB, arm_ket(w, w.n0, E))
    b_g = closed_form_rwa_apply(w, gB, arm_ket(w, w.n0, G))
    x = p.alpha * np.outer(a_e, b_g) + p.beta * np.exp(1j * p.phi) * np.outer(a_g, b_e)
    return JointPureState(SubsystemLayout.four_partite(w), to_flat(x, w.dim))


def edge_population(x: np.ndarray, d: int) -> float:
    """Population on the boundary sidebands of either electron."""
    pop = np.abs(x.reshape(d, 2, d, 2)) ** 2
    edge_a = pop[[0, -1]].sum()
    edge_b = pop[:, :, [0, -1]].sum()
    both = pop[[0, -1]][:, :, [0, -1]].sum()
    return float(edge_a + edge_b - both)


@dataclass
class Trajectory:
    layout: SubsystemLayout
    times: np.ndarray
    states: np.ndarray  # (samples, flat_dim)
    edge_leakage: np.ndarray
    norm_drift: np.ndarray
    step: float
    generator: Generator

    def state(self, i: int) -> JointPureState:
        return JointPureState(self.layout, self.states[i])

    @property
    def leakage_alarm(self) -> bool:
        return bool(np.max(self.edge_leakage) > LEAKAGE_ALARM)


def _steps_per_interval(interval: float, h_max: float) -> int:
    return max(1, math.ceil(interval / h_max - 1e-9))


class _JointDeriv:
    def __init__(self, p: ProtocolParams, kind: Generator):
        self.ops = ArmOperators(p.window)
        self.p, self.kind = p, Generator(kind)

    def arm(self, slot, t):
        p = self.p
        return self.ops.generator(p.envelope(slot).value(t), t, p.detuning, p.omega_plus, self.kind)

    def __call__(self, t, x):
        return -1j * (self.arm(Slot.A, t) @ x + x @ self.arm(Slot.B, t).T)


def evolve(
    p: ProtocolParams,
    generator=Generator.RWA,
    samples: int = 400,
    step_fraction: float | None = None,
    check_norm: bool = True,
) -> Trajectory:
    """Fixed-step RK4 integration over ``[0, T]`` sampled on a uniform grid.

    The step is the largest ``h <= step_fraction / max(Omega+, G0, |Delta|, 1/T)``
    that divides the sample spacing. The state is never renormalized.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    if step_fraction is not None:
        p = p.with_(step_fraction=step_fraction)
    d = p.window.dim
    T = p.duration
    times = np.linspace(0.0, T, samples)
    n_sub = _steps_per_interval(times[1] - times[0], p.step_size())
    deriv = _JointDeriv(p, generator)

    x = initial_arm_matrix(p)
    states = np.empty((samples, d * d * 4), dtype=complex)
    leak = np.empty(samples)
    drift = np.empty(samples)
    h = 0.0
    for k, t_k in enumerate(times):
        if k > 0:
            t0 = times[k - 1]
            h = (t_k - t0) / n_sub
            for j in range(n_sub):
                x = rk4_step(deriv, x, t0 + j * h, h)
        states[k] = to_flat(x, d)
        leak[k] = edge_population(x, d)
        drift[k] = abs(np.linalg.norm(x) - 1.0)
        if check_norm and drift[k] > NORM_DRIFT_LIMIT:
            raise NormDrift(f"norm drift {drift[k]:.3e} at t = {t_k:.6g}")

    traj = Trajectory(SubsystemLayout.four_partite(p.window), times, states, leak, drift, h, Generator(generator))
    if traj.leakage_alarm:
        log.warning("edge leakage %.3e exceeds %.0e; widen the sideband window", leak.max(), LEAKAGE_ALARM)
    return traj


def arm_propagator(
    p: ProtocolParams,
    slot,
    generator=Generator.FULL,
    t: float | None = None,
    columns: np.ndarray | None = None,
) -> np.ndarray:
    """Single-arm propagator U(t) on C^D (x) C^2 by RK4 on matrices.

    ``columns`` (shape ``(2D, k)``) restricts the evolution to selected initial
    states; the default is the identity, i.e. the full propagator.
    """
    t = p.duration if t is None else t
    ops = ArmOperators(p.window)
    env = p.envelope(slot)
    kind = Generator(generator)
    u = np.eye(ops.dim, dtype=complex) if columns is None else np.array(columns, dtype=complex)
    if t <= 0:
        return u
    n = _steps_per_interval(t, p.step_size())
    h = t / n

    def deriv(tt, m):
        return -1j * (ops.generator(env.value(tt), tt, p.detuning, p.omega_plus, kind) @ m)

    for j in range(n):
        u = rk4_step(deriv, u, j * h, h)
    return u


def factorized_propagate(p: ProtocolParams, generator=Generator.FULL, t: float | None = None) -> JointPureState:
    """Joint state from the tensor product of independently integrated arm propagators."""
    uA = arm_propagator(p, Slot.A, generator, t)
    uB = uA if p.envelope_A == p.envelope_B else arm_propagator(p, Slot.B, generator, t)
    x = uA @ initial_arm_matrix(p) @ uB.T
    return JointPureState(SubsystemLayout.four_partite(p.window), to_flat(x, p.window.dim))


def final_state_factorized(p: ProtocolParams, generator=Generator.FULL) -> np.ndarray:
    """Final flat state, evolving only the two arm columns the resource occupies."""
    w = p.window
    cols = np.stack([arm_ket(w, w.n0, G), arm_ket(w, w.n0, E)], axis=1)
    vA = arm_propagator(p, Slot.A, generator, columns=cols)
    vB = vA if p.envelope_A == p.envelope_B else arm_propagator(p, Slot.B, generator, columns=cols)
    x = p.alpha * np.outer(vA[:, 1], vB[:, 0]) + p.beta * np.exp(1j * p.phi) * np.outer(vA[:, 0], vB[:, 1])
    return to_flat(x, w.dim)


def fidelity(a, b) -> float:
    """|<a|b>|^2 for pure states given as vectors or JointPureState."""
    va = a.amplitudes if isinstance(a, JointPureState) else np.asarray(a)
    vb = b.amplitudes if isinstance(b, JointPureState) else np.asarray(b)
    return float(abs(np.vdot(va, vb)) ** 2)


def excitation_expectation(flat: np.ndarray, window: SidebandWindow) -> float:
    """<n_A + n_B + (sz_1 + sz_2)/2> of a flat joint state."""
    d = window.dim
    pop = np.abs(np.asarray(flat).reshape(d, d, 2, 2)) ** 2
    n = window.sidebands.astype(float)
    half = np.array([-0.5, 0.5])
    total = n[:, None, None, None] + n[None, :, None, None] + half[None, None, :, None] + half[None, None, None, :]
    return float(np.sum(pop * total))
