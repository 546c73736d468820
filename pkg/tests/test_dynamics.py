import math

import numpy as np
import pytest

from sideband_entangler.dynamics import (
    arm_ket,
    arm_propagator,
    closed_form_four_partite,
    closed_form_rwa_apply,
    evolve,
    excitation_expectation,
    factorized_propagate,
    fidelity,
    final_state_factorized,
    from_flat,
    initial_state,
    to_flat,
)
from sideband_entangler.errors import EdgeSupport, NormDrift, OffResonance
from sideband_entangler.hilbert import E, G, SidebandWindow, Slot
from sideband_entangler.linalg import rk4_step
from sideband_entangler.model import (
    Generator,
    ProtocolParams,
    Shape,
    excitation_number,
    hamiltonian_full_interaction_picture,
)

SMALL = SidebandWindow(-3, 3, 0)


def test_flat_conversion_roundtrip():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(14, 14)) + 0j
    assert np.array_equal(from_flat(to_flat(x, 7), 7), x)


def test_initial_state_is_the_resource():
    p = ProtocolParams(alpha=0.6, phi=0.4, window=SMALL)
    psi = initial_state(p).tensor()
    assert psi[3, 3, E, G] == pytest.approx(0.6)
    assert psi[3, 3, G, E] == pytest.approx(0.8 * np.exp(0.4j))
    assert initial_state(p).norm == pytest.approx(1.0)


@pytest.mark.parametrize("delta", [0.0, 0.05, -0.12])
def test_single_arm_detuned_rabi_oracle(delta):
    """|n0,e> <-> |n0+1,g> two-level Rabi problem under a square pulse."""
    p = ProtocolParams.symmetric(window=SMALL, omega0=1.0 - delta, area=1.1, duration=10.0)
    g0 = p.envelope_A.peak
    start = arm_ket(SMALL, 0, E)[:, None]
    for t in (2.0, 5.5, 10.0):
        u = arm_propagator(p, Slot.A, Generator.RWA, t, columns=start)[:, 0]
        rabi = math.sqrt(g0**2 + delta**2 / 4)
        expect = (g0 / rabi) ** 2 * math.sin(rabi * t) ** 2
        assert abs(u[2 * SMALL.index(1) + G]) ** 2 == pytest.approx(expect, abs=1e-10)


def test_resonant_map_closed_form():
    w = SMALL
    out = closed_form_rwa_apply(w, 0.3, arm_ket(w, 0, G))
    assert out[2 * w.index(0) + G] == pytest.approx(math.cos(0.3))
    assert out[2 * w.index(-1) + E] == pytest.approx(-1j * math.sin(0.3))
    with pytest.raises(EdgeSupport):
        closed_form_rwa_apply(w, 0.3, arm_ket(w, 3, G))


def test_closed_form_needs_resonance():
    with pytest.raises(OffResonance):
        closed_form_four_partite(ProtocolParams(omega0=0.9), 1.0)


def test_rwa_numerics_match_closed_form_with_unequal_arms():
    p = ProtocolParams.symmetric(window=SMALL, alpha=0.3, phi=1.0)
    p = p.with_(envelope_B=p.envelope_B.__class__(Shape.RAISED_COSINE, 0.5, 8.0))
    traj = evolve(p, Generator.RWA, 21)
    for k, t in enumerate(traj.times):
        assert np.max(np.abs(traj.states[k] - closed_form_four_partite(p, t).amplitudes)) < 1e-9


def test_arm_major_evolution_matches_dense_generator():
    p = ProtocolParams.symmetric(window=SMALL, area=0.8, duration=4.0, omega0=0.9, alpha=0.7, phi=0.3)
    traj = evolve(p, Generator.FULL, 2)
    psi = initial_state(p).amplitudes
    n = 800
    h = p.duration / n
    for k in range(n):
        psi = rk4_step(lambda t, v: -1j * (hamiltonian_full_interaction_picture(p, t) @ v), psi, k * h, h)
    assert np.max(np.abs(psi - traj.states[-1])) < 1e-9


def test_factorized_matches_joint_full_evolution():
    p = ProtocolParams.symmetric(window=SMALL, alpha=0.4, phi=2.0)
    joint = evolve(p, Generator.FULL, 2).states[-1]
    assert 1 - fidelity(joint, factorized_propagate(p, Generator.FULL)) < 1e-10
    assert np.max(np.abs(joint - final_state_factorized(p, Generator.FULL))) < 1e-9


def test_arm_propagator_is_unitary():
    p = ProtocolParams.symmetric(window=SidebandWindow(-6, 6, 0))
    u = arm_propagator(p, Slot.A, Generator.FULL)
    # columns started away from the truncated edges stay orthonormal
    cols = u[:, 6:20]
    assert np.allclose(cols.conj().T @ cols, np.eye(14), atol=1e-8)


def test_norm_drift_guard():
    p = ProtocolParams.symmetric(window=SMALL, area=60.0, duration=10.0, step_fraction=2.0)
    with pytest.raises(NormDrift):
        evolve(p, Generator.RWA, 5)


def test_rwa_conserves_excitation_number_and_full_does_not():
    p = ProtocolParams.symmetric(window=SMALL, area=1.0, duration=3.0)
    n = np.diag(excitation_number(SMALL)).real
    rwa = evolve(p, Generator.RWA, 11)
    full = evolve(p, Generator.FULL, 11)
    assert np.ptp([excitation_expectation(s, p.window) for s in rwa.states]) < 1e-12
    # the initial resource sits entirely in the N = 0 sector
    off_sector = lambda s: float(np.sum(np.abs(s[n != 0]) ** 2))  # noqa: E731
    assert max(off_sector(s) for s in rwa.states) < 1e-24
    assert off_sector(full.states[-1]) > 1e-4


def test_default_window_leakage_and_drift_are_tiny():
    p = ProtocolParams()
    traj = evolve(p, Generator.FULL, 21)
    assert traj.edge_leakage.max() < 1e-20
    assert traj.norm_drift.max() < 1e-10
    assert not traj.leakage_alarm


def test_narrow_window_raises_leakage_alarm():
    p = ProtocolParams.symmetric(window=SidebandWindow(-2, 2, 0), area=1.5)
    traj = evolve(p, Generator.FULL, 11)
    assert traj.leakage_alarm
