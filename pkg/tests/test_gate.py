import math

import numpy as np
import pytest

from moltweezer.dynamics import PropagationResult, PulseSpec
from moltweezer.errors import ValidationError
from moltweezer.gate import (
    GateTarget,
    QubitSystem,
    crab_start,
    fidelities,
    nearest_coupled_gap,
    optimize,
    pulse_waveform,
    simulate,
    speed_limit_estimate,
)
from moltweezer.hamiltonian import EigenSystem

TARGET = GateTarget()


def system(label, n=3, index=0, character=None, energies=None, wt=None):
    energies = np.arange(n, dtype=float) if energies is None else np.asarray(energies, dtype=float)
    n = energies.size
    wt = np.zeros((n, n)) if wt is None else np.asarray(wt, dtype=float)
    if character is None:
        character = np.zeros(n, dtype=bool)
        character[index] = True
    return QubitSystem(label, 0, None, EigenSystem(energies, np.eye(n)), wt, index, 1.0, np.asarray(character))


def result(final, index=0):
    final = np.asarray(final, dtype=complex)
    start = np.zeros_like(final)
    start[index] = 1.0
    return PropagationResult(np.array([0.0, 1.0]), np.vstack([start, final]), None, index, start)


@pytest.fixture
def qubits():
    return [system(label) for label in ("00", "+", "-", "11")]


def test_zero_pulse_fidelity(qubits):
    res = [result([1, 0, 0]) for _ in qubits]
    internal, full = fidelities(res, TARGET, qubits)
    assert full == pytest.approx(0.25, abs=1e-15) and internal == pytest.approx(0.25, abs=1e-15)


def test_exact_target_fidelity(qubits):
    res = [result([np.exp(1j * phi), 0, 0]) for phi in TARGET.phases]
    assert fidelities(res, TARGET, qubits) == pytest.approx((1.0, 1.0), abs=1e-15)


def test_global_phase_invariance(qubits):
    rng = np.random.default_rng(3)
    finals = []
    for _ in qubits:
        c = rng.normal(size=3) + 1j * rng.normal(size=3)
        finals.append(c / np.linalg.norm(c))
    chi = np.exp(1j * rng.uniform(0, 2 * math.pi))
    before = fidelities([result(c) for c in finals], TARGET, qubits)
    after = fidelities([result(chi * c) for c in finals], TARGET, qubits)
    assert np.allclose(before, after, rtol=0, atol=1e-14)


def test_full_fidelity_one_iff_exact_return():
    # the first two levels share the internal character: leakage between them is forgiven internally
    qs = [system(label, character=[True, True, False]) for label in ("00", "+", "-", "11")]
    exact = [result([np.exp(1j * phi), 0, 0]) for phi in TARGET.phases]
    assert fidelities(exact, TARGET, qs)[1] == pytest.approx(1.0, abs=1e-15)
    leak = [result([math.sqrt(0.9) * np.exp(1j * phi), math.sqrt(0.1) * np.exp(1j * phi), 0]) for phi in TARGET.phases]
    internal, full = fidelities(leak, TARGET, qs)
    assert internal == pytest.approx(1.0, abs=1e-12) and full == pytest.approx(0.9, abs=1e-12)
    wrong = [result([np.exp(1j * (phi + 0.01 * k)), 0, 0]) for k, phi in enumerate(TARGET.phases)]
    assert fidelities(wrong, TARGET, qs)[1] < 1 - 1e-6
    # leaving the internal character costs both fidelities
    out = [result([math.sqrt(0.9) * np.exp(1j * phi), 0, math.sqrt(0.1)]) for phi in TARGET.phases]
    assert fidelities(out, TARGET, qs) == pytest.approx((0.9, 0.9), abs=1e-12)


def test_fidelity_input_checks(qubits):
    with pytest.raises(ValidationError):
        fidelities([result([1.2, 0, 0]) for _ in qubits], TARGET, qubits)
    with pytest.raises(ValidationError):
        fidelities([result([1, 0, 0])] * 3, TARGET, qubits)


# ---------------------------------------------------------------------------
# optimiser on a dispersive toy


DELTA, W12, TAU, PHI = 5.0, 1.0, 20.0, 1.0


def toy_systems():
    driven = system("a", energies=[0.0, DELTA], wt=[[0.0, W12], [W12, 0.0]])
    reference = system("b", energies=[0.0, DELTA])
    return [driven, reference], GateTarget((PHI, 0.0))


def test_toy_phase_target_reached():
    systems, target = toy_systems()
    start = PulseSpec("sine", 0.4, TAU)
    res = optimize(systems, start, "full", 50, omega=1.0, target=target, fd_step=1e-6)
    assert res.full_fidelity > 0.99
    assert len(res.trace) <= 51
    # pulse-area oracle: the dispersive phase is W^2/Delta * integral beta^2 dt
    t, beta = pulse_waveform(res.pulse, TAU / 4000)
    area = np.trapezoid(beta**2, t)
    assert area * W12**2 / DELTA == pytest.approx(PHI, rel=0.05)


def test_trace_monotone_and_deterministic():
    systems, target = toy_systems()
    start = PulseSpec("sine", 0.3, TAU)
    a = optimize(systems, start, "internal", 4, omega=1.0, target=target, seed=5)
    b = optimize(systems, start, "internal", 4, omega=1.0, target=target, seed=5)
    assert a.trace == b.trace and a.pulse == b.pulse
    assert np.all(np.diff(a.objective_trace) >= 0)
    assert a.report()["pulse"]["kind"] == "crab"


def test_zero_iterations_returns_start():
    systems, target = toy_systems()
    start = PulseSpec("sine", 0.3, TAU)
    res = optimize(systems, start, "full", 0, omega=1.0, target=target)
    assert res.pulse == start and len(res.trace) == 1
    direct = fidelities(simulate(systems, start, omega=1.0), target, systems)
    assert (res.internal_fidelity, res.full_fidelity) == direct


def test_optimizer_validation():
    systems, target = toy_systems()
    with pytest.raises(ValidationError):
        optimize(systems, PulseSpec("sine", 0.3, TAU), "bogus", 1, omega=1.0, target=target)
    with pytest.raises(ValidationError):
        optimize(systems, PulseSpec("sine", 0.3, TAU), "full", -1, omega=1.0, target=target)
    with pytest.raises(ValidationError):
        crab_start(PulseSpec("quench", 0.3, TAU))


def test_crab_start_frequencies():
    p = crab_start(PulseSpec("sine", 0.3, 150e-9), 3, seed=11)
    unit = math.pi / 150e-9
    for k, (a, b, xi) in enumerate(p.fourier, start=1):
        assert a == b == 0.0 and 0.8 * k <= xi / unit <= 1.2 * k
    assert crab_start(PulseSpec("sine", 0.3, 150e-9), 3, seed=11) == p


def test_waveform_sampling():
    t, beta = pulse_waveform(PulseSpec("sine", 0.16, 150e-9))
    assert t.size == 151 and t[1] == pytest.approx(1e-9)
    assert beta.max() == pytest.approx(0.16, rel=1e-12)


# ---------------------------------------------------------------------------
# speed limit


def test_speed_limit_synthetic_gap():
    delta = 0.37
    E = np.array([0.0, delta, 5.0, 9.0])
    wt = np.ones((4, 4))
    assert nearest_coupled_gap(EigenSystem(E, np.eye(4)), wt, 0) == delta
    omega = 2 * math.pi * 50e3
    s = system("x", energies=E, wt=wt)
    assert speed_limit_estimate([s], omega=omega) == pytest.approx(2 * math.pi / (delta * omega), rel=1e-15)


def test_speed_limit_trap_dominated_scaling():
    # levels one trap quantum apart: 2 pi / omega = 20 us at 50 kHz
    E = np.arange(6, dtype=float)
    wt = np.ones((6, 6))
    omega = 2 * math.pi * 50e3
    s = system("x", energies=E, wt=wt, index=2)
    t1 = speed_limit_estimate([s], omega=omega)
    assert t1 == pytest.approx(20e-6, rel=1e-12)
    assert speed_limit_estimate([s], omega=2 * omega) == pytest.approx(t1 / 2, rel=1e-15)


def test_speed_limit_ignores_uncoupled_states():
    E = np.array([0.0, 0.01, 1.0])
    wt = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    assert nearest_coupled_gap(EigenSystem(E, np.eye(3)), wt, 0) == 1.0
    with pytest.raises(ValidationError):
        nearest_coupled_gap(EigenSystem(E, np.eye(3)), np.zeros((3, 3)), 0)
