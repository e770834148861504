"""Controlled-phase gate: qubit bookkeeping, fidelities and CRAB pulse search.

Logical states use |0> = |j=0, m=0> and |1> = |j=1, m=1> per molecule, with
|+-> = (|01> +- |10>) / sqrt 2, so that |00>, |+->, |11> live in the M = 0, 1, 2
blocks. Each is represented by the beta = 0 eigenstate of largest overlap with
(ground state of the separated traps) x (internal state). Exchange parity is
conserved by H(t), so every logical state is propagated in its parity block.

For target phases phi_q and final interaction-picture amplitudes c_q,

    full     = | 1/N sum_q exp(-i phi_q) c_q,initial |^2
    internal = | 1/N sum_q exp(-i phi_q) exp(i arg c_q,dom) sqrt(P_q) |^2

where P_q is the population on eigenstates whose internal state is that of
q (any motion) and c_q,dom the largest such amplitude. Motional leakage is
therefore forgiven by the internal functional only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .hamiltonian import EigenSystem, build, diagonalize, reference_vector
from .dynamics import PropagationResult, PulseSpec, beta_of_t, dominant_branch, propagate
from .params import SystemParams

LABELS = ("00", "+", "-", "11")
# (M, exchange parity, {pair state: amplitude})
_LOGICAL = {
    "00": (0, 1, {(0, 0, 0, 0): 1.0}),
    "+": (1, 1, {(0, 0, 1, 1): 1 / math.sqrt(2), (1, 1, 0, 0): 1 / math.sqrt(2)}),
    "-": (1, -1, {(0, 0, 1, 1): 1 / math.sqrt(2), (1, 1, 0, 0): -1 / math.sqrt(2)}),
    "11": (2, 1, {(1, 1, 1, 1): 1.0}),
}
CHARACTER_WEIGHT = 0.5


@dataclass(frozen=True)
class GateTarget:
    phases: tuple[float, ...] = (math.pi, math.pi, math.pi, 0.0)


@dataclass
class QubitSystem:
    """One logical state: its block spectrum, field operator and bookkeeping.

    ``index`` is the eigenstate used as initial and reference state and
    ``character`` flags the eigenstates sharing its internal state.
    """

    label: str
    M: int
    parity: int | None
    eig: EigenSystem
    wt: np.ndarray
    index: int
    overlap: float
    character: np.ndarray


@dataclass
class QubitBasis:
    systems: list[QubitSystem]
    params: SystemParams

    def __getitem__(self, label: str) -> QubitSystem:
        for s in self.systems:
            if s.label == label:
                return s
        raise KeyError(label)

    def summary(self) -> dict:
        return {s.label: {"M": s.M, "parity": s.parity, "index": s.index, "overlap": s.overlap} for s in self.systems}


def build_qubit_basis(
    params: SystemParams,
    j_max: int = 2,
    n_max: int = 120,
    *,
    labels=LABELS,
    coupling=None,
    cache_dir=None,
) -> QubitBasis:
    """Diagonalise the blocks of the logical states at beta = 0."""
    params = params.replace(beta=0.0)
    systems = []
    blocks: dict[tuple[int, int], tuple] = {}
    for label in labels:
        if label not in _LOGICAL:
            raise ValidationError("label", f"unknown logical state {label!r}; expected one of {LABELS}")
        M, parity, amps = _LOGICAL[label]
        if (M, parity) not in blocks:
            basis, hp = build(params, M, j_max, n_max, parity=parity, coupling=coupling, cache_dir=cache_dir)
            eig = diagonalize(hp.h0, basis=basis)
            blocks[(M, parity)] = (basis, eig, eig.transform(hp.w))
        basis, eig, wt = blocks[(M, parity)]
        internal = basis.internal.vector(amps)
        ov = np.abs(eig.vectors.T @ reference_vector(basis, params.a_over_aho, internal)) ** 2
        idx = int(np.argmax(ov))
        character = basis.internal_weights(eig.vectors, internal) > CHARACTER_WEIGHT
        systems.append(QubitSystem(label, M, parity, eig, wt, idx, float(ov[idx]), character))
    return QubitBasis(systems, params)


# ---------------------------------------------------------------------------
# fidelities


def _final(result: PropagationResult) -> np.ndarray:
    c = result.final
    norm = float(np.vdot(c, c).real)
    if abs(norm - 1.0) > 1e-6:
        raise ValidationError("results", f"final state not normalised (norm^2 = {norm:.10g})")
    return c


def fidelities(results, target: GateTarget, systems) -> tuple[float, float]:
    """(internal, full) fidelity of final states against per-state target phases.

    ``systems`` supplies, per result, the reference index and the internal
    character mask (a :class:`QubitBasis` or a sequence of :class:`QubitSystem`).
    """
    systems = list(systems.systems if isinstance(systems, QubitBasis) else systems)
    results = list(results)
    phases = np.asarray(target.phases, dtype=float)
    if not (len(results) == len(systems) == phases.size):
        raise ValidationError("results", "need one result and one target phase per logical state")
    full = 0j
    internal = 0j
    for res, sys_, phi in zip(results, systems, phases):
        c = _final(res)
        rot = np.exp(-1j * phi)
        full += rot * c[sys_.index]
        mask = sys_.character
        p = float(np.sum(np.abs(c[mask]) ** 2))
        if p > 0:
            sel = np.flatnonzero(mask)
            dom = sel[np.argmax(np.abs(c[sel]))]
            internal += rot * np.exp(1j * np.angle(c[dom])) * math.sqrt(p)
    n = phases.size
    return min(abs(internal / n) ** 2, 1.0), min(abs(full / n) ** 2, 1.0)


# ---------------------------------------------------------------------------
# optimisation


@dataclass
class GateResult:
    internal_fidelity: float
    full_fidelity: float
    pulse: PulseSpec
    trace: list[dict] = field(default_factory=list)
    results: list[PropagationResult] = field(default_factory=list, repr=False)

    @property
    def objective_trace(self) -> np.ndarray:
        return np.array([row["best"] for row in self.trace])

    def report(self) -> dict:
        return {
            "internal_fidelity": self.internal_fidelity,
            "full_fidelity": self.full_fidelity,
            "pulse": self.pulse.to_dict(),
            "trace": self.trace,
        }


def simulate(qubits, pulse: PulseSpec, *, omega: float, samples: int = 2, **prop_kwargs) -> list[PropagationResult]:
    """Propagate every logical state under ``pulse`` (interaction picture)."""
    systems = qubits.systems if isinstance(qubits, QubitBasis) else qubits
    times = np.linspace(0.0, pulse.tau, samples)
    return [
        propagate(s.eig, s.wt, pulse, s.index, times, omega=omega, w_basis="eigen", **prop_kwargs) for s in systems
    ]


def _pack(pulse: PulseSpec) -> np.ndarray:
    unit = math.pi / pulse.tau
    x = [pulse.beta0]
    for a, b, xi in pulse.fourier:
        x += [a, b, xi / unit]
    return np.array(x, dtype=float)


def _unpack(x: np.ndarray, template: PulseSpec) -> PulseSpec:
    unit = math.pi / template.tau
    fourier = tuple((float(x[1 + 3 * i]), float(x[2 + 3 * i]), float(x[3 + 3 * i] * unit)) for i in range((x.size - 1) // 3))
    return PulseSpec("crab", float(x[0]), template.tau, fourier, template.normalization)


def crab_start(pulse: PulseSpec, n_fourier: int = 3, seed: int = 0) -> PulseSpec:
    """Promote a sine pulse to a CRAB pulse with zero coefficients.

    Frequencies are drawn as (1 +- 0.2) k pi / tau for k = 1..n_fourier.
    """
    if pulse.kind == "crab" and pulse.fourier:
        return pulse
    if pulse.kind == "quench":
        raise ValidationError("pulse.kind", "gate optimisation needs a sine or crab start pulse")
    rng = np.random.default_rng(seed)
    unit = math.pi / pulse.tau
    xi = [(k + 1) * unit * rng.uniform(0.8, 1.2) for k in range(n_fourier)]
    return PulseSpec("crab", pulse.beta0, pulse.tau, tuple((0.0, 0.0, x) for x in xi), pulse.normalization)


def optimize(
    qubits,
    initial_pulse: PulseSpec,
    objective: str = "internal",
    max_iters: int = 50,
    *,
    omega: float,
    target: GateTarget = GateTarget(),
    n_fourier: int = 3,
    seed: int = 0,
    fd_step: float = 1e-4,
    initial_step: float = 0.05,
    max_step: float = 1.0,
    shrink: float = 0.5,
    max_backtracks: int = 8,
    armijo: float = 1e-4,
    callback=None,
    **prop_kwargs,
) -> GateResult:
    """Finite-difference gradient ascent on (beta0, A_i, B_i, xi_i).

    Frequencies are optimised in units of pi / tau. Each iteration evaluates a
    forward-difference gradient and backtracks along it until the Armijo
    condition holds; the search stops early if no ascent step is found. Failed
    propagations score -inf and are logged. The best pulse seen is returned.
    """
    if objective not in ("internal", "full"):
        raise ValidationError("objective", "expected 'internal' or 'full'")
    if max_iters < 0:
        raise ValidationError("max_iters", "must be >= 0")
    start = initial_pulse if max_iters == 0 else crab_start(initial_pulse, n_fourier, seed)
    systems = qubits.systems if isinstance(qubits, QubitBasis) else list(qubits)
    which = 0 if objective == "internal" else 1

    def evaluate(x, pulse=None):
        pulse = _unpack(x, start) if pulse is None else pulse
        try:
            res = simulate(systems, pulse, omega=omega, **prop_kwargs)
            fid = fidelities(res, target, systems)
        except NumericalError as exc:
            return -math.inf, (math.nan, math.nan), None, str(exc)
        return fid[which], fid, res, ""

    x = _pack(start)
    f, fid, res, note = evaluate(x, start)
    best = (f, fid, start, res)
    trace = [{"iteration": 0, "objective": f, "best": f, "internal": fid[0], "full": fid[1], "step": 0.0, "note": note}]
    if callback:
        callback(trace[-1])
    step = initial_step
    for it in range(1, max_iters + 1):
        if not math.isfinite(f):
            trace.append({"iteration": it, "objective": f, "best": best[0], "internal": fid[0], "full": fid[1],
                          "step": 0.0, "note": "start point not evaluable"})
            break
        grad = np.zeros_like(x)
        for i in range(x.size):
            xp = x.copy()
            xp[i] += fd_step
            fp = evaluate(xp)[0]
            grad[i] = (fp - f) / fd_step if math.isfinite(fp) else 0.0
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            trace.append({"iteration": it, "objective": f, "best": best[0], "internal": fid[0], "full": fid[1],
                          "step": 0.0, "note": "zero gradient"})
            break
        direction = grad / gnorm
        s = min(step * 2.0, max_step)
        accepted = False
        notes = []
        for _ in range(max_backtracks + 1):
            xn = x + s * direction
            fn, fidn, resn, note = evaluate(xn)
            if note:
                notes.append(note)
            if math.isfinite(fn) and fn >= f + armijo * s * gnorm:
                accepted = True
                break
            s *= shrink
        if accepted:
            x, f, fid, res, step = xn, fn, fidn, resn, s
            if f > best[0]:
                best = (f, fid, _unpack(x, start), res)
        trace.append({"iteration": it, "objective": f, "best": best[0], "internal": fid[0], "full": fid[1],
                      "step": s if accepted else 0.0, "note": "; ".join(notes) or ("" if accepted else "no ascent step")})
        if callback:
            callback(trace[-1])
        if not accepted:
            break
    f_best, fid_best, pulse_best, res_best = best
    return GateResult(fid_best[0], fid_best[1], pulse_best, trace, res_best or [])


def pulse_waveform(pulse: PulseSpec, dt: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """beta(t) sampled every ``dt`` seconds including both end points."""
    n = max(int(round(pulse.tau / dt)), 1)
    t = np.linspace(0.0, pulse.tau, n + 1)
    return t, beta_of_t(pulse, t)


# ---------------------------------------------------------------------------
# speed limit


def nearest_coupled_gap(eig: EigenSystem, wt: np.ndarray, index: int, same_branch=None, rel: float = 1e-3) -> float:
    """Smallest |E_l - E_index| over states coupled to ``index`` by the field.

    A state counts as coupled if its first- or second-order (W^2) field matrix
    element exceeds ``rel`` times the largest off-diagonal one of that order
    among the eligible states. If
    ``same_branch`` (bool mask) is given, only those states are eligible.
    """
    first = np.abs(wt[index])
    second = np.abs(wt @ wt[:, index])
    first[index] = second[index] = 0.0
    if same_branch is not None:
        first = np.where(same_branch, first, 0.0)
        second = np.where(same_branch, second, 0.0)
    ok = np.zeros(len(eig), dtype=bool)
    if first.max() > 0:
        ok |= first > rel * first.max()
    if second.max() > 0:
        ok |= second > rel * second.max()
    if not ok.any():
        raise ValidationError("eig", f"state {index} has no coupled neighbour")
    return float(np.abs(eig.energies[ok] - eig.energies[index]).min())


def speed_limit_estimate(qubits, *, omega: float, rel: float = 1e-3) -> float:
    """2 pi / (min gap * omega) in seconds over all logical states.

    Neighbours are restricted to the rotational branch of each logical state,
    which the field connects to it at second order.
    """
    systems = qubits.systems if isinstance(qubits, QubitBasis) else qubits
    gaps = []
    for s in systems:
        mask = None
        if s.eig.basis is not None:
            dom = dominant_branch(s.eig)
            mask = dom == dom[s.index]
        gaps.append(nearest_coupled_gap(s.eig, s.wt, s.index, mask, rel))
    gap = min(gaps)
    if gap <= 0:
        raise ValidationError("eig", "degenerate coupled neighbour; speed limit undefined")
    return 2.0 * math.pi / (gap * omega)
