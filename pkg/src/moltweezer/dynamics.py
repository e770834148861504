"""Field-driven evolution in the interaction picture of the beta = 0 eigenbasis.

With H(t) = h0 + beta(t) w and h0 V = V E, the amplitudes c_k of
psi(t) = sum_k c_k(t) exp(-i E_k t) |k> obey

    i dc_k/dt = beta(t) sum_l W_kl exp(i (E_k - E_l) t) c_l,     W = V^T w V,

in units hbar = omega = 1. The free evolution is factored out, so beta = 0
leaves every c_k constant.

Constant fields are propagated exactly by diagonalising E + beta W. Shaped
pulses use an embedded Dormand-Prince 5(4) pair with an absolute local error
bound per step and a hard step cap of 0.05 / omega_max, where omega_max is the
largest Bohr frequency between coupled states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba as nb
import numpy as np

from .errors import PropagationError, ValidationError
from .hamiltonian import EigenSystem

PULSE_KINDS = ("quench", "sine", "crab")
NORMALIZATIONS = ("none", "peak")
_KIND_CODE = {"quench": 0, "sine": 1, "crab": 2}
DEFAULT_SAMPLES = 500
NORM_ABORT = 1e-6
COUPLING_FLOOR = 1e-12
STEP_RESOLUTION = 0.05
AUTO_SUBSPACE_DIM = 64


@dataclass(frozen=True)
class PulseSpec:
    """beta(t) on [0, tau].

    quench: beta0; sine: beta0 sin(pi t / tau); crab: beta0 C(t) sin(pi t / tau)
    with C(t) = 1 + sum_i A_i cos(xi_i t) + B_i sin(xi_i t). With
    ``normalization="peak"`` the crab waveform is rescaled so that its largest
    |beta| equals beta0.

    ``tau`` is in seconds and every xi_i in rad/s.
    """

    kind: str
    beta0: float
    tau: float
    fourier: tuple[tuple[float, float, float], ...] = ()
    normalization: str = "none"

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise ValidationError("pulse.kind", f"expected one of {PULSE_KINDS}, got {self.kind!r}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValidationError("pulse.tau", f"must be > 0, got {self.tau!r}")
        if not math.isfinite(self.beta0):
            raise ValidationError("pulse.beta0", f"must be finite, got {self.beta0!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError("pulse.normalization", f"expected one of {NORMALIZATIONS}")
        fourier = tuple(tuple(float(x) for x in row) for row in self.fourier)
        for row in fourier:
            if len(row) != 3 or not all(math.isfinite(x) for x in row):
                raise ValidationError("pulse.fourier", "each entry must be a finite (A, B, xi) triple")
        if fourier and self.kind != "crab":
            raise ValidationError("pulse.fourier", f"Fourier terms are only used by crab pulses, not {self.kind!r}")
        object.__setattr__(self, "fourier", fourier)

    @property
    def coefficients(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        arr = np.array(self.fourier, dtype=float).reshape(-1, 3)
        return arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy()

    def with_fourier(self, fourier) -> "PulseSpec":
        return replace(self, kind="crab", fourier=tuple(map(tuple, fourier)))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "beta0": self.beta0,
            "tau": self.tau,
            "fourier": [list(r) for r in self.fourier],
            "normalization": self.normalization,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSpec":
        return cls(
            kind=data["kind"],
            beta0=float(data["beta0"]),
            tau=float(data["tau"]),
            fourier=tuple(tuple(r) for r in data.get("fourier", ())),
            normalization=data.get("normalization", "none"),
        )


def _correction(pulse: PulseSpec, t):
    A, B, xi = pulse.coefficients
    c = np.ones_like(t, dtype=float)
    for a, b_, x in zip(A, B, xi):
        c = c + a * np.cos(x * t) + b_ * np.sin(x * t)
    return c


def _peak_scale(pulse: PulseSpec) -> float:
    if pulse.kind != "crab" or pulse.normalization != "peak":
        return 1.0
    t = np.linspace(0.0, pulse.tau, 4001)
    peak = np.abs(_correction(pulse, t) * np.sin(np.pi * t / pulse.tau)).max()
    if peak == 0:
        raise ValidationError("pulse.fourier", "peak normalisation of an identically zero waveform")
    return 1.0 / peak


def beta_of_t(pulse: PulseSpec, t):
    """Dimensionless field at time(s) ``t`` in seconds; t must lie in [0, tau]."""
    t_arr = np.asarray(t, dtype=float)
    slack = 1e-12 * pulse.tau
    if np.any(t_arr < -slack) or np.any(t_arr > pulse.tau + slack):
        raise ValidationError("t", f"time outside [0, tau = {pulse.tau:g} s]")
    t_arr = np.clip(t_arr, 0.0, pulse.tau)
    if pulse.kind == "quench":
        out = np.full_like(t_arr, pulse.beta0)
    else:
        out = pulse.beta0 * np.sin(np.pi * t_arr / pulse.tau)
        if pulse.kind == "crab":
            out = out * _correction(pulse, t_arr) * _peak_scale(pulse)
    return float(out) if np.ndim(t) == 0 else out


# ---------------------------------------------------------------------------
# integrator kernel (dimensionless time)

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_B5 = _A[6].copy()
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@nb.njit(cache=True)
def _beta_nb(t, kind, beta0, tau, A, B, xi, scale):
    if kind == 0:
        return beta0
    env = math.sin(math.pi * t / tau)
    c = 1.0
    for i in range(A.size):
        c += A[i] * math.cos(xi[i] * t) + B[i] * math.sin(xi[i] * t)
    return beta0 * scale * c * env


@nb.njit(cache=True, fastmath=True)
def _rhs(bt, c, W, cs, sn, yr, yi, out):
    """out = -i bt exp(iEt) W exp(-iEt) c with cos/sin(E t) supplied."""
    n = c.size
    for k in range(n):
        yr[k] = cs[k] * c[k].real + sn[k] * c[k].imag
        yi[k] = cs[k] * c[k].imag - sn[k] * c[k].real
    for k in range(n):
        zr = 0.0
        zi = 0.0
        for l in range(n):
            wkl = W[k, l]
            zr += wkl * yr[l]
            zi += wkl * yi[l]
        pr = cs[k] * zr - sn[k] * zi
        pim = cs[k] * zi + sn[k] * zr
        out[k] = bt * (pim - 1j * pr)


@nb.njit(cache=True)
def _dopri(E, W, c0, t0, samples, hmax, tol, kind, beta0, tau, A, B, xi, scale, max_steps, Ca, Aa, B5, Ee):
    n = c0.size
    ns = samples.size
    out = np.empty((ns, n), dtype=np.complex128)
    k = np.empty((7, n), dtype=np.complex128)
    y = c0.copy()
    ytmp = np.empty(n, dtype=np.complex128)
    yr = np.empty(n)
    yi = np.empty(n)
    cs = np.empty(n)
    sn = np.empty(n)
    cs0 = np.empty(n)
    sn0 = np.empty(n)
    # per-stage phase increments exp(i E c_s h), cached for the last h used
    cm = np.empty((7, n))
    sm = np.empty((7, n))
    h_cached = -1.0
    t = t0
    direction = 1.0 if samples[ns - 1] >= t0 else -1.0
    h = hmax * 0.1
    steps = 0
    rejected = 0
    hmin_used = hmax
    status = 0
    for j in range(n):
        cs[j] = math.cos(E[j] * t)
        sn[j] = math.sin(E[j] * t)
    _rhs(_beta_nb(t, kind, beta0, tau, A, B, xi, scale), y, W, cs, sn, yr, yi, k[0])
    for s in range(ns):
        target = samples[s]
        while direction * (target - t) > 1e-15 * max(1.0, abs(target)):
            if steps >= max_steps:
                status = 1
                return out, steps, rejected, hmin_used, status
            hh = min(h, hmax, abs(target - t))
            dh = direction * hh
            if dh != h_cached:
                for st in range(1, 7):
                    for j in range(n):
                        cm[st, j] = math.cos(E[j] * Ca[st] * dh)
                        sm[st, j] = math.sin(E[j] * Ca[st] * dh)
                h_cached = dh
            for j in range(n):
                cs0[j] = math.cos(E[j] * t)
                sn0[j] = math.sin(E[j] * t)
            for st in range(1, 7):
                for j in range(n):
                    acc = 0j
                    for q in range(st):
                        acc += Aa[st, q] * k[q, j]
                    ytmp[j] = y[j] + dh * acc
                    cs[j] = cs0[j] * cm[st, j] - sn0[j] * sm[st, j]
                    sn[j] = sn0[j] * cm[st, j] + cs0[j] * sm[st, j]
                ts = t + Ca[st] * dh
                _rhs(_beta_nb(ts, kind, beta0, tau, A, B, xi, scale), ytmp, W, cs, sn, yr, yi, k[st])
            err = 0.0
            for j in range(n):
                acc = 0j
                for q in range(7):
                    acc += Ee[q] * k[q, j]
                e = abs(hh * acc)
                if e > err:
                    err = e
            ratio = err / tol
            if ratio <= 1.0:
                # the last stage sits at the accepted 5th-order point (FSAL)
                for j in range(n):
                    y[j] = ytmp[j]
                    k[0, j] = k[6, j]
                t = t + dh
                steps += 1
                if hh < hmin_used:
                    hmin_used = hh
                fac = 5.0 if ratio == 0.0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
                if hh == h or fac < 1.0:
                    h = hh * fac
            else:
                rejected += 1
                h = hh * max(0.2, 0.9 * ratio ** -0.2)
                if h < 1e-14 * max(1.0, abs(t)):
                    status = 2
                    return out, steps, rejected, hmin_used, status
        t = target
        out[s, :] = y
    return out, steps, rejected, hmin_used, status


# ---------------------------------------------------------------------------
# results


@dataclass
class PropagationResult:
    """Interaction-picture amplitudes at the sampled times.

    ``amplitudes[i, k]`` is c_k(times[i]) over the full eigenbasis (states
    outside the propagated subspace stay zero).
    """

    times: np.ndarray
    amplitudes: np.ndarray
    eig: EigenSystem = field(repr=False)
    initial_index: int | None
    initial: np.ndarray = field(repr=False)
    pulse: PulseSpec | None = None
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.amplitudes[-1]

    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    def table(self, indices) -> tuple[list[str], np.ndarray]:
        """Columns t [s], Re c_k, Im c_k for the requested indices."""
        idx = _check_indices(indices, self.amplitudes.shape[1])
        cols = ["t[s]"]
        data = [self.times]
        for k in idx:
            cols += [f"Re_c{k}", f"Im_c{k}"]
            data += [self.amplitudes[:, k].real, self.amplitudes[:, k].imag]
        return cols, np.column_stack(data)


def _check_indices(indices, n):
    idx = np.atleast_1d(np.asarray(indices, dtype=int))
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValidationError("indices", f"state indices must lie in [0, {n})")
    return idx


def populations(result: PropagationResult, indices) -> np.ndarray:
    """|c_k(t)|^2, shape (n_times, len(indices))."""
    idx = _check_indices(indices, result.amplitudes.shape[1])
    return np.abs(result.amplitudes[:, idx]) ** 2


def components(result: PropagationResult, indices) -> tuple[np.ndarray, np.ndarray]:
    idx = _check_indices(indices, result.amplitudes.shape[1])
    c = result.amplitudes[:, idx]
    return c.real, c.imag


# ---------------------------------------------------------------------------
# branch bookkeeping and subspace selection


def branch_weights(eig: EigenSystem) -> tuple[np.ndarray, np.ndarray]:
    """Weight of each eigenstate on each rotational branch.

    Returns (branch energies in units of B, weights of shape (n_states, n_branches)).
    """
    basis = eig.basis
    if basis is None:
        raise ValidationError("eig", "eigensystem carries no basis; branch weights unavailable")
    energy = basis.internal.branch_energies()
    levels = np.unique(energy)
    grid = basis.as_grid(eig.vectors)
    # amplitudes on the product internal states
    prod = np.einsum("nks,pk->nps", grid, basis.transform)
    weight = np.sum(np.abs(prod) ** 2, axis=0)  # (internal_product, states)
    out = np.stack([weight[energy == e].sum(axis=0) for e in levels], axis=1)
    return levels, out


def dominant_branch(eig: EigenSystem) -> np.ndarray:
    """Rotational energy (units of B) of the branch carrying > 50 % weight, else NaN."""
    levels, w = branch_weights(eig)
    best = np.argmax(w, axis=1)
    dom = levels[best].astype(float)
    dom[w[np.arange(w.shape[0]), best] <= 0.5] = np.nan
    return dom


def select_subspace(
    eig: EigenSystem,
    wt: np.ndarray,
    initial: np.ndarray,
    *,
    window: float = 5.0,
    reach: int = 2,
    coupling_rel: float = 1e-2,
    completeness: float = 1e-10,
):
    """Indices of the eigenstates propagated for a shaped pulse.

    Starting from the branches occupied initially, the branches of states
    coupled to them with at least ``coupling_rel`` of their strongest field
    matrix element are added, repeated ``reach`` times. Within every kept
    branch, states whose energy lies within ``window`` (hbar*omega) of the
    initial energy shifted by the branch offset are retained. The window is
    doubled until the field coupling weight sum_k |W_0k|^2 of the occupied
    states left outside is below ``completeness`` of the total, and likewise
    for the two-step weight sum_k |(W W)_0k|^2 (Raman-type paths back into
    the initial branch).
    """
    occupied = np.flatnonzero(np.abs(initial) > 0)
    if eig.basis is None:
        return np.arange(len(eig))
    levels, w = branch_weights(eig)
    owner = levels[np.argmax(w, axis=1)]
    b = _rotational_unit(eig, wt, owner, occupied)

    start = set(owner[occupied].tolist())
    kept = set(start)
    frontier = occupied
    # follow the strongest field couplings of the occupied states, layer by layer
    for _ in range(reach):
        rows = np.abs(wt[frontier])
        strong = rows > coupling_rel * rows.max(axis=1, keepdims=True)
        partners = np.setdiff1d(np.flatnonzero(strong.any(axis=0)), frontier)
        kept |= set(owner[partners].tolist())
        frontier = partners
        if frontier.size == 0:
            break
    e0 = float(np.min(eig.energies[occupied]))
    e1 = float(np.max(eig.energies[occupied]))
    weights = []
    for rows in (wt[occupied], wt[occupied] @ wt):
        weight = np.abs(rows) ** 2
        weight[:, occupied] = 0.0
        weights.append((weight, weight.sum()))
    span = float(np.ptp(eig.energies))
    while True:
        keep = np.zeros(len(eig), dtype=bool)
        for lvl in kept:
            shift = b * (lvl - owner[occupied[0]])
            keep |= (owner == lvl) & (eig.energies >= e0 + shift - window) & (eig.energies <= e1 + shift + window)
        keep[occupied] = True
        complete = all(w[:, ~keep].sum() <= completeness * total for w, total in weights)
        if complete or window > span:
            break
        window *= 2.0
    if not complete:
        keep |= np.any(weights[0][0] > 0, axis=0)
    return np.flatnonzero(keep)


def _rotational_unit(eig, wt, owner, occupied):
    """b = B / (hbar omega) from the strongest field coupling of the initial state.

    That partner carries the same motion one rotational quantum higher or lower,
    so its energy difference divided by the branch difference is b up to
    dipolar corrections.
    """
    i = occupied[0]
    row = np.abs(wt[i]) * (owner != owner[i])
    if not row.any():
        return 0.0
    l = int(np.argmax(row))
    return float((eig.energies[l] - eig.energies[i]) / (owner[l] - owner[i]))


def bohr_max(E: np.ndarray, wt: np.ndarray) -> float:
    """Largest |E_k - E_l| between states with |W_kl| above the coupling floor."""
    mask = np.abs(wt) > COUPLING_FLOOR
    if not mask.any():
        return 0.0
    diff = np.abs(E[:, None] - E[None, :])
    return float(diff[mask].max())


# ---------------------------------------------------------------------------
# propagation


def _initial_vector(initial, n):
    if np.isscalar(initial) and float(initial).is_integer():
        idx = int(initial)
        if not 0 <= idx < n:
            raise ValidationError("initial", f"state index {idx} outside [0, {n})")
        c0 = np.zeros(n, dtype=complex)
        c0[idx] = 1.0
        return c0, idx
    c0 = np.asarray(initial, dtype=complex)
    if c0.shape != (n,):
        raise ValidationError("initial", f"amplitude vector must have length {n}")
    norm = np.vdot(c0, c0).real
    if abs(norm - 1.0) > 1e-8:
        raise ValidationError("initial", f"initial state not normalised (norm^2 = {norm:.12g})")
    return c0, None


def propagate(
    eig: EigenSystem,
    w: np.ndarray,
    pulse: PulseSpec,
    initial,
    sample_times=None,
    *,
    omega: float,
    w_basis: str = "product",
    method: str = "auto",
    subspace="auto",
    window: float = 5.0,
    reach: int = 2,
    tol: float = 1e-10,
    t_span: tuple[float, float] | None = None,
    max_steps: int = 50_000_000,
) -> PropagationResult:
    """Evolve interaction-picture amplitudes under ``pulse``.

    Parameters
    ----------
    eig : EigenSystem
        Spectrum of h0 (energies in hbar*omega).
    w : ndarray
        Field operator, in the product basis (``w_basis="product"``) or already
        transformed to the eigenbasis (``"eigen"``).
    initial : int or ndarray
        Eigenstate index or normalised amplitude vector.
    sample_times : array, optional
        Times in seconds (default: 500 points over ``t_span``).
    omega : float
        Trap angular frequency converting seconds to 1/omega.
    method : {"auto", "exact", "rk"}
        ``exact`` diagonalises E + beta W (constant fields only); ``auto``
        picks it for quenches.
    subspace : "auto", "full" or index array
        ``auto`` propagates shaped pulses in :func:`select_subspace` once the
        basis exceeds ``AUTO_SUBSPACE_DIM`` states.
    t_span : (t_start, t_end), optional
        Seconds; t_end < t_start integrates backwards in time.
    """
    if not (math.isfinite(omega) and omega > 0):
        raise ValidationError("omega", "must be > 0")
    n = len(eig)
    if w_basis == "product":
        wt = eig.transform(w)
    elif w_basis == "eigen":
        wt = np.asarray(w)
    else:
        raise ValidationError("w_basis", "expected 'product' or 'eigen'")
    if wt.shape != (n, n):
        raise ValidationError("w", f"field operator shape {wt.shape} does not match {n} states")
    c0, idx0 = _initial_vector(initial, n)

    t_start, t_end = (0.0, pulse.tau) if t_span is None else map(float, t_span)
    for t in (t_start, t_end):
        if t < -1e-12 * pulse.tau or t > pulse.tau * (1 + 1e-12):
            raise ValidationError("t_span", "propagation interval must lie within [0, tau]")
    if sample_times is None:
        sample_times = np.linspace(t_start, t_end, DEFAULT_SAMPLES)
    samples = np.asarray(sample_times, dtype=float)
    lo, hi = min(t_start, t_end), max(t_start, t_end)
    if samples.ndim != 1 or samples.size == 0 or samples.min() < lo - 1e-15 or samples.max() > hi + 1e-15:
        raise ValidationError("sample_times", "sample times must lie inside the propagation interval")
    step_sign = np.sign(t_end - t_start) or 1.0
    if np.any(np.diff(samples) * step_sign < 0):
        raise ValidationError("sample_times", "sample times must be ordered along the propagation")

    if method == "auto":
        method = "exact" if pulse.kind == "quench" else "rk"
    if method == "exact" and pulse.kind != "quench":
        raise ValidationError("method", "exact propagation needs a constant (quench) field")
    if method not in ("exact", "rk"):
        raise ValidationError("method", f"unknown method {method!r}")

    if isinstance(subspace, str):
        if subspace == "full" or method == "exact" or (subspace == "auto" and n <= AUTO_SUBSPACE_DIM):
            sub = np.arange(n)
        elif subspace == "auto":
            sub = select_subspace(eig, wt, c0, window=window, reach=reach)
        else:
            raise ValidationError("subspace", f"unknown subspace mode {subspace!r}")
    else:
        sub = np.unique(np.asarray(subspace, dtype=int))
        sub = np.union1d(sub, np.flatnonzero(np.abs(c0) > 0))

    E = eig.energies[sub]
    W = np.ascontiguousarray(wt[np.ix_(sub, sub)])
    e_ref = float(E[np.argmax(np.abs(c0[sub]))])
    E = E - e_ref
    x0 = c0[sub].copy()
    s_dimless = samples * omega
    meta = {"method": method, "subspace": sub, "subspace_dim": int(sub.size), "dim": n, "omega": omega}

    if method == "exact":
        beta = pulse.beta0
        lam, U = np.linalg.eigh(np.diag(E) + beta * W)
        t0 = t_start * omega
        # c(t) = exp(iEt) U exp(-i lam (t - t0)) U^T exp(-iE t0) c(t0)
        x = U.T @ (np.exp(-1j * E * t0) * x0)
        ph = np.exp(-1j * np.outer(s_dimless - t0, lam)) * x
        amps_sub = np.exp(1j * np.outer(s_dimless, E)) * (ph @ U.T)
        meta.update(steps=0)
    else:
        A, B, xi = pulse.coefficients
        wmax = bohr_max(E, W)
        hmax = STEP_RESOLUTION / wmax if wmax > 0 else abs(t_end - t_start) * omega
        amps_sub, steps, rejected, hmin, status = _dopri(
            E,
            W,
            x0,
            t_start * omega,
            s_dimless,
            hmax,
            tol,
            _KIND_CODE[pulse.kind],
            pulse.beta0,
            pulse.tau * omega,
            A,
            B,
            xi / omega,
            _peak_scale(pulse),
            max_steps,
            _C,
            _A,
            _B5,
            _E,
        )
        meta.update(steps=int(steps), rejected=int(rejected), h_max=hmax, h_min=float(hmin), omega_max=wmax)
        if status:
            raise PropagationError(
                "step-size control failed" if status == 2 else "step budget exhausted",
                {"steps": int(steps), "rejected": int(rejected), "h_min": float(hmin), "h_max": hmax, "tol": tol},
            )

    amps = np.zeros((samples.size, n), dtype=complex)
    amps[:, sub] = amps_sub
    norms = np.sum(np.abs(amps_sub) ** 2, axis=1)
    drift = float(np.abs(norms - np.vdot(x0, x0).real).max())
    meta["norm_drift"] = drift
    if drift > NORM_ABORT:
        raise PropagationError("norm drift exceeds 1e-6", {"norm_drift": drift, **meta})
    return PropagationResult(samples, amps, eig, idx0, c0, pulse, meta)


def reverse(result: PropagationResult, w, *, omega: float, w_basis: str = "product", **kwargs) -> PropagationResult:
    """Propagate the final state of ``result`` backwards from tau to 0."""
    pulse = result.pulse
    c_end = result.final / math.sqrt(np.vdot(result.final, result.final).real)
    t_end = result.times[-1]
    kwargs.setdefault("subspace", result.meta.get("subspace", "auto"))
    kwargs.setdefault("method", result.meta.get("method", "auto"))
    return propagate(
        result.eig, w, pulse, c_end, np.array([t_end, 0.0]), omega=omega, w_basis=w_basis, t_span=(t_end, 0.0), **kwargs
    )
