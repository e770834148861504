"""Pair Hamiltonian in the |n_z> x |j1 m1 j2 m2> product basis.

    H(beta) = h0 + beta * w
    h0 = T(a) x 1 + b * 1 x jsq - (D_perp / 8)(1 + 3 cos 2 theta) * S x g_pair
    w  = b * 1 x w_field

with T the displaced-trap matrix, S the quasi-1D spatial coupling and all
energies in hbar*omega. The flat index of |n, k> is n * internal_dim + k.

Internal molecule exchange commutes with every term, so each M block can be
further split into exchange-symmetric and antisymmetric parts (``parity``).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import eigsh

from .angular import InternalOperators, InternalPairBasis, build_internal_operators, enumerate_internal
from .errors import DimensionError, EigensolverError, ValidationError
from .params import SystemParams
from .spatial import (
    SpatialBasis,
    SpatialCoupling,
    cached_spatial_coupling,
    coherent_coefficients,
    contact_matrix,
    region_overlap,
    trap_matrix,
)

log = logging.getLogger(__name__)

DEFAULT_DIM_CAP = 20_000


@dataclass(frozen=True)
class BasisSet:
    """Flat product basis.

    ``transform`` maps the internal coordinates used in the matrices back to
    the product pair states of ``internal`` (identity unless a parity block
    was requested).
    """

    internal: InternalPairBasis
    spatial: SpatialBasis
    transform: np.ndarray
    parity: int | None = None

    @property
    def internal_dim(self) -> int:
        return self.transform.shape[1]

    @property
    def dim(self) -> int:
        return self.spatial.size * self.internal_dim

    def flat_index(self, n: int, k: int) -> int:
        if not (0 <= n < self.spatial.size and 0 <= k < self.internal_dim):
            raise IndexError(f"(n={n}, k={k}) outside the basis")
        return n * self.internal_dim + k

    def split_index(self, i: int) -> tuple[int, int]:
        if not 0 <= i < self.dim:
            raise IndexError(f"flat index {i} outside the basis")
        return divmod(i, self.internal_dim)

    def as_grid(self, vectors: np.ndarray) -> np.ndarray:
        """Reshape (dim,) or (dim, k) to (n_max + 1, internal_dim[, k])."""
        return vectors.reshape((self.spatial.size, self.internal_dim) + vectors.shape[1:])

    def internal_vector(self, product_amplitudes: np.ndarray) -> np.ndarray:
        """Express a product-state internal vector in this basis' internal coordinates."""
        return self.transform.T @ product_amplitudes

    def product_state(self, spatial: np.ndarray, internal_product: np.ndarray) -> np.ndarray:
        return np.kron(spatial, self.internal_vector(internal_product))

    def internal_weights(self, vectors: np.ndarray, internal_product: np.ndarray) -> np.ndarray:
        """Probability that each state is found in the given internal state (any motion)."""
        u = self.internal_vector(internal_product)
        amp = np.tensordot(self.as_grid(vectors), u.conj(), axes=([1], [0]))
        return np.sum(np.abs(amp) ** 2, axis=0)

    def branch_energies(self) -> np.ndarray:
        """Rotational energy j1(j1+1)+j2(j2+1) of each internal coordinate (units of B)."""
        e = self.internal.branch_energies()
        return np.einsum("ik,i,ik->k", self.transform, e, self.transform)


@dataclass
class HamiltonianPair:
    """h0 (field free) and w, the coefficient of beta, as dense symmetric matrices.

    ``static`` is h0 without the trap term; :meth:`with_separation` reuses it.
    """

    h0: np.ndarray
    w: np.ndarray
    basis: BasisSet
    params: SystemParams
    static: np.ndarray = field(repr=False)

    def at_field(self, beta: float) -> np.ndarray:
        return self.h0 + beta * self.w if beta else self.h0.copy()

    def with_separation(self, a: float) -> "HamiltonianPair":
        n_int = self.basis.internal_dim
        h0 = self.static + np.kron(trap_matrix(self.basis.spatial.n_max, a), np.eye(n_int))
        return HamiltonianPair(h0, self.w, self.basis, self.params.replace(a_over_aho=a), self.static)


def internal_block(j_max: int, M, parity: int | None = None):
    internal = enumerate_internal(j_max, M)
    ops = build_internal_operators(internal)
    if parity is None:
        transform = np.eye(len(internal))
    else:
        transform = internal.parity_isometry(parity)
        ops = ops.transformed(transform)
    return internal, ops, transform


def build(
    params: SystemParams,
    M,
    j_max: int = 2,
    n_max: int = 120,
    *,
    parity: int | None = None,
    coupling: SpatialCoupling | None = None,
    dim_cap: int = DEFAULT_DIM_CAP,
    cache_dir=None,
) -> tuple[BasisSet, HamiltonianPair]:
    """Assemble h0 and w for total projection ``M`` (an int or several Ms)."""
    internal, ops, transform = internal_block(j_max, M, parity)
    spatial = SpatialBasis(n_max)
    basis = BasisSet(internal, spatial, transform, parity)
    if basis.dim > dim_cap:
        raise DimensionError(
            "numerics.n_max",
            f"basis dimension {basis.dim} = {spatial.size} x {basis.internal_dim} exceeds the cap "
            f"{dim_cap}; lower n_max/j_max or raise the cap (e.g. dim_cap={basis.dim})",
        )
    if coupling is None:
        coupling = cached_spatial_coupling(spatial, params.lperp_over_aho, cache_dir=cache_dir)
    elif coupling.n_max != n_max or not math.isclose(coupling.lperp_over_aho, params.lperp_over_aho):
        raise ValidationError("coupling", "spatial coupling does not match n_max / l_perp")

    one_s = np.eye(spatial.size)
    dip = params.transverse_dip_strength * params.angular_factor / 8.0
    static = params.b * np.kron(one_s, ops.jsq)
    if dip:
        static -= dip * np.kron(coupling.matrix, ops.g_pair)
    if params.contact_strength:
        static += params.contact_strength * np.kron(contact_matrix(n_max), np.eye(basis.internal_dim))
    h0 = static + np.kron(trap_matrix(n_max, params.a_over_aho), np.eye(basis.internal_dim))
    w = params.b * np.kron(one_s, ops.w_field)
    return basis, HamiltonianPair(h0=h0, w=w, basis=basis, params=params, static=static)


# ---------------------------------------------------------------------------
# eigenproblem


@dataclass
class EigenSystem:
    """Ascending eigenvalues and orthonormal eigenvector columns."""

    energies: np.ndarray
    vectors: np.ndarray
    basis: BasisSet | None = None

    def __len__(self):
        return self.energies.size

    def transform(self, op: np.ndarray) -> np.ndarray:
        """V^T op V: an operator in this eigenbasis."""
        return self.vectors.T @ op @ self.vectors


def _spectral_norm(h: np.ndarray) -> float:
    if h.shape[0] <= 64:
        return float(np.abs(np.linalg.eigvalsh(h)).max())
    return float(abs(eigsh(h, k=1, which="LM", return_eigenvectors=False, tol=1e-6)[0]))


def check_eigensystem(h: np.ndarray, energies: np.ndarray, vectors: np.ndarray, norm: float | None = None):
    """Raise unless the residual and orthonormality contracts hold."""
    if norm is None:
        norm = _spectral_norm(h)
    resid = np.linalg.norm(h @ vectors - vectors * energies, axis=0)
    gram = vectors.T @ vectors
    ortho = np.abs(gram - np.eye(gram.shape[0])).max() if gram.size else 0.0
    worst = float(resid.max()) if resid.size else 0.0
    if worst > 1e-9 * max(norm, 1e-300) or ortho > 1e-10:
        raise EigensolverError(
            "eigensolver result fails the residual/orthonormality contract",
            {"max_residual": worst, "norm": norm, "orthonormality_defect": float(ortho), "dim": h.shape[0]},
        )
    return worst, ortho


def diagonalize(
    h: np.ndarray,
    window: tuple[float, float] | None = None,
    *,
    basis: BasisSet | None = None,
    check: bool = True,
) -> EigenSystem:
    """Full (or energy-windowed) spectrum of a real symmetric matrix."""
    h = np.asarray(h)
    if not np.all(np.isfinite(h)):
        raise EigensolverError("matrix has non-finite entries", {"dim": h.shape[0]})
    try:
        if window is None:
            energies, vectors = sla.eigh(h, driver="evd")
        else:
            energies, vectors = sla.eigh(h, subset_by_value=window, driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(
            f"eigensolver failed: {exc}",
            {"dim": h.shape[0], "asymmetry": float(np.abs(h - h.T).max()), "window": window},
        ) from exc
    if check:
        norm = float(max(abs(energies[0]), abs(energies[-1]))) if window is None and energies.size else None
        check_eigensystem(h, energies, vectors, norm)
    return EigenSystem(energies, vectors, basis)


# ---------------------------------------------------------------------------
# reference states and classification


def reference_internal(internal: InternalPairBasis, M=None, parity: int | None = None) -> np.ndarray:
    """Internal state of the lowest trap state of a block, in product coordinates.

    M = 0: |00,00>; M = 2: |11,11>; M = 1: (|00,11> -+ |11,00>)/sqrt 2 for the
    antisymmetric (default, lowest) or symmetric combination. Otherwise the
    first state of the basis.
    """
    M = internal.M if M is None else M
    v = np.zeros(len(internal))
    if M == 1 and (0, 0, 1, 1) in internal.states:
        sign = 1.0 if parity == 1 else -1.0
        v[internal.index((1, 1, 0, 0))] = 1 / math.sqrt(2)
        v[internal.index((0, 0, 1, 1))] = sign / math.sqrt(2)
    elif M == 0 and (0, 0, 0, 0) in internal.states:
        v[internal.index((0, 0, 0, 0))] = 1.0
    elif M == 2 and (1, 1, 1, 1) in internal.states:
        v[internal.index((1, 1, 1, 1))] = 1.0
    else:
        v[0] = 1.0
    return v


def reference_vector(basis: BasisSet, a: float, internal_product: np.ndarray | None = None) -> np.ndarray:
    """(ground state of the trap centred at a) x internal, normalised in the truncated basis."""
    if internal_product is None:
        internal_product = reference_internal(basis.internal, parity=basis.parity)
    spatial = coherent_coefficients(basis.spatial.n_max, a)
    v = basis.product_state(spatial, internal_product)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class ClassifierThresholds:
    bound_radius_rB: float = 3.0  # bound region |z| < min(this * r_B, a / 2)
    trap_halfwidth: float = 3.0  # trap region |z - a| < this (a_ho)
    weight: float = 0.5


@lru_cache(maxsize=64)
def _region(n_max: int, lo: float, hi: float) -> np.ndarray:
    return region_overlap(n_max, lo, hi)


def region_weights(vectors: np.ndarray, basis: BasisSet, lo: float, hi: float) -> np.ndarray:
    """Probability for each column of ``vectors`` to lie in lo < z < hi."""
    O = _region(basis.spatial.n_max, float(lo), float(hi))
    grid = basis.as_grid(vectors if vectors.ndim == 2 else vectors[:, None])
    return np.einsum("nik,nm,mik->k", grid.conj(), O, grid).real


def character_weights(vectors, basis: BasisSet, params: SystemParams, thresholds=ClassifierThresholds()):
    a = params.a_over_aho
    r = min(thresholds.bound_radius_rB * params.r_B_over_aho, 0.5 * a) if a > 0 else (
        thresholds.bound_radius_rB * params.r_B_over_aho
    )
    bound = region_weights(vectors, basis, -r, r)
    trap = region_weights(vectors, basis, a - thresholds.trap_halfwidth, a + thresholds.trap_halfwidth)
    return bound, trap


def _label(bound: float, trap: float, thresholds: ClassifierThresholds) -> str:
    if bound > thresholds.weight:
        return "bound"
    if trap > thresholds.weight:
        return "trap"
    return "mixed"


def classify_state(vector, basis: BasisSet, params: SystemParams, thresholds=ClassifierThresholds()) -> str:
    """'bound', 'trap' or 'mixed' from the weight of the relative-position density."""
    bound, trap = character_weights(np.asarray(vector)[:, None], basis, params, thresholds)
    return _label(bound[0], trap[0], thresholds)


def classify_states(vectors, basis, params, thresholds=ClassifierThresholds()) -> list[str]:
    bound, trap = character_weights(vectors, basis, params, thresholds)
    return [_label(b, t, thresholds) for b, t in zip(bound, trap)]


# ---------------------------------------------------------------------------
# scans


@dataclass
class SpectrumScan:
    """Lowest-k energies above a floor along a parameter grid.

    ``energies`` holds the adiabatic (sorted) levels; ``trap_index`` points at
    the level with the largest overlap with the separated-trap reference state.
    ``tracked`` follows the levels of the first grid point by maximal overlap
    of successive eigenvectors (NaN once a level leaves the computed window).
    """

    parameter: str
    grid: np.ndarray
    energies: np.ndarray
    characters: np.ndarray
    trap_index: np.ndarray
    trap_overlap: np.ndarray
    tracked: np.ndarray
    tracked_characters: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.energies.shape[1]

    @property
    def trap_energies(self) -> np.ndarray:
        return self.energies[np.arange(self.grid.size), self.trap_index]


def _internal_stark_shift(ops: InternalOperators, b: float, ref_int: np.ndarray, beta: float) -> float:
    """Field shift of the non-interacting internal level that contains ``ref_int``."""
    if not beta:
        return 0.0
    e0, v0 = np.linalg.eigh(b * ops.jsq)
    e1, v1 = np.linalg.eigh(b * ops.jsq + beta * b * ops.w_field)
    k0 = np.argmax(np.abs(v0.T @ ref_int))
    k1 = np.argmax(np.abs(v1.T @ ref_int))
    return float(e1[k1] - e0[k0])


def _window_eigs(h, center, floor_rel, k, basis, min_span=40.0):
    """Eigenpairs with E >= center + floor_rel; the window grows until it holds k levels."""
    lo = center + floor_rel
    span = max(min_span, 4.0 * k)
    for _ in range(12):
        es = diagonalize(h, (lo, lo + span), basis=basis, check=False)
        if len(es) >= k:
            return es
        span *= 2.0
    raise EigensolverError("could not find enough levels above the floor", {"floor": lo, "k": k})


def _scan(hp: HamiltonianPair, parameter: str, grid, k, floor_rel, thresholds, track, ref_int, workers, track_min=0.25):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
        raise ValidationError("grid", "scan grid must be strictly increasing")
    basis, params = hp.basis, hp.params
    if ref_int is None:
        ref_int = reference_internal(basis.internal, parity=basis.parity)
    ref_int_c = basis.internal_vector(ref_int)
    ops = None
    if parameter == "beta":
        _, ops, _ = internal_block(basis.internal.j_max, basis.internal.M, basis.parity)

    def point(x):
        if parameter == "a":
            hx = hp.with_separation(x)
            h, p, beta = hx.h0, hx.params, params.beta
            if beta:
                h = h + beta * hp.w
        else:
            h, p, beta = hp.at_field(x), params.replace(beta=x), x
        ref = reference_vector(basis, p.a_over_aho, ref_int)
        center = float(ref @ h @ ref)
        if beta:
            center += _internal_stark_shift(ops or internal_block(basis.internal.j_max, basis.internal.M, basis.parity)[1], p.b, ref_int_c, beta)
        es = _window_eigs(h, center, floor_rel, k + track, basis)
        return es, p, ref

    n = grid.size
    energies = np.full((n, k), np.nan)
    chars = np.empty((n, k), dtype=object)
    trap_index = np.zeros(n, dtype=int)
    trap_overlap = np.zeros(n)
    tracked = np.full((n, k), np.nan)
    tracked_chars = np.empty((n, k), dtype=object)
    prev = None

    def consume(i, result):
        nonlocal prev
        es, p, ref = result
        E, V = es.energies, es.vectors
        energies[i] = E[:k]
        labels = classify_states(V, basis, p, thresholds)
        chars[i] = labels[:k]
        ov = np.abs(V.T @ ref) ** 2
        trap_index[i] = int(np.argmax(ov[:k]))
        trap_overlap[i] = ov[trap_index[i]]
        if prev is None:
            cols = np.arange(k)
        else:
            overlap = np.abs(prev.T @ V)
            rows, assigned = linear_sum_assignment(-overlap)
            cols = np.full(k, -1)
            cols[rows] = assigned
            lost = overlap[np.arange(k), np.maximum(cols, 0)] ** 2 < track_min
            cols[lost | (cols < 0)] = -1
        tracked[i] = [E[c] if c >= 0 else np.nan for c in cols]
        tracked_chars[i] = [labels[c] if c >= 0 else "" for c in cols]
        prev = np.where(cols[None, :] >= 0, V[:, np.maximum(cols, 0)], 0.0)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            for i, result in enumerate(pool.map(point, grid)):
                consume(i, result)
    else:
        for i, x in enumerate(grid):
            consume(i, point(x))

    offset = float(params.b * basis.branch_energies().min())
    meta = {
        "parameter": parameter,
        "M": basis.internal.M,
        "parity": basis.parity,
        "j_max": basis.internal.j_max,
        "n_max": basis.spatial.n_max,
        "k": k,
        "floor_relative": floor_rel,
        "branch_offset": offset,
        "params": {f: getattr(params, f) for f in params.__dataclass_fields__},
    }
    return SpectrumScan(parameter, grid, energies, chars, trap_index, trap_overlap, tracked, tracked_chars, meta)


def scan_separation(
    params: SystemParams,
    M,
    a_grid,
    k: int = 12,
    *,
    j_max: int = 2,
    n_max: int = 120,
    parity: int | None = None,
    floor: float = -20.0,
    thresholds: ClassifierThresholds = ClassifierThresholds(),
    coupling: SpatialCoupling | None = None,
    reference: np.ndarray | None = None,
    workers: int | None = None,
    cache_dir=None,
) -> SpectrumScan:
    """Levels versus trap separation at fixed field ``params.beta``.

    ``floor`` is measured from the expected energy of the lowest trap state;
    only the trap term depends on a, so everything else is assembled once.
    """
    _, hp = build(params, M, j_max, n_max, parity=parity, coupling=coupling, cache_dir=cache_dir)
    return _scan(hp, "a", a_grid, k, floor, thresholds, 0, reference, workers)


def scan_field(
    params: SystemParams,
    M,
    beta_grid,
    k: int = 12,
    *,
    j_max: int = 2,
    n_max: int = 120,
    parity: int | None = None,
    floor: float = -20.0,
    thresholds: ClassifierThresholds = ClassifierThresholds(),
    coupling: SpatialCoupling | None = None,
    reference: np.ndarray | None = None,
    workers: int | None = None,
    cache_dir=None,
) -> SpectrumScan:
    """Levels versus dimensionless field beta at fixed separation."""
    _, hp = build(params.replace(beta=0.0), M, j_max, n_max, parity=parity, coupling=coupling, cache_dir=cache_dir)
    return _scan(hp, "beta", beta_grid, k, floor, thresholds, 0, reference, workers)


def free_pair_energy(params: SystemParams, basis: BasisSet, beta: float, internal_product=None) -> float:
    """Lowest trap level of the same block with the dipolar coupling switched off.

    The D = 0 problem separates, so this is the lowest eigenvalue of the
    truncated trap matrix plus the Stark-shifted internal level of the reference.
    """
    if internal_product is None:
        internal_product = reference_internal(basis.internal, parity=basis.parity)
    _, ops, _ = internal_block(basis.internal.j_max, basis.internal.M, basis.parity)
    ref_c = basis.internal_vector(internal_product)
    e_int, v_int = np.linalg.eigh(params.b * ops.jsq + beta * params.b * ops.w_field)
    e_trap = np.linalg.eigvalsh(trap_matrix(basis.spatial.n_max, params.a_over_aho))[0]
    return float(e_trap + e_int[np.argmax(np.abs(v_int.T @ ref_c))])


# ---------------------------------------------------------------------------
# anticrossings


@dataclass(frozen=True)
class Anticrossing:
    parameter: float
    gap: float
    branches: tuple[int, int]
    warning: str = ""


def _refine(x, g2, i):
    """Vertex of the parabola through (x, gap^2) at i-1, i, i+1.

    gap^2 is exactly quadratic for an isolated two-level crossing. Returns
    (location, gap, warning); an unresolved gap falls back to the sampled one.
    """
    x0, x1, x2 = x[i - 1 : i + 2]
    y0, y1, y2 = g2[i - 1 : i + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    Bc = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    if A <= 0:
        return x1, math.sqrt(y1), "non-convex gap profile; sampled minimum reported"
    xv = -Bc / (2 * A)
    if not x0 <= xv <= x2:
        return x1, math.sqrt(y1), "vertex outside bracket; sampled minimum reported"
    yv = y1 + A * (xv - x1) ** 2 + (2 * A * x1 + Bc) * (xv - x1)
    if yv <= 0:
        return xv, math.sqrt(y1), "gap narrower than the grid resolves; sampled minimum reported"
    return xv, math.sqrt(yv), ""


def _minima(x, gaps, gap_max, pair_of):
    out = []
    n = gaps.size
    g2 = gaps**2
    for i in range(1, n - 1):
        if gaps[i] < gap_max and gaps[i] <= gaps[i - 1] and gaps[i] < gaps[i + 1]:
            xv, gv, warn = _refine(x, g2, i)
            out.append(Anticrossing(float(xv), float(gv), pair_of(i), warn))
    if n >= 2:
        if gaps[0] < gap_max and gaps[0] < gaps[1]:
            out.append(Anticrossing(float(x[0]), float(gaps[0]), pair_of(0), "minimum at grid boundary"))
        if gaps[-1] < gap_max and gaps[-1] < gaps[-2]:
            out.append(Anticrossing(float(x[-1]), float(gaps[-1]), pair_of(n - 1), "minimum at grid boundary"))
    return out


def find_anticrossings(scan: SpectrumScan, gap_max: float, track: str | None = None) -> list[Anticrossing]:
    """Local minima of level gaps below ``gap_max``.

    With ``track=None`` every adjacent pair of sorted levels is examined. With
    ``track="trap"`` only the gap between the reference trap level and its
    nearest neighbour is used, which counts the resonances of that state.
    Minima on the grid boundary are returned with a warning.
    """
    if scan.k < 2:
        raise ValidationError("scan", "need at least two levels to look for anticrossings")
    x = scan.grid
    E = scan.energies
    if track is None:
        found = []
        for j in range(scan.k - 1):
            gaps = E[:, j + 1] - E[:, j]
            found += _minima(x, gaps, gap_max, lambda i, j=j: (j, j + 1))
        return sorted(found, key=lambda c: (c.parameter, c.branches))
    if track != "trap":
        raise ValidationError("track", f"unknown track mode {track!r}")
    idx = scan.trap_index
    rows = np.arange(x.size)
    below = np.where(idx > 0, E[rows, idx] - E[rows, np.maximum(idx - 1, 0)], np.inf)
    above = np.where(idx < scan.k - 1, E[rows, np.minimum(idx + 1, scan.k - 1)] - E[rows, idx], np.inf)
    gaps = np.minimum(below, above)

    def pair(i):
        t = int(idx[i])
        return (t - 1, t) if below[i] <= above[i] else (t, t + 1)

    return _minima(x, gaps, gap_max, pair)
