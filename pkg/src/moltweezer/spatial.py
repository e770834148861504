"""Oscillator basis along the trap axis and the quasi-1D dipolar profile.

Lengths are in units of a_ho and energies in hbar*omega. The basis is the
harmonic-oscillator ladder centred at z = 0 (the point of closest approach),
not at the trap minimum z = a.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfcx

from .errors import QuadratureError, ValidationError

SQRT_2PI = math.sqrt(2.0 * math.pi)
DELTA_COEFFICIENT = 8.0 / 3.0
_RESCALE = 1e150
# f(u) = sum_k _TAIL[k] / u**(2k+3); _TAIL[k] = 2 (a_{k+2} + a_{k+1}), a_k = (-1)^k (2k-1)!!
_TAIL = (4.0, -24.0, 180.0, -1680.0, 18900.0, -249480.0)


def ho_wavefunctions(n_max: int, z) -> np.ndarray:
    """psi_n(z) for n = 0..n_max, shape (n_max + 1, len(z)).

    Upward three-term recurrence on the polynomial part with the Gaussian
    factor applied last; a running log-scale keeps the polynomial part finite,
    so neither factorials nor exp(-z^2/2) underflow enter intermediate steps.
    """
    if n_max < 0:
        raise ValidationError("n_max", f"must be >= 0, got {n_max}")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty((n_max + 1, z.size))
    log_scale = -0.5 * z * z
    prev = np.zeros_like(z)
    cur = np.full_like(z, math.pi**-0.25)
    out[0] = cur * np.exp(log_scale)
    for n in range(n_max):
        nxt = math.sqrt(2.0 / (n + 1)) * z * cur - math.sqrt(n / (n + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE
        if big.any():
            cur[big] /= _RESCALE
            prev[big] /= _RESCALE
            log_scale[big] += math.log(_RESCALE)
        with np.errstate(under="ignore"):
            out[n + 1] = cur * np.exp(log_scale)
    return out


def ho_wavefunction(n: int, z):
    """Normalised oscillator eigenfunction psi_n(z); scalar in, scalar out."""
    if n < 0:
        raise ValidationError("n", f"must be >= 0, got {n}")
    values = ho_wavefunctions(n, z)[n]
    return values if np.ndim(z) else float(values[0])


def ho_at_origin(n_max: int) -> np.ndarray:
    """psi_n(0); odd states vanish, even ones follow a product recurrence."""
    out = np.zeros(n_max + 1)
    out[0] = math.pi**-0.25
    for n in range(2, n_max + 1, 2):
        out[n] = -math.sqrt((n - 1) / n) * out[n - 2]
    return out


def trap_element(n: int, n_prime: int, a: float) -> float:
    """<n| -1/2 d^2/dz^2 + 1/2 (z - a)^2 |n'> in the z = 0 centred basis."""
    if n < 0 or n_prime < 0:
        raise ValidationError("n", "oscillator indices must be >= 0")
    value = 0.0
    if n == n_prime:
        value += n + 0.5 + 0.5 * a * a
    if n == n_prime + 1:
        value -= a / math.sqrt(2.0) * math.sqrt(n_prime + 1)
    if n == n_prime - 1:
        value -= a / math.sqrt(2.0) * math.sqrt(n_prime)
    return value


def trap_matrix(n_max: int, a: float) -> np.ndarray:
    n = np.arange(n_max + 1)
    out = np.diag(n + 0.5 + 0.5 * a * a)
    off = -a / math.sqrt(2.0) * np.sqrt(n[1:])
    out += np.diag(off, 1) + np.diag(off, -1)
    return out


def coherent_coefficients(n_max: int, a: float) -> np.ndarray:
    """Expansion of the ground state of the trap centred at z = a.

    This is the motional state of two molecules sitting in the ground state
    of separated, non-interacting tweezers. Not normalised after truncation.
    """
    alpha = a / math.sqrt(2.0)
    n = np.arange(n_max + 1)
    if alpha == 0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    logs = -0.5 * alpha * alpha + n * math.log(abs(alpha)) - 0.5 * np.array(
        [math.lgamma(k + 1) for k in n]
    )
    return np.sign(alpha) ** n * np.exp(logs)


def v_profile(u):
    """Regular part of the quasi-1D dipolar profile.

    f(u) = -2|u| + sqrt(2 pi) (1 + u^2) exp(u^2/2) erfc(|u|/sqrt 2), evaluated
    through the scaled complement erfcx so it stays finite for large |u|;
    f(u) -> 4/u^3 - 24/u^5 + 180/u^7 - ... asymptotically.
    """
    x = np.abs(np.asarray(u, dtype=float))
    out = -2.0 * x + SQRT_2PI * (1.0 + x * x) * erfcx(x / math.sqrt(2.0))
    # the closed form cancels catastrophically far out; switch to the series
    far = x > 50.0
    if np.any(far):
        xf = x[far] if out.ndim else x
        inv2 = 1.0 / (xf * xf)
        series = 0.0
        for c in _TAIL[::-1]:
            series = (series + c) * inv2
        series = series / xf
        if out.ndim:
            out[far] = series
        else:
            out = series
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SpatialBasis:
    n_max: int
    center: float = 0.0

    def __post_init__(self):
        if self.n_max < 0:
            raise ValidationError("SpatialBasis.n_max", f"must be >= 0, got {self.n_max}")
        if self.center != 0.0:
            raise ValidationError("SpatialBasis.center", "only the z = 0 centred basis is supported")

    @property
    def size(self) -> int:
        return self.n_max + 1


@dataclass(frozen=True)
class SpatialCoupling:
    """<n| f(z/l_perp) - 8/3 delta(z/l_perp) |n'> for the oscillator basis."""

    matrix: np.ndarray
    n_max: int
    lperp_over_aho: float
    tolerance: float
    include_delta: bool = True
    achieved_tolerance: float = 0.0
    panels: int = 0
    meta: dict = field(default_factory=dict, compare=False)


def _panel_nodes(L: float, width: float, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    n_half = max(1, int(math.ceil(L / width)))
    edges = np.linspace(0.0, L, n_half + 1)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)[:, None]
    z = (lo[:, None] + half * (x[None, :] + 1.0)).ravel()
    wz = (half * w[None, :]).ravel()
    # mirrored panels on [-L, 0]; the profile cusp sits on a panel edge
    return np.concatenate([-z[::-1], z]), np.concatenate([wz[::-1], wz]), 2 * n_half


def _regular_matrix(n_max, lperp, L, width, order):
    z, wz, panels = _panel_nodes(L, width, order)
    psi = ho_wavefunctions(n_max, z)
    weighted = psi * (wz * v_profile(z / lperp))
    return weighted @ psi.T, panels


def spatial_coupling(
    basis: SpatialBasis,
    lperp_over_aho: float,
    tolerance: float = 1e-9,
    include_delta: bool = True,
    order: int = 16,
    max_refinements: int = 8,
) -> SpatialCoupling:
    """Matrix of the quasi-1D profile in the oscillator basis.

    The regular part uses composite Gauss-Legendre panels on [-L, L] with
    L = max(8 sqrt(n_max), 40), halving the panel width until successive
    results agree to ``tolerance`` relative to the largest entry. The delta
    term is added analytically: delta(z/l_perp) = l_perp delta(z).
    """
    if not (lperp_over_aho > 0 and math.isfinite(lperp_over_aho)):
        raise ValidationError("lperp_over_aho", f"must be > 0, got {lperp_over_aho!r}")
    n_max = basis.n_max
    L = max(8.0 * math.sqrt(n_max), 40.0)
    # panels narrower than the profile core and the shortest oscillator wavelength
    width = min(0.5, 2.0 * lperp_over_aho, 2.0 / math.sqrt(2 * n_max + 1))
    prev, _ = _regular_matrix(n_max, lperp_over_aho, L, width, order)
    achieved = math.inf
    worst = (0, 0)
    for _ in range(max_refinements):
        width *= 0.5
        cur, panels = _regular_matrix(n_max, lperp_over_aho, L, width, order)
        diff = np.abs(cur - prev)
        scale = max(np.abs(cur).max(), 1e-300)
        achieved = diff.max() / scale
        worst = np.unravel_index(np.argmax(diff), diff.shape)
        prev = cur
        if achieved <= tolerance:
            break
    else:
        raise QuadratureError(
            "spatial quadrature did not converge",
            {"worst_pair": [int(worst[0]), int(worst[1])], "achieved": achieved, "tolerance": tolerance},
        )
    matrix = 0.5 * (cur + cur.T)
    if include_delta:
        psi0 = ho_at_origin(n_max)
        matrix = matrix - DELTA_COEFFICIENT * lperp_over_aho * np.outer(psi0, psi0)
    return SpatialCoupling(
        matrix=matrix,
        n_max=n_max,
        lperp_over_aho=float(lperp_over_aho),
        tolerance=tolerance,
        include_delta=include_delta,
        achieved_tolerance=float(achieved),
        panels=panels,
    )


def contact_matrix(n_max: int) -> np.ndarray:
    """<n| delta(z) |n'> = psi_n(0) psi_n'(0), for the optional short-range term."""
    psi0 = ho_at_origin(n_max)
    return np.outer(psi0, psi0)


def region_overlap(n_max: int, lo: float, hi: float, order: int = 64) -> np.ndarray:
    """<n| 1[lo < z < hi] |n'>, used to read probability weights off a state."""
    L = max(8.0 * math.sqrt(n_max), 40.0)
    lo, hi = max(lo, -L), min(hi, L)
    if hi <= lo:
        return np.zeros((n_max + 1, n_max + 1))
    x, w = np.polynomial.legendre.leggauss(order)
    n_panels = max(1, int(math.ceil((hi - lo) / 0.25)))
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    z = (edges[:-1, None] + half * (x[None, :] + 1.0)).ravel()
    wz = (half * w[None, :]).ravel()
    psi = ho_wavefunctions(n_max, z)
    return (psi * wz) @ psi.T


# ---------------------------------------------------------------------------
# on-disk cache
#
# File layout (little endian):
#   line 1: b"MOLTWEEZER-SPATIAL 1\n"
#   line 2: one-line JSON header {"n_max", "lperp_over_aho", "tolerance",
#           "include_delta", "achieved_tolerance", "panels"} + b"\n"
#   then (n_max + 1)**2 float64 values, row-major.

CACHE_MAGIC = b"MOLTWEEZER-SPATIAL"
CACHE_VERSION = 1


def save_coupling(coupling: SpatialCoupling, path) -> Path:
    path = Path(path)
    header = {
        "n_max": coupling.n_max,
        "lperp_over_aho": coupling.lperp_over_aho,
        "tolerance": coupling.tolerance,
        "include_delta": coupling.include_delta,
        "achieved_tolerance": coupling.achieved_tolerance,
        "panels": coupling.panels,
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(CACHE_MAGIC + b" %d\n" % CACHE_VERSION)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(coupling.matrix, dtype="<f8").tobytes())
    os.replace(tmp, path)
    return path


def load_coupling(path) -> SpatialCoupling:
    with open(path, "rb") as fh:
        magic = fh.readline().split()
        if len(magic) != 2 or magic[0] != CACHE_MAGIC:
            raise ValueError(f"{path}: not a spatial-coupling cache file")
        if int(magic[1]) != CACHE_VERSION:
            raise ValueError(f"{path}: unsupported cache version {int(magic[1])}")
        header = json.loads(fh.readline())
        n = header["n_max"] + 1
        raw = fh.read()
    if len(raw) != 8 * n * n:
        raise ValueError(f"{path}: truncated cache file")
    matrix = np.frombuffer(raw, dtype="<f8").reshape(n, n).copy()
    return SpatialCoupling(matrix=matrix, **header)


def cache_key(n_max: int, lperp_over_aho: float, tolerance: float, include_delta: bool = True) -> str:
    text = struct.pack("<idd?", n_max, lperp_over_aho, tolerance, include_delta)
    return hashlib.sha256(text).hexdigest()[:16]


def cached_spatial_coupling(
    basis: SpatialBasis,
    lperp_over_aho: float,
    tolerance: float = 1e-9,
    include_delta: bool = True,
    cache_dir=None,
) -> SpatialCoupling:
    """:func:`spatial_coupling` with an optional directory cache."""
    if cache_dir is None:
        return spatial_coupling(basis, lperp_over_aho, tolerance, include_delta)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"spatial-{basis.n_max}-{cache_key(basis.n_max, lperp_over_aho, tolerance, include_delta)}.bin"
    if path.exists():
        try:
            return load_coupling(path)
        except (ValueError, KeyError, json.JSONDecodeError):
            pass
    coupling = spatial_coupling(basis, lperp_over_aho, tolerance, include_delta)
    save_coupling(coupling, path)
    return coupling
