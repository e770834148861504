"""Angular-momentum algebra for a pair of rigid rotors.

Clebsch-Gordan coefficients (Condon-Shortley phases), reduced dipole matrix
elements, the pair basis at fixed total projection M and the three internal
operators entering the pair Hamiltonian:

* ``jsq``     -- j1(j1+1) + j2(j2+1), in units of B
* ``w_field`` -- -(d0^(1) + d0^(2)) / d
* ``g_pair``  -- (d0 d0 + 1/2 d+ d- + 1/2 d- d+) / d^2, the projection-conserving
  part of the dipole-dipole coupling
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyBasisError, ValidationError

PairState = tuple[int, int, int, int]  # (j1, m1, j2, m2)


@dataclass(frozen=True)
class RotorState:
    j: int
    m: int

    def __post_init__(self):
        if self.j < 0 or abs(self.m) > self.j:
            raise ValidationError("RotorState", f"invalid |j m> = |{self.j} {self.m}>")


def _check_j(*js):
    for j in js:
        if int(j) != j or j < 0:
            raise ValidationError("j", f"angular momenta must be non-negative integers, got {j!r}")


@lru_cache(maxsize=None)
def _cg_exact(j1: int, m1: int, j2: int, m2: int, J: int, M: int) -> tuple[int, Fraction]:
    """Return (sign, square) of the coefficient as exact rationals (Racah's sum)."""
    if M != m1 + m2 or not abs(j1 - j2) <= J <= j1 + j2:
        return 0, Fraction(0)
    if abs(m1) > j1 or abs(m2) > j2 or abs(M) > J:
        return 0, Fraction(0)
    f = factorial
    pre = Fraction(
        (2 * J + 1) * f(J + j1 - j2) * f(J - j1 + j2) * f(j1 + j2 - J),
        f(j1 + j2 + J + 1),
    ) * (f(J + M) * f(J - M) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2))
    kmin = max(0, j2 - J - m1, j1 - J + m2)
    kmax = min(j1 + j2 - J, j1 - m1, j2 + m2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            f(k)
            * f(j1 + j2 - J - k)
            * f(j1 - m1 - k)
            * f(j2 + m2 - k)
            * f(J - j2 + m1 + k)
            * f(J - j1 - m2 + k)
        )
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0, Fraction(0)
    return (1 if total > 0 else -1), total * total * pre


def clebsch_gordan(j1: int, m1: int, j2: int, m2: int, J: int, M: int) -> float:
    """<j1 m1; j2 m2 | J M>; exactly zero whenever a selection rule fails."""
    _check_j(j1, j2, J)
    sign, square = _cg_exact(int(j1), int(m1), int(j2), int(m2), int(J), int(M))
    if sign == 0:
        return 0.0
    return sign * sqrt(square)


def dipole_element(j: int, m: int, q: int, direction: str) -> float:
    """<j +- 1, m + q | d_q | j, m> / d.

    ``direction`` is ``"raise"`` (j -> j + 1) or ``"lower"`` (j -> j - 1).
    Returns 0 when the target state does not exist.
    """
    _check_j(j)
    if abs(m) > j:
        raise ValidationError("m", f"|m| must be <= j, got j={j}, m={m}")
    if q not in (-1, 0, 1):
        raise ValidationError("q", f"spherical component must be -1, 0 or 1, got {q!r}")
    if direction == "raise":
        jp = j + 1
    elif direction == "lower":
        jp = j - 1
    else:
        raise ValidationError("direction", f"expected 'raise' or 'lower', got {direction!r}")
    if jp < 0 or abs(m + q) > jp:
        return 0.0
    return (
        clebsch_gordan(j, m, 1, q, jp, m + q)
        * clebsch_gordan(j, 0, 1, 0, jp, 0)
        * sqrt((2 * j + 1) / (2 * jp + 1))
    )


def rotor_states(j_max: int) -> list[tuple[int, int]]:
    return [(j, m) for j in range(j_max + 1) for m in range(-j, j + 1)]


def single_dipole_matrix(j_max: int, q: int) -> np.ndarray:
    """Matrix of d_q / d in :func:`rotor_states` order (rows = final state)."""
    states = rotor_states(j_max)
    index = {s: i for i, s in enumerate(states)}
    out = np.zeros((len(states), len(states)))
    for (j, m), col in index.items():
        for direction, jp in (("raise", j + 1), ("lower", j - 1)):
            if 0 <= jp <= j_max and abs(m + q) <= jp:
                out[index[(jp, m + q)], col] = dipole_element(j, m, q, direction)
    return out


def rotor_stark_matrix(j_max: int, m: int, beta: float) -> np.ndarray:
    """Single rotor j(j+1) - beta d0/d at fixed m, in units of B."""
    states = rotor_states(j_max)
    keep = [i for i, (_, mm) in enumerate(states) if mm == m]
    if not keep:
        raise EmptyBasisError("m", f"no rotor state with m={m} for j_max={j_max}")
    d0 = single_dipole_matrix(j_max, 0)[np.ix_(keep, keep)]
    diag = np.array([states[i][0] * (states[i][0] + 1) for i in keep], dtype=float)
    return np.diag(diag) - beta * d0


def _rot_energy(state: PairState) -> int:
    j1, _, j2, _ = state
    return j1 * (j1 + 1) + j2 * (j2 + 1)


@dataclass(frozen=True)
class InternalPairBasis:
    """Pair rotor states at fixed total projection.

    ``states`` are sorted by rotational energy j1(j1+1)+j2(j2+1) and then
    lexicographically, so the lowest rotational branch always comes first.
    ``M`` is an int, or a tuple of ints for a merged multi-M basis.
    """

    j_max: int
    M: int | tuple[int, ...]
    states: tuple[PairState, ...]

    def __len__(self):
        return len(self.states)

    def index(self, state: Sequence[int]) -> int:
        return self.states.index(tuple(state))

    def vector(self, amplitudes: dict[PairState, float]) -> np.ndarray:
        """Internal-space vector from {pair state: amplitude}."""
        v = np.zeros(len(self.states))
        for state, amp in amplitudes.items():
            v[self.index(state)] = amp
        return v

    def exchange_matrix(self) -> np.ndarray:
        """Permutation swapping molecule 1 and molecule 2."""
        n = len(self.states)
        out = np.zeros((n, n))
        for i, (j1, m1, j2, m2) in enumerate(self.states):
            out[self.index((j2, m2, j1, m1)), i] = 1.0
        return out

    def parity_isometry(self, parity: int) -> np.ndarray:
        """Orthonormal columns spanning the exchange-symmetric (+1) or
        antisymmetric (-1) subspace, in product-state order."""
        if parity not in (1, -1):
            raise ValidationError("parity", f"must be +1 or -1, got {parity!r}")
        cols = []
        done = set()
        for i, (j1, m1, j2, m2) in enumerate(self.states):
            k = self.index((j2, m2, j1, m1))
            if i in done:
                continue
            done.update((i, k))
            v = np.zeros(len(self.states))
            if i == k:
                if parity == 1:
                    v[i] = 1.0
                    cols.append(v)
            else:
                v[i] = 1.0 / sqrt(2.0)
                v[k] = parity / sqrt(2.0)
                cols.append(v)
        if not cols:
            raise EmptyBasisError("parity", f"no states of exchange parity {parity} for M={self.M}")
        return np.array(cols).T

    def branch_energies(self) -> np.ndarray:
        """j1(j1+1) + j2(j2+1) for each state, in units of B."""
        return np.array([_rot_energy(s) for s in self.states], dtype=float)


def enumerate_internal(j_max: int, M: int | Iterable[int]) -> InternalPairBasis:
    """All pair states with m1 + m2 = M and j1, j2 <= j_max."""
    _check_j(j_max)
    Ms = (int(M),) if np.isscalar(M) else tuple(sorted(int(x) for x in M))
    singles = rotor_states(j_max)
    states = [
        (j1, m1, j2, m2)
        for (j1, m1) in singles
        for (j2, m2) in singles
        if m1 + m2 in Ms
    ]
    if not states:
        raise EmptyBasisError("M", f"no pair states with M={M} for j_max={j_max}")
    states.sort(key=lambda s: (_rot_energy(s),) + s)
    return InternalPairBasis(j_max, Ms[0] if np.isscalar(M) else Ms, tuple(states))


@dataclass(frozen=True)
class InternalOperators:
    jsq: np.ndarray
    w_field: np.ndarray
    g_pair: np.ndarray

    def __post_init__(self):
        # exact symmetry, so Kronecker products stay symmetric to the last bit
        for name in ("jsq", "w_field", "g_pair"):
            op = getattr(self, name)
            object.__setattr__(self, name, 0.5 * (op + op.T))

    def transformed(self, iso: np.ndarray) -> "InternalOperators":
        """Operators restricted to the column space of ``iso``."""
        return InternalOperators(*(iso.T @ op @ iso for op in (self.jsq, self.w_field, self.g_pair)))


def build_internal_operators(basis: InternalPairBasis) -> InternalOperators:
    if len(basis) == 0:
        raise EmptyBasisError("basis", "internal basis is empty")
    singles = rotor_states(basis.j_max)
    sidx = {s: i for i, s in enumerate(singles)}
    d0, dp, dm = (single_dipole_matrix(basis.j_max, q) for q in (0, 1, -1))
    one = np.eye(len(singles))

    # full two-rotor operators, then restricted to the chosen pair states
    rows = [sidx[(j1, m1)] * len(singles) + sidx[(j2, m2)] for (j1, m1, j2, m2) in basis.states]
    sel = np.ix_(rows, rows)
    w = -(np.kron(d0, one) + np.kron(one, d0))[sel]
    g = (np.kron(d0, d0) + 0.5 * np.kron(dp, dm) + 0.5 * np.kron(dm, dp))[sel]
    jsq = np.diag(basis.branch_energies())
    return InternalOperators(jsq=jsq, w_field=w, g_pair=g)
