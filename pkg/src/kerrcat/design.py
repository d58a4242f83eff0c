"""Exact design of multi-order Kerr coefficients for parity-split cat formation.

The phase polynomial ``p(n) = sum_j K_j n^j`` is written in the binomial basis
``p(n) = sum_r a_r C(n, r)``. With ``t_c = pi * tc'`` and residues
``gamma_r = a_r tc'`` the cat condition ``p(n) tc' = 0 (even n), 1/2 (odd n)
(mod 2)`` reduces to ``gamma_1 = 1/2, gamma_2 = 1, gamma_{r>=3} = 0 (mod 2)``.
Everything here is exact :class:`fractions.Fraction` arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DomainError


@lru_cache(maxsize=None)
def stirling_first(n: int, k: int) -> int:
    """Signed Stirling number of the first kind, ``x(x-1)...(x-n+1) = sum_k s(n,k) x^k``."""
    if n < 0 or k < 0:
        raise DomainError("Stirling numbers need non-negative arguments")
    if k > n:
        raise DomainError(f"s({n},{k}) undefined for k > n")
    if n == 0:
        return 1 if k == 0 else 0
    if k == 0:
        return 0
    # s(n, k) = s(n-1, k-1) - (n-1) s(n-1, k)
    upper = stirling_first(n - 1, k) if k <= n - 1 else 0
    return stirling_first(n - 1, k - 1) - (n - 1) * upper


def residue_class(r: int) -> Fraction:
    """Required residue of ``gamma_r`` modulo 2."""
    if r == 1:
        return Fraction(1, 2)
    if r == 2:
        return Fraction(1)
    return Fraction(0)


def in_residue_class(value: Fraction, r: int) -> bool:
    diff = Fraction(value) - residue_class(r)
    return diff.denominator == 1 and diff.numerator % 2 == 0


@dataclass(frozen=True)
class GammaSolution:
    m: int
    gammas: tuple[Fraction, ...]

    def __post_init__(self):
        if self.m < 2:
            raise DomainError("maximum order m must be >= 2")
        if len(self.gammas) != self.m:
            raise DomainError(f"expected {self.m} residues, got {len(self.gammas)}")
        g = tuple(Fraction(x) for x in self.gammas)
        object.__setattr__(self, "gammas", g)
        for r, value in enumerate(g, start=1):
            if not in_residue_class(value, r):
                raise DomainError(f"gamma_{r} = {value} violates gamma_{r} = {residue_class(r)} (mod 2)")
        if g[-1] == 0:
            raise DomainError("gamma_m = 0 gives zero preparation time")

    @property
    def tc_prime(self) -> Fraction:
        return self.gammas[-1] / math.factorial(self.m)


@dataclass(frozen=True)
class NonlinearDesign:
    """Coefficients ``K_1 .. K_m`` (``K_m = 1``) and preparation time ``tc``.

    ``coeffs[0]`` is the linear rotating-frame term ``K_1``.
    """

    m: int
    coeffs: tuple[Fraction, ...]
    tc_prime: Fraction
    gammas: tuple[Fraction, ...] = ()

    @property
    def tc(self) -> float:
        return math.pi * float(self.tc_prime)

    def coeffs_float(self) -> np.ndarray:
        return np.array([float(k) for k in self.coeffs])

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "gammas": [str(g) for g in self.gammas],
            "coeffs": [str(k) for k in self.coeffs],
            "coeffs_float": [float(k) for k in self.coeffs],
            "tc_prime": str(self.tc_prime),
            "tc": self.tc,
        }


def minimal_gammas(m: int) -> tuple[Fraction, ...]:
    """Canonical residues giving the shortest positive ``tc'``."""
    if m < 2:
        raise DomainError("maximum order m must be >= 2")
    g = [Fraction(1, 2), Fraction(1)] + [Fraction(0)] * (m - 2)
    if m > 2:
        g[-1] = Fraction(2)
    return tuple(g)


def _polynomial_coeffs(gammas: Sequence[Fraction], tc_prime: Fraction) -> tuple[Fraction, ...]:
    m = len(gammas)
    a = [Fraction(g) / tc_prime for g in gammas]
    return tuple(
        sum((Fraction(stirling_first(r, j), math.factorial(r)) * a[r - 1]
             for r in range(j, m + 1)), Fraction(0))
        for j in range(1, m + 1)
    )


def binomial_to_polynomial(sol: GammaSolution) -> NonlinearDesign:
    """``K_j = sum_r s(r, j)/r! * gamma_r / tc'``, including the linear term ``K_1``."""
    t = sol.tc_prime
    return NonlinearDesign(sol.m, _polynomial_coeffs(sol.gammas, t), t, sol.gammas)


def polynomial_to_binomial(coeffs: Sequence[Fraction]) -> tuple[Fraction, ...]:
    """Inverse basis change: binomial coefficients ``a_r`` from ``K_1 .. K_m``.

    Uses ``n^j = sum_r S(j, r) r! C(n, r)`` with Stirling numbers of the second
    kind, computed here by finite differences of ``n^j`` at zero.
    """
    m = len(coeffs)
    values = [sum((Fraction(k) * n ** j for j, k in enumerate(coeffs, start=1)), Fraction(0))
              for n in range(m + 1)]
    # a_r is the r-th forward difference of p at 0
    out = []
    for r in range(1, m + 1):
        out.append(sum((Fraction((-1) ** (r - i) * math.comb(r, i)) * values[i]
                        for i in range(r + 1)), Fraction(0)))
    return tuple(out)


def _search_constrained(m: int, bound: Fraction, window: int, include_linear: bool):
    """Depth-first search over residue representatives with |K_j| <= bound.

    ``K_j`` depends only on ``gamma_r`` for ``r >= j`` (triangular basis
    change), so the search fixes ``gamma_m`` at its minimal value and walks
    ``j = m-1 .. 1``, pruning as soon as a constrained ``K_j`` violates the
    bound. Returns the representatives minimizing ``max |K_j|``.
    """
    gm = minimal_gammas(m)[-1]
    tcp = gm / math.factorial(m)
    diag = [Fraction(1, math.factorial(j)) / tcp for j in range(1, m + 1)]

    def candidates(r):
        base = residue_class(r)
        lo, hi = -2 * window, 2 * window
        k0 = math.ceil((lo - base) / 2)
        k1 = math.floor((hi - base) / 2)
        return [base + 2 * k for k in range(k0, k1 + 1)]

    best = [None, None]

    def k_value(j, gam):
        # contribution of gamma_r, r > j, to K_j (gam indexed 1..m)
        return sum((Fraction(stirling_first(r, j), math.factorial(r)) * gam[r] / tcp
                    for r in range(j + 1, m + 1)), Fraction(0))

    def walk(j, gam, worst):
        if best[0] is not None and worst > best[0]:
            return
        if j == 0:
            key = (worst, sum(abs(x) for x in gam.values()))
            if best[0] is None or key < (best[0], best[1][0]):
                best[0] = worst
                best[1] = (key[1], dict(gam))
            return
        rest = k_value(j, gam)
        constrained = j >= 2 or include_linear
        opts = []
        for g in candidates(j):
            kj = rest + diag[j - 1] * g
            if constrained and abs(kj) > bound:
                continue
            opts.append((abs(kj), abs(g), g, kj))
        opts.sort()
        if not constrained:
            opts = opts[:1]
        for akj, _, g, kj in opts:
            gam[j] = g
            walk(j - 1, gam, max(worst, akj) if constrained else worst)
            del gam[j]

    walk(m - 1, {m: gm}, Fraction(0))
    if best[0] is None:
        return None
    gam = best[1][1]
    return tuple(gam[r] for r in range(1, m + 1))


def solve_gammas(m: int, minimize_time: bool = True, constraint: float | None = None,
                 window: int = 5, include_linear: bool = False) -> GammaSolution:
    """Residues ``gamma_1 .. gamma_m`` solving the parity congruences.

    With ``minimize_time`` the time-setting residue ``gamma_m`` takes its
    smallest positive value: ``tc' = 1/2`` for ``m = 2`` and ``2/m!`` otherwise.
    ``constraint = c`` additionally enforces ``|K_j| <= c`` (``K_m = 1``) for
    ``2 <= j < m`` (and ``j = 1`` when ``include_linear``), searching
    representatives in ``[-2 window, 2 window]``.
    """
    if m < 2:
        raise DomainError("maximum order m must be >= 2")
    if not minimize_time and constraint is None:
        raise DomainError("minimize_time=False needs explicit residues; build GammaSolution directly")
    if constraint is None:
        return GammaSolution(m, minimal_gammas(m))
    if constraint < 0:
        raise DomainError("constraint must be non-negative")
    found = _search_constrained(m, Fraction(constraint).limit_denominator(10 ** 9),
                                window, include_linear)
    if found is None:
        raise DomainError(f"no residue representatives within window {window} satisfy |K_j| <= {constraint}")
    return GammaSolution(m, found)


def design(m: int, constraint: float | None = None, **kwargs) -> NonlinearDesign:
    return binomial_to_polynomial(solve_gammas(m, constraint=constraint, **kwargs))


def minimal_time(m: int) -> Fraction:
    """Shortest ``tc'`` (time in units of ``pi/K_m``)."""
    return Fraction(1, 2) if m == 2 else Fraction(2, math.factorial(m))


def phase_polynomial(coeffs: Sequence, n) -> np.ndarray:
    """``p(n) = sum_j K_j n^j`` with ``coeffs[0] = K_1``; exact for Fraction input."""
    n = np.asarray(n)
    c = [float(k) for k in coeffs]
    out = np.zeros(n.shape, dtype=float)
    for j, k in enumerate(c, start=1):
        out = out + k * n.astype(float) ** j
    return out


@dataclass(frozen=True)
class ParityCheck:
    passed: bool
    distinct_phases: int
    period: int | None
    theta_even: float

    def __bool__(self):
        return self.passed


def _as_time_fraction(t) -> Fraction | None:
    """``t/pi`` as an exact rational when ``t`` is (numerically) a rational multiple of pi."""
    if isinstance(t, Fraction):
        return t
    x = float(t) / math.pi
    frac = Fraction(x).limit_denominator(10 ** 8)
    if abs(float(frac) - x) <= 1e-14 * max(1.0, abs(x)):
        return frac
    return None


def _phase_mod(coeffs, t, nmax: int) -> np.ndarray:
    """``p(n) t mod 2 pi`` for ``n = 0 .. nmax``.

    Large ``n^j`` make double-precision reduction useless, so coefficients are
    taken as exact rationals (floats convert exactly) and ``t/pi`` is snapped
    to a rational when possible; otherwise 60-digit arithmetic is used.
    """
    ks = [Fraction(k) for k in coeffs]
    tp = _as_time_fraction(t)
    if tp is not None:
        out = []
        for n in range(nmax + 1):
            v = sum((k * n ** j for j, k in enumerate(ks, start=1)), Fraction(0)) * tp
            out.append(float(v % 2) * math.pi)
        return np.array(out)
    import mpmath

    with mpmath.workdps(60):
        tt = mpmath.mpf(float(t))
        two_pi = 2 * mpmath.pi
        out = []
        for n in range(nmax + 1):
            v = sum((k * n ** j for j, k in enumerate(ks, start=1)), Fraction(0))
            ph = mpmath.mpf(v.numerator) / v.denominator * tt
            out.append(float(ph - two_pi * mpmath.floor(ph / two_pi)))
    return np.array(out)


def _circ_close(a, b, tol):
    d = np.mod(np.asarray(a) - np.asarray(b) + math.pi, 2 * math.pi) - math.pi
    return np.abs(d) <= tol


def verify_parity(coeffs: Sequence, t, nmax: int = 30, tol: float = 1e-9) -> ParityCheck:
    """Check that ``e^{-i p(n) t}`` depends only on the parity of ``n``.

    Passes iff all even-``n`` phases equal some ``theta_e`` and all odd-``n``
    phases equal ``theta_e + pi/2`` (mod 2 pi). Also reports the number of
    distinct phase values and the smallest period ``q`` of the phase pattern
    in ``n`` (a ``q``-periodic pattern is a fractional revival with at most
    ``q`` components); ``period`` is None when no period ``<= nmax/2`` exists.

    ``t`` may be a float, or a :class:`Fraction` giving ``t/pi`` exactly.
    """
    if nmax < len(coeffs) + 2:
        raise DomainError(f"nmax must be >= m+2 = {len(coeffs) + 2}")
    ph = _phase_mod(coeffs, t, nmax)
    theta = ph[0]
    even, odd = ph[0::2], ph[1::2]
    passed = bool(np.all(_circ_close(even, theta, tol)) and
                  np.all(_circ_close(odd, theta + math.pi / 2, tol)))
    distinct: list[float] = []
    for v in ph:
        if not any(_circ_close(v, d, tol) for d in distinct):
            distinct.append(v)
    period = None
    for q in range(1, nmax // 2 + 1):
        if np.all(_circ_close(ph[q:], ph[:-q], tol)):
            period = q
            break
    return ParityCheck(passed, len(distinct), period, float(theta))


def random_gamma_solution(m: int, rng: np.random.Generator, window: int = 5) -> GammaSolution:
    """Random valid residues with ``gamma_m > 0`` (used for property tests)."""
    g = []
    for r in range(1, m + 1):
        base = residue_class(r)
        if r == m:
            k = int(rng.integers(0 if base > 0 else 1, window + 1))
        else:
            k = int(rng.integers(-window, window + 1))
        g.append(base + 2 * k)
    return GammaSolution(m, tuple(g))
