"""Elliptic curves over Q: point counts, Hecke coefficients, period lattice and
the analytic uniformization C/(Z + tau Z) -> E(C)."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import mpmath
import numpy as np
from mpmath import mp

from .arith import factorize, is_prime, primes_up_to
from .errors import (BadReduction, BoundExceeded, NonConvergence, NotOnCurve,
                     PoleAtLattice)
from .mpnum import Approx, PrecisionContext, _agm_raw, to_fraction

log = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 10 ** 4
DEFAULT_AP_BOUND = 10 ** 6

KNOWN_CURVES = {
    "11a1": ((0, -1, 1, -10, -20), 11),
    "11a2": ((0, -1, 1, -7820, -263580), 11),
    "11a3": ((0, -1, 1, 0, 0), 11),
    "14a1": ((1, 0, 1, 4, -6), 14),
    "15a1": ((1, 1, 1, -10, -10), 15),
    "32a2": ((0, 0, 0, -1, 0), 32),
    "37a1": ((0, 0, 1, -1, 0), 37),
}


@dataclass(frozen=True)
class EllipticCurveData:
    ainvs: tuple
    conductor: int
    label: str = ""

    def __post_init__(self):
        if len(self.ainvs) != 5:
            raise ValueError("expected five Weierstrass coefficients a1, a2, a3, a4, a6")
        object.__setattr__(self, "ainvs", tuple(Fraction(a) for a in self.ainvs))
        if self.discriminant == 0:
            raise ValueError("singular Weierstrass equation (discriminant 0)")
        if self.conductor < 1:
            raise ValueError("conductor must be positive")

    @classmethod
    def from_label(cls, label: str) -> "EllipticCurveData":
        ainvs, conductor = KNOWN_CURVES[label]
        return cls(ainvs, conductor, label)

    @property
    def b2(self):
        a1, a2, a3, a4, a6 = self.ainvs
        return a1 * a1 + 4 * a2

    @property
    def b4(self):
        a1, a2, a3, a4, a6 = self.ainvs
        return 2 * a4 + a1 * a3

    @property
    def b6(self):
        a1, a2, a3, a4, a6 = self.ainvs
        return a3 * a3 + 4 * a6

    @property
    def b8(self):
        a1, a2, a3, a4, a6 = self.ainvs
        return a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4

    @property
    def c4(self):
        return self.b2 ** 2 - 24 * self.b4

    @property
    def c6(self):
        return -self.b2 ** 3 + 36 * self.b2 * self.b4 - 216 * self.b6

    @property
    def discriminant(self):
        b2, b4, b6, b8 = self.b2, self.b4, self.b6, self.b8
        return -b2 * b2 * b8 - 8 * b4 ** 3 - 27 * b6 * b6 + 9 * b2 * b4 * b6

    @property
    def j_invariant(self):
        return self.c4 ** 3 / self.discriminant

    def equation_residual(self, x, y):
        a1, a2, a3, a4, a6 = (mpmath.mpf(a.numerator) / a.denominator for a in self.ainvs)
        return y * y + a1 * x * y + a3 * y - (x ** 3 + a2 * x * x + a4 * x + a6)

    def is_good(self, p: int) -> bool:
        return self.conductor % p != 0


# ---------------------------------------------------------------------------
# point counting


def _reduce_mod(E: EllipticCurveData, p: int) -> list[int]:
    out = []
    for a in E.ainvs:
        if a.denominator % p == 0:
            raise BadReduction(f"model is not integral at {p}")
        out.append(a.numerator * pow(a.denominator, -1, p) % p)
    return out


def _legendre_vec(v: np.ndarray, p: int) -> np.ndarray:
    # Euler's criterion by vectorized square-and-multiply; p < 3e9 keeps products in int64
    result = np.ones_like(v)
    base = v % p
    e = (p - 1) // 2
    while e:
        if e & 1:
            result = result * base % p
        base = base * base % p
        e >>= 1
    out = np.where(result == p - 1, -1, result)
    return np.where(v % p == 0, 0, out)


def _affine_count(E: EllipticCurveData, p: int) -> int:
    """Number of affine F_p-solutions of the reduced Weierstrass equation."""
    a1, a2, a3, a4, a6 = _reduce_mod(E, p)
    if p == 2:
        return sum(1 for x in range(2) for y in range(2)
                   if (y * y + a1 * x * y + a3 * y - x ** 3 - a2 * x * x - a4 * x - a6) % 2 == 0)
    x = np.arange(p, dtype=np.int64)
    lin = (a1 * x + a3) % p
    cubic = (((x * x % p) * x) % p + a2 * (x * x % p) + a4 * x + a6) % p
    disc = (lin * lin + 4 * cubic) % p
    if p < EXHAUSTIVE_LIMIT:
        y = np.arange(p, dtype=np.int64)
        roots = np.bincount(y * y % p, minlength=p)
        return int(roots[disc].sum())
    return int(p + _legendre_vec(disc, p).sum())


def ap(E: EllipticCurveData, p: int, bound: int = DEFAULT_AP_BOUND) -> int:
    """Trace of Frobenius p + 1 - #E(F_p) at a good prime."""
    if not E.is_good(p):
        raise BadReduction(f"{p} divides the conductor {E.conductor}")
    if p > bound:
        raise BoundExceeded(f"p = {p} exceeds the point-count bound {bound}")
    return p - _affine_count(E, p)


def ap_bad(E: EllipticCurveData, p: int) -> int:
    """a_p in {-1, 0, 1} at a prime of bad reduction (minimal model assumed)."""
    if E.conductor % p != 0:
        raise ValueError(f"{p} is a prime of good reduction")
    if E.conductor % (p * p) == 0:
        return 0
    # nonsingular points plus the node: p - 1 (split) or p + 1 (non-split) affine points
    return p - _affine_count(E, p)


class ApCache:
    """Plain-text a_p store, one ``<label>.ap`` file per curve, lines ``p<TAB>a_p``."""

    def __init__(self, directory, label: str):
        if not label:
            raise ValueError("a_p cache needs a curve label")
        self.path = Path(directory) / f"{label}.ap"
        self.values: dict[int, int] = {}
        self._load()

    def _load(self):
        if not self.path.exists():
            return
        values = {}
        try:
            for lineno, line in enumerate(self.path.read_text().splitlines(), 1):
                if not line.strip():
                    continue
                p_str, a_str = line.split("\t")
                p, a = int(p_str), int(a_str)
                if not is_prime(p) or a * a > 4 * p:
                    raise ValueError(f"line {lineno}: ({p}, {a}) violates the Hasse bound")
                values[p] = a
        except ValueError as exc:
            log.warning("discarding corrupt a_p cache %s: %s", self.path, exc)
            self.path.unlink()
            return
        self.values = values

    def get(self, p: int) -> int | None:
        return self.values.get(p)

    def add_many(self, items: dict[int, int]):
        new = {p: a for p, a in items.items() if p not in self.values}
        if not new:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a") as fh:
            for p in sorted(new):
                fh.write(f"{p}\t{new[p]}\n")
        self.values.update(new)


def prime_traces(E: EllipticCurveData, n_max: int, cache: ApCache | None = None) -> dict[int, int]:
    """a_p for every prime p <= n_max, good and bad."""
    out = {}
    fresh = {}
    for p in primes_up_to(n_max):
        if not E.is_good(p):
            out[p] = ap_bad(E, p)
            continue
        cached = cache.get(p) if cache is not None else None
        if cached is None:
            cached = ap(E, p)
            fresh[p] = cached
        out[p] = cached
    if cache is not None and fresh:
        cache.add_many(fresh)
    return out


def _smallest_prime_factors(n: int) -> list[int]:
    spf = list(range(n + 1))
    for i in range(2, math.isqrt(n) + 1):
        if spf[i] == i:
            for j in range(i * i, n + 1, i):
                if spf[j] == j:
                    spf[j] = i
    return spf


def an_table(E: EllipticCurveData, n_max: int, cache: ApCache | None = None) -> list[int]:
    """Coefficients indexed by n (entry 0 is 0): a_1 = 1, multiplicative, Hecke recursion."""
    traces = prime_traces(E, n_max, cache)
    spf = _smallest_prime_factors(n_max)
    a = [0] * (n_max + 1)
    if n_max >= 1:
        a[1] = 1
    powers: dict[int, list[int]] = {}
    for n in range(2, n_max + 1):
        p = spf[n]
        m, k = n, 0
        while m % p == 0:
            m //= p
            k += 1
        seq = powers.setdefault(p, [1, traces[p]])
        while len(seq) <= k:
            if E.is_good(p):
                seq.append(traces[p] * seq[-1] - p * seq[-2])
            else:
                seq.append(traces[p] * seq[-1])
        a[n] = seq[k] * a[m]
    return a


def an_coefficients(E: EllipticCurveData, n_max: int, cache: ApCache | None = None) -> list[int]:
    """[a_1, ..., a_{n_max}]."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    return an_table(E, n_max, cache)[1:]


# ---------------------------------------------------------------------------
# period lattice


@dataclass(frozen=True)
class PeriodLattice:
    """Lattice Z omega1 + Z omega2 of the invariant differential, tau = omega2/omega1.

    ``rhombic`` is True when Re(tau) = 1/2 (negative discriminant), in which
    case q = exp(2 pi i tau) is negative.
    """

    omega1: object
    omega2: object
    tau: object
    q: object
    rhombic: bool
    err: object

    @property
    def conj_shift(self) -> int:
        return 1 if self.rhombic else 0

    @property
    def im_tau(self):
        return mpmath.im(self.tau)


def _mpq(a: Fraction):
    return mpmath.mpf(a.numerator) / a.denominator


def eisenstein_E4_E6(q):
    tol = mpmath.ldexp(mpmath.mpf(1), -mp.prec)
    e4 = mpmath.mpf(0)
    e6 = mpmath.mpf(0)
    qn = q
    n = 1
    while abs(qn) * n ** 5 > tol or n < 3:
        w = qn / (1 - qn)
        e4 += n ** 3 * w
        e6 += n ** 5 * w
        n += 1
        qn *= q
    return 1 + 240 * e4, 1 - 504 * e6


def lattice_invariants(L: PeriodLattice):
    """(c4, c6) of the model reproduced from the lattice via E4, E6."""
    e4, e6 = eisenstein_E4_E6(L.q)
    scale = 2 * mpmath.pi / L.omega1
    return scale ** 4 * e4, scale ** 6 * e6


def periods(E: EllipticCurveData, ctx: PrecisionContext) -> PeriodLattice:
    with ctx.workprec():
        b2, b4, b6 = (_mpq(E.b2), _mpq(E.b4), _mpq(E.b6))
        roots = mpmath.polyroots([4, b2, 2 * b4, b6], maxsteps=400, extraprec=2 * ctx.work_bits)
        max_iter = 4 * ctx.bits
        sq = mpmath.sqrt
        if E.discriminant > 0:
            e1, e2, e3 = sorted((mpmath.re(r) for r in roots), reverse=True)
            omega1 = mpmath.re(mpmath.pi / _agm_raw(sq(e1 - e3), sq(e1 - e2), max_iter))
            omega2 = 1j * mpmath.pi / mpmath.re(_agm_raw(sq(e1 - e3), sq(e2 - e3), max_iter))
            tau = mpmath.mpc(0, mpmath.im(omega2) / omega1)
            rhombic = False
        else:
            e1 = mpmath.re(min(roots, key=lambda r: abs(mpmath.im(r))))
            e2 = max(roots, key=lambda r: mpmath.im(r))
            e3 = mpmath.conj(e2)
            omega1 = mpmath.re(mpmath.pi / _agm_raw(sq(e1 - e2), sq(e1 - e3), max_iter))
            w = mpmath.pi / _agm_raw(sq(e2 - e1), sq(e2 - e3), max_iter)
            t0 = w / omega1
            if mpmath.im(t0) < 0:
                t0 = -t0
            frac = mpmath.re(t0) - mpmath.floor(mpmath.re(t0))
            if abs(frac - 0.5) > 1e-6:
                raise NonConvergence("period computation did not produce a rhombic lattice")
            tau = mpmath.mpc(0.5, mpmath.im(t0))
            rhombic = True
        if omega1 <= 0:
            raise NonConvergence("real period is not positive")
        q = mpmath.exp(-2 * mpmath.pi * mpmath.im(tau))
        if rhombic:
            q = -q
        L = PeriodLattice(omega1, tau * omega1, tau, q, rhombic, ctx.error_for(omega1))
        c4, c6 = lattice_invariants(L)
        scale = max(1, abs(_mpq(E.c4)), abs(_mpq(E.c6)))
        defect = max(abs(c4 - _mpq(E.c4)), abs(c6 - _mpq(E.c6))) / scale
        if defect > mpmath.ldexp(mpmath.mpf(1), -ctx.bits // 2):
            raise NonConvergence(f"lattice does not reproduce c4, c6 (relative defect {mpmath.nstr(defect, 3)})")
        return L


# ---------------------------------------------------------------------------
# points on the torus


def _coord(v):
    return v if isinstance(v, Fraction) else mpmath.mpf(v)


def _frac_part(v):
    if isinstance(v, Fraction):
        return v - math.floor(v)
    return v - mpmath.floor(v)


def _as_mpf(v):
    return _mpq(v) if isinstance(v, Fraction) else v


@dataclass(frozen=True)
class TorusPoint:
    """z = r + s tau modulo Z + Z tau.  Exact when both coordinates are Fractions."""

    r: object
    s: object

    @classmethod
    def exact(cls, r, s=0) -> "TorusPoint":
        return cls(Fraction(r), Fraction(s)).reduced()

    @classmethod
    def numeric(cls, r, s) -> "TorusPoint":
        return cls(mpmath.mpf(r), mpmath.mpf(s)).reduced()

    @classmethod
    def from_complex(cls, z, L: PeriodLattice) -> "TorusPoint":
        """From a point of C in lattice-normalized units (periods 1 and tau)."""
        s = mpmath.im(z) / L.im_tau
        r = mpmath.re(z) - s * mpmath.re(L.tau)
        return cls.numeric(r, s)

    @property
    def is_exact(self) -> bool:
        return isinstance(self.r, Fraction) and isinstance(self.s, Fraction)

    def reduced(self) -> "TorusPoint":
        return TorusPoint(_frac_part(self.r), _frac_part(self.s))

    def _combine(self, other, sign):
        if self.is_exact and other.is_exact:
            return TorusPoint(self.r + sign * other.r, self.s + sign * other.s).reduced()
        return TorusPoint(_as_mpf(self.r) + sign * _as_mpf(other.r),
                          _as_mpf(self.s) + sign * _as_mpf(other.s)).reduced()

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return TorusPoint(-self.r, -self.s).reduced()

    def __mul__(self, k: int):
        return TorusPoint(self.r * k, self.s * k).reduced()

    __rmul__ = __mul__

    def conjugate(self, conj_shift: int) -> "TorusPoint":
        """Complex conjugate; conj(tau) = conj_shift - tau on the normalized lattice."""
        return TorusPoint(self.r + conj_shift * self.s, -self.s).reduced()

    def is_origin(self, tol=0) -> bool:
        return _as_mpf(self.distance(ORIGIN)) <= tol

    def distance(self, other: "TorusPoint"):
        """Max-norm distance between lattice coordinates modulo 1."""
        if self.is_exact and other.is_exact:
            d = (self - other)
            return max(min(d.r, 1 - d.r), min(d.s, 1 - d.s))
        d = self - other
        r, s = _as_mpf(d.r), _as_mpf(d.s)
        return max(min(r, 1 - r), min(s, 1 - s))

    @property
    def order(self) -> int | None:
        if not self.is_exact:
            return None
        return math.lcm(self.r.denominator, self.s.denominator)

    def to_complex(self, L: PeriodLattice):
        return _as_mpf(self.r) + _as_mpf(self.s) * L.tau

    def multiplier(self, L: PeriodLattice):
        """x = exp(2 pi i z) for the representative with 0 <= s < 1, so |q| < |x| <= 1."""
        p = self.reduced()
        return mpmath.exp(2j * mpmath.pi * p.to_complex(L))

    def __str__(self):
        if self.is_exact:
            return f"({self.r}, {self.s})"
        return f"({mpmath.nstr(self.r, 15)}, {mpmath.nstr(self.s, 15)})"


ORIGIN = TorusPoint(Fraction(0), Fraction(0))


# ---------------------------------------------------------------------------
# Weierstrass functions


def _wp_normalized(u, q):
    """(wp(z), wp'(z)) on Z + tau Z, u = exp(2 pi i z), assuming |q|^(1/2) <= |u| <= |q|^(-1/2)."""
    tol = mpmath.ldexp(mpmath.mpf(1), -mp.prec)
    if abs(1 - u) < tol:
        raise PoleAtLattice("z is a lattice point")
    p = mpmath.mpf(1) / 12 + u / (1 - u) ** 2
    dp = u * (1 + u) / (1 - u) ** 3
    qn = q
    n = 1
    while True:
        a = qn * u
        b = qn / u
        p += a / (1 - a) ** 2 + b / (1 - b) ** 2 - 2 * qn / (1 - qn) ** 2
        dp += a * (1 + a) / (1 - a) ** 3 - b * (1 + b) / (1 - b) ** 3
        if abs(b) < tol * 1e-3 and abs(a) < tol * 1e-3:
            break
        n += 1
        qn *= q
        if n > 20 * mp.prec:
            raise NonConvergence("q-series for wp did not converge")
    c = 2j * mpmath.pi
    return c * c * p, c ** 3 * dp


def _centered(P: TorusPoint, L: PeriodLattice):
    p = P.reduced()
    r, s = _as_mpf(p.r), _as_mpf(p.s)
    if s >= 0.5:
        s -= 1
    return r + s * L.tau


def weierstrass_p(E: EllipticCurveData, L: PeriodLattice, z, ctx: PrecisionContext):
    """(x, y) on the given model for the torus point z (TorusPoint or normalized complex)."""
    with ctx.workprec():
        P = z if isinstance(z, TorusPoint) else TorusPoint.from_complex(z, L)
        if P.is_origin(tol=mpmath.ldexp(mpmath.mpf(1), -ctx.work_bits + 8)):
            raise PoleAtLattice("z is a lattice point")
        u = mpmath.exp(2j * mpmath.pi * _centered(P, L))
        wp, dwp = _wp_normalized(u, L.q)
        wp /= L.omega1 ** 2
        dwp /= L.omega1 ** 3
        a1, a2, a3, a4, a6 = (_mpq(a) for a in E.ainvs)
        x = wp - _mpq(E.b2) / 12
        y = (dwp - a1 * x - a3) / 2
        return x, y


def _wp_grid(q: complex, tau: complex, n: int = 96):
    """Double-precision wp, wp' on an n x n grid of the fundamental domain."""
    r = (np.arange(n) + 0.5) / n
    s = (np.arange(n) + 0.5) / n - 0.5
    R, S = np.meshgrid(r, s, indexing="ij")
    z = R + S * tau
    u = np.exp(2j * np.pi * z)
    p = 1 / 12 + u / (1 - u) ** 2
    dp = u * (1 + u) / (1 - u) ** 3
    qn = q
    for _ in range(200):
        a = qn * u
        b = qn / u
        p = p + a / (1 - a) ** 2 + b / (1 - b) ** 2 - 2 * qn / (1 - qn) ** 2
        dp = dp + a * (1 + a) / (1 - a) ** 3 - b * (1 + b) / (1 - b) ** 3
        if abs(qn) < 1e-18:
            break
        qn *= q
    c = 2j * np.pi
    return z, c * c * p, c ** 3 * dp


def elliptic_log(E: EllipticCurveData, L: PeriodLattice, point, ctx: PrecisionContext) -> TorusPoint:
    """Inverse of :func:`weierstrass_p`; ``point`` is (x, y) or None for the origin."""
    if point is None:
        return ORIGIN
    with ctx.workprec():
        x, y = (mpmath.mpmathify(c) for c in point)
        scale = max(1, abs(x)) ** 3
        tol = mpmath.ldexp(mpmath.mpf(1), -ctx.bits // 2) * scale
        if abs(E.equation_residual(x, y)) > tol:
            raise NotOnCurve("point does not satisfy the Weierstrass equation")
        a1, a2, a3, a4, a6 = (_mpq(a) for a in E.ainvs)
        target = (x + _mpq(E.b2) / 12) * L.omega1 ** 2
        target_d = (2 * y + a1 * x + a3) * L.omega1 ** 3
        # 2-torsion: compare against the three half periods exactly
        if abs(target_d) <= tol * max(1, abs(L.omega1) ** 3):
            for cand in (TorusPoint.exact(Fraction(1, 2), 0), TorusPoint.exact(0, Fraction(1, 2)),
                         TorusPoint.exact(Fraction(1, 2), Fraction(1, 2))):
                wp, _ = _wp_normalized(mpmath.exp(2j * mpmath.pi * _centered(cand, L)), L.q)
                if abs(wp - target) <= tol * max(1, abs(target)) * 1e3:
                    return cand
        tau_c, q_c = complex(L.tau), complex(L.q)
        grid_z, grid_p, grid_dp = _wp_grid(q_c, tau_c)
        t, td = complex(target), complex(target_d)
        score = np.abs(grid_p - t) / (1 + abs(t)) + np.abs(grid_dp - td) / (1 + abs(td))
        z = mpmath.mpc(grid_z.flat[int(np.argmin(score))])
        # Newton on wp(z) - target; wp and wp' are recomputed at full precision
        for _ in range(200):
            u = mpmath.exp(2j * mpmath.pi * z)
            wp, dwp = _wp_normalized(u, L.q)
            step = (wp - target) / dwp
            z -= step
            if abs(step) < mpmath.ldexp(mpmath.mpf(1), -ctx.work_bits + 4):
                break
        else:
            raise NonConvergence("elliptic logarithm Newton iteration did not converge")
        _, dwp = _wp_normalized(mpmath.exp(2j * mpmath.pi * z), L.q)
        if abs(dwp - target_d) > abs(dwp + target_d):
            z = -z
        return TorusPoint.from_complex(z, L)


def torsion_points(n: int) -> list[TorusPoint]:
    """All n-torsion points (r/n, s/n), origin excluded."""
    return [TorusPoint.exact(Fraction(i, n), Fraction(j, n))
            for i in range(n) for j in range(n) if i or j]
