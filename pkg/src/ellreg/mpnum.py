"""Arbitrary-precision numeric kernel.

All real and complex arithmetic goes through mpmath.  Public functions take a
:class:`PrecisionContext`, run at ``bits + guard_bits`` internally and return
:class:`Approx` values that carry a heuristic absolute error next to the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
from mpmath import mp

from .errors import DomainError, NonConvergence, PrecisionTooLow

__all__ = [
    "PrecisionContext",
    "Approx",
    "RationalGuess",
    "li2",
    "bloch_wigner_D",
    "jay",
    "exp_integral_E1",
    "agm",
    "rational_reconstruct",
    "integer_relation",
    "simultaneous_relation",
    "lll_reduce",
    "to_fraction",
]


@dataclass(frozen=True)
class PrecisionContext:
    bits: int = 384
    guard_bits: int = 16

    def __post_init__(self):
        if self.bits < 64:
            raise ValueError(f"precision must be at least 64 bits, got {self.bits}")
        if self.guard_bits < 0:
            raise ValueError("guard_bits must be non-negative")

    @classmethod
    def from_digits(cls, digits: int, guard_bits: int = 16) -> "PrecisionContext":
        return cls(max(64, math.ceil(digits * math.log2(10))), guard_bits)

    @property
    def work_bits(self) -> int:
        return self.bits + self.guard_bits

    @property
    def digits(self) -> int:
        return int(self.bits * math.log10(2))

    @property
    def eps(self):
        """Relative accuracy promised for kernel results, 2^(guard_bits - bits)."""
        return mpmath.ldexp(mpmath.mpf(1), self.guard_bits - self.bits)

    def workprec(self):
        return mp.workprec(self.work_bits)

    def scaled(self, factor: float) -> "PrecisionContext":
        return PrecisionContext(math.ceil(self.bits * factor), self.guard_bits)

    def error_for(self, value):
        """Default error estimate for a freshly computed kernel value."""
        return self.eps * max(1, abs(value))


@dataclass(frozen=True)
class Approx:
    """A real or complex number with a first-order absolute error estimate."""

    value: object
    err: object = 0

    @staticmethod
    def lift(x) -> "Approx":
        if isinstance(x, Approx):
            return x
        if isinstance(x, Fraction):
            x = mpmath.mpf(x.numerator) / x.denominator
        return Approx(x, mpmath.mpf(0))

    def __add__(self, other):
        o = Approx.lift(other)
        return Approx(self.value + o.value, self.err + o.err)

    __radd__ = __add__

    def __neg__(self):
        return Approx(-self.value, self.err)

    def __sub__(self, other):
        return self + (-Approx.lift(other))

    def __rsub__(self, other):
        return Approx.lift(other) - self

    def __mul__(self, other):
        o = Approx.lift(other)
        err = abs(self.value) * o.err + abs(o.value) * self.err + self.err * o.err
        return Approx(self.value * o.value, err)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Approx.lift(other)
        denom = abs(o.value) - o.err
        if denom <= 0:
            raise ZeroDivisionError("divisor is not separated from zero")
        q = self.value / o.value
        return Approx(q, (self.err + abs(q) * o.err) / denom)

    def __rtruediv__(self, other):
        return Approx.lift(other) / self

    def __abs__(self):
        return Approx(abs(self.value), self.err)

    @property
    def real(self):
        return Approx(mpmath.re(self.value), self.err)

    @property
    def imag(self):
        return Approx(mpmath.im(self.value), self.err)

    def conjugate(self):
        return Approx(mpmath.conj(self.value), self.err)

    def is_zero(self, factor=10) -> bool:
        return abs(self.value) <= factor * self.err

    def __float__(self):
        return float(mpmath.re(self.value))

    def __complex__(self):
        return complex(self.value)

    def __repr__(self):
        return f"Approx({mpmath.nstr(self.value, 20)} +/- {mpmath.nstr(self.err, 3)})"


def _tolerance():
    return mpmath.ldexp(mpmath.mpf(1), -mp.prec)


# ---------------------------------------------------------------------------
# dilogarithm family (raw versions work at the current mp precision)


def _li2_series(x):
    # |x| <= 1/2: geometric convergence with ratio <= 1/2
    tol = _tolerance()
    total = mpmath.mpc(0)
    power = x
    n = 1
    while True:
        term = power / (n * n)
        total += term
        if abs(term) <= tol * max(abs(total), tol):
            return total
        n += 1
        power *= x


def _li2_bernoulli(x):
    # Li2(x) = sum_n B_n u^(n+1)/(n+1)!, u = -log(1-x); needs |u| < 2 pi
    u = -mpmath.log(1 - x)
    tol = _tolerance()
    total = u - u * u / 4
    u2 = u * u
    power = u  # u^(n+1) / (n+1)! tracked incrementally for even n
    fact = mpmath.mpf(1)
    n = 0
    while True:
        n += 2
        power *= u2
        fact *= n * (n + 1)
        term = mpmath.bernoulli(n) * power / fact
        total += term
        if abs(term) <= tol * abs(total) or n > 4 * mp.prec:
            return total


def _li2_unit(y):
    if abs(y) <= 0.5:
        return _li2_series(y)
    if abs(1 - y) <= 0.5:
        return mpmath.pi ** 2 / 6 - mpmath.log(y) * mpmath.log(1 - y) - _li2_series(1 - y)
    # annulus around e^{+-i pi/3} where none of the six arguments is small
    return _li2_bernoulli(y)


def _li2_raw(x):
    x = mpmath.mpc(x)
    if x == 0:
        return mpmath.mpc(0)
    if x == 1:
        return mpmath.mpc(mpmath.pi ** 2 / 6)
    if abs(x) > 1:
        return -mpmath.pi ** 2 / 6 - mpmath.log(-x) ** 2 / 2 - _li2_unit(1 / x)
    return _li2_unit(x)


def _bw_raw(x):
    x = mpmath.mpc(x)
    if mpmath.im(x) == 0:
        return mpmath.mpf(0)
    if abs(x) > 1:
        return -_bw_raw(1 / x)
    return mpmath.im(_li2_raw(x)) + mpmath.arg(1 - x) * mpmath.log(abs(x))


def _jay_raw(x):
    if x == 1:
        return mpmath.mpf(0)
    return mpmath.log(abs(x)) * mpmath.log(abs(1 - x))


def li2(x, ctx: PrecisionContext) -> Approx:
    """Principal dilogarithm; on the cut (1, inf) the value is the limit from below."""
    with ctx.workprec():
        v = _li2_raw(x)
        return Approx(v, ctx.error_for(v))


def bloch_wigner_D(x, ctx: PrecisionContext) -> Approx:
    with ctx.workprec():
        if x is None or (not isinstance(x, (int, Fraction)) and mpmath.isinf(x)):
            return Approx(mpmath.mpf(0), mpmath.mpf(0))
        v = _bw_raw(x)
        return Approx(v, ctx.error_for(v) if v else mpmath.mpf(0))


def jay(x, ctx: PrecisionContext) -> Approx:
    with ctx.workprec():
        x = mpmath.mpmathify(x)
        if x == 0:
            raise DomainError("J(x) = log|x| log|1-x| is undefined at x = 0")
        v = _jay_raw(x)
        return Approx(v, ctx.error_for(v) if v else mpmath.mpf(0))


# ---------------------------------------------------------------------------
# exponential integral


def _e1_raw(x):
    if x <= 40:
        # power series; terms reach e^x while the sum is ~e^-x/x, so carry ~2.9x extra bits
        with mp.extraprec(int(3 * float(x)) + 16):
            x = +x
            tol = _tolerance()
            total = mpmath.mpf(0)
            term = mpmath.mpf(1)
            n = 1
            while True:
                term *= -x / n
                contrib = term / n
                total += contrib
                if abs(contrib) <= tol:
                    break
                n += 1
            result = -mpmath.euler - mpmath.log(x) - total
        return +result
    # continued fraction  E1(x) = e^-x / (x+1 - 1/(x+3 - 4/(x+5 - ...)))  (modified Lentz)
    tol = _tolerance()
    tiny = mpmath.ldexp(mpmath.mpf(1), -4 * mp.prec)
    f = x + 1
    c = f
    d = mpmath.mpf(0)
    for n in range(1, 20 * mp.prec):
        a = -n * n
        b = x + 2 * n + 1
        d = b + a * d
        d = 1 / (d if d != 0 else tiny)
        c = b + a / c
        if c == 0:
            c = tiny
        delta = c * d
        f *= delta
        if abs(delta - 1) <= tol:
            return mpmath.exp(-x) / f
    raise NonConvergence("E1 continued fraction did not converge")


def exp_integral_E1(x, ctx: PrecisionContext) -> Approx:
    with ctx.workprec():
        x = mpmath.mpf(x)
        if x <= 0:
            raise DomainError(f"E1 requires x > 0, got {x}")
        v = _e1_raw(x)
        return Approx(v, ctx.eps * v)


# ---------------------------------------------------------------------------
# arithmetic-geometric mean


def _agm_raw(a, b, max_iter):
    a, b = mpmath.mpc(a), mpmath.mpc(b)
    tol = _tolerance() * 4
    for _ in range(max_iter):
        if abs(a - b) <= tol * abs(a):
            return a
        mean = (a + b) / 2
        g = mpmath.sqrt(a * b)
        # keep the "good" root: |mean - g| <= |mean + g|
        if abs(mean - g) > abs(mean + g):
            g = -g
        a, b = mean, g
    raise NonConvergence("AGM iteration limit exceeded")


def agm(a, b, ctx: PrecisionContext) -> Approx:
    with ctx.workprec():
        a, b = mpmath.mpc(a), mpmath.mpc(b)
        if a == 0 or b == 0:
            raise DomainError("AGM arguments must be non-zero")
        r = a / b
        if mpmath.im(r) == 0 and mpmath.re(r) <= 0:
            raise DomainError("AGM requires a/b outside (-inf, 0]")
        v = _agm_raw(a, b, 4 * ctx.bits)
        return Approx(v, ctx.error_for(v))


# ---------------------------------------------------------------------------
# rational reconstruction


def to_fraction(x) -> Fraction:
    """Exact rational value of a binary float, Approx, int or decimal string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, Approx):
        x = x.value
    if isinstance(x, float):
        return Fraction(x)
    x = mpmath.re(mpmath.mpmathify(x))
    if not mpmath.isfinite(x):
        raise DomainError(f"cannot convert {x} to a rational")
    # man_exp drops the sign
    man, exp = x.man_exp
    frac = Fraction(int(man)) * Fraction(2) ** int(exp)
    return -frac if x < 0 else frac


@dataclass(frozen=True)
class RationalGuess:
    numerator: int
    denominator: int
    residual: object
    height: int

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __str__(self):
        if self.denominator == 1:
            return str(self.numerator)
        return f"{self.numerator}/{self.denominator}"


def _convergents(x: Fraction):
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    while True:
        a = x.numerator // x.denominator
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        yield h1, k1
        frac = x - a
        if frac == 0:
            return
        x = 1 / frac


def rational_reconstruct(x, max_height: int, tol) -> RationalGuess | None:
    """Smallest-height continued-fraction convergent within ``tol`` of ``x``."""
    xf = to_fraction(x)
    tf = to_fraction(tol)
    if tf <= 0:
        raise ValueError("tol must be positive")
    for p, q in _convergents(xf):
        height = max(abs(p), q)
        if height > max_height:
            return None
        diff = abs(xf - Fraction(p, q))
        if diff <= tf:
            with mp.workprec(max(mp.prec, 64)):
                residual = mpmath.mpf(diff.numerator) / diff.denominator
            return RationalGuess(p, q, residual, height)
    return None


# ---------------------------------------------------------------------------
# lattice reduction and integer relations


def _round_div(a: int, b: int) -> int:
    # nearest integer to a/b for b > 0
    return (2 * a + b) // (2 * b)


def lll_reduce(basis: Sequence[Sequence[int]], delta: Fraction = Fraction(99, 100)) -> list[list[int]]:
    """Integral LLL reduction (exact integer Gram-Schmidt data).

    Rows of ``basis`` must be linearly independent.
    """
    n = len(basis)
    b = [None] + [[int(v) for v in row] for row in basis]
    if n == 0:
        return []

    def dot(u, v):
        return sum(x * y for x, y in zip(u, v))

    d = [0] * (n + 1)
    d[0] = 1
    lam = [[0] * (n + 1) for _ in range(n + 1)]
    dn, dd = delta.numerator, delta.denominator

    d[1] = dot(b[1], b[1])
    if d[1] == 0:
        raise ValueError("basis vectors are linearly dependent")

    def red(k, l):
        if 2 * abs(lam[k][l]) > d[l]:
            q = _round_div(lam[k][l], d[l])
            b[k] = [x - q * y for x, y in zip(b[k], b[l])]
            lam[k][l] -= q * d[l]
            for i in range(1, l):
                lam[k][i] -= q * lam[l][i]

    def swap(k, kmax):
        b[k], b[k - 1] = b[k - 1], b[k]
        for j in range(1, k - 1):
            lam[k][j], lam[k - 1][j] = lam[k - 1][j], lam[k][j]
        mu = lam[k][k - 1]
        big = (d[k - 2] * d[k] + mu * mu) // d[k - 1]
        for i in range(k + 1, kmax + 1):
            t = lam[i][k]
            lam[i][k] = (d[k] * lam[i][k - 1] - mu * t) // d[k - 1]
            lam[i][k - 1] = (big * t + mu * lam[i][k]) // d[k]
        d[k - 1] = big

    k, kmax = 2, 1
    while k <= n:
        if k > kmax:
            kmax = k
            for j in range(1, k + 1):
                u = dot(b[k], b[j])
                for i in range(1, j):
                    u = (d[i] * u - lam[k][i] * lam[j][i]) // d[i - 1]
                if j < k:
                    lam[k][j] = u
                else:
                    if u == 0:
                        raise ValueError("basis vectors are linearly dependent")
                    d[k] = u
        red(k, k - 1)
        if dd * d[k] * d[k - 2] < dn * d[k - 1] ** 2 - dd * lam[k][k - 1] ** 2:
            swap(k, kmax)
            k = max(2, k - 1)
        else:
            for l in range(k - 2, 0, -1):
                red(k, l)
            k += 1
    return [b[i] for i in range(1, n + 1)]


def _as_real_columns(entry) -> list:
    if isinstance(entry, Approx):
        entry = entry.value
    if isinstance(entry, (list, tuple)):
        cols = []
        for e in entry:
            cols.extend(_as_real_columns(e))
        return cols
    # every scalar contributes a (re, im) pair so real and complex entries line up
    e = mpmath.mpmathify(entry)
    return [mpmath.re(e), mpmath.im(e)]


def simultaneous_relation(vectors: Sequence, coeff_bound: int, ctx: PrecisionContext,
                          accept=None) -> list[int] | None:
    """Integer vector c, |c_i| <= coeff_bound, with sum_i c_i v_i ~ 0 in every component.

    ``vectors[i]`` may be a real number, a complex number or a sequence of them;
    complex components are split into real and imaginary columns.  ``accept`` is
    an optional predicate on candidate coefficient lists.
    """
    n = len(vectors)
    if n < 2:
        raise ValueError("need at least two entries")
    digits = ctx.digits
    if coeff_bound ** 2 * n > 10 ** (0.3 * digits):
        raise PrecisionTooLow(
            f"coeff_bound={coeff_bound} with {n} entries needs more than {digits} digits")
    with ctx.workprec():
        columns = [_as_real_columns(v) for v in vectors]
        width = len(columns[0])
        if any(len(c) != width for c in columns):
            raise ValueError("all entries must have the same shape")
        scale = mpmath.mpf(10) ** math.ceil(0.8 * digits)
        rows = []
        for i, col in enumerate(columns):
            ident = [1 if j == i else 0 for j in range(n)]
            rows.append(ident + [int(mpmath.nint(scale * c)) for c in col])
        reduced = lll_reduce(rows)
        tol = mpmath.mpf(10) ** (-0.5 * digits)
        candidates = []
        for row in reduced:
            c = row[:n]
            if not any(c) or max(abs(x) for x in c) > coeff_bound:
                continue
            resid = max(abs(mpmath.fsum(ci * col[j] for ci, col in zip(c, columns)))
                        for j in range(width))
            if resid > tol:
                continue
            first = next(x for x in c if x)
            if first < 0:
                c = [-x for x in c]
            if accept is not None and not accept(c):
                continue
            candidates.append(c)
    if not candidates:
        return None
    return min(candidates, key=lambda c: (max(abs(x) for x in c), tuple(abs(x) for x in c)))


def integer_relation(v: Iterable, coeff_bound: int, ctx: PrecisionContext) -> list[int] | None:
    return simultaneous_relation(list(v), coeff_bound, ctx)
