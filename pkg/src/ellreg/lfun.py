"""Twisted L-values L(f x chi, 2) and L'(f x chi, 0) from the completed L-function.

The completed function Lambda(s) = M^(s/2) (2 pi)^(-s) Gamma(s) L(s) of a twist of
level M satisfies Lambda(s) = -w conj-Lambda(2 - s).  Splitting its Mellin integral
at y = cutA / sqrt(M) gives

    Lambda(s) = sum b_n (sqrt(M)/2 pi n)^s Gamma(s, 2 pi n cutA/sqrt(M))
              - w sum conj(b_n) (sqrt(M)/2 pi n)^(2-s) Gamma(2-s, 2 pi n/(cutA sqrt(M)))

for every cutA > 0.  The level M and w are unknown a priori and are fixed by
demanding that the right-hand side does not depend on cutA.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
from mpmath import mp

from .arith import (AbelianField, DirichletCharacter, characters_of, divisors,
                    splitting_data)
from .curve import ApCache, EllipticCurveData, an_table, ap
from .errors import CalibrationFailed, NotCalibrated, RamifiedPrime
from .mpnum import Approx, PrecisionContext, _e1_raw

CUTS = (mpmath.mpf(1), mpmath.mpf(13) / 10, mpmath.mpf(17) / 10)
SCREEN_RESIDUAL = 1e-6


def twisted_coefficients(E: EllipticCurveData, chi: DirichletCharacter, n_max: int,
                         an: list[int] | None = None, cache: ApCache | None = None) -> list:
    """[b_0 = 0, b_1, ..., b_{n_max}] with b_n = a_n chi(n), chi taken primitive.

    a_n is completely determined by multiplicativity and the Hecke recursion, and
    chi is completely multiplicative, so the product satisfies the twisted
    recursion b_{p^(k+1)} = b_p b_{p^k} - chi(p)^2 p b_{p^(k-1)} automatically.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if an is None or len(an) <= n_max:
        an = an_table(E, n_max, cache)
    out = [mpmath.mpc(0)] * (n_max + 1)
    for n in range(1, n_max + 1):
        if an[n]:
            out[n] = an[n] * chi.value(n, primitive=True)
    return out


def terms_needed(M: int, cutA, bits: int) -> tuple[int, int]:
    """Lengths of the two sums so that the exponential tails fall below 2^-bits."""
    T = bits * math.log(2) + math.log(M) + 10
    c = math.sqrt(M) / (2 * math.pi)
    A = float(cutA)
    return math.ceil(c * T / A) + 1, math.ceil(c * T * A) + 1


@dataclass
class TwistedLData:
    chi: DirichletCharacter
    level: int | None = None
    w: object = None
    coeffs: list = field(default_factory=list, repr=False)
    residual: object = None
    candidates: dict = field(default_factory=dict)
    bits: int = 0


def _gamma_factor(s: int, x, scale):
    """scale^s Gamma(s, x) for s in {0, 1, 2}."""
    if s == 0:
        return _e1_raw(x)
    if s == 1:
        return scale * mpmath.exp(-x)
    return scale * scale * mpmath.exp(-x) * (1 + x)


def _half_sums(coeffs, M: int, s: int, cutA, bits: int):
    """(first, second) such that Lambda(s) = first - w second."""
    n1, n2 = terms_needed(M, cutA, bits)
    if max(n1, n2) >= len(coeffs):
        raise ValueError(f"need {max(n1, n2)} coefficients, have {len(coeffs) - 1}")
    sq = mpmath.sqrt(M)
    two_pi = 2 * mpmath.pi
    first = mpmath.mpc(0)
    for n in range(1, n1 + 1):
        b = coeffs[n]
        if b:
            first += b * _gamma_factor(s, two_pi * n * cutA / sq, sq / (two_pi * n))
    second = mpmath.mpc(0)
    for n in range(1, n2 + 1):
        b = coeffs[n]
        if b:
            second += mpmath.conj(b) * _gamma_factor(2 - s, two_pi * n / (cutA * sq), sq / (two_pi * n))
    return first, second


def _half_sums_s1(coeffs, M: int, cutA, bits: int):
    # s = 1 with geometric progressions for the exponentials
    n1, n2 = terms_needed(M, cutA, bits)
    sq = mpmath.sqrt(M)
    two_pi = 2 * mpmath.pi
    sums = []
    for count, rate, conj in ((n1, two_pi * cutA / sq, False), (n2, two_pi / (cutA * sq), True)):
        r = mpmath.exp(-rate)
        e = mpmath.mpf(1)
        total = mpmath.mpc(0)
        for n in range(1, count + 1):
            e *= r
            b = coeffs[n]
            if b:
                total += (mpmath.conj(b) if conj else b) * e / n
        sums.append(total * sq / two_pi)
    return sums[0], sums[1]


def lambda_value(T: TwistedLData, s: int, cutA, ctx: PrecisionContext) -> Approx:
    """Lambda(f x chi, s) for s in {0, 1, 2} through the split at cutA."""
    if T.w is None or T.level is None:
        raise NotCalibrated(f"{T.chi.label} has no calibrated level and w")
    if s not in (0, 1, 2):
        raise ValueError("s must be 0, 1 or 2")
    with ctx.workprec():
        cutA = mpmath.mpf(cutA)
        if s == 1:
            first, second = _half_sums_s1(T.coeffs, T.level, cutA, ctx.work_bits)
        else:
            first, second = _half_sums(T.coeffs, T.level, s, cutA, ctx.work_bits)
        v = first - T.w * second
        rel = max(mpmath.mpf(T.residual or 0), ctx.eps)
        return Approx(v, rel * max(1, abs(v)))


def _residual(coeffs, M, w, s, bits, cuts=(CUTS[0], CUTS[2])):
    """Largest absolute disagreement of Lambda(s) between the given cut parameters."""
    values = []
    for A in cuts:
        if s == 1:
            f, g = _half_sums_s1(coeffs, M, A, bits)
        else:
            f, g = _half_sums(coeffs, M, s, A, bits)
        values.append(f - w * g)
    return max(abs(a - b) for a in values for b in values)


def calibrate(E: EllipticCurveData, chi: DirichletCharacter, ctx: PrecisionContext,
              an: list[int] | None = None, cache: ApCache | None = None) -> TwistedLData:
    """Determine the level and w of the twist by cut-independence of Lambda.

    For each divisor M of N m_chi^2, w is solved from Lambda(1) at cutA = 1 and 1.3
    and tested at cutA = 1.7.  Surviving candidates get the residual
    max |Lambda_A(s) - Lambda_A'(s)| over s in {0, 1, 2} and all three cuts; the
    smallest residual wins.
    """
    m_chi = chi.conductor
    candidates = divisors(E.conductor * m_chi * m_chi)
    bits = ctx.work_bits
    n_max = max(max(terms_needed(M, CUTS[2], bits)) for M in candidates) + 1
    with ctx.workprec():
        coeffs = twisted_coefficients(E, chi, n_max, an, cache)
        scores: dict[int, object] = {}
        ws: dict[int, object] = {}
        for M in candidates:
            p1, q1 = _half_sums_s1(coeffs, M, CUTS[0], bits)
            p2, q2 = _half_sums_s1(coeffs, M, CUTS[1], bits)
            denom = q1 - q2
            if abs(denom) <= mpmath.ldexp(abs(q1) + 1, -bits // 2):
                scores[M] = mpmath.inf
                continue
            w = (p1 - p2) / denom
            res = _residual(coeffs, M, w, 1, bits)
            if res < SCREEN_RESIDUAL:
                res = max(_residual(coeffs, M, w, s, bits, CUTS) for s in (0, 1, 2))
            scores[M] = res
            ws[M] = w
        best = min(candidates, key=lambda M: (scores[M], M))
        threshold = mpmath.mpf(10) ** (-0.4 * ctx.digits)
        if not scores[best] <= threshold:
            raise CalibrationFailed(
                f"{chi.label}: no level among {candidates} satisfies the functional equation "
                f"(best M = {best}, residual {mpmath.nstr(scores[best], 3)})")
        return TwistedLData(chi, best, ws[best], coeffs, scores[best],
                            {M: scores[M] for M in candidates}, ctx.bits)


def cut_independence(T: TwistedLData, s: int, ctx: PrecisionContext) -> object:
    """Largest pairwise difference of Lambda(s) over the three cut parameters."""
    vals = [lambda_value(T, s, A, ctx).value for A in CUTS]
    return max(abs(a - b) for a in vals for b in vals)


@dataclass(frozen=True)
class LValueRow:
    chi: DirichletCharacter
    data: TwistedLData
    Lprime0: Approx
    L2: Approx

    @property
    def level(self) -> int:
        return self.data.level

    @property
    def w(self):
        return self.data.w


@dataclass(frozen=True)
class LambdaChi:
    field: AbelianField
    rows: tuple
    work_bits: int = 53

    def row(self, chi: DirichletCharacter) -> LValueRow:
        for r in self.rows:
            if r.chi == chi:
                return r
        raise KeyError(chi)

    @property
    def degree(self) -> int:
        return len(self.rows)

    @property
    def leading_coefficient(self) -> Approx:
        """L^(d)(E/F, 0)/d! = prod L'(f x chi, 0)."""
        with mp.workprec(self.work_bits):
            out = Approx(mpmath.mpc(1), mpmath.mpf(0))
            for r in self.rows:
                out = out * r.Lprime0
            return out

    @property
    def derivative_at_zero(self) -> Approx:
        """L^(d)(E/F, 0) = d! prod L'(f x chi, 0)."""
        with mp.workprec(self.work_bits):
            return self.leading_coefficient * math.factorial(self.degree)

    @property
    def L_at_two(self) -> Approx:
        with mp.workprec(self.work_bits):
            out = Approx(mpmath.mpc(1), mpmath.mpf(0))
            for r in self.rows:
                out = out * r.L2
            return out

    @property
    def level_product(self) -> int:
        return math.prod(r.level for r in self.rows)

    @property
    def w_product(self):
        with mp.workprec(self.work_bits):
            return mpmath.fprod(r.w for r in self.rows)


def lvalues_for(E: EllipticCurveData, chi: DirichletCharacter, ctx: PrecisionContext,
                an: list[int] | None = None, cache: ApCache | None = None) -> LValueRow:
    T = calibrate(E, chi, ctx, an, cache)
    lp0 = lambda_value(T, 0, 1, ctx)
    lam2 = lambda_value(T, 2, 1, ctx)
    with ctx.workprec():
        c = 4 * mpmath.pi ** 2 / T.level
        L2 = Approx(lam2.value * c, lam2.err * c)
    return LValueRow(chi, T, lp0, L2)


def lvalues_all(E: EllipticCurveData, F: AbelianField, ctx: PrecisionContext,
                cache: ApCache | None = None) -> LambdaChi:
    chars = characters_of(F)
    bits = ctx.work_bits
    n_max = 1
    for chi in chars:
        f = chi.conductor
        n_max = max(n_max, max(max(terms_needed(M, CUTS[2], bits))
                               for M in divisors(E.conductor * f * f)) + 1)
    an = an_table(E, n_max, cache)
    return LambdaChi(F, tuple(lvalues_for(E, chi, ctx, an) for chi in chars), ctx.work_bits)


def lambda_general(T: TwistedLData, s, cutA, ctx: PrecisionContext) -> Approx:
    """Lambda(s) at a real s using mpmath's incomplete gamma (not needed for s in {0,1,2})."""
    if T.w is None:
        raise NotCalibrated(f"{T.chi.label} has no calibrated level and w")
    with ctx.workprec():
        s = mpmath.mpf(s)
        M = T.level
        n1, n2 = terms_needed(M, cutA, ctx.work_bits)
        sq = mpmath.sqrt(M)
        two_pi = 2 * mpmath.pi
        first = mpmath.fsum(T.coeffs[n] * (sq / (two_pi * n)) ** s *
                            mpmath.gammainc(s, two_pi * n * cutA / sq)
                            for n in range(1, n1 + 1) if T.coeffs[n])
        second = mpmath.fsum(mpmath.conj(T.coeffs[n]) * (sq / (two_pi * n)) ** (2 - s) *
                             mpmath.gammainc(2 - s, two_pi * n / (cutA * sq))
                             for n in range(1, n2 + 1) if T.coeffs[n])
        v = first - T.w * second
        return Approx(v, max(mpmath.mpf(T.residual), ctx.eps) * max(1, abs(v)))


def l_value_general(T: TwistedLData, s, ctx: PrecisionContext) -> Approx:
    lam = lambda_general(T, s, 1, ctx)
    with ctx.workprec():
        s = mpmath.mpf(s)
        c = (2 * mpmath.pi) ** s / (mpmath.mpf(T.level) ** (s / 2) * mpmath.gamma(s))
        return Approx(lam.value * c, lam.err * abs(c))


def euler_product(E: EllipticCurveData, chars, s, p_max: int, ctx: PrecisionContext,
                  cache: ApCache | None = None):
    """Partial Euler product over p <= p_max of prod_chi L(f x chi, s)."""
    from .arith import primes_up_to
    from .curve import ap_bad
    with ctx.workprec():
        s = mpmath.mpf(s)
        total = mpmath.mpc(1)
        for p in primes_up_to(p_max):
            a = ap(E, p) if E.is_good(p) else ap_bad(E, p)
            X = mpmath.mpf(p) ** (-s)
            for chi in chars:
                c = chi.value(p, primitive=True)
                if E.is_good(p):
                    total *= 1 - a * c * X + c * c * p * X * X
                else:
                    total *= 1 - a * c * X
        return 1 / total


def symmetric_traces(a_p: int, p: int, k_max: int) -> list[int]:
    """t_0 = 2, t_1 = a_p, t_k = a_p t_(k-1) - p t_(k-2): traces of Frobenius^k."""
    t = [2, a_p]
    while len(t) <= k_max:
        t.append(a_p * t[-1] - p * t[-2])
    return t


def local_factor_identity(E: EllipticCurveData, F: AbelianField, p: int, X0, ctx: PrecisionContext):
    """(lhs, rhs, defect) for prod_chi (1 - a_p chi(p) X + chi(p)^2 p X^2) = (1 - t_f X^f + p^f X^2f)^g."""
    if (E.conductor * F.modulus) % p == 0:
        raise RamifiedPrime(f"{p} divides N m = {E.conductor * F.modulus}")
    f, g = splitting_data(F, p)
    a = ap(E, p)
    X0 = Fraction(X0)
    t_f = symmetric_traces(a, p, f)[f]
    rhs = (1 - t_f * X0 ** f + p ** f * X0 ** (2 * f)) ** g
    with ctx.workprec():
        x = mpmath.mpf(X0.numerator) / X0.denominator
        lhs = mpmath.mpc(1)
        for chi in characters_of(F):
            c = chi.value(p)
            lhs *= 1 - a * c * x + c * c * p * x * x
        rhs_v = mpmath.mpf(rhs.numerator) / rhs.denominator
        defect = abs(lhs - rhs_v)
        return Approx(lhs, ctx.eps * max(1, abs(lhs))), rhs, defect
