"""Rationality checks linking twisted L-values to elliptic dilogarithm sums.

* :func:`theorem1_check`: per character, L'(f x chi, 0) against the character sum
  of D_E (even) or J_E (odd) over the conjugates of a Galois divisor.
* :func:`corollary_check`: L(E/F, 2) against group determinants of D_E and J_E.
* :func:`prop13_check`: pi^(2d) L^(d)(E/F, 0) / (d! L(E/F, 2)) against prod M_chi / 4^d.
* :func:`search_divisor`: integer-relation search for a combination of divisors
  that makes every ratio rational at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import mpmath

from .arith import AbelianField, DirichletCharacter, characters_of, galois_orbits
from .curve import ApCache, EllipticCurveData, PeriodLattice, periods
from .dilog import CharacterSums, GaloisDivisor, character_sums, elliptic_D, elliptic_J
from .errors import DivisionByNearZero
from .lfun import LambdaChi, lvalues_all
from .mpnum import Approx, PrecisionContext, RationalGuess, rational_reconstruct, simultaneous_relation

DEFAULT_MAX_HEIGHT = 10 ** 10
PASS, FAIL, INDETERMINATE = "PASS", "FAIL", "INDETERMINATE"


def _combine_status(statuses: Sequence[str]) -> str:
    if any(s == FAIL for s in statuses):
        return FAIL
    if any(s == INDETERMINATE for s in statuses):
        return INDETERMINATE
    return PASS


def reconstruction_tolerance(x, ctx: PrecisionContext):
    """Accept p/q only within 10^(-digits/2), relative to max(1, |x|)."""
    return mpmath.mpf(10) ** (-0.5 * ctx.digits) * max(1, abs(x))


def detect_rational(z, max_height: int, ctx: PrecisionContext) -> tuple[RationalGuess | None, str]:
    """Rational guess for a number that should be real; the note explains a refusal."""
    with ctx.workprec():
        z = mpmath.mpmathify(z)
        tol = reconstruction_tolerance(z, ctx)
        if abs(mpmath.im(z)) > tol:
            return None, f"imaginary part {mpmath.nstr(mpmath.im(z), 3)} exceeds tolerance"
        guess = rational_reconstruct(mpmath.re(z), max_height, tol)
        if guess is None:
            return None, f"no rational of height <= {max_height} within tolerance"
        return guess, ""


# ---------------------------------------------------------------------------
# divisor rationality check


@dataclass
class CharacterRatio:
    chi: DirichletCharacter
    parity: str
    target: Approx          # pi L' (even) or pi Im(tau) L' (odd)
    S: Approx               # S_D (even) or S_J (odd)
    ratio: Approx | None
    guess: RationalGuess | None
    status: str
    note: str = ""


@dataclass
class RationalityReport:
    field: AbelianField
    entries: list
    verdict: str
    orbit_consistent: bool | None
    revalidated: bool | None = None
    metadata: dict = field(default_factory=dict)

    def entry(self, chi: DirichletCharacter) -> CharacterRatio:
        for e in self.entries:
            if e.chi == chi:
                return e
        raise KeyError(chi)

    @property
    def guesses(self) -> list:
        return [e.guess for e in self.entries]


def _orbit_consistency(entries: Sequence[CharacterRatio]) -> bool | None:
    if any(e.guess is None for e in entries):
        return None
    by_chi = {e.chi: e.guess.as_fraction() for e in entries}
    for orbit in galois_orbits([e.chi for e in entries]):
        if len({by_chi[c] for c in orbit}) > 1:
            return False
    return True


def _theorem1_entries(F, L, ell, lvalues: LambdaChi, sums: CharacterSums, max_height, ctx):
    entries = []
    with ctx.workprec():
        for row in lvalues.rows:
            se = sums.entry(row.chi)
            if row.chi.is_even:
                target = row.Lprime0 * mpmath.pi
                S = se.S_D
            else:
                target = row.Lprime0 * (mpmath.pi * L.im_tau)
                S = se.S_J
            if abs(S.value) <= 10 * S.err:
                exc = DivisionByNearZero(f"|S| = {mpmath.nstr(abs(S.value), 3)} is below 10 err")
                entries.append(CharacterRatio(row.chi, row.chi.parity, target, S, None, None,
                                              INDETERMINATE, str(exc)))
                continue
            ratio = target / S
            guess, note = detect_rational(ratio.value, max_height, ctx)
            entries.append(CharacterRatio(row.chi, row.chi.parity, target, S, ratio, guess,
                                          PASS if guess else FAIL, note))
    return entries


def theorem1_check(E: EllipticCurveData, F: AbelianField, ell: GaloisDivisor,
                   max_height: int = DEFAULT_MAX_HEIGHT, ctx: PrecisionContext | None = None,
                   lvalues: LambdaChi | None = None, lattice: PeriodLattice | None = None,
                   revalidate: bool = True, cache: ApCache | None = None) -> RationalityReport:
    """ratio_chi = pi L'(f x chi, 0) / S_D(chi) (even) or pi Im(tau) L'(f x chi, 0) / S_J(chi) (odd).

    PASS needs a rational guess for every chi and, when ``revalidate`` is set, the
    same guesses again at 1.5 times the precision.
    """
    ctx = ctx or PrecisionContext()
    L = lattice or periods(E, ctx)
    lvalues = lvalues or lvalues_all(E, F, ctx, cache)
    sums = character_sums(F, L, ell, ctx)
    entries = _theorem1_entries(F, L, ell, lvalues, sums, max_height, ctx)
    verdict = _combine_status([e.status for e in entries])
    consistent = _orbit_consistency(entries)
    if consistent is False:
        verdict = FAIL
    report = RationalityReport(F, entries, verdict, consistent, None, {
        "bits": ctx.bits, "digits": ctx.digits, "max_height": max_height,
        "levels": {r.chi.label: r.level for r in lvalues.rows},
        "cancellation_ok": all(e.cancels() for e in sums.entries),
    })
    report.metadata["sums"] = sums
    report.metadata["lvalues"] = lvalues
    if revalidate and verdict == PASS:
        hi = ctx.scaled(1.5)
        again = theorem1_check(E, F, ell, max_height, hi, revalidate=False, cache=cache)
        same = again.verdict == PASS and all(
            a.guess.as_fraction() == b.guess.as_fraction() for a, b in zip(entries, again.entries))
        report.revalidated = same
        report.metadata["revalidation_bits"] = hi.bits
        if not same:
            report.verdict = FAIL
            for e in entries:
                e.note = (e.note + "; " if e.note else "") + "guess not reproduced at 1.5x precision"
    return report


# ---------------------------------------------------------------------------
# group determinants


def group_matrix(F: AbelianField, a: Mapping[int, object], rows: Sequence[int] | None = None) -> list:
    """(a(g h^-1))_{g, h} over ``rows`` (default: all elements of G)."""
    elems = list(rows if rows is not None else F.elements)
    return [[a[F.mul(g, F.inv(h))] for h in elems] for g in elems]


def exact_determinant(matrix: Sequence[Sequence]) -> Fraction:
    """Determinant over Q by fraction-free elimination."""
    M = [[Fraction(x) for x in row] for row in matrix]
    n = len(M)
    det = Fraction(1)
    for i in range(n):
        pivot = next((r for r in range(i, n) if M[r][i] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != i:
            M[i], M[pivot] = M[pivot], M[i]
            det = -det
        det *= M[i][i]
        for r in range(i + 1, n):
            f = M[r][i] / M[i][i]
            if f:
                for c in range(i, n):
                    M[r][c] -= f * M[i][c]
    return det


def character_transform(F: AbelianField, a: Mapping[int, object], chi: DirichletCharacter):
    """sum_g chi(g) a(g) at the current precision."""
    return mpmath.fsum(chi.value(g) * _num(a[g]) for g in F.elements)


def _num(v):
    if isinstance(v, Approx):
        return v.value
    if isinstance(v, Fraction):
        return mpmath.mpf(v.numerator) / v.denominator
    return mpmath.mpmathify(v)


def frobenius_identity(F: AbelianField, a: Mapping[int, object], ctx: PrecisionContext):
    """(det(a(g h^-1)), prod_chi sum_g chi(g) a(g), |difference|)."""
    with ctx.workprec():
        A = group_matrix(F, a)
        if all(isinstance(v, (int, Fraction)) for v in a.values()):
            d = exact_determinant(A)
            det = mpmath.mpf(d.numerator) / d.denominator
        else:
            det = mpmath.det(mpmath.matrix([[_num(x) for x in row] for row in A]))
        prod = mpmath.fprod(character_transform(F, a, chi) for chi in characters_of(F))
        return det, prod, abs(det - prod)


def conjugation_representatives(F: AbelianField) -> list[int]:
    """One element from each coset of <c> in G (all of G when F is real)."""
    c = F.conjugation
    reps: list[int] = []
    seen: set[int] = set()
    for g in F.elements:
        if g not in seen:
            reps.append(g)
            seen.update({g, F.mul(c, g)})
    return reps


def block_identity(F: AbelianField, x: Mapping[int, object], y: Mapping[int, object],
                   ctx: PrecisionContext):
    """For x even and y odd under conjugation: (det A, 2^d det X det Y, |difference|) with a = x + y."""
    if F.is_real:
        raise ValueError("the block decomposition needs a complex field")
    with ctx.workprec():
        a = {g: _num(x[g]) + _num(y[g]) for g in F.elements}
        detA = mpmath.det(mpmath.matrix(group_matrix(F, a)))
        reps = conjugation_representatives(F)
        X = mpmath.matrix(group_matrix(F, {g: _num(v) for g, v in x.items()}, reps))
        Y = mpmath.matrix(group_matrix(F, {g: _num(v) for g, v in y.items()}, reps))
        rhs = 2 ** F.degree * mpmath.det(X) * mpmath.det(Y)
        return detA, rhs, abs(detA - rhs)


def _match_multisets(xs: Sequence, ys: Sequence):
    """Greedy nearest matching; returns the largest matched distance."""
    remaining = list(ys)
    worst = mpmath.mpf(0)
    for x in xs:
        j = min(range(len(remaining)), key=lambda k: abs(remaining[k] - x))
        worst = max(worst, abs(remaining[j] - x))
        remaining.pop(j)
    return worst


# ---------------------------------------------------------------------------
# regulator determinant check


@dataclass
class CorollaryResult:
    field: AbelianField
    real_case: bool
    determinant: Approx           # det X (real) or det X det Y (complex)
    value: Approx                 # L(E/F,2) / (pi^d det) or with Im(tau)^(d/2)
    guess: RationalGuess | None
    verdict: str
    eigenvalue_defect: object
    note: str = ""
    metadata: dict = field(default_factory=dict)


def corollary_check(E: EllipticCurveData, F: AbelianField, ell: GaloisDivisor,
                    max_height: int = DEFAULT_MAX_HEIGHT, ctx: PrecisionContext | None = None,
                    lvalues: LambdaChi | None = None, lattice: PeriodLattice | None = None,
                    cache: ApCache | None = None) -> CorollaryResult:
    ctx = ctx or PrecisionContext()
    L = lattice or periods(E, ctx)
    lvalues = lvalues or lvalues_all(E, F, ctx, cache)
    sums = character_sums(F, L, ell, ctx)
    Dv = dict(sums.D_values)
    Jv = dict(sums.J_values)
    d = F.degree
    with ctx.workprec():
        L2 = lvalues.L_at_two
        a = {g: Dv[g].value + Jv[g].value for g in F.elements}
        if d == 1:
            # mpmath.eig returns a tuple for 1 x 1 input
            eig = [a[F.elements[0]]]
        else:
            eig = mpmath.eig(mpmath.matrix(group_matrix(F, a)), left=False, right=False)
        expected = [e.S_D.value + e.S_J.value for e in sums.entries]
        eig_defect = _match_multisets(list(eig), expected)
        if F.is_real:
            X = mpmath.matrix(group_matrix(F, {g: v.value for g, v in Dv.items()}))
            det = mpmath.det(X)
            scale = mpmath.pi ** d
        else:
            reps = conjugation_representatives(F)
            X = mpmath.matrix(group_matrix(F, {g: v.value for g, v in Dv.items()}, reps))
            Y = mpmath.matrix(group_matrix(F, {g: v.value for g, v in Jv.items()}, reps))
            det = mpmath.det(X) * mpmath.det(Y)
            scale = mpmath.pi ** d / L.im_tau ** (d // 2)
        entry_err = max(v.err for v in list(Dv.values()) + list(Jv.values()))
        entry_max = max(1, max(abs(v.value) for v in list(Dv.values()) + list(Jv.values())))
        det_err = d * entry_err * entry_max ** (d - 1) * math.factorial(d)
        det_a = Approx(det, det_err)
        note = ""
        if abs(det) <= 10 * det_err:
            return CorollaryResult(F, F.is_real, det_a, Approx(mpmath.nan, mpmath.inf), None,
                                   INDETERMINATE, eig_defect, "determinant is not separated from 0")
        value = L2 / (det_a * scale)
        guess, note = detect_rational(value.value, max_height, ctx)
        return CorollaryResult(F, F.is_real, det_a, value, guess, PASS if guess else FAIL,
                               eig_defect, note, {"bits": ctx.bits, "max_height": max_height})


# ---------------------------------------------------------------------------
# leading-coefficient constant


@dataclass
class Prop13Result:
    field: AbelianField
    ratio: Approx                    # pi^(2d) prod L'(f x chi, 0) / L(E/F, 2)
    ratio_with_factorial: Approx     # pi^(2d) L^(d)(E/F, 0) / L(E/F, 2)
    guess: RationalGuess | None
    expected: Fraction               # prod M_chi / 4^d up to sign
    matches_expected: bool
    verdict: str
    revalidated: bool | None = None
    note: str = ""


def prop13_check(E: EllipticCurveData, F: AbelianField, max_height: int = DEFAULT_MAX_HEIGHT,
                 ctx: PrecisionContext | None = None, lvalues: LambdaChi | None = None,
                 revalidate: bool = True, cache: ApCache | None = None) -> Prop13Result:
    """pi^(2d) prod_chi L'(f x chi, 0) / prod_chi L(f x chi, 2) should be +-prod M_chi / 4^d."""
    ctx = ctx or PrecisionContext()
    lvalues = lvalues or lvalues_all(E, F, ctx, cache)
    d = lvalues.degree
    with ctx.workprec():
        c = mpmath.pi ** (2 * d)
        ratio = lvalues.leading_coefficient * c / lvalues.L_at_two
        with_fact = ratio * math.factorial(d)
    guess, note = detect_rational(ratio.value, max_height, ctx)
    expected = Fraction(lvalues.level_product, 4 ** d)
    matches = guess is not None and abs(guess.as_fraction()) == expected
    verdict = PASS if guess is not None else FAIL
    result = Prop13Result(F, ratio, with_fact, guess, expected, matches, verdict, None, note)
    if revalidate and verdict == PASS:
        again = prop13_check(E, F, max_height, ctx.scaled(1.5), revalidate=False, cache=cache)
        result.revalidated = again.guess is not None and again.guess.as_fraction() == guess.as_fraction()
        if not result.revalidated:
            result.verdict = FAIL
            result.note = "guess not reproduced at 1.5x precision"
    return result


# ---------------------------------------------------------------------------
# divisor search


@dataclass
class SearchResult:
    coefficients: list[int]
    divisor: GaloisDivisor
    denominators: list[int]     # t_chi with sum c_k S(chi, ell_k) + t_chi target_chi = 0
    residual: object
    report: RationalityReport


def _targets(lvalues: LambdaChi, L: PeriodLattice, ctx):
    with ctx.workprec():
        out = []
        for row in lvalues.rows:
            t = row.Lprime0.value * mpmath.pi
            if not row.chi.is_even:
                t *= L.im_tau
            out.append(t)
        return out


def search_divisor(E: EllipticCurveData, F: AbelianField, pool: Sequence[GaloisDivisor],
                   coeff_bound: int = 1000, ctx: PrecisionContext | None = None,
                   max_height: int = DEFAULT_MAX_HEIGHT, lvalues: LambdaChi | None = None,
                   lattice: PeriodLattice | None = None,
                   cache: ApCache | None = None) -> SearchResult | None:
    """Integers c_k and t_chi with sum_k c_k S(chi, ell_k) + t_chi target_chi = 0 for all chi.

    All characters share one lattice (each character contributes its own columns),
    so the combination ell = sum c_k ell_k works for every chi simultaneously.
    """
    if not pool:
        raise ValueError("pool must be nonempty")
    ctx = ctx or PrecisionContext()
    L = lattice or periods(E, ctx)
    lvalues = lvalues or lvalues_all(E, F, ctx, cache)
    chars = [r.chi for r in lvalues.rows]
    targets = _targets(lvalues, L, ctx)
    K = len(pool)
    vectors = []
    for ell in pool:
        sums = character_sums(F, L, ell, ctx)
        vectors.append([sums.entry(chi).target_sum.value for chi in chars])
    for j in range(len(chars)):
        vectors.append([targets[j] if i == j else mpmath.mpf(0) for i in range(len(chars))])

    def accept(c):
        return any(c[:K]) and all(c[K:])

    coeffs = simultaneous_relation(vectors, coeff_bound, ctx, accept)
    if coeffs is None:
        return None
    with ctx.workprec():
        residual = max(abs(mpmath.fsum(c * v[j] for c, v in zip(coeffs, vectors)))
                       for j in range(len(chars)))
    combo = pool[0].scale(coeffs[0])
    for c, ell in zip(coeffs[1:K], pool[1:]):
        combo = combo + ell.scale(c)
    report = theorem1_check(E, F, combo, max_height, ctx, lvalues, L, revalidate=True, cache=cache)
    report.metadata["relation"] = coeffs
    report.metadata["relation_residual"] = residual
    if report.verdict != PASS:
        return None
    return SearchResult(coeffs[:K], combo, coeffs[K:], residual, report)
