import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ellreg.errors import DomainError, PrecisionTooLow
from ellreg.mpnum import (Approx, PrecisionContext, agm, bloch_wigner_D, exp_integral_E1,
                          integer_relation, jay, li2, lll_reduce, rational_reconstruct,
                          simultaneous_relation, to_fraction)

CTX = PrecisionContext(192)
TOL = mpmath.mpf(2) ** (-192 + 16) * 10


def _close(a, b, tol=TOL):
    return abs(mpmath.mpmathify(a) - mpmath.mpmathify(b)) <= tol * max(1, abs(mpmath.mpmathify(b)))


def test_precision_context_validation():
    with pytest.raises(ValueError):
        PrecisionContext(32)
    with pytest.raises(ValueError):
        PrecisionContext(128, -1)
    assert PrecisionContext.from_digits(40).digits >= 40
    assert PrecisionContext(100).scaled(1.5).bits == 150


def test_approx_error_propagates_subadditively():
    with CTX.workprec():
        a = Approx(mpmath.mpf(2), mpmath.mpf("1e-10"))
        b = Approx(mpmath.mpf(3), mpmath.mpf("2e-10"))
        assert (a + b).err == a.err + b.err
        assert (a - b).err == a.err + b.err
        prod = a * b
        assert prod.err <= 3 * a.err + 2 * b.err + a.err * b.err + mpmath.mpf("1e-30")
        with pytest.raises(ZeroDivisionError):
            a / Approx(mpmath.mpf(0), mpmath.mpf(1))


# -- dilogarithms --------------------------------------------------------


def test_li2_special_values():
    with CTX.workprec():
        assert li2(0, CTX).value == 0
        assert _close(li2(1, CTX).value, mpmath.pi ** 2 / 6)
        oracle = mpmath.nsum(lambda n: (-1) ** n / n ** 2, [1, mpmath.inf])
        assert _close(li2(-1, CTX).value, oracle)
        assert _close(li2(-1, CTX).value, -mpmath.pi ** 2 / 12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 20), st.floats(-3.14, 3.14))
def test_li2_matches_mpmath_polylog(r, theta):
    with CTX.workprec():
        x = mpmath.mpf(r) * mpmath.expj(theta)
        if abs(mpmath.im(x)) < 1e-6:
            return
        assert _close(li2(x, CTX).value, mpmath.polylog(2, x))


def test_li2_near_sixth_roots_of_unity():
    # none of the six dilogarithm transforms reaches modulus 1/2 here
    with CTX.workprec():
        for sign in (1, -1):
            x = mpmath.expjpi(sign * mpmath.mpf(1) / 3) * mpmath.mpf("0.999")
            assert _close(li2(x, CTX).value, mpmath.polylog(2, x))


def test_bloch_wigner_examples():
    with CTX.workprec():
        assert bloch_wigner_D(0.5, CTX).value == 0
        assert bloch_wigner_D(0, CTX).value == 0
        assert bloch_wigner_D(1, CTX).value == 0
        assert bloch_wigner_D(mpmath.inf, CTX).value == 0
        catalan = mpmath.nsum(lambda k: (-1) ** k / (2 * k + 1) ** 2, [0, mpmath.inf])
        assert _close(bloch_wigner_D(1j, CTX).value, catalan)
        x = mpmath.mpc("0.3", "0.7")
        assert _close(bloch_wigner_D(mpmath.conj(x), CTX).value, -bloch_wigner_D(x, CTX).value)


_annulus = st.tuples(st.floats(0.1, 10), st.floats(0.01, 3.13), st.booleans())


def _point(data):
    r, theta, lower = data
    return mpmath.mpf(r) * mpmath.expj(-theta if lower else theta)


@settings(max_examples=200, deadline=None)
@given(_annulus)
def test_bloch_wigner_antisymmetries(data):
    with CTX.workprec():
        x = _point(data)
        D = bloch_wigner_D(x, CTX).value
        assert abs(D + bloch_wigner_D(1 / x, CTX).value) <= TOL
        assert abs(D + bloch_wigner_D(mpmath.conj(x), CTX).value) <= TOL


@settings(max_examples=100, deadline=None)
@given(_annulus)
def test_bloch_wigner_sixfold_symmetry(data):
    with CTX.workprec():
        x = _point(data)
        D = bloch_wigner_D(x, CTX).value
        assert abs(D - bloch_wigner_D(1 - 1 / x, CTX).value) <= TOL
        assert abs(D - bloch_wigner_D(1 / (1 - x), CTX).value) <= TOL


def test_jay_examples():
    with CTX.workprec():
        assert jay(2, CTX).value == 0
        assert jay(-1, CTX).value == 0
        assert jay(1, CTX).value == 0
        assert _close(jay(mpmath.mpf(1) / 2, CTX).value, mpmath.log(2) ** 2)
        with pytest.raises(DomainError):
            jay(0, CTX)


@settings(max_examples=100, deadline=None)
@given(_annulus)
def test_jay_inversion(data):
    with CTX.workprec():
        x = _point(data)
        lhs = jay(x, CTX).value + jay(1 / x, CTX).value
        assert abs(lhs - mpmath.log(abs(x)) ** 2) <= TOL * 100


# -- E1 and AGM ----------------------------------------------------------


def test_e1_examples():
    with CTX.workprec():
        x = mpmath.mpf(50)
        assert exp_integral_E1(50, CTX).value - mpmath.exp(-x) / x * (1 - 1 / x) >= 0
        oracle = -mpmath.euler - mpmath.nsum(lambda n: (-1) ** n / (n * mpmath.factorial(n)), [1, mpmath.inf])
        assert _close(exp_integral_E1(1, CTX).value, oracle)
        assert mpmath.nstr(exp_integral_E1(1, CTX).value, 10) == "0.2193839344"
        small = mpmath.mpf("1e-6")
        assert abs(exp_integral_E1(small, CTX).value + mpmath.log(small) + mpmath.euler) < 1e-5
        with pytest.raises(DomainError):
            exp_integral_E1(0, CTX)


@pytest.mark.parametrize("x", ["0.001", "0.5", "3", "17.5", "39.9", "40.1", "75", "300"])
def test_e1_relative_accuracy(x):
    with CTX.workprec():
        v = exp_integral_E1(x, CTX)
        ref = mpmath.e1(mpmath.mpf(x))
        assert abs(v.value - ref) <= TOL * ref


def test_agm_examples():
    with CTX.workprec():
        assert _close(agm(3, 3, CTX).value, 3)
        assert _close(agm(1, 2, CTX).value, agm(2, 1, CTX).value)
        lemniscate = mpmath.gamma(mpmath.mpf(1) / 4) ** 2 / (2 * mpmath.sqrt(2 * mpmath.pi))
        assert _close(agm(1, mpmath.sqrt(2), CTX).value, mpmath.pi / lemniscate)
        assert _close(agm(1, 1j, CTX).value, mpmath.agm(1, 1j))
        with pytest.raises(DomainError):
            agm(1, -1, CTX)
        with pytest.raises(DomainError):
            agm(0, 1, CTX)


# -- rational reconstruction and lattice reduction ------------------------


def test_rational_reconstruct_examples():
    assert rational_reconstruct(0.75, 100, 1e-10).as_fraction() == Fraction(3, 4)
    with mpmath.workdps(50):
        assert rational_reconstruct(+mpmath.pi, 10 ** 3, mpmath.mpf("1e-30")) is None
    g = rational_reconstruct("0." + "3" * 40, 10 ** 6, Fraction(1, 10 ** 30))
    assert g.as_fraction() == Fraction(1, 3)
    assert g.height == 3
    assert g.residual <= 1e-39


@settings(max_examples=200, deadline=None)
@given(st.integers(-1000, 1000), st.integers(1, 1000))
def test_rational_reconstruct_roundtrip(p, q):
    frac = Fraction(p, q)
    if max(abs(frac.numerator), frac.denominator) > 1000:
        return
    with mpmath.workdps(30):
        x = mpmath.mpf(p) / q
        guess = rational_reconstruct(x, 10 ** 3, mpmath.mpf(10) ** -25)
    assert guess is not None and guess.as_fraction() == frac
    assert guess.height == max(abs(frac.numerator), frac.denominator)


def test_to_fraction_is_exact():
    assert to_fraction(0.5) == Fraction(1, 2)
    assert to_fraction("1/7") == Fraction(1, 7)
    with mpmath.workprec(100):
        assert to_fraction(mpmath.mpf(3) / 8) == Fraction(3, 8)


def test_lll_reduces_known_basis():
    basis = [[1, 1, 1], [-1, 0, 2], [3, 5, 6]]
    red = lll_reduce(basis)
    assert sorted(sum(x * x for x in v) for v in red)[0] <= 2
    # determinant preserved up to sign
    import itertools

    def det(m):
        return sum((1 if sum(1 for i, j in itertools.combinations(range(3), 2) if p[i] > p[j]) % 2 == 0 else -1)
                   * m[0][p[0]] * m[1][p[1]] * m[2][p[2]] for p in itertools.permutations(range(3)))
    assert abs(det(red)) == abs(det(basis))


def test_integer_relation_examples():
    ctx = PrecisionContext.from_digits(40)
    with ctx.workprec():
        assert integer_relation([mpmath.mpf(1), mpmath.mpf("0.5")], 1000, ctx) == [1, -2]
        assert integer_relation([mpmath.sqrt(2), mpmath.sqrt(8)], 1000, ctx) == [2, -1]
        assert integer_relation([mpmath.mpf(1), mpmath.e], 1000, ctx) is None


def test_integer_relation_precision_guard():
    ctx = PrecisionContext.from_digits(20)
    with pytest.raises(PrecisionTooLow):
        integer_relation([1, 2, 3], 10 ** 6, ctx)


def test_integer_relation_planted():
    rng = random.Random(1234)
    ctx = PrecisionContext.from_digits(60)
    with ctx.workprec():
        for _ in range(100):
            v = [mpmath.mpf(rng.random()) + mpmath.sqrt(rng.randint(2, 99)) for _ in range(2)]
            c = [rng.randint(-1000, 1000) for _ in range(2)]
            if c == [0, 0]:
                continue
            v.append(-(c[0] * v[0] + c[1] * v[1]))
            rel = integer_relation(v, 1000, ctx)
            assert rel is not None
            assert abs(mpmath.fsum(r * x for r, x in zip(rel, v))) <= mpmath.mpf(10) ** -30
            assert max(abs(r) for r in rel) <= max(1, *map(abs, c))


def test_simultaneous_relation_mixes_real_and_complex():
    ctx = PrecisionContext.from_digits(40)
    with ctx.workprec():
        a = [mpmath.mpc(1, 2), mpmath.sqrt(3)]
        b = [mpmath.mpc(2, 4), 2 * mpmath.sqrt(3)]
        assert simultaneous_relation([a, b], 100, ctx) == [2, -1]
        rel = simultaneous_relation([[mpmath.pi, 1], [mpmath.e, 2]], 100, ctx)
        assert rel is None
