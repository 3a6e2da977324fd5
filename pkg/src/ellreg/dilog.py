"""Elliptic dilogarithms D_q, J_q, divisors on the torus, the beta convolution,
the Eisenstein-Kronecker lattice sum and Galois character sums."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

import mpmath
import numpy as np
from mpmath import mp

from .arith import AbelianField, DirichletCharacter, characters_of
from .curve import ORIGIN, PeriodLattice, TorusPoint, _as_mpf
from .errors import AbelConditionFailed, ConjugationMismatch, DegreeNonZero
from .mpnum import Approx, PrecisionContext, _bw_raw, _jay_raw

log = logging.getLogger(__name__)

MERGE_TOL = mpmath.mpf(2) ** -64


# ---------------------------------------------------------------------------
# divisors


@dataclass(frozen=True)
class Divisor:
    """Finite formal sum of torus points with nonzero integer coefficients."""

    terms: tuple = ()

    @classmethod
    def of(cls, items: Iterable, tol=MERGE_TOL) -> "Divisor":
        merged: list[list] = []
        for coeff, point in items:
            coeff = int(coeff)
            point = point.reduced()
            for entry in merged:
                if _same_point(entry[1], point, tol):
                    entry[0] += coeff
                    break
            else:
                merged.append([coeff, point])
        return cls(tuple((c, p) for c, p in merged if c != 0))

    @classmethod
    def point(cls, P: TorusPoint, coeff: int = 1) -> "Divisor":
        return cls.of([(coeff, P)])

    @property
    def degree(self) -> int:
        return sum(c for c, _ in self.terms)

    @property
    def points(self) -> list[TorusPoint]:
        return [p for _, p in self.terms]

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "Divisor") -> "Divisor":
        return Divisor.of(self.terms + other.terms)

    def __neg__(self) -> "Divisor":
        return Divisor(tuple((-c, p) for c, p in self.terms))

    def __sub__(self, other: "Divisor") -> "Divisor":
        return self + (-other)

    def scale(self, k: int) -> "Divisor":
        if k == 0:
            return Divisor()
        return Divisor(tuple((k * c, p) for c, p in self.terms))

    def conjugate(self, conj_shift: int) -> "Divisor":
        return Divisor.of((c, p.conjugate(conj_shift)) for c, p in self.terms)

    def negate_points(self) -> "Divisor":
        return Divisor.of((c, -p) for c, p in self.terms)

    def lattice_sum(self) -> TorusPoint:
        total = ORIGIN
        for c, p in self.terms:
            total = total + p * c
        return total

    def __str__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"{c}[{p}]" for c, p in self.terms)


def _same_point(P: TorusPoint, Q: TorusPoint, tol) -> bool:
    if P.is_exact and Q.is_exact:
        return P.reduced() == Q.reduced()
    return P.distance(Q) <= tol


def beta_convolution(divF: Divisor, divG: Divisor, check_principal: bool = True,
                     tol=MERGE_TOL) -> Divisor:
    """sum_{i,j} m_i n_j [P_i - Q_j] for divF = sum m_i [P_i], divG = sum n_j [Q_j]."""
    if check_principal:
        for name, div in (("first", divF), ("second", divG)):
            if div.degree != 0:
                raise DegreeNonZero(f"{name} divisor has degree {div.degree}")
            if not div.lattice_sum().is_origin(tol=0 if _all_exact(div) else tol):
                raise AbelConditionFailed(f"{name} divisor does not sum to 0 on the torus")
    return Divisor.of((m * n, P - Q) for m, P in divF.terms for n, Q in divG.terms)


def _all_exact(div: Divisor) -> bool:
    return all(p.is_exact for p in div.points)


# ---------------------------------------------------------------------------
# elliptic dilogarithms


def _tail_terms(x_abs, q_abs, tol) -> int:
    """Smallest n with |x| |q|^n (1 + |log(|x| |q|^n)|) < tol."""
    lq = -mpmath.log(q_abs)
    lx = mpmath.log(x_abs) if x_abs > 0 else mpmath.mpf(0)
    n = 0
    while True:
        mag = lx - n * lq
        if mpmath.exp(mag) * (1 + abs(mag)) < tol:
            return n
        n += 1


def _q_orbit_sum(kernel, P: TorusPoint, L: PeriodLattice, ctx: PrecisionContext, terms: int | None):
    """(sum_{n>=0} k(x q^n), sum_{n>=1} k(x^-1 q^n), terms used, x)."""
    x = P.multiplier(L)
    q = L.q
    if terms is None:
        tol = ctx.eps * mpmath.mpf(2) ** -8
        terms = max(_tail_terms(abs(x), abs(q), tol), _tail_terms(abs(q / x), abs(q), tol) + 1) + 1
    forward = mpmath.mpf(0)
    y = x
    for _ in range(terms):
        forward += kernel(y)
        y *= q
    backward = mpmath.mpf(0)
    xinv = 1 / x
    y = xinv * q
    for _ in range(1, terms):
        backward += kernel(y)
        y *= q
    return forward, backward, terms, x


def _kernel_D(y):
    if abs(1 - y) == 0:
        return mpmath.mpf(0)
    return _bw_raw(y)


def _kernel_J(y):
    if abs(1 - y) == 0:
        return mpmath.mpf(0)
    return _jay_raw(y)


def bernoulli3(X):
    return X ** 3 - mpmath.mpf(3) / 2 * X ** 2 + X / 2


def _linear(fn, L, P, ctx, terms):
    if isinstance(P, Divisor):
        with ctx.workprec():
            total = Approx(mpmath.mpf(0), mpmath.mpf(0))
            for c, pt in P.terms:
                total = total + fn(L, pt, ctx, terms) * c
            return total
    return None


def elliptic_D(L: PeriodLattice, P, ctx: PrecisionContext, terms: int | None = None) -> Approx:
    """D_q(x) = sum_{n in Z} D(x q^n) at x = exp(2 pi i z); linear on divisors."""
    lin = _linear(elliptic_D, L, P, ctx, terms)
    if lin is not None:
        return lin
    with ctx.workprec():
        if P.is_origin():
            return Approx(mpmath.mpf(0), mpmath.mpf(0))
        fwd, bwd, n, _ = _q_orbit_sum(_kernel_D, P, L, ctx, terms)
        v = fwd - bwd
        return Approx(+v, ctx.eps * (1 + abs(v)) * 4)


def elliptic_J(L: PeriodLattice, P, ctx: PrecisionContext, terms: int | None = None) -> Approx:
    """J_q with the B_3 correction, representative |q| < |x| <= 1; linear on divisors."""
    lin = _linear(elliptic_J, L, P, ctx, terms)
    if lin is not None:
        return lin
    with ctx.workprec():
        if P.is_origin():
            return Approx(mpmath.mpf(0), mpmath.mpf(0))
        fwd, bwd, n, x = _q_orbit_sum(_kernel_J, P, L, ctx, terms)
        lq = mpmath.log(abs(L.q))
        X = mpmath.log(abs(x)) / lq
        v = fwd - bwd + lq * lq / 3 * bernoulli3(X)
        return Approx(+v, ctx.eps * (1 + abs(v)) * 4)


def elliptic_J_at(L: PeriodLattice, x, ctx: PrecisionContext) -> Approx:
    """J_q evaluated from an arbitrary multiplier x (no normalization of the representative)."""
    with ctx.workprec():
        x = mpmath.mpmathify(x)
        q = L.q
        tol = ctx.eps * mpmath.mpf(2) ** -8
        fwd = mpmath.mpf(0)
        y = x
        n = 0
        while abs(y) >= 1 or abs(y) * (1 + abs(mpmath.log(abs(y)))) > tol:
            fwd += _kernel_J(y)
            y *= q
            n += 1
        bwd = mpmath.mpf(0)
        y = q / x
        while abs(y) >= 1 or abs(y) * (1 + abs(mpmath.log(abs(y)))) > tol:
            bwd += _kernel_J(y)
            y *= q
        lq = mpmath.log(abs(q))
        v = fwd - bwd + lq * lq / 3 * bernoulli3(mpmath.log(abs(x)) / lq)
        return Approx(+v, ctx.eps * (1 + abs(v)) * 4)


# ---------------------------------------------------------------------------
# Eisenstein-Kronecker lattice sum


@lru_cache(maxsize=2)
def _lattice_shells(tau_re: float, tau_im: float, R: int):
    """Nonzero m + n tau with |.| <= R, ordered by shell k-1 < |lambda| <= k, then (m, n)."""
    n_max = int(math.floor(R / tau_im))
    ms, ns = [], []
    for n in range(-n_max, n_max + 1):
        y = n * tau_im
        half = math.sqrt(max(R * R - y * y, 0.0))
        lo = math.ceil(-half - n * tau_re)
        hi = math.floor(half - n * tau_re)
        if hi < lo:
            continue
        m = np.arange(lo, hi + 1, dtype=np.int64)
        ms.append(m)
        ns.append(np.full(m.shape, n, dtype=np.int64))
    m = np.concatenate(ms)
    n = np.concatenate(ns)
    lam = m + n * complex(tau_re, tau_im)
    r = np.abs(lam)
    keep = (r > 0) & (r <= R)
    m, n, lam, r = m[keep], n[keep], lam[keep], r[keep]
    shell = np.ceil(r).astype(np.int64)
    order = np.lexsort((n, m, shell))
    m, n, lam = m[order], n[order], lam[order]
    weight = 1.0 / (np.abs(lam) ** 2 * lam)
    return m, n, weight


def kronecker_sum(L: PeriodLattice, z: TorusPoint, cutoff_R: int, ctx: PrecisionContext,
                  chunk: int = 1 << 20) -> Approx:
    """Partial sum of K_{2,1,tau}(z) over 0 < |m + n tau| <= R in double precision.

    For z = a + b tau and lambda = m + n tau the phase exp(2 pi i (z conj(l) - conj(z) l)/(tau - conj(tau)))
    simplifies to exp(2 pi i (b m - a n)).  The tail beyond R is bounded by
    2 pi / (Im(tau) R) from the 1/|lambda|^3 integral over the lattice density 1/Im(tau).
    """
    if cutoff_R < 10:
        raise ValueError("cutoff_R must be at least 10")
    tau_re, tau_im = float(mpmath.re(L.tau)), float(mpmath.im(L.tau))
    m, n, weight = _lattice_shells(tau_re, tau_im, int(cutoff_R))
    p = z.reduced()
    a, b = float(_as_mpf(p.r)), float(_as_mpf(p.s))
    total = 0j
    for start in range(0, len(m), chunk):
        sl = slice(start, start + chunk)
        phase = np.mod(b * m[sl] - a * n[sl], 1.0)
        total += complex(np.sum(np.exp(2j * np.pi * phase) * weight[sl]))
    err = 2 * math.pi / (tau_im * cutoff_R)
    with ctx.workprec():
        return Approx(mpmath.mpc(total), mpmath.mpf(err))


def kronecker_bridge(L: PeriodLattice, z: TorusPoint, cutoff_R: int, ctx: PrecisionContext):
    """(-(Im tau)^2/pi K(z), D_q(z) - i J_q(z)): two independent routes to the same number."""
    K = kronecker_sum(L, z, cutoff_R, ctx)
    with ctx.workprec():
        c = -L.im_tau ** 2 / mpmath.pi
        lhs = Approx(c * K.value, abs(c) * K.err)
        D = elliptic_D(L, z, ctx)
        J = elliptic_J(L, z, ctx)
        rhs = Approx(D.value - 1j * J.value, D.err + J.err)
    return lhs, rhs


# ---------------------------------------------------------------------------
# Galois divisors and character sums


@dataclass(frozen=True)
class GaloisDivisor:
    """Complex realizations ell^sigma of a Galois-stable divisor, one per element of G."""

    field: AbelianField
    orbit: tuple  # ((sigma, Divisor), ...) in the field's element order

    @classmethod
    def from_mapping(cls, F: AbelianField, data: Mapping[int, Divisor]) -> "GaloisDivisor":
        seen: dict[int, Divisor] = {}
        for sigma, div in data.items():
            r = F.rep(int(sigma))
            if r in seen:
                raise ValueError(f"residues {sigma} and {r} name the same element of G")
            seen[r] = div
        missing = [s for s in F.elements if s not in seen]
        if missing:
            raise ValueError(f"no divisor given for G elements {missing}")
        return cls(F, tuple((s, seen[s]) for s in F.elements))

    @classmethod
    def invariant(cls, F: AbelianField, div: Divisor) -> "GaloisDivisor":
        return cls(F, tuple((s, div) for s in F.elements))

    def at(self, sigma: int) -> Divisor:
        r = self.field.rep(sigma)
        for s, div in self.orbit:
            if s == r:
                return div
        raise KeyError(sigma)

    def scale(self, k: int) -> "GaloisDivisor":
        return GaloisDivisor(self.field, tuple((s, d.scale(k)) for s, d in self.orbit))

    def __add__(self, other: "GaloisDivisor") -> "GaloisDivisor":
        if other.field != self.field:
            raise ValueError("divisors over different fields")
        return GaloisDivisor(self.field, tuple((s, d + other.at(s)) for s, d in self.orbit))

    def translate(self, tau_elem: int) -> "GaloisDivisor":
        """The divisor ell^tau, whose sigma-realization is ell^(sigma tau)."""
        F = self.field
        return GaloisDivisor(F, tuple((s, self.at(F.mul(s, tau_elem))) for s in F.elements))

    def conjugation_defect(self, L: PeriodLattice, tol=MERGE_TOL) -> list[int]:
        """Elements sigma where ell^(c sigma) differs from conj(ell^sigma)."""
        c = self.field.conjugation
        bad = []
        for s, div in self.orbit:
            other = self.at(self.field.mul(c, s))
            diff = Divisor.of(other.terms + div.conjugate(L.conj_shift).scale(-1).terms, tol=tol)
            if not diff.is_zero():
                bad.append(s)
        return bad

    def check_conjugation(self, L: PeriodLattice, tol=MERGE_TOL):
        bad = self.conjugation_defect(L, tol)
        if bad:
            raise ConjugationMismatch(
                f"realizations at {bad} are not complex conjugates of their partners")


@dataclass(frozen=True)
class CharacterSumEntry:
    chi: DirichletCharacter
    parity: str
    S_D: Approx
    S_J: Approx
    mu: Approx
    cancellation: Approx  # the sum that must vanish for this parity

    def cancels(self, factor: float = 1000) -> bool:
        return abs(self.cancellation.value) <= factor * max(self.cancellation.err, mpmath.mpf(0)) + \
            factor * mpmath.mpf(2) ** (-mp.prec)

    @property
    def target_sum(self) -> Approx:
        return self.S_D if self.parity == "even" else self.S_J


@dataclass(frozen=True)
class CharacterSums:
    field: AbelianField
    entries: tuple
    D_values: tuple  # ((sigma, Approx), ...)
    J_values: tuple

    def entry(self, chi: DirichletCharacter) -> CharacterSumEntry:
        for e in self.entries:
            if e.chi == chi:
                return e
        raise KeyError(chi)


def _weighted(chi: DirichletCharacter, values):
    total = Approx(mpmath.mpc(0), mpmath.mpf(0))
    for sigma, v in values:
        total = total + Approx(chi.value(sigma), mpmath.mpf(0)) * v
    return total


def character_sums(F: AbelianField, L: PeriodLattice, ell: GaloisDivisor, ctx: PrecisionContext,
                   check: bool = True) -> CharacterSums:
    """S_D, S_J and mu for every character of G.

    mu is -S_D/(2 pi) for even characters and -S_J/(4 pi Im tau) for odd ones.
    """
    if check:
        ell.check_conjugation(L)
    D_vals = tuple((s, elliptic_D(L, ell.at(s), ctx)) for s in F.elements)
    J_vals = tuple((s, elliptic_J(L, ell.at(s), ctx)) for s in F.elements)
    entries = []
    with ctx.workprec():
        for chi in characters_of(F):
            SD = _weighted(chi, D_vals)
            SJ = _weighted(chi, J_vals)
            if chi.is_even:
                c = -1 / (2 * mpmath.pi)
                mu = Approx(SD.value * c, SD.err * abs(c))
                cancel = SJ
            else:
                c = -1 / (4 * mpmath.pi * L.im_tau)
                mu = Approx(SJ.value * c, SJ.err * abs(c))
                cancel = SD
            entry = CharacterSumEntry(chi, chi.parity, SD, SJ, mu, cancel)
            if not entry.cancels():
                log.warning("%s: %s sum fails to cancel (|S| = %s)", chi.label,
                            "J" if chi.is_even else "D", mpmath.nstr(abs(cancel.value), 5))
            entries.append(entry)
    return CharacterSums(F, tuple(entries), D_vals, J_vals)
