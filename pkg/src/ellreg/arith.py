"""Dirichlet characters and abelian fields presented as quotients of (Z/mZ)^x.

Characters are stored as exponent vectors on a fixed set of generators, so
their values are exact elements of Q/Z (a phase ``t`` stands for exp(2 pi i t)).
Complex numbers are only produced on request.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Sequence

import mpmath

from .errors import RamifiedPrime
from .mpnum import Approx, PrecisionContext


def factorize(n: int) -> dict[int, int]:
    n = abs(n)
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def primes_up_to(n: int) -> list[int]:
    if n < 2:
        return []
    sieve = bytearray([1]) * (n + 1)
    sieve[0] = sieve[1] = 0
    for i in range(2, math.isqrt(n) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(range(i * i, n + 1, i)))
    return [i for i, flag in enumerate(sieve) if flag]


def divisors(n: int) -> list[int]:
    divs = [1]
    for p, e in factorize(n).items():
        divs = [d * p ** k for d in divs for k in range(e + 1)]
    return sorted(divs)


def _res(a: int, m: int) -> int:
    return a % m if m > 1 else 1


def multiplicative_order(a: int, m: int) -> int:
    if m <= 2:
        return 1
    a %= m
    k, x = 1, a
    while x != 1:
        x = x * a % m
        k += 1
    return k


class UnitGroup:
    """(Z/mZ)^x as a product of cyclic groups with fixed generators.

    Odd prime powers use their smallest primitive root; 2^e (e >= 3) uses the
    pair (-1, 5).  Each local generator is lifted by CRT to be 1 at the other
    prime powers.
    """

    def __init__(self, modulus: int):
        if modulus < 1:
            raise ValueError("modulus must be positive")
        self.modulus = modulus
        gens: list[int] = []
        orders: list[int] = []
        for p, e in sorted(factorize(modulus).items()):
            q = p ** e
            rest = modulus // q
            local: list[tuple[int, int]] = []
            if p == 2:
                if e == 2:
                    local = [(q - 1, 2)]
                elif e >= 3:
                    local = [(q - 1, 2), (5, 2 ** (e - 2))]
            else:
                phi = q // p * (p - 1)
                g = next(g for g in range(2, q) if g % p and multiplicative_order(g, q) == phi)
                local = [(g, phi)]
            for g, order in local:
                # CRT: x = g mod q, x = 1 mod rest
                x = g if rest == 1 else (g * rest * pow(rest, -1, q) + q * pow(q, -1, rest)) % modulus
                gens.append(x)
                orders.append(order)
        self.gens = tuple(gens)
        self.orders = tuple(orders)
        self._log: dict[int, tuple[int, ...]] = {}
        for exps in itertools.product(*(range(o) for o in self.orders)):
            x = 1
            for g, k in zip(self.gens, exps):
                x = x * pow(g, k, modulus) % modulus if modulus > 1 else 1
            self._log[_res(x, modulus)] = exps

    @property
    def size(self) -> int:
        return math.prod(self.orders)

    def elements(self) -> list[int]:
        return sorted(self._log)

    def log(self, a: int) -> tuple[int, ...] | None:
        return self._log.get(_res(a, self.modulus))


@lru_cache(maxsize=None)
def unit_group(m: int) -> UnitGroup:
    return UnitGroup(m)


@dataclass(frozen=True)
class DirichletCharacter:
    """Character mod ``modulus`` with chi(g_i) = exp(2 pi i exponents[i] / order_i)."""

    modulus: int
    exponents: tuple[int, ...]

    @property
    def group(self) -> UnitGroup:
        return unit_group(self.modulus)

    def phase(self, a: int) -> Fraction | None:
        """chi(a) = exp(2 pi i phase); None when gcd(a, m) > 1."""
        exps = self.group.log(a)
        if exps is None:
            return None
        t = sum((Fraction(k * e, n) for k, e, n in zip(self.exponents, exps, self.group.orders)),
                Fraction(0))
        return t - math.floor(t)

    @cached_property
    def order(self) -> int:
        return math.lcm(1, *(n // math.gcd(k, n) for k, n in zip(self.exponents, self.group.orders)))

    @property
    def is_trivial(self) -> bool:
        return not any(self.exponents)

    @cached_property
    def is_even(self) -> bool:
        return self.phase(-1) == 0

    @property
    def parity(self) -> str:
        return "even" if self.is_even else "odd"

    @cached_property
    def conductor(self) -> int:
        units = self.group.elements()
        for f in divisors(self.modulus):
            if all(self.phase(a) == 0 for a in units if (a - 1) % f == 0):
                return f
        return self.modulus

    @cached_property
    def _primitive_table(self) -> dict[int, Fraction]:
        f = self.conductor
        table: dict[int, Fraction] = {}
        for a in unit_group(f).elements():
            lift = next(a + k * f for k in range(self.modulus) if math.gcd(a + k * f, self.modulus) == 1)
            table[_res(a, f)] = self.phase(lift)
        return table

    def primitive_phase(self, a: int) -> Fraction | None:
        """Phase of the primitive character inducing this one (None if gcd(a, conductor) > 1)."""
        if math.gcd(a, self.conductor) != 1:
            return None
        return self._primitive_table[_res(a, self.conductor)]

    def conj(self) -> "DirichletCharacter":
        return self ** -1

    def __pow__(self, k: int) -> "DirichletCharacter":
        return DirichletCharacter(self.modulus,
                                  tuple((e * k) % n for e, n in zip(self.exponents, self.group.orders)))

    def __mul__(self, other: "DirichletCharacter") -> "DirichletCharacter":
        if other.modulus != self.modulus:
            raise ValueError("characters have different moduli")
        return DirichletCharacter(self.modulus, tuple(
            (a + b) % n for a, b, n in zip(self.exponents, other.exponents, self.group.orders)))

    def value(self, a: int, primitive: bool = False):
        """Complex value at the current mpmath precision."""
        t = self.primitive_phase(a) if primitive else self.phase(a)
        if t is None:
            return mpmath.mpc(0)
        return _root_of_unity(t)

    @property
    def label(self) -> str:
        return f"chi_{self.modulus}({','.join(map(str, self.exponents))})"

    def __str__(self):
        return self.label


def _root_of_unity(t: Fraction):
    # exact values at the quarter points keep real characters real
    if t == 0:
        return mpmath.mpc(1)
    if t == Fraction(1, 2):
        return mpmath.mpc(-1)
    if t == Fraction(1, 4):
        return mpmath.mpc(0, 1)
    if t == Fraction(3, 4):
        return mpmath.mpc(0, -1)
    return mpmath.expjpi(2 * mpmath.mpf(t.numerator) / t.denominator)


def character_value(chi: DirichletCharacter, a: int, ctx: PrecisionContext) -> Approx:
    with ctx.workprec():
        v = chi.value(a)
        return Approx(v, ctx.eps if v != 0 else mpmath.mpf(0))


@dataclass(frozen=True)
class AbelianField:
    """The subfield F of Q(zeta_m) fixed by H = <subgroup_gens> in (Z/mZ)^x."""

    modulus: int
    subgroup_gens: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "subgroup_gens", tuple(int(h) for h in self.subgroup_gens))
        for h in self.subgroup_gens:
            if math.gcd(h, self.modulus) != 1:
                raise ValueError(f"subgroup generator {h} is not a unit mod {self.modulus}")

    @cached_property
    def subgroup(self) -> frozenset[int]:
        m = self.modulus
        elems = {1}
        frontier = [1]
        while frontier:
            x = frontier.pop()
            for h in self.subgroup_gens:
                y = _res(x * h, m)
                if y not in elems:
                    elems.add(y)
                    frontier.append(y)
        return frozenset(elems)

    @cached_property
    def _coset_rep(self) -> dict[int, int]:
        m = self.modulus
        rep: dict[int, int] = {}
        for a in unit_group(m).elements():
            if a in rep:
                continue
            coset = [_res(a * h, m) for h in self.subgroup]
            r = min(coset)
            for x in coset:
                rep[x] = r
        return rep

    @cached_property
    def elements(self) -> tuple[int, ...]:
        """Coset representatives of G = (Z/mZ)^x / H, smallest residue in each coset."""
        return tuple(sorted(set(self._coset_rep.values())))

    @property
    def degree(self) -> int:
        return len(self.elements)

    @cached_property
    def is_real(self) -> bool:
        return self.rep(-1) == 1

    def rep(self, a: int) -> int:
        r = self._coset_rep.get(_res(a, self.modulus))
        if r is None:
            raise ValueError(f"{a} is not a unit mod {self.modulus}")
        return r

    def mul(self, a: int, b: int) -> int:
        return self.rep(a * b)

    def inv(self, a: int) -> int:
        return self.rep(pow(a, -1, self.modulus)) if self.modulus > 1 else 1

    @property
    def conjugation(self) -> int:
        """Image of complex conjugation (-1 mod m) in G."""
        return self.rep(-1)

    def element_order(self, a: int) -> int:
        k, x = 1, self.rep(a)
        while x != 1:
            x = self.mul(x, a)
            k += 1
        return k

    @property
    def label(self) -> str:
        return f"F(m={self.modulus},H=<{','.join(map(str, self.subgroup_gens))}>)"


RATIONALS = AbelianField(1)


def characters_of(F: AbelianField) -> list[DirichletCharacter]:
    """The d characters of G, trivial character first, then by exponent vector."""
    group = unit_group(F.modulus)
    chars = []
    for exps in itertools.product(*(range(n) for n in group.orders)):
        chi = DirichletCharacter(F.modulus, exps)
        if all(chi.phase(h) == 0 for h in F.subgroup_gens):
            chars.append(chi)
    chars.sort(key=lambda c: (c.order, c.exponents))
    return chars


def galois_orbits(chars: Sequence[DirichletCharacter]) -> list[list[DirichletCharacter]]:
    """Partition into orbits {chi^k : gcd(k, order chi) = 1}, in first-appearance order."""
    seen: set[DirichletCharacter] = set()
    orbits = []
    for chi in chars:
        if chi in seen:
            continue
        orbit = []
        for k in range(1, chi.order + 1):
            if math.gcd(k, chi.order) == 1:
                psi = chi ** k
                if psi not in orbit:
                    orbit.append(psi)
        orbit = [c for c in chars if c in orbit]
        seen.update(orbit)
        orbits.append(orbit)
    return orbits


def splitting_data(F: AbelianField, p: int) -> tuple[int, int]:
    """(residue degree f, number of primes g) of p in F."""
    if F.modulus > 1 and F.modulus % p == 0:
        raise RamifiedPrime(f"{p} divides the modulus {F.modulus}")
    f = F.element_order(p)
    return f, F.degree // f
