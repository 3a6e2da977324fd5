"""Numerical verification of rationality statements relating twisted L-values of
elliptic curves to elliptic dilogarithms over abelian fields."""

__version__ = "0.1.0"

from .arith import AbelianField, DirichletCharacter, characters_of
from .curve import EllipticCurveData, PeriodLattice, TorusPoint, periods
from .dilog import Divisor, GaloisDivisor, character_sums, elliptic_D, elliptic_J
from .mpnum import Approx, PrecisionContext

__all__ = [
    "AbelianField", "DirichletCharacter", "characters_of",
    "EllipticCurveData", "PeriodLattice", "TorusPoint", "periods",
    "Divisor", "GaloisDivisor", "character_sums", "elliptic_D", "elliptic_J",
    "Approx", "PrecisionContext",
]
