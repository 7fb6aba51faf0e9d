"""Prime-field arithmetic and a fixed-point codec for signed real data.

Real observations are scaled to integers and reduced mod ``p``. Aggregates
are decoded with the centered lift, so signed sums come back correctly as
long as ``|sum| < p / 2`` in field units, which ``choose_modulus`` ensures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Union

import sympy


class ModulusMismatchError(ValueError):
    """Raised when combining elements of different fields."""


class BoundViolationError(ValueError):
    """Raised when a value falls outside the codec's data bound."""


@dataclass(frozen=True)
class FieldModulus:
    p: int

    def __post_init__(self) -> None:
        if not isinstance(self.p, int) or self.p < 2 or not sympy.isprime(self.p):
            raise ValueError(f"modulus must be prime, got {self.p!r}")

    def element(self, value: int) -> "FieldElement":
        return FieldElement(value % self.p, self)

    def lift(self, value: int) -> int:
        """Centered representative of ``value`` in (-p/2, p/2]."""
        v = value % self.p
        return v if v <= (self.p - 1) // 2 else v - self.p


@dataclass(frozen=True)
class FieldElement:
    value: int
    modulus: FieldModulus

    def __post_init__(self) -> None:
        if not 0 <= self.value < self.modulus.p:
            raise ValueError(f"{self.value} not reduced mod {self.modulus.p}")

    def _check(self, other: "FieldElement") -> None:
        if not isinstance(other, FieldElement):
            raise TypeError(f"expected FieldElement, got {type(other).__name__}")
        if other.modulus != self.modulus:
            raise ModulusMismatchError(
                f"cannot combine mod {self.modulus.p} with mod {other.modulus.p}"
            )

    def __add__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return self.modulus.element(self.value + other.value)

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return self.modulus.element(self.value - other.value)

    def __neg__(self) -> "FieldElement":
        return self.modulus.element(-self.value)

    def __mul__(self, m: int) -> "FieldElement":
        if isinstance(m, FieldElement):
            self._check(m)
            m = m.value
        return self.modulus.element(self.value * m)

    __rmul__ = __mul__

    def __int__(self) -> int:
        return self.value


def field_add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def field_sub(a: FieldElement, b: FieldElement) -> FieldElement:
    return a - b


def field_scale(a: FieldElement, m: int) -> FieldElement:
    return a * m


def _decimal(x: Union[float, int, Decimal]) -> Decimal:
    # str() keeps the shortest repr, so 2.35 scales to 23.5 rather than 23.4999...
    return x if isinstance(x, Decimal) else Decimal(str(x))


def units_bound(x_max: float, scale: int) -> int:
    """Largest magnitude of a single encoded value, in field units."""
    return math.ceil(_decimal(x_max) * scale)


def choose_modulus(n: int, x_max: float, scale: int) -> FieldModulus:
    """Smallest prime above ``2 * n * ceil(x_max * scale) + 1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not x_max > 0:
        raise ValueError("x_max must be positive")
    if scale < 1:
        raise ValueError("scale must be >= 1")
    bound = 2 * n * units_bound(x_max, scale) + 1
    return FieldModulus(int(sympy.nextprime(bound)))


def round_half_away(x: Decimal) -> int:
    return int(x.quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class FixedPointCodec:
    """Maps reals in ``[-x_max, x_max]`` to field elements at ``scale`` units per unit."""

    scale: int
    modulus: FieldModulus
    n: int
    x_max: float

    def __post_init__(self) -> None:
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        need = 2 * self.n * units_bound(self.x_max, self.scale) + 1
        if self.modulus.p <= need:
            raise ValueError(
                f"modulus {self.modulus.p} too small for n={self.n}, "
                f"x_max={self.x_max}, scale={self.scale} (need > {need})"
            )

    @classmethod
    def for_network(cls, n: int, x_max: float, scale: int = 1) -> "FixedPointCodec":
        return cls(scale, choose_modulus(n, x_max, scale), n, x_max)

    @property
    def p(self) -> int:
        return self.modulus.p

    def to_units(self, x: float) -> int:
        """Signed integer encoding of ``x`` before reduction mod p."""
        d = _decimal(x)
        if abs(d) > _decimal(self.x_max):
            raise BoundViolationError(f"|{x}| exceeds bound {self.x_max}")
        return round_half_away(d * self.scale)

    def encode(self, x: float) -> FieldElement:
        return self.modulus.element(self.to_units(x))

    def decode_sum(self, v: FieldElement | int) -> float:
        value = v.value if isinstance(v, FieldElement) else v
        return self.modulus.lift(value) / self.scale


def encode(x: float, codec: FixedPointCodec) -> FieldElement:
    return codec.encode(x)


def decode_sum(v: FieldElement | int, codec: FixedPointCodec) -> float:
    return codec.decode_sum(v)
