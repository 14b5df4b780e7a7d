"""Exact integer arithmetic on the cone x² + y² − z² = 0.

This module provides:
- Triples, 2×2 and 3×3 integer matrices with exact (unbounded) entries
- The spin lift SL₂(Z) → SO_Q(Z) and the (u, v) parametrization
- The sieve polynomials F_H, F_A and F_C

Action convention: a 3×3 matrix acts on a triple as a column vector,
``act(t, m) = m·t``. With the spin lift this matches the row action of
SL₂ on (u, v)::

    act(uv_param(u, v), spin_lift(m)) == uv_param(*((u, v)·m))

and ``spin_lift(m₁m₂) == spin_lift(m₂) @ spin_lift(m₁)``.
"""

import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import StrEnum
from math import gcd

from .errors import InputError

logger = logging.getLogger(__name__)

Row = tuple[int, int, int]


class ParityError(InputError):
    """Raised when a spin-lift entry would be a half-integer."""

    pass


class DetError(InputError):
    """Raised when a 2×2 matrix does not have determinant 1."""

    pass


class DivisibilityError(InputError):
    """Raised when a sieve polynomial's denominator does not divide its numerator."""

    pass


class InvalidGeneratorError(InputError):
    """Raised when a 3×3 matrix is not in SO_Q(Z).

    Attributes:
        invariant: Name of the failed check ("shape", "integrality",
            "orthogonality" or "determinant")
    """

    def __init__(self, invariant: str, message: str) -> None:
        super().__init__(message)
        self.invariant = invariant


@dataclass(frozen=True, order=True)
class Triple:
    """Integer point (x, y, z); ordering is lexicographic."""

    x: int
    y: int
    z: int

    def __iter__(self) -> Iterator[int]:
        yield from (self.x, self.y, self.z)

    @property
    def norm_sq(self) -> int:
        """Squared Euclidean norm x² + y² + z²."""
        return self.x * self.x + self.y * self.y + self.z * self.z

    @property
    def content(self) -> int:
        """gcd(x, y, z); zero only for the zero triple."""
        return gcd(self.x, self.y, self.z)

    def is_cone_point(self) -> bool:
        return q_form(self) == 0

    def is_primitive(self) -> bool:
        return self.content == 1

    def as_tuple(self) -> Row:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class Mat2:
    """2×2 integer matrix (a b; c d)."""

    a: int
    b: int
    c: int
    d: int

    @classmethod
    def identity(cls) -> "Mat2":
        return cls(1, 0, 0, 1)

    @property
    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __neg__(self) -> "Mat2":
        return Mat2(-self.a, -self.b, -self.c, -self.d)

    def inverse(self) -> "Mat2":
        """Inverse of a determinant-one matrix."""
        if self.det != 1:
            raise DetError(f"Matrix {self} has determinant {self.det}, expected 1")
        return Mat2(self.d, -self.b, -self.c, self.a)


@dataclass(frozen=True)
class Mat3:
    """3×3 integer matrix stored row-major."""

    rows: tuple[Row, Row, Row]

    @classmethod
    def of(cls, rows: Sequence[Sequence[int]]) -> "Mat3":
        """Build from nested sequences, checking shape and integrality.

        Raises:
            InvalidGeneratorError: If the input is not a 3×3 array of integers
        """
        if len(rows) != 3 or any(len(row) != 3 for row in rows):
            raise InvalidGeneratorError(
                "shape", f"Expected a 3×3 matrix, got {rows!r}"
            )
        for row in rows:
            for entry in row:
                if isinstance(entry, bool) or not isinstance(entry, int):
                    raise InvalidGeneratorError(
                        "integrality", f"Non-integer entry {entry!r} in {rows!r}"
                    )
        r0, r1, r2 = (tuple(row) for row in rows)
        return cls((r0, r1, r2))  # type: ignore[arg-type]

    @classmethod
    def diag(cls, a: int, b: int, c: int) -> "Mat3":
        return cls(((a, 0, 0), (0, b, 0), (0, 0, c)))

    @classmethod
    def identity(cls) -> "Mat3":
        return cls.diag(1, 1, 1)

    def __matmul__(self, other: "Mat3") -> "Mat3":
        cols = other.transpose().rows
        r0, r1, r2 = (
            (
                sum(a * b for a, b in zip(row, cols[0], strict=True)),
                sum(a * b for a, b in zip(row, cols[1], strict=True)),
                sum(a * b for a, b in zip(row, cols[2], strict=True)),
            )
            for row in self.rows
        )
        return Mat3((r0, r1, r2))

    def transpose(self) -> "Mat3":
        (a, b, c), (d, e, f), (g, h, i) = self.rows
        return Mat3(((a, d, g), (b, e, h), (c, f, i)))

    @property
    def det(self) -> int:
        (a, b, c), (d, e, f), (g, h, i) = self.rows
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)

    def inverse(self) -> "Mat3":
        """Inverse in SO_Q(Z), computed as J·Mᵀ·J."""
        return J @ self.transpose() @ J

    def reduce(self, q: int) -> "Mat3":
        """Entries reduced to [0, q)."""
        r0, r1, r2 = (tuple(entry % q for entry in row) for row in self.rows)
        return Mat3((r0, r1, r2))  # type: ignore[arg-type]

    def to_list(self) -> list[list[int]]:
        return [list(row) for row in self.rows]


# Gram matrix of Q = x² + y² − z²
J = Mat3.diag(1, 1, -1)


def q_form(t: Triple) -> int:
    """Evaluate Q(x, y, z) = x² + y² − z² exactly."""
    return t.x * t.x + t.y * t.y - t.z * t.z


def uv_param(u: int, v: int) -> Triple:
    """Return (u² − v², 2uv, u² + v²), a point on the cone."""
    return Triple(u * u - v * v, 2 * u * v, u * u + v * v)


def spin_lift(m: Mat2) -> Mat3:
    """Lift an SL₂(Z) matrix to SO_Q(Z) through the spin double cover.

    Args:
        m: Matrix with determinant 1 and a + b + c + d even

    Returns:
        The 3×3 image; ``spin_lift(-m) == spin_lift(m)``

    Raises:
        DetError: If det(m) != 1
        ParityError: If any halved entry is not an integer
    """
    if m.det != 1:
        raise DetError(f"Cannot lift {m}: determinant is {m.det}, expected 1")

    a, b, c, d = m.a, m.b, m.c, m.d
    aa, bb, cc, dd = a * a, b * b, c * c, d * d
    doubled = (
        aa - bb - cc + dd,
        aa - bb + cc - dd,
        aa + bb - cc - dd,
        aa + bb + cc + dd,
    )
    if any(value % 2 for value in doubled):
        raise ParityError(
            f"Cannot lift {m}: a + b + c + d = {a + b + c + d} is odd, "
            "so the spin matrix has half-integer entries"
        )
    h00, h02, h20, h22 = (value // 2 for value in doubled)
    return Mat3(
        (
            (h00, a * c - b * d, h02),
            (a * b - c * d, b * c + a * d, a * b + c * d),
            (h20, a * c + b * d, h22),
        )
    )


def act(t: Triple, m: Mat3) -> Triple:
    """Apply ``m`` to ``t`` as a column vector."""
    x, y, z = (row[0] * t.x + row[1] * t.y + row[2] * t.z for row in m.rows)
    return Triple(x, y, z)


def validate_generator(m: Mat3) -> None:
    """Confirm ``m`` is an integral element of SO_Q(Z).

    Raises:
        InvalidGeneratorError: Naming the first invariant that fails
    """
    for row in m.rows:
        for entry in row:
            if isinstance(entry, bool) or not isinstance(entry, int):
                raise InvalidGeneratorError(
                    "integrality", f"Non-integer entry {entry!r} in {m.to_list()}"
                )
    if m.transpose() @ J @ m != J:
        raise InvalidGeneratorError(
            "orthogonality", f"{m.to_list()} does not preserve x² + y² − z²"
        )
    if m.det != 1:
        raise InvalidGeneratorError(
            "determinant", f"{m.to_list()} has determinant {m.det}, expected 1"
        )


class PolynomialTag(StrEnum):
    """Short names used in configs and on the command line."""

    HYPOTENUSE = "FH"
    AREA = "FA"
    COORDINATES = "FC"


# tag -> (denominator, irreducible components, display name)
_POLYNOMIAL_SHAPES: dict[PolynomialTag, tuple[int, int, str]] = {
    PolynomialTag.HYPOTENUSE: (1, 1, "Hypotenuse"),
    PolynomialTag.AREA: (12, 4, "Area"),
    PolynomialTag.COORDINATES: (60, 5, "Coordinates"),
}


@dataclass(frozen=True)
class SievePolynomial:
    """One of z, xy/12 or xyz/60 on primitive cone points."""

    tag: PolynomialTag
    denominator: int
    components: int

    def __post_init__(self) -> None:
        denominator, components, _ = _POLYNOMIAL_SHAPES[self.tag]
        if (self.denominator, self.components) != (denominator, components):
            raise InputError(
                f"{self.tag} needs denominator {denominator} and "
                f"{components} components, got {self.denominator}/{self.components}"
            )

    @property
    def name(self) -> str:
        return _POLYNOMIAL_SHAPES[self.tag][2]

    def numerator(self, t: Triple) -> int:
        """The integer polynomial before division: z, xy or xyz."""
        if self.tag is PolynomialTag.HYPOTENUSE:
            return t.z
        if self.tag is PolynomialTag.AREA:
            return t.x * t.y
        return t.x * t.y * t.z


F_H = SievePolynomial(PolynomialTag.HYPOTENUSE, 1, 1)
F_A = SievePolynomial(PolynomialTag.AREA, 12, 4)
F_C = SievePolynomial(PolynomialTag.COORDINATES, 60, 5)

POLYNOMIALS: dict[PolynomialTag, SievePolynomial] = {
    F_H.tag: F_H,
    F_A.tag: F_A,
    F_C.tag: F_C,
}


def polynomial_by_tag(tag: str) -> SievePolynomial:
    """Look up F_H, F_A or F_C by its tag ("FH", "FA", "FC").

    Raises:
        InputError: If the tag is unknown
    """
    try:
        return POLYNOMIALS[PolynomialTag(tag.upper())]
    except ValueError:
        valid = ", ".join(t.value for t in PolynomialTag)
        raise InputError(f"Unknown polynomial '{tag}'. Valid: {valid}") from None


def eval_F(F: SievePolynomial, t: Triple) -> int:
    """Evaluate a sieve polynomial exactly.

    Returns 0 when a coordinate vanishes; callers decide how to treat it.

    Raises:
        DivisibilityError: If the denominator does not divide the numerator,
            which happens only for non-primitive or off-cone input
    """
    numerator = F.numerator(t)
    if numerator % F.denominator:
        raise DivisibilityError(
            f"{F.tag}: {F.denominator} does not divide {numerator} at "
            f"{t.as_tuple()}; the point is not a primitive cone point"
        )
    return numerator // F.denominator
