"""Orbits modulo q, local densities and the sieve dimension.

Densities are exact ``Fraction`` values. A modulus that shares primes with
the denominator D of F (12 for F_A, 60 for F_C) is handled on residues
modulo the lifted modulus ``M = q·D_q``, where ``F ≡ 0 (mod q)`` is the same
as ``numerator ≡ 0 (mod M)``.

For groups lifted from SL₂ the orbit of x₀ modulo an odd prime p is one of
the two spin classes of the cone, ``(p² − 1)/2`` points. A prime counts as
unramified when the orbit covers the whole class of x₀.
"""

import logging
import math
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import StrEnum
from fractions import Fraction
from functools import lru_cache
from typing import Any

import numpy as np
from sympy import factorint, isprime, legendre_symbol, primerange

from .errors import ComputationError, InputError, InsufficientData
from .lattice import (
    F_A,
    F_H,
    Mat3,
    Row,
    SievePolynomial,
    eval_F,
)
from .orbit import GroupPresentation, enumerate_words

logger = logging.getLogger(__name__)

# Primes up to this bound get BFS densities; closed forms are used beyond
DEFAULT_BFS_BOUND = 50

# Residue products must stay inside int64: 3·M² and M³ both below 2⁶³
MAX_WORKING_MODULUS = 1 << 20

# Word length of the integral witness points tried before any residue BFS
_WITNESS_WORD_LENGTH = 3


class ModulusError(InputError):
    """Raised when a modulus is out of range, not prime or not square-free."""

    pass


class DensityRangeError(ComputationError):
    """Raised when a density reaches 1, i.e. F vanishes on the whole orbit mod p."""

    pass


@dataclass(frozen=True, order=True)
class ResidueTriple:
    """Residues (x, y, z) modulo ``modulus``, each in [0, modulus)."""

    x: int
    y: int
    z: int
    modulus: int

    def __post_init__(self) -> None:
        if self.modulus < 1:
            raise ModulusError(f"Modulus must be positive, got {self.modulus}")
        if not all(0 <= c < self.modulus for c in (self.x, self.y, self.z)):
            raise ModulusError(
                f"Residues {self.as_tuple()} are not reduced modulo {self.modulus}"
            )

    @classmethod
    def of(cls, point: Iterable[int], modulus: int) -> "ResidueTriple":
        x, y, z = (int(c) % modulus for c in point)
        return cls(x, y, z, modulus)

    def reduce(self, q: int) -> "ResidueTriple":
        """Project to a divisor q of the modulus."""
        if self.modulus % q:
            raise ModulusError(f"{q} does not divide {self.modulus}")
        return ResidueTriple.of(self.as_tuple(), q)

    def as_tuple(self) -> Row:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class OrbitModQ:
    """Orbit of x₀ modulo q and, if a polynomial was given, its zero set.

    ``points`` and ``vanishing`` hold residues modulo ``working_modulus``,
    which equals ``modulus`` unless q shares primes with F's denominator.
    """

    modulus: int
    working_modulus: int
    points: tuple[ResidueTriple, ...]
    vanishing: tuple[ResidueTriple, ...] = ()
    polynomial: SievePolynomial | None = None

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def density(self) -> Fraction:
        """|O^F(q)| / |O(q)|."""
        return Fraction(len(self.vanishing), len(self.points))

    def reduced(self) -> tuple[ResidueTriple, ...]:
        """Orbit points projected to the modulus q, sorted and distinct."""
        if self.working_modulus == self.modulus:
            return self.points
        return tuple(sorted({p.reduce(self.modulus) for p in self.points}))


class Provenance(StrEnum):
    BFS = "bfs"
    CONE_FORMULA = "cone-formula"


@dataclass(frozen=True)
class DensityEntry:
    p: int
    value: Fraction
    provenance: Provenance

    def to_json(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "num": self.value.numerator,
            "den": self.value.denominator,
            "provenance": self.provenance.value,
        }


@dataclass(frozen=True)
class LocalDensityTable:
    """Exact g^F(p) for every prime below a bound."""

    polynomial: SievePolynomial
    entries: tuple[DensityEntry, ...]
    ramified: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for entry in self.entries:
            if not 0 <= entry.value < 1:
                raise DensityRangeError(
                    f"g^{self.polynomial.tag}({entry.p}) = {entry.value} is outside "
                    "[0, 1); F is not strongly primitive on this orbit"
                )

    @property
    def primes(self) -> list[int]:
        return [entry.p for entry in self.entries]

    def value(self, p: int) -> Fraction:
        for entry in self.entries:
            if entry.p == p:
                return entry.value
        raise KeyError(p)

    def to_json(self) -> dict[str, Any]:
        return {
            "polynomial": self.polynomial.tag.value,
            "entries": [entry.to_json() for entry in self.entries],
            "ramified": list(self.ramified),
        }


@dataclass(frozen=True)
class RamificationReport:
    """Primes p ≤ p_max where the orbit mod p misses part of x₀'s spin class.

    The prime 2 is always listed: the spin-class test only applies to odd p.
    """

    p_max: int
    primes: tuple[int, ...]
    orbit_sizes: tuple[tuple[int, int], ...] = ()

    @property
    def odd_primes(self) -> tuple[int, ...]:
        return tuple(p for p in self.primes if p != 2)

    def to_json(self) -> dict[str, Any]:
        return {
            "p_max": self.p_max,
            "ramified": list(self.primes),
            "orbit_sizes": {str(p): n for p, n in self.orbit_sizes},
        }


@dataclass(frozen=True)
class PrimitivityResult:
    ok: bool
    failing_modulus: int | None
    q_max: int

    def to_json(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "failing_modulus": self.failing_modulus,
            "q_max": self.q_max,
        }


def is_square_free(q: int) -> bool:
    return q >= 1 and all(e == 1 for e in factorint(q).values())


def lifted_modulus(F: SievePolynomial | None, q: int) -> int:
    """q times the part of F's denominator supported on the primes of q."""
    if F is None:
        return q
    lift = 1
    for p in factorint(q):
        while F.denominator % (lift * p) == 0:
            lift *= p
    return q * lift


def _encode(points: np.ndarray, modulus: int) -> np.ndarray:
    return (points[:, 0] * modulus + points[:, 1]) * modulus + points[:, 2]


@lru_cache(maxsize=256)
def _residue_orbit(
    generators: tuple[Mat3, ...], start: Row, modulus: int
) -> np.ndarray:
    """Closure of ``start`` under ``generators`` mod ``modulus``, rows sorted."""
    matrices = [np.array(g.reduce(modulus).rows, dtype=np.int64) for g in generators]
    frontier = np.array([start], dtype=np.int64) % modulus
    seen: set[int] = set(_encode(frontier, modulus).tolist())
    layers = [frontier]
    while matrices and len(frontier):
        images = np.concatenate([frontier @ m.T % modulus for m in matrices])
        codes, first = np.unique(_encode(images, modulus), return_index=True)
        fresh = np.fromiter(
            (code not in seen for code in codes.tolist()), dtype=bool, count=len(codes)
        )
        frontier = images[first[fresh]]
        seen.update(codes[fresh].tolist())
        layers.append(frontier)
    orbit = np.concatenate(layers)
    orbit = orbit[np.lexsort((orbit[:, 2], orbit[:, 1], orbit[:, 0]))]
    orbit.flags.writeable = False
    logger.debug(f"orbit mod {modulus}: {len(orbit)} points")
    return orbit


def _vanishing_mask(
    F: SievePolynomial, residues: np.ndarray, modulus: int
) -> np.ndarray:
    x, y, z = residues[:, 0], residues[:, 1], residues[:, 2]
    if F.tag == F_H.tag:
        numerator = z % modulus
    elif F.tag == F_A.tag:
        numerator = x * y % modulus
    else:
        numerator = x * y % modulus * z % modulus
    return numerator == 0


def orbit_mod_q(
    group: GroupPresentation, q: int, F: SievePolynomial | None = None
) -> OrbitModQ:
    """BFS closure of x₀ mod q under the generators and their inverses.

    Generators of a GroupPresentation have determinant 1, so each reduces to
    a unit mod every q and needs no invertibility check here.

    Args:
        group: The presentation
        q: Modulus, at least 2
        F: Optional polynomial; when given, the zero set of F mod q is
            computed too, on the lifted modulus if needed

    Raises:
        ModulusError: If q < 2 or the lifted modulus is too large
    """
    if q < 2:
        raise ModulusError(f"Modulus must be at least 2, got {q}")
    working = lifted_modulus(F, q)
    if working > MAX_WORKING_MODULUS:
        raise ModulusError(
            f"Working modulus {working} exceeds {MAX_WORKING_MODULUS}; "
            "residue products would overflow"
        )
    residues = _residue_orbit(
        group.closed_generators, group.base_point.as_tuple(), working
    )
    points = tuple(ResidueTriple(x, y, z, working) for x, y, z in residues.tolist())
    vanishing: tuple[ResidueTriple, ...] = ()
    if F is not None:
        mask = _vanishing_mask(F, residues, working)
        hits = mask.tolist()
        vanishing = tuple(p for p, hit in zip(points, hits, strict=True) if hit)
    return OrbitModQ(q, working, points, vanishing, F)


def _require_odd_prime(p: int) -> None:
    if p < 3 or not isprime(p):
        raise ModulusError(f"Expected an odd prime, got {p}")


def _cone_residues(modulus: int, *, primitive: bool) -> np.ndarray:
    r = np.arange(modulus, dtype=np.int64)
    x, y, z = (a.ravel() for a in np.meshgrid(r, r, r, indexing="ij"))
    grid = np.stack([x, y, z], axis=1)
    on_cone = (x * x + y * y - z * z) % modulus == 0
    if primitive:
        keep = np.gcd(np.gcd(np.gcd(x, y), z), modulus) == 1
    else:
        keep = (x != 0) | (y != 0) | (z != 0)
    return grid[on_cone & keep]


def cone_points_mod_p(p: int) -> tuple[ResidueTriple, ...]:
    """All nonzero solutions of x² + y² ≡ z² (mod p), by brute force.

    Raises:
        ModulusError: If p is not an odd prime
    """
    _require_odd_prime(p)
    residues = _cone_residues(p, primitive=False).tolist()
    return tuple(ResidueTriple(x, y, z, p) for x, y, z in residues)


def spin_class(point: Iterable[int], p: int) -> int:
    """Legendre symbol of (z+x)/2 mod p, or of (z−x)/2 when z+x ≡ 0.

    Constant on orbits of any group lifted from SL₂(Z).

    Raises:
        ModulusError: If p is not an odd prime or the point is zero mod p
    """
    _require_odd_prime(p)
    x, y, z = (int(c) % p for c in point)
    half = pow(2, -1, p)
    if (z + x) % p:
        return int(legendre_symbol((z + x) * half % p, p))
    if (z - x) % p:
        return int(legendre_symbol((z - x) * half % p, p))
    raise ModulusError(f"{(x, y, z)} is the zero cone point mod {p}")


def cone_density(F: SievePolynomial, p: int) -> Fraction:
    """Brute-force share of primitive cone points mod M on which F ≡ 0 (mod p).

    M is the lifted modulus of p for F. This is the oracle that BFS densities
    and closed forms are checked against.
    """
    _require_odd_prime(p)
    working = lifted_modulus(F, p)
    cone = _cone_residues(working, primitive=True)
    hits = int(_vanishing_mask(F, cone, working).sum())
    return Fraction(hits, len(cone))


def closed_form_density(F: SievePolynomial, p: int) -> Fraction | None:
    """g^F(p) at an odd unramified prime not dividing F's denominator.

    Returns None where no closed form applies (p = 2 or p | denominator).
    """
    if p == 2 or F.denominator % p == 0:
        return None
    minus_one_square = p % 4 == 1
    if F.tag == F_H.tag:
        return Fraction(2, p + 1) if minus_one_square else Fraction(0)
    if F.tag == F_A.tag:
        return Fraction(4, p + 1)
    return Fraction(6, p + 1) if minus_one_square else Fraction(4, p + 1)


def local_density(group: GroupPresentation, F: SievePolynomial, q: int) -> Fraction:
    """g^F(q) = |O^F(q)| / |O(q)| as an exact rational.

    Raises:
        ModulusError: If q is not a positive square-free integer
    """
    if not is_square_free(q):
        raise ModulusError(f"Local densities need a square-free modulus, got {q}")
    if q == 1:
        return Fraction(1)
    return orbit_mod_q(group, q, F).density


def verify_multiplicativity(
    group: GroupPresentation, F: SievePolynomial, q1: int, q2: int
) -> bool:
    """True iff g(q₁q₂) = g(q₁)·g(q₂) exactly.

    Raises:
        ModulusError: If q₁ and q₂ are not coprime
    """
    if math.gcd(q1, q2) != 1:
        raise ModulusError(f"{q1} and {q2} are not coprime")
    joint = local_density(group, F, q1 * q2)
    product = local_density(group, F, q1) * local_density(group, F, q2)
    if joint != product:
        logger.warning(
            f"{F.tag}: g({q1 * q2}) = {joint} but g({q1})g({q2}) = {product}"
        )
    return joint == product


def detect_ramified_primes(group: GroupPresentation, p_max: int) -> RamificationReport:
    """Primes p ≤ p_max where reduction mod p is not transitive on x₀'s class.

    Raises:
        ModulusError: If p_max < 2
    """
    if p_max < 2:
        raise ModulusError(f"p_max must be at least 2, got {p_max}")
    ramified = [2]
    sizes = []
    for p in primerange(3, p_max + 1):
        orbit = {point.as_tuple() for point in orbit_mod_q(group, p).points}
        target = spin_class(group.base_point, p)
        klass = {
            point.as_tuple()
            for point in cone_points_mod_p(p)
            if spin_class(point.as_tuple(), p) == target
        }
        sizes.append((int(p), len(orbit)))
        if not klass <= orbit:
            logger.debug(f"p={p}: orbit has {len(orbit)} of {len(klass)} class points")
            ramified.append(int(p))
    return RamificationReport(p_max, tuple(ramified), tuple(sizes))


def check_strong_primitivity(
    group: GroupPresentation, F: SievePolynomial, q_max: int
) -> PrimitivityResult:
    """Find the first q ≤ q_max with F ≡ 0 (mod q) on the whole orbit.

    If every orbit value is divisible by q, it is divisible by each prime
    factor of q, so only primes need checking. Integral witness points are
    tried first; residue BFS settles the rest.

    Raises:
        ModulusError: If q_max < 2
    """
    if q_max < 2:
        raise ModulusError(f"q_max must be at least 2, got {q_max}")
    witnesses = enumerate_words(group, _WITNESS_WORD_LENGTH)
    values = [eval_F(F, t) for t in witnesses]
    for p in primerange(2, q_max + 1):
        if any(value % p for value in values):
            continue
        orbit = orbit_mod_q(group, int(p), F)
        if len(orbit.vanishing) == orbit.size:
            logger.info(f"{F.tag} vanishes on the whole orbit mod {p}")
            return PrimitivityResult(False, int(p), q_max)
    return PrimitivityResult(True, None, q_max)


def build_density_table(
    group: GroupPresentation,
    F: SievePolynomial,
    z_max: float,
    *,
    bfs_bound: int = DEFAULT_BFS_BOUND,
    threads: int = 1,
) -> LocalDensityTable:
    """g^F(p) for all primes p < z_max.

    Primes up to ``bfs_bound`` (and any prime with no closed form) come from
    residue BFS; the rest from the closed forms. Where both exist below the
    bound and p is unramified, a disagreement is logged.
    """
    ramified = detect_ramified_primes(group, min(bfs_bound, max(2, int(z_max))))
    primes = [int(p) for p in primerange(2, math.ceil(z_max))]
    bfs_primes = [
        p for p in primes if p <= bfs_bound or closed_form_density(F, p) is None
    ]

    def bfs(p: int) -> Fraction:
        return local_density(group, F, p)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            bfs_values = dict(zip(bfs_primes, pool.map(bfs, bfs_primes), strict=True))
    else:
        bfs_values = {p: bfs(p) for p in bfs_primes}

    entries = []
    for p in primes:
        closed = closed_form_density(F, p)
        if p in bfs_values:
            value = bfs_values[p]
            if closed is not None and p not in ramified.primes and closed != value:
                logger.warning(f"{F.tag}: BFS g({p}) = {value}, closed form {closed}")
            entries.append(DensityEntry(p, value, Provenance.BFS))
        else:
            assert closed is not None
            entries.append(DensityEntry(p, closed, Provenance.CONE_FORMULA))
    return LocalDensityTable(F, tuple(entries), ramified.primes)


def sieve_dimension_fit(
    densities: LocalDensityTable,
    z_max: float,
    *,
    z_min: float = 100.0,
    samples: int = 40,
) -> float:
    """Slope of log ∏_{p<z}(1 − g(p))⁻¹ against log log z.

    Raises:
        InsufficientData: If the table misses a prime below z_max or the
            sampling range is empty
    """
    if not z_max > z_min:
        raise InsufficientData(f"z_max={z_max} must exceed z_min={z_min}")
    table = {entry.p: entry.value for entry in densities.entries}
    primes = [int(p) for p in primerange(2, math.ceil(z_max))]
    missing = [p for p in primes if p not in table]
    if missing:
        raise InsufficientData(
            f"Density table lacks {len(missing)} primes below {z_max}, "
            f"first {missing[0]}"
        )
    g = np.array([float(table[p]) for p in primes])
    cumulative = np.cumsum(-np.log1p(-g))
    z = np.geomspace(z_min, z_max, samples)
    below = np.searchsorted(np.array(primes), z, side="left")
    log_product = np.where(below > 0, cumulative[np.maximum(below - 1, 0)], 0.0)
    slope, _ = np.polyfit(np.log(np.log(z)), log_product, 1)
    return float(slope)

