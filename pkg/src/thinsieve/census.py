"""Almost-prime census of sieve polynomial values over orbit points.

Ω(n) counts prime factors with multiplicity and ignores the sign; points
where F vanishes are kept in the records but left out of every histogram.
"""

import logging
import math
import random
from collections import Counter
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, TextIO

from sympy import isprime, pollard_rho, primerange

from .artifacts import ExportIOError, write_csv
from .errors import ComputationError, InputError, InsufficientData
from .lattice import PolynomialTag, SievePolynomial, Triple, eval_F

logger = logging.getLogger(__name__)

TRIAL_DIVISION_LIMIT = 10**6
# Primes below this are always tried before the first primality test
_SMALL_PRIME_LIMIT = 1000
_RHO_RETRIES = 64

FIGURE_COLUMNS = ("x", "y", "z", "omega", "category")


class ZeroInput(InputError):
    """Raised when asked to factor 0."""

    pass


@lru_cache(maxsize=1)
def _trial_primes() -> tuple[int, ...]:
    return tuple(primerange(2, TRIAL_DIVISION_LIMIT))


@dataclass(frozen=True)
class Factorization:
    """n = sign · ∏ p^e with primes in increasing order."""

    n: int
    sign: int
    factors: tuple[tuple[int, int], ...]

    @property
    def omega(self) -> int:
        """Ω(|n|), prime factors counted with multiplicity."""
        return sum(e for _, e in self.factors)

    def product(self) -> int:
        return self.sign * math.prod(p**e for p, e in self.factors)


def _split(n: int, rng: random.Random) -> int:
    """A proper divisor of the composite ``n``."""
    for _ in range(_RHO_RETRIES):
        divisor = pollard_rho(
            n,
            s=rng.randrange(2, n - 1),
            a=rng.randrange(1, n - 3),
            retries=0,
            seed=rng.randrange(1 << 32),
        )
        if divisor is not None and 1 < divisor < n:
            return int(divisor)
    raise ComputationError(f"Pollard rho found no factor of {n}")


def big_omega(n: int, *, seed: int = 0) -> Factorization:
    """Factor n by trial division below 10⁶, then Pollard rho.

    Every prime factor is certified with sympy's ``isprime``, which is
    deterministic below 2⁶⁴ and a strong BPSW test above. ``seed`` only
    affects the rho starting values, never the result.

    Raises:
        ZeroInput: If n == 0
    """
    if n == 0:
        raise ZeroInput("Cannot factor 0")
    sign = -1 if n < 0 else 1
    remaining = abs(n)
    counts: Counter[int] = Counter()

    checked = False
    for p in _trial_primes():
        if p * p > remaining:
            break
        if not checked and p > _SMALL_PRIME_LIMIT:
            checked = True
            if isprime(remaining):
                break
        while remaining % p == 0:
            counts[p] += 1
            remaining //= p

    if remaining > 1:
        rng = random.Random(seed)
        stack = [remaining]
        while stack:
            m = stack.pop()
            if isprime(m):
                counts[m] += 1
                continue
            d = _split(m, rng)
            stack.extend((d, m // d))

    return Factorization(n, sign, tuple(sorted(counts.items())))


@dataclass(frozen=True)
class CensusRecord:
    """Ω of F at one orbit point; ``omega`` is None when F vanishes there."""

    triple: Triple
    tag: PolynomialTag
    value: int
    omega: int | None
    in_pr: dict[int, bool] = field(default_factory=dict)

    @property
    def is_zero(self) -> bool:
        return self.value == 0


@dataclass(frozen=True)
class CensusSummary:
    """Ω histogram and P(R) count for the records with norm below ``radius``."""

    radius: float | None
    r: int
    histogram: dict[int, int]
    in_pr: int
    total: int
    zeros: int

    def to_json(self) -> dict[str, Any]:
        return {
            "T": self.radius,
            "R": self.r,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "in_PR": self.in_pr,
            "total": self.total,
            "zeros": self.zeros,
        }


def summarize(
    records: Sequence[CensusRecord], r: int, radius: float | None = None
) -> CensusSummary:
    """Summary for one R, optionally restricted to points of norm < radius."""
    if radius is not None:
        bound = radius * radius
        records = [rec for rec in records if rec.triple.norm_sq < bound]
    histogram = Counter(rec.omega for rec in records if rec.omega is not None)
    zeros = sum(1 for rec in records if rec.is_zero)
    in_pr = sum(count for omega, count in histogram.items() if omega <= r)
    return CensusSummary(
        radius, r, dict(sorted(histogram.items())), in_pr, len(records), zeros
    )


def census(
    points: Iterable[Triple],
    F: SievePolynomial,
    r_list: Sequence[int],
    *,
    radius: float | None = None,
    threads: int = 1,
    seed: int = 0,
) -> tuple[list[CensusRecord], dict[int, CensusSummary]]:
    """Factor F over ``points`` and summarise P(R) membership for each R.

    Returns:
        Records in canonical triple order and one summary per R

    Raises:
        DivisibilityError: From eval_F if a point is not a primitive cone point
    """
    if any(r < 0 for r in r_list):
        raise InputError(f"R values must be non-negative, got {list(r_list)}")
    ordered = sorted(set(points))
    values = [eval_F(F, t) for t in ordered]

    def factor(value: int) -> int | None:
        return None if value == 0 else big_omega(value, seed=seed).omega

    if threads > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            omegas = list(pool.map(factor, values, chunksize=64))
    else:
        omegas = [factor(value) for value in values]

    records = [
        CensusRecord(
            t,
            F.tag,
            value,
            omega,
            {r: omega is not None and omega <= r for r in r_list},
        )
        for t, value, omega in zip(ordered, values, omegas, strict=True)
    ]
    zeros = sum(1 for rec in records if rec.is_zero)
    if zeros:
        logger.warning(f"{F.tag} vanishes at {zeros} of {len(records)} points")
    summaries = {r: summarize(records, r) for r in r_list}
    if radius is not None:
        summaries = {
            r: CensusSummary(radius, s.r, s.histogram, s.in_pr, s.total, s.zeros)
            for r, s in summaries.items()
        }
    return records, summaries


@dataclass(frozen=True)
class DensityPoint:
    radius: float
    count: int
    ratio: float

    def to_json(self) -> dict[str, Any]:
        return {"T": self.radius, "count": self.count, "ratio": self.ratio}


def density_curve(
    summaries: Sequence[CensusSummary], delta_hat: float, kappa: float
) -> list[DensityPoint]:
    """ratio(T) = #{F ∈ P(R), ‖x‖ < T} / (T^δ / (log T)^κ) per summary.

    Raises:
        InsufficientData: With fewer than three radii
        InputError: If a summary has no radius or its radius is ≤ 1
    """
    if len(summaries) < 3:
        raise InsufficientData(f"Need at least 3 radii, got {len(summaries)}")
    curve = []
    for summary in sorted(summaries, key=lambda s: s.radius or 0.0):
        t = summary.radius
        if t is None or t <= 1:
            raise InputError(f"Density curve needs radii above 1, got {t}")
        scale = t**delta_hat / math.log(t) ** kappa
        curve.append(DensityPoint(float(t), summary.in_pr, summary.in_pr / scale))
    return curve


def category(record: CensusRecord) -> str:
    """Figure category: prime/composite for F_H, le4/eq5/ge6 otherwise."""
    if record.omega is None:
        return "zero"
    if record.tag is PolynomialTag.HYPOTENUSE:
        return "prime" if record.omega == 1 else "composite"
    if record.omega <= 4:
        return "le4"
    return "eq5" if record.omega == 5 else "ge6"


_CATEGORY_COLOURS = {
    "le4": "tab:red",
    "eq5": "tab:orange",
    "ge6": "tab:gray",
    "prime": "tab:red",
    "composite": "tab:gray",
    "zero": "black",
}


def export_figure(
    records: Sequence[CensusRecord],
    path: TextIO | Path,
    *,
    svg_path: Path | None = None,
) -> None:
    """Write the figure dataset as CSV, and optionally an SVG scatter.

    Raises:
        ExportIOError: If either file cannot be written
    """
    rows = [
        (*rec.triple.as_tuple(), "" if rec.omega is None else rec.omega, category(rec))
        for rec in records
    ]
    write_csv(rows, FIGURE_COLUMNS, path, kind="figure")
    if svg_path is not None:
        _write_scatter(records, svg_path)


def _write_scatter(records: Sequence[CensusRecord], svg_path: Path) -> None:
    import matplotlib
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6, 6))
    ax = fig.subplots()
    by_category: dict[str, list[Triple]] = {}
    for rec in records:
        by_category.setdefault(category(rec), []).append(rec.triple)
    for name, triples in sorted(by_category.items()):
        ax.scatter(
            [t.x for t in triples],
            [t.y for t in triples],
            s=2,
            c=_CATEGORY_COLOURS[name],
            label=name,
        )
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal")
    if by_category:
        ax.legend(loc="upper right", markerscale=4)
    try:
        svg_path.parent.mkdir(parents=True, exist_ok=True)
        with matplotlib.rc_context({"svg.hashsalt": "thinsieve"}):
            fig.savefig(svg_path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise ExportIOError(f"Cannot write {svg_path}: {e}") from e
    logger.debug(f"Wrote scatter of {len(records)} points to {svg_path}")
