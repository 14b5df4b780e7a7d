"""Orbit enumeration in Euclidean norm balls and power-law fitting.

The search walks reduced words in the generators, keeps the shortest word
length seen for every point, and expands a point only while its norm is at
most ``slack * T`` and its word length is below the cap. Points are
deduplicated as triples, so stabilizers collapse on their own.
"""

import logging
import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

from .errors import ComputationError, InputError, InsufficientData
from .lattice import (
    Mat2,
    Mat3,
    Triple,
    act,
    q_form,
    spin_lift,
    validate_generator,
)

logger = logging.getLogger(__name__)

DEFAULT_SLACK = 2.0
DEFAULT_MAX_WORD_LENGTH = 64
DEFAULT_BUDGET_NODES = 5_000_000

# Below this many nodes per depth level a thread pool costs more than it saves
_PARALLEL_MIN_NODES = 256


class BudgetExceeded(ComputationError):
    """Raised when a search stores more nodes than its budget allows."""

    pass


class InvalidPresentationError(InputError):
    """Raised when a base point is zero, off the cone or not primitive."""

    pass


class InvalidParamsError(InputError):
    """Raised when enumeration parameters or radii are out of range."""

    pass


@dataclass(frozen=True)
class GroupPresentation:
    """Generators of Γ in SO_Q(Z) together with the base point x₀."""

    generators: tuple[Mat3, ...]
    base_point: Triple
    label: str = ""

    def __post_init__(self) -> None:
        for generator in self.generators:
            validate_generator(generator)
        x0 = self.base_point
        if x0.content == 0:
            raise InvalidPresentationError("Base point must not be (0, 0, 0)")
        if q_form(x0) != 0:
            raise InvalidPresentationError(
                f"Base point {x0.as_tuple()} is not on the cone x² + y² = z²"
            )
        if not x0.is_primitive():
            raise InvalidPresentationError(
                f"Base point {x0.as_tuple()} is not primitive (gcd {x0.content})"
            )

    @classmethod
    def from_sl2(
        cls, matrices: Iterable[Mat2], base_point: Triple, label: str = ""
    ) -> "GroupPresentation":
        """Spin-lift SL₂(Z) generators (ParityError/DetError on invalid ones)."""
        return cls(tuple(spin_lift(m) for m in matrices), base_point, label)

    @classmethod
    def trivial(cls, base_point: Triple, label: str = "trivial") -> "GroupPresentation":
        return cls((), base_point, label)

    @cached_property
    def closed_generators(self) -> tuple[Mat3, ...]:
        """Generators followed by any missing inverses; identities dropped."""
        identity = Mat3.identity()
        closed: list[Mat3] = []
        for generator in self.generators:
            if generator != identity and generator not in closed:
                closed.append(generator)
        for generator in list(closed):
            inverse = generator.inverse()
            if inverse not in closed:
                closed.append(inverse)
        return tuple(closed)

    @cached_property
    def inverse_index(self) -> tuple[int, ...]:
        """Position of each closed generator's inverse within the closed list."""
        closed = self.closed_generators
        return tuple(closed.index(generator.inverse()) for generator in closed)


@dataclass(frozen=True)
class EnumParams:
    """Pruning controls for one enumeration.

    ``slack`` may be ``math.inf`` to disable norm pruning entirely.
    """

    radius: float
    slack: float = DEFAULT_SLACK
    max_word_length: int = DEFAULT_MAX_WORD_LENGTH
    budget_nodes: int = DEFAULT_BUDGET_NODES
    threads: int = 1

    def __post_init__(self) -> None:
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidParamsError(f"radius must be positive, got {self.radius}")
        if not self.slack >= 1:
            raise InvalidParamsError(f"slack must be at least 1, got {self.slack}")
        if self.max_word_length < 1:
            raise InvalidParamsError(
                f"max_word_length must be positive, got {self.max_word_length}"
            )
        if self.budget_nodes < 1:
            raise InvalidParamsError("budget_nodes must be positive")
        if self.threads < 1:
            raise InvalidParamsError("threads must be positive")


@dataclass(frozen=True)
class CountSeries:
    """Pairs (T, N(T)) with T strictly increasing and N non-decreasing."""

    entries: tuple[tuple[float, int], ...]

    def __post_init__(self) -> None:
        for (t1, n1), (t2, n2) in zip(self.entries, self.entries[1:], strict=False):
            if not t2 > t1:
                raise InvalidParamsError(f"Radii must increase: {t1} then {t2}")
            if n2 < n1:
                raise InvalidParamsError(f"Counts must not decrease: {n1} then {n2}")

    @property
    def radii(self) -> list[float]:
        return [t for t, _ in self.entries]

    @property
    def counts(self) -> list[int]:
        return [n for _, n in self.entries]

    def to_json(self) -> list[dict[str, Any]]:
        return [{"T": t, "N": n} for t, n in self.entries]

    @classmethod
    def from_json(cls, data: Sequence[dict[str, Any]]) -> "CountSeries":
        return cls(tuple((float(item["T"]), int(item["N"])) for item in data))


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit N(T) ≈ c_hat · T^delta_hat."""

    delta_hat: float
    c_hat: float
    r_squared: float
    window: tuple[float, float] = field(default=(0.0, math.inf))

    def to_json(self) -> dict[str, Any]:
        return {
            "delta_hat": self.delta_hat,
            "c_hat": self.c_hat,
            "r_squared": self.r_squared,
            "window": [self.window[0], self.window[1]],
        }


def _envelope_sq(slack: float, radius: float) -> float:
    if math.isinf(slack):
        return math.inf
    return (slack * radius) ** 2


class OrbitSearch:
    """Search state shared by a sequence of growing radii.

    Every stored point keeps its shortest known word length. Points found
    outside the current envelope are deferred and re-examined when the
    radius grows, so ``extend(T₂)`` after ``extend(T₁)`` stores exactly what
    a fresh ``extend(T₂)`` would.
    """

    def __init__(
        self,
        group: GroupPresentation,
        *,
        slack: float = DEFAULT_SLACK,
        max_word_length: int = DEFAULT_MAX_WORD_LENGTH,
        budget_nodes: int = DEFAULT_BUDGET_NODES,
        threads: int = 1,
    ) -> None:
        self.group = group
        self.slack = slack
        self.max_word_length = max_word_length
        self.budget_nodes = budget_nodes
        self.threads = threads
        x0 = group.base_point
        self._depth: dict[Triple, int] = {x0: 0}
        self._last: dict[Triple, int] = {x0: -1}
        self._expanded: dict[Triple, int] = {}
        self._deferred: set[Triple] = {x0}
        self._envelope = -1.0

    @property
    def size(self) -> int:
        return len(self._depth)

    def _children(self, nodes: list[Triple]) -> list[list[tuple[int, Triple]]]:
        generators = self.group.closed_generators
        inverse_index = self.group.inverse_index

        def expand(chunk: list[Triple]) -> list[list[tuple[int, Triple]]]:
            out = []
            for node in chunk:
                last = self._last[node]
                skip = inverse_index[last] if last >= 0 else -1
                out.append(
                    [
                        (index, act(node, generator))
                        for index, generator in enumerate(generators)
                        if index != skip
                    ]
                )
            return out

        if self.threads == 1 or len(nodes) < _PARALLEL_MIN_NODES:
            return expand(nodes)
        size = math.ceil(len(nodes) / self.threads)
        chunks = [nodes[i : i + size] for i in range(0, len(nodes), size)]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            results = list(pool.map(expand, chunks))
        return [item for chunk in results for item in chunk]

    def extend(self, radius: float) -> None:
        """Grow the search to cover the ball of the given radius.

        Raises:
            InvalidParamsError: If the envelope would shrink
            BudgetExceeded: If more than ``budget_nodes`` points are stored
        """
        envelope = _envelope_sq(self.slack, radius)
        if envelope < self._envelope:
            raise InvalidParamsError(
                f"Radius {radius} is smaller than one already searched"
            )
        self._envelope = envelope

        buckets: dict[int, list[Triple]] = defaultdict(list)
        ready = [t for t in self._deferred if t.norm_sq <= envelope]
        for node in ready:
            self._deferred.discard(node)
            buckets[self._depth[node]].append(node)

        while buckets:
            depth = min(buckets)
            candidates = buckets.pop(depth)
            nodes = sorted(
                {
                    node
                    for node in candidates
                    if self._depth[node] == depth
                    and self._expanded.get(node, math.inf) > depth
                }
            )
            if not nodes or depth >= self.max_word_length:
                continue
            logger.debug(f"depth {depth}: expanding {len(nodes)} nodes")
            for node, children in zip(nodes, self._children(nodes), strict=True):
                self._expanded[node] = depth
                for index, child in children:
                    known = self._depth.get(child)
                    if known is not None and known <= depth + 1:
                        continue
                    self._depth[child] = depth + 1
                    self._last[child] = index
                    if child.norm_sq <= envelope:
                        buckets[depth + 1].append(child)
                    else:
                        self._deferred.add(child)
                if len(self._depth) > self.budget_nodes:
                    raise BudgetExceeded(
                        f"Search stored {len(self._depth)} points, budget is "
                        f"{self.budget_nodes}; raise --budget-nodes or lower T"
                    )

    def points_within(self, radius: float) -> list[Triple]:
        """Stored points with norm < radius, canonically sorted."""
        limit = radius * radius
        return sorted(t for t in self._depth if t.norm_sq < limit)

    def count_within(self, radius: float) -> int:
        limit = radius * radius
        return sum(1 for t in self._depth if t.norm_sq < limit)


def _search(group: GroupPresentation, params: EnumParams) -> OrbitSearch:
    return OrbitSearch(
        group,
        slack=params.slack,
        max_word_length=params.max_word_length,
        budget_nodes=params.budget_nodes,
        threads=params.threads,
    )


def enumerate_orbit(group: GroupPresentation, params: EnumParams) -> list[Triple]:
    """All orbit points of norm < T inside the pruning envelope.

    Returns:
        Distinct triples in canonical (lexicographic) order

    Raises:
        BudgetExceeded: If the search outgrows ``params.budget_nodes``
    """
    search = _search(group, params)
    search.extend(params.radius)
    points = search.points_within(params.radius)
    logger.info(
        f"{group.label or 'orbit'}: {len(points)} points below T={params.radius} "
        f"({search.size} stored)"
    )
    return points


def reduced_word_count(generator_count: int, length: int) -> int:
    """Number of reduced words of length ≤ ``length`` in a free basis of size k/2."""
    k = generator_count
    if k == 0:
        return 1
    return 1 + sum(k * (k - 1) ** (ell - 1) for ell in range(1, length + 1))


def enumerate_words(
    group: GroupPresentation,
    length: int,
    *,
    radius: float | None = None,
    budget_nodes: int = DEFAULT_BUDGET_NODES,
) -> list[Triple]:
    """Apply every reduced word of length ≤ ``length`` to x₀, without pruning.

    Args:
        group: The presentation
        length: Maximum word length L ≥ 0
        radius: If given, keep only points of norm < radius
        budget_nodes: Upper bound on the number of words visited

    Returns:
        Distinct triples in canonical order

    Raises:
        BudgetExceeded: If the word count exceeds ``budget_nodes``
    """
    if length < 0:
        raise InvalidParamsError(f"Word length must be non-negative, got {length}")
    generators = group.closed_generators
    inverse_index = group.inverse_index
    words = reduced_word_count(len(generators), length)
    if words > budget_nodes:
        raise BudgetExceeded(
            f"{words} reduced words of length ≤ {length} exceed the budget "
            f"of {budget_nodes}"
        )

    limit = math.inf if radius is None else radius * radius
    found: set[Triple] = set()
    stack: list[tuple[Triple, int, int]] = [(group.base_point, -1, 0)]
    while stack:
        point, last, depth = stack.pop()
        if point.norm_sq < limit:
            found.add(point)
        if depth == length:
            continue
        skip = inverse_index[last] if last >= 0 else -1
        for index, generator in enumerate(generators):
            if index != skip:
                stack.append((act(point, generator), index, depth + 1))
    return sorted(found)


def count_ball(
    group: GroupPresentation,
    params: EnumParams,
    radii: Sequence[float] | None = None,
) -> CountSeries:
    """N(T) for each radius, reusing one search across all of them.

    ``params.radius`` is used when ``radii`` is omitted; the other fields of
    ``params`` apply to every radius.
    """
    radii = [params.radius] if radii is None else list(radii)
    for t1, t2 in zip(radii, radii[1:], strict=False):
        if not t2 > t1:
            raise InvalidParamsError(f"Radii must increase: {t1} then {t2}")
    for radius in radii:
        EnumParams(
            radius,
            params.slack,
            params.max_word_length,
            params.budget_nodes,
            params.threads,
        )

    search = _search(group, params)
    entries = []
    for radius in radii:
        search.extend(radius)
        count = search.count_within(radius)
        logger.debug(f"N({radius}) = {count}")
        entries.append((float(radius), count))
    return CountSeries(tuple(entries))


def fit_exponent(
    series: CountSeries, window: tuple[float, float] | None = None
) -> PowerLawFit:
    """Least-squares fit of log N(T) against log T.

    Args:
        series: Counts to fit; entries with N = 0 are ignored
        window: Optional inclusive range of T to restrict the fit to

    Raises:
        InsufficientData: If fewer than three usable entries remain
    """
    lo, hi = window if window is not None else (0.0, math.inf)
    usable = [(t, n) for t, n in series.entries if n >= 1 and lo <= t <= hi]
    if len(usable) < 3:
        raise InsufficientData(
            f"Need at least 3 radii with N(T) ≥ 1 in [{lo}, {hi}], got {len(usable)}"
        )
    log_t = np.log(np.array([t for t, _ in usable], dtype=float))
    log_n = np.log(np.array([n for _, n in usable], dtype=float))
    slope, intercept = np.polyfit(log_t, log_n, 1)

    residual = log_n - (slope * log_t + intercept)
    total = log_n - log_n.mean()
    ss_tot = float(total @ total)
    r_squared = 1.0 if ss_tot == 0 else 1.0 - float(residual @ residual) / ss_tot
    return PowerLawFit(
        delta_hat=float(slope),
        c_hat=float(np.exp(intercept)),
        r_squared=min(1.0, max(0.0, r_squared)),
        window=(lo, hi),
    )

