"""Tests for thinsieve.orbit module."""

import math
from typing import Any

import pytest

from tests.oracles import uv_points
from thinsieve.errors import InsufficientData
from thinsieve.lattice import Mat2, Mat3, Triple
from thinsieve.orbit import (
    BudgetExceeded,
    CountSeries,
    EnumParams,
    GroupPresentation,
    InvalidParamsError,
    InvalidPresentationError,
    OrbitSearch,
    count_ball,
    enumerate_orbit,
    enumerate_words,
    fit_exponent,
    reduced_word_count,
)

FULL: dict[str, Any] = {"slack": 1.0, "max_word_length": 100_000}
SCHOTTKY: dict[str, Any] = {"slack": 2.0, "max_word_length": 64}


class TestGroupPresentation:
    """Tests for GroupPresentation validation and closure."""

    def test_rejects_off_cone_base_point(self) -> None:
        """The base point must satisfy x² + y² = z²."""
        with pytest.raises(InvalidPresentationError, match="cone"):
            GroupPresentation.trivial(Triple(1, 1, 1))

    def test_rejects_imprimitive_base_point(self) -> None:
        """(6, 8, 10) has content 2."""
        with pytest.raises(InvalidPresentationError, match="primitive"):
            GroupPresentation.trivial(Triple(6, 8, 10))

    def test_rejects_zero_base_point(self) -> None:
        """The zero triple is not a valid base point."""
        with pytest.raises(InvalidPresentationError):
            GroupPresentation.trivial(Triple(0, 0, 0))

    def test_closed_generators_add_inverses(self, schottky: GroupPresentation) -> None:
        """Two free generators close up to four, each paired with its inverse."""
        closed = schottky.closed_generators

        assert len(closed) == 4
        for index, inverse in enumerate(schottky.inverse_index):
            assert closed[index] @ closed[inverse] == Mat3.identity()

    def test_involution_is_its_own_inverse(self, full_orbit: GroupPresentation) -> None:
        """spin(S) is an involution, so only T² gains an inverse."""
        assert len(full_orbit.closed_generators) == 3

    def test_identity_generator_dropped(self) -> None:
        """spin(−I) is the identity and contributes nothing."""
        group = GroupPresentation.from_sl2([-Mat2.identity()], Triple(3, 4, 5))

        assert group.closed_generators == ()


class TestEnumParams:
    """Tests for EnumParams validation."""

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"radius": 0},
            {"radius": math.inf},
            {"radius": 10, "slack": 0.5},
            {"radius": 10, "max_word_length": 0},
            {"radius": 10, "budget_nodes": 0},
            {"radius": 10, "threads": 0},
        ],
    )
    def test_rejects_invalid(self, kwargs: dict[str, float]) -> None:
        """Out-of-range parameters raise InvalidParamsError."""
        with pytest.raises(InvalidParamsError):
            EnumParams(**kwargs)  # type: ignore[arg-type]

    def test_infinite_slack_allowed(self) -> None:
        """slack = inf disables pruning."""
        assert math.isinf(EnumParams(10, slack=math.inf).slack)


class TestEnumerateOrbit:
    """Tests for enumerate_orbit()."""

    def test_trivial_group_is_base_point(self, trivial: GroupPresentation) -> None:
        """The trivial group's orbit is {x₀} once T exceeds ‖x₀‖ = √50."""
        assert enumerate_orbit(trivial, EnumParams(10)) == [Triple(3, 4, 5)]
        assert enumerate_orbit(trivial, EnumParams(7)) == []

    @pytest.mark.parametrize(("radius", "expected"), [(100, 46), (1000, 454)])
    def test_full_orbit_counts(
        self, full_orbit: GroupPresentation, radius: int, expected: int
    ) -> None:
        """Counts of the full orbit at T = 10², 10³."""
        points = enumerate_orbit(full_orbit, EnumParams(radius, **FULL))

        assert len(points) == expected

    @pytest.mark.parametrize("radius", [100, 1000, 10_000])
    def test_full_orbit_matches_uv_oracle(
        self, full_orbit: GroupPresentation, radius: int
    ) -> None:
        """The full orbit is every primitive triple with even y."""
        points = enumerate_orbit(full_orbit, EnumParams(radius, **FULL))

        assert points == uv_points(radius)

    def test_output_sorted_and_inside_ball(self, schottky: GroupPresentation) -> None:
        """Points are distinct, sorted and of norm < T."""
        points = enumerate_orbit(schottky, EnumParams(1e5, **SCHOTTKY))

        assert points == sorted(set(points))
        assert all(p.norm_sq < 1e10 for p in points)
        assert all(p.is_cone_point() and p.is_primitive() for p in points)

    @pytest.mark.parametrize(("radius", "expected"), [(1e3, 6), (1e5, 24), (1e7, 92)])
    def test_schottky_counts(
        self, schottky: GroupPresentation, radius: float, expected: int
    ) -> None:
        """Counts of the Schottky orbit at three radii."""
        points = enumerate_orbit(schottky, EnumParams(radius, **SCHOTTKY))

        assert len(points) == expected

    def test_threads_do_not_change_result(self, full_orbit: GroupPresentation) -> None:
        """Parallel expansion returns the same points."""
        one = enumerate_orbit(full_orbit, EnumParams(3000, threads=1, **FULL))
        many = enumerate_orbit(full_orbit, EnumParams(3000, threads=4, **FULL))

        assert one == many

    def test_budget_exceeded(self, full_orbit: GroupPresentation) -> None:
        """A tiny node budget stops the search."""
        with pytest.raises(BudgetExceeded):
            enumerate_orbit(full_orbit, EnumParams(1e4, budget_nodes=10, **FULL))


class TestEnumerateWords:
    """Tests for the exhaustive word enumeration."""

    def test_reduced_word_count(self) -> None:
        """1 + k·Σ(k−1)^(ℓ−1) words of length ≤ ℓ."""
        assert reduced_word_count(4, 0) == 1
        assert reduced_word_count(4, 1) == 5
        assert reduced_word_count(4, 2) == 17
        assert reduced_word_count(0, 5) == 1

    def test_length_one_words(self, schottky: GroupPresentation) -> None:
        """x₀ and its four neighbours."""
        points = enumerate_words(schottky, 1)

        assert len(points) == 5
        assert Triple(3, 4, 5) in points

    def test_budget_checked_upfront(self, schottky: GroupPresentation) -> None:
        """The word count is compared with the budget before any work."""
        with pytest.raises(BudgetExceeded, match="reduced words"):
            enumerate_words(schottky, 12, budget_nodes=1000)

    def test_pruned_matches_exhaustive_small(
        self, schottky: GroupPresentation
    ) -> None:
        """Every point reachable by words of length ≤ 8 below T = 10³ is found."""
        exhaustive = enumerate_words(schottky, 8, radius=1e3)
        pruned = enumerate_orbit(schottky, EnumParams(1e3, **SCHOTTKY))

        assert set(exhaustive) <= set(pruned)

    @pytest.mark.slow
    def test_pruned_matches_exhaustive_depth_12(
        self, schottky: GroupPresentation
    ) -> None:
        """Pruned enumeration equals all words of length ≤ 12 at three radii."""
        exhaustive = enumerate_words(schottky, 12, radius=1e7)
        for radius in (1e3, 1e5, 1e7):
            pruned = enumerate_orbit(schottky, EnumParams(radius, **SCHOTTKY))
            inside = [p for p in exhaustive if p.norm_sq < radius * radius]

            assert pruned == inside


class TestCountBall:
    """Tests for count_ball() and CountSeries."""

    def test_counts_match_per_radius_enumeration(
        self, full_orbit: GroupPresentation
    ) -> None:
        """The shared search gives the same N(T) as fresh enumerations."""
        radii = [50, 100, 500, 1000]
        series = count_ball(full_orbit, EnumParams(50, **FULL), radii)

        assert series.counts == [
            len(enumerate_orbit(full_orbit, EnumParams(t, **FULL))) for t in radii
        ]

    def test_schottky_incremental(self, schottky: GroupPresentation) -> None:
        """Deferred nodes are picked up as the radius grows."""
        series = count_ball(schottky, EnumParams(1e3, **SCHOTTKY), [1e3, 1e5, 1e7])

        assert series.counts == [6, 24, 92]

    def test_counts_stable_under_larger_slack(
        self, schottky: GroupPresentation
    ) -> None:
        """A wider envelope never finds fewer points."""
        radii = [1e3, 1e5, 1e7]
        counts = [
            count_ball(
                schottky, EnumParams(1e3, slack=slack, max_word_length=64), radii
            ).counts
            for slack in (1.0, 1.5, 2.0, 4.0)
        ]

        for narrow, wide in zip(counts, counts[1:], strict=False):
            assert all(n <= w for n, w in zip(narrow, wide, strict=True))
        assert counts[2] == [6, 24, 92]

    def test_full_orbit_complete_at_every_slack(
        self, full_orbit: GroupPresentation
    ) -> None:
        """The full orbit is already complete at slack 1."""
        for slack in (1.0, 2.0, 3.0):
            params = EnumParams(100, slack=slack, max_word_length=100_000)

            assert count_ball(full_orbit, params, [100, 1000]).counts == [46, 454]

    def test_rejects_non_increasing_radii(self, trivial: GroupPresentation) -> None:
        """Radii must increase strictly."""
        with pytest.raises(InvalidParamsError):
            count_ball(trivial, EnumParams(10), [10, 10])

    def test_search_cannot_shrink(self, trivial: GroupPresentation) -> None:
        """An OrbitSearch only grows."""
        search = OrbitSearch(trivial)
        search.extend(100)

        with pytest.raises(InvalidParamsError):
            search.extend(10)

    def test_json_round_trip(self) -> None:
        """CountSeries serializes as [{"T", "N"}]."""
        series = CountSeries(((10.0, 1), (100.0, 5)))

        assert series.to_json() == [{"T": 10.0, "N": 1}, {"T": 100.0, "N": 5}]
        assert CountSeries.from_json(series.to_json()) == series

    def test_rejects_decreasing_counts(self) -> None:
        """N(T) is non-decreasing."""
        with pytest.raises(InvalidParamsError):
            CountSeries(((10.0, 5), (100.0, 1)))


class TestFitExponent:
    """Tests for fit_exponent()."""

    def test_exact_power_law(self) -> None:
        """N = 3·T^0.5 fits exactly."""
        series = CountSeries(tuple((t, round(3 * t**0.5)) for t in (1e4, 1e6, 1e8)))

        fit = fit_exponent(series)

        assert fit.delta_hat == pytest.approx(0.5, abs=1e-6)
        assert fit.c_hat == pytest.approx(3.0, rel=1e-5)
        assert fit.r_squared == pytest.approx(1.0)

    def test_needs_three_points(self) -> None:
        """Two usable radii are not enough."""
        series = CountSeries(((10.0, 0), (100.0, 4), (1000.0, 40)))

        with pytest.raises(InsufficientData):
            fit_exponent(series)

    def test_window_restricts_fit(self) -> None:
        """Only radii inside the window are used."""
        series = CountSeries(
            ((1.0, 1), (10.0, 10), (100.0, 100), (1000.0, 1000), (1e4, 10**6))
        )

        fit = fit_exponent(series, (1.0, 1000.0))

        assert fit.delta_hat == pytest.approx(1.0)
        assert fit.window == (1.0, 1000.0)

    def test_full_orbit_exponent(self, full_orbit: GroupPresentation) -> None:
        """The full orbit grows linearly in T."""
        series = count_ball(full_orbit, EnumParams(100, **FULL), [100, 1000, 10_000])

        fit = fit_exponent(series)

        assert 0.95 <= fit.delta_hat <= 1.05
        assert fit.r_squared > 0.999

    @pytest.mark.slow
    def test_full_orbit_exponent_to_a_million(
        self, full_orbit: GroupPresentation
    ) -> None:
        """Fit over T = 10³ .. 10⁶ stays near 1 with r² above 0.999."""
        radii = [10 ** (k / 2) for k in range(6, 13)]
        series = count_ball(full_orbit, EnumParams(radii[0], **FULL), radii)

        fit = fit_exponent(series)

        assert 0.95 <= fit.delta_hat <= 1.05
        assert fit.r_squared > 0.999

    @pytest.mark.slow
    def test_schottky_exponent_stable_across_windows(
        self, schottky: GroupPresentation
    ) -> None:
        """Fits on [10⁶, 10¹⁰] and [10¹⁰, 10¹⁴] agree within 0.05."""
        radii = [10 ** (k / 2) for k in range(12, 29)]
        series = count_ball(schottky, EnumParams(radii[0], **SCHOTTKY), radii)

        low = fit_exponent(series, (1e6, 1e10))
        high = fit_exponent(series, (1e10, 1e14))

        assert abs(low.delta_hat - high.delta_hat) < 0.05
        assert 0.25 < low.delta_hat < 0.35

    def test_fit_json(self) -> None:
        """PowerLawFit serializes its window as a list."""
        series = CountSeries(tuple((t, round(t)) for t in (10.0, 100.0, 1000.0)))

        data = fit_exponent(series, (10.0, 1000.0)).to_json()

        assert set(data) == {"delta_hat", "c_hat", "r_squared", "window"}
        assert data["window"] == [10.0, 1000.0]
