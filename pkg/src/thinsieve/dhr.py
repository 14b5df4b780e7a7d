"""Weighted-sieve numerics: sieve functions, the m(ζ) majorant and R values.

The delay equations are integrated by the method of steps: the grid is cut
into blocks one delay long, and inside each block the right-hand side only
reads values from earlier blocks, so one ``cumulative_trapezoid`` call
advances a whole block.
"""

import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from fractions import Fraction
from typing import Any

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson
from scipy.optimize import minimize_scalar
from scipy.special import gamma

from .constants import POLYNOMIAL_DIMENSION, R_TABLE, SIEVE_REGISTRY, TableRow
from .errors import ComputationError, InputError

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-4
MAX_STEP = 1e-2

# Coarse grid for minimize_m, log-spaced over (0, β)
MIN_GRID_POINTS = 1000
_GRID_FLOOR = 1e-6

NEAR_INTEGER = 1e-6
DELTA_TOLERANCE = 1e-5


class UnsupportedDimension(InputError):
    """Raised when no tabulated constants exist for a sieve dimension."""

    pass


class InvalidRange(InputError):
    """Raised when δ, θ, u or v lie outside their admissible ranges."""

    pass


class DomainError(InputError):
    """Raised when m(ζ) is evaluated outside 0 < ζ < β."""

    pass


class StepTooLarge(ComputationError):
    """Raised when the step size is too coarse or produces non-finite values."""

    pass


class Unachievable(ComputationError):
    """Raised when a target R is not reached even at δ = 1."""

    pass


class GridTooShort(ComputationError):
    """Raised when a quadrature needs F or f beyond the solved grid."""

    pass


class HorocycleMode(StrEnum):
    ANY = "any"
    FINITE = "finite"
    INFINITE = "infinite"


class Activation(StrEnum):
    """Where the f-equation starts: at β_κ (default) or at α_κ."""

    BETA = "beta"
    ALPHA = "alpha"


@dataclass(frozen=True)
class SieveConstants:
    kappa: float
    alpha: float
    beta: float

    @property
    def a_kappa(self) -> float:
        """A_κ = (2e^γ)^κ Γ(κ+1)."""
        scale = (2 * math.exp(np.euler_gamma)) ** self.kappa
        return float(scale * gamma(self.kappa + 1))


def sieve_constants(kappa: float) -> SieveConstants:
    """Tabulated (α_κ, β_κ) for κ ∈ {1, 4, 5}.

    Raises:
        UnsupportedDimension: For any other κ
    """
    if kappa not in SIEVE_REGISTRY:
        supported = ", ".join(str(k) for k in SIEVE_REGISTRY)
        raise UnsupportedDimension(
            f"No sieve constants for κ={kappa}. Supported: {supported}"
        )
    entry = SIEVE_REGISTRY[int(kappa)]
    return SieveConstants(float(kappa), entry["alpha"], entry["beta"])


@dataclass(frozen=True)
class SigmaGrid:
    h: float
    u: np.ndarray
    sigma: np.ndarray
    constants: SieveConstants


@dataclass(frozen=True)
class SieveFunctionGrid:
    """σ_κ, F_κ and f_κ sampled at u = 0, h, 2h, ... (F is infinite at u = 0)."""

    h: float
    u: np.ndarray
    sigma: np.ndarray
    F: np.ndarray
    f: np.ndarray
    constants: SieveConstants
    activation: Activation = Activation.BETA

    @property
    def u_max(self) -> float:
        return float(self.u[-1])

    def F_at(self, x: float | np.ndarray) -> np.ndarray:
        return np.interp(x, self.u, self.F)

    def f_at(self, x: float | np.ndarray) -> np.ndarray:
        return np.interp(x, self.u, self.f)


def _check_step(h: float) -> None:
    if not (h > 0 and math.isfinite(h)):
        raise InvalidRange(f"Step must be positive, got {h}")
    if h > MAX_STEP:
        raise StepTooLarge(f"Step {h} exceeds the stable maximum {MAX_STEP}")


def _steps(length: float, h: float) -> int:
    """Number of grid steps in a delay of ``length``; must be a whole number."""
    exact = length / h
    count = round(exact)
    if count < 1 or abs(exact - count) > 1e-6 * count:
        raise StepTooLarge(f"Step {h} does not divide the delay {length}")
    return count


def _require_finite(name: str, values: np.ndarray, h: float) -> None:
    if not np.all(np.isfinite(values)):
        raise StepTooLarge(f"{name} became non-finite with step {h}")


def solve_sigma(
    c: SieveConstants, u_max: float, h: float = DEFAULT_STEP
) -> SigmaGrid:
    """σ_κ on [0, u_max].

    σ(u) = u^κ/A_κ on (0, 2]; beyond,
    (u^{−κ}σ(u))′ = −κu^{−κ−1}σ(u−2).

    Raises:
        InvalidRange: If u_max < α_κ + 2 or h ≤ 0
        StepTooLarge: If h is too coarse or does not divide the delay
    """
    _check_step(h)
    if u_max < c.alpha + 2:
        raise InvalidRange(f"u_max={u_max} must be at least α+2 = {c.alpha + 2}")
    n = round(u_max / h)
    u = h * np.arange(n + 1)
    k = c.kappa
    lag = _steps(2.0, h)

    sigma = np.empty_like(u)
    weighted = np.empty_like(u)
    sigma[: lag + 1] = u[: lag + 1] ** k / c.a_kappa
    weighted[: lag + 1] = 1.0 / c.a_kappa
    for start in range(lag, n, lag):
        stop = min(start + lag, n)
        here = slice(start, stop + 1)
        back = slice(start - lag, stop + 1 - lag)
        drift = cumulative_trapezoid(k * u[here] ** (-k - 1) * sigma[back], dx=h)
        weighted[start + 1 : stop + 1] = weighted[start] - drift
        sigma[start + 1 : stop + 1] = weighted[start + 1 : stop + 1] * u[here][1:] ** k
    _require_finite("σ", sigma, h)
    logger.debug(f"σ_{k:g}: {n} steps of {h}, σ({u[-1]:.3f}) = {sigma[-1]:.6f}")
    return SigmaGrid(h, u, sigma, c)


def solve_Ff(
    c: SieveConstants,
    u_max: float,
    h: float = DEFAULT_STEP,
    activation: Activation | str = Activation.BETA,
) -> SieveFunctionGrid:
    """F_κ and f_κ on [0, u_max].

    F = 1/σ on (0, α], f = 0 up to the activation point; beyond,
    (u^κF)′ = κu^{κ−1}f(u−1) for u > α and
    (u^κf)′ = κu^{κ−1}F(u−1) past β (``activation="beta"``) or α
    (``activation="alpha"``).

    Raises:
        InvalidRange: If u_max < α_κ + 5
        StepTooLarge: If h is too coarse, does not divide the delay, or the
            solution becomes non-finite
    """
    activation = Activation(activation)
    if u_max < c.alpha + 5:
        raise InvalidRange(f"u_max={u_max} must be at least α+5 = {c.alpha + 5}")
    base = solve_sigma(c, u_max, h)
    u, sigma = base.u, base.sigma
    n = len(u) - 1
    k = c.kappa
    lag = _steps(1.0, h)
    i_alpha = round(c.alpha / h)
    i_beta = round(c.beta / h)
    f_start = i_beta if activation is Activation.BETA else i_alpha

    F = np.full_like(u, np.nan)
    f = np.zeros_like(u)
    with np.errstate(divide="ignore"):
        F[: i_alpha + 1] = 1.0 / sigma[: i_alpha + 1]
    power = u**k
    slope = k * u ** (k - 1)

    for start in range(f_start, n, lag):
        stop = min(start + lag, n)
        here = slice(start, stop + 1)
        back = slice(start - lag, stop + 1 - lag)
        grown = power[start] * f[start] + cumulative_trapezoid(
            slope[here] * F[back], dx=h
        )
        f[start + 1 : stop + 1] = grown / power[start + 1 : stop + 1]

        lo = max(start, i_alpha)
        if lo < stop:
            here = slice(lo, stop + 1)
            back = slice(lo - lag, stop + 1 - lag)
            grown = power[lo] * F[lo] + cumulative_trapezoid(
                slope[here] * f[back], dx=h
            )
            F[lo + 1 : stop + 1] = grown / power[lo + 1 : stop + 1]

    _require_finite("F", F[1:], h)
    _require_finite("f", f, h)
    logger.debug(
        f"F_{k:g}, f_{k:g} ({activation.value}): F({u[-1]:.2f}) = {F[-1]:.6f}, "
        f"f({u[-1]:.2f}) = {f[-1]:.6f}"
    )
    return SieveFunctionGrid(h, u, sigma, F, f, c, activation)


@dataclass(frozen=True)
class SievePlan:
    """Sieve inputs (κ, δ, θ, mode) with the derived level μ and exponent τ."""

    kappa: float
    delta: float
    theta: float
    mode: HorocycleMode
    mu: float
    tau: float

    @property
    def constants(self) -> SieveConstants:
        return sieve_constants(self.kappa)


def compute_mu_tau(
    delta: float, theta: float, mode: HorocycleMode | str
) -> tuple[float, float]:
    """Limiting values of μ and τ for the given spectral data.

    Lattice bounds μ = 2/(δ−θ), τ = (δ−θ)/(2δ) apply in mode ``finite`` and
    in mode ``any`` at δ = 1; otherwise μ = max(2/(δ−θ), 5/(δ−½)) and
    τ = min((δ−θ)/(2δ), (δ−½)/(5δ)). The true parameters must be strictly
    larger (μ) and smaller (τ) than these limits.

    Raises:
        InvalidRange: Unless 1/2 ≤ θ < δ ≤ 1
    """
    mode = HorocycleMode(mode)
    if not 0.5 <= theta < delta <= 1:
        raise InvalidRange(f"Need 1/2 ≤ θ < δ ≤ 1, got θ={theta}, δ={delta}")
    gap = delta - theta
    if mode is HorocycleMode.FINITE or (mode is HorocycleMode.ANY and delta == 1):
        return 2 / gap, gap / (2 * delta)
    return (
        max(2 / gap, 5 / (delta - 0.5)),
        min(gap / (2 * delta), (delta - 0.5) / (5 * delta)),
    )


def plan_sieve(
    kappa: float, delta: float, theta: float, mode: HorocycleMode | str
) -> SievePlan:
    sieve_constants(kappa)
    mu, tau = compute_mu_tau(delta, theta, mode)
    return SievePlan(kappa, delta, theta, HorocycleMode(mode), mu, tau)


def m_of_zeta(zeta: float, mu: float, kappa: float, beta: float) -> float:
    """m(ζ) = μ(1+ζ−ζ/β) − 1 + (κ+ζ)log(β/ζ) − κ + ζκ/β.

    Raises:
        DomainError: Unless 0 < ζ < β
    """
    if not 0 < zeta < beta:
        raise DomainError(f"ζ={zeta} must lie in (0, {beta})")
    return float(_m_values(np.asarray(zeta, dtype=float), mu, kappa, beta))


def _m_values(zeta: np.ndarray, mu: float, kappa: float, beta: float) -> np.ndarray:
    return (
        mu * (1 + zeta - zeta / beta)
        - 1
        + (kappa + zeta) * np.log(beta / zeta)
        - kappa
        + zeta * kappa / beta
    )


@dataclass(frozen=True)
class RBound:
    """Minimiser of m(ζ) and the resulting R = ⌊m*⌋ + 1.

    When m* is within 1e-6 of an integer, ``near_integer`` is set and both
    neighbouring integers are listed in ``candidates``.
    """

    zeta_star: float
    m_star: float
    R: int
    near_integer: bool = False
    candidates: tuple[int, ...] = ()


def minimize_m(
    mu: float, kappa: float, beta: float, *, grid_points: int = MIN_GRID_POINTS
) -> RBound:
    """Global minimum of m(ζ) over (0, β): log grid, then golden section."""
    if not (mu > 0 and kappa > 0 and beta >= 2):
        raise InvalidRange(f"Need μ, κ > 0 and β ≥ 2, got {mu}, {kappa}, {beta}")
    grid = np.geomspace(beta * _GRID_FLOOR, beta * (1 - _GRID_FLOOR), grid_points)
    values = _m_values(grid, mu, kappa, beta)
    i = int(np.argmin(values))

    def objective(z: float) -> float:
        return m_of_zeta(z, mu, kappa, beta)

    if 0 < i < grid_points - 1:
        result = minimize_scalar(
            objective,
            bracket=(grid[i - 1], grid[i], grid[i + 1]),
            method="golden",
            tol=1e-10,
        )
        zeta_star, m_star = float(result.x), float(result.fun)
    else:
        inner = grid[1] if i == 0 else grid[-2]
        result = minimize_scalar(
            objective,
            bounds=(min(grid[i], inner), max(grid[i], inner)),
            method="bounded",
            options={"xatol": 1e-12},
        )
        zeta_star, m_star = float(result.x), float(result.fun)

    r = math.floor(m_star) + 1
    nearest = round(m_star)
    near = abs(m_star - nearest) < NEAR_INTEGER
    if near:
        logger.warning(f"m* = {m_star} is within {NEAR_INTEGER} of {nearest}")
    candidates = (nearest, nearest + 1) if near else (r,)
    return RBound(zeta_star, m_star, r, near, candidates)


def printed_value_matches(value: float, printed: str) -> bool:
    """True if truncating or rounding ``value`` to the printed decimals gives it."""
    decimals = len(printed.partition(".")[2])
    scale = 10**decimals
    target = float(printed)
    truncated = math.floor(value * scale) / scale
    rounded = round(value, decimals)
    return abs(truncated - target) < 0.5 / scale / 10 or abs(rounded - target) < 1e-9


@dataclass(frozen=True)
class TableRowResult:
    row: TableRow
    kappa: int
    beta: float
    mu: float
    bound: RBound

    @property
    def matches(self) -> bool:
        return self.bound.R == self.row["R"] and printed_value_matches(
            self.bound.m_star, self.row["m"]
        )

    def to_json(self) -> dict[str, Any]:
        num, den = self.row["theta"]
        return {
            "F": self.row["polynomial"],
            "mode": self.row["mode"],
            "delta": float(self.row["delta"]),
            "theta": f"{num}/{den}",
            "mu": self.mu,
            "mu_listed": self.row["mu"],
            "kappa": self.kappa,
            "zeta_star": self.bound.zeta_star,
            "m_star": self.bound.m_star,
            "R": self.bound.R,
            "R_listed": self.row["R"],
            "m_listed": self.row["m"],
            "matches": self.matches,
        }


def r_table(rows: list[TableRow] | None = None) -> list[TableRowResult]:
    """Recompute every row of the R-value table.

    μ comes from ``compute_mu_tau`` on the row's (δ, θ, mode); the printed μ
    is carried along for comparison only.
    """
    results = []
    for row in R_TABLE if rows is None else rows:
        kappa = POLYNOMIAL_DIMENSION[row["polynomial"]]
        c = sieve_constants(kappa)
        theta = float(Fraction(*row["theta"]))
        mu, _ = compute_mu_tau(float(row["delta"]), theta, row["mode"])
        bound = minimize_m(mu, kappa, c.beta)
        result = TableRowResult(row, kappa, c.beta, mu, bound)
        if not result.matches:
            logger.warning(
                f"{row['polynomial']} {row['mode']} δ={row['delta']}: "
                f"m*={bound.m_star} R={bound.R} vs printed m={row['m']} R={row['R']}"
            )
        results.append(result)
    return results


def format_r_table(results: list[TableRowResult]) -> str:
    """Aligned plain-text rendering of ``r_table`` output."""
    header = (
        f"{'F':<3} {'mode':<9} {'delta':>9} {'theta':>6} {'mu':>9} {'listed':>6} "
        f"{'zeta*':>8} {'m*':>10} {'printed':>7} {'R':>3}"
    )
    lines = [header, "-" * len(header)]
    for result in results:
        row = result.row
        num, den = row["theta"]
        lines.append(
            f"{row['polynomial']:<3} {row['mode']:<9} {row['delta']:>9} "
            f"{f'{num}/{den}':>6} {result.mu:>9.4f} {row['mu']:>6} "
            f"{result.bound.zeta_star:>8.5f} {result.bound.m_star:>10.6f} "
            f"{row['m']:>7} {result.bound.R:>3}"
        )
    return "\n".join(lines)


def delta_threshold(
    r_target: int,
    theta: float,
    kappa: float,
    mode: HorocycleMode | str,
    *,
    tolerance: float = DELTA_TOLERANCE,
) -> float:
    """Smallest δ in (θ, 1] with min_ζ m(ζ; μ(δ)) < R_target, by bisection.

    Raises:
        Unachievable: If even δ = 1 does not reach R_target
    """
    c = sieve_constants(kappa)

    def reaches(delta: float) -> bool:
        mu, _ = compute_mu_tau(delta, theta, mode)
        return minimize_m(mu, kappa, c.beta).m_star < r_target

    if not reaches(1.0):
        raise Unachievable(
            f"R={r_target} is not reached at δ=1 (κ={kappa}, θ={theta}, {mode})"
        )
    lo, hi = theta, 1.0
    while hi - lo > tolerance:
        mid = (lo + hi) / 2
        if reaches(mid):
            hi = mid
        else:
            lo = mid
    logger.debug(f"δ threshold for R={r_target}, κ={kappa}: {hi}")
    return hi


def parametrize(zeta: float, beta: float, tau: float = 1.0) -> tuple[float, float]:
    """(u, v) with τu = 1 + ζ − ζ/β and τv = β/ζ + β − 1."""
    if not 0 < zeta < beta:
        raise DomainError(f"ζ={zeta} must lie in (0, {beta})")
    return (1 + zeta - zeta / beta) / tau, (beta / zeta + beta - 1) / tau


@dataclass(frozen=True)
class BoundCheck:
    numeric: float
    closed_form: float
    ok: bool
    zeta: float


def integral_bound_check(
    tau: float,
    u: float,
    v: float,
    grid: SieveFunctionGrid,
    *,
    zeta: float | None = None,
    tolerance: float = 1e-6,
    samples: int = 20001,
) -> BoundCheck:
    """Compare the weighted-sieve integral with its closed-form majorant.

    numeric = κ/f(τv) · ∫₁^{v/u} F(τv − s)(1 − (u/v)s) ds/s, by Simpson's
    rule on ``samples`` points. ζ defaults to the solution of τu = 1 + ζ − ζ/β.
    At u = v the integral is empty and the majorant is taken at ζ = β, where
    it vanishes.

    Raises:
        InvalidRange: Unless τ⁻¹ < u ≤ v and β < τv
        DomainError: If ζ, given or derived, falls outside (0, β) for u < v
        GridTooShort: If τv lies beyond the grid
    """
    c = grid.constants
    if not (tau * u > 1 and u <= v and tau * v > c.beta):
        raise InvalidRange(
            f"Need 1/τ < u ≤ v and β < τv, got τ={tau}, u={u}, v={v}, β={c.beta}"
        )
    tv = tau * v
    if tv > grid.u_max:
        raise GridTooShort(f"τv = {tv} lies beyond the grid end {grid.u_max}")
    k, beta = c.kappa, c.beta
    if u == v:
        return BoundCheck(0.0, 0.0, True, beta)
    if zeta is None:
        zeta = (tau * u - 1) / (1 - 1 / beta)
    if not 0 < zeta < beta:
        raise DomainError(
            f"ζ={zeta:.6g} must lie in (0, {beta}) for τ={tau}, u={u}"
        )
    closed = (k + zeta) * math.log(beta / zeta) - k + zeta * k / beta

    s = np.linspace(1.0, v / u, samples)
    integrand = grid.F_at(tv - s) * (1 - (u / v) * s) / s
    numeric = float(c.kappa / grid.f_at(tv) * simpson(integrand, x=s))
    ok = numeric <= closed + tolerance
    logger.debug(f"ζ={zeta:.4f}: numeric {numeric:.6f} vs closed form {closed:.6f}")
    return BoundCheck(numeric, closed, ok, zeta)
