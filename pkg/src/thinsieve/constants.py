"""Shared constants for thinsieve."""

from typing import TypedDict


class SieveDimensionInfo(TypedDict):
    """Type definition for the tabulated DHR constants of one dimension."""

    alpha: float
    beta: float


class TableRow(TypedDict):
    """One row of the published R-value table.

    ``delta``, ``mu`` and ``m`` are kept as printed; their decimal places
    set the precision a reproduced value is compared at.
    """

    polynomial: str
    mode: str
    delta: str
    theta: tuple[int, int]
    mu: str
    m: str
    R: int


# Sieving limits α_κ ≥ β_κ of the DHR sieve, tabulated by dimension.
# Used by dhr.sieve_constants; re-deriving them is outside this package.
SIEVE_REGISTRY: dict[int, SieveDimensionInfo] = {
    1: {"alpha": 2.0, "beta": 2.0},
    4: {"alpha": 11.5317, "beta": 9.0722},
    5: {"alpha": 14.7735, "beta": 11.5347},
}

# Sieve dimension of each polynomial: its number of irreducible factors
POLYNOMIAL_DIMENSION: dict[str, int] = {"FH": 1, "FA": 4, "FC": 5}

_THETA_GENERAL = (5, 6)
_THETA_CONGRUENCE = (39, 64)
_THETA_LIMIT = (1, 2)


def _rows(
    polynomial: str, printed: list[tuple[str, str, str, int]]
) -> list[TableRow]:
    thetas = [
        _THETA_GENERAL,
        _THETA_GENERAL,
        _THETA_CONGRUENCE,
        _THETA_LIMIT,
        _THETA_LIMIT,
        _THETA_LIMIT,
        _THETA_LIMIT,
    ]
    modes = ["any", "any", "any", "finite", "finite", "infinite", "infinite"]
    return [
        {
            "polynomial": polynomial,
            "mode": mode,
            "delta": delta,
            "theta": theta,
            "mu": mu,
            "m": m,
            "R": r,
        }
        for mode, theta, (delta, mu, m, r) in zip(
            modes,
            thetas,
            printed,
            strict=True,
        )
    ]


# (delta, mu, m, R) exactly as printed, seven rows per polynomial in
# the order Any/Any/Any/Finite/Finite/Infinite/Infinite
R_TABLE: list[TableRow] = [
    *_rows(
        "FH",
        [
            ("1", "12", "13.93", 14),
            ("0.9992", "12.05", "13.99", 14),
            ("1", "5.12", "6.48", 7),
            ("1", "4", "5.22", 6),
            ("0.9265", "4.69", "5.99", 6),
            ("1", "10", "11.8", 12),
            ("0.991", "10.2", "11.9", 12),
        ],
    ),
    *_rows(
        "FA",
        [
            ("1", "12", "24.9", 25),
            ("0.99995", "12.0", "24.9", 25),
            ("1", "5.12", "15.6", 16),
            ("1", "4", "13.8", 14),
            ("0.98805", "4.1", "13.9", 14),
            ("1", "10", "22.4", 23),
            ("0.97895", "10.4", "22.9", 23),
        ],
    ),
    *_rows(
        "FC",
        [
            ("1", "12", "28.7", 29),
            ("0.99677", "12.2", "28.99", 29),
            ("1", "5.12", "18.7", 19),
            ("1", "4", "16.7", 17),
            ("0.981675", "4.2", "16.99", 17),
            ("1", "10", "25.9", 26),
            ("0.99905", "10.02", "25.9", 26),
        ],
    ),
]
