"""Independent recounts of the full orbit through its (u, v) parametrization."""

from math import gcd, isqrt

from thinsieve.lattice import Triple, uv_param


def uv_pairs(radius: float) -> list[tuple[int, int]]:
    """(u, v) pairs of the full orbit inside the ball of radius T.

    u, v coprime of opposite parity, one pair per ± class (v > 0, or v = 0
    with u > 0); the triple has Euclidean norm² 2(u² + v²)².
    """
    bound = isqrt(int(radius)) + 1
    pairs = []
    for v in range(0, bound + 1):
        for u in range(-bound, bound + 1):
            if v == 0 and u <= 0:
                continue
            if gcd(u, v) != 1 or (u - v) % 2 == 0:
                continue
            if uv_param(u, v).norm_sq < radius * radius:
                pairs.append((u, v))
    return pairs


def uv_points(radius: float) -> list[Triple]:
    return sorted(uv_param(u, v) for u, v in uv_pairs(radius))


def coordinates_value(u: int, v: int) -> int:
    """xyz/60 in factored form."""
    return (u + v) * (u - v) * u * v * (u * u + v * v) // 30


def area_value(u: int, v: int) -> int:
    """xy/12 in factored form."""
    return (u + v) * (u - v) * u * v // 6
