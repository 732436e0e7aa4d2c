"""Shamir k-of-n secret sharing over Z_q."""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import BadThreshold, DuplicatePoint, ZeroDenominator


@dataclass(frozen=True)
class SecretShare:
    x: int
    value: int
    epoch: int = 0


@dataclass(frozen=True)
class ShareSet:
    q: int
    k: int
    n: int
    xs: tuple[int, ...]
    # participant index j (1-based) -> P(x_j)
    shares: dict[int, int] = field(repr=False)

    def share_for(self, j: int, epoch: int = 0) -> SecretShare:
        return SecretShare(self.xs[j - 1], self.shares[j], epoch)

    def points(self) -> dict[int, int]:
        return {self.xs[j - 1]: v for j, v in self.shares.items()}


def default_points(n: int) -> tuple[int, ...]:
    return tuple(range(1, n + 1))


def sample_coefficients(q: int, count: int) -> list[int]:
    return [secrets.randbits(2 * q.bit_length()) % q for _ in range(count)]


def evaluate_polynomial(coeffs: Sequence[int], x: int, q: int) -> int:
    """Horner evaluation; coeffs[0] is the constant term."""
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % q
    return acc


def _check_points(q: int, n: int, xs: Sequence[int]) -> tuple[int, ...]:
    if len(xs) != n:
        raise ValueError(f"need {n} evaluation points, got {len(xs)}")
    reduced = tuple(x % q for x in xs)
    if any(x == 0 for x in reduced):
        raise DuplicatePoint("evaluation point 0 would reveal the secret")
    if len(set(reduced)) != n:
        raise DuplicatePoint("evaluation points must be distinct mod q")
    return reduced


def share_polynomial(q: int, n: int, xs: Sequence[int], coeffs: Sequence[int]) -> dict[int, int]:
    """Evaluate an arbitrary polynomial at every participant's point."""
    return {j: evaluate_polynomial(coeffs, x, q) for j, x in enumerate(xs, start=1)}


def generate_shares(q: int, k: int, n: int, xs: Sequence[int] | None, s: int) -> ShareSet:
    if k < 1 or k > n:
        raise BadThreshold(f"need 1 <= k <= n, got k={k}, n={n}")
    xs = _check_points(q, n, xs if xs is not None else default_points(n))
    coeffs = [s % q] + sample_coefficients(q, k - 1)
    return ShareSet(q, k, n, xs, share_polynomial(q, n, xs, coeffs))


def generate_zero_shares(q: int, k: int, n: int, xs: Sequence[int] | None = None) -> ShareSet:
    return generate_shares(q, k, n, xs, 0)


def lagrange_coefficient(points: Sequence[int], j: int, q: int) -> int:
    """lambda_j = prod_{i in K, i != j} x_i / (x_i - x_j) mod q."""
    if j not in points:
        raise ValueError(f"{j} is not in the interpolation set")
    num = 1
    den = 1
    for xi in points:
        if xi == j:
            continue
        d = (xi - j) % q
        if d == 0:
            raise ZeroDenominator(f"points {xi} and {j} coincide mod {q}")
        num = num * xi % q
        den = den * d % q
    return num * pow(den, -1, q) % q


def lagrange_coefficients(points: Sequence[int], q: int) -> dict[int, int]:
    if len({x % q for x in points}) != len(points):
        raise ZeroDenominator("interpolation points coincide mod q")
    return {x: lagrange_coefficient(points, x, q) for x in points}


def combine_shares(subset: Mapping[int, int], q: int) -> int:
    """Interpolate at zero from a map x -> P(x)."""
    if not subset:
        raise ValueError("need at least one share")
    lam = lagrange_coefficients(list(subset), q)
    return sum(lam[x] * v for x, v in subset.items()) % q


def sum_share_values(values: Sequence[int], q: int) -> int:
    if not values:
        raise ValueError("nothing to sum")
    return sum(values) % q


def sum_share_sets(sets: Sequence[ShareSet]) -> ShareSet:
    first = sets[0]
    totals = {j: sum_share_values([s.shares[j] for s in sets], first.q) for j in first.shares}
    return ShareSet(first.q, first.k, first.n, first.xs, totals)
