import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

import oracles
from tse import shamir
from tse.errors import BadThreshold, DuplicatePoint, ZeroDenominator
from tse.shamir import (
    combine_shares,
    generate_shares,
    generate_zero_shares,
    lagrange_coefficient,
    sum_share_sets,
    sum_share_values,
)

Q = 13
BIG_Q = 2**127 - 1


def test_constant_polynomial_when_k_is_one():
    s = generate_shares(13, 1, 3, (1, 2, 3), 5)
    assert list(s.shares.values()) == [5, 5, 5]


def test_forced_coefficient(monkeypatch):
    monkeypatch.setattr(shamir, "sample_coefficients", lambda q, count: [2] * count)
    s = generate_shares(13, 2, 2, (1, 2), 3)
    assert s.shares == {1: 5, 2: 7}


def test_full_reconstruction_k_equals_n():
    s = generate_shares(Q, 3, 3, None, 9)
    assert combine_shares(s.points(), Q) == 9


def test_bad_parameters():
    with pytest.raises(BadThreshold):
        generate_shares(Q, 0, 3, None, 1)
    with pytest.raises(BadThreshold):
        generate_shares(Q, 4, 3, None, 1)
    with pytest.raises(DuplicatePoint):
        generate_shares(Q, 2, 3, (1, 2, 2), 1)
    with pytest.raises(DuplicatePoint):
        generate_shares(Q, 2, 3, (1, 2, 14), 1)  # 14 == 1 mod 13
    with pytest.raises(DuplicatePoint):
        generate_shares(Q, 2, 2, (0, 1), 1)


def test_lagrange_examples():
    assert lagrange_coefficient([1, 2], 1, 13) == 2
    assert lagrange_coefficient([1, 2], 2, 13) == 12
    assert lagrange_coefficient([5], 5, 13) == 1
    with pytest.raises(ZeroDenominator):
        lagrange_coefficient([1, 14], 1, 13)
    with pytest.raises(ValueError):
        lagrange_coefficient([1, 2], 3, 13)


def test_combine_example():
    assert combine_shares({1: 5, 2: 7}, 13) == 3
    assert combine_shares({4: 9}, 13) == 9


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_every_large_enough_subset_agrees(n):
    for k in range(1, n + 1):
        s = random.randrange(BIG_Q)
        pts = generate_shares(BIG_Q, k, n, None, s).points()
        for size in range(k, n + 1):
            for subset in itertools.combinations(pts, size):
                assert combine_shares({x: pts[x] for x in subset}, BIG_Q) == s


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))), st.integers(0, BIG_Q - 1))
def test_reconstruction_matches_vandermonde_oracle(nk, s):
    n, k = nk
    pts = generate_shares(BIG_Q, k, n, None, s).points()
    subset = dict(list(pts.items())[:k])
    assert combine_shares(subset, BIG_Q) == oracles.interpolate_at_zero(subset, BIG_Q) == s


def test_zero_sharing():
    z = generate_zero_shares(Q, 2, 4)
    for pair in itertools.combinations(z.points().items(), 2):
        assert combine_shares(dict(pair), Q) == 0
    s = generate_shares(Q, 2, 4, None, 6)
    both = sum_share_sets([s, z])
    assert combine_shares(dict(list(both.points().items())[:2]), Q) == 6


def test_k_minus_one_zero_shares_are_consistent_with_any_secret():
    # one share of a k=2 zero sharing: every candidate secret has a line through it
    z = generate_zero_shares(Q, 2, 3)
    x1, v1 = next(iter(z.points().items()))
    consistent = set()
    for s in range(Q):
        for a in range(Q):
            if (s + a * x1) % Q == v1:
                consistent.add(s)
    assert consistent == set(range(Q))


def test_linearity_two_secrets():
    a = generate_shares(Q, 2, 3, (1, 2, 3), 3)
    b = generate_shares(Q, 2, 3, (1, 2, 3), 4)
    summed = {x: sum_share_values([a.shares[j], b.shares[j]], Q) for j, x in enumerate((1, 2, 3), 1)}
    assert combine_shares({1: summed[1], 3: summed[3]}, Q) == 7


@pytest.mark.parametrize("summands", [1, 2, 4, 5])
def test_linearity_many_secrets(summands):
    secrets_ = [random.randrange(Q) for _ in range(summands)]
    sets = [generate_shares(Q, 3, 4, None, s) for s in secrets_]
    total = sum_share_sets(sets)
    for subset in itertools.combinations(total.points().items(), 3):
        assert combine_shares(dict(subset), Q) == sum(secrets_) % Q


def test_sum_share_values_needs_input():
    with pytest.raises(ValueError):
        sum_share_values([], Q)


def test_single_share_is_uniform():
    counts = [0] * Q
    for _ in range(6500):
        counts[generate_shares(Q, 2, 3, None, 5).shares[1]] += 1
    assert chisquare(counts).pvalue > 1e-4


def test_high_degree_sharing_is_detected_by_combine():
    # degree d in [k, n-1] makes a k-subset disagree with the full set
    for n in range(3, 7):
        for k in range(1, n):
            for d in range(k, n):
                coeffs = [random.randrange(BIG_Q) for _ in range(d)] + [random.randrange(1, BIG_Q)]
                pts = shamir.share_polynomial(BIG_Q, n, shamir.default_points(n), coeffs)
                disagree = any(
                    combine_shares({j: pts[j] for j in sub}, BIG_Q) != combine_shares(pts, BIG_Q)
                    for sub in itertools.combinations(pts, k)
                )
                assert disagree, (n, k, d)
