import os

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from tse.commitments import hash_commit, hash_verify, pedersen_commit, pedersen_verify
from tse.errors import LengthMismatch
from tse.group import SECP256K1, GroupParams, toy_group

TOY = toy_group()
TOY_PP = GroupParams(TOY, TOY.generator(), TOY.element(9))
PP = GroupParams.from_seed(SECP256K1, b"commitment tests")


def test_pedersen_toy_example():
    assert pedersen_commit(TOY_PP, 3, 4).value == 2
    assert pedersen_commit(TOY_PP, 0, 0).is_identity()


def test_pedersen_opening():
    m, r = PP.group.random_scalar(), PP.group.random_scalar()
    gamma = pedersen_commit(PP, m, r)
    assert pedersen_verify(PP, m, r, gamma)
    assert not pedersen_verify(PP, m + 1, r, gamma)
    assert not pedersen_verify(PP, m, r + 1, gamma)
    assert not pedersen_verify(PP, m, r, None)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, TOY.order - 1), st.integers(0, TOY.order - 1))
def test_pedersen_completeness_toy(m, r):
    assert pedersen_verify(TOY_PP, m, r, pedersen_commit(TOY_PP, m, r))


def test_pedersen_hiding_smoke():
    # fixed message, fresh randomness: commitments spread over the whole toy group
    counts = {}
    for _ in range(2200):
        v = pedersen_commit(TOY_PP, 5, TOY.random_scalar()).value
        counts[v] = counts.get(v, 0) + 1
    assert len(counts) == TOY.order
    assert chisquare(list(counts.values())).pvalue > 1e-4
    seen = {pedersen_commit(PP, 5, PP.group.random_scalar()).encode() for _ in range(20)}
    assert len(seen) == 20


def test_hash_commit_lengths_and_opening():
    m, r = os.urandom(32), os.urandom(32)
    alpha = hash_commit(m, r)
    assert len(alpha) == 96
    assert hash_verify(m, r, alpha)
    flipped = bytes([m[0] ^ 1]) + m[1:]
    assert not hash_verify(flipped, r, alpha)
    assert not hash_verify(m, r, alpha[:-1])


def test_hash_commit_preconditions():
    with pytest.raises(LengthMismatch):
        hash_commit(b"abc", b"ab")
    with pytest.raises(ValueError):
        hash_commit(b"", b"")
    assert not hash_verify(b"", b"", b"")


@settings(max_examples=50)
@given(st.binary(min_size=1, max_size=64).flatmap(lambda m: st.tuples(st.just(m), st.binary(min_size=len(m), max_size=len(m)))))
def test_hash_commit_completeness(mr):
    m, r = mr
    alpha = hash_commit(m, r)
    assert len(alpha) == 3 * len(m)
    assert hash_verify(m, r, alpha)


@pytest.mark.slow
def test_hash_commit_binding_smoke():
    seen = set()
    for _ in range(10**6):
        m = os.urandom(8)
        alpha = hash_commit(m, os.urandom(8))
        assert alpha not in seen
        seen.add(alpha)
