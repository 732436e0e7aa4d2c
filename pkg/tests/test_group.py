import pytest
from hypothesis import given, settings, strategies as st

import oracles
from tse import h2c
from tse.errors import DecodeError, ZeroInverse
from tse.group import (
    DST_GEN,
    DST_INPUT,
    SECP256K1,
    GroupParams,
    derive_second_generator,
    group_exp,
    group_mul,
    in_subgroup,
    toy_group,
)

G = SECP256K1
scalars = st.integers(min_value=0, max_value=G.order - 1)


def test_generator_matches_affine_oracle():
    assert G.generator().affine() == (oracles.GX, oracles.GY)
    pt = G.generator() ** 12345
    assert pt.affine() == oracles.affine_mul(12345, (oracles.GX, oracles.GY))


@pytest.mark.parametrize("msg,x,y", oracles.SUITE_VECTORS)
def test_hash_to_curve_matches_published_vectors(msg, x, y):
    el = G.hash_to_group(msg, oracles.SUITE_DST)
    assert el.affine() == (x, y)


@pytest.mark.parametrize("msg", [b"", b"abc", b"\x00" * 100, bytes(range(256))])
def test_hash_to_curve_matches_independent_oracle(msg):
    assert G.hash_to_group(msg, DST_INPUT).affine() == oracles.hash_to_curve(msg, DST_INPUT)


def test_expand_message_matches_oracle():
    for n in (32, 48, 96, 255):
        assert h2c.expand_message_xmd(b"msg", b"tag", n) == oracles.xmd(b"msg", b"tag", n)


def test_hash_to_group_empty_message_is_valid_point():
    el = G.hash_to_group(b"", DST_INPUT)
    assert not el.is_identity()
    assert oracles.on_curve(el.affine())
    assert (el ** G.order).is_identity()
    assert oracles.affine_mul(oracles.N, el.affine()) is None


def test_hash_to_group_is_deterministic_and_domain_separated():
    a = G.hash_to_group(b"x", DST_INPUT)
    assert a == G.hash_to_group(b"x", DST_INPUT)
    assert a != G.hash_to_group(b"x", DST_GEN)


def test_sswu_exceptional_input():
    # u = 0 takes the tv == 0 branch
    x, y = h2c.map_to_curve_sswu(0)
    assert (int(x), int(y)) == oracles.sswu(0)


@settings(max_examples=30, deadline=None)
@given(st.binary(max_size=64))
def test_hash_to_group_on_curve_and_order_q(msg):
    el = G.hash_to_group(msg, DST_INPUT)
    assert oracles.on_curve(el.affine())
    assert in_subgroup(el)


def test_second_generator():
    h1 = derive_second_generator(G, b"s1")
    assert not h1.is_identity() and in_subgroup(h1)
    assert h1 == derive_second_generator(G, b"s1")
    assert h1 != derive_second_generator(G, b"s2")
    with pytest.raises(ValueError):
        derive_second_generator(G, b"")


def test_exp_edge_cases():
    g = G.generator()
    assert group_exp(g, 0).is_identity()
    assert group_exp(g, 1) == g
    assert group_exp(g, G.order).is_identity()
    assert group_exp(g, G.order + 5) == group_exp(g, 5)
    assert group_exp(g, -1) == g.inverse()


@settings(max_examples=25, deadline=None)
@given(scalars, scalars)
def test_exp_homomorphism(x, y):
    b = G.hash_to_group(b"base", DST_INPUT)
    assert group_exp(b, x + y) == group_mul(group_exp(b, x), group_exp(b, y))
    g = G.generator()
    assert group_exp(g, x + y) == group_mul(group_exp(g, x), group_exp(g, y))


@settings(max_examples=15, deadline=None)
@given(st.lists(scalars, min_size=1, max_size=5))
def test_multi_exp_matches_naive(exps):
    bases = [G.hash_to_group(bytes([i]), DST_INPUT) for i in range(len(exps))]
    bases[0] = G.generator()
    naive = G.identity()
    for b, e in zip(bases, exps):
        naive = naive * (b ** e)
    assert G.multi_exp(zip(bases, exps)) == naive


@settings(max_examples=25, deadline=None)
@given(scalars)
def test_encoding_roundtrip(e):
    pt = G.generator() ** e
    enc = pt.encode()
    assert len(enc) == 33
    assert G.decode(enc) == pt


def test_identity_is_representable():
    ident = G.identity()
    assert G.decode(ident.encode()).is_identity()
    assert ident.encode() != G.generator().encode()


def test_decode_rejects_garbage():
    good = G.generator().encode()
    with pytest.raises(DecodeError):
        G.decode(good[:-1])
    with pytest.raises(DecodeError):
        G.decode(b"\x04" + good[1:])
    # x = 5 gives x^3 + 7 = 132, a non-residue mod p
    off_curve = b"\x02" + (5).to_bytes(32, "big")
    assert not oracles.is_square(5**3 + 7)
    with pytest.raises(DecodeError):
        G.decode(off_curve)
    with pytest.raises(DecodeError):
        G.decode(b"\x02" + oracles.P.to_bytes(32, "big"))


def test_scalar_field():
    f = G.field
    a = 7
    assert f.mul(f.inv(a), a) == 1
    assert f.inv(a) == oracles.inv(a, G.order)
    with pytest.raises(ZeroInverse):
        f.inv(0)
    assert f.encode(f.decode(f.encode(123))) == f.encode(123)
    with pytest.raises(DecodeError):
        f.decode(G.order.to_bytes(32, "big"))
    assert all(0 <= f.random() < G.order for _ in range(20))


@pytest.mark.parametrize("q", [11, 13, 101, 2**127 - 1])
def test_inverse_against_extended_gcd(q):
    from tse.group import ScalarField

    f = ScalarField(q)
    for a in (1, 2, 7, q - 1):
        assert f.inv(a) == oracles.inv(a, q)
        assert f.mul(f.inv(a), a) == 1


def test_toy_group():
    T = toy_group()
    g = T.generator()
    assert T.order == 11 and g.value == 2
    assert (g ** 11).is_identity()
    assert (T.element(4) ** 3).value == 18
    h = T.element(9)
    assert ((g ** 3) * (h ** 4)).value == 2
    with pytest.raises(DecodeError):
        T.element(5)  # 5 is not a quadratic residue mod 23
    w = T.hash_to_group(b"m", DST_INPUT)
    assert not w.is_identity() and in_subgroup(w)
    assert T.decode(w.encode()) == w


def test_group_params_from_seed():
    pp = GroupParams.from_seed(G, b"public seed")
    assert pp.q == G.order
    assert pp.h == derive_second_generator(G, b"public seed")
    assert pp.g == G.generator()
    assert pp.hash_input(b"x") == G.hash_to_group(b"x", DST_INPUT)
