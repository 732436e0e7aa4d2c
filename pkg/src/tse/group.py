"""Prime-order groups: secp256k1 and a small mod-p Schnorr group.

Elements are written multiplicatively to match the protocol notation:
``a * b`` is the group operation and ``b ** e`` is exponentiation by a
scalar. Scalars are plain ints; :class:`ScalarField` does the modular
bookkeeping.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable

from .errors import DecodeError, IdentityOutput, ZeroInverse
from . import h2c

try:
    from gmpy2 import mpz
except ImportError:  # pragma: no cover
    mpz = int


class ScalarField:
    """Integers modulo the group order ``q``."""

    def __init__(self, q: int):
        self.q = q
        self.size = (q.bit_length() + 7) // 8

    def __call__(self, x: int) -> int:
        return x % self.q

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def neg(self, a: int) -> int:
        return -a % self.q

    def inv(self, a: int) -> int:
        a %= self.q
        if a == 0:
            raise ZeroInverse("inverse of zero")
        return pow(a, -1, self.q)

    def random(self) -> int:
        # 2x oversampling keeps the modular bias negligible
        return secrets.randbits(2 * self.q.bit_length()) % self.q

    def encode(self, a: int) -> bytes:
        return (a % self.q).to_bytes(self.size, "big")

    def decode(self, data: bytes) -> int:
        if len(data) != self.size:
            raise DecodeError(f"scalar must be {self.size} bytes")
        v = int.from_bytes(data, "big")
        if v >= self.q:
            raise DecodeError("scalar not reduced")
        return v


class Group:
    """Common surface of the built-in groups."""

    name: str
    order: int
    element_size: int
    field: ScalarField

    @property
    def scalar_size(self) -> int:
        return self.field.size

    def random_scalar(self) -> int:
        return self.field.random()

    def identity(self):
        raise NotImplementedError

    def generator(self):
        raise NotImplementedError

    def decode(self, data: bytes):
        raise NotImplementedError

    def hash_to_group(self, msg: bytes, dst: bytes):
        raise NotImplementedError

    def precompute(self, element) -> None:
        """Hint that ``element`` is a long-lived base (a no-op by default)."""

    def multi_exp(self, pairs: Iterable[tuple]):
        return reduce(lambda acc, pe: acc * pe[0] ** pe[1], pairs, self.identity())

    def product(self, elements: Iterable):
        return reduce(lambda a, b: a * b, elements, self.identity())


# ---------------------------------------------------------------------------
# secp256k1

P = mpz(2**256 - 2**32 - 977)
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

_INF = (mpz(0), mpz(1), mpz(0))


def _jdouble(pt):
    X, Y, Z = pt
    if Z == 0 or Y == 0:
        return _INF
    YY = Y * Y % P
    S = 4 * X * YY % P
    M = 3 * X * X % P
    X3 = (M * M - 2 * S) % P
    Y3 = (M * (S - X3) - 8 * YY * YY) % P
    return (X3, Y3, 2 * Y * Z % P)


def _jadd(p1, p2):
    X1, Y1, Z1 = p1
    X2, Y2, Z2 = p2
    if Z1 == 0:
        return p2
    if Z2 == 0:
        return p1
    Z1Z1 = Z1 * Z1 % P
    Z2Z2 = Z2 * Z2 % P
    U1 = X1 * Z2Z2 % P
    U2 = X2 * Z1Z1 % P
    S1 = Y1 * Z2 * Z2Z2 % P
    S2 = Y2 * Z1 * Z1Z1 % P
    H = (U2 - U1) % P
    R = (S2 - S1) % P
    if H == 0:
        if R == 0:
            return _jdouble(p1)
        return _INF
    HH = H * H % P
    HHH = H * HH % P
    V = U1 * HH % P
    X3 = (R * R - HHH - 2 * V) % P
    Y3 = (R * (V - X3) - S1 * HHH) % P
    return (X3, Y3, Z1 * Z2 * H % P)


def _jadd_affine(p1, x2, y2):
    """Mixed addition with an affine (Z=1) second operand."""
    X1, Y1, Z1 = p1
    if Z1 == 0:
        return (x2, y2, mpz(1))
    Z1Z1 = Z1 * Z1 % P
    U2 = x2 * Z1Z1 % P
    S2 = y2 * Z1 * Z1Z1 % P
    H = (U2 - X1) % P
    R = (S2 - Y1) % P
    if H == 0:
        if R == 0:
            return _jdouble(p1)
        return _INF
    HH = H * H % P
    HHH = H * HH % P
    V = X1 * HH % P
    X3 = (R * R - HHH - 2 * V) % P
    Y3 = (R * (V - X3) - Y1 * HHH) % P
    return (X3, Y3, Z1 * H % P)


def _jneg(pt):
    X, Y, Z = pt
    return (X, -Y % P, Z)


def _to_affine(pt):
    X, Y, Z = pt
    if Z == 0:
        return None
    zi = pow(Z, -1, P)
    zi2 = zi * zi % P
    return (X * zi2 % P, Y * zi2 * zi % P)


def _batch_affine(points):
    """Normalize many Jacobian points with a single inversion."""
    prefix = []
    acc = 1
    for X, Y, Z in points:
        prefix.append(acc)
        acc = acc * Z % P
    inv = pow(acc, -1, P)
    out = [None] * len(points)
    for i in range(len(points) - 1, -1, -1):
        X, Y, Z = points[i]
        zi = inv * prefix[i] % P
        inv = inv * Z % P
        zi2 = zi * zi % P
        out[i] = (X * zi2 % P, Y * zi2 * zi % P)
    return out


def _wnaf(e: int, w: int) -> list[int]:
    digits = []
    half = 1 << (w - 1)
    full = 1 << w
    while e:
        if e & 1:
            d = e & (full - 1)
            if d >= half:
                d -= full
            e -= d
        else:
            d = 0
        digits.append(d)
        e >>= 1
    return digits


def _odd_multiples(pt, count: int):
    """[P, 3P, 5P, ...] in affine form, ``count`` entries."""
    twice = _jdouble(pt)
    out = [pt]
    for _ in range(count - 1):
        out.append(_jadd(out[-1], twice))
    return _batch_affine(out)


_WINDOW = 5
_COMB_BITS = 4


class _FixedBaseTable:
    """table[i][d-1] = d * 16**i * P, for fast exponentiation of fixed bases."""

    def __init__(self, pt):
        rows = []
        base = pt
        per_row = (1 << _COMB_BITS) - 1
        for _ in range((256 + _COMB_BITS - 1) // _COMB_BITS):
            row = [base]
            for _ in range(per_row - 1):
                row.append(_jadd(row[-1], base))
            rows.append(row)
            base = _jadd(row[-1], base)
        flat = _batch_affine([p for row in rows for p in row])
        self.rows = [flat[i * per_row:(i + 1) * per_row] for i in range(len(rows))]

    def mul(self, e: int):
        acc = _INF
        mask = (1 << _COMB_BITS) - 1
        i = 0
        while e:
            d = e & mask
            if d:
                x, y = self.rows[i][d - 1]
                acc = _jadd_affine(acc, x, y)
            e >>= _COMB_BITS
            i += 1
        return acc


@dataclass(frozen=True, eq=False)
class ECPoint:
    """A secp256k1 point in Jacobian coordinates (``z == 0`` is the identity)."""

    group: "Secp256k1"
    jac: tuple = field(repr=False)

    def is_identity(self) -> bool:
        return self.jac[2] == 0

    def affine(self):
        return _to_affine(self.jac)

    def __mul__(self, other: "ECPoint") -> "ECPoint":
        return ECPoint(self.group, _jadd(self.jac, other.jac))

    def __pow__(self, e: int) -> "ECPoint":
        return self.group.exp(self, e)

    def inverse(self) -> "ECPoint":
        return ECPoint(self.group, _jneg(self.jac))

    def __truediv__(self, other: "ECPoint") -> "ECPoint":
        return self * other.inverse()

    def __eq__(self, other) -> bool:
        if not isinstance(other, ECPoint):
            return NotImplemented
        X1, Y1, Z1 = self.jac
        X2, Y2, Z2 = other.jac
        if Z1 == 0 or Z2 == 0:
            return Z1 == Z2 == 0
        Z1Z1 = Z1 * Z1 % P
        Z2Z2 = Z2 * Z2 % P
        return (X1 * Z2Z2 - X2 * Z1Z1) % P == 0 and (Y1 * Z2Z2 * Z2 - Y2 * Z1Z1 * Z1) % P == 0

    def __hash__(self) -> int:
        return hash(self.encode())

    def encode(self) -> bytes:
        aff = self.affine()
        if aff is None:
            return bytes(33)
        x, y = aff
        return bytes([2 | int(y & 1)]) + int(x).to_bytes(32, "big")

    def __repr__(self) -> str:
        return f"ECPoint({self.encode().hex()})"


class Secp256k1(Group):
    name = "secp256k1"
    order = N
    modulus = int(P)
    element_size = 33

    def __init__(self):
        self.field = ScalarField(N)
        self._g = ECPoint(self, (mpz(GX), mpz(GY), mpz(1)))
        self._tables: dict[tuple, _FixedBaseTable] = {}
        self.precompute(self._g)

    def identity(self) -> ECPoint:
        return ECPoint(self, _INF)

    def generator(self) -> ECPoint:
        return self._g

    def point(self, x: int, y: int) -> ECPoint:
        if (y * y - x * x * x - 7) % P:
            raise DecodeError("point not on curve")
        return ECPoint(self, (mpz(x) % P, mpz(y) % P, mpz(1)))

    def _key(self, pt: ECPoint):
        return pt.affine()

    def precompute(self, element: ECPoint) -> None:
        key = self._key(element)
        if key is not None and key not in self._tables:
            self._tables[key] = _FixedBaseTable((key[0], key[1], mpz(1)))

    def exp(self, b: ECPoint, e: int) -> ECPoint:
        e %= N
        if e == 0 or b.is_identity():
            return self.identity()
        table = self._tables.get(self._key(b)) if self._tables else None
        if table is not None:
            return ECPoint(self, table.mul(e))
        return ECPoint(self, self._straus([(b.jac, e)]))

    def multi_exp(self, pairs: Iterable[tuple]) -> ECPoint:
        """Product of b_i ** e_i with shared doublings."""
        acc = _INF
        var = []
        for b, e in pairs:
            e %= N
            if e == 0 or b.is_identity():
                continue
            key = self._key(b)
            table = self._tables.get(key)
            if table is not None:
                acc = _jadd(acc, table.mul(e))
            else:
                var.append(((key[0], key[1], mpz(1)), e))
        if var:
            acc = _jadd(acc, self._straus(var))
        return ECPoint(self, acc)

    @staticmethod
    def _straus(pairs):
        tables = [_odd_multiples(b, 1 << (_WINDOW - 2)) for b, _ in pairs]
        nafs = [_wnaf(e, _WINDOW) for _, e in pairs]
        acc = _INF
        for i in range(max(len(d) for d in nafs) - 1, -1, -1):
            acc = _jdouble(acc)
            for table, naf in zip(tables, nafs):
                if i < len(naf):
                    d = naf[i]
                    if d > 0:
                        x, y = table[d >> 1]
                        acc = _jadd_affine(acc, x, y)
                    elif d < 0:
                        x, y = table[(-d) >> 1]
                        acc = _jadd_affine(acc, x, P - y)
        return acc

    def product(self, elements: Iterable[ECPoint]) -> ECPoint:
        acc = _INF
        for el in elements:
            acc = _jadd(acc, el.jac)
        return ECPoint(self, acc)

    def decode(self, data: bytes) -> ECPoint:
        if len(data) != 33:
            raise DecodeError("point encoding must be 33 bytes")
        if data == bytes(33):
            return self.identity()
        if data[0] not in (2, 3):
            raise DecodeError("bad point prefix")
        x = mpz(int.from_bytes(data[1:], "big"))
        if x >= P:
            raise DecodeError("x coordinate out of range")
        rhs = (x * x * x + 7) % P
        y = pow(rhs, (P + 1) // 4, P)
        if y * y % P != rhs:
            raise DecodeError("point not on curve")
        if (y & 1) != (data[0] & 1):
            y = P - y
        # cofactor 1: every curve point lies in the prime-order group
        return ECPoint(self, (x, y, mpz(1)))

    def hash_to_group(self, msg: bytes, dst: bytes) -> ECPoint:
        acc = _INF
        for pt in h2c.hash_to_curve_points(msg, dst):
            if pt is not None:
                acc = _jadd_affine(acc, *pt)
        return ECPoint(self, acc)


# ---------------------------------------------------------------------------
# mod-p Schnorr groups (toy instance for hand-checkable tests)


@dataclass(frozen=True)
class ModPElement:
    group: "SchnorrGroup" = field(compare=False, hash=False, repr=False)
    value: int

    def is_identity(self) -> bool:
        return self.value == 1

    def __mul__(self, other: "ModPElement") -> "ModPElement":
        return ModPElement(self.group, self.value * other.value % self.group.p)

    def __pow__(self, e: int) -> "ModPElement":
        return ModPElement(self.group, pow(self.value, e % self.group.order, self.group.p))

    def inverse(self) -> "ModPElement":
        return ModPElement(self.group, pow(self.value, -1, self.group.p))

    def __truediv__(self, other: "ModPElement") -> "ModPElement":
        return self * other.inverse()

    def encode(self) -> bytes:
        return self.value.to_bytes(self.group.element_size, "big")


class SchnorrGroup(Group):
    """The order-``q`` subgroup of Z_p^* generated by ``g``."""

    def __init__(self, p: int, q: int, g: int, name: str | None = None):
        if (p - 1) % q:
            raise ValueError("q must divide p - 1")
        if g % p in (0, 1) or pow(g, q, p) != 1:
            raise ValueError("g must generate the order-q subgroup")
        self.p = p
        self.modulus = p
        self.order = q
        self.cofactor = (p - 1) // q
        self.name = name or f"schnorr-{p}-{q}"
        self.element_size = (p.bit_length() + 7) // 8
        self.field = ScalarField(q)
        self._g = ModPElement(self, g)

    def identity(self) -> ModPElement:
        return ModPElement(self, 1)

    def generator(self) -> ModPElement:
        return self._g

    def element(self, v: int) -> ModPElement:
        v %= self.p
        if v == 0 or pow(v, self.order, self.p) != 1:
            raise DecodeError(f"{v} is not in the order-{self.order} subgroup")
        return ModPElement(self, v)

    def decode(self, data: bytes) -> ModPElement:
        if len(data) != self.element_size:
            raise DecodeError("bad element length")
        return self.element(int.from_bytes(data, "big"))

    def hash_to_group(self, msg: bytes, dst: bytes) -> ModPElement:
        length = self.element_size + 16
        for ctr in range(256):
            tag = dst if ctr == 0 else dst + b"/" + bytes([ctr])
            v = int.from_bytes(h2c.expand_message_xmd(msg, tag, length), "big") % self.p
            if v:
                el = pow(v, self.cofactor, self.p)
                if el != 1:
                    return ModPElement(self, el)
        raise IdentityOutput("hash_to_group kept hitting the identity")


def toy_group() -> SchnorrGroup:
    """p = 23, q = 11, g = 2."""
    return SchnorrGroup(23, 11, 2, name="toy-23-11")


SECP256K1 = Secp256k1()


def group_by_name(name: str) -> Group:
    if name == SECP256K1.name:
        return SECP256K1
    if name == "toy-23-11":
        return toy_group()
    raise ValueError(f"unknown group {name!r}")


# ---------------------------------------------------------------------------
# public parameters

DST_INPUT = b"TSE-V01-DPRF-INPUT-secp256k1_XMD:SHA-256_SSWU_RO_"
DST_GEN = b"TSE-V01-PEDERSEN-GEN-secp256k1_XMD:SHA-256_SSWU_RO_"
H2C_SUITE = "secp256k1_XMD:SHA-256_SSWU_RO_"


def derive_second_generator(group: Group, seed: bytes, dst: bytes = DST_GEN):
    """Hash a public seed to a generator with no known log relative to g."""
    if not seed:
        raise ValueError("seed must be nonempty")
    el = group.hash_to_group(seed, dst)
    ctr = 0
    while el.is_identity():
        ctr += 1
        if ctr > 255:
            raise IdentityOutput("could not derive a non-identity generator")
        el = group.hash_to_group(seed + ctr.to_bytes(4, "big"), dst)
    return el


@dataclass(frozen=True)
class GroupParams:
    group: Group
    g: object
    h: object
    h_seed: bytes = b""
    dst_input: bytes = DST_INPUT
    dst_gen: bytes = DST_GEN
    suite: str = H2C_SUITE

    @property
    def q(self) -> int:
        return self.group.order

    @classmethod
    def from_seed(cls, group: Group, seed: bytes) -> "GroupParams":
        h = derive_second_generator(group, seed)
        group.precompute(h)
        return cls(group, group.generator(), h, seed)

    def hash_input(self, x: bytes):
        return self.group.hash_to_group(x, self.dst_input)


def group_exp(b, e: int):
    return b ** e


def group_mul(a, b):
    return a * b


def in_subgroup(el) -> bool:
    """Check membership by raising to the group order."""
    return _raw_pow(el, el.group.order).is_identity()


def _raw_pow(el, e: int):
    # exponent not reduced mod q, so the check is meaningful
    if isinstance(el, ModPElement):
        return ModPElement(el.group, pow(el.value, e, el.group.p))
    acc = _INF
    base = el.jac
    while e:
        if e & 1:
            acc = _jadd(acc, base)
        base = _jdouble(base)
        e >>= 1
    return ECPoint(el.group, acc)

