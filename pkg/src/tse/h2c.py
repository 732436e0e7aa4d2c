"""Hashing byte strings to secp256k1 (RFC 9380, suite secp256k1_XMD:SHA-256_SSWU_RO_).

Two field elements are derived with expand_message_xmd, each is mapped to the
3-isogenous curve E' with simplified SWU, carried to secp256k1 by the isogeny,
and the two points are added. secp256k1 has cofactor 1, so no clearing step.
"""

from __future__ import annotations

import hashlib

try:
    from gmpy2 import mpz
except ImportError:  # pragma: no cover
    mpz = int

P = mpz(2**256 - 2**32 - 977)

# E': y^2 = x^3 + A'x + B'
ISO_A = 0x3F8731ABDD661ADCA08A5558F0F5D272E953D363CB6F0E5D405447C01A444533
ISO_B = 1771
Z = P - 11

# 3-isogeny E' -> secp256k1, coefficients in ascending degree
_X_NUM = (
    0x8E38E38E38E38E38E38E38E38E38E38E38E38E38E38E38E38E38E38DAAAAA8C7,
    0x07D3D4C80BC321D5B9F315CEA7FD44C5D595D2FC0BF63B92DFFF1044F17C6581,
    0x534C328D23F234E6E2A413DECA25CAECE4506144037C40314ECBD0B53D9DD262,
    0x8E38E38E38E38E38E38E38E38E38E38E38E38E38E38E38E38E38E38DAAAAA88C,
)
_X_DEN = (
    0xD35771193D94918A9CA34CCBB7B640DD86CD409542F8487D9FE6B745781EB49B,
    0xEDADC6F64383DC1DF7C4B2D51B54225406D36B641F5E41BBC52A56612A8C6D14,
    1,
)
_Y_NUM = (
    0x4BDA12F684BDA12F684BDA12F684BDA12F684BDA12F684BDA12F684B8E38E23C,
    0xC75E0C32D5CB7C0FA9D0A54B12A0A6D5647AB046D686DA6FDFFC90FC201D71A3,
    0x29A6194691F91A73715209EF6512E576722830A201BE2018A765E85A9ECEE931,
    0x2F684BDA12F684BDA12F684BDA12F684BDA12F684BDA12F684BDA12F38E38D84,
)
_Y_DEN = (
    0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFF93B,
    0x7A06534BB8BDB49FD5E9E6632722C2989467C1BFC8E8D978DFB425D2685C2573,
    0x6484AA716545CA2CF3A70C3FA8FE337E0A3D21162F0D6299A7BF8192BFD2A76F,
    1,
)

_SQRT_C1 = (P - 3) // 4
_SQRT_C2 = pow(11, (P + 1) // 4, P)  # sqrt(-Z)
_L = 48


def expand_message_xmd(msg: bytes, dst: bytes, len_in_bytes: int) -> bytes:
    if len(dst) > 255:
        dst = hashlib.sha256(b"H2C-OVERSIZE-DST-" + dst).digest()
    ell = -(-len_in_bytes // 32)
    if ell > 255 or len_in_bytes > 65535:
        raise ValueError("requested too many bytes")
    dst_prime = dst + bytes([len(dst)])
    msg_prime = bytes(64) + msg + len_in_bytes.to_bytes(2, "big") + b"\x00" + dst_prime
    b0 = hashlib.sha256(msg_prime).digest()
    bi = hashlib.sha256(b0 + b"\x01" + dst_prime).digest()
    out = [bi]
    for i in range(2, ell + 1):
        mixed = bytes(a ^ b for a, b in zip(b0, bi))
        bi = hashlib.sha256(mixed + bytes([i]) + dst_prime).digest()
        out.append(bi)
    return b"".join(out)[:len_in_bytes]


def hash_to_field(msg: bytes, dst: bytes, count: int = 2) -> list[int]:
    uniform = expand_message_xmd(msg, dst, count * _L)
    return [mpz(int.from_bytes(uniform[i * _L:(i + 1) * _L], "big")) % P for i in range(count)]


def _sgn0(x: int) -> int:
    return x & 1


def _sqrt_ratio(u: int, v: int) -> tuple[bool, int]:
    tv1 = v * v % P
    tv2 = u * v % P
    tv1 = tv1 * tv2 % P
    y1 = pow(tv1, _SQRT_C1, P) * tv2 % P
    y2 = y1 * _SQRT_C2 % P
    is_qr = y1 * y1 % P * v % P == u % P
    return is_qr, (y1 if is_qr else y2)


def map_to_curve_sswu(u: int) -> tuple[int, int]:
    """Simplified SWU onto E' (straight-line form)."""
    tv1 = Z * (u * u % P) % P
    tv2 = (tv1 * tv1 + tv1) % P
    tv3 = ISO_B * (tv2 + 1) % P
    tv4 = ISO_A * (-tv2 % P if tv2 else Z) % P
    tv6 = tv4 * tv4 % P
    num = (tv3 * tv3 + ISO_A * tv6) % P * tv3 % P
    tv6 = tv6 * tv4 % P
    num = (num + ISO_B * tv6) % P
    x = tv1 * tv3 % P
    is_square, y1 = _sqrt_ratio(num, tv6)
    y = tv1 * u % P * y1 % P
    if is_square:
        x, y = tv3, y1
    if _sgn0(u) != _sgn0(y):
        y = -y % P
    return x * pow(tv4, -1, P) % P, y


def _horner(coeffs, x: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % P
    return acc


def iso_map(x: int, y: int) -> tuple[int, int] | None:
    """3-isogeny from E' to secp256k1; None stands for the point at infinity."""
    x_den = _horner(_X_DEN, x)
    y_den = _horner(_Y_DEN, x)
    if x_den == 0 or y_den == 0:
        return None
    xo = _horner(_X_NUM, x) * pow(x_den, -1, P) % P
    yo = y * _horner(_Y_NUM, x) % P * pow(y_den, -1, P) % P
    return xo, yo


def hash_to_curve_points(msg: bytes, dst: bytes):
    """The two mapped points whose sum is the hash output (None = infinity)."""
    u0, u1 = hash_to_field(msg, dst, 2)
    return iso_map(*map_to_curve_sswu(u0)), iso_map(*map_to_curve_sswu(u1))
