"""DDH-based distributed PRF: plain partial evaluations and the proof-carrying variant.

A partial evaluation on input ``x`` is ``omega ** sk_i`` with ``omega`` the hash
of ``x`` to the group. The proof-carrying variant attaches a Fiat-Shamir proof
that the same ``sk_i`` opens the participant's published Pedersen commitment.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Mapping

from .errors import DecodeError, ProofRejected
from .group import GroupParams
from .shamir import lagrange_coefficients


def input_point(pp: GroupParams, x):
    """omega = H(x); a group element passes through unchanged."""
    if isinstance(x, (bytes, bytearray)):
        return pp.hash_input(bytes(x))
    return x


def npr_evaluate(pp: GroupParams, sk: int, x):
    return input_point(pp, x) ** sk


def _xs_for(indices, xs: Mapping[int, int] | None):
    return {j: (xs[j] if xs is not None else j) for j in indices}


def npr_combine(partials: Mapping[int, object], xs: Mapping[int, int] | None, q: int):
    """prod z_j ** lambda_j over the given participants."""
    if not partials:
        raise ValueError("need at least one partial evaluation")
    points = _xs_for(partials, xs)
    lam = lagrange_coefficients(list(points.values()), q)
    group = next(iter(partials.values())).group
    return group.multi_exp((z, lam[points[j]]) for j, z in partials.items())


def h_chal(h_i, omega, gamma, g, h, t, t_prime) -> int:
    """Challenge scalar from length-prefixed encodings, expanded to 48 bytes and reduced."""
    hasher = hashlib.sha256()
    for el in (h_i, omega, gamma, g, h, t, t_prime):
        enc = el.encode()
        hasher.update(len(enc).to_bytes(2, "big"))
        hasher.update(enc)
    wide = hashlib.shake_256(hasher.digest()).digest(48)
    return int.from_bytes(wide, "big") % h_i.group.order


@dataclass(frozen=True)
class PartialEval:
    issuer: int
    h: object
    c: int
    u: int
    u_prime: int

    def to_bytes(self) -> bytes:
        field = self.h.group.field
        return (
            self.issuer.to_bytes(2, "big")
            + self.h.encode()
            + field.encode(self.c)
            + field.encode(self.u)
            + field.encode(self.u_prime)
        )

    @classmethod
    def from_bytes(cls, group, data: bytes) -> "PartialEval":
        es, ss = group.element_size, group.scalar_size
        if len(data) != 2 + es + 3 * ss:
            raise DecodeError("bad partial evaluation length")
        issuer = int.from_bytes(data[:2], "big")
        h = group.decode(data[2:2 + es])
        off = 2 + es
        c, u, u_prime = (group.field.decode(data[off + i * ss: off + (i + 1) * ss]) for i in range(3))
        return cls(issuer, h, c, u, u_prime)


def ssnpr_evaluate(pp: GroupParams, sk: int, r: int, gamma, x, issuer: int = 0) -> PartialEval:
    group = pp.group
    q = group.order
    omega = input_point(pp, x)
    h_i = omega ** sk
    v = group.random_scalar()
    v_prime = group.random_scalar()
    t = omega ** v
    t_prime = group.multi_exp([(pp.g, v), (pp.h, v_prime)])
    c = h_chal(h_i, omega, gamma, pp.g, pp.h, t, t_prime)
    return PartialEval(issuer, h_i, c, (v - c * sk) % q, (v_prime - c * r) % q)


def ssnpr_verify(pp: GroupParams, partial: PartialEval, gamma, x) -> bool:
    try:
        group = pp.group
        omega = input_point(pp, x)
        t = group.multi_exp([(omega, partial.u), (partial.h, partial.c)])
        t_prime = group.multi_exp([(pp.g, partial.u), (pp.h, partial.u_prime), (gamma, partial.c)])
        return partial.c == h_chal(partial.h, omega, gamma, pp.g, pp.h, t, t_prime)
    except (AttributeError, TypeError, ValueError, DecodeError):
        return False


def ssnpr_combine(
    pp: GroupParams,
    partials: Mapping[int, PartialEval],
    gammas: Mapping[int, object],
    x,
    xs: Mapping[int, int] | None = None,
):
    """Verify every proof, then combine the plain evaluations."""
    omega = input_point(pp, x)
    for j in sorted(partials):
        gamma = gammas.get(j)
        if gamma is None or partials[j].issuer != j or not ssnpr_verify(pp, partials[j], gamma, omega):
            raise ProofRejected(j)
    return npr_combine({j: z.h for j, z in partials.items()}, xs, pp.q)
