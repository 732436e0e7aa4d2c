"""Dealer-free key generation and proactive refresh, seen from one participant.

Every participant deals a fresh Shamir sharing, sums the n values it receives
into its key share, and publishes a Pedersen commitment to that share. Once
all commitments are public, each participant runs a test evaluation on an
input bound to the commitments and checks that

* some k-subset combines to the same value as all n partials (degree <= k-1),
* some (k-1)-subset does not (degree >= k-1),
* the combined value is not the identity (secret != 0).

Refresh is the same dance with zero-sharings added to the existing shares,
plus a check that the DPRF output did not move.

The classes here are pure state machines; moving messages around is the
runtime's job.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

from .commitments import hash_commit, pedersen_commit
from .dprf import PartialEval, input_point, npr_combine, ssnpr_combine, ssnpr_evaluate
from .errors import (
    AbortReason,
    EpochMismatch,
    MissingDeal,
    ProofRejected,
    ProtocolAborted,
)
from .group import GroupParams
from .shamir import SecretShare, ShareSet, default_points, sample_coefficients, share_polynomial

ID_LEN = 16


class Phase(str, Enum):
    DEALING = "Dealing"
    COMMITTING = "Committing"
    TESTING = "Testing"
    DONE = "Done"
    ABORTED = "Aborted"


_ORDER = [Phase.DEALING, Phase.COMMITTING, Phase.TESTING, Phase.DONE]


@dataclass(frozen=True)
class InstanceConfig:
    """Public inputs shared by every participant of one setup or refresh."""

    pp: GroupParams
    k: int
    n: int
    roster: tuple[bytes, ...]
    instance_id: bytes = field(default_factory=lambda: os.urandom(16))
    epoch: int = 0
    xs: tuple[int, ...] = ()

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if len(self.roster) != self.n or len(set(self.roster)) != self.n:
            raise ValueError("roster must list n distinct identifiers")
        if any(len(pid) != ID_LEN for pid in self.roster):
            raise ValueError("participant identifiers are 16 bytes")
        if not self.xs:
            object.__setattr__(self, "xs", default_points(self.n))

    @property
    def q(self) -> int:
        return self.pp.q

    @property
    def security_bits(self) -> int:
        return self.pp.q.bit_length() // 2

    def x_of(self, j: int) -> int:
        return self.xs[j - 1]

    def xs_map(self) -> dict[int, int]:
        return {j: x for j, x in enumerate(self.xs, start=1)}

    def next_epoch(self, instance_id: bytes | None = None) -> "InstanceConfig":
        return replace(self, epoch=self.epoch + 1, instance_id=instance_id or os.urandom(16))

    def public_record(self) -> bytes:
        """Canonical public-parameter record; equal across honest participants."""
        g = self.pp.group
        parts = [
            g.name.encode(),
            g.order.to_bytes(g.scalar_size, "big"),
            self.k.to_bytes(2, "big"),
            self.n.to_bytes(2, "big"),
            b"".join(self.roster),
            self.pp.h_seed,
            self.pp.h.encode(),
            self.epoch.to_bytes(4, "big"),
        ]
        return _length_prefixed(parts)


def _length_prefixed(parts: Sequence[bytes]) -> bytes:
    return b"".join(len(p).to_bytes(4, "big") + p for p in parts)


def h_test(config: InstanceConfig, gammas: Mapping[int, object]) -> bytes:
    """Test message bound to the public parameters and every published commitment."""
    if set(gammas) != set(range(1, config.n + 1)):
        raise ValueError("h_test needs all n commitments")
    g = config.pp.group
    parts = [
        g.name.encode(),
        g.modulus.to_bytes(33, "big"),
        g.order.to_bytes(g.scalar_size, "big"),
        config.security_bits.to_bytes(2, "big"),
        config.k.to_bytes(2, "big"),
        config.n.to_bytes(2, "big"),
        b"".join(config.roster),
    ]
    parts += [gammas[j].encode() for j in range(1, config.n + 1)]
    return hashlib.sha256(_length_prefixed(parts)).digest()


@dataclass
class KeyMaterial:
    """What a participant keeps once a setup or refresh is Done."""

    config: InstanceConfig
    index: int
    share: SecretShare
    rand: int
    gammas: dict[int, object]

    @property
    def identifier(self) -> bytes:
        return self.config.roster[self.index - 1]

    @property
    def epoch(self) -> int:
        return self.share.epoch

    @property
    def gamma(self):
        return self.gammas[self.index]

    def evaluate(self, x) -> PartialEval:
        return ssnpr_evaluate(self.config.pp, self.share.value, self.rand, self.gamma, x, self.index)


def threshold_checks(
    config: InstanceConfig,
    partials: Mapping[int, PartialEval],
    gammas: Mapping[int, object],
    x: bytes,
):
    """The three assertions of the test phase; returns the full combine on success."""
    pp = config.pp
    n, k = config.n, config.k
    xs = config.xs_map()
    omega = input_point(pp, x)
    missing = [j for j in range(1, n + 1) if j not in partials]
    if missing:
        raise ProtocolAborted(AbortReason.TIMEOUT, missing[0])
    try:
        full = ssnpr_combine(pp, partials, gammas, omega, xs)
    except ProofRejected as exc:
        raise ProtocolAborted(AbortReason.PROOF_REJECTED, exc.issuer) from exc
    hs = {j: z.h for j, z in partials.items()}
    subset_k = {j: hs[j] for j in range(1, k + 1)}
    if npr_combine(subset_k, xs, pp.q) != full:
        raise ProtocolAborted(AbortReason.DEGREE_TOO_HIGH)
    subset_t = {j: hs[j] for j in range(1, k)}
    below = npr_combine(subset_t, xs, pp.q) if subset_t else pp.group.identity()
    if below == full:
        raise ProtocolAborted(AbortReason.DEGREE_TOO_LOW)
    if full.is_identity():
        raise ProtocolAborted(AbortReason.IDENTITY_SECRET)
    return full


class _Transcript:
    def __init__(self, config: InstanceConfig, index: int):
        if not 1 <= index <= config.n:
            raise ValueError(f"participant index {index} outside 1..{config.n}")
        self.config = config
        self.index = index
        self.phase = Phase.DEALING
        self.dealt: dict[int, int] = {}
        self.my_share: SecretShare | None = None
        self.my_rand: int | None = None
        self.gammas: dict[int, object] = {}
        self.test_partials: dict[int, object] = {}
        self.test_input: bytes | None = None
        self.abort: ProtocolAborted | None = None

    @property
    def identifier(self) -> bytes:
        return self.config.roster[self.index - 1]

    def _advance(self, phase: Phase):
        if self.phase is Phase.ABORTED:
            raise self.abort or ProtocolAborted(AbortReason.COORDINATOR)
        if _ORDER.index(phase) < _ORDER.index(self.phase):
            raise RuntimeError(f"cannot move from {self.phase.value} back to {phase.value}")
        self.phase = phase

    def fail(self, exc: ProtocolAborted) -> ProtocolAborted:
        self.phase = Phase.ABORTED
        self.abort = exc
        # nothing from an aborted instance may be reused
        self.dealt.clear()
        self.my_share = None
        self.my_rand = None
        return exc

    # dealing

    def _polynomial(self, constant: int | None, coeffs: Sequence[int] | None) -> list[int]:
        if coeffs is not None:
            return list(coeffs)
        if constant is None:
            return sample_coefficients(self.config.q, self.config.k)
        return [constant] + sample_coefficients(self.config.q, self.config.k - 1)

    def _deal(self, constant: int | None, coeffs: Sequence[int] | None) -> ShareSet:
        if self.phase is not Phase.DEALING:
            raise RuntimeError("deal() called outside the dealing phase")
        cfg = self.config
        values = share_polynomial(cfg.q, cfg.n, cfg.xs, self._polynomial(constant, coeffs))
        self.dealt[self.index] = values[self.index]
        return ShareSet(cfg.q, cfg.k, cfg.n, cfg.xs, values)

    def receive_deal(self, j: int, value: int) -> None:
        if self.phase is not Phase.DEALING:
            raise RuntimeError("deal received after aggregation")
        if not 1 <= j <= self.config.n or j == self.index:
            raise ValueError(f"unexpected deal from {j}")
        if j in self.dealt:
            raise ValueError(f"duplicate deal from {j}")
        self.dealt[j] = value % self.config.q

    @property
    def deals_complete(self) -> bool:
        return len(self.dealt) == self.config.n

    def missing_deals(self) -> list[int]:
        return [j for j in range(1, self.config.n + 1) if j not in self.dealt]

    def _sum_deals(self) -> int:
        missing = self.missing_deals()
        if missing:
            raise self.fail(MissingDeal(missing[0]))
        return sum(self.dealt.values()) % self.config.q

    # committing

    def record_commitment(self, j: int, gamma) -> None:
        if j in self.gammas and self.gammas[j] != gamma:
            raise ValueError(f"participant {j} already published a different commitment")
        self.gammas[j] = gamma

    @property
    def commitments_complete(self) -> bool:
        return len(self.gammas) == self.config.n

    # testing

    def begin_test(self) -> bytes:
        """Build the test input ``id || alpha`` (requires every commitment)."""
        if not self.commitments_complete:
            raise RuntimeError("test requested before every commitment was published")
        self._advance(Phase.TESTING)
        m = h_test(self.config, self.gammas)
        alpha = hash_commit(m, os.urandom(len(m)))
        self.test_input = self.identifier + alpha
        return self.test_input

    def ready_to_evaluate(self) -> bool:
        return self.my_share is not None and self.commitments_complete and self.phase in (
            Phase.COMMITTING,
            Phase.TESTING,
            Phase.DONE,
        )


class SetupTranscript(_Transcript):
    """One participant's run of the dealer-free setup."""

    def deal(self, coeffs: Sequence[int] | None = None) -> ShareSet:
        """Share a fresh uniform secret; ``coeffs`` overrides the polynomial."""
        return self._deal(None, coeffs)

    def aggregate(self):
        """sk_i = sum of received values; returns (share, gamma)."""
        total = self._sum_deals()
        self._advance(Phase.COMMITTING)
        self.my_share = SecretShare(self.config.x_of(self.index), total, self.config.epoch)
        self.my_rand = self.config.pp.group.random_scalar()
        gamma = pedersen_commit(self.config.pp, total, self.my_rand)
        self.record_commitment(self.index, gamma)
        return self.my_share, gamma

    def evaluate(self, x) -> PartialEval:
        if not self.ready_to_evaluate():
            raise RuntimeError("evaluation requested before every commitment was published")
        return ssnpr_evaluate(
            self.config.pp, self.my_share.value, self.my_rand, self.gammas[self.index], x, self.index
        )

    def record_partial(self, j: int, partial: PartialEval) -> None:
        self.test_partials[j] = partial

    def finish(self) -> KeyMaterial:
        """Run the threshold test on the collected partials."""
        if self.phase is not Phase.TESTING:
            raise RuntimeError("finish() outside the testing phase")
        try:
            threshold_checks(self.config, self.test_partials, self.gammas, self.test_input)
        except ProtocolAborted as exc:
            raise self.fail(exc) from None
        self._advance(Phase.DONE)
        return self.key_material()

    def key_material(self) -> KeyMaterial:
        return KeyMaterial(self.config, self.index, self.my_share, self.my_rand, dict(self.gammas))


class RefreshTranscript(_Transcript):
    """Proactive refresh: add a joint zero-sharing to the current key shares."""

    def __init__(self, config: InstanceConfig, previous: KeyMaterial):
        super().__init__(config, previous.index)
        if config.epoch != previous.epoch + 1:
            raise EpochMismatch(previous.epoch + 1, config.epoch)
        if config.roster != previous.config.roster or (config.k, config.n) != (
            previous.config.k,
            previous.config.n,
        ):
            raise ValueError("refresh cannot change the roster or threshold")
        self.previous = previous
        self.old_partials: dict[int, PartialEval] = {}

    def deal(self, coeffs: Sequence[int] | None = None) -> ShareSet:
        return self._deal(0, coeffs)

    def aggregate(self):
        """sk'_i = sk_i + sum of received zero-shares."""
        total = (self.previous.share.value + self._sum_deals()) % self.config.q
        self._advance(Phase.COMMITTING)
        self.my_share = SecretShare(self.config.x_of(self.index), total, self.config.epoch)
        self.my_rand = self.config.pp.group.random_scalar()
        gamma = pedersen_commit(self.config.pp, total, self.my_rand)
        self.record_commitment(self.index, gamma)
        return self.my_share, gamma

    def evaluate(self, x) -> tuple[PartialEval, PartialEval]:
        """(old-key partial, new-key partial) on the same input."""
        if not self.ready_to_evaluate():
            raise RuntimeError("evaluation requested before every commitment was published")
        new = ssnpr_evaluate(
            self.config.pp, self.my_share.value, self.my_rand, self.gammas[self.index], x, self.index
        )
        return self.previous.evaluate(x), new

    def record_partial(self, j: int, pair: tuple[PartialEval, PartialEval]) -> None:
        self.old_partials[j], self.test_partials[j] = pair

    def finish(self) -> KeyMaterial:
        if self.phase is not Phase.TESTING:
            raise RuntimeError("finish() outside the testing phase")
        pp = self.config.pp
        try:
            missing = [j for j in range(1, self.config.n + 1) if j not in self.old_partials]
            if missing:
                raise ProtocolAborted(AbortReason.TIMEOUT, missing[0])
            try:
                old = ssnpr_combine(
                    pp, self.old_partials, self.previous.gammas, self.test_input, self.config.xs_map()
                )
            except ProofRejected as exc:
                raise ProtocolAborted(AbortReason.PROOF_REJECTED, exc.issuer) from exc
            new = threshold_checks(self.config, self.test_partials, self.gammas, self.test_input)
            if old != new:
                raise ProtocolAborted(AbortReason.REFRESH_MISMATCH)
        except ProtocolAborted as exc:
            raise self.fail(exc) from None
        self._advance(Phase.DONE)
        return KeyMaterial(self.config, self.index, self.my_share, self.my_rand, dict(self.gammas))

    def commit(self) -> KeyMaterial:
        """Erase the previous epoch's secrets once the refresh is Done."""
        if self.phase is not Phase.DONE:
            raise RuntimeError("refresh not finished")
        result = KeyMaterial(self.config, self.index, self.my_share, self.my_rand, dict(self.gammas))
        self.previous.share = SecretShare(self.previous.share.x, 0, self.previous.epoch)
        self.previous.rand = 0
        self.previous = None
        return result
