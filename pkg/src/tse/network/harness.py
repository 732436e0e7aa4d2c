"""In-process cluster: n participant nodes, a coordinator and public storage.

``Cluster`` is what the CLI and the benchmarks drive. ``harness_run`` wraps it
into named scenarios, including adversarial ones, and returns a trace.
"""

from __future__ import annotations

import asyncio
import os
import random
import struct
import time
from dataclasses import dataclass, field, replace

from ..dprf import PartialEval, npr_combine
from ..encryption import Ciphertext
from ..errors import CommitmentMismatch, EvalTimeout, InstanceAborted, ProofRejected
from ..group import GroupParams, group_by_name
from . import messages as M
from .channel import StaticKey, accept_secure_channel, open_secure_channel
from .node import COORDINATOR, Behavior, Coordinator, CoordinatorPlan, ParticipantIdentity, ParticipantNode
from .storage import PublicStorage
from .trace import Trace
from .transport import TcpTransport, memory_pair, tcp_connect

DEFAULT_SEED = b"TSE-V01-public-generator-seed"

SCENARIOS = (
    "honest",
    "malicious_dealer_high_degree",
    "tampered_eval",
    "offline_subset",
    "malicious_coordinator",
    "refresh_mix_epochs",
    # extra adversarial hooks
    "colluding_low_degree",
    "identity_secret",
    "tampered_test_eval",
    "refresh_nonzero_dealer",
)


def setup_message_count(n: int) -> int:
    """n(n-1) deals + n commitment posts + n*n test request/response pairs."""
    return n * (n - 1) + n + 2 * n * n


def encryption_message_count(k: int) -> int:
    return 2 * k


# behaviors


class HighDegreeDealer(Behavior):
    """Shares its secret with a degree-k polynomial (one too many)."""

    def deal_coefficients(self, q, k, refresh):
        rng = random.SystemRandom()
        coeffs = [rng.randrange(q) for _ in range(k + 1)]
        coeffs[-1] = coeffs[-1] or 1
        if refresh:
            coeffs[0] = 0
        return coeffs


class ConstantDealer(Behavior):
    """Deals a constant polynomial; if everybody does it the key has degree 0."""

    def deal_coefficients(self, q, k, refresh):
        return [0 if refresh else random.SystemRandom().randrange(1, q)]


class FixedSecretDealer(Behavior):
    """Deals a chosen secret; colluders pick secrets summing to zero."""

    def __init__(self, secret: int):
        self.secret = secret

    def deal_coefficients(self, q, k, refresh):
        rng = random.SystemRandom()
        return [self.secret % q] + [rng.randrange(q) for _ in range(k - 1)]


class NonzeroRefreshDealer(Behavior):
    def deal_coefficients(self, q, k, refresh):
        rng = random.SystemRandom()
        return [rng.randrange(1, q)] + [rng.randrange(q) for _ in range(k - 1)]


_FIELDS = ("h", "c", "u", "u_prime")


def tamper(partial: PartialEval, rng: random.Random, field_name: str | None = None) -> PartialEval:
    """Perturb one field of a partial evaluation by a random nonzero amount."""
    field_name = field_name or rng.choice(_FIELDS)
    group = partial.h.group
    delta = rng.randrange(1, group.order)
    if field_name == "h":
        return replace(partial, h=partial.h * group.generator() ** delta)
    return replace(partial, **{field_name: (getattr(partial, field_name) + delta) % group.order})


class TamperingResponder(Behavior):
    def __init__(self, modes=(M.EvalMode.KEY,), seed: int | None = None, field_name: str | None = None):
        self.modes = set(modes)
        self.rng = random.Random(seed)
        self.field_name = field_name
        self.tampered: list[str] = []

    def tamper_partial(self, partial, mode):
        if mode not in self.modes:
            return partial
        name = self.field_name or self.rng.choice(_FIELDS)
        self.tampered.append(name)
        return tamper(partial, self.rng, name)


class WrongInputResponder(Behavior):
    def eval_input(self, x):
        return x[:-1] + bytes([x[-1] ^ 1])


class Offline(Behavior):
    offline = True


@dataclass
class Cluster:
    n: int
    k: int
    group: str = "secp256k1"
    seed: int | None = None
    timeout: float = 2.0
    behaviors: dict[int, Behavior] = field(default_factory=dict)
    transport: str = "memory"
    storage_path: str | None = None
    taps: list = field(default_factory=list)
    h_seed: bytes = DEFAULT_SEED
    record_messages: bool = True
    identities: list[bytes] | None = None
    static_keys: list[StaticKey] | None = None
    keys: dict | None = None

    def __post_init__(self):
        self.rng = random.Random(self.seed)
        self.pp = GroupParams.from_seed(group_by_name(self.group), self.h_seed)
        self.trace = Trace(record_messages=self.record_messages)
        self.storage = PublicStorage(self.storage_path)
        self.nodes: dict[int, ParticipantNode] = {}
        self.coordinator: Coordinator | None = None
        self._servers = []
        self.current_instance: bytes | None = None

    # lifecycle

    async def start(self) -> "Cluster":
        ids = self.identities or [self.rng.randbytes(16) for _ in range(self.n)]
        statics = self.static_keys or [StaticKey() for _ in range(self.n)]
        coord_key = StaticKey()
        roster = [ParticipantIdentity(ids[j - 1], j, statics[j - 1].public) for j in range(1, self.n + 1)]
        self.roster = roster
        for ident in roster:
            keys = (self.keys or {}).get(ident.index)
            self.nodes[ident.index] = ParticipantNode(
                ident, roster, self.pp, self.storage, self.trace,
                self.behaviors.get(ident.index), self.timeout, keys,
            )
        if self.keys:
            self.current_instance = next(iter(self.keys.values())).config.instance_id
        self.coordinator = Coordinator(self.n, self.trace, self.timeout)
        statics_by_index = {0: coord_key, **{j: statics[j - 1] for j in range(1, self.n + 1)}}
        endpoints = {0: self.coordinator, **self.nodes}
        pairs = [(a, b) for a in range(0, self.n + 1) for b in range(a + 1, self.n + 1)]
        if self.transport == "memory":
            await asyncio.gather(*(self._link_memory(a, b, statics_by_index, endpoints) for a, b in pairs))
        elif self.transport == "tcp":
            await self._link_tcp(pairs, statics_by_index, endpoints)
        else:
            raise ValueError(f"unknown transport {self.transport!r}")
        for node in self.nodes.values():
            node.start()
        return self

    async def _link_memory(self, a, b, statics, endpoints):
        ta, tb = memory_pair(str(a), str(b), self.taps)
        ca, cb = await asyncio.gather(
            open_secure_channel(ta, statics[a], statics[b].public),
            accept_secure_channel(tb, statics[b], statics[a].public),
        )
        endpoints[a].attach(b, ca)
        endpoints[b].attach(a, cb)

    async def _link_tcp(self, pairs, statics, endpoints):
        accepted: dict[tuple[int, int], asyncio.Future] = {}
        loop = asyncio.get_running_loop()
        for a, b in pairs:
            accepted[(a, b)] = loop.create_future()
        ports = {}
        for b in range(1, self.n + 1):
            async def on_connect(reader, writer, b=b):
                transport = TcpTransport(reader, writer)
                hello = await transport.recv()
                (a,) = struct.unpack(">H", hello)
                channel = await accept_secure_channel(transport, statics[b], statics[a].public)
                accepted[(a, b)].set_result(channel)
            server = await asyncio.start_server(on_connect, "127.0.0.1", 0)
            self._servers.append(server)
            ports[b] = server.sockets[0].getsockname()[1]

        async def connect(a, b):
            transport = await tcp_connect("127.0.0.1", ports[b])
            await transport.send(struct.pack(">H", a))
            ca = await open_secure_channel(transport, statics[a], statics[b].public)
            cb = await accepted[(a, b)]
            endpoints[a].attach(b, ca)
            endpoints[b].attach(a, cb)

        await asyncio.gather(*(connect(a, b) for a, b in pairs))

    async def close(self) -> None:
        for node in self.nodes.values():
            await node.stop()
        if self.coordinator:
            await self.coordinator.stop()
        for server in self._servers:
            server.close()

    async def __aenter__(self):
        return await self.start()

    async def __aexit__(self, *exc):
        await self.close()

    # protocol operations

    def _new_instance(self) -> bytes:
        return self.rng.randbytes(16) if self.seed is not None else os.urandom(16)

    async def _run_instance(self, refresh: bool, plan: CoordinatorPlan | None):
        instance = self._new_instance()
        epoch = 0
        if refresh:
            epoch = max(node.keys.epoch for node in self.nodes.values() if node.keys) + 1
        try:
            result = await self.coordinator.run(instance, self.k, epoch, refresh, plan)
        finally:
            await self._settle(instance)
        self.current_instance = instance
        return result

    async def _settle(self, instance: bytes) -> None:
        """Give every node a chance to process the coordinator's final word."""
        loop = asyncio.get_running_loop()
        deadline = loop.time() + self.timeout
        while loop.time() < deadline:
            if all(instance in node.outcomes or node.behavior.offline for node in self.nodes.values()):
                return
            await asyncio.sleep(0.001)

    async def setup(self, plan: CoordinatorPlan | None = None):
        return await self._run_instance(False, plan)

    async def refresh(self, plan: CoordinatorPlan | None = None):
        return await self._run_instance(True, plan)

    def default_members(self, initiator: int) -> list[int]:
        others = [j for j in range(1, self.n + 1) if j != initiator]
        return [initiator] + others[: self.k - 1]

    async def encrypt(self, initiator: int, m: bytes, members=None, timeout: float | None = None) -> Ciphertext:
        members = members or self.default_members(initiator)
        return await self.nodes[initiator].encrypt(m, members, timeout)

    async def decrypt(self, requester: int, c: Ciphertext, members=None, timeout: float | None = None) -> bytes:
        members = members or self.default_members(requester)
        return await self.nodes[requester].decrypt(c, members, timeout)

    def public_records(self) -> dict[int, bytes]:
        return {j: node.keys.config.public_record() for j, node in self.nodes.items() if node.keys}

    def key_material(self) -> dict:
        return {j: node.keys for j, node in self.nodes.items()}


# scenarios


def _outcome(exc: Exception) -> str:
    if isinstance(exc, InstanceAborted):
        reasons = [r for r in exc.reasons.values() if r != "Timeout"] or list(exc.reasons.values())
        return "Aborted(" + reasons[0].split(":")[0].split("(")[0] + ")"
    if isinstance(exc, ProofRejected):
        return f"ProofRejected({exc.issuer})"
    if isinstance(exc, EvalTimeout):
        return f"Timeout({exc.missing[0]})"
    if isinstance(exc, CommitmentMismatch):
        return "CommitmentMismatch"
    return type(exc).__name__


async def _roundtrip(cluster: Cluster, report: dict, initiator: int = 1, members=None, decrypt_members=None) -> bool:
    m = os.urandom(32)
    c = await cluster.encrypt(initiator, m, members)
    back = await cluster.decrypt(initiator, c, decrypt_members or members)
    report["roundtrip"] = back == m
    return back == m


async def _scenario(name: str, n: int, k: int, seed: int | None, opts: dict) -> dict:
    rng = random.Random(seed)
    report: dict = {"scenario": name, "n": n, "k": k}
    behaviors: dict[int, Behavior] = {}
    timeout = opts.get("timeout", 2.0)
    if name == "malicious_dealer_high_degree":
        behaviors[rng.randrange(1, n + 1)] = HighDegreeDealer()
    elif name == "colluding_low_degree":
        behaviors = {j: ConstantDealer() for j in range(1, n + 1)}
    elif name == "identity_secret":
        q = group_by_name(opts.get("group", "secp256k1")).order
        secrets_ = [rng.randrange(q) for _ in range(n - 1)]
        secrets_.append(-sum(secrets_) % q)
        behaviors = {j: FixedSecretDealer(secrets_[j - 1]) for j in range(1, n + 1)}
    elif name == "tampered_test_eval":
        behaviors[rng.randrange(1, n + 1)] = TamperingResponder((M.EvalMode.TEST,), rng.randrange(2**32))
    elif name in ("malicious_coordinator", "offline_subset"):
        timeout = opts.get("timeout", 0.5)
    cluster = Cluster(
        n, k, group=opts.get("group", "secp256k1"), seed=seed, timeout=timeout, behaviors=behaviors,
        transport=opts.get("transport", "memory"), record_messages=opts.get("record_messages", True),
    )
    t0 = time.monotonic()
    async with cluster:
        mark = cluster.trace.mark()
        try:
            if name == "malicious_coordinator":
                await _malicious_coordinator(cluster, rng, report)
            else:
                await cluster.setup()
                report["setup"] = "Done"
        except InstanceAborted as exc:
            report["setup"] = _outcome(exc)
            report["reasons"] = exc.reasons
        report["setup_messages"] = cluster.trace.participant_messages(mark)
        report["control_messages"] = cluster.trace.control_messages(mark)
        if report.get("setup") == "Done":
            records = cluster.public_records()
            report["params_consistent"] = len(set(records.values())) == 1 and len(records) == n
            await _after_setup(name, cluster, rng, report)
        report["storage_values"] = [v.hex() for v in cluster.storage.values()]
        report["secrets"] = _secret_fingerprints(cluster)
    report["outcome"] = report.get("outcome") or report.get("setup")
    report["events"] = cluster.trace.events
    report["elapsed_s"] = time.monotonic() - t0
    return report


def _secret_fingerprints(cluster: Cluster) -> list[str]:
    """Encodings of every live scalar secret, for scanning public storage."""
    field_ = cluster.pp.group.field
    out = []
    for node in cluster.nodes.values():
        if node.keys:
            out += [field_.encode(node.keys.share.value).hex(), field_.encode(node.keys.rand).hex()]
        for session in node.sessions.values():
            out += [field_.encode(v).hex() for v in session.transcript.dealt.values()]
    return out


async def _malicious_coordinator(cluster: Cluster, rng: random.Random, report: dict) -> None:
    # a coordinator that never prompts one participant stalls everyone
    skipped = rng.randrange(1, cluster.n + 1)
    try:
        await cluster.setup(CoordinatorPlan(skip=frozenset({skipped})))
        report["skip_prompt"] = "Done"
    except InstanceAborted as exc:
        report["skip_prompt"] = _outcome(exc)
    report["skip_prompt_keys"] = sum(1 for node in cluster.nodes.values() if node.keys is not None)
    # equivocating about k makes the public records disagree
    liar = rng.randrange(1, cluster.n + 1)
    other_k = cluster.k - 1 if cluster.k > 1 else cluster.k + 1
    try:
        await cluster.setup(CoordinatorPlan(k_override={liar: other_k}))
        report["equivocate_k"] = "Done"
    except InstanceAborted as exc:
        report["equivocate_k"] = _outcome(exc)
    # reordered prompts cannot hurt: nodes gate on public storage
    await cluster.setup(CoordinatorPlan(early_test=True, reverse=True))
    report["setup"] = "Done"
    report["reordered"] = "Done"


async def _after_setup(name: str, cluster: Cluster, rng: random.Random, report: dict) -> None:
    n, k = cluster.n, cluster.k
    try:
        if name in ("honest", "malicious_coordinator"):
            mark = cluster.trace.mark()
            await _roundtrip(cluster, report)
            report["roundtrip_messages"] = cluster.trace.participant_messages(mark)
            report["outcome"] = "Done" if report["roundtrip"] else "RoundtripFailed"
        elif name == "tampered_eval":
            bad = rng.randrange(2, k + 1) if k > 1 else 1
            behavior = TamperingResponder(seed=rng.randrange(2**32))
            cluster.nodes[bad].behavior = behavior
            report["tampered_by"] = bad
            try:
                await _roundtrip(cluster, report, members=list(range(1, k + 1)))
                report["outcome"] = "Accepted"
            except ProofRejected as exc:
                report["outcome"] = _outcome(exc)
                report["tampered_fields"] = behavior.tampered
        elif name == "offline_subset":
            online = sorted(rng.sample(range(1, n + 1), k))
            offline = [j for j in range(1, n + 1) if j not in online]
            for j in offline:
                cluster.nodes[j].behavior = Offline()
            initiator = online[0]
            if offline and k > 1:
                # first attempt includes an offline member, then retry with K'
                first_try = [initiator] + offline[:1] + online[1:k - 1]
                try:
                    await cluster.encrypt(initiator, b"x" * 32, first_try, timeout=cluster.timeout)
                    report["first_attempt"] = "Done"
                except EvalTimeout as exc:
                    report["first_attempt"] = _outcome(exc)
            mark = cluster.trace.mark()
            await _roundtrip(cluster, report, initiator, online)
            report["responders"] = online
            report["roundtrip_messages"] = cluster.trace.participant_messages(mark)
            report["outcome"] = "Done" if report["roundtrip"] else "RoundtripFailed"
        elif name in ("refresh_mix_epochs", "refresh_nonzero_dealer"):
            await _refresh_scenario(name, cluster, rng, report)
        else:
            report["outcome"] = "Done"
    except InstanceAborted as exc:
        report["outcome"] = _outcome(exc)
        report["reasons"] = exc.reasons


async def _refresh_scenario(name: str, cluster: Cluster, rng: random.Random, report: dict) -> None:
    n, k = cluster.n, cluster.k
    old = {j: node.keys for j, node in cluster.nodes.items()}
    # snapshot of old shares: only the harness, playing a thief, keeps these
    old_values = {j: km.share.value for j, km in old.items()}
    x = os.urandom(48)
    before = await cluster.nodes[1].combine(cluster.default_members(1), x)
    if name == "refresh_nonzero_dealer":
        cluster.nodes[rng.randrange(1, n + 1)].behavior = NonzeroRefreshDealer()
    await cluster.refresh()
    report["refresh"] = "Done"
    after = await cluster.nodes[1].combine(cluster.default_members(1), x)
    report["output_unchanged"] = after == before
    report["epochs"] = sorted({node.keys.epoch for node in cluster.nodes.values()})
    report["old_shares_erased"] = all(km.share.value == 0 for km in old.values())
    pp = cluster.pp
    omega = pp.hash_input(x)
    members = sorted(rng.sample(range(1, n + 1), k))
    fresh = rng.choice(members)
    mixed = {j: omega ** (cluster.nodes[j].keys.share.value if j == fresh else old_values[j]) for j in members}
    report["mixed_matches"] = npr_combine(mixed, None, pp.q) == after
    ok = report["output_unchanged"] and not report["mixed_matches"]
    report["outcome"] = "Done" if ok else "RefreshBroken"


def harness_run(n: int, k: int, scenario: str = "honest", seed: int | None = None, **opts) -> dict:
    """Run one scenario end to end and return its trace."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; pick one of {', '.join(SCENARIOS)}")
    return asyncio.run(_scenario(scenario, n, k, seed, opts))

