"""Participant nodes and the untrusted coordinator.

Every node runs one dispatcher loop that processes its inbox in order, so a
transcript only ever has one writer. Work that has to wait (the test phase,
answering an evaluation request that arrives before the commitments are
public) runs in its own task and only reads the transcript until it finishes.
"""

from __future__ import annotations

import asyncio
import hashlib
import itertools
import logging
from dataclasses import dataclass, field

from ..dkg import InstanceConfig, KeyMaterial, Phase, RefreshTranscript, SetupTranscript
from ..dprf import PartialEval, ssnpr_combine
from ..encryption import Ciphertext, decrypt_finalize, encrypt_commit, encrypt_finalize
from ..errors import (
    AbortReason,
    ChannelError,
    DecodeError,
    EpochMismatch,
    EvalTimeout,
    InstanceAborted,
    MissingDeal,
    ProtocolAborted,
)
from ..group import GroupParams
from . import messages as M
from .channel import SecureChannel
from .storage import GAMMA, PARAMS, PublicStorage
from .trace import Trace

log = logging.getLogger(__name__)

COORDINATOR = 0


@dataclass(frozen=True)
class ParticipantIdentity:
    id: bytes
    index: int
    static_public: bytes
    address: tuple[str, int] | None = None


class Behavior:
    """Adversarial hooks used by the harness; the base class is honest."""

    offline = False

    def deal_coefficients(self, q: int, k: int, refresh: bool):
        return None

    def tamper_partial(self, partial: PartialEval, mode: M.EvalMode) -> PartialEval:
        return partial

    def eval_input(self, x: bytes) -> bytes:
        return x


HONEST = Behavior()


@dataclass
class _Session:
    transcript: SetupTranscript | RefreshTranscript
    test_prompted: bool = False
    test_task: asyncio.Task | None = None
    watchdog: asyncio.Task | None = None
    aggregated: asyncio.Event = field(default_factory=asyncio.Event)
    finished: asyncio.Event = field(default_factory=asyncio.Event)


class ParticipantNode:
    def __init__(
        self,
        identity: ParticipantIdentity,
        roster: list[ParticipantIdentity],
        pp: GroupParams,
        storage: PublicStorage,
        trace: Trace | None = None,
        behavior: Behavior | None = None,
        timeout: float = 2.0,
        keys: KeyMaterial | None = None,
    ):
        self.identity = identity
        self.index = identity.index
        self.roster = roster
        self.pp = pp
        self.storage = storage
        self.trace = trace or Trace(record_messages=False)
        self.behavior = behavior or HONEST
        self.timeout = timeout
        self.keys = keys
        self.channels: dict[int, SecureChannel] = {}
        self.sessions: dict[bytes, _Session] = {}
        self.outcomes: dict[bytes, str] = {}
        self._pending: dict[bytes, list] = {}
        self._early_tests: set[bytes] = set()
        self._inbox: asyncio.Queue = asyncio.Queue()
        self._futures: dict[int, tuple[int, asyncio.Future]] = {}
        self._ids = itertools.count(1)
        self._tasks: set[asyncio.Task] = set()
        self._runner: asyncio.Task | None = None

    # plumbing

    @property
    def roster_ids(self) -> tuple[bytes, ...]:
        return tuple(p.id for p in self.roster)

    def attach(self, peer: int, channel: SecureChannel) -> None:
        self.channels[peer] = channel
        self._spawn(self._reader(peer, channel))

    def start(self) -> None:
        if self._runner is None:
            self._runner = asyncio.get_running_loop().create_task(self._dispatch())

    async def stop(self) -> None:
        for task in list(self._tasks) + ([self._runner] if self._runner else []):
            task.cancel()
        await asyncio.gather(*self._tasks, return_exceptions=True)
        for ch in self.channels.values():
            await ch.close()

    def _spawn(self, coro) -> asyncio.Task:
        task = asyncio.get_running_loop().create_task(coro)
        self._tasks.add(task)
        task.add_done_callback(self._tasks.discard)
        return task

    async def _reader(self, peer: int, channel: SecureChannel) -> None:
        while True:
            try:
                raw = await channel.recv()
                msg = M.ProtocolMessage.decode(raw)
            except (EOFError, asyncio.CancelledError):
                return
            except (ChannelError, DecodeError) as exc:
                log.warning("node %d: dropping frame from %d: %s", self.index, peer, exc)
                continue
            await self._inbox.put((peer, msg))

    async def send(self, peer: int, kind: M.MessageKind, instance: bytes, body: bytes) -> None:
        msg = M.ProtocolMessage(kind, instance, body)
        data = msg.encode()
        self.trace.message(kind, self.index, peer, len(data), instance)
        channel = self.channels.get(peer)
        if channel is None:
            raise ChannelError(f"no channel from {self.index} to {peer}")
        await channel.send(data)

    async def _dispatch(self) -> None:
        while True:
            peer, msg = await self._inbox.get()
            try:
                await self._handle(peer, msg)
            except asyncio.CancelledError:
                raise
            except Exception:  # one bad message must not kill the node
                log.exception("node %d: error handling %s from %d", self.index, msg.kind.name, peer)

    async def _handle(self, peer: int, msg: M.ProtocolMessage) -> None:
        kind = msg.kind
        if kind is M.MessageKind.PHASE_PROMPT and peer == COORDINATOR:
            await self._on_prompt(msg)
        elif kind is M.MessageKind.ABORT and peer == COORDINATOR:
            self._on_abort(msg.instance, msg.body.decode(errors="replace"))
        elif kind is M.MessageKind.DEAL_SHARE and peer != COORDINATOR:
            await self._on_deal(peer, msg)
        elif kind is M.MessageKind.EVAL_REQUEST and peer != COORDINATOR:
            if not self.behavior.offline:
                self._spawn(self._answer(peer, msg))
        elif kind is M.MessageKind.EVAL_RESPONSE and peer != COORDINATOR:
            self._on_response(peer, msg)
        else:
            log.warning("node %d: unexpected %s from %d", self.index, kind.name, peer)

    def _phase(self, instance: bytes, phase: str, detail: str = "") -> None:
        self.trace.phase(self.index, instance, phase, detail)

    # setup and refresh

    async def _on_prompt(self, msg: M.ProtocolMessage) -> None:
        prompt, epoch, k = M.parse_prompt(msg.body)
        instance = msg.instance
        if instance in self.outcomes:
            return
        if prompt in (M.Prompt.SETUP_DEAL, M.Prompt.REFRESH_DEAL):
            if instance not in self.sessions:
                await self._begin(instance, prompt, epoch, k)
        else:
            session = self.sessions.get(instance)
            if session is None:
                # out-of-order prompt; remember it, the test still waits for
                # every commitment to be public
                self._early_tests.add(instance)
                return
            session.test_prompted = True
            self._maybe_start_test(instance, session)

    async def _begin(self, instance: bytes, prompt: M.Prompt, epoch: int, k: int) -> None:
        refresh = prompt is M.Prompt.REFRESH_DEAL
        try:
            if refresh:
                if self.keys is None:
                    raise ProtocolAborted(AbortReason.EPOCH_MISMATCH, detail="no key to refresh")
                if epoch != self.keys.epoch + 1:
                    raise EpochMismatch(self.keys.epoch + 1, epoch)
                config = InstanceConfig(self.pp, k, len(self.roster), self.roster_ids, instance, epoch)
                transcript = RefreshTranscript(config, self.keys)
            else:
                config = InstanceConfig(self.pp, k, len(self.roster), self.roster_ids, instance, 0)
                transcript = SetupTranscript(config, self.index)
        except (ProtocolAborted, ValueError) as exc:
            reason = exc if isinstance(exc, ProtocolAborted) else ProtocolAborted(AbortReason.COORDINATOR, detail=str(exc))
            await self._report(instance, reason)
            return
        session = _Session(transcript, test_prompted=instance in self._early_tests)
        self._early_tests.discard(instance)
        self.sessions[instance] = session
        self._phase(instance, Phase.DEALING.value)
        coeffs = self.behavior.deal_coefficients(self.pp.q, k, refresh)
        shares = transcript.deal(coeffs)
        field = self.pp.group.field
        for j, value in shares.shares.items():
            if j != self.index:
                await self.send(j, M.MessageKind.DEAL_SHARE, instance, M.deal_body(self.index, epoch, field.encode(value)))
        session.watchdog = self._spawn(self._deal_watchdog(instance, session))
        for peer, msg in self._pending.pop(instance, []):
            await self._on_deal(peer, msg)

    async def _deal_watchdog(self, instance: bytes, session: _Session) -> None:
        await asyncio.sleep(self.timeout)
        t = session.transcript
        if t.phase is Phase.DEALING:
            await self._abort_session(instance, session, MissingDeal(t.missing_deals()[0]))

    async def _on_deal(self, peer: int, msg: M.ProtocolMessage) -> None:
        instance = msg.instance
        session = self.sessions.get(instance)
        if session is None:
            if instance not in self.outcomes:
                self._pending.setdefault(instance, []).append((peer, msg))
            return
        sender, epoch, raw = M.parse_deal(msg.body)
        t = session.transcript
        if sender != peer or epoch != t.config.epoch or t.phase is not Phase.DEALING:
            log.warning("node %d: rejecting deal from %d", self.index, peer)
            return
        t.receive_deal(sender, self.pp.group.field.decode(raw))
        if t.deals_complete:
            await self._aggregate(instance, session)

    async def _aggregate(self, instance: bytes, session: _Session) -> None:
        t = session.transcript
        _, gamma = t.aggregate()
        if session.watchdog:
            session.watchdog.cancel()
        self._phase(instance, Phase.COMMITTING.value)
        encoded = gamma.encode()
        self.storage.put(instance, GAMMA, self.index, encoded)
        self.storage.put(instance, PARAMS, self.index, hashlib.sha256(t.config.public_record()).digest())
        session.aggregated.set()
        await self.send(COORDINATOR, M.MessageKind.COMMITMENT_POSTED, instance, M.commitment_body(self.index, encoded))
        self._maybe_start_test(instance, session)

    def _maybe_start_test(self, instance: bytes, session: _Session) -> None:
        if session.test_prompted and session.aggregated.is_set() and session.test_task is None:
            session.test_task = self._spawn(self._run_test(instance, session))

    async def _load_commitments(self, instance: bytes, t) -> None:
        n = t.config.n
        gammas = await self.storage.wait_for(instance, GAMMA, n, self.timeout)
        for j, raw in gammas.items():
            if j not in t.gammas:
                t.record_commitment(j, self.pp.group.decode(raw))

    async def _run_test(self, instance: bytes, session: _Session) -> None:
        t = session.transcript
        try:
            try:
                # all commitments must be public before anyone tests
                await self._load_commitments(instance, t)
                records = await self.storage.wait_for(instance, PARAMS, t.config.n, self.timeout)
            except TimeoutError as exc:
                raise ProtocolAborted(AbortReason.TIMEOUT, detail=str(exc)) from None
            if len(set(records.values())) != 1:
                raise ProtocolAborted(AbortReason.COORDINATOR, detail="participants disagree on public parameters")
            x = t.begin_test()
            self._phase(instance, Phase.TESTING.value)
            everyone = list(range(1, t.config.n + 1))
            try:
                answers = await self.request_partial_evals(everyone, x, instance, M.EvalMode.TEST)
            except EvalTimeout as exc:
                raise ProtocolAborted(AbortReason.TIMEOUT, exc.missing[0]) from None
            expected = 2 if isinstance(t, RefreshTranscript) else 1
            for j, partials in answers.items():
                if len(partials) != expected:
                    raise ProtocolAborted(AbortReason.PROOF_REJECTED, j)
                t.record_partial(j, partials if isinstance(t, RefreshTranscript) else partials[0])
            keys = t.finish()
            if isinstance(t, RefreshTranscript):
                keys = t.commit()
        except ProtocolAborted as exc:
            await self._abort_session(instance, session, exc)
            return
        except DecodeError as exc:
            await self._abort_session(instance, session, ProtocolAborted(AbortReason.PROOF_REJECTED, detail=str(exc)))
            return
        self.keys = keys
        self.outcomes[instance] = "Done"
        self._phase(instance, Phase.DONE.value)
        session.finished.set()
        await self._report(instance, None)

    async def _abort_session(self, instance: bytes, session: _Session, exc: ProtocolAborted) -> None:
        if instance in self.outcomes:
            return
        t = session.transcript
        if t.phase is not Phase.ABORTED:
            t.fail(exc)
        self.outcomes[instance] = str(exc)
        self._phase(instance, Phase.ABORTED.value, str(exc))
        session.finished.set()
        await self._report(instance, exc)

    def _on_abort(self, instance: bytes, reason: str) -> None:
        session = self.sessions.get(instance)
        if session is None:
            self.outcomes.setdefault(instance, f"Aborted: {reason}")
            self._pending.pop(instance, None)
            return
        if self.keys is not None and self.keys.config.instance_id == instance:
            # aborted instances are discarded even if they passed locally
            self.keys = None if isinstance(session.transcript, SetupTranscript) else self.keys
        if instance not in self.outcomes or self.outcomes[instance] == "Done":
            self.outcomes[instance] = f"Aborted: {reason}"
            if session.transcript.phase is not Phase.ABORTED:
                session.transcript.fail(ProtocolAborted(AbortReason.COORDINATOR, detail=reason))
            self._phase(instance, Phase.ABORTED.value, reason)
        for task in (session.test_task, session.watchdog):
            if task and not task.done():
                task.cancel()
        session.finished.set()

    async def _report(self, instance: bytes, exc: ProtocolAborted | None) -> None:
        if exc is not None:
            self.outcomes.setdefault(instance, str(exc))
        body = M.report_body(self.index, exc is None, "" if exc is None else str(exc))
        try:
            await self.send(COORDINATOR, M.MessageKind.PHASE_REPORT, instance, body)
        except ChannelError:
            pass

    # evaluations

    async def _answer(self, peer: int, msg: M.ProtocolMessage) -> None:
        request_id, mode, x = M.parse_eval_request(msg.body)
        status, payload = await self._evaluate(peer, msg.instance, mode, x)
        body = M.eval_response_body(request_id, status, payload)
        try:
            await self.send(peer, M.MessageKind.EVAL_RESPONSE, msg.instance, body)
        except ChannelError:
            pass

    async def _evaluate(self, peer: int, instance: bytes, mode: M.EvalMode, x: bytes) -> tuple[M.Status, bytes]:
        if not 1 <= peer <= len(self.roster):
            return M.Status.REFUSED, b"not in roster"
        x = self.behavior.eval_input(x)
        if mode is M.EvalMode.KEY:
            if self.keys is None or self.keys.config.instance_id != instance:
                return M.Status.REFUSED, b"epoch mismatch"
            partial = self.behavior.tamper_partial(self.keys.evaluate(x), mode)
            return M.Status.OK, partial.to_bytes()
        session = self.sessions.get(instance)
        if session is None:
            return M.Status.REFUSED, b"unknown instance"
        t = session.transcript
        try:
            # phase gating: answer test requests only once every commitment is public
            await asyncio.wait_for(session.aggregated.wait(), self.timeout)
            await self._load_commitments(instance, t)
        except (asyncio.TimeoutError, TimeoutError):
            return M.Status.REFUSED, b"commitments not public"
        if t.phase is Phase.ABORTED:
            return M.Status.REFUSED, b"aborted"
        out = t.evaluate(x)
        if isinstance(out, tuple):
            return M.Status.OK, b"".join(self.behavior.tamper_partial(z, mode).to_bytes() for z in out)
        return M.Status.OK, self.behavior.tamper_partial(out, mode).to_bytes()

    def _on_response(self, peer: int, msg: M.ProtocolMessage) -> None:
        request_id, status, payload = M.parse_eval_response(msg.body)
        entry = self._futures.get(request_id)
        if entry is None or entry[0] != peer or entry[1].done():
            return
        entry[1].set_result((status, payload))

    def _decode_partials(self, payload: bytes) -> list[PartialEval]:
        group = self.pp.group
        size = 2 + group.element_size + 3 * group.scalar_size
        if not payload or len(payload) % size:
            raise DecodeError("bad partial evaluation payload")
        return [PartialEval.from_bytes(group, payload[i:i + size]) for i in range(0, len(payload), size)]

    async def request_partial_evals(
        self, members, x: bytes, instance: bytes, mode: M.EvalMode = M.EvalMode.KEY, timeout: float | None = None
    ) -> dict[int, list[PartialEval]]:
        """Send EvalRequest(x) to every member concurrently and collect the answers.

        The node's own evaluation goes through the same code path and is
        counted as a loopback request/response pair.
        """
        loop = asyncio.get_running_loop()
        waiting: dict[int, asyncio.Future] = {}
        for j in members:
            rid = next(self._ids)
            fut = loop.create_future()
            waiting[j] = fut
            self._futures[rid] = (j, fut)
            body = M.eval_request_body(rid, mode, x)
            if j == self.index:
                self.trace.message(M.MessageKind.EVAL_REQUEST, j, j, 18 + len(body), instance)
                self._spawn(self._loopback(rid, instance, mode, x))
            else:
                try:
                    await self.send(j, M.MessageKind.EVAL_REQUEST, instance, body)
                except ChannelError:
                    pass
        done, _ = await asyncio.wait(list(waiting.values()), timeout=timeout or self.timeout)
        for rid in [r for r, (_, f) in self._futures.items() if f in waiting.values()]:
            del self._futures[rid]
        received, missing = {}, []
        for j, fut in waiting.items():
            if fut in done:
                status, payload = fut.result()
                if status is M.Status.OK:
                    received[j] = self._decode_partials(payload)
                    continue
            missing.append(j)
        if missing:
            raise EvalTimeout(missing, received)
        return received

    async def _loopback(self, rid: int, instance: bytes, mode: M.EvalMode, x: bytes) -> None:
        status, payload = await self._evaluate(self.index, instance, mode, x)
        body = M.eval_response_body(rid, status, payload)
        self.trace.message(M.MessageKind.EVAL_RESPONSE, self.index, self.index, 18 + len(body), instance)
        entry = self._futures.get(rid)
        if entry and not entry[1].done():
            entry[1].set_result((status, payload))

    # encryption and decryption

    def _require_keys(self, members) -> KeyMaterial:
        if self.keys is None:
            raise ProtocolAborted(AbortReason.EPOCH_MISMATCH, detail="no key material")
        if len(set(members)) < self.keys.config.k:
            raise ValueError(f"need at least k={self.keys.config.k} participants, got {len(set(members))}")
        return self.keys

    async def combine(self, members, x: bytes, timeout: float | None = None):
        keys = self._require_keys(members)
        answers = await self.request_partial_evals(members, x, keys.config.instance_id, M.EvalMode.KEY, timeout)
        partials = {j: z[0] for j, z in answers.items()}
        return ssnpr_combine(self.pp, partials, keys.gammas, x, keys.config.xs_map())

    async def encrypt(self, m: bytes, members, timeout: float | None = None) -> Ciphertext:
        self._require_keys(members)
        alpha, rho, _ = encrypt_commit(m)
        x = self.identity.id + alpha
        combined = await self.combine(members, x, timeout)
        return encrypt_finalize(m, rho, alpha, self.identity.id, combined)

    async def decrypt(self, c: Ciphertext, members, timeout: float | None = None) -> bytes:
        combined = await self.combine(members, c.dprf_input, timeout)
        return decrypt_finalize(c, combined)


@dataclass
class CoordinatorPlan:
    """How the coordinator prompts; the default is honest."""

    skip: frozenset[int] = frozenset()
    early_test: bool = False
    reverse: bool = False
    k_override: dict[int, int] = field(default_factory=dict)


@dataclass
class InstanceResult:
    instance: bytes
    reports: dict[int, str]
    done: bool


class Coordinator:
    """Prompts participants through the phases; holds no secrets."""

    def __init__(self, n: int, trace: Trace | None = None, timeout: float = 2.0):
        self.n = n
        self.trace = trace or Trace(record_messages=False)
        self.timeout = timeout
        self.channels: dict[int, SecureChannel] = {}
        self._inbox: asyncio.Queue = asyncio.Queue()
        self._tasks: set[asyncio.Task] = set()

    def attach(self, peer: int, channel: SecureChannel) -> None:
        self.channels[peer] = channel
        task = asyncio.get_running_loop().create_task(self._reader(peer, channel))
        self._tasks.add(task)

    async def _reader(self, peer: int, channel: SecureChannel) -> None:
        while True:
            try:
                msg = M.ProtocolMessage.decode(await channel.recv())
            except (EOFError, asyncio.CancelledError):
                return
            except (ChannelError, DecodeError):
                continue
            await self._inbox.put((peer, msg))

    async def stop(self) -> None:
        for task in self._tasks:
            task.cancel()
        await asyncio.gather(*self._tasks, return_exceptions=True)

    async def _send(self, peer: int, kind: M.MessageKind, instance: bytes, body: bytes) -> None:
        data = M.ProtocolMessage(kind, instance, body).encode()
        self.trace.message(kind, COORDINATOR, peer, len(data), instance)
        try:
            await self.channels[peer].send(data)
        except (ChannelError, KeyError):
            pass

    async def run(self, instance: bytes, k: int, epoch: int = 0, refresh: bool = False, plan: CoordinatorPlan | None = None):
        """Drive one setup (or refresh) instance; raises InstanceAborted unless all n report Done."""
        plan = plan or CoordinatorPlan()
        deal = M.Prompt.REFRESH_DEAL if refresh else M.Prompt.SETUP_DEAL
        test = M.Prompt.REFRESH_TEST if refresh else M.Prompt.SETUP_TEST
        order = [j for j in range(1, self.n + 1) if j not in plan.skip]
        if plan.reverse:
            order.reverse()

        def prompt_k(j: int) -> int:
            return plan.k_override.get(j, k)

        if plan.early_test:
            for j in order:
                await self._send(j, M.MessageKind.PHASE_PROMPT, instance, M.prompt_body(test, epoch, prompt_k(j)))
        for j in order:
            await self._send(j, M.MessageKind.PHASE_PROMPT, instance, M.prompt_body(deal, epoch, prompt_k(j)))

        loop = asyncio.get_running_loop()
        deadline = loop.time() + 3 * self.timeout
        posted: set[int] = set()
        reports: dict[int, str] = {}
        tested = plan.early_test
        while len(reports) < self.n:
            remaining = deadline - loop.time()
            if remaining <= 0:
                break
            try:
                peer, msg = await asyncio.wait_for(self._inbox.get(), remaining)
            except asyncio.TimeoutError:
                break
            if msg.instance != instance:
                continue
            if msg.kind is M.MessageKind.COMMITMENT_POSTED:
                posted.add(peer)
                if len(posted) == self.n and not tested:
                    tested = True
                    for j in order:
                        await self._send(j, M.MessageKind.PHASE_PROMPT, instance, M.prompt_body(test, epoch, prompt_k(j)))
            elif msg.kind is M.MessageKind.PHASE_REPORT:
                index, done, reason = M.parse_report(msg.body)
                if index == peer:
                    reports[peer] = "Done" if done else reason
        for j in range(1, self.n + 1):
            reports.setdefault(j, "Timeout")
        result = InstanceResult(instance, reports, all(r == "Done" for r in reports.values()))
        if not result.done:
            reason = next(r for r in reports.values() if r != "Done")
            for j in range(1, self.n + 1):
                await self._send(j, M.MessageKind.ABORT, instance, reason.encode()[:1024])
            raise InstanceAborted({j: r for j, r in reports.items() if r != "Done"})
        return result
