"""Sequential setup/encrypt/decrypt benchmarks over the in-process cluster."""

from __future__ import annotations

import asyncio
import csv
import io
import os
import re
import statistics
import time
from dataclasses import asdict, dataclass, field

from .errors import TSEError
from .network.harness import Cluster

CSV_COLUMNS = ["k", "n", "op", "runs", "throughput_ops_s", "latency_ms", "messages"]
OPERATIONS = ("setup", "encrypt", "decrypt")
WARMUP = 3


def k_from_rule(rule: str, n: int) -> int:
    """Threshold for n participants: "3", "n", "n/2", "n-1", "2n/3" ..."""
    rule = rule.replace(" ", "")
    m = re.fullmatch(r"(\d*)n(?:/(\d+))?(?:-(\d+))?", rule)
    if rule.isdigit():
        k = int(rule)
    elif m:
        mult = int(m.group(1) or 1)
        div = int(m.group(2) or 1)
        k = mult * n // div - int(m.group(3) or 0)
    else:
        raise ValueError(f"cannot parse k rule {rule!r}")
    k = max(1, k)
    if k > n:
        raise ValueError(f"k rule {rule!r} gives k={k} > n={n}")
    return k


@dataclass
class BenchRow:
    k: int
    n: int
    op: str
    runs: int
    throughput_ops_s: float
    latency_ms: float
    messages: int
    aborts: int = 0
    samples_ms: list[float] = field(default_factory=list, repr=False)


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            d = asdict(row)
            d["throughput_ops_s"] = f"{row.throughput_ops_s:.3f}"
            d["latency_ms"] = f"{row.latency_ms:.3f}"
            writer.writerow({c: d[c] for c in CSV_COLUMNS})
        return buf.getvalue()

    def find(self, op: str, n: int, k: int | None = None) -> BenchRow:
        for row in self.rows:
            if row.op == op and row.n == n and (k is None or row.k == k):
                return row
        raise KeyError((op, n, k))


def _row(k, n, op, samples, messages, aborts) -> BenchRow:
    total = sum(samples)
    return BenchRow(
        k=k,
        n=n,
        op=op,
        runs=len(samples),
        throughput_ops_s=len(samples) / total if total else 0.0,
        # median keeps a single scheduler hiccup from dominating the cell
        latency_ms=1000 * statistics.median(samples) if samples else 0.0,
        messages=messages,
        aborts=aborts,
        samples_ms=[1000 * s for s in samples],
    )


async def _bench_cell(n: int, k: int, runs: int, ops, group: str, transport: str, seed, msg_len: int) -> list[BenchRow]:
    rows = []
    cluster = Cluster(n, k, group=group, seed=seed, transport=transport, record_messages=False)
    async with cluster:
        trace = cluster.trace
        samples, counts, aborts = [], set(), 0
        need_setup = "setup" in ops
        for _ in range(runs if need_setup else 1):
            mark = trace.mark()
            t0 = time.perf_counter()
            try:
                await cluster.setup()
            except TSEError:
                aborts += 1
                continue
            samples.append(time.perf_counter() - t0)
            counts.add(trace.participant_messages(mark))
        if need_setup:
            rows.append(_row(k, n, "setup", samples, _single(counts), aborts))

        # untimed warm-up so the first cell does not pay for cold caches
        for _ in range(WARMUP if ("encrypt" in ops or "decrypt" in ops) else 0):
            await cluster.encrypt(1, os.urandom(msg_len))

        ciphertexts = []
        samples, counts, aborts = [], set(), 0
        encrypt_runs = runs if ("encrypt" in ops or "decrypt" in ops) else 0
        for _ in range(encrypt_runs):
            m = os.urandom(msg_len)
            mark = trace.mark()
            t0 = time.perf_counter()
            try:
                c = await cluster.encrypt(1, m)
            except TSEError:
                aborts += 1
                continue
            samples.append(time.perf_counter() - t0)
            counts.add(trace.participant_messages(mark))
            ciphertexts.append((m, c))
        if "encrypt" in ops:
            rows.append(_row(k, n, "encrypt", samples, _single(counts), aborts))

        if "decrypt" in ops:
            samples, counts, aborts = [], set(), 0
            for i, (m, c) in enumerate(ciphertexts):
                # decrypt from a different participant when there is one
                requester = 1 + (i % n) if n > 1 else 1
                mark = trace.mark()
                t0 = time.perf_counter()
                try:
                    back = await cluster.decrypt(requester, c)
                except TSEError:
                    aborts += 1
                    continue
                samples.append(time.perf_counter() - t0)
                counts.add(trace.participant_messages(mark))
                if back != m:
                    raise AssertionError("decryption returned a different message")
            rows.append(_row(k, n, "decrypt", samples, _single(counts), aborts))
    return rows


def _single(counts: set[int]) -> int:
    if len(counts) > 1:
        raise AssertionError(f"message count varied between runs: {sorted(counts)}")
    return next(iter(counts), 0)


def bench_run(
    k_rule: str,
    n_list,
    runs: int = 10,
    ops=OPERATIONS,
    group: str = "secp256k1",
    transport: str = "memory",
    seed: int | None = None,
    msg_len: int = 32,
) -> BenchReport:
    if runs < 10:
        raise ValueError("runs must be at least 10")
    unknown = set(ops) - set(OPERATIONS)
    if unknown:
        raise ValueError(f"unknown operations {sorted(unknown)}")
    report = BenchReport()
    for n in n_list:
        k = k_from_rule(str(k_rule), n)
        report.rows += asyncio.run(_bench_cell(n, k, runs, tuple(ops), group, transport, seed, msg_len))
    return report
