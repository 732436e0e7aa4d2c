"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the terminal summary (see conftest.py) and, with
``-s``, as each test finishes.
"""

import asyncio
import hashlib
import itertools
import os
import random
import subprocess
import sys
import time

import pytest

import oracles
from conftest import ACCEPTANCE
from tse.bench import bench_run
from tse.dprf import npr_combine, npr_evaluate, ssnpr_combine, ssnpr_evaluate
from tse.errors import AbortReason, ProofRejected, ProtocolAborted
from tse.group import SECP256K1, GroupParams, toy_group
from tse.network.harness import (
    Cluster,
    TamperingResponder,
    encryption_message_count,
    harness_run,
    setup_message_count,
)
from tse.shamir import combine_shares, generate_shares

TOY = toy_group()
TOY_PP = GroupParams(TOY, TOY.generator(), TOY.element(9))
SECP_PP = GroupParams.from_seed(SECP256K1, b"acceptance")

pytestmark = pytest.mark.slow


def record(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (ok, detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_01_consistency_toy_group():
    t0 = time.perf_counter()
    done = retried = 0
    mismatches = 0
    rng = random.Random(1)
    while done < 50:
        ts = oracles.run_local_setup(TOY_PP, 3, 5)
        try:
            keys = oracles.run_local_test(ts)
        except ProtocolAborted as exc:
            # with q = 11 an honest sum hits 0, or the k-1 subset matches,
            # about once in eleven tries; those are rerun, nothing else is
            assert exc.reason in (AbortReason.DEGREE_TOO_LOW, AbortReason.IDENTITY_SECRET), exc
            retried += 1
            continue
        done += 1
        gammas = keys[0].gammas
        for _ in range(4):
            x = rng.randbytes(8)
            partials = {km.index: ssnpr_evaluate(TOY_PP, km.share.value, km.rand, gammas[km.index], x, km.index) for km in keys}
            outputs = {ssnpr_combine(TOY_PP, {j: partials[j] for j in K}, gammas, x) for K in itertools.combinations(partials, 3)}
            plain = {npr_combine({j: partials[j].h for j in K}, None, TOY.order) for K in itertools.combinations(partials, 3)}
            mismatches += (len(outputs) != 1) + (plain != outputs)
    elapsed = time.perf_counter() - t0
    record(1, mismatches == 0 and elapsed < 10,
           f"50 toy setups (5,3), all 10 subsets agree, mismatches={mismatches}, reruns={retried}, {elapsed:.1f}s < 10s")


def _homomorphism_checks(pp, rng, inputs=100, summands=5, n=4, k=2):
    q = pp.q
    failures = 0
    for _ in range(inputs):
        x = rng.randbytes(16)
        sks = [rng.randrange(q) for _ in range(summands)]
        prod = pp.group.product(npr_evaluate(pp, sk, x) for sk in sks)
        failures += prod != npr_evaluate(pp, sum(sks) % q, x)
        sets = [generate_shares(q, k, n, None, rng.randrange(q)).shares for _ in range(summands)]
        z = [{j: npr_evaluate(pp, sh[j], x) for j in sh} for sh in sets]
        for size in range(k, n + 1):
            for K in itertools.combinations(range(1, n + 1), size):
                left = pp.group.product(npr_combine({j: zi[j] for j in K}, None, q) for zi in z)
                right = npr_combine({j: pp.group.product(zi[j] for zi in z) for j in K}, None, q)
                failures += left != right
    return failures


def test_criterion_02_key_homomorphism():
    t0 = time.perf_counter()
    rng = random.Random(2)
    failures = _homomorphism_checks(TOY_PP, rng) + _homomorphism_checks(SECP_PP, rng)
    elapsed = time.perf_counter() - t0
    record(2, failures == 0 and elapsed < 30,
           f"both homomorphism properties, 5 summands x 100 inputs, toy + secp256k1, failures={failures}, {elapsed:.1f}s < 30s")


def test_criterion_03_toy_oracle_values():
    omega = TOY.element(2)
    z1, z2 = npr_evaluate(TOY_PP, 7, omega), npr_evaluate(TOY_PP, 9, omega)
    combined = npr_combine({1: z1, 2: z2}, None, 11).value
    secret = combine_shares({1: 5, 2: 7}, 13)
    ok = (z1.value, z2.value) == (13, 6) and combined == 9 == pow(2, 5, 23) and secret == 3
    record(3, ok, f"partials ({z1.value}, {z2.value}) combine to {combined}; shares (1,5),(2,7) mod 13 give {secret}")


def test_criterion_04_strong_correctness():
    rng = random.Random(4)
    fields = ["h", "c", "u", "u_prime"]

    async def main():
        rejected = wrong = other = 0
        async with Cluster(4, 2, seed=4, record_messages=False) as cluster:
            await cluster.setup()
            honest = cluster.nodes[1].behavior
            messages = [os.urandom(32) for _ in range(20)]
            stored = [(m, await cluster.encrypt(1, m)) for m in messages]
            for i in range(1000):
                initiator = rng.randrange(1, 5)
                members = [initiator] + rng.sample([j for j in range(1, 5) if j != initiator], 1)
                cheater = members[1]
                cluster.nodes[cheater].behavior = TamperingResponder(seed=rng.randrange(2**32), field_name=rng.choice(fields))
                try:
                    if i % 2 == 0:
                        await cluster.encrypt(initiator, os.urandom(32), members)
                        other += 1
                    else:
                        m, c = stored[i % len(stored)]
                        back = await cluster.decrypt(initiator, c, members)
                        wrong += back != m
                        other += back == m
                except ProofRejected as exc:
                    rejected += exc.issuer == cheater
                finally:
                    cluster.nodes[cheater].behavior = honest
        return rejected, wrong, other

    rejected, wrong, other = asyncio.run(main())
    record(4, rejected == 1000 and wrong == 0 and other == 0,
           f"1000 single-field tampers over encrypt/decrypt sessions: ProofRejected {rejected}/1000, wrong plaintexts {wrong}")


def test_criterion_05_dkg_abort_soundness():
    rng = random.Random(5)
    lines = []
    ok = True
    for n, k in [(4, 2), (6, 3), (5, 4)]:
        aborted = sum(
            harness_run(n, k, "malicious_dealer_high_degree", seed=rng.randrange(2**32), record_messages=False)["outcome"]
            == "Aborted(DegreeTooHigh)"
            for _ in range(200)
        )
        completed = sum(
            harness_run(n, k, "honest", seed=rng.randrange(2**32), record_messages=False)["outcome"] == "Done"
            for _ in range(200)
        )
        ok &= aborted == 200 and completed == 200
        lines.append(f"({n},{k}) abort {aborted}/200 honest {completed}/200")
    corner = sum(
        harness_run(n, n, "malicious_dealer_high_degree", seed=rng.randrange(2**32), record_messages=False)["outcome"] == "Done"
        for n in (2, 3, 4)
        for _ in range(10)
    )
    ok &= corner == 30
    lines.append(f"k=n high-degree dealer completes {corner}/30")
    record(5, ok, "; ".join(lines))


def test_criterion_06_proactive_refresh():
    inputs = [hashlib.sha256(b"fixed input %d" % i).digest() for i in range(100)]
    rng = random.Random(6)

    async def main():
        async with Cluster(5, 3, seed=6, record_messages=False) as cluster:
            await cluster.setup()
            old = {j: node.keys.share.value for j, node in cluster.nodes.items()}
            before = [await cluster.nodes[1].combine([1, 2, 3], x) for x in inputs]
            await cluster.refresh()
            after = [await cluster.nodes[5].combine([5, 4, 2], x) for x in inputs]
            new = {j: node.keys.share.value for j, node in cluster.nodes.items()}
        return old, new, before, after

    old, new, before, after = asyncio.run(main())
    unchanged = sum(a == b for a, b in zip(before, after))
    mixed_failed = 0
    q = SECP_PP.q
    for i in range(100):
        members = rng.sample(range(1, 6), 3)
        fresh = set(rng.sample(members, rng.randrange(1, 3)))
        partials = {j: npr_evaluate(SECP_PP, new[j] if j in fresh else old[j], inputs[i]) for j in members}
        mixed_failed += npr_combine(partials, None, q) != after[i]
    record(6, unchanged == 100 and mixed_failed == 100,
           f"outputs unchanged on {unchanged}/100 inputs; mixed-epoch subsets fail {mixed_failed}/100")


def test_criterion_07_message_counts():
    bad = []
    for n in range(3, 9):
        report = harness_run(n, 2, "honest", seed=n, record_messages=False)
        if report["setup_messages"] != setup_message_count(n):
            bad.append(("setup", n, report["setup_messages"]))

    async def enc(n, k):
        async with Cluster(n, k, seed=n * 10 + k, record_messages=False) as cluster:
            await cluster.setup()
            counts = []
            for initiator in (1, n):
                mark = cluster.trace.mark()
                await cluster.encrypt(initiator, b"count me")
                counts.append(cluster.trace.participant_messages(mark))
            return counts

    grid = [(3, 1), (3, 2), (3, 3), (5, 2), (5, 4), (8, 3), (8, 8)]
    for n, k in grid:
        for got in asyncio.run(enc(n, k)):
            if got != encryption_message_count(k):
                bad.append(("encrypt", n, k, got))
    record(7, not bad,
           f"setup = n(n-1) + n + 2n^2 = 3n^2 for n=3..8; encryption = 2k on {len(grid)} (n,k) pairs; mismatches={bad}")


def test_criterion_08_scaling_trends():
    enc = bench_run("2", [12, 18, 24], runs=30, ops=["encrypt"], seed=8)
    lat = [enc.find("encrypt", n).latency_ms for n in (12, 18, 24)]
    spread = max(lat) / min(lat) - 1
    setup = bench_run("n/3", [12, 24], runs=30, ops=["setup"], seed=8)
    ratio = setup.find("setup", 24).latency_ms / setup.find("setup", 12).latency_ms
    record(8, spread < 0.2 and ratio > 2.5,
           "encrypt k=2 median ms " + "/".join(f"{v:.1f}" for v in lat)
           + f" (spread {100 * spread:.1f}% < 20%); setup k=n/3 n=24/n=12 ratio {ratio:.2f} > 2.5")


def test_criterion_09_hash_to_curve_vectors():
    matched = 0
    for msg, x, y in oracles.SUITE_VECTORS:
        ours = SECP256K1.hash_to_group(msg, oracles.SUITE_DST).affine()
        matched += ours == (x, y) == oracles.hash_to_curve(msg, oracles.SUITE_DST)
    total = len(oracles.SUITE_VECTORS)
    record(9, matched == total, f"{matched}/{total} published suite vectors match both implementations")


def test_criterion_10_cli_roundtrip(tmp_path):
    env = dict(os.environ, TSE_PASSPHRASE="acceptance passphrase")

    def tse(*args):
        return subprocess.run([sys.executable, "-m", "tse.cli", *args], capture_output=True, env=env, timeout=300)

    state = tmp_path / "state"
    m = os.urandom(1024)
    (tmp_path / "m").write_bytes(m)
    steps = [
        tse("setup", "--n", "4", "--k", "2", "--out", str(state)),
        tse("encrypt", "--state", str(state), "--in", str(tmp_path / "m"), "--out", str(tmp_path / "c")),
        tse("decrypt", "--state", str(state), "--in", str(tmp_path / "c"), "--out", str(tmp_path / "back"), "--participants", "2,4"),
    ]
    roundtrip = all(s.returncode == 0 for s in steps) and (tmp_path / "back").read_bytes() == m
    raw = bytearray((tmp_path / "c").read_bytes())
    raw[len(raw) // 2] ^= 0x40
    (tmp_path / "bad").write_bytes(bytes(raw))
    tampered = tse("decrypt", "--state", str(state), "--in", str(tmp_path / "bad"), "--out", str(tmp_path / "never"))
    record(10, roundtrip and tampered.returncode == 1 and not (tmp_path / "never").exists(),
           f"1 KiB roundtrip {'ok' if roundtrip else 'FAILED'}; tampered ciphertext exit code {tampered.returncode}")
