"""Command-line front end.

Exit status: 0 on success, 1 when the protocol fails (abort, tampered
ciphertext, unreachable participants), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import asyncio
import hashlib
import json
import os
import sys
from pathlib import Path

from .bench import OPERATIONS, bench_run
from .encryption import Ciphertext
from .errors import TSEError
from .keystore import (
    PUBLIC_FILE,
    STORAGE_FILE,
    KeyStoreError,
    PublicState,
    read_key_store,
    write_key_store,
)
from .network.channel import StaticKey
from .network.harness import DEFAULT_SEED, SCENARIOS, Cluster, harness_run
from .network.storage import CIPHERTEXT, PublicStorage


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def _passphrase(args) -> str:
    if args.passphrase is not None:
        return args.passphrase
    value = os.environ.get(args.passphrase_env)
    if value is None:
        raise UsageError(f"no passphrase: pass --passphrase or set ${args.passphrase_env}")
    return value


def _read_roster(path: str | None, n: int) -> list[bytes]:
    if path is None:
        return [os.urandom(16) for _ in range(n)]
    ids = []
    for line in Path(path).read_text().split():
        try:
            raw = bytes.fromhex(line)
        except ValueError:
            raw = hashlib.sha256(line.encode()).digest()[:16]
        if len(raw) != 16:
            raw = hashlib.sha256(raw).digest()[:16]
        ids.append(raw)
    if len(ids) != n or len(set(ids)) != n:
        raise UsageError(f"roster file must list {n} distinct identifiers")
    return ids


def _load_public(state: Path) -> PublicState:
    path = state / PUBLIC_FILE
    if not path.exists():
        raise UsageError(f"{state} has no {PUBLIC_FILE}; run `setup` first")
    return PublicState.from_json(path.read_text())


def _restore(state: Path, members: list[int], passphrase: str, **kw) -> tuple[Cluster, PublicState]:
    public = _load_public(state)
    bad = [j for j in members if not 1 <= j <= public.n]
    if bad:
        raise UsageError(f"participants {bad} are not in the roster (1..{public.n})")
    pp = public.params()
    keys, statics = {}, [StaticKey() for _ in range(public.n)]
    for j in members:
        keys[j], statics[j - 1] = read_key_store(state, j, passphrase, public, pp)
    cluster = Cluster(
        public.n, public.k, group=public.group, h_seed=public.h_seed, identities=public.roster,
        static_keys=statics, keys=keys, storage_path=str(state / STORAGE_FILE), **kw,
    )
    return cluster, public


def _save(state: Path, cluster: Cluster, passphrase: str, group: str, h_seed: bytes) -> PublicState:
    statics = cluster.static_keys
    keys = cluster.key_material()
    public = PublicState.from_keys(group, h_seed, keys[1], statics)
    for j, km in keys.items():
        write_key_store(state, km, statics[j - 1], passphrase)
    (state / PUBLIC_FILE).write_text(public.to_json())
    return public


def cmd_setup(args) -> int:
    if not 1 <= args.k <= args.n:
        raise UsageError(f"need 1 <= k <= n, got k={args.k}, n={args.n}")
    passphrase = _passphrase(args)
    state = Path(args.out)
    state.mkdir(parents=True, exist_ok=True)
    if (state / PUBLIC_FILE).exists() and not args.force:
        raise UsageError(f"{state} already holds a key set; use --force to replace it")
    (state / STORAGE_FILE).unlink(missing_ok=True)
    roster = _read_roster(args.roster, args.n)
    statics = [StaticKey() for _ in range(args.n)]
    h_seed = DEFAULT_SEED if args.h_seed is None else args.h_seed.encode()

    async def go():
        cluster = Cluster(
            args.n, args.k, group=args.group, h_seed=h_seed, identities=roster, static_keys=statics,
            storage_path=str(state / STORAGE_FILE), timeout=args.timeout,
        )
        async with cluster:
            await cluster.setup()
            return _save(state, cluster, passphrase, args.group, h_seed)

    public = asyncio.run(go())
    print(f"setup done: n={public.n} k={public.k} epoch={public.epoch} instance={public.instance_id.hex()}")
    print(f"state written to {state}")
    return 0


def cmd_refresh(args) -> int:
    passphrase = _passphrase(args)
    state = Path(args.state)
    public = _load_public(state)

    async def go():
        cluster, _ = _restore(state, list(range(1, public.n + 1)), passphrase, timeout=args.timeout)
        async with cluster:
            await cluster.refresh()
            return _save(state, cluster, passphrase, public.group, public.h_seed)

    new = asyncio.run(go())
    print(f"refresh done: epoch {public.epoch} -> {new.epoch}")
    return 0


def _members(text: str | None, public: PublicState) -> list[int]:
    members = _int_list(text) if text else list(range(1, public.k + 1))
    if len(set(members)) < public.k:
        raise UsageError(f"need at least k={public.k} distinct participants, got {members}")
    return members


def cmd_encrypt(args) -> int:
    passphrase = _passphrase(args)
    state = Path(args.state)
    public = _load_public(state)
    members = _members(args.participants, public)
    data = Path(args.input).read_bytes()
    if not data:
        raise UsageError("cannot encrypt an empty file")

    async def go():
        cluster, _ = _restore(state, members, passphrase, timeout=args.timeout)
        async with cluster:
            return await cluster.encrypt(members[0], data, members)

    c = asyncio.run(go())
    wire = c.to_bytes()
    Path(args.out).write_bytes(wire)
    PublicStorage(state / STORAGE_FILE).put(hashlib.sha256(wire).digest()[:16], CIPHERTEXT, members[0], wire)
    print(f"encrypted {len(data)} bytes -> {args.out} ({len(wire)} bytes)")
    return 0


def cmd_decrypt(args) -> int:
    passphrase = _passphrase(args)
    state = Path(args.state)
    public = _load_public(state)
    members = _members(args.participants, public)
    c = Ciphertext.from_bytes(Path(args.input).read_bytes())

    async def go():
        cluster, _ = _restore(state, members, passphrase, timeout=args.timeout)
        async with cluster:
            return await cluster.decrypt(members[0], c, members)

    m = asyncio.run(go())
    Path(args.out).write_bytes(m)
    print(f"decrypted {len(m)} bytes -> {args.out}")
    return 0


def cmd_bench(args) -> int:
    report = bench_run(
        args.k_rule, args.n_list, runs=args.runs, ops=args.ops, group=args.group,
        transport=args.transport, seed=args.seed,
    )
    text = report.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args) -> int:
    trace = harness_run(args.n, args.k, args.scenario, seed=args.seed, group=args.group)
    if args.trace:
        Path(args.trace).write_text(json.dumps(trace, indent=1, default=str))
    summary = {k: v for k, v in trace.items() if k not in ("events", "storage_values", "secrets")}
    print(json.dumps(summary, default=str))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tse", description="Dealer-free threshold symmetric encryption.")
    sub = parser.add_subparsers(dest="command", required=True)

    def secret_opts(p):
        p.add_argument("--passphrase", help="key store passphrase (prefer the environment variable)")
        p.add_argument("--passphrase-env", default="TSE_PASSPHRASE", help="environment variable holding the passphrase")
        p.add_argument("--timeout", type=float, default=30.0, help="per-phase deadline in seconds")

    p = sub.add_parser("setup", help="run the dealer-free setup and write key stores")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--roster", help="file with n participant identifiers (hex or names), one per line")
    p.add_argument("--out", required=True, help="state directory")
    p.add_argument("--group", default="secp256k1", choices=["secp256k1", "toy-23-11"])
    p.add_argument("--h-seed", help="public seed for the second Pedersen generator")
    p.add_argument("--force", action="store_true", help="overwrite an existing state directory")
    secret_opts(p)
    p.set_defaults(func=cmd_setup)

    for name, func, helptext in (
        ("encrypt", cmd_encrypt, "encrypt a file with k participants"),
        ("decrypt", cmd_decrypt, "decrypt a ciphertext file with k participants"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--state", default=".", help="state directory written by setup")
        p.add_argument("--in", dest="input", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--participants", help="comma-separated participant indices; the first one initiates")
        secret_opts(p)
        p.set_defaults(func=func)

    p = sub.add_parser("refresh", help="proactively refresh every key share")
    p.add_argument("--state", default=".")
    secret_opts(p)
    p.set_defaults(func=cmd_refresh)

    p = sub.add_parser("bench", help="benchmark setup/encrypt/decrypt, CSV on stdout")
    p.add_argument("--k-rule", default="n/2", help='threshold rule, e.g. "2", "n/2", "n/3", "n-1"')
    p.add_argument("--n-list", type=_int_list, default=[4, 6, 12])
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--ops", type=lambda s: s.split(","), default=list(OPERATIONS))
    p.add_argument("--group", default="secp256k1", choices=["secp256k1", "toy-23-11"])
    p.add_argument("--transport", default="memory", choices=["memory", "tcp"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="run a harness scenario and print its outcome")
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seed", type=int)
    p.add_argument("--group", default="secp256k1", choices=["secp256k1", "toy-23-11"])
    p.add_argument("--trace", help="write the full JSON trace here")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except KeyStoreError as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return 1
    except TSEError as exc:
        print(f"{parser.prog}: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
