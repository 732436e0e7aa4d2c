"""On-disk state for the CLI: a public parameter file and passphrase-encrypted key stores.

Key store layout: ``magic(8) || salt(16) || nonce(12) || AES-256-GCM(json)``
with the key derived from the passphrase by scrypt.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt

from .dkg import InstanceConfig, KeyMaterial
from .errors import TSEError
from .group import GroupParams, group_by_name
from .network.channel import StaticKey
from .shamir import SecretShare

MAGIC = b"TSEKEY01"
PUBLIC_FILE = "public.json"
STORAGE_FILE = "storage.log"


class KeyStoreError(TSEError):
    pass


def _kdf(passphrase: str, salt: bytes) -> bytes:
    return Scrypt(salt=salt, length=32, n=2**14, r=8, p=1).derive(passphrase.encode())


def seal(passphrase: str, data: bytes) -> bytes:
    salt, nonce = os.urandom(16), os.urandom(12)
    return MAGIC + salt + nonce + AESGCM(_kdf(passphrase, salt)).encrypt(nonce, data, MAGIC)


def unseal(passphrase: str, blob: bytes) -> bytes:
    if not blob.startswith(MAGIC) or len(blob) < len(MAGIC) + 28:
        raise KeyStoreError("not a key store file")
    salt = blob[8:24]
    nonce = blob[24:36]
    try:
        return AESGCM(_kdf(passphrase, salt)).decrypt(nonce, blob[36:], MAGIC)
    except InvalidTag:
        raise KeyStoreError("cannot unlock key store (wrong passphrase or corrupted file)") from None


@dataclass
class PublicState:
    group: str
    h_seed: bytes
    k: int
    n: int
    roster: list[bytes]
    static_publics: list[bytes]
    instance_id: bytes
    epoch: int
    gammas: dict[int, bytes]

    def to_json(self) -> str:
        return json.dumps(
            {
                "group": self.group,
                "h_seed": self.h_seed.hex(),
                "k": self.k,
                "n": self.n,
                "roster": [r.hex() for r in self.roster],
                "static_publics": [s.hex() for s in self.static_publics],
                "instance_id": self.instance_id.hex(),
                "epoch": self.epoch,
                "gammas": {str(j): g.hex() for j, g in sorted(self.gammas.items())},
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "PublicState":
        d = json.loads(text)
        return cls(
            group=d["group"],
            h_seed=bytes.fromhex(d["h_seed"]),
            k=d["k"],
            n=d["n"],
            roster=[bytes.fromhex(r) for r in d["roster"]],
            static_publics=[bytes.fromhex(s) for s in d["static_publics"]],
            instance_id=bytes.fromhex(d["instance_id"]),
            epoch=d["epoch"],
            gammas={int(j): bytes.fromhex(g) for j, g in d["gammas"].items()},
        )

    def params(self) -> GroupParams:
        return GroupParams.from_seed(group_by_name(self.group), self.h_seed)

    def config(self, pp: GroupParams) -> InstanceConfig:
        return InstanceConfig(pp, self.k, self.n, tuple(self.roster), self.instance_id, self.epoch)

    @classmethod
    def from_keys(cls, group: str, h_seed: bytes, keys: KeyMaterial, statics: list[StaticKey]) -> "PublicState":
        cfg = keys.config
        return cls(
            group=group,
            h_seed=h_seed,
            k=cfg.k,
            n=cfg.n,
            roster=list(cfg.roster),
            static_publics=[s.public for s in statics],
            instance_id=cfg.instance_id,
            epoch=cfg.epoch,
            gammas={j: g.encode() for j, g in keys.gammas.items()},
        )


def key_path(state_dir: Path, j: int) -> Path:
    return Path(state_dir) / f"participant-{j}.key"


def write_key_store(state_dir: Path, keys: KeyMaterial, static: StaticKey, passphrase: str) -> Path:
    field = keys.config.pp.group.field
    body = json.dumps(
        {
            "index": keys.index,
            "epoch": keys.epoch,
            "x": keys.share.x,
            "share": field.encode(keys.share.value).hex(),
            "rand": field.encode(keys.rand).hex(),
            "static_private": static.private_bytes().hex(),
        }
    ).encode()
    path = key_path(state_dir, keys.index)
    path.write_bytes(seal(passphrase, body))
    os.chmod(path, 0o600)
    return path


def read_key_store(state_dir: Path, j: int, passphrase: str, public: PublicState, pp: GroupParams):
    """Returns (KeyMaterial, StaticKey) for participant j."""
    path = key_path(state_dir, j)
    if not path.exists():
        raise KeyStoreError(f"no key store for participant {j} in {state_dir}")
    d = json.loads(unseal(passphrase, path.read_bytes()))
    if d["index"] != j:
        raise KeyStoreError(f"{path.name} belongs to participant {d['index']}")
    if d["epoch"] != public.epoch:
        raise KeyStoreError(f"{path.name} is from epoch {d['epoch']}, public state is at epoch {public.epoch}")
    field = pp.group.field
    gammas = {i: pp.group.decode(g) for i, g in public.gammas.items()}
    keys = KeyMaterial(
        public.config(pp),
        j,
        SecretShare(d["x"], field.decode(bytes.fromhex(d["share"])), d["epoch"]),
        field.decode(bytes.fromhex(d["rand"])),
        gammas,
    )
    return keys, StaticKey.from_bytes(bytes.fromhex(d["static_private"]))
