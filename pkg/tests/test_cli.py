import csv
import io
import json
import os
import shutil
import subprocess
import sys

import pytest

from tse.cli import main

PASS = "correct horse"


@pytest.fixture(scope="module")
def state(tmp_path_factory):
    d = tmp_path_factory.mktemp("state")
    os.environ["TSE_PASSPHRASE"] = PASS
    assert main(["setup", "--n", "4", "--k", "2", "--out", str(d / "s"), "--timeout", "10"]) == 0
    return d / "s"


def test_setup_writes_public_state_and_key_stores(state):
    public = json.loads((state / "public.json").read_text())
    assert (public["k"], public["n"]) == (2, 4)
    for j in range(1, 5):
        path = state / f"participant-{j}.key"
        assert path.exists()
        assert oct(path.stat().st_mode & 0o777) == "0o600"
    # the key stores are encrypted at rest
    assert b"share" not in (state / "participant-1.key").read_bytes()


def test_roundtrip_1kib(state, tmp_path):
    m = os.urandom(1024)
    (tmp_path / "m").write_bytes(m)
    assert main(["encrypt", "--state", str(state), "--in", str(tmp_path / "m"), "--out", str(tmp_path / "c")]) == 0
    assert main([
        "decrypt", "--state", str(state), "--in", str(tmp_path / "c"), "--out", str(tmp_path / "back"),
        "--participants", "3,4",
    ]) == 0
    assert (tmp_path / "back").read_bytes() == m


def test_tampered_ciphertext_exits_1(state, tmp_path, capsys):
    (tmp_path / "m").write_bytes(b"attack at dawn")
    assert main(["encrypt", "--state", str(state), "--in", str(tmp_path / "m"), "--out", str(tmp_path / "c")]) == 0
    raw = bytearray((tmp_path / "c").read_bytes())
    raw[-1] ^= 1
    (tmp_path / "c").write_bytes(bytes(raw))
    capsys.readouterr()
    code = main(["decrypt", "--state", str(state), "--in", str(tmp_path / "c"), "--out", str(tmp_path / "back")])
    assert code == 1
    assert "commitment mismatch" in capsys.readouterr().err
    assert not (tmp_path / "back").exists()


def test_wrong_passphrase_exits_1(state, tmp_path):
    (tmp_path / "m").write_bytes(b"x")
    code = main([
        "encrypt", "--state", str(state), "--in", str(tmp_path / "m"), "--out", str(tmp_path / "c"),
        "--passphrase", "wrong",
    ])
    assert code == 1


def test_usage_errors_exit_2(state, tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["setup", "--n", "4"])
    assert err.value.code == 2
    assert main(["setup", "--n", "2", "--k", "3", "--out", str(tmp_path / "x")]) == 2
    assert main(["encrypt", "--state", str(state), "--in", str(tmp_path / "missing"), "--out", str(tmp_path / "c")]) == 2


def test_refresh_keeps_decrypting(state, tmp_path):
    copy = tmp_path / "copy"
    shutil.copytree(state, copy)
    (tmp_path / "m").write_bytes(b"before refresh")
    assert main(["encrypt", "--state", str(copy), "--in", str(tmp_path / "m"), "--out", str(tmp_path / "c")]) == 0
    assert main(["refresh", "--state", str(copy)]) == 0
    assert json.loads((copy / "public.json").read_text())["epoch"] == 1
    assert main(["decrypt", "--state", str(copy), "--in", str(tmp_path / "c"), "--out", str(tmp_path / "back")]) == 0
    assert (tmp_path / "back").read_bytes() == b"before refresh"


def test_bench_csv(capsys):
    assert main(["bench", "--k-rule", "2", "--n-list", "3,4", "--runs", "10", "--ops", "encrypt,decrypt", "--seed", "1"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert list(rows[0]) == ["k", "n", "op", "runs", "throughput_ops_s", "latency_ms", "messages"]
    assert [(r["n"], r["op"]) for r in rows] == [("3", "encrypt"), ("3", "decrypt"), ("4", "encrypt"), ("4", "decrypt")]
    assert all(r["messages"] == "4" and r["runs"] == "10" for r in rows)


def test_simulate(capsys, tmp_path):
    assert main(["simulate", "--scenario", "malicious_dealer_high_degree", "--seed", "1", "--trace", str(tmp_path / "t.json")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["outcome"] == "Aborted(DegreeTooHigh)"
    assert json.loads((tmp_path / "t.json").read_text())["events"]


def test_console_entry_point(tmp_path):
    env = dict(os.environ, TSE_PASSPHRASE=PASS)
    out = subprocess.run(
        [sys.executable, "-m", "tse.cli", "simulate", "--scenario", "honest", "--n", "3", "--k", "2", "--seed", "2"],
        capture_output=True, text=True, env=env, timeout=120,
    )
    assert out.returncode == 0, out.stderr
    assert json.loads(out.stdout)["outcome"] == "Done"
