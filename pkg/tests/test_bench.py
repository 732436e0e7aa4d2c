import pytest

from tse.bench import CSV_COLUMNS, bench_run, k_from_rule
from tse.network.harness import setup_message_count


@pytest.mark.parametrize(
    "rule,n,k",
    [("2", 6, 2), ("n", 6, 6), ("n/2", 7, 3), ("n/3", 12, 4), ("n-1", 5, 4), ("2n/3", 9, 6), ("n/3", 2, 1)],
)
def test_k_from_rule(rule, n, k):
    assert k_from_rule(rule, n) == k


def test_k_from_rule_rejects():
    with pytest.raises(ValueError):
        k_from_rule("n+1", 4)
    with pytest.raises(ValueError):
        k_from_rule("7", 4)


def test_runs_floor():
    with pytest.raises(ValueError):
        bench_run("2", [3], runs=5)
    with pytest.raises(ValueError):
        bench_run("2", [3], runs=10, ops=["sign"])


def test_bench_report_shape_and_counts():
    report = bench_run("2", [3, 4], runs=10, seed=3)
    assert len(report.rows) == 6
    header = report.to_csv().splitlines()[0]
    assert header.split(",") == CSV_COLUMNS
    for n in (3, 4):
        assert report.find("setup", n).messages == setup_message_count(n)
        assert report.find("encrypt", n).messages == 4
        assert report.find("decrypt", n).messages == 4
        assert all(r.aborts == 0 for r in report.rows)
    row = report.find("encrypt", 4)
    assert row.latency_ms > 0 and row.throughput_ops_s > 0 and len(row.samples_ms) == 10


def test_setup_count_grows_quadratically():
    assert setup_message_count(8) / setup_message_count(4) == 4
    a = bench_run("2", [4], runs=10, ops=["setup"], seed=1)
    b = bench_run("2", [4], runs=10, ops=["setup"], seed=2)
    assert a.rows[0].messages == b.rows[0].messages
