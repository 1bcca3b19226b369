import numpy as np
import pytest
from click.testing import CliRunner

from condreach.cli import main
from condreach.fixtures import fixture_path, fixture_text

INVENT = str(fixture_path("invent.ctmc"))
INVENT1 = str(fixture_path("invent1.evidence"))
WEIGHTS = "prop:'empty'@0.1"


@pytest.fixture()
def runner():
    return CliRunner()


def _points_evidence(tmp_path):
    path = tmp_path / "points.evidence"
    path.write_text(
        "evidence\n"
        "obs nonempty @ 0..0\n"
        "obs nonempty @ 1\n"
        "obs empty @ 2\n"
        "obs nonempty @ 3\n"
    )
    return str(path)


def test_analyze_smoke(runner, tmp_path):
    out = tmp_path / "trace.csv"
    res = runner.invoke(
        main,
        ["analyze", INVENT, INVENT1, "--weights", WEIGHTS,
         "--max-iters", "3", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    assert res.output.startswith("lower=")
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("iter,elapsed_s,lower,upper")
    assert len(lines) == 4


def test_analyze_trace_to_stdout(runner):
    res = runner.invoke(
        main,
        ["analyze", INVENT, INVENT1, "--weights", WEIGHTS,
         "--max-iters", "1"],
    )
    assert res.exit_code == 0
    assert "iter,elapsed_s" in res.output
    summary = res.output.strip().splitlines()[-1]
    assert summary.startswith("lower=0.025166")


def test_precise_and_likelihood(runner, tmp_path):
    ev = _points_evidence(tmp_path)
    res = runner.invoke(main, ["precise", INVENT, ev, "--weights", WEIGHTS])
    assert res.exit_code == 0
    assert float(res.output) == pytest.approx(0.07862016331147531, abs=1e-11)
    res = runner.invoke(main, ["likelihood", INVENT, ev])
    assert res.exit_code == 0
    assert float(res.output) == pytest.approx(0.11548486256744492, abs=1e-11)


def test_precise_rejects_windows(runner):
    res = runner.invoke(
        main, ["precise", INVENT, INVENT1, "--weights", WEIGHTS]
    )
    assert res.exit_code == 3
    assert "precisely timed" in res.output


def test_sample(runner, tmp_path):
    out = tmp_path / "env.csv"
    res = runner.invoke(
        main,
        ["sample", INVENT, INVENT1, "--weights", WEIGHTS, "-n", "20",
         "--seed", "1", "--out", str(out)],
    )
    assert res.exit_code == 0
    assert "min=" in res.output and "max=" in res.output
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "sample_idx,t_1,t_2,t_3,t_4,value"
    assert len(lines) == 21


def test_weights_from_file(runner, tmp_path):
    wf = tmp_path / "w.txt"
    wf.write_text("s0 1.0\ns1 0.5\ns2 0.25  # comment\n")
    res = runner.invoke(
        main,
        ["analyze", INVENT, INVENT1, "--weights", f"file:{wf}",
         "--max-iters", "1"],
    )
    assert res.exit_code == 0


def test_exit_code_parse_error(runner, tmp_path):
    bad = tmp_path / "bad.ctmc"
    bad.write_text("not a model\n")
    res = runner.invoke(
        main, ["analyze", str(bad), INVENT1, "--weights", WEIGHTS]
    )
    assert res.exit_code == 2

    bad_ev = tmp_path / "bad.evidence"
    bad_ev.write_text("evidence\nobs empty @ 2..1\n")
    res = runner.invoke(
        main, ["analyze", INVENT, str(bad_ev), "--weights", WEIGHTS]
    )
    assert res.exit_code == 2

    res = runner.invoke(
        main, ["analyze", str(tmp_path / "missing.ctmc"), INVENT1,
               "--weights", WEIGHTS]
    )
    assert res.exit_code == 2


def test_exit_code_semantic_error(runner, tmp_path):
    ev = tmp_path / "unknown.evidence"
    ev.write_text("evidence\nobs green @ 1..2\n")
    res = runner.invoke(
        main, ["analyze", INVENT, str(ev), "--weights", WEIGHTS]
    )
    assert res.exit_code == 3

    res = runner.invoke(
        main, ["analyze", INVENT, INVENT1, "--weights", "prop:'green'@0.1"]
    )
    assert res.exit_code == 3

    res = runner.invoke(
        main, ["analyze", INVENT, INVENT1, "--weights", "nope"]
    )
    assert res.exit_code == 3

    ordered = tmp_path / "order.evidence"
    ordered.write_text("evidence\nobs empty @ 1..3\nobs empty @ 2..4\n")
    res = runner.invoke(
        main, ["analyze", INVENT, str(ordered), "--weights", WEIGHTS]
    )
    assert res.exit_code == 3


def test_exit_code_numeric_error(runner, tmp_path):
    # Zero-likelihood evidence: initial state is nonempty but the point
    # observation at time 0 demands empty.
    ev = tmp_path / "impossible.evidence"
    ev.write_text("evidence\nobs empty @ 0..0\n")
    res = runner.invoke(
        main, ["analyze", INVENT, str(ev), "--weights", WEIGHTS]
    )
    assert res.exit_code == 4


def test_missing_weight_option(runner):
    res = runner.invoke(main, ["analyze", INVENT, INVENT1])
    assert res.exit_code == 2  # click usage error
