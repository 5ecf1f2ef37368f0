import json
import math

import pytest

from orbitlab.cli import main
from orbitlab.enumeration import load_elements


def run(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_enumerate_prints_counts(capsys):
    rc, out, _ = run(capsys, "enumerate", "--T", "3")
    assert rc == 0 and out.strip() == "20"
    rc, out, _ = run(capsys, "enumerate", "--T", "1")
    assert rc == 0 and out.strip() == "0"
    rc, out, _ = run(capsys, "enumerate", "--T", "100", "--filter", "gamma0:2")
    assert rc == 0
    # oracle: the elementwise definition of the congruence filter
    from orbitlab.enumeration import enumerate_ball

    manual = sum(1 for g in enumerate_ball(100) if g.c % 2 == 0)
    assert int(out.strip()) == manual


def test_enumerate_dump(tmp_path, capsys):
    path = str(tmp_path / "dump.i64")
    rc, out, _ = run(capsys, "enumerate", "--T", "30", "--dump", path, "--out", str(tmp_path / "c.json"))
    assert rc == 0
    arr, sidecar = load_elements(path)
    assert sidecar["count"] == arr.shape[0] == int(out.splitlines()[0])
    doc = json.loads((tmp_path / "c.json").read_text())
    assert doc["count"] == arr.shape[0]
    assert set(doc["meta"]) == {"seed", "configHash", "version"}


def test_exit_codes(tmp_path, capsys):
    rc, _, err = run(capsys, "exponent")  # missing --u/--v
    assert rc == 2 and "config error" in err
    rc, _, err = run(capsys, "survey", "--tau", "0.73", "--pairs", "1")
    assert rc == 2
    rc, _, err = run(capsys, "approx", "--u", "1.1,1.2", "--v", "1.3,1.4", "--budgets", "1e19:2e19:2")
    assert rc == 3 and "BudgetOverflow" in err
    rc, _, _ = run(capsys, "enumerate", "--T", "3", "--workers", "0")
    assert rc == 2


def test_approx_csv_format(tmp_path, capsys):
    path = str(tmp_path / "trace.csv")
    rc, _, _ = run(capsys, "approx", "--u", "1.41,1.73", "--v", "1.2,1.5", "--budgets", "16:4096:2", "--out", path)
    assert rc == 0
    lines = open(path).read().splitlines()
    meta = [l for l in lines if l.startswith("#")]
    assert any("seed=" in l for l in meta) and any("version=" in l for l in meta)
    body = [l for l in lines if not l.startswith("#")]
    assert body[0] == "T,dist,norm,a,b,c,d"
    assert len(body) == 1 + 9
    dists = [float(l.split(",")[1]) for l in body[1:]]
    assert all(b <= a for a, b in zip(dists, dists[1:]))


def test_exponent_replay_and_exact_hit(tmp_path, capsys):
    rows = ["T,dist,norm,a,b,c,d"]
    for k in range(8, 24):
        T = 2.0**k
        rows.append(f"{T:.17g},{T**-0.5:.17g},3,1,1,0,1")
    trace_path = tmp_path / "replay.csv"
    trace_path.write_text("\n".join(rows) + "\n")
    out_path = str(tmp_path / "est.json")
    rc, _, _ = run(capsys, "exponent", "--replay", str(trace_path), "--out", out_path)
    assert rc == 0
    doc = json.loads(open(out_path).read())
    assert doc["muHat"] == pytest.approx(0.5, abs=1e-9)
    assert doc["muHatFrobenius"] == pytest.approx(1.0, abs=1e-9)
    # exact hit: target on the orbit
    rc, _, _ = run(
        capsys, "exponent", "--u", "1.5,1.25", "--v", "1.5,1.25",
        "--budgets", "16:65536:2", "--out", out_path,
    )
    assert rc == 0
    doc = json.loads(open(out_path).read())
    assert doc["exactHit"] is True and doc["muHat"] == math.inf


def test_survey_outputs(tmp_path, capsys):
    path = str(tmp_path / "survey.csv")
    rc, _, _ = run(
        capsys, "survey", "--mode", "exponents", "--pairs", "4",
        "--budgets", "256:1048576:2", "--seed", "5", "--out", path,
    )
    assert rc == 0
    body = [l for l in open(path).read().splitlines() if not l.startswith("#")]
    assert body[0].startswith("index,u1,u2,v1,v2,muHat,mu,muHatFrobenius")
    assert len(body) == 5
    summary = json.loads(open(path + ".summary.json").read())
    assert summary["theory"]["frobenius"]["anyTarget"] == [pytest.approx(1 / 3), 0.5]
    assert summary["theory"]["trace"]["anyTarget"] == [pytest.approx(1 / 6), 0.25]
    # fixed-target mode
    rc, out, _ = run(
        capsys, "survey", "--mode", "exponents", "--pairs", "2",
        "--budgets", "256:65536:2", "--v", "1.3,0.8", "--seed", "5",
    )
    assert rc == 0
    rows = [l for l in out.splitlines() if l and l[0].isdigit()]
    for r in rows[:2]:
        fields = r.split(",")
        assert float(fields[3]) == 1.3 and float(fields[4]) == 0.8


def test_survey_uniform_mode(tmp_path, capsys):
    path = str(tmp_path / "uniform.json")
    rc, _, _ = run(
        capsys, "survey", "--mode", "uniform", "--omega", "1.0,1.5,1.0,1.5",
        "--eta", "0.15", "--kmax", "1024", "--samples", "2", "--seed", "3", "--out", path,
    )
    assert rc == 0
    doc = json.loads(open(path).read())
    assert doc["summary"]["n"] == 2
    assert len(doc["perSample"]) == 2


def test_hit_times_report(tmp_path, capsys):
    path = str(tmp_path / "hits.json")
    rc, _, _ = run(
        capsys, "hit-times", "--eta", "0.25", "--kmax", "4096",
        "--samples", "3", "--seed", "11", "--out", path,
    )
    assert rc == 0
    doc = json.loads(open(path).read())
    assert doc["summary"]["n"] == 3
    assert all("levels" in p for p in doc["perSample"])


def test_tau_fraction_strings(capsys, tmp_path):
    for tau, lo in (("6/64", (1 - 2 * 6 / 64) / 3), ("7/64", (1 - 2 * 7 / 64) / 3)):
        path = str(tmp_path / "s.csv")
        rc, _, _ = run(
            capsys, "survey", "--pairs", "1", "--budgets", "256:65536:2",
            "--tau", tau, "--seed", "1", "--out", path,
        )
        assert rc == 0
        summary = json.loads(open(path + ".summary.json").read())
        assert summary["theory"]["frobenius"]["anyTarget"][0] == pytest.approx(lo)


@pytest.mark.parametrize(
    "argv",
    [
        ("enumerate", "--T", "40", "--out", "OUT"),
        ("approx", "--u", "1.41,1.73", "--v", "1.2,1.5", "--budgets", "16:1024:2", "--out", "OUT"),
        ("exponent", "--u", "1.31,1.77", "--v", "1.5,1.25", "--budgets", "256:262144:2", "--out", "OUT"),
        ("survey", "--pairs", "2", "--budgets", "256:65536:2", "--seed", "9", "--out", "OUT"),
        ("hit-times", "--eta", "0.3", "--kmax", "1024", "--samples", "2", "--seed", "4", "--out", "OUT"),
        ("ergodic-variance", "--delta", "0.15", "--Ts", "16:256:4", "--samples", "400", "--seed", "2", "--out", "OUT"),
        ("miss-rate", "--delta", "0.2", "--Ts", "16:256:4", "--samples", "400", "--seed", "2", "--out", "OUT"),
        ("matcoef", "--delta", "0.15", "--ts", "1:64:4", "--samples", "400", "--seed", "2", "--out", "OUT"),
    ],
    ids=lambda a: a[0],
)
def test_rerun_byte_identical(tmp_path, capsys, argv):
    p1, p2 = str(tmp_path / "run1.out"), str(tmp_path / "run2.out")
    a1 = [x if x != "OUT" else p1 for x in argv]
    a2 = [x if x != "OUT" else p2 for x in argv]
    assert main(a1) == 0
    assert main(a2) == 0
    capsys.readouterr()
    b1, b2 = open(p1, "rb").read(), open(p2, "rb").read()
    assert b1 == b2 and len(b1) > 0
