import csv
import io
import json

import numpy as np
import pytest

from degenlab import cli


def _cfg(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def _out(tmp_path, sub="out"):
    return {"dir": str(tmp_path / sub)}


def test_verify_default_suite_exits_zero(tmp_path, capsys):
    path = _cfg(tmp_path, "v.json", {"cases": 1, "output": _out(tmp_path)})
    assert cli.run("verify", path) == 0
    lines = (tmp_path / "out" / "verify.jsonl").read_text().splitlines()
    assert len(lines) >= 9 and all(json.loads(line)["pass"] for line in lines)
    rows = list(csv.reader(open(tmp_path / "out" / "verify_summary.csv")))
    assert rows[-1][-1] == f"{len(lines)}/{len(lines)}"
    assert "checks passed" in capsys.readouterr().out


def test_verify_failing_check_exits_two(tmp_path):
    # the uncompleted square relation fails for f = x1 y1
    data = {
        "model": {"generator": "dirichlet-identity", "n": 1},
        "checks": [{"identity": "langevin", "function": {"family": "polynomial", "terms": [[[1, 1], 1.0]]},
                    "select": ["langevin-square"]}],
        "output": _out(tmp_path),
    }
    assert cli.run("verify", _cfg(tmp_path, "v.json", data)) == 2


def test_negative_eigenvalue_names_key(tmp_path, capsys):
    data = {"spectrum": {"eigenvalues": [0.1, -0.2]}, "output": _out(tmp_path)}
    assert cli.run("verify", _cfg(tmp_path, "v.json", data)) == 1
    assert "spectrum.eigenvalues.1" in capsys.readouterr().err


@pytest.mark.parametrize(
    "command,data,key",
    [
        ("verify", {"bogus": 1}, "bogus"),
        ("assemble", {"operator": "L"}, "degree"),
        ("assemble", {"operator": "Q", "degree": 2}, "operator"),
        ("simulate", {"n_modes": 1, "dt": -1.0, "ensemble": 10, "steps": 5}, "dt"),
        ("moreau", {"potentials": [{"kind": "abs", "extra": 1}]}, "potentials.0"),
        ("verify", {"checks": [{"identity": "ibp", "axis": 7}], "model": {"generator": "dirichlet-identity", "n": 2}},
         "checks.0.axis"),
    ],
)
def test_config_errors_name_the_key(tmp_path, capsys, command, data, key):
    data.setdefault("output", _out(tmp_path))
    assert cli.run(command, _cfg(tmp_path, "c.json", data)) == 1
    assert key in capsys.readouterr().err


def test_unreadable_and_malformed_config(tmp_path, capsys):
    assert cli.run("verify", tmp_path / "missing.json") == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.run("verify", bad) == 1
    assert "not valid JSON" in capsys.readouterr().err
    assert cli.main(["nosuchcommand", "x"]) == 1


def test_assemble_resource_limit(tmp_path, capsys):
    data = {"operator": "L", "degree": 30, "output": _out(tmp_path)}
    assert cli.run("assemble", _cfg(tmp_path, "a.json", data)) == 1
    assert "resource limit" in capsys.readouterr().err


def test_assemble_writes_matrix(tmp_path):
    data = {"model": {"generator": "dirichlet-identity", "n": 1}, "operator": "L", "degree": 4, "csv": True,
            "output": {**_out(tmp_path), "prefix": "a"}}
    assert cli.run("assemble", _cfg(tmp_path, "a.json", data)) == 0
    d = tmp_path / "out"
    L = np.load(d / "a_L.npy")
    assert L.shape == (15, 15)
    np.testing.assert_allclose(np.load(d / "a_L_gram.npy"), np.eye(15), atol=1e-12)
    rec = json.loads((d / "a.jsonl").read_text())
    assert rec["pass"] and rec["basis_size"] == 15
    assert (d / "a_L.csv").exists()


def test_spectrum_checks(tmp_path):
    data = {"model": {"generator": "dirichlet-identity", "n": 1}, "operator": "N",
            "potential": {"kind": "composite", "phi": "sqrt1p", "delta": 2}, "degree": 4, "samples": 3,
            "output": _out(tmp_path)}
    assert cli.run("spectrum", _cfg(tmp_path, "s.json", data)) == 0
    d = tmp_path / "out"
    eig = np.load(d / "spectrum_eigenvalues.npy")
    assert eig.real.max() <= 1e-8
    checks = [json.loads(line)["check"] for line in (d / "spectrum.jsonl").read_text().splitlines()]
    assert checks == ["dissipativity", "resolvent-contraction", "semigroup-contraction"]


def test_simulate_small(tmp_path):
    data = {"n_modes": 1, "dt": 2e-3, "T": 6.0, "ensemble": 1500, "seed": 4, "rel_tol": 0.15,
            "output": _out(tmp_path)}
    assert cli.run("simulate", _cfg(tmp_path, "s.json", data)) == 0
    d = tmp_path / "out"
    states = np.load(d / "simulate_states.npy")
    assert states.shape[0] == 1500 and states.shape[-1] == 2
    assert np.load(d / "simulate_times.npy").size == states.shape[1]
    assert (d / "simulate_mode1_timeseries.csv").exists()


def test_simulate_requires_horizon(tmp_path, capsys):
    data = {"n_modes": 1, "dt": 1e-3, "ensemble": 10, "output": _out(tmp_path)}
    assert cli.run("simulate", _cfg(tmp_path, "s.json", data)) == 1
    assert "steps" in capsys.readouterr().err


def test_moreau_builtin_potentials(tmp_path):
    data = {"n": 2, "points": 12, "output": _out(tmp_path),
            "potentials": [{"kind": "quadratic"}, {"kind": "abs"},
                           {"kind": "composite", "phi": "sqrt1p", "delta": 2}]}
    assert cli.run("moreau", _cfg(tmp_path, "m.json", data)) == 0
    recs = [json.loads(line) for line in (tmp_path / "out" / "moreau.jsonl").read_text().splitlines()]
    assert len(recs) == 12 and all(r["pass"] for r in recs)


def test_reports_are_byte_identical_across_runs_and_workers(tmp_path, monkeypatch):
    checks = [{"identity": "ibp", "function": {"family": "random_trig", "seed": 3},
               "function2": {"family": "random_polynomial", "seed": 4}, "axis": 1},
              {"identity": "reg-N0", "function": {"family": "random_polynomial", "seed": 5}},
              {"identity": "ibp", "method": "mc", "budget": 5000}]
    outs = []
    for i, workers in enumerate(["1", "1", "3"]):
        monkeypatch.setenv(cli.WORKERS_ENV, workers)
        data = {"checks": checks, "seed": 11, "output": _out(tmp_path, f"o{i}")}
        assert cli.run("verify", _cfg(tmp_path, f"v{i}.json", data)) == 0
        outs.append((tmp_path / f"o{i}" / "verify.jsonl").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_bad_worker_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.WORKERS_ENV, "many")
    data = {"checks": [{"identity": "reg-N0"}], "output": _out(tmp_path)}
    assert cli.run("verify", _cfg(tmp_path, "v.json", data)) == 1
    assert cli.WORKERS_ENV in capsys.readouterr().err


def _report(tag, ok, err=1e-12):
    return json.dumps({"identity_tag": tag, "n": 2, "degree": 3, "abs_err": err, "tolerance": 1e-10, "pass": ok})


def test_summary_empty_stream():
    text, code = cli.report_summary([])
    assert text.strip() == ",".join(cli.ver.SUMMARY_COLUMNS) and code == 0


def test_summary_single_passing_report():
    text, code = cli.report_summary([_report("ibp", True)])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[1][0] == "ibp" and rows[1][-1] == "true" and code == 0


def test_summary_mixed_stream_footer_recount():
    flags = [True, False, True, True, False]
    lines = [_report(f"t{i}", ok) for i, ok in enumerate(flags)]
    text, code = cli.report_summary(lines)
    rows = list(csv.reader(io.StringIO(text)))
    body = rows[1:-1]
    recount = sum(r[-1] == "true" for r in body)
    assert rows[-1] == ["pass-rate", "", "", "", "", f"{recount}/{len(body)}"]
    assert recount == 3 and code == 2


def test_summary_malformed_line(tmp_path, capsys):
    stream = tmp_path / "r.jsonl"
    stream.write_text(_report("ibp", True) + "\n{broken\n" + json.dumps({"pass": True}) + "\n")
    assert cli.main(["summary", str(stream)]) == 1
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert [r[0] for r in rows[1:]] == ["ibp", "error", "error", "pass-rate"]
    assert rows[2][-1].startswith("line 2")
