import json

import pytest

from relaysim.cli import RunManifest, main


def run(tmp_path, *argv):
    return main([*argv, "--out-dir", str(tmp_path)])


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    header = lines[1].split(",")
    return lines[0], [dict(zip(header, l.split(","))) for l in lines[2:]]


def test_rate_vs_k_outputs(tmp_path):
    assert run(tmp_path, "rate-vs-k", "--k", "2,4", "--trials", "100", "--seed", "7") == 0
    head, rows = read_csv(tmp_path / "rate_vs_k.csv")
    assert "bits/channel-use (half-duplex factor included)" in head
    assert len(rows) == 2 * 3
    manifest = RunManifest.from_json((tmp_path / "rate_vs_k.manifest.json").read_text())
    assert manifest.seed == 7 and manifest.outputs["table"].endswith("rate_vs_k.csv")
    assert RunManifest.from_json(manifest.to_json()) == manifest


def test_k1_icbs_equals_cbs(tmp_path):
    assert run(tmp_path, "rate-vs-k", "--k", "1", "--trials", "100", "--schemes", "CBS,ICBS") == 0
    _, rows = read_csv(tmp_path / "rate_vs_k.csv")
    cbs, icbs = rows
    assert {k: v for k, v in cbs.items() if k != "scheme"} == {k: v for k, v in icbs.items() if k != "scheme"}


def test_multiplexing_slopes(tmp_path):
    assert run(tmp_path, "multiplexing", "--snr-db", "10,20,30,40", "--trials", "100", "--schemes", "CBS,CU_STAR") == 0
    summary = json.loads((tmp_path / "multiplexing.manifest.json").read_text())["summary"]
    slopes = summary["slopes_bits_per_doubling"]
    assert set(slopes) == {"CBS", "CU_STAR"}
    assert slopes["CU_STAR"] == pytest.approx(1.0, rel=0.01)


def test_usage_errors(tmp_path, capsys):
    assert run(tmp_path, "multiplexing", "--snr-db", "10") == 2
    assert run(tmp_path, "validate-lemmas", "--samples", "50") == 2
    assert run(tmp_path, "rate-vs-k", "--trials", "50") == 2
    assert run(tmp_path, "rate-vs-k", "--schemes", "NOPE") == 2
    assert run(tmp_path, "rate-vs-k", "--k", "x") == 2
    assert main(["bogus"]) == 2
    assert "error" in capsys.readouterr().err


def test_beta_dist_uniform_case(tmp_path):
    assert run(tmp_path, "validate-lemmas", "--probe", "beta-dist", "--N", "1", "--K", "2") == 0
    report = json.loads((tmp_path / "lemmas.json").read_text())
    assert report["passed"] and report["checks"][0]["detail"]["target_mean"] == pytest.approx(0.5)


def test_failed_probe_exits_one(tmp_path):
    # at 10 dB and desk-scale K the leakage tail does not fall yet
    code = run(tmp_path, "validate-lemmas", "--probe", "interference-tail", "--tail-k", "16,32,64", "--tail-trials", "100")
    assert code == 1
    assert not json.loads((tmp_path / "lemmas.json").read_text())["passed"]


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"k": [2, 3], "trials": 120, "schemes": ["ICBS"]}))
    assert run(tmp_path, "rate-vs-k", "--config", str(cfg), "--trials", "100") == 0
    _, rows = read_csv(tmp_path / "rate_vs_k.csv")
    assert [r["K"] for r in rows] == ["2", "3"] and rows[0]["trials"] == "100"
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run(tmp_path, "rate-vs-k", "--config", str(cfg)) == 2


def test_seed_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("RELAYSIM_SEED", "11")
    assert run(tmp_path / "a", "rate-vs-k", "--k", "2", "--trials", "100") == 0
    assert run(tmp_path / "b", "rate-vs-k", "--k", "2", "--trials", "100", "--seed", "11") == 0
    assert (tmp_path / "a" / "rate_vs_k.csv").read_bytes() == (tmp_path / "b" / "rate_vs_k.csv").read_bytes()
    monkeypatch.setenv("RELAYSIM_SEED", "abc")
    assert run(tmp_path / "c", "rate-vs-k", "--k", "2", "--trials", "100") == 2


def test_relay_power_and_outage(tmp_path):
    assert run(tmp_path, "relay-power", "--k", "4", "--rule", "equal,inv-sqrt-k", "--trials", "100") == 0
    _, rows = read_csv(tmp_path / "relay_power.csv")
    assert float(rows[1]["gap_bits"]) > 0
    assert run(tmp_path, "rate-vs-k", "--k", "4", "--trials", "100", "--schemes", "ICBS") == 0
    _, rk = read_csv(tmp_path / "rate_vs_k.csv")
    assert rows[0]["mean_bits"] == rk[0]["mean_bits"]
    assert run(tmp_path, "outage", "--k", "4,8", "--margin-c", "2", "--trials", "100") == 0
    _, rows = read_csv(tmp_path / "outage.csv")
    assert all(0.0 <= float(r["outage"]) <= 1.0 for r in rows)


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    from relaysim import cli
    from relaysim.linalg import NumericFailure

    def boom(cfg):
        raise NumericFailure("SVD did not converge")

    monkeypatch.setattr(cli, "run_rate_vs_k", boom)
    assert run(tmp_path, "rate-vs-k", "--trials", "100") == 3
