import csv
import io
import json
from pathlib import Path

import pytest

from dlckinetic.cli import DEFAULTS, config_hash, dump_config, main, parse_config
from dlckinetic.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    return lines[0], list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def read_json(path):
    obj = json.loads(path.read_text())
    assert len(obj["config_hash"]) == 16
    return obj


def test_evolve_case1(tmp_path):
    assert main(["evolve", "-c", str(CONFIGS / "case1.yaml"), "--out", str(tmp_path)]) == 0
    head, rows = read_csv(tmp_path / "trajectory.csv")
    assert "seed=none" in head
    assert float(rows[-1]["t"]) == 5.0
    assert all(abs(float(r["mean"]) - 5.0) < 1e-8 for r in rows)
    _, fp = read_csv(tmp_path / "steady_fixed_point.csv")
    assert fp[-1]["v"] == "tail"
    read_csv(tmp_path / "final.csv")


def test_evolve_growing_has_no_fixed_point(tmp_path):
    assert main(["evolve", "-c", str(CONFIGS / "case2.yaml"), "--out", str(tmp_path)]) == 0
    assert not (tmp_path / "steady_fixed_point.csv").exists()


def test_outputs_are_deterministic(tmp_path):
    args = ["mc", "-c", str(CONFIGS / "case1.yaml"), "--agents", "2000", "--t-end", "1.0"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("ensemble.csv", "mc_density.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()
    head, _ = read_csv(tmp_path / "a" / "ensemble.csv")
    assert "seed=20240601" in head
    summary = read_json(tmp_path / "a" / "summary.json")
    assert summary["seed"] == 20240601 and summary["agents"] == 2000


def test_seed_required(tmp_path, capsys):
    assert main(["mc", "--out", str(tmp_path)]) == 2
    assert "mc.seed" in capsys.readouterr().err
    assert main(["mc", "--seed", "3", "--agents", "500", "--t-end", "0.5", "--out", str(tmp_path)]) == 0
    assert read_json(tmp_path / "summary.json")["seed"] == 3


def test_seed_rejected_for_deterministic_command(tmp_path):
    assert main(["region", "--seed", "1", "--out", str(tmp_path)]) == 2


def test_wild(tmp_path):
    assert main(["wild", "--set", "solver.t_end=1.0", "--set", "solver.wild_N=30",
                 "--out", str(tmp_path)]) == 0
    w = read_json(tmp_path / "wild.json")
    assert w["N"] == 30 and 0 < w["residual"] < 1e-5
    read_csv(tmp_path / "wild.csv")


def test_steady(tmp_path):
    assert main(["steady", "-c", str(CONFIGS / "grazing_hgt.yaml"), "--set", "solver.K=300",
                 "--out", str(tmp_path)]) == 0
    chk = read_json(tmp_path / "steady_check.json")
    assert chk["mean"] == pytest.approx(5.0, abs=1e-9)
    assert chk["variance"] == pytest.approx(7.5, abs=1e-9)
    assert chk["dispersion_index"] == pytest.approx(1.5, abs=1e-9)
    assert chk["size_biased_residual"] < 1e-8
    read_csv(tmp_path / "steady.csv")


def test_grazing_and_sweep(tmp_path):
    cfg = str(CONFIGS / "grazing_hgt.yaml")
    assert main(["grazing", "-c", cfg, "--set", "grazing.zpoints=11", "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "grazing.csv")
    assert len(rows) == 4 * 11
    assert all(float(r["ghat"]) == 1.0 for r in rows if float(r["z"]) == 1.0)
    assert main(["sweep", "-c", cfg, "--set", "grazing.eps_list=[0.2, 0.1]",
                 "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "sweep.csv")
    errs = [float(r["sup_error"]) for r in rows]
    assert errs[0] > errs[1] > 0


def test_leacoulson(tmp_path):
    assert main(["leacoulson", "-c", str(CONFIGS / "leacoulson.yaml"),
                 "--set", "leacoulson.samples=20000", "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "leacoulson.csv")
    for r in rows:
        assert abs(float(r["pgf"]) - float(r["mc_pgf"])) < 4 * float(r["mc_std_error"])
    j = read_json(tmp_path / "leacoulson.json")
    assert j["pgf_slope_at_1"] == pytest.approx(j["expected_mutants"], rel=1e-3)


def test_scaling(tmp_path):
    assert main(["scaling", "-c", str(CONFIGS / "case2.yaml"), "--set", "scaling.particles=5000",
                 "--set", "scaling.iters=40", "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "moments.csv")
    assert rows[0] == {"i": "1", "m_i": "1", "finite": "true"}
    assert rows[-1]["finite"] == "false"
    j = read_json(tmp_path / "scaling.json")
    assert j["seed"] == 20240601


def test_region(tmp_path):
    assert main(["region", "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "region.csv")
    lookup = {(float(r["ex"]), float(r["ey"])): r["inside"] for r in rows}
    assert lookup[(1.0, 1.0)] == "true"
    assert lookup[(3.0, 0.1)] == "false"
    assert all(a + b > 1 for a, b in lookup)


def test_metrics(tmp_path):
    assert main(["metrics", "-c", str(CONFIGS / "case1.yaml"), "--out", str(tmp_path)]) == 0
    j = read_json(tmp_path / "summary.json")
    assert j["alpha_r"] == pytest.approx(-0.32)
    for row in j["metrics"]:
        assert row["d_r"] <= row["bound"] * (1 + 1e-6)
        assert row["d_r_star"] <= row["d_r"] * (1 + 1e-12)


def test_verify_subset(tmp_path, capsys):
    assert main(["verify", "--set", "verify.criteria=[1, 15]", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS [ 1]" in out and "PASS [15]" in out
    _, rows = read_csv(tmp_path / "verify.csv")
    assert [r["criterion"] for r in rows] == ["1", "15"]


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DLC_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["region", "--set", "region.step=0.5"]) == 0
    assert (tmp_path / "env" / "region.csv").exists()


def test_unknown_key_rejected(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("solver: {K: 10, warp: 3}\n")
    assert main(["evolve", "-c", str(bad), "--out", str(tmp_path)]) == 2
    assert "solver.warp" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        parse_config(None, ["nope.key=1"])
    with pytest.raises(ConfigError):
        parse_config("- a\n- b\n")


def test_bad_values_rejected(tmp_path):
    assert main(["evolve", "--set", "solver.K=-3", "--out", str(tmp_path)]) == 2
    assert main(["evolve", "--set", "model.family=other", "--out", str(tmp_path)]) == 2
    assert main(["evolve", "--set", "model.params.p_l=0.9", "--set", "model.params.p_d=0.5",
                 "--out", str(tmp_path)]) == 3


@pytest.mark.parametrize("name", ["case1.yaml", "case2.yaml", "grazing_hgt.yaml", "leacoulson.yaml"])
def test_config_round_trip(name):
    cfg = parse_config((CONFIGS / name).read_text())
    again = parse_config(dump_config(cfg))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_overrides_and_hash():
    base = parse_config(None)
    assert base == parse_config(dump_config(DEFAULTS))
    cfg = parse_config(None, ["solver.K=50", "model.params.p_l=0.25"])
    assert cfg["solver"]["K"] == 50
    assert cfg["model"]["params"] == {"p_l": 0.25, "p_d": 0.1, "p_h": 0.2}
    assert config_hash(cfg) != config_hash(base)


def test_print_config(capsys):
    assert main(["evolve", "--print-config", "--set", "solver.K=77"]) == 0
    assert parse_config(capsys.readouterr().out)["solver"]["K"] == 77
