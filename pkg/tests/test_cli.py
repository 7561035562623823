"""CLI surface tests, run in-process through main(argv)."""

import json

import pytest

import visgov.scenarios
import visgov.teleop
from visgov.cli import build_parser, main
from visgov.moas import MoasBuildError

from tests.conftest import CACHE_DIR

# Ts=0.1 keeps every path on the small cached admissible set.
COARSE = {"plant": {"Ts": 0.1}, "duration": 4.0}


@pytest.fixture()
def coarse_config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(COARSE))
    return p


def common_args(coarse_config, extra=()):
    return ["--config", str(coarse_config), "--cache-dir", str(CACHE_DIR), *extra]


def test_parser_defaults():
    args = build_parser().parse_args(["run"])
    assert args.scenario == "circle"
    assert args.rg is None and args.tag is None
    args = build_parser().parse_args(["serve", "--port", "9000", "--as-fast-as-possible"])
    assert args.port == 9000 and args.as_fast_as_possible


def test_unknown_scenario_rejected(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--scenario", "figure8"])
    assert "invalid choice" in capsys.readouterr().err


def test_build_moas_from_cache(coarse_config, quad_coarse, capsys):
    code = main(["build-moas", *common_args(coarse_config)])
    assert code == 0
    out = capsys.readouterr().out
    assert f"k*={quad_coarse.moas.k_star}" in out
    assert f"rows={quad_coarse.moas.n_rows}" in out


def test_run_writes_artifacts(coarse_config, tmp_path, capsys):
    out_dir = tmp_path / "runs"
    code = main(["run", *common_args(coarse_config, ["--out-dir", str(out_dir)])])
    assert code == 0
    assert (out_dir / "circle_log.csv").exists()
    summary = json.loads((out_dir / "circle_summary.json").read_text())
    assert summary["max_violation"] <= 0.0
    # stdout carries the same summary plus the artifact paths
    out = capsys.readouterr().out
    assert "circle_log.csv" in out
    assert json.loads(out[: out.rindex("}") + 1]) == summary


def test_run_rg_off_tag(coarse_config, tmp_path):
    out_dir = tmp_path / "runs"
    code = main(
        ["run", *common_args(coarse_config, ["--out-dir", str(out_dir), "--rg", "off"])]
    )
    assert code == 0
    assert (out_dir / "circle_rgoff_log.csv").exists()


def test_run_infeasible_start_exits_2(tmp_path, capsys):
    cfg = dict(COARSE, x0=[3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(cfg))
    code = main(
        ["run", "--config", str(p), "--cache-dir", str(CACHE_DIR), "--out-dir", str(tmp_path)]
    )
    assert code == 2
    assert "exit 2" in capsys.readouterr().err


def test_run_build_failure_exits_3(coarse_config, tmp_path, monkeypatch, capsys):
    def boom(cfg, cache_dir):
        raise MoasBuildError("synthetic failure")

    monkeypatch.setattr(visgov.scenarios, "build_or_load_moas", boom)
    code = main(["run", *common_args(coarse_config, ["--out-dir", str(tmp_path)])])
    assert code == 3
    assert "synthetic failure" in capsys.readouterr().err


def test_serve_forwards_flags(coarse_config, monkeypatch):
    seen = {}

    def fake_serve(cfg, cache_dir=None, host=None, port=None, paced=True):
        seen.update(host=host, port=port, paced=paced, rg=cfg["rg"])

    monkeypatch.setattr(visgov.teleop, "serve", fake_serve)
    code = main(
        [
            "serve",
            *common_args(coarse_config),
            "--host", "0.0.0.0",
            "--port", "8123",
            "--as-fast-as-possible",
            "--rg", "off",
        ]
    )
    assert code == 0
    assert seen == {"host": "0.0.0.0", "port": 8123, "paced": False, "rg": False}
