import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from qadv.cli import main
from qadv.embed import DataSpec, sample_dataset
from qadv.experiment import (
    config_from_dict,
    fixed_computational_povm,
    load_config,
    render_svg_from_csv,
    run_experiment,
)
from qadv.io import complex_to_pairs, load_povm, povm_to_dict, write_json

PRESETS = Path(__file__).resolve().parents[1] / "src" / "qadv" / "presets"


def small_config(tmp_path, **extra):
    raw = {
        "attack": {"p": "1", "epsilon": 0.08},
        "bound": {"delta": 0.8, "Delta": 0.05},
        "experiment": {"T_grid": [10, 20]},
        "mc": {"num_datasets": 6, "num_sigma": 64, "seed": 99},
        "outputs": {
            "csv_path": str(tmp_path / "out.csv"),
            "json_path": str(tmp_path / "out.json"),
            "svg_path": str(tmp_path / "out.svg"),
        },
    }
    raw.update(extra)
    return raw


def write_toml(path, raw):
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return f'"{v}"'
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        return repr(v)

    lines = []
    for section, table in raw.items():
        lines.append(f"[{section}]")
        for k, v in table.items():
            lines.append(f"{k} = {fmt(v)}")
        lines.append("")
    Path(path).write_text("\n".join(lines))


class TestBoundCommand:
    def test_example_values(self, capsys):
        rc = main(["bound", "--I2", "1", "--K", "2", "--T", "100", "--delta", "0.8"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["base"] == pytest.approx(0.53537, abs=1e-5)

    def test_with_epsilon(self, capsys):
        rc = main(["bound", "--I2", "1", "--K", "2", "--T", "100", "--delta", "0.8",
                   "--epsilon", "0.08", "--p", "1", "--Delta", "0.05"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["increment"] == pytest.approx(0.022627, abs=1e-6)
        assert out["valid"] is True

    def test_invalid_delta_exit_2(self, capsys):
        assert main(["bound", "--I2", "1", "--T", "100", "--delta", "2.0"]) == 2

    def test_unknown_flag_exit_1(self):
        assert main(["bound", "--I2", "1", "--T", "100", "--no-such-flag"]) == 1


class TestMiCommand:
    def test_section6_value_snapshot(self, capsys):
        rc = main(["mi", "--theta", "0.7853981633974483,0.7853981633974483,0.7853981633974483",
                   "--q", "0.05"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert 0.0 < out["I2_bits"] < 2.0
        # regression snapshot for the synthetic configuration
        assert out["I2_bits"] == pytest.approx(0.7512151005, abs=1e-6)
        assert out["Delta_q_over_d"] == pytest.approx(0.025, abs=1e-9)


class TestAttackCommand:
    def test_roundtrip(self, tmp_path, capsys):
        write_json(tmp_path / "state.json", {"state": complex_to_pairs(np.diag([0.7, 0.3]))})
        write_json(tmp_path / "povm.json", povm_to_dict(fixed_computational_povm()))
        rc = main(["attack", "--state", str(tmp_path / "state.json"),
                   "--povm", str(tmp_path / "povm.json"),
                   "--label", "0", "--p", "1", "--epsilon", "0.2"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["gain"] == pytest.approx(0.1, abs=1e-9)
        assert out["solver_used"] == "closed_form"

    def test_missing_state_file_exit_2(self, tmp_path):
        write_json(tmp_path / "povm.json", povm_to_dict(fixed_computational_povm()))
        rc = main(["attack", "--state", str(tmp_path / "nope.json"),
                   "--povm", str(tmp_path / "povm.json"),
                   "--label", "0", "--p", "1", "--epsilon", "0.1"])
        assert rc == 2


class TestRademacherCommand:
    def test_csv_schema(self, tmp_path):
        out = tmp_path / "r.csv"
        rc = main(["rademacher", "--T", "6", "--seed", "3", "--num-datasets", "4",
                   "--epsilon", "0.05", "--p", "1", "--out", str(out)])
        assert rc == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert set(rows[0]) == {"T", "mode", "value", "stderr", "num_sigma",
                                "num_datasets", "epsilon", "p"}
        assert rows[0]["mode"] == "exhaustive_sigma"
        assert len(rows) == 2  # adversarial row plus its paired clean row

    def test_seed_required(self):
        assert main(["rademacher", "--T", "6"]) == 1


class TestTrainCommand:
    def test_outputs(self, tmp_path):
        data = DataSpec()
        ds = sample_dataset(data, 16, seed=10)
        ds.save_csv(tmp_path / "train.csv")
        rc = main(["train", "--data", str(tmp_path / "train.csv"), "--seed", "4",
                   "--epsilon", "0.05", "--p", "1", "--max-outer-iters", "15",
                   "--num-restarts", "2",
                   "--out-povm", str(tmp_path / "povm.json"),
                   "--out-curve", str(tmp_path / "curve.csv")])
        assert rc == 0
        povm = load_povm(tmp_path / "povm.json")
        assert povm.num_classes == 2
        with open(tmp_path / "curve.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert float(rows[-1]["adversarial_training_risk"]) <= float(
            rows[0]["adversarial_training_risk"]
        ) + 1e-9


class TestExperimentCommand:
    def test_missing_config_exit_2(self):
        assert main(["experiment", "--config", "definitely_missing.toml"]) == 2

    def test_run_and_outputs(self, tmp_path):
        cfg_path = tmp_path / "cfg.toml"
        write_toml(cfg_path, small_config(tmp_path))
        assert main(["experiment", "--config", str(cfg_path)]) == 0
        with open(tmp_path / "out.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["T"] for r in rows] == ["10", "20"]
        assert rows[0]["valid_regime"] == "true"
        payload = json.loads((tmp_path / "out.json").read_text())
        assert payload["metadata"]["seed"] == 99
        assert payload["metadata"]["gen_error_convention"] == "mean_absolute"
        assert (tmp_path / "out.svg").exists()
        assert (tmp_path / "out.meta.json").exists()

    def test_svg_is_pure_function_of_csv(self, tmp_path):
        cfg_path = tmp_path / "cfg.toml"
        write_toml(cfg_path, small_config(tmp_path))
        assert main(["experiment", "--config", str(cfg_path)]) == 0
        svg1 = (tmp_path / "out.svg").read_bytes()
        render_svg_from_csv(tmp_path / "out.csv", tmp_path / "out2.svg")
        assert (tmp_path / "out2.svg").read_bytes() == svg1

    def test_seed_override(self, tmp_path):
        raw = small_config(tmp_path)
        del raw["mc"]["seed"]
        cfg_path = tmp_path / "cfg.toml"
        write_toml(cfg_path, raw)
        assert main(["experiment", "--config", str(cfg_path)]) == 2  # no seed anywhere
        assert main(["experiment", "--config", str(cfg_path), "--seed", "7"]) == 0

    def test_presets_parse(self):
        for name in ("budget_low.toml", "budget_high.toml"):
            cfg = load_config(PRESETS / name)
            assert cfg.mc.seed is not None
            assert cfg.t_grid == (25, 50, 100, 200, 400, 800)
        low = load_config(PRESETS / "budget_low.toml")
        high = load_config(PRESETS / "budget_high.toml")
        assert low.train_attack.epsilon == 0.08
        assert high.train_attack.epsilon == 0.12
