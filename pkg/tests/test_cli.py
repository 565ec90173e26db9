import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from reparam_lab import bounds as B
from reparam_lab import cli, runner
from reparam_lab.config import BOUND_NAMES, load_config, validate_config
from reparam_lab.errors import ConfigurationError, NumericalDivergenceError
from reparam_lab.reports import DEVIATION_COLUMNS

MINIMAL = {"seed": 1, "horizon": 5, "n_episodes": 200, "bounds": ["fixed_policy_shift"]}


def _write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data), encoding="utf-8")
    return p


def _run(tmp_path, data, *extra):
    cfg = _write(tmp_path, data)
    return cli.main(["run", str(cfg), "--out", str(tmp_path / "out"), *extra])


def _report(tmp_path, name):
    return json.loads((tmp_path / "out" / "reports" / f"{name}.json").read_text(encoding="utf-8"))


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigurationError) as exc:
            validate_config({**MINIMAL, "distractr": {}})
        assert exc.value.field_path == "distractr"

    def test_nested_field_path(self):
        with pytest.raises(ConfigurationError) as exc:
            validate_config({**MINIMAL, "distractor": {"kind": "additive_fixed", "eta": -1}})
        assert exc.value.field_path == "distractor.eta"

    def test_unknown_bound(self):
        with pytest.raises(ConfigurationError) as exc:
            validate_config({**MINIMAL, "bounds": ["theorem_9"]})
        assert exc.value.field_path.startswith("bounds")

    def test_duplicate_bounds(self):
        with pytest.raises(ConfigurationError):
            validate_config({**MINIMAL, "bounds": ["train_test", "train_test"]})

    def test_gamma_range(self):
        with pytest.raises(ConfigurationError) as exc:
            validate_config({**MINIMAL, "gamma": 1.0})
        assert exc.value.field_path == "gamma"

    def test_yaml_roundtrip(self, tmp_path):
        cfg = load_config(_write(tmp_path, MINIMAL))
        assert cfg.seed == 1 and cfg.bounds == ["fixed_policy_shift"]
        assert cfg.with_overrides(seed=9, episodes=50).n_episodes == 50

    def test_every_bound_has_a_runner(self):
        assert set(BOUND_NAMES) == set(runner.RUNNERS)


class TestRun:
    def test_minimal_holds(self, tmp_path, capsys):
        assert _run(tmp_path, MINIMAL) == 0
        assert "fixed_policy_shift" in capsys.readouterr().out
        assert _report(tmp_path, "fixed_policy_shift")["verdict"] == "holds"

    def test_formula_echo(self, tmp_path):
        data = {**MINIMAL, "distractor": {"kind": "additive_fixed", "eta": 0.1}, "bounds": ["linear_noise"]}
        assert _run(tmp_path, data) == 0
        rep = _report(tmp_path, "linear_noise")
        c = validate_config(data).constants
        expected = c.L_r2 * c.L_pi1 * c.L_phi * 0.1 * B.geom_sum(0.9, 5)
        assert rep["bound"]["value"] == pytest.approx(expected, rel=1e-14)

    def test_negative_control(self, tmp_path):
        data = {**MINIMAL, "distractor": {"kind": "additive_fixed", "eta": 0.2},
                "test_hooks": {"rhs_scale": 0.01}}
        assert _run(tmp_path, data) == 1
        assert _report(tmp_path, "fixed_policy_shift")["verdict"] == "violated"

    def test_manifest_lists_each_bound_once(self, tmp_path):
        data = {**MINIMAL, "perturbation": {"zeta": 0.02, "epsilon": 0.05, "epsilon_r": 0.01},
                "distractor": {"kind": "additive_fixed", "eta": 0.05},
                "bounds": ["train_test", "reward_shift", "state_dev_init", "state_dev_transition",
                           "lemma_chain", "return_lipschitz"],
                "n_pairs": 200}
        assert _run(tmp_path, data) == 0
        man = json.loads((tmp_path / "out" / "manifest.json").read_text(encoding="utf-8"))
        assert list(man["summary"]) == sorted(data["bounds"])
        assert set(man["summary"]) == set(data["bounds"])
        for rel in man["files"]:
            assert (tmp_path / "out" / rel).exists()
        assert man["seeds"]["suite"] == 1

    def test_deviation_table_schema(self, tmp_path):
        assert _run(tmp_path, MINIMAL) == 0
        with open(tmp_path / "out" / "deviations.csv", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == DEVIATION_COLUMNS
        assert len(rows) == 1 + 200 * 6
        raw = (tmp_path / "out" / "deviations.csv").read_bytes()
        assert b"\r\n" not in raw

    def test_rademacher_table(self, tmp_path):
        data = {**MINIMAL, "bounds": ["rademacher"], "rademacher": {"n_sigma": 500, "n_noise_reps": 4}}
        assert _run(tmp_path, data) == 0
        with open(tmp_path / "out" / "rademacher_scaling.csv", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["n", "estimate", "std_err"]
        assert [int(r[0]) for r in rows[1:]] == [16, 64, 256, 1024]

    def test_byte_identical_rerun(self, tmp_path):
        data = {**MINIMAL, "distractor": {"kind": "stochastic", "eta": 0.05, "sigma2": 0.01},
                "bounds": ["fixed_policy_shift", "stochastic_distractor", "lemma_chain"]}
        cfg = _write(tmp_path, data)
        outs = []
        for k in range(2):
            out = tmp_path / f"run{k}"
            assert cli.main(["run", str(cfg), "--out", str(out)]) == 0
            outs.append(out)
        files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
        files.remove(Path("run_info.json"))
        assert files
        man0 = (outs[0] / "manifest.json").read_text(encoding="utf-8")
        man1 = (outs[1] / "manifest.json").read_text(encoding="utf-8")
        assert man0.replace(str(outs[0]), "") == man1.replace(str(outs[1]), "")
        for rel in files:
            if rel.name == "manifest.json":
                continue
            assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes(), rel

    def test_seed_override_changes_results(self, tmp_path):
        data = {**MINIMAL, "distractor": {"kind": "additive_fixed", "eta": 0.1}}
        cfg = _write(tmp_path, data)
        cli.main(["run", str(cfg), "--out", str(tmp_path / "a")])
        cli.main(["run", str(cfg), "--out", str(tmp_path / "b"), "--seed", "99"])
        a = (tmp_path / "a" / "reports" / "fixed_policy_shift.json").read_bytes()
        b = (tmp_path / "b" / "reports" / "fixed_policy_shift.json").read_bytes()
        assert a != b

    def test_strict_flags_within_margin(self, tmp_path, monkeypatch):
        orig = runner.RUNNERS["fixed_policy_shift"]

        def within_margin(ctx, seed):
            rep = orig(ctx, seed)
            rep["verdict"] = "holds_within_margin"
            return rep

        monkeypatch.setitem(runner.RUNNERS, "fixed_policy_shift", within_margin)
        assert _run(tmp_path, MINIMAL) == 0
        assert _run(tmp_path, MINIMAL, "--strict") == 1

    def test_mismatched_distractor(self, tmp_path, capsys):
        data = {**MINIMAL, "bounds": ["stochastic_distractor"]}
        assert _run(tmp_path, data) == 2
        assert "distractor.kind" in capsys.readouterr().err


class TestExitCodes:
    def test_config_error(self, tmp_path, capsys):
        assert _run(tmp_path, {**MINIMAL, "horizon": -1}) == 2
        assert "horizon" in capsys.readouterr().err

    def test_numerical_error(self, tmp_path, monkeypatch):
        def boom(ctx, seed):
            raise NumericalDivergenceError(3, episode=7)

        monkeypatch.setitem(runner.RUNNERS, "fixed_policy_shift", boom)
        assert _run(tmp_path, MINIMAL) == 3

    def test_io_error(self, tmp_path):
        blocker = tmp_path / "out"
        blocker.write_text("not a directory", encoding="utf-8")
        cfg = _write(tmp_path, MINIMAL)
        assert cli.main(["run", str(cfg), "--out", str(blocker)]) == 4


class TestCatalogAndDemo:
    def test_catalog_lists_everything(self, capsys):
        assert cli.main(["catalog"]) == 0
        out = capsys.readouterr().out
        for name in BOUND_NAMES:
            assert name in out
        assert "nu = L_t1 + L_t2 L_pi1 L_phi" in out

    def test_demo(self, tmp_path):
        assert cli.main(["demo", "linear-noise", "--out", str(tmp_path / "d"), "--episodes", "100"]) == 0
        assert (tmp_path / "d" / "reports" / "linear_noise.json").exists()

    def test_module_entry_point(self, tmp_path):
        res = subprocess.run([sys.executable, "-m", "reparam_lab", "catalog"],
                             capture_output=True, text=True, check=False)
        assert res.returncode == 0 and "train_test" in res.stdout

    def test_infinite_tightness_serialized(self, tmp_path):
        from reparam_lab.reports import dumps

        assert json.loads(dumps({"t": math.inf}))["t"] == "inf"
