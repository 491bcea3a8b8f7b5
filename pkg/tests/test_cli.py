"""Experiment runner: config handling, exit codes, golden reproducibility."""

import json
import pathlib

import pytest

from csbc import analysis, cli

REPO = pathlib.Path(__file__).resolve().parent.parent
CONFIGS = REPO / "configs"
GOLDEN = pathlib.Path(__file__).resolve().parent / "golden"

ALL_CONFIGS = sorted(CONFIGS.glob("*.json"))


def run_cli(args, capsys):
    code = cli.main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestConfigParsing:
    @pytest.mark.parametrize("path", ALL_CONFIGS, ids=lambda p: p.stem)
    def test_shipped_configs_round_trip(self, path):
        cfg = cli.ExperimentConfig.from_json(path.read_text())
        again = cli.ExperimentConfig.from_json(cfg.to_json())
        assert again == cfg

    def test_round_trip_preserves_every_field(self):
        raw = {
            "kind": "mc",
            "seed": 9,
            "n_trials": 123,
            "committer": {"kind": "honest_committer", "params": {"bit": 1}},
            "receiver": {"kind": "honest_receiver", "params": {}},
            "output_format": "csv",
            "extras": {"note": ["a", 1]},
        }
        cfg = cli.ExperimentConfig.from_dict(raw)
        assert cfg.to_dict() == raw

    @pytest.mark.parametrize(
        "raw,field",
        [
            ({"kind": "dance"}, "kind"),
            ({"kind": "mc", "seed": "x"}, "seed"),
            ({"kind": "mc", "n_trials": 0}, "n_trials"),
            ({"kind": "mc", "output_format": "yaml"}, "output_format"),
            ({"kind": "mc", "committer": "honest"}, "committer"),
            ({"kind": "mc", "bogus": 1}, "bogus"),
        ],
    )
    def test_bad_fields_named(self, raw, field):
        with pytest.raises(cli.ConfigError) as err:
            cli.ExperimentConfig.from_dict(raw)
        assert err.value.field == field


class TestExitCodes:
    def test_success(self, capsys):
        code, out, _ = run_cli(
            ["--config", CONFIGS / "run_honest.json", "--threads", "1"], capsys
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["result"]["a_detected"] is False
        assert doc["result"]["b_detected"] is False

    def test_unknown_strategy_kind_is_config_error(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(
            json.dumps(
                {
                    "kind": "exact",
                    "committer": {"kind": "mystery"},
                    "receiver": {"kind": "honest_receiver"},
                }
            )
        )
        code, _, err = run_cli(["--config", path], capsys)
        assert code == 2
        assert "committer.kind" in err and "mystery" in err

    def test_missing_config_file(self, capsys):
        code, _, err = run_cli(["--config", "/nonexistent.json"], capsys)
        assert code == 2

    def test_invalid_json(self, tmp_path, capsys):
        path = tmp_path / "syntax.json"
        path.write_text("{not json")
        code, _, _ = run_cli(["--config", path], capsys)
        assert code == 2

    def test_capability_error_is_exit_3(self, tmp_path, capsys, monkeypatch):
        def refuse(*args, **kwargs):
            raise analysis.NotEnumerableError("strategy marked non-enumerable")

        monkeypatch.setattr(analysis, "detection_exact", refuse)
        code, _, err = run_cli(
            ["--config", CONFIGS / "exact_z_attack.json"], capsys
        )
        assert code == 3
        assert "non-enumerable" in err

    def test_internal_error_is_exit_1(self, tmp_path, capsys, monkeypatch):
        def boom(*args, **kwargs):
            raise RuntimeError("kernel exploded")

        monkeypatch.setattr(analysis, "detection_exact", boom)
        code, _, err = run_cli(
            ["--config", CONFIGS / "exact_z_attack.json"], capsys
        )
        assert code == 1


class TestOverrides:
    def test_seed_override(self, tmp_path, capsys):
        out1 = tmp_path / "a.json"
        out2 = tmp_path / "b.json"
        run_cli(
            ["--config", CONFIGS / "run_honest.json", "--out", out1, "--seed", "1"],
            capsys,
        )
        run_cli(
            ["--config", CONFIGS / "run_honest.json", "--out", out2, "--seed", "2"],
            capsys,
        )
        assert json.loads(out1.read_text())["master_seed"] == 1
        assert json.loads(out2.read_text())["master_seed"] == 2

    def test_format_override(self, capsys):
        code, out, _ = run_cli(
            ["--config", CONFIGS / "run_honest.json", "--format", "csv"], capsys
        )
        assert code == 0
        assert out.splitlines()[0].startswith("kind,committer")

    def test_stdout_matches_file(self, tmp_path, capsys):
        code, out, _ = run_cli(
            ["--config", CONFIGS / "exact_z_attack.json"], capsys
        )
        path = tmp_path / "out.csv"
        run_cli(
            ["--config", CONFIGS / "exact_z_attack.json", "--out", path], capsys
        )
        assert out == path.read_text()


GOLDEN_CASES = ["exact_z_attack.csv", "mc_honest.json", "rel_default.json"]


class TestGoldenReproducibility:
    @pytest.mark.parametrize("name", GOLDEN_CASES)
    def test_byte_identical_across_runs_and_threads(self, name, tmp_path, capsys):
        config = CONFIGS / f"{name.split('.')[0]}.json"
        golden = (GOLDEN / name).read_text()
        for threads in ("1", "1", "3"):
            out_path = tmp_path / f"{threads}-{name}"
            code, _, _ = run_cli(
                ["--config", config, "--out", out_path, "--threads", threads],
                capsys,
            )
            assert code == 0
            assert out_path.read_text() == golden


class TestExperimentContent:
    def test_sweep_grid_echoed_in_order(self, capsys):
        code, out, _ = run_cli(
            ["--config", CONFIGS / "sweep_weak_coupling.json"], capsys
        )
        assert code == 0
        rows = out.strip().splitlines()[1:]
        params = [float(r.split(",")[5]) for r in rows]
        assert len(params) == 16
        assert params == sorted(params)

    def test_lemma1_config(self, capsys):
        code, out, _ = run_cli(
            ["--config", CONFIGS / "lemma1_mixed.json"], capsys
        )
        assert code == 0
        doc = json.loads(out)
        sets = doc["result"]["sets"]
        assert [s["factored"] for s in sets] == [True, True, False]
        assert sets[2]["offidentity_norm"] > 0.1

    def test_rel_custom_geometry(self, tmp_path, capsys):
        cfg = {
            "kind": "rel",
            "seed": 3,
            "extras": {
                "positions": {
                    "A": 0.0, "B": 2.0, "A1": 200.0, "B1": 202.0,
                    "A2": 20000.0, "B2": 20002.0,
                },
                "bit": 0,
                "coin": 0,
                "t_coin": 900.0,
            },
        }
        path = tmp_path / "rel.json"
        path.write_text(json.dumps(cfg))
        code, out, _ = run_cli(["--config", path], capsys)
        assert code == 0
        assert json.loads(out)["result"]["causality_ok"] is True

    def test_rel_bad_geometry_is_config_error(self, tmp_path, capsys):
        cfg = {
            "kind": "rel",
            "extras": {"positions": {s: 0.0 for s in "A B A1 B1 A2 B2".split()}},
        }
        path = tmp_path / "rel.json"
        path.write_text(json.dumps(cfg))
        code, _, err = run_cli(["--config", path], capsys)
        assert code == 2
        assert "positions" in err

    def test_punveil_config_within_bounds(self, capsys):
        code, out, _ = run_cli(
            ["--config", CONFIGS / "punveil_random.json", "--threads", "1"],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["result"]["within_4_sigma"] is True

    def test_master_seed_present_in_all_outputs(self, capsys):
        for config in ALL_CONFIGS:
            code, out, _ = run_cli(["--config", config, "--threads", "1"], capsys)
            assert code == 0
            if out.startswith("{"):
                assert "master_seed" in json.loads(out)
            else:
                header = out.splitlines()[0].split(",")
                assert "master_seed" in header
