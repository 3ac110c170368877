import itertools
import json
import os

import numpy as np
import pytest

from rewardspace import ValidationError
from rewardspace.agents import RULE_CR, HeuristicRule, run_secretary_rule_with_outcome
from rewardspace.harness import (
    ExperimentConfig,
    cutoff_success_probability,
    emit_plot_data,
    resolve_config,
    run_experiment,
    secretary_dp_oracle,
    simulate_cutoff_success,
    simulate_stage,
)
from rewardspace.harness.cli import main as cli_main


class TestDpOracle:
    def test_x4_brute_force_over_all_orderings(self):
        # exhaustive oracle: run CR(h) on all 24 orderings of 4 applicants
        for k in range(4):
            rule = HeuristicRule(RULE_CR, k + 1)
            wins = 0
            for perm in itertools.permutations(range(1, 5)):
                _, hired = run_secretary_rule_with_outcome(rule, list(perm))
                wins += int(perm[hired - 1] == 1)
            assert wins / 24 == pytest.approx(cutoff_success_probability(4, k))
        h_star, best = secretary_dp_oracle(4)
        assert h_star == 2
        assert best == pytest.approx(11 / 24)

    def test_x2_tie_prefers_smaller_cutoff(self):
        h_star, best = secretary_dp_oracle(2)
        assert h_star == 1
        assert best == pytest.approx(0.5)

    def test_x100_asymptotics(self):
        h_star, best = secretary_dp_oracle(100)
        assert abs((h_star - 1) - 100 / np.e) <= 2
        assert abs(best - 1 / np.e) <= 0.02

    def test_monte_carlo_matches_dp(self):
        h_star, probability = secretary_dp_oracle(12)
        trials = 20_000
        estimate = simulate_cutoff_success(12, h_star, trials, seed=0)
        sigma = np.sqrt(probability * (1 - probability) / trials)
        assert abs(estimate - probability) <= 3 * sigma

    def test_too_small_rejected(self):
        with pytest.raises(ValidationError):
            secretary_dp_oracle(1)


class TestConfig:
    def test_minimal_config_resolves_with_profile_defaults(self):
        cfg = resolve_config({"experiment": "gridworld-cluster"})
        assert cfg.replications == 10
        assert cfg.sweep == [4, 16, 40, 100]
        assert "GPIRL" in cfg.methods
        assert cfg.environment["width"] == 10
        assert cfg.cohort["agents_per_group"] == 50

    def test_paper_profile_scales_up(self):
        cfg = resolve_config({"experiment": "gridworld-cluster", "profile": "paper"})
        assert cfg.replications == 100
        assert cfg.cohort["agents_per_group"] == 200
        assert len(cfg.sweep) == 10

    def test_overrides_merge(self):
        cfg = resolve_config(
            {
                "experiment": "gridworld-cluster",
                "replications": 2,
                "environment": {"width": 4, "height": 5},
                "engines": {"GPIRL": {"kappa": 2.0}},
            }
        )
        assert cfg.replications == 2
        assert cfg.environment["width"] == 4
        assert cfg.environment["p_intended"] == 0.65
        assert cfg.engines["GPIRL"]["kappa"] == 2.0
        assert cfg.engines["GPIRL"]["beta"] == 1.0

    def test_unknown_experiment_rejected(self):
        with pytest.raises(ValidationError):
            resolve_config({"experiment": "tic-tac-toe"})

    def test_empty_sweep_rejected(self):
        with pytest.raises(ValidationError):
            resolve_config({"experiment": "gridworld-cluster", "sweep": []})

    def test_unknown_method_rejected(self):
        with pytest.raises(ValidationError):
            resolve_config({"experiment": "gridworld-cluster", "methods": ["DEEP"]})

    def test_bad_schema_version_rejected(self):
        with pytest.raises(ValidationError):
            resolve_config({"experiment": "gridworld-cluster", "schema_version": 99})

    def test_config_hash_stable_under_key_order(self):
        a = resolve_config({"experiment": "gridworld-cluster", "seed": 4, "replications": 2})
        b = resolve_config({"replications": 2, "seed": 4, "experiment": "gridworld-cluster"})
        assert a.config_hash() == b.config_hash()


def tiny_cluster_config(out_dir, seed=7, methods=("FE", "FT", "PROJ")):
    return resolve_config(
        {
            "experiment": "gridworld-cluster",
            "seed": seed,
            "output_dir": str(out_dir),
            "replications": 2,
            "sweep": [2, 3],
            "methods": list(methods),
            "environment": {"width": 3, "height": 3},
            "cohort": {
                "agents_per_group": 3,
                "traj_len": 4,
                "start_cell": [0, 0],
                "destinations": [[[[2, 2], 1.0]], [[[0, 2], 1.0]]],
            },
            "engines": {"PROJ": {"max_iters": 5}},
        }
    )


class TestPipeline:
    def test_run_produces_expected_files(self, tmp_path):
        cfg = tiny_cluster_config(tmp_path / "out")
        report = run_experiment(cfg)
        assert report.succeeded
        out = tmp_path / "out"
        assert (out / "metrics.csv").exists()
        assert (out / "provenance.json").exists()
        assert (out / "cells" / "rep000_sw2" / "cohort.jsonl").exists()
        assert (out / "cells" / "rep001_sw3" / "features_FE.csv").exists()
        assert (out / "cells" / "rep000_sw3" / "rewards_PROJ.csv").exists()
        assert (out / "fig1_nmi.csv").exists()
        assert (out / "fig1_cluster_accuracy.csv").exists()
        # metric rows: 3 methods x 2 sweeps x 2 metrics
        assert len(report.rows) == 12
        provenance = json.loads((out / "provenance.json").read_text())
        assert provenance["config_hash"] == cfg.config_hash()

    def test_same_seed_byte_identical_metrics(self, tmp_path):
        cfg_a = tiny_cluster_config(tmp_path / "a")
        cfg_b = tiny_cluster_config(tmp_path / "b")
        run_experiment(cfg_a)
        run_experiment(cfg_b)
        bytes_a = (tmp_path / "a" / "metrics.csv").read_bytes()
        bytes_b = (tmp_path / "b" / "metrics.csv").read_bytes()
        assert bytes_a == bytes_b

    def test_adding_method_keeps_cohorts_identical(self, tmp_path):
        cfg_a = tiny_cluster_config(tmp_path / "a", methods=("FE",))
        cfg_b = tiny_cluster_config(tmp_path / "b", methods=("FE", "FT", "PROJ"))
        simulate_stage(cfg_a)
        simulate_stage(cfg_b)
        for cell in ("rep000_sw2", "rep001_sw3"):
            a = (tmp_path / "a" / "cells" / cell / "cohort.jsonl").read_bytes()
            b = (tmp_path / "b" / "cells" / cell / "cohort.jsonl").read_bytes()
            assert a == b

    def test_projection_files_shape_contract(self, tmp_path):
        cfg = tiny_cluster_config(tmp_path / "out", methods=("FE", "PROJ"))
        report = run_experiment(cfg)
        path = tmp_path / "out" / "fig3_projection2d_PROJ.csv"
        assert path.exists()
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "c0,c1,label"
        assert len(lines) - 1 == 6  # one row per agent
        assert all(len(line.split(",")) == 3 for line in lines[1:])

    def test_classification_experiment(self, tmp_path):
        cfg = resolve_config(
            {
                "experiment": "secretary-across-rules",
                "seed": 3,
                "output_dir": str(tmp_path / "out"),
                "replications": 1,
                "sweep": [12],
                "methods": ["FE"],
                "classifiers": ["KNN"],
                "environment": {"num_applicants": 8},
                "cohort": {
                    "rules": [
                        {"kind": "CR", "parameter": 2, "count": 10, "param_noise_std": 0.0},
                        {"kind": "CCR", "parameter": 2, "count": 10, "param_noise_std": 0.0},
                    ]
                },
            }
        )
        report = run_experiment(cfg)
        assert report.succeeded
        assert report.rows[0]["metric"] == "cv_accuracy_KNN"
        assert 0.0 <= report.rows[0]["mean"] <= 1.0


class TestCli:
    def test_dp_oracle_verb(self, capsys):
        assert cli_main(["dp-oracle", "--applicants", "4"]) == 0
        out = capsys.readouterr().out
        assert "h* = 2" in out
        assert "0.458333" in out

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"experiment": "nope"}))
        assert cli_main(["run", "--config", str(bad)]) == 2

    def test_missing_config_file(self, capsys):
        assert cli_main(["run", "--config", "/does/not/exist.json"]) == 2

    def test_full_run_via_cli(self, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text(
            json.dumps(
                {
                    "experiment": "gridworld-cluster",
                    "replications": 1,
                    "sweep": [2],
                    "methods": ["FE"],
                    "environment": {"width": 3, "height": 3},
                    "cohort": {
                        "agents_per_group": 3,
                        "traj_len": 3,
                        "start_cell": [0, 0],
                        "destinations": [[[[2, 2], 1.0]], [[[0, 2], 1.0]]],
                    },
                }
            )
        )
        code = cli_main(
            ["run", "--config", str(config_path), "--out", str(tmp_path / "out"), "--seed", "5"]
        )
        assert code == 0
        assert (tmp_path / "out" / "metrics.csv").exists()
        assert "nmi" in capsys.readouterr().out

    def test_stagewise_matches_run(self, tmp_path):
        config = {
            "experiment": "gridworld-cluster",
            "seed": 11,
            "replications": 1,
            "sweep": [2],
            "methods": ["FE", "FT"],
            "environment": {"width": 3, "height": 3},
            "cohort": {
                "agents_per_group": 3,
                "traj_len": 3,
                "start_cell": [0, 0],
                "destinations": [[[[2, 2], 1.0]], [[[0, 2], 1.0]]],
            },
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        assert cli_main(["run", "--config", str(path), "--out", str(tmp_path / "a")]) == 0
        for verb in ("simulate", "featurize", "irl", "recognize", "report"):
            code = cli_main([verb, "--config", str(path), "--out", str(tmp_path / "b")])
            assert code == 0
        bytes_a = (tmp_path / "a" / "metrics.csv").read_bytes()
        bytes_b = (tmp_path / "b" / "metrics.csv").read_bytes()
        assert bytes_a == bytes_b
