import csv
import os

import pytest
import yaml

from fairdyn.cli import main

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CAUSAL_MODEL = os.path.join(REPO, "configs", "hiring_causal.yaml")


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def boards_raw():
    from importlib.resources import files

    return yaml.safe_load(
        files("fairdyn.data").joinpath("boards_quota.yaml").read_text()
    )


class TestMetrics:
    def test_writes_one_row(self, tmp_path, capsys):
        out = tmp_path / "m.csv"
        assert main(["metrics", "--scenario", "lending_liu", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0][:3] == ["group_a", "group_b", "dp_gap"]
        assert len(rows) == 2

    def test_missing_scenario_exit_1_no_partial_file(self, tmp_path, capsys):
        out = tmp_path / "m.csv"
        bad = str(tmp_path / "nonexistent.cfg")
        assert main(["metrics", "--scenario", bad, "--out", str(out)]) == 1
        assert "nonexistent.cfg" in capsys.readouterr().err
        assert not out.exists()
        assert list(tmp_path.iterdir()) == []  # no stray temp files either


class TestSimulate:
    def test_steps_zero_one_row_per_group(self, tmp_path):
        out = tmp_path / "t.csv"
        code = main(
            ["simulate", "--scenario", "boards_quota", "--steps", "0", "--out", str(out)]
        )
        assert code == 0
        rows = read_csv(out)
        assert rows[0][0] == "step"
        assert len(rows) == 3  # header + one row per group at step 0
        assert {r[1] for r in rows[1:]} == {"men", "women"}

    def test_full_horizon_row_count(self, tmp_path):
        out = tmp_path / "t.csv"
        assert main(["simulate", "--scenario", "lending_liu", "--out", str(out)]) == 0
        rows = read_csv(out)
        # horizon H records H+1 steps, two groups each
        n_steps = len({r[0] for r in rows[1:]})
        assert len(rows) == 1 + 2 * n_steps

    def test_infeasible_quota_exit_2(self, tmp_path, capsys):
        raw = boards_raw()
        raw["population"]["groups"][1]["proportion"] = 0.05
        raw["population"]["groups"][0]["proportion"] = 0.95
        raw["interventions"][0]["target_share"] = 0.9
        scenario = tmp_path / "inf.yaml"
        scenario.write_text(yaml.safe_dump(raw))
        out = tmp_path / "t.csv"
        code = main(["simulate", "--scenario", str(scenario), "--out", str(out)])
        assert code == 2
        assert "step 0" in capsys.readouterr().err
        assert not out.exists()


class TestOptimize:
    def test_dp_constraint_reports_tiny_gap(self, capsys):
        assert main(["optimize", "--scenario", "lending_liu", "--constraint", "dp"]) == 0
        lines = capsys.readouterr().out.splitlines()
        gaps = {l.split()[0]: float(l.split()[1]) for l in lines if "_gap" in l}
        assert gaps["dp_gap"] <= 1e-9

    def test_unconstrained_prints_tau_per_group(self, capsys):
        assert main(["optimize", "--scenario", "lending_liu"]) == 0
        out = capsys.readouterr().out
        assert "tau[A]" in out and "tau[B]" in out


class TestCausal:
    def test_dsep_given_mediators(self, capsys):
        code = main(
            ["causal", "--model", CAUSAL_MODEL, "--check", "dsep", "--given", "D,X"]
        )
        assert code == 0
        assert capsys.readouterr().out.strip() == "d_separated true"

    def test_dsep_unconditioned_false(self, capsys):
        assert main(["causal", "--model", CAUSAL_MODEL, "--check", "dsep"]) == 0
        assert capsys.readouterr().out.strip() == "d_separated false"

    def test_cf_gap_positive_here(self, capsys):
        assert main(["causal", "--model", CAUSAL_MODEL, "--check", "cf"]) == 0
        value = float(capsys.readouterr().out.split()[1])
        assert value > 0.0

    def test_unresolved_with_resolving_d(self, capsys):
        code = main(
            [
                "causal",
                "--model",
                CAUSAL_MODEL,
                "--check",
                "unresolved",
                "--resolving",
                "D,X",
            ]
        )
        assert code == 0
        assert capsys.readouterr().out.strip() == "unresolved_discrimination false"

    def test_proxy_requires_argument(self, capsys):
        assert main(["causal", "--model", CAUSAL_MODEL, "--check", "proxy"]) == 1
        assert "--proxy" in capsys.readouterr().err

    def test_proxy_gap(self, capsys):
        code = main(
            ["causal", "--model", CAUSAL_MODEL, "--check", "proxy", "--proxy", "X"]
        )
        assert code == 0
        value = float(capsys.readouterr().out.split()[1])
        assert 0.0 <= value <= 1.0


class TestCompare:
    def test_columns_and_values(self, tmp_path):
        out = tmp_path / "c.csv"
        code = main(
            [
                "compare",
                "--scenario",
                "boards_quota",
                "--variants",
                "quota_only,quota_pipeline",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        rows = read_csv(out)
        assert rows[0] == [
            "variant",
            "final_goal_value",
            "steps_to_goal",
            "persists_after_sunset",
            "final_delta_mu_per_group",
        ]
        by_name = {r[0]: r for r in rows[1:]}
        assert by_name["quota_only"][2] == "not_reached"
        assert by_name["quota_only"][3] == "false"
        assert by_name["quota_pipeline"][3] == "true"
        assert by_name["quota_pipeline"][4].count(";") == 1

    def test_unknown_variant_exit_1(self, tmp_path, capsys):
        out = tmp_path / "c.csv"
        code = main(
            ["compare", "--scenario", "boards_quota", "--variants", "nope,quota_only",
             "--out", str(out)]
        )
        assert code == 1
        assert "nope" in capsys.readouterr().err
        assert not out.exists()


class TestSweep:
    def test_csv_and_summary(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        code = main(
            ["sweep", "--scenario", "lending_liu", "--eps", "0.01", "--draws", "4",
             "--seed", "7", "--out", str(out)]
        )
        assert code == 0
        rows = read_csv(out)
        assert rows[0] == ["draw", "final_goal_value"]
        assert len(rows) == 5
        printed = dict(l.split() for l in capsys.readouterr().out.splitlines())
        assert set(printed) == {"min", "max", "spread", "unreliable"}
        assert float(printed["min"]) <= float(printed["max"])


class TestDeterminism:
    @pytest.mark.parametrize(
        "argv_tail",
        [
            ["metrics", "--scenario", "lending_liu"],
            ["simulate", "--scenario", "boards_quota"],
            ["compare", "--scenario", "boards_quota", "--variants",
             "quota_only,quota_pipeline"],
            ["sweep", "--scenario", "lending_liu", "--eps", "0.02", "--draws", "3",
             "--seed", "42"],
        ],
    )
    def test_reruns_byte_identical(self, tmp_path, capsys, argv_tail):
        out1 = tmp_path / "run1.csv"
        out2 = tmp_path / "run2.csv"
        assert main([*argv_tail, "--out", str(out1)]) == 0
        assert main([*argv_tail, "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()


class TestUsage:
    def test_no_subcommand_exit_1(self, capsys):
        assert main([]) == 1

    def test_bad_choice_exit_1(self, capsys):
        assert main(["optimize", "--scenario", "lending_liu", "--constraint", "xx"]) == 1
