import csv
import json

import pytest

from hermfair.cli import main

EXPOSURE_TABLE = ",not_exposed,exposed\nany_same_sex,883,219\nopposite_sex_only,1975,122\n"


def write(path, text):
    path.write_text(text)
    return str(path)


class TestAllocate:
    def test_threshold_decisions_gamma_zero(self, tmp_path, capsys):
        # gamma 0: show iff p >= beta_g / alpha; A: 0.15, B: 0.25
        pop_csv = write(tmp_path / "pop.csv",
                        "group,p,rho\nA,0.2,0.5\nA,0.1,0.5\nB,0.3,0.5\nB,0.2,0.5\n")
        out = tmp_path / "out"
        rc = main(["allocate", pop_csv, "--gamma", "0", "--out", str(out)])
        assert rc == 0
        with open(out / "allocation.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["decision"] for r in rows] == ["1", "0", "1", "0"]
        summary = json.loads((out / "summary.json").read_text())
        assert summary["status"] == "optimal"
        assert summary["constraints"] == []

    def test_constrained_allocation_summary(self, tmp_path):
        pop_csv = write(tmp_path / "pop.csv",
                        "group,p,rho\nA,0.9,0.5\nA,0.5,0.4\nB,0.1,0.8\nB,0.05,0.7\n")
        out = tmp_path / "out"
        rc = main(["allocate", pop_csv, "--parity", "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["constraints"] == ["parity_exposure"]
        assert abs(summary["parity_gap"]) <= summary["tolerance"] + 1e-8

    def test_empty_population_exits_1(self, tmp_path):
        pop_csv = write(tmp_path / "pop.csv", "")
        assert main(["allocate", pop_csv, "--out", str(tmp_path)]) == 1

    def test_missing_file_exits_1(self, tmp_path):
        assert main(["allocate", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 1

    def test_binary_exact_cap_exits_1(self, tmp_path, capsys):
        lines = ["group,p,rho"] + [f"A,0.5,0.5" for _ in range(15)] + ["B,0.5,0.5"] * 15
        pop_csv = write(tmp_path / "pop.csv", "\n".join(lines) + "\n")
        rc = main(["allocate", pop_csv, "--mode", "binary-exact", "--out", str(tmp_path)])
        assert rc == 1
        assert "enumeration cap" in capsys.readouterr().err

    def test_invalid_params_exit_1(self, tmp_path):
        pop_csv = write(tmp_path / "pop.csv", "group,p,rho\nA,0.5,0.5\nB,0.5,0.5\n")
        assert main(["allocate", pop_csv, "--alpha", "0", "--out", str(tmp_path)]) == 1


class TestSweep:
    def run_tiny(self, tmp_path, name, extra=()):
        out = tmp_path / name
        rc = main(["sweep", "--scenario", "A", "--grid", "0.05,0.2", "--reps", "2",
                   "--na", "25", "--nb", "25", "--seed", "7", "--out", str(out), *extra])
        assert rc == 0
        return out

    def test_outputs_exist(self, tmp_path):
        out = self.run_tiny(tmp_path, "s1")
        for name in ("records.csv", "aggregates.csv", "aggregates.json", "metadata.json"):
            assert (out / name).exists()
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["scenario"] == "A"
        assert meta["base_seed"] == 7
        assert meta["rng_stream"] == "numpy-pcg64"
        assert meta["n_failed"] == 0
        assert "wall_time_s" in meta and "numpy_version" in meta

    def test_byte_identical_reruns(self, tmp_path):
        a = self.run_tiny(tmp_path, "a")
        b = self.run_tiny(tmp_path, "b")
        assert (a / "records.csv").read_bytes() == (b / "records.csv").read_bytes()
        assert (a / "aggregates.csv").read_bytes() == (b / "aggregates.csv").read_bytes()

    def test_jobs_do_not_change_output(self, tmp_path):
        a = self.run_tiny(tmp_path, "serial")
        b = self.run_tiny(tmp_path, "parallel", extra=("--jobs", "2"))
        assert (a / "records.csv").read_bytes() == (b / "records.csv").read_bytes()

    def test_scenario_d_varies_xi(self, tmp_path):
        out = tmp_path / "d"
        rc = main(["sweep", "--scenario", "D", "--grid", "0.02,0.5", "--reps", "1",
                   "--na", "20", "--nb", "20", "--out", str(out)])
        assert rc == 0
        with open(out / "records.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["param_name"] for r in rows} == {"xi"}
        assert {float(r["param_value"]) for r in rows} == {0.02, 0.5}

    def test_gamma_scenario_default_grid(self, tmp_path):
        out = tmp_path / "g"
        rc = main(["sweep", "--scenario", "gamma", "--reps", "1",
                   "--na", "10", "--nb", "10", "--out", str(out)])
        assert rc == 0
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["param_name"] == "gamma"
        assert meta["grid"][0] == 0.0 and meta["grid"][-1] == 1.0

    def test_colon_grid_syntax(self, tmp_path):
        out = tmp_path / "colon"
        rc = main(["sweep", "--scenario", "A", "--grid", "0.04:0.1:0.03", "--reps", "1",
                   "--na", "10", "--nb", "10", "--out", str(out)])
        assert rc == 0
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["grid"] == [0.04, 0.07, 0.1]

    def test_requires_scenario(self, tmp_path):
        assert main(["sweep", "--out", str(tmp_path / "x")]) == 1

    def test_config_file(self, tmp_path):
        cfg = write(tmp_path / "cfg.json", json.dumps({
            "scenario": "B", "reps": 1, "n_a": 15, "n_b": 15,
            "grid": {"start": 0.01, "stop": 0.05, "step": 0.02}, "seed": 3,
        }))
        out = tmp_path / "cfg-out"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["scenario"] == "B"
        assert meta["grid"] == [0.01, 0.03, 0.05]

    def test_config_rejects_unknown_keys(self, tmp_path):
        cfg = write(tmp_path / "bad.json", json.dumps({"scenario": "A", "repz": 5}))
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "x")]) == 1

    def test_config_rejects_bad_types(self, tmp_path):
        cfg = write(tmp_path / "bad.json", json.dumps({"scenario": "A", "reps": "ten"}))
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "x")]) == 1

    def test_flags_override_config(self, tmp_path):
        cfg = write(tmp_path / "cfg.json", json.dumps(
            {"scenario": "A", "reps": 5, "n_a": 10, "n_b": 10, "grid": [0.05]}))
        out = tmp_path / "o"
        assert main(["sweep", "--config", cfg, "--reps", "1", "--out", str(out)]) == 0
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["replications"] == 1


class TestStats:
    def test_chi2_golden(self, tmp_path, capsys):
        table = write(tmp_path / "t.csv", EXPOSURE_TABLE)
        assert main(["stats", "chi2", table]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["statistic"] == pytest.approx(148.37, abs=0.01)
        assert payload["dof"] == 1
        assert payload["cramers_v"] == pytest.approx(0.215, abs=0.001)
        assert len(payload["expected"]) == 2

    def test_wilson_golden(self, capsys):
        assert main(["stats", "wilson", "--successes", "219", "--n", "1102"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert round(payload["lo"], 3) == 0.176
        assert round(payload["hi"], 3) == 0.223

    def test_proportions(self, tmp_path, capsys):
        table = write(tmp_path / "t.csv", EXPOSURE_TABLE)
        assert main(["stats", "proportions", table, "--axis", "rows"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert round(payload["cells"][0][1]["point"], 3) == 0.199

    def test_too_small_table_exits_1(self, tmp_path):
        table = write(tmp_path / "t.csv", ",a,b\nonly_row,1,2\n")
        assert main(["stats", "chi2", table]) == 1

    def test_wilson_requires_counts(self):
        assert main(["stats", "wilson"]) == 1

    def test_output_file(self, tmp_path):
        table = write(tmp_path / "t.csv", EXPOSURE_TABLE)
        out = tmp_path / "res.json"
        assert main(["stats", "chi2", table, "--out", str(out)]) == 0
        assert json.loads(out.read_text())["dof"] == 1


class TestExportPopulation:
    def test_export_then_reload(self, tmp_path):
        out = tmp_path / "pop.csv"
        rc = main(["export-population", "--na", "12", "--nb", "8", "--seed", "4",
                   "--out", str(out)])
        assert rc == 0
        from hermfair.population import population_from_csv

        pop = population_from_csv(out)
        assert pop.n_a == 12 and pop.n_b == 8

    def test_export_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            assert main(["export-population", "--na", "5", "--nb", "5", "--seed", "11",
                         "--out", str(path)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_custom_shapes(self, tmp_path):
        out = tmp_path / "pop.csv"
        rc = main(["export-population", "--na", "2000", "--nb", "5", "--seed", "0",
                   "--beta-a", "8,2", "--beta-b", "3,7", "--out", str(out)])
        assert rc == 0
        from hermfair.population import population_from_csv

        pop = population_from_csv(out)
        # Beta(8,2) mean is 0.8
        assert abs(pop.rho[:2000].mean() - 0.8) < 0.02

    def test_shapes_must_come_in_pairs(self, tmp_path):
        rc = main(["export-population", "--beta-a", "8,2", "--out", str(tmp_path / "p.csv")])
        assert rc == 1

    def test_roundtrip_through_allocate(self, tmp_path):
        pop_csv = tmp_path / "pop.csv"
        assert main(["export-population", "--na", "6", "--nb", "6", "--seed", "2",
                     "--out", str(pop_csv)]) == 0
        out = tmp_path / "alloc"
        assert main(["allocate", str(pop_csv), "--eho", "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["status"] in ("optimal", "tolerance_relaxed")
