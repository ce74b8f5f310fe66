import csv
import io
import json

import numpy as np
import pytest

from morl.cli import main
from morl.experiment import ConfigError, parse_config
from morl.plotting import plot_files

SMALL_MONES = {
    "environment": {"name": "water_reservoir"},
    "algorithm": "mones",
    "algorithm_config": {"iterations": 4, "population": 8, "evals_per_policy": 2},
    "metrics": ["hypervolume", "eum", "sparsity"],
    "prior": {"sample_count": 200},
    "seed": 3,
}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(tmp_path, doc, out="out", monkeypatch=None):
    doc = {**doc, "output_dir": str(tmp_path / out)}
    code = main(["run", write_config(tmp_path, doc, f"{out}.json")])
    return code, tmp_path / out


def rows(path):
    return list(csv.reader(io.StringIO(path.read_text())))


class TestRun:
    def test_mones_artifacts(self, tmp_path):
        code, out = run(tmp_path, SMALL_MONES)
        assert code == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["archive.csv", "distribution.json", "front.csv", "manifest.json",
                         "metrics_by_iteration.csv", "report.json"]
        archive = rows(out / "archive.csv")
        assert archive[0] == ["iteration", "policy_index", "flooding", "water-demand", "config_hash"]
        assert len(archive) == 1 + 4 * 8
        assert sorted({r[0] for r in archive[1:]}) == ["0", "1", "2", "3"]
        manifest = json.loads((out / "manifest.json").read_text())
        h = manifest["config_hash"]
        for name in ("archive.csv", "front.csv", "metrics_by_iteration.csv"):
            table = rows(out / name)
            assert table[0][-1] == "config_hash" and all(r[-1] == h for r in table[1:])
        dist = json.loads((out / "distribution.json").read_text())
        assert dist["config_hash"] == h and dist["topology"]["hidden"] == 50
        assert len(dist["means"]) == len(dist["log_stds"]) == 2 * 50 + 51
        report = json.loads((out / "report.json").read_text())
        final = report["results"]["mones"]["final"]
        assert final["eum"]["samples"] == 200 and final["eum"]["seed"] == 3
        assert set(manifest["files"]) == set(names) - {"manifest.json"}
        assert {"numpy", "scipy", "python", "morl"} <= set(manifest["versions"])

    def test_byte_identical_rerun(self, tmp_path):
        _, a = run(tmp_path, SMALL_MONES, "a")
        _, b = run(tmp_path, SMALL_MONES, "b")
        for p in sorted(a.iterdir()):
            assert p.read_bytes() == (b / p.name).read_bytes(), p.name

    def test_seed_override(self, tmp_path, monkeypatch):
        _, a = run(tmp_path, SMALL_MONES, "a")
        monkeypatch.setenv("MORL_SEED", "4")
        _, b = run(tmp_path, SMALL_MONES, "b")
        assert json.loads((b / "manifest.json").read_text())["seed"] == 4
        assert (a / "archive.csv").read_bytes() != (b / "archive.csv").read_bytes()

    def test_malformed_config_no_outputs(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"algorithm": "mones",')
        assert main(["run", str(path)]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    @pytest.mark.parametrize("patch", [
        {"algorithm": "qlearning"},
        {"environment": {"name": "mountain_car"}},
        {"algorithm_config": {"iterations": -1}},
        {"algorithm_config": {"learning_rate": 0.1}},
        {"metrics": ["hypervolume", "magic"]},
        {"seed": "zero"},
        {"environment": {"name": "water_reservoir", "inflow_mean": 20.0}},
        {"surprise": 1},
    ])
    def test_invalid_configs_exit_2_without_outputs(self, tmp_path, patch):
        code, out = run(tmp_path, {**SMALL_MONES, **patch})
        assert code == 2
        assert not out.exists()

    def test_missing_seed(self, tmp_path):
        doc = {k: v for k, v in SMALL_MONES.items() if k != "seed"}
        code, out = run(tmp_path, doc)
        assert code == 2 and not out.exists()

    def test_runtime_failure_exit_1(self, tmp_path, capsys):
        doc = {"environment": {"name": "tabular", "model": "model.json"}, "algorithm": "chvi", "seed": 0}
        # Valid JSON model, but cyclic and undiscounted: chvi rejects it at run time.
        model = {"num_states": 1, "num_actions": 1, "num_objectives": 2, "gamma": 1.0,
                 "transitions": [[0, 0, 0, 1.0]], "rewards": [[0, 0, 0, [1.0, 0.0]]], "initial": [1.0]}
        (tmp_path / "model.json").write_text(json.dumps(model))
        code, out = run(tmp_path, doc)
        assert code == 1
        assert "NonEpisodicModel" in capsys.readouterr().err
        assert not out.exists()

    def test_chvi_dst(self, tmp_path):
        code, out = run(tmp_path, {"environment": {"name": "deep_sea_treasure"}, "algorithm": "chvi", "seed": 0})
        assert code == 0
        true_front = rows(out / "true_front.csv")
        assert len(true_front) == 1 + 10
        report = json.loads((out / "report.json").read_text())["results"]["chvi"]
        assert report["ccs_matches_true_front"] is True
        assert [r[1:3] for r in rows(out / "ccs.csv")[1:]] == [["1.0", "-1.0"], ["124.0", "-19.0"]]

    def test_chvi_tabular(self, tmp_path):
        model = {"num_states": 2, "num_actions": 2, "num_objectives": 2, "gamma": 0.0,
                 "transitions": [[0, 0, 1, 1.0], [0, 1, 1, 1.0], [1, 0, 1, 1.0], [1, 1, 1, 1.0]],
                 "rewards": [[0, 0, 1, [1.0, 0.0]], [0, 1, 1, [0.0, 1.0]], [1, 0, 1, [0.0, 0.0]],
                             [1, 1, 1, [0.0, 0.0]]],
                 "initial": [1.0, 0.0]}
        (tmp_path / "model.json").write_text(json.dumps(model))
        doc = {"environment": {"name": "tabular", "model": "model.json"}, "algorithm": "chvi", "seed": 0}
        code, out = run(tmp_path, doc)
        assert code == 0
        assert [r[1:3] for r in rows(out / "ccs.csv")[1:]] == [["0.0", "1.0"], ["1.0", "0.0"]]

    def test_study_small(self, tmp_path):
        doc = {**SMALL_MONES, "algorithm": "study", "outer_loop_runs": 3,
               "algorithm_config": {"iterations": 2, "population": 4, "evals_per_policy": 2}}
        code, out = run(tmp_path, doc)
        assert code == 0
        assert len(rows(out / "nes_runs.csv")) == 1 + 3
        comparison = json.loads((out / "report.json").read_text())["results"]["comparison"]
        ref = comparison["ref_point"]
        assert comparison["mones"]["ref_point"] == ref == comparison["outer_nes"]["ref_point"]
        assert len(comparison["mones"]["range"]) == 2


def test_parse_config_seed_override_validation():
    doc = {**SMALL_MONES, "output_dir": "x"}
    assert parse_config(doc, environ={"MORL_SEED": "9"}).seed == 9
    with pytest.raises(ConfigError):
        parse_config(doc, environ={"MORL_SEED": "nine"})


def write_front(path, values, columns=("a", "b")):
    lines = ["policy_id," + ",".join(columns)]
    lines += [f"{i}," + ",".join(repr(float(x)) for x in v) for i, v in enumerate(values)]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestMetrics:
    def test_pairs_and_singles(self, tmp_path, capsys):
        a = write_front(tmp_path / "a.csv", [(2, 0), (0, 2)])
        b = write_front(tmp_path / "b.csv", [(1, 1)])
        code = main(["metrics", "--front", a, "--front", b, "--metric", "eps_additive", "--metric", "hypervolume",
                     "--ref-point=-1,-1", "--metric", "eum", "--samples", "500"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert [f["hypervolume"] for f in report["fronts"]] == [5.0, 4.0]
        assert report["fronts"][0]["eum"]["samples"] == 500
        pairs = {(p["front"], p["reference"]): p["eps_additive"] for p in report["pairs"]}
        assert pairs == {(a, b): 1.0, (b, a): 1.0}

    def test_hypervolume_needs_ref_point(self, tmp_path, capsys):
        a = write_front(tmp_path / "a.csv", [(1, 1)])
        assert main(["metrics", "--front", a, "--metric", "hypervolume"]) == 2
        assert "--ref-point" in capsys.readouterr().err

    def test_pair_metric_needs_reference(self, tmp_path, capsys):
        a = write_front(tmp_path / "a.csv", [(1, 1)])
        assert main(["metrics", "--front", a, "--metric", "eps_additive"]) == 2
        assert "--reference" in capsys.readouterr().err

    def test_coverage_ratio_identity(self, tmp_path, capsys):
        a = write_front(tmp_path / "a.csv", [(1, 2), (2, 1), (3, 0.5)])
        assert main(["metrics", "--front", a, "--reference", a, "--metric", "coverage_ratio", "--eps", "0.01"]) == 0
        cr = json.loads(capsys.readouterr().out)["pairs"][0]["coverage_ratio"]
        assert (cr["precision"], cr["recall"], cr["f_score"]) == (1.0, 1.0, 1.0)

    def test_dimension_mismatch(self, tmp_path):
        a = write_front(tmp_path / "a.csv", [(1, 1)])
        b = write_front(tmp_path / "b.csv", [(1, 1, 1)], columns=("a", "b", "c"))
        assert main(["metrics", "--front", a, "--reference", b, "--metric", "eps_additive"]) == 1

    def test_report_to_file(self, tmp_path):
        a = write_front(tmp_path / "a.csv", [(1, 1), (0, 2)])
        out = tmp_path / "r.json"
        assert main(["metrics", "--front", a, "--metric", "sparsity", "-o", str(out)]) == 0
        assert json.loads(out.read_text())["fronts"][0]["sparsity"] == 2.0


class TestPlot:
    def test_scatter_two_series(self, tmp_path):
        a = write_front(tmp_path / "mones.csv", [(1, 2), (2, 1)], ("flooding", "water-demand"))
        b = write_front(tmp_path / "nes.csv", [(1.5, 1.5)], ("flooding", "water-demand"))
        out = tmp_path / "s.svg"
        assert main(["plot", a, b, "-o", str(out)]) == 0
        svg = out.read_text()
        assert svg.startswith("<svg") and ">flooding<" in svg and ">water-demand<" in svg
        assert ">mones<" in svg and ">nes<" in svg
        assert svg.count("<polyline") == 0

    def test_line_chart(self, tmp_path):
        log = tmp_path / "log.csv"
        log.write_text("iteration,hypervolume,config_hash\n0,1.0,h\n1,2.5,h\n2,3.0,h\n")
        svg = plot_files([log])
        assert svg.count("<polyline") == 1 and ">iteration<" in svg and ">hypervolume<" in svg

    def test_single_point(self, tmp_path):
        a = write_front(tmp_path / "one.csv", [(1, 2)])
        svg = plot_files([a])
        assert svg.count("<circle") == 2  # the marker plus its legend swatch

    def test_byte_stable(self, tmp_path):
        a = write_front(tmp_path / "a.csv", np.random.default_rng(0).normal(size=(20, 2)))
        assert plot_files([a]).encode() == plot_files([a]).encode()

    def test_empty_csv(self, tmp_path, capsys):
        empty = tmp_path / "e.csv"
        empty.write_text("policy_id,a,b\n")
        assert main(["plot", str(empty), "-o", str(tmp_path / "e.svg")]) == 2
        assert not (tmp_path / "e.svg").exists()
