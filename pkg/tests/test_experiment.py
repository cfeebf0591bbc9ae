import csv
import json

import numpy as np
import pytest

from unihssl.data import DataError, load_csv
from unihssl.data import TestSet as MixedTestSet
from unihssl.experiment import cli
from unihssl.experiment.config import ExperimentConfig, apply_settings, load_config, parse_config_text
from unihssl.experiment.evaluate import evaluate_predictions, semantic_collapse
from unihssl.experiment.runner import ablate, run, sweep
from unihssl.pseudolabel import ConfigError

TINY = {
    "synthetic.n_classes": "3", "synthetic.input_dim": "4", "synthetic.n_l": "40", "synthetic.n_u": "60",
    "synthetic.n_test": "50", "hp.train_epochs": "1", "hp.batch_size": "16", "hp.hidden_dims": "8",
    "hp.embed_dim": "4", "hp.pretrain_epochs": "2", "hp.lr": "0.01",
}


def tiny_cfg(**extra):
    return load_config(None, {**TINY, **extra})


def toy_test(labels, domains):
    labels = np.asarray(labels)
    return MixedTestSet(np.zeros((len(labels), 1)), labels, np.asarray(domains))


class TestEvaluate:
    def test_collapse_example(self):
        probs = np.array([[0.1, 0.1, 0.1, 0.7]])  # C=2, index C+1 in 0-based terms
        m = evaluate_predictions(probs, toy_test([1], [1]), 2)
        assert m["accuracy"] == 1.0 and m["domain_id_accuracy"] == 1.0

    def test_all_correct(self):
        labels = np.array([0, 1, 2, 0])
        probs = np.eye(6)[labels + 3 * np.array([0, 1, 0, 1])]
        m = evaluate_predictions(probs, toy_test(labels, [0, 1, 0, 1]), 3)
        assert m["accuracy"] == 1.0 and m["domain_id_accuracy"] == 1.0

    def test_empty(self):
        with pytest.raises(DataError):
            evaluate_predictions(np.zeros((0, 4)), toy_test([], []), 2)

    def test_collapse_range(self):
        pred = np.arange(10)
        assert set(semantic_collapse(pred, 5)) == set(range(5))

    def test_random_predictor_binomial(self):
        rng = np.random.default_rng(0)
        n, c = 20_000, 5
        labels = rng.integers(0, c, n)
        m = evaluate_predictions(rng.random((n, 2 * c)), toy_test(labels, rng.integers(0, 2, n)), c)
        assert abs(m["accuracy"] - 0.2) < 4 * np.sqrt(0.2 * 0.8 / n)

    def test_recount_and_recomposition(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(5, 60))
            labels, dom = rng.integers(0, 4, n), rng.integers(0, 2, n)
            probs = rng.random((n, 8))
            m = evaluate_predictions(probs, toy_test(labels, dom), 4)
            correct = sum(1 for i in range(n) if int(np.argmax(probs[i])) % 4 == labels[i])
            assert m["accuracy"] == correct / n
            parts = sum(m["domain_accuracy"][k] * m["domain_counts"][k]
                        for k in ("L", "U") if m["domain_accuracy"][k] is not None)
            assert abs(parts / n - m["accuracy"]) <= 1e-12

    def test_c_class_model(self):
        m = evaluate_predictions(np.eye(3)[[0, 1]], toy_test([0, 2], [0, 1]), 3)
        assert m["accuracy"] == 0.5 and m["domain_id_accuracy"] is None


class TestConfig:
    def test_parse_comments_and_blanks(self):
        assert parse_config_text("# hi\n\nhp.beta = 0.9  # inline\nout=x\n") == {"hp.beta": "0.9", "out": "x"}

    def test_bad_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("out = a\nnonsense\n")

    def test_seed_list_sets_repetitions(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("repetitions = 3\n")
        cfg = load_config(path, {"seeds": "7"})
        assert cfg.repetitions == 1 and cfg.seed_list == [7]
        with pytest.raises(ConfigError):
            ExperimentConfig(repetitions=3, seeds=[1, 2])

    def test_file_and_override(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("hp.beta = 0.9\nrepetitions = 2\nhp.hidden_dims = 16,8\n")
        cfg = load_config(path, {"hp.beta": "0.7"})
        assert cfg.hp.beta == 0.7 and cfg.repetitions == 2 and cfg.hp.hidden_dims == (16, 8)
        assert cfg.seed_list == [0, 1]

    @pytest.mark.parametrize("settings", [
        {"hp.nope": "1"}, {"bogus": "1"}, {"hp.beta": "1.5"}, {"repetitions": "0"},
        {"variant": "no_such"}, {"data.source": "csv"}, {"sweep.axis": "lambda_pa"},
        {"sweep.axis": "tau", "sweep.grid": "1"}, {"hp.beta": "abc"}, {"synthetic.n_classes": "1"},
    ])
    def test_rejects(self, settings):
        with pytest.raises(ConfigError):
            apply_settings(ExperimentConfig(), settings)


class TestRun:
    def test_three_seeds_and_files(self, tmp_path):
        rep = run(tiny_cfg(), tmp_path)
        assert rep["complete"] and len(rep["runs"]) == 3
        assert {"uni_hssl", "supervised", "supervised_2c"} <= set(rep["summary"])
        assert "std" in rep["summary"]["uni_hssl"]
        for s in (0, 1, 2):
            assert (tmp_path / f"history-{s}.jsonl").exists()
        for r in rep["runs"]:
            for method in ("uni_hssl", "supervised"):
                assert 0.0 <= r[method]["accuracy"] <= 1.0
        assert (tmp_path / "report.txt").read_text().startswith("method")
        on_disk = json.loads((tmp_path / "report.json").read_text())
        assert on_disk["config"]["hp"]["beta"] == 0.8

    def test_single_seed_has_no_std(self, tmp_path):
        rep = run(tiny_cfg(seeds="5"), tmp_path)
        assert "std" not in rep["summary"]["uni_hssl"]

    def test_byte_identical_reports(self, tmp_path):
        run(tiny_cfg(), tmp_path / "a")
        run(tiny_cfg(), tmp_path / "b")
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()

    def test_csv_source(self, tmp_path):
        assert cli.main(["gen-data", "--out", str(tmp_path), "--seed", "3", *sum((["--set", f"{k}={v}"] for k, v in TINY.items()), [])]) == 0
        path = tmp_path / "data-3.csv"
        assert len(load_csv(path, 3)) == 100
        rep = run(tiny_cfg(**{"synthetic.n_classes": "5", "data.source": "csv", "data.csv_path": str(path),
                              "data.n_classes": "3", "repetitions": "1"}), tmp_path / "r")
        assert rep["runs"][0]["uni_hssl"]["domain_counts"] == {"L": 4, "U": 6}  # 10% of each domain


def test_sweep_three_points_and_consistency(tmp_path):
    cfg = tiny_cfg(repetitions="2")
    res = sweep(cfg, "lambda_pl", [0.0, 0.5, 1.0], tmp_path / "s")
    assert len(res["reports"]) == 3
    with (tmp_path / "s" / "sweep.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["value"]) for r in rows] == [0.0, 0.5, 1.0]
    no_pl = run(cfg.replace(variant="no_pl"), tmp_path / "nopl", include_control=False)
    assert res["reports"][0]["runs"][0]["uni_hssl"] == no_pl["runs"][0]["uni_hssl"]
    assert res["reports"][0]["runs"][1]["uni_hssl"] == no_pl["runs"][1]["uni_hssl"]


def test_sweep_rejects_bad_grid_before_running(tmp_path):
    with pytest.raises(ConfigError):
        sweep(tiny_cfg(), "beta", [0.5, 1.0], tmp_path / "s")
    assert not (tmp_path / "s").exists()


def test_ablate_seven_rows_seed_locked(tmp_path):
    table = ablate(tiny_cfg(repetitions="1"), tmp_path)
    assert [r["variant"] for r in table["rows"]] == ["full", "no_wma", "no_sup", "no_pl", "no_pa", "no_mixup", "no_prog_mixup"]
    assert len((tmp_path / "ablation.txt").read_text().splitlines()) == 9
    sup = {json.loads((tmp_path / v / "report.json").read_text())["runs"][0]["supervised"]["accuracy"]
           for v in ("full", "no_sup", "no_pa")}
    assert len(sup) == 1


class TestCli:
    def args(self, *extra):
        return [*sum((["--set", f"{k}={v}"] for k, v in TINY.items()), []), *extra]

    def test_train_eval_pretrain(self, tmp_path, capsys):
        assert cli.main(["train", "--seed", "0", "--out", str(tmp_path), *self.args()]) == 0
        assert "Uni-HSSL" in capsys.readouterr().out
        assert cli.main(["eval", "--seed", "0", "--checkpoint", str(tmp_path / "model-0.npz"), *self.args()]) == 0
        evaluated = json.loads(capsys.readouterr().out)
        report = json.loads((tmp_path / "report.json").read_text())
        assert evaluated["accuracy"] == report["runs"][0]["uni_hssl"]["accuracy"]
        assert cli.main(["pretrain", "--seed", "0", "--out", str(tmp_path / "p"), *self.args()]) == 0
        assert (tmp_path / "p" / "pretrained-0.npz").exists()

    def test_sweep_and_ablate(self, tmp_path, capsys):
        assert cli.main(["sweep", "--sweep", "beta", "--grid", "0.5,0.9", "--seed", "1",
                         "--out", str(tmp_path / "s"), *self.args()]) == 0
        assert capsys.readouterr().out.splitlines()[0].startswith("axis,value")
        assert cli.main(["ablate", "--seed", "1", "--out", str(tmp_path / "a"), *self.args()]) == 0
        assert "no_prog_mixup" in capsys.readouterr().out

    def test_variant_flag(self, tmp_path):
        assert cli.main(["train", "--seed", "0", "--variant", "no_pa", "--out", str(tmp_path), *self.args()]) == 0
        assert json.loads((tmp_path / "report.json").read_text())["config"]["variant"] == "no_pa"

    def test_errors_exit_2(self, tmp_path, capsys):
        assert cli.main(["train", "--set", "hp.beta=2", "--out", str(tmp_path)]) == 2
        assert "error" in capsys.readouterr().err
        assert cli.main(["eval", "--checkpoint", str(tmp_path / "missing.npz"), *self.args()]) == 2
