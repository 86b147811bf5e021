import json
import math

import numpy as np
import pytest

from evtraj import metrics
from evtraj.aggregate import build_report
from evtraj.harness import cli
from evtraj.harness import config as cfgmod
from evtraj.harness.config import ConfigError, EvalConfig, ExperimentConfig
from evtraj.harness.density import density_from_uncertainty, maneuver_density
from evtraj.harness.evaluate import EvaluationError, MetricsReport, evaluate, evaluate_predictions, write_outputs
from evtraj.harness.experiment import (
    ROWS,
    importance_sampling_experiment,
    select,
    uncertainty_scores,
    write_result,
)
from evtraj.prediction import ScenePrediction
from evtraj.predictor import checkpoint
from evtraj.predictor.network import ModelConfig, init_params
from evtraj.predictor.train import TrainConfig
from evtraj.synthgen import MANEUVERS, GeneratorConfig, generate, write_dataset

from oracles import brute_rauc, brute_spearman

SMALL = ModelConfig(history_steps=4, horizon=3, n_modes=2, hidden=5)


def small_data(n=160, seed=0, weights=(0.8, 0.09, 0.09, 0.01, 0.01)):
    return generate(GeneratorConfig(n_scenes=n, seed=seed, maneuver_weights=weights,
                                    history_steps=4, future_steps=3, lead_in_steps=2))


def small_experiment(**kw):
    base = dict(train=TrainConfig(model=SMALL, epochs=2), base_epochs=2, retrain_epochs=1, seeds=(0,))
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_parse(self):
        kv = cfgmod.parse_text("n_scenes = 10  # comment\nmaneuver_weights=1,0,0,0,0\n\nlr = 0.01\n")
        assert kv == {"n_scenes": 10, "maneuver_weights": (1.0, 0.0, 0.0, 0.0, 0.0), "lr": 0.01}

    @pytest.mark.parametrize("text", ["bogus = 1", "n_scenes: 3", "n_scenes = many"])
    def test_errors_name_the_line(self, text):
        with pytest.raises(ConfigError, match=":1:"):
            cfgmod.parse_text("\n".join(["", text])[1:])

    def test_builders(self):
        kv = cfgmod.parse_text("n_modes = 3\nfuture_steps = 7\nlambda1 = 0.5\nspeed_min = 2\n"
                               "seeds = 1,2\nadded_fraction = 0.1\nrauc_error = wade\n")
        tc = cfgmod.train_config(kv)
        assert tc.model.n_modes == 3 and tc.model.horizon == 7 and tc.weights.lambda1 == 0.5
        assert cfgmod.generator_config(kv).speed_range == (2.0, 12.0)
        exp = cfgmod.experiment_config(kv)
        assert exp.seeds == (1, 2) and exp.added_fraction == 0.1 and exp.evaluation.rauc_error == "wade"

    def test_seed_override(self, monkeypatch):
        monkeypatch.setenv("EVTRAJ_SEED", "42")
        kv = {"seed": 1, "seeds": (0, 1)}
        assert cfgmod.generator_config(kv).seed == 42
        assert cfgmod.train_config(kv).seed == 42
        assert cfgmod.experiment_config(kv).seeds == (42,)

    @pytest.mark.parametrize("kw", [dict(initial_fraction=0.0), dict(added_fraction=1.5),
                                    dict(initial_fraction=0.8, added_fraction=0.3),
                                    dict(selection=("magic",)), dict(seeds=())])
    def test_experiment_validation(self, kw):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kw)

    def test_invalid_values_become_config_errors(self):
        with pytest.raises(ConfigError):
            cfgmod.generator_config({"maneuver_weights": (1.0,)})


class TestEvaluate:
    def oracle(self, futures):
        preds, reports = [], []
        for f in futures:
            ones = np.ones((1,) + f.shape)
            p = ScenePrediction(f[None], ones, ones * 2, ones, np.array([1.0]))
            preds.append(p)
            reports.append(build_report(p))
        return preds, reports

    def test_oracle_predictor_scores_zero(self, rng):
        futures = [rng.normal(0, 5, (3, 2)) for _ in range(10)]
        ev = evaluate_predictions(*self.oracle(futures), futures)
        r = ev.report
        assert (r.min_ade, r.w_ade, r.min_fde, r.w_fde, r.miss_rate, r.ece) == (0, 0, 0, 0, 0, 0)

    def test_constant_uncertainty_rauc(self, rng):
        futures = [rng.normal(0, 5, (3, 2)) for _ in range(6)]
        preds, reports = self.oracle(futures)
        preds = [p.with_means(p.gamma + rng.normal(0, 1, p.gamma.shape)) for p in preds]
        ev = evaluate_predictions(preds, reports, futures)
        assert np.ptp(ev.uncertainty) == 0.0
        expected, _ = brute_rauc(ev.min_ade.tolist(), [1.0] * 6)
        assert ev.report.min_ade_rauc == pytest.approx(expected, rel=1e-12)

    def test_reports_byte_identical(self, tmp_path):
        recs = small_data()
        params = init_params(SMALL, 1)
        for d in ("a", "b"):
            write_outputs(evaluate(params, recs), tmp_path / d)
        for name in ("metrics.json", "rejection_curve.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_wade_channel(self, tmp_path):
        ev = evaluate(init_params(SMALL, 1), small_data())
        _, curve = write_outputs(ev, tmp_path, "wade")
        first = curve.read_text().splitlines()[1].split(",")
        assert float(first[1]) == pytest.approx(ev.w_ade.mean())

    def test_empty_split(self):
        data = [r for r in small_data() if r.split != "test"]
        with pytest.raises(EvaluationError):
            evaluate(init_params(SMALL), data)
        with pytest.raises(EvaluationError):
            evaluate_predictions([], [], [])

    def test_report_validation(self):
        with pytest.raises(EvaluationError):
            MetricsReport(0, 0, 0, 0, 1.5, 0, 0, 0, 1)
        with pytest.raises(EvaluationError):
            MetricsReport(math.nan, 0, 0, 0, 0, 0, 0, 0, 1)


class _Guarded:
    """Record wrapper that logs attribute reads and forbids the future."""

    def __init__(self, inner, log):
        self._inner, self._log = inner, log

    def __getattr__(self, name):
        self._log.append(name)
        if name == "future":
            raise AssertionError("selector read a ground-truth future")
        return getattr(self._inner, name)


class TestSelection:
    def test_uncertainty_selector_never_reads_futures(self):
        recs = small_data()
        log = []
        guarded = [_Guarded(r, log) for r in recs if r.split == "train_b"]
        scores = uncertainty_scores(init_params(SMALL, 3), guarded)
        assert len(scores) == len(guarded)
        assert "history" in log and "future" not in log
        chosen = select(init_params(SMALL, 3), guarded, "uncertainty", 0.5, seed=0)
        assert len(chosen) == math.ceil(len(guarded) / 2)

    def test_uncertainty_selection_is_top_scores(self):
        cands = [r for r in small_data() if r.split == "train_b"]
        params = init_params(SMALL, 3)
        scores = uncertainty_scores(params, cands)
        chosen = select(params, cands, "uncertainty", 0.25, seed=0)
        cut = np.sort(scores)[::-1][len(chosen) - 1]
        assert all(scores[cands.index(r)] >= cut for r in chosen)

    def test_zero_fraction_selects_nothing(self):
        assert select(init_params(SMALL), small_data(), "random", 0.0, seed=0) == []


class TestExperiment:
    def test_zero_added_rows_equal_base(self):
        res = importance_sampling_experiment(small_data(), small_experiment(added_fraction=0.0))
        rows = res.runs[0].rows
        for name in ("Random", "Error", "Uncertainty"):
            assert rows[name] == rows["Base"]

    def test_deterministic(self, tmp_path):
        data = small_data()
        cfg = small_experiment(seeds=(0, 1))
        a = write_result(importance_sampling_experiment(data, cfg), tmp_path / "a")
        b = write_result(importance_sampling_experiment(data, cfg), tmp_path / "b")
        assert a["json"].read_bytes() == b["json"].read_bytes()
        assert a["table"].read_bytes() == b["table"].read_bytes()

    def test_table_shape(self):
        res = importance_sampling_experiment(small_data(), small_experiment(seeds=(0, 1)))
        assert list(res.summary()) == list(ROWS)
        lines = res.table().splitlines()
        assert len(lines) == 1 + len(ROWS)
        assert lines[2].startswith("Random 75%") and "±" in lines[1]
        for row in ROWS:
            vals = [run.rows[row]["min_ade"] for run in res.runs]
            assert res.summary()[row]["min_ade"]["mean"] == pytest.approx(np.mean(vals))

    def test_missing_split(self):
        data = [r for r in small_data() if r.split != "train_b"]
        with pytest.raises(ConfigError):
            importance_sampling_experiment(data, small_experiment())


class TestDensity:
    def test_uniform_frequencies_undefined(self):
        recs = small_data(n=100, weights=(1, 0, 0, 0, 0))
        test = [r for r in recs if r.split == "test"]
        res = density_from_uncertainty(test, np.arange(len(test), dtype=float), maneuver_density(recs))
        assert not res.defined and math.isnan(res.spearman)
        assert "undefined" in res.format_table()
        assert json.dumps(res.to_dict())

    def test_matches_brute_force_rank_correlation(self, rng):
        recs = small_data(n=400)
        test = [r for r in recs if r.split == "test"]
        dens = maneuver_density(recs)
        for _ in range(5):
            perm = dict(zip(MANEUVERS, rng.permutation(list(dens.values()))))
            unc = rng.exponential(1, len(test))
            res = density_from_uncertainty(test, unc, perm)
            assert res.spearman == pytest.approx(brute_spearman([perm[r.maneuver] for r in test], unc.tolist()),
                                                 abs=1e-12)
            means = [row["mean_uncertainty"] for row in res.table]
            freqs = [row["frequency"] for row in res.table]
            assert res.maneuver_spearman == pytest.approx(brute_spearman(freqs, means), abs=1e-12)

    def test_density_from_training_splits(self):
        recs = small_data(n=400)
        train = [r for r in recs if r.split in ("train_a", "train_b")]
        dens = maneuver_density(recs)
        assert dens["straight"] == pytest.approx(sum(r.maneuver == "straight" for r in train) / len(train))
        assert sum(dens.values()) == pytest.approx(1.0)


class TestCli:
    @pytest.fixture
    def workspace(self, tmp_path):
        conf = tmp_path / "run.cfg"
        conf.write_text("n_scenes = 120\nhistory_steps = 4\nfuture_steps = 3\nlead_in_steps = 2\n"
                        "n_modes = 2\nhidden = 5\nepochs = 2\n"
                        "dataset = data.jsonl\nbase_epochs = 1\nretrain_epochs = 1\nseeds = 0\n")
        return tmp_path, conf

    def test_full_pipeline(self, workspace, capsys):
        d, conf = workspace
        data, model = d / "data.jsonl", d / "model.json"
        assert cli.main(["generate", "--config", str(conf), "--out", str(data)]) == 0
        assert cli.main(["train", "--data", str(data), "--config", str(conf), "--out", str(model)]) == 0
        assert cli.main(["evaluate", "--model", str(model), "--data", str(data), "--out", str(d / "ev"),
                         "--rauc-error", "wade"]) == 0
        assert json.loads((d / "ev" / "metrics.json").read_text())["config"]["rauc_error"] == "wade"
        assert cli.main(["reject-curve", "--model", str(model), "--data", str(data),
                         "--out", str(d / "curve.csv")]) == 0
        assert (d / "curve.csv").read_text().startswith("rejection_fraction,retained_mean_error\n")
        assert cli.main(["density-check", "--model", str(model), "--data", str(data)]) == 0
        assert "spearman" in capsys.readouterr().out
        assert cli.main(["importance-sampling", "--config", str(conf), "--out", str(d / "is")]) == 0
        assert (d / "is" / "importance_sampling.txt").exists()

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("nonsense = 1\n")
        assert cli.main(["generate", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
        assert cli.main(["generate", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path / "x")]) == 2

    def test_data_error_exit_code(self, workspace):
        d, conf = workspace
        bad = d / "bad.jsonl"
        bad.write_text("{oops\n")
        assert cli.main(["train", "--data", str(bad), "--config", str(conf), "--out", str(d / "m")]) == 3
        assert cli.main(["train", "--data", str(d / "none"), "--config", str(conf), "--out", str(d / "m")]) == 3
        data = write_dataset(small_data(), d / "ok.jsonl")
        junk = d / "junk.json"
        junk.write_text("{}")
        assert cli.main(["evaluate", "--model", str(junk), "--data", str(data), "--out", str(d / "e")]) == 3

    def test_numeric_failure_exit_code(self, workspace):
        d, conf = workspace
        data = write_dataset(small_data(), d / "ok.jsonl")
        conf.write_text(conf.read_text() + "lr = 1e300\n")
        assert cli.main(["train", "--data", str(data), "--config", str(conf), "--out", str(d / "m")]) == 4
