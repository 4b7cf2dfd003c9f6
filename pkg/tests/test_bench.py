import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from src.bench.cli import main
from src.bench.model import build_model
from src.bench.report import plot_curves, read_metrics, report_final
from src.bench.suite import (
    FAILED,
    SuiteMatrix,
    accuracy_drops,
    load_suite,
    run_suite,
)
from src.bench.trainer import MetricRow, evaluate, run_training, write_metrics_csv
from src.core.config import make_config, read_key_values
from src.core.constants import CSV_COLUMNS, EXIT_CONFIG, EXIT_INGESTION, EXIT_NUMERICAL
from src.core.errors import ConfigError, NumericalFailure, UsageError
from src.data.mnist import Dataset

SMALL_MODEL = {
    "hidden_layers": "2",
    "hidden_units": "16",
    "groups": "4",
    "epochs": "5",
    "test_batch_size": "32",
}


def rows_from(accuracies):
    return [MetricRow(i + 1, 1.0, 0.5, acc, 0.1) for i, acc in enumerate(accuracies)]


class TestConfig:
    def test_defaults(self):
        config = make_config()
        assert config.norm == "ebn"
        assert config.batch_size == 128
        assert config.effective_lr == pytest.approx(0.1)
        assert config.run_name() == "ebn_bs128_seed0"

    def test_linear_scaling_rule(self):
        assert make_config(batch_size=256).effective_lr == pytest.approx(0.2)
        assert make_config(batch_size=16, lr=0.8).effective_lr == pytest.approx(0.1)

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("norm=BN\nbatch-size=64\nepochs=3\n")
        config = make_config(path, epochs=7, seed=None)
        assert (config.norm, config.batch_size, config.epochs, config.seed) == ("bn", 64, 7, 0)

    def test_read_key_values_normalizes_keys(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("--Hidden-Units=32\nstd_center=global\n")
        assert read_key_values(path) == {"hidden_units": "32", "std_center": "global"}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            make_config(tmp_path / "absent.cfg")

    @pytest.mark.parametrize(
        "overrides",
        [
            {"norm": "batchrenorm"},
            {"unknown_key": 1},
            {"batch_size": 0},
            {"momentum": 1.0},
            {"rho": 0.0},
            {"norm": "gn", "groups": 5},
            {"norm": "ln", "fuse": True},
            {"seed": -1},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ConfigError):
            make_config(**overrides)

    def test_kind(self):
        kind = make_config(norm="ebn", std_center="global").kind
        assert kind.label() == "ebn(global)"


class TestModel:
    def test_default_parameter_count(self):
        model = build_model(make_config())
        hidden = 128
        expected = (
            784 * hidden + hidden
            + 3 * (hidden * hidden + hidden)
            + hidden * 10 + 10
            + 4 * 2 * hidden
        )
        assert model.parameter_count() == expected
        assert model.count_norm_layers() == 4

    def test_layer_order(self):
        model = build_model(make_config(hidden_layers=2, hidden_units=8, groups=4))
        assert [layer.name for layer in model.layers] == [
            "fc0", "norm0", "relu0", "fc1", "norm1", "relu1", "head",
        ]

    def test_initialization_bound(self):
        model = build_model(make_config(hidden_layers=1, hidden_units=8, groups=4))
        first = model.layers[0]
        bound = 1.0 / np.sqrt(784)
        assert np.abs(first.weight.data).max() <= bound
        assert np.abs(first.bias.data).max() <= bound

    def test_ebn_keeps_one_running_std_per_layer(self):
        model = build_model(make_config(norm="ebn"))
        states = [layer.state for layer in model.norm_layers]
        assert len(states) == 4
        assert all(state.running_std.shape == (1,) for state in states)
        assert all(state.running_mean.shape == (128,) for state in states)

    def test_no_hidden_layers_is_logistic_regression(self, small_config):
        config = small_config(norm="bn", hidden_layers=0, lr=0.8, out=None)
        model = build_model(config)
        assert [layer.name for layer in model.layers] == ["head"]
        assert model.parameter_count() == 784 * 10 + 10

        result = run_training(config, progress=False)
        assert result.model.count_norm_layers() == 0
        assert result.rows[-1].train_loss < result.rows[0].train_loss

    def test_same_seed_same_weights(self):
        a = build_model(make_config(seed=3, hidden_layers=1, hidden_units=8))
        b = build_model(make_config(seed=3, hidden_layers=1, hidden_units=8))
        for pa, pb in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(pa.data, pb.data)


class TestTraining:
    def test_writes_metrics_csv(self, small_config):
        config = small_config(norm="bn")
        result = run_training(config, progress=False)

        assert len(result.rows) == 5
        lines = result.csv_path.read_text().splitlines()
        assert lines[0].startswith("# norm=bn batch_size=16 effective_lr=0.0125")
        assert lines[1] == ",".join(CSV_COLUMNS)
        frame = read_metrics(result.csv_path)
        assert list(frame.columns) == list(CSV_COLUMNS)
        assert frame["epoch"].tolist() == [1, 2, 3, 4, 5]
        assert frame["test_acc"].between(0, 1).all()

    def test_learns_synthetic_digits(self, small_config):
        result = run_training(small_config(norm="ebn", lr=0.8, epochs=8), progress=False)
        assert result.rows[-1].test_accuracy > 0.5
        assert result.rows[-1].train_loss < result.rows[0].train_loss

    def test_deterministic(self, small_config, mnist_data, tmp_path):
        first = run_training(
            small_config(norm="gn", out=tmp_path / "a.csv"), datasets=mnist_data, progress=False
        )
        second = run_training(
            small_config(norm="gn", out=tmp_path / "b.csv"), datasets=mnist_data, progress=False
        )

        def without_wall_seconds(path):
            return [line.rsplit(",", 1)[0] for line in path.read_text().splitlines()[1:]]

        assert without_wall_seconds(first.csv_path) == without_wall_seconds(second.csv_path)
        for a, b in zip(first.rows, second.rows):
            assert (a.epoch, a.train_loss, a.train_accuracy, a.test_accuracy) == (
                b.epoch,
                b.train_loss,
                b.train_accuracy,
                b.test_accuracy,
            )

    @pytest.mark.parametrize("norm", ["bn", "ebn", "ln", "in", "gn"])
    def test_zero_lr_keeps_untrained_predictions(self, small_config, mnist_data, norm):
        # one full-set batch and rho=1 give the same running stats every epoch
        config = small_config(norm=norm, lr=0.0, batch_size=120, rho=1.0, out=None)
        result = run_training(config, datasets=mnist_data, progress=False)
        assert len({row.test_accuracy for row in result.rows}) == 1
        for trained, initial in zip(result.model.parameters(), build_model(config).parameters()):
            np.testing.assert_array_equal(trained.data, initial.data)

    def test_instance_norm_on_flat_features_outputs_beta(self, small_config, mnist_data):
        # H = W = 1 leaves one element per set, so x_hat is 0 and the input is lost
        config = small_config(norm="in", lr=0.8, out=None)
        result = run_training(config, datasets=mnist_data, progress=False)
        assert all(row.test_accuracy == pytest.approx(0.1) for row in result.rows)

    def test_eval_does_not_depend_on_batch_size(self, small_config, mnist_data):
        config = small_config(norm="bn", out=None)
        result = run_training(config, datasets=mnist_data, progress=False)
        _, test = mnist_data
        _, single = evaluate(result.model, test, batch_size=1)
        _, whole = evaluate(result.model, test, batch_size=256)
        np.testing.assert_allclose(single, whole, rtol=0, atol=1e-12)

    def test_running_stats_updated_once_per_step(self, small_config, mnist_data):
        config = small_config(norm="ebn", out=None)
        result = run_training(config, datasets=mnist_data, progress=False)
        steps = 5 * int(np.ceil(120 / 16))
        assert all(layer.state.count == steps for layer in result.model.norm_layers)

    def test_fusion_check(self, small_config):
        result = run_training(small_config(norm="ebn", fuse=True), progress=False)
        assert result.fusion.max_abs_logit_diff < 1e-9
        assert result.fusion.changed_predictions == 0
        assert result.fusion.fused_norm_layers == 0
        assert result.fusion.fused_accuracy == result.fusion.accuracy

    def test_non_finite_loss(self, small_config, mnist_data):
        train, test = mnist_data
        pixels = train.pixels.copy()
        pixels[3, 0] = np.nan
        broken = Dataset(pixels, train.labels, "train", train.standardization)
        with pytest.raises(NumericalFailure) as info:
            run_training(small_config(norm="bn", out=None), datasets=(broken, test), progress=False)
        assert info.value.epoch == 1
        assert info.value.exit_code == EXIT_NUMERICAL

    def test_needs_data(self):
        with pytest.raises(ConfigError):
            run_training(make_config(), progress=False)


class TestReport:
    def test_final_window_and_best_epoch(self):
        accuracies = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.9, 0.8]
        report = report_final(rows_from(accuracies))
        assert report.final_accuracy == pytest.approx(0.64)
        assert report.best_epoch == 7
        assert report.best_accuracy == pytest.approx(0.9)
        assert report.stability == pytest.approx(np.diff(accuracies).std())
        assert report.epochs == 8

    def test_needs_five_epochs(self):
        with pytest.raises(UsageError):
            report_final(rows_from([0.5] * 4))

    def test_reads_csv(self, tmp_path):
        config = make_config(norm="bn")
        path = write_metrics_csv(rows_from([0.9] * 6), tmp_path / "run.csv", config)
        report = report_final(path)
        assert report.final_accuracy == pytest.approx(0.9)
        assert report.stability == pytest.approx(0.0)

    def test_plot(self, tmp_path):
        config = make_config(norm="bn")
        path = write_metrics_csv(rows_from([0.1, 0.5, 0.7, 0.8, 0.9]), tmp_path / "run.csv", config)
        out = plot_curves([path], tmp_path / "plots" / "curves.png", title="bn")
        assert out.exists() and out.stat().st_size > 0


class TestSuite:
    def test_load_suite(self, tmp_path):
        path = tmp_path / "suite.cfg"
        path.write_text("norms=BN, ebn\nbatch_sizes=16,64\nseeds=0,1\nepochs=5\n")
        matrix = load_suite(path)
        assert matrix.norms == ["bn", "ebn"]
        assert matrix.batch_sizes == [16, 64]
        assert matrix.seeds == [0, 1]
        assert matrix.base == {"epochs": "5"}

    def test_load_suite_missing_keys(self, tmp_path):
        path = tmp_path / "suite.cfg"
        path.write_text("norms=bn\n")
        with pytest.raises(ConfigError):
            load_suite(path)

    def test_failed_cell_does_not_stop_the_rest(self, mnist_data, tmp_path):
        base = {**SMALL_MODEL, "groups": "5"}
        matrix = SuiteMatrix(norms=["bn", "gn"], batch_sizes=[16], base=base)
        result = run_suite(matrix, mnist_data, out_dir=tmp_path)

        assert result.table.loc[16, "gn"] == FAILED
        assert 0.0 <= result.table.loc[16, "bn"] <= 1.0
        assert list(result.failures) == [(16, "gn")]
        assert (tmp_path / "bn_bs16_seed0.csv").exists()
        suite_csv = pd.read_csv(tmp_path / "suite.csv", index_col=0)
        assert suite_csv.loc[16, "gn"] == FAILED
        assert (tmp_path / "suite_drops.csv").exists()

    def test_seeds_are_averaged(self, mnist_data):
        matrix = SuiteMatrix(norms=["ln"], batch_sizes=[32], seeds=[0, 1], base=SMALL_MODEL)
        result = run_suite(matrix, mnist_data)
        single = []
        for seed in (0, 1):
            cell = run_suite(SuiteMatrix(["ln"], [32], [seed], SMALL_MODEL), mnist_data)
            single.append(cell.table.loc[32, "ln"])
        assert result.table.loc[32, "ln"] == pytest.approx(np.mean(single))

    def test_accuracy_drops(self):
        table = pd.DataFrame(
            {"bn": [0.98, 0.95], "ebn": [0.97, FAILED]},
            index=pd.Index([16, 1024], name="batch_size"),
        )
        drops = accuracy_drops(table)
        assert drops.loc["bn", "drop"] == pytest.approx(-0.03)
        assert drops.loc["bn", "largest_batch"] == 1024
        assert np.isnan(drops.loc["ebn", "drop"])


class TestCli:
    def small_args(self, mnist_dir, tmp_path, *extra):
        return [
            "--data-dir", str(mnist_dir),
            "--out", str(tmp_path / "run.csv"),
            "--hidden-layers", "2",
            "--hidden-units", "16",
            "--groups", "4",
            "--epochs", "5",
            "--batch-size", "16",
            "-q",
            *extra,
        ]

    def test_train(self, mnist_dir, tmp_path):
        result = CliRunner().invoke(main, self.small_args(mnist_dir, tmp_path, "--norm", "EBN"))
        assert result.exit_code == 0, result.output
        assert "final-5 accuracy" in result.output
        assert (tmp_path / "run.csv").exists()

    def test_train_with_fusion(self, mnist_dir, tmp_path):
        args = self.small_args(mnist_dir, tmp_path, "--norm", "bn", "--fuse")
        result = CliRunner().invoke(main, args)
        assert result.exit_code == 0, result.output
        assert "fused model" in result.output

    def test_config_error(self, mnist_dir, tmp_path):
        args = self.small_args(mnist_dir, tmp_path, "--norm", "gn", "--groups", "5")
        assert CliRunner().invoke(main, args).exit_code == EXIT_CONFIG

    def test_negative_seed_is_config_error(self, mnist_dir, tmp_path):
        args = self.small_args(mnist_dir, tmp_path, "--seed=-1")
        assert CliRunner().invoke(main, args).exit_code == EXIT_CONFIG

    def test_ingestion_error(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        result = CliRunner().invoke(main, self.small_args(empty, tmp_path))
        assert result.exit_code == EXIT_INGESTION

    def test_report(self, tmp_path):
        path = write_metrics_csv(rows_from([0.5] * 5), tmp_path / "run.csv", make_config())
        result = CliRunner().invoke(main, ["--report", str(path)])
        assert result.exit_code == 0, result.output
        assert "final-5 accuracy 50.00%" in result.output

    def test_suite(self, mnist_dir, tmp_path):
        suite = tmp_path / "suite.cfg"
        suite.write_text("norms=bn,ln\nbatch_sizes=16\n")
        args = self.small_args(mnist_dir, tmp_path, "--suite", str(suite))
        result = CliRunner().invoke(main, args)
        assert result.exit_code == 0, result.output
        assert (tmp_path / "suite.csv").exists()
        assert (tmp_path / "ln_bs16_seed0.csv").exists()

    def test_verify(self):
        result = CliRunner().invoke(main, ["--verify", "-q"])
        assert result.exit_code == 0, result.output
        assert "statistics oracle: 0 mismatches" in result.output
