"""Command-line behavior: artifacts, determinism, exit codes."""

import numpy as np
import pytest

from oadetect import cli
from oadetect.dataset import (
    LabeledSample,
    read_features,
    read_model,
    write_features,
)
from oadetect.features import FeatureVector
from oadetect.som import NORMAL, SICK


def run_cli(*args) -> int:
    return cli.main([str(a) for a in args])


def make_corpus(tmp_path, normal=4, sick=6, seed=1, name="corpus"):
    out = tmp_path / name
    rc = run_cli(
        "synth", "--out", out, "--count-normal", normal, "--count-sick", sick,
        "--width", 60, "--height", 80, "--seed", seed,
    )
    assert rc == 0
    return out


class TestSynth:
    def test_default_counts(self, tmp_path, capsys):
        rc = run_cli("synth", "--out", tmp_path / "c", "--width", 60, "--height", 80)
        assert rc == 0
        assert len(list((tmp_path / "c" / "normal").glob("*.png"))) == 12
        assert len(list((tmp_path / "c" / "sick").glob("*.png"))) == 30
        assert "12 normal and 30 sick" in capsys.readouterr().out

    def test_same_seed_identical_folders(self, tmp_path):
        a = make_corpus(tmp_path, seed=7, name="a")
        b = make_corpus(tmp_path, seed=7, name="b")
        for sub in ("normal", "sick"):
            files_a = sorted((a / sub).glob("*.png"))
            files_b = sorted((b / sub).glob("*.png"))
            assert [f.name for f in files_a] == [f.name for f in files_b]
            for fa, fb in zip(files_a, files_b):
                assert fa.read_bytes() == fb.read_bytes()

    def test_zero_normal_count(self, tmp_path):
        out = make_corpus(tmp_path, normal=0, sick=3)
        assert list((out / "normal").glob("*.png")) == []
        assert len(list((out / "sick").glob("*.png"))) == 3


class TestExtract:
    def test_line_count_and_dimension(self, tmp_path):
        corpus = make_corpus(tmp_path)
        features = tmp_path / "features.txt"
        rc = run_cli(
            "extract", "--normal", corpus / "normal", "--sick", corpus / "sick",
            "--bins", 32, "--out", features,
        )
        assert rc == 0
        samples, bins = read_features(features)
        assert len(samples) == 10
        assert bins == 32
        assert all(len(s.features) == 34 for s in samples)
        assert features.read_text().splitlines()[0] == "# features k=34 bins=32"

    def test_missing_directory_exits_2(self, tmp_path, capsys):
        rc = run_cli(
            "extract", "--normal", tmp_path / "nope", "--sick", tmp_path / "nope2",
            "--out", tmp_path / "f.txt",
        )
        assert rc == cli.EXIT_DATA
        assert "nope" in capsys.readouterr().err

    def test_rerun_is_byte_identical(self, tmp_path):
        corpus = make_corpus(tmp_path)
        out_a, out_b = tmp_path / "a.txt", tmp_path / "b.txt"
        for out in (out_a, out_b):
            assert run_cli(
                "extract", "--normal", corpus / "normal", "--sick", corpus / "sick",
                "--out", out,
            ) == 0
        assert out_a.read_bytes() == out_b.read_bytes()
        assert (tmp_path / "a.txt.norm").read_bytes() == (tmp_path / "b.txt.norm").read_bytes()

    def test_norm_sidecar_reused_for_test_data(self, tmp_path):
        corpus = make_corpus(tmp_path)
        train_f = tmp_path / "train.txt"
        assert run_cli(
            "extract", "--normal", corpus / "normal", "--sick", corpus / "sick",
            "--out", train_f,
        ) == 0
        test_f = tmp_path / "test.txt"
        assert run_cli(
            "extract", "--normal", corpus / "normal", "--sick", corpus / "sick",
            "--out", test_f, "--norm-from", tmp_path / "train.txt.norm",
        ) == 0
        # same corpus + same normalization bounds => identical vectors
        assert not (tmp_path / "test.txt.norm").exists()
        a, _ = read_features(train_f)
        b, _ = read_features(test_f)
        for sa, sb in zip(a, b):
            np.testing.assert_array_equal(sa.features.values, sb.features.values)

    def test_histogram_dump(self, tmp_path):
        corpus = make_corpus(tmp_path, normal=1, sick=1)
        dump = tmp_path / "hists"
        assert run_cli(
            "extract", "--normal", corpus / "normal", "--sick", corpus / "sick",
            "--out", tmp_path / "f.txt", "--dump-histograms", dump,
        ) == 0
        files = sorted(dump.glob("*.csv"))
        assert len(files) == 2
        lines = files[0].read_text().splitlines()
        assert lines[0] == "bin,probability"
        assert len(lines) == 33  # header + 32 bins
        probabilities = [float(line.split(",")[1]) for line in lines[1:]]
        assert sum(probabilities) == pytest.approx(1.0, abs=1e-9)


class TestTrain:
    def test_report_accuracy_on_synthetic_corpus(self, tmp_path, capsys):
        corpus = make_corpus(tmp_path, normal=6, sick=10, seed=2)
        features = tmp_path / "features.txt"
        assert run_cli(
            "extract", "--normal", corpus / "normal", "--sick", corpus / "sick",
            "--out", features,
        ) == 0
        model_path = tmp_path / "model.txt"
        rc = run_cli("train", "--features", features, "--out", model_path, "--seed", 0)
        assert rc == 0
        assert model_path.exists()
        report_text = (tmp_path / "model.txt.report.txt").read_text()
        accuracy = float(report_text.split("training accuracy: ")[1].split("%")[0])
        assert accuracy >= 85.0

    def test_full_rate_single_epoch_absorbs_singletons(self, tmp_path):
        samples = [
            LabeledSample(FeatureVector([0.0, 0.0], "a"), NORMAL, "a"),
            LabeledSample(FeatureVector([1.0, 1.0], "b"), SICK, "b"),
        ]
        features = tmp_path / "pair.txt"
        write_features(samples, features, bins=0)
        model_path = tmp_path / "model.txt"
        rc = run_cli(
            "train", "--features", features, "--out", model_path,
            "--epochs", 1, "--lr", 1.0, "--seed", 4,
        )
        assert rc == 0
        model = read_model(model_path)
        rows = sorted(model.weights.tolist())
        assert rows == [[0.0, 0.0], [1.0, 1.0]]

    def test_same_seed_identical_model_files(self, tmp_path):
        corpus = make_corpus(tmp_path)
        features = tmp_path / "features.txt"
        assert run_cli(
            "extract", "--normal", corpus / "normal", "--sick", corpus / "sick",
            "--out", features,
        ) == 0
        for name in ("m1.txt", "m2.txt"):
            assert run_cli(
                "train", "--features", features, "--out", tmp_path / name, "--seed", 9,
            ) == 0
        assert (tmp_path / "m1.txt").read_bytes() == (tmp_path / "m2.txt").read_bytes()


class TestTest:
    def trained(self, tmp_path):
        corpus = make_corpus(tmp_path, normal=5, sick=8, seed=3)
        features = tmp_path / "features.txt"
        assert run_cli(
            "extract", "--normal", corpus / "normal", "--sick", corpus / "sick",
            "--out", features,
        ) == 0
        model_path = tmp_path / "model.txt"
        assert run_cli("train", "--features", features, "--out", model_path) == 0
        return model_path, features

    def test_report_shape_and_recount(self, tmp_path):
        model_path, features = self.trained(tmp_path)
        report_path = tmp_path / "report.txt"
        rc = run_cli("test", "--model", model_path, "--features", features, "--out", report_path)
        assert rc == 0
        csv_lines = (tmp_path / "report.csv").read_text().splitlines()
        assert csv_lines[1] == "source,true,predicted,distance_normal,distance_sick"
        rows = [line.split(",") for line in csv_lines[2:]]
        assert len(rows) == 13
        recount = sum(1 for row in rows if row[1] == row[2]) / len(rows)
        header_accuracy = float(csv_lines[0].split("accuracy=")[1].split()[0])
        assert header_accuracy == pytest.approx(recount, abs=0)
        text = report_path.read_text()
        assert f"({int(recount * 13)}/13)" in text
        assert "confusion" in text

    def test_model_weight_rows_classify_perfectly(self, tmp_path):
        model_path, _ = self.trained(tmp_path)
        model = read_model(model_path)
        probes = [
            LabeledSample(
                FeatureVector(model.weights[c], f"row{c}"), model.label_map[c], f"row{c}"
            )
            for c in range(model.config.clusters)
        ]
        probe_file = tmp_path / "probes.txt"
        write_features(probes, probe_file, bins=32)
        rc = run_cli("test", "--model", model_path, "--features", probe_file,
                     "--out", tmp_path / "probe_report.txt")
        assert rc == 0
        header = (tmp_path / "probe_report.csv").read_text().splitlines()[0]
        assert "accuracy=1" in header

    def test_does_not_mutate_model_file(self, tmp_path):
        model_path, features = self.trained(tmp_path)
        before = model_path.read_bytes()
        assert run_cli("test", "--model", model_path, "--features", features,
                       "--out", tmp_path / "r.txt") == 0
        assert model_path.read_bytes() == before

    def test_dimension_mismatch_exits_3(self, tmp_path, capsys):
        model_path, _ = self.trained(tmp_path)
        narrow = [LabeledSample(FeatureVector([0.1, 0.2], "x"), NORMAL, "x")] * 2
        bad = tmp_path / "narrow.txt"
        write_features(narrow, bad, bins=0)
        rc = run_cli("test", "--model", model_path, "--features", bad,
                     "--out", tmp_path / "r.txt")
        assert rc == cli.EXIT_NUMERIC
        assert "dimension mismatch" in capsys.readouterr().err


class TestRun:
    def test_produces_all_artifacts(self, tmp_path):
        out = tmp_path / "exp"
        rc = run_cli(
            "run", "--out", out, "--seed", 5, "--count-normal", 6, "--count-sick", 9,
            "--width", 60, "--height", 80, "--epochs", 100,
        )
        assert rc == 0
        assert len(list((out / "images" / "normal").glob("*.png"))) == 6
        assert len(list((out / "images" / "sick").glob("*.png"))) == 9
        train_files = list((out / "train" / "normal").glob("*.png")) + list(
            (out / "train" / "sick").glob("*.png")
        )
        test_files = list((out / "test" / "normal").glob("*.png")) + list(
            (out / "test" / "sick").glob("*.png")
        )
        assert len(train_files) == 10
        assert len(test_files) == 5
        for name in (
            "train_features.txt", "train_features.txt.norm", "test_features.txt",
            "model.txt", "train_report.txt", "report.txt", "report.csv",
        ):
            assert (out / name).exists(), name

    def test_split_sizes_at_default_fraction(self, tmp_path):
        out = tmp_path / "exp"
        rc = run_cli("run", "--out", out, "--seed", 1, "--width", 60, "--height", 80)
        assert rc == 0
        test_samples, _ = read_features(out / "test_features.txt")
        train_samples, _ = read_features(out / "train_features.txt")
        assert len(test_samples) == 14
        assert len(train_samples) == 28
        assert sum(1 for s in test_samples if s.label == NORMAL) == 4
        assert sum(1 for s in test_samples if s.label == SICK) == 10


class TestExitCodes:
    def test_usage_error(self, capsys):
        assert run_cli("no-such-command") == cli.EXIT_USAGE
        assert run_cli("extract") == cli.EXIT_USAGE
        capsys.readouterr()

    def test_data_error_on_malformed_features(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("garbage\n")
        assert run_cli("train", "--features", bad, "--out", tmp_path / "m.txt") == cli.EXIT_DATA

    def test_usage_error_on_bad_contrast(self, tmp_path):
        rc = run_cli(
            "extract", "--normal", tmp_path, "--sick", tmp_path,
            "--out", tmp_path / "f.txt", "--contrast", "-2",
        )
        assert rc == cli.EXIT_USAGE
