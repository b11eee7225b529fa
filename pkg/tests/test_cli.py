import numpy as np
import pytest

from egoprior.cli import main
from egoprior.data import (
    read_depth_png,
    read_heatmap_png,
    read_rgb,
    write_mask_png,
    write_rgb,
)


def run(args, capsys=None):
    code = main(args)
    return code


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("clids")
    code = main(
        [
            "synth",
            "--seed",
            "3",
            "--scenario",
            "interaction",
            "--sequences",
            "2",
            "--size",
            "32",
            "--out",
            str(root),
        ]
    )
    assert code == 0
    return root


class TestUsage:
    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "egoprior" in capsys.readouterr().out

    def test_subcommand_help_exits_zero(self, capsys):
        assert main(["eval", "--help"]) == 0
        out = capsys.readouterr().out
        assert "--pred" in out and "--gt" in out

    def test_missing_required_flag_exits_two(self, capsys):
        assert main(["train", "--task", "saliency", "--model", "m.egof"]) == 2

    def test_unknown_flag_exits_two(self):
        assert main(["synth", "--bogus", "1", "--out", "x"]) == 2

    def test_domain_error_exits_one(self, tmp_path, capsys):
        code = main(
            [
                "train",
                "--dataset",
                str(tmp_path / "missing.json"),
                "--task",
                "saliency",
                "--model",
                str(tmp_path / "m.egof"),
            ]
        )
        assert code == 1
        assert "error" in capsys.readouterr().err


class TestSynth:
    def test_deterministic_output(self, tmp_path):
        for sub in ("a", "b"):
            assert (
                main(
                    [
                        "synth",
                        "--seed",
                        "7",
                        "--scenario",
                        "saliency",
                        "--sequences",
                        "1",
                        "--size",
                        "32",
                        "--out",
                        str(tmp_path / sub),
                    ]
                )
                == 0
            )
        files_a = sorted((tmp_path / "a").rglob("*"))
        files_b = sorted((tmp_path / "b").rglob("*"))
        assert [f.name for f in files_a] == [f.name for f in files_b]
        for fa, fb in zip(files_a, files_b):
            if fa.is_file():
                assert fa.read_bytes() == fb.read_bytes(), fa.name

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EGOPRIOR_SEED", "7")
        assert (
            main(
                [
                    "synth",
                    "--scenario",
                    "saliency",
                    "--sequences",
                    "1",
                    "--size",
                    "32",
                    "--out",
                    str(tmp_path / "env"),
                ]
            )
            == 0
        )
        assert (
            main(
                [
                    "synth",
                    "--seed",
                    "7",
                    "--scenario",
                    "saliency",
                    "--sequences",
                    "1",
                    "--size",
                    "32",
                    "--out",
                    str(tmp_path / "flag"),
                ]
            )
            == 0
        )
        env_json = (tmp_path / "env" / "dataset.json").read_bytes()
        flag_json = (tmp_path / "flag" / "dataset.json").read_bytes()
        assert env_json == flag_json


class TestDepth:
    def test_stereo_to_depth_png(self, tmp_path):
        rng = np.random.default_rng(0)
        canvas = rng.integers(0, 256, size=(32, 40, 3), dtype=np.uint8)
        left = canvas[:, :32]
        right = canvas[:, 4:36]
        write_rgb(tmp_path / "left.png", left)
        write_rgb(tmp_path / "right.png", right)
        code = main(
            [
                "depth",
                "--left",
                str(tmp_path / "left.png"),
                "--right",
                str(tmp_path / "right.png"),
                "--dmax",
                "6",
                "--levels",
                "1",
                "--focal",
                "100",
                "--baseline-mm",
                "100",
                "--out",
                str(tmp_path / "depth.png"),
            ]
        )
        assert code == 0
        depth = read_depth_png(tmp_path / "depth.png")
        # disparity 4 at focal 100, baseline 0.1 -> 2.5 m
        interior = depth[4:-4, 10:-10]
        assert np.nanmedian(interior) == pytest.approx(2.5, abs=0.01)


class TestProposeAndFeatures:
    def test_propose_writes_masks(self, tmp_path):
        rng = np.random.default_rng(1)
        rgb = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
        write_rgb(tmp_path / "frame.png", rgb)
        out_dir = tmp_path / "masks"
        code = main(
            [
                "propose",
                "--frame",
                str(tmp_path / "frame.png"),
                "--n-superpixels",
                "64",
                "--max-proposals",
                "40",
                "--out",
                str(out_dir),
            ]
        )
        assert code == 0
        masks = sorted(out_dir.glob("mask_*.png"))
        assert 0 < len(masks) <= 40

    def test_features_csv_header(self, tmp_path):
        rng = np.random.default_rng(2)
        rgb = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
        write_rgb(tmp_path / "frame.png", rgb)
        out_csv = tmp_path / "features.csv"
        code = main(
            [
                "features",
                "--frame",
                str(tmp_path / "frame.png"),
                "--n-superpixels",
                "64",
                "--max-proposals",
                "30",
                "--n-neighbors",
                "8",
                "--knn",
                "3",
                "--out",
                str(out_csv),
            ]
        )
        assert code == 0
        header = out_csv.read_text().splitlines()[0].split(",")
        assert header[0] == "region"
        assert len(header) == 1 + 77 * 7
        assert header[1] == "s1_perimeter_over_sqrt_area"
        assert "ctxmin_s1_perimeter_over_sqrt_area" in header

    def test_features_with_external_masks(self, tmp_path):
        rng = np.random.default_rng(3)
        rgb = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
        write_rgb(tmp_path / "frame.png", rgb)
        mdir = tmp_path / "m"
        mdir.mkdir()
        m = np.zeros((24, 24), dtype=bool)
        m[4:12, 4:12] = True
        write_mask_png(mdir / "r0.png", m)
        write_mask_png(mdir / "r1.png", ~m)
        out_csv = tmp_path / "f.csv"
        code = main(
            [
                "features",
                "--frame",
                str(tmp_path / "frame.png"),
                "--masks",
                str(mdir),
                "--knn",
                "1",
                "--out",
                str(out_csv),
            ]
        )
        assert code == 0
        lines = out_csv.read_text().splitlines()
        assert len(lines) == 3  # header + 2 regions


class TestTrainPredictLoop:
    def test_full_cli_loop(self, dataset_dir, tmp_path, capsys):
        dataset = str(dataset_dir / "dataset.json")
        sal_model = str(tmp_path / "sal.egof")
        int_model = str(tmp_path / "int.egof")
        common = [
            "--dataset",
            dataset,
            "--hold-out",
            "seq1",
            "--seed",
            "0",
            "--trees",
            "4",
            "--budget",
            "1500",
            "--n-superpixels",
            "144",
            "--max-proposals",
            "250",
            "--n-neighbors",
            "8",
            "--knn",
            "2",
        ]
        assert main(["train", *common, "--task", "saliency", "--model", sal_model]) == 0
        assert (
            main(["train", *common, "--task", "interaction", "--model", int_model]) == 0
        )
        capsys.readouterr()

        heat = tmp_path / "heat.png"
        code = main(
            [
                "predict",
                "--model",
                sal_model,
                "--dataset",
                dataset,
                "--seq",
                "seq1",
                "--frame",
                "0",
                "--out",
                str(heat),
            ]
        )
        assert code == 0
        scores = read_heatmap_png(heat)
        assert scores.shape == (32, 32)
        assert scores.max() <= 1.0
        capsys.readouterr()

        code = main(
            [
                "interact",
                "--saliency-model",
                sal_model,
                "--interaction-model",
                int_model,
                "--dataset",
                dataset,
                "--seq",
                "seq1",
                "--frame",
                "0",
            ]
        )
        assert code == 0
        assert capsys.readouterr().out.strip() in ("sight", "touch")

        code = main(["importance", "--model", sal_model])
        assert code == 0
        out = capsys.readouterr().out
        for group in ("shape", "location", "size", "depth", "depth-ctx"):
            assert group in out

    def test_importance_rejects_classifier(self, dataset_dir, tmp_path, capsys):
        dataset = str(dataset_dir / "dataset.json")
        int_model = str(tmp_path / "cls.egof")
        assert (
            main(
                [
                    "train",
                    "--dataset",
                    dataset,
                    "--task",
                    "interaction",
                    "--seed",
                    "0",
                    "--trees",
                    "3",
                    "--n-superpixels",
                    "144",
                    "--max-proposals",
                    "250",
                    "--n-neighbors",
                    "8",
                    "--knn",
                    "2",
                    "--model",
                    int_model,
                ]
            )
            == 0
        )
        assert main(["importance", "--model", int_model]) == 2

    def test_importance_malformed_model_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "broken.egof"
        bad.write_bytes(b"EGOF\x01\x00\x00\x00 truncated nonsense")
        assert main(["importance", "--model", str(bad)]) == 1
        assert "error" in capsys.readouterr().err

    def test_predict_rejects_future_model_mismatch(self, dataset_dir, tmp_path):
        dataset = str(dataset_dir / "dataset.json")
        sal_model = str(tmp_path / "sal2.egof")
        assert (
            main(
                [
                    "train",
                    "--dataset",
                    dataset,
                    "--task",
                    "saliency",
                    "--hold-out",
                    "seq1",
                    "--seed",
                    "0",
                    "--trees",
                    "3",
                    "--n-superpixels",
                    "144",
                    "--max-proposals",
                    "250",
                    "--n-neighbors",
                    "8",
                    "--knn",
                    "2",
                    "--model",
                    sal_model,
                ]
            )
            == 0
        )
        code = main(
            [
                "future",
                "--model",
                sal_model,
                "--dataset",
                dataset,
                "--seq",
                "seq1",
                "--frame",
                "0",
                "--out",
                str(tmp_path / "h.png"),
            ]
        )
        assert code == 1


class TestEval:
    def test_eval_report(self, tmp_path, capsys):
        pred_dir = tmp_path / "pred"
        gt_dir = tmp_path / "gt"
        pred_dir.mkdir()
        gt_dir.mkdir()
        rng = np.random.default_rng(4)
        for i in range(3):
            gt = rng.random((16, 16)) < 0.3
            from egoprior.data import write_heatmap_png

            write_heatmap_png(pred_dir / f"f{i}.png", gt.astype(float))
            write_mask_png(gt_dir / f"f{i}.png", gt)
        out_csv = tmp_path / "report.csv"
        code = main(
            [
                "eval",
                "--pred",
                str(pred_dir),
                "--gt",
                str(gt_dir),
                "--out",
                str(out_csv),
            ]
        )
        assert code == 0
        assert "100.0" in out_csv.read_text()
        assert "| 100.0 |" in capsys.readouterr().out


class TestConfigFile:
    def test_config_supplies_defaults_flags_override(self, tmp_path):
        cfg = tmp_path / "ego.cfg"
        cfg.write_text("seed = 7\nn_superpixels = 64\n# comment\n")
        out_a = tmp_path / "w_cfg"
        assert (
            main(
                [
                    "--config",
                    str(cfg),
                    "synth",
                    "--scenario",
                    "saliency",
                    "--sequences",
                    "1",
                    "--size",
                    "32",
                    "--out",
                    str(out_a),
                ]
            )
            == 0
        )
        out_b = tmp_path / "w_flag"
        assert (
            main(
                [
                    "--config",
                    str(cfg),
                    "synth",
                    "--seed",
                    "9",
                    "--scenario",
                    "saliency",
                    "--sequences",
                    "1",
                    "--size",
                    "32",
                    "--out",
                    str(out_b),
                ]
            )
            == 0
        )
        out_c = tmp_path / "plain9"
        assert (
            main(
                [
                    "synth",
                    "--seed",
                    "9",
                    "--scenario",
                    "saliency",
                    "--sequences",
                    "1",
                    "--size",
                    "32",
                    "--out",
                    str(out_c),
                ]
            )
            == 0
        )
        a = (out_a / "dataset.json").read_bytes()
        b = (out_b / "dataset.json").read_bytes()
        c = (out_c / "dataset.json").read_bytes()
        assert b == c  # flag wins over config seed
        rgb_a = sorted((out_a / "rgb").glob("*.png"))[0]
        rgb_b = sorted((out_b / "rgb").glob("*.png"))[0]
        assert rgb_a.read_bytes() != rgb_b.read_bytes()  # different seeds

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("bogus = 1\n")
        code = main(
            ["--config", str(cfg), "synth", "--out", str(tmp_path / "x")]
        )
        assert code == 1
        assert "bogus" in capsys.readouterr().err
