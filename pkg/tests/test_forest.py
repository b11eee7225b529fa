import numpy as np
import pytest

from egoprior import Forest, ModelFormatError, TrainConfig, balanced_sample, train
from egoprior.forest import (
    MODE_CLASSIFICATION,
    MODE_REGRESSION,
    Tree,
    feature_importance,
    iou_bin,
    load,
    save,
)


def exhaustive_best_split_1d(x, y, min_leaf=1):
    """Brute-force scan of every midpoint threshold on a single feature."""
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    n = len(xs)
    total_sse = ((ys - ys.mean()) ** 2).sum()
    best = None
    for i in range(1, n):
        if xs[i - 1] == xs[i] or i < min_leaf or n - i < min_leaf:
            continue
        left, right = ys[:i], ys[i:]
        sse = ((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum()
        gain = total_sse - sse
        thr = (xs[i - 1] + xs[i]) / 2
        if best is None or gain > best[0] + 1e-15:
            best = (gain, thr)
    return best


class TestBalancedSample:
    def test_min_bin_count(self):
        rng = np.random.default_rng(0)
        y = np.concatenate(
            [
                rng.uniform(0.0, 0.24, 10),
                rng.uniform(0.26, 0.49, 4),
                rng.uniform(0.51, 0.74, 8),
                rng.uniform(0.76, 1.0, 6),
            ]
        )
        sel = balanced_sample(y, rng_seed=1)
        assert len(sel) == 16
        bins = [iou_bin(t) for t in y[sel]]
        assert all(bins.count(b) == 4 for b in range(4))

    def test_bin_boundaries(self):
        assert iou_bin(0.25) == 1  # half-open lower bins
        assert iou_bin(0.4999) == 1
        assert iou_bin(1.0) == 3  # closed last bin

    def test_single_bin_degenerate(self):
        y = np.full(6, 0.1)
        with pytest.warns(UserWarning, match="one IOU bin"):
            sel = balanced_sample(y, rng_seed=0)
        assert sorted(sel) == list(range(6))

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        y = rng.uniform(0, 1, 60)
        assert np.array_equal(balanced_sample(y, 7), balanced_sample(y, 7))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            balanced_sample(np.array([]))


class TestTraining:
    def test_constant_target_single_leaf(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 1, size=(20, 4))
        y = np.full(20, 0.7)
        forest = train(x, y, TrainConfig(n_trees=3, rng_seed=0))
        assert all(t.n_nodes == 1 for t in forest.trees)
        assert forest.predict(rng.uniform(0, 1, 4)) == pytest.approx(0.7)

    def test_two_point_split_matches_oracle(self):
        x = np.array([[0.0], [1.0]])
        y = np.array([0.0, 1.0])
        cfg = TrainConfig(n_trees=1, min_leaf=1, bootstrap=False, rng_seed=0)
        forest = train(x, y, cfg)
        gain, thr = exhaustive_best_split_1d(x[:, 0], y)
        assert forest.trees[0].threshold[0] == pytest.approx(thr)
        assert forest.predict(np.array([0.2])) == pytest.approx(0.0)
        assert forest.predict(np.array([0.9])) == pytest.approx(1.0)

    def test_root_split_matches_oracle_single_feature(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 1, size=(40, 1))
        y = np.clip(x[:, 0] * 0.8 + rng.normal(0, 0.05, 40), 0, 1)
        cfg = TrainConfig(
            n_trees=1, min_leaf=5, bootstrap=False, rng_seed=0, max_depth=1
        )
        forest = train(x, y, cfg)
        _, thr = exhaustive_best_split_1d(x[:, 0], y, min_leaf=5)
        assert forest.trees[0].threshold[0] == pytest.approx(thr)

    def test_training_interpolates_with_min_leaf_one(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(0, 1, size=(60, 8))
        y = rng.uniform(0, 1, 60)
        cfg = TrainConfig(n_trees=2, min_leaf=1, bootstrap=False, rng_seed=5)
        forest = train(x, y, cfg)
        assert forest.predict(x) == pytest.approx(y, abs=0)

    def test_train_mse_beats_constant_predictor(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(0, 1, size=(80, 6))
        y = np.clip(x[:, 0] + 0.2 * rng.normal(size=80), 0, 1)
        for seed in range(4):
            forest = train(x, y, TrainConfig(n_trees=10, rng_seed=seed))
            pred = forest.predict(x)
            assert np.mean((pred - y) ** 2) <= np.mean((y - y.mean()) ** 2)

    def test_determinism_and_parallel_equality(self, tmp_path):
        rng = np.random.default_rng(6)
        x = rng.uniform(0, 1, size=(50, 5))
        y = rng.uniform(0, 1, 50)
        cfg = TrainConfig(n_trees=8, rng_seed=42)
        serial = train(x, y, cfg, n_jobs=1)
        parallel = train(x, y, cfg, n_jobs=4)
        save(serial, tmp_path / "serial.egof")
        save(parallel, tmp_path / "parallel.egof")
        assert (tmp_path / "serial.egof").read_bytes() == (
            tmp_path / "parallel.egof"
        ).read_bytes()

    def test_prediction_invariant_to_tree_order(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(0, 1, size=(40, 3))
        y = rng.uniform(0, 1, 40)
        forest = train(x, y, TrainConfig(n_trees=5, rng_seed=0))
        shuffled = Forest(
            mode=forest.mode,
            feature_dim=forest.feature_dim,
            layout_id=forest.layout_id,
            trees=list(reversed(forest.trees)),
            importance=forest.importance,
        )
        probe = rng.uniform(0, 1, size=(10, 3))
        assert forest.predict(probe) == pytest.approx(shuffled.predict(probe))

    def test_classification_probabilities(self):
        rng = np.random.default_rng(8)
        x = rng.uniform(0, 1, size=(60, 2))
        y = (x[:, 0] > 0.5).astype(float)
        cfg = TrainConfig(n_trees=10, min_leaf=2, rng_seed=0)
        forest = train(x, y, cfg, mode=MODE_CLASSIFICATION)
        assert forest.predict(np.array([0.9, 0.5])) > 0.8
        assert forest.predict(np.array([0.1, 0.5])) < 0.2

    def test_contract_violations(self):
        x = np.zeros((4, 2))
        with pytest.raises(ValueError):
            train(x, np.array([0.0, 2.0, 0.5, 0.5]))  # target outside [0,1]
        with pytest.raises(ValueError):
            train(x, np.array([0.0, 0.5, 0.5, 0.5]), mode=MODE_CLASSIFICATION)
        with pytest.raises(ValueError):  # 8 rows < 2 * min_leaf(5)
            train(np.zeros((8, 2)), np.linspace(0, 1, 8), TrainConfig(rng_seed=0))
        forest = train(
            np.random.default_rng(0).uniform(size=(12, 3)),
            np.linspace(0, 1, 12),
            TrainConfig(n_trees=2, rng_seed=0),
        )
        with pytest.raises(ValueError):
            forest.predict(np.zeros(4))


class TestPredictAveraging:
    def leaf_tree(self, value):
        return Tree([-1], [0.0], [-1], [-1], [value])

    def test_two_tree_average(self):
        forest = Forest(
            mode=MODE_REGRESSION,
            feature_dim=3,
            layout_id="",
            trees=[self.leaf_tree(0.2), self.leaf_tree(0.6)],
            importance=np.zeros(3),
        )
        assert forest.predict(np.zeros(3)) == pytest.approx(0.4)


class TestImportance:
    def test_signal_feature_group_dominates(self):
        rng = np.random.default_rng(9)
        x = rng.uniform(0, 1, size=(200, 6))
        y = np.clip(x[:, 0] + rng.normal(0, 0.02, 200), 0, 1)
        forest = train(x, y, TrainConfig(n_trees=10, rng_seed=0))
        groups = {i: ("signal" if i == 0 else "noise") for i in range(6)}
        scores = feature_importance(forest, groups)
        assert scores["signal"] > scores["noise"]

    def test_never_split_feature_zero(self):
        rng = np.random.default_rng(10)
        x = np.column_stack([rng.uniform(0, 1, 50), np.full(50, 0.5)])
        y = np.clip(x[:, 0], 0, 1)
        forest = train(
            x, y, TrainConfig(n_trees=4, features_per_split=2, rng_seed=0)
        )
        assert forest.importance[1] == 0.0

    def test_single_leaf_trees_all_zero(self):
        x = np.random.default_rng(11).uniform(size=(20, 3))
        forest = train(x, np.full(20, 0.3), TrainConfig(n_trees=3, rng_seed=0))
        groups = {i: "g" for i in range(3)}
        assert feature_importance(forest, groups)["g"] == 0.0

    def test_unknown_index_rejected(self):
        x = np.random.default_rng(12).uniform(size=(20, 3))
        forest = train(x, np.linspace(0, 1, 20), TrainConfig(n_trees=2, rng_seed=0))
        with pytest.raises(ValueError):
            feature_importance(forest, {5: "g"})


class TestSerialization:
    def trained(self, mode=MODE_REGRESSION, seed=0):
        rng = np.random.default_rng(seed)
        x = rng.uniform(0, 1, size=(50, 4))
        if mode == MODE_CLASSIFICATION:
            y = (x[:, 1] > 0.5).astype(float)
        else:
            y = np.clip(x[:, 0], 0, 1)
        return train(
            x,
            y,
            TrainConfig(n_trees=5, rng_seed=seed),
            mode=mode,
            layout_id="ego77.v1/ctx32.3",
            meta={"task": "saliency"},
        )

    @pytest.mark.parametrize("mode", [MODE_REGRESSION, MODE_CLASSIFICATION])
    def test_roundtrip_identical_predictions(self, tmp_path, mode):
        forest = self.trained(mode)
        save(forest, tmp_path / "m.egof")
        back = load(tmp_path / "m.egof")
        rng = np.random.default_rng(1)
        probe = rng.uniform(0, 1, size=(100, 4))
        assert back.predict(probe) == pytest.approx(forest.predict(probe), abs=0)
        assert back.meta == forest.meta
        assert back.layout_id == forest.layout_id
        assert back.importance == pytest.approx(forest.importance)

    def test_truncated_file_rejected(self, tmp_path):
        forest = self.trained()
        save(forest, tmp_path / "m.egof")
        blob = (tmp_path / "m.egof").read_bytes()
        (tmp_path / "cut.egof").write_bytes(blob[: len(blob) // 2])
        with pytest.raises(ModelFormatError):
            load(tmp_path / "cut.egof")

    def test_bad_magic_rejected(self, tmp_path):
        (tmp_path / "junk.egof").write_bytes(b"NOPE" + b"\x00" * 50)
        with pytest.raises(ModelFormatError):
            load(tmp_path / "junk.egof")

    def test_layout_mismatch_rejected(self, tmp_path):
        forest = self.trained()
        save(forest, tmp_path / "m.egof")
        with pytest.raises(ModelFormatError, match="layout"):
            load(tmp_path / "m.egof", expected_layout="ego77.v2/ctx32.3")
