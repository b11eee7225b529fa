import numpy as np
import pytest

from egoprior import (
    DatasetError,
    MergeTree,
    RegionMask,
    RgbdFrame,
    contour_strength,
    load_masks,
    propose_regions,
    ucm_bounds,
)
from egoprior.data import write_mask_png


def solid_frame(color, dims=(16, 16)):
    rgb = np.zeros((*dims, 3), dtype=np.uint8)
    rgb[:] = color
    return RgbdFrame(rgb=rgb, depth=np.full(dims, 2.0))


def two_color_frame(dims=(16, 16)):
    rgb = np.zeros((*dims, 3), dtype=np.uint8)
    rgb[:, : dims[1] // 2] = (200, 40, 40)
    rgb[:, dims[1] // 2 :] = (40, 40, 200)
    return RgbdFrame(rgb=rgb, depth=np.full(dims, 2.0))


class TestContourStrength:
    def test_constant_image_all_zero(self):
        rgb = np.full((10, 10, 3), 128, dtype=np.uint8)
        assert np.all(contour_strength(rgb) == 0.0)

    def test_step_edge_is_maximal(self):
        c = contour_strength(two_color_frame().rgb)
        assert c.max() == pytest.approx(1.0)
        peak_cols = np.argwhere(c == 1.0)[:, 1]
        assert set(peak_cols) <= {7, 8}

    def test_random_image_in_unit_range(self):
        rng = np.random.default_rng(0)
        rgb = rng.integers(0, 256, size=(12, 12, 3), dtype=np.uint8)
        c = contour_strength(rgb)
        assert c.min() >= 0.0 and c.max() <= 1.0


def connected_components(mask):
    from scipy import ndimage

    _, n = ndimage.label(mask, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    return n


class TestProposeRegions:
    def test_two_color_halves_found(self):
        frame = two_color_frame()
        out = propose_regions(frame, n_superpixels=16, max_proposals=100)
        want_left = np.zeros((16, 16), dtype=bool)
        want_left[:, :8] = True
        found = {tuple(np.flatnonzero(r.mask.ravel())) for r in out.regions}
        assert tuple(np.flatnonzero(want_left.ravel())) in found
        assert tuple(np.flatnonzero(~want_left.ravel())) in found

    def test_constant_image_deterministic(self):
        frame = solid_frame((120, 120, 120))
        a = propose_regions(frame, n_superpixels=16, max_proposals=50)
        b = propose_regions(frame, n_superpixels=16, max_proposals=50)
        assert a.tree.merges == b.tree.merges
        assert len(a.regions) == len(b.regions)
        for ra, rb in zip(a.regions, b.regions):
            assert np.array_equal(ra.mask, rb.mask)

    def test_max_proposals_cap(self):
        frame = two_color_frame()
        out = propose_regions(frame, n_superpixels=16, max_proposals=5)
        assert len(out.regions) <= 5

    def test_proposals_are_4_connected(self):
        rng = np.random.default_rng(1)
        rgb = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
        frame = RgbdFrame(rgb=rgb, depth=np.full((24, 24), 1.0))
        out = propose_regions(frame, n_superpixels=36, max_proposals=300)
        assert len(out.regions) > 0
        for region in out.regions:
            assert connected_components(region.mask) == 1

    def test_min_area_respected(self):
        frame = two_color_frame()
        out = propose_regions(frame, n_superpixels=64, max_proposals=1000)
        assert all(r.area >= 9 for r in out.regions)

    def test_contract_violations(self):
        frame = solid_frame((9, 9, 9), dims=(2, 2))
        with pytest.raises(ValueError):
            propose_regions(frame, n_superpixels=4)
        with pytest.raises(ValueError):
            propose_regions(solid_frame((9, 9, 9)), n_superpixels=1)

    def test_merge_thresholds_monotone_and_cover_frame(self):
        rng = np.random.default_rng(2)
        rgb = rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8)
        out = propose_regions(
            RgbdFrame(rgb=rgb, depth=np.full((20, 20), 1.0)), n_superpixels=25
        )
        thr = [t for _, _, t in out.tree.merges]
        assert all(b >= a for a, b in zip(thr, thr[1:]))
        assert all(0.0 <= t <= 1.0 for t in thr)
        root = out.tree.n_nodes - 1
        assert out.tree.node_mask(root).all()


class TestUcmBounds:
    def hand_tree(self):
        # 4 leaves in a 2x2 grid of 2x2 cells; merges at 0.3, 0.5, 0.7
        labels = np.repeat(np.repeat(np.array([[0, 1], [2, 3]]), 2, 0), 2, 1)
        merges = ((0, 1, 0.3), (2, 3, 0.5), (4, 5, 0.7))
        return MergeTree(leaf_labels=labels.astype(np.int32), n_leaves=4, merges=merges)

    def test_leaf_appears_at_zero(self):
        tree = self.hand_tree()
        region = RegionMask(tree.node_mask(0))
        assert ucm_bounds(region, tree, node_id=0) == (0.0, 0.3)

    def test_root_disappears_at_one(self):
        tree = self.hand_tree()
        region = RegionMask(tree.node_mask(6))
        assert ucm_bounds(region, tree, node_id=6) == (0.7, 1.0)

    def test_intermediate_node_bounds(self):
        tree = self.hand_tree()
        region = RegionMask(tree.node_mask(4))  # formed 0.3, absorbed 0.7
        assert ucm_bounds(region, tree, node_id=4) == (0.3, 0.7)

    def test_max_iou_matching_without_node_id(self):
        tree = self.hand_tree()
        node4 = tree.node_mask(4)
        # Perturb one pixel; still closest to node 4.
        approx = node4.copy()
        approx[3, 3] = True
        got = ucm_bounds(RegionMask(approx), tree)
        assert got == (0.3, 0.7)

    def test_appear_le_disappear_everywhere(self):
        tree = self.hand_tree()
        for n in range(tree.n_nodes):
            a, d = ucm_bounds(RegionMask(tree.node_mask(n)), tree, node_id=n)
            assert 0.0 <= a <= d <= 1.0

    def test_decreasing_thresholds_rejected(self):
        labels = np.zeros((2, 2), dtype=np.int32)
        with pytest.raises(ValueError):
            MergeTree(leaf_labels=labels, n_leaves=1, merges=((0, 0, 0.5), (0, 0, 0.2)))


class TestLoadMasks:
    def test_lexicographic_order_and_skip_empty(self, tmp_path, recwarn):
        frame = solid_frame((50, 50, 50), dims=(8, 8))
        m1 = np.zeros((8, 8), dtype=bool)
        m1[:2, :2] = True
        m2 = np.zeros((8, 8), dtype=bool)
        m2[4:, 4:] = True
        write_mask_png(tmp_path / "b.png", m2)
        write_mask_png(tmp_path / "a.png", m1)
        write_mask_png(tmp_path / "c.png", np.zeros((8, 8), dtype=bool))
        regions = load_masks(tmp_path, frame)
        assert len(regions) == 2
        assert np.array_equal(regions[0].mask, m1)
        assert np.array_equal(regions[1].mask, m2)
        assert any("empty mask" in str(w.message) for w in recwarn.list)

    def test_wrong_size_rejected(self, tmp_path):
        frame = solid_frame((50, 50, 50), dims=(8, 8))
        write_mask_png(tmp_path / "bad.png", np.ones((9, 9), dtype=bool))
        with pytest.raises(DatasetError, match="bad.png"):
            load_masks(tmp_path, frame)
