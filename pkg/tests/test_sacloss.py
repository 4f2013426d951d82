import numpy as np
import pytest

from surround_cod.backend import available_backends
from surround_cod.core import finite_diff_grad
from surround_cod.errors import DimensionError
from surround_cod.sacloss import (
    SacConfig,
    SamplingMode,
    SignConvention,
    pair_distance,
    partition_regions,
    sacloss_breakdown,
    sacloss_grad,
    sacloss_multi_layer,
    sacloss_multi_layer_grad,
    sacloss_value,
)
from surround_cod.surround import surrounding_label

from oracles import sacloss_loop

BACKENDS = available_backends()

PULL_OBJ = SacConfig(mode=SamplingMode.FULL_PAIRWISE, sign_convention=SignConvention.PULL_OBJECT)
PULL_BG = SacConfig(mode=SamplingMode.FULL_PAIRWISE, sign_convention=SignConvention.PULL_BACKGROUND)


def two_by_two():
    fusion = np.array([[[1.0, 0.0], [0.0, 2.0]]])
    part = partition_regions(
        gt=np.array([[1.0, 0.0], [0.0, 0.0]]),
        lm=np.array([[0.0, 0.9], [0.0, 0.0]]),
        threshold=0.1,
    )
    return fusion, part


def random_instance(rng, h, w, c=2, halo=0.3):
    fusion = rng.standard_normal((c, h, w))
    gt = np.zeros((h, w))
    gt[h // 3 : 2 * h // 3, w // 3 : 2 * w // 3] = 1.0
    lm = np.where(gt == 1.0, 0.0, (rng.random((h, w)) < halo).astype(float) * 0.8)
    part = partition_regions(gt, lm, 0.1)
    assert not part.is_degenerate
    return fusion, part, gt, lm


class TestPartition:
    def test_all_ones(self):
        part = partition_regions(np.ones((3, 3)), np.zeros((3, 3)), 0.1)
        assert part.n_c == 9 and part.n_s == 0 and part.n_b == 0
        assert part.is_degenerate

    def test_disjoint_cover_enumeration(self):
        gt = np.zeros((8, 8))
        gt[3:5, 3:5] = 1.0
        lm = surrounding_label(gt, 1.0).map
        part = partition_regions(gt, lm, 0.1)
        expected_c = {i * 8 + j for i in range(8) for j in range(8) if gt[i, j] == 1.0}
        expected_s = {
            i * 8 + j
            for i in range(8)
            for j in range(8)
            if gt[i, j] == 0.0 and lm[i, j] >= 0.1
        }
        assert set(part.obj) == expected_c
        assert set(part.surround) == expected_s
        assert set(part.background) == set(range(64)) - expected_c - expected_s
        assert part.n_s > 0 and part.n_b > 0

    def test_threshold_monotone(self):
        rng = np.random.default_rng(0)
        gt = (rng.random((10, 10)) < 0.2).astype(float)
        lm = np.where(gt == 1.0, 0.0, rng.random((10, 10)))
        sizes = [partition_regions(gt, lm, t).n_s for t in (0.5, 0.3, 0.1)]
        assert sizes[0] <= sizes[1] <= sizes[2]

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            partition_regions(np.zeros((2, 2)), np.zeros((3, 3)), 0.1)


class TestPairDistance:
    def test_identical(self):
        assert pair_distance([1.0, 2.0], [1.0, 2.0], positive=True) == 0.0
        assert pair_distance([1.0, 2.0], [1.0, 2.0], positive=False) == 0.0

    def test_345(self):
        assert pair_distance([0.0, 0.0], [3.0, 4.0], positive=False) == 5.0
        assert pair_distance([0.0, 0.0], [3.0, 4.0], positive=True) == -5.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            pair_distance([1.0], [1.0, 2.0], positive=False)


class TestValue:
    def test_identical_features_value_is_margin(self):
        fusion = np.full((3, 4, 4), 0.7)
        gt = np.zeros((4, 4))
        gt[1:3, 1:3] = 1.0
        lm = np.where(gt == 1.0, 0.0, 0.5)
        lm[0, 0] = 0.0  # keep one background pixel
        part = partition_regions(gt, lm, 0.1)
        for margin in (0.0, 0.4):
            cfg_obj = SacConfig(margin=margin, sign_convention=SignConvention.PULL_OBJECT)
            cfg_bg = SacConfig(margin=margin, sign_convention=SignConvention.PULL_BACKGROUND)
            assert sacloss_value(fusion, part, cfg_obj) == pytest.approx(margin, abs=1e-15)
            assert sacloss_value(fusion, part, cfg_bg) == pytest.approx(max(margin, 0.0), abs=1e-15)

    def test_two_by_two_oracle_value(self):
        # S=(0,1) value 0; C=(0,0) value 1; B={(1,0),(1,1)} values {0,2}
        # pull-object form: -(0+2)/2 + 1/1 + margin = margin
        fusion, part = two_by_two()
        oracle = sacloss_loop(fusion, [1], [0], [2, 3], margin=0.0, pull_background=False)
        assert oracle == pytest.approx(0.0, abs=1e-15)
        assert sacloss_value(fusion, part, PULL_OBJ) == pytest.approx(oracle, abs=1e-12)
        cfg = SacConfig(margin=0.25, sign_convention=SignConvention.PULL_OBJECT)
        assert sacloss_value(fusion, part, cfg) == pytest.approx(0.25, abs=1e-12)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_matches_loop_oracle_random(self, backend):
        rng = np.random.default_rng(1)
        for _ in range(10):
            h, w = rng.integers(4, 13, size=2)
            fusion, part, _, _ = random_instance(rng, int(h), int(w))
            for pull_bg, cfg in ((True, PULL_BG), (False, PULL_OBJ)):
                oracle = sacloss_loop(
                    fusion, list(part.surround), list(part.obj), list(part.background),
                    margin=0.0, pull_background=pull_bg,
                )
                got = sacloss_value(fusion, part, cfg, backend=backend)
                assert got == pytest.approx(oracle, abs=1e-9)

    def test_scaling_homogeneity(self):
        rng = np.random.default_rng(2)
        fusion, part, _, _ = random_instance(rng, 8, 8)
        base = sacloss_breakdown(fusion, part, PULL_OBJ)
        doubled = sacloss_breakdown(2.0 * fusion, part, PULL_OBJ)
        assert doubled["mean_dist_background"] == pytest.approx(
            2.0 * base["mean_dist_background"], rel=1e-12
        )
        assert doubled["mean_dist_object"] == pytest.approx(
            2.0 * base["mean_dist_object"], rel=1e-12
        )

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        fusion, part, _, _ = random_instance(rng, 8, 8)
        shift = rng.standard_normal((fusion.shape[0], 1, 1))
        for cfg in (PULL_OBJ, PULL_BG):
            assert sacloss_value(fusion + shift, part, cfg) == pytest.approx(
                sacloss_value(fusion, part, cfg), rel=1e-10, abs=1e-12
            )

    def test_degenerate_warns_and_zero(self):
        fusion = np.zeros((1, 2, 2))
        part = partition_regions(np.ones((2, 2)), np.zeros((2, 2)), 0.1)
        with pytest.warns(RuntimeWarning):
            assert sacloss_value(fusion, part, PULL_BG) == 0.0


class TestGrad:
    def test_identical_features_zero_grad(self):
        fusion = np.full((2, 4, 4), 1.3)
        gt = np.zeros((4, 4))
        gt[1:3, 1:3] = 1.0
        lm = np.where(gt == 1.0, 0.0, 0.5)
        lm[0, 0] = 0.0
        part = partition_regions(gt, lm, 0.1)
        grad = sacloss_grad(fusion, part, PULL_OBJ)
        assert np.array_equal(grad, np.zeros_like(fusion))

    def test_margin_grad_free(self):
        rng = np.random.default_rng(4)
        fusion, part, _, _ = random_instance(rng, 6, 6)
        g0 = sacloss_grad(fusion, part, SacConfig(margin=0.0, sign_convention=SignConvention.PULL_OBJECT))
        g1 = sacloss_grad(fusion, part, SacConfig(margin=0.9, sign_convention=SignConvention.PULL_OBJECT))
        assert np.allclose(g0, g1, atol=0)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_two_by_two_grad_vs_finite_diff(self, backend):
        fusion, part = two_by_two()
        grad = sacloss_grad(fusion, part, PULL_OBJ, backend=backend)
        fd = finite_diff_grad(lambda t: sacloss_value(t, part, PULL_OBJ, backend=backend), fusion)
        assert np.max(np.abs(grad - fd)) / max(np.max(np.abs(fd)), 1e-10) < 1e-4

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_grad_vs_finite_diff_random(self, backend):
        rng = np.random.default_rng(5)
        for cfg in (PULL_OBJ, SacConfig(margin=2.0, sign_convention=SignConvention.PULL_BACKGROUND)):
            for _ in range(3):
                fusion, part, _, _ = random_instance(rng, 6, 6)
                grad = sacloss_grad(fusion, part, cfg, backend=backend)
                fd = finite_diff_grad(lambda t: sacloss_value(t, part, cfg, backend=backend), fusion)
                rel = np.max(np.abs(grad - fd)) / max(np.max(np.abs(fd)), 1e-10)
                assert rel < 1e-4

    def test_hinge_floor_zero_grad(self):
        rng = np.random.default_rng(6)
        fusion, part, _, _ = random_instance(rng, 6, 6)
        # no margin and surround features equal to background pulls raw below 0
        fusion_flat = fusion.reshape(fusion.shape[0], -1)
        fusion_flat[:, part.surround] = fusion_flat[:, part.background[0]][:, None]
        cfg = SacConfig(margin=0.0, sign_convention=SignConvention.PULL_BACKGROUND)
        assert sacloss_value(fusion, part, cfg) == 0.0
        assert np.array_equal(sacloss_grad(fusion, part, cfg), np.zeros_like(fusion))

    def test_descent_direction_above_floor(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            fusion, part, _, _ = random_instance(rng, 6, 6)
            cfg = SacConfig(margin=3.0, sign_convention=SignConvention.PULL_BACKGROUND)
            before = sacloss_value(fusion, part, cfg)
            assert before > 0.0
            stepped = fusion - 1e-2 * sacloss_grad(fusion, part, cfg)
            assert sacloss_value(stepped, part, cfg) < before


class TestMultiLayer:
    def layered(self, rng, base=24):
        gt = np.zeros((base, base))
        gt[8:16, 8:16] = 1.0
        lm = surrounding_label(gt, 3.0).map
        feats = [(rng.standard_normal((4, 12, 12)), 2),
                 (rng.standard_normal((4, 8, 8)), 3),
                 (rng.standard_normal((4, 4, 4)), 4)]
        return feats, gt, lm

    def test_high_layer_equals_layer4_alone(self):
        rng = np.random.default_rng(8)
        feats, gt, lm = self.layered(rng)
        cfg_high = SacConfig(mode=SamplingMode.HIGH_LAYER)
        cfg_full = SacConfig(mode=SamplingMode.FULL_PAIRWISE)
        high = sacloss_multi_layer(feats, gt, lm, cfg_high)
        only4 = sacloss_multi_layer([feats[2]], gt, lm, cfg_full)
        assert high == pytest.approx(only4, rel=1e-12)

    def test_scct_k4_equals_full(self):
        rng = np.random.default_rng(9)
        feats, gt, lm = self.layered(rng)
        cfg_scct = SacConfig(mode=SamplingMode.SCCT)
        cfg_full = SacConfig(mode=SamplingMode.FULL_PAIRWISE)
        assert sacloss_multi_layer([feats[2]], gt, lm, cfg_scct) == pytest.approx(
            sacloss_multi_layer([feats[2]], gt, lm, cfg_full), rel=1e-12
        )

    def test_scct_pair_count_reduction_16x(self):
        rng = np.random.default_rng(10)
        # block-aligned labels at stride 2 so pooled partitions shrink exactly 4x
        gt_small = np.zeros((8, 8))
        gt_small[2:5, 2:5] = 1.0
        lm_small = np.where(gt_small == 1.0, 0.0, (rng.random((8, 8)) < 0.4) * 0.8)
        gt = np.repeat(np.repeat(gt_small, 2, 0), 2, 1)
        lm = np.repeat(np.repeat(lm_small, 2, 0), 2, 1)
        feature = rng.standard_normal((4, 16, 16))
        _, full_rows = sacloss_multi_layer(
            [(feature, 3)], gt, lm, SacConfig(mode=SamplingMode.FULL_PAIRWISE), detail=True
        )
        scct_total, scct_rows = sacloss_multi_layer(
            [(feature, 3)], gt, lm, SacConfig(mode=SamplingMode.SCCT), detail=True
        )
        full_pairs = full_rows[0]["pairs_background"] + full_rows[0]["pairs_object"]
        scct_pairs = scct_rows[0]["pairs_background"] + scct_rows[0]["pairs_object"]
        assert full_pairs == 16 * scct_pairs
        full_total = full_rows[0]["value"]
        assert scct_total != pytest.approx(full_total, rel=1e-6)

    def test_mode_cost_ordering(self):
        rng = np.random.default_rng(11)
        feats, gt, lm = self.layered(rng)
        counts = {}
        for mode in (SamplingMode.SCCT, SamplingMode.SUB_SAMPLE, SamplingMode.FULL_PAIRWISE):
            _, rows = sacloss_multi_layer(feats, gt, lm, SacConfig(mode=mode), detail=True)
            counts[mode] = sum(r["pairs_background"] + r["pairs_object"] for r in rows)
        assert counts[SamplingMode.SCCT] <= counts[SamplingMode.SUB_SAMPLE]
        assert counts[SamplingMode.SUB_SAMPLE] <= counts[SamplingMode.FULL_PAIRWISE]

    @pytest.mark.parametrize("mode", list(SamplingMode))
    def test_multi_layer_grad_vs_finite_diff(self, mode):
        rng = np.random.default_rng(12)
        # layer dims force a crop in the strided modes (7 % 3, 5 % 2 != 0)
        gt = np.zeros((14, 14))
        gt[4:9, 4:9] = 1.0
        lm = surrounding_label(gt, 2.0).map
        feats = [(rng.standard_normal((2, 7, 7)), 2), (rng.standard_normal((2, 14, 14)), 3)]
        cfg = SacConfig(mode=mode, margin=2.0)
        total, grads = sacloss_multi_layer_grad(feats, gt, lm, cfg)
        for i in range(len(feats)):
            def f(t, i=i):
                probe = [(t if j == i else feats[j][0], feats[j][1]) for j in range(len(feats))]
                return sacloss_multi_layer(probe, gt, lm, cfg)

            fd = finite_diff_grad(f, feats[i][0])
            denom = max(np.max(np.abs(fd)), 1e-10)
            assert np.max(np.abs(grads[i] - fd)) / denom < 1e-4

    def test_value_grad_totals_agree(self):
        rng = np.random.default_rng(13)
        feats, gt, lm = self.layered(rng)
        for mode in SamplingMode:
            cfg = SacConfig(mode=mode, margin=1.0)
            v1 = sacloss_multi_layer(feats, gt, lm, cfg)
            v2, _ = sacloss_multi_layer_grad(feats, gt, lm, cfg)
            assert v1 == pytest.approx(v2, rel=1e-12)
