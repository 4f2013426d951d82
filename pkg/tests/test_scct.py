import numpy as np
import pytest

from surround_cod.errors import DimensionError, LayoutError, ParameterError
from surround_cod.scct import ScctLayout, pair_count_reduction, scct_forward, scct_inverse

from oracles import scct_forward_loop


class TestLayout:
    def test_strides(self):
        assert ScctLayout(2).stride == 3
        assert ScctLayout(3).stride == 2
        assert ScctLayout(4).stride == 1
        assert ScctLayout(2).part_count == 9

    def test_bad_k(self):
        with pytest.raises(ParameterError):
            ScctLayout(5)


class TestForward:
    def test_identity_at_k4(self):
        rng = np.random.default_rng(0)
        x = rng.random((4, 6, 6))
        assert np.array_equal(scct_forward(x, ScctLayout(4)), x)

    def test_shape_k3(self):
        x = np.zeros((32, 44, 44))
        out = scct_forward(x, ScctLayout(3))
        assert out.shape == (128, 22, 22)

    def test_enumeration_k2(self):
        x = np.arange(36.0).reshape(1, 6, 6)
        out = scct_forward(x, ScctLayout(2))
        assert out.shape == (9, 2, 2)
        assert np.array_equal(out[0], np.array([[0.0, 3.0], [18.0, 21.0]]))
        assert np.array_equal(out, scct_forward_loop(x, 2))

    def test_matches_loop_oracle_random(self):
        rng = np.random.default_rng(1)
        for k in (2, 3, 4):
            s = 5 - k
            x = rng.standard_normal((3, 4 * s, 5 * s))
            assert np.array_equal(scct_forward(x, ScctLayout(k)), scct_forward_loop(x, k))

    def test_non_divisible(self):
        with pytest.raises(DimensionError):
            scct_forward(np.zeros((1, 7, 6)), ScctLayout(2))


class TestInverse:
    def test_roundtrip_exact(self):
        rng = np.random.default_rng(2)
        for k in (2, 3, 4):
            s = 5 - k
            x = rng.standard_normal((8, 4 * s, 3 * s))
            layout = ScctLayout(k)
            assert np.array_equal(scct_inverse(scct_forward(x, layout), layout), x)

    def test_two_sided(self):
        rng = np.random.default_rng(3)
        layout = ScctLayout(3)
        y = rng.standard_normal((8, 5, 7))  # channels divisible by 4
        assert np.array_equal(scct_forward(scct_inverse(y, layout), layout), y)

    def test_identity_at_k4(self):
        rng = np.random.default_rng(4)
        y = rng.random((2, 3, 3))
        assert np.array_equal(scct_inverse(y, ScctLayout(4)), y)

    def test_bad_channel_count(self):
        with pytest.raises(LayoutError):
            scct_inverse(np.zeros((5, 2, 2)), ScctLayout(3))


class TestProperties:
    def test_locality_same_residue(self):
        # neighbours s apart with equal residue stay adjacent in one part
        rng = np.random.default_rng(5)
        x = rng.random((2, 12, 12))
        layout = ScctLayout(3)
        out = scct_forward(x, layout)
        s = layout.stride
        assert out[0, 1, 1] == x[0, s, s]
        assert out[0, 1, 2] == x[0, s, 2 * s]
        assert out[0, 2, 1] == x[0, 2 * s, s]

    def test_multiset_preserved(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((3, 6, 9))
        out = scct_forward(x, ScctLayout(2))
        assert np.array_equal(np.sort(out.ravel()), np.sort(x.ravel()))


class TestPairCountReduction:
    def test_values(self):
        assert pair_count_reduction(ScctLayout(4), 8, 8) == 1.0
        assert pair_count_reduction(ScctLayout(3), 8, 8) == 16.0
        assert pair_count_reduction(ScctLayout(2), 9, 9) == 81.0

    def test_divisibility(self):
        with pytest.raises(DimensionError):
            pair_count_reduction(ScctLayout(2), 8, 8)
