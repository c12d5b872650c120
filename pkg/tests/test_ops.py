import numpy as np
import pytest

from volseg import ops

from conftest import random_tensor
from oracles import (
    avg_pool_loop,
    conv3d_loop,
    instance_norm_twopass,
    rel_err,
    strip_pool_loop,
    trilinear_loop,
)


class TestConvParams:
    def test_same_padding_default(self):
        p = ops.ConvParams(4, 8, kernel=(3, 3, 1))
        assert p.padding == (1, 1, 0)
        assert p.weight_shape == (8, 4, 3, 3, 1)

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            ops.ConvParams(1, 1, kernel=(2, 3, 3))

    def test_pointwise_param_arithmetic(self):
        # 1x1x1 conv, Cin=2, Cout=3, bias: 2*3 + 3 = 9 params
        p = ops.ConvParams(2, 3, kernel=(1, 1, 1), has_bias=True)
        n = int(np.prod(p.weight_shape)) + p.out_channels
        assert n == 9


class TestConv3d:
    def test_pointwise_identity(self, rng):
        x = random_tensor(rng, (1, 1, 3, 3, 3))
        w = np.ones((1, 1, 1, 1, 1), dtype=np.float32)
        out = ops.conv3d(x, w, bias=np.zeros(1, dtype=np.float32))
        assert np.array_equal(out, x)

    def test_delta_input_reads_out_flipped_kernel(self, rng):
        # cross-correlation: the response to a centered delta is the kernel
        # with indices reversed
        x = np.zeros((1, 1, 5, 5, 5), dtype=np.float32)
        x[0, 0, 2, 2, 2] = 1.0
        w = rng.standard_normal((1, 1, 3, 3, 3)).astype(np.float32)
        out = ops.conv3d(x, w)
        for a in (-1, 0, 1):
            for b in (-1, 0, 1):
                for c in (-1, 0, 1):
                    assert out[0, 0, 2 + a, 2 + b, 2 + c] == pytest.approx(
                        w[0, 0, 1 - a, 1 - b, 1 - c], rel=1e-6
                    )

    def test_strided_asymmetric_kernel_matches_loop_oracle(self, rng):
        x = random_tensor(rng, (1, 2, 5, 6, 7))
        w = rng.standard_normal((3, 2, 3, 3, 1)).astype(np.float32)
        stride, padding = (2, 2, 2), (1, 1, 0)
        out = ops.conv3d(x, w, stride=stride, padding=padding)
        expected = conv3d_loop(x, w, stride=stride, padding=padding)
        assert out.shape == expected.shape
        assert rel_err(out, expected) <= 1e-4

    def test_channel_mismatch(self, rng):
        with pytest.raises(ValueError, match="channels"):
            ops.conv3d(random_tensor(rng, (1, 2, 4, 4, 4)), np.zeros((1, 3, 3, 3, 3), np.float32))

    def test_output_size_formula(self, rng):
        x = random_tensor(rng, (1, 1, 9, 8, 7))
        w = rng.standard_normal((2, 1, 3, 3, 3)).astype(np.float32)
        out = ops.conv3d(x, w, stride=(2, 2, 2), padding=(1, 1, 1))
        assert out.shape == (1, 2, 5, 4, 4)

    def test_randomized_against_oracle(self, rng):
        for _ in range(25):
            cin = int(rng.integers(1, 4))
            cout = int(rng.integers(1, 4))
            spatial = tuple(int(v) for v in rng.integers(2, 8, size=3))
            kernel = tuple(int(rng.choice([1, 3])) for _ in range(3))
            stride = tuple(int(rng.choice([1, 2])) for _ in range(3))
            padding = tuple((k - 1) // 2 for k in kernel)
            if any((s + 2 * p - k) < 0 for s, k, p in zip(spatial, kernel, padding)):
                continue
            x = random_tensor(rng, (1, cin) + spatial)
            w = rng.standard_normal((cout, cin) + kernel).astype(np.float32)
            bias = rng.standard_normal(cout).astype(np.float32)
            out = ops.conv3d(x, w, bias=bias, stride=stride, padding=padding)
            expected = conv3d_loop(x, w, bias=bias, stride=stride, padding=padding)
            assert rel_err(out, expected) <= 1e-4


class TestAnisotropicConv:
    def test_identity_kernels(self, rng):
        x = random_tensor(rng, (1, 2, 4, 4, 4))
        w_intra = np.zeros((2, 2, 1, 3, 3), dtype=np.float32)
        w_inter = np.zeros((2, 2, 3, 1, 1), dtype=np.float32)
        for c in range(2):
            w_intra[c, c, 0, 1, 1] = 1.0
            w_inter[c, c, 1, 0, 0] = 1.0
        out = ops.anisotropic_conv(x, w_intra, w_inter)
        assert rel_err(out, x) <= 1e-6

    def test_rank1_kernel_equals_full_conv(self, rng):
        # K[d, h, w] = a[d] * B[h, w]  ->  separable pair reproduces full conv
        a = rng.standard_normal(3).astype(np.float32)
        B = rng.standard_normal((3, 3)).astype(np.float32)
        full = np.einsum("d,hw->dhw", a, B)[None, None].astype(np.float32)
        w_intra = B[None, None, None].astype(np.float32)  # (1,1,1,3,3)
        w_inter = a[None, None, :, None, None].astype(np.float32)  # (1,1,3,1,1)
        x = random_tensor(rng, (1, 1, 5, 5, 5))
        sep = ops.anisotropic_conv(x, w_intra, w_inter)
        ref = conv3d_loop(x, full, padding=(1, 1, 1))
        assert rel_err(sep, ref) <= 1e-5

    def test_parameter_reduction_arithmetic(self):
        c = 32
        separable = c * c * 9 + c * c * 3
        full = c * c * 27
        assert separable == 12_288
        assert full == 27_648
        assert separable < full

    def test_kernel_shape_validation(self, rng):
        x = random_tensor(rng, (1, 1, 4, 4, 4))
        with pytest.raises(ValueError, match="intra"):
            ops.anisotropic_conv(x, np.zeros((1, 1, 3, 3, 3), np.float32), np.zeros((1, 1, 3, 1, 1), np.float32))
        with pytest.raises(ValueError, match="inter"):
            ops.anisotropic_conv(x, np.zeros((1, 1, 1, 3, 3), np.float32), np.zeros((1, 1, 3, 3, 1), np.float32))


class TestInstanceNorm:
    def test_constant_channel_maps_to_zero(self):
        x = np.full((1, 2, 3, 3, 3), 7.5, dtype=np.float32)
        out = ops.instance_norm(x, np.ones(2, np.float32), np.zeros(2, np.float32))
        assert (out == 0.0).all()

    def test_standardizes(self, rng):
        x = random_tensor(rng, (2, 3, 6, 6, 6), scale=5.0) + 3.0
        out = ops.instance_norm(x, np.ones(3, np.float32), np.zeros(3, np.float32))
        for b in range(2):
            for c in range(3):
                v = out[b, c].astype(np.float64)
                assert abs(v.mean()) <= 1e-5
                assert abs(v.std() - 1.0) <= 1e-3

    def test_matches_twopass_oracle(self, rng):
        x = random_tensor(rng, (2, 3, 4, 4, 4), scale=2.0)
        gamma = rng.standard_normal(3).astype(np.float32)
        beta = rng.standard_normal(3).astype(np.float32)
        out = ops.instance_norm(x, gamma, beta)
        expected = instance_norm_twopass(x, gamma, beta)
        assert rel_err(out, expected) <= 1e-5

    def test_shift_scale_invariance(self, rng):
        x = random_tensor(rng, (1, 2, 5, 5, 5))
        g = np.ones(2, np.float32)
        b = np.zeros(2, np.float32)
        base = ops.instance_norm(x, g, b)
        moved = ops.instance_norm(x * np.float32(3.0) + np.float32(11.0), g, b)
        assert rel_err(moved, base) <= 1e-3


class TestAvgPool:
    def test_constant(self):
        x = np.full((1, 1, 4, 4, 4), 2.5, dtype=np.float32)
        out = ops.avg_pool3d(x, (2, 2, 2))
        assert out.shape == (1, 1, 2, 2, 2)
        assert (out == 2.5).all()

    def test_mean_of_0_to_7(self):
        x = np.arange(8, dtype=np.float32).reshape(1, 1, 2, 2, 2)
        out = ops.avg_pool3d(x, (2, 2, 2))
        assert out.reshape(()) == np.float32(3.5)

    def test_matches_loop_oracle_factor4(self, rng):
        x = random_tensor(rng, (1, 2, 8, 8, 8))
        out = ops.avg_pool3d(x, (4, 4, 4))
        assert rel_err(out, avg_pool_loop(x, (4, 4, 4))) <= 1e-5

    def test_non_divisible_rejected(self, rng):
        with pytest.raises(ValueError, match="divisible"):
            ops.avg_pool3d(random_tensor(rng, (1, 1, 6, 6, 6)), (4, 4, 4))


class TestStripPool:
    def test_constant_passthrough(self):
        x = np.full((1, 1, 3, 4, 5), -1.5, dtype=np.float32)
        for axis in "DHW":
            assert np.array_equal(ops.strip_pool(x, axis), x)

    def test_single_hot_voxel_hand_computed(self):
        x = np.zeros((1, 1, 2, 2, 2), dtype=np.float32)
        x[0, 0, 0, 0, 0] = 1.0
        out = ops.strip_pool(x, "D")
        assert (out[0, 0, 0] == 0.25).all()
        assert (out[0, 0, 1] == 0.0).all()

    def test_mean_preserved_every_axis(self, rng):
        x = random_tensor(rng, (1, 2, 4, 5, 6))
        for axis in "DHW":
            out = ops.strip_pool(x, axis)
            assert out.shape == x.shape
            assert abs(float(out.mean(dtype=np.float64)) - float(x.mean(dtype=np.float64))) <= 1e-6

    def test_matches_loop_oracle(self, rng):
        x = random_tensor(rng, (2, 2, 3, 4, 5))
        for axis in "DHW":
            assert rel_err(ops.strip_pool(x, axis), strip_pool_loop(x, axis)) <= 1e-5

    def test_bad_axis(self, rng):
        with pytest.raises(ValueError):
            ops.strip_pool(random_tensor(rng, (1, 1, 2, 2, 2)), "Q")


class TestResizeTrilinear:
    def test_identity_size(self, rng):
        x = random_tensor(rng, (1, 2, 3, 4, 5))
        out = ops.resize_trilinear(x, (3, 4, 5))
        assert np.array_equal(out, x)
        assert out is not x

    def test_constant_any_size(self):
        x = np.full((1, 1, 4, 4, 4), 9.25, dtype=np.float32)
        for size in ((2, 2, 2), (7, 3, 5), (8, 8, 8), (1, 1, 1)):
            out = ops.resize_trilinear(x, size)
            assert out.shape == (1, 1) + size
            assert (out == 9.25).all()

    def test_linear_ramp_matches_coordinate_formula(self):
        x = np.arange(8, dtype=np.float32).reshape(1, 1, 1, 1, 8)
        out = ops.resize_trilinear(x, (1, 1, 16))
        for t in range(16):
            s = (t + 0.5) * 0.5 - 0.5
            s = min(max(s, 0.0), 7.0)
            assert abs(float(out[0, 0, 0, 0, t]) - s) <= 1e-5

    def test_matches_loop_oracle(self, rng):
        for _ in range(6):
            in_size = tuple(int(v) for v in rng.integers(1, 7, size=3))
            out_size = tuple(int(v) for v in rng.integers(1, 9, size=3))
            x = random_tensor(rng, (1, 2) + in_size)
            out = ops.resize_trilinear(x, out_size)
            assert rel_err(out, trilinear_loop(x, out_size)) <= 1e-4

    def test_monotone_input_stays_monotone(self, rng):
        x = np.sort(rng.standard_normal(10)).astype(np.float32).reshape(1, 1, 1, 1, 10)
        out = ops.resize_trilinear(x, (1, 1, 23))[0, 0, 0, 0]
        assert (np.diff(out) >= -1e-7).all()


class TestResizeNearestLabels:
    def test_identity(self, rng):
        m = rng.integers(0, 5, size=(3, 4, 5)).astype(np.uint8)
        out = ops.resize_nearest_labels(m, (3, 4, 5))
        assert np.array_equal(out, m)

    def test_single_voxel_upscale_2x(self):
        m = np.array([[[3]]], dtype=np.uint8)
        out = ops.resize_nearest_labels(m, (2, 2, 2))
        assert out.shape == (2, 2, 2)
        assert (out == 3).all()

    def test_down_then_up_membership(self, rng):
        m = rng.integers(0, 5, size=(8, 8, 8)).astype(np.uint8)
        down = ops.resize_nearest_labels(m, (4, 4, 4))
        up = ops.resize_nearest_labels(down, (8, 8, 8))
        source_labels = set(m.ravel().tolist())
        assert set(down.ravel().tolist()) <= source_labels
        assert set(up.ravel().tolist()) <= source_labels
