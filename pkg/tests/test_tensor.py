"""Kernel-level checks: direct-loop convolution oracle, central finite
differences for every VJP, window-scan pooling oracle, Gaussian kernel
properties."""

import numpy as np
import pytest

from elfkit.tensor import (
    GaussianSpec,
    ShapeError,
    conv2d_forward,
    conv2d_vjp_input,
    gaussian_blur,
    maxpool_forward,
    maxpool_vjp,
    relu_forward,
    relu_vjp,
)

FD_STEP = 1e-6
FD_TOL = 1e-6


def conv_loop_oracle(x, w, b, stride, pad):
    """Naive quadruple-nested-loop cross-correlation."""
    c, h, wd = x.shape
    co, ci, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((co, ho, wo))
    for o in range(co):
        for i in range(ho):
            for j in range(wo):
                acc = 0.0
                for ic in range(ci):
                    for ky in range(kh):
                        for kx in range(kw):
                            acc += w[o, ic, ky, kx] * xp[ic, i * stride + ky,
                                                         j * stride + kx]
                out[o, i, j] = acc + b[o]
    return out


def fd_gradient(fn, x, step=FD_STEP):
    """Central finite differences of a scalar function of x."""
    g = np.zeros_like(x)
    flat = x.ravel()
    gflat = g.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        fp = fn(x)
        flat[i] = old - step
        fm = fn(x)
        flat[i] = old
        gflat[i] = (fp - fm) / (2.0 * step)
    return g


def rel_err(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


class TestConvForward:
    def test_all_ones_window_sums(self):
        x = np.ones((1, 3, 3))
        w = np.ones((1, 1, 3, 3))
        out = conv2d_forward(x, w, np.zeros(1), stride=1, pad=1)
        assert out.shape == (1, 3, 3)
        assert out[0, 1, 1] == 9.0
        for cy, cx in [(0, 0), (0, 2), (2, 0), (2, 2)]:
            assert out[0, cy, cx] == 4.0

    def test_identity_1x1(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2, 5, 7))
        w = np.zeros((2, 2, 1, 1))
        w[0, 0], w[1, 1] = 1.0, 1.0
        out = conv2d_forward(x, w, np.zeros(2), 1, 0)
        np.testing.assert_array_equal(out, x)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(3, 8, 8))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        out = conv2d_forward(x, w, b, stride=2, pad=0)
        np.testing.assert_allclose(out, conv_loop_oracle(x, w, b, 2, 0),
                                   rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1), (3, 2)])
    def test_loop_oracle_stride_pad(self, stride, pad):
        rng = np.random.default_rng(stride * 10 + pad)
        x = rng.normal(size=(2, 9, 11))
        w = rng.normal(size=(3, 2, 3, 5))
        b = rng.normal(size=3)
        out = conv2d_forward(x, w, b, stride, pad)
        np.testing.assert_allclose(out, conv_loop_oracle(x, w, b, stride, pad),
                                   rtol=1e-12, atol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 6, 6))
        y = rng.normal(size=(2, 6, 6))
        w = rng.normal(size=(3, 2, 3, 3))
        zero = np.zeros(3)
        lhs = conv2d_forward(2.5 * x - 1.5 * y, w, zero, 1, 1)
        rhs = (2.5 * conv2d_forward(x, w, zero, 1, 1)
               - 1.5 * conv2d_forward(y, w, zero, 1, 1))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_channel_mismatch_raises(self):
        with pytest.raises(ShapeError):
            conv2d_forward(np.ones((2, 4, 4)), np.ones((1, 3, 3, 3)),
                           np.zeros(1), 1, 0)

    def test_kernel_too_large_raises(self):
        with pytest.raises(ShapeError):
            conv2d_forward(np.ones((1, 2, 2)), np.ones((1, 1, 5, 5)),
                           np.zeros(1), 1, 0)


class TestConvVJP:
    def test_zero_cotangent(self):
        w = np.random.default_rng(4).normal(size=(2, 1, 3, 3))
        g = np.zeros((2, 4, 4))
        gx = conv2d_vjp_input(g, w, 1, 1, (1, 4, 4))
        assert not gx.any()

    def test_1x1_scalar_chain(self):
        rng = np.random.default_rng(5)
        g = rng.normal(size=(1, 4, 4))
        w = np.full((1, 1, 1, 1), 2.5)
        gx = conv2d_vjp_input(g, w, 1, 0, (1, 4, 4))
        np.testing.assert_allclose(gx, 2.5 * g, atol=1e-15)

    @pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1)])
    def test_finite_differences(self, stride, pad):
        rng = np.random.default_rng(6 + stride + pad)
        x = rng.normal(size=(2, 7, 7))
        w = rng.normal(size=(3, 2, 3, 3))
        b = rng.normal(size=3)
        out = conv2d_forward(x, w, b, stride, pad)
        g = rng.normal(size=out.shape)
        vjp = conv2d_vjp_input(g, w, stride, pad, x.shape)
        fd = fd_gradient(
            lambda v: float((g * conv2d_forward(v, w, b, stride, pad)).sum()),
            x.copy())
        assert rel_err(vjp, fd) < FD_TOL

    def test_cotangent_shape_mismatch_raises(self):
        w = np.ones((1, 1, 3, 3))
        with pytest.raises(ShapeError):
            conv2d_vjp_input(np.ones((1, 5, 5)), w, 1, 0, (1, 5, 5))


class TestRelu:
    def test_basic(self):
        np.testing.assert_array_equal(relu_forward(np.array([-1.0, 0.0, 2.0])),
                                      [0.0, 0.0, 2.0])

    def test_positive_identity(self):
        x = np.abs(np.random.default_rng(7).normal(size=(3, 4))) + 0.1
        np.testing.assert_array_equal(relu_forward(x), x)

    def test_elementwise_oracle(self):
        x = np.random.default_rng(8).normal(size=(2, 5, 5))
        expected = np.array([max(0.0, v) for v in x.ravel()]).reshape(x.shape)
        np.testing.assert_array_equal(relu_forward(x), expected)

    def test_vjp_modes(self):
        x = np.array([-1.0])
        g = np.array([5.0])
        assert relu_vjp(g, x, "mask")[0] == 0.0
        assert relu_vjp(g, x, "identity")[0] == 5.0

    def test_vjp_mask_finite_differences(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(2, 6, 6))
        x[np.abs(x) < 1e-3] = 0.5  # keep clear of the kink
        g = rng.normal(size=x.shape)
        vjp = relu_vjp(g, x, "mask")
        fd = fd_gradient(lambda v: float((g * relu_forward(v)).sum()), x.copy())
        assert rel_err(vjp, fd) < FD_TOL

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            relu_vjp(np.ones(1), np.ones(1), "softplus")


class TestMaxpool:
    def test_single_window(self):
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        out, argmax = maxpool_forward(x, 2, 2)
        assert out[0, 0, 0] == 4.0
        assert argmax[0, 0, 0] == 3  # flat index of (1,1)

    def test_tie_lowest_flat_index(self):
        x = np.full((1, 2, 2), 7.0)
        out, argmax = maxpool_forward(x, 2, 2)
        assert out[0, 0, 0] == 7.0
        assert argmax[0, 0, 0] == 0

    def test_window_scan_oracle(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(1, 6, 6))
        out, argmax = maxpool_forward(x, 2, 2)
        for i in range(3):
            for j in range(3):
                win = x[0, 2 * i:2 * i + 2, 2 * j:2 * j + 2]
                assert out[0, i, j] == win.max()

    def test_overlapping_stride_oracle(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(2, 7, 9))
        out, _ = maxpool_forward(x, 3, 2)
        c, ho, wo = out.shape
        assert (ho, wo) == ((7 - 3) // 2 + 1, (9 - 3) // 2 + 1)
        for ch in range(c):
            for i in range(ho):
                for j in range(wo):
                    win = x[ch, 2 * i:2 * i + 3, 2 * j:2 * j + 3]
                    assert out[ch, i, j] == win.max()

    def test_window_exceeds_input(self):
        with pytest.raises(ShapeError):
            maxpool_forward(np.ones((1, 3, 3)), 4, 1)

    def test_vjp_single_window(self):
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        _, argmax = maxpool_forward(x, 2, 2)
        g = np.ones((1, 1, 1))
        grad = maxpool_vjp(g, argmax, x.shape)
        np.testing.assert_array_equal(grad, [[[0.0, 0.0], [0.0, 1.0]]])

    def test_vjp_zero_cotangent(self):
        x = np.random.default_rng(12).normal(size=(1, 4, 4))
        _, argmax = maxpool_forward(x, 2, 2)
        grad = maxpool_vjp(np.zeros((1, 2, 2)), argmax, x.shape)
        assert not grad.any()

    def test_vjp_finite_differences(self):
        rng = np.random.default_rng(13)
        # distinct values keep argmax stable under the FD step
        x = rng.permutation(64).astype(np.float64).reshape(1, 8, 8)
        out, argmax = maxpool_forward(x, 2, 2)
        g = rng.normal(size=out.shape)
        vjp = maxpool_vjp(g, argmax, x.shape)
        fd = fd_gradient(
            lambda v: float((g * maxpool_forward(v, 2, 2)[0]).sum()), x.copy())
        assert rel_err(vjp, fd) < FD_TOL

    def test_vjp_nonneg_and_sparse(self):
        rng = np.random.default_rng(14)
        x = rng.normal(size=(3, 8, 8))
        out, argmax = maxpool_forward(x, 2, 2)
        g = np.abs(rng.normal(size=out.shape))
        grad = maxpool_vjp(g, argmax, x.shape)
        assert grad.min() >= 0.0
        assert np.count_nonzero(grad) <= out.size

    def test_vjp_out_of_bounds_index(self):
        with pytest.raises(IndexError):
            maxpool_vjp(np.ones((1, 1, 1)), np.array([[[99]]]), (1, 2, 2))


class TestGaussianBlur:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            GaussianSpec(4, 1.0)
        with pytest.raises(ValueError):
            GaussianSpec(5, 0.0)

    def test_kernel_normalised_symmetric(self):
        for size, sigma in [(1, 1.0), (5, 1.0), (17, 6.0), (21, 3.0)]:
            k = GaussianSpec(size, sigma).kernel()
            assert abs(k.sum() - 1.0) <= 1e-12
            np.testing.assert_allclose(k, k[::-1], atol=0)

    def test_constant_map_unchanged(self):
        m = np.full((12, 15), 3.25)
        out = gaussian_blur(m, GaussianSpec(5, 2.0))
        np.testing.assert_allclose(out, m, atol=1e-12)

    def test_size_one_identity(self):
        m = np.random.default_rng(15).normal(size=(6, 6))
        np.testing.assert_array_equal(gaussian_blur(m, GaussianSpec(1, 2.0)), m)

    def test_impulse_outer_product(self):
        spec = GaussianSpec(5, 1.0)
        m = np.zeros((11, 11))
        m[5, 5] = 1.0
        out = gaussian_blur(m, spec)
        k = spec.kernel()
        expected = np.zeros_like(m)
        expected[3:8, 3:8] = np.outer(k, k)
        np.testing.assert_allclose(out, expected, atol=1e-15)

    def test_channel_form(self):
        m = np.random.default_rng(16).normal(size=(1, 8, 8))
        out = gaussian_blur(m, GaussianSpec(3, 1.0))
        assert out.shape == (1, 8, 8)

    def test_randomised_fd_pairs_property(self):
        """Forward/VJP pairs hold on randomised shapes (mask mode)."""
        rng = np.random.default_rng(17)
        for trial in range(5):
            c = int(rng.integers(1, 4))
            h = int(rng.integers(5, 9))
            w = int(rng.integers(5, 9))
            x = rng.normal(size=(c, h, w))
            co = int(rng.integers(1, 4))
            k = int(rng.integers(1, 4))
            wt = rng.normal(size=(co, c, k, k))
            b = rng.normal(size=co)
            out = conv2d_forward(x, wt, b, 1, 1)
            g = rng.normal(size=out.shape)
            vjp = conv2d_vjp_input(g, wt, 1, 1, x.shape)
            fd = fd_gradient(
                lambda v: float((g * conv2d_forward(v, wt, b, 1, 1)).sum()),
                x.copy())
            assert rel_err(vjp, fd) < FD_TOL
