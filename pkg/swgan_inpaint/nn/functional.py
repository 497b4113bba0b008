"""
Differentiable image kernels on (batch, channel, height, width) tensors.

Convolution gathers every output's receptive field with ``sliding_window_view``
over the zero-padded input and contracts it against the weights in one
``tensordot``; a dilation of d_r keeps every d_r-th tap of a window spanning
the effective kernel extent. The input gradient scatters each kernel tap back
onto the padded grid and crops the padding off.

Pooling and upsampling are the fixed-factor forms the generator needs: 2x2
max pooling and nearest-neighbour repetition.
"""

from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from swgan_inpaint.core.tensor import Tensor
from swgan_inpaint.errors import ShapeError


def effective_kernel_extent(kernel_size: int, dilation_rate: int) -> int:
    """Receptive extent of a dilated kernel: k + (k-1)(d_r-1)."""
    if kernel_size < 1 or dilation_rate < 1:
        raise ValueError(
            f"kernel_size and dilation_rate must be positive, got {kernel_size}, {dilation_rate}"
        )
    return kernel_size + (kernel_size - 1) * (dilation_rate - 1)


def conv_output_size(
    size: int, kernel_size: int, dilation_rate: int = 1, stride: int = 1, padding: int = 0
) -> int:
    """floor((size + 2p - extent) / s) + 1; may be < 1 for degenerate setups."""
    if stride < 1 or padding < 0:
        raise ValueError(f"stride must be >= 1 and padding >= 0, got {stride}, {padding}")
    extent = effective_kernel_extent(kernel_size, dilation_rate)
    return (size + 2 * padding - extent) // stride + 1


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
) -> Tensor:
    """Zero-padded dilated cross-correlation.

    out[n, o, m, q] = sum_{c,i,j} x[n, c, m*s - p + d*i, q*s - p + d*j] * w[o, c, i, j] + b[o]
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects rank-4 input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    out_ch, in_ch, k, k2 = weight.shape
    if k != k2:
        raise ShapeError(f"conv2d supports square kernels only, got {k}x{k2}")
    if c != in_ch:
        raise ShapeError(f"conv2d channel mismatch: input has {c}, weight expects {in_ch}")
    h_out = conv_output_size(h, k, dilation, stride, padding)
    w_out = conv_output_size(w, k, dilation, stride, padding)
    if h_out < 1 or w_out < 1:
        raise ShapeError(
            f"conv2d output would be {h_out}x{w_out} for input {h}x{w}, "
            f"k={k}, d_r={dilation}, s={stride}, p={padding}"
        )
    extent = effective_kernel_extent(k, dilation)

    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(padded, (extent, extent), axis=(2, 3))
    # n, c, h_out, w_out, k, k
    windows = windows[:, :, ::stride, ::stride, ::dilation, ::dilation][:, :, :h_out, :w_out]
    out = np.tensordot(windows, weight.data, axes=([1, 4, 5], [1, 2, 3]))
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    if bias is not None:
        if bias.shape != (out_ch,):
            raise ShapeError(f"conv2d bias shape {bias.shape} does not match {out_ch} output channels")
        out = out + bias.data.reshape(1, out_ch, 1, 1)

    def backward_fn(g):
        # grad_w contracts g with the same windows; grad_x adds one strided slab per tap
        grad_w = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_padded = np.zeros_like(padded)
        row_span = stride * (h_out - 1) + 1
        col_span = stride * (w_out - 1) + 1
        for i in range(k):
            for j in range(k):
                tap = np.tensordot(g, weight.data[:, :, i, j], axes=([1], [0]))
                r0, c0 = i * dilation, j * dilation
                grad_padded[:, :, r0:r0 + row_span:stride, c0:c0 + col_span:stride] += (
                    tap.transpose(0, 3, 1, 2)
                )
        grad_x = grad_padded[:, :, padding:padding + h, padding:padding + w]
        grads = (grad_x, grad_w)
        if bias is not None:
            grads += (g.sum(axis=(0, 2, 3)),)
        return grads

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._result(out, inputs, backward_fn, "conv2d")


def max_pool2d(x: Tensor, pool: int = 2) -> Tensor:
    """Non-overlapping max pooling; ties go to the first element in row-major order."""
    n, c, h, w = x.shape
    if h % pool or w % pool:
        raise ShapeError(f"max_pool2d: spatial dims {h}x{w} not divisible by {pool}")
    blocks = (
        x.data.reshape(n, c, h // pool, pool, w // pool, pool)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // pool, w // pool, pool * pool)
    )
    winner = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, winner[..., None], axis=-1)[..., 0]

    def backward_fn(g):
        routed = np.zeros_like(blocks)
        np.put_along_axis(routed, winner[..., None], g[..., None], axis=-1)
        grad = (
            routed.reshape(n, c, h // pool, w // pool, pool, pool)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h, w)
        )
        return (grad,)

    return Tensor._result(out, (x,), backward_fn, "max_pool2d")


def upsample_nn(x: Tensor, factor: int = 2) -> Tensor:
    """Nearest-neighbour upsampling; the gradient sums each factor x factor block."""
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)

    def backward_fn(g):
        return (g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)),)

    return Tensor._result(out, (x,), backward_fn, "upsample_nn")


def dropout_mask(shape, rate: float, seed: int) -> np.ndarray:
    """Keep-mask whose element i depends only on (seed, i)."""
    draws = np.random.default_rng(seed).random(int(np.prod(shape, dtype=np.int64)))
    return (draws >= rate).reshape(shape)


def dropout(x: Tensor, rate: float, training: bool, seed: int) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-rate); identity in eval mode."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    scale = np.asarray(1.0 / (1.0 - rate), dtype=x.dtype)
    keep = dropout_mask(x.shape, rate, seed) * scale

    return Tensor._result(x.data * keep, (x,), lambda g: (g * keep,), "dropout")
