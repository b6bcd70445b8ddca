"""The operator zoo: unfold, pooling, convolutions, involution, windowed
self-attention, batch norm, activations and 1x1 projections.

Every operator has a vectorized forward kernel and an analytic gradient
rule registered with :mod:`involution.autodiff`; the public functions at the
bottom run either purely (``tape=None``) or recorded for backprop. Feature
maps are (B, C, H, W); unfold columns are laid out channel-major, i.e.
column index c*K*K + u*K + v, and generated kernels live in
(B, G, K*K, H_out, W_out) tensors with groups as contiguous channel blocks.

Spatial geometry follows the same-size convention: zero padding of
floor(K/2)*dilation on each side unless a padding is given explicitly, and
H_out = floor((H + 2p - d*(K-1) - 1)/s) + 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Parameter, apply, register_op
from .tensor import Prng, ShapeError, Tensor

__all__ = [
    "out_hw",
    "BatchNormState",
    "ConvSpec",
    "InvolutionSpec",
    "AttentionSpec",
    "unfold",
    "avg_pool2d",
    "max_pool2d",
    "relu",
    "softmax",
    "batch_norm",
    "linear_1x1",
    "conv2d",
    "depthwise_conv2d",
    "kernel_generate",
    "involution_mac",
    "involution",
    "attention_affinity",
    "local_self_attention",
]


def out_hw(h: int, w: int, kernel: int, dilation: int = 1, padding=None, stride: int = 1):
    """Output spatial size of a sliding K x K window."""
    p = (kernel // 2) * dilation if padding is None else padding
    ho = (h + 2 * p - dilation * (kernel - 1) - 1) // stride + 1
    wo = (w + 2 * p - dilation * (kernel - 1) - 1) // stride + 1
    return ho, wo


# ---------------------------------------------------------------------------
# Shared im2col machinery.
# ---------------------------------------------------------------------------


def _resolve_geometry(xshape, kernel_size, dilation, padding, stride):
    if len(xshape) != 4:
        raise ShapeError(f"expected a (B, C, H, W) tensor, got shape {xshape}")
    k, d, s = int(kernel_size), int(dilation), int(stride)
    if k < 1 or d < 1 or s < 1:
        raise ShapeError("kernel size, dilation and stride must be >= 1")
    if k % 2 == 0:
        raise ValueError(f"even kernel size {k} is unsupported (no center pixel)")
    p = (k // 2) * d if padding is None else int(padding)
    if p < 0:
        raise ShapeError("padding must be non-negative")
    _, _, h, w = xshape
    ho, wo = out_hw(h, w, k, d, p, s)
    if ho < 1 or wo < 1:
        raise ShapeError(f"window does not fit: input {h}x{w}, K={k}, d={d}, p={p}, s={s}")
    return k, d, p, s, ho, wo


def _im2col(x, k, d, p, s, ho, wo):
    """Gather sliding patches into (B, C, K, K, Ho, Wo)."""
    b, c, _, _ = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    cols = np.empty((b, c, k, k, ho, wo))
    for u in range(k):
        iu = u * d
        for v in range(k):
            jv = v * d
            cols[:, :, u, v] = xp[:, :, iu : iu + s * (ho - 1) + 1 : s, jv : jv + s * (wo - 1) + 1 : s]
    return cols


def _col2im(gcols, xshape, k, d, p, s, ho, wo):
    """Scatter-add patch gradients back onto the (padded) input grid."""
    b, c, h, w = xshape
    gp = np.zeros((b, c, h + 2 * p, w + 2 * p))
    g6 = gcols.reshape(b, c, k, k, ho, wo)
    for u in range(k):
        iu = u * d
        for v in range(k):
            jv = v * d
            gp[:, :, iu : iu + s * (ho - 1) + 1 : s, jv : jv + s * (wo - 1) + 1 : s] += g6[:, :, u, v]
    return gp[:, :, p : p + h, p : p + w] if p else gp


# ---------------------------------------------------------------------------
# Primitive forward/backward kernels.
# ---------------------------------------------------------------------------


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _add_fwd(x, y):
    _same_shape(x, y, "add")
    return x + y, None


def _add_bwd(ctx, g):
    return g, g


def _mul_fwd(x, y):
    _same_shape(x, y, "mul")
    return x * y, (x, y)


def _mul_bwd(ctx, g):
    x, y = ctx
    return g * y, g * x


def _scale_fwd(x, c=1.0):
    return x * float(c), None


def _scale_bwd(ctx, g, c=1.0):
    return (g * float(c),)


def _matmul_fwd(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    return a @ b, (a, b)


def _matmul_bwd(ctx, g):
    a, b = ctx
    return g @ b.T, a.T @ g


def _reshape_fwd(x, dims=()):
    dims = tuple(int(d) for d in dims)
    if int(np.prod(dims)) != x.size:
        raise ShapeError(f"cannot reshape {x.shape} to {dims}")
    return x.reshape(dims), x.shape


def _reshape_bwd(ctx, g, dims=()):
    return (g.reshape(ctx),)


def _permute_fwd(x, order=()):
    order = tuple(int(a) for a in order)
    if sorted(order) != list(range(x.ndim)):
        raise ShapeError(f"{order} is not an axis permutation for shape {x.shape}")
    return np.ascontiguousarray(x.transpose(order)), order


def _permute_bwd(ctx, g, order=()):
    inverse = np.argsort(ctx)
    return (np.ascontiguousarray(g.transpose(inverse)),)


def _expand_fwd(x, axis=0, n=1):
    if not (0 <= axis <= x.ndim) or n < 1:
        raise ShapeError(f"expand: bad axis {axis} or length {n} for shape {x.shape}")
    e = np.expand_dims(x, axis)
    target = e.shape[:axis] + (int(n),) + e.shape[axis + 1 :]
    return np.ascontiguousarray(np.broadcast_to(e, target)), None


def _expand_bwd(ctx, g, axis=0, n=1):
    return (g.sum(axis=axis),)


def _reduce_sum_fwd(x, axes=None, keepdims=False):
    if axes is None:
        norm = tuple(range(x.ndim))
    elif isinstance(axes, int):
        norm = (axes % x.ndim,)
    else:
        norm = tuple(int(a) % x.ndim for a in axes)
    out = x.sum(axis=norm if axes is not None else None, keepdims=keepdims)
    return np.asarray(out), (x.shape, norm)


def _reduce_sum_bwd(ctx, g, axes=None, keepdims=False):
    xshape, norm = ctx
    if not keepdims:
        held = list(g.shape)
        for a in sorted(norm):
            held.insert(a, 1)
        g = g.reshape(held)
    return (np.broadcast_to(g, xshape).copy(),)


def _pad_zero_fwd(x, pad=0):
    p = int(pad)
    if x.ndim != 4 or p < 0:
        raise ShapeError(f"pad_zero: need 4-d input and pad >= 0, got {x.shape}, {pad}")
    out = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.copy()
    return out, None


def _pad_zero_bwd(ctx, g, pad=0):
    p = int(pad)
    return (g[:, :, p : g.shape[2] - p, p : g.shape[3] - p].copy() if p else g.copy(),)


def _relu_fwd(x):
    return np.maximum(x, 0.0), x > 0.0


def _relu_bwd(ctx, g):
    return (g * ctx,)


def _softmax_fwd(x, axis=-1):
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    return y, (y, axis)


def _softmax_bwd(ctx, g, axis=-1):
    y, ax = ctx
    return (y * (g - (g * y).sum(axis=ax, keepdims=True)),)


def _log_softmax_fwd(x, axis=-1):
    shifted = x - x.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse
    return y, (np.exp(y), axis)


def _log_softmax_bwd(ctx, g, axis=-1):
    sm, ax = ctx
    return (g - sm * g.sum(axis=ax, keepdims=True),)


def _linear_1x1_fwd(x, w, *rest):
    if x.ndim != 4 or w.ndim != 2 or w.shape[1] != x.shape[1]:
        raise ShapeError(f"linear_1x1: x {x.shape} incompatible with weight {w.shape}")
    out = np.einsum("oc,bchw->bohw", w, x)
    if rest:
        b = rest[0]
        if b.shape != (w.shape[0],):
            raise ShapeError(f"linear_1x1: bias {b.shape} does not match {w.shape[0]} outputs")
        out = out + b[None, :, None, None]
    return out, (x, w, bool(rest))


def _linear_1x1_bwd(ctx, g):
    x, w, has_bias = ctx
    dx = np.einsum("oc,bohw->bchw", w, g)
    dw = np.einsum("bohw,bchw->oc", g, x)
    if has_bias:
        return dx, dw, g.sum(axis=(0, 2, 3))
    return dx, dw


def _avg_pool2d_fwd(x, s=1):
    s = int(s)
    if x.ndim != 4 or s < 1:
        raise ShapeError(f"avg_pool2d: bad input shape {x.shape} or stride {s}")
    b, c, h, w = x.shape
    if s == 1:
        return x.copy(), (x.shape, s)
    if h % s or w % s:
        raise ShapeError(f"avg_pool2d: {h}x{w} not divisible by window {s}")
    out = x.reshape(b, c, h // s, s, w // s, s).mean(axis=(3, 5))
    return out, (x.shape, s)


def _avg_pool2d_bwd(ctx, g, s=1):
    xshape, s = ctx
    if s == 1:
        return (g.copy(),)
    up = np.repeat(np.repeat(g, s, axis=2), s, axis=3)
    return (up / float(s * s),)


def _max_pool2d_fwd(x, kernel_size=3, stride=2):
    k, d, p, s, ho, wo = _resolve_geometry(x.shape, kernel_size, 1, None, stride)
    b, c, h, w = x.shape
    # Pad with -inf so borders never win the max.
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), constant_values=-np.inf) if p else x
    cols = np.empty((b, c, k * k, ho, wo))
    for u in range(k):
        for v in range(k):
            cols[:, :, u * k + v] = xp[:, :, u : u + s * (ho - 1) + 1 : s, v : v + s * (wo - 1) + 1 : s]
    arg = cols.argmax(axis=2)
    out = np.take_along_axis(cols, arg[:, :, None], axis=2)[:, :, 0]
    return out, (arg, x.shape, k, p, s, ho, wo)


def _max_pool2d_bwd(ctx, g, kernel_size=3, stride=2):
    arg, xshape, k, p, s, ho, wo = ctx
    b, c, h, w = xshape
    gp = np.zeros((b, c, h + 2 * p, w + 2 * p))
    for t in range(k * k):
        u, v = divmod(t, k)
        contrib = g * (arg == t)
        gp[:, :, u : u + s * (ho - 1) + 1 : s, v : v + s * (wo - 1) + 1 : s] += contrib
    return (gp[:, :, p : p + h, p : p + w] if p else gp,)


def _batch_norm_fwd(x, gamma, beta, state=None):
    if x.ndim != 4 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(f"batch_norm: x {x.shape} with gamma {gamma.shape}, beta {beta.shape}")
    eps = state.eps
    if state.mode == "train":
        mu = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x - mu[None, :, None, None]) * inv[None, :, None, None]
        n = x.shape[0] * x.shape[2] * x.shape[3]
        unbiased = var * n / (n - 1) if n > 1 else var
        m = state.momentum
        state.running_mean = (1.0 - m) * state.running_mean + m * mu
        state.running_var = (1.0 - m) * state.running_var + m * unbiased
        ctx = ("train", xhat, inv, gamma)
    else:
        inv = 1.0 / np.sqrt(state.running_var + eps)
        xhat = (x - state.running_mean[None, :, None, None]) * inv[None, :, None, None]
        ctx = ("eval", xhat, inv, gamma)
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, ctx


def _batch_norm_bwd(ctx, g, state=None):
    mode, xhat, inv, gamma = ctx
    dbeta = g.sum(axis=(0, 2, 3))
    dgamma = (g * xhat).sum(axis=(0, 2, 3))
    gx = g * gamma[None, :, None, None]
    if mode == "train":
        m1 = gx.mean(axis=(0, 2, 3), keepdims=True)
        m2 = (gx * xhat).mean(axis=(0, 2, 3), keepdims=True)
        dx = inv[None, :, None, None] * (gx - m1 - xhat * m2)
    else:
        dx = gx * inv[None, :, None, None]
    return dx, dgamma, dbeta


def _unfold_fwd(x, kernel_size=3, dilation=1, padding=None, stride=1):
    k, d, p, s, ho, wo = _resolve_geometry(x.shape, kernel_size, dilation, padding, stride)
    b, c, _, _ = x.shape
    cols = _im2col(x, k, d, p, s, ho, wo)
    return cols.reshape(b, c * k * k, ho * wo), (x.shape, k, d, p, s, ho, wo)


def _unfold_bwd(ctx, g, kernel_size=3, dilation=1, padding=None, stride=1):
    xshape, k, d, p, s, ho, wo = ctx
    return (_col2im(g, xshape, k, d, p, s, ho, wo),)


def _conv2d_fwd(x, w, stride=1, dilation=1, groups=1):
    if w.ndim != 4:
        raise ShapeError(f"conv2d: weight must be (C_out, C_in/groups, K, K), got {w.shape}")
    co, cig, kh, kw = w.shape
    if kh != kw:
        raise ShapeError("conv2d: only square kernels are supported")
    g_ = int(groups)
    ci = x.shape[1]
    if ci % g_ or co % g_ or cig != ci // g_:
        raise ShapeError(f"conv2d: channels {ci}->{co} not divisible into {g_} groups with weight {w.shape}")
    k, d, p, s, ho, wo = _resolve_geometry(x.shape, kh, dilation, None, stride)
    b = x.shape[0]
    cols = _im2col(x, k, d, p, s, ho, wo).reshape(b, g_, cig * k * k, ho * wo)
    wm = w.reshape(g_, co // g_, cig * k * k)
    out = np.einsum("gok,bgkl->bgol", wm, cols).reshape(b, co, ho, wo)
    return out, (cols, wm, w.shape, x.shape, k, d, p, s, ho, wo)


def _conv2d_bwd(ctx, g, stride=1, dilation=1, groups=1):
    cols, wm, wshape, xshape, k, d, p, s, ho, wo = ctx
    b = g.shape[0]
    g_ = wm.shape[0]
    go = g.reshape(b, g_, wshape[0] // g_, ho * wo)
    dw = np.einsum("bgol,bgkl->gok", go, cols).reshape(wshape)
    dcols = np.einsum("gok,bgol->bgkl", wm, go).reshape(b, xshape[1] * k * k, ho * wo)
    dx = _col2im(dcols, xshape, k, d, p, s, ho, wo)
    return dx, dw


def _involution_mac_fwd(x, kernel, kernel_size=3, stride=1, dilation=1):
    k, d, p, s, ho, wo = _resolve_geometry(x.shape, kernel_size, dilation, None, stride)
    b, c, _, _ = x.shape
    if kernel.ndim != 5:
        raise ShapeError(f"involution_mac: kernel must be (B, G, K*K, Ho, Wo), got {kernel.shape}")
    kb, grp, kk, kho, kwo = kernel.shape
    if kb != b or kk != k * k or (kho, kwo) != (ho, wo) or grp < 1 or c % grp:
        raise ShapeError(
            f"involution_mac: kernel {kernel.shape} inconsistent with input {x.shape} "
            f"(expected ({b}, G|{c}, {k * k}, {ho}, {wo}))"
        )
    cols = _im2col(x, k, d, p, s, ho, wo).reshape(b, grp, c // grp, k * k, ho * wo)
    kern = kernel.reshape(b, grp, 1, k * k, ho * wo)
    out = (cols * kern).sum(axis=3).reshape(b, c, ho, wo)
    return out, (cols, kern, kernel.shape, x.shape, k, d, p, s, ho, wo)


def _involution_mac_bwd(ctx, g, kernel_size=3, stride=1, dilation=1):
    cols, kern, kshape, xshape, k, d, p, s, ho, wo = ctx
    b, grp = kshape[0], kshape[1]
    c = xshape[1]
    g5 = g.reshape(b, grp, c // grp, 1, ho * wo)
    dkern = (g5 * cols).sum(axis=2).reshape(kshape)
    dcols = (kern * g5).reshape(b, c * k * k, ho * wo)
    dx = _col2im(dcols, xshape, k, d, p, s, ho, wo)
    return dx, dkern


register_op("add", _add_fwd, _add_bwd)
register_op("mul", _mul_fwd, _mul_bwd)
register_op("scale", _scale_fwd, _scale_bwd)
register_op("matmul", _matmul_fwd, _matmul_bwd)
register_op("reshape", _reshape_fwd, _reshape_bwd)
register_op("permute", _permute_fwd, _permute_bwd)
register_op("expand", _expand_fwd, _expand_bwd)
register_op("reduce_sum", _reduce_sum_fwd, _reduce_sum_bwd)
register_op("pad_zero", _pad_zero_fwd, _pad_zero_bwd)
register_op("relu", _relu_fwd, _relu_bwd)
register_op("softmax", _softmax_fwd, _softmax_bwd)
register_op("log_softmax", _log_softmax_fwd, _log_softmax_bwd)
register_op("linear_1x1", _linear_1x1_fwd, _linear_1x1_bwd)
register_op("avg_pool2d", _avg_pool2d_fwd, _avg_pool2d_bwd)
register_op("max_pool2d", _max_pool2d_fwd, _max_pool2d_bwd)
register_op("batch_norm", _batch_norm_fwd, _batch_norm_bwd)
register_op("unfold", _unfold_fwd, _unfold_bwd)
register_op("conv2d", _conv2d_fwd, _conv2d_bwd)
register_op("involution_mac", _involution_mac_fwd, _involution_mac_bwd)


# ---------------------------------------------------------------------------
# Layer state containers.
# ---------------------------------------------------------------------------


@dataclass
class BatchNormState:
    """Per-channel affine normalization state.

    Train mode normalizes with batch statistics over (B, H, W) and updates
    the running estimates with the configured momentum; eval mode uses the
    running estimates (identity-like until the first update).
    """

    gamma: Parameter
    beta: Parameter
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5
    momentum: float = 0.1
    mode: str = "train"
    name: str = "bn"

    @staticmethod
    def create(channels: int, name: str = "bn", mode: str = "train") -> "BatchNormState":
        return BatchNormState(
            gamma=Parameter(Tensor(np.ones(channels)), f"{name}.gamma"),
            beta=Parameter(Tensor(np.zeros(channels)), f"{name}.beta"),
            running_mean=np.zeros(channels),
            running_var=np.ones(channels),
            mode=mode,
            name=name,
        )

    def params(self):
        return [self.gamma, self.beta]


class ConvSpec:
    """Static convolution layer: filters (C_out, C_in/groups, K, K), no bias."""

    def __init__(self, in_channels, out_channels, kernel_size, stride=1, dilation=1,
                 groups=1, prng: Prng | None = None, name: str = "conv"):
        if in_channels % groups or out_channels % groups:
            raise ShapeError(
                f"conv: {in_channels}->{out_channels} channels not divisible by groups={groups}"
            )
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.dilation = dilation
        self.groups = groups
        fan_in = (in_channels // groups) * kernel_size * kernel_size
        std = math.sqrt(2.0 / fan_in)
        prng = prng or Prng(0)
        shape = (out_channels, in_channels // groups, kernel_size, kernel_size)
        self.filters = Parameter(prng.tensor_normal(shape, 0.0, std), f"{name}.w")

    @staticmethod
    def depthwise(channels, kernel_size, stride=1, dilation=1, prng=None, name="dwconv"):
        return ConvSpec(channels, channels, kernel_size, stride, dilation,
                        groups=channels, prng=prng, name=name)

    def params(self):
        return [self.filters]


class InvolutionSpec:
    """Dynamic per-pixel kernel layer.

    The kernel at each output position is produced from the pixel at that
    position alone: a channel-reducing projection, batch norm and relu, then
    a span projection to K*K values per kernel group (``gen_form="single"``
    skips the bottleneck and maps the pixel straight to kernel values).
    The generated kernel is applied as a multiply-add over the K x K
    neighborhood, shared across the channels of each group.
    """

    def __init__(self, channels, kernel_size=7, stride=1, dilation=1, groups=1,
                 reduction=4, gen_form: str = "bottleneck", prng: Prng | None = None,
                 name: str = "inv"):
        if channels % groups:
            raise ShapeError(f"involution: channels {channels} not divisible by groups {groups}")
        if kernel_size % 2 == 0:
            raise ValueError(f"involution: even kernel size {kernel_size} unsupported")
        if gen_form not in ("bottleneck", "single"):
            raise ValueError(f"unknown kernel generation form '{gen_form}'")
        if gen_form == "bottleneck" and channels % reduction:
            raise ShapeError(f"involution: channels {channels} not divisible by reduction {reduction}")
        self.channels = channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.dilation = dilation
        self.groups = groups
        self.reduction = reduction
        self.gen_form = gen_form
        self.name = name
        prng = prng or Prng(0)
        kk_g = kernel_size * kernel_size * groups
        if gen_form == "bottleneck":
            mid = channels // reduction
            self.w_reduce = Parameter(
                prng.tensor_normal((mid, channels), 0.0, math.sqrt(2.0 / channels)), f"{name}.w0")
            self.bn = BatchNormState.create(mid, f"{name}.bn")
            self.w_span = Parameter(
                prng.tensor_normal((kk_g, mid), 0.0, math.sqrt(1.0 / mid)), f"{name}.w1")
        else:
            self.w_reduce = None
            self.bn = None
            self.w_span = Parameter(
                prng.tensor_normal((kk_g, channels), 0.0, math.sqrt(1.0 / channels)), f"{name}.w1")
        self.span_bias = Parameter(Tensor(np.zeros(kk_g)), f"{name}.b1")

    def params(self):
        out = []
        if self.w_reduce is not None:
            out.append(self.w_reduce)
            out.extend(self.bn.params())
        out.append(self.w_span)
        out.append(self.span_bias)
        return out


class AttentionSpec:
    """Windowed multi-head self-attention over a K x K neighborhood.

    Affinities are plain query-key dot products per head (optionally
    softmax-normalized over the window) or, in position mode, query dot
    products with a learned per-offset table.
    """

    def __init__(self, channels, window=7, heads=1, prng: Prng | None = None,
                 name: str = "attn", position_table: bool = True):
        if channels % heads:
            raise ShapeError(f"attention: channels {channels} not divisible by heads {heads}")
        if window % 2 == 0:
            raise ValueError(f"attention: even window {window} unsupported")
        self.channels = channels
        self.window = window
        self.heads = heads
        self.name = name
        prng = prng or Prng(0)
        std = math.sqrt(1.0 / channels)
        self.w_q = Parameter(prng.tensor_normal((channels, channels), 0.0, std), f"{name}.wq")
        self.w_k = Parameter(prng.tensor_normal((channels, channels), 0.0, std), f"{name}.wk")
        self.w_v = Parameter(prng.tensor_normal((channels, channels), 0.0, std), f"{name}.wv")
        head_dim = channels // heads
        if position_table:
            self.r_table = Parameter(
                prng.tensor_normal((window * window, head_dim), 0.0, math.sqrt(1.0 / head_dim)),
                f"{name}.r")
        else:
            self.r_table = None

    def params(self):
        out = [self.w_q, self.w_k, self.w_v]
        if self.r_table is not None:
            out.append(self.r_table)
        return out


# ---------------------------------------------------------------------------
# Public operator API. Each function runs purely when tape is None and
# records nodes otherwise; inputs may be Tensors, Parameters or Nodes.
# ---------------------------------------------------------------------------


def _shape_of(x):
    return x.value.shape if hasattr(x, "value") else x.shape


def unfold(x, kernel_size, dilation=1, padding=None, stride=1, tape=None):
    """Sliding K x K patches as columns: (B, C*K*K, H_out*W_out)."""
    return apply(tape, "unfold", x, kernel_size=kernel_size, dilation=dilation,
                 padding=padding, stride=stride)


def avg_pool2d(x, s, tape=None):
    """Non-overlapping s x s window mean (identity when s == 1)."""
    return apply(tape, "avg_pool2d", x, s=s)


def max_pool2d(x, kernel_size, stride, tape=None):
    """Sliding window max with same-size zero-center padding."""
    return apply(tape, "max_pool2d", x, kernel_size=kernel_size, stride=stride)


def relu(x, tape=None):
    return apply(tape, "relu", x)


def softmax(x, axis, tape=None):
    return apply(tape, "softmax", x, axis=axis)


def batch_norm(x, state: BatchNormState, tape=None):
    return apply(tape, "batch_norm", x, state.gamma, state.beta, state=state)


def linear_1x1(x, w, bias=None, tape=None):
    """Pointwise channel projection, i.e. a 1x1 convolution."""
    if bias is None:
        return apply(tape, "linear_1x1", x, w)
    return apply(tape, "linear_1x1", x, w, bias)


def conv2d(x, spec: ConvSpec, tape=None):
    """Grouped 2-d convolution with same-size zero padding."""
    return apply(tape, "conv2d", x, spec.filters, stride=spec.stride,
                 dilation=spec.dilation, groups=spec.groups)


def depthwise_conv2d(x, spec: ConvSpec, tape=None):
    """One kernel per channel; requires C_out == C_in == groups."""
    c = _shape_of(x)[1]
    if not (spec.groups == spec.in_channels == spec.out_channels == c):
        raise ShapeError(
            f"depthwise_conv2d: spec {spec.in_channels}->{spec.out_channels} "
            f"groups={spec.groups} does not match {c} input channels")
    return conv2d(x, spec, tape=tape)


def kernel_generate(x, spec: InvolutionSpec, tape=None):
    """Generate per-position kernels: (B, G, K*K, H_out, W_out).

    The conditioning input is average-pooled by the stride first, so each
    output position sees exactly the pixel it is centered on. No activation
    is applied at the output end; kernel values span the whole real line.
    """
    b = _shape_of(x)[0]
    h = x
    if spec.stride > 1:
        h = avg_pool2d(h, spec.stride, tape=tape)
    if spec.gen_form == "bottleneck":
        h = linear_1x1(h, spec.w_reduce, tape=tape)
        h = batch_norm(h, spec.bn, tape=tape)
        h = relu(h, tape=tape)
    k = linear_1x1(h, spec.w_span, spec.span_bias, tape=tape)
    ho, wo = _shape_of(k)[2:]
    kk = spec.kernel_size * spec.kernel_size
    return apply(tape, "reshape", k, dims=(b, spec.groups, kk, ho, wo))


def involution_mac(x, kernel, kernel_size, stride=1, dilation=1, tape=None):
    """Multiply-add a (B, G, K*K, Ho, Wo) kernel tensor over input patches.

    Each group's kernel is broadcast across that group's C/G channels; the
    K*K products per position are summed with zero padding at the borders.
    """
    return apply(tape, "involution_mac", x, kernel, kernel_size=kernel_size,
                 stride=stride, dilation=dilation)


def involution(x, spec: InvolutionSpec, tape=None):
    """Full dynamic-kernel operator: generate kernels, then multiply-add."""
    kern = kernel_generate(x, spec, tape=tape)
    return involution_mac(x, kern, spec.kernel_size, spec.stride, spec.dilation, tape=tape)


def attention_affinity(x, spec: AttentionSpec, mode: str = "content",
                       softmax_affinity: bool = False, tape=None):
    """Affinity tensor (B, heads, K*K, H, W) used as a per-position kernel.

    content: query dot key over each head's channels, keys gathered from the
    K x K neighborhood (zero padded). position: query dot a learned
    per-offset table, no key content involved.
    """
    if mode not in ("content", "position"):
        raise ValueError(f"unknown attention mode '{mode}'")
    b, c, h, w = _shape_of(x)
    hn, k = spec.heads, spec.window
    ch = c // hn
    kk = k * k
    q = linear_1x1(x, spec.w_q, tape=tape)
    if mode == "content":
        key = linear_1x1(x, spec.w_k, tape=tape)
        kcols = unfold(key, k, tape=tape)
        kcols = apply(tape, "reshape", kcols, dims=(b, hn, ch, kk, h * w))
        qr = apply(tape, "reshape", q, dims=(b, hn, ch, h * w))
        qe = apply(tape, "expand", qr, axis=3, n=kk)
        aff = apply(tape, "reduce_sum", apply(tape, "mul", qe, kcols), axes=(2,))
    else:
        if spec.r_table is None:
            raise ValueError("position mode needs a position table")
        qr = apply(tape, "reshape", q, dims=(b, hn, ch, h * w))
        qp = apply(tape, "permute", qr, order=(0, 1, 3, 2))
        qf = apply(tape, "reshape", qp, dims=(b * hn * h * w, ch))
        rt = apply(tape, "permute", spec.r_table, order=(1, 0)) if tape is not None else \
            apply(None, "permute", spec.r_table.value, order=(1, 0))
        af = apply(tape, "matmul", qf, rt)
        aff = apply(tape, "reshape", af, dims=(b, hn, h * w, kk))
        aff = apply(tape, "permute", aff, order=(0, 1, 3, 2))
    if softmax_affinity:
        aff = apply(tape, "softmax", aff, axis=2)
    return apply(tape, "reshape", aff, dims=(b, hn, kk, h, w))


def local_self_attention(x, spec: AttentionSpec, mode: str = "content",
                         softmax_affinity: bool = False, tape=None):
    """Windowed self-attention: pool values with per-position affinities.

    The affinity tensor is routed through the same multiply-add engine as
    generated involution kernels, with one kernel group per head.
    """
    aff = attention_affinity(x, spec, mode=mode, softmax_affinity=softmax_affinity, tape=tape)
    v = linear_1x1(x, spec.w_v, tape=tape)
    return involution_mac(v, aff, spec.window, stride=1, dilation=1, tape=tape)
