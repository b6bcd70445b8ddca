"""Reference implementations as plain nested loops.

These exist purely to cross-check the vectorized operators in
:mod:`involution.ops`. They share no code with the fast path: sliding
windows are explicit offset loops with bounds checks standing in for zero
padding, and projections are written as scalar dot products. Keep them
slow and obvious.
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import Tensor

__all__ = [
    "conv2d_naive",
    "depthwise_conv2d_naive",
    "involution_mac_naive",
    "kernel_generate_naive",
    "involution_naive",
    "local_self_attention_naive",
]


def _geometry(h, w, k, d, s):
    p = (k // 2) * d
    ho = (h + 2 * p - d * (k - 1) - 1) // s + 1
    wo = (w + 2 * p - d * (k - 1) - 1) // s + 1
    return p, ho, wo


def conv2d_naive(xt: Tensor, wt: Tensor, stride: int = 1, dilation: int = 1,
                 groups: int = 1) -> Tensor:
    x, w = xt.data, wt.data
    b_, ci, h, wd = x.shape
    co, cig, k, _ = w.shape
    p, ho, wo = _geometry(h, wd, k, dilation, stride)
    out = np.zeros((b_, co, ho, wo))
    co_per = co // groups
    for b in range(b_):
        for o in range(co):
            grp = o // co_per
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for c in range(cig):
                        cin = grp * cig + c
                        for u in range(k):
                            ii = i * stride - p + u * dilation
                            if ii < 0 or ii >= h:
                                continue
                            for v in range(k):
                                jj = j * stride - p + v * dilation
                                if jj < 0 or jj >= wd:
                                    continue
                                acc += w[o, c, u, v] * x[b, cin, ii, jj]
                    out[b, o, i, j] = acc
    return Tensor(out)


def depthwise_conv2d_naive(xt: Tensor, wt: Tensor, stride: int = 1,
                           dilation: int = 1) -> Tensor:
    x, w = xt.data, wt.data
    b_, c_, h, wd = x.shape
    k = w.shape[-1]
    p, ho, wo = _geometry(h, wd, k, dilation, stride)
    out = np.zeros((b_, c_, ho, wo))
    for b in range(b_):
        for c in range(c_):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for u in range(k):
                        ii = i * stride - p + u * dilation
                        if ii < 0 or ii >= h:
                            continue
                        for v in range(k):
                            jj = j * stride - p + v * dilation
                            if jj < 0 or jj >= wd:
                                continue
                            acc += w[c, 0, u, v] * x[b, c, ii, jj]
                    out[b, c, i, j] = acc
    return Tensor(out)


def involution_mac_naive(xt: Tensor, kernelt: Tensor, kernel_size: int,
                         stride: int = 1, dilation: int = 1) -> Tensor:
    x, kernel = xt.data, kernelt.data
    b_, c_, h, wd = x.shape
    grp = kernel.shape[1]
    k = kernel_size
    p, ho, wo = _geometry(h, wd, k, dilation, stride)
    cg = c_ // grp
    out = np.zeros((b_, c_, ho, wo))
    for b in range(b_):
        for c in range(c_):
            g = c // cg  # contiguous channel blocks share a kernel group
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for u in range(k):
                        ii = i * stride - p + u * dilation
                        if ii < 0 or ii >= h:
                            continue
                        for v in range(k):
                            jj = j * stride - p + v * dilation
                            if jj < 0 or jj >= wd:
                                continue
                            acc += kernel[b, g, u * k + v, i, j] * x[b, c, ii, jj]
                    out[b, c, i, j] = acc
    return Tensor(out)


def _avg_pool_naive(x, s):
    b_, c_, h, w = x.shape
    out = np.zeros((b_, c_, h // s, w // s))
    for b in range(b_):
        for c in range(c_):
            for i in range(h // s):
                for j in range(w // s):
                    acc = 0.0
                    for di in range(s):
                        for dj in range(s):
                            acc += x[b, c, i * s + di, j * s + dj]
                    out[b, c, i, j] = acc / (s * s)
    return out


def kernel_generate_naive(xt: Tensor, spec) -> Tensor:
    """Per-pixel kernel generation by explicit matrix algebra.

    Normalization uses the running statistics (eval mode), which keeps the
    computation a pure function of each conditioning pixel.
    """
    if spec.gen_form == "bottleneck" and spec.bn.mode != "eval":
        raise ValueError("naive kernel generation expects eval-mode batch norm")
    x = xt.data
    if spec.stride > 1:
        x = _avg_pool_naive(x, spec.stride)
    b_, c_, ho, wo = x.shape
    k, grp = spec.kernel_size, spec.groups
    kk = k * k
    w1 = spec.w_span.value.data
    bias = spec.span_bias.value.data
    out = np.zeros((b_, grp, kk, ho, wo))
    for b in range(b_):
        for i in range(ho):
            for j in range(wo):
                vec = [x[b, c, i, j] for c in range(c_)]
                if spec.gen_form == "bottleneck":
                    w0 = spec.w_reduce.value.data
                    bn = spec.bn
                    hid = []
                    for m in range(w0.shape[0]):
                        acc = 0.0
                        for c in range(c_):
                            acc += w0[m, c] * vec[c]
                        norm = (acc - bn.running_mean[m]) / math.sqrt(bn.running_var[m] + bn.eps)
                        val = bn.gamma.value.data[m] * norm + bn.beta.value.data[m]
                        hid.append(val if val > 0.0 else 0.0)
                    vec = hid
                for row in range(kk * grp):
                    acc = bias[row]
                    for m in range(len(vec)):
                        acc += w1[row, m] * vec[m]
                    out[b, row // kk, row % kk, i, j] = acc
    return Tensor(out)


def involution_naive(xt: Tensor, spec) -> Tensor:
    kern = kernel_generate_naive(xt, spec)
    return involution_mac_naive(xt, kern, spec.kernel_size, spec.stride, spec.dilation)


def local_self_attention_naive(xt: Tensor, spec, mode: str = "content",
                               softmax_affinity: bool = False) -> Tensor:
    x = xt.data
    b_, c_, h, w = x.shape
    k, hn = spec.window, spec.heads
    ch = c_ // hn
    p = k // 2
    wq = spec.w_q.value.data
    wk = spec.w_k.value.data
    wv = spec.w_v.value.data
    r = spec.r_table.value.data if spec.r_table is not None else None

    def project(weight, b, i, j):
        return [sum(weight[o, c] * x[b, c, i, j] for c in range(c_)) for o in range(c_)]

    out = np.zeros((b_, c_, h, w))
    for b in range(b_):
        for i in range(h):
            for j in range(w):
                q = project(wq, b, i, j)
                for head in range(hn):
                    lo = head * ch
                    aff = []
                    for u in range(k):
                        for v in range(k):
                            ii, jj = i - p + u, j - p + v
                            if mode == "content":
                                if 0 <= ii < h and 0 <= jj < w:
                                    key = [sum(wk[lo + d, c] * x[b, c, ii, jj] for c in range(c_))
                                           for d in range(ch)]
                                    aff.append(sum(q[lo + d] * key[d] for d in range(ch)))
                                else:
                                    aff.append(0.0)
                            else:
                                aff.append(sum(q[lo + d] * r[u * k + v, d] for d in range(ch)))
                    if softmax_affinity:
                        top = max(aff)
                        exp = [math.exp(a - top) for a in aff]
                        tot = sum(exp)
                        aff = [e / tot for e in exp]
                    for d in range(ch):
                        acc = 0.0
                        for u in range(k):
                            for v in range(k):
                                ii, jj = i - p + u, j - p + v
                                if 0 <= ii < h and 0 <= jj < w:
                                    val = sum(wv[lo + d, c] * x[b, c, ii, jj] for c in range(c_))
                                    acc += aff[u * k + v] * val
                        out[b, lo + d, i, j] = acc
    return Tensor(out)
