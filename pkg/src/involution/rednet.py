"""RedNet/ResNet bottleneck architectures: declarative specs, instantiated
models with forward execution, and the analytic parameter/MAC cost model.

A RedNet is a standard bottleneck residual trunk in which the 3x3
convolution of every block is replaced by a 7x7 involution (the stem can
optionally carry a 3x3 involution as well). The builder keeps the wiring
identical between the variants so swapping the middle operator back to a
3x3 convolution reproduces the ResNet baseline exactly.

Costs count one multiply-accumulate per kernel tap, include the kernel
generation projections and the sliding-window aggregation of involution
layers, the shortcut projections and the classifier head, and by default
also the elementwise normalization/activation/pooling work (2 ops per
element for an affine batch norm, 1 for relu and pooling); see
``count_macs``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .autodiff import Parameter, apply
from .ops import (AttentionSpec, BatchNormState, ConvSpec, InvolutionSpec)
from .tensor import Prng, ShapeError, Tensor

__all__ = [
    "InvolutionCfg",
    "Conv3x3Cfg",
    "DepthwiseCfg",
    "AttentionCfg",
    "StemSpec",
    "BlockSpec",
    "StageSpec",
    "ArchSpec",
    "build_rednet",
    "build_toy",
    "Model",
    "forward",
    "extract_kernels",
    "CostRow",
    "CostReport",
    "count_params",
    "count_macs",
    "cost_report",
    "lookup_reference",
    "REFERENCE_PROFILES",
    "DEPTH_BLOCKS",
]

# Stage block counts per supported depth (3n + 2 layers counting the
# 1x1/3x3/1x1 triplets plus stem and head).
DEPTH_BLOCKS = {
    26: (1, 2, 4, 1),
    38: (2, 3, 5, 2),
    50: (3, 4, 6, 3),
    101: (3, 4, 23, 3),
    152: (3, 8, 36, 3),
}

EXPANSION = 4


# ---------------------------------------------------------------------------
# Middle-operator configuration (what sits at the bottleneck position).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvolutionCfg:
    kernel: int = 7
    group_channels: int | None = 16  # None: a single kernel group per layer
    reduction: int = 4
    gen_form: str = "bottleneck"
    kind: str = "involution"

    def groups_for(self, channels: int) -> int:
        if self.group_channels is None:
            return 1
        return max(channels // self.group_channels, 1)


@dataclass(frozen=True)
class Conv3x3Cfg:
    kernel: int = 3
    kind: str = "conv3x3"


@dataclass(frozen=True)
class DepthwiseCfg:
    kernel: int = 3
    kind: str = "depthwise3x3"


@dataclass(frozen=True)
class AttentionCfg:
    kernel: int = 7
    head_channels: int = 16
    mode: str = "content"
    kind: str = "attention"

    def heads_for(self, channels: int) -> int:
        return max(channels // self.head_channels, 1)


@dataclass(frozen=True)
class StemSpec:
    """conv7: one 7x7 stride-2 convolution. inv: a 3x3 stride-2 convolution
    to half width, a 3x3 involution, and a 3x3 convolution to full width.
    Either way a 3x3 stride-2 max pool follows, so the trunk starts at 1/4
    resolution and ``width`` channels."""

    variant: str = "conv7"
    width: int = 64
    inv_group_channels: int | None = 16
    inv_reduction: int = 4


@dataclass(frozen=True)
class BlockSpec:
    name: str
    in_ch: int
    mid_ch: int
    stride: int
    middle: object

    @property
    def out_ch(self) -> int:
        return EXPANSION * self.mid_ch


@dataclass(frozen=True)
class StageSpec:
    blocks: int
    mid_ch: int
    stride: int


@dataclass(frozen=True)
class ArchSpec:
    name: str
    stem: StemSpec
    stages: tuple
    blocks: tuple
    classes: int
    middle: object
    depth: int | None = None


def _middle_cfg(kind: str, kernel, group_channels, reduction, gen_form, head_channels=16):
    if kind == "involution":
        return InvolutionCfg(kernel=kernel, group_channels=group_channels,
                             reduction=reduction, gen_form=gen_form)
    if kind == "conv3x3":
        return Conv3x3Cfg(kernel=3)
    if kind == "depthwise3x3":
        return DepthwiseCfg(kernel=3)
    if kind == "attention":
        return AttentionCfg(kernel=kernel, head_channels=head_channels)
    raise ValueError(f"unknown middle operator '{kind}'")


def _assemble(name, stem, stage_specs, classes, middle, depth=None) -> ArchSpec:
    blocks = []
    in_ch = stem.width
    for s_idx, st in enumerate(stage_specs, start=1):
        for b_idx in range(1, st.blocks + 1):
            stride = st.stride if b_idx == 1 else 1
            blocks.append(BlockSpec(
                name=f"conv{s_idx}_{b_idx}",
                in_ch=in_ch,
                mid_ch=st.mid_ch,
                stride=stride,
                middle=middle,
            ))
            in_ch = EXPANSION * st.mid_ch
    return ArchSpec(name=name, stem=stem, stages=tuple(stage_specs),
                    blocks=tuple(blocks), classes=classes, middle=middle, depth=depth)


def build_rednet(depth: int, middle: str = "involution", stem: str | None = None,
                 kernel: int = 7, group_channels: int | None = 16, reduction: int = 4,
                 gen_form: str = "bottleneck", head_channels: int = 16,
                 classes: int = 1000, base_width: int = 64) -> ArchSpec:
    """Standard depth presets; ``middle="conv3x3"`` gives the ResNet baseline.

    Defaults (7x7 kernels, 16 channels per kernel group, reduction 4, stem
    with an involution at its bottleneck position) are the configuration the
    published profiles use.
    """
    if depth not in DEPTH_BLOCKS:
        raise ValueError(f"unsupported depth {depth}; choose from {sorted(DEPTH_BLOCKS)}")
    cfg = _middle_cfg(middle, kernel, group_channels, reduction, gen_form, head_channels)
    if stem is None:
        stem = "inv" if middle == "involution" else "conv7"
    if stem not in ("conv7", "inv"):
        raise ValueError(f"unknown stem variant '{stem}'")
    stem_spec = StemSpec(variant=stem, width=base_width,
                         inv_group_channels=group_channels, inv_reduction=reduction)
    counts = DEPTH_BLOCKS[depth]
    stages = tuple(
        StageSpec(blocks=counts[i], mid_ch=base_width << i, stride=1 if i == 0 else 2)
        for i in range(4)
    )
    family = "rednet" if middle == "involution" else "resnet" if middle == "conv3x3" else middle
    return _assemble(f"{family}-{depth}", stem_spec, stages, classes, cfg, depth=depth)


def build_toy(classes: int = 4, base_width: int = 16, middle: str = "involution",
              stem: str = "conv7", kernel: int = 3, group_channels: int | None = 8,
              reduction: int = 2, gen_form: str = "bottleneck") -> ArchSpec:
    """Desk-scale variant: one block per stage, widths from ``base_width``."""
    cfg = _middle_cfg(middle, kernel, group_channels, reduction, gen_form)
    stem_spec = StemSpec(variant=stem, width=base_width,
                         inv_group_channels=group_channels, inv_reduction=reduction)
    stages = tuple(
        StageSpec(blocks=1, mid_ch=base_width << i, stride=1 if i == 0 else 2)
        for i in range(4)
    )
    return _assemble(f"toy-{middle}", stem_spec, stages, classes, cfg, depth=None)


# ---------------------------------------------------------------------------
# Instantiated model with real parameters.
# ---------------------------------------------------------------------------


class _Bottleneck:
    def __init__(self, spec: BlockSpec, prng: Prng):
        self.spec = spec
        self.name = spec.name
        mid, out = spec.mid_ch, spec.out_ch
        n = spec.name
        self.reduce = Parameter(
            prng.tensor_normal((mid, spec.in_ch), 0.0, np.sqrt(2.0 / spec.in_ch)), f"{n}.reduce")
        self.bn1 = BatchNormState.create(mid, f"{n}.bn1")
        cfg = spec.middle
        if cfg.kind == "involution":
            self.middle = InvolutionSpec(
                mid, cfg.kernel, stride=spec.stride, groups=cfg.groups_for(mid),
                reduction=cfg.reduction, gen_form=cfg.gen_form, prng=prng, name=f"{n}.mid")
        elif cfg.kind == "conv3x3":
            self.middle = ConvSpec(mid, mid, cfg.kernel, stride=spec.stride, prng=prng,
                                   name=f"{n}.mid")
        elif cfg.kind == "depthwise3x3":
            self.middle = ConvSpec.depthwise(mid, cfg.kernel, stride=spec.stride, prng=prng,
                                             name=f"{n}.mid")
        elif cfg.kind == "attention":
            self.middle = AttentionSpec(mid, cfg.kernel, cfg.heads_for(mid), prng=prng,
                                        name=f"{n}.mid")
        else:
            raise ValueError(f"unknown middle operator '{cfg.kind}'")
        self.bn2 = BatchNormState.create(mid, f"{n}.bn2")
        self.expand = Parameter(
            prng.tensor_normal((out, mid), 0.0, np.sqrt(2.0 / mid)), f"{n}.expand")
        self.bn3 = BatchNormState.create(out, f"{n}.bn3")
        if spec.stride != 1 or spec.in_ch != out:
            self.shortcut = ConvSpec(spec.in_ch, out, 1, stride=spec.stride, prng=prng,
                                     name=f"{n}.shortcut")
            self.bn_sc = BatchNormState.create(out, f"{n}.bn_sc")
        else:
            self.shortcut = None
            self.bn_sc = None

    @property
    def is_involution(self) -> bool:
        return isinstance(self.middle, InvolutionSpec)

    def params(self):
        out = [self.reduce] + self.bn1.params()
        out += self.middle.params() if hasattr(self.middle, "params") else []
        out += self.bn2.params() + [self.expand] + self.bn3.params()
        if self.shortcut is not None:
            out += self.shortcut.params() + self.bn_sc.params()
        return out

    def bn_states(self):
        states = [self.bn1, self.bn2, self.bn3]
        if self.bn_sc is not None:
            states.append(self.bn_sc)
        if isinstance(self.middle, InvolutionSpec) and self.middle.bn is not None:
            states.append(self.middle.bn)
        return states

    def forward(self, x, tape=None, kernel_sink=None):
        y = ops.linear_1x1(x, self.reduce, tape=tape)
        y = ops.relu(ops.batch_norm(y, self.bn1, tape=tape), tape=tape)
        m = self.middle
        if isinstance(m, InvolutionSpec):
            kern = ops.kernel_generate(y, m, tape=tape)
            if kernel_sink is not None:
                kernel_sink[self.name] = kern.value if hasattr(kern, "value") else kern
            y = ops.involution_mac(y, kern, m.kernel_size, m.stride, m.dilation, tape=tape)
        elif isinstance(m, AttentionSpec):
            if self.spec.stride > 1:
                y = ops.avg_pool2d(y, self.spec.stride, tape=tape)
            y = ops.local_self_attention(y, m, tape=tape)
        else:
            y = ops.conv2d(y, m, tape=tape)
        y = ops.relu(ops.batch_norm(y, self.bn2, tape=tape), tape=tape)
        y = ops.linear_1x1(y, self.expand, tape=tape)
        y = ops.batch_norm(y, self.bn3, tape=tape)
        if self.shortcut is not None:
            sc = ops.conv2d(x, self.shortcut, tape=tape)
            sc = ops.batch_norm(sc, self.bn_sc, tape=tape)
        else:
            sc = x
        return ops.relu(apply(tape, "add", y, sc), tape=tape)


class _Stem:
    def __init__(self, spec: StemSpec, prng: Prng):
        self.spec = spec
        w = spec.width
        if spec.variant == "conv7":
            self.conv1 = ConvSpec(3, w, 7, stride=2, prng=prng, name="stem.conv1")
            self.bn1 = BatchNormState.create(w, "stem.bn1")
            self.inv = None
        else:
            half = w // 2
            self.conv1 = ConvSpec(3, half, 3, stride=2, prng=prng, name="stem.conv1")
            self.bn1 = BatchNormState.create(half, "stem.bn1")
            g = 1 if spec.inv_group_channels is None else max(half // spec.inv_group_channels, 1)
            self.inv = InvolutionSpec(half, 3, groups=g, reduction=spec.inv_reduction,
                                      prng=prng, name="stem.inv")
            self.bn2 = BatchNormState.create(half, "stem.bn2")
            self.conv2 = ConvSpec(half, w, 3, prng=prng, name="stem.conv2")
            self.bn3 = BatchNormState.create(w, "stem.bn3")

    def params(self):
        out = [*self.conv1.params(), *self.bn1.params()]
        if self.inv is not None:
            out += self.inv.params() + self.bn2.params()
            out += self.conv2.params() + self.bn3.params()
        return out

    def bn_states(self):
        states = [self.bn1]
        if self.inv is not None:
            states += [self.bn2, self.bn3]
            if self.inv.bn is not None:
                states.append(self.inv.bn)
        return states

    def forward(self, x, tape=None, kernel_sink=None):
        y = ops.relu(ops.batch_norm(ops.conv2d(x, self.conv1, tape=tape), self.bn1, tape=tape),
                     tape=tape)
        if self.inv is not None:
            kern = ops.kernel_generate(y, self.inv, tape=tape)
            if kernel_sink is not None:
                kernel_sink["stem.inv"] = kern.value if hasattr(kern, "value") else kern
            y = ops.involution_mac(y, kern, self.inv.kernel_size, tape=tape)
            y = ops.relu(ops.batch_norm(y, self.bn2, tape=tape), tape=tape)
            y = ops.relu(ops.batch_norm(ops.conv2d(y, self.conv2, tape=tape), self.bn3, tape=tape),
                         tape=tape)
        return ops.max_pool2d(y, 3, 2, tape=tape)


class Model:
    """An ArchSpec with parameters attached; forward is pure given weights."""

    def __init__(self, spec: ArchSpec, prng: Prng | None = None):
        prng = prng or Prng(0)
        self.spec = spec
        self.stem = _Stem(spec.stem, prng)
        self.blocks = [_Bottleneck(b, prng) for b in spec.blocks]
        feat = spec.blocks[-1].out_ch
        self.fc_w = Parameter(prng.tensor_normal((spec.classes, feat), 0.0, np.sqrt(1.0 / feat)),
                              "head.fc.w")
        self.fc_b = Parameter(Tensor(np.zeros(spec.classes)), "head.fc.b")

    def parameters(self) -> list:
        out = self.stem.params()
        for b in self.blocks:
            out.extend(b.params())
        out += [self.fc_w, self.fc_b]
        return out

    def bn_states(self):
        states = self.stem.bn_states()
        for b in self.blocks:
            states.extend(b.bn_states())
        return states

    def train(self):
        for s in self.bn_states():
            s.mode = "train"
        return self

    def eval(self):
        for s in self.bn_states():
            s.mode = "eval"
        return self

    def involution_layers(self) -> list:
        names = ["stem.inv"] if self.stem.inv is not None else []
        names += [b.name for b in self.blocks if b.is_involution]
        return names

    def forward(self, x, tape=None, kernel_sink=None):
        shape = x.value.shape if hasattr(x, "value") else x.shape
        if len(shape) != 4 or shape[1] != 3:
            raise ShapeError(f"expected (B, 3, H, W) input, got {shape}")
        if shape[2] < 32 or shape[3] < 32 or shape[2] % 32 or shape[3] % 32:
            raise ShapeError(f"spatial size must be >= 32 and divisible by 32, got {shape[2:]}")
        y = self.stem.forward(x, tape=tape, kernel_sink=kernel_sink)
        for b in self.blocks:
            y = b.forward(y, tape=tape, kernel_sink=kernel_sink)
        # Global average pool, then the linear classifier.
        b_, c = shape[0], self.spec.blocks[-1].out_ch
        hw = (y.value.shape if hasattr(y, "value") else y.shape)[2:]
        y = apply(tape, "reduce_sum", y, axes=(2, 3))
        y = apply(tape, "scale", y, c=1.0 / (hw[0] * hw[1]))
        logits = apply(tape, "matmul", y, apply(tape, "permute", self.fc_w, order=(1, 0)))
        bias = apply(tape, "expand", self.fc_b, axis=0, n=b_)
        return apply(tape, "add", logits, bias)


def forward(model: Model, x, tape=None):
    """Run the network; returns (B, classes) logits."""
    return model.forward(x, tape=tape)


def extract_kernels(model: Model, x, layer_name: str) -> Tensor:
    """Generated kernels (B, G, K*K, H', W') of the named involution layer."""
    layers = model.involution_layers()
    all_names = (["stem.inv"] if model.stem.inv is not None else []) + [b.name for b in model.blocks]
    if layer_name not in all_names:
        raise ValueError(f"no layer named '{layer_name}'")
    if layer_name not in layers:
        raise ValueError(f"layer '{layer_name}' is not an involution layer")
    sink: dict = {}
    model.forward(x, tape=None, kernel_sink=sink)
    return sink[layer_name]


# ---------------------------------------------------------------------------
# Analytic cost model.
# ---------------------------------------------------------------------------


@dataclass
class CostRow:
    name: str
    params: int
    macs: int


@dataclass
class CostReport:
    rows: list
    input_hw: int

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def total_macs(self) -> int:
        return sum(r.macs for r in self.rows)

    def to_csv(self) -> str:
        lines = ["layer,name,params,macs"]
        for i, r in enumerate(self.rows):
            lines.append(f"{i},{r.name},{r.params},{r.macs}")
        lines.append(f"TOTAL,{len(self.rows)} layers,{self.total_params},{self.total_macs}")
        return "\n".join(lines) + "\n"


def _involution_layer_cost(c, cfg: InvolutionCfg, pos, include_norm_act, pool_in=0):
    """Params and MACs of one involution layer on ``c`` channels at ``pos``
    output positions. ``pool_in`` is the input element count when a stride
    pools the conditioning features."""
    k = cfg.kernel
    g = cfg.groups_for(c)
    kk_g = k * k * g
    if cfg.gen_form == "bottleneck":
        mid = c // cfg.reduction
        params = c * mid + 2 * mid + mid * kk_g + kk_g
        macs = pos * (c * mid + mid * kk_g + k * k * c)
        if include_norm_act:
            macs += pos * (2 * mid + mid)  # generator's bn + relu
    else:
        params = c * kk_g + kk_g
        macs = pos * (c * kk_g + k * k * c)
    if include_norm_act and pool_in:
        macs += pool_in
    return params, macs


def _middle_cost(cfg, c, pos, include_norm_act, pool_in):
    if cfg.kind == "involution":
        return _involution_layer_cost(c, cfg, pos, include_norm_act, pool_in)
    if cfg.kind == "conv3x3":
        return cfg.kernel ** 2 * c * c, pos * cfg.kernel ** 2 * c * c
    if cfg.kind == "depthwise3x3":
        return cfg.kernel ** 2 * c, pos * cfg.kernel ** 2 * c
    if cfg.kind == "attention":
        k = cfg.kernel
        params = 3 * c * c
        macs = pos * (3 * c * c + c * k * k + k * k * c)
        if include_norm_act and pool_in:
            macs += pool_in
        return params, macs
    raise ValueError(f"unknown middle operator '{cfg.kind}'")


def cost_report(spec: ArchSpec, input_hw: int = 224, include_norm_act: bool = True) -> CostReport:
    """Per-layer parameter and multiply-accumulate counts.

    ``include_norm_act=False`` restricts the count to weight layers
    (convolutions, projections, involution generation and aggregation, and
    the classifier); the default additionally charges batch norm (2 ops per
    element), relu (1) and pooling (1 per input element), which is the
    convention the published whole-network budgets follow.
    """
    if input_hw % 32:
        raise ShapeError(f"input resolution {input_hw} not divisible by 32")
    rows: list[CostRow] = []
    act = include_norm_act

    def add(name, params, macs):
        rows.append(CostRow(name, int(params), int(macs)))

    def bn_row(name, ch, pos, with_relu=True):
        macs = (2 * ch * pos + (ch * pos if with_relu else 0)) if act else 0
        add(name, 2 * ch, macs)

    stem = spec.stem
    res = input_hw // 2
    w = stem.width
    if stem.variant == "conv7":
        add("stem.conv1", 49 * 3 * w, 49 * 3 * w * res * res)
        bn_row("stem.bn1", w, res * res)
    else:
        half = w // 2
        add("stem.conv1", 9 * 3 * half, 9 * 3 * half * res * res)
        bn_row("stem.bn1", half, res * res)
        icfg = InvolutionCfg(kernel=3, group_channels=stem.inv_group_channels,
                             reduction=stem.inv_reduction)
        p, m = _involution_layer_cost(half, icfg, res * res, act)
        add("stem.inv", p, m)
        bn_row("stem.bn2", half, res * res)
        add("stem.conv2", 9 * half * w, 9 * half * w * res * res)
        bn_row("stem.bn3", w, res * res)
    if act:
        add("stem.maxpool", 0, w * res * res)
    res = res // 2

    for blk in spec.blocks:
        mid, out_ch = blk.mid_ch, blk.out_ch
        res_out = res // blk.stride
        pin, pout = res * res, res_out * res_out
        add(f"{blk.name}.reduce", blk.in_ch * mid, blk.in_ch * mid * pin)
        bn_row(f"{blk.name}.bn1", mid, pin)
        pool_in = mid * pin if blk.stride > 1 else 0
        p, m = _middle_cost(blk.middle, mid, pout, act, pool_in)
        add(f"{blk.name}.mid", p, m)
        bn_row(f"{blk.name}.bn2", mid, pout)
        add(f"{blk.name}.expand", mid * out_ch, mid * out_ch * pout)
        bn_row(f"{blk.name}.bn3", out_ch, pout)  # relu after the residual add
        if blk.stride != 1 or blk.in_ch != out_ch:
            add(f"{blk.name}.shortcut", blk.in_ch * out_ch, blk.in_ch * out_ch * pout)
            bn_row(f"{blk.name}.bn_sc", out_ch, pout, with_relu=False)
        res = res_out

    feat = spec.blocks[-1].out_ch
    if act:
        add("head.pool", 0, feat * res * res)
    add("head.fc", feat * spec.classes + spec.classes, feat * spec.classes)
    return CostReport(rows=rows, input_hw=input_hw)


def count_params(spec: ArchSpec) -> CostReport:
    """Exact integer parameter counts per layer (input size irrelevant)."""
    return cost_report(spec, input_hw=224)


def count_macs(spec: ArchSpec, input_hw: int = 224, include_norm_act: bool = True) -> CostReport:
    """Multiply-accumulate counts per layer at the given input resolution."""
    return cost_report(spec, input_hw=input_hw, include_norm_act=include_norm_act)


# ---------------------------------------------------------------------------
# Published reference budgets (params in M, MACs in G at 224 input) used by
# the profiling harness as pass/fail targets.
# ---------------------------------------------------------------------------

REFERENCE_PROFILES = {
    # ResNet baselines: conv3x3 middle, conv7 stem.
    ("conv3x3", 26, "conv7"): (13.7, 2.4),
    ("conv3x3", 38, "conv7"): (19.6, 3.2),
    ("conv3x3", 50, "conv7"): (25.6, 4.1),
    ("conv3x3", 101, "conv7"): (44.6, 7.9),
    ("conv3x3", 152, "conv7"): (60.2, 11.6),
    # RedNet with the involution stem, K=7, 16 group channels, r=4.
    ("involution", 26, "inv", 7, 16, 4, "bottleneck"): (9.2, 1.7),
    ("involution", 38, "inv", 7, 16, 4, "bottleneck"): (12.4, 2.2),
    ("involution", 50, "inv", 7, 16, 4, "bottleneck"): (15.5, 2.7),
    ("involution", 101, "inv", 7, 16, 4, "bottleneck"): (25.6, 4.7),
    ("involution", 152, "inv", 7, 16, 4, "bottleneck"): (34.0, 6.8),
    # RedNet-50 ablations on the conv7 stem: kernel size sweep,
    ("involution", 50, "conv7", 3, 16, 4, "bottleneck"): (14.7, 2.4),
    ("involution", 50, "conv7", 5, 16, 4, "bottleneck"): (15.1, 2.5),
    ("involution", 50, "conv7", 7, 16, 4, "bottleneck"): (15.5, 2.6),
    ("involution", 50, "conv7", 9, 16, 4, "bottleneck"): (16.2, 2.7),
    # group-channel sweep (None: one kernel group for all channels),
    ("involution", 50, "conv7", 7, 1, 4, "bottleneck"): (30.2, 5.0),
    ("involution", 50, "conv7", 7, 4, 4, "bottleneck"): (18.5, 3.0),
    ("involution", 50, "conv7", 7, None, 4, "bottleneck"): (14.6, 2.4),
    # and kernel generation function forms.
    ("involution", 50, "conv7", 7, 16, 4, "single"): (18.1, 3.0),
    ("involution", 50, "conv7", 7, 16, 1, "bottleneck"): (19.4, 3.2),
    ("involution", 50, "conv7", 7, 16, 16, "bottleneck"): (14.6, 2.4),
}


def lookup_reference(spec: ArchSpec):
    """Published (params_M, macs_G) for this configuration, or None."""
    if spec.depth is None:
        return None
    cfg = spec.middle
    if cfg.kind == "conv3x3":
        return REFERENCE_PROFILES.get(("conv3x3", spec.depth, spec.stem.variant))
    if cfg.kind == "involution":
        key = ("involution", spec.depth, spec.stem.variant, cfg.kernel,
               cfg.group_channels, cfg.reduction, cfg.gen_form)
        return REFERENCE_PROFILES.get(key)
    return None
