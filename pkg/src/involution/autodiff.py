"""Reverse-mode differentiation over a recorded operator tape.

Operators register a forward kernel and a matching gradient rule in a global
registry. ``apply`` runs an op either purely (tape=None, Tensor in/out) or
recorded on a :class:`Tape`, in which case backward() later accumulates
gradients into every participating :class:`Parameter`.

A :func:`grad_check` utility certifies each gradient rule against central
finite differences of a random scalar projection of the op output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Prng, ShapeError, Tensor

__all__ = [
    "OpDef",
    "register_op",
    "OPS",
    "Node",
    "Parameter",
    "Tape",
    "apply",
    "backward",
    "GradCheckReport",
    "grad_check",
]


@dataclass(frozen=True)
class OpDef:
    """A differentiable operator: forward kernel plus gradient rule.

    forward(*arrays, **kwargs) -> (out_array, ctx)
    backward(ctx, grad_out_array, **kwargs) -> tuple of per-input gradients
    (entries may be None for inputs that never need a gradient).
    """

    name: str
    forward: callable
    backward: callable


OPS: dict[str, OpDef] = {}


def register_op(name: str, forward, backward) -> None:
    if name in OPS:
        raise ValueError(f"op '{name}' registered twice")
    OPS[name] = OpDef(name, forward, backward)


class Parameter:
    """A trainable tensor with an accumulated gradient of identical shape."""

    __slots__ = ("value", "grad", "name")

    def __init__(self, value: Tensor, name: str = ""):
        self.value = value
        self.grad = Tensor(np.zeros(value.shape))
        self.name = name

    @property
    def numel(self) -> int:
        return self.value.size

    def zero_grad(self) -> None:
        self.grad = Tensor(np.zeros(self.value.shape))

    def __repr__(self):
        return f"Parameter({self.name or '?'}, shape={self.value.shape})"


class Node:
    """One recorded op application (or a leaf holding an input tensor)."""

    __slots__ = ("op", "inputs", "value", "ctx", "kwargs", "param")

    def __init__(self, op, inputs, value, ctx=None, kwargs=None, param=None):
        self.op = op  # op name, or None for leaves
        self.inputs = inputs
        self.value = value
        self.ctx = ctx
        self.kwargs = kwargs or {}
        self.param = param

    @property
    def shape(self):
        return self.value.shape


class Tape:
    """Ordered record of op applications; inputs always precede their users."""

    def __init__(self):
        self.nodes: list[Node] = []

    def leaf(self, value) -> Node:
        """Record an input. Accepts a Tensor or a Parameter."""
        if isinstance(value, Parameter):
            node = Node(None, (), value.value, param=value)
        elif isinstance(value, Tensor):
            node = Node(None, (), value)
        else:
            node = Node(None, (), Tensor(value))
        self.nodes.append(node)
        return node

    def __len__(self):
        return len(self.nodes)


def apply(tape, op_name: str, *args, **kwargs):
    """Run a registered op.

    With ``tape=None`` all args must be Tensors and a Tensor is returned.
    With a tape, args may be Nodes or Tensors (Tensors become constant
    leaves) and the result is a recorded Node.
    """
    if op_name not in OPS:
        raise ValueError(f"unregistered op '{op_name}'")
    op = OPS[op_name]

    if tape is None:
        arrays = []
        for a in args:
            if isinstance(a, Node):
                a = a.value
            elif isinstance(a, Parameter):
                a = a.value
            if not isinstance(a, Tensor):
                raise TypeError(f"op '{op_name}' expects Tensor inputs, got {type(a).__name__}")
            arrays.append(a.data)
        out, _ = op.forward(*arrays, **kwargs)
        return Tensor(out)

    nodes = []
    for a in args:
        if isinstance(a, Node):
            nodes.append(a)
        else:
            nodes.append(tape.leaf(a))
    out, ctx = op.forward(*[n.value.data for n in nodes], **kwargs)
    node = Node(op_name, tuple(nodes), Tensor(out), ctx=ctx, kwargs=kwargs)
    tape.nodes.append(node)
    return node


def backward(tape: Tape, loss: Node) -> dict:
    """Propagate d(loss)/d(node) back through the tape.

    The loss must be a single-element tensor. Gradients are accumulated
    into ``param.grad`` for every Parameter leaf reached, and the mapping
    {leaf node: gradient Tensor} for this pass is returned. Leaves the loss
    does not depend on are absent from the mapping (their parameters keep
    whatever gradient they already had, zero by default).
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.value.shape}")

    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.value.shape)}
    leaf_grads: dict[Node, Tensor] = {}

    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.op is None:
            t = Tensor(g)
            leaf_grads[node] = t
            if node.param is not None:
                node.param.grad = Tensor(node.param.grad.data + g)
            continue
        in_grads = OPS[node.op].backward(node.ctx, g, **node.kwargs)
        for inp, ig in zip(node.inputs, in_grads):
            if ig is None:
                continue
            if ig.shape != inp.value.shape:
                raise ShapeError(
                    f"gradient rule of '{node.op}' produced shape {ig.shape} "
                    f"for an input of shape {inp.value.shape}"
                )
            acc = grads.get(id(inp))
            grads[id(inp)] = ig if acc is None else acc + ig
    return leaf_grads


# ---------------------------------------------------------------------------
# Finite-difference certification.
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    op: str
    max_rel_err: float
    per_input: list = field(default_factory=list)  # (label, max rel err) pairs
    eps: float = 1e-5
    tol: float = 1e-5

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol

    def __str__(self):
        flag = "pass" if self.passed else "FAIL"
        return f"grad_check[{self.op}] max_rel_err={self.max_rel_err:.3e} ({flag})"


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1.0)


def grad_check(op, inputs, eps: float = 1e-5, tol: float = 1e-5, seed: int = 0,
               labels=None, kwargs=None, name: str = "", params=None) -> GradCheckReport:
    """Compare analytic gradients with central differences.

    ``op`` is either a registered op name or a callable ``f(tape, *nodes)``
    returning an output node (compositions are checked the same way as
    primitives). ``inputs`` is a list of concrete Tensors; a gradient is
    checked for every one of them. ``params`` may list Parameters the
    callable uses internally; their gradients are certified too, by
    perturbing the parameter value in place for the difference quotient.
    The scalar objective is the sum of the op output weighted by a fixed
    random projection, which exercises all output elements at once.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps out of the supported [1e-7, 1e-3] range")
    kwargs = kwargs or {}
    if isinstance(op, str):
        op_name = name or op
        def run(tape, *nodes):
            return apply(tape, op, *nodes, **kwargs)
    else:
        op_name = name or getattr(op, "__name__", "composite")
        def run(tape, *nodes):
            return op(tape, *nodes, **kwargs) if kwargs else op(tape, *nodes)

    inputs = [x if isinstance(x, Tensor) else Tensor(x) for x in inputs]
    labels = labels or [f"in{i}" for i in range(len(inputs))]

    def objective(tensors, proj):
        out = run(None, *tensors)
        if isinstance(out, Node):
            out = out.value
        return float((out.data * proj).sum())

    # One pure forward pins the output shape, then fixes the projection.
    probe = run(None, *inputs)
    if isinstance(probe, Node):
        probe = probe.value
    proj = Prng(seed ^ 0xA5A5).tensor_uniform(probe.shape, -1.0, 1.0).data

    # Analytic gradients of sum(proj * op(x)).
    params = params or []
    for p in params:
        p.zero_grad()
    tape = Tape()
    leaves = [tape.leaf(x) for x in inputs]
    out_node = run(tape, *leaves)
    weighted = apply(tape, "mul", out_node, Tensor(proj))
    loss = apply(tape, "reduce_sum", weighted)
    leaf_grads = backward(tape, loss)

    per_input = []
    worst = 0.0
    for idx, (x, label) in enumerate(zip(inputs, labels)):
        analytic = leaf_grads.get(leaves[idx])
        analytic = np.zeros(x.shape) if analytic is None else analytic.data
        err = 0.0
        base = x.data.copy()
        for flat in range(base.size):
            orig = base.flat[flat]
            base.flat[flat] = orig + eps
            plus = objective([Tensor(base) if i == idx else inputs[i] for i in range(len(inputs))], proj)
            base.flat[flat] = orig - eps
            minus = objective([Tensor(base) if i == idx else inputs[i] for i in range(len(inputs))], proj)
            base.flat[flat] = orig
            numeric = (plus - minus) / (2.0 * eps)
            err = max(err, _rel_err(float(analytic.flat[flat]), numeric))
        per_input.append((label, err))
        worst = max(worst, err)

    for p in params:
        analytic = p.grad.data
        err = 0.0
        keep = p.value
        base = keep.data.copy()
        for flat in range(base.size):
            orig = base.flat[flat]
            base.flat[flat] = orig + eps
            p.value = Tensor(base)
            plus = objective(inputs, proj)
            base.flat[flat] = orig - eps
            p.value = Tensor(base)
            minus = objective(inputs, proj)
            base.flat[flat] = orig
            numeric = (plus - minus) / (2.0 * eps)
            err = max(err, _rel_err(float(analytic.flat[flat]), numeric))
        p.value = keep
        per_input.append((p.name or "param", err))
        worst = max(worst, err)

    return GradCheckReport(op=op_name, max_rel_err=worst, per_input=per_input, eps=eps, tol=tol)
