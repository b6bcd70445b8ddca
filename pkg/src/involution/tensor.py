"""Dense float64 tensors plus a deterministic pseudo-random generator.

Everything in this library moves through the small ``Tensor`` wrapper below:
an immutable, C-contiguous float64 numpy array together with the handful of
constructors, layout operations and reductions the operators are written
against. Feature maps use the (B, C, H, W) layout throughout.

Double precision is non-negotiable here: the finite-difference gradient
checks in :mod:`involution.autodiff` need the headroom.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "ShapeError",
    "Tensor",
    "Prng",
    "full",
    "zeros",
    "ones",
    "pad_zero",
    "matmul",
    "ew_map",
    "ew_zip",
    "reduce_sum",
    "permute",
    "reshape",
    "expand",
    "dump_txt",
    "load_txt",
]


class ShapeError(ValueError):
    """Raised when an operation receives incompatibly shaped arguments."""


def _as_array(data) -> np.ndarray:
    arr = np.array(data, dtype=np.float64, order="C")
    return arr


class Tensor:
    """Immutable dense array of float64 values in row-major order."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = _as_array(data)
        arr.flags.writeable = False
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        """Read-only numpy view of the stored values."""
        return self._data

    @property
    def shape(self) -> tuple:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    def item(self) -> float:
        if self._data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self._data.reshape(()))

    def tolist(self):
        return self._data.tolist()

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    # Minimal arithmetic sugar. Shapes must match exactly; there is no
    # implicit broadcasting (see expand() for the one sanctioned form).
    def _coerce(self, other):
        if isinstance(other, Tensor):
            if other.shape != self.shape:
                raise ShapeError(f"shape mismatch: {self.shape} vs {other.shape}")
            return other._data
        if isinstance(other, (int, float)):
            return float(other)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else Tensor(self._data + o)

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else Tensor(self._data - o)

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else Tensor(self._data * o)

    __rmul__ = __mul__

    def __neg__(self):
        return Tensor(-self._data)


def _check_dims(dims) -> tuple:
    dims = tuple(int(d) for d in dims)
    if len(dims) == 0:
        raise ShapeError("empty shape is not allowed")
    for d in dims:
        if d < 1:
            raise ShapeError(f"invalid shape {dims}: all dimensions must be >= 1")
    return dims


def full(shape, value: float) -> Tensor:
    """Tensor of the given shape with every element equal to ``value``."""
    dims = _check_dims(shape)
    return Tensor(np.full(dims, float(value), dtype=np.float64))


def zeros(shape) -> Tensor:
    return full(shape, 0.0)


def ones(shape) -> Tensor:
    return full(shape, 1.0)


def pad_zero(x: Tensor, pad: int) -> Tensor:
    """Zero-pad the two spatial axes of a (B, C, H, W) tensor by ``pad`` per side."""
    if x.ndim != 4:
        raise ShapeError(f"pad_zero expects a 4-d tensor, got shape {x.shape}")
    p = int(pad)
    if p < 0:
        raise ShapeError("padding must be non-negative")
    if p == 0:
        return Tensor(x.data)
    return Tensor(np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p))))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Standard (m, k) x (k, n) real matrix product."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-d tensors, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions disagree: {a.shape} x {b.shape}")
    return Tensor(a.data @ b.data)


def ew_map(x: Tensor, f) -> Tensor:
    """Apply a scalar function elementwise."""
    try:
        out = np.asarray(f(x.data), dtype=np.float64)
        if out.shape == x.shape:
            return Tensor(out)
    except (TypeError, ValueError):
        pass
    flat = np.fromiter((float(f(v)) for v in x.data.flat), dtype=np.float64, count=x.size)
    return Tensor(flat.reshape(x.shape))


def ew_zip(x: Tensor, y: Tensor, f) -> Tensor:
    """Apply a binary scalar function to equally shaped tensors, elementwise."""
    if x.shape != y.shape:
        raise ShapeError(f"ew_zip shape mismatch: {x.shape} vs {y.shape}")
    try:
        out = np.asarray(f(x.data, y.data), dtype=np.float64)
        if out.shape == x.shape:
            return Tensor(out)
    except (TypeError, ValueError):
        pass
    flat = np.fromiter(
        (float(f(a, b)) for a, b in zip(x.data.flat, y.data.flat)),
        dtype=np.float64,
        count=x.size,
    )
    return Tensor(flat.reshape(x.shape))


def reduce_sum(x: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    """Sum over the given axis or axes (all axes when ``axes`` is None)."""
    if axes is None:
        out = x.data.sum(keepdims=keepdims)
        return Tensor(out if keepdims else np.asarray(out))
    if isinstance(axes, int):
        axes = (axes,)
    axes = tuple(int(a) for a in axes)
    for a in axes:
        if not (-x.ndim <= a < x.ndim):
            raise ShapeError(f"axis {a} out of range for shape {x.shape}")
    return Tensor(x.data.sum(axis=axes, keepdims=keepdims))


def permute(x: Tensor, order) -> Tensor:
    """Reorder axes; the multiset of stored values is unchanged."""
    order = tuple(int(a) for a in order)
    if sorted(order) != list(range(x.ndim)):
        raise ShapeError(f"{order} is not a permutation of axes for shape {x.shape}")
    return Tensor(np.ascontiguousarray(x.data.transpose(order)))


def reshape(x: Tensor, dims) -> Tensor:
    dims = _check_dims(dims)
    if int(np.prod(dims)) != x.size:
        raise ShapeError(f"cannot reshape {x.shape} ({x.size} values) to {dims}")
    return Tensor(x.data.reshape(dims))


def expand(x: Tensor, axis: int, n: int) -> Tensor:
    """Insert a new axis of length ``n`` at ``axis``, repeating the tensor.

    This is the single sanctioned broadcast in the library; every other
    elementwise op insists on exactly matching shapes so that layout bugs
    surface as loud shape errors.
    """
    if not (0 <= axis <= x.ndim):
        raise ShapeError(f"axis {axis} out of range for inserting into shape {x.shape}")
    if n < 1:
        raise ShapeError("expansion length must be >= 1")
    expanded = np.expand_dims(x.data, axis)
    target = expanded.shape[:axis] + (int(n),) + expanded.shape[axis + 1 :]
    return Tensor(np.ascontiguousarray(np.broadcast_to(expanded, target)))


# ---------------------------------------------------------------------------
# Text dump format used by the oracle suite for cross-checking:
# first line holds the space-separated shape, then one row-major value per
# line printed with 17 significant digits (lossless for float64).
# ---------------------------------------------------------------------------


def dump_txt(x: Tensor, path) -> None:
    with open(path, "w") as fh:
        fh.write(" ".join(str(d) for d in x.shape) + "\n")
        for v in x.data.flat:
            fh.write(f"{v:.17g}\n")


def load_txt(path) -> Tensor:
    with open(path) as fh:
        dims = _check_dims(fh.readline().split())
        count = int(np.prod(dims))
        vals = np.fromiter((float(fh.readline()) for _ in range(count)), dtype=np.float64, count=count)
    return Tensor(vals.reshape(dims))


# ---------------------------------------------------------------------------
# Deterministic pseudo-random generator (splitmix64).
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


class Prng:
    """splitmix64 stream generator.

    Integer and uniform draws are pure 64-bit arithmetic, hence bit-exact
    across platforms and runs. Normal deviates go through libm (log/cos) and
    are deterministic per build.
    """

    __slots__ = ("seed", "_state")

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._state = self.seed

    def fork(self, tag: int) -> "Prng":
        """Independent stream derived from the initial seed and a tag."""
        return Prng(_mix64(self.seed ^ ((int(tag) + 1) * _GOLDEN & _MASK64)))

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix64(self._state)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return lo + (hi - lo) * u

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        # Box-Muller; guard against log(0).
        u1 = max(self.uniform(), 1e-300)
        u2 = self.uniform()
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n). Modulo bias is irrelevant at our n."""
        if n < 1:
            raise ValueError("randint needs n >= 1")
        return self.next_u64() % n

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def shuffle(self, seq) -> list:
        """Fisher-Yates shuffle, returned as a new list."""
        out = list(seq)
        for i in range(len(out) - 1, 0, -1):
            j = self.randint(i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def tensor_uniform(self, shape, lo: float = 0.0, hi: float = 1.0) -> Tensor:
        dims = _check_dims(shape)
        count = int(np.prod(dims))
        flat = np.fromiter((self.uniform(lo, hi) for _ in range(count)), dtype=np.float64, count=count)
        return Tensor(flat.reshape(dims))

    def tensor_normal(self, shape, mu: float = 0.0, sigma: float = 1.0) -> Tensor:
        dims = _check_dims(shape)
        count = int(np.prod(dims))
        flat = np.fromiter((self.normal(mu, sigma) for _ in range(count)), dtype=np.float64, count=count)
        return Tensor(flat.reshape(dims))
