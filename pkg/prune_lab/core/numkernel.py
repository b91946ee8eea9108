"""
Dense tensor arithmetic and exact backpropagation for small feedforward nets.

Tensors are numpy arrays in row-major order. Parameters and activations are
stored as float32 by default; matrix products and reductions accumulate in
float64 and are cast back to the storage dtype. The kernel preserves the dtype
of the weight store, so gradient checks can run on float64 stores.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
import logging

import numpy as np

from prune_lab.core.errors import (
    ShapeError, NumericError, DegenerateInputError, ParameterError,
)

logger = logging.getLogger(__name__)

LAYER_KINDS = ("affine", "relu", "l2norm")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a feedforward net; in/out dims are only meaningful for affine."""

    kind: str
    in_dim: int = 0
    out_dim: int = 0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ParameterError(f"Unknown layer kind '{self.kind}'")
        if self.kind == "affine" and (self.in_dim < 1 or self.out_dim < 1):
            raise ParameterError("Affine layers need positive in_dim and out_dim")

    def to_dict(self) -> dict:
        if self.kind == "affine":
            return {"kind": self.kind, "in_dim": self.in_dim, "out_dim": self.out_dim}
        return {"kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(d["kind"], int(d.get("in_dim", 0)), int(d.get("out_dim", 0)))


class WeightStore:
    """
    Named parameter tensors with optional binary prune masks.

    Tensors keep their registration order, which is also the tie-break order
    used by magnitude pruning.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._tensors = OrderedDict()
        self._masks = {}
        self._prunable = set()

    def register(self, name: str, value, prunable: bool = False):
        """
        Add a tensor to the store.

        Args:
            name: Unique tensor name
            value: Array-like initial value
            prunable: Whether magnitude pruning may mask this tensor
        """
        if name in self._tensors:
            raise ParameterError(f"Tensor '{name}' already registered")
        self._tensors[name] = np.array(value, dtype=self.dtype, order="C")
        if prunable:
            self._prunable.add(name)

    def remove(self, prefix: str):
        """Drop every tensor whose name starts with prefix."""
        for name in [n for n in self._tensors if n.startswith(prefix)]:
            del self._tensors[name]
            self._masks.pop(name, None)
            self._prunable.discard(name)

    def names(self) -> list:
        return list(self._tensors)

    def prunable_names(self, prefixes=None) -> list:
        """Prunable tensor names in registration order, optionally filtered by prefix."""
        names = [n for n in self._tensors if n in self._prunable]
        if prefixes is not None:
            names = [n for n in names if any(n.startswith(p) for p in prefixes)]
        return names

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __setitem__(self, name: str, value):
        current = self._tensors[name]
        value = np.asarray(value, dtype=self.dtype)
        if value.shape != current.shape:
            raise ShapeError(f"Tensor '{name}': expected {current.shape}, got {value.shape}")
        self._tensors[name] = np.array(value, order="C")

    def mask(self, name: str):
        """Binary mask for a tensor, or None when unmasked."""
        return self._masks.get(name)

    def set_mask(self, name: str, mask):
        """Install a mask and zero the masked positions of the tensor."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self._tensors[name].shape:
            raise ShapeError(f"Mask for '{name}': expected {self._tensors[name].shape}, got {mask.shape}")
        self._masks[name] = mask.copy()
        self._tensors[name] = np.where(mask, self._tensors[name], 0).astype(self.dtype)

    def effective(self, name: str) -> np.ndarray:
        """Tensor with its mask applied."""
        w = self._tensors[name]
        m = self._masks.get(name)
        if m is None:
            return w
        return np.where(m, w, 0).astype(self.dtype)

    def total_prunable(self, names=None) -> int:
        names = self.prunable_names() if names is None else names
        return int(sum(self._tensors[n].size for n in names))

    def sparsity(self, names=None) -> float:
        """Fraction of masked entries over the prunable tensors."""
        names = self.prunable_names() if names is None else names
        total = self.total_prunable(names)
        if total == 0:
            return 0.0
        masked = 0
        for n in names:
            m = self._masks.get(n)
            if m is not None:
                masked += int(m.size - np.count_nonzero(m))
        return masked / total

    def copy(self) -> "WeightStore":
        other = WeightStore(self.dtype)
        for name, value in self._tensors.items():
            other._tensors[name] = value.copy()
        other._masks = {n: m.copy() for n, m in self._masks.items()}
        other._prunable = set(self._prunable)
        return other

    def equals(self, other: "WeightStore") -> bool:
        """Bit-exact comparison of tensors, masks and prunable flags."""
        if self.names() != other.names() or self._prunable != other._prunable:
            return False
        for name in self._tensors:
            if not np.array_equal(self._tensors[name], other._tensors[name]):
                return False
            a, b = self._masks.get(name), other._masks.get(name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True


@dataclass
class Network:
    """A named stack of layers whose parameters live in a WeightStore."""

    name: str
    layers: list = field(default_factory=list)

    def param_names(self, index: int) -> tuple:
        return f"{self.name}.{index}.weight", f"{self.name}.{index}.bias"

    def trainable_names(self) -> list:
        names = []
        for i, layer in enumerate(self.layers):
            if layer.kind == "affine":
                names.extend(self.param_names(i))
        return names

    @property
    def in_dim(self) -> int:
        return next(l.in_dim for l in self.layers if l.kind == "affine")

    @property
    def out_dim(self) -> int:
        return [l.out_dim for l in self.layers if l.kind == "affine"][-1]

    def validate(self):
        """Check that consecutive affine layers have matching dims."""
        current = None
        for i, layer in enumerate(self.layers):
            if layer.kind != "affine":
                continue
            if current is not None and layer.in_dim != current:
                raise ShapeError(
                    f"{self.name} layer {i}: in_dim {layer.in_dim} does not match previous out_dim {current}")
            current = layer.out_dim

    def to_dict(self) -> dict:
        return {"name": self.name, "layers": [l.to_dict() for l in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "Network":
        return cls(d["name"], [LayerSpec.from_dict(l) for l in d["layers"]])


def mlp(name: str, dims: list, final_relu: bool = False, normalize: bool = False) -> Network:
    """
    Build an affine/ReLU stack.

    Args:
        name: Network name (parameter prefix)
        dims: Layer widths, e.g. [2, 32, 16]
        final_relu: Append ReLU after the last affine layer
        normalize: Append an l2norm layer at the end

    Returns:
        Network
    """
    if len(dims) < 2:
        raise ParameterError("mlp needs at least an input and an output width")
    layers = []
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        layers.append(LayerSpec("affine", a, b))
        if i < len(dims) - 2 or final_relu:
            layers.append(LayerSpec("relu"))
    if normalize:
        layers.append(LayerSpec("l2norm"))
    net = Network(name, layers)
    net.validate()
    return net


def init_network(net: Network, store: WeightStore, rng: np.random.Generator):
    """Register He-normal weights and zero biases for every affine layer."""
    for i, layer in enumerate(net.layers):
        if layer.kind != "affine":
            continue
        w_name, b_name = net.param_names(i)
        std = np.sqrt(2.0 / layer.in_dim)
        store.register(w_name, rng.normal(0.0, std, size=(layer.in_dim, layer.out_dim)), prunable=True)
        store.register(b_name, np.zeros(layer.out_dim))


def _matmul(a: np.ndarray, b: np.ndarray, dtype) -> np.ndarray:
    return (a.astype(np.float64) @ b.astype(np.float64)).astype(dtype)


def _row_norms(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(x.astype(np.float64) ** 2, axis=1, keepdims=True))


def forward(net: Network, store: WeightStore, x) -> list:
    """
    Run a batch through the network.

    Args:
        net: Network description
        store: WeightStore holding the network parameters
        x: Batch of inputs, shape (batch, in_dim)

    Returns:
        List of activations after every layer; the last entry is the output
    """
    h = np.asarray(x, dtype=store.dtype)
    if h.ndim != 2 or h.shape[1] != net.in_dim:
        raise ShapeError(f"{net.name}: expected input (batch, {net.in_dim}), got {h.shape}")

    activations = []
    for i, layer in enumerate(net.layers):
        if layer.kind == "affine":
            w_name, b_name = net.param_names(i)
            w = store.effective(w_name)
            if h.shape[1] != w.shape[0]:
                raise ShapeError(f"{net.name} layer {i}: input width {h.shape[1]} != {w.shape[0]}")
            h = (h.astype(np.float64) @ w.astype(np.float64) + store[b_name]).astype(store.dtype)
        elif layer.kind == "relu":
            h = np.maximum(h, 0).astype(store.dtype)
        else:
            norms = _row_norms(h)
            if np.any(norms == 0):
                raise DegenerateInputError(f"{net.name} layer {i}: zero vector cannot be normalized")
            h = (h / norms).astype(store.dtype)
        if not np.all(np.isfinite(h)):
            raise NumericError(f"{net.name} layer {i} ({layer.kind}) produced non-finite values", layer=i)
        activations.append(h)
    return activations


def l2_normalize_backward(y: np.ndarray, norms: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    """Gradient through row-wise y = x / ||x|| given y, ||x|| and dL/dy."""
    y64 = y.astype(np.float64)
    g64 = grad_y.astype(np.float64)
    dot = np.sum(y64 * g64, axis=1, keepdims=True)
    return (g64 - y64 * dot) / norms


def backward(net: Network, store: WeightStore, x, activations: list, output_gradient) -> tuple:
    """
    Backpropagate an output gradient through the network.

    Args:
        net: Network description
        store: WeightStore used in the matching forward call
        x: The input batch of that forward call
        activations: Activations returned by forward
        output_gradient: dL/d(output), same shape as activations[-1]

    Returns:
        Tuple (gradients, input_gradient); gradients maps every trainable
        tensor name to an array of the parameter's shape. Masked positions are 0.
    """
    x = np.asarray(x, dtype=store.dtype)
    if len(activations) != len(net.layers):
        raise ShapeError(f"{net.name}: expected {len(net.layers)} activations, got {len(activations)}")
    g = np.asarray(output_gradient, dtype=np.float64)
    if g.shape != activations[-1].shape:
        raise ShapeError(f"{net.name}: output gradient {g.shape} does not match output {activations[-1].shape}")

    grads = {}
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        inp = x if i == 0 else activations[i - 1]
        if layer.kind == "affine":
            w_name, b_name = net.param_names(i)
            w = store.effective(w_name)
            if inp.shape[1] != w.shape[0] or activations[i].shape[1] != w.shape[1]:
                raise ShapeError(f"{net.name} layer {i}: stale activations")
            gw = inp.astype(np.float64).T @ g
            mask = store.mask(w_name)
            if mask is not None:
                gw = np.where(mask, gw, 0.0)
            grads[w_name] = gw.astype(store.dtype)
            grads[b_name] = np.sum(g, axis=0).astype(store.dtype)
            g = g @ w.astype(np.float64).T
        elif layer.kind == "relu":
            if inp.shape != g.shape:
                raise ShapeError(f"{net.name} layer {i}: stale activations")
            g = g * (inp > 0)
        else:
            norms = _row_norms(inp)
            g = l2_normalize_backward(activations[i], norms, g)
    return grads, g.astype(store.dtype)


def l2_normalize(v) -> np.ndarray:
    """
    Scale a rank-1 tensor to unit Euclidean norm.

    Raises:
        DegenerateInputError: for the zero vector
    """
    v = np.asarray(v)
    if v.ndim != 1:
        raise ShapeError(f"l2_normalize expects a vector, got shape {v.shape}")
    dtype = v.dtype if np.issubdtype(v.dtype, np.floating) else np.float32
    norm = np.sqrt(np.sum(v.astype(np.float64) ** 2))
    if norm == 0:
        raise DegenerateInputError("Cannot normalize a zero vector")
    return (v.astype(np.float64) / norm).astype(dtype)
