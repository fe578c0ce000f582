"""Critic and generator networks for one-hot sequence batches.

Both networks work on channel-last tensors of shape (batch, length, channels),
so the "transpose the channels into a new embedding" step between the two
convolutions is a no-op view.
"""

from __future__ import annotations

import json
import math
import zipfile
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    length: int
    alphabet_size: int
    channels: int = 32
    kernel: int = 5
    noise_dim: int = 64
    dropout: float = 0.1
    slope: float = 0.2

    def __post_init__(self):
        for name in ("length", "alphabet_size", "channels", "kernel", "noise_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")


def head_widths(length: int) -> list[int]:
    """Widths of the critic head, halving (rounding up) from ``length`` to 1."""
    widths = [length]
    while widths[-1] > 1:
        widths.append(math.ceil(widths[-1] / 2))
    return widths


class ModelParams:
    """Ordered, named collection of trainable leaves."""

    def __init__(self, arrays=None):
        self._nodes = OrderedDict()
        for name, value in (arrays or {}).items():
            self.add(name, value)

    def add(self, name, value):
        if name in self._nodes:
            raise KeyError(f"duplicate parameter {name!r}")
        node = ad.Node(value, requires_grad=True, name=name)
        self._nodes[name] = node
        return node

    def __getitem__(self, name):
        return self._nodes[name]

    def __iter__(self):
        return iter(self._nodes.values())

    def __len__(self):
        return len(self._nodes)

    def names(self):
        return list(self._nodes)

    def items(self):
        return self._nodes.items()

    def count(self) -> int:
        return sum(node.value.size for node in self)

    def zero_grad(self):
        for node in self:
            node.zero_grad()

    def max_abs(self) -> float:
        return max((float(np.abs(n.value).max()) for n in self if n.value.size), default=0.0)

    def state(self) -> dict:
        return {name: node.value.copy() for name, node in self.items()}

    def load_state(self, arrays):
        missing = set(self._nodes) ^ set(arrays)
        if missing:
            raise KeyError(f"parameter names differ: {sorted(missing)}")
        for name, node in self.items():
            value = np.asarray(arrays[name])
            if value.shape != node.shape:
                raise ValueError(f"{name}: shape {value.shape} != expected {node.shape}")
            node.value = value.astype(node.value.dtype, copy=True)

    def fill(self, value: float):
        for node in self:
            node.value = np.full_like(node.value, value)


def _uniform(rng, shape, bound):
    return rng.uniform(-bound, bound, size=shape)


class CriticNet:
    """Two same-padded convolutions followed by a halving dense head.

    Output is one unbounded real score per sequence.
    """

    def __init__(self, config: NetConfig, rng: np.random.Generator, tau: float = 0.01):
        self.config = config
        c = config
        shapes = OrderedDict()
        shapes["conv1.weight"] = (c.kernel, c.alphabet_size, c.channels)
        shapes["conv1.bias"] = (c.channels,)
        shapes["conv2.weight"] = (c.kernel, c.channels, 1)
        shapes["conv2.bias"] = (1,)
        widths = head_widths(c.length)
        for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
            shapes[f"head{i}.weight"] = (n_in, n_out)
            shapes[f"head{i}.bias"] = (n_out,)
        self.n_head = len(widths) - 1
        self.params = ModelParams({k: _uniform(rng, s, tau) for k, s in shapes.items()})

    def forward(self, batch, training=False, rng=None) -> ad.Node:
        c = self.config
        x = ad.as_node(batch)
        if x.value.ndim != 3 or x.shape[1:] != (c.length, c.alphabet_size):
            raise ValueError(
                f"critic expects (batch, {c.length}, {c.alphabet_size}) input, got {x.shape}"
            )
        p = self.params
        h = ad.conv1d(x, p["conv1.weight"], p["conv1.bias"])
        h = ad.dropout(ad.leaky_relu(h, c.slope), c.dropout, rng, training)
        h = ad.conv1d(h, p["conv2.weight"], p["conv2.bias"])
        h = ad.leaky_relu(h, c.slope)
        h = ad.reshape(h, (x.shape[0], c.length))
        for i in range(self.n_head):
            h = ad.dropout(h, c.dropout, rng, training)
            h = h @ p[f"head{i}.weight"] + p[f"head{i}.bias"]
            h = ad.leaky_relu(h, c.slope)
        return ad.reshape(h, (x.shape[0],))

    __call__ = forward


class GeneratorNet:
    """Noise -> dense inflation to length*alphabet -> two convolutions -> softmax."""

    def __init__(self, config: NetConfig, rng: np.random.Generator):
        self.config = config
        c = config
        l_u = c.length * c.alphabet_size
        # fan-in scaled uniform, like common framework defaults
        spec = OrderedDict()
        spec["inflate.weight"] = ((c.noise_dim, l_u), c.noise_dim)
        spec["inflate.bias"] = ((l_u,), c.noise_dim)
        spec["conv1.weight"] = ((c.kernel, c.alphabet_size, c.channels), c.kernel * c.alphabet_size)
        spec["conv1.bias"] = ((c.channels,), c.kernel * c.alphabet_size)
        spec["conv2.weight"] = ((c.kernel, c.channels, c.alphabet_size), c.kernel * c.channels)
        spec["conv2.bias"] = ((c.alphabet_size,), c.kernel * c.channels)
        self.params = ModelParams(
            {k: _uniform(rng, shape, 1.0 / math.sqrt(fan_in)) for k, (shape, fan_in) in spec.items()}
        )

    def forward(self, noise, training=False, rng=None) -> ad.Node:
        c = self.config
        z = ad.as_node(noise)
        if z.value.ndim != 2 or z.shape[1] != c.noise_dim:
            raise ValueError(f"generator expects (batch, {c.noise_dim}) noise, got {z.shape}")
        p = self.params
        h = z @ p["inflate.weight"] + p["inflate.bias"]
        h = ad.dropout(ad.leaky_relu(h, c.slope), c.dropout, rng, training)
        h = ad.reshape(h, (z.shape[0], c.length, c.alphabet_size))
        h = ad.conv1d(h, p["conv1.weight"], p["conv1.bias"])
        h = ad.dropout(ad.leaky_relu(h, c.slope), c.dropout, rng, training)
        h = ad.conv1d(h, p["conv2.weight"], p["conv2.bias"])
        h = ad.leaky_relu(h, c.slope)
        return ad.softmax(h, axis=-1)

    __call__ = forward


class DenseCritic:
    """Small fully connected critic for vector-valued samples."""

    def __init__(self, widths, rng: np.random.Generator, tau: float = 0.01, slope: float = 0.2):
        if len(widths) < 2 or widths[-1] != 1:
            raise ValueError("widths must run from the input size down to 1")
        self.widths = list(widths)
        self.slope = slope
        arrays = OrderedDict()
        for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
            arrays[f"dense{i}.weight"] = _uniform(rng, (n_in, n_out), tau)
            arrays[f"dense{i}.bias"] = _uniform(rng, (n_out,), tau)
        self.params = ModelParams(arrays)

    def forward(self, x, training=False, rng=None) -> ad.Node:
        h = ad.as_node(x)
        if h.value.ndim != 2 or h.shape[1] != self.widths[0]:
            raise ValueError(f"dense critic expects (batch, {self.widths[0]}) input, got {h.shape}")
        last = len(self.widths) - 2
        for i in range(last + 1):
            h = h @ self.params[f"dense{i}.weight"] + self.params[f"dense{i}.bias"]
            if i < last:
                h = ad.leaky_relu(h, self.slope)
        return ad.reshape(h, (h.shape[0],))

    __call__ = forward


def sample_noise(b: int, y: int, rng: np.random.Generator) -> np.ndarray:
    if b < 1 or y < 1:
        raise ValueError(f"noise shape must be positive, got ({b}, {y})")
    return rng.standard_normal((b, y))


def lipschitz_estimate(critic, inputs_a, inputs_b) -> float:
    """max |f(a) - f(b)| / ||a - b|| over paired rows, evaluation mode."""
    fa = critic.forward(inputs_a).value
    fb = critic.forward(inputs_b).value
    diff = (np.asarray(inputs_a) - np.asarray(inputs_b)).reshape(len(fa), -1)
    dist = np.linalg.norm(diff, axis=1)
    keep = dist > 0
    return float(np.max(np.abs(fa - fb)[keep] / dist[keep]))


# --------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, critic: CriticNet, generator: GeneratorNet, extra=None):
    """Write both networks plus a config echo to an ``.npz`` container."""
    meta = {"version": CHECKPOINT_VERSION, "net": asdict(critic.config), "extra": extra or {}}
    arrays = {f"critic/{k}": v for k, v in critic.params.state().items()}
    arrays.update({f"generator/{k}": v for k, v in generator.params.state().items()})
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    # fixed member timestamps keep the file byte-identical across reruns
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name, value in arrays.items():
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            with zf.open(info, "w") as fh:
                np.lib.format.write_array(fh, np.ascontiguousarray(value), allow_pickle=False)


def load_checkpoint(path):
    """Return ``(critic, generator, meta)`` from :func:`save_checkpoint` output."""
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError, zipfile.BadZipFile) as exc:
        raise ValueError(f"{path}: not a readable checkpoint ({exc})") from None
    if "__meta__" not in arrays:
        raise ValueError(f"{path}: checkpoint has no metadata")
    meta = json.loads(arrays.pop("__meta__").tobytes().decode())
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
    config = NetConfig(**meta["net"])
    dummy = np.random.default_rng(0)
    critic, generator = CriticNet(config, dummy), GeneratorNet(config, dummy)
    critic.params.load_state({k[7:]: v for k, v in arrays.items() if k.startswith("critic/")})
    generator.params.load_state({k[10:]: v for k, v in arrays.items() if k.startswith("generator/")})
    return critic, generator, meta
