"""Sequential CNN description, portable weight archives, and the saliency map
obtained by backpropagating a feature map to the image.

A network is a plain chain of conv / relu / maxpool layers described in a
small text format (see :func:`parse_arch`).  Trained parameters live in an
ELFW binary archive, a flat list of named tensors.  Keypoint saliency is the
absolute gradient of a chosen feature map with respect to the image, seeded
with the feature map itself: one forward pass, one backward pass, no training.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import ShapeError

LAYER_KINDS = ("conv", "relu", "maxpool")


class ArchParseError(ValueError):
    """Malformed architecture description; message carries the line number."""


class ArchiveFormatError(ValueError):
    """Malformed or truncated ELFW weight archive."""


# ---------------------------------------------------------------------------
# Graph description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerSpec:
    """One layer of a sequential chain.

    ``kind`` is one of ``conv`` (fields out_channels, kh, kw, stride, pad),
    ``relu`` (no fields) or ``maxpool`` (fields pool, stride).
    """

    name: str
    kind: str
    out_channels: int = 0
    kh: int = 0
    kw: int = 0
    stride: int = 1
    pad: int = 0
    pool: int = 0

    @staticmethod
    def conv(name, out_channels, kh, kw, stride=1, pad=0):
        if min(out_channels, kh, kw, stride) < 1 or pad < 0:
            raise ValueError(f"conv layer {name!r}: non-positive extent")
        return LayerSpec(name, "conv", out_channels=out_channels,
                         kh=kh, kw=kw, stride=stride, pad=pad)

    @staticmethod
    def relu(name):
        return LayerSpec(name, "relu")

    @staticmethod
    def maxpool(name, k, stride):
        if k < 1 or stride < 1:
            raise ValueError(f"maxpool layer {name!r}: non-positive extent")
        return LayerSpec(name, "maxpool", pool=k, stride=stride)


@dataclass(frozen=True)
class NetGraph:
    """Validated sequential network plus ingest preprocessing.

    ``mean`` is subtracted per channel and the result multiplied by ``scale``
    before the first layer.  Channel counts are chained through every conv at
    construction time.
    """

    layers: tuple
    input_channels: int
    mean: np.ndarray = field(default=None)
    scale: float = 1.0

    def __post_init__(self):
        if self.input_channels < 1:
            raise ValueError("input_channels must be >= 1")
        mean = self.mean
        if mean is None:
            mean = np.zeros(self.input_channels)
        mean = np.asarray(mean, dtype=np.float64)
        if mean.shape != (self.input_channels,):
            raise ValueError(
                f"mean vector length {mean.shape} does not match "
                f"{self.input_channels} input channels"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "layers", tuple(self.layers))
        seen = set()
        for spec in self.layers:
            if spec.kind not in LAYER_KINDS:
                raise ValueError(f"unknown layer kind {spec.kind!r}")
            if spec.name in seen:
                raise ValueError(f"duplicate layer name {spec.name!r}")
            seen.add(spec.name)

    def layer_names(self):
        return [s.name for s in self.layers]

    def index_of(self, name):
        for i, s in enumerate(self.layers):
            if s.name == name:
                return i
        raise KeyError(f"no layer named {name!r}")

    def channels_before(self, index):
        """Channel count entering layer ``index``."""
        c = self.input_channels
        for s in self.layers[:index]:
            if s.kind == "conv":
                c = s.out_channels
        return c

    def conv_layers(self):
        return [s for s in self.layers if s.kind == "conv"]

    def preprocess(self, image):
        """Subtract the per-channel mean and apply the scale factor."""
        x = np.asarray(image, dtype=np.float64)
        if x.ndim != 3 or x.shape[0] != self.input_channels:
            raise ShapeError(
                f"image shape {x.shape} does not match "
                f"{self.input_channels} input channels"
            )
        return (x - self.mean[:, None, None]) * self.scale


def parse_arch(text):
    """Parse an architecture description into a :class:`NetGraph`.

    The format is line based; ``#`` starts a comment and blank lines are
    skipped.  Header lines come before any layer line::

        input_channels 3
        mean 123.68 116.779 103.939
        scale 1.0

    followed by one layer per line, ``name kind params``::

        conv1_1 conv 64 3 3 1 1     # out_channels kH kW stride pad
        relu1_1 relu
        pool1 maxpool 2 2           # k stride

    ``mean`` defaults to zeros and ``scale`` to 1.  Raises
    :class:`ArchParseError` naming the offending line on any problem.
    """
    input_channels = None
    mean = None
    scale = 1.0
    layers = []
    names = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0]

        def err(msg):
            return ArchParseError(f"line {lineno}: {msg}")

        if key == "input_channels":
            if len(parts) != 2 or not parts[1].isdigit() or int(parts[1]) < 1:
                raise err("input_channels expects one positive integer")
            input_channels = int(parts[1])
            continue
        if key == "mean":
            try:
                mean = np.array([float(v) for v in parts[1:]])
            except ValueError:
                raise err("mean expects float values") from None
            if mean.size == 0:
                raise err("mean expects at least one value")
            continue
        if key == "scale":
            try:
                scale = float(parts[1])
            except (IndexError, ValueError):
                raise err("scale expects one float") from None
            continue

        # layer line: name kind params
        if len(parts) < 2:
            raise err(f"expected 'name kind ...', got {line!r}")
        name, kind, params = parts[0], parts[1], parts[2:]
        if name in names:
            raise err(f"duplicate layer name {name!r}")
        names.add(name)
        try:
            if kind == "conv":
                if len(params) != 5:
                    raise err("conv expects: out_channels kH kW stride pad")
                oc, kh, kw, st, pd = (int(v) for v in params)
                layers.append(LayerSpec.conv(name, oc, kh, kw, st, pd))
            elif kind == "relu":
                if params:
                    raise err("relu takes no parameters")
                layers.append(LayerSpec.relu(name))
            elif kind == "maxpool":
                if len(params) != 2:
                    raise err("maxpool expects: k stride")
                k, st = (int(v) for v in params)
                layers.append(LayerSpec.maxpool(name, k, st))
            else:
                raise err(f"unknown layer kind {kind!r}")
        except (ValueError, ArchParseError) as exc:
            if isinstance(exc, ArchParseError):
                raise
            raise err(str(exc)) from None

    if input_channels is None:
        raise ArchParseError("missing input_channels header")
    if mean is not None and mean.size != input_channels:
        raise ArchParseError(
            f"mean has {mean.size} values for {input_channels} input channels"
        )
    return NetGraph(tuple(layers), input_channels, mean, scale)


def format_arch(graph):
    """Inverse of :func:`parse_arch` (used by exporters and tests)."""
    lines = [f"input_channels {graph.input_channels}"]
    lines.append("mean " + " ".join(repr(float(v)) for v in graph.mean))
    lines.append(f"scale {graph.scale!r}")
    for s in graph.layers:
        if s.kind == "conv":
            lines.append(f"{s.name} conv {s.out_channels} {s.kh} {s.kw} {s.stride} {s.pad}")
        elif s.kind == "relu":
            lines.append(f"{s.name} relu")
        else:
            lines.append(f"{s.name} maxpool {s.pool} {s.stride}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# ELFW weight archive
# ---------------------------------------------------------------------------

_MAGIC = b"ELFW"
_VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def write_archive(path, tensors):
    """Write named tensors to an ELFW v1 file.

    Layout (little-endian): magic ``ELFW``, u32 version, u32 tensor count;
    per tensor: u16 name length, UTF-8 name, u8 dtype (0=f32, 1=f64),
    u8 ndim, u32 extents, then the payload row-major.
    """
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr)
            if arr.dtype == np.float32:
                code, out = 0, arr.astype("<f4", copy=False)
            else:
                code, out = 1, arr.astype("<f8", copy=False)
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<BB", code, out.ndim))
            fh.write(struct.pack(f"<{out.ndim}I", *out.shape))
            fh.write(np.ascontiguousarray(out).tobytes())


def read_archive(path):
    """Read an ELFW v1 file into a name -> float64 array dict.

    32-bit payloads are widened to 64-bit on load.  Raises
    :class:`ArchiveFormatError` on bad magic, version, dtype code, zero
    extents or truncated payloads; nothing partial is returned.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    def take(n, what):
        nonlocal off
        if off + n > len(data):
            raise ArchiveFormatError(f"truncated archive while reading {what}")
        chunk = data[off:off + n]
        off += n
        return chunk

    off = 0
    if take(4, "magic") != _MAGIC:
        raise ArchiveFormatError("bad magic, not an ELFW archive")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != _VERSION:
        raise ArchiveFormatError(f"unsupported ELFW version {version}")
    tensors = {}
    for i in range(count):
        (nlen,) = struct.unpack("<H", take(2, "name length"))
        name = take(nlen, "name").decode("utf-8")
        code, ndim = struct.unpack("<BB", take(2, "tensor header"))
        if code not in _DTYPES:
            raise ArchiveFormatError(f"tensor {name!r}: unknown dtype code {code}")
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim, "dims"))
        if any(d < 1 for d in dims):
            raise ArchiveFormatError(f"tensor {name!r}: zero extent in {dims}")
        dt = _DTYPES[code]
        n = int(np.prod(dims))
        raw = take(n * dt.itemsize, f"payload of {name!r}")
        arr = np.frombuffer(raw, dtype=dt).reshape(dims).astype(np.float64)
        tensors[name] = arr
    return tensors


class WeightArchive:
    """Named-tensor store backing a graph's conv layers.

    Conv parameters live under ``<layer>.weight`` (Co, Ci, kH, kW) and
    ``<layer>.bias`` (Co,).
    """

    def __init__(self, tensors):
        self.tensors = dict(tensors)

    @classmethod
    def load(cls, path):
        return cls(read_archive(path))

    def save(self, path, dtype=np.float64):
        out = {k: np.asarray(v, dtype=dtype) for k, v in self.tensors.items()}
        write_archive(path, out)

    def conv_params(self, layer_name):
        try:
            w = self.tensors[f"{layer_name}.weight"]
            b = self.tensors[f"{layer_name}.bias"]
        except KeyError as exc:
            raise ArchiveFormatError(
                f"archive has no entry for conv layer {layer_name!r}"
            ) from exc
        return w, b

    def validate_against(self, graph):
        """Check every conv layer has an entry with matching dims."""
        for i, spec in enumerate(graph.layers):
            if spec.kind != "conv":
                continue
            w, b = self.conv_params(spec.name)
            ci = graph.channels_before(i)
            want = (spec.out_channels, ci, spec.kh, spec.kw)
            if w.shape != want:
                raise ArchiveFormatError(
                    f"layer {spec.name!r}: weights {w.shape}, graph wants {want}"
                )
            if b.shape != (spec.out_channels,):
                raise ArchiveFormatError(
                    f"layer {spec.name!r}: bias {b.shape}, "
                    f"graph wants ({spec.out_channels},)"
                )


def random_archive(graph, rng=None, weight_scale=None):
    """Random-normal weights for every conv layer of ``graph``.

    Scale defaults to 1/sqrt(fan_in) per layer, which keeps activations of
    deep random chains in a sane range for gradient checking.
    """
    rng = np.random.default_rng(rng)
    tensors = {}
    for i, spec in enumerate(graph.layers):
        if spec.kind != "conv":
            continue
        ci = graph.channels_before(i)
        fan_in = ci * spec.kh * spec.kw
        s = weight_scale if weight_scale is not None else 1.0 / np.sqrt(fan_in)
        tensors[f"{spec.name}.weight"] = rng.normal(
            0.0, s, size=(spec.out_channels, ci, spec.kh, spec.kw))
        tensors[f"{spec.name}.bias"] = rng.normal(0.0, 0.1, size=spec.out_channels)
    return WeightArchive(tensors)


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SaliencyMap:
    """Non-negative single-channel map, same spatial dims as the image."""

    values: np.ndarray
    source_layer: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 3 and v.shape[0] == 1:
            v = v[0]
        if v.ndim != 2:
            raise ShapeError(f"saliency map must be 2-D, got {v.shape}")
        if v.size and v.min() < 0:
            raise ValueError("saliency map must be non-negative")
        object.__setattr__(self, "values", v)


def forward_to(graph, archive, image, layer):
    """Run the preprocessed image through the chain up to ``layer`` inclusive.

    Returns ``(feature, tape)`` where the tape holds exactly what the
    backward pass needs: conv weights and input dims, relu pre-activations,
    pool argmax positions.  Conv inputs themselves are not saved; the input
    gradient of a convolution does not depend on them.
    """
    stop = graph.index_of(layer)
    x = graph.preprocess(image)
    tape = []
    for spec in graph.layers[:stop + 1]:
        if spec.kind == "conv":
            w, b = archive.conv_params(spec.name)
            entry = {"kind": "conv", "weights": w, "stride": spec.stride,
                     "pad": spec.pad, "input_dims": x.shape}
            x = T.conv2d_forward(x, w, b, spec.stride, spec.pad)
        elif spec.kind == "relu":
            entry = {"kind": "relu", "input": x}
            x = T.relu_forward(x)
        else:
            entry = {"kind": "maxpool", "input_dims": x.shape}
            x, argmax = T.maxpool_forward(x, spec.pool, spec.stride)
            entry["argmax"] = argmax
        tape.append(entry)
    return x, tape


def backprop(tape, cotangent, relu_mode="identity"):
    """Pull a cotangent at the tape's end back to the preprocessed image."""
    g = np.asarray(cotangent, dtype=np.float64)
    for entry in reversed(tape):
        if entry["kind"] == "conv":
            g = T.conv2d_vjp_input(g, entry["weights"], entry["stride"],
                                   entry["pad"], entry["input_dims"])
        elif entry["kind"] == "relu":
            g = T.relu_vjp(g, entry["input"], relu_mode)
        else:
            g = T.maxpool_vjp(g, entry["argmax"], entry["input_dims"])
    return g


def saliency(graph, archive, image, layer, relu_mode="identity"):
    """Feature-gradient saliency of ``image`` at ``layer``.

    Forward to the named feature map, seed the backward pass with the feature
    map itself, backpropagate to the image, take the absolute value and
    average across input channels.  ``relu_mode='identity'`` passes the whole
    signal through non-linearities (the default for detection);
    ``relu_mode='mask'`` applies the true derivative and is what gradient
    checks verify.
    """
    feature, tape = forward_to(graph, archive, image, layer)
    g = backprop(tape, feature, relu_mode)
    g = g * graph.scale  # chain rule through the ingest scaling
    values = np.abs(g).mean(axis=0)
    return SaliencyMap(values=values, source_layer=layer)
