"""Minimal convolutional network engine.

Fixed layer menu: N_b blocks of (5x5 same-padded conv + ReLU + 2x2 max
pool), then flatten and a single dense softmax output layer. Provides
forward, backward (analytic gradients of the cross-entropy loss), Adam
updates, parameter counting, and a binary weights file format.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _convkernels as _ck
from .errors import FormatError, IoError, ShapeMismatch, UnsupportedConfig

KERNEL_SIZE = 5
INPUT_SIZE = 200
INPUT_CHANNELS = 3
N_CLASSES = 9

_MAGIC = b"IDRN"
_VERSION = 1


# ---------------------------------------------------------------------------
# Parameters


@dataclass
class ModelParams:
    """Learned tensors of the classifier network."""

    n_b: int
    n_f: int
    tensors: dict[str, np.ndarray]

    def tensor_names(self) -> list[str]:
        names = []
        for i in range(self.n_b):
            names += [f"conv{i}_w", f"conv{i}_b"]
        names += ["dense_w", "dense_b"]
        return names

    @property
    def dtype(self):
        return self.tensors["dense_w"].dtype


def param_count(
    n_b: int,
    n_f: int,
    in_size: int = INPUT_SIZE,
    in_ch: int = INPUT_CHANNELS,
    n_classes: int = N_CLASSES,
    kernel: int = KERNEL_SIZE,
) -> int:
    """Closed-form number of learned scalars for a configuration."""
    total = 0
    c = in_ch
    size = in_size
    for _ in range(n_b):
        total += kernel * kernel * c * n_f + n_f
        c = n_f
        if size % 2 != 0:
            raise UnsupportedConfig(f"feature map size {size} not divisible by 2")
        size //= 2
    total += size * size * n_f * n_classes + n_classes
    return total


def format_param_count(n: int) -> str:
    """Two-significant-digit rendering: '0.18M', '1.4M', '49k'."""
    if n >= 100_000:
        v = n / 1e6
        return f"{v:.1f}M" if v >= 1 else f"{v:.2f}M"
    return f"{round(n / 1e3):.0f}k"


def init_params(
    n_b: int,
    n_f: int,
    seed: int = 0,
    in_size: int = INPUT_SIZE,
    in_ch: int = INPUT_CHANNELS,
    n_classes: int = N_CLASSES,
    dtype=np.float32,
) -> ModelParams:
    """He-uniform weights, zero biases, seeded."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    c = in_ch
    size = in_size
    for i in range(n_b):
        fan_in = KERNEL_SIZE * KERNEL_SIZE * c
        limit = np.sqrt(6.0 / fan_in)
        tensors[f"conv{i}_w"] = rng.uniform(
            -limit, limit, size=(KERNEL_SIZE, KERNEL_SIZE, c, n_f)
        ).astype(dtype)
        tensors[f"conv{i}_b"] = np.zeros(n_f, dtype=dtype)
        c = n_f
        if size % 2 != 0:
            raise UnsupportedConfig(f"feature map size {size} not divisible by 2")
        size //= 2
    flat = size * size * n_f
    limit = np.sqrt(6.0 / flat)
    tensors["dense_w"] = rng.uniform(-limit, limit, size=(flat, n_classes)).astype(dtype)
    tensors["dense_b"] = np.zeros(n_classes, dtype=dtype)
    return ModelParams(n_b=n_b, n_f=n_f, tensors=tensors)


# ---------------------------------------------------------------------------
# Layer operations


def conv2d_forward(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-padded cross-correlation plus bias (no activation).

    Accepts (H, W, C) or (B, H, W, C) input; kernels are (k, k, C, F).
    """
    single = x.ndim == 3
    xb = np.ascontiguousarray(x[None] if single else x)
    K = np.ascontiguousarray(kernels, dtype=xb.dtype)
    b = np.ascontiguousarray(bias, dtype=xb.dtype)
    if K.ndim != 4 or K.shape[0] != K.shape[1]:
        raise ShapeMismatch(f"bad kernel shape {K.shape}")
    if xb.ndim != 4 or xb.shape[3] != K.shape[2] or b.shape != (K.shape[3],):
        raise ShapeMismatch(
            f"input {xb.shape} incompatible with kernels {K.shape} bias {b.shape}"
        )
    p = K.shape[0] // 2
    xp = np.pad(xb, ((0, 0), (p, p), (p, p), (0, 0)))
    out = np.empty(xb.shape[:3] + (K.shape[3],), dtype=xb.dtype)
    _ck.conv_fwd(xp, K, b, out)
    return out[0] if single else out


def _conv_backward(xp, K, dout):
    dK = np.empty_like(K)
    _ck.conv_bwd_kernel(xp, np.ascontiguousarray(dout), dK)
    db = dout.sum(axis=(0, 1, 2))
    dxp = np.zeros_like(xp)
    _ck.conv_bwd_input(np.ascontiguousarray(dout), K, dxp)
    return dK, db, dxp


def maxpool2x2(x: np.ndarray) -> np.ndarray:
    """2x2, stride-2 max pooling; odd trailing row/column dropped."""
    single = x.ndim == 3
    out, _ = _maxpool_fwd(x[None] if single else x)
    return out[0] if single else out


def _maxpool_fwd(x: np.ndarray):
    if x.ndim != 4:
        raise ShapeMismatch(f"expected (B, H, W, F), got {x.shape}")
    B, H, W, F = x.shape
    if H < 2 or W < 2:
        raise ShapeMismatch(f"spatial dims {H}x{W} too small to pool")
    hc, wc = H // 2, W // 2
    win = x[:, : 2 * hc, : 2 * wc, :].reshape(B, hc, 2, wc, 2, F)
    win = win.transpose(0, 1, 3, 5, 2, 4).reshape(B, hc, wc, F, 4)
    idx = win.argmax(axis=4)  # first occurrence on ties, (dy, dx) row-major
    out = np.take_along_axis(win, idx[..., None], axis=4)[..., 0]
    return out, idx


def _maxpool_bwd(dout: np.ndarray, idx: np.ndarray, in_shape) -> np.ndarray:
    B, H, W, F = in_shape
    hc, wc = H // 2, W // 2
    scattered = np.zeros((B, hc, wc, F, 4), dtype=dout.dtype)
    np.put_along_axis(scattered, idx[..., None], dout[..., None], axis=4)
    win = scattered.reshape(B, hc, wc, F, 2, 2).transpose(0, 1, 4, 2, 5, 3)
    dx = np.zeros(in_shape, dtype=dout.dtype)
    dx[:, : 2 * hc, : 2 * wc, :] = win.reshape(B, 2 * hc, 2 * wc, F)
    return dx


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(p: np.ndarray, y: np.ndarray) -> float:
    """Cross-entropy of one probability vector against a one-hot target."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeMismatch(f"probabilities {p.shape} vs target {y.shape}")
    return float(np.sum(-y * np.log(np.maximum(p, 1e-12))))


def one_hot(labels, n_classes: int = N_CLASSES) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros(labels.shape + (n_classes,), dtype=np.float64)
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


# ---------------------------------------------------------------------------
# Full model


def model_forward(params: ModelParams, x: np.ndarray):
    """Probabilities plus the cached activations needed for backward.

    Input is (H, W, C) or (B, H, W, C) with values already scaled to [0, 1].
    """
    single = x.ndim == 3
    h = np.ascontiguousarray((x[None] if single else x), dtype=params.dtype)
    blocks = []
    p = KERNEL_SIZE // 2
    for i in range(params.n_b):
        K = params.tensors[f"conv{i}_w"]
        b = params.tensors[f"conv{i}_b"]
        if h.shape[3] != K.shape[2]:
            raise ShapeMismatch(f"block {i}: {h.shape} vs kernels {K.shape}")
        xp = np.pad(h, ((0, 0), (p, p), (p, p), (0, 0)))
        z = np.empty(h.shape[:3] + (K.shape[3],), dtype=h.dtype)
        _ck.conv_fwd(xp, K, b, z)
        a = np.maximum(z, 0)
        out, idx = _maxpool_fwd(a)
        blocks.append({"xp": xp, "act": a, "pool_idx": idx})
        h = out
    flat = h.reshape(h.shape[0], -1)
    dw = params.tensors["dense_w"]
    if flat.shape[1] != dw.shape[0]:
        raise ShapeMismatch(f"flatten {flat.shape} vs dense {dw.shape}")
    logits = flat @ dw + params.tensors["dense_b"]
    probs = softmax(logits)
    cache = {"blocks": blocks, "flat": flat, "probs": probs,
             "pool_out_shape": h.shape, "single": single}
    return (probs[0] if single else probs), cache


def model_backward(params: ModelParams, cache, y: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the mean cross-entropy w.r.t. every parameter tensor."""
    probs = cache["probs"]
    yb = np.asarray(y, dtype=np.float64)
    if yb.ndim == 1:
        yb = yb[None]
    if yb.shape != probs.shape:
        raise ShapeMismatch(f"targets {yb.shape} vs probabilities {probs.shape}")
    B = probs.shape[0]
    dtype = params.dtype
    dlogits = ((probs - yb) / B).astype(dtype)
    flat = cache["flat"]
    grads: dict[str, np.ndarray] = {
        "dense_w": flat.T @ dlogits,
        "dense_b": dlogits.sum(axis=0),
    }
    dh = (dlogits @ params.tensors["dense_w"].T).reshape(cache["pool_out_shape"])
    p = KERNEL_SIZE // 2
    for i in reversed(range(params.n_b)):
        blk = cache["blocks"][i]
        da = _maxpool_bwd(dh, blk["pool_idx"], blk["act"].shape)
        dz = da * (blk["act"] > 0)
        K = params.tensors[f"conv{i}_w"]
        need_dx = i > 0
        dK = np.empty_like(K)
        _ck.conv_bwd_kernel(blk["xp"], np.ascontiguousarray(dz), dK)
        grads[f"conv{i}_w"] = dK
        grads[f"conv{i}_b"] = dz.sum(axis=(0, 1, 2))
        if need_dx:
            dxp = np.zeros_like(blk["xp"])
            _ck.conv_bwd_input(np.ascontiguousarray(dz), K, dxp)
            dh = dxp[:, p:-p, p:-p, :]
    return grads


def model_loss(params: ModelParams, x: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy of a batch; used by gradient checks."""
    probs, _ = model_forward(params, x)
    if probs.ndim == 1:
        probs = probs[None]
    yb = np.asarray(y, dtype=np.float64)
    if yb.ndim == 1:
        yb = yb[None]
    return float(
        np.mean(np.sum(-yb * np.log(np.maximum(probs, 1e-12)), axis=1))
    )


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_adam(params: ModelParams, lr: float = 0.001) -> AdamState:
    state = AdamState(lr=lr)
    for name, tensor in params.tensors.items():
        state.m[name] = np.zeros_like(tensor)
        state.v[name] = np.zeros_like(tensor)
    return state


def adam_step(params: ModelParams, grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One in-place Adam update; increments the step counter first."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, tensor in params.tensors.items():
        g = grads[name]
        if g.shape != tensor.shape:
            raise ShapeMismatch(f"{name}: grad {g.shape} vs param {tensor.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        tensor -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# Weights file


def save_weights(params: ModelParams, path) -> None:
    """Write the IDRN container: magic, version, JSON header, f32 payload."""
    names = params.tensor_names()
    header = {
        "n_b": params.n_b,
        "n_f": params.n_f,
        "tensors": [
            {"name": n, "shape": list(params.tensors[n].shape)} for n in names
        ],
    }
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(bytes([_VERSION]))
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for n in names:
                fh.write(np.ascontiguousarray(params.tensors[n], dtype="<f4").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}") from exc


def load_weights(path) -> ModelParams:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}") from exc
    if len(data) < 9 or data[:4] != _MAGIC:
        raise FormatError("bad magic")
    if data[4] != _VERSION:
        raise FormatError(f"unsupported version {data[4]}")
    (hlen,) = struct.unpack("<I", data[5:9])
    if len(data) < 9 + hlen:
        raise FormatError("truncated header")
    try:
        header = json.loads(data[9 : 9 + hlen].decode("utf-8"))
        n_b = int(header["n_b"])
        n_f = int(header["n_f"])
        entries = [(str(e["name"]), tuple(int(s) for s in e["shape"]))
                   for e in header["tensors"]]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError("malformed header") from exc
    payload = data[9 + hlen :]
    expected = sum(int(np.prod(shape)) for _, shape in entries) * 4
    if len(payload) != expected:
        raise FormatError(f"payload {len(payload)} bytes, header implies {expected}")
    tensors: dict[str, np.ndarray] = {}
    off = 0
    for name, shape in entries:
        nbytes = int(np.prod(shape)) * 4
        arr = np.frombuffer(payload[off : off + nbytes], dtype="<f4").reshape(shape)
        tensors[name] = arr.copy()
        off += nbytes
    params = ModelParams(n_b=n_b, n_f=n_f, tensors=tensors)
    if set(params.tensor_names()) != set(tensors):
        raise FormatError("tensor names inconsistent with configuration")
    return params
