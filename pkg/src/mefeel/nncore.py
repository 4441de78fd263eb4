"""Dense multi-exit networks with a hand-written reverse pass.

A model is a stack of fully connected ReLU layers (the trunk) plus ``M``
linear classifier heads.  Head ``m`` reads the activation of trunk layer
``attach_points[m-1]`` (1-based layer count), so the network truncated at
exit ``m`` is an exact prefix of the full one.

Parameters live in a flat, ordered ``dict`` keyed ``trunk.{l}.weight``,
``trunk.{l}.bias``, ``head.{m}.weight``, ``head.{m}.bias`` (1-based ``l``
and ``m``).  Weight matrices are stored ``(fan_in, fan_out)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeError

OBJECTIVES = ("joint", "prediction", "final-exit")


@dataclass(frozen=True)
class ArchConfig:
    input_dim: int
    widths: tuple[int, ...]
    attach_points: tuple[int, ...]
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "attach_points", tuple(int(a) for a in self.attach_points))
        if self.input_dim < 1 or self.num_classes < 1:
            raise ConfigurationError("input_dim and num_classes must be >= 1")
        if not self.widths or any(w < 1 for w in self.widths):
            raise ConfigurationError(f"layer widths must be >= 1, got {self.widths}")
        ap = self.attach_points
        if not ap:
            raise ConfigurationError("at least one exit is required")
        if any(b <= a for a, b in zip(ap, ap[1:])):
            raise ConfigurationError(f"attach points must be strictly increasing, got {ap}")
        if ap[0] < 1 or ap[-1] > len(self.widths):
            raise ConfigurationError(
                f"attach points must lie in [1, {len(self.widths)}], got {ap}")

    @property
    def num_exits(self) -> int:
        return len(self.attach_points)

    @property
    def depth(self) -> int:
        return len(self.widths)

    def truncated(self, exits: int) -> "ArchConfig":
        _check_exits(exits, self.num_exits)
        cut = self.attach_points[exits - 1]
        return ArchConfig(self.input_dim, self.widths[:cut], self.attach_points[:exits],
                          self.num_classes)

    def layer_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes = {}
        fan_in = self.input_dim
        for l, width in enumerate(self.widths, start=1):
            shapes[f"trunk.{l}.weight"] = (fan_in, width)
            shapes[f"trunk.{l}.bias"] = (width,)
            fan_in = width
        for m, a in enumerate(self.attach_points, start=1):
            shapes[f"head.{m}.weight"] = (self.widths[a - 1], self.num_classes)
            shapes[f"head.{m}.bias"] = (self.num_classes,)
        return shapes

    def param_count(self) -> int:
        return sum(math.prod(s) for s in self.layer_shapes().values())

    def forward_macs(self) -> int:
        """Multiply-accumulates of a one-sample forward pass through every exit."""
        return sum(math.prod(s) for k, s in self.layer_shapes().items() if k.endswith("weight"))


def _check_exits(exits, num_exits):
    if not 1 <= exits <= num_exits:
        raise ValueError(f"exit count must be in [1, {num_exits}], got {exits}")


@dataclass
class MultiExitModel:
    arch: ArchConfig
    params: dict[str, np.ndarray] = field(repr=False)

    @property
    def num_exits(self) -> int:
        return self.arch.num_exits

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def truncate(self, exits: int) -> "MultiExitModel":
        """Copy of the sub-network that serves exits ``1..exits``."""
        arch = self.arch.truncated(exits)
        return MultiExitModel(arch, {k: self.params[k].copy() for k in arch.layer_shapes()})

    def copy(self) -> "MultiExitModel":
        return MultiExitModel(self.arch, {k: v.copy() for k, v in self.params.items()})

    def astype(self, dtype) -> "MultiExitModel":
        return MultiExitModel(self.arch, {k: v.astype(dtype) for k, v in self.params.items()})


def build_model(arch: ArchConfig, seed: int, dtype=np.float32) -> MultiExitModel:
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in arch.layer_shapes().items():
        if name.endswith("weight"):
            limit = math.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
        else:
            params[name] = np.zeros(shape, dtype=dtype)
    return MultiExitModel(arch, params)


# --------------------------------------------------------------------------
# forward pass

def _trunk_forward(model, x, depth):
    """Return the post-activation outputs ``h[0..depth]`` and pre-activations."""
    hs, zs = [x], []
    h = x
    for l in range(1, depth + 1):
        z = h @ model.params[f"trunk.{l}.weight"] + model.params[f"trunk.{l}.bias"]
        h = np.maximum(z, 0)
        zs.append(z)
        hs.append(h)
    return hs, zs


def _check_batch(model, batch):
    batch = np.asarray(batch)
    if batch.ndim != 2 or batch.shape[1] != model.arch.input_dim:
        raise ShapeError(
            f"batch must have shape (B, {model.arch.input_dim}), got {batch.shape}")
    return batch.astype(model.dtype, copy=False)


def forward_all_exits(model: MultiExitModel, batch, exits: int | None = None) -> list[np.ndarray]:
    """Logits of exits ``1..exits``, each of shape ``(B, num_classes)``.

    Only trunk layers up to ``attach_points[exits-1]`` are evaluated.
    """
    exits = model.num_exits if exits is None else exits
    _check_exits(exits, model.num_exits)
    batch = _check_batch(model, batch)
    hs, _ = _trunk_forward(model, batch, model.arch.attach_points[exits - 1])
    return [hs[a] @ model.params[f"head.{m}.weight"] + model.params[f"head.{m}.bias"]
            for m, a in enumerate(model.arch.attach_points[:exits], start=1)]


# --------------------------------------------------------------------------
# losses

def tempered_softmax(logits, tau: float = 1.0) -> np.ndarray:
    """Softmax of ``logits / tau`` along the last axis."""
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    s = np.asarray(logits)
    if tau != 1:
        s = s / tau
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(s):
    shifted = s - s.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check_labels(labels, num_classes):
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes})")
    return labels


def cross_entropy(logits, labels) -> float:
    s = np.asarray(logits, dtype=np.float64)
    labels = _check_labels(labels, s.shape[-1])
    return float(-_log_softmax(s)[np.arange(len(labels)), labels].mean())


def prediction_loss(outputs: list[np.ndarray], labels) -> float:
    """Mean over exits of the per-exit cross-entropy, each averaged over samples."""
    return float(np.mean([cross_entropy(p, labels) for p in outputs]))


def teacher_ensemble(outputs: list[np.ndarray]) -> np.ndarray:
    """Arithmetic mean of the exits' logits; callers treat it as a constant."""
    if not outputs:
        raise ValueError("teacher ensemble needs at least one exit")
    acc = np.zeros(outputs[0].shape, dtype=np.float64)
    for p in outputs:
        acc += p
    return acc / len(outputs)


def kd_loss(outputs: list[np.ndarray], tau: float) -> float:
    """Soft cross-entropy ``-tau^2 * sum z log v`` against the ensemble teacher.

    Averaged over exits, then over samples.
    """
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    z = tempered_softmax(teacher_ensemble(outputs), tau)
    per_exit = [-(z * _log_softmax(np.asarray(p, np.float64) / tau)).sum(axis=-1).mean()
                for p in outputs]
    return float(tau * tau * np.mean(per_exit))


@dataclass(frozen=True)
class LossBreakdown:
    pred_loss: float
    kd_loss: float
    total: float


def _losses(outputs, labels, tau, objective):
    if objective == "final-exit":
        pred, kd = cross_entropy(outputs[-1], labels), 0.0
    else:
        pred = prediction_loss(outputs, labels)
        kd = kd_loss(outputs, tau) if objective == "joint" else 0.0
    return LossBreakdown(pred, kd, pred + kd)


def joint_loss(model, batch, labels, exits=None, tau=1.0, objective="joint") -> LossBreakdown:
    """Prediction plus distillation loss of one forward pass.

    ``objective="prediction"`` drops the distillation term and
    ``"final-exit"`` keeps only the cross-entropy of the deepest requested
    exit (single-exit training).
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    outputs = forward_all_exits(model, batch, exits)
    return _losses(outputs, labels, tau, objective)


def loss_and_grad(model, batch, labels, exits=None, tau=1.0, objective="joint"):
    """Loss breakdown and gradients of its total.

    Gradient entries exist only for parameters the objective reaches:
    trunk layers up to the deepest used attach point and the used heads.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    if objective == "joint" and not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    exits = model.num_exits if exits is None else exits
    _check_exits(exits, model.num_exits)
    x = _check_batch(model, batch)
    labels = _check_labels(labels, model.arch.num_classes)
    attach = model.arch.attach_points[:exits]
    hs, zs = _trunk_forward(model, x, attach[-1])
    outputs = [hs[a] @ model.params[f"head.{m}.weight"] + model.params[f"head.{m}.bias"]
               for m, a in enumerate(attach, start=1)]
    losses = _losses(outputs, labels, tau, objective)

    # d(total)/d(logits), in float64
    n = len(labels)
    onehot = np.zeros((n, model.arch.num_classes))
    onehot[np.arange(n), labels] = 1.0
    if objective == "final-exit":
        used = [exits]
        dlogits = {exits: (tempered_softmax(np.asarray(outputs[-1], np.float64)) - onehot) / n}
    else:
        used = list(range(1, exits + 1))
        scale = 1.0 / (exits * n)
        dlogits = {m: (tempered_softmax(np.asarray(outputs[m - 1], np.float64)) - onehot) * scale
                   for m in used}
        if objective == "joint":
            z = tempered_softmax(teacher_ensemble(outputs), tau)
            for m in used:
                v = tempered_softmax(np.asarray(outputs[m - 1], np.float64), tau)
                dlogits[m] += tau * (v - z) * scale

    dtype = model.dtype
    grads = {}
    dh = [None] * (attach[-1] + 1)
    for m in used:
        a = attach[m - 1]
        g = dlogits[m].astype(dtype)
        grads[f"head.{m}.weight"] = hs[a].T @ g
        grads[f"head.{m}.bias"] = g.sum(axis=0)
        contrib = g @ model.params[f"head.{m}.weight"].T
        dh[a] = contrib if dh[a] is None else dh[a] + contrib
    top = attach[used[-1] - 1]
    for l in range(top, 0, -1):
        if dh[l] is None:
            dh[l] = np.zeros_like(hs[l])
        dz = dh[l] * (zs[l - 1] > 0)
        grads[f"trunk.{l}.weight"] = hs[l - 1].T @ dz
        grads[f"trunk.{l}.bias"] = dz.sum(axis=0)
        if l > 1:
            back = dz @ model.params[f"trunk.{l}.weight"].T
            dh[l - 1] = back if dh[l - 1] is None else dh[l - 1] + back
    ordered = {k: grads[k] for k in model.params if k in grads}
    return losses, ordered


def backward(model, batch, labels, exits=None, tau=1.0, objective="joint") -> dict[str, np.ndarray]:
    return loss_and_grad(model, batch, labels, exits, tau, objective)[1]


# --------------------------------------------------------------------------
# optimizers

@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.kind!r}")
        if not self.lr > 0:
            raise ConfigurationError("learning rate must be positive")


@dataclass
class OptimizerState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def optimizer_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                   state: OptimizerState, config: OptimizerConfig):
    """Apply one update to every parameter that has a gradient.

    Returns the new parameter dict and state; the inputs are not modified.
    """
    for k, g in grads.items():
        if k not in params or params[k].shape != np.shape(g):
            raise ValueError(f"gradient {k!r} does not match the parameters")
    new = dict(params)
    if config.kind == "sgd":
        for k, g in grads.items():
            new[k] = (params[k] - config.lr * np.asarray(g, np.float64)).astype(params[k].dtype)
        return new, state

    t = state.step + 1
    m_new, v_new = dict(state.m), dict(state.v)
    c1 = 1.0 - config.beta1 ** t
    c2 = 1.0 - config.beta2 ** t
    for k, g in grads.items():
        g = np.asarray(g, np.float64)
        m = config.beta1 * state.m.get(k, 0.0) + (1 - config.beta1) * g
        v = config.beta2 * state.v.get(k, 0.0) + (1 - config.beta2) * g * g
        if np.shape(m) != g.shape or np.shape(v) != g.shape:
            raise ValueError(f"optimizer state for {k!r} has the wrong shape")
        step = config.lr * (m / c1) / (np.sqrt(v / c2) + config.eps)
        new[k] = (params[k] - step).astype(params[k].dtype)
        m_new[k], v_new[k] = m, v
    return new, OptimizerState(t, m_new, v_new)
