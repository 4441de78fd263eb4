"""Round primitives: subset sampling, local training, model averaging."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigurationError, SchedulingError
from .nncore import MultiExitModel, OptimizerConfig, OptimizerState, loss_and_grad, optimizer_step


@dataclass
class LocalUpdate:
    device_id: int
    weights: MultiExitModel  # truncated at exits_trained
    num_samples: int
    exits_trained: int

    @property
    def depth(self) -> int:
        """Number of trunk layers carried by the update."""
        return self.weights.arch.depth


def sample_subset(num_devices: int, subset_size: int, seed: int, round_index: int) -> list[int]:
    """Uniform draw without replacement, returned in ascending id order."""
    if not 1 <= subset_size <= num_devices:
        raise ConfigurationError(f"cannot sample {subset_size} of {num_devices} devices")
    rng = np.random.default_rng([seed, round_index, 0x5B5E])
    return sorted(int(d) for d in rng.choice(num_devices, size=subset_size, replace=False))


def local_update(global_model: MultiExitModel, dataset: Dataset, exits: int, steps: int,
                 batch_size: int, tau: float, optimizer: OptimizerConfig, seed,
                 device_id: int = 0, objective: str = "joint") -> LocalUpdate:
    """Train the truncated global model for ``steps`` minibatch steps.

    Minibatches are drawn without replacement inside a batch from the stream
    ``default_rng(seed)``; ``seed`` may be an int or a sequence of ints.
    Optimizer state starts fresh on every call.
    """
    if len(dataset) == 0:
        raise SchedulingError(f"device {device_id} has no training data")
    model = global_model.truncate(exits)
    rng = np.random.default_rng(seed)
    state = OptimizerState()
    bs = min(batch_size, len(dataset))
    for _ in range(steps):
        idx = rng.choice(len(dataset), size=bs, replace=False)
        _, grads = loss_and_grad(model, dataset.features[idx], dataset.labels[idx],
                                 exits, tau, objective)
        model.params, state = optimizer_step(model.params, grads, state, optimizer)
    return LocalUpdate(device_id, model, len(dataset), exits)


def _weighted_sum(arrays, probs, dtype):
    acc = np.zeros(arrays[0].shape, dtype=np.float64)
    for a, p in zip(arrays, probs):
        acc += p * a.astype(np.float64)
    return acc.astype(dtype)


def _weights(updates, weighting):
    if weighting == "uniform":
        return [1.0] * len(updates)
    if weighting == "by-samples":
        return [float(u.num_samples) for u in updates]
    raise ValueError(f"unknown weighting {weighting!r}")


def _average(updates, weighting, name, dtype):
    w = _weights(updates, weighting)
    total = sum(w)
    return _weighted_sum([u.weights.params[name] for u in updates], [x / total for x in w], dtype)


def fedavg(updates: list[LocalUpdate], weighting: str = "uniform") -> MultiExitModel:
    """Parameter-wise mean of full-depth updates (uniform or sample-weighted)."""
    if not updates:
        raise ValueError("fedavg needs at least one update")
    updates = sorted(updates, key=lambda u: u.device_id)
    arch = updates[0].weights.arch
    if any(u.weights.arch != arch for u in updates):
        raise ValueError("fedavg requires identical full-depth models; use me_fedavg")
    dtype = updates[0].weights.dtype
    return MultiExitModel(arch, {k: _average(updates, weighting, k, dtype) for k in arch.layer_shapes()})


def layer_key(param_name: str) -> str:
    """``trunk.3.weight`` -> ``trunk.3``."""
    return param_name.rsplit(".", 1)[0]


def aggregation_sets(updates: list[LocalUpdate], reference: MultiExitModel) -> dict[str, list[int]]:
    """Device ids holding each layer of ``reference``.

    Trunk layer l is held by devices of depth >= l, head m by devices that
    trained at least m exits.
    """
    sets = {}
    for name in reference.params:
        key = layer_key(name)
        if key in sets:
            continue
        kind, idx = key.split(".")
        idx = int(idx)
        if kind == "trunk":
            holders = [u.device_id for u in updates if u.depth >= idx]
        else:
            holders = [u.device_id for u in updates if u.exits_trained >= idx]
        sets[key] = sorted(holders)
    return sets


def me_fedavg(updates: list[LocalUpdate], reference: MultiExitModel,
              weighting: str = "by-samples") -> MultiExitModel:
    """Layer-wise average of updates of unequal depth.

    Each layer averages over the devices that carry it; a layer no device
    carries keeps its value from ``reference`` (the previous global model).
    """
    if not updates:
        raise ValueError("me_fedavg needs at least one update")
    updates = sorted(updates, key=lambda u: u.device_id)
    by_id = {u.device_id: u for u in updates}
    sets = aggregation_sets(updates, reference)
    params = {}
    for name, old in reference.params.items():
        holders = [by_id[d] for d in sets[layer_key(name)]]
        params[name] = _average(holders, weighting, name, old.dtype) if holders else old.copy()
    return MultiExitModel(reference.arch, params)
