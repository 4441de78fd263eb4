"""End-to-end round loop and metrics IO."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import scheduler
from .config import SimConfig
from .data import Dataset, load_idx, partition_noniid, synth_blobs
from .errors import ConfigurationError
from .federation import fedavg, local_update, me_fedavg, sample_subset
from .nncore import ArchConfig, MultiExitModel, OptimizerConfig, build_model, forward_all_exits
from .radio import CostModel, DeviceProfile, latency, sample_alphas, sample_channels, t_local

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Strategy:
    solver: callable
    objective: str
    multi_exit: bool


STRATEGIES = {
    "me-feel": Strategy(scheduler.greedy_plan, "joint", True),
    "me-feel-nokd": Strategy(scheduler.greedy_plan, "prediction", True),
    "feel": Strategy(scheduler.leastdemand_plan, "final-exit", False),
    "feel-ub": Strategy(scheduler.evensplit_plan, "final-exit", False),
    "feel-ideal": Strategy(scheduler.unconstrained_plan, "final-exit", False),
}


@dataclass
class RoundRecord:
    round: int
    strategy: str
    scheduled: int
    total_exits: int
    bandwidth_used_hz: float
    accuracies: tuple[float, ...]
    round_latency_s: float


@dataclass
class MetricsLog:
    num_exits: int
    rounds: list[RoundRecord] = field(default_factory=list)

    def accuracy_matrix(self) -> np.ndarray:
        return np.array([r.accuracies for r in self.rounds])

    def header(self) -> list[str]:
        return (["round", "strategy", "scheduled", "total_exits", "bandwidth_used_hz"]
                + [f"acc_exit_{m}" for m in range(1, self.num_exits + 1)] + ["round_latency_s"])

    def rows(self) -> list[dict]:
        out = []
        for r in self.rounds:
            row = {"round": r.round, "strategy": r.strategy, "scheduled": r.scheduled,
                   "total_exits": r.total_exits, "bandwidth_used_hz": r.bandwidth_used_hz}
            row.update({f"acc_exit_{m}": a for m, a in enumerate(r.accuracies, start=1)})
            row["round_latency_s"] = r.round_latency_s
            out.append(row)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for row in self.rows():
            w.writerow([repr(v) if isinstance(v, float) else v for v in row.values()])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"num_exits": self.num_exits, "rounds": self.rows()}, indent=1) + "\n"

    @classmethod
    def _from_rows(cls, num_exits, rows):
        out = cls(num_exits)
        for row in rows:
            out.rounds.append(RoundRecord(
                int(row["round"]), row["strategy"], int(row["scheduled"]),
                int(row["total_exits"]), float(row["bandwidth_used_hz"]),
                tuple(float(row[f"acc_exit_{m}"]) for m in range(1, num_exits + 1)),
                float(row["round_latency_s"])))
        return out

    @classmethod
    def from_csv(cls, text: str) -> "MetricsLog":
        reader = csv.DictReader(io.StringIO(text))
        num_exits = sum(1 for h in reader.fieldnames if h.startswith("acc_exit_"))
        return cls._from_rows(num_exits, reader)

    @classmethod
    def from_json(cls, text: str) -> "MetricsLog":
        doc = json.loads(text)
        return cls._from_rows(doc["num_exits"], doc["rounds"])


def emit_metrics(metrics: MetricsLog, path, fmt: str = "csv") -> None:
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown metrics format {fmt!r}")
    text = metrics.to_csv() if fmt == "csv" else metrics.to_json()
    Path(path).write_text(text, encoding="utf-8")


def load_metrics(path) -> MetricsLog:
    text = Path(path).read_text(encoding="utf-8")
    return MetricsLog.from_json(text) if text.lstrip().startswith("{") else MetricsLog.from_csv(text)


def evaluate(model: MultiExitModel, test: Dataset) -> tuple[float, ...]:
    """Top-1 accuracy of every exit of the full model."""
    outputs = forward_all_exits(model, test.features)
    return tuple(float(np.count_nonzero(np.argmax(p, axis=1) == test.labels)) / len(test)
                 for p in outputs)


def best_exit_accuracy(metrics: MetricsLog, strategy: str, round_index: int = -1) -> float:
    """Best accuracy over the exits a strategy actually trains."""
    acc = metrics.rounds[round_index].accuracies
    return max(acc) if STRATEGIES[strategy].multi_exit else acc[-1]


@dataclass
class Environment:
    """Everything fixed before round 0."""
    arch: ArchConfig
    cost: CostModel
    train: Dataset
    test: Dataset
    device_data: list[Dataset]
    profiles: list[DeviceProfile]


def load_datasets(cfg: SimConfig) -> tuple[Dataset, Dataset]:
    if cfg.dataset == "idx":
        train = load_idx(cfg.train_images, cfg.train_labels, cfg.num_classes)
        test = load_idx(cfg.test_images, cfg.test_labels, cfg.num_classes)
        return train, test
    train = synth_blobs(cfg.num_classes, cfg.synth_train_per_class, cfg.synth_dim,
                        cfg.synth_spread, seed=[cfg.data_seed, 1], clusters_per_class=cfg.synth_clusters)
    test = synth_blobs(cfg.num_classes, cfg.synth_test_per_class, cfg.synth_dim,
                       cfg.synth_spread, seed=[cfg.data_seed, 2], clusters_per_class=cfg.synth_clusters)
    return train, test


def build_environment(cfg: SimConfig) -> Environment:
    train, test = load_datasets(cfg)
    if len(test) == 0:
        raise ConfigurationError("test set is empty")
    arch = ArchConfig(train.dim, cfg.widths, cfg.resolved_attach_points(), cfg.num_classes)
    cost = CostModel.from_arch(arch)
    if cfg.g1 is not None or cfg.g2 is not None:
        cost = CostModel(cfg.g1 or cost.g1, cfg.g2 or cost.g2)
    if cost.num_exits != arch.num_exits:
        raise ConfigurationError(f"cost tables need {arch.num_exits} entries")
    part = partition_noniid(train, cfg.num_shards, cfg.shards_per_device, cfg.devices,
                            seed=cfg.data_seed)
    device_data = [train.subset(ix) for ix in part.device_indices]
    alphas = sample_alphas(cfg.devices, cfg.alpha_min, cfg.alpha_max, cfg.channel_seed)
    profiles = [DeviceProfile(float(a), len(d), cfg.batch_size, cfg.tx_power, cfg.noise_var)
                for a, d in zip(alphas, device_data)]
    return Environment(arch, cost, train, test, device_data, profiles)


def _aggregate(cfg, strategy, updates, global_model):
    if not updates:
        return global_model
    if strategy.multi_exit:
        weighting = "by-samples" if cfg.aggregation == "auto" else cfg.aggregation
        return me_fedavg(updates, global_model, weighting)
    weighting = "uniform" if cfg.aggregation == "auto" else cfg.aggregation
    return fedavg(updates, weighting)


def run_simulation(cfg: SimConfig, env: Environment | None = None) -> MetricsLog:
    """Sample, plan, train, aggregate and evaluate for ``cfg.rounds`` rounds."""
    env = env or build_environment(cfg)
    strategy = STRATEGIES[cfg.strategy]
    optimizer = OptimizerConfig(cfg.optimizer, cfg.learning_rate)
    global_model = build_model(env.arch, cfg.model_seed)
    M = env.arch.num_exits
    metrics = MetricsLog(M)

    for r in range(cfg.rounds):
        subset = sample_subset(cfg.devices, cfg.subset_size, cfg.channel_seed, r)
        gains = sample_channels(cfg.devices, cfg.channel_seed, r)
        profiles = [env.profiles[k] for k in subset]
        sub_gains = [gains[k] for k in subset]
        plan = strategy.solver(profiles, sub_gains, env.cost, cfg.bandwidth_hz, cfg.gamma_th,
                               M, device_ids=subset)

        updates = [local_update(global_model, env.device_data[e.device_id], e.exit,
                                cfg.local_steps, cfg.batch_size, cfg.temperature, optimizer,
                                seed=[cfg.data_seed, r, e.device_id], device_id=e.device_id,
                                objective=strategy.objective)
                   for e in plan.entries]
        global_model = _aggregate(cfg, strategy, updates, global_model)

        if strategy.solver is scheduler.unconstrained_plan:
            times = [t_local(env.profiles[e.device_id], env.cost, e.exit) for e in plan.entries]
        else:
            times = [latency(env.profiles[e.device_id], env.cost, gains[e.device_id], e.exit,
                             e.bandwidth) for e in plan.entries]
        metrics.rounds.append(RoundRecord(
            r, cfg.strategy, plan.scheduled_count, plan.total_exits, plan.bandwidth_used,
            evaluate(global_model, env.test), max(times, default=0.0)))
        log.debug("round %d: %d scheduled, %d exits", r, plan.scheduled_count, plan.total_exits)
    return metrics
