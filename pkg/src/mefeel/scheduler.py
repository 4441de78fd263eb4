"""Per-round exit selection and bandwidth allocation.

Every solver takes the sampled devices' profiles and channel gains (aligned
lists) and returns a :class:`RoundPlan`.  ``device_ids`` defaults to
``0..n-1`` and drives all tie-breaking (lowest id wins).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError
from .radio import CostModel, DeviceProfile, latency, required_bandwidth, t_local

# relative slack allowed on the deadline when re-checking a plan; the
# minimum bandwidth meets it with equality up to rounding
DEADLINE_RTOL = 1e-9
BRUTEFORCE_LIMIT = 10**7


@dataclass(frozen=True)
class PlanEntry:
    device_id: int
    exit: int
    bandwidth: float


@dataclass
class RoundPlan:
    entries: list[PlanEntry] = field(default_factory=list)
    excluded: list[int] = field(default_factory=list)

    @property
    def total_exits(self) -> int:
        return sum(e.exit for e in self.entries)

    @property
    def scheduled_count(self) -> int:
        return len(self.entries)

    @property
    def bandwidth_used(self) -> float:
        return math.fsum(e.bandwidth for e in self.entries)

    def exits(self) -> dict[int, int]:
        return {e.device_id: e.exit for e in self.entries}


@dataclass(frozen=True)
class PlanScore:
    total_exits: int
    scheduled_count: int


def score(plan: RoundPlan) -> PlanScore:
    return PlanScore(plan.total_exits, plan.scheduled_count)


def _ids(profiles, device_ids):
    return list(range(len(profiles))) if device_ids is None else list(device_ids)


def check_plan(plan, profiles, gains, cost, bandwidth_budget, gamma_th, device_ids=None) -> list[str]:
    """Constraint violations of ``plan``; an empty list means it is valid."""
    ids = _ids(profiles, device_ids)
    pos = {d: i for i, d in enumerate(ids)}
    problems = []
    seen = [e.device_id for e in plan.entries] + list(plan.excluded)
    if sorted(seen) != sorted(ids):
        problems.append("scheduled and excluded devices do not partition the subset")
    for e in plan.entries:
        if e.device_id not in pos:
            continue
        i = pos[e.device_id]
        if not 1 <= e.exit <= cost.num_exits or not e.bandwidth > 0:
            problems.append(f"device {e.device_id}: invalid exit/bandwidth {e}")
            continue
        t = latency(profiles[i], cost, gains[i], e.exit, e.bandwidth)
        if not t <= gamma_th * (1 + DEADLINE_RTOL):
            problems.append(f"device {e.device_id}: latency {t!r} exceeds {gamma_th!r}")
    if plan.bandwidth_used > bandwidth_budget:
        problems.append(f"bandwidth {plan.bandwidth_used!r} exceeds budget {bandwidth_budget!r}")
    return problems


def greedy_plan(profiles: list[DeviceProfile], gains, cost: CostModel, bandwidth_budget: float,
                gamma_th: float, num_exits: int | None = None, device_ids=None) -> RoundPlan:
    """Deepest feasible exit per device, then shed exits until the budget fits.

    Phase 2 repeatedly lowers the exit of the device with the smallest
    exits-per-hertz ratio and re-prices it at its new minimum bandwidth.
    """
    M = cost.num_exits if num_exits is None else num_exits
    ids = _ids(profiles, device_ids)
    exits, bw, excluded = {}, {}, []

    def need(i, m):
        return required_bandwidth(profiles[i], cost, gains[i], m, gamma_th)

    for i, d in enumerate(ids):
        m = M
        while m > 0 and math.isinf(need(i, m)):
            m -= 1
        if m > 0:
            exits[i], bw[i] = m, need(i, m)
        else:
            excluded.append(d)

    while exits and math.fsum(bw.values()) > bandwidth_budget:
        i = min(exits, key=lambda j: (exits[j] / bw[j], ids[j]))
        exits[i] -= 1
        b = need(i, exits[i]) if exits[i] > 0 else math.inf
        if math.isinf(b):
            del exits[i], bw[i]
            excluded.append(ids[i])
        else:
            bw[i] = b

    entries = [PlanEntry(ids[i], exits[i], bw[i]) for i in sorted(exits, key=lambda j: ids[j])]
    return RoundPlan(entries, sorted(excluded))


def bruteforce_plan(profiles, gains, cost: CostModel, bandwidth_budget: float, gamma_th: float,
                    num_exits: int | None = None, device_ids=None) -> RoundPlan:
    """Exact optimum by enumerating every exit vector (0 meaning excluded).

    Ties go to more scheduled devices, then the lexicographically smallest
    exit vector in device order.
    """
    M = cost.num_exits if num_exits is None else num_exits
    ids = _ids(profiles, device_ids)
    n = len(ids)
    if (M + 1) ** n > BRUTEFORCE_LIMIT:
        raise CapacityError(f"{(M + 1) ** n} assignments exceed the enumeration limit")
    order = sorted(range(n), key=lambda i: ids[i])
    need = [[0.0] + [required_bandwidth(profiles[i], cost, gains[i], m, gamma_th)
                     for m in range(1, M + 1)] for i in order]
    best, best_key = None, None
    for vec in itertools.product(range(M + 1), repeat=n):
        demands = [need[j][m] for j, m in enumerate(vec) if m]
        if any(math.isinf(b) for b in demands) or math.fsum(demands) > bandwidth_budget:
            continue
        key = (sum(vec), sum(1 for m in vec if m), tuple(-m for m in vec))
        if best_key is None or key > best_key:
            best, best_key = vec, key
    entries, excluded = [], []
    for j, m in enumerate(best if best is not None else (0,) * n):
        d = ids[order[j]]
        if m:
            entries.append(PlanEntry(d, m, need[j][m]))
        else:
            excluded.append(d)
    return RoundPlan(entries, excluded)


def evensplit_plan(profiles, gains, cost: CostModel, bandwidth_budget: float, gamma_th: float,
                   num_exits: int | None = None, device_ids=None) -> RoundPlan:
    """Equal bandwidth share per sampled device, full-depth model only."""
    M = cost.num_exits if num_exits is None else num_exits
    ids = _ids(profiles, device_ids)
    if not ids:
        return RoundPlan()
    share = bandwidth_budget / len(ids)
    entries, excluded = [], []
    for i in sorted(range(len(ids)), key=lambda j: ids[j]):
        if latency(profiles[i], cost, gains[i], M, share) <= gamma_th:
            entries.append(PlanEntry(ids[i], M, share))
        else:
            excluded.append(ids[i])
    return RoundPlan(entries, excluded)


def leastdemand_plan(profiles, gains, cost: CostModel, bandwidth_budget: float, gamma_th: float,
                     num_exits: int | None = None, device_ids=None) -> RoundPlan:
    """Admit full-depth devices cheapest-first until the next one would overflow."""
    M = cost.num_exits if num_exits is None else num_exits
    ids = _ids(profiles, device_ids)
    demand = [required_bandwidth(p, cost, g, M, gamma_th) for p, g in zip(profiles, gains)]
    order = sorted(range(len(ids)), key=lambda i: (demand[i], ids[i]))
    admitted = []
    for i in order:
        if math.isinf(demand[i]):
            break
        if math.fsum([demand[j] for j in admitted] + [demand[i]]) > bandwidth_budget:
            break
        admitted.append(i)
    rest = order[len(admitted):]
    entries = [PlanEntry(ids[i], M, demand[i]) for i in sorted(admitted, key=lambda j: ids[j])]
    return RoundPlan(entries, sorted(ids[i] for i in rest))


def unconstrained_plan(profiles, gains, cost: CostModel, bandwidth_budget: float = math.inf,
                       gamma_th: float = math.inf, num_exits: int | None = None,
                       device_ids=None) -> RoundPlan:
    """Everyone at full depth with no resource accounting (bandwidth recorded as 0)."""
    M = cost.num_exits if num_exits is None else num_exits
    ids = sorted(_ids(profiles, device_ids))
    return RoundPlan([PlanEntry(d, M, 0.0) for d in ids], [])


SOLVERS = {
    "greedy": greedy_plan,
    "bruteforce": bruteforce_plan,
    "evensplit": evensplit_plan,
    "leastdemand": leastdemand_plan,
    "unconstrained": unconstrained_plan,
}


@dataclass
class Instance:
    profiles: list[DeviceProfile]
    gains: list[float]
    cost: CostModel
    bandwidth_budget: float
    gamma_th: float

    def solve(self, solver):
        return solver(self.profiles, self.gains, self.cost, self.bandwidth_budget, self.gamma_th)

    def check(self, plan) -> list[str]:
        return check_plan(plan, self.profiles, self.gains, self.cost, self.bandwidth_budget,
                          self.gamma_th)


def random_instance(rng, max_devices: int = 4, max_exits: int = 3) -> Instance:
    """Small random problem whose budget usually forces exits to be shed.

    ``rng`` is a ``numpy.random.Generator``.
    """
    n = int(rng.integers(1, max_devices + 1))
    M = int(rng.integers(1, max_exits + 1))
    g1 = tuple(float(v) for v in np.cumsum(rng.uniform(0.1, 1.0, size=M)))
    g2 = tuple(float(v) for v in np.cumsum(rng.uniform(1e5, 1e6, size=M)))
    cost = CostModel(g1, g2)
    profiles = [DeviceProfile(float(np.exp(rng.uniform(np.log(1e-3), np.log(5e-2)))),
                              int(rng.integers(100, 1000)), 10, 1.0, 1e-3) for _ in range(n)]
    gains = [float(g) for g in rng.exponential(1.0, size=n)]
    full = [t_local(p, cost, M) for p in profiles]
    gamma_th = float(rng.uniform(0.3, 1.5) * max(full))
    phase1 = greedy_plan(profiles, gains, cost, math.inf, gamma_th)
    demand = phase1.bandwidth_used or float(g2[-1])
    budget = float(rng.uniform(0.2, 1.2) * demand)
    return Instance(profiles, gains, cost, budget, gamma_th)


def compare_with_oracle(num_instances: int, seed: int, max_devices: int = 4,
                        max_exits: int = 3) -> dict:
    """Run greedy and the exact oracle on random instances and tally the outcome."""
    rng = np.random.default_rng(seed)
    report = {"instances": num_instances, "optimal": 0, "violations": [], "gap_total": 0}
    for idx in range(num_instances):
        inst = random_instance(rng, max_devices, max_exits)
        greedy = inst.solve(greedy_plan)
        oracle = inst.solve(bruteforce_plan)
        for name, plan in (("greedy", greedy), ("oracle", oracle)):
            report["violations"] += [f"instance {idx} {name}: {p}" for p in inst.check(plan)]
        if greedy.total_exits > oracle.total_exits:
            report["violations"].append(
                f"instance {idx}: greedy {greedy.total_exits} beats oracle {oracle.total_exits}")
        report["optimal"] += greedy.total_exits == oracle.total_exits
        report["gap_total"] += oracle.total_exits - greedy.total_exits
    return report
