"""
Scheduling one round by hand
============================

Ten devices, four exits, one bandwidth budget.  We look at what each
scheduler decides and why the greedy one uploads more exits.
"""
import math

import numpy as np

from mefeel import ArchConfig, CostModel, DeviceProfile, required_bandwidth
from mefeel.radio import sample_alphas, sample_channels
from mefeel.scheduler import SOLVERS, check_plan, compare_with_oracle

# Cost tables come straight from the architecture: bits to upload grow with
# every layer, training work is normalized so the full model costs 1.
arch = ArchConfig(20, (64, 64, 64, 64), (1, 2, 3, 4), 10)
cost = CostModel.from_arch(arch)
print("upload bits per exit:", [int(b) for b in cost.g2])
print("relative work per exit:", np.round(cost.g1, 3))

# Heterogeneous compute speeds and one Rayleigh-fading draw.
alphas = sample_alphas(10, 0.001, 0.1, seed=0)
profiles = [DeviceProfile(float(a), 600) for a in alphas]
gains = sample_channels(10, seed=0, round_index=0).gain
gamma_th, budget = 3.0, 7e4

# How much bandwidth does each device need to hit the deadline at each exit?
# Slow devices cannot finish the deep exits at all (inf).
for k, (p, g) in enumerate(zip(profiles, gains)):
    need = [required_bandwidth(p, cost, g, m, gamma_th) for m in range(1, 5)]
    print(f"device {k}: alpha={p.alpha:.4f} gain={g:.2f} ",
          " ".join("   inf" if math.isinf(b) else f"{b / 1e3:6.1f}k" for b in need))

for name, solver in SOLVERS.items():
    plan = solver(profiles, gains, cost, budget, gamma_th)
    problems = check_plan(plan, profiles, gains, cost, budget, gamma_th)
    print(f"{name:>13}: {plan.scheduled_count} devices, {plan.total_exits} exits, "
          f"{plan.bandwidth_used / 1e3:.1f} kHz used, exits={plan.exits()}"
          + (f"  ({len(problems)} constraint notes)" if problems else ""))

# The unconstrained plan ignores the budget on purpose, hence its notes above.
# Greedy against the exhaustive optimum on small random instances:
report = compare_with_oracle(300, seed=1)
print(f"greedy optimal on {report['optimal']}/{report['instances']} instances, "
      f"{len(report['violations'])} violations, total gap {report['gap_total']} exits")
