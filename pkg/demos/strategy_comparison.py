"""
Comparing scheduling strategies end to end
==========================================

Runs every strategy on the tight-budget regime in ordering.cfg and prints
the final accuracy of the best exit.  Takes well under a minute per seed.
"""
from pathlib import Path

import numpy as np

from mefeel import load_config
from mefeel.config import STRATEGY_NAMES
from mefeel.simulation import best_exit_accuracy, build_environment, run_simulation

cfg = load_config(Path(__file__).with_name("ordering.cfg"))
env = build_environment(cfg)  # data, partition and device speeds are shared

for strategy in STRATEGY_NAMES:
    log = run_simulation(cfg.with_overrides(strategy=strategy), env)
    scheduled = np.mean([r.scheduled for r in log.rounds])
    exits = np.mean([r.total_exits for r in log.rounds])
    print(f"{strategy:>13}: best-exit acc {best_exit_accuracy(log, strategy):.3f}, "
          f"{scheduled:.1f} devices and {exits:.1f} exits per round")

# The per-exit curve for ME-FEEL: shallow heads learn first, deep ones catch up.
acc = run_simulation(cfg, env).accuracy_matrix()
for r in (0, 9, 49, len(acc) - 1):
    print(f"round {r + 1:>3}:", np.round(acc[r], 3))
