"""
Training a multi-exit network with self-distillation
====================================================

One model, four classifier heads.  Every head learns from the labels and
from the averaged opinion of all heads.
"""
import numpy as np

from mefeel import ArchConfig, OptimizerConfig, build_model, forward_all_exits, synth_blobs
from mefeel.nncore import OptimizerState, joint_loss, loss_and_grad, optimizer_step

train = synth_blobs(10, 300, 20, 1.0, seed=1, clusters_per_class=3)
test = synth_blobs(10, 100, 20, 1.0, seed=2, clusters_per_class=3)

arch = ArchConfig(train.dim, (64, 64, 64, 64), (1, 2, 3, 4), 10)
print("parameters:", arch.param_count())


def accuracy(model):
    return [float(np.mean(o.argmax(1) == test.labels))
            for o in forward_all_exits(model, test.features)]


for objective in ("joint", "prediction"):
    model = build_model(arch, seed=0)
    opt, state = OptimizerConfig("adam", 1e-3), OptimizerState()
    rng = np.random.default_rng(0)
    for step in range(1500):
        idx = rng.choice(len(train), 32, replace=False)
        _, grads = loss_and_grad(model, train.features[idx], train.labels[idx], tau=3.0,
                                 objective=objective)
        model.params, state = optimizer_step(model.params, grads, state, opt)
    parts = joint_loss(model, train.features, train.labels, tau=3.0, objective=objective)
    print(f"{objective:>10}: pred={parts.pred_loss:.3f} kd={parts.kd_loss:.3f}",
          "exit accuracy", np.round(accuracy(model), 3))

# The distillation term is a soft cross-entropy scaled by tau^2, so it keeps
# the teacher's entropy and stays well above zero even when heads agree.

# A shallow prefix is a usable model on its own: truncation keeps the
# first heads and drops everything past their attach point.
small = model.truncate(2)
print("truncated to", small.num_exits, "exits,", small.arch.param_count(), "parameters")
