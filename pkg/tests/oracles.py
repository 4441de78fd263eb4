"""Independent reference computations used as test oracles.

Nothing here imports the package's forward/loss code; losses are evaluated
sample by sample in float64 with plain math.
"""
import math

import numpy as np


def reference_logits(params, arch, x, exits):
    """Per-sample, per-exit logits as nested Python lists."""
    out = []
    for row in np.asarray(x, dtype=np.float64):
        acts = [list(row)]
        for l in range(1, arch.attach_points[exits - 1] + 1):
            W = params[f"trunk.{l}.weight"].astype(np.float64)
            b = params[f"trunk.{l}.bias"].astype(np.float64)
            prev = acts[-1]
            acts.append([max(0.0, sum(prev[i] * W[i, j] for i in range(len(prev))) + b[j])
                         for j in range(W.shape[1])])
        sample = []
        for m in range(1, exits + 1):
            h = acts[arch.attach_points[m - 1]]
            W = params[f"head.{m}.weight"].astype(np.float64)
            b = params[f"head.{m}.bias"].astype(np.float64)
            sample.append([sum(h[i] * W[i, j] for i in range(len(h))) + b[j]
                           for j in range(W.shape[1])])
        out.append(sample)
    return out


def softmax_list(v, tau=1.0):
    top = max(v)
    e = [math.exp((a - top) / tau) for a in v]
    s = sum(e)
    return [a / s for a in e]


def reference_loss(params, arch, x, y, exits, tau, objective="joint"):
    total = 0.0
    logits = reference_logits(params, arch, x, exits)
    for sample, label in zip(logits, y):
        if objective == "final-exit":
            total += -math.log(softmax_list(sample[-1])[label])
            continue
        pred = sum(-math.log(softmax_list(p)[label]) for p in sample) / exits
        kd = 0.0
        if objective == "joint":
            teacher = [sum(p[c] for p in sample) / exits for c in range(len(sample[0]))]
            z = softmax_list(teacher, tau)
            for p in sample:
                v = softmax_list(p, tau)
                kd += -tau * tau * sum(zi * math.log(vi) for zi, vi in zip(z, v))
            kd /= exits
        total += pred + kd
    return total / len(y)


def finite_difference_grad(params, arch, x, y, exits, tau, objective="joint", step=1e-6):
    """Central differences of :func:`reference_loss`, teacher held fixed.

    The teacher is a stop-gradient constant, so its logits are frozen at the
    unperturbed parameters while the student exits move.
    """
    base = {k: v.astype(np.float64) for k, v in params.items()}
    frozen_teacher = None
    if objective == "joint":
        frozen_teacher = [[sum(p[c] for p in s) / exits for c in range(len(s[0]))]
                          for s in reference_logits(base, arch, x, exits)]

    def loss(p):
        if frozen_teacher is None:
            return reference_loss(p, arch, x, y, exits, tau, objective)
        total = 0.0
        for sample, label, teacher in zip(reference_logits(p, arch, x, exits), y, frozen_teacher):
            pred = sum(-math.log(softmax_list(q)[label]) for q in sample) / exits
            z = softmax_list(teacher, tau)
            kd = sum(-tau * tau * sum(zi * math.log(vi) for zi, vi in zip(z, softmax_list(q, tau)))
                     for q in sample) / exits
            total += pred + kd
        return total / len(y)

    grads = {}
    for name, arr in base.items():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + step
            up = loss(base)
            arr[idx] = old - step
            down = loss(base)
            arr[idx] = old
            g[idx] = (up - down) / (2 * step)
        grads[name] = g
    return grads


def grad_mismatch(analytic, numeric, rtol=1e-3, atol=1e-5):
    """Entries where |a - n| > max(atol, rtol * max(|a|, |n|))."""
    bad = []
    for k, n in numeric.items():
        a = analytic.get(k, np.zeros_like(n))
        err = np.abs(a - n)
        tol = np.maximum(atol, rtol * np.maximum(np.abs(a), np.abs(n)))
        if np.any(err > tol):
            bad.append((k, float(err.max())))
    return bad


def brute_force_label_counts(labels, partition):
    return [len(set(int(labels[i]) for i in ix)) for ix in partition.device_indices]
