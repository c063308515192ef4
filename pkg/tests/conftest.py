import numpy as np

from collapselab.scorenet import loss_and_grad, params_list


def gradcheck_worst(model, data, sched, t_range, seed, h=1e-5, samples_per_param=6):
    """Worst relative error between analytic and central-difference gradients.

    Probes a spread of entries per parameter tensor; the denominator floor
    keeps near-zero gradient pairs from inflating the ratio.
    """
    _, grads = loss_and_grad(model, data, sched, t_range, seed)
    worst = 0.0
    for p, g in zip(params_list(model), grads):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        idx = np.unique(np.linspace(0, flat.size - 1, min(samples_per_param, flat.size)).astype(int))
        for k in idx:
            orig = flat[k]
            flat[k] = orig + h
            lp = loss_and_grad(model, data, sched, t_range, seed)[0]
            flat[k] = orig - h
            lm = loss_and_grad(model, data, sched, t_range, seed)[0]
            flat[k] = orig
            fd = (lp - lm) / (2.0 * h)
            denom = max(abs(fd), abs(gflat[k]), 1e-6)
            worst = max(worst, abs(fd - gflat[k]) / denom)
    return worst


def identity_relu_mlp(dim, scale=1.0):
    """Exact MLP computing scale * x from input [x, t] via relu(x) - relu(-x)."""
    from collapselab.scorenet import MlpParams

    w1 = np.zeros((dim + 1, 2 * dim))
    w1[:dim, :dim] = np.eye(dim)
    w1[:dim, dim:] = -np.eye(dim)
    w2 = np.zeros((2 * dim, dim))
    w2[:dim] = scale * np.eye(dim)
    w2[dim:] = -scale * np.eye(dim)
    return MlpParams(weights=[w1, w2], biases=[np.zeros(2 * dim), np.zeros(dim)],
                     activation="relu")
