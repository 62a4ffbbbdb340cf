"""Independent oracles shared by the unit and acceptance suites."""
import math

import numpy as np

from pfsurrogate.mlp import forward, gradients, init_model, loss_mse
from pfsurrogate.netmodel import BusKind, build_ybus, net_injections

STEP = 1e-6


def balance_residual(net, vm, va):
    """Nodal balance evaluated term by term, independent of the solver code."""
    y = build_ybus(net)
    p, q = net_injections(net)
    n = net.n_bus
    worst = 0.0
    for i in range(n):
        kind = net.buses[i].kind
        if kind == BusKind.SLACK:
            continue
        sp = sq = 0.0
        for k in range(n):
            t = va[i] - va[k]
            sp += vm[i] * vm[k] * (y.g[i, k] * math.cos(t) + y.b[i, k] * math.sin(t))
            sq += vm[i] * vm[k] * (y.g[i, k] * math.sin(t) - y.b[i, k] * math.cos(t))
        worst = max(worst, abs(p[i] - sp))
        if kind == BusKind.PQ:
            worst = max(worst, abs(q[i] - sq))
    return worst


def dc_nodal_residual(net, sol):
    """Largest per-unit gap between branch flows summed at each bus and the injections."""
    p, _ = net_injections(net)
    p = p.copy()
    p[net.slack] = sol.p_inj[net.slack]
    out = np.zeros(net.n_bus)
    for k, br in enumerate(net.branches):
        out[net.index_of(br.from_bus)] += sol.branch_p[k] / net.base_mva
        out[net.index_of(br.to_bus)] -= sol.branch_p[k] / net.base_mva
    return np.abs(out - p).max()


def numeric_gradients(model, x, y, step=STEP):
    def loss():
        return loss_mse(y, forward(model, x))

    out = []
    for params in (model.weights, model.biases):
        grads = []
        for p in params:
            g = np.zeros_like(p)
            for i in np.ndindex(p.shape):
                old = p[i]
                p[i] = old + step
                up = loss()
                p[i] = old - step
                down = loss()
                p[i] = old
                g[i] = (up - down) / (2 * step)
            grads.append(g)
        out.append(grads)
    return out


def relative_error(model, x, y):
    """||analytic - numeric|| / (||analytic|| + ||numeric||) over all parameters."""
    gw, gb = gradients(model, x, y)
    nw, nb = numeric_gradients(model, x, y)
    a = np.concatenate([g.ravel() for g in gw + gb])
    n = np.concatenate([g.ravel() for g in nw + nb])
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-300))


def random_configs(count=20, seed=2024, max_dim=8):
    rng = np.random.default_rng(seed)
    for t in range(count):
        n_hidden = int(rng.integers(0, 4))
        dims = [int(v) for v in rng.integers(1, max_dim + 1, size=n_hidden + 2)]
        model = init_model(dims, float(rng.uniform(0.01, 0.3)), seed=t)
        for b in model.biases:
            b[:] = rng.normal(scale=0.1, size=b.shape)
        rows = int(rng.integers(1, max_dim + 1))
        yield model, rng.normal(size=(rows, dims[0])), rng.normal(size=(rows, dims[-1]))
