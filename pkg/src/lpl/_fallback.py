"""Pure numpy implementations of the hot kernels.

These mirror ``lpl._core`` function by function and are used whenever the
compiled extension is missing or ``LPL_BACKEND=python`` is set.
"""
import numpy as np

TV_DUAL_STEP = 0.125


def gmm_score(x, means, precs, lognorm):
    """Score and log-density of a Gaussian mixture at a batch of points.

    Parameters
    ----------
    x : (n, d) array
    means : (k, d) array
    precs : (k, d, d) array
        Precision matrices of the active components.
    lognorm : (k,) array
        ``log w_i - 0.5 log det(Sigma_i) - 0.5 d log(2 pi)``.

    Returns
    -------
    score : (n, d) array
        Gradient of the log-density.
    logp : (n,) array
    """
    diff = x[:, None, :] - means[None, :, :]
    pdiff = np.einsum("kij,nkj->nki", precs, diff)
    logits = lognorm[None, :] - 0.5 * np.einsum("nki,nki->nk", diff, pdiff)
    top = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - top)
    tot = ex.sum(axis=1, keepdims=True)
    resp = ex / tot
    score = -np.einsum("nk,nki->ni", resp, pdiff)
    logp = top[:, 0] + np.log(tot[:, 0])
    return score, logp


def _grad(u):
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:-1, :] = u[1:, :] - u[:-1, :]
    gy[:, :-1] = u[:, 1:] - u[:, :-1]
    return gx, gy


def _div(px, py):
    out = np.zeros_like(px)
    out[:-1, :] += px[:-1, :]
    out[1:, :] -= px[:-1, :]
    out[:, :-1] += py[:, :-1]
    out[:, 1:] -= py[:, :-1]
    return out


def tv_dual_prox(image, theta, n_iter):
    """Approximate ``argmin_u |u - image|^2 / 2 + theta * TV(u)``.

    Projected gradient on the dual (Chambolle 2004, step 1/8), isotropic TV
    with forward differences and Neumann boundary, started from zero dual.
    """
    x = np.asarray(image, dtype=np.float64)
    px = np.zeros_like(x)
    py = np.zeros_like(x)
    if theta <= 0.0:
        return x.copy()
    inv_theta = 1.0 / theta
    for _ in range(int(n_iter)):
        w = _div(px, py) - x * inv_theta
        gx, gy = _grad(w)
        px = px + TV_DUAL_STEP * gx
        py = py + TV_DUAL_STEP * gy
        nrm = np.maximum(1.0, np.sqrt(px * px + py * py))
        px = px / nrm
        py = py / nrm
    return x - theta * _div(px, py)


def transport_ssp(cost, supply, demand):
    """Min-cost transportation by successive shortest paths.

    Dijkstra runs on reduced costs ``cost[i, j] - u[i] - v[j]`` over the
    residual bipartite graph and stops at the first column with unmet demand.
    Costs and potentials are int64, so optimality certificates are exact.

    Parameters
    ----------
    cost : (na, nb) int64 array, nonnegative
    supply : (na,) float64 array, positive
    demand : (nb,) float64 array, positive, same total as ``supply``

    Returns
    -------
    flow : (na, nb) float64 array
    u, v : int64 arrays of row and column potentials
    """
    C = np.ascontiguousarray(cost, dtype=np.int64)
    na, nb = C.shape
    excess = np.array(supply, dtype=np.float64)
    deficit = np.array(demand, dtype=np.float64)
    flow = np.zeros((na, nb), dtype=np.float64)
    big = np.iinfo(np.int64).max // 4

    v = C.min(axis=0)
    u = (C - v[None, :]).min(axis=1)
    # greedy start on tight arcs
    for i in range(na):
        tight = np.flatnonzero(C[i] - u[i] - v == 0)
        for j in tight:
            if excess[i] <= 0.0:
                break
            if deficit[j] > 0.0:
                t = min(excess[i], deficit[j])
                flow[i, j] += t
                excess[i] = 0.0 if t == excess[i] else excess[i] - t
                deficit[j] = 0.0 if t == deficit[j] else deficit[j] - t

    dr = np.empty(na, dtype=np.int64)
    dc = np.empty(nb, dtype=np.int64)
    pred_c = np.empty(nb, dtype=np.int64)
    pred_r = np.empty(na, dtype=np.int64)
    while True:
        pending = np.flatnonzero(excess > 0.0)
        if pending.size == 0:
            break
        dr[:] = big
        dc[:] = big
        dr[pending[0]] = 0
        pred_r[:] = -1
        pred_c[:] = -1
        done_r = np.zeros(na, dtype=bool)
        done_c = np.zeros(nb, dtype=bool)
        sink = -1
        while True:
            rr = np.where(done_r, big, dr)
            cc = np.where(done_c, big, dc)
            ir = int(np.argmin(rr))
            jc = int(np.argmin(cc))
            if cc[jc] < rr[ir]:
                if cc[jc] >= big:
                    raise RuntimeError("transport problem is infeasible")
                done_c[jc] = True
                if deficit[jc] > 0.0:
                    sink = jc
                    break
                rows = np.flatnonzero(flow[:, jc] > 0.0)
                better = rows[dc[jc] < dr[rows]]
                better = better[~done_r[better]]
                dr[better] = dc[jc]
                pred_r[better] = jc
            else:
                if rr[ir] >= big:
                    raise RuntimeError("transport problem is infeasible")
                done_r[ir] = True
                cand = dr[ir] + (C[ir] - u[ir] - v)
                upd = (cand < dc) & ~done_c
                dc[upd] = cand[upd]
                pred_c[upd] = ir
        dist = dc[sink]
        dr_t = np.minimum(np.where(done_r, dr, dist), dist)
        dc_t = np.minimum(np.where(done_c, dc, dist), dist)
        u -= dr_t
        v += dc_t

        # walk back along the path, find bottleneck
        theta = deficit[sink]
        j = sink
        while True:
            i = pred_c[j]
            jp = pred_r[i]
            if jp < 0:
                theta = min(theta, excess[i])
                break
            theta = min(theta, flow[i, jp])
            j = jp
        j = sink
        deficit[j] = 0.0 if theta == deficit[j] else deficit[j] - theta
        while True:
            i = pred_c[j]
            flow[i, j] += theta
            jp = pred_r[i]
            if jp < 0:
                excess[i] = 0.0 if theta == excess[i] else excess[i] - theta
                break
            flow[i, jp] = 0.0 if theta == flow[i, jp] else flow[i, jp] - theta
            j = jp
    return flow, u, v
