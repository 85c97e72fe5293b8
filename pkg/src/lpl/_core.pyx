# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``lpl._fallback`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt
from libc.stdint cimport int64_t
from libcpp.vector cimport vector

cnp.import_array()

cdef double TV_DUAL_STEP = 0.125


def gmm_score(const double[:, ::1] x, const double[:, ::1] means,
              const double[:, :, ::1] precs, const double[::1] lognorm):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], k = means.shape[0]
    cdef Py_ssize_t a, c, i, j
    score_arr = np.zeros((n, d), dtype=np.float64)
    logp_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] score = score_arr
    cdef double[::1] logp = logp_arr
    cdef double[:, ::1] pdiff = np.empty((k, d), dtype=np.float64)
    cdef double[::1] diff = np.empty(d, dtype=np.float64)
    cdef double[::1] logits = np.empty(k, dtype=np.float64)
    cdef double acc, quad, top, tot, r
    for a in range(n):
        for c in range(k):
            for i in range(d):
                diff[i] = x[a, i] - means[c, i]
            quad = 0.0
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc += precs[c, i, j] * diff[j]
                pdiff[c, i] = acc
                quad += diff[i] * acc
            logits[c] = lognorm[c] - 0.5 * quad
        top = logits[0]
        for c in range(1, k):
            if logits[c] > top:
                top = logits[c]
        tot = 0.0
        for c in range(k):
            logits[c] = exp(logits[c] - top)
            tot += logits[c]
        for c in range(k):
            r = logits[c] / tot
            for i in range(d):
                score[a, i] -= r * pdiff[c, i]
        logp[a] = top + log(tot)
    return score_arr, logp_arr


def tv_dual_prox(image, double theta, int n_iter):
    x_arr = np.ascontiguousarray(image, dtype=np.float64)
    if theta <= 0.0:
        return x_arr.copy()
    cdef const double[:, ::1] x = x_arr
    cdef Py_ssize_t H = x.shape[0], W = x.shape[1], i, j
    cdef double[:, ::1] px = np.zeros((H, W), dtype=np.float64)
    cdef double[:, ::1] py = np.zeros((H, W), dtype=np.float64)
    cdef double[:, ::1] w = np.empty((H, W), dtype=np.float64)
    out_arr = np.empty((H, W), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double inv_theta = 1.0 / theta, gx, gy, nrm, dv
    cdef int it
    for it in range(n_iter):
        for i in range(H):
            for j in range(W):
                dv = 0.0
                if i < H - 1:
                    dv += px[i, j]
                if i > 0:
                    dv -= px[i - 1, j]
                if j < W - 1:
                    dv += py[i, j]
                if j > 0:
                    dv -= py[i, j - 1]
                w[i, j] = dv - x[i, j] * inv_theta
        for i in range(H):
            for j in range(W):
                gx = (w[i + 1, j] - w[i, j]) if i < H - 1 else 0.0
                gy = (w[i, j + 1] - w[i, j]) if j < W - 1 else 0.0
                gx = px[i, j] + TV_DUAL_STEP * gx
                gy = py[i, j] + TV_DUAL_STEP * gy
                nrm = sqrt(gx * gx + gy * gy)
                if nrm < 1.0:
                    nrm = 1.0
                px[i, j] = gx / nrm
                py[i, j] = gy / nrm
    for i in range(H):
        for j in range(W):
            dv = 0.0
            if i < H - 1:
                dv += px[i, j]
            if i > 0:
                dv -= px[i - 1, j]
            if j < W - 1:
                dv += py[i, j]
            if j > 0:
                dv -= py[i, j - 1]
            out[i, j] = x[i, j] - theta * dv
    return out_arr


cdef inline void _drop(vector[int]& vec, int val):
    cdef size_t t
    for t in range(vec.size()):
        if vec[t] == val:
            vec[t] = vec[vec.size() - 1]
            vec.pop_back()
            return


def transport_ssp(cost, supply, demand):
    C_arr = np.ascontiguousarray(cost, dtype=np.int64)
    cdef const int64_t[:, ::1] C = C_arr
    cdef Py_ssize_t na = C.shape[0], nb = C.shape[1]
    excess_arr = np.array(supply, dtype=np.float64)
    deficit_arr = np.array(demand, dtype=np.float64)
    cdef double[::1] excess = excess_arr
    cdef double[::1] deficit = deficit_arr
    flow_arr = np.zeros((na, nb), dtype=np.float64)
    cdef double[:, ::1] flow = flow_arr
    v_arr = C_arr.min(axis=0)
    u_arr = (C_arr - v_arr[None, :]).min(axis=1)
    cdef int64_t[::1] u = u_arr
    cdef int64_t[::1] v = v_arr
    cdef int64_t BIG = 1 << 62
    cdef int64_t[::1] dr = np.full(na, BIG, dtype=np.int64)
    cdef int64_t[::1] dc = np.full(nb, BIG, dtype=np.int64)
    cdef long[::1] pred_r = np.full(na, -1, dtype=np.int_)
    cdef long[::1] pred_c = np.full(nb, -1, dtype=np.int_)
    cdef char[::1] done_r = np.zeros(na, dtype=np.int8)
    cdef char[::1] done_c = np.zeros(nb, dtype=np.int8)
    cdef char[::1] open_r = np.zeros(na, dtype=np.int8)
    cdef vector[vector[int]] col_rows
    col_rows.resize(nb)
    cdef vector[int] cand_r, settled_r, settled_c
    cdef Py_ssize_t src = 0
    cdef Py_ssize_t i, j, jp, t, best_pos
    cdef int64_t best, cval, dist, lb, cm
    cdef Py_ssize_t cmj
    cdef bint cm_valid
    cdef double th, fl
    cdef int sink

    # greedy start on tight arcs
    for i in range(na):
        for j in range(nb):
            if excess[i] <= 0.0:
                break
            if deficit[j] > 0.0 and C[i, j] - u[i] - v[j] == 0:
                th = excess[i] if excess[i] < deficit[j] else deficit[j]
                if flow[i, j] == 0.0:
                    col_rows[j].push_back(<int>i)
                flow[i, j] += th
                excess[i] = 0.0 if th == excess[i] else excess[i] - th
                deficit[j] = 0.0 if th == deficit[j] else deficit[j] - th

    while True:
        while src < na and excess[src] <= 0.0:
            src += 1
        if src == na:
            break
        cand_r.clear()
        settled_r.clear()
        settled_c.clear()
        dr[src] = 0
        open_r[src] = 1
        cand_r.push_back(<int>src)
        sink = -1
        lb = 0
        cm_valid = True
        cm = BIG
        cmj = -1
        while True:
            # rows reached through zero-cost backward arcs sit at the lower
            # bound and can be taken without rescanning the columns
            best = BIG
            best_pos = -1
            for t in range(<Py_ssize_t>cand_r.size()):
                i = cand_r[t]
                if dr[i] < best:
                    best = dr[i]
                    best_pos = t
            if best_pos < 0 or best > lb:
                if not cm_valid:
                    cm = BIG
                    cmj = -1
                    for j in range(nb):
                        if not done_c[j] and dc[j] < cm:
                            cm = dc[j]
                            cmj = j
                    cm_valid = True
                if cmj >= 0 and cm < best:
                    best_pos = -1
                    best = cm
            if best >= BIG:
                raise RuntimeError("transport problem is infeasible")
            lb = best
            if best_pos < 0:
                j = cmj
                done_c[j] = 1
                cm_valid = False
                settled_c.push_back(<int>j)
                if deficit[j] > 0.0:
                    sink = <int>j
                    break
                for t in range(<Py_ssize_t>col_rows[j].size()):
                    i = col_rows[j][t]
                    if not done_r[i] and dc[j] < dr[i]:
                        dr[i] = dc[j]
                        pred_r[i] = j
                        if not open_r[i]:
                            open_r[i] = 1
                            cand_r.push_back(<int>i)
            else:
                i = cand_r[best_pos]
                cand_r[best_pos] = cand_r[cand_r.size() - 1]
                cand_r.pop_back()
                done_r[i] = 1
                settled_r.push_back(<int>i)
                cm = BIG
                cmj = -1
                for j in range(nb):
                    if done_c[j]:
                        continue
                    cval = dr[i] + (C[i, j] - u[i] - v[j])
                    if cval < dc[j]:
                        dc[j] = cval
                        pred_c[j] = i
                    if dc[j] < cm:
                        cm = dc[j]
                        cmj = j
                cm_valid = True
        dist = dc[sink]
        for t in range(<Py_ssize_t>settled_r.size()):
            i = settled_r[t]
            u[i] += dist - dr[i]
        for t in range(<Py_ssize_t>settled_c.size()):
            j = settled_c[t]
            v[j] -= dist - dc[j]

        th = deficit[sink]
        j = sink
        while True:
            i = pred_c[j]
            jp = pred_r[i]
            if jp < 0:
                if excess[i] < th:
                    th = excess[i]
                break
            if flow[i, jp] < th:
                th = flow[i, jp]
            j = jp
        j = sink
        deficit[j] = 0.0 if th == deficit[j] else deficit[j] - th
        while True:
            i = pred_c[j]
            if flow[i, j] == 0.0:
                col_rows[j].push_back(<int>i)
            flow[i, j] += th
            jp = pred_r[i]
            if jp < 0:
                excess[i] = 0.0 if th == excess[i] else excess[i] - th
                break
            fl = flow[i, jp]
            if th == fl:
                flow[i, jp] = 0.0
                _drop(col_rows[jp], <int>i)
            else:
                flow[i, jp] = fl - th
            j = jp

        # reset scratch touched in this round
        for t in range(<Py_ssize_t>settled_r.size()):
            i = settled_r[t]
            dr[i] = BIG
            done_r[i] = 0
            open_r[i] = 0
            pred_r[i] = -1
        for t in range(<Py_ssize_t>cand_r.size()):
            i = cand_r[t]
            dr[i] = BIG
            open_r[i] = 0
            pred_r[i] = -1
        for j in range(nb):
            dc[j] = BIG
            done_c[j] = 0
            pred_c[j] = -1
    return flow_arr, u_arr, v_arr
