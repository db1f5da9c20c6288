# Numba kernels for the message-passing engine.
#
# Message layout: one row per edge, columns indexed by label
# 0 -> y=-1, 1 -> y=0, 2 -> y=1.  Presence messages: column t.

import numpy as np
from numba import njit

OK = 0
DEGENERATE_UNIT = 1
DEGENERATE_USER = 2
DEGENERATE_EDGE = 3

SEQUENTIAL = 0
RANDOM = 1


@njit(cache=True)
def unit_messages(edges, w, C, mu_hat, out, pre, suf):
    """Cavity messages of one unit factor into ``out`` (len(edges), 3).

    For every final load L the neighbours outside the connected set take
    label 0 when L + w <= C and -1 otherwise, so the factor sum splits into
    one knapsack pass per L.  ``pre[k, L, q]`` holds the weight of edges
    ``< k`` reaching partial load q when the final load is L; ``suf`` is the
    mirror image from the other end.  Returns False on an all-zero message.
    """
    n = len(edges)
    if C == 0:
        for k in range(n):
            out[k, 0] = 1.0
            out[k, 1] = 0.0
            out[k, 2] = 0.0
        return True
    for L in range(C + 1):
        pre[0, L, 0] = 1.0
        for q in range(1, L + 1):
            pre[0, L, q] = 0.0
        suf[n, L, 0] = 1.0
        for q in range(1, L + 1):
            suf[n, L, q] = 0.0
    for k in range(n):
        e = edges[k]
        wk = w[e]
        h = mu_hat[e, 2]
        mx = 0.0
        for L in range(C + 1):
            f = mu_hat[e, 1] if L + wk <= C else mu_hat[e, 0]
            for q in range(L + 1):
                v = pre[k, L, q] * f
                if q >= wk:
                    v += pre[k, L, q - wk] * h
                pre[k + 1, L, q] = v
                if v > mx:
                    mx = v
        if mx > 0.0:
            inv = 1.0 / mx
            for L in range(C + 1):
                for q in range(L + 1):
                    pre[k + 1, L, q] *= inv
    for k in range(n - 1, -1, -1):
        e = edges[k]
        wk = w[e]
        h = mu_hat[e, 2]
        mx = 0.0
        for L in range(C + 1):
            f = mu_hat[e, 1] if L + wk <= C else mu_hat[e, 0]
            for q in range(L + 1):
                v = suf[k + 1, L, q] * f
                if q >= wk:
                    v += suf[k + 1, L, q - wk] * h
                suf[k, L, q] = v
                if v > mx:
                    mx = v
        if mx > 0.0:
            inv = 1.0 / mx
            for L in range(C + 1):
                for q in range(L + 1):
                    suf[k, L, q] *= inv
    for k in range(n):
        wk = w[edges[k]]
        m_on = 0.0
        m_free = 0.0
        m_sat = 0.0
        for L in range(C + 1):
            acc = 0.0
            for q in range(L + 1):
                acc += pre[k, L, q] * suf[k + 1, L, L - q]
            if L + wk <= C:
                m_free += acc
            else:
                m_sat += acc
            if L >= wk:
                r = L - wk
                acc = 0.0
                for q in range(r + 1):
                    acc += pre[k, L, q] * suf[k + 1, L, r - q]
                m_on += acc
        tot = m_sat + m_free + m_on
        if not (tot > 0.0) or not np.isfinite(tot):
            return False
        out[k, 0] = m_sat / tot
        out[k, 1] = m_free / tot
        out[k, 2] = m_on / tot
    return True


@njit(cache=True)
def user_messages(lo, hi, wus, mu, nu0, nu1, out, nuhat, F, pre, suf, G):
    """Cavity messages of one user factor.

    Fills ``out`` (deg, 3) with the outgoing edge messages and ``nuhat`` with
    the unnormalised presence message ``[Z(t=0), Z(t=1)]``.  Returns the
    weight of the all-(-1) configuration (same for both presence values).
    A present user either has every edge at -1, or one edge j at 1 with
    every strictly better edge at -1 and the rest free in {-1, 0}.
    """
    d = hi - lo
    # exclusion products of (a+b) and of a
    pre[0] = 1.0
    for k in range(d):
        e = lo + k
        pre[k + 1] = pre[k] * (mu[e, 0] + mu[e, 1])
    suf[d] = 1.0
    for k in range(d - 1, -1, -1):
        e = lo + k
        suf[k] = suf[k + 1] * (mu[e, 0] + mu[e, 1])
    z0 = pre[d]
    for i in range(d):
        out[i, 0] = pre[i] * suf[i + 1]  # temporarily: prod_{k!=i} (a+b)
    pre[0] = 1.0
    for k in range(d):
        pre[k + 1] = pre[k] * mu[lo + k, 0]
    suf[d] = 1.0
    for k in range(d - 1, -1, -1):
        suf[k] = suf[k + 1] * mu[lo + k, 0]
    all_off = pre[d]
    for i in range(d):
        out[i, 1] = pre[i] * suf[i + 1]  # temporarily: prod_{k!=i} a
    z1 = all_off
    for j in range(d):
        wj = wus[lo + j]
        for k in range(d):
            e = lo + k
            if k == j:
                F[k] = mu[e, 2]
            elif wus[e] > wj:
                F[k] = mu[e, 0]
            else:
                F[k] = mu[e, 0] + mu[e, 1]
        pre[0] = 1.0
        for k in range(d):
            pre[k + 1] = pre[k] * F[k]
        suf[d] = 1.0
        for k in range(d - 1, -1, -1):
            suf[k] = suf[k + 1] * F[k]
        z1 += pre[d]
        for i in range(d):
            G[j, i] = pre[i] * suf[i + 1]
    for i in range(d):
        wi = wus[lo + i]
        q0 = out[i, 0]
        a_ex = out[i, 1]
        s_all = 0.0
        s_free = 0.0
        for j in range(d):
            if j == i:
                continue
            s_all += G[j, i]
            if wus[lo + j] >= wi:
                s_free += G[j, i]
        out[i, 0] = nu0 * q0 + nu1 * (a_ex + s_all)
        out[i, 1] = nu0 * q0 + nu1 * s_free
        out[i, 2] = nu1 * G[i, i]
    nuhat[0] = z0
    nuhat[1] = z1
    return all_off


@njit(cache=True)
def _normalize_rows(out, d):
    for i in range(d):
        tot = out[i, 0] + out[i, 1] + out[i, 2]
        if not (tot > 0.0) or not np.isfinite(tot):
            return False
        out[i, 0] /= tot
        out[i, 1] /= tot
        out[i, 2] /= tot
    return True


@njit(cache=True)
def run_bp(user_ptr, unit_ptr, unit_edges, w_su, w_us, cap, prob,
           mu, mu_hat, nu, nu_hat, mirror, damping, tol, max_iters, floor,
           seed, schedule, floored):
    """Iterate the message updates in place until the largest applied change
    falls below ``tol``.

    Returns (iterations, residual, status, location).
    """
    n_users = len(user_ptr) - 1
    n_units = len(unit_ptr) - 1
    dmax_unit = 0
    for s in range(n_units):
        dmax_unit = max(dmax_unit, unit_ptr[s + 1] - unit_ptr[s])
    dmax_user = 0
    for u in range(n_users):
        dmax_user = max(dmax_user, user_ptr[u + 1] - user_ptr[u])
    cmax = 0
    for s in range(n_units):
        cmax = max(cmax, cap[s])
    pre3 = np.empty((dmax_unit + 1, cmax + 1, cmax + 1))
    suf3 = np.empty((dmax_unit + 1, cmax + 1, cmax + 1))
    out = np.empty((max(dmax_unit, dmax_user), 3))
    F = np.empty(dmax_user)
    pre1 = np.empty(dmax_user + 1)
    suf1 = np.empty(dmax_user + 1)
    G = np.empty((dmax_user, dmax_user))
    nh = np.empty(2)
    keep = damping
    take = 1.0 - damping
    np.random.seed(seed)
    order = np.arange(n_units + n_users)
    residual = np.inf
    it = 0
    while it < max_iters:
        it += 1
        residual = 0.0
        if schedule == RANDOM:
            np.random.shuffle(order)
        for pos in range(n_units + n_users):
            node = order[pos]
            if node < n_units:
                s = node
                lo = unit_ptr[s]
                hi = unit_ptr[s + 1]
                edges = unit_edges[lo:hi]
                if not unit_messages(edges, w_su, cap[s], mu_hat, out, pre3, suf3):
                    return it, residual, DEGENERATE_UNIT, s
                for k in range(hi - lo):
                    e = edges[k]
                    for y in range(3):
                        new = take * out[k, y] + keep * mu[e, y]
                        diff = abs(new - mu[e, y])
                        if diff > residual:
                            residual = diff
                        mu[e, y] = new
            else:
                u = node - n_units
                lo = user_ptr[u]
                hi = user_ptr[u + 1]
                user_messages(lo, hi, w_us, mu, nu[u, 0], nu[u, 1], out, nh, F, pre1, suf1, G)
                if not _normalize_rows(out, hi - lo):
                    return it, residual, DEGENERATE_USER, u
                tot = nh[0] + nh[1]
                if not (tot > 0.0):
                    return it, residual, DEGENERATE_USER, u
                for k in range(hi - lo):
                    e = lo + k
                    for y in range(3):
                        new = take * out[k, y] + keep * mu_hat[e, y]
                        diff = abs(new - mu_hat[e, y])
                        if diff > residual:
                            residual = diff
                        mu_hat[e, y] = new
                for tt in range(2):
                    new = take * nh[tt] / tot + keep * nu_hat[u, tt]
                    diff = abs(new - nu_hat[u, tt])
                    if diff > residual:
                        residual = diff
                    nu_hat[u, tt] = new
                if mirror:
                    pt0 = 1.0 - prob[u]
                    pt1 = prob[u]
                    h0 = nu_hat[u, 0]
                    h1 = nu_hat[u, 1]
                    floored[u] = (pt0 > 0.0 and h0 < floor) or (pt1 > 0.0 and h1 < floor)
                    v0 = pt0 / max(h0, floor)
                    v1 = pt1 / max(h1, floor)
                    tot = v0 + v1
                    v0 /= tot
                    v1 /= tot
                    new = take * v0 + keep * nu[u, 0]
                    diff = abs(new - nu[u, 0])
                    if diff > residual:
                        residual = diff
                    nu[u, 0] = new
                    new = take * v1 + keep * nu[u, 1]
                    diff = abs(new - nu[u, 1])
                    if diff > residual:
                        residual = diff
                    nu[u, 1] = new
        if residual < tol:
            break
    return it, residual, OK, -1


@njit(cache=True)
def beliefs(user_ptr, w_us, mu, mu_hat, nu, edge, disc, pdisc, present):
    """Edge beliefs and per-user factor traces from a message set.

    Returns (status, location).
    """
    n_users = len(user_ptr) - 1
    dmax = 0
    for u in range(n_users):
        dmax = max(dmax, user_ptr[u + 1] - user_ptr[u])
    out = np.empty((dmax, 3))
    F = np.empty(dmax)
    pre1 = np.empty(dmax + 1)
    suf1 = np.empty(dmax + 1)
    G = np.empty((dmax, dmax))
    nh = np.empty(2)
    for e in range(len(mu)):
        tot = 0.0
        for y in range(3):
            edge[e, y] = mu[e, y] * mu_hat[e, y]
            tot += edge[e, y]
        if not (tot > 0.0):
            return DEGENERATE_EDGE, e
        for y in range(3):
            edge[e, y] /= tot
    for u in range(n_users):
        lo = user_ptr[u]
        hi = user_ptr[u + 1]
        all_off = user_messages(lo, hi, w_us, mu, nu[u, 0], nu[u, 1], out, nh, F, pre1, suf1, G)
        zloc = nu[u, 0] * nh[0] + nu[u, 1] * nh[1]
        if not (zloc > 0.0):
            return DEGENERATE_USER, u
        disc[u] = (nu[u, 0] + nu[u, 1]) * all_off / zloc
        pdisc[u] = nu[u, 1] * all_off / zloc
        present[u] = nu[u, 1] * nh[1] / zloc
    return OK, -1
