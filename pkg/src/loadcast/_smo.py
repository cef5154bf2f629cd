"""Compiled inner loop of the SMO solver for the epsilon-SVR dual.

The dual is written over 2n variables ``a = [alpha; alpha_star]`` with
labels ``z = [+1...; -1...]``::

    min  0.5 a'Qa + p'a   s.t.  z'a = 0,  0 <= a_t <= C_t
    Q_st = z_s z_t K(s mod n, t mod n)
    p    = [eps - y; eps + y]

and ``beta = alpha - alpha_star``.  Working pairs are the maximal KKT
violators; the two-variable subproblem is solved in closed form with box
clipping.
"""

import numpy as np
from numba import njit

TAU = 1e-12


@njit(cache=True, nogil=True)
def kernel_row(X, sqnorm, i, gamma, out):
    """Row i of the RBF Gram matrix, using ||x-z||^2 = |x|^2 + |z|^2 - 2 x.z."""
    n = X.shape[0]
    dots = X @ X[i]
    for k in range(n):
        d2 = sqnorm[i] + sqnorm[k] - 2.0 * dots[k]
        if d2 < 0.0:
            d2 = 0.0
        out[k] = np.exp(-gamma * d2)
    out[i] = 1.0


@njit(cache=True, nogil=True)
def _get_row(X, sqnorm, gamma, i, rows, slot_of, owner, stamp, clock):
    s = slot_of[i]
    if s < 0:
        n_slots = rows.shape[0]
        s = 0
        best = stamp[0]
        for t in range(n_slots):
            if owner[t] < 0:
                s = t
                break
            if stamp[t] < best:
                best = stamp[t]
                s = t
        if owner[s] >= 0:
            slot_of[owner[s]] = -1
        owner[s] = i
        slot_of[i] = s
        kernel_row(X, sqnorm, i, gamma, rows[s])
    stamp[s] = clock
    return s


@njit(cache=True, nogil=True)
def _in_up(t, n, a, upper):
    if t < n:
        return a[t] < upper[t]
    return a[t] > 0


@njit(cache=True, nogil=True)
def _in_low(t, n, a, upper):
    if t < n:
        return a[t] > 0
    return a[t] < upper[t]


@njit(cache=True, nogil=True)
def _shrink(a, G, upper, n, gmax1, gmax2, active):
    """Rebuild the active list, dropping bound variables that cannot join a violating pair."""
    k = 0
    for t in range(2 * n):
        zt = 1.0 if t < n else -1.0
        drop = False
        if a[t] >= upper[t]:
            drop = -G[t] > gmax1 if zt > 0 else -G[t] > gmax2
        elif a[t] <= 0:
            drop = G[t] > gmax2 if zt > 0 else G[t] > gmax1
        if not drop:
            active[k] = t
            k += 1
    return k


@njit(cache=True, nogil=True)
def smo_solve(X, sqnorm, gamma, a, G, upper, tol, max_iter, second_order,
              rows, slot_of, owner, stamp, clock0):
    """Run SMO from the state ``(a, G)`` until the maximal violation is <= tol.

    Mutates ``a``, ``G`` and the row cache in place.  Returns
    ``(iterations, final_violation, clock)``.  The gradient is kept up to
    date for every variable; shrinking only narrows the working-set scans,
    and convergence is always confirmed on the full set.
    """
    n = X.shape[0]
    m = 2 * n
    clock = clock0
    it = 0
    violation = np.inf
    active = np.arange(m)
    n_active = m
    shrink_every = min(n, 1000)
    countdown = shrink_every
    while True:
        # i: maximal violator in I_up
        gmax = -np.inf
        i = -1
        gmax2 = -np.inf
        for k in range(n_active):
            t = active[k]
            zt = 1.0 if t < n else -1.0
            v = -zt * G[t]
            if _in_up(t, n, a, upper) and v > gmax:
                gmax = v
                i = t
            if _in_low(t, n, a, upper) and -v > gmax2:
                gmax2 = -v

        countdown -= 1
        if countdown <= 0:
            countdown = shrink_every
            n_active = _shrink(a, G, upper, n, gmax, gmax2, active)
            continue

        # j: over I_low, either the minimal -zG (first order) or the largest
        # guaranteed decrease of the two-variable objective (second order)
        gmin = np.inf
        j = -1
        j_first = -1
        if i >= 0:
            ii = i % n
            if second_order:
                clock += 1
                si = _get_row(X, sqnorm, gamma, ii, rows, slot_of, owner, stamp, clock)
                Ki = rows[si]
            best = np.inf
            for k in range(n_active):
                t = active[k]
                if not _in_low(t, n, a, upper):
                    continue
                zt = 1.0 if t < n else -1.0
                v = -zt * G[t]
                if v < gmin:
                    gmin = v
                    j_first = t
                if second_order:
                    grad_diff = gmax - v
                    if grad_diff > 0:
                        kt = t % n
                        quad = Ki[ii] + 1.0 - 2.0 * Ki[kt]
                        if quad <= 0:
                            quad = TAU
                        obj = -(grad_diff * grad_diff) / quad
                        if obj < best:
                            best = obj
                            j = t
            if not second_order:
                j = j_first
        if i < 0 or j_first < 0:
            violation = 0.0
        else:
            violation = gmax - gmin
        if violation <= tol or j < 0:
            if n_active < m:
                # converged on the shrunk set; recheck everything
                n_active = _shrink(a, G, upper, n, np.inf, np.inf, active)
                countdown = shrink_every
                continue
            break
        if it >= max_iter:
            break
        it += 1

        ii = i % n
        jj = j % n
        zi = 1.0 if i < n else -1.0
        zj = 1.0 if j < n else -1.0
        clock += 1
        si = _get_row(X, sqnorm, gamma, ii, rows, slot_of, owner, stamp, clock)
        sj = _get_row(X, sqnorm, gamma, jj, rows, slot_of, owner, stamp, clock)
        # LRU with >= 2 slots: fetching row jj never evicts the just-stamped row ii
        Ki = rows[si]
        Kj = rows[sj]
        Qij = zi * zj * Ki[jj]
        Ci = upper[i]
        Cj = upper[j]
        old_ai = a[i]
        old_aj = a[j]
        if zi != zj:
            quad = Ki[ii] + Kj[jj] + 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > Ci - Cj:
                if a[i] > Ci:
                    a[i] = Ci
                    a[j] = Ci - diff
            else:
                if a[j] > Cj:
                    a[j] = Cj
                    a[i] = Cj + diff
        else:
            quad = Ki[ii] + Kj[jj] - 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > Ci:
                if a[i] > Ci:
                    a[i] = Ci
                    a[j] = total - Ci
            else:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = total
            if total > Cj:
                if a[j] > Cj:
                    a[j] = Cj
                    a[i] = total - Cj
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = total
        di = zi * (a[i] - old_ai)
        dj = zj * (a[j] - old_aj)
        for k in range(n):
            u = di * Ki[k] + dj * Kj[k]
            G[k] += u
            G[k + n] -= u
    return it, violation, clock


@njit(cache=True, nogil=True)
def bias_from_gradient(a, G, upper):
    """Bias ``b`` (so that f = K beta + b): mean over free variables, else bound midpoint."""
    n2 = a.shape[0]
    n = n2 // 2
    ub = np.inf
    lb = -np.inf
    n_free = 0
    sum_free = 0.0
    for t in range(n2):
        zt = 1.0 if t < n else -1.0
        yg = zt * G[t]
        if a[t] >= upper[t]:
            if zt < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif a[t] <= 0:
            if zt > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            sum_free += yg
    if n_free > 0:
        rho = sum_free / n_free
    else:
        rho = (ub + lb) / 2.0
    return -rho
