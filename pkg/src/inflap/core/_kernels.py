"""

:mod:`_kernels` -- Stencil loops jitted with ``numba``
======================================================

The per-node work of :mod:`inflap.core.infinity_ops` and
:mod:`inflap.core.solver`: extremal slopes, the max-min three-point
difference, the closed-form local solve, and Gauss-Seidel sweeps.

All kernels take the field as a 2-D float64 array indexed [i, j], the stencil
offsets as an (nd, 2) int64 array and the physical arm lengths as an (nd,)
float64 array. Arms that leave the lattice are skipped.

"""

import numba as nb
import numpy as np

# fastmath stays off: sweeps must be bit-reproducible
_numba_setting = {'nogil': True, 'cache': True}


@nb.njit(**_numba_setting)
def slope_extremes(u, i, j, offsets, arms):
    """Indices of the max- and min-slope directions; lowest index wins ties.

    Returns (-1, -1) when no arm stays on the lattice.
    """
    n0 = u.shape[0]
    n1 = u.shape[1]
    uc = u[i, j]
    kmax = -1
    kmin = -1
    smax = -np.inf
    smin = np.inf
    for k in range(offsets.shape[0]):
        ii = i + offsets[k, 0]
        jj = j + offsets[k, 1]
        if ii < 0 or jj < 0 or ii >= n0 or jj >= n1:
            continue
        s = (u[ii, jj] - uc) / arms[k]
        if s > smax:
            smax = s
            kmax = k
        if s < smin:
            smin = s
            kmin = k
    return kmax, kmin


@nb.njit(**_numba_setting)
def grad_at(u, i, j, offsets, arms):
    """Chord gradient surrogate (u(x+*) - u(x-*)) / (d+ + d-), clipped at 0."""
    kmax, kmin = slope_extremes(u, i, j, offsets, arms)
    if kmax < 0:
        return 0.0
    top = u[i + offsets[kmax, 0], j + offsets[kmax, 1]]
    bottom = u[i + offsets[kmin, 0], j + offsets[kmin, 1]]
    g = (top - bottom) / (arms[kmax] + arms[kmin])
    if g < 0.0:
        return 0.0
    return g


@nb.njit(**_numba_setting)
def saddle_pair(u, i, j, offsets, arms):
    """Pair (k, l) attaining max_k min_{l != k} of the three-point difference.

    Returns (value, k, l). Lowest indices win ties.
    """
    n0 = u.shape[0]
    n1 = u.shape[1]
    uc = u[i, j]
    nd = offsets.shape[0]
    best = -np.inf
    best_k = -1
    best_l = -1
    for k in range(nd):
        ik = i + offsets[k, 0]
        jk = j + offsets[k, 1]
        if ik < 0 or jk < 0 or ik >= n0 or jk >= n1:
            continue
        dk = arms[k]
        sk = (u[ik, jk] - uc) / dk
        inner = np.inf
        inner_l = -1
        for l in range(nd):
            if l == k:
                continue
            il = i + offsets[l, 0]
            jl = j + offsets[l, 1]
            if il < 0 or jl < 0 or il >= n0 or jl >= n1:
                continue
            dl = arms[l]
            q = 2.0 / (dk + dl) * (sk + (u[il, jl] - uc) / dl)
            if q < inner:
                inner = q
                inner_l = l
        if inner_l >= 0 and inner > best:
            best = inner
            best_k = k
            best_l = inner_l
    return best, best_k, best_l


@nb.njit(**_numba_setting)
def normalized_at(u, i, j, offsets, arms):
    value, k, l = saddle_pair(u, i, j, offsets, arms)
    if k < 0:
        return 0.0
    return value


@nb.njit(**_numba_setting)
def local_solve_at(u, i, j, offsets, arms, rhs):
    """Center value t solving max_k min_l Q_kl(t) = rhs with neighbors frozen.

    Each Q_kl is strictly decreasing in t, so the root is max_k min_l t_kl with
    t_kl = u_l + d_l (u_k - u_l) / (d_k + d_l) - rhs d_k d_l / 2.
    """
    n0 = u.shape[0]
    n1 = u.shape[1]
    nd = offsets.shape[0]
    best = -np.inf
    found = False
    for k in range(nd):
        ik = i + offsets[k, 0]
        jk = j + offsets[k, 1]
        if ik < 0 or jk < 0 or ik >= n0 or jk >= n1:
            continue
        dk = arms[k]
        uk = u[ik, jk]
        inner = np.inf
        for l in range(nd):
            if l == k:
                continue
            il = i + offsets[l, 0]
            jl = j + offsets[l, 1]
            if il < 0 or jl < 0 or il >= n0 or jl >= n1:
                continue
            dl = arms[l]
            ul = u[il, jl]
            t = ul + dl * (uk - ul) / (dk + dl) - rhs * dk * dl / 2.0
            if t < inner:
                inner = t
        if inner < np.inf and inner > best:
            best = inner
            found = True
    if not found:
        return u[i, j]
    return best


@nb.njit(**_numba_setting)
def grad_field(u, offsets, arms):
    n0 = u.shape[0]
    n1 = u.shape[1]
    out = np.zeros((n0, n1))
    for i in range(1, n0 - 1):
        for j in range(1, n1 - 1):
            out[i, j] = grad_at(u, i, j, offsets, arms)
    return out


@nb.njit(**_numba_setting)
def normalized_field(u, offsets, arms):
    n0 = u.shape[0]
    n1 = u.shape[1]
    out = np.zeros((n0, n1))
    for i in range(1, n0 - 1):
        for j in range(1, n1 - 1):
            out[i, j] = normalized_at(u, i, j, offsets, arms)
    return out


@nb.njit(**_numba_setting)
def update_at(u, i, j, offsets, arms, rhs, damping, rule):
    """Damped local solve; rule 1 projects onto u >= 0, rule 2 keeps u_+ forcing sign-consistent.

    Under rule 2 the forcing vanishes for u <= 0, so a step that lands below
    zero is replaced by the unforced root when that is negative and by 0
    otherwise.
    """
    old = u[i, j]
    t = local_solve_at(u, i, j, offsets, arms, rhs)
    if rule == 2 and t < 0.0:
        t = min(local_solve_at(u, i, j, offsets, arms, 0.0), 0.0)
    new = old + damping * (t - old)
    if rule == 1 and new < 0.0:
        new = 0.0
    return new


@nb.njit(**_numba_setting)
def relax_sweep(u, rhs, order, offsets, arms, damping, rule):
    """One Gauss-Seidel pass over ``order``; returns the sup-norm of the update."""
    delta = 0.0
    for idx in range(order.shape[0]):
        i = order[idx, 0]
        j = order[idx, 1]
        old = u[i, j]
        new = update_at(u, i, j, offsets, arms, rhs[i, j], damping, rule)
        diff = abs(new - old)
        if diff > delta:
            delta = diff
        u[i, j] = new
    return delta


@nb.njit(parallel=True, **_numba_setting)
def relax_class(u, rhs, nodes, offsets, arms, damping, rule, deltas):
    """Update one parity class in parallel; per-node changes go to ``deltas``.

    Nodes of a class never read each other, so the result does not depend on
    the thread count.
    """
    for idx in nb.prange(nodes.shape[0]):
        i = nodes[idx, 0]
        j = nodes[idx, 1]
        old = u[i, j]
        new = update_at(u, i, j, offsets, arms, rhs[i, j], damping, rule)
        deltas[idx] = abs(new - old)
        u[i, j] = new
