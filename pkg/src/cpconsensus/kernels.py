"""Dense numeric kernels: revised simplex, active-set QP, cut deduplication.

Every function here is written so that it compiles under ``numba.njit`` and
also runs unchanged as plain numpy code (see ``_jit``).
"""
import numpy as np

from ._jit import njit

# Status codes shared by the kernels.
OPTIMAL = 0
UNBOUNDED = 1
INFEASIBLE = 2
ITERATION_LIMIT = 3


@njit
def _fill_column(A, art_sign, j, out):
    m, d = A.shape
    if j < m:
        for k in range(d):
            out[k] = A[j, k]
    else:
        for k in range(d):
            out[k] = 0.0
        out[j - m] = art_sign[j - m]


@njit
def _orth_add(U, r, v, tol):
    """Gram-Schmidt ``v`` against the first ``r`` rows of ``U``."""
    nv0 = np.sqrt(np.dot(v, v))
    if nv0 == 0.0:
        return False
    for _ in range(2):
        for i in range(r):
            v -= np.dot(U[i], v) * U[i]
    nv = np.sqrt(np.dot(v, v))
    if nv <= tol * nv0:
        return False
    U[r] = v / nv
    return True


@njit
def dual_simplex(A, b, c, warm, max_iter, tol_price, tol_piv, tol_feas):
    """Solve ``max c.z s.t. A z <= b`` through its dual ``min b.y, A^T y = c, y >= 0``.

    The dual is a standard-form LP with ``d`` rows, so the simplex basis is a
    ``d x d`` matrix whatever the number of cuts. Pricing a dual column is the
    slack ``b_j - a_j.z`` of cut ``j`` at the current multiplier point ``z``,
    which makes this a dual simplex on the cuts. ``warm`` lists cut indices
    tried first as the starting basis.

    Returns ``(status, z, y, basis, n_iter, ray)``. For ``UNBOUNDED`` the
    returned ``ray`` satisfies ``A ray <= 0`` and ``c.ray > 0``; the caller
    still has to rule out an empty polyhedron.
    """
    m, d = A.shape
    art_sign = np.ones(d)
    for k in range(d):
        if c[k] < 0.0:
            art_sign[k] = -1.0
    bas = np.empty(d, np.int64)
    Bmat = np.zeros((d, d))
    col = np.empty(d)
    cscale = 1.0 + np.max(np.abs(c)) if d > 0 else 1.0

    # warm start: greedy independent subset of the warm cuts, completed
    # with artificial unit columns that must sit at level zero
    phase = 1
    have_warm = False
    if warm.size > 0:
        U = np.zeros((d, d))
        r = 0
        for t in range(warm.size):
            j = warm[t]
            if j < 0 or j >= m or r >= d:
                continue
            dup = False
            for s in range(r):
                if bas[s] == j:
                    dup = True
            if dup:
                continue
            _fill_column(A, art_sign, j, col)
            if _orth_add(U, r, col.copy(), 1e-9):
                bas[r] = j
                r += 1
        for k in range(d):
            if r >= d:
                break
            _fill_column(A, art_sign, m + k, col)
            if _orth_add(U, r, col.copy(), 1e-9):
                bas[r] = m + k
                r += 1
        if r == d:
            for p in range(d):
                _fill_column(A, art_sign, bas[p], col)
                Bmat[:, p] = col
            Binv = np.ascontiguousarray(np.linalg.inv(Bmat))
            yB = Binv @ c
            ok = True
            for p in range(d):
                if bas[p] >= m:
                    if abs(yB[p]) > tol_feas * cscale:
                        ok = False
                elif yB[p] < -tol_feas * cscale:
                    ok = False
            if ok:
                have_warm = True
                phase = 2
                for p in range(d):
                    if bas[p] >= m or yB[p] < 0.0:
                        yB[p] = 0.0
    if not have_warm:
        for p in range(d):
            bas[p] = m + p
        Binv = np.zeros((d, d))
        for p in range(d):
            Binv[p, p] = art_sign[p]
        yB = np.abs(c)
        phase = 1

    costB = np.empty(d)
    status = ITERATION_LIMIT
    ray = np.zeros(d)
    w = np.zeros(d)
    n_iter = 0
    streak = 0
    since_refactor = 0
    inbasis = np.zeros(m + d, np.bool_)
    for p in range(d):
        inbasis[bas[p]] = True

    while n_iter < max_iter:
        for p in range(d):
            j = bas[p]
            if phase == 1:
                costB[p] = 1.0 if j >= m else 0.0
            else:
                costB[p] = 0.0 if j >= m else b[j]
        w = costB @ Binv
        Aw = A @ w
        bland = streak > 30
        enter = -1
        best_r = 0.0
        for j in range(m):
            if inbasis[j]:
                continue
            if phase == 1:
                rj = -Aw[j]
                tj = tol_price
            else:
                rj = b[j] - Aw[j]
                tj = tol_price * (1.0 + abs(b[j]))
            if rj < -tj:
                if bland:
                    enter = j
                    break
                if enter == -1 or rj < best_r:
                    enter = j
                    best_r = rj
        if enter == -1:
            if phase == 1:
                infeas = 0.0
                for p in range(d):
                    if bas[p] >= m:
                        infeas += yB[p]
                if infeas > tol_feas * cscale:
                    status = UNBOUNDED
                    ray = w.copy()
                    break
                phase = 2
                for p in range(d):
                    if bas[p] >= m:
                        yB[p] = 0.0
                continue
            status = OPTIMAL
            break

        dvec = Binv @ A[enter]
        leave = -1
        best = np.inf
        best_piv = 0.0
        for p in range(d):
            j = bas[p]
            if phase == 2 and j >= m:
                if abs(dvec[p]) > tol_piv:
                    ratio = 0.0
                    piv = abs(dvec[p]) + 1.0  # prefer expelling artificials
                else:
                    continue
            elif dvec[p] > tol_piv:
                yp = yB[p] if yB[p] > 0.0 else 0.0
                ratio = yp / dvec[p]
                piv = dvec[p]
            else:
                continue
            if leave == -1 or ratio < best - 1e-13:
                leave = p
                best = ratio
                best_piv = piv
            elif ratio <= best + 1e-13:
                if bland:
                    if bas[p] < bas[leave]:
                        leave = p
                        best = ratio
                        best_piv = piv
                elif piv > best_piv:
                    leave = p
                    best = ratio
                    best_piv = piv
        if leave == -1:
            if phase == 2:
                status = INFEASIBLE
                break
            status = ITERATION_LIMIT
            break

        theta = best
        yB -= theta * dvec
        yB[leave] = theta
        for p in range(d):
            if yB[p] < 0.0:
                yB[p] = 0.0
        inbasis[bas[leave]] = False
        bas[leave] = enter
        inbasis[enter] = True
        piv = dvec[leave]
        row = Binv[leave] / piv
        Binv -= np.outer(dvec, row)
        Binv[leave] = row
        if theta <= 1e-14:
            streak += 1
        else:
            streak = 0
        n_iter += 1
        since_refactor += 1
        if since_refactor >= 64:
            since_refactor = 0
            for p in range(d):
                _fill_column(A, art_sign, bas[p], col)
                Bmat[:, p] = col
            Binv = np.ascontiguousarray(np.linalg.inv(Bmat))
            yB = Binv @ c
            for p in range(d):
                if yB[p] < 0.0 or (phase == 2 and bas[p] >= m):
                    yB[p] = 0.0

    y = np.zeros(m)
    for p in range(d):
        if bas[p] < m:
            y[bas[p]] = yB[p]
    return status, w, y, bas, n_iter, ray


@njit
def _null_space(GW, n, tol):
    k = GW.shape[0]
    if k == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(GW, True)
    smax = s[0] if s.size > 0 else 0.0
    rank = 0
    for i in range(s.size):
        if s[i] > tol * max(1.0, smax):
            rank += 1
    return vt[rank:, :].T.copy()


@njit
def active_set_qp(Q, q, G, h, is_eq, x0, max_iter, tol):
    """Primal active-set method for ``min 1/2 x'Qx + q'x s.t. G x <= h``.

    ``Q`` must be positive semidefinite; rows flagged in ``is_eq`` are held
    as equalities. ``x0`` must be feasible. Zero-curvature directions of the
    reduced Hessian are followed as rays until a constraint blocks (this is
    the LP case). Ties in the ratio test go to the lowest row index. The
    constraint dropped is the one with the most negative multiplier, except
    after a run of zero-length steps, when the lowest-index constraint with
    a negative multiplier is dropped instead (Bland's rule).

    Returns ``(status, x, lam, working, n_iter)`` where ``lam`` holds the
    multipliers of the final working set (``grad + G_W' lam_W = 0``).
    """
    n = x0.size
    p = G.shape[0]
    x = x0.copy()
    inW = np.zeros(p, np.bool_)
    W = np.empty(n, np.int64)
    k = 0
    U = np.zeros((n, n))
    for r in range(p):
        if is_eq[r] and k < n:
            if _orth_add(U, k, G[r].copy(), 1e-9):
                W[k] = r
                inW[r] = True
                k += 1
    lam = np.zeros(p)
    status = ITERATION_LIMIT
    n_iter = 0
    streak = 0
    # set after an unblocked full Newton step: x minimizes on the working set
    at_min = False
    while n_iter < max_iter:
        n_iter += 1
        grad = Q @ x + q
        GW = np.empty((k, n))
        for i in range(k):
            GW[i] = G[W[i]]
        Z = _null_space(GW, n, 1e-10)
        nz = Z.shape[1]
        step = np.zeros(n)
        ray = False
        if nz > 0 and not at_min:
            Hr = Z.T @ (Q @ Z)
            Hr = 0.5 * (Hr + Hr.T)
            gr = Z.T @ grad
            evals, evecs = np.linalg.eigh(Hr)
            emax = 0.0
            for i in range(nz):
                if abs(evals[i]) > emax:
                    emax = abs(evals[i])
            htol = 1e-10 * max(1.0, emax)
            flat = np.zeros(nz)
            curved = np.zeros(nz)
            gsc = 1.0 + np.sqrt(np.dot(grad, grad))
            for i in range(nz):
                coef = np.dot(evecs[:, i], gr)
                if evals[i] > htol:
                    curved -= (coef / evals[i]) * evecs[:, i]
                else:
                    flat -= coef * evecs[:, i]
            if np.sqrt(np.dot(flat, flat)) > 1e-12 * gsc:
                ray = True
                step = Z @ flat
            else:
                step = Z @ curved
        snorm = np.sqrt(np.dot(step, step))
        if at_min or snorm <= tol * (1.0 + np.sqrt(np.dot(x, x))):
            at_min = False
            for i in range(p):
                lam[i] = 0.0
            if k == 0:
                status = OPTIMAL
                break
            sol = np.linalg.lstsq(GW.T, -grad)[0]
            worst = -1
            thr = -tol * (1.0 + np.sqrt(np.dot(grad, grad)))
            wval = thr
            bland = streak > 10
            for i in range(k):
                lam[W[i]] = sol[i]
                if is_eq[W[i]] or sol[i] >= thr:
                    continue
                if bland:
                    if worst == -1 or W[i] < W[worst]:
                        worst = i
                elif sol[i] < wval:
                    wval = sol[i]
                    worst = i
            if worst == -1:
                status = OPTIMAL
                break
            inW[W[worst]] = False
            for i in range(worst, k - 1):
                W[i] = W[i + 1]
            k -= 1
            continue
        alpha = np.inf if ray else 1.0
        block = -1
        for r in range(p):
            if inW[r]:
                continue
            gp = np.dot(G[r], step)
            if gp > 1e-12 * snorm:
                slack = h[r] - np.dot(G[r], x)
                ar = slack / gp
                if ar < 0.0:
                    ar = 0.0
                if ar < alpha:
                    alpha = ar
                    block = r
        if block == -1 and ray:
            status = UNBOUNDED
            break
        x = x + alpha * step
        if alpha * snorm <= 1e-14 * (1.0 + np.sqrt(np.dot(x, x))):
            streak += 1
        else:
            streak = 0
        at_min = block == -1 and not ray
        if block >= 0 and k < n:
            W[k] = block
            inW[block] = True
            k += 1
    working = np.zeros(p, np.bool_)
    for i in range(k):
        working[W[i]] = True
    return status, x, lam, working, n_iter


@njit
def near_duplicate_mask(A, b, tol):
    """Mark rows that repeat an earlier row within ``tol`` in the inf-norm.

    Rows are compared on ``(a, b)`` jointly; the first occurrence in the
    input order is kept.
    """
    m = b.size
    order = np.argsort(b, kind="mergesort")
    dup = np.zeros(m, np.bool_)
    for s in range(m):
        i = order[s]
        if dup[i]:
            continue
        t = s + 1
        while t < m and b[order[t]] - b[i] <= tol:
            j = order[t]
            if not dup[j]:
                same = True
                for k in range(A.shape[1]):
                    if abs(A[i, k] - A[j, k]) > tol:
                        same = False
                        break
                if same:
                    # keep the earlier row
                    if j > i:
                        dup[j] = True
                    else:
                        dup[i] = True
                        break
            t += 1
    return dup
