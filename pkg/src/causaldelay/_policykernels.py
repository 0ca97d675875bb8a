"""Compiled exact search for depth-1 and depth-2 policy trees.

Features are given as integer level codes (dense ranks of distinct values).
``offsets[j]`` locates feature ``j``'s block in flat per-level arrays. A
tree's value on a row set is the sum over leaves of ``|sum of psi|``
because each leaf treats iff its signal sum is positive.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _best_stump(S, C, offsets, p, total, count, tol):
    """Best single split on a row set described by per-level sums ``S``/counts ``C``.

    Returns (value, feature, left_level, right_level); feature -1 means no
    split beats a single leaf. The split sends levels <= left_level left;
    right_level is the next level present in the set.
    """
    best = abs(total)
    best_f = -1
    best_l = -1
    best_r = -1
    for j in range(p):
        prefix = 0.0
        pc = 0
        last = -1
        for l in range(offsets[j + 1] - offsets[j]):
            c = C[offsets[j] + l]
            if c == 0:
                continue
            if pc > 0:
                v = abs(prefix) + abs(total - prefix)
                if v > best + tol:
                    best = v
                    best_f = j
                    best_l = last
                    best_r = l
            prefix += S[offsets[j] + l]
            pc += c
            last = l
            if pc == count:
                break
    return best, best_f, best_l, best_r


@njit(cache=True)
def search(codes, offsets, order, psi, active, max_depth, tol):
    """Exact search for the best tree of depth ``max_depth`` (1 or 2).

    ``order[j]`` lists row indices sorted by ``codes[:, j]``. Returns
    ``(value, root_f, root_l, root_r, lf, ll, lr, rf, rl, rr)`` where the
    ``*_f`` entries are -1 for leaves and ``*_l``/``*_r`` are the level codes
    either side of each threshold.
    """
    n, p = codes.shape
    m = offsets[p]
    S_all = np.zeros(m)
    C_all = np.zeros(m, dtype=np.int64)
    total = 0.0
    count = 0
    for r in range(n):
        if active[r]:
            total += psi[r]
            count += 1
            for j in range(p):
                S_all[offsets[j] + codes[r, j]] += psi[r]
                C_all[offsets[j] + codes[r, j]] += 1

    best = abs(total)
    out = np.full(9, -1, dtype=np.int64)
    S_L = np.zeros(m)
    C_L = np.zeros(m, dtype=np.int64)
    S_R = np.zeros(m)
    C_R = np.zeros(m, dtype=np.int64)
    for j in range(p):
        S_L[:] = 0.0
        C_L[:] = 0
        tl = 0.0
        cl = 0
        t = 0
        n_lev = offsets[j + 1] - offsets[j]
        for l in range(n_lev):
            if C_all[offsets[j] + l] == 0:
                continue
            # move every active row of level l to the left set
            while t < n and codes[order[j, t], j] <= l:
                r = order[j, t]
                t += 1
                if not active[r]:
                    continue
                tl += psi[r]
                cl += 1
                if max_depth > 1:
                    for jj in range(p):
                        S_L[offsets[jj] + codes[r, jj]] += psi[r]
                        C_L[offsets[jj] + codes[r, jj]] += 1
            if cl == count:
                break
            nxt = l + 1
            while C_all[offsets[j] + nxt] == 0:
                nxt += 1
            if max_depth == 1:
                v = abs(tl) + abs(total - tl)
                if v > best + tol:
                    best = v
                    out[0] = j
                    out[1] = l
                    out[2] = nxt
                    out[3:] = -1
                continue
            for q in range(m):
                S_R[q] = S_all[q] - S_L[q]
                C_R[q] = C_all[q] - C_L[q]
            vl, lf, ll, lr = _best_stump(S_L, C_L, offsets, p, tl, cl, tol)
            vr, rf, rl, rr = _best_stump(S_R, C_R, offsets, p, total - tl, count - cl, tol)
            v = vl + vr
            if v > best + tol:
                best = v
                out[0] = j
                out[1] = l
                out[2] = nxt
                out[3] = lf
                out[4] = ll
                out[5] = lr
                out[6] = rf
                out[7] = rl
                out[8] = rr
    return best, out
