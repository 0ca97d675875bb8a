"""Compiled kernels for exact greedy tree growth.

Trees are grown level by level. A tree is stored in flat arrays indexed by
node id: ``feature`` (-1 for leaves), ``threshold``, ``left``, ``right`` and
``value``. Rows go left when ``x[feature] <= threshold``.

Features come in two flavours so that one-hot columns cost O(nnz) per level
instead of O(n): binary features (exactly two distinct values) are scanned
over the rows holding the high value only, every other feature over its full
presorted row order.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def grow_tree(
    X,
    grad,
    hess,
    in_sample,
    is_binary,
    bin_lo,
    bin_hi,
    hi_ptr,
    hi_rows,
    gen_slot,
    gen_order,
    max_depth,
    min_leaf,
    reg_lambda,
    learning_rate,
):
    n, p = X.shape
    max_nodes = 2 ** (max_depth + 1) - 1
    feature = -np.ones(max_nodes, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = -np.ones(max_nodes, dtype=np.int64)
    right = -np.ones(max_nodes, dtype=np.int64)
    value = np.zeros(max_nodes)

    node_of = -np.ones(n, dtype=np.int64)
    for r in range(n):
        if in_sample[r]:
            node_of[r] = 0

    level_start = 0
    level_end = 1
    n_nodes = 1
    for depth in range(max_depth + 1):
        m = level_end - level_start
        G = np.zeros(m)
        H = np.zeros(m)
        C = np.zeros(m, dtype=np.int64)
        for r in range(n):
            nd = node_of[r]
            if nd >= level_start:
                k = nd - level_start
                G[k] += grad[r]
                H[k] += hess[r]
                C[k] += 1

        best_gain = np.zeros(m)
        best_feat = -np.ones(m, dtype=np.int64)
        best_thr = np.zeros(m)

        if depth < max_depth:
            parent_score = np.empty(m)
            for k in range(m):
                parent_score[k] = G[k] * G[k] / (H[k] + reg_lambda)
            GL = np.zeros(m)
            HL = np.zeros(m)
            CL = np.zeros(m, dtype=np.int64)
            last = np.zeros(m)
            for j in range(p):
                if is_binary[j]:
                    GL[:] = 0.0
                    HL[:] = 0.0
                    CL[:] = 0
                    for t in range(hi_ptr[j], hi_ptr[j + 1]):
                        r = hi_rows[t]
                        nd = node_of[r]
                        if nd >= level_start:
                            k = nd - level_start
                            GL[k] += grad[r]
                            HL[k] += hess[r]
                            CL[k] += 1
                    thr = 0.5 * (bin_lo[j] + bin_hi[j])
                    for k in range(m):
                        # GL/HL/CL accumulate the high side, i.e. the right child
                        cr = CL[k]
                        cl = C[k] - cr
                        if cl < min_leaf or cr < min_leaf:
                            continue
                        gr = GL[k]
                        hr = HL[k]
                        gl = G[k] - gr
                        hl = H[k] - hr
                        gain = gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent_score[k]
                        if gain > best_gain[k]:
                            best_gain[k] = gain
                            best_feat[k] = j
                            best_thr[k] = thr
                elif gen_slot[j] >= 0:
                    order = gen_order[gen_slot[j]]
                    GL[:] = 0.0
                    HL[:] = 0.0
                    CL[:] = 0
                    for t in range(n):
                        r = order[t]
                        nd = node_of[r]
                        if nd < level_start:
                            continue
                        k = nd - level_start
                        x = X[r, j]
                        if CL[k] > 0 and x > last[k]:
                            cl = CL[k]
                            cr = C[k] - cl
                            if cl >= min_leaf and cr >= min_leaf:
                                gl = GL[k]
                                hl = HL[k]
                                gr = G[k] - gl
                                hr = H[k] - hl
                                gain = gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent_score[k]
                                if gain > best_gain[k]:
                                    best_gain[k] = gain
                                    best_feat[k] = j
                                    best_thr[k] = 0.5 * (last[k] + x)
                        GL[k] += grad[r]
                        HL[k] += hess[r]
                        CL[k] += 1
                        last[k] = x

        # finalize this level: split or make leaves
        next_start = n_nodes
        for k in range(m):
            nd = level_start + k
            if best_feat[k] >= 0:
                feature[nd] = best_feat[k]
                threshold[nd] = best_thr[k]
                left[nd] = n_nodes
                right[nd] = n_nodes + 1
                n_nodes += 2
            else:
                value[nd] = -learning_rate * G[k] / (H[k] + reg_lambda) if C[k] > 0 else 0.0
        if n_nodes == next_start:
            break
        for r in range(n):
            nd = node_of[r]
            if nd >= level_start:
                f = feature[nd]
                if f < 0:
                    node_of[r] = -1
                elif X[r, f] <= threshold[nd]:
                    node_of[r] = left[nd]
                else:
                    node_of[r] = right[nd]
        level_start = next_start
        level_end = n_nodes

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True, nogil=True)
def predict_tree(X, feature, threshold, left, right, value, out):
    """Add the tree's leaf values to ``out`` in place."""
    n = X.shape[0]
    for r in range(n):
        nd = 0
        while feature[nd] >= 0:
            if X[r, feature[nd]] <= threshold[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[r] += value[nd]
