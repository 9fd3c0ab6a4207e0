"""Numba kernels for exact, sparsity-aware split finding.

Trees are grown level by level. Each feature column is presorted once per
fit, keeping only nonzero, non-missing entries; the implicit block of zeros
is accounted for from node totals, so a level costs O(nnz) rather than
O(n * d). The same kernel serves Gini classification trees (per-row class
weight vectors) and second-order boosting trees (per-row gradient/hessian).
"""

import numpy as np
from numba import njit

GINI = 0
NEWTON = 1


@njit(cache=True, error_model='numpy')
def presort_columns(X, mask):
    n, d = X.shape
    has_mask = mask.shape[0] > 0
    nz_count = np.zeros(d, np.int64)
    miss_count = np.zeros(d, np.int64)
    for i in range(n):
        for j in range(d):
            if has_mask and mask[i, j]:
                miss_count[j] += 1
            elif X[i, j] != 0.0:
                nz_count[j] += 1
    col_ptr = np.zeros(d + 1, np.int64)
    miss_ptr = np.zeros(d + 1, np.int64)
    for j in range(d):
        col_ptr[j + 1] = col_ptr[j] + nz_count[j]
        miss_ptr[j + 1] = miss_ptr[j] + miss_count[j]
    col_rows = np.empty(col_ptr[d], np.int32)
    col_vals = np.empty(col_ptr[d], np.float64)
    miss_rows = np.empty(miss_ptr[d], np.int32)
    pos = col_ptr[:d].copy()
    mpos = miss_ptr[:d].copy()
    for i in range(n):
        for j in range(d):
            if has_mask and mask[i, j]:
                miss_rows[mpos[j]] = i
                mpos[j] += 1
            elif X[i, j] != 0.0:
                col_rows[pos[j]] = i
                col_vals[pos[j]] = X[i, j]
                pos[j] += 1
    col_neg = np.zeros(d, np.int64)
    for j in range(d):
        a = col_ptr[j]
        b = col_ptr[j + 1]
        if b - a > 1:
            order = np.argsort(col_vals[a:b], kind="mergesort")
            col_rows[a:b] = col_rows[a:b][order]
            col_vals[a:b] = col_vals[a:b][order]
        k = a
        while k < b and col_vals[k] < 0.0:
            k += 1
        col_neg[j] = k
    return col_ptr, col_rows, col_vals, col_neg, miss_ptr, miss_rows


@njit(cache=True, error_model='numpy')
def _side_score(mode, w, sq, g, h, lam, alpha):
    if mode == GINI:
        if w <= 0.0:
            return -np.inf
        return sq / w
    if g > alpha:
        g -= alpha
    elif g < -alpha:
        g += alpha
    else:
        g = 0.0
    return g * g / (h + lam)


@njit(cache=True, error_model='numpy')
def _score(mode, v, lam, alpha):
    if mode == GINI:
        w = 0.0
        sq = 0.0
        for k in range(v.shape[0]):
            w += v[k]
            sq += v[k] * v[k]
        return _side_score(mode, w, sq, 0.0, 0.0, lam, alpha)
    return _side_score(mode, 0.0, 0.0, v[0], v[1], lam, alpha)


@njit(cache=True, error_model='numpy')
def _consider(mode, a, f, thr, node_tot, node_cnt, pref, pref_c, miss, miss_c,
              msl, lam, alpha, best_score, best_feat, best_thr, best_mleft):
    S = node_tot.shape[1]
    lc = pref_c[a]
    mc = miss_c[a]
    rc = node_cnt[a] - mc - lc
    if mc > 0.0:
        n_opt = 2
    else:
        n_opt = 1
        if lc < msl or rc < msl:
            return
    for option in range(n_opt):
        mleft = option == 0
        if mc > 0.0:
            cl = lc + mc if mleft else lc
            cr = rc if mleft else rc + mc
            if cl < msl or cr < msl:
                continue
        if mode == GINI:
            wl = 0.0
            ql = 0.0
            wr = 0.0
            qr = 0.0
            for k in range(S):
                lv = pref[a, k]
                rv = node_tot[a, k] - miss[a, k] - lv
                if mleft:
                    lv += miss[a, k]
                else:
                    rv += miss[a, k]
                wl += lv
                ql += lv * lv
                wr += rv
                qr += rv * rv
            sc = _side_score(mode, wl, ql, 0.0, 0.0, lam, alpha) + \
                _side_score(mode, wr, qr, 0.0, 0.0, lam, alpha)
        else:
            gl = pref[a, 0]
            hl = pref[a, 1]
            gr = node_tot[a, 0] - miss[a, 0] - gl
            hr = node_tot[a, 1] - miss[a, 1] - hl
            if mleft:
                gl += miss[a, 0]
                hl += miss[a, 1]
            else:
                gr += miss[a, 0]
                hr += miss[a, 1]
            sc = _side_score(mode, 0.0, 0.0, gl, hl, lam, alpha) + \
                _side_score(mode, 0.0, 0.0, gr, hr, lam, alpha)
        if sc > best_score[a]:
            best_score[a] = sc
            best_feat[a] = f
            best_thr[a] = thr
            # with no missing rows seen, unseen missing values follow the larger child
            best_mleft[a] = mleft if mc > 0.0 else lc >= rc


@njit(cache=True, error_model='numpy')
def _midpoint(lo, hi):
    thr = 0.5 * lo + 0.5 * hi
    if thr >= hi or thr < lo:
        thr = lo
    return thr


@njit(cache=True, error_model='numpy')
def _reset(a, S, pref, nz, miss, pref_c, nz_c, miss_c, has_prev):
    for s in range(S):
        pref[a, s] = 0.0
        nz[a, s] = 0.0
        miss[a, s] = 0.0
    pref_c[a] = 0.0
    nz_c[a] = 0.0
    miss_c[a] = 0.0
    has_prev[a] = False


@njit(cache=True, error_model='numpy')
def _scan_range(mode, f, rows, vals, lo, hi, row_node, lvl_start, stat, cnt, node_tot, ncnt,
                pref, pref_c, miss, miss_c, last, has_prev, msl, lam, alpha, best_score,
                best_feat, best_thr, best_mleft):
    S = stat.shape[1]
    for e in range(lo, hi):
        r = rows[e]
        nd = row_node[r]
        if nd < 0:
            continue
        a = nd - lvl_start
        v = vals[e]
        # a new distinct value closes the candidate threshold below it
        if has_prev[a] and v > last[a]:
            _consider(mode, a, f, _midpoint(last[a], v), node_tot, ncnt, pref, pref_c, miss,
                      miss_c, msl, lam, alpha, best_score, best_feat, best_thr, best_mleft)
        for s in range(S):
            pref[a, s] += stat[r, s]
        pref_c[a] += cnt[r]
        last[a] = v
        has_prev[a] = True


@njit(cache=True, error_model='numpy')
def _push_zeros(mode, a, f, node_tot, ncnt, pref, pref_c, nz, nz_c, miss, miss_c, last,
                has_prev, msl, lam, alpha, best_score, best_feat, best_thr, best_mleft):
    zc = ncnt[a] - nz_c[a] - miss_c[a]
    if zc <= 0.0:
        return
    if has_prev[a]:
        _consider(mode, a, f, _midpoint(last[a], 0.0), node_tot, ncnt, pref, pref_c, miss,
                  miss_c, msl, lam, alpha, best_score, best_feat, best_thr, best_mleft)
    for s in range(node_tot.shape[1]):
        pref[a, s] += node_tot[a, s] - nz[a, s] - miss[a, s]
    pref_c[a] += zc
    last[a] = 0.0
    has_prev[a] = True


@njit(cache=True, error_model='numpy')
def _newton_consider(a, f, thr, gl, hl, lc, gt, ht, ct, gm, hm, mc, msl, lam, alpha,
                     best_score, best_feat, best_thr, best_mleft):
    rc = ct - mc - lc
    gr = gt - gm - gl
    hr = ht - hm - hl
    if mc > 0.0:
        if lc + mc >= msl and rc >= msl:
            sc = _side_score(NEWTON, 0.0, 0.0, gl + gm, hl + hm, lam, alpha) + \
                _side_score(NEWTON, 0.0, 0.0, gr, hr, lam, alpha)
            if sc > best_score[a]:
                best_score[a] = sc
                best_feat[a] = f
                best_thr[a] = thr
                best_mleft[a] = True
        if lc >= msl and rc + mc >= msl:
            sc = _side_score(NEWTON, 0.0, 0.0, gl, hl, lam, alpha) + \
                _side_score(NEWTON, 0.0, 0.0, gr + gm, hr + hm, lam, alpha)
            if sc > best_score[a]:
                best_score[a] = sc
                best_feat[a] = f
                best_thr[a] = thr
                best_mleft[a] = False
    elif lc >= msl and rc >= msl:
        sc = _side_score(NEWTON, 0.0, 0.0, gl, hl, lam, alpha) + \
            _side_score(NEWTON, 0.0, 0.0, gr, hr, lam, alpha)
        if sc > best_score[a]:
            best_score[a] = sc
            best_feat[a] = f
            best_thr[a] = thr
            best_mleft[a] = lc >= rc


@njit(cache=True, error_model='numpy')
def _newton_scan(f, rows, vals, lo, hi, row_node, lvl_start, g_row, h_row, cnt, gt, ht, ncnt,
                 gl, hl, lc, gm, hm, mc, last, has_prev, msl, lam, alpha, best_score, best_feat,
                 best_thr, best_mleft):
    for e in range(lo, hi):
        r = rows[e]
        nd = row_node[r]
        if nd < 0:
            continue
        a = nd - lvl_start
        v = vals[e]
        if has_prev[a] and v > last[a]:
            # no missing rows at this node: evaluate inline, the call costs more than the math
            if mc[a] > 0.0:
                _newton_consider(a, f, _midpoint(last[a], v), gl[a], hl[a], lc[a], gt[a],
                                 ht[a], ncnt[a], gm[a], hm[a], mc[a], msl, lam, alpha,
                                 best_score, best_feat, best_thr, best_mleft)
            else:
                cl = lc[a]
                cr = ncnt[a] - cl
                if cl >= msl and cr >= msl:
                    g1 = gl[a]
                    h1 = hl[a]
                    sc = _side_score(NEWTON, 0.0, 0.0, g1, h1, lam, alpha) + \
                        _side_score(NEWTON, 0.0, 0.0, gt[a] - g1, ht[a] - h1, lam, alpha)
                    if sc > best_score[a]:
                        best_score[a] = sc
                        best_feat[a] = f
                        best_thr[a] = _midpoint(last[a], v)
                        best_mleft[a] = cl >= cr
        gl[a] += g_row[r]
        hl[a] += h_row[r]
        lc[a] += cnt[r]
        last[a] = v
        has_prev[a] = True


@njit(cache=True, error_model='numpy')
def _newton_level(d, col_ptr, col_end, col_neg, col_rows, col_vals, miss_ptr, miss_end,
                  miss_rows, row_node, lvl_start, A, stat, cnt, node_tot, ncnt, msl, lam, alpha,
                  best_score, best_feat, best_thr, best_mleft):
    # same candidates and accumulation order as the generic scan, on flat per-node arrays
    g_row = np.ascontiguousarray(stat[:, 0])
    h_row = np.ascontiguousarray(stat[:, 1])
    gt = np.ascontiguousarray(node_tot[:, 0])
    ht = np.ascontiguousarray(node_tot[:, 1])
    gl = np.zeros(A)
    hl = np.zeros(A)
    lc = np.zeros(A)
    gz = np.zeros(A)
    hz = np.zeros(A)
    cz = np.zeros(A)
    gm = np.zeros(A)
    hm = np.zeros(A)
    mc = np.zeros(A)
    last = np.zeros(A)
    has_prev = np.zeros(A, np.bool_)
    stamp = np.full(A, -1, np.int64)
    touched = np.empty(A, np.int64)
    for f in range(d):
        nt = 0
        for e in range(miss_ptr[f], miss_end[f]):
            r = miss_rows[e]
            nd = row_node[r]
            if nd < 0:
                continue
            a = nd - lvl_start
            if stamp[a] != f:
                stamp[a] = f
                touched[nt] = a
                nt += 1
                gl[a] = 0.0
                hl[a] = 0.0
                lc[a] = 0.0
                gz[a] = 0.0
                hz[a] = 0.0
                cz[a] = 0.0
                gm[a] = 0.0
                hm[a] = 0.0
                mc[a] = 0.0
                has_prev[a] = False
            gm[a] += g_row[r]
            hm[a] += h_row[r]
            mc[a] += cnt[r]
        for e in range(col_ptr[f], col_end[f]):
            r = col_rows[e]
            nd = row_node[r]
            if nd < 0:
                continue
            a = nd - lvl_start
            if stamp[a] != f:
                stamp[a] = f
                touched[nt] = a
                nt += 1
                gl[a] = 0.0
                hl[a] = 0.0
                lc[a] = 0.0
                gz[a] = 0.0
                hz[a] = 0.0
                cz[a] = 0.0
                gm[a] = 0.0
                hm[a] = 0.0
                mc[a] = 0.0
                has_prev[a] = False
            gz[a] += g_row[r]
            hz[a] += h_row[r]
            cz[a] += cnt[r]
        if nt == 0:
            continue
        _newton_scan(f, col_rows, col_vals, col_ptr[f], col_neg[f], row_node, lvl_start, g_row,
                     h_row, cnt, gt, ht, ncnt, gl, hl, lc, gm, hm, mc, last, has_prev, msl, lam,
                     alpha, best_score, best_feat, best_thr, best_mleft)
        # the implicit block of zeros sits between negatives and positives
        for t in range(nt):
            a = touched[t]
            zc = ncnt[a] - cz[a] - mc[a]
            if zc <= 0.0:
                continue
            if has_prev[a]:
                _newton_consider(a, f, _midpoint(last[a], 0.0), gl[a], hl[a], lc[a], gt[a],
                                 ht[a], ncnt[a], gm[a], hm[a], mc[a], msl, lam, alpha,
                                 best_score, best_feat, best_thr, best_mleft)
            gl[a] += gt[a] - gz[a] - gm[a]
            hl[a] += ht[a] - hz[a] - hm[a]
            lc[a] += zc
            last[a] = 0.0
            has_prev[a] = True
        _newton_scan(f, col_rows, col_vals, col_neg[f], col_end[f], row_node, lvl_start, g_row,
                     h_row, cnt, gt, ht, ncnt, gl, hl, lc, gm, hm, mc, last, has_prev, msl, lam,
                     alpha, best_score, best_feat, best_thr, best_mleft)


@njit(cache=True, error_model='numpy')
def grow_tree(X, XT, mask, col_ptr, col_rows0, col_vals0, col_neg0, miss_ptr, miss_rows0,
              stat, cnt, mode, max_depth, min_samples_leaf, mtry, seed, lam, alpha):
    """Grow one tree. Rows with ``cnt == 0`` are excluded.

    With ``mtry < d`` every node draws its own feature subset and candidate
    values are gathered per node from the column-major copy ``XT``;
    otherwise all nodes of a level are scanned together through the
    presorted column lists.

    Returns node arrays (feature, threshold, missing_left, left, right,
    node_stat, node_cnt, gain, depth) and the leaf index of every row.
    ``gain`` holds the impurity decrease (Gini) or half the structure-score
    improvement (Newton) of each internal node.
    """
    n, d = X.shape
    S = stat.shape[1]
    has_mask = mask.shape[0] > 0
    msl = float(min_samples_leaf)
    subsample = mtry < d
    if subsample:
        np.random.seed(seed)

    # working copies of the sorted column lists, compacted as rows settle
    if subsample:
        col_rows = col_rows0
        col_vals = col_vals0
        miss_rows = miss_rows0
    else:
        col_rows = col_rows0.copy()
        col_vals = col_vals0.copy()
        miss_rows = miss_rows0.copy()
    col_end = col_ptr[1:].copy()
    col_neg = col_neg0.copy()
    miss_end = miss_ptr[1:].copy()

    row_node = np.full(n, -1, np.int64)
    row_leaf = np.full(n, -1, np.int64)
    n_alive = 0
    for r in range(n):
        if cnt[r] > 0.0:
            n_alive += 1
    alive = np.empty(n_alive, np.int64)
    k = 0
    for r in range(n):
        if cnt[r] > 0.0:
            alive[k] = r
            row_node[r] = 0
            k += 1

    cap = 2 * max(n_alive, 1) + 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap, np.float64)
    missing_left = np.zeros(cap, np.bool_)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    node_stat = np.zeros((cap, S), np.float64)
    node_cnt = np.zeros(cap, np.float64)
    gain = np.zeros(cap, np.float64)
    depth = np.zeros(cap, np.int32)
    for i in range(n_alive):
        r = alive[i]
        for s in range(S):
            node_stat[0, s] += stat[r, s]
        node_cnt[0] += cnt[r]
    n_nodes = 1
    lvl_start = 0
    lvl_end = 1
    compact_ref = n_alive
    first = True
    perm = np.arange(d)
    buf_v = np.empty(max(n_alive, 1), np.float64)
    buf_r = np.empty(max(n_alive, 1), np.int64)

    while lvl_start < lvl_end:
        A = lvl_end - lvl_start
        active = np.zeros(A, np.bool_)
        n_active = 0
        for a in range(A):
            nd = lvl_start + a
            ok = node_cnt[nd] >= 2.0 * msl and node_cnt[nd] >= 2.0
            if max_depth >= 0 and depth[nd] >= max_depth:
                ok = False
            if ok and mode == GINI:
                nonzero = 0
                for s in range(S):
                    if node_stat[nd, s] > 0.0:
                        nonzero += 1
                ok = nonzero > 1
            active[a] = ok
            if ok:
                n_active += 1
        # settle rows of nodes that will not split
        w = 0
        for i in range(alive.shape[0]):
            r = alive[i]
            a = row_node[r] - lvl_start
            if active[a]:
                alive[w] = r
                w += 1
            else:
                row_leaf[r] = row_node[r]
                row_node[r] = -1
        alive = alive[:w]
        if n_active == 0:
            break

        node_tot = node_stat[lvl_start:lvl_end]
        ncnt = node_cnt[lvl_start:lvl_end]
        parent = np.empty(A, np.float64)
        best_score = np.full(A, -np.inf)
        best_feat = np.full(A, -1, np.int64)
        best_thr = np.zeros(A, np.float64)
        best_mleft = np.zeros(A, np.bool_)
        for a in range(A):
            parent[a] = _score(mode, node_tot[a], lam, alpha)
        pref = np.zeros((A, S), np.float64)
        nz = np.zeros((A, S), np.float64)
        miss = np.zeros((A, S), np.float64)
        pref_c = np.zeros(A, np.float64)
        nz_c = np.zeros(A, np.float64)
        miss_c = np.zeros(A, np.float64)
        last = np.zeros(A, np.float64)
        has_prev = np.zeros(A, np.bool_)

        if subsample:
            # group alive rows by node
            start = np.zeros(A + 1, np.int64)
            for i in range(alive.shape[0]):
                start[row_node[alive[i]] - lvl_start + 1] += 1
            for a in range(A):
                start[a + 1] += start[a]
            fill = start[:A].copy()
            grouped = np.empty(alive.shape[0], np.int64)
            for i in range(alive.shape[0]):
                r = alive[i]
                a = row_node[r] - lvl_start
                grouped[fill[a]] = r
                fill[a] += 1
            for a in range(A):
                if not active[a]:
                    continue
                for c in range(mtry):
                    j = c + np.random.randint(d - c)
                    t = perm[c]
                    perm[c] = perm[j]
                    perm[j] = t
                    f = perm[c]
                    _reset(a, S, pref, nz, miss, pref_c, nz_c, miss_c, has_prev)
                    k = 0
                    for i in range(start[a], start[a + 1]):
                        r = grouped[i]
                        if has_mask and mask[r, f]:
                            for s in range(S):
                                miss[a, s] += stat[r, s]
                            miss_c[a] += cnt[r]
                        else:
                            v = XT[f, r]
                            if v != 0.0:
                                buf_v[k] = v
                                buf_r[k] = r
                                k += 1
                                for s in range(S):
                                    nz[a, s] += stat[r, s]
                                nz_c[a] += cnt[r]
                    if k == 0:
                        continue
                    order = np.argsort(buf_v[:k])
                    sv = buf_v[:k][order]
                    sr = buf_r[:k][order]
                    e = 0
                    while e < k and sv[e] < 0.0:
                        e += 1
                    _scan_range(mode, f, sr, sv, 0, e, row_node, lvl_start, stat, cnt, node_tot,
                                ncnt, pref, pref_c, miss, miss_c, last, has_prev, msl, lam, alpha,
                                best_score, best_feat, best_thr, best_mleft)
                    _push_zeros(mode, a, f, node_tot, ncnt, pref, pref_c, nz, nz_c, miss, miss_c,
                                last, has_prev, msl, lam, alpha, best_score, best_feat, best_thr,
                                best_mleft)
                    _scan_range(mode, f, sr, sv, e, k, row_node, lvl_start, stat, cnt, node_tot,
                                ncnt, pref, pref_c, miss, miss_c, last, has_prev, msl, lam, alpha,
                                best_score, best_feat, best_thr, best_mleft)
        else:
            if first or alive.shape[0] < 0.75 * compact_ref:
                # drop settled rows from the sorted lists
                for f in range(d):
                    wpos = col_ptr[f]
                    neg_end = col_ptr[f]
                    for e in range(col_ptr[f], col_end[f]):
                        r = col_rows[e]
                        if row_node[r] >= 0:
                            col_rows[wpos] = r
                            col_vals[wpos] = col_vals[e]
                            if col_vals[e] < 0.0:
                                neg_end = wpos + 1
                            wpos += 1
                    col_end[f] = wpos
                    col_neg[f] = neg_end
                    wpos = miss_ptr[f]
                    for e in range(miss_ptr[f], miss_end[f]):
                        r = miss_rows[e]
                        if row_node[r] >= 0:
                            miss_rows[wpos] = r
                            wpos += 1
                    miss_end[f] = wpos
                compact_ref = alive.shape[0]
                first = False

        if not subsample and mode == NEWTON:
            _newton_level(d, col_ptr, col_end, col_neg, col_rows, col_vals, miss_ptr, miss_end,
                          miss_rows, row_node, lvl_start, A, stat, cnt, node_tot, ncnt, msl, lam,
                          alpha, best_score, best_feat, best_thr, best_mleft)
        elif not subsample:
            stamp = np.full(A, -1, np.int64)
            touched = np.empty(A, np.int64)
            for f in range(d):
                nt = 0
                # pass 1: missing rows and nonzero totals per node
                for e in range(miss_ptr[f], miss_end[f]):
                    r = miss_rows[e]
                    if row_node[r] < 0:
                        continue
                    a = row_node[r] - lvl_start
                    if stamp[a] != f:
                        stamp[a] = f
                        touched[nt] = a
                        nt += 1
                        _reset(a, S, pref, nz, miss, pref_c, nz_c, miss_c, has_prev)
                    for s in range(S):
                        miss[a, s] += stat[r, s]
                    miss_c[a] += cnt[r]
                for e in range(col_ptr[f], col_end[f]):
                    r = col_rows[e]
                    if row_node[r] < 0:
                        continue
                    a = row_node[r] - lvl_start
                    if stamp[a] != f:
                        stamp[a] = f
                        touched[nt] = a
                        nt += 1
                        _reset(a, S, pref, nz, miss, pref_c, nz_c, miss_c, has_prev)
                    for s in range(S):
                        nz[a, s] += stat[r, s]
                    nz_c[a] += cnt[r]
                if nt == 0:
                    continue
                # pass 2: negatives ascending, the implicit zero block, positives ascending
                _scan_range(mode, f, col_rows, col_vals, col_ptr[f], col_neg[f], row_node,
                            lvl_start, stat, cnt, node_tot, ncnt, pref, pref_c, miss, miss_c,
                            last, has_prev, msl, lam, alpha, best_score, best_feat, best_thr,
                            best_mleft)
                for t in range(nt):
                    _push_zeros(mode, touched[t], f, node_tot, ncnt, pref, pref_c, nz, nz_c, miss,
                                miss_c, last, has_prev, msl, lam, alpha, best_score, best_feat,
                                best_thr, best_mleft)
                _scan_range(mode, f, col_rows, col_vals, col_neg[f], col_end[f], row_node,
                            lvl_start, stat, cnt, node_tot, ncnt, pref, pref_c, miss, miss_c,
                            last, has_prev, msl, lam, alpha, best_score, best_feat, best_thr,
                            best_mleft)

        # split nodes whose best candidate improves the parent score
        child_of = np.full(A, -1, np.int64)
        for a in range(A):
            if not active[a] or best_feat[a] < 0:
                continue
            delta = best_score[a] - parent[a]
            tol = 1e-12 * abs(best_score[a])
            if not (delta > tol):
                # impure classification nodes split even on zero gain (XOR-like layouts)
                if mode != GINI or delta < -tol:
                    continue
                n_present = 0
                for s in range(S):
                    if node_tot[a, s] > 0.0:
                        n_present += 1
                if n_present < 2:
                    continue
                delta = max(delta, 0.0)
            nd = lvl_start + a
            feature[nd] = best_feat[a]
            threshold[nd] = best_thr[a]
            missing_left[nd] = best_mleft[a]
            left[nd] = n_nodes
            right[nd] = n_nodes + 1
            depth[n_nodes] = depth[nd] + 1
            depth[n_nodes + 1] = depth[nd] + 1
            if mode == GINI:
                w_node = 0.0
                for s in range(S):
                    w_node += node_tot[a, s]
                gain[nd] = delta / w_node
            else:
                gain[nd] = 0.5 * delta
            child_of[a] = n_nodes
            n_nodes += 2

        w = 0
        for i in range(alive.shape[0]):
            r = alive[i]
            nd = row_node[r]
            c = child_of[nd - lvl_start]
            if c < 0:
                row_leaf[r] = nd
                row_node[r] = -1
                continue
            f = feature[nd]
            if has_mask and mask[r, f]:
                go_left = missing_left[nd]
            else:
                go_left = X[r, f] <= threshold[nd]
            c = c if go_left else c + 1
            row_node[r] = c
            for s in range(S):
                node_stat[c, s] += stat[r, s]
            node_cnt[c] += cnt[r]
            alive[w] = r
            w += 1
        alive = alive[:w]
        lvl_start = lvl_end
        lvl_end = n_nodes

    for i in range(alive.shape[0]):
        r = alive[i]
        row_leaf[r] = row_node[r]

    return (feature[:n_nodes], threshold[:n_nodes], missing_left[:n_nodes], left[:n_nodes],
            right[:n_nodes], node_stat[:n_nodes], node_cnt[:n_nodes], gain[:n_nodes],
            depth[:n_nodes], row_leaf)


@njit(cache=True, error_model='numpy')
def apply_tree(X, mask, feature, threshold, missing_left, left, right):
    n = X.shape[0]
    has_mask = mask.shape[0] > 0
    out = np.empty(n, np.int64)
    for i in range(n):
        nd = 0
        while left[nd] >= 0:
            f = feature[nd]
            if has_mask and mask[i, f]:
                go_left = missing_left[nd]
            else:
                go_left = X[i, f] <= threshold[nd]
            nd = left[nd] if go_left else right[nd]
        out[i] = nd
    return out
