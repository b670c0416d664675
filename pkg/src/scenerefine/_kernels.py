"""Numba-compiled inner loops for the convex distance queries.

Everything here operates on world-frame vertex arrays; the public API with
poses, typed errors, and result objects lives in :mod:`collision`.

Status codes returned by the kernels:
    0  success
    1  overlap detected (GJK) / not overlapping (EPA misuse)
    2  iteration limit hit
    3  degenerate geometry (EPA could not build/keep a valid polytope)
"""

from __future__ import annotations

import numpy as np
from numba import njit

TOUCH_EPS = 1e-7  # |v| below this means touching/overlap
GJK_MAX_ITER = 128
EPA_MAX_EXPANSIONS = 256
_MAXV = 4 + EPA_MAX_EXPANSIONS + 8
_MAXF = 4 + 3 * EPA_MAX_EXPANSIONS + 16


@njit(cache=True)
def _support(verts, d):
    best = -1e300
    bi = 0
    for i in range(verts.shape[0]):
        s = verts[i, 0] * d[0] + verts[i, 1] * d[1] + verts[i, 2] * d[2]
        if s > best:
            best = s
            bi = i
    return bi


@njit(cache=True)
def _project_origin(pts, m):
    """Closest point to the origin in the hull of the first m rows of pts.

    Enumerates vertex subsets (bitmask), solving the affine projection for
    each and keeping the best candidate with non-negative barycentrics.
    Returns (candidate point, per-row lambdas, subset bitmask).
    """
    best_d2 = 1e300
    best_cand = np.zeros(3)
    best_lam = np.zeros(4)
    best_mask = 0
    idx = np.empty(4, np.int64)
    for mask in range(1, 1 << m):
        cnt = 0
        for i in range(m):
            if mask & (1 << i):
                idx[cnt] = i
                cnt += 1
        p0 = pts[idx[0]]
        lam = np.zeros(4)
        cand = np.zeros(3)
        if cnt == 1:
            cand[:] = p0
            lam[idx[0]] = 1.0
        else:
            d = np.empty((cnt - 1, 3))
            for r in range(cnt - 1):
                for c in range(3):
                    d[r, c] = pts[idx[r + 1], c] - p0[c]
            # normal equations for min |p0 + mu^T d|^2
            g = d @ d.T
            rhs = np.empty(cnt - 1)
            for r in range(cnt - 1):
                rhs[r] = -(d[r, 0] * p0[0] + d[r, 1] * p0[1] + d[r, 2] * p0[2])
            mu = np.zeros(cnt - 1)
            if cnt == 2:
                if g[0, 0] < 1e-30:
                    continue
                mu[0] = rhs[0] / g[0, 0]
            elif cnt == 3:
                det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
                if abs(det) < 1e-30:
                    continue
                mu[0] = (rhs[0] * g[1, 1] - g[0, 1] * rhs[1]) / det
                mu[1] = (g[0, 0] * rhs[1] - rhs[0] * g[1, 0]) / det
            else:
                det = (
                    g[0, 0] * (g[1, 1] * g[2, 2] - g[1, 2] * g[2, 1])
                    - g[0, 1] * (g[1, 0] * g[2, 2] - g[1, 2] * g[2, 0])
                    + g[0, 2] * (g[1, 0] * g[2, 1] - g[1, 1] * g[2, 0])
                )
                if abs(det) < 1e-30:
                    continue
                for k in range(3):
                    gk = g.copy()
                    for r in range(3):
                        gk[r, k] = rhs[r]
                    detk = (
                        gk[0, 0] * (gk[1, 1] * gk[2, 2] - gk[1, 2] * gk[2, 1])
                        - gk[0, 1] * (gk[1, 0] * gk[2, 2] - gk[1, 2] * gk[2, 0])
                        + gk[0, 2] * (gk[1, 0] * gk[2, 1] - gk[1, 1] * gk[2, 0])
                    )
                    mu[k] = detk / det
            lam0 = 1.0
            bad = False
            for r in range(cnt - 1):
                if mu[r] < -1e-12:
                    bad = True
                lam0 -= mu[r]
            if bad or lam0 < -1e-12:
                continue
            for c in range(3):
                cand[c] = lam0 * p0[c]
            for r in range(cnt - 1):
                for c in range(3):
                    cand[c] += mu[r] * pts[idx[r + 1], c]
            lam[idx[0]] = lam0 if lam0 > 0.0 else 0.0
            for r in range(cnt - 1):
                lam[idx[r + 1]] = mu[r] if mu[r] > 0.0 else 0.0
            s = 0.0
            for i in range(4):
                s += lam[i]
            if s <= 0.0:
                continue
            for i in range(4):
                lam[i] /= s
        d2 = cand[0] ** 2 + cand[1] ** 2 + cand[2] ** 2
        if d2 < best_d2 - 1e-15:
            best_d2 = d2
            best_cand = cand
            best_lam = lam
            best_mask = mask
    return best_cand, best_lam, best_mask


@njit(cache=True)
def gjk_core(wa, wb):
    """GJK distance between the hulls of two world-vertex arrays.

    Returns (status, dist, witness_a, witness_b, axis, sa, sb, nsimplex)
    where status 0 = separated (axis points a -> b), 1 = overlap/touching
    (sa/sb carry the terminal simplex for EPA), 2 = iteration limit.
    """
    sa = np.zeros((4, 3))
    sb = np.zeros((4, 3))
    w = np.zeros((4, 3))
    zero3 = np.zeros(3)

    ca = np.zeros(3)
    cb = np.zeros(3)
    for i in range(wa.shape[0]):
        ca += wa[i]
    ca /= wa.shape[0]
    for i in range(wb.shape[0]):
        cb += wb[i]
    cb /= wb.shape[0]
    d = cb - ca
    if d[0] ** 2 + d[1] ** 2 + d[2] ** 2 < 1e-24:
        d = np.array([1.0, 0.0, 0.0])

    ia = _support(wa, -d)
    ib = _support(wb, d)
    sa[0] = wa[ia]
    sb[0] = wb[ib]
    w[0] = sa[0] - sb[0]
    m = 1

    seen = np.full(GJK_MAX_ITER + 1, -1, np.int64)
    seen[0] = ia * 1000003 + ib
    nseen = 1

    v = w[0].copy()
    lam = np.zeros(4)
    lam[0] = 1.0

    for _ in range(GJK_MAX_ITER):
        vn2 = v[0] ** 2 + v[1] ** 2 + v[2] ** 2
        if vn2 < TOUCH_EPS * TOUCH_EPS or m == 4:
            return 1, 0.0, zero3, zero3, zero3, sa, sb, m
        ia = _support(wa, -v)
        ib = _support(wb, v)
        key = ia * 1000003 + ib
        repeat = False
        for i in range(nseen):
            if seen[i] == key:
                repeat = True
                break
        wnew = wa[ia] - wb[ib]
        prog = vn2 - (v[0] * wnew[0] + v[1] * wnew[1] + v[2] * wnew[2])
        if repeat or prog <= 1e-12 * vn2 + 1e-18:
            break
        seen[nseen] = key
        nseen += 1
        sa[m] = wa[ia]
        sb[m] = wb[ib]
        w[m] = wnew
        m += 1
        v, lam, mask = _project_origin(w, m)
        nm = 0
        for i in range(m):
            if mask & (1 << i):
                sa[nm] = sa[i]
                sb[nm] = sb[i]
                w[nm] = w[i]
                lam[nm] = lam[i]
                nm += 1
        for i in range(nm, 4):
            lam[i] = 0.0
        m = nm
    else:
        return 2, 0.0, zero3, zero3, zero3, sa, sb, m

    vn = np.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2)
    if vn < TOUCH_EPS:
        return 1, 0.0, zero3, zero3, zero3, sa, sb, m
    pa = np.zeros(3)
    pb = np.zeros(3)
    for i in range(m):
        pa += lam[i] * sa[i]
        pb += lam[i] * sb[i]
    axis = -v / vn
    return 0, vn, pa, pb, axis, sa, sb, m


@njit(cache=True)
def _try_add(va, vb, w, n, wa, wb, d):
    """Append the support point along d if it is new; returns new count."""
    ia = _support(wa, d)
    ib = _support(wb, -d)
    cand = wa[ia] - wb[ib]
    for i in range(n):
        dx = cand[0] - w[i, 0]
        dy = cand[1] - w[i, 1]
        dz = cand[2] - w[i, 2]
        if dx * dx + dy * dy + dz * dz < 1e-24:
            return n
    va[n] = wa[ia]
    vb[n] = wb[ib]
    w[n] = cand
    return n + 1


@njit(cache=True)
def epa_core(wa, wb, sa, sb, m):
    """Penetration depth for overlapping hulls by expanding polytope.

    Returns (status, depth, witness_a, witness_b, axis); axis is the
    minimum-translation direction for B.
    """
    va = np.zeros((_MAXV, 3))
    vb = np.zeros((_MAXV, 3))
    w = np.zeros((_MAXV, 3))
    zero3 = np.zeros(3)
    n = 0
    for i in range(m):
        cand = sa[i] - sb[i]
        dup = False
        for j in range(n):
            dx = cand[0] - w[j, 0]
            dy = cand[1] - w[j, 1]
            dz = cand[2] - w[j, 2]
            if dx * dx + dy * dy + dz * dz < 1e-24:
                dup = True
                break
        if not dup:
            va[n] = sa[i]
            vb[n] = sb[i]
            w[n] = cand
            n += 1

    # grow a degenerate terminal simplex into a non-flat tetrahedron
    dirs = np.zeros((12, 3))
    nd = 0
    if n == 2:
        seg = w[1] - w[0]
        amin = 0
        if abs(seg[1]) < abs(seg[amin]):
            amin = 1
        if abs(seg[2]) < abs(seg[amin]):
            amin = 2
        ref = np.zeros(3)
        ref[amin] = 1.0
        perp = np.cross(seg, ref)
        perp2 = np.cross(seg, perp)
        dirs[0] = perp
        dirs[1] = -perp
        dirs[2] = perp2
        dirs[3] = -perp2
        nd = 4
    elif n == 3:
        nrm = np.cross(w[1] - w[0], w[2] - w[0])
        dirs[0] = nrm
        dirs[1] = -nrm
        nd = 2
    for axi in range(3):
        for sgn in range(2):
            dirs[nd] = 0.0
            dirs[nd, axi] = 1.0 if sgn == 0 else -1.0
            nd += 1

    k = 0
    while n < 4 and k < nd:
        n_new = _try_add(va, vb, w, n, wa, wb, dirs[k])
        if n_new == 4:
            vol = np.abs(
                np.linalg.det(
                    np.stack((w[1] - w[0], w[2] - w[0], w[3] - w[0]))
                )
            )
            if vol < 1e-18:
                n_new = 3
        elif n_new == 3:
            ar = np.cross(w[1] - w[0], w[2] - w[0])
            if ar[0] ** 2 + ar[1] ** 2 + ar[2] ** 2 < 1e-28:
                n_new = 2
        n = n_new
        k += 1
    if n < 4:
        return 3, 0.0, zero3, zero3, zero3

    interior = (w[0] + w[1] + w[2] + w[3]) / 4.0

    fidx = np.zeros((_MAXF, 3), np.int64)
    fn = np.zeros((_MAXF, 3))
    foff = np.zeros(_MAXF)
    alive = np.zeros(_MAXF, np.bool_)
    nf = 0

    def_ok = True
    tris = np.array([[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]], np.int64)
    for t in range(4):
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        nrm = np.cross(w[i1] - w[i0], w[i2] - w[i1])
        nn = np.sqrt(nrm[0] ** 2 + nrm[1] ** 2 + nrm[2] ** 2)
        if nn < 1e-16:
            def_ok = False
            break
        nrm = nrm / nn
        if (
            nrm[0] * (w[i0, 0] - interior[0])
            + nrm[1] * (w[i0, 1] - interior[1])
            + nrm[2] * (w[i0, 2] - interior[2])
        ) < 0.0:
            nrm = -nrm
            i1, i2 = i2, i1
        fidx[nf, 0] = i0
        fidx[nf, 1] = i1
        fidx[nf, 2] = i2
        fn[nf] = nrm
        foff[nf] = nrm[0] * w[i0, 0] + nrm[1] * w[i0, 1] + nrm[2] * w[i0, 2]
        alive[nf] = True
        nf += 1
    if not def_ok:
        return 3, 0.0, zero3, zero3, zero3

    edges = np.zeros((3 * 64, 2), np.int64)

    for _ in range(EPA_MAX_EXPANSIONS):
        fmin = -1
        omin = 1e300
        for f in range(nf):
            if alive[f] and foff[f] < omin:
                omin = foff[f]
                fmin = f
        if fmin < 0:
            return 3, 0.0, zero3, zero3, zero3
        nrm = fn[fmin]
        ia = _support(wa, nrm)
        ib = _support(wb, -nrm)
        pa = wa[ia]
        pb = wb[ib]
        wnew = pa - pb
        growth = nrm[0] * wnew[0] + nrm[1] * wnew[1] + nrm[2] * wnew[2] - omin
        if growth <= 1e-10:
            break
        ne = 0
        any_visible = False
        for f in range(nf):
            if not alive[f]:
                continue
            if (
                fn[f, 0] * wnew[0] + fn[f, 1] * wnew[1] + fn[f, 2] * wnew[2]
                > foff[f] + 1e-12
            ):
                any_visible = True
                alive[f] = False
                for e in range(3):
                    a0 = fidx[f, e]
                    a1 = fidx[f, (e + 1) % 3]
                    # cancel against an existing opposite edge, else add
                    found = -1
                    for q in range(ne):
                        if (edges[q, 0] == a1 and edges[q, 1] == a0) or (
                            edges[q, 0] == a0 and edges[q, 1] == a1
                        ):
                            found = q
                            break
                    if found >= 0:
                        edges[found] = edges[ne - 1]
                        ne -= 1
                    else:
                        if ne >= edges.shape[0]:
                            return 3, 0.0, zero3, zero3, zero3
                        edges[ne, 0] = a0
                        edges[ne, 1] = a1
                        ne += 1
        if not any_visible:
            break
        if n >= _MAXV or nf + ne > _MAXF:
            return 2, 0.0, zero3, zero3, zero3
        va[n] = pa
        vb[n] = pb
        w[n] = wnew
        wi = n
        n += 1
        added = False
        for q in range(ne):
            i0, i1 = edges[q, 0], edges[q, 1]
            nrm2 = np.cross(w[i1] - w[i0], w[wi] - w[i1])
            nn = np.sqrt(nrm2[0] ** 2 + nrm2[1] ** 2 + nrm2[2] ** 2)
            if nn < 1e-18:
                continue
            nrm2 = nrm2 / nn
            if (
                nrm2[0] * (w[i0, 0] - interior[0])
                + nrm2[1] * (w[i0, 1] - interior[1])
                + nrm2[2] * (w[i0, 2] - interior[2])
            ) < 0.0:
                nrm2 = -nrm2
            fidx[nf, 0] = i0
            fidx[nf, 1] = i1
            fidx[nf, 2] = wi
            fn[nf] = nrm2
            foff[nf] = (
                nrm2[0] * w[i0, 0] + nrm2[1] * w[i0, 1] + nrm2[2] * w[i0, 2]
            )
            alive[nf] = True
            nf += 1
            added = True
        if not added:
            return 3, 0.0, zero3, zero3, zero3
    else:
        return 2, 0.0, zero3, zero3, zero3

    # the minimum-offset plane can project the origin outside its triangle;
    # take the true closest boundary point over all remaining faces so the
    # witness barycentrics (and hence the pose gradients) are exact
    best_d2 = 1e300
    best_f = -1
    best_lam = np.zeros(4)
    best_cand = np.zeros(3)
    pts = np.zeros((4, 3))
    for f in range(nf):
        if not alive[f]:
            continue
        pts[0] = w[fidx[f, 0]]
        pts[1] = w[fidx[f, 1]]
        pts[2] = w[fidx[f, 2]]
        cand, lam, _mask = _project_origin(pts, 3)
        d2 = cand[0] ** 2 + cand[1] ** 2 + cand[2] ** 2
        if d2 < best_d2:
            best_d2 = d2
            best_f = f
            best_lam = lam.copy()
            best_cand = cand.copy()
    if best_f < 0:
        return 3, 0.0, zero3, zero3, zero3
    depth = np.sqrt(best_d2)
    i0, i1, i2 = fidx[best_f, 0], fidx[best_f, 1], fidx[best_f, 2]
    l0, l1, l2 = best_lam[0], best_lam[1], best_lam[2]
    pa = l0 * va[i0] + l1 * va[i1] + l2 * va[i2]
    pb = l0 * vb[i0] + l1 * vb[i1] + l2 * vb[i2]
    if depth > 1e-12:
        nrm = best_cand / depth
    else:
        nrm = fn[best_f].copy()
        depth = 0.0
    return 0, depth, pa, pb, nrm
