"""Compiled inner loops for Helmholtz boundary operators and potentials.

All loops run in a fixed element order so results are bitwise reproducible.
"""

import math

import numba
import numpy as np

FOUR_PI = 4.0 * math.pi


@numba.njit(cache=True)
def _shared(ti, tj, li, lj):
    """Number of shared vertices; fills the matching local indices."""
    n = 0
    for a in range(3):
        for b in range(3):
            if ti[a] == tj[b]:
                li[n] = a
                lj[n] = b
                n += 1
    return n


@numba.njit(cache=True)
def _complete(perm, n):
    """Append the local indices not yet in perm[:n]."""
    for c in range(3):
        used = False
        for m in range(n):
            if perm[m] == c:
                used = True
        if not used:
            perm[n] = c
            n += 1


@numba.njit(cache=True)
def _points(v, t, bary):
    nt = t.shape[0]
    npt = bary.shape[0]
    out = np.empty((nt, npt, 3))
    for e in range(nt):
        for p in range(npt):
            for d in range(3):
                out[e, p, d] = (bary[p, 0] * v[t[e, 0], d] + bary[p, 1] * v[t[e, 1], d]
                                + bary[p, 2] * v[t[e, 2], d])
    return out


@numba.njit(cache=True)
def _pair_regular(i, j, XP, YP, bb, ww, xv, xt, xn, yv, yt, yn, kr, ki, Vl, Kl, Km, mirror, scratch):
    """Tensor regular rule on a pair; ``Km`` receives the mirrored double layer."""
    npt = bb.shape[0]
    ti = xt[i]
    tj = yt[j]
    y00 = yv[tj[0], 0]
    y01 = yv[tj[0], 1]
    y02 = yv[tj[0], 2]
    x00 = xv[ti[0], 0]
    x01 = xv[ti[0], 1]
    x02 = xv[ti[0], 2]
    sv_r = scratch[0]
    sv_i = scratch[1]
    sk_r = scratch[2]
    sk_i = scratch[3]
    sm_r = scratch[4]
    sm_i = scratch[5]
    hm = scratch[6]
    if mirror:
        # (y - x) . n_x is constant over the flat test triangle
        for q in range(npt):
            hm[q] = ((YP[j, q, 0] - x00) * xn[i, 0] + (YP[j, q, 1] - x01) * xn[i, 1]
                     + (YP[j, q, 2] - x02) * xn[i, 2])
    for p in range(npt):
        x0 = XP[i, p, 0]
        x1 = XP[i, p, 1]
        x2 = XP[i, p, 2]
        # (x - y) . n_y is constant over the flat trial triangle
        hn = (x0 - y00) * yn[j, 0] + (x1 - y01) * yn[j, 1] + (x2 - y02) * yn[j, 2]
        for b in range(3):
            sv_r[b] = 0.0
            sv_i[b] = 0.0
            sk_r[b] = 0.0
            sk_i[b] = 0.0
            sm_r[b] = 0.0
            sm_i[b] = 0.0
        for q in range(npt):
            d0 = x0 - YP[j, q, 0]
            d1 = x1 - YP[j, q, 1]
            d2 = x2 - YP[j, q, 2]
            r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            ir = 1.0 / r
            amp = ww[q] * math.exp(-ki * r) * ir / FOUR_PI
            g_r = amp * math.cos(kr * r)
            g_i = amp * math.sin(kr * r)
            # (ik - 1/r) = (-ki - 1/r) + i kr
            f_r = -ki - ir
            f_i = kr
            h_r = g_r * f_r - g_i * f_i
            h_i = g_r * f_i + g_i * f_r
            cn = -hn * ir
            for b in range(3):
                phi = bb[q, b]
                sv_r[b] += g_r * phi
                sv_i[b] += g_i * phi
                sk_r[b] += cn * h_r * phi
                sk_i[b] += cn * h_i * phi
            if mirror:
                cm = -hm[q] * ir
                for b in range(3):
                    phi = bb[q, b]
                    sm_r[b] += cm * h_r * phi
                    sm_i[b] += cm * h_i * phi
        for a in range(3):
            wa = ww[p] * bb[p, a]
            for b in range(3):
                Vl[a, b] += wa * complex(sv_r[b], sv_i[b])
                Kl[a, b] += wa * complex(sk_r[b], sk_i[b])
                if mirror:
                    Km[a, b] += wa * complex(sm_r[b], sm_i[b])


@numba.njit(cache=True)
def assemble_vkd(
    xv, xt, xn, xa, xh, xcurl,
    yv, yt, yn, ya, yh, ycurl,
    k, same,
    reg_b, reg_w, near_b, near_w, near_dist,
    sing_xb, sing_yb, sing_w, sing_off,
):
    """Galerkin matrices of single layer, double layer and hypersingular.

    ``x*`` describe the test mesh and ``y*`` the trial mesh: vertices,
    triangles, unit normals, areas, diameters and the surface curls of the
    three P1 basis functions on each triangle (``(t, 3, 3)``). When ``same``
    is true both meshes are the same object: shared vertices trigger the
    singular rules ``sing_*`` (slices ``sing_off[c]:sing_off[c+1]`` for
    ``c`` = shared vertex count - 1) and each unordered pair is visited once,
    the mirrored contribution coming from the test-side normal derivative.
    """
    nx = xv.shape[0]
    ny = yv.shape[0]
    V = np.zeros((nx, ny), dtype=np.complex128)
    K = np.zeros((nx, ny), dtype=np.complex128)
    D = np.zeros((nx, ny), dtype=np.complex128)
    ik = 1j * k
    k2 = k * k
    kr = k.real
    ki = k.imag

    ntx = xt.shape[0]
    nty = yt.shape[0]
    xc = np.zeros((ntx, 3))
    for i in range(ntx):
        for d in range(3):
            xc[i, d] = (xv[xt[i, 0], d] + xv[xt[i, 1], d] + xv[xt[i, 2], d]) / 3.0
    yc = np.zeros((nty, 3))
    for j in range(nty):
        for d in range(3):
            yc[j, d] = (yv[yt[j, 0], d] + yv[yt[j, 1], d] + yv[yt[j, 2], d]) / 3.0

    xr = _points(xv, xt, reg_b)
    yr = _points(yv, yt, reg_b)
    xnr = _points(xv, xt, near_b)
    ynr = _points(yv, yt, near_b)

    Vl = np.zeros((3, 3), dtype=np.complex128)
    Kl = np.zeros((3, 3), dtype=np.complex128)
    Km = np.zeros((3, 3), dtype=np.complex128)
    li = np.zeros(3, dtype=np.int64)
    lj = np.zeros(3, dtype=np.int64)
    pi_ = np.zeros(3, dtype=np.int64)
    pj_ = np.zeros(3, dtype=np.int64)
    px = np.zeros(3)
    py = np.zeros(3)
    scratch = np.zeros((7, max(reg_b.shape[0], near_b.shape[0], 3)))

    for i in range(ntx):
        ti = xt[i]
        j0 = i if same else 0
        for j in range(j0, nty):
            tj = yt[j]
            mirror = same and j != i
            for a in range(3):
                for b in range(3):
                    Vl[a, b] = 0.0
                    Kl[a, b] = 0.0
                    Km[a, b] = 0.0
            nsh = 0
            if same:
                nsh = _shared(ti, tj, li, lj)
            if nsh > 0:
                for m in range(nsh):
                    pi_[m] = li[m]
                    pj_[m] = lj[m]
                _complete(pi_, nsh)
                _complete(pj_, nsh)
                s0 = sing_off[nsh - 1]
                s1 = sing_off[nsh]
                for q in range(s0, s1):
                    for d in range(3):
                        px[d] = (sing_xb[q, 0] * xv[ti[pi_[0]], d] + sing_xb[q, 1] * xv[ti[pi_[1]], d]
                                 + sing_xb[q, 2] * xv[ti[pi_[2]], d])
                        py[d] = (sing_yb[q, 0] * yv[tj[pj_[0]], d] + sing_yb[q, 1] * yv[tj[pj_[1]], d]
                                 + sing_yb[q, 2] * yv[tj[pj_[2]], d])
                    d0 = px[0] - py[0]
                    d1 = px[1] - py[1]
                    d2 = px[2] - py[2]
                    r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                    g = sing_w[q] * 4.0 * np.exp(ik * r) / (FOUR_PI * r)
                    h = g * (ik - 1.0 / r) / r
                    gk = -h * (d0 * yn[j, 0] + d1 * yn[j, 1] + d2 * yn[j, 2])
                    gm = h * (d0 * xn[i, 0] + d1 * xn[i, 1] + d2 * xn[i, 2])
                    for a in range(3):
                        for b in range(3):
                            wab = sing_xb[q, a] * sing_yb[q, b]
                            Vl[pi_[a], pj_[b]] += g * wab
                            Kl[pi_[a], pj_[b]] += gk * wab
                            Km[pi_[a], pj_[b]] += gm * wab
            else:
                dc0 = xc[i, 0] - yc[j, 0]
                dc1 = xc[i, 1] - yc[j, 1]
                dc2 = xc[i, 2] - yc[j, 2]
                dist = math.sqrt(dc0 * dc0 + dc1 * dc1 + dc2 * dc2)
                if dist < near_dist * max(xh[i], yh[j]):
                    _pair_regular(i, j, xnr, ynr, near_b, near_w, xv, xt, xn, yv, yt, yn, kr, ki,
                                  Vl, Kl, Km, mirror, scratch)
                else:
                    _pair_regular(i, j, xr, yr, reg_b, reg_w, xv, xt, xn, yv, yt, yn, kr, ki,
                                  Vl, Kl, Km, mirror, scratch)

            scale = xa[i] * ya[j]
            gint = 0.0j
            for a in range(3):
                for b in range(3):
                    gint += Vl[a, b]
            nn = xn[i, 0] * yn[j, 0] + xn[i, 1] * yn[j, 1] + xn[i, 2] * yn[j, 2]
            for a in range(3):
                ra = ti[a]
                for b in range(3):
                    cb = tj[b]
                    cc = (xcurl[i, a, 0] * ycurl[j, b, 0] + xcurl[i, a, 1] * ycurl[j, b, 1]
                          + xcurl[i, a, 2] * ycurl[j, b, 2])
                    v = scale * Vl[a, b]
                    dd = scale * (cc * gint - k2 * nn * Vl[a, b])
                    V[ra, cb] += v
                    K[ra, cb] += scale * Kl[a, b]
                    D[ra, cb] += dd
                    if mirror:
                        V[cb, ra] += v
                        K[cb, ra] += scale * Km[a, b]
                        D[cb, ra] += dd
    return V, K, D


@numba.njit(cache=True)
def potentials(yv, yt, yn, ya, ydiam, rules, offsets, near_factor, k, targets, sl_density, dl_density):
    """Single-layer potential of ``sl_density`` and double-layer potential of
    ``dl_density`` (P1 coefficients) at each target point.

    ``rules`` stacks composite barycentric rules (columns b0, b1, b2, w) for
    0, 1, 2, ... uniform refinements; ``offsets`` delimits them. Elements
    close to a target use the refined rules.
    """
    nt = yt.shape[0]
    ntg = targets.shape[0]
    n_levels = offsets.shape[0] - 1
    sl = np.zeros(ntg, dtype=np.complex128)
    dl = np.zeros(ntg, dtype=np.complex128)
    ik = 1j * k
    for p in range(ntg):
        x0 = targets[p, 0]
        x1 = targets[p, 1]
        x2 = targets[p, 2]
        acc_s = 0.0j
        acc_d = 0.0j
        for e in range(nt):
            te = yt[e]
            a0 = yv[te[0]]
            a1 = yv[te[1]]
            a2 = yv[te[2]]
            c0 = (a0[0] + a1[0] + a2[0]) / 3.0 - x0
            c1 = (a0[1] + a1[1] + a2[1]) / 3.0 - x1
            c2 = (a0[2] + a1[2] + a2[2]) / 3.0 - x2
            dist = math.sqrt(c0 * c0 + c1 * c1 + c2 * c2) - ydiam[e]
            level = 0
            reach = near_factor * ydiam[e]
            while level < n_levels - 1 and dist < reach:
                level += 1
                reach *= 0.5
            hn = (x0 - a0[0]) * yn[e, 0] + (x1 - a0[1]) * yn[e, 1] + (x2 - a0[2]) * yn[e, 2]
            s0 = sl_density[te[0]]
            s1 = sl_density[te[1]]
            s2 = sl_density[te[2]]
            u0 = dl_density[te[0]]
            u1 = dl_density[te[1]]
            u2 = dl_density[te[2]]
            for q in range(offsets[level], offsets[level + 1]):
                b0 = rules[q, 0]
                b1 = rules[q, 1]
                b2 = rules[q, 2]
                d0 = x0 - (b0 * a0[0] + b1 * a1[0] + b2 * a2[0])
                d1 = x1 - (b0 * a0[1] + b1 * a1[1] + b2 * a2[1])
                d2 = x2 - (b0 * a0[2] + b1 * a1[2] + b2 * a2[2])
                r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                g = rules[q, 3] * ya[e] * np.exp(ik * r) / (FOUR_PI * r)
                gk = -g * (ik - 1.0 / r) * hn / r
                acc_s += g * (b0 * s0 + b1 * s1 + b2 * s2)
                acc_d += gk * (b0 * u0 + b1 * u1 + b2 * u2)
        sl[p] = acc_s
        dl[p] = acc_d
    return sl, dl


@numba.njit(cache=True)
def _closest_on_triangle(p, a, b, c):
    # squared distance from p to triangle abc (Voronoi region walk)
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = ab @ ap
    d2 = ac @ ap
    if d1 <= 0.0 and d2 <= 0.0:
        q = a
    else:
        bp = p - b
        d3 = ab @ bp
        d4 = ac @ bp
        if d3 >= 0.0 and d4 <= d3:
            q = b
        else:
            vc = d1 * d4 - d3 * d2
            if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
                q = a + (d1 / (d1 - d3)) * ab
            else:
                cp = p - c
                d5 = ab @ cp
                d6 = ac @ cp
                if d6 >= 0.0 and d5 <= d6:
                    q = c
                else:
                    vb = d5 * d2 - d1 * d6
                    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                        q = a + (d2 / (d2 - d6)) * ac
                    else:
                        va = d3 * d6 - d5 * d4
                        if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                            q = b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b)
                        else:
                            den = 1.0 / (va + vb + vc)
                            q = a + ab * (vb * den) + ac * (vc * den)
    d = p - q
    return d @ d


@numba.njit(cache=True)
def nearest_triangle(v, t, points):
    """Distance to the closest triangle and its index, per point."""
    n = points.shape[0]
    dist = np.empty(n)
    idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = np.inf
        arg = -1
        for e in range(t.shape[0]):
            d = _closest_on_triangle(points[i], v[t[e, 0]], v[t[e, 1]], v[t[e, 2]])
            if d < best:
                best = d
                arg = e
        dist[i] = math.sqrt(best)
        idx[i] = arg
    return dist, idx


@numba.njit(cache=True)
def ray_crossings(v, t, points, direction):
    """Number of triangles hit by the ray ``p + s d`` (s > 0), per point."""
    n = points.shape[0]
    out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        o = points[i]
        for e in range(t.shape[0]):
            a = v[t[e, 0]]
            e1 = v[t[e, 1]] - a
            e2 = v[t[e, 2]] - a
            pv = np.cross(direction, e2)
            det = e1 @ pv
            if abs(det) < 1e-300:
                continue
            inv = 1.0 / det
            tv = o - a
            u = (tv @ pv) * inv
            if u < 0.0 or u > 1.0:
                continue
            qv = np.cross(tv, e1)
            w = (direction @ qv) * inv
            if w < 0.0 or u + w > 1.0:
                continue
            if (e2 @ qv) * inv > 0.0:
                out[i] += 1
    return out
