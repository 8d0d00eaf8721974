"""Exact ray/pixel intersection kernels (Siddon-style traversal).

Each ray is parametrized as S + t*(D - S) for t in [0, 1]. Both backends
collect the parameter values where the ray crosses grid lines, then turn
consecutive crossing pairs into (pixel index, intersection length) entries
using the segment midpoint. The loop version merges the two pre-sorted
crossing streams; the numpy version concatenates and sorts. Both drop
degenerate corner segments the same way, so their outputs agree.
"""

import numpy as np

from ._accel import HAVE_NUMBA, njit

# A ray can cross at most n+1 vertical and n+1 horizontal grid lines.
_REL_TOL = 1e-14


def max_entries_per_ray(n):
    return 2 * n + 3


def _trace_rays_loops(src, dst, n, x0, ps, cols, vals, counts):
    """Fill per-ray scratch rows with (pixel, length) entries.

    ``cols``/``vals`` have shape (n_rays, max_entries_per_ray(n));
    ``counts`` receives the number of entries per ray.
    """
    extent = n * ps
    for ray in range(src.shape[0]):
        sx = src[ray, 0]
        sy = src[ray, 1]
        dx = dst[ray, 0] - sx
        dy = dst[ray, 1] - sy
        length = np.sqrt(dx * dx + dy * dy)
        counts[ray] = 0
        if length == 0.0:
            continue

        t_lo = 0.0
        t_hi = 1.0
        if dx != 0.0:
            ta = (x0 - sx) / dx
            tb = (x0 + extent - sx) / dx
            if ta > tb:
                ta, tb = tb, ta
            if ta > t_lo:
                t_lo = ta
            if tb < t_hi:
                t_hi = tb
        elif sx <= x0 or sx >= x0 + extent:
            continue
        if dy != 0.0:
            ta = (x0 - sy) / dy
            tb = (x0 + extent - sy) / dy
            if ta > tb:
                ta, tb = tb, ta
            if ta > t_lo:
                t_lo = ta
            if tb < t_hi:
                t_hi = tb
        elif sy <= x0 or sy >= x0 + extent:
            continue
        if t_lo >= t_hi:
            continue

        # Crossing parameters per axis, ascending in t.
        if dx > 0.0:
            ix_first, ix_last, ix_step = 0, n + 1, 1
        else:
            ix_first, ix_last, ix_step = n, -1, -1
        if dy > 0.0:
            iy_first, iy_last, iy_step = 0, n + 1, 1
        else:
            iy_first, iy_last, iy_step = n, -1, -1

        tol = _REL_TOL * (t_hi - t_lo)
        count = 0
        t_prev = t_lo
        ix = ix_first
        iy = iy_first
        tx = np.inf
        ty = np.inf
        if dx != 0.0:
            while ix != ix_last:
                cand = (x0 + ix * ps - sx) / dx
                if cand > t_lo:
                    tx = cand
                    break
                ix += ix_step
        if dy != 0.0:
            while iy != iy_last:
                cand = (x0 + iy * ps - sy) / dy
                if cand > t_lo:
                    ty = cand
                    break
                iy += iy_step

        while True:
            if tx < ty:
                t_next = tx
            else:
                t_next = ty
            if t_next >= t_hi:
                t_next = t_hi
                done = True
            else:
                done = False

            if t_next - t_prev > tol:
                tm = 0.5 * (t_prev + t_next)
                px = int((sx + tm * dx - x0) / ps)
                py = int((sy + tm * dy - x0) / ps)
                if px < 0:
                    px = 0
                elif px > n - 1:
                    px = n - 1
                if py < 0:
                    py = 0
                elif py > n - 1:
                    py = n - 1
                cols[ray, count] = py * n + px
                vals[ray, count] = (t_next - t_prev) * length
                count += 1
            t_prev = t_next
            if done:
                break
            if tx < ty:
                ix += ix_step
                if ix == ix_last or dx == 0.0:
                    tx = np.inf
                else:
                    tx = (x0 + ix * ps - sx) / dx
            else:
                iy += iy_step
                if iy == iy_last or dy == 0.0:
                    ty = np.inf
                else:
                    ty = (x0 + iy * ps - sy) / dy
        counts[ray] = count


if HAVE_NUMBA:
    _trace_rays_loops = njit(cache=True)(_trace_rays_loops)


def _trace_ray_numpy(sx, sy, ex, ey, n, x0, ps):
    """Single-ray crossing computation, vectorized over grid lines."""
    dx = ex - sx
    dy = ey - sy
    length = np.hypot(dx, dy)
    if length == 0.0:
        return None
    extent = n * ps

    t_lo, t_hi = 0.0, 1.0
    if dx != 0.0:
        ta = (x0 - sx) / dx
        tb = (x0 + extent - sx) / dx
        t_lo = max(t_lo, min(ta, tb))
        t_hi = min(t_hi, max(ta, tb))
    elif sx <= x0 or sx >= x0 + extent:
        return None
    if dy != 0.0:
        ta = (x0 - sy) / dy
        tb = (x0 + extent - sy) / dy
        t_lo = max(t_lo, min(ta, tb))
        t_hi = min(t_hi, max(ta, tb))
    elif sy <= x0 or sy >= x0 + extent:
        return None
    if t_lo >= t_hi:
        return None

    planes = x0 + np.arange(n + 1) * ps
    parts = [np.array([t_lo, t_hi])]
    if dx != 0.0:
        tx = (planes - sx) / dx
        parts.append(tx[(tx > t_lo) & (tx < t_hi)])
    if dy != 0.0:
        ty = (planes - sy) / dy
        parts.append(ty[(ty > t_lo) & (ty < t_hi)])
    t = np.sort(np.concatenate(parts))

    seg = np.diff(t)
    keep = seg > _REL_TOL * (t_hi - t_lo)
    if not np.any(keep):
        return None
    tm = 0.5 * (t[:-1] + t[1:])[keep]
    px = np.clip(((sx + tm * dx - x0) / ps).astype(np.int64), 0, n - 1)
    py = np.clip(((sy + tm * dy - x0) / ps).astype(np.int64), 0, n - 1)
    return py * n + px, seg[keep] * length


def siddon_csr_numpy(src, dst, n, x0, ps):
    """CSR triple (indptr, indices, data) for a batch of rays, numpy path."""
    n_rays = src.shape[0]
    indptr = np.zeros(n_rays + 1, dtype=np.int64)
    cols_list = []
    vals_list = []
    for ray in range(n_rays):
        out = _trace_ray_numpy(src[ray, 0], src[ray, 1], dst[ray, 0], dst[ray, 1], n, x0, ps)
        if out is None:
            indptr[ray + 1] = indptr[ray]
            continue
        cols, vals = out
        indptr[ray + 1] = indptr[ray] + len(cols)
        cols_list.append(cols)
        vals_list.append(vals)
    if cols_list:
        indices = np.concatenate(cols_list)
        data = np.concatenate(vals_list)
    else:
        indices = np.zeros(0, dtype=np.int64)
        data = np.zeros(0, dtype=np.float64)
    return indptr, indices, data


def siddon_csr_loops(src, dst, n, x0, ps, chunk=16384):
    """CSR triple for a batch of rays, loop/numba path (chunked scratch)."""
    n_rays = src.shape[0]
    maxk = max_entries_per_ray(n)
    indptr = np.zeros(n_rays + 1, dtype=np.int64)
    parts_idx = []
    parts_val = []
    for lo in range(0, n_rays, chunk):
        hi = min(lo + chunk, n_rays)
        m = hi - lo
        cols = np.empty((m, maxk), dtype=np.int64)
        vals = np.empty((m, maxk), dtype=np.float64)
        counts = np.empty(m, dtype=np.int64)
        _trace_rays_loops(src[lo:hi], dst[lo:hi], n, x0, ps, cols, vals, counts)
        indptr[lo + 1 : hi + 1] = np.cumsum(counts) + indptr[lo]
        mask = np.arange(maxk)[None, :] < counts[:, None]
        parts_idx.append(cols[mask])
        parts_val.append(vals[mask])
    if parts_idx:
        indices = np.concatenate(parts_idx)
        data = np.concatenate(parts_val)
    else:
        indices = np.zeros(0, dtype=np.int64)
        data = np.zeros(0, dtype=np.float64)
    return indptr, indices, data


siddon_csr = siddon_csr_loops if HAVE_NUMBA else siddon_csr_numpy
