"""Numba-compiled inner loops.

Every kernel here is written so each output element is produced by exactly
one sequential accumulation chain: scatter kernels run single-threaded in
scan order, gather kernels parallelize only across output elements. That
keeps results bit-identical regardless of thread count.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, nogil=True)
def splat_accumulate(x_map, y_map, valid, color, inv_depth, weight, numer, denom):
    """Scatter RGBD into a 4-tap bilinear footprint, softmax-weighted.

    numer: (H, W, 4) float64, denom: (H, W) float64, modified in place.
    Coordinates within 1e-9 of an integer are snapped so identity warps
    land exactly on single pixels.
    """
    h, w = x_map.shape
    ho, wo = denom.shape
    for y in range(h):
        for x in range(w):
            if not valid[y, x]:
                continue
            fx = x_map[y, x]
            fy = y_map[y, x]
            rfx = np.rint(fx)
            rfy = np.rint(fy)
            if abs(fx - rfx) < 1e-9:
                fx = rfx
            if abs(fy - rfy) < 1e-9:
                fy = rfy
            if fx <= -1.0 or fx >= wo or fy <= -1.0 or fy >= ho:
                continue
            x0 = int(np.floor(fx))
            y0 = int(np.floor(fy))
            ax = fx - x0
            ay = fy - y0
            sw = weight[y, x]
            r = color[y, x, 0]
            g = color[y, x, 1]
            b = color[y, x, 2]
            d = inv_depth[y, x]
            for tap in range(4):
                ty = y0 + (tap // 2)
                tx = x0 + (tap % 2)
                if ty < 0 or ty >= ho or tx < 0 or tx >= wo:
                    continue
                bw = (ax if tap % 2 else 1.0 - ax) * (ay if tap // 2 else 1.0 - ay)
                if bw == 0.0:
                    continue
                c = bw * sw
                numer[ty, tx, 0] += c * r
                numer[ty, tx, 1] += c * g
                numer[ty, tx, 2] += c * b
                numer[ty, tx, 3] += c * d
                denom[ty, tx] += c


@njit(cache=True, parallel=True, nogil=True)
def full_disocclusion_filter(p, inv_depth, mask, kernel, valid_floor, out):
    """Depth-assisted low-pass fill of fully disoccluded pixels.

    For each masked pixel, averages kernel-weighted colors of neighbors
    whose inverse depth is valid (> valid_floor) and on the background
    side of the neighborhood's valid depth range midpoint. Unmasked pixels
    copy through; masked pixels with no contributor fall back to their
    input value.
    """
    h, w, _ = p.shape
    r = kernel.shape[0] // 2
    for y in prange(h):
        for x in range(w):
            if mask[y, x] == 0:
                out[y, x, 0] = p[y, x, 0]
                out[y, x, 1] = p[y, x, 1]
                out[y, x, 2] = p[y, x, 2]
                continue
            y0 = max(0, y - r)
            y1 = min(h, y + r + 1)
            x0 = max(0, x - r)
            x1 = min(w, x + r + 1)
            dmin = np.inf
            dmax = -np.inf
            for yy in range(y0, y1):
                for xx in range(x0, x1):
                    dv = inv_depth[yy, xx]
                    if dv > valid_floor:
                        if dv < dmin:
                            dmin = dv
                        if dv > dmax:
                            dmax = dv
            acc0 = 0.0
            acc1 = 0.0
            acc2 = 0.0
            wacc = 0.0
            if dmax >= dmin:
                thr = 0.5 * (dmin + dmax)
                # <= admits uniform-depth windows (min == max) so purely
                # background neighborhoods still fill; foreground pixels
                # (dv == dmax > thr) stay excluded whenever depths differ
                for yy in range(y0, y1):
                    for xx in range(x0, x1):
                        dv = inv_depth[yy, xx]
                        if dv > valid_floor and dv <= thr:
                            kw = kernel[yy - y + r, xx - x + r]
                            acc0 += kw * p[yy, xx, 0]
                            acc1 += kw * p[yy, xx, 1]
                            acc2 += kw * p[yy, xx, 2]
                            wacc += kw
            if wacc > 0.0:
                out[y, x, 0] = acc0 / wacc
                out[y, x, 1] = acc1 / wacc
                out[y, x, 2] = acc2 / wacc
            else:
                out[y, x, 0] = p[y, x, 0]
                out[y, x, 1] = p[y, x, 1]
                out[y, x, 2] = p[y, x, 2]


@njit(cache=True, parallel=True, fastmath=True, nogil=True)
def conv3x3_relu(x, weights, bias, relu, out):
    """Zero-padding-semantics 3x3 convolution over channels-first float32
    maps, without materializing a padded copy.

    x: (c_in, h, w); weights: (c_out, c_in, 3, 3); out: (c_out, h, w).
    Interior columns use fused row-slice expressions (vectorized along the
    row, input channels unrolled four at a time); the two edge columns and
    clipped border rows fall out of the dynamic tap ranges. Every output
    row is produced by one thread in a fixed order, so results do not
    depend on the thread count.
    """
    c_out, h, wd = out.shape
    c_in = x.shape[0]
    for y in prange(h):
        dy0 = -1 if y > 0 else 0
        dy1 = 1 if y < h - 1 else 0
        if wd < 3:
            for co in range(c_out):
                for j in range(wd):
                    a = bias[co]
                    for ci in range(c_in):
                        for dy in range(dy0, dy1 + 1):
                            for dx in range(-1, 2):
                                jj = j + dx
                                if 0 <= jj < wd:
                                    a += x[ci, y + dy, jj] * weights[co, ci, dy + 1, dx + 1]
                    out[co, y, j] = max(a, np.float32(0.0)) if relu else a
            continue
        n = wd - 2
        acc = np.empty(n, dtype=np.float32)
        for co in range(c_out):
            for j in range(n):
                acc[j] = bias[co]
            ci = 0
            while ci + 4 <= c_in:
                for dy in range(dy0, dy1 + 1):
                    k = dy + 1
                    acc += (
                        x[ci, y + dy, 0:n] * weights[co, ci, k, 0]
                        + x[ci, y + dy, 1 : n + 1] * weights[co, ci, k, 1]
                        + x[ci, y + dy, 2 : n + 2] * weights[co, ci, k, 2]
                        + x[ci + 1, y + dy, 0:n] * weights[co, ci + 1, k, 0]
                        + x[ci + 1, y + dy, 1 : n + 1] * weights[co, ci + 1, k, 1]
                        + x[ci + 1, y + dy, 2 : n + 2] * weights[co, ci + 1, k, 2]
                        + x[ci + 2, y + dy, 0:n] * weights[co, ci + 2, k, 0]
                        + x[ci + 2, y + dy, 1 : n + 1] * weights[co, ci + 2, k, 1]
                        + x[ci + 2, y + dy, 2 : n + 2] * weights[co, ci + 2, k, 2]
                        + x[ci + 3, y + dy, 0:n] * weights[co, ci + 3, k, 0]
                        + x[ci + 3, y + dy, 1 : n + 1] * weights[co, ci + 3, k, 1]
                        + x[ci + 3, y + dy, 2 : n + 2] * weights[co, ci + 3, k, 2]
                    )
                ci += 4
            while ci < c_in:
                for dy in range(dy0, dy1 + 1):
                    k = dy + 1
                    acc += (
                        x[ci, y + dy, 0:n] * weights[co, ci, k, 0]
                        + x[ci, y + dy, 1 : n + 1] * weights[co, ci, k, 1]
                        + x[ci, y + dy, 2 : n + 2] * weights[co, ci, k, 2]
                    )
                ci += 1
            a_left = bias[co]
            a_right = bias[co]
            for ci2 in range(c_in):
                for dy in range(dy0, dy1 + 1):
                    k = dy + 1
                    a_left += (
                        x[ci2, y + dy, 0] * weights[co, ci2, k, 1]
                        + x[ci2, y + dy, 1] * weights[co, ci2, k, 2]
                    )
                    a_right += (
                        x[ci2, y + dy, wd - 2] * weights[co, ci2, k, 0]
                        + x[ci2, y + dy, wd - 1] * weights[co, ci2, k, 1]
                    )
            if relu:
                out[co, y, 0] = max(a_left, np.float32(0.0))
                for j in range(n):
                    out[co, y, j + 1] = max(acc[j], np.float32(0.0))
                out[co, y, wd - 1] = max(a_right, np.float32(0.0))
            else:
                out[co, y, 0] = a_left
                for j in range(n):
                    out[co, y, j + 1] = acc[j]
                out[co, y, wd - 1] = a_right
    return out


@njit(cache=True, parallel=True, fastmath=True, nogil=True)
def avg_pool2_nchw(x, out):
    """2x2 mean pooling, (c, h, w) -> (c, h/2, w/2), single fused pass."""
    c, ho, wo = out.shape
    for idx in prange(c * ho):
        ci = idx // ho
        y = idx % ho
        r0 = x[ci, 2 * y]
        r1 = x[ci, 2 * y + 1]
        for j in range(wo):
            out[ci, y, j] = np.float32(0.25) * (
                r0[2 * j] + r0[2 * j + 1] + r1[2 * j] + r1[2 * j + 1]
            )


@njit(cache=True, parallel=True, fastmath=True, nogil=True)
def bilinear_up2_nchw(x, out):
    """2x bilinear upsampling with half-pixel centers, (c, h, w) ->
    (c, 2h, 2w), clamped edges, single fused pass."""
    c, ho, wo = out.shape
    h = x.shape[1]
    w = x.shape[2]
    q3 = np.float32(0.75)
    q1 = np.float32(0.25)
    for idx in prange(c * ho):
        ci = idx // ho
        yo = idx % ho
        yc = yo // 2
        yn = yc - 1 if yo % 2 == 0 else yc + 1
        if yn < 0:
            yn = 0
        if yn > h - 1:
            yn = h - 1
        rc = x[ci, yc]
        rn = x[ci, yn]
        orow = out[ci, yo]
        for j in range(w):
            v = q3 * rc[j] + q1 * rn[j]
            jl = j - 1 if j > 0 else 0
            jr = j + 1 if j < w - 1 else w - 1
            vl = q3 * rc[jl] + q1 * rn[jl]
            vr = q3 * rc[jr] + q1 * rn[jr]
            orow[2 * j] = q3 * v + q1 * vl
            orow[2 * j + 1] = q3 * v + q1 * vr


@njit(cache=True, parallel=True, nogil=True)
def render_layers(ray_x, ray_y, ray_z, cam_cx, cam_cy, cam_cz, plane_z, extents,
                  out_point_xy, out_inv_depth, out_label):
    """Intersect per-pixel rays with fronto-parallel layer planes.

    Layers are ordered near to far; the last one is the unbounded
    background (its extent is ignored). Writes the world-plane hit
    coordinates, exact camera-frame inverse depth, and the layer index.
    """
    h, w = ray_x.shape
    n_layers = plane_z.shape[0]
    for y in prange(h):
        for x in range(w):
            label = n_layers - 1
            for li in range(n_layers):
                dz = plane_z[li] - cam_cz
                s = dz / ray_z[y, x]
                if s <= 0.0:
                    if li == n_layers - 1:
                        out_point_xy[y, x, 0] = 0.0
                        out_point_xy[y, x, 1] = 0.0
                        out_inv_depth[y, x] = 0.0
                    continue
                px = cam_cx + s * ray_x[y, x]
                py = cam_cy + s * ray_y[y, x]
                if li == n_layers - 1 or (
                    extents[li, 0] <= px <= extents[li, 1]
                    and extents[li, 2] <= py <= extents[li, 3]
                ):
                    label = li
                    out_point_xy[y, x, 0] = px
                    out_point_xy[y, x, 1] = py
                    out_inv_depth[y, x] = ray_z[y, x] / dz
                    break
            out_label[y, x] = label
