"""Hot-path kernels, JIT-compiled with numba when available.

The numpy fallbacks are the reference semantics; the numba versions must
match them bit-for-bit (same operations, same clamping rules).
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return deco


@njit(cache=True)
def fk_points(ext, pitch, yaw, base_pos, base_rot, subunits, seg_len):
    """Chain of subunit joints; every subunit of unit k repeats (pitch_k, yaw_k)."""
    n = pitch.shape[0]
    pts = np.empty((n * subunits + 1, 3))
    rot = base_rot.copy()
    pos = base_pos + ext * base_rot[:, 0]
    pts[0] = pos
    idx = 1
    for k in range(n):
        ct, st = np.cos(pitch[k]), np.sin(pitch[k])
        cf, sf = np.cos(yaw[k]), np.sin(yaw[k])
        # pitch about the local lateral axis, then yaw about the pitched vertical
        q = np.empty((3, 3))
        q[0, 0] = ct * cf
        q[0, 1] = -ct * sf
        q[0, 2] = -st
        q[1, 0] = sf
        q[1, 1] = cf
        q[1, 2] = 0.0
        q[2, 0] = st * cf
        q[2, 1] = -st * sf
        q[2, 2] = ct
        for _ in range(subunits):
            rot = rot @ q
            pos = pos + seg_len * rot[:, 0]
            pts[idx] = pos
            idx += 1
    return pts


@njit(cache=True)
def trilinear_clearance(values, origin, resolution, bounds_max, pts):
    """Clamped trilinear interpolation; points outside bounds read 0."""
    n = pts.shape[0]
    out = np.empty(n)
    nx, ny, nz = values.shape
    for p in range(n):
        x, y, z = pts[p, 0], pts[p, 1], pts[p, 2]
        if (
            x < origin[0]
            or y < origin[1]
            or z < origin[2]
            or x > bounds_max[0]
            or y > bounds_max[1]
            or z > bounds_max[2]
        ):
            out[p] = 0.0
            continue
        u = (x - origin[0]) / resolution - 0.5
        v = (y - origin[1]) / resolution - 0.5
        w = (z - origin[2]) / resolution - 0.5
        i0 = int(np.floor(u))
        j0 = int(np.floor(v))
        k0 = int(np.floor(w))
        i0 = min(max(i0, 0), max(nx - 2, 0))
        j0 = min(max(j0, 0), max(ny - 2, 0))
        k0 = min(max(k0, 0), max(nz - 2, 0))
        fx = min(max(u - i0, 0.0), 1.0)
        fy = min(max(v - j0, 0.0), 1.0)
        fz = min(max(w - k0, 0.0), 1.0)
        i1 = min(i0 + 1, nx - 1)
        j1 = min(j0 + 1, ny - 1)
        k1 = min(k0 + 1, nz - 1)
        c00 = values[i0, j0, k0] * (1 - fx) + values[i1, j0, k0] * fx
        c01 = values[i0, j0, k1] * (1 - fx) + values[i1, j0, k1] * fx
        c10 = values[i0, j1, k0] * (1 - fx) + values[i1, j1, k0] * fx
        c11 = values[i0, j1, k1] * (1 - fx) + values[i1, j1, k1] * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        out[p] = c0 * (1 - fz) + c1 * fz
    return out


@njit(cache=True)
def sphere_chain_clear(values, origin, resolution, bounds_max, pts, radius):
    """True when every body sphere clears blades and no far pair touches."""
    cl = trilinear_clearance(values, origin, resolution, bounds_max, pts)
    n = pts.shape[0]
    for p in range(n):
        if cl[p] <= radius:
            return False
    threshold = 4.0 * radius * radius
    for i in range(n):
        for j in range(i + 3, n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            dz = pts[i, 2] - pts[j, 2]
            if dx * dx + dy * dy + dz * dz <= threshold:
                return False
    return True


@njit(cache=True)
def polyline_signature(pts, beam_x, beam_z0, beam_z1):
    """Reduced word of signed beam letters crossed by an (n, 2) polyline.

    Letter k+1 is beam k crossed left-to-right, negative for the reverse;
    a point exactly on a beam counts as lying on its right side.
    """
    nseg = pts.shape[0] - 1
    nb = beam_x.shape[0]
    stack = np.empty(nseg * nb + 1, dtype=np.int64)
    top = 0
    t_loc = np.empty(nb)
    l_loc = np.empty(nb, dtype=np.int64)
    for s in range(nseg):
        px, pz = pts[s, 0], pts[s, 1]
        qx, qz = pts[s + 1, 0], pts[s + 1, 1]
        m = 0
        for b in range(nb):
            bx = beam_x[b]
            p_right = px >= bx
            q_right = qx >= bx
            if p_right == q_right:
                continue
            t = (bx - px) / (qx - px)
            z = pz + t * (qz - pz)
            if z < beam_z0[b] or z > beam_z1[b]:
                continue
            letter = b + 1 if q_right else -(b + 1)
            t_loc[m] = t
            l_loc[m] = letter
            m += 1
        # insertion sort the few crossings of this segment by parameter
        for i in range(1, m):
            ti, li = t_loc[i], l_loc[i]
            j = i - 1
            while j >= 0 and t_loc[j] > ti:
                t_loc[j + 1] = t_loc[j]
                l_loc[j + 1] = l_loc[j]
                j -= 1
            t_loc[j + 1] = ti
            l_loc[j + 1] = li
        for i in range(m):
            lt = l_loc[i]
            if top > 0 and stack[top - 1] == -lt:
                top -= 1
            else:
                stack[top] = lt
                top += 1
    return stack[:top].copy()


@njit(cache=True)
def vec_within(vec, lo, hi, tol):
    for i in range(vec.shape[0]):
        if vec[i] < lo[i] - tol or vec[i] > hi[i] + tol:
            return False
    return True


def warmup() -> None:
    """Trigger JIT compilation (or cache load) of all kernels."""
    pts = fk_points(0.1, np.zeros(2), np.zeros(2), np.zeros(3), np.eye(3), 2, 0.1)
    values = np.ones((2, 2, 2))
    origin = np.zeros(3)
    bmax = np.ones(3)
    trilinear_clearance(values, origin, 0.5, bmax, pts)
    sphere_chain_clear(values, origin, 0.5, bmax, pts, 0.01)
    polyline_signature(
        np.zeros((2, 2)), np.zeros(1), np.zeros(1), np.ones(1)
    )
    vec_within(np.zeros(3), -np.ones(3), np.ones(3), 1e-9)
