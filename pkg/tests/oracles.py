"""Independent brute-force reference implementations.

Nothing here imports computational helpers from the package; every oracle is
written from the definition with explicit loops or a different numeric route.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------- imaging


def warp_nearest_loop(img, m, width, height):
    """Per-pixel inverse mapping with nearest sampling and a validity mask."""
    inv = np.linalg.inv(np.asarray(m, dtype=np.float64))
    h, w = img.shape[:2]
    out = np.zeros((height, width) + img.shape[2:], dtype=np.uint8)
    mask = np.zeros((height, width), dtype=bool)
    for y in range(height):
        for x in range(width):
            q = inv @ np.array([x, y, 1.0])
            sx, sy = q[0] / q[2], q[1] / q[2]
            if -1e-6 <= sx <= w - 1 + 1e-6 and -1e-6 <= sy <= h - 1 + 1e-6:
                mask[y, x] = True
                ix = min(max(int(math.floor(sx + 0.5)), 0), w - 1)
                iy = min(max(int(math.floor(sy + 0.5)), 0), h - 1)
                out[y, x] = img[iy, ix]
    return out, mask


def harris_loop(img, k=0.04, sigma=1.0, radius=2):
    """Sobel structure tensor with Gaussian window, evaluated pixel by pixel.

    Only interior pixels (border 1 + radius) are filled; the rest stay 0.
    """
    f = np.asarray(img, dtype=np.float64)
    h, w = f.shape
    gx = np.zeros_like(f)
    gy = np.zeros_like(f)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            p = f[y - 1 : y + 2, x - 1 : x + 2]
            gx[y, x] = (p[0, 2] + 2 * p[1, 2] + p[2, 2]) - (p[0, 0] + 2 * p[1, 0] + p[2, 0])
            gy[y, x] = (p[2, 0] + 2 * p[2, 1] + p[2, 2]) - (p[0, 0] + 2 * p[0, 1] + p[0, 2])
    taps = [math.exp(-0.5 * (d / sigma) ** 2) for d in range(-radius, radius + 1)]
    tot = sum(taps)
    taps = [t / tot for t in taps]
    b = 1 + radius
    out = np.zeros_like(f)
    for y in range(b, h - b):
        for x in range(b, w - b):
            a = c = e = 0.0
            for j, dy in enumerate(range(-radius, radius + 1)):
                for i, dx in enumerate(range(-radius, radius + 1)):
                    wt = taps[j] * taps[i]
                    ix, iy = gx[y + dy, x + dx], gy[y + dy, x + dx]
                    a += wt * ix * ix
                    c += wt * iy * iy
                    e += wt * ix * iy
            out[y, x] = a * c - e * e - k * (a + c) ** 2
    return out


# ---------------------------------------------------------------- matching


def nearest_loop(da, db):
    """For each row of ``da``: (index, distance) of the nearest row of ``db``, ties to lower index."""
    res = []
    for a in da:
        best_j, best_d = -1, math.inf
        for j, b in enumerate(db):
            d = math.sqrt(sum((float(u) - float(v)) ** 2 for u, v in zip(a, b)))
            if d < best_d:
                best_j, best_d = j, d
        res.append((best_j, best_d))
    return res


def mutual_pairs_loop(da, db):
    fwd = nearest_loop(da, db)
    back = nearest_loop(db, da)
    return {(i, j) for i, (j, _) in enumerate(fwd) if back[j][0] == i}


# ---------------------------------------------------------------- metrics


def edge_loop(f1, f2):
    a = np.asarray(f1)
    b = np.asarray(f2)
    n = a.shape[0]
    total = 0.0
    for i in range(n):
        total += abs(float(a[i, -1]) - float(b[i, 0]))
    return total / n


def overlap_loop(a1, a2, bins=256):
    a = np.asarray(a1).ravel().tolist()
    b = np.asarray(a2).ravel().tolist()
    n = len(a)
    d_area = sum(abs(float(x) - float(y)) for x, y in zip(a, b)) / n
    psnr = 20.0 * math.log10(255.0 / math.sqrt(d_area))
    h1 = [0.0] * bins
    h2 = [0.0] * bins
    for x in a:
        h1[min(int(x * bins // 256), bins - 1)] += 1
    for y in b:
        h2[min(int(y * bins // 256), bins - 1)] += 1
    h1 = [v / n for v in h1]
    h2 = [v / n for v in h2]
    d_euk = math.sqrt(sum((u - v) ** 2 for u, v in zip(h1, h2)))
    d_man = sum(abs(u - v) for u, v in zip(h1, h2))
    d_chi = sum((u - v) ** 2 / (u + v) for u, v in zip(h1, h2) if u + v > 0)
    return {
        "d_area": d_area,
        "psnr": psnr,
        "d_euk": d_euk,
        "d_man": d_man,
        "d_chi": d_chi,
        "om": d_area + d_euk + d_man + d_chi - psnr,
    }


def zigzag_loop(sig, thr):
    """Alternating extrema with swings of at least ``thr``; end samples excluded."""
    n = len(sig)
    if n < 3 or thr <= 0:
        return []
    found = []
    direction = None  # "up" while looking for a peak, "down" for a trough
    cand_max = cand_min = 0
    for i in range(1, n):
        v = sig[i]
        if direction is None:
            if v > sig[cand_max]:
                cand_max = i
            if v < sig[cand_min]:
                cand_min = i
            if cand_max < i and sig[cand_max] - v >= thr:
                found.append(cand_max)
                direction, cand_min = "down", i
            elif cand_min < i and v - sig[cand_min] >= thr:
                found.append(cand_min)
                direction, cand_max = "up", i
        elif direction == "up":
            if v > sig[cand_max]:
                cand_max = i
            if sig[cand_max] - v >= thr:
                found.append(cand_max)
                direction, cand_min = "down", i
        else:
            if v < sig[cand_min]:
                cand_min = i
            if v - sig[cand_min] >= thr:
                found.append(cand_min)
                direction, cand_max = "up", i
    if direction is not None and found:
        last = cand_max if direction == "up" else cand_min
        if abs(sig[last] - sig[found[-1]]) >= thr:
            found.append(last)
    return [i for i in found if 0 < i < n - 1]


def exposure_loop(img, window=15, rel=0.05):
    g = np.asarray(img)
    h, w = g.shape
    sums = [sum(float(g[r, c]) for r in range(h)) for c in range(w)]
    prof = [sum(sums[i : i + window]) / window for i in range(w - window + 1)]
    span = max(prof) - min(prof)
    if span <= 0:
        return 0.0
    ext = zigzag_loop(prof, rel * span)
    if len(ext) < 2:
        return 0.0
    diffs = [abs(prof[ext[i + 1]] - prof[ext[i]]) for i in range(len(ext) - 1)]
    return sum(diffs) / len(diffs)


def laplace_loop(img):
    g = np.asarray(img, dtype=np.float64)
    h, w = g.shape
    vals = []
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            vals.append(g[y - 1, x] + g[y + 1, x] + g[y, x - 1] + g[y, x + 1] - 4 * g[y, x])
    mu = sum(vals) / len(vals)
    return sum((v - mu) ** 2 for v in vals) / len(vals)


def fft_sharpness_dft(img, frac=0.10):
    """Mean log-magnitude outside a centred disc, via explicit DFT matrices."""
    g = np.asarray(img, dtype=np.float64)
    h, w = g.shape
    g = g - g.mean()
    fy = np.exp(-2j * np.pi * np.outer(np.arange(h), np.arange(h)) / h)
    fx = np.exp(-2j * np.pi * np.outer(np.arange(w), np.arange(w)) / w)
    spec = fy @ g @ fx.T
    r = frac * min(w, h)
    total, count = 0.0, 0
    for ky in range(h):
        for kx in range(w):
            # centred coordinates of an fftshift-ed spectrum
            cy = (ky + h // 2) % h
            cx = (kx + w // 2) % w
            if (cy - h // 2) ** 2 + (cx - w // 2) ** 2 > r * r:
                total += 20.0 * math.log10(abs(spec[ky, kx]) + 1e-9)
                count += 1
    return total / count


# ---------------------------------------------------------------- synth


def ray_march_angle(x_img, radius, distance, focal):
    """Surface angle hit by the ray through image offset ``x_img`` (perspective).

    Marches the ray from the camera in small steps until it enters the
    cylinder, then bisects the crossing. Returns NaN on a miss.
    """
    cx, cz = 0.0, -distance * radius
    dx, dz = x_img / focal, 1.0
    norm = math.hypot(dx, dz)
    dx, dz = dx / norm, dz / norm
    step = radius * 1e-3
    t = 0.0
    prev = t
    hit = False
    for _ in range(int(4 * distance * 1e3)):
        px, pz = cx + t * dx, cz + t * dz
        if px * px + pz * pz <= radius * radius:
            hit = True
            break
        prev = t
        t += step
    if not hit:
        return math.nan
    lo, hi = prev, t
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        px, pz = cx + mid * dx, cz + mid * dz
        if px * px + pz * pz <= radius * radius:
            hi = mid
        else:
            lo = mid
    px, pz = cx + hi * dx, cz + hi * dz
    return math.atan2(px, -pz)
