"""numba-compiled versions of the hot loops (see ``numpy_impl``)."""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def hs_sweeps(u, v, ix, iy, it, a2, iterations):
    h, w = u.shape
    for _ in range(iterations):
        for colour in range(2):
            for i in range(h):
                start = (i + colour) % 2
                for j in range(start, w, 2):
                    su = 0.0
                    sv = 0.0
                    n = 0.0
                    if i > 0:
                        su += u[i - 1, j]
                        sv += v[i - 1, j]
                        n += 1.0
                    if i < h - 1:
                        su += u[i + 1, j]
                        sv += v[i + 1, j]
                        n += 1.0
                    if j > 0:
                        su += u[i, j - 1]
                        sv += v[i, j - 1]
                        n += 1.0
                    if j < w - 1:
                        su += u[i, j + 1]
                        sv += v[i, j + 1]
                        n += 1.0
                    ubar = su / n
                    vbar = sv / n
                    gx = ix[i, j]
                    gy = iy[i, j]
                    r = (gx * ubar + gy * vbar + it[i, j]) / (a2 * n + gx * gx + gy * gy)
                    u[i, j] = ubar - gx * r
                    v[i, j] = vbar - gy * r
    return u, v


@njit(cache=True, nogil=True)
def hs_energy(u, v, ix, iy, it, a2):
    h, w = u.shape
    e = 0.0
    for i in range(h):
        for j in range(w):
            d = ix[i, j] * u[i, j] + iy[i, j] * v[i, j] + it[i, j]
            e += d * d
            if i < h - 1:
                e += a2 * ((u[i + 1, j] - u[i, j]) ** 2 + (v[i + 1, j] - v[i, j]) ** 2)
            if j < w - 1:
                e += a2 * ((u[i, j + 1] - u[i, j]) ** 2 + (v[i, j + 1] - v[i, j]) ** 2)
    return e


@njit(cache=True, nogil=True)
def _sample_one(img, x, y, wrap):
    h, w = img.shape
    if wrap:
        x = x % w
        y = y % h
    else:
        x = min(max(x, 0.0), w - 1.0)
        y = min(max(y, 0.0), h - 1.0)
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    fx = x - x0
    fy = y - y0
    if wrap:
        x0 = x0 % w
        y0 = y0 % h
        x1 = (x0 + 1) % w
        y1 = (y0 + 1) % h
    else:
        x1 = min(x0 + 1, w - 1)
        y1 = min(y0 + 1, h - 1)
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


@njit(cache=True, nogil=True)
def _bilinear_sample(img, x, y, wrap):
    out = np.empty(x.shape, dtype=np.float64)
    xf = x.ravel()
    yf = y.ravel()
    of = out.ravel()
    for k in range(xf.size):
        of[k] = _sample_one(img, xf[k], yf[k], wrap)
    return out


def bilinear_sample(img, x, y, wrap):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    return _bilinear_sample(np.ascontiguousarray(img, dtype=np.float64), x, y, bool(wrap))


@njit(cache=True, nogil=True)
def _cell_histograms(bin_idx, cell_idx, weights, ncells, nbins):
    hist = np.zeros((ncells, nbins))
    for k in range(bin_idx.size):
        hist[cell_idx[k], bin_idx[k]] += weights[k]
    return hist


def cell_histograms(bin_idx, cell_idx, weights, ncells, nbins):
    return _cell_histograms(
        np.ascontiguousarray(bin_idx, dtype=np.int64).ravel(),
        np.ascontiguousarray(cell_idx, dtype=np.int64).ravel(),
        np.ascontiguousarray(weights, dtype=np.float64).ravel(),
        ncells,
        nbins,
    )
