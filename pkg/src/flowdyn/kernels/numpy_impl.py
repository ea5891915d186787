"""Vectorized numpy versions of the hot loops.

Every function here has a twin in ``numba_impl`` with the same signature and
the same arithmetic; the parity tests hold them to each other.
"""
import numpy as np


def neighbour_counts(h, w):
    n = np.full((h, w), 4.0)
    n[0, :] -= 1
    n[-1, :] -= 1
    n[:, 0] -= 1
    n[:, -1] -= 1
    return n


def _neighbour_sum(a):
    s = np.zeros_like(a)
    s[1:, :] += a[:-1, :]
    s[:-1, :] += a[1:, :]
    s[:, 1:] += a[:, :-1]
    s[:, :-1] += a[:, 1:]
    return s


def hs_sweeps(u, v, ix, iy, it, a2, iterations):
    """Red-black Gauss-Seidel sweeps of the Horn-Schunck energy, in place.

    Each half-sweep minimizes the energy exactly over one checkerboard colour,
    so the energy never increases.
    """
    h, w = u.shape
    n = neighbour_counts(h, w)
    an = a2 * n
    den = an + ix * ix + iy * iy
    ii, jj = np.indices((h, w))
    colours = [((ii + jj) % 2) == c for c in (0, 1)]
    for _ in range(iterations):
        for mask in colours:
            ubar = _neighbour_sum(u) / n
            vbar = _neighbour_sum(v) / n
            r = (ix * ubar + iy * vbar + it) / den
            u[mask] = (ubar - ix * r)[mask]
            v[mask] = (vbar - iy * r)[mask]
    return u, v


def hs_energy(u, v, ix, iy, it, a2):
    data = ix * u + iy * v + it
    e = np.sum(data * data)
    e += a2 * (np.sum(np.diff(u, axis=0) ** 2) + np.sum(np.diff(u, axis=1) ** 2))
    e += a2 * (np.sum(np.diff(v, axis=0) ** 2) + np.sum(np.diff(v, axis=1) ** 2))
    return float(e)


def bilinear_sample(img, x, y, wrap):
    """Sample ``img`` at float coordinates (x = column, y = row).

    Out-of-range coordinates are clamped to the border (replicate edge) or
    wrapped when ``wrap`` is true.
    """
    h, w = img.shape
    if wrap:
        x = np.mod(x, w)
        y = np.mod(y, h)
    else:
        x = np.clip(x, 0.0, w - 1.0)
        y = np.clip(y, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    if wrap:
        x0 = x0 % w
        y0 = y0 % h
        x1 = (x0 + 1) % w
        y1 = (y0 + 1) % h
    else:
        x1 = np.minimum(x0 + 1, w - 1)
        y1 = np.minimum(y0 + 1, h - 1)
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def cell_histograms(bin_idx, cell_idx, weights, ncells, nbins):
    flat = cell_idx.ravel() * nbins + bin_idx.ravel()
    hist = np.bincount(flat, weights=weights.ravel(), minlength=ncells * nbins)
    return hist.reshape(ncells, nbins)
