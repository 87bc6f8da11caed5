"""Self-contained numeric primitives used by every metric.

All functions are pure, operate on float64 internally, and are safe for
unrestricted parallel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import DegenerateInputError, SampleSizeError, ShapeMismatchError


@dataclass(frozen=True)
class KernelSpec:
    """Degree-2 polynomial kernel k(x, y) = (gamma * <x, y> + c0) ** 2."""

    gamma: float = 1.0
    c0: float = 0.0
    degree: int = 2

    def __post_init__(self):
        if self.degree != 2:
            raise ValueError("only the degree-2 polynomial kernel is supported")


@dataclass(frozen=True)
class AlignmentPath:
    """Monotone alignment between two sequences.

    ``pairs`` holds 0-indexed (i, j) pairs starting at (0, 0), ending at
    (len(R)-1, len(P)-1), with steps in {(1,0), (0,1), (1,1)}.
    """

    pairs: tuple[tuple[int, int], ...]


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity <a,b> / (|a||b|), in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeMismatchError(f"cosine: dims {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine: zero-norm input")
    if np.array_equal(a, b):
        return 1.0  # exact self-similarity, no rounding
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


_SSIM_WIN = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def _gaussian_window(size: int = _SSIM_WIN, sigma: float = _SSIM_SIGMA) -> np.ndarray:
    half = size // 2
    coords = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity of two grayscale images on [0, 1].

    11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, dynamic range 1.0;
    statistics use population normalization and the map is averaged over
    valid window positions only.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"ssim: shapes {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ShapeMismatchError("ssim: expects 2-D grayscale images")
    if min(a.shape) < _SSIM_WIN:
        raise ShapeMismatchError(f"ssim: image smaller than {_SSIM_WIN}x{_SSIM_WIN} window")

    win = _gaussian_window()
    c1 = (_SSIM_K1 * 1.0) ** 2
    c2 = (_SSIM_K2 * 1.0) ** 2

    mu_a = convolve2d(a, win, mode="valid")
    mu_b = convolve2d(b, win, mode="valid")
    var_a = convolve2d(a * a, win, mode="valid") - mu_a * mu_a
    var_b = convolve2d(b * b, win, mode="valid") - mu_b * mu_b
    cov = convolve2d(a * b, win, mode="valid") - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def warp(image: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Backward bilinear warp: out(p) = bilinear(image, p + flow(p)).

    ``flow[..., 0]`` is the x (column) displacement, ``flow[..., 1]`` the y
    (row) displacement. Sample positions outside the image clamp to the
    border. Works on HxW or HxWxC images; zero flow is the exact identity.
    """
    image = np.asarray(image, dtype=np.float64)
    flow = np.asarray(flow, dtype=np.float64)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[..., None]
    h, w = image.shape[:2]
    if flow.shape != (h, w, 2):
        raise ShapeMismatchError(f"warp: flow shape {flow.shape} vs image {(h, w)}")

    gy, gx = np.mgrid[0:h, 0:w]
    sx = np.clip(gx + flow[..., 0], 0.0, w - 1.0)
    sy = np.clip(gy + flow[..., 1], 0.0, h - 1.0)

    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]

    top = image[y0, x0] * (1.0 - fx) + image[y0, x1] * fx
    bot = image[y1, x0] * (1.0 - fx) + image[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return out[..., 0] if squeeze else out


def dtw_min_cost(r: np.ndarray, p: np.ndarray) -> tuple[float, AlignmentPath]:
    """Minimum-cost monotone alignment between two 2-D point sequences.

    Dynamic programming accumulates squared Euclidean distances over steps
    {match, insert, delete}; the returned cost is the square root of the
    minimal path sum (monotonicity of sqrt makes the two orderings agree).
    Ties break toward the diagonal so the path is deterministic.
    """
    r = np.atleast_2d(np.asarray(r, dtype=np.float64))
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    n, m = len(r), len(p)
    if n == 0 or m == 0:
        raise DegenerateInputError("dtw: empty sequence")

    diff = r[:, None, :] - p[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)

    acc = np.empty((n, m), dtype=np.float64)
    acc[0, 0] = d2[0, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + d2[0, j]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + d2[i, 0]
        row = acc[i]
        prev = acc[i - 1]
        di = d2[i]
        for j in range(1, m):
            row[j] = di[j] + min(prev[j - 1], prev[j], row[j - 1])

    pairs = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            best = min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
            if acc[i - 1, j - 1] == best:  # diagonal preferred on ties
                i, j = i - 1, j - 1
            elif acc[i - 1, j] == best:
                i -= 1
            else:
                j -= 1
        pairs.append((i, j))
    pairs.reverse()
    return float(math.sqrt(acc[n - 1, m - 1])), AlignmentPath(tuple(pairs))


def mmd2_poly_unbiased(x: np.ndarray, y: np.ndarray, spec: KernelSpec = KernelSpec()) -> float:
    """Unbiased squared maximum mean discrepancy under the degree-2 kernel.

    Three-term estimator: within-set sums exclude the diagonal, the cross
    term keeps every pair. The estimate may be negative.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    m, n = len(x), len(y)
    if m < 2 or n < 2:
        raise SampleSizeError(f"mmd: need >=2 samples per side, got {m} and {n}")
    if x.shape[1] != y.shape[1]:
        raise ShapeMismatchError(f"mmd: dims {x.shape[1]} vs {y.shape[1]}")

    kxx = (spec.gamma * (x @ x.T) + spec.c0) ** 2
    kyy = (spec.gamma * (y @ y.T) + spec.c0) ** 2
    kxy = (spec.gamma * (x @ y.T) + spec.c0) ** 2

    term_x = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    term_y = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    cross = 2.0 * kxy.sum() / (m * n)
    return float(term_x + term_y - cross)


def logistic(x: float, alpha: float, center: float) -> float:
    """Sigmoid mapping 1 / (1 + exp(-alpha * (x / center - 1)))."""
    if alpha <= 0:
        raise ValueError(f"logistic: alpha must be > 0, got {alpha}")
    if center <= 0:
        raise ValueError(f"logistic: center must be > 0, got {center}")
    z = -alpha * (x / center - 1.0)
    # guard exp overflow for extreme static inputs
    if z > 700.0:
        return 0.0
    return float(1.0 / (1.0 + math.exp(z)))


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Sample Pearson correlation coefficient of two equal-length series."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ShapeMismatchError(f"pearson: lengths {x.size} vs {y.size}")
    if x.size < 3:
        raise SampleSizeError(f"pearson: need n >= 3, got {x.size}")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.dot(dx, dx))
    sy = np.sqrt(np.dot(dy, dy))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInputError("pearson: zero variance")
    return float(np.clip(np.dot(dx, dy) / (sx * sy), -1.0, 1.0))


def median(values) -> float:
    """Median; even-count sets take the mean of the two central values."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise DegenerateInputError("median: empty input")
    return float(np.median(values))
