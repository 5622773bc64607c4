"""Attenuation image from the coefficient field, plus the two-step cleanup.

The image value at an interior lattice point is the source-average of the
directional derivative of the truncated series:

    f(x, y) = 1/(2d) * int_-d^d [ cos(phi) du_n/dx + sin(phi) du_n/dy ]
                                 Psi_n(alpha) d(alpha),  summed over n,

with cos(phi) = (x - alpha)/|x - x_alpha| and sin(phi) = y/|x - x_alpha|.
Spatial derivatives are central differences.  Cleanup is a 20% amplitude
threshold followed by a clipped 7x7 moving average.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dfield

import numpy as np

from .basis import BasisSet
from .errors import ConfigurationError
from .geometry import Grid
from .solver import CoefficientField


@dataclass(frozen=True)
class ImageField:
    """Reconstruction on the interior lattice with run metadata."""

    values: np.ndarray          # (T_x-1, T_x-1), indexed [i, j]
    xs: np.ndarray              # interior x coordinates
    ys: np.ndarray
    meta: dict = dfield(default_factory=dict)

    def with_values(self, values, **meta) -> "ImageField":
        return ImageField(values=values, xs=self.xs, ys=self.ys,
                          meta={**self.meta, **meta})


def reconstruct_f(field: CoefficientField, basis: BasisSet, grid: Grid,
                  meta: dict | None = None) -> ImageField:
    """Apply the averaged-transport reconstruction to a coefficient field."""
    X, Y = grid.meshgrid()
    xf, yf = X.ravel(), Y.ravel()
    al, w = basis.nodes, basis.weights
    dx = xf[:, None] - al[None, :]
    rho = np.sqrt(dx ** 2 + yf[:, None] ** 2)
    V = basis.samples
    I_cos = ((w[None, :] * dx / rho) @ V) / (2.0 * basis.d)     # (P, N)
    I_sin = ((w[None, :] * yf[:, None] / rho) @ V) / (2.0 * basis.d)

    n_pts = grid.n * grid.n
    dux = np.gradient(field.values, grid.h_x, axis=0).reshape(n_pts, -1)
    duy = np.gradient(field.values, grid.h_y, axis=1).reshape(n_pts, -1)
    f = (dux * I_cos + duy * I_sin).sum(axis=1).reshape(grid.n, grid.n)
    return ImageField(values=f[1:-1, 1:-1], xs=grid.xs[1:-1], ys=grid.ys[1:-1],
                      meta=dict(meta or {}))


def threshold_filter(image: ImageField, fraction: float = 0.2) -> ImageField:
    """Zero out values with |f| < fraction * max|f|; a zero image is a no-op."""
    m = float(np.abs(image.values).max())
    if m == 0.0:
        return image.with_values(image.values.copy(), thresholded=fraction)
    cleaned = np.where(np.abs(image.values) < fraction * m, 0.0, image.values)
    return image.with_values(cleaned, thresholded=fraction)


def _clipped_box_mean(values: np.ndarray, window: int) -> np.ndarray:
    # mean over the centered window intersected with the array, via summed tables
    r = window // 2
    n0, n1 = values.shape
    padded = np.zeros((n0 + 2 * r, n1 + 2 * r))
    padded[r:r + n0, r:r + n1] = values
    counts = np.zeros_like(padded)
    counts[r:r + n0, r:r + n1] = 1.0

    def box(Z):
        S = np.zeros((Z.shape[0] + 1, Z.shape[1] + 1))
        S[1:, 1:] = np.cumsum(np.cumsum(Z, axis=0), axis=1)
        return S[window:, window:] - S[:-window, window:] - S[window:, :-window] \
            + S[:-window, :-window]

    return box(padded) / box(counts)


def smooth(image: ImageField, window: int = 7) -> ImageField:
    """Replace each value by the mean over in-domain points of the centered
    window x window patch (clipped at the image edge, nothing padded in)."""
    if window % 2 != 1 or window < 1:
        raise ConfigurationError(f"window must be odd and positive, got {window}")
    return image.with_values(_clipped_box_mean(image.values, window), smoothed=window)


def smooth_coefficients(field: CoefficientField, window: int = 7) -> CoefficientField:
    """Same moving average applied componentwise to a coefficient field."""
    if window % 2 != 1 or window < 1:
        raise ConfigurationError(f"window must be odd and positive, got {window}")
    out = np.stack([_clipped_box_mean(field.values[:, :, n], window)
                    for n in range(field.N)], axis=2)
    return CoefficientField(values=out)


def postprocess(image: ImageField, fraction: float = 0.2, window: int = 7) -> ImageField:
    """Threshold first, then smooth."""
    return smooth(threshold_filter(image, fraction), window)


def export_csv(path, image: ImageField) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "value"])
        for i, x in enumerate(image.xs):
            for j, y in enumerate(image.ys):
                wr.writerow([repr(float(x)), repr(float(y)), repr(float(image.values[i, j]))])


def export_pgm(path, image: ImageField) -> None:
    """8-bit PGM with a linear gray map; min/max recorded in a sidecar file.

    Rows run top to bottom (largest y first) so the file views upright.
    """
    vmin = float(image.values.min())
    vmax = float(image.values.max())
    span = vmax - vmin
    scaled = np.zeros_like(image.values) if span == 0 else (image.values - vmin) / span
    gray = np.round(255 * scaled).astype(np.uint8)
    rows = gray.T[::-1, :]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{rows.shape[1]} {rows.shape[0]}\n255\n".encode())
        fh.write(rows.tobytes())
    with open(str(path) + ".txt", "w") as fh:
        fh.write(f"min={vmin!r}\nmax={vmax!r}\n")
        for k, v in image.meta.items():
            fh.write(f"{k}={v}\n")
