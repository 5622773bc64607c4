"""Phantoms, incomplete ray data and its projection onto the basis.

Data are line integrals u(x, x_alpha) of the attenuation f along segments
from a source x_alpha = (alpha, 0) on the source segment to a boundary point
x of the domain rectangle.  f vanishes outside the rectangle, so only the
clipped part of each segment contributes; it is sampled with a fixed-count
midpoint rule.  Multiplicative uniform noise and the projection of the data
onto the basis (per boundary point) complete the forward side.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .basis import BasisSet
from .errors import ConfigurationError
from .geometry import DomainConfig, Grid, SourceSet

#: midpoint samples on the in-domain part of every integration segment
LINE_SAMPLES = 150


@dataclass(frozen=True)
class BumpTerm:
    """One scaled/translated copy of the smooth compactly supported template."""

    weight: float
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class CharRegion:
    """Signed indicator of a band 'lo < |x| + |y - y_c| < hi' with half-plane cuts.

    Cuts are (axis, threshold, keep_above): axis 0 cuts in x, axis 1 in y.
    """

    sign: float
    y_c: float
    lo: float
    hi: float
    cuts: tuple = ()


@dataclass(frozen=True)
class Phantom:
    """Analytic ground truth supported inside the open rectangle."""

    kind: str                      # "bump_sum" | "char_set"
    bounds: tuple[float, float, float, float]   # (R, a, b, d-unused marker) -> (-R,R)x(a,b)
    bumps: tuple = ()
    regions: tuple = ()


def bump_template(z2):
    """exp(-s / (1 - s)) on s = |z|^2 < 1, zero elsewhere."""
    z2 = np.asarray(z2, dtype=float)
    out = np.zeros_like(z2)
    m = z2 < 1.0
    out[m] = np.exp(-z2[m] / (1.0 - z2[m]))
    return out


def eval_phantom(phantom: Phantom, px, py):
    """Evaluate f at points (px, py) elementwise; zero outside the rectangle."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    out = np.zeros(np.broadcast(px, py).shape)
    if phantom.kind == "bump_sum":
        for t in phantom.bumps:
            z2 = ((px - t.center[0]) ** 2 + (py - t.center[1]) ** 2) / t.radius ** 2
            out += t.weight * bump_template(z2)
    elif phantom.kind == "char_set":
        for r in phantom.regions:
            band = np.abs(px) + np.abs(py - r.y_c)
            mask = (band > r.lo) & (band < r.hi)
            for axis, threshold, keep_above in r.cuts:
                coord = px if axis == 0 else py
                mask &= (coord > threshold) if keep_above else (coord < threshold)
            out += r.sign * mask
    else:
        raise ConfigurationError(f"unknown phantom kind {phantom.kind!r}")
    R, a, b, _ = phantom.bounds
    inside = (px > -R) & (px < R) & (py > a) & (py < b)
    return np.where(inside, out, 0.0)


def phantom_for_test(test_id: int, config: DomainConfig) -> Phantom:
    """Ground-truth attenuation for benchmark tests 1-4.

    Test 1 is one smooth bump in the middle of the rectangle; Test 2 is a
    signed combination of three bumps of different radii; Tests 3 and 4 are
    characteristic functions of pieces of a rhombus-shaped band.
    """
    bounds = (config.R, config.a, config.b, config.d)
    if test_id == 1:
        return Phantom("bump_sum", bounds, bumps=(BumpTerm(1.0, (0.0, 2.0), 0.2),))
    if test_id == 2:
        return Phantom("bump_sum", bounds, bumps=(
            BumpTerm(-6.0, (-0.4, 4.0), 0.2),
            BumpTerm(5.0, (-0.1, 25.0 / 7.0), 0.23),
            BumpTerm(6.0, (0.4, 4.0), 0.18),
        ))
    if test_id == 3:
        return Phantom("char_set", bounds, regions=(
            CharRegion(+1.0, 4.5, 0.3, 0.6, cuts=((0, 0.3, True), (1, 4.5, True))),
        ))
    if test_id == 4:
        return Phantom("char_set", bounds, regions=(
            CharRegion(+1.0, 4.5, 0.3, 0.6, cuts=((1, 4.5, True),)),
            CharRegion(-1.0, 4.5, 0.3, 0.6, cuts=((1, 4.5, False),)),
        ))
    raise ConfigurationError(f"unknown test id {test_id}; expected 1..4")


def _clip_to_rectangle(bx, by, alphas, R, a, b):
    """Parametric interval [t0, t1] of p(t) = x_alpha + t (x - x_alpha) inside
    the open rectangle, broadcast over boundary points x rows, sources columns."""
    BX = bx[:, None]
    BY = by[:, None]
    AL = alphas[None, :]
    dxl = BX - AL
    dyl = BY + np.zeros_like(AL)
    # sources sit at y = 0 below the domain, so dyl > 0 on every admissible ray
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.maximum(0.0, a / dyl)
        t1 = np.minimum(1.0, b / dyl)
    moving = dxl != 0
    sgn = np.where(dxl > 0, 1.0, -1.0)
    safe = np.where(moving, dxl, 1.0)
    t0 = np.maximum(t0, np.where(moving, (-R * sgn - AL) / safe, 0.0))
    t1 = np.minimum(t1, np.where(moving, (R * sgn - AL) / safe, 1.0))
    # vertical rays (dx = 0) outside the slab |x| < R never enter
    t1 = np.where(moving | (np.abs(AL) < R), t1, t0)
    return dxl, dyl, t0, np.maximum(t0, t1)


def line_integral(phantom: Phantom, x, x_alpha) -> float:
    """Midpoint-rule integral of f over the in-domain part of [x_alpha, x]."""
    vals = line_integrals(phantom, np.asarray([x[0]], float), np.asarray([x[1]], float),
                          np.asarray([x_alpha[0]], float))
    return float(vals[0, 0])


def line_integrals(phantom: Phantom, bx, by, alphas) -> np.ndarray:
    """Vectorized integrals for all (boundary point, source) pairs.

    Returns shape (len(bx), len(alphas)).  Each segment is clipped to the
    open rectangle and the clipped part sampled with LINE_SAMPLES midpoints,
    so segments missing the domain (and zero-length clips) integrate to 0.
    """
    R, a, b, _ = phantom.bounds
    bx = np.asarray(bx, float)
    by = np.asarray(by, float)
    alphas = np.asarray(alphas, float)
    dxl, dyl, t0, t1 = _clip_to_rectangle(bx, by, alphas, R, a, b)
    dt = t1 - t0
    seglen = np.sqrt(dxl ** 2 + dyl ** 2) * dt
    tk = t0[..., None] + (np.arange(LINE_SAMPLES)[None, None, :] + 0.5) / LINE_SAMPLES * dt[..., None]
    px = alphas[None, :, None] + tk * dxl[..., None]
    py = tk * dyl[..., None]
    return seglen / LINE_SAMPLES * eval_phantom(phantom, px, py).sum(axis=-1)


@dataclass(frozen=True)
class BoundaryData:
    """Ray data on the lattice boundary plus its basis projection.

    ``bi``/``bj`` are 0-based lattice indices of the boundary points in a
    fixed canonical order; ``raw[k, i]`` is u(x_k, alpha_i), ``g[k, :]`` the
    projection coefficients at boundary point k (None until projected).
    """

    bi: np.ndarray
    bj: np.ndarray
    raw: np.ndarray
    g: np.ndarray | None = None


def boundary_points(grid: Grid):
    """Canonical boundary enumeration (row-major over the lattice mask)."""
    bi, bj = np.nonzero(grid.boundary_mask())
    return bi, bj


def compute_boundary_data(phantom: Phantom, grid: Grid, sources: SourceSet) -> BoundaryData:
    """Clean ray data for every boundary lattice point and every source."""
    bi, bj = boundary_points(grid)
    raw = line_integrals(phantom, grid.xs[bi], grid.ys[bj], sources.alphas)
    return BoundaryData(bi=bi, bj=bj, raw=raw)


def add_noise(data: BoundaryData, delta: float, seed: int) -> BoundaryData:
    """Multiplicative uniform noise u -> u (1 + delta (2 xi - 1)), xi ~ U[0, 1].

    The Philox counter-based generator keyed by the seed makes sample (k, i)
    a pure function of (seed, boundary index k, source index i), independent
    of evaluation order; delta = 0 returns the data unchanged (bit-identical).
    """
    if delta < 0:
        raise ConfigurationError(f"noise level must be >= 0, got {delta}")
    if delta == 0:
        return data
    rng = np.random.Generator(np.random.Philox(seed))
    xi = rng.random(data.raw.shape)
    noisy = data.raw * (1.0 + delta * (2.0 * xi - 1.0))
    return BoundaryData(bi=data.bi, bj=data.bj, raw=noisy, g=None)


def boundary_coefficients(data: BoundaryData, basis: BasisSet, sources: SourceSet) -> BoundaryData:
    """Project raw data onto the basis: g_n(x) = int u(x, alpha) Psi_n(alpha) da.

    The integral is a trapezoid rule on the source grid, matching the data's
    sampling.  Rays to the bottom side never cross the domain interior, so g
    vanishes there identically.
    """
    w = np.full(len(sources.alphas), sources.spacing)
    w[0] *= 0.5
    w[-1] *= 0.5
    psi = basis.evaluate(sources.alphas)
    g = (data.raw * w[None, :]) @ psi
    return BoundaryData(bi=data.bi, bj=data.bj, raw=data.raw, g=g)


def export_raw_csv(path, data: BoundaryData, grid: Grid, sources: SourceSet) -> None:
    """Raw data as CSV rows (boundary_x, boundary_y, alpha, value)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["boundary_x", "boundary_y", "alpha", "value"])
        for k in range(len(data.bi)):
            x = grid.xs[data.bi[k]]
            y = grid.ys[data.bj[k]]
            for i, alpha in enumerate(sources.alphas):
                wr.writerow([repr(float(x)), repr(float(y)), repr(float(alpha)),
                             repr(float(data.raw[k, i]))])
