"""Computational domain, grids and the flattened unknown indexing.

The domain is the open rectangle Omega = (-R, R) x (a, b) with a > 0, scanned
from a horizontal source segment Gamma_d = {(alpha, 0) : |alpha| < d} lying
below it.  Both the lattice on Omega and the source positions are uniform.
Unknowns u_n(x_i, y_j) are flattened with a 1-based bijection that matches
the solver's matrix layout.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

#: config-file defaults; geometry entries are the Test-1 setup
CONFIG_DEFAULTS = {
    "R": 1.0,
    "a": 1.0,
    "b": 3.0,
    "d": 3.5,
    "T_x": 150,
    "T_alpha": 100,
    "N": 15,
    "eps1": 0.1,
    "eps2": 0.01,
    "noise": 0.05,
    "seed": 0,
    "test_id": 1,
}

_INT_KEYS = {"T_x", "T_alpha", "N", "seed", "test_id"}


@dataclass(frozen=True)
class DomainConfig:
    """Validated bundle of geometry and discretization parameters.

    R, a, b, d are in the common length unit; T_x counts grid subdivisions
    per axis, T_alpha source subdivisions and N the series truncation order.
    """

    R: float
    a: float
    b: float
    d: float
    T_x: int
    T_alpha: int
    N: int

    def __post_init__(self):
        if not (self.b > self.a > 0):
            raise ConfigurationError(f"need b > a > 0, got a={self.a}, b={self.b}")
        if self.R <= 0 or self.d <= 0:
            raise ConfigurationError(f"need R > 0 and d > 0, got R={self.R}, d={self.d}")
        if self.T_x < 2 or self.T_alpha < 2:
            raise ConfigurationError(
                f"need T_x >= 2 and T_alpha >= 2, got {self.T_x}, {self.T_alpha}")
        if self.N < 1:
            raise ConfigurationError(f"need N >= 1, got N={self.N}")

    @property
    def h_x(self) -> float:
        return 2.0 * self.R / self.T_x

    @property
    def h_y(self) -> float:
        return (self.b - self.a) / self.T_x

    @property
    def n_unknowns(self) -> int:
        return (self.T_x + 1) ** 2 * self.N

    def with_(self, **kw) -> "DomainConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class Grid:
    """Uniform (T_x+1) x (T_x+1) lattice on the closed rectangle."""

    xs: np.ndarray           # shape (T_x+1,), xs[i] = -R + i*h_x
    ys: np.ndarray           # shape (T_x+1,), ys[j] = a + j*h_y
    h_x: float
    h_y: float

    @property
    def n(self) -> int:
        return len(self.xs)

    def meshgrid(self):
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros((self.n, self.n), dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m


@dataclass(frozen=True)
class SourceSet:
    """Uniform source positions alpha_i on Gamma_d, endpoints included."""

    alphas: np.ndarray
    d: float

    @property
    def spacing(self) -> float:
        return 2.0 * self.d / (len(self.alphas) - 1)


def build_grid(config: DomainConfig) -> Grid:
    """Lattice (x_i, y_j) = (-R + (i-1) h_x, a + (j-1) h_y), 1 <= i, j <= T_x+1."""
    xs = -config.R + np.arange(config.T_x + 1) * config.h_x
    ys = config.a + np.arange(config.T_x + 1) * config.h_y
    return Grid(xs=xs, ys=ys, h_x=config.h_x, h_y=config.h_y)


def source_positions(config: DomainConfig) -> SourceSet:
    """alpha_i = -d + (i-1) * 2d/T_alpha, i = 1..T_alpha+1."""
    alphas = -config.d + np.arange(config.T_alpha + 1) * (2.0 * config.d / config.T_alpha)
    return SourceSet(alphas=alphas, d=config.d)


def flat_index(i: int, j: int, n: int, config: DomainConfig) -> int:
    """1-based flattening (i-1)(T_x+1)N + (j-1)N + n of the unknown u_n(x_i, y_j).

    Bijection from {1..T_x+1}^2 x {1..N} onto {1..(T_x+1)^2 N}.
    """
    T, N = config.T_x, config.N
    if not (1 <= i <= T + 1 and 1 <= j <= T + 1):
        raise IndexError(f"grid index out of range: (i, j) = ({i}, {j})")
    if not (1 <= n <= N):
        raise IndexError(f"basis index out of range: n = {n}")
    return (i - 1) * (T + 1) * N + (j - 1) * N + n


def flat_index_inverse(k: int, config: DomainConfig) -> tuple[int, int, int]:
    """Inverse of :func:`flat_index`; k is 1-based."""
    T, N = config.T_x, config.N
    if not (1 <= k <= (T + 1) ** 2 * N):
        raise IndexError(f"flat index out of range: {k}")
    k0 = k - 1
    i = k0 // ((T + 1) * N)
    j = (k0 - i * (T + 1) * N) // N
    n = k0 - i * (T + 1) * N - j * N
    return i + 1, j + 1, n + 1


#: rectangle (R, a, b) of each benchmark test; d = 3.5 throughout
TEST_RECTANGLES = {
    1: (1.0, 1.0, 3.0),
    2: (1.0, 3.0, 5.0),
    3: (1.0, 3.5, 5.5),
    4: (1.0, 3.5, 5.5),
}


def test_domain(test_id: int, T_x: int = 60, T_alpha: int = 100, N: int = 10,
                d: float = 3.5) -> DomainConfig:
    """Benchmark geometry for tests 1-4 at the given discretization."""
    if test_id not in TEST_RECTANGLES:
        raise ConfigurationError(f"unknown test id {test_id}; expected 1..4")
    R, a, b = TEST_RECTANGLES[test_id]
    return DomainConfig(R=R, a=a, b=b, d=d, T_x=T_x, T_alpha=T_alpha, N=N)


def load_config(path) -> dict:
    """Read a UTF-8 ``key=value`` config file, filling documented defaults.

    Unknown keys raise; blank lines and '#' comments are allowed.  Returns a
    plain dict (see CONFIG_DEFAULTS for keys and their default values).
    """
    values = dict(CONFIG_DEFAULTS)
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in values:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = int(val) if key in _INT_KEYS else float(val)
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: bad value for {key}: {val!r}") from exc
    return values


def domain_from_mapping(values) -> DomainConfig:
    """Build a DomainConfig from a config mapping (extra keys ignored)."""
    return DomainConfig(
        R=float(values["R"]), a=float(values["a"]), b=float(values["b"]),
        d=float(values["d"]), T_x=int(values["T_x"]),
        T_alpha=int(values["T_alpha"]), N=int(values["N"]),
    )
