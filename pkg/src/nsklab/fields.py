"""Periodic grids, spectral fields, and FFT-based differential operators.

The unbounded domain is modeled by a large periodic box; initial fields are
expected to sit at their far-field values near the box boundary (the solver
checks this, not these primitives).  All differential operators act in
Fourier space and are exact for band-limited inputs; all norms use the flat
quadrature weight ``(L/n)**dim`` per sample, which is spectrally accurate
for periodic integrands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FieldError",
    "PositivityError",
    "Grid",
    "make_grid",
    "ScalarField",
    "VectorField",
    "constant_field",
    "gradient",
    "divergence",
    "laplacian",
    "hessian",
    "log_field",
    "sqrt_field",
    "power_field",
    "lp_norm",
    "sup_norm",
    "integral",
    "l2_norm",
    "spectral_l2_norm",
    "sobolev_norm",
    "hs_norm",
    "vector_lp_norm",
    "vector_sup_norm",
    "dealias_values",
    "random_band_limited",
    "write_snapshot",
    "read_snapshot",
]


class FieldError(ValueError):
    """Invalid grid or field construction, or an ill-posed field operation."""


class PositivityError(FieldError):
    """A field that must be strictly positive is not."""


def _fft_friendly(n: int) -> bool:
    # even, at least 8, prime factors restricted to 2 and 3
    if n < 8 or n % 2 != 0:
        return False
    m = n
    for p in (2, 3):
        while m % p == 0:
            m //= p
    return m == 1


@dataclass(frozen=True)
class Grid:
    """Uniform periodic box in 2 or 3 dimensions.

    Carries the discrete frequency lattice ``xi = (2*pi/L) * m`` with integer
    mode indices ``m in {-n/2, ..., n/2 - 1}`` per axis, the quadrature cell
    volume, and the 2/3-rule dealiasing mask shared by all nonlinear products.
    """

    dim: int
    n: int
    box_length: float
    far_field_density: float

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise FieldError(f"unsupported dimension {self.dim} (2 and 3 only)")
        if not _fft_friendly(self.n):
            raise FieldError(
                f"grid resolution {self.n} unsupported: need an even product "
                "of powers of 2 and 3, at least 8"
            )
        if not self.box_length > 0:
            raise FieldError("box length must be positive")
        if not self.far_field_density > 0:
            raise FieldError("far-field density must be positive")

        n, L, dim = self.n, float(self.box_length), self.dim
        shape = (n,) * dim
        k1 = 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)
        axes = []
        for i in range(dim):
            s = [1] * dim
            s[i] = n
            axes.append(k1.reshape(s))
        k2 = np.zeros(shape)
        for k in axes:
            k2 = k2 + k * k

        modes = np.rint(np.fft.fftfreq(n) * n).astype(int)
        keep = np.abs(modes) <= n // 3
        mask = np.ones(shape, dtype=bool)
        for i in range(dim):
            s = [1] * dim
            s[i] = n
            mask &= keep.reshape(s)

        x1 = np.arange(n) * (L / n)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "frequencies", k1)
        object.__setattr__(self, "wavevectors", tuple(axes))
        object.__setattr__(self, "k2", k2)
        object.__setattr__(self, "dealias_mask", mask)
        object.__setattr__(self, "cell_volume", (L / n) ** dim)
        object.__setattr__(self, "volume", L**dim)
        object.__setattr__(self, "dx", L / n)
        object.__setattr__(self, "coordinates", x1)

    def meshgrid(self):
        """Real-space coordinate arrays, one per axis, 'ij' indexed."""
        return np.meshgrid(*([self.coordinates] * self.dim), indexing="ij")


def make_grid(dim: int, n: int, box_length: float, far_field_density: float) -> Grid:
    return Grid(dim, n, box_length, far_field_density)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real-space samples of a scalar on a grid; finite by construction."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise FieldError(f"value shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise FieldError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    def spectrum(self) -> np.ndarray:
        return np.fft.fftn(self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """dim scalar components sharing one grid, stored as a (dim, n, ...) array."""

    grid: Grid
    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=np.float64)
        if c.shape != (self.grid.dim,) + self.grid.shape:
            raise FieldError(
                f"component shape {c.shape} does not match grid "
                f"{(self.grid.dim,) + self.grid.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise FieldError("field contains non-finite values")
        object.__setattr__(self, "components", c)

    @classmethod
    def from_scalars(cls, parts) -> "VectorField":
        parts = list(parts)
        grid = parts[0].grid
        for p in parts[1:]:
            if p.grid != grid:
                raise FieldError("grid mismatch between components")
        return cls(grid, np.stack([p.values for p in parts]))

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.components[i])

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.components**2, axis=0))


def constant_field(grid: Grid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(value)))


def zero_vector(grid: Grid) -> VectorField:
    return VectorField(grid, np.zeros((grid.dim,) + grid.shape))


# ----------------------------------------------------------------------
# spectral differential operators


def gradient(f: ScalarField) -> VectorField:
    grid = f.grid
    hat = np.fft.fftn(f.values)
    comps = np.empty((grid.dim,) + grid.shape)
    for i, k in enumerate(grid.wavevectors):
        comps[i] = np.fft.ifftn(1j * k * hat).real
    return VectorField(grid, comps)


def divergence(F: VectorField) -> ScalarField:
    grid = F.grid
    out = np.zeros(grid.shape, dtype=complex)
    for i, k in enumerate(grid.wavevectors):
        out += 1j * k * np.fft.fftn(F.components[i])
    return ScalarField(grid, np.fft.ifftn(out).real)


def laplacian(f: ScalarField) -> ScalarField:
    grid = f.grid
    hat = np.fft.fftn(f.values)
    return ScalarField(grid, np.fft.ifftn(-grid.k2 * hat).real)


def hessian(f: ScalarField) -> np.ndarray:
    """All second derivatives as a (dim, dim, n, ...) array."""
    grid = f.grid
    hat = np.fft.fftn(f.values)
    d = grid.dim
    out = np.empty((d, d) + grid.shape)
    for i in range(d):
        for j in range(i, d):
            ki, kj = grid.wavevectors[i], grid.wavevectors[j]
            out[i, j] = np.fft.ifftn(-(ki * kj) * hat).real
            out[j, i] = out[i, j]
    return out


def jacobian(F: VectorField) -> np.ndarray:
    """First derivatives d_j F_i as a (dim, dim, n, ...) array indexed [i, j]."""
    grid = F.grid
    d = grid.dim
    out = np.empty((d, d) + grid.shape)
    for i in range(d):
        hat = np.fft.fftn(F.components[i])
        for j in range(d):
            out[i, j] = np.fft.ifftn(1j * grid.wavevectors[j] * hat).real
    return out


def dealias_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Project real-space samples onto the 2/3-rule band."""
    return np.fft.ifftn(np.fft.fftn(values) * grid.dealias_mask).real


# ----------------------------------------------------------------------
# composite maps (require strict positivity where the math does)


def _require_positive(f: ScalarField, what: str) -> None:
    m = float(np.min(f.values))
    if m <= 0.0:
        loc = tuple(int(i) for i in np.unravel_index(int(np.argmin(f.values)), f.values.shape))
        raise PositivityError(
            f"density not strictly positive: min {m:.6e} at index {loc} ({what})"
        )


def log_field(f: ScalarField) -> ScalarField:
    _require_positive(f, "log")
    return ScalarField(f.grid, np.log(f.values))


def sqrt_field(f: ScalarField) -> ScalarField:
    _require_positive(f, "sqrt")
    return ScalarField(f.grid, np.sqrt(f.values))


def power_field(f: ScalarField, alpha: float) -> ScalarField:
    a = float(alpha)
    if a != int(a):
        _require_positive(f, f"power {a:g}")
    elif a < 0 and np.any(f.values == 0.0):
        raise PositivityError(f"zero entry under negative power {a:g}")
    return ScalarField(f.grid, f.values**a)


# ----------------------------------------------------------------------
# quadrature, norms


def integral(f: ScalarField) -> float:
    return float(np.sum(f.values) * f.grid.cell_volume)


def lp_norm(f: ScalarField, p: float) -> float:
    if p == np.inf:
        return sup_norm(f)
    if p < 1:
        raise FieldError(f"lp_norm requires p >= 1, got {p}")
    return float((np.sum(np.abs(f.values) ** p) * f.grid.cell_volume) ** (1.0 / p))


def sup_norm(f: ScalarField) -> float:
    return float(np.max(np.abs(f.values)))


def l2_norm(f: ScalarField) -> float:
    return lp_norm(f, 2)


def spectral_l2_norm(f: ScalarField) -> float:
    """L2 norm evaluated on the Fourier side (Parseval route)."""
    grid = f.grid
    hat = np.fft.fftn(f.values)
    npts = float(np.prod(grid.shape))
    return float(np.sqrt(np.sum(np.abs(hat) ** 2) * grid.cell_volume / npts))


def vector_lp_norm(F: VectorField, p: float) -> float:
    return lp_norm(ScalarField(F.grid, F.magnitude()), p)


def vector_sup_norm(F: VectorField) -> float:
    return float(np.max(F.magnitude()))


def sobolev_norm(f: ScalarField, k: int) -> float:
    """H^k norm with spectral weight sum_{m<=k} |xi|^(2m)."""
    if k < 0 or k != int(k):
        raise FieldError(f"sobolev_norm requires integer k >= 0, got {k}")
    grid = f.grid
    hat2 = np.abs(np.fft.fftn(f.values)) ** 2
    weight = np.zeros(grid.shape)
    for m in range(int(k) + 1):
        weight += grid.k2**m
    npts = float(np.prod(grid.shape))
    return float(np.sqrt(np.sum(weight * hat2) * grid.cell_volume / npts))


def hs_norm(f: ScalarField, s: float) -> float:
    """Fractional Sobolev norm with weight (1 + |xi|^2)^s."""
    grid = f.grid
    hat2 = np.abs(np.fft.fftn(f.values)) ** 2
    npts = float(np.prod(grid.shape))
    return float(np.sqrt(np.sum((1.0 + grid.k2) ** s * hat2) * grid.cell_volume / npts))


def vector_sobolev_norm(F: VectorField, k: int) -> float:
    return float(np.sqrt(sum(sobolev_norm(F.component(i), k) ** 2 for i in range(F.grid.dim))))


# ----------------------------------------------------------------------
# seeded random fields


def random_band_limited(
    grid: Grid,
    rng: np.random.Generator,
    max_mode: int | None = None,
    amplitude: float = 1.0,
    zero_mean: bool = False,
) -> ScalarField:
    """White noise low-passed to radial mode index <= max_mode, sup-normalized.

    Deterministic for a given generator state; band-limited well inside the
    dealias region by default (max_mode = n // 6).
    """
    if max_mode is None:
        max_mode = grid.n // 6
    white = rng.standard_normal(grid.shape)
    hat = np.fft.fftn(white)
    scale = 2.0 * np.pi / grid.box_length
    radial2 = grid.k2 / scale**2
    hat[radial2 > max_mode**2] = 0.0
    if zero_mean:
        hat[(0,) * grid.dim] = 0.0
    v = np.fft.ifftn(hat).real
    m = np.max(np.abs(v))
    if m > 0:
        v = v * (amplitude / m)
    return ScalarField(grid, v)


# ----------------------------------------------------------------------
# snapshot files: one scalar field per file
#   header line "NSKF1 dim n L rho_bar t", then little-endian float64,
#   row-major

_MAGIC = "NSKF1"


def write_snapshot(f: ScalarField, t: float, path) -> None:
    g = f.grid
    header = f"{_MAGIC} {g.dim} {g.n} {g.box_length:.17g} {g.far_field_density:.17g} {t:.17g}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshot(path) -> tuple[ScalarField, float]:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 6 or header[0] != _MAGIC:
            raise FieldError(f"not a {_MAGIC} snapshot: {path}")
        dim, n = int(header[1]), int(header[2])
        box_length, rho_bar, t = (float(x) for x in header[3:6])
        grid = Grid(dim, n, box_length, rho_bar)
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if raw.size != n**dim:
        raise FieldError(f"snapshot payload has {raw.size} values, expected {n**dim}")
    return ScalarField(grid, raw.reshape(grid.shape).copy()), t
