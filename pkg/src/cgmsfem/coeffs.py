"""Per-element material fields: periodic microstructures, rasters and log-Gaussian KLE samples."""
from dataclasses import dataclass

import numpy as np

FIELD_NAMES = ("lam", "mu", "kappa", "beta")


@dataclass(frozen=True)
class MaterialField:
    """Lame coefficients, conductivity and thermal expansion, one value per fine element."""

    lam: np.ndarray
    mu: np.ndarray
    kappa: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        n = None
        for name in FIELD_NAMES:
            a = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, a)
            if a.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            if n is not None and a.size != n:
                raise ValueError("all material fields must have the same length")
            n = a.size
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise ValueError(f"material field {name!r} must be finite and strictly positive")

    @classmethod
    def constant(cls, n_elements, lam=1.0, mu=1.0, kappa=1.0, beta=1.0):
        c = lambda v: np.full(n_elements, float(v))
        return cls(c(lam), c(mu), c(kappa), c(beta))

    def contrasts(self):
        return {name: float(getattr(self, name).max() / getattr(self, name).min())
                for name in FIELD_NAMES}

    def scaled(self, **factors):
        kw = {name: getattr(self, name) * factors.get(name, 1.0) for name in FIELD_NAMES}
        return MaterialField(**kw)


def lame_from_young(E, nu):
    """(lambda, mu) from Young's modulus and Poisson's ratio."""
    E = np.asarray(E, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= -1) or np.any(nu >= 0.5):
        raise ValueError("Poisson's ratio must lie in (-1, 0.5)")
    mu = E / (2 * (1 + nu))
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    return lam, mu


def _check_values(value_min, value_max):
    if not (value_min > 0) or value_max < value_min:
        raise ValueError(f"need value_max >= value_min > 0, got {value_min}, {value_max}")


def phase_indicator(mesh, period, inclusion_shape="square", size=0.5):
    """Boolean inclusion mask per element for a periodic microstructure.

    ``period`` is the side of one periodic cell in fine cells. Shapes:
    ``square`` / ``disk`` are centred in every period cell with side (diameter)
    ``size * period``; ``checkerboard`` fills alternate period cells.
    """
    if period < 1 or mesh.nx % period or mesh.ny % period:
        raise ValueError(f"period {period} must divide the fine grid {mesh.nx}x{mesh.ny}")
    c = mesh.centroids()
    ix = c[:, 0] * mesh.nx / period
    iy = c[:, 1] * mesh.ny / period
    if inclusion_shape == "checkerboard":
        return (np.floor(ix).astype(int) + np.floor(iy).astype(int)) % 2 == 1
    if not 0 <= size <= 1:
        raise ValueError(f"inclusion size {size} does not fit in the period cell")
    fx = ix - np.floor(ix) - 0.5
    fy = iy - np.floor(iy) - 0.5
    if inclusion_shape == "square":
        return (np.abs(fx) < size / 2) & (np.abs(fy) < size / 2)
    if inclusion_shape == "disk":
        return fx ** 2 + fy ** 2 < (size / 2) ** 2
    raise ValueError(f"unknown inclusion shape {inclusion_shape!r}")


def periodic_field(mesh, period, inclusion_shape, value_min, value_max, size=0.5):
    _check_values(value_min, value_max)
    mask = phase_indicator(mesh, period, inclusion_shape, size)
    return np.where(mask, float(value_max), float(value_min))


def two_phase_field(mask, value_min, value_max):
    _check_values(value_min, value_max)
    return np.where(mask, float(value_max), float(value_min))


def read_raster(path):
    return np.loadtxt(path, ndmin=2)


def raster_field(mesh, grid_of_values):
    """Element values from a raster; row 0 of the raster is the top (y = 1) row."""
    g = np.asarray(grid_of_values, dtype=float)
    if g.ndim != 2:
        raise ValueError("raster must be a 2D matrix")
    rows, cols = g.shape
    if mesh.nx % cols or mesh.ny % rows:
        raise ValueError(f"raster {rows}x{cols} does not map evenly onto a {mesh.nx}x{mesh.ny} grid")
    if not np.all(np.isfinite(g)) or np.any(g <= 0):
        raise ValueError("raster values must be finite and positive")
    c = mesh.centroids()
    col = np.minimum((c[:, 0] * cols).astype(int), cols - 1)
    row = np.minimum((c[:, 1] * rows).astype(int), rows - 1)
    return g[rows - 1 - row, col]


@dataclass(frozen=True)
class KleSpec:
    length: float = 0.01
    sigma: float = 10.0
    mean: float = 0.0
    terms: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("correlation length must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.terms < 1:
            raise ValueError("need at least one KLE term")


def _kernel_1d(x, length):
    d = x[:, None] - x[None, :]
    return np.exp(-d ** 2 / length ** 2)


def kle_modes(nx, ny, length, terms):
    """Leading eigenpairs of the unit-variance squared-exponential covariance on the cell-centre grid.

    Returns ``(values, vectors)`` with ``vectors`` of shape ``(nx * ny, terms)`` in
    row-major cell order (index ``j * nx + i``), unit Euclidean norm, values descending.
    The separable kernel factors as ``Cy kron Cx``; its eigenpairs are products of
    the 1D ones.
    """
    if terms > nx * ny:
        raise ValueError(f"requested {terms} KLE terms but only {nx * ny} tensor modes exist")
    xs = (np.arange(nx) + 0.5) / nx
    ys = (np.arange(ny) + 0.5) / ny
    ax, ux = np.linalg.eigh(_kernel_1d(xs, length))
    ay, uy = np.linalg.eigh(_kernel_1d(ys, length))
    ax = np.clip(ax, 0.0, None)
    ay = np.clip(ay, 0.0, None)
    prod = np.outer(ay, ax).ravel()  # index b * nx + a
    order = np.lexsort((np.arange(prod.size), -prod))[:terms]
    b, a = np.divmod(order, nx)
    vecs = uy[:, b][:, None, :] * ux[:, a][None, :, :]  # (ny, nx, terms)
    return prod[order], vecs.reshape(nx * ny, terms)


def kle_log_field(mesh, spec, rng=None):
    """Gaussian log-field on cells: ``mean + sigma * sum_k sqrt(lam_k) v_k xi_k``."""
    vals, vecs = kle_modes(mesh.nx, mesh.ny, spec.length, spec.terms)
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    xi = rng.standard_normal(spec.terms)
    cell = spec.mean + spec.sigma * (vecs @ (np.sqrt(vals) * xi))
    return cell[mesh.cell_of_element()]


def sample_kle_field(mesh, spec, rng=None):
    """Log-Gaussian coefficient sample, one value per element (both triangles of a cell share it)."""
    out = np.exp(kle_log_field(mesh, spec, rng))
    if not np.all(np.isfinite(out)) or np.any(out <= 0):
        raise FloatingPointError("KLE sample is not finite; reduce sigma or the mean")
    return out


def captured_variance(nx, ny, spec):
    """Pointwise variance of the truncated log-field, per cell."""
    vals, vecs = kle_modes(nx, ny, spec.length, spec.terms)
    return spec.sigma ** 2 * (vecs ** 2 @ vals)
