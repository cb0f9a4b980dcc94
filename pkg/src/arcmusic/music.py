"""MUSIC imaging functional and its closed-form Bessel predictors.

The imaging functional is ``W(z) = 1 / |P_noise f(z)|`` with the plane-wave
test vector ``f(z) = N^{-1/2} [exp(i k theta_n . z)]_n``. For a sound-hard
arc sampled at half-wavelength points ``y_m`` with normals ``n_m`` the map
is predicted by

    W(z) ~ (1 - 2 sum_m ((z - y_m)/|z - y_m| . n_m)^2 J1(k|z - y_m|)^2)^(-1/2),

and, with test vectors matched to the normals, by
``(1 - sum_m J0(k|z - y_m|)^2)^(-1/2)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import specfun
from .errors import DegenerateGeometryError, DomainError, NumericalError
from .geometry import EffectiveSampling
from .msr import DirectionSet, MsrMatrix, SvdResult

PROJECTION_FLOOR = 1e-8
CLAMPED_VALUE = 1e8
RADICAND_FLOOR = 1e-6
CHUNK = 4096

MUSIC = "music"
THEORY_J1 = "theory_j1"
THEORY_J0 = "theory_j0"


@dataclass(frozen=True)
class NoiseProjector:
    """``P = I - sum_{m <= M} U_m U_m^*`` stored through its signal basis."""

    basis: np.ndarray

    @classmethod
    def from_svd(cls, result: SvdResult, rank: int):
        n = result.left_vectors.shape[0]
        if not 0 <= rank < n:
            raise DomainError(f"signal rank must satisfy 0 <= M < N={n}, got {rank}")
        return cls(result.left_vectors[:, :rank].copy())

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    @property
    def signal_rank(self) -> int:
        return self.basis.shape[1]

    def matrix(self) -> np.ndarray:
        u = self.basis
        return np.eye(self.dimension) - u @ u.conj().T

    def apply(self, f):
        """Project vectors stored along the last axis of ``f``."""
        f = np.asarray(f)
        if self.signal_rank == 0:
            return f.copy()
        u = self.basis
        return f - (f @ u.conj()) @ u.T


def steering_vector(z, directions: DirectionSet, k: float):
    """Unit test vector ``N^{-1/2} exp(i k theta_n . z)``; ``z`` may be batched."""
    theta = directions.vectors
    z = np.asarray(z, dtype=float)
    return np.exp(1j * k * (z @ theta.T)) / np.sqrt(len(theta))


def steering_vector_general(z, c, directions: DirectionSet, k: float):
    """Unnormalised test vector with entries ``(c_n . theta_n) exp(i k theta_n . z)``."""
    theta = directions.vectors
    c = np.asarray(c, dtype=float)
    if c.shape == (2,):
        c = np.broadcast_to(c, theta.shape)
    weights = np.einsum("nd,nd->n", c, theta)
    if np.all(np.abs(weights) < 1e-14):
        raise NumericalError("degenerate test vector: every c_n is orthogonal to theta_n")
    z = np.asarray(z, dtype=float)
    return weights * np.exp(1j * k * (z @ theta.T))


def music_value(projector: NoiseProjector, f):
    """``(W, clamped)`` for unit test vector(s) ``f``.

    ``W = 1/|P f|``; where ``|P f| < 1e-8`` the value is clamped to 1e8.
    """
    norm = np.linalg.norm(projector.apply(f), axis=-1)
    clamped = norm < PROJECTION_FLOOR
    w = np.where(clamped, CLAMPED_VALUE, 1.0 / np.where(clamped, 1.0, norm))
    if np.ndim(w) == 0:
        return float(w), bool(clamped)
    return w, clamped


@dataclass(frozen=True)
class ImageGrid:
    """Rectangular lattice of search points; ``values[i, j]`` sits at ``(x_i, y_j)``."""

    x_min: float = -1.0
    x_max: float = 1.0
    y_min: float = -1.0
    y_max: float = 1.0
    nx: int = 201
    ny: int = 201

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise DomainError("grid resolution must be at least 2 x 2")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DomainError("grid bounds must be ordered")

    @property
    def xs(self):
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ys(self):
        return np.linspace(self.y_min, self.y_max, self.ny)

    def points(self):
        """Array of shape ``(nx, ny, 2)``."""
        x, y = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.stack([x, y], axis=-1)

    def describe(self) -> str:
        return f"{self.nx}x{self.ny} [{self.x_min:g},{self.x_max:g}]x[{self.y_min:g},{self.y_max:g}]"


@dataclass
class ImagingMap:
    grid: ImageGrid
    values: np.ndarray
    kind: str
    metadata: dict = field(default_factory=dict)

    @property
    def clamp_count(self) -> int:
        return int(self.metadata.get("clamp_count", 0))

    def value_range(self):
        return float(np.min(self.values)), float(np.max(self.values))


def _evaluate_chunks(func, points, workers):
    """Apply ``func`` to row-chunks of ``points`` (shape (P, 2)); order-stable."""
    chunks = [points[i:i + CHUNK] for i in range(0, len(points), CHUNK)]
    if workers and workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(func, chunks))
    else:
        parts = [func(c) for c in chunks]
    values = np.concatenate([p[0] for p in parts])
    flags = np.concatenate([p[1] for p in parts])
    return values, flags


def music_values(projector: NoiseProjector, points, directions: DirectionSet, k: float,
                 workers: int = 1):
    """MUSIC functional at arbitrary points ``(..., 2)``; returns ``(W, clamped)``."""
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 2)
    values, flags = _evaluate_chunks(
        lambda c: music_value(projector, steering_vector(c, directions, k)), flat, workers
    )
    return values.reshape(pts.shape[:-1]), flags.reshape(pts.shape[:-1])


def compute_map(result: SvdResult, rank: int, grid: ImageGrid, directions: DirectionSet,
                k: float, workers: int = 1, metadata=None) -> ImagingMap:
    """MUSIC map over ``grid`` using the first ``rank`` left singular vectors."""
    n = result.left_vectors.shape[0]
    if rank >= n or rank < 0:
        raise DomainError(f"signal rank must satisfy 0 <= M < N={n}, got {rank}")
    projector = NoiseProjector.from_svd(result, rank)
    values, flags = music_values(projector, grid.points(), directions, k, workers)
    meta = {"N": n, "M": rank, "k": k, "wavelength": 2 * np.pi / k,
            "clamp_count": int(np.count_nonzero(flags))}
    meta.update(metadata or {})
    return ImagingMap(grid, values, MUSIC, meta)


def _offsets(sampling: EffectiveSampling, pts):
    d = pts[:, None, :] - sampling.points[None, :, :]
    r = np.linalg.norm(d, axis=-1)
    return d, r


def theory_j1_values(sampling: EffectiveSampling, points, k: float):
    """Closed-form J1 predictor at points ``(..., 2)``; returns ``(W, clamped)``."""
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 2)
    out_w, out_c = [], []
    for i in range(0, len(flat), CHUNK):
        d, r = _offsets(sampling, flat[i:i + CHUNK])
        dn = np.einsum("pmd,md->pm", d, sampling.normals)
        safe = np.where(r > 0, r, 1.0)
        cos2 = np.where(r > 0, (dn / safe) ** 2, 0.0)
        terms = cos2 * specfun.bessel_j(1, k * r) ** 2
        rad = 1.0 - 2.0 * terms.sum(axis=1)
        clamped = rad <= RADICAND_FLOOR
        out_w.append(np.maximum(rad, RADICAND_FLOOR) ** -0.5)
        out_c.append(clamped)
    return np.concatenate(out_w).reshape(pts.shape[:-1]), np.concatenate(out_c).reshape(pts.shape[:-1])


def theory_j0_values(sampling: EffectiveSampling, points, k: float):
    """Closed-form J0 predictor ``(1 - sum_m J0(k|z-y_m|)^2)^(-1/2)``."""
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 2)
    out_w, out_c = [], []
    for i in range(0, len(flat), CHUNK):
        _, r = _offsets(sampling, flat[i:i + CHUNK])
        rad = 1.0 - (specfun.bessel_j(0, k * r) ** 2).sum(axis=1)
        clamped = rad <= RADICAND_FLOOR
        out_w.append(np.maximum(rad, RADICAND_FLOOR) ** -0.5)
        out_c.append(clamped)
    return np.concatenate(out_w).reshape(pts.shape[:-1]), np.concatenate(out_c).reshape(pts.shape[:-1])


def _theory_map(func, kind, sampling, grid, k, metadata):
    if sampling.count < 1:
        raise DomainError("sampling must contain at least one point")
    if not k > 0:
        raise DomainError("wavenumber must be positive")
    values, flags = func(sampling, grid.points(), k)
    meta = {"M": sampling.count, "k": k, "wavelength": 2 * np.pi / k,
            "clamp_count": int(np.count_nonzero(flags))}
    meta.update(metadata or {})
    return ImagingMap(grid, values, kind, meta)


def theory_map_j1(sampling: EffectiveSampling, grid: ImageGrid, k: float, metadata=None):
    return _theory_map(theory_j1_values, THEORY_J1, sampling, grid, k, metadata)


def theory_map_j0(sampling: EffectiveSampling, grid: ImageGrid, k: float, metadata=None):
    return _theory_map(theory_j0_values, THEORY_J0, sampling, grid, k, metadata)


def illumination_vectors(sampling: EffectiveSampling, directions: DirectionSet, k: float):
    """Unit-normalised columns ``[(theta_n . n_m) exp(i k theta_n . y_m)]_n``."""
    theta = directions.vectors
    cols = (theta @ sampling.normals.T) * np.exp(1j * k * (theta @ sampling.points.T))
    return cols / np.linalg.norm(cols, axis=0, keepdims=True)


def synthetic_msr(sampling: EffectiveSampling, directions: DirectionSet, k: float, sigmas,
                  min_separation=None) -> MsrMatrix:
    """Factorised response ``K = sum_m sigma_m U_m U_m^T`` of point-like scatterers.

    ``min_separation`` defaults to a quarter wavelength.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.shape != (sampling.count,) or np.any(sigmas <= 0):
        raise DomainError("need one positive sigma per sampling point")
    if sampling.count >= directions.count:
        raise DomainError("synthetic MSR needs fewer points than directions")
    if min_separation is None:
        min_separation = 0.25 * (2 * np.pi / k)
    pts = sampling.points
    if sampling.count > 1:
        gaps = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
        gaps[np.diag_indices_from(gaps)] = np.inf
        if np.min(gaps) < min_separation:
            raise DegenerateGeometryError(
                f"sampling points closer than {min_separation:g}: {np.min(gaps):.3g}")
    u = illumination_vectors(sampling, directions, k)
    entries = (u * sigmas[None, :]) @ u.T
    return MsrMatrix(entries, directions, float(k), None, ("synthetic",))


def local_maxima(values):
    """Indices of strict interior local maxima of a 1-D profile."""
    v = np.asarray(values)
    inner = np.arange(1, len(v) - 1)
    mask = (v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])
    return inner[mask]


def normal_line(point, normal, half_width, samples):
    """Offsets ``t`` and points ``point + t * normal`` on a symmetric segment."""
    t = np.linspace(-half_width, half_width, samples)
    return t, np.asarray(point)[None, :] + t[:, None] * np.asarray(normal)[None, :]


@dataclass(frozen=True)
class RidgeReport:
    """Twin-ridge geometry along a normal line through an arc point."""

    offsets: tuple
    expected: float
    centre_is_minimum: bool
    passed: bool


def ridge_offsets(profile_t, profile_w, expected, rel_tol=0.2):
    """Locate the two largest local maxima of ``W`` on a normal line.

    The test passes when there is one maximum on each side of the arc, both
    at distance ``expected`` within ``rel_tol``, and the centre sample is a
    local minimum.
    """
    t = np.asarray(profile_t)
    w = np.asarray(profile_w)
    peaks = local_maxima(w)
    centre = int(np.argmin(np.abs(t)))
    is_min = 0 < centre < len(w) - 1 and w[centre] < w[centre - 1] and w[centre] < w[centre + 1]
    if len(peaks) < 2:
        return RidgeReport(tuple(t[peaks]), expected, bool(is_min), False)
    top = peaks[np.argsort(w[peaks])[::-1][:2]]
    offs = np.sort(t[top])
    ok = (offs[0] < 0 < offs[1]) and np.all(np.abs(np.abs(offs) - expected) <= rel_tol * expected)
    return RidgeReport(tuple(float(o) for o in offs), float(expected), bool(is_min),
                       bool(ok and is_min))
