"""Multistatic response matrix: assembly, noise, SVD, and rank selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, NumericalError
from .forward import DEFAULT_NODES, ForwardSolver, _as_arcs

UNIFORM = "uniform"
PAPER_FORMULA = "paper_formula"
_SCHEME_ALIASES = {"uniform": UNIFORM, "paper": PAPER_FORMULA, "paper_formula": PAPER_FORMULA}

DEFAULT_TAU = 0.01


@dataclass(frozen=True)
class DirectionSet:
    """Incident directions ``theta_l``; observation directions are ``-theta_j``."""

    vectors: np.ndarray
    scheme: str

    @property
    def count(self) -> int:
        return len(self.vectors)

    @property
    def observations(self) -> np.ndarray:
        return -self.vectors


def build_directions(n: int, scheme: str = UNIFORM) -> DirectionSet:
    """Direction set ``theta_l = -(cos a_l, sin a_l)``.

    ``uniform`` uses ``a_l = 2 pi (l-1)/N``. ``paper_formula`` uses
    ``a_l = 2 pi (l-1)/(N-1)``, which makes the first and last directions
    coincide.
    """
    if int(n) != n or n < 2:
        raise DomainError("need at least two directions")
    n = int(n)
    try:
        scheme = _SCHEME_ALIASES[scheme]
    except KeyError:
        raise DomainError(f"unknown direction scheme {scheme!r}") from None
    l = np.arange(n)
    angles = 2 * np.pi * l / (n if scheme == UNIFORM else n - 1)
    vectors = -np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    vectors.setflags(write=False)
    return DirectionSet(vectors, scheme)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise at ``snr_db`` decibels; ``inf`` disables it."""

    snr_db: float
    seed: int = 20140601

    def __post_init__(self):
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise DomainError("snr_db must be finite or +inf")

    @property
    def enabled(self) -> bool:
        return math.isfinite(self.snr_db)


@dataclass(frozen=True)
class MsrMatrix:
    """``entries[j, l] = u_inf(-theta_j, theta_l)``."""

    entries: np.ndarray
    directions: DirectionSet
    wavenumber: float
    noise: NoiseSpec | None = None
    arc_labels: tuple = ()

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def symmetry_defect(self) -> float:
        """``||K - K^T||_F / ||K||_F``."""
        k = self.entries
        return float(np.linalg.norm(k - k.T) / np.linalg.norm(k))


def assemble_msr(arcs, k: float, directions: DirectionSet, nodes: int = DEFAULT_NODES,
                 solver: ForwardSolver | None = None) -> MsrMatrix:
    """Far-field MSR matrix of one or several arcs, solved as one coupled system."""
    arcs = _as_arcs(arcs)
    if solver is None:
        solver = ForwardSolver(arcs, k, nodes)
    theta = directions.vectors
    entries = solver.far_field_matrix(-theta, theta)
    if not np.all(np.isfinite(entries)):
        raise NumericalError("non-finite far-field values")
    return MsrMatrix(entries, directions, float(k), None, tuple(a.label for a in arcs))


def add_awgn(msr: MsrMatrix, spec: NoiseSpec) -> MsrMatrix:
    """Add complex white Gaussian noise calibrated to the matrix mean power.

    Signal power is ``mean |K_jl|^2``; each entry receives a circular complex
    Gaussian of variance ``P / 10^(snr/10)``. Samples are drawn from
    ``numpy.random.default_rng(seed)`` in row-major order, real part first.
    """
    if not spec.enabled:
        return replace(msr, noise=spec)
    k = msr.entries
    power = float(np.mean(np.abs(k) ** 2))
    noise_power = power / 10.0 ** (spec.snr_db / 10.0)
    rng = np.random.default_rng(spec.seed)
    draws = rng.standard_normal(k.shape + (2,))
    noise = math.sqrt(noise_power / 2.0) * (draws[..., 0] + 1j * draws[..., 1])
    return replace(msr, entries=k + noise, noise=spec)


@dataclass(frozen=True)
class SvdResult:
    """``K = sum_m sigma_m U_m V_m^*`` with columns of ``left``/``right`` as vectors."""

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self):
        return (self.left_vectors * self.singular_values) @ self.right_vectors.conj().T


def svd(matrix) -> SvdResult:
    """Complex SVD with a fixed phase convention.

    Square inputs (every MSR matrix) get the full decomposition; rectangular
    ones get the reduced form with ``min(m, n)`` vector pairs.

    Each left singular vector is rotated so that its first component of
    non-negligible modulus is real and positive; the matching right vector
    gets the same phase so the product is unchanged.
    """
    k = matrix.entries if isinstance(matrix, MsrMatrix) else np.asarray(matrix)
    if not np.all(np.isfinite(k)):
        raise NumericalError("matrix has non-finite entries")
    try:
        u, s, vh = np.linalg.svd(k.astype(complex), full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    v = vh.conj().T
    mags = np.abs(u)
    first = np.argmax(mags > 1e-8 * mags.max(axis=0, keepdims=True), axis=0)
    pivot = u[first, np.arange(u.shape[1])]
    phase = np.conj(pivot) / np.abs(pivot)
    return SvdResult(s, u * phase[None, :], v * phase[None, :])


def select_rank(singular_values, tau: float = DEFAULT_TAU) -> int:
    """Number of singular values with ``sigma_m / sigma_1 >= tau``."""
    s = np.asarray(singular_values, dtype=float)
    if not 0 < tau <= 1:
        raise DomainError("tau must lie in (0, 1]")
    if s.size == 0 or not s[0] > 0:
        raise NumericalError("largest singular value is zero; no signal")
    return int(np.count_nonzero(s / s[0] >= tau))
