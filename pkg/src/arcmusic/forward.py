r"""Sound-hard scattering from open arcs by a spectral Nystrom method.

The scattered field is a double-layer potential

    u_s(x) = \int_\Gamma d\Phi(x,y)/dn(y) \psi(y) ds(y),   \Phi = (i/4) H_0^{(1)}(k|x-y|),

and the Neumann condition gives the hypersingular equation
``T psi = -du_i/dn`` on the arc. With the Maue identity

    T psi = d/ds S[d psi/ds] + k^2 n . S[n psi]

and the cosine substitution ``s = cos t`` with ``phi(t) = psi(gamma(cos t))``
(an odd 2 pi-periodic function that vanishes like ``sqrt(1 - s^2)`` at the
tips), the equation multiplied by ``-|gamma'(cos tau)| sin tau`` reads

    -1/2 d/dtau \int_0^{2pi} Phi(tau,t) phi'(t) dt
        - k^2/2 sin(tau)|gamma'| \int_0^{2pi} Phi(tau,t) n.n |gamma'| sin(t) phi(t) dt
        = sin(tau) |gamma'(cos tau)| du_i/dn.

For integrands even in ``t`` the two logarithmic singularities at ``t = +-tau``
fold into a single ``ln(4 sin^2((tau-t)/2))``. The pure logarithm part of the
first operator is diagonal on ``sin(m t)`` (multiplier ``m/2``); the rest is
discretised with trigonometric product weights for the logarithm and the
trapezoid rule for smooth kernels, and the outer ``d/dtau`` is applied by
spectral differentiation. Convergence is exponential for analytic arcs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import specfun
from .errors import ConsistencyError, DomainError, SolverError
from .geometry import ArcCurve, check_arc, check_disjoint

DEFAULT_NODES = 128
MAX_CONDITION = 1e14
TAIL_TOLERANCE = 1e-8
NEAR_DISTANCE = 1e-3
NEAR_CHECK_SAMPLES = 4097


class AccuracyWarning(UserWarning):
    """Density coefficients have not decayed at the requested node count."""


def _as_arcs(arc):
    if isinstance(arc, ArcCurve):
        return (arc,)
    arcs = tuple(arc)
    if not arcs:
        raise DomainError("at least one arc is required")
    return arcs


def _unit(v, name):
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-10):
        raise DomainError(f"{name} must be unit vectors")
    return v


def _divided_difference(coeffs, a, b):
    """``(p(a) - p(b)) / (a - b)`` for a polynomial, exact on ``a == b``."""
    coeffs = np.asarray(coeffs, dtype=float)
    out = np.zeros(np.broadcast(a, b).shape)
    # sum_k c_k sum_{l<k} a^l b^(k-1-l), evaluated by a Horner-like recursion
    h = np.zeros_like(out)
    apow = np.ones_like(out)
    for c in coeffs[1:]:
        h = h * b + apow
        apow = apow * a
        out = out + c * h
    return out


@dataclass
class _Panel:
    """Quadrature nodes ``t_j = j pi / n`` (j = 0..2n-1) on one arc."""

    arc: ArcCurve
    n: int
    t: np.ndarray = field(init=False)
    c: np.ndarray = field(init=False)
    x: np.ndarray = field(init=False)
    dz: np.ndarray = field(init=False)
    speed: np.ndarray = field(init=False)
    normal: np.ndarray = field(init=False)

    def __post_init__(self):
        self.t = np.arange(2 * self.n) * np.pi / self.n
        self.c = np.cos(self.t)
        self.x = self.arc.point(self.c)
        self.dz = self.arc.derivative(self.c)
        self.speed = np.linalg.norm(self.dz, axis=-1)
        self.normal = np.stack([-self.dz[:, 1], self.dz[:, 0]], axis=-1) / self.speed[:, None]

    @property
    def interior(self):
        return slice(1, self.n)


def _log_weights(n):
    """Kress weights ``R_j(t_i)`` for ``\\int_0^{2pi} ln(4 sin^2((t_i-t)/2)) f(t) dt``.

    On the grid they depend only on ``(i - j) mod 2n``.
    """
    d = np.arange(2 * n) * np.pi / n
    m = np.arange(1, n)
    row = -(2 * np.pi / n) * (np.cos(np.outer(d, m)) @ (1.0 / m)) - (np.pi / n**2) * np.cos(n * d)
    idx = (np.arange(2 * n)[:, None] - np.arange(2 * n)[None, :]) % (2 * n)
    return row[idx]


class _Spectral:
    """Sine-series maps between interior nodal values and full-grid data."""

    def __init__(self, n):
        self.n = n
        t = np.arange(2 * n) * np.pi / n
        m = np.arange(1, n)
        t_in = t[1:n]
        # nodal -> sine coefficients (exact DST-I inversion)
        self.to_coeffs = (2.0 / n) * np.sin(np.outer(m, t_in))
        sin_full = np.sin(np.outer(t, m))
        cos_full = np.cos(np.outer(t, m))
        self.values_full = sin_full @ self.to_coeffs
        self.deriv_full = (cos_full * m[None, :]) @ self.to_coeffs
        self.principal = 0.5 * (np.sin(np.outer(t_in, m)) * m[None, :]) @ self.to_coeffs
        # periodic spectral differentiation, even node count, rows = interior
        i = np.arange(1, n)[:, None]
        j = np.arange(2 * n)[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            d = 0.5 * (-1.0) ** (i - j) / np.tan(0.5 * (t[i] - t[j]))
        d[i == j] = 0.0
        self.diff = d
        self.log_weights = _log_weights(n)


def _pair_geometry(target: _Panel, source: _Panel):
    diff = target.x[:, None, :] - source.x[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    nn = target.normal @ source.normal.T
    return r, nn


def _self_kernels(panel: _Panel, k: float):
    """Smooth kernels K1, L, K3 of the self-interaction on the full grid."""
    n = panel.n
    t = panel.t
    ti, tj = t[:, None], t[None, :]
    ci, cj = panel.c[:, None], panel.c[None, :]
    same = (np.arange(2 * n)[:, None] == np.arange(2 * n)[None, :]) | (
        (np.arange(2 * n)[:, None] + np.arange(2 * n)[None, :]) % (2 * n) == 0
    )
    dc = -2.0 * np.sin(0.5 * (ti + tj)) * np.sin(0.5 * (ti - tj))
    ddx = _divided_difference(panel.arc.x_coeffs, ci, cj)
    ddy = _divided_difference(panel.arc.y_coeffs, ci, cj)
    rho = np.hypot(ddx, ddy)
    r = np.abs(dc) * rho
    kr = k * np.where(same, 1.0, r)
    j0 = np.where(same, 1.0, specfun.bessel_j(0, np.where(same, 0.0, kr)))
    h0 = specfun.hankel1(0, kr)
    phi = 0.25j * h0
    with np.errstate(divide="ignore"):
        logdc = np.log(np.where(same, 1.0, np.abs(dc)))
    k1 = -j0 / (2 * np.pi)
    k3 = phi - k1 * logdc - np.log(2.0) * k1
    diag = (
        0.25j
        - (np.log(0.5 * k * rho) + specfun.EULER_GAMMA) / (2 * np.pi)
        + np.log(2.0) / (2 * np.pi)
    )
    k3 = np.where(same, diag, k3)
    ell = (1.0 - j0) / (2 * np.pi)
    return k1, ell, k3


def _block(target: _Panel, source: _Panel, k: float, spec: _Spectral, self_block: bool):
    n = target.n
    w = np.pi / n
    inner = target.interior
    jac_t = np.sin(target.t[inner]) * target.speed[inner]
    weight_src = source.speed * np.sin(source.t)
    r, nn = _pair_geometry(target, source)
    if self_block:
        k1, ell, k3 = _self_kernels(target, k)
        q1 = spec.log_weights * ell + w * k3
        q2 = (spec.log_weights[inner] * k1[inner] + w * k3[inner]) * nn[inner]
    else:
        phi = 0.25j * specfun.hankel1(0, k * r)
        q1 = w * phi
        q2 = w * phi[inner] * nn[inner]
    first = -0.5 * spec.diff @ (q1 @ spec.deriv_full)
    second = -0.5 * k**2 * jac_t[:, None] * ((q2 * weight_src[None, :]) @ spec.values_full)
    out = first + second
    if self_block:
        out = out + spec.principal
    return out


@dataclass
class DensitySolution:
    """Jump density ``psi`` on one or more arcs for a single incidence.

    ``coefficients[p][m-1]`` is the coefficient of ``sin(m t)`` in
    ``psi(gamma_p(cos t))``, i.e. ``psi(s) = sqrt(1 - s^2) sum_m a_m U_{m-1}(s)``.
    """

    coefficients: list
    values: list
    incident_direction: np.ndarray
    wavenumber: float
    node_count: int
    arc_labels: tuple
    tail: float = 0.0
    accuracy_warning: bool = False

    def density(self, s, arc_index=0):
        """Evaluate ``psi`` at canonical parameters ``s`` on one arc."""
        s = np.clip(np.asarray(s, dtype=float), -1.0, 1.0)
        t = np.arccos(s)
        a = self.coefficients[arc_index]
        m = np.arange(1, len(a) + 1)
        return np.sin(np.multiply.outer(t, m)) @ a


@dataclass(frozen=True)
class FarFieldSample:
    observation_direction: np.ndarray
    incident_direction: np.ndarray
    value: complex
    wavenumber: float


class ForwardSolver:
    """Assembled and factorised Nystrom system for fixed arcs, k, and nodes.

    The system matrix does not depend on the incident direction, so one LU
    factorisation serves every right-hand side.
    """

    def __init__(self, arcs, k, nodes=DEFAULT_NODES, check=True, assemble=True):
        self.arcs = _as_arcs(arcs)
        if not k > 0:
            raise DomainError("wavenumber must be positive")
        if nodes < 16:
            raise DomainError("nodes must be at least 16")
        if check:
            for a in self.arcs:
                check_arc(a)
            if len(self.arcs) > 1:
                check_disjoint(self.arcs)
        self.k = float(k)
        self.n = int(nodes)
        self.spec = _Spectral(self.n)
        self.panels = [_Panel(a, self.n) for a in self.arcs]
        self.matrix = self._lu = None
        self.condition = float("nan")
        if assemble:
            self.factorize()

    def factorize(self):
        self.matrix = self._assemble()
        self.condition = float(np.linalg.cond(self.matrix))
        if not np.isfinite(self.condition) or self.condition > MAX_CONDITION:
            raise SolverError(f"discrete system ill-conditioned (cond = {self.condition:.3e})")
        self._lu = sla.lu_factor(self.matrix)

    @property
    def labels(self):
        return tuple(a.label for a in self.arcs)

    @property
    def unknowns_per_arc(self):
        return self.n - 1

    def _assemble(self):
        size = self.n - 1
        total = size * len(self.panels)
        mat = np.empty((total, total), dtype=complex)
        for p, tgt in enumerate(self.panels):
            for q, src in enumerate(self.panels):
                mat[p * size:(p + 1) * size, q * size:(q + 1) * size] = _block(
                    tgt, src, self.k, self.spec, p == q
                )
        return mat

    def rhs(self, thetas):
        """Right-hand sides, one column per incident direction."""
        thetas = np.atleast_2d(thetas)
        cols = []
        for pan in self.panels:
            inner = pan.interior
            x, nrm = pan.x[inner], pan.normal[inner]
            jac = np.sin(pan.t[inner]) * pan.speed[inner]
            phase = np.exp(1j * self.k * (x @ thetas.T))
            cols.append(jac[:, None] * 1j * self.k * (nrm @ thetas.T) * phase)
        return np.concatenate(cols, axis=0)

    def solve_values(self, thetas):
        """Interior nodal density values, shape ``(unknowns, len(thetas))``."""
        if self._lu is None:
            self.factorize()
        return sla.lu_solve(self._lu, self.rhs(thetas))

    def _pack(self, u, theta):
        size = self.n - 1
        values = [u[p * size:(p + 1) * size].copy() for p in range(len(self.panels))]
        coeffs = [self.spec.to_coeffs @ v for v in values]
        peak = max(np.max(np.abs(c)) for c in coeffs)
        start = int(0.9 * size)
        tail = max(np.max(np.abs(c[start:])) for c in coeffs) / peak if peak > 0 else 0.0
        flagged = tail > TAIL_TOLERANCE
        if flagged:
            warnings.warn(
                f"density tail {tail:.2e} exceeds {TAIL_TOLERANCE:g} at nodes={self.n}",
                AccuracyWarning,
                stacklevel=3,
            )
        return DensitySolution(coeffs, values, np.asarray(theta, float), self.k, self.n,
                               self.labels, float(tail), flagged)

    def solve(self, theta) -> DensitySolution:
        theta = _unit(np.asarray(theta, dtype=float).reshape(2), "theta")
        u = self.solve_values(theta[None, :])[:, 0]
        return self._pack(u, theta)

    def far_field_operator(self, x_hats):
        """Matrix mapping interior nodal densities to far-field values."""
        x_hats = np.atleast_2d(x_hats)
        w = np.pi / self.n
        blocks = []
        for pan in self.panels:
            inner = pan.interior
            rot = np.stack([-pan.dz[inner, 1], pan.dz[inner, 0]], axis=-1)
            geom = (x_hats @ rot.T) * np.sin(pan.t[inner])[None, :]
            blocks.append(w * geom * np.exp(-1j * self.k * (x_hats @ pan.x[inner].T)))
        pref = np.sqrt(self.k / (8 * np.pi)) * np.exp(-0.25j * np.pi)
        return pref * np.concatenate(blocks, axis=1)

    def far_field_matrix(self, x_hats, thetas):
        """``F[j, l] = u_inf(x_hats[j], thetas[l])``."""
        return self.far_field_operator(x_hats) @ self.solve_values(thetas)

    def _values_vector(self, density):
        self._check(density)
        return np.concatenate(density.values)

    def _check(self, density):
        if density.arc_labels != self.labels or density.node_count != self.n:
            raise ConsistencyError("density was not computed on these arcs")
        if not np.isclose(density.wavenumber, self.k, rtol=1e-14, atol=0):
            raise ConsistencyError("density wavenumber differs from the solver's")

    def far_field(self, density, x_hat):
        x_hat = _unit(np.asarray(x_hat, dtype=float), "x_hat")
        vals = self.far_field_operator(np.atleast_2d(x_hat)) @ self._values_vector(density)
        return vals[0] if x_hat.ndim == 1 else vals

    def scattered_field(self, density, x):
        """Double-layer potential at points off the arcs."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = self._values_vector(density)
        size = self.n - 1
        w = np.pi / self.n
        out = np.zeros(len(x), dtype=complex)
        for p, pan in enumerate(self.panels):
            curve = pan.arc.point(np.linspace(-1.0, 1.0, NEAR_CHECK_SAMPLES))
            gap = np.min(np.linalg.norm(x[:, None, :] - curve[None, :, :], axis=-1))
            if gap < NEAR_DISTANCE:
                warnings.warn("evaluation point within 1e-3 of the arc; quadrature "
                              "is not specialised for near-singular integrals",
                              RuntimeWarning, stacklevel=2)
            inner = pan.interior
            y, nrm = pan.x[inner], pan.normal[inner]
            diff = x[:, None, :] - y[None, :, :]
            r = np.linalg.norm(diff, axis=-1)
            dn = np.einsum("pjd,jd->pj", diff, nrm) / r
            kern = 0.25j * self.k * specfun.hankel1(1, self.k * r) * dn
            jac = w * pan.speed[inner] * np.sin(pan.t[inner])
            out += (kern * jac[None, :]) @ u[p * size:(p + 1) * size]
        return out

    def boundary_residual(self, density, count=50, margin=0.9):
        """Relative Neumann residual at off-collocation points.

        The density is interpolated through its sine series onto a grid of
        twice the resolution and the refined operator is applied there;
        residuals are read at the fine nodes halfway between coarse nodes
        whose parameter satisfies ``|s| <= margin``. Returns the residuals
        relative to ``max |du_i/dn|`` and the parameters used.
        """
        self._check(density)
        fine = ForwardSolver(self.arcs, self.k, 2 * self.n, check=False, assemble=False)
        fine_matrix = fine._assemble()
        t_fine = fine.panels[0].t[1:fine.n]
        m = np.arange(1, self.n)
        u_fine = np.concatenate([np.sin(np.outer(t_fine, m)) @ a for a in density.coefficients])
        theta = density.incident_direction
        g = fine.rhs(theta[None, :])[:, 0]
        res = fine_matrix @ u_fine - g
        size = fine.n - 1
        rel, params = [], []
        odd = np.arange(0, size, 2)  # fine nodes j = 1, 3, 5, ... are coarse midpoints
        for p, pan in enumerate(fine.panels):
            inner = pan.interior
            jac = np.sin(pan.t[inner]) * pan.speed[inner]
            dudn = 1j * self.k * (pan.normal[inner] @ theta) * np.exp(
                1j * self.k * (pan.x[inner] @ theta))
            scale = np.max(np.abs(dudn))
            s = pan.c[inner]
            sel = odd[np.abs(s[odd]) <= margin]
            rel.append(np.abs(res[p * size:(p + 1) * size][sel] / jac[sel]) / scale)
            params.append(s[sel])
        rel, params = np.concatenate(rel), np.concatenate(params)
        if len(rel) > count:
            pick = np.unique(np.linspace(0, len(rel) - 1, count).round().astype(int))
            rel, params = rel[pick], params[pick]
        return rel, params


def solve_density(arc, k, theta, nodes=DEFAULT_NODES) -> DensitySolution:
    """Jump density on ``arc`` (one arc or a sequence) for incidence ``theta``."""
    return ForwardSolver(arc, k, nodes).solve(theta)


def _solver_for(arc, density):
    arcs = _as_arcs(arc)
    if tuple(a.label for a in arcs) != density.arc_labels:
        raise ConsistencyError("density was computed on different arcs")
    return ForwardSolver(arcs, density.wavenumber, density.node_count, check=False,
                         assemble=False)


def far_field(arc, density: DensitySolution, x_hat, k=None) -> FarFieldSample:
    """Far-field pattern ``u_inf(x_hat, theta)`` of a solved density.

    ``u_inf = sqrt(k/8pi) e^{-i pi/4} \\int x_hat.n(y) e^{-ik x_hat.y} psi(y) ds(y)``,
    the sign that matches the double-layer representation of ``u_s``.
    """
    if k is not None and not np.isclose(k, density.wavenumber, rtol=1e-14, atol=0):
        raise ConsistencyError("requested wavenumber differs from the density's")
    arcs = _as_arcs(arc)
    if tuple(a.label for a in arcs) != density.arc_labels:
        raise ConsistencyError("density was computed on different arcs")
    x_hat = _unit(np.asarray(x_hat, dtype=float).reshape(2), "x_hat")
    kk = density.wavenumber
    n = density.node_count
    t = np.arange(1, n) * np.pi / n
    pref = np.sqrt(kk / (8 * np.pi)) * np.exp(-0.25j * np.pi)
    total = 0.0j
    for a, vals in zip(arcs, density.values):
        c = np.cos(t)
        dz = a.derivative(c)
        rot = np.stack([-dz[:, 1], dz[:, 0]], axis=-1)
        integrand = (rot @ x_hat) * np.sin(t) * np.exp(-1j * kk * (a.point(c) @ x_hat)) * vals
        total += (np.pi / n) * np.sum(integrand)
    return FarFieldSample(x_hat, density.incident_direction, complex(pref * total), kk)


def scattered_field(arc, density: DensitySolution, x):
    """Scattered field ``u_s(x)`` from the double-layer representation."""
    out = _solver_for(arc, density).scattered_field(density, x)
    return out[0] if np.ndim(x) == 1 else out
