"""Smooth open arcs given by polynomial coordinate maps on [-1, 1].

Every arc is stored in canonical form, ``gamma(s) = (x(s), y(s))`` for
``s in [-1, 1]``; arcs defined on another parameter interval are mapped
affinely on construction. The unit normal is the unit tangent rotated by
+90 degrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .errors import DegenerateGeometryError, DomainError

_S_TOL = 1e-14
_MIN_SPEED = 1e-14

# composite Gauss-Legendre rule for arclength: 16 panels x 32 nodes
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_GL_PANELS = 16


def _compose_affine(coeffs, a, b):
    """Coefficients of ``p(a + b s)`` in powers of s."""
    out = np.zeros(1)
    power = np.ones(1)
    for c in coeffs:
        out = P.polyadd(out, c * power)
        power = P.polymul(power, [a, b])
    return np.trim_zeros(out, "b") if np.any(out) else np.zeros(1)


@dataclass(frozen=True)
class ArcCurve:
    """Parametric open arc on the canonical interval [-1, 1].

    Attributes
    ----------
    x_coeffs, y_coeffs : tuple of float
        Polynomial coefficients (lowest power first) of the coordinate maps
        in the canonical parameter.
    label : str
        Identifier used in manifests and reports.
    """

    x_coeffs: tuple
    y_coeffs: tuple
    label: str = "arc"
    _dx: np.ndarray = field(init=False, repr=False, compare=False)
    _dy: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xc = tuple(float(c) for c in self.x_coeffs)
        yc = tuple(float(c) for c in self.y_coeffs)
        if not xc or not yc:
            raise DegenerateGeometryError("empty coefficient list")
        object.__setattr__(self, "x_coeffs", xc)
        object.__setattr__(self, "y_coeffs", yc)
        object.__setattr__(self, "_dx", P.polyder(np.array(xc)))
        object.__setattr__(self, "_dy", P.polyder(np.array(yc)))

    @classmethod
    def from_polynomials(cls, x_coeffs, y_coeffs, s_min=-1.0, s_max=1.0, label="arc"):
        """Build an arc from coefficients in a parameter ``u in [s_min, s_max]``."""
        if not s_max > s_min:
            raise DomainError(f"need s_min < s_max, got {s_min}, {s_max}")
        a = 0.5 * (s_min + s_max)
        b = 0.5 * (s_max - s_min)
        return cls(
            tuple(_compose_affine(x_coeffs, a, b)),
            tuple(_compose_affine(y_coeffs, a, b)),
            label,
        )

    @classmethod
    def segment(cls, start, end, label="segment"):
        """Straight segment from ``start`` (s=-1) to ``end`` (s=+1)."""
        (x0, y0), (x1, y1) = start, end
        return cls(
            (0.5 * (x0 + x1), 0.5 * (x1 - x0)),
            (0.5 * (y0 + y1), 0.5 * (y1 - y0)),
            label,
        )

    def point(self, s):
        """Vectorised ``gamma(s)``; returns shape ``s.shape + (2,)``."""
        s = np.asarray(s, dtype=float)
        return np.stack([P.polyval(s, self.x_coeffs), P.polyval(s, self.y_coeffs)], axis=-1)

    def derivative(self, s):
        """Vectorised ``gamma'(s)``."""
        s = np.asarray(s, dtype=float)
        return np.stack([P.polyval(s, self._dx), P.polyval(s, self._dy)], axis=-1)

    def second_derivative(self, s):
        s = np.asarray(s, dtype=float)
        return np.stack(
            [P.polyval(s, P.polyder(self._dx)), P.polyval(s, P.polyder(self._dy))], axis=-1
        )

    def speed(self, s):
        """``|gamma'(s)|``."""
        return np.linalg.norm(self.derivative(s), axis=-1)

    def normal(self, s):
        """Unit normal: unit tangent rotated counterclockwise by 90 degrees."""
        d = self.derivative(s)
        speed = np.linalg.norm(d, axis=-1)
        if np.any(speed < _MIN_SPEED):
            raise DegenerateGeometryError(f"vanishing tangent on arc {self.label!r}")
        return np.stack([-d[..., 1], d[..., 0]], axis=-1) / speed[..., None]

    def scaled(self, factor, center=(0.0, 0.0), label=None):
        """Arc scaled by ``factor`` about ``center``."""
        cx, cy = center
        xc = np.array(self.x_coeffs) * factor
        yc = np.array(self.y_coeffs) * factor
        xc[0] += cx * (1 - factor)
        yc[0] += cy * (1 - factor)
        return ArcCurve(tuple(xc), tuple(yc), label or f"{self.label}*{factor:g}")


def _check_param(s):
    s = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(np.abs(s) > 1 + _S_TOL):
        raise DomainError("arc parameter must lie in [-1, 1]")
    return np.clip(s, -1.0, 1.0)


def eval_arc(arc: ArcCurve, s):
    """Point ``gamma(s)`` for ``s in [-1, 1]``."""
    return arc.point(_check_param(s))


def eval_normal(arc: ArcCurve, s):
    """Unit normal at ``gamma(s)`` (tangent rotated by +90 degrees)."""
    return arc.normal(_check_param(s))


def eval_tangent(arc: ArcCurve, s):
    d = arc.derivative(_check_param(s))
    speed = np.linalg.norm(d, axis=-1)
    if np.any(speed < _MIN_SPEED):
        raise DegenerateGeometryError(f"vanishing tangent on arc {arc.label!r}")
    return d / speed[..., None]


def _panel_rule(a, b):
    edges = np.linspace(a, b, _GL_PANELS + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def partial_arc_length(arc: ArcCurve, s) -> float:
    """Arclength from ``gamma(-1)`` to ``gamma(s)``."""
    s = float(_check_param(s))
    if s <= -1.0:
        return 0.0
    nodes, weights = _panel_rule(-1.0, s)
    return float(weights @ arc.speed(nodes))


def arc_length(arc: ArcCurve) -> float:
    """Total arclength ``int_{-1}^{1} |gamma'(s)| ds``."""
    return partial_arc_length(arc, 1.0)


def param_at_length(arc: ArcCurve, length: float) -> float:
    """Parameter s at which the arclength measured from ``gamma(-1)`` equals ``length``."""
    total = arc_length(arc)
    if length <= 0:
        return -1.0
    if length >= total:
        return 1.0
    return brentq(lambda s: partial_arc_length(arc, s) - length, -1.0, 1.0, xtol=1e-15)


def check_arc(arc: ArcCurve, samples: int = 801) -> None:
    """Raise :class:`DegenerateGeometryError` if the arc has a cusp or self-intersects."""
    s = np.linspace(-1.0, 1.0, samples)
    speed = arc.speed(s)
    if np.min(speed) < 1e-10:
        raise DegenerateGeometryError(f"arc {arc.label!r} has a vanishing tangent")
    pts = arc.point(s)
    if _polyline_crossings(pts, pts, skip_adjacent=True):
        raise DegenerateGeometryError(f"arc {arc.label!r} self-intersects")


def _polyline_crossings(p, q, skip_adjacent=False) -> bool:
    """True if any segment of polyline ``p`` properly crosses one of ``q``."""
    a0, a1 = p[:-1, None, :], p[1:, None, :]
    b0, b1 = q[None, :-1, :], q[None, 1:, :]

    def orient(u, v, w):
        return (v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1]) - (
            v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0])

    d1, d2 = orient(a0, a1, b0), orient(a0, a1, b1)
    d3, d4 = orient(b0, b1, a0), orient(b0, b1, a1)
    hit = (d1 * d2 < 0) & (d3 * d4 < 0)
    if skip_adjacent:
        i, j = np.indices(hit.shape)
        hit &= np.abs(i - j) > 1
    return bool(np.any(hit))


def check_disjoint(arcs, samples: int = 801, min_distance: float = 1e-6) -> None:
    """Raise if any two arcs touch or overlap."""
    s = np.linspace(-1.0, 1.0, samples)
    pts = [a.point(s) for a in arcs]
    for i in range(len(arcs)):
        for j in range(i + 1, len(arcs)):
            d = np.linalg.norm(pts[i][:, None, :] - pts[j][None, :, :], axis=-1)
            if np.min(d) < min_distance:
                raise DegenerateGeometryError(
                    f"arcs {arcs[i].label!r} and {arcs[j].label!r} intersect"
                )


@dataclass(frozen=True)
class EffectiveSampling:
    """Half-wavelength sampling ``y_m`` of one or more arcs.

    ``spacing`` is the arclength gap between consecutive points on the same
    arc (``nan`` when every arc carries a single point).
    """

    points: np.ndarray
    normals: np.ndarray
    spacing: float
    params: np.ndarray
    arc_index: np.ndarray

    @property
    def count(self) -> int:
        return len(self.points)

    def __add__(self, other):
        spacing = np.nanmax([self.spacing, other.spacing]) if not (
            np.isnan(self.spacing) and np.isnan(other.spacing)) else float("nan")
        return EffectiveSampling(
            np.concatenate([self.points, other.points]),
            np.concatenate([self.normals, other.normals]),
            float(spacing),
            np.concatenate([self.params, other.params]),
            np.concatenate([self.arc_index, other.arc_index + self.arc_index.max() + 1]),
        )


def sample_half_wavelength(arc: ArcCurve, wavelength: float) -> EffectiveSampling:
    """Place ``M = max(1, round(L / (wavelength/2)))`` points on the arc.

    The points are spaced exactly half a wavelength apart in arclength and
    centred on the arc, so each is the midpoint of a lambda/2 segment. A
    single point sits at the arclength midpoint.
    """
    if not wavelength > 0:
        raise DomainError("wavelength must be positive")
    total = arc_length(arc)
    half = 0.5 * wavelength
    count = max(1, int(round(total / half)))
    if count == 1:
        lengths = np.array([0.5 * total])
        spacing = float("nan")
    else:
        offsets = (np.arange(count) - 0.5 * (count - 1)) * half
        lengths = 0.5 * total + offsets
        spacing = half
    params = np.array([param_at_length(arc, ell) for ell in lengths])
    return EffectiveSampling(
        points=arc.point(params),
        normals=arc.normal(params),
        spacing=spacing,
        params=params,
        arc_index=np.zeros(count, dtype=int),
    )


def sample_arcs(arcs, wavelength: float) -> EffectiveSampling:
    """Concatenated :func:`sample_half_wavelength` over several arcs."""
    out = None
    for arc in arcs:
        samp = sample_half_wavelength(arc, wavelength)
        out = samp if out is None else out + samp
    return out


def point_sampling(points, normals) -> EffectiveSampling:
    """Sampling from explicitly given points and normals (no arc)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nrm = np.atleast_2d(np.asarray(normals, dtype=float))
    nrm = nrm / np.linalg.norm(nrm, axis=-1, keepdims=True)
    return EffectiveSampling(pts, nrm, float("nan"), np.full(len(pts), np.nan),
                             np.arange(len(pts)))


GAMMA1 = ArcCurve.from_polynomials([-0.2, 1.0], [0.4, 0.0, -0.5], -0.5, 0.5, label="gamma1")
GAMMA2 = ArcCurve.from_polynomials([0.2, 1.0], [-0.4, 0.0, 1.0, 1.0], -0.5, 0.5, label="gamma2")
PRESETS = {"gamma1": GAMMA1, "gamma2": GAMMA2}


def _parse_floats(text):
    return [float(v) for v in text.replace(" ", "").split(",") if v]


def parse_arc_text(text: str) -> ArcCurve:
    """Parse the ``key=value`` arc definition format.

    Recognised keys: ``label``, ``x_coeffs``, ``y_coeffs``, ``s_min``,
    ``s_max``. Blank lines and ``#`` comments are ignored.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        values[key] = val
    unknown = set(values) - {"label", "x_coeffs", "y_coeffs", "s_min", "s_max"}
    if unknown:
        raise DomainError(f"unknown arc keys: {sorted(unknown)}")
    try:
        xc = _parse_floats(values["x_coeffs"])
        yc = _parse_floats(values["y_coeffs"])
    except KeyError as exc:
        raise DomainError(f"missing arc key {exc.args[0]!r}") from None
    arc = ArcCurve.from_polynomials(
        xc, yc,
        float(values.get("s_min", -1.0)), float(values.get("s_max", 1.0)),
        values.get("label", "arc"),
    )
    check_arc(arc)
    return arc


def load_arc(path) -> ArcCurve:
    return parse_arc_text(Path(path).read_text())


def resolve_arc(spec: str) -> ArcCurve:
    """Preset name (``gamma1``, ``gamma2``) or path to an arc file."""
    key = spec.strip().lower()
    if key in PRESETS:
        return PRESETS[key]
    aliases = {"g1": "gamma1", "g2": "gamma2", "1": "gamma1", "2": "gamma2"}
    if key in aliases:
        return PRESETS[aliases[key]]
    path = Path(spec)
    if not path.exists():
        raise DomainError(f"unknown arc {spec!r}: not a preset and no such file")
    return load_arc(path)
