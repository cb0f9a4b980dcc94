"""Bessel and Hankel functions of orders 0 and 1 for real arguments.

Evaluation uses the ascending power series for ``x <= 12`` and the Hankel
asymptotic expansion above that, which keeps the absolute error around
1e-12 on the whole half line. All functions accept scalars or arrays and
are vectorised with numpy.

The module also carries the direction-average identity

    (1/N) sum_n (theta_n . xi) exp(i k theta_n . x)  ->  i (x/|x| . xi) J1(k|x|)

used by the imaging predictors.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061

SERIES_CUTOFF = 12.0
_SERIES_TERMS = 60
_ASYMPTOTIC_TERMS = 40
_TINY_TERM = 1e-17


def _check_order(order):
    if order not in (0, 1):
        raise DomainError(f"only orders 0 and 1 are supported, got {order!r}")


def _as_float_array(x):
    return np.asarray(x, dtype=float)


def _series(order, x):
    """Ascending series for J_order and Y_order; returns (J, Y)."""
    q = -0.25 * x * x
    term = np.ones_like(x) if order == 0 else 0.5 * x
    j_sum = term.copy()
    harmonic = 0.0
    if order == 0:
        # Y0 = (2/pi)(ln(x/2)+gamma) J0 - (2/pi) sum_m H_m q^m/(m!)^2
        h_sum = np.zeros_like(x)
        for m in range(1, _SERIES_TERMS):
            term = term * q / (m * m)
            harmonic += 1.0 / m
            j_sum = j_sum + term
            h_sum = h_sum + harmonic * term
            if np.all(np.abs(term) <= _TINY_TERM * np.abs(j_sum)):
                break
        with np.errstate(divide="ignore", invalid="ignore"):
            y = (2.0 / np.pi) * ((np.log(0.5 * x) + EULER_GAMMA) * j_sum - h_sum)
        return j_sum, y

    # Y1 = -2/(pi x) + (2/pi) ln(x/2) J1
    #      - (x/2pi) sum_m (psi(m+1)+psi(m+2)) q^m/(m!(m+1)!)
    psi_pair = -2.0 * EULER_GAMMA + 1.0
    h_sum = psi_pair * term
    for m in range(1, _SERIES_TERMS):
        term = term * q / (m * (m + 1))
        harmonic += 1.0 / m
        psi_pair = -2.0 * EULER_GAMMA + 2.0 * harmonic + 1.0 / (m + 1)
        j_sum = j_sum + term
        h_sum = h_sum + psi_pair * term
        if np.all(np.abs(term) <= _TINY_TERM * np.abs(j_sum)):
            break
    with np.errstate(divide="ignore", invalid="ignore"):
        y = -2.0 / (np.pi * x) + (2.0 / np.pi) * np.log(0.5 * x) * j_sum - h_sum / np.pi
    return j_sum, y


def _asymptotic(order, x):
    """Hankel asymptotic expansion for large x; returns (J, Y)."""
    mu = 4.0 * order * order
    p = np.ones_like(x)
    q = np.zeros_like(x)
    coeff = 1.0
    inv8x = 1.0 / (8.0 * x)
    last = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for kk in range(1, _ASYMPTOTIC_TERMS):
        coeff *= (mu - (2 * kk - 1) ** 2) / kk
        term = coeff * inv8x**kk
        mag = np.abs(term)
        # stop each element at its smallest term (optimal truncation)
        active &= mag < last
        if not np.any(active):
            break
        last = np.where(active, mag, last)
        t = np.where(active, term, 0.0)
        if kk % 4 == 1:
            q = q + t
        elif kk % 4 == 2:
            p = p - t
        elif kk % 4 == 3:
            q = q - t
        else:
            p = p + t
        if np.all(mag < _TINY_TERM):
            break
    chi = x - (0.5 * order + 0.25) * np.pi
    amp = np.sqrt(2.0 / (np.pi * x))
    c, s = np.cos(chi), np.sin(chi)
    return amp * (p * c - q * s), amp * (p * s + q * c)


def _jy(order, x, need_y):
    x = _as_float_array(x)
    shape = x.shape
    flat = np.atleast_1d(x).ravel()
    j = np.empty_like(flat)
    y = np.empty_like(flat)
    small = flat <= SERIES_CUTOFF
    if np.any(small):
        js, ys = _series(order, flat[small])
        j[small] = js
        y[small] = ys
    if np.any(~small):
        ja, ya = _asymptotic(order, flat[~small])
        j[~small] = ja
        y[~small] = ya
    if need_y:
        return j.reshape(shape), y.reshape(shape)
    return j.reshape(shape)


def bessel_j(order, x):
    """Bessel function of the first kind J_order(x) for x >= 0.

    Parameters
    ----------
    order : {0, 1}
    x : float or array_like
        Nonnegative argument(s).

    Raises
    ------
    DomainError
        If any argument is negative or the order is unsupported.
    """
    _check_order(order)
    x = _as_float_array(x)
    if np.any(x < 0):
        raise DomainError("bessel_j requires nonnegative arguments")
    out = _jy(order, x, need_y=False)
    return float(out) if out.ndim == 0 else out


def bessel_y(order, x):
    """Bessel function of the second kind Y_order(x) for x > 0."""
    _check_order(order)
    x = _as_float_array(x)
    if np.any(x <= 0):
        raise DomainError("bessel_y requires strictly positive arguments")
    _, out = _jy(order, x, need_y=True)
    return float(out) if out.ndim == 0 else out


def hankel1(order, x):
    """Hankel function of the first kind, J_order(x) + i Y_order(x), x > 0."""
    _check_order(order)
    x = _as_float_array(x)
    if np.any(x <= 0):
        raise DomainError("hankel1 requires strictly positive arguments")
    j, y = _jy(order, x, need_y=True)
    out = j + 1j * y
    return complex(out) if out.ndim == 0 else out


def lemma_average(directions, xi, x, k):
    """Discrete direction average ``(1/N) sum_n (theta_n . xi) e^{i k theta_n . x}``.

    Parameters
    ----------
    directions : (N, 2) array_like
        Unit direction vectors.
    xi : (2,) array_like
        Unit vector.
    x : (2,) or (..., 2) array_like
        Evaluation point(s).
    k : float
        Wavenumber.
    """
    theta = np.asarray(directions, dtype=float)
    if theta.ndim != 2 or theta.shape[1] != 2 or theta.shape[0] < 2:
        raise DomainError("directions must be an (N, 2) array with N >= 2")
    xi = np.asarray(xi, dtype=float)
    x = np.asarray(x, dtype=float)
    weights = theta @ xi
    phase = np.exp(1j * k * (x @ theta.T))
    return np.mean(weights * phase, axis=-1)


def lemma_closed_form(xi, x, k):
    """Limit of :func:`lemma_average`: ``i (x/|x| . xi) J1(k|x|)``, exactly 0 at x = 0."""
    xi = np.asarray(xi, dtype=float)
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    cos_angle = np.where(r > 0, (x @ xi) / safe, 0.0)
    out = 1j * cos_angle * bessel_j(1, k * r)
    return complex(out) if np.ndim(out) == 0 else out
