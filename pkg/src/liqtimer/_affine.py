"""Closed-form antiderivatives and Riccati solutions shared by the pricers.

Every integrand appearing in the affine bond/CDS exponents is a sum of
exponentials and constants, so the integrals have elementary antiderivatives.
They are derived once here and unit-tested against adaptive quadrature at
1e-10; small-argument branches keep them stable down to kappa = 0.

Domain assumptions: horizons s in [0, ~50] years, speeds kappa in [0, ~5].
"""

from __future__ import annotations

import numpy as np

# Below this, a mean-reversion speed is routed to its kappa -> 0 limit branch.
_KAPPA_TINY = 1e-8


def _wrap(s):
    arr = np.asarray(s, dtype=float)
    return arr, arr.ndim == 0


def e1(s, kappa):
    """E1(s, k) = int_0^s e^{-k v} dv = (1 - e^{-k s}) / k, with E1(s, 0) = s."""
    arr, scalar = _wrap(s)
    k = float(kappa)
    if abs(k) < _KAPPA_TINY:
        out = arr * (1.0 - 0.5 * k * arr)
    else:
        out = -np.expm1(-k * arr) / k
    return float(out) if scalar else out


def e2(s, kappa):
    """E2(s, k) = int_0^s v e^{-k v} dv = (1 - (1 + k s) e^{-k s}) / k^2.

    The direct form cancels catastrophically for |k s| small, so a series in
    x = k s is used there: E2 = s^2 (1/2 - x/3 + x^2/8 - x^3/30 + x^4/144).
    """
    arr, scalar = _wrap(s)
    k = float(kappa)
    x = k * arr
    series = arr * arr * (0.5 - x / 3.0 + x**2 / 8.0 - x**3 / 30.0 + x**4 / 144.0)
    kk = k if abs(k) >= _KAPPA_TINY else 1.0  # discarded by the where() below
    direct = (1.0 - (1.0 + x) * np.exp(-x)) / (kk * kk)
    out = np.where(np.abs(x) < 1e-4, series, direct)
    return float(out) if scalar else out


def int_b(s, kappa):
    """I(s, k) = int_0^s B(v; k) dv with B(v; k) = (1 - e^{-k v}) / k.

    Equals (s - E1(s, k)) / k; the k -> 0 limit is s^2/2. Stable series
    s^2 (1/2 - x/6 + x^2/24 - x^3/120) for small x = k s.
    """
    arr, scalar = _wrap(s)
    k = float(kappa)
    x = k * arr
    series = arr * arr * (0.5 - x / 6.0 + x**2 / 24.0 - x**3 / 120.0)
    kk = k if abs(k) >= _KAPPA_TINY else 1.0
    direct = (arr + np.expm1(-x) / kk) / kk
    out = np.where(np.abs(x) < 1e-4, series, direct)
    return float(out) if scalar else out


def int_bb(s, a, b):
    """J(s, a, b) = int_0^s B(v; a) B(v; b) dv.

    Generic: [s - E1(s, a) - E1(s, b) + E1(s, a+b)] / (a b).
    Limits: a = 0 -> (s^2/2 - E2(s, b)) / b; both zero -> s^3/3.
    """
    arr, scalar = _wrap(s)
    a = float(a)
    b = float(b)
    if abs(a) < _KAPPA_TINY and abs(b) < _KAPPA_TINY:
        out = arr**3 / 3.0
    elif abs(a) < _KAPPA_TINY:
        out = (0.5 * arr * arr - e2(arr, b)) / b
    elif abs(b) < _KAPPA_TINY:
        out = (0.5 * arr * arr - e2(arr, a)) / a
    else:
        out = (arr - e1(arr, a) - e1(arr, b) + e1(arr, a + b)) / (a * b)
    out = np.asarray(out)
    return float(out) if scalar else out


def int_exp_b(tau, kappa, a):
    """K(tau; kappa, a) = int_0^tau e^{-kappa v} B(v; a) dv.

    Generic: [E1(tau, kappa) - E1(tau, kappa + a)] / a; a -> 0 gives E2(tau, kappa).
    """
    arr, scalar = _wrap(tau)
    k = float(kappa)
    a = float(a)
    if abs(a) < _KAPPA_TINY:
        out = e2(arr, k)
    else:
        out = (e1(arr, k) - e1(arr, k + a)) / a
    out = np.asarray(out)
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# CIR Riccati solutions.
#
# For a factor dx = kappa (theta - x) dt + sigma sqrt(x) dW discounted at
# rate c x, the transform E[e^{-c int_t^u x ds}] = A(s) e^{-B(s) x} with
# s = u - t solves B' = c - kappa B - sigma^2 B^2 / 2, A'/A = -kappa theta B.
# ---------------------------------------------------------------------------


def cir_xi(kappa, sigma, c):
    """Discriminant Xi = sqrt(kappa^2 + 2 sigma^2 c) of the Riccati equation."""
    return float(np.sqrt(kappa * kappa + 2.0 * sigma * sigma * c))


def cir_ab(s, kappa, theta, sigma, c):
    """Return (A(s), B(s)) for one CIR factor with discount coefficient c.

    sigma = 0 routes to the deterministic branch: the factor follows the ODE
    x_u = theta + (x - theta) e^{-kappa (u - t)}, so the exponent integrates
    to -c [theta s + (x - theta) E1(s, kappa)], i.e. B = c E1(s, kappa) and
    log A = -c theta (s - E1(s, kappa)).
    """
    arr, scalar = _wrap(s)
    kappa = float(kappa)
    theta = float(theta)
    sigma = float(sigma)
    c = float(c)
    if c == 0.0:
        a_out, b_out = np.ones_like(arr), np.zeros_like(arr)
    elif sigma < 1e-12:
        b_out = np.asarray(c * e1(arr, kappa))
        a_out = np.exp(-c * theta * (arr - np.asarray(e1(arr, kappa))))
    else:
        xi = cir_xi(kappa, sigma, c)
        em1 = np.expm1(xi * arr)
        denom = (xi + kappa) * em1 + 2.0 * xi
        b_out = 2.0 * c * em1 / denom
        expo = 2.0 * kappa * theta / (sigma * sigma)
        log_a = expo * (np.log(2.0 * xi) + 0.5 * (xi + kappa) * arr - np.log(denom))
        a_out = np.exp(log_a)
    if scalar:
        return float(a_out), float(b_out)
    return a_out, b_out


def cir_b_prime(s, kappa, theta, sigma, c):
    """B'(s) from the Riccati equation B' = c - kappa B - sigma^2 B^2 / 2."""
    _, b = cir_ab(s, kappa, theta, sigma, c)
    return c - kappa * b - 0.5 * sigma * sigma * b * b
