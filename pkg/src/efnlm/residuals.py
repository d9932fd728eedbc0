"""Residual families for fitted exponential family nonlinear models.

Four residual vectors are produced from one fit: raw Pearson residuals, the
second-order corrected residuals R' = R + rho(R), adjusted residuals
standardized by the second-order mean/variance, and PCA residuals obtained
by rotating the adjusted residuals onto the eigenvectors of their model
correlation matrix (with the trace-preserving rescale as a variant).
"""
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DomainError, NonPositiveVariance, UnsupportedFamily

_CONTINUOUS = {"normal", "gamma", "inverse_gaussian"}


@dataclass
class ResidualReport:
    """All residual vectors and moment structure for one fitted dataset."""

    pearson: np.ndarray
    corrected: np.ndarray
    corrected_failures: list
    expected: np.ndarray
    variances: np.ndarray
    covariance: np.ndarray
    correlation: np.ndarray
    adjusted: np.ndarray
    pca: np.ndarray
    pca_scaled: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    truncation: int


def pearson(fit, data):
    """R_i = (y_i - mu-hat_i) / sqrt(V-hat_i); no precision factor."""
    return (data.y - fit.mu) / np.sqrt(fit.V)


def _eh_coeffs(fit):
    """Linear coefficients of e_i(x) and h_i(x), vectorized over observations."""
    V, V1, V2 = fit.V, fit.V1, fit.V2
    mup, mupp = fit.mup, fit.mupp
    e0 = -mup / np.sqrt(V)
    e1 = -0.5 * V1 * mup / V
    h0 = -mupp / np.sqrt(V) + V1 * mup**2 / V**1.5
    h1 = 0.25 * ((3.0 * V1**2 / V**2 - 2.0 * V2 / V) * mup**2 - 2.0 * V1 * mupp / V)
    return e0, e1, h0, h1


def e_fun(fit, i, x):
    """Conditional-slope function e_i(x), linear in x."""
    e0, e1, _, _ = _eh_coeffs(fit)
    return e0[i] + e1[i] * x


def h_fun(fit, i, x):
    """Conditional-curvature function h_i(x), linear in x."""
    _, _, h0, h1 = _eh_coeffs(fit)
    return h0[i] + h1[i] * x


def _mean_poly_coeffs(fit):
    """Quadratic coefficients (a0, a1, a2) of the conditional mean of R - eps."""
    e0, e1, h0, h1 = _eh_coeffs(fit)
    c = fit.xb + fit.d / (2.0 * fit.phi)
    swz = np.sqrt(fit.w) * fit.z
    zh = fit.z / (2.0 * fit.phi)
    a0 = c * e0 + zh * h0
    a1 = swz * e0 + c * e1 + zh * h1
    a2 = swz * e1
    return a0, a1, a2


def _var_poly_coeffs(fit):
    """Quadratic coefficients (b0, b1, b2) of the conditional variance."""
    e0, e1, _, _ = _eh_coeffs(fit)
    zp = fit.z / fit.phi
    return zp * e0**2, 2.0 * zp * e0 * e1, zp * e1**2


def conditional_mean(fit, i, x):
    """Second-order conditional mean of R_i - eps_i given eps_i = x."""
    a0, a1, a2 = _mean_poly_coeffs(fit)
    return a0[i] + a1[i] * x + a2[i] * x**2


def conditional_variance(fit, i, x):
    """Second-order conditional variance of R_i - eps_i given eps_i = x."""
    b0, b1, b2 = _var_poly_coeffs(fit)
    return b0[i] + b1[i] * x + b2[i] * x**2


def _check_continuous(fit):
    if fit.model.family.name not in _CONTINUOUS:
        raise UnsupportedFamily(
            "the distributional correction is only defined for continuous families"
        )


def _rho_all(fit, x):
    """rho_i(x_i) for every observation; x is an n-vector (no support check)."""
    e0, e1, h0, h1 = _eh_coeffs(fit)
    e = e0 + e1 * x
    h = h0 + h1 * x
    phi = fit.phi
    z = fit.z
    bracket = (
        -fit.V1 * fit.mup * z / (2.0 * phi * fit.V)
        - fit.xb
        - np.sqrt(fit.w) * z * x
        - fit.d / (2.0 * phi)
    )
    logf_slope = phi * np.sqrt(fit.V) * fit.theta + fit.model.family.c_deriv(x, fit.mu, phi)
    return e * bracket - z * h / (2.0 * phi) + z * e**2 * logf_slope / (2.0 * phi)


def rho(fit, i, x):
    """Correction function rho_i evaluated at x (inside the residual support)."""
    _check_continuous(fit)
    lo, hi = fit.model.family.residual_support(fit.mu[i])
    if not lo < x < hi:
        raise DomainError(f"x={x} outside the residual support ({lo}, {hi})")
    xv = np.zeros(fit.n)
    xv[i] = x
    return float(_rho_all(fit, xv)[i])


def corrected(fit, data):
    """R' = R + rho(R); per-observation support failures are recorded, not fatal.

    Returns (rprime, failures); failed entries carry NaN.
    """
    _check_continuous(fit)
    r = pearson(fit, data)
    family = fit.model.family
    n = r.shape[0]
    ok = np.ones(n, dtype=bool)
    for i in range(n):
        lo, hi = family.residual_support(fit.mu[i])
        if not lo < r[i] < hi:
            ok[i] = False
    x = np.where(ok, r, 0.0)
    rprime = np.where(ok, r + _rho_all(fit, x), np.nan)
    return rprime, [int(i) for i in np.nonzero(~ok)[0]]


def _density_and_derivs(fit, i, x):
    """f_eps and its first two derivatives at x for observation i."""
    family = fit.model.family
    mu = fit.mu[i]
    phi = fit.phi
    f = family.true_residual_density(x, mu, phi)
    if family.name in ("normal", "gamma"):
        slope = phi * np.sqrt(fit.V[i]) * fit.theta[i] + family.c_deriv(x, mu, phi)
        if family.name == "normal":
            slope_prime = -phi
        else:
            slope_prime = -(phi - 1.0) / (1.0 + x) ** 2
        return f, f * slope, f * (slope**2 + slope_prime)
    # inverse Gaussian: central differences on the density itself
    step = 1e-5 * (1.0 + abs(x))
    fp = family.true_residual_density(x + step, mu, phi)
    fm = family.true_residual_density(x - step, mu, phi)
    return f, (fp - fm) / (2.0 * step), (fp - 2.0 * f + fm) / step**2


def pearson_density_approx(fit, i, x):
    """Second-order density of the Pearson residual R_i at x."""
    family = fit.model.family
    lo, hi = family.residual_support(fit.mu[i])
    if not lo < x < hi:
        raise DomainError(f"x={x} outside the residual support ({lo}, {hi})")
    a0, a1, a2 = _mean_poly_coeffs(fit)
    b0, b1, b2 = _var_poly_coeffs(fit)
    mean_val = a0[i] + a1[i] * x + a2[i] * x**2
    mean_d = a1[i] + 2.0 * a2[i] * x
    var_val = b0[i] + b1[i] * x + b2[i] * x**2
    var_d = b1[i] + 2.0 * b2[i] * x
    var_dd = 2.0 * b2[i]
    f, f1, f2 = _density_and_derivs(fit, i, x)
    term_mean = f1 * mean_val + f * mean_d
    term_var = f2 * var_val + 2.0 * f1 * var_d + f * var_dd
    return f - term_mean + 0.5 * term_var


def expected_pearson(fit):
    """Second-order mean vector of the Pearson residuals."""
    inner = fit.J * fit.z + np.sqrt(fit.w) * fit.d
    return -(inner - fit.H @ inner) / (2.0 * fit.phi)


def variance_pearson(fit):
    """Second-order variance vector of the Pearson residuals."""
    phi = fit.phi
    jz = fit.J * fit.z
    swd = np.sqrt(fit.w) * fit.d
    v = (
        1.0 / phi
        + (fit.Q * (fit.H @ jz) - fit.T * fit.z) / (2.0 * phi**2)
        + fit.Q * (fit.H @ swd - swd) / (2.0 * phi**2)
    )
    return v


def covariance_pearson(fit):
    """Second-order covariance matrix: diag v, off-diagonal -h_ij/phi."""
    v = variance_pearson(fit)
    sigma = -fit.H / fit.phi
    np.fill_diagonal(sigma, v)
    return sigma


def correlation_pearson(fit):
    """Model correlation matrix of the Pearson residuals."""
    v = variance_pearson(fit)
    if np.any(v <= 0.0):
        raise NonPositiveVariance("second-order residual variance is not positive")
    sigma = covariance_pearson(fit)
    s = 1.0 / np.sqrt(v)
    psi = sigma * np.outer(s, s)
    np.fill_diagonal(psi, 1.0)
    return psi


def adjusted(fit, data):
    """R* = (R - r-hat) / sqrt(v-hat)."""
    v = variance_pearson(fit)
    if np.any(v <= 0.0):
        raise NonPositiveVariance("second-order residual variance is not positive")
    return (pearson(fit, data) - expected_pearson(fit)) / np.sqrt(v)


def pca_residuals(fit, data):
    """Rotate adjusted residuals onto the eigenvectors of the correlation matrix.

    Returns (pca, pca_scaled, eigenvalues, eigenvectors, m). Coordinates are
    ordered by descending eigenvalue; the last m = p carry (near-)zero
    variance, so diagnostics should use the first n - p.
    """
    rstar = adjusted(fit, data)
    psi = correlation_pearson(fit)
    eig = linalg.sym_eigen(psi)
    rt = eig.eigenvectors.T @ rstar
    n, p = fit.n, fit.p
    rb = np.sqrt((n - p) / n) * rt
    return rt, rb, eig.eigenvalues, eig.eigenvectors, p


def residual_report(fit, data):
    """Compute every residual family and the moment structure for one fit."""
    rprime, failures = corrected(fit, data)
    rt, rb, lam, evec, m = pca_residuals(fit, data)
    return ResidualReport(
        pearson=pearson(fit, data),
        corrected=rprime,
        corrected_failures=failures,
        expected=expected_pearson(fit),
        variances=variance_pearson(fit),
        covariance=covariance_pearson(fit),
        correlation=correlation_pearson(fit),
        adjusted=adjusted(fit, data),
        pca=rt,
        pca_scaled=rb,
        eigenvalues=lam,
        eigenvectors=evec,
        truncation=m,
    )
