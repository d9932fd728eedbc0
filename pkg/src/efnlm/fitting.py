"""Maximum-likelihood fitting by iteratively reweighted least squares.

Also computes the dispersion estimate, Fisher information, the second-order
bias of the coefficient estimate, and every hat-style matrix and diagonal
the residual formulas consume.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.special

from . import linalg
from .errors import (
    DegenerateResiduals,
    DomainError,
    NotPositiveDefinite,
    RankDeficient,
)

MAX_ITER = 100
BETA_TOL = 1e-8
MAX_HALVINGS = 16


@dataclass(frozen=True)
class ModelSpec:
    """Family + link + predictor; the full model description."""

    family: object
    link: object
    predictor: object


@dataclass
class FitResult:
    """Converged fit with all derived quantities evaluated at beta-hat."""

    model: ModelSpec
    beta: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    phi: float
    phi_method: str
    converged: bool
    iterations: int
    score_norm: float
    # local state at beta-hat
    xtilde: np.ndarray
    w: np.ndarray
    V: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    mup: np.ndarray
    mupp: np.ndarray
    theta: np.ndarray
    # hat-style quantities
    xtwx_inv: np.ndarray
    kinv: np.ndarray
    Z: np.ndarray
    z: np.ndarray
    H: np.ndarray
    h: np.ndarray
    d: np.ndarray
    F: np.ndarray
    J: np.ndarray
    Q: np.ndarray
    T: np.ndarray
    bias: np.ndarray
    xb: np.ndarray = field(default=None)  # gamma_i^T Xtilde B(beta-hat), per observation

    @property
    def n(self):
        return self.mu.shape[0]

    @property
    def p(self):
        return self.beta.shape[0]


def _local_state(model, x, beta):
    """Evaluate predictor/link/family quantities at beta; DomainError if invalid."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        eta = model.predictor.eval_eta(x, beta)
        mu = model.link.mu_of_eta(eta)
        model.family.check_mu(mu)
        mup, mupp = model.link.derivs(eta)
        V, V1, V2 = model.family.variance(mu)
        if np.any(mup == 0.0):
            raise DomainError("link derivative vanished at an observation")
        w = mup**2 / V
        xt = model.predictor.model_matrix(x, beta)
    if not np.all(np.isfinite(w)):
        raise DomainError("non-finite working weight at an observation")
    return {
        "eta": eta,
        "mu": mu,
        "mup": mup,
        "mupp": mupp,
        "V": V,
        "V1": V1,
        "V2": V2,
        "w": w,
        "xt": xt,
    }


def score(model, beta, data):
    """Score vector X~^T W P (y - mu), evaluated at phi = 1."""
    st = _local_state(model, data.x, np.asarray(beta, dtype=float))
    return st["xt"].T @ ((st["w"] / st["mup"]) * (data.y - st["mu"]))


def fisher_info(model, beta, phi, data):
    """Expected information phi * X~^T W X~."""
    st = _local_state(model, data.x, np.asarray(beta, dtype=float))
    K = phi * (st["xt"].T * st["w"]) @ st["xt"]
    try:
        linalg.solve_spd(K, np.eye(K.shape[0]))
    except NotPositiveDefinite:
        raise RankDeficient("local model matrix is rank deficient") from None
    return K


def _score_from_state(st, y):
    return st["xt"].T @ ((st["w"] / st["mup"]) * (y - st["mu"]))


def _loglik_kernel(model, st, y):
    """sum y*theta - b(theta); the beta-dependent part of the log-likelihood."""
    theta = model.family.theta(st["mu"])
    return float(np.sum(y * theta - model.family.cumulant(theta)))


def irls_fit(model, data, beta_init, phi_method="pearson", max_iter=MAX_ITER, tol=BETA_TOL):
    """Fit by reweighted least squares starting from beta_init.

    Steps that leave the model domain or decrease the likelihood are halved
    (up to MAX_HALVINGS); without damping the reweighted iteration can fall
    into a two-cycle on nonlinear predictors. The returned FitResult is
    fully populated with hat quantities, dispersion and second-order bias.
    """
    beta = np.array(beta_init, dtype=float)
    st = _local_state(model, data.x, beta)
    converged = False
    iterations = 0
    step_prev = None
    damp = 1.0
    for iterations in range(1, max_iter + 1):
        ll_old = _loglik_kernel(model, st, data.y)
        u_old = _score_from_state(st, data.y)
        unorm_old = float(np.linalg.norm(u_old))
        flat = 1e-10 * max(1.0, abs(ll_old))
        t = st["xt"] @ beta + (data.y - st["mu"]) / st["mup"]
        A = (st["xt"].T * st["w"]) @ st["xt"]
        rhs = st["xt"].T @ (st["w"] * t)
        try:
            beta_full = linalg.solve_spd(A, rhs)
        except NotPositiveDefinite:
            raise RankDeficient("X~^T W X~ is not positive definite") from None
        delta = beta_full - beta
        # A reversed step direction signals a cycle; damp progressively
        # until the iteration contracts again, then relax back toward
        # full steps.
        if step_prev is not None and float(delta @ step_prev) < 0.0:
            damp = max(damp * 0.5, 2.0**-10)
        else:
            damp = min(damp * 2.0, 1.0)
        scale = damp
        accepted = None
        best_flat = None  # smallest score norm among flat-likelihood steps
        fallback = None  # largest likelihood among decreasing steps
        for _ in range(MAX_HALVINGS + 1):
            cand = beta + scale * delta
            try:
                st_new = _local_state(model, data.x, cand)
            except DomainError:
                scale *= 0.5
                continue
            ll_new = _loglik_kernel(model, st_new, data.y)
            if ll_new > ll_old + flat:
                accepted = (cand, st_new, scale)
                break
            unorm_new = float(np.linalg.norm(_score_from_state(st_new, data.y)))
            if ll_new >= ll_old - flat:
                # Flat likelihood: pick the step length that shrinks the score
                # most; a full step can overshoot and cycle near the root.
                if unorm_new < 0.5 * unorm_old:
                    accepted = (cand, st_new, scale)
                    break
                if unorm_new < unorm_old and (
                    best_flat is None or unorm_new < best_flat[3]
                ):
                    best_flat = (cand, st_new, scale, unorm_new)
            elif fallback is None or ll_new > fallback[3]:
                fallback = (cand, st_new, scale, ll_new)
            scale *= 0.5
        if accepted is None:
            if best_flat is not None:
                accepted = best_flat[:3]
            elif fallback is not None:
                accepted = fallback[:3]
            else:
                # No damped step stays in the domain or makes progress; if
                # the score already vanishes we are at the optimum.
                converged = unorm_old < 1e-6
                break
        beta, st, scale = accepted
        step_prev = scale * delta
        if np.max(np.abs(scale * delta)) < tol:
            converged = True
            break
    if not converged:
        # A vanishing score is the actual stationarity condition; a tiny
        # limit cycle in beta can keep the step criterion from firing.
        u = _score_from_state(st, data.y)
        converged = bool(np.max(np.abs(u)) < 1e-6)
    return fit_at(
        model,
        data,
        beta,
        phi_method=phi_method,
        converged=converged,
        iterations=iterations,
    )


def fit_at(model, data, beta, phi=None, phi_method="pearson", converged=None, iterations=0):
    """Populate a FitResult at a given beta without iterating."""
    beta = np.asarray(beta, dtype=float)
    st = _local_state(model, data.x, beta)
    u = _score_from_state(st, data.y)
    score_norm = float(np.max(np.abs(u))) if u.size else 0.0
    if converged is None:
        converged = score_norm < 1e-6
    fit = FitResult(
        model=model,
        beta=beta,
        eta=st["eta"],
        mu=st["mu"],
        phi=np.nan,
        phi_method=phi_method,
        converged=converged,
        iterations=iterations,
        score_norm=score_norm,
        xtilde=st["xt"],
        w=st["w"],
        V=st["V"],
        V1=st["V1"],
        V2=st["V2"],
        mup=st["mup"],
        mupp=st["mupp"],
        theta=model.family.theta(st["mu"]),
        xtwx_inv=None,
        kinv=None,
        Z=None,
        z=None,
        H=None,
        h=None,
        d=None,
        F=None,
        J=None,
        Q=None,
        T=None,
        bias=None,
    )
    fit.phi = phi if phi is not None else estimate_dispersion(model, fit, data, phi_method)
    _attach_hat_quantities(model, fit, data)
    fit.bias = _bias_from_fit(fit)
    fit.xb = fit.xtilde @ fit.bias
    fit.kinv = fit.xtwx_inv / fit.phi
    return fit


def estimate_dispersion(model, fit, data, method="pearson"):
    """Estimate the precision parameter phi from a converged fit."""
    n, p = fit.n, fit.p
    pearson_ss = float(np.sum((data.y - fit.mu) ** 2 / fit.V))
    if pearson_ss == 0.0:
        raise DegenerateResiduals("all responses lie exactly on the fitted curve")
    if method == "pearson":
        return (n - p) / pearson_ss
    if method != "mle":
        raise DomainError(f"unknown dispersion method {method!r}")
    name = model.family.name
    if name == "normal":
        return n / float(np.sum((data.y - fit.mu) ** 2))
    if name == "inverse_gaussian":
        return n / float(np.sum((data.y - fit.mu) ** 2 / (fit.mu**2 * data.y)))
    # gamma: profile likelihood in phi, solved on the log scale.
    s = float(np.sum(np.log(data.y / fit.mu) - data.y / fit.mu)) / n

    def grad(logphi):
        ph = np.exp(logphi)
        return np.log(ph) - scipy.special.digamma(ph) + 1.0 + s

    sol = scipy.optimize.brentq(grad, -20.0, 20.0, xtol=1e-12)
    return float(np.exp(sol))


def hat_quantities(model, fit):
    """Return (Z, z, H, h, d, F, J, Q, T) evaluated at beta-hat."""
    return fit.Z, fit.z, fit.H, fit.h, fit.d, fit.F, fit.J, fit.Q, fit.T


def _attach_hat_quantities(model, fit, data):
    xt, w = fit.xtilde, fit.w
    A = (xt.T * w) @ xt
    try:
        Ainv = linalg.inv_spd(A)
    except NotPositiveDefinite:
        raise RankDeficient("X~^T W X~ is not positive definite") from None
    Z = xt @ Ainv @ xt.T
    sw = np.sqrt(w)
    H = Z * np.outer(sw, sw)
    hess = model.predictor.hessians(data.x, fit.beta)
    # d_i = tr{X~_i (X~^T W X~)^{-1}}; X~_i symmetric, so a plain contraction.
    d = np.einsum("irs,rs->i", hess, Ainv)
    fit.xtwx_inv = Ainv
    fit.Z = Z
    fit.z = np.diag(Z).copy()
    fit.H = H
    fit.h = np.diag(H).copy()
    fit.d = d
    fit.F = fit.mup * fit.mupp / fit.V
    fit.J = fit.mupp / np.sqrt(fit.V)
    fit.Q = fit.V1 / np.sqrt(fit.V)
    fit.T = 2.0 * fit.phi * w + w * fit.V2 + fit.V1 * fit.mupp / fit.V


def bias_beta(model, fit):
    """Second-order bias of beta-hat (Paula's matrix expression)."""
    return _bias_from_fit(fit)


def _bias_from_fit(fit):
    xi1 = -(fit.z * fit.F / fit.w) / (2.0 * fit.phi)
    xi2 = -fit.d / (2.0 * fit.phi)
    return fit.xtwx_inv @ (fit.xtilde.T @ (fit.w * (xi1 + xi2)))
