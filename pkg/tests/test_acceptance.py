"""Acceptance suite: one criterion per test, one printed pass/fail line each.

Criteria 4-8 share a single session-scoped Monte Carlo study (10^4
replications of the gamma study at n=20) so the whole suite stays within
its runtime budget.
"""
import numpy as np
import pytest
import scipy.integrate
import scipy.stats

from efnlm import (
    Dataset,
    ModelSpec,
    fit_at,
    get_family,
    get_link,
    irls_fit,
    make_predictor,
)
from efnlm import gof, linalg
from efnlm import residuals as res
from efnlm.simulate import SimulationConfig, run_monte_carlo

MASTER_SEED = 64415  # see configs/gamma_log_n20.json

STUDY = dict(
    family="gamma",
    link="log",
    predictor={"kind": "power_plus_linear"},
    beta_true=[0.5, 1.0, 2.0],
    phi_true=4.0,
    n=20,
    replications=10_000,
    master_seed=MASTER_SEED,
    workers=4,
)


def check(num, ok, detail):
    print(f"\ncriterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="session")
def study():
    return run_monte_carlo(SimulationConfig(**STUDY))


def gamma_log_fit(seed):
    rng = np.random.default_rng(seed)
    model = ModelSpec(
        family=get_family("gamma"),
        link=get_link("log"),
        predictor=make_predictor("power_plus_linear"),
    )
    x = rng.random((20, 2))
    beta = np.array([0.5, 1.0, 2.0])
    mu = np.exp(model.predictor.eval_eta(x, beta))
    y = model.family.sample(mu, 4.0, rng)
    return irls_fit(model, Dataset(x=x, y=y), beta)


def test_criterion_1_reduction_identity():
    # generic correction function vs the gamma+log closed form
    rng = np.random.default_rng(101)
    worst = 0.0
    fits = [gamma_log_fit(s) for s in (0, 1, 2)]
    for _ in range(50):
        fit = fits[int(rng.integers(len(fits)))]
        i = int(rng.integers(fit.n))
        x = float(rng.uniform(-0.9, 3.0))
        closed = (1.0 + x) * (
            fit.xb[i] + fit.d[i] / (2.0 * fit.phi) + fit.z[i] * x / 2.0
        )
        worst = max(worst, abs(res.rho(fit, i, x) - closed))
    check(1, worst <= 1e-10, f"max |generic - closed form| = {worst:.2e}")


class _CatalogFit:
    """Minimal fit-like record for evaluating the e/h catalog."""

    def __init__(self, family, mu, mup, mupp):
        self.V, self.V1, self.V2 = family.variance(np.asarray(mu, dtype=float))
        self.mup = np.asarray(mup, dtype=float)
        self.mupp = np.asarray(mupp, dtype=float)


def test_criterion_2_catalog_consistency():
    worst = 0.0
    mu = np.array([0.7, 1.3, 2.9])
    xs = (-0.6, 0.0, 0.8, 2.0)

    # log link: mu' = mu'' = mu
    fam = get_family("normal")
    fit = _CatalogFit(fam, mu, mu, mu)
    for i in range(3):
        for x in xs:
            worst = max(worst, abs(res.e_fun(fit, i, x) - (-mu[i])))
            worst = max(worst, abs(res.h_fun(fit, i, x) - (-mu[i])))

    fam = get_family("gamma")
    fit = _CatalogFit(fam, mu, mu, mu)
    for i in range(3):
        m = mu[i]
        for x in xs:
            e_row = -m / m - (m / m) * x
            h_row = (-m / m + 2.0 * m**2 / m**2) * (1.0 + x)
            worst = max(worst, abs(res.e_fun(fit, i, x) - e_row))
            worst = max(worst, abs(res.h_fun(fit, i, x) - h_row))

    fam = get_family("inverse_gaussian")
    fit = _CatalogFit(fam, mu, mu, mu)
    for i in range(3):
        m = mu[i]
        for x in xs:
            e_row = -(m ** -1.5) * m - 1.5 * (m**-1) * m * x
            h_row = (
                -(m ** -1.5) * m
                + 3.0 * (m ** -2.5) * m**2
                + (3.75 * (m**-2) * m**2 - 1.5 * (m**-1) * m) * x
            )
            worst = max(worst, abs(res.e_fun(fit, i, x) - e_row))
            worst = max(worst, abs(res.h_fun(fit, i, x) - h_row))

    # canonical specialization: mu' = V and mu'' = V' V
    for name in ("normal", "gamma", "inverse_gaussian"):
        fam = get_family(name)
        V, V1, V2 = fam.variance(mu)
        fit = _CatalogFit(fam, mu, V, V1 * V)
        for i in range(3):
            for x in xs:
                e_can = -np.sqrt(V[i]) - 0.5 * V1[i] * x
                h_can = 0.25 * (V1[i] ** 2 - 2.0 * V[i] * V2[i]) * x
                worst = max(worst, abs(res.e_fun(fit, i, x) - e_can))
                worst = max(worst, abs(res.h_fun(fit, i, x) - h_can))

    check(2, worst <= 1e-12, f"max catalog deviation = {worst:.2e}")


def test_criterion_3_linear_reduction():
    rng = np.random.default_rng(103)
    model = ModelSpec(
        family=get_family("gamma"),
        link=get_link("log"),
        predictor=make_predictor("linear", q=3),
    )
    x = np.column_stack([np.ones(25), rng.random((25, 2))])
    beta = np.array([0.5, 1.0, -0.5])
    mu = np.exp(x @ beta)
    y = model.family.sample(mu, 4.0, rng)
    fit = irls_fit(model, Dataset(x=x, y=y), beta)

    d_zero = not fit.d.any()

    # independently assembled GLM bias: (X^T W X)^{-1} X^T W xi with
    # xi = -(2 phi)^{-1} Z_d W^{-1} F 1 (the curvature term vanishes)
    W = np.diag(fit.w)
    xtwx_inv = np.linalg.inv(x.T @ W @ x)
    Z = x @ xtwx_inv @ x.T
    f_diag = fit.mup * fit.mupp / fit.V
    xi = -np.diag(Z) * (1.0 / fit.w) * f_diag / (2.0 * fit.phi)
    bias_glm = xtwx_inv @ x.T @ W @ xi
    bias_err = float(np.max(np.abs(bias_glm - fit.bias)))

    # independently assembled GLM correction for gamma + log at sample points
    rho_err = 0.0
    xb = x @ bias_glm
    z = np.diag(Z)
    for i in (0, 7, 19):
        for xv in (-0.5, 0.4, 1.7):
            closed = (1.0 + xv) * (xb[i] + z[i] * fit.w[i] * xv / 2.0)
            rho_err = max(rho_err, abs(res.rho(fit, i, xv) - closed))
    ok = d_zero and bias_err <= 1e-12 and rho_err <= 1e-12
    check(
        3,
        ok,
        f"d==0: {d_zero}, bias gap {bias_err:.2e}, rho gap {rho_err:.2e}",
    )


def test_criterion_4_true_residual_moments(study):
    t = study.moments["epsilon"]
    ok = (
        np.abs(t[:, 0]).max() <= 0.02
        and t[:, 1].min() >= 0.23
        and t[:, 1].max() <= 0.27
        and t[:, 2].min() >= 0.85
        and t[:, 2].max() <= 1.10
        and t[:, 3].min() >= 4.0
        and t[:, 3].max() <= 5.0
    )
    check(
        4,
        ok,
        f"mean |max| {np.abs(t[:, 0]).max():.3f}, var [{t[:, 1].min():.3f}, {t[:, 1].max():.3f}], "
        f"skew [{t[:, 2].min():.2f}, {t[:, 2].max():.2f}], kurt [{t[:, 3].min():.2f}, {t[:, 3].max():.2f}]",
    )


def test_criterion_5_correction_efficacy(study):
    d_pearson = study.ks_one["pearson"][:, 0]
    d_corrected = study.ks_one["corrected"][:, 0]
    wins = int(np.sum(d_corrected < d_pearson))
    mean_d = float(d_corrected.mean())
    ok = wins >= 18 and mean_d <= 0.03
    check(5, ok, f"corrected wins {wins}/20 positions, mean D = {mean_d:.3f}")


def test_criterion_6_adjusted_moments(study):
    t = study.moments["adjusted"]
    vmin, vmax = t[:, 1].min(), t[:, 1].max()
    mmax = np.abs(t[:, 0]).max()
    ok = vmin >= 0.93 and vmax <= 1.12 and mmax <= 0.07
    check(6, ok, f"variance [{vmin:.3f}, {vmax:.3f}], |mean| max {mmax:.3f}")


def test_criterion_7_pca_structure(study):
    t = study.moments["pca"]
    last3 = t[-3:, 1].max()
    vmin, vmax = t[:17, 1].min(), t[:17, 1].max()
    smax = np.abs(t[:17, 2]).max()
    ok = last3 <= 0.05 and vmin >= 0.90 and vmax <= 1.55 and smax <= 0.30
    check(
        7,
        ok,
        f"last-3 var max {last3:.3f}, leading var [{vmin:.3f}, {vmax:.3f}], |skew| max {smax:.3f}",
    )


def test_criterion_8_per_dataset_calibration(study):
    targets = {0.01: 0.0099, 0.025: 0.0246, 0.05: 0.0461, 0.10: 0.0942}
    props = study.rejections["pca_scaled"]
    gaps = {lv: abs(props[lv] - tv) for lv, tv in targets.items()}
    adj5 = study.rejections["adjusted"][0.05]
    ok = all(g <= 0.015 for g in gaps.values()) and adj5 <= 0.01
    check(
        8,
        ok,
        "scaled-PCA props "
        + ", ".join(f"{lv:g}%:{props[lv]:.4f}" for lv in targets)
        + f"; adjusted at 5%: {adj5:.4f}",
    )


def test_criterion_9_bias_oracle():
    rng = np.random.default_rng(109)
    n, reps, phi = 200, 2000, 4.0
    model = ModelSpec(
        family=get_family("gamma"),
        link=get_link("log"),
        predictor=make_predictor("linear", q=2),
    )
    x = np.column_stack([np.ones(n), rng.random(n)])
    beta_true = np.array([0.5, 1.0])
    mu = np.exp(x @ beta_true)
    estimates = []
    for _ in range(reps):
        y = model.family.sample(mu, phi, rng)
        fit = irls_fit(model, Dataset(x=x, y=y), beta_true)
        if fit.converged:
            estimates.append(fit.beta)
    estimates = np.array(estimates)
    emp = estimates.mean(axis=0) - beta_true
    se = estimates.std(axis=0, ddof=1) / np.sqrt(len(estimates))
    theory = fit_at(model, Dataset(x=x, y=mu.copy()), beta_true, phi=phi).bias
    gap = np.abs(emp - theory) / se
    ok = bool(np.all(gap <= 3.0))
    check(9, ok, f"per-coordinate |empirical - formula| in MC SEs: {np.round(gap, 2)}")


def test_criterion_10_numerical_kernels():
    rng = np.random.default_rng(110)
    eig_err = 0.0
    for n in (2, 5, 10, 20, 35, 50):
        a = rng.standard_normal((n, n))
        s = (a + a.T) / 2.0
        eig = linalg.sym_eigen(s)
        v, lam = eig.eigenvectors, eig.eigenvalues
        eig_err = max(eig_err, float(np.max(np.abs(s - (v * lam) @ v.T))))
        eig_err = max(eig_err, float(np.max(np.abs(v.T @ v - np.eye(n)))))

    ks_exact = True
    grid = np.array([-1.5, -0.4, 0.0, 0.6, 1.1, 2.5])
    for n in range(1, 9):
        for _ in range(40):
            xs = rng.choice(grid, size=n, replace=True)
            stat = gof.ks_one_sample(xs, scipy.stats.norm.cdf).statistic
            srt = np.sort(xs)
            brute = max(
                max(abs((i + 1) / n - scipy.stats.norm.cdf(v)), abs(i / n - scipy.stats.norm.cdf(v)))
                for i, v in enumerate(srt)
            )
            if stat != brute:
                ks_exact = False

    dens_err = 0.0
    cases = (
        ("normal", 1.0, (-np.inf, np.inf)),
        ("gamma", 2.0, (-1.0, np.inf)),
        ("inverse_gaussian", 1.5, None),
    )
    for name, mu0, support in cases:
        fam = get_family(name)
        if support is None:
            support = fam.residual_support(mu0)
        total, _ = scipy.integrate.quad(
            lambda s: fam.true_residual_density(s, mu0, 4.0),
            support[0] + 1e-12 if np.isfinite(support[0]) else -np.inf,
            support[1],
            limit=400,
        )
        dens_err = max(dens_err, abs(total - 1.0))

    ok = eig_err <= 1e-10 and ks_exact and dens_err <= 1e-6
    check(
        10,
        ok,
        f"eigen err {eig_err:.2e}, K-S exact: {ks_exact}, density integral err {dens_err:.2e}",
    )
