"""Catalog of the three continuous exponential families.

Each family carries every per-observation quantity the residual formulas
consume: canonical parameter, cumulant, variance function and its first two
derivatives, the derivative of the log base-measure along the residual scale,
the distribution of the true (standardized) residual, and a sampler.

Parametrization note: the response has mean mu and variance V(mu)/phi. The
inverse Gaussian true-residual density implies shape parameter lambda = phi,
so sampling uses the standard (mu, lambda) generator with lambda = phi.
"""
from abc import ABC, abstractmethod

import numpy as np
import scipy.special as sp
import scipy.stats

from .errors import DomainError, UnsupportedFamily


class ResidualSupport(tuple):
    """(lower, upper) open interval of the standardized residual."""

    __slots__ = ()

    def __new__(cls, lower, upper):
        if not lower < upper:
            raise DomainError(f"empty support ({lower}, {upper})")
        return super().__new__(cls, (lower, upper))

    @property
    def lower(self):
        return self[0]

    @property
    def upper(self):
        return self[1]


def _check_phi(phi):
    if not phi > 0:
        raise DomainError(f"precision must be positive, got {phi}")


class Family(ABC):
    """A continuous exponential family on the mean scale."""

    name: str

    @abstractmethod
    def check_mu(self, mu):
        """Raise DomainError if mu is outside the mean domain."""

    @abstractmethod
    def theta(self, mu):
        """Canonical parameter as a function of the mean."""

    @abstractmethod
    def mu_of_theta(self, theta):
        """Inverse canonical map (used by derivative cross-checks)."""

    @abstractmethod
    def cumulant(self, theta):
        """Cumulant b(theta); carried for validation, b''(theta) = V."""

    @abstractmethod
    def variance(self, mu):
        """Return (V, V', V'') evaluated at mu."""

    @abstractmethod
    def c_deriv(self, x, mu, phi):
        """d/dx of the log base measure c(sqrt(V) x + mu, phi)."""

    @abstractmethod
    def residual_support(self, mu):
        """Open support of the true residual (y - mu)/sqrt(V)."""

    @abstractmethod
    def true_residual_density(self, x, mu, phi):
        """Density of the true residual; zero outside its support."""

    @abstractmethod
    def true_residual_cdf(self, x, mu, phi):
        """CDF of the true residual."""

    @abstractmethod
    def sample(self, mu, phi, rng):
        """Draw responses with mean mu and variance V(mu)/phi."""

    def __repr__(self):
        return f"<Family {self.name}>"


class Normal(Family):
    name = "normal"

    def check_mu(self, mu):
        if not np.all(np.isfinite(mu)):
            raise DomainError("normal mean must be finite")

    def theta(self, mu):
        self.check_mu(mu)
        return np.asarray(mu, dtype=float) + 0.0

    def mu_of_theta(self, theta):
        return np.asarray(theta, dtype=float) + 0.0

    def cumulant(self, theta):
        return np.asarray(theta, dtype=float) ** 2 / 2.0

    def variance(self, mu):
        self.check_mu(mu)
        mu = np.asarray(mu, dtype=float)
        one = np.ones_like(mu)
        return one, np.zeros_like(mu), np.zeros_like(mu)

    def c_deriv(self, x, mu, phi):
        _check_phi(phi)
        return -(np.asarray(x, dtype=float) + mu) * phi

    def residual_support(self, mu):
        self.check_mu(mu)
        return ResidualSupport(-np.inf, np.inf)

    def true_residual_density(self, x, mu, phi):
        _check_phi(phi)
        x = np.asarray(x, dtype=float)
        return np.sqrt(phi / (2.0 * np.pi)) * np.exp(-0.5 * phi * x**2)

    def true_residual_cdf(self, x, mu, phi):
        _check_phi(phi)
        return scipy.stats.norm.cdf(np.asarray(x, dtype=float) * np.sqrt(phi))

    def sample(self, mu, phi, rng):
        self.check_mu(mu)
        _check_phi(phi)
        return rng.normal(mu, 1.0 / np.sqrt(phi))


class Gamma(Family):
    name = "gamma"

    def check_mu(self, mu):
        mu = np.asarray(mu)
        if not (np.all(np.isfinite(mu)) and np.all(mu > 0)):
            raise DomainError("gamma mean must be positive and finite")

    def theta(self, mu):
        self.check_mu(mu)
        return -1.0 / np.asarray(mu, dtype=float)

    def mu_of_theta(self, theta):
        return -1.0 / np.asarray(theta, dtype=float)

    def cumulant(self, theta):
        return -np.log(-np.asarray(theta, dtype=float))

    def variance(self, mu):
        self.check_mu(mu)
        mu = np.asarray(mu, dtype=float)
        return mu**2, 2.0 * mu, np.full_like(mu, 2.0)

    def c_deriv(self, x, mu, phi):
        _check_phi(phi)
        x = np.asarray(x, dtype=float)
        if np.any(x <= -1.0):
            raise DomainError("gamma residual support is x > -1")
        return (phi - 1.0) / (1.0 + x)

    def residual_support(self, mu):
        self.check_mu(mu)
        return ResidualSupport(-1.0, np.inf)

    def true_residual_density(self, x, mu, phi):
        _check_phi(phi)
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros_like(x)
        inside = x > -1.0
        u = phi * (1.0 + x[inside])
        log_f = (phi - 1.0) * np.log(u) + np.log(phi) - sp.gammaln(phi) - u
        out[inside] = np.exp(log_f)
        return float(out[0]) if scalar else out

    def true_residual_cdf(self, x, mu, phi):
        _check_phi(phi)
        x = np.asarray(x, dtype=float)
        return sp.gammainc(phi, phi * np.clip(1.0 + x, 0.0, None))

    def sample(self, mu, phi, rng):
        self.check_mu(mu)
        _check_phi(phi)
        return rng.gamma(shape=phi, scale=np.asarray(mu, dtype=float) / phi)


class InverseGaussian(Family):
    name = "inverse_gaussian"

    def check_mu(self, mu):
        mu = np.asarray(mu)
        if not (np.all(np.isfinite(mu)) and np.all(mu > 0)):
            raise DomainError("inverse Gaussian mean must be positive and finite")

    def theta(self, mu):
        self.check_mu(mu)
        return -1.0 / (2.0 * np.asarray(mu, dtype=float) ** 2)

    def mu_of_theta(self, theta):
        return 1.0 / np.sqrt(-2.0 * np.asarray(theta, dtype=float))

    def cumulant(self, theta):
        return -np.sqrt(-2.0 * np.asarray(theta, dtype=float))

    def variance(self, mu):
        self.check_mu(mu)
        mu = np.asarray(mu, dtype=float)
        return mu**3, 3.0 * mu**2, 6.0 * mu

    def c_deriv(self, x, mu, phi):
        _check_phi(phi)
        self.check_mu(mu)
        x = np.asarray(x, dtype=float)
        y = mu ** 1.5 * x + mu  # response value at this residual
        if np.any(y <= 0):
            raise DomainError("inverse Gaussian residual support is x > -1/sqrt(mu)")
        return -1.5 * mu**1.5 / y + 0.5 * phi * mu**1.5 / y**2

    def residual_support(self, mu):
        self.check_mu(mu)
        return ResidualSupport(-1.0 / np.sqrt(mu), np.inf)

    def true_residual_density(self, x, mu, phi):
        _check_phi(phi)
        self.check_mu(mu)
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros_like(x)
        u = np.sqrt(mu) * x + 1.0
        inside = u > 0.0
        ui = u[inside]
        out[inside] = np.sqrt(phi / (2.0 * np.pi * ui**3)) * np.exp(
            -phi * x[inside] ** 2 / (2.0 * ui)
        )
        return float(out[0]) if scalar else out

    def true_residual_cdf(self, x, mu, phi):
        # Change of variable to the response scale; closed-form IG CDF with
        # mean mu and shape phi.
        _check_phi(phi)
        self.check_mu(mu)
        x = np.asarray(x, dtype=float)
        y = np.clip(mu**1.5 * x + mu, 0.0, None)
        return scipy.stats.invgauss.cdf(y, mu / phi, scale=phi)

    def sample(self, mu, phi, rng):
        self.check_mu(mu)
        _check_phi(phi)
        return rng.wald(mu, phi)


_FAMILIES = {f.name: f for f in (Normal(), Gamma(), InverseGaussian())}


def get_family(name):
    """Look a family up by its config name."""
    try:
        return _FAMILIES[name]
    except KeyError:
        raise UnsupportedFamily(
            f"unknown family {name!r}; expected one of {sorted(_FAMILIES)}"
        ) from None
