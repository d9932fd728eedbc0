"""Link function catalog: g, its inverse, and derivatives of the inverse link.

Derivatives are with respect to the predictor eta throughout; the IRLS
weight is w = mu'(eta)^2 / V(mu).
"""
from abc import ABC, abstractmethod

import numpy as np

from .errors import DomainError


class Link(ABC):
    name: str

    @abstractmethod
    def eta_of_mu(self, mu):
        """g(mu)."""

    @abstractmethod
    def mu_of_eta(self, eta):
        """g^{-1}(eta)."""

    @abstractmethod
    def derivs(self, eta):
        """Return (mu', mu'') at eta."""

    def check_eta(self, eta):
        """Raise DomainError if eta is outside the link's domain."""
        if not np.all(np.isfinite(eta)):
            raise DomainError(f"{self.name} link: predictor must be finite")

    def __repr__(self):
        return f"<Link {self.name}>"


class Identity(Link):
    name = "identity"

    def eta_of_mu(self, mu):
        return np.asarray(mu, dtype=float) + 0.0

    def mu_of_eta(self, eta):
        self.check_eta(eta)
        return np.asarray(eta, dtype=float) + 0.0

    def derivs(self, eta):
        self.check_eta(eta)
        eta = np.asarray(eta, dtype=float)
        return np.ones_like(eta), np.zeros_like(eta)


class Log(Link):
    name = "log"

    def eta_of_mu(self, mu):
        if not np.all(np.asarray(mu) > 0):
            raise DomainError("log link requires mu > 0")
        return np.log(mu)

    def mu_of_eta(self, eta):
        self.check_eta(eta)
        return np.exp(np.asarray(eta, dtype=float))

    def derivs(self, eta):
        mu = self.mu_of_eta(eta)
        return mu, mu + 0.0


class Reciprocal(Link):
    """1/mu link, restricted to mu > 0 (the only pairing exercised is gamma)."""

    name = "reciprocal"

    def check_eta(self, eta):
        super().check_eta(eta)
        if not np.all(np.asarray(eta) > 0):
            raise DomainError("reciprocal link requires eta > 0")

    def eta_of_mu(self, mu):
        if not np.all(np.asarray(mu) > 0):
            raise DomainError("reciprocal link requires mu > 0")
        return 1.0 / np.asarray(mu, dtype=float)

    def mu_of_eta(self, eta):
        self.check_eta(eta)
        return 1.0 / np.asarray(eta, dtype=float)

    def derivs(self, eta):
        mu = self.mu_of_eta(eta)
        return -(mu**2), 2.0 * mu**3


class InverseSquare(Link):
    """1/mu^2 link; mu = eta^{-1/2} on eta > 0."""

    name = "inverse_square"

    def check_eta(self, eta):
        super().check_eta(eta)
        if not np.all(np.asarray(eta) > 0):
            raise DomainError("inverse_square link requires eta > 0")

    def eta_of_mu(self, mu):
        if not np.all(np.asarray(mu) > 0):
            raise DomainError("inverse_square link requires mu > 0")
        return 1.0 / np.asarray(mu, dtype=float) ** 2

    def mu_of_eta(self, eta):
        self.check_eta(eta)
        return np.asarray(eta, dtype=float) ** -0.5

    def derivs(self, eta):
        mu = self.mu_of_eta(eta)
        return -(mu**3) / 2.0, 3.0 * mu**5 / 4.0


def weight(family, link, mu):
    """IRLS weight w = mu'(eta)^2 / V(mu)."""
    eta = link.eta_of_mu(mu)
    mup, _ = link.derivs(eta)
    V, _, _ = family.variance(mu)
    return mup**2 / V


_LINKS = {l.name: l for l in (Identity(), Log(), Reciprocal(), InverseSquare())}


def get_link(name):
    """Look a link up by its config name."""
    try:
        return _LINKS[name]
    except KeyError:
        raise DomainError(
            f"unknown link {name!r}; expected one of {sorted(_LINKS)}"
        ) from None
