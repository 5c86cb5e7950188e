"""Bilinear forms on the sine basis: X = H^6 ∩ H^1_0, H^1_0 and weighted L^2.

The sine basis is orthogonal in every H^m on a box, so the X and H^1_0 Gram
matrices are diagonal and are stored as their diagonals.  The X norm uses the
unweighted Sobolev convention

    ||u||_X^2 = sum_{|alpha| <= 6} ||D^alpha u||_{L^2}^2 + ||grad u||_{L^2}^2

summing every multi-index once, with no multinomial factors.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .basis import DomainSpec, GridValues, basis_matrix, constant, quadrature_weights

SOBOLEV_ORDER = 6


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def _multi_indices(dim, order):
    return tuple(a for a in itertools.product(range(order + 1), repeat=dim) if sum(a) <= order)


@dataclass(frozen=True, eq=False)
class GramX:
    domain: DomainSpec
    diag: np.ndarray = field(repr=False)

    def inner(self, a, b) -> float:
        return float(np.dot(a, self.diag * b))

    def norm(self, a) -> float:
        return float(np.sqrt(max(self.inner(a, a), 0.0)))


@dataclass(frozen=True, eq=False)
class GramH1(GramX):
    pass


@dataclass(frozen=True, eq=False)
class MassMatrix:
    domain: DomainSpec
    entries: np.ndarray = field(repr=False)

    def inner(self, a, b) -> float:
        return float(a @ self.entries @ b)

    def is_positive_definite(self) -> bool:
        return bool(np.linalg.eigvalsh(self.entries)[0] > 0)


@lru_cache(maxsize=None)
def gram_x(domain: DomainSpec) -> GramX:
    """Diagonal of the X inner product on the sine basis."""
    kappa2 = domain.wavenumbers() ** 2
    total = np.zeros(domain.size)
    for alpha in _multi_indices(domain.dim, SOBOLEV_ORDER):
        total += np.prod(kappa2 ** np.asarray(alpha), axis=1)
    total += kappa2.sum(axis=1)
    return GramX(domain, _readonly(domain.half_volume * total))


@lru_cache(maxsize=None)
def gram_h1(domain: DomainSpec) -> GramH1:
    """Diagonal of the Dirichlet form ``int grad u . grad v``."""
    kappa2 = domain.wavenumbers() ** 2
    return GramH1(domain, _readonly(domain.half_volume * kappa2.sum(axis=1)))


def mass(domain: DomainSpec, g: GridValues) -> MassMatrix:
    """Weighted mass matrix ``int g phi_j phi_l dx`` by quadrature.

    ``g`` may change sign; the result is then symmetric but indefinite.
    """
    if g.domain != domain:
        raise ValueError("weight lives on a different domain")
    if not np.all(np.isfinite(g.values)):
        raise ValueError("weight must be finite on the grid")
    phi = basis_matrix(domain)
    m = phi.T @ ((quadrature_weights(domain) * g.values)[:, None] * phi)
    m = 0.5 * (m + m.T)
    return MassMatrix(domain, _readonly(m))


@lru_cache(maxsize=None)
def unit_mass(domain: DomainSpec) -> MassMatrix:
    """``mass(domain, 1)``, cached since every nonlinear system reuses it."""
    return mass(domain, constant(domain, 1.0))
