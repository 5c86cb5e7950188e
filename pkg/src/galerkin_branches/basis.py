"""Tensor sine basis on box domains.

A field on the box ``(0, L_1) x ... x (0, L_d)`` is a finite sum

    u(x) = sum_k c_k  prod_i sin(k_i pi x_i / L_i),   k_i = 1..M

with coefficients stored flat in lexicographic order of ``k`` (first axis
slowest).  Every basis function vanishes on the boundary and belongs to
H^6 ∩ H^1_0, so the Galerkin space is an exact subspace of the strong space.

Pointwise values and derivatives up to order two are evaluated on a tensor
Gauss-Legendre grid.  Gauss-Legendre is not exact for trigonometric
integrands; a product whose highest frequency is ``F`` (in units of
``pi / L``) is integrated to ~1e-13 once ``Q >= F + 16``.  The default
``quad_order`` is therefore ``4 M + 16``, exact for the quartic products that
appear in mass matrices and the 1D nonlinear forms.  Two-dimensional
Hessian-determinant nonlinearities are sextic in the basis functions; pass
``quad_order=exact_quad_order(M, 6)`` to avoid aliasing there.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MAX_POINTWISE_ORDER = 2


def exact_quad_order(modes: int, degree: int) -> int:
    """Gauss points per axis that integrate degree-`degree` sine products to ~1e-13."""
    return degree * modes + 16


@dataclass(frozen=True)
class DomainSpec:
    """Box domain, truncation and quadrature.

    Parameters
    ----------
    dim : int
        Space dimension, 1, 2 or 3.
    modes : int
        Sine modes per axis ``M``; the basis has ``M**dim`` functions.
    lengths : tuple of float, optional
        Box extents, default ``pi`` on every axis.
    quad_order : int, optional
        Gauss points per axis, ``Q >= 2 M``.  Defaults to ``exact_quad_order(M, 4)``.
    """

    dim: int = 1
    modes: int = 8
    lengths: tuple = None
    quad_order: int = None

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.modes < 1:
            raise ValueError(f"modes must be >= 1, got {self.modes}")
        lengths = self.lengths
        if lengths is None:
            lengths = (np.pi,) * self.dim
        lengths = tuple(float(v) for v in np.broadcast_to(lengths, (self.dim,)))
        if any(not np.isfinite(v) or v <= 0 for v in lengths):
            raise ValueError(f"lengths must be positive, got {lengths}")
        object.__setattr__(self, "lengths", lengths)
        q = self.quad_order
        if q is None:
            q = exact_quad_order(self.modes, 4)
        if q < 2 * self.modes:
            raise ValueError(f"quad_order={q} < 2*modes={2 * self.modes}")
        object.__setattr__(self, "quad_order", int(q))

    @property
    def size(self) -> int:
        return self.modes ** self.dim

    @property
    def grid_size(self) -> int:
        return self.quad_order ** self.dim

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def half_volume(self) -> float:
        """``prod(L_i / 2)``, the squared L2 norm of every basis function."""
        return float(np.prod([L / 2 for L in self.lengths]))

    @property
    def dirichlet_lambda0(self) -> float:
        """Smallest Dirichlet eigenvalue of -Laplacian on the box."""
        return float(sum((np.pi / L) ** 2 for L in self.lengths))

    def indices(self) -> np.ndarray:
        """Multi-indices ``k`` of shape ``(size, dim)`` in flat order."""
        return _indices(self.dim, self.modes)

    def flat_index(self, k) -> int:
        k = tuple(int(v) for v in np.atleast_1d(k))
        if len(k) != self.dim or any(v < 1 or v > self.modes for v in k):
            raise IndexError(f"basis index {k} out of range for {self}")
        return int(np.ravel_multi_index(tuple(v - 1 for v in k), (self.modes,) * self.dim))

    def wavenumbers(self) -> np.ndarray:
        """``kappa_i = k_i pi / L_i`` per basis function, shape ``(size, dim)``."""
        return self.indices() * (np.pi / np.asarray(self.lengths))


@lru_cache(maxsize=None)
def _indices(dim, modes):
    ks = np.array(list(itertools.product(range(1, modes + 1), repeat=dim)), dtype=int)
    ks.setflags(write=False)
    return ks


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Field:
    """Coefficient vector over the tensor sine basis of ``domain``."""

    domain: DomainSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = _readonly(self.coeffs).ravel()
        if c.shape != (self.domain.size,):
            raise ValueError(f"expected {self.domain.size} coefficients, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("field coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, domain):
        return cls(domain, np.zeros(domain.size))

    @classmethod
    def mode(cls, domain, k, amplitude=1.0):
        c = np.zeros(domain.size)
        c[domain.flat_index(k)] = amplitude
        return cls(domain, c)

    def _check(self, other):
        if self.domain != other.domain:
            raise ValueError("fields live on different domains")

    def __add__(self, other):
        self._check(other)
        return Field(self.domain, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return Field(self.domain, self.coeffs - other.coeffs)

    def __mul__(self, s):
        return Field(self.domain, float(s) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.domain, -self.coeffs)


@dataclass(frozen=True, eq=False)
class GridValues:
    """Values on the tensor Gauss grid of ``domain``, flat, length ``Q**dim``."""

    domain: DomainSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = _readonly(self.values).ravel()
        if v.shape != (self.domain.grid_size,):
            raise ValueError(f"expected {self.domain.grid_size} grid values, got {v.shape}")
        object.__setattr__(self, "values", v)

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())


# ---------------------------------------------------------------------------
# quadrature tables

@lru_cache(maxsize=None)
def _axis_rule(q, length):
    t, w = np.polynomial.legendre.leggauss(q)
    x, w = (t + 1.0) * (length / 2.0), w * (length / 2.0)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def _axis_tables(q, length, modes):
    """Per-axis tables ``T[order][node, k]`` of d^order/dx^order sin(k pi x / L)."""
    x, _ = _axis_rule(q, length)
    kappa = np.arange(1, modes + 1) * (np.pi / length)
    arg = np.outer(x, kappa)
    s, c = np.sin(arg), np.cos(arg)
    tables = (s, kappa * c, -(kappa ** 2) * s)
    for t in tables:
        t.setflags(write=False)
    return tables


def grid_points(domain: DomainSpec) -> np.ndarray:
    """Coordinates of the tensor grid, shape ``(dim, Q**dim)``."""
    axes = [_axis_rule(domain.quad_order, L)[0] for L in domain.lengths]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh])


@lru_cache(maxsize=None)
def quadrature_weights(domain: DomainSpec) -> np.ndarray:
    w = np.ones(1)
    for L in domain.lengths:
        w = np.kron(w, _axis_rule(domain.quad_order, L)[1])
    w.setflags(write=False)
    return w


def _check_order(order, dim):
    order = tuple(int(o) for o in np.atleast_1d(order))
    if len(order) != dim:
        raise ValueError(f"derivative order {order} does not match dim={dim}")
    if any(o < 0 for o in order):
        raise ValueError(f"negative derivative order {order}")
    if any(o > MAX_POINTWISE_ORDER for o in order):
        raise ValueError(
            f"derivative order {order} exceeds {MAX_POINTWISE_ORDER} per axis; "
            "higher orders are only available through the X Gram matrix"
        )
    return order


@lru_cache(maxsize=64)
def basis_matrix(domain: DomainSpec, order=None) -> np.ndarray:
    """Matrix ``Phi[q, k]`` of the ``order`` derivative of basis function k at node q."""
    order = _check_order((0,) * domain.dim if order is None else order, domain.dim)
    phi = np.ones((1, 1))
    for L, o in zip(domain.lengths, order):
        phi = np.kron(phi, _axis_tables(domain.quad_order, L, domain.modes)[o])
    phi.setflags(write=False)
    return phi


def eval_field(f: Field, order=None) -> GridValues:
    """Exact spectral derivative of ``f`` evaluated on the quadrature grid.

    ``order`` is a per-axis multi-order with components in {0, 1, 2}; the
    default is the plain value.
    """
    dom = f.domain
    order = _check_order((0,) * dom.dim if order is None else order, dom.dim)
    return GridValues(dom, basis_matrix(dom, order) @ f.coeffs)


def evaluate(f: Field, points, order=None) -> np.ndarray:
    """Evaluate ``f`` (or a derivative) at arbitrary points of shape ``(dim, n)``."""
    dom = f.domain
    order = _check_order((0,) * dom.dim if order is None else order, dom.dim)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] != dom.dim:
        pts = pts.T
    kappa = dom.wavenumbers()  # (K, dim)
    out = np.ones((pts.shape[1], dom.size))
    for i, o in enumerate(order):
        arg = np.outer(pts[i], kappa[:, i])
        if o == 0:
            fac = np.sin(arg)
        elif o == 1:
            fac = kappa[:, i] * np.cos(arg)
        else:
            fac = -(kappa[:, i] ** 2) * np.sin(arg)
        out *= fac
    return out @ f.coeffs


# ---------------------------------------------------------------------------
# Hessians

def hessian_orders(dim):
    """Pairs ``(a, b)`` with ``a <= b`` and the multi-order of d^2/dx_a dx_b."""
    pairs = []
    for a in range(dim):
        for b in range(a, dim):
            o = [0] * dim
            o[a] += 1
            o[b] += 1
            pairs.append(((a, b), tuple(o)))
    return pairs


def hessian_values(domain: DomainSpec, coeffs) -> np.ndarray:
    """Hessian stack of shape ``(dim, dim, Q**dim)`` for a coefficient vector."""
    d = domain.dim
    H = np.empty((d, d, domain.grid_size))
    for (a, b), o in hessian_orders(d):
        H[a, b] = basis_matrix(domain, o) @ coeffs
        H[b, a] = H[a, b]
    return H


def cofactor(H: np.ndarray) -> np.ndarray:
    """Pointwise cofactor matrix of a ``(dim, dim, n)`` stack.

    ``det H = sum_b H[0, b] C[0, b]`` and the derivative of ``det`` in the
    direction ``V`` is ``sum(C * V)``.
    """
    d = H.shape[0]
    if d == 1:
        return np.ones_like(H)
    if d == 2:
        return np.stack([np.stack([H[1, 1], -H[1, 0]]), np.stack([-H[0, 1], H[0, 0]])])
    r0, r1, r2 = (np.moveaxis(H[i], 0, -1) for i in range(3))
    C = np.stack([np.cross(r1, r2), np.cross(r2, r0), np.cross(r0, r1)])
    return np.moveaxis(C, -1, 1)


def det_from_hessian(H: np.ndarray) -> np.ndarray:
    if H.shape[0] == 1:
        return H[0, 0].copy()
    return np.einsum("bq,bq->q", H[0], cofactor(H)[0])


def hessian_determinant(f: Field) -> GridValues:
    """Pointwise ``det D^2 u`` on the grid (``u''`` in one dimension)."""
    return GridValues(f.domain, det_from_hessian(hessian_values(f.domain, f.coeffs)))


def hessian_determinant_directional(f: Field, v: Field) -> GridValues:
    """Derivative of ``det D^2`` at ``f`` in direction ``v``: ``trace(adj(D^2 f) D^2 v)``."""
    f._check(v)
    H = hessian_values(f.domain, f.coeffs)
    V = hessian_values(v.domain, v.coeffs)
    return GridValues(f.domain, np.einsum("abq,abq->q", cofactor(H), V))


def integrate(vals: GridValues) -> float:
    """Tensor Gauss-Legendre quadrature of grid values over the box."""
    return float(quadrature_weights(vals.domain) @ vals.values)


def grid_function(domain: DomainSpec, fn) -> GridValues:
    """Sample ``fn(x_1, ..., x_dim)`` on the quadrature grid."""
    pts = grid_points(domain)
    vals = np.broadcast_to(np.asarray(fn(*pts), dtype=float), (domain.grid_size,))
    return GridValues(domain, vals)


def constant(domain: DomainSpec, value=1.0) -> GridValues:
    return GridValues(domain, np.full(domain.grid_size, float(value)))


def spatial_mean_weights(domain: DomainSpec) -> np.ndarray:
    """Exact ``int_Omega phi_k dx`` for every basis function."""
    out = np.ones(domain.size)
    ks = domain.indices()
    for i, L in enumerate(domain.lengths):
        k = ks[:, i]
        out *= L / (k * np.pi) * (1 - (-1.0) ** k)
    return out
