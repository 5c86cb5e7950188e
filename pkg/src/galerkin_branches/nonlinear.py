"""Galerkin residuals and Jacobians of the nonlinear Dirichlet problems.

Three right-hand sides are supported, all with the same principal part
``eps <u, phi>_X + <grad u, grad phi>``:

``multiplicative``
    ``lam (1 + |det D^2 u|^2) u``
``additive_regularized``
    ``lam u + |det D^2 u|^2 u / (u^2 + eps2)``
``plugin``
    ``lam u + B(x, u, grad u, D^2 u)`` for a user evaluator ``B``.

Residual components are ``R_j = <lhs - rhs, phi_j>`` with the nonlinear
integrals taken by the tensor Gauss rule of the domain.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .basis import (
    DomainSpec,
    basis_matrix,
    cofactor,
    det_from_hessian,
    grid_points,
    hessian_orders,
    hessian_values,
    quadrature_weights,
)
from .errors import NonConvergenceError, SingularJacobianError
from .gram import gram_h1, gram_x, unit_mass

MAX_HALVINGS = 6


class Plugin(Protocol):
    """Pointwise nonlinearity ``B(x, u, grad u, D^2 u)`` on the Gauss grid.

    Shapes: ``x`` (dim, G), ``u`` (G,), ``grad`` (dim, G), ``hess``
    (dim, dim, G).  ``directional`` returns the derivative of ``B`` in the
    direction ``(du, dgrad, dhess)``; the toolkit may pass a trailing column
    axis on the directions, which vectorized implementations should accept.
    """

    def value(self, x, u, grad, hess): ...

    def directional(self, x, u, grad, hess, du, dgrad, dhess): ...


@dataclass(frozen=True)
class NonlinearityKind:
    tag: str = "multiplicative"
    eps2: float | None = None
    plugin: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.tag not in ("multiplicative", "additive_regularized", "plugin"):
            raise ValueError(f"unknown nonlinearity {self.tag!r}")
        if self.tag == "additive_regularized" and self.eps2 is not None and not self.eps2 > 0:
            raise ValueError(f"eps2 must be > 0, got {self.eps2}")
        if self.tag == "plugin" and self.plugin is None:
            raise ValueError("plugin kind needs an evaluator")

    @classmethod
    def multiplicative(cls):
        return cls("multiplicative")

    @classmethod
    def additive_regularized(cls, eps2=None):
        return cls("additive_regularized", eps2)

    @classmethod
    def from_plugin(cls, plugin):
        return cls("plugin", plugin=plugin)

    @property
    def odd(self) -> bool:
        return self.tag in ("multiplicative", "additive_regularized")


@dataclass(frozen=True)
class NewtonResult:
    c: np.ndarray
    iterations: int
    residual_norm: float


class ResidualSystem:
    """Galerkin system ``R(lam, c) = 0`` on ``domain`` for one nonlinearity and ``eps``.

    For the additive kind ``eps2`` defaults to ``eps``; it must end up positive.
    """

    def __init__(self, domain: DomainSpec, kind: NonlinearityKind | str = "multiplicative",
                 eps: float = 0.0):
        if isinstance(kind, str):
            kind = NonlinearityKind(kind)
        eps = float(eps)
        if not eps >= 0:
            raise ValueError(f"eps must be >= 0, got {eps}")
        if kind.tag == "additive_regularized":
            eps2 = eps if kind.eps2 is None else kind.eps2
            if not eps2 > 0:
                raise ValueError("additive_regularized needs eps2 > 0 (eps2 defaults to eps)")
            kind = NonlinearityKind("additive_regularized", float(eps2))
        self.domain = domain
        self.kind = kind
        self.eps = eps
        self.stiffness = eps * gram_x(domain).diag + gram_h1(domain).diag
        self._m1 = unit_mass(domain).entries
        self._w = quadrature_weights(domain)
        self._phi = basis_matrix(domain)

    def __repr__(self):
        return f"ResidualSystem({self.domain}, {self.kind.tag}, eps={self.eps:g})"

    @property
    def lambda_scales_nonlinearity(self) -> bool:
        return self.kind.tag == "multiplicative"

    # -- pointwise pieces ------------------------------------------------
    def _state(self, c):
        c = np.asarray(c, dtype=float)
        u = self._phi @ c
        H = hessian_values(self.domain, c)
        return c, u, H

    def _project(self, vals):
        return self._phi.T @ (self._w * vals)

    def _dhess_matrix(self, H):
        """``D[q, k] = d(det D^2 u)[phi_k]`` at node ``q``."""
        C = cofactor(H)
        D = np.zeros((self.domain.grid_size, self.domain.size))
        for (a, b), o in hessian_orders(self.domain.dim):
            coef = C[a, b] if a == b else C[a, b] + C[b, a]
            D += coef[:, None] * basis_matrix(self.domain, o)
        return D

    def _plugin_args(self, c, u, H):
        dom = self.domain
        grad = np.stack([
            basis_matrix(dom, tuple(int(i == a) for i in range(dom.dim))) @ c
            for a in range(dom.dim)
        ])
        return grid_points(dom), u, grad, H

    def nonlinear_term(self, c):
        """Vector ``N_j(c)`` of the nonlinear integrals (without any ``lam`` factor)."""
        c, u, H = self._state(c)
        tag = self.kind.tag
        if tag == "plugin":
            return self._project(np.asarray(self.kind.plugin.value(*self._plugin_args(c, u, H))))
        det = det_from_hessian(H)
        if tag == "multiplicative":
            return self._project(det ** 2 * u)
        return self._project(det ** 2 * u / (u ** 2 + self.kind.eps2))

    def nonlinear_jacobian(self, c):
        """``DN[j, k] = d N_j / d c_k``."""
        c, u, H = self._state(c)
        phi = self._phi
        tag = self.kind.tag
        if tag == "plugin":
            return self._plugin_jacobian(c, u, H)
        det = det_from_hessian(H)
        D = self._dhess_matrix(H)
        if tag == "multiplicative":
            pointwise = (2 * det * u)[:, None] * D + (det ** 2)[:, None] * phi
        else:
            e2 = self.kind.eps2
            den = u ** 2 + e2
            f_u = det ** 2 * (e2 - u ** 2) / den ** 2
            f_det = 2 * det * u / den
            pointwise = f_det[:, None] * D + f_u[:, None] * phi
        return phi.T @ (self._w[:, None] * pointwise)

    def _plugin_jacobian(self, c, u, H):
        dom = self.domain
        x, u, grad, H = self._plugin_args(c, u, H)
        dgrad = np.stack([
            basis_matrix(dom, tuple(int(i == a) for i in range(dom.dim))) for a in range(dom.dim)
        ])
        dhess = np.empty((dom.dim, dom.dim) + self._phi.shape)
        for (a, b), o in hessian_orders(dom.dim):
            dhess[a, b] = dhess[b, a] = basis_matrix(dom, o)
        ext = (u[:, None], grad[..., None], H[..., None])
        pointwise = np.asarray(self.kind.plugin.directional(x[..., None], *ext, self._phi, dgrad, dhess))
        return self._phi.T @ (self._w[:, None] * pointwise)

    # -- system ----------------------------------------------------------
    def residual(self, lam, c):
        c = np.asarray(c, dtype=float)
        r = self.stiffness * c - lam * (self._m1 @ c)
        n = self.nonlinear_term(c)
        return r - (lam * n if self.lambda_scales_nonlinearity else n)

    def jacobian(self, lam, c):
        J = np.diag(self.stiffness) - lam * self._m1
        dn = self.nonlinear_jacobian(c)
        return J - (lam * dn if self.lambda_scales_nonlinearity else dn)

    def dresidual_dlambda(self, lam, c):
        c = np.asarray(c, dtype=float)
        out = -(self._m1 @ c)
        if self.lambda_scales_nonlinearity:
            out = out - self.nonlinear_term(c)
        return out

    def scaled_min_singular(self, lam, c):
        s = 1.0 / np.sqrt(self.stiffness)
        return float(np.linalg.svd(s[:, None] * self.jacobian(lam, c) * s[None, :],
                                   compute_uv=False)[-1])


def residual(sys: ResidualSystem, lam, c):
    return sys.residual(lam, c)


def jacobian(sys: ResidualSystem, lam, c):
    return sys.jacobian(lam, c)


def dresidual_dlambda(sys: ResidualSystem, lam, c):
    return sys.dresidual_dlambda(lam, c)


def newton_correct(sys: ResidualSystem, lam, c, tol=1e-10, max_iter=30,
                   singular_tol=1e-10) -> NewtonResult:
    """Newton iteration in ``c`` at fixed ``lam`` with at most six step halvings.

    The Jacobian is checked before the residual, so a point on the trivial
    line at a bifurcation value is reported as singular even though its
    residual vanishes.

    Raises
    ------
    SingularJacobianError
        The diagonally scaled Jacobian has smallest singular value below
        ``singular_tol``.
    NonConvergenceError
        ``max_iter`` iterations (or a failed halving ladder) without
        reaching ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    c = np.array(c, dtype=float)
    s = 1.0 / np.sqrt(sys.stiffness)
    r = sys.residual(lam, c)
    rn = float(np.linalg.norm(r))
    for it in range(max_iter + 1):
        Js = s[:, None] * sys.jacobian(lam, c) * s[None, :]
        if np.linalg.svd(Js, compute_uv=False)[-1] < singular_tol:
            raise SingularJacobianError(
                f"Jacobian singular at lam={lam:.12g}, |c|={np.linalg.norm(c):.3g}"
            )
        if rn <= tol:
            return NewtonResult(c, it, rn)
        if it == max_iter:
            break
        step = -s * np.linalg.solve(Js, s * r)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = c + t * step
            rt = sys.residual(lam, trial)
            rtn = float(np.linalg.norm(rt))
            if rtn < rn:
                break
            t /= 2
        else:
            raise NonConvergenceError(f"no residual decrease after {MAX_HALVINGS} halvings")
        c, r, rn = trial, rt, rtn
    raise NonConvergenceError(f"residual {rn:.3e} > tol {tol:.1e} after {max_iter} iterations")


def smallness_check(sys: ResidualSystem, c) -> dict:
    """``hratio = |N(c)| / |c|_X`` with ``N`` the nonlinear integral vector."""
    c = np.asarray(c, dtype=float)
    nx = gram_x(sys.domain).norm(c)
    if nx == 0:
        raise ValueError("smallness_check needs c != 0")
    return {"hratio": float(np.linalg.norm(sys.nonlinear_term(c)) / nx)}


def decay_order(sys: ResidualSystem, c, scales=(1e-1, 1e-2, 1e-3)) -> float:
    """Least-squares log-log slope of ``|N(t c)|`` against ``t``.

    A nonlinearity that is small compared with its argument has order > 1.
    Returns ``inf`` when ``N`` vanishes identically along the ray.
    """
    t = np.asarray(scales, dtype=float)
    c = np.asarray(c, dtype=float)
    vals = np.array([np.linalg.norm(sys.nonlinear_term(s * c)) for s in t])
    if np.any(vals == 0):
        return float("inf")
    return float(np.polyfit(np.log(t), np.log(vals), 1)[0])


def plugin_admissible(sys: ResidualSystem, probes=None, seed=0) -> tuple[bool, float]:
    """Probe a plugin along random rays; warn when the decay order is <= 1."""
    rng = np.random.default_rng(seed)
    if probes is None:
        k = np.arange(sys.domain.size)
        probes = [rng.standard_normal(sys.domain.size) / (1.0 + k) ** 3 for _ in range(3)]
    order = min(decay_order(sys, p) for p in probes)
    ok = order > 1
    if not ok:
        warnings.warn(f"plugin decay order {order:.3g} <= 1; continuation refused", stacklevel=2)
    return ok, order
