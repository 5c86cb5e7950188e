"""Pseudo-arclength continuation of nontrivial branches from the trivial line.

Branches live in the product space R x X.  All geometry (arclength steps,
ball truncation, distances) uses the scaled coordinates

    y = (lam / lam_ref, sqrt(diag GramX) * c)

so that the Euclidean norm of ``y`` is ``sqrt((lam/lam_ref)^2 + |c|_X^2)``;
``lam_ref`` is the smallest Dirichlet eigenvalue of the box, which is also the
centre of the truncation ball ``B_R(lam_ref, 0)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import basis_matrix, constant
from .eigen import perturbed_eigenpair, second_eigenvalue, simplicity_check
from .errors import DegenerateGapError, NonConvergenceError
from .gram import gram_x
from .nonlinear import ResidualSystem, plugin_admissible

RETURN_TOL_FACTOR = 10.0


@dataclass(frozen=True, eq=False)
class BranchPoint:
    lam: float
    c: np.ndarray = field(repr=False)
    normX: float
    min_on_grid: float
    max_on_grid: float
    step: int


@dataclass(eq=False)
class Branch:
    """Ordered continuation points of one sign class at one ``eps``.

    ``termination`` is one of ``exited_ball``, ``max_steps``,
    ``returned_to_trivial``, ``corrector_failure`` or ``refused``.
    """

    eps: float
    sign: int
    points: list
    termination: str
    lambda_bif: float
    lambda_ref: float
    ds: float
    R: float
    lambda_star: float | None = None
    gap: float | None = None
    message: str = ""

    def __len__(self):
        return len(self.points)

    @property
    def lambdas(self):
        return np.array([p.lam for p in self.points])

    @property
    def norms(self):
        return np.array([p.normX for p in self.points])

    def coordinates(self, domain) -> np.ndarray:
        """Scaled product-space coordinates, shape ``(len, 1 + size)``."""
        if not self.points:
            return np.zeros((0, 1 + domain.size))
        root = np.sqrt(gram_x(domain).diag)
        return np.array([np.concatenate([[p.lam / self.lambda_ref], root * p.c]) for p in self.points])

    def ball_distance(self, p: BranchPoint) -> float:
        return float(np.hypot((p.lam - self.lambda_ref) / self.lambda_ref, p.normX))

    def truncated(self, R=None) -> "Branch":
        """Copy keeping only points inside the closed ball of radius ``R``."""
        R = self.R if R is None else R
        tol = 1e-12 * max(R, 1.0)
        pts = [p for p in self.points if self.ball_distance(p) <= R + tol]
        return Branch(self.eps, self.sign, pts, self.termination, self.lambda_bif,
                      self.lambda_ref, self.ds, R, self.lambda_star, self.gap, self.message)

    def negated(self) -> "Branch":
        pts = [BranchPoint(p.lam, -p.c, p.normX, -p.max_on_grid, -p.min_on_grid, p.step)
               for p in self.points]
        return Branch(self.eps, -self.sign, pts, self.termination, self.lambda_bif,
                      self.lambda_ref, self.ds, self.R, self.lambda_star, self.gap, self.message)


def _sign(sign):
    if sign in ("+", 1, +1.0):
        return 1
    if sign in ("-", -1, -1.0):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def make_point(sys: ResidualSystem, lam, c, step) -> BranchPoint:
    c = np.array(c, dtype=float)
    c.setflags(write=False)
    u = basis_matrix(sys.domain) @ c
    return BranchPoint(float(lam), c, gram_x(sys.domain).norm(c), float(u.min()), float(u.max()), int(step))


def bifurcation_tangent(sys: ResidualSystem, tol=1e-8):
    """Bifurcation value on the trivial line and the launch direction.

    Returns ``(lam_{0,eps}, u)`` with ``u`` the X-normalized positive principal
    eigenfunction of the perturbed linear problem; ``-u`` launches the
    negative branch.
    """
    g1 = constant(sys.domain, 1.0)
    rep = simplicity_check(sys.domain, g1, sys.eps, tol)
    if not rep.simple:
        raise DegenerateGapError(f"principal eigenvalue not simple (gap {rep.gap:.3g})")
    pair = perturbed_eigenpair(sys.domain, g1, sys.eps)
    return pair.lam, pair.u


class _Stepper:
    """Bordered Newton corrector in scaled coordinates."""

    def __init__(self, sys, lam_ref, tol, max_iter):
        self.sys = sys
        self.lam_ref = lam_ref
        self.tol = tol
        self.max_iter = max_iter
        self.step_tol = 1e-11
        self.root = np.sqrt(gram_x(sys.domain).diag)
        self.row = 1.0 / np.sqrt(sys.stiffness)

    def to_y(self, lam, c):
        return np.concatenate([[lam / self.lam_ref], self.root * c])

    def from_y(self, y):
        return y[0] * self.lam_ref, y[1:] / self.root

    def solve(self, y0, constraint):
        """Newton on ``[R(lam, c); constraint(y)] = 0`` starting at ``y0``.

        ``constraint(y)`` returns ``(value, gradient)`` in scaled coordinates.
        Near the trivial line the residual is tiny long before ``lam`` is
        resolved, so convergence also requires a small update.  Returns the
        converged ``y`` or ``None``.
        """
        y = y0.copy()
        for _ in range(self.max_iter):
            lam, c = self.from_y(y)
            r = self.sys.residual(lam, c)
            g, dg = constraint(y)
            A = np.empty((y.size, y.size))
            A[:-1, 0] = self.row * self.sys.dresidual_dlambda(lam, c) * self.lam_ref
            A[:-1, 1:] = self.row[:, None] * self.sys.jacobian(lam, c) / self.root[None, :]
            A[-1] = dg
            rhs = np.concatenate([self.row * r, [g]])
            try:
                dy = np.linalg.solve(A, -rhs)
            except np.linalg.LinAlgError:
                return None
            if not np.all(np.isfinite(dy)):
                return None
            y = y + dy
            if np.linalg.norm(dy) <= self.step_tol * (1.0 + np.linalg.norm(y)):
                lam, c = self.from_y(y)
                g, _ = constraint(y)
                if np.linalg.norm(self.sys.residual(lam, c)) <= self.tol and abs(g) <= self.tol:
                    return y
        return None


def trace_branch(sys: ResidualSystem, sign="+", ds=1e-2, R=1.0, max_steps=1000, tol=1e-10,
                 max_iter=12, max_halvings=6, check_plugin=True) -> Branch:
    """Trace the branch launched from ``(lam_{0,eps}, 0)`` in direction ``sign * u``.

    The first predictor follows the eigenfunction, later ones the secant.
    The corrector is Newton on the residual bordered by the arclength
    condition; a failed correction halves the step up to ``max_halvings``
    times.  When the trace leaves ``B_R(lam_ref, 0)`` the last point is
    placed on the sphere itself.
    """
    if not ds > 0 or not R > 0:
        raise ValueError("ds and R must be positive")
    s = _sign(sign)
    dom = sys.domain
    lam_ref = dom.dirichlet_lambda0
    lam_bif, u = bifurcation_tangent(sys)
    g1 = constant(dom, 1.0)
    gap = second_eigenvalue(dom, g1, sys.eps) - lam_bif
    start = make_point(sys, lam_bif, np.zeros(dom.size), 0)
    branch = Branch(sys.eps, s, [start], "max_steps", lam_bif, lam_ref, float(ds), float(R), gap=gap)
    if sys.kind.tag == "plugin" and check_plugin:
        ok, order = plugin_admissible(sys)
        if not ok:
            branch.termination = "refused"
            branch.message = f"observed decay order {order:.3g} <= 1"
            return branch
    if branch.ball_distance(start) > R:
        branch.termination = "exited_ball"
        branch.message = "bifurcation point lies outside the ball"
        return branch

    st = _Stepper(sys, lam_ref, tol, max_iter)
    y = st.to_y(lam_bif, start.c)
    tangent = np.concatenate([[0.0], s * st.root * u.coeffs])
    tangent /= np.linalg.norm(tangent)
    h = float(ds)
    centre = np.zeros_like(y)
    centre[0] = 1.0
    return_tol = RETURN_TOL_FACTOR * ds

    for step in range(1, max_steps + 1):
        y_new = None
        for _ in range(max_halvings + 1):
            pred = y + h * tangent
            t0, y0, hh = tangent, y, h

            def arclength(z, t0=t0, y0=y0, hh=hh):
                return float(t0 @ (z - y0) - hh), t0

            y_new = st.solve(pred, arclength)
            if y_new is not None and np.linalg.norm(y_new - y) <= 2 * ds:
                break
            y_new = None
            h /= 2
        if y_new is None:
            branch.termination = "corrector_failure"
            branch.message = f"corrector failed at step {step} after {max_halvings} halvings"
            return branch
        lam, c = st.from_y(y_new)
        if np.linalg.norm(y_new - centre) > R:
            y_new = _land_on_sphere(st, y, y_new, centre, R)
            if y_new is None:
                branch.termination = "corrector_failure"
                branch.message = "could not place the exit point on the sphere"
                return branch
            lam, c = st.from_y(y_new)
            branch.points.append(make_point(sys, lam, c, step))
            branch.termination = "exited_ball"
            return branch
        point = make_point(sys, lam, c, step)
        branch.points.append(point)
        if point.normX < return_tol and step > 2 and abs(lam - lam_bif) > gap / 2:
            branch.termination = "returned_to_trivial"
            branch.lambda_star = float(lam)
            return branch
        secant = y_new - y
        tangent = secant / np.linalg.norm(secant)
        y = y_new
        h = min(2 * h, float(ds))
    return branch


def _land_on_sphere(st, y_in, y_out, centre, R):
    """Point of the branch between ``y_in`` and ``y_out`` at distance ``R`` from ``centre``."""
    a = np.linalg.norm(y_in - centre)
    b = np.linalg.norm(y_out - centre)
    t = (R - a) / (b - a) if b != a else 1.0
    guess = y_in + t * (y_out - y_in)

    def sphere(z):
        d = z - centre
        return float(d @ d - R * R) / (2 * R), d / R

    return st.solve(guess, sphere)


def refine_at_amplitude(sys: ResidualSystem, branch: Branch, a: float, index=0,
                        tol=1e-12, max_iter=30) -> BranchPoint:
    """Branch point whose coefficient ``c[index]`` equals ``a``.

    The bracketing pair of traced points supplies the initial guess; the
    amplitude condition then replaces the arclength condition in the
    bordered corrector.
    """
    amps = np.array([p.c[index] for p in branch.points])
    hits = np.flatnonzero((amps[:-1] - a) * (amps[1:] - a) <= 0)
    if hits.size == 0:
        raise ValueError(f"amplitude {a} not reached on the branch")
    i = hits[0]
    p, q = branch.points[i], branch.points[i + 1]
    t = 0.0 if amps[i + 1] == amps[i] else (a - amps[i]) / (amps[i + 1] - amps[i])
    st = _Stepper(sys, branch.lambda_ref, tol, max_iter)
    guess = (1 - t) * st.to_y(p.lam, p.c) + t * st.to_y(q.lam, q.c)
    grad = np.zeros(sys.domain.size + 1)
    grad[1 + index] = st.root[index]

    def amplitude(z):
        return float(z[1 + index] - st.root[index] * a), grad

    y = st.solve(guess, amplitude)
    if y is None:
        raise NonConvergenceError(f"amplitude refinement at a={a} failed")
    lam, c = st.from_y(y)
    return make_point(sys, lam, c, -1)


def positivity_scan(branch: Branch):
    """First step whose point touches zero with the wrong sign, or ``None``.

    The launch point ``c = 0`` is skipped.  Positive branches need
    ``min_on_grid > 0``, negative ones ``max_on_grid < 0``.
    """
    for p in branch.points:
        if p.normX == 0:
            continue
        if (branch.sign > 0 and p.min_on_grid <= 0) or (branch.sign < 0 and p.max_on_grid >= 0):
            return p.step
    return None


def classify_alternative(branch: Branch, gap=None, return_tol=None):
    """``("returns_to", lam_star)`` when the branch comes back to the trivial line
    away from its bifurcation value, else ``("global_candidate", None)``."""
    gap = branch.gap if gap is None else gap
    if return_tol is None:
        return_tol = RETURN_TOL_FACTOR * branch.ds
    for p in branch.points[1:]:
        if p.normX < return_tol and gap is not None and abs(p.lam - branch.lambda_bif) > gap / 2:
            return "returns_to", p.lam
    return "global_candidate", None


def residual_audit(sys: ResidualSystem, branch: Branch) -> float:
    """Largest residual norm over the branch, recomputed independently."""
    return max((float(np.linalg.norm(sys.residual(p.lam, p.c))) for p in branch.points), default=0.0)


def launch_direction_check(sys: ResidualSystem, branch: Branch) -> float:
    """X inner product of the second point with the signed launch direction."""
    if len(branch.points) < 2:
        return float("nan")
    _, u = bifurcation_tangent(sys)
    return branch.sign * gram_x(sys.domain).inner(branch.points[1].c, u.coeffs)
