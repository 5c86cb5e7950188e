"""Weighted and singularly perturbed eigenproblems on the sine basis.

For a weight ``g`` and ``eps >= 0`` the perturbed problem is the pencil

    (eps * GramX + GramH1) c = lam * Mass(g) c .

The left-hand matrix is diagonal and positive, so every solve is done on the
inverted pencil ``Mass(g) c = mu (eps GramX + GramH1) c`` after a diagonal
(Cholesky) reduction; ``lam = 1 / mu`` for the positive ``mu``.  This keeps the
definite factor on the right and handles sign-changing weights unchanged.

Eigenfunctions are normalized in X and their sign is fixed by a positive
spatial mean.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import DomainSpec, Field, GridValues, quadrature_weights, spatial_mean_weights
from .errors import DegenerateGapError, InadmissibleWeightError, InconsistentInputError
from .gram import gram_h1, gram_x, mass

EXCEPTIONAL_RTOL = 1e-10
DEFAULT_DELTA_FRACTION = 0.25


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Eigenvalue ``lam``, X-normalized eigenfunction ``u`` and scaled residual."""

    lam: float
    u: Field
    residual: float
    eps: float = 0.0

    @property
    def coeffs(self):
        return self.u.coeffs


@dataclass(frozen=True, eq=False)
class PerturbedCurve:
    weight_id: str
    pairs: list

    @property
    def eps(self):
        return np.array([e for e, _ in self.pairs])

    @property
    def lambdas(self):
        return np.array([p.lam for _, p in self.pairs])

    @property
    def monotone(self) -> bool:
        """Eigenvalue nondecreasing in eps (nonincreasing as eps decreases)."""
        lam = self.lambdas
        return bool(np.all(np.diff(lam) >= -1e-12 * np.abs(lam[1:])))

    def continuity_steps(self):
        """X distances between consecutive eigenfunctions along the grid."""
        if len(self.pairs) < 2:
            return np.zeros(0)
        gx = gram_x(self.pairs[0][1].u.domain)
        return np.array([
            gx.norm(b.coeffs - a.coeffs) for (_, a), (_, b) in zip(self.pairs, self.pairs[1:])
        ])

    @property
    def principal(self) -> EigenPair:
        return self.pairs[0][1]


@dataclass(frozen=True, eq=False)
class AuxSpectrum:
    """Eigenpairs of ``GramX c = lam Mass(g) c`` in ascending order."""

    lambdas: np.ndarray
    fields: list = field(repr=False)
    kappa0: float
    bracket_index: int | None
    exceptional: bool
    exceptional_index: int | None = None


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Split of a perturbed eigenfunction against the unperturbed one.

    ``u_eps = alpha u_0 + eta`` with ``eta`` X-orthogonal to ``u_0``, then
    ``eta = beta u_0 + xi`` with ``xi`` H^1_0-orthogonal to ``u_0``.
    ``kappa_eps`` is the eigenvalue slope ``(lam_eps - lam_0) / eps`` and
    ``kappa0 = 1 / ||u_0||^2_{L^2_g}``.
    """

    eps: float
    alpha: float
    beta: float
    eta_normX: float
    xi_normX: float
    kappa_eps: float
    kappa0: float
    exceptional: bool
    kappa_from_split: float
    xi_l2g_inner: float
    eta: Field = field(repr=False, default=None)
    xi: Field = field(repr=False, default=None)


@dataclass(frozen=True)
class StabilityWindow:
    delta: float
    s_star: float
    lambda0: float
    lambda2: float
    l2g_norm_sq: float
    n_threshold_note: str = (
        "valid for weights whose principal pair is within delta of the reference pair"
    )


@dataclass(frozen=True)
class SimplicityReport:
    gap: float
    simple: bool
    obstruction: float


# ---------------------------------------------------------------------------
# pencil machinery

def _check_weight(domain, g, name):
    if g.domain != domain:
        raise ValueError("weight lives on a different domain")
    positive = float(quadrature_weights(domain) @ np.maximum(g.values, 0.0))
    if not positive > 0:
        raise InadmissibleWeightError(f"weight {name!r} has no positive part on the grid")


def _solve_pencil(stiff_diag, mass_entries, name="g"):
    """Positive eigenvalues ``lam`` (ascending) and vectors of ``diag(stiff) c = lam M c``."""
    s = 1.0 / np.sqrt(stiff_diag)
    mu, w = np.linalg.eigh(s[:, None] * mass_entries * s[None, :])
    keep = mu > 1e-14 * max(np.abs(mu).max(), 1e-300)
    if not keep.any():
        raise InadmissibleWeightError(f"no positive eigenvalue for weight {name!r}")
    mu, w = mu[keep][::-1], w[:, keep][:, ::-1]
    return 1.0 / mu, s[:, None] * w


def _normalize(domain, c):
    c = c / gram_x(domain).norm(c)
    mean = spatial_mean_weights(domain) @ c
    if abs(mean) > 1e-12 * np.abs(c).sum():
        sign = np.sign(mean)
    else:
        sign = np.sign(c[np.argmax(np.abs(c))])
    return sign * c


def _pencil_residual(stiff_diag, mass_entries, lam, c):
    r = stiff_diag * c - lam * (mass_entries @ c)
    return float(np.linalg.norm(r / np.sqrt(stiff_diag)) / np.linalg.norm(c * np.sqrt(stiff_diag)))


def _stiffness(domain, eps):
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    return eps * gram_x(domain).diag + gram_h1(domain).diag


def _pairs(domain, g, eps, count, name):
    _check_weight(domain, g, name)
    stiff = _stiffness(domain, eps)
    m = mass(domain, g).entries
    lams, vecs = _solve_pencil(stiff, m, name)
    out = []
    for lam, c in zip(lams[:count], vecs.T[:count]):
        c = _normalize(domain, c)
        out.append(EigenPair(float(lam), Field(domain, c), _pencil_residual(stiff, m, lam, c), float(eps)))
    return out, lams


# ---------------------------------------------------------------------------
# public operations

def perturbed_eigenpair(domain: DomainSpec, g: GridValues, eps: float, name="g") -> EigenPair:
    """Principal pair of ``eps <u, v>_X + <u, v>_{H^1_0} = lam <u, v>_{L^2_g}``."""
    return _pairs(domain, g, float(eps), 1, name)[0][0]


def principal_eigenpair(domain: DomainSpec, g: GridValues, name="g") -> EigenPair:
    """Principal eigenpair of ``-Laplace u = lam g u`` with Dirichlet conditions."""
    return perturbed_eigenpair(domain, g, 0.0, name)


def second_eigenvalue(domain: DomainSpec, g: GridValues, eps=0.0, name="g") -> float:
    lams = _pairs(domain, g, float(eps), 1, name)[1]
    if len(lams) < 2:
        raise InadmissibleWeightError(f"weight {name!r} has a single positive eigenvalue")
    return float(lams[1])


def perturbed_curve(domain: DomainSpec, g: GridValues, eps_grid, weight_id="g") -> PerturbedCurve:
    grid = np.sort(np.asarray(eps_grid, dtype=float))
    if grid.size == 0 or grid[0] != 0.0:
        raise ValueError("eps grid must include 0")
    if np.any(grid < 0):
        raise ValueError("eps grid must be nonnegative")
    pairs = [(float(e), perturbed_eigenpair(domain, g, e, weight_id)) for e in grid]
    return PerturbedCurve(weight_id, pairs)


def aux_spectrum(domain: DomainSpec, g: GridValues, count=None, rtol=EXCEPTIONAL_RTOL,
                 name="g") -> AuxSpectrum:
    """Spectrum of ``<u, v>_X = lam <u, v>_{L^2_g}`` and where the ratio kappa0 falls in it.

    ``kappa0 = ||u_0||_X^2 / ||u_0||_{L^2_g}^2`` for the principal function of
    the unperturbed problem.  The principal function is exceptional when kappa0
    coincides with one of these eigenvalues to relative ``rtol``.
    """
    _check_weight(domain, g, name)
    m = mass(domain, g)
    lams, vecs = _solve_pencil(gram_x(domain).diag, m.entries, name)
    u0 = principal_eigenpair(domain, g, name)
    kappa0 = 1.0 / m.inner(u0.coeffs, u0.coeffs)
    hits = np.flatnonzero(np.abs(kappa0 - lams) < rtol * lams)
    exceptional = hits.size > 0
    bracket = None
    if not exceptional:
        below = np.flatnonzero(lams < kappa0)
        if below.size and below[-1] + 1 < lams.size:
            bracket = int(below[-1] + 1)
    count = lams.size if count is None else int(count)
    if count > domain.size:
        raise ValueError(f"count={count} exceeds basis size {domain.size}")
    fields = [Field(domain, _normalize(domain, c)) for c in vecs.T[:count]]
    return AuxSpectrum(
        lambdas=lams[:count].copy(),
        fields=fields,
        kappa0=float(kappa0),
        bracket_index=bracket,
        exceptional=bool(exceptional),
        exceptional_index=int(hits[0] + 1) if exceptional else None,
    )


def decompose(pair: EigenPair, principal: EigenPair, domain: DomainSpec, g: GridValues,
              exceptional=None, lam_rtol=1e-10) -> Decomposition:
    """Split ``pair`` (at its eps) against the unperturbed ``principal``.

    ``exceptional`` defaults to the verdict of :func:`aux_spectrum`.
    """
    if principal.eps != 0.0:
        raise InconsistentInputError("principal pair must be the eps = 0 solution")
    gx, gh = gram_x(domain), gram_h1(domain)
    m = mass(domain, g)
    ce, c0 = pair.coeffs, principal.coeffs
    alpha = gx.inner(ce, c0)
    eta = ce - alpha * c0
    beta = gh.inner(eta, c0) / gh.inner(c0, c0)
    xi = eta - beta * c0
    kappa0 = 1.0 / m.inner(c0, c0)
    if pair.eps > 0:
        kappa = (pair.lam - principal.lam) / pair.eps
    else:
        if abs(pair.lam - principal.lam) > lam_rtol * abs(principal.lam):
            raise InconsistentInputError(
                f"eps = 0 pair has lam={pair.lam} but the principal value is {principal.lam}"
            )
        kappa = kappa0
    if exceptional is None:
        exceptional = aux_spectrum(domain, g, count=1).exceptional
    return Decomposition(
        eps=float(pair.eps),
        alpha=float(alpha),
        beta=float(beta),
        eta_normX=gx.norm(eta),
        xi_normX=gx.norm(xi),
        kappa_eps=float(kappa),
        kappa0=float(kappa0),
        exceptional=bool(exceptional),
        kappa_from_split=float(kappa0 * alpha / (alpha + beta)),
        xi_l2g_inner=m.inner(xi, c0),
        eta=Field(domain, eta),
        xi=Field(domain, xi),
    )


def decompose_curve(curve: PerturbedCurve, domain: DomainSpec, g: GridValues):
    exceptional = aux_spectrum(domain, g, count=1).exceptional
    principal = curve.principal
    return [decompose(p, principal, domain, g, exceptional) for _, p in curve.pairs]


def window_from_spectrum(lambda0, lambda2, l2g_norm_sq, delta=None,
                         delta_fraction=DEFAULT_DELTA_FRACTION, gap_tol=1e-9) -> StabilityWindow:
    gap = lambda2 - lambda0
    if gap <= gap_tol * max(abs(lambda0), 1.0):
        raise DegenerateGapError(
            f"second eigenvalue {lambda2} coincides with the principal one {lambda0}; "
            "the principal eigenvalue is not of multiplicity one"
        )
    if delta is None:
        delta = delta_fraction * gap
    if not 0 < 2 * delta < gap:
        raise ValueError(f"delta={delta} must satisfy 0 < 2 delta < gap={gap}")
    s_star = (gap - 2 * delta) / (1 + delta) * l2g_norm_sq
    return StabilityWindow(float(delta), float(s_star), float(lambda0), float(lambda2),
                           float(l2g_norm_sq))


def stability_window(domain: DomainSpec, g0: GridValues, delta=None,
                     delta_fraction=DEFAULT_DELTA_FRACTION) -> StabilityWindow:
    """Admissible perturbation range ``[0, s_star]`` for the reference weight ``g0``."""
    u0 = principal_eigenpair(domain, g0)
    lam2 = second_eigenvalue(domain, g0)
    l2g = mass(domain, g0).inner(u0.coeffs, u0.coeffs)
    return window_from_spectrum(u0.lam, lam2, l2g, delta, delta_fraction)


@dataclass
class BoundsReport:
    rows: list

    @property
    def passed(self) -> bool:
        return all(all(ok for ok, _ in row["checks"].values()) for row in self.rows)

    def failures(self):
        return [
            (row["eps"], name, slack)
            for row in self.rows
            for name, (ok, slack) in row["checks"].items()
            if not ok
        ]

    def flags(self, name):
        return [row["checks"][name][0] for row in self.rows if name in row["checks"]]

    def min_slack(self, name):
        vals = [row["checks"][name][1] for row in self.rows if name in row["checks"]]
        return min(vals) if vals else None


BOUND_NAMES = (
    "rayleigh_bracket",
    "normalization_split",
    "kappa_positive",
    "alpha_unit_interval",
    "beta_sign",
    "kappa_upper",
    "uniform_lambda_bound",
    "eta_bound",
    "kappa_consistency",
    "orthogonality_transfer",
)


def verify_bounds(curve: PerturbedCurve, decomps, window: StabilityWindow,
                  tol=1e-9, split_tol=1e-10, kappa_rtol=1e-8, strict_floor=1e-12) -> BoundsReport:
    """Check the eigenvalue and decomposition inequalities row by row.

    Every check yields ``(passed, slack)`` where a positive slack is the
    margin by which the inequality holds.  Strict inequalities whose slack is
    below ``strict_floor`` are reported as passing with ``marginal`` set.
    """
    if np.any(curve.eps > window.s_star * (1 + 1e-12)):
        raise ValueError(f"eps grid exceeds s_star={window.s_star}")
    lam0 = curve.principal.lam
    rows = []
    for (eps, pair), d in zip(curve.pairs, decomps):
        lam = pair.lam
        checks = {}
        upper = lam0 + eps * d.kappa0
        checks["rayleigh_bracket"] = _le_both(lam0, lam, upper, tol)
        split = abs(d.alpha ** 2 + d.eta_normX ** 2 - 1.0)
        checks["normalization_split"] = (split <= split_tol, split_tol - split)
        checks["kappa_positive"] = (d.kappa_eps > 0, d.kappa_eps)
        checks["alpha_unit_interval"] = (0 < d.alpha <= 1 + tol, min(d.alpha, 1 + tol - d.alpha))
        marginal = False
        if eps == 0 or d.exceptional:
            checks["beta_sign"] = (abs(d.beta) <= tol, tol - abs(d.beta))
            checks["eta_bound"] = (d.eta_normX <= tol, tol - d.eta_normX)
        else:
            marginal = d.beta < strict_floor
            checks["beta_sign"] = (d.beta > 0 or marginal and d.beta > -strict_floor, d.beta)
            slack = d.alpha * d.beta - d.eta_normX ** 2
            marginal = marginal or slack < strict_floor
            checks["eta_bound"] = (slack > 0 or abs(slack) < strict_floor, slack)
        checks["kappa_upper"] = (d.kappa_eps <= d.kappa0 * (1 + tol), d.kappa0 - d.kappa_eps)
        bound = window.lambda2 - window.delta
        checks["uniform_lambda_bound"] = (lam <= bound + tol, bound - lam)
        dev = abs(d.kappa_eps - d.kappa_from_split)
        checks["kappa_consistency"] = (dev <= kappa_rtol * d.kappa0, kappa_rtol * d.kappa0 - dev)
        checks["orthogonality_transfer"] = (abs(d.xi_l2g_inner) <= split_tol,
                                            split_tol - abs(d.xi_l2g_inner))
        rows.append({"eps": eps, "lam": lam, "checks": checks, "marginal": marginal,
                     "exceptional": d.exceptional})
    return BoundsReport(rows)


def _le_both(lo, x, hi, tol):
    slack = min(x - lo, hi - x)
    return slack >= -tol * max(1.0, abs(hi)), slack


def pencil_simplicity(stiff_diag, mass_entries, tol=1e-8) -> SimplicityReport:
    lams, vecs = _solve_pencil(np.asarray(stiff_diag, float), np.asarray(mass_entries, float))
    gap = float(lams[1] - lams[0]) if lams.size > 1 else float("inf")
    return SimplicityReport(gap, bool(gap > tol * max(1.0, abs(lams[0]))), float("nan"))


def simplicity_check(domain: DomainSpec, g: GridValues, eps: float, tol=1e-8) -> SimplicityReport:
    """Gap between the first two perturbed eigenvalues.

    ``obstruction`` is ``<u, u>_X`` for the normalized eigenfunction; it is
    nonzero, so the eigenfunction is not in the range of the shifted operator
    and the eigenvalue is algebraically simple whenever the gap is positive.
    """
    stiff = _stiffness(domain, eps)
    rep = pencil_simplicity(stiff, mass(domain, g).entries, tol)
    u = perturbed_eigenpair(domain, g, eps)
    return SimplicityReport(rep.gap, rep.simple, gram_x(domain).inner(u.coeffs, u.coeffs))


@dataclass(frozen=True, eq=False)
class CompactnessReport:
    eps_grid: np.ndarray
    deviations: np.ndarray  # (n_weights, n_eps)
    headline: np.ndarray

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.headline) < 0))


def pair_distance(a: EigenPair, b: EigenPair) -> float:
    """Product-metric distance in R x X."""
    gx = gram_x(a.u.domain)
    return float(np.hypot(a.lam - b.lam, gx.norm(a.coeffs - b.coeffs)))


def compactness_probe(domain: DomainSpec, weights, g0: GridValues, eps_grid,
                      window: StabilityWindow | None = None) -> CompactnessReport:
    """Distance of the perturbed curves of ``weights`` from the curve of ``g0``.

    Row ``n`` of ``deviations`` holds ``|(lam_n, u_n) - (lam_0, u_0)|`` at each
    eps; ``headline[n]`` is its maximum over the grid.
    """
    grid = np.asarray(eps_grid, dtype=float)
    if window is None:
        window = stability_window(domain, g0)
    if np.any(grid < 0) or np.any(grid > window.s_star * (1 + 1e-12)):
        raise ValueError(f"eps grid must lie in [0, {window.s_star}]")
    ref = [perturbed_eigenpair(domain, g0, e) for e in grid]
    dev = np.array([
        [pair_distance(perturbed_eigenpair(domain, g, e), r) for e, r in zip(grid, ref)]
        for g in weights
    ])
    return CompactnessReport(grid, dev, dev.max(axis=1) if dev.size else np.zeros(0))
