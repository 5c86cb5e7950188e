"""Branch comparison across an eps-sequence and small-amplitude limit diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .basis import DomainSpec, GridValues, basis_matrix, constant, det_from_hessian, hessian_values
from .continuation import Branch, BranchPoint, trace_branch
from .eigen import aux_spectrum, pair_distance, perturbed_eigenpair, principal_eigenpair
from .gram import gram_x
from .nonlinear import NonlinearityKind, ResidualSystem

MASK_REL = 1e-8


def _points_to_segments(P, A):
    """Distance from every row of ``P`` to the polyline through the rows of ``A``."""
    if len(A) == 1:
        return np.linalg.norm(P - A[0], axis=1)
    a, b = A[:-1], A[1:]
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    best = np.full(len(P), np.inf)
    for i in range(len(a)):
        t = np.zeros(len(P)) if dd[i] == 0 else np.clip((P - a[i]) @ d[i] / dd[i], 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(P - a[i] - t[:, None] * d[i], axis=1))
    return best


def hausdorff(A, B, mode="vertex") -> float:
    """Symmetric Hausdorff distance between two point sequences.

    ``vertex`` compares the sampled points only; ``polyline`` measures each
    vertex against the segments of the other sequence.
    """
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    if len(A) == 0 or len(B) == 0:
        return math.inf
    if mode == "vertex":
        D = cdist(A, B)
        return float(max(D.min(axis=1).max(), D.min(axis=0).max()))
    if mode == "polyline":
        return float(max(_points_to_segments(A, B).max(), _points_to_segments(B, A).max()))
    raise ValueError(f"unknown distance mode {mode!r}")


def branch_distance(a: Branch, b: Branch, domain: DomainSpec, R=None, mode="vertex") -> float:
    """Hausdorff distance of two branches truncated to ``B_R(lam_ref, 0)``.

    Points are compared in ``(lam / lam_ref, c)`` with ``c`` measured in X.
    An empty truncation gives ``inf``.
    """
    if R is not None:
        a, b = a.truncated(R), b.truncated(R)
    return hausdorff(a.coordinates(domain), b.coordinates(domain), mode)


@dataclass(eq=False)
class SweepReport:
    eps_list: list
    branches: dict = field(repr=False)
    failures: dict
    distances: np.ndarray
    to_limit: list
    consecutive: list
    liminf_witness: list
    limit_branch: Branch | None = field(repr=False)
    floor: float | None = None
    mode: str = "vertex"
    R: float = 1.0

    @property
    def strictly_decreasing(self) -> bool:
        d = self.to_limit
        return all(x > y for x, y in zip(d, d[1:]))

    @property
    def witness_ok(self) -> bool:
        return all(w["ok"] for w in self.liminf_witness)


def epsilon_sweep(domain: DomainSpec, eps_list, kind: NonlinearityKind | str = "multiplicative",
                  sign="+", ds=5e-3, R=0.5, max_steps=10000, tol=1e-10, mode="vertex",
                  measure_floor=True) -> SweepReport:
    """Trace ``C_eps`` for every ``eps`` in ``eps_list`` and compare inside the ball.

    The eps = 0 branch is always traced as the reference limit; it is
    appended when ``eps_list`` does not already end with 0.  With
    ``measure_floor`` the same reference is traced again at ``ds / 2`` and
    their distance is reported as the discretization floor.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e < 0 for e in eps_list):
        raise ValueError("eps values must be nonnegative")
    positive = [e for e in eps_list if e > 0]
    if any(x <= y for x, y in zip(positive, positive[1:])):
        raise ValueError("positive eps values must be strictly decreasing")
    full = positive + [0.0]
    branches, failures = {}, {}
    for e in full:
        try:
            br = trace_branch(ResidualSystem(domain, kind, e), sign, ds, R, max_steps, tol)
        except Exception as exc:  # carried in the report, not fatal
            failures[e] = f"{type(exc).__name__}: {exc}"
            continue
        branches[e] = br
        if br.termination in ("corrector_failure", "refused"):
            failures[e] = br.termination + (f": {br.message}" if br.message else "")

    n = len(full)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            bi, bj = branches.get(full[i]), branches.get(full[j])
            d = math.inf if bi is None or bj is None else branch_distance(bi, bj, domain, R, mode)
            D[i, j] = D[j, i] = d
    limit = branches.get(0.0)
    to_limit = [float(D[i, n - 1]) for i in range(n - 1)]
    consecutive = [float(D[i, i + 1]) for i in range(n - 1)]

    g1 = constant(domain, 1.0)
    lam0 = principal_eigenpair(domain, g1).lam
    aux = aux_spectrum(domain, g1, count=1)
    witness = []
    for e in full:
        lam = perturbed_eigenpair(domain, g1, e).lam
        dev = lam - lam0 - e * aux.kappa0
        if aux.exceptional:
            ok = abs(dev) <= 1e-9 * max(1.0, abs(lam))
        else:
            ok = -1e-12 <= lam - lam0 <= e * aux.kappa0 * (1 + 1e-9)
        witness.append({"eps": e, "lambda": lam, "deviation": dev, "ok": bool(ok)})

    floor = None
    if measure_floor and limit is not None:
        fine = trace_branch(ResidualSystem(domain, kind, 0.0), sign, ds / 2, R, 2 * max_steps, tol)
        floor = branch_distance(limit, fine, domain, R, mode)
    return SweepReport(full, branches, failures, D, to_limit, consecutive, witness, limit,
                       floor, mode, float(R))


def induced_weight(point: BranchPoint, domain: DomainSpec) -> GridValues:
    """``1 + |det D^2 u|^2`` on the grid."""
    det = det_from_hessian(hessian_values(domain, point.c))
    return GridValues(domain, 1.0 + det ** 2)


def weight_limit_diagnostic(points, domain: DomainSpec) -> dict:
    """Principal pair of each induced weight against the unweighted pair.

    ``points`` are sorted by decreasing ``normX``; the report flags whether
    the distances in R x X decrease strictly along that order.
    """
    pts = sorted(points, key=lambda p: -p.normX)
    ref = principal_eigenpair(domain, constant(domain, 1.0))
    rows = []
    for p in pts:
        pair = principal_eigenpair(domain, induced_weight(p, domain))
        rows.append({"normX": p.normX, "lambda": p.lam, "weight_lambda": pair.lam,
                     "distance": pair_distance(pair, ref)})
    d = [r["distance"] for r in rows]
    return {"rows": rows, "decreasing": all(x > y for x, y in zip(d, d[1:]))}


def vanishing_ratio_diagnostic(points, sys: ResidualSystem, mask_rel=MASK_REL) -> dict:
    """Sup-norm ratios ``|det D^2 u|^2 / |Lap u|`` and ``|lam u / (-Lap u) - 1|``.

    Grid nodes with ``|Lap u| <= mask_rel * |u|_X`` are masked and counted; a
    fully masked point is indeterminate.
    """
    dom = sys.domain
    lap_op = sum(basis_matrix(dom, tuple(2 * int(i == a) for i in range(dom.dim)))
                 for a in range(dom.dim))
    phi = basis_matrix(dom)
    gx = gram_x(dom)
    rows = []
    for p in sorted(points, key=lambda q: -q.normX):
        c = np.asarray(p.c)
        lap = lap_op @ c
        keep = np.abs(lap) > mask_rel * gx.norm(c)
        row = {"normX": p.normX, "amplitude": float(c[0]), "lambda": p.lam,
               "masked": int((~keep).sum())}
        if not keep.any():
            row.update(sup_det_ratio=math.nan, sup_eig_ratio=math.nan, indeterminate=True)
        else:
            det = det_from_hessian(hessian_values(dom, c))[keep]
            u = (phi @ c)[keep]
            row.update(
                sup_det_ratio=float(np.max(det ** 2 / np.abs(lap[keep]))),
                sup_eig_ratio=float(np.max(np.abs(p.lam * u / (-lap[keep]) - 1.0))),
                indeterminate=False,
            )
        rows.append(row)
    good = [r for r in rows if not r["indeterminate"]]
    a = [r["sup_det_ratio"] for r in good]
    b = [r["sup_eig_ratio"] for r in good]
    return {
        "rows": rows,
        "det_ratio_reduction": a[0] / a[-1] if len(a) > 1 and a[-1] > 0 else math.nan,
        "det_ratio_decreasing": all(x > y for x, y in zip(a, a[1:])),
        "eig_ratio_decreasing": all(x > y for x, y in zip(b, b[1:])),
    }
