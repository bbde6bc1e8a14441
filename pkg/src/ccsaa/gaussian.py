"""Gaussian machinery: normal quantiles, PSD factorization, scenario
sampling, and the exact conic baseline solved by supporting hyperplanes.

With normally distributed returns the chance constraint
``Prob[r.x >= alpha] >= 1 - eps`` is equivalent, on the budget simplex, to
the conic inequality

    z_eps * ||L^T x||  <=  mean . x - alpha,        z_eps = F^-1(1 - eps),

where L is a Cholesky factor of the covariance.  The printed squared form of
this constraint admits a spurious branch with ``mean . x < alpha``, so the
un-squared conic form plus the explicit side condition
``mean . x - alpha * sum(x) >= 0`` is what gets solved here.  A Kelley
cutting-plane loop around the LP core handles it: at a master optimum x^ the
violated conic constraint is cut with the supporting hyperplane

    z_eps * (Cov x^ . x) / ||L^T x^||  <=  mean . x - alpha.

With a semi-continuous band the master becomes the indicator MIP and every
node honours the accumulated cuts.
"""

import time

import numpy as np

from . import lp
from ._normal import inv_norm_cdf, norm_cdf  # noqa: F401  (re-exported surface)
from .errors import ConfigError, NotPositiveSemidefinite, NumericalFailure
from .mip import MipModel, SemiContinuousSpec, apply_semicontinuous, mip_solve
from .reports import SolveReport, WorkingSet
from .saa import ScenarioSet

_CUT_TOL = 1e-8
_MAX_CUTS = 1000


def cholesky(cov, tol: float = 1e-12) -> np.ndarray:
    """Lower-triangular L with L L^T = cov, tolerant of semidefinite input.

    Zero-variance coordinates (a cash column) produce zero pivots and zero
    factor columns.  Raises NotPositiveSemidefinite with the failing pivot
    index when the matrix is indefinite beyond tolerance.
    """
    A = np.asarray(cov, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("covariance must be square")
    scale = max(1.0, float(np.abs(A).max()))
    if float(np.abs(A - A.T).max()) > 1e-12 * scale:
        raise ValueError("covariance must be symmetric")
    n = A.shape[0]
    L = np.zeros((n, n))
    piv_tol = tol * scale
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if d > piv_tol:
            L[j, j] = np.sqrt(d)
            if j + 1 < n:
                L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
        else:
            if d < -piv_tol:
                raise NotPositiveSemidefinite(j)
            # semidefinite pivot: the rest of the column must vanish too
            if j + 1 < n:
                resid = A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]
                if float(np.abs(resid).max(initial=0.0)) > np.sqrt(piv_tol) * scale:
                    raise NotPositiveSemidefinite(j)
    err = float(np.abs(L @ L.T - A).max())
    if err > 1e-10 * scale:
        raise NotPositiveSemidefinite(n - 1, f"reconstruction error {err:.2e}")
    return L


class GaussianModel:
    """Mean vector and covariance with a cached Cholesky factor.

    Immutable after construction; safe to share across concurrent solves.
    """

    def __init__(self, mean, covariance):
        mean = np.asarray(mean, dtype=float).copy()
        cov = np.asarray(covariance, dtype=float).copy()
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("mean must be length n and covariance n x n")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("model parameters must be finite")
        self.mean = mean
        self.covariance = cov
        self.chol = cholesky(cov)
        for a in (self.mean, self.covariance, self.chol):
            a.setflags(write=False)

    @property
    def n_assets(self) -> int:
        return self.mean.size

    def portfolio_std(self, x) -> float:
        return float(np.linalg.norm(self.chol.T @ x))

    def violation_probability(self, x, alpha: float) -> float:
        """Exact P[r.x < alpha] for this model at allocation x."""
        sigma = self.portfolio_std(x)
        gap = float(self.mean @ x) - alpha
        if sigma == 0.0:
            return 0.0 if gap >= 0 else 1.0
        return norm_cdf(-gap / sigma)


def sample_scenarios(model: GaussianModel, count: int, seed) -> ScenarioSet:
    """Draw ``count`` return vectors; identical seeds give identical sets."""
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, model.n_assets))
    rows = model.mean + z @ model.chol.T
    return ScenarioSet(rows, provenance=f"sampled(seed={seed})")


def solve_gaussian_exact(model: GaussianModel, alpha: float, eps: float,
                         semi: SemiContinuousSpec | None = None,
                         cash_index: int | None = None,
                         gap_tolerance: float = 1e-4) -> SolveReport:
    """Maximize mean return on the simplex at exact risk level ``eps``.

    ``semi`` switches the master to the indicator MIP; ``cash_index`` names
    the column left out of the band (required with ``semi``).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0,1)")
    t0 = time.perf_counter()
    n = model.n_assets
    z = inv_norm_cdf(1.0 - eps)
    master = lp.LpModel(model.mean)
    master.add_row(np.ones(n), "=", 1.0, label="budget")
    master.add_row(model.mean - alpha, ">=", 0.0, label="floor")
    mip_master = None
    if semi is not None:
        if cash_index is None:
            raise ConfigError("semi-continuous master needs the cash column index")
        mip_master = MipModel(base=master, binaries=[], gap_tolerance=gap_tolerance)
        apply_semicontinuous(mip_master, semi,
                             [j for j in range(n) if j != cash_index])

    lp_solves = 0
    mip_nodes = 0
    cuts = 0
    x = None
    for _ in range(_MAX_CUTS):
        if mip_master is not None:
            res = mip_solve(mip_master, warm=x)
            lp_solves += res.lp_solves
            mip_nodes += res.node_count
            status, x, obj = res.status, res.x, res.objective_value
        else:
            sol = lp.lp_solve(master)
            lp_solves += 1
            status, x, obj = sol.status, sol.x, sol.objective_value
        if status != lp.OPTIMAL:
            return SolveReport(method="socp" if semi is None else "socp-ip",
                               x=np.full(n, np.nan), objective=float("nan"),
                               working_set=WorkingSet([], {}), lp_solves=lp_solves,
                               mip_nodes=mip_nodes,
                               wall_time=time.perf_counter() - t0,
                               train_violations=0, status=status)
        x = x[:n]
        if z <= 0.0:
            break                     # quantile at or below zero: cone is vacuous
        sigma = model.portfolio_std(x)
        violation = z * sigma - (float(model.mean @ x) - alpha)
        if violation <= _CUT_TOL:
            break
        if sigma > 0.0:
            g = model.covariance @ x / sigma
        else:
            norms = np.linalg.norm(model.chol, axis=0)
            g = model.chol[:, int(np.argmax(norms))]
        coeffs = np.zeros(master.n_cols)
        coeffs[:n] = model.mean - z * g
        master.add_row(coeffs, ">=", alpha, label=f"cut{cuts}")
        cuts += 1
    else:
        raise NumericalFailure("cutting-plane loop did not converge")

    return SolveReport(method="socp" if semi is None else "socp-ip",
                       x=x.copy(), objective=float(model.mean @ x),
                       working_set=WorkingSet([], {}), lp_solves=lp_solves,
                       mip_nodes=mip_nodes, wall_time=time.perf_counter() - t0,
                       train_violations=0)
