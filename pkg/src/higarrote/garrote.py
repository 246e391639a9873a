"""Shrinkage-factor QP construction, the GCV path over the budget M, and
the end-to-end fit.

The pipeline: center the response, estimate (lambda, rho) by profiled
likelihood, form the generalized-ridge initial estimate, then trace the
heredity-constrained nonnegative-garrote path and keep the GCV minimizer
(or solve the replicated criterion directly when a noise estimate exists).
Reported effect sizes are for columns scaled to unit population sd, which
coincides with the raw coded columns on balanced designs.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr as _qr

from .design import (
    MAIN_ONLY,
    MAIN_PLUS_2FI,
    DesignTable,
    ModelMatrix,
    build_model_matrix,
    center_response,
    heredity_constraints,
)
from .errors import (
    DegenerateResponseError,
    HiGarroteError,
    InvalidInputError,
    NonconvergenceError,
)
from .likelihood import FitOptions, backend_name, fit_hyperparams, initial_estimate
from .prior import Hyperparams
from .qp import QpProblem, solve as qp_solve

SELECTION_EPS = 1e-8


@dataclass
class GarroteSolution:
    """Shrinkage factors and garrote coefficients at one budget M."""

    M: float
    theta: np.ndarray
    beta_ng: np.ndarray
    df: float
    gcv: float
    selected: np.ndarray
    kkt_residual: float = 0.0
    ridge_bump: float = 0.0


@dataclass
class PathPoint:
    M: float
    gcv: float
    df: float
    n_selected: int
    kkt_residual: float = 0.0


@dataclass
class FitReport:
    """Everything one fit produces, ready for serialization."""

    solution: GarroteSolution
    path: list
    effects: list
    r_squared: float
    hyper: Hyperparams
    timings: dict
    dataset: str = None
    seed: int = 0
    heredity: str = "weak"
    scope: str = MAIN_PLUS_2FI
    grid: tuple = None
    backend: str = field(default_factory=backend_name)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "seed": self.seed,
            "hyper": {
                "lambda": self.hyper.lam,
                "rho": [float(r) for r in self.hyper.rho],
                "nu2": float(self.hyper.nu2),
                "nll": float(self.hyper.nll),
            },
            "path": [
                {"M": p.M, "gcv": p.gcv, "df": p.df, "k": p.n_selected}
                for p in self.path
            ],
            "effects": [{"label": lab, "beta": float(b)} for lab, b in self.effects],
            "r_squared": float(self.r_squared),
            "runtime_ms": self.timings.get("total_ms"),
            "heredity": self.heredity,
            "scope": self.scope,
            "grid": list(self.grid) if self.grid else None,
            "backend": self.backend,
        }

    def to_text(self) -> str:
        lines = []
        lines.append(f"dataset: {self.dataset or '-'}   seed: {self.seed}   backend: {self.backend}")
        lines.append(
            f"hyper: lambda={self.hyper.lam:.6g}  nll={self.hyper.nll:.6g}  nu2={self.hyper.nu2:.6g}"
        )
        lines.append(
            f"budget M={self.solution.M:.4g}  df={self.solution.df:.3f}  "
            f"gcv={self.solution.gcv:.6g}  selected={len(self.effects)}"
        )
        lines.append(f"least-squares refit R^2 = {self.r_squared:.4f}")
        if self.effects:
            width = max(len(lab) for lab, _ in self.effects)
            lines.append(f"{'effect'.ljust(width)}  coefficient")
            for lab, b in self.effects:
                lines.append(f"{lab.ljust(width)}  {b: .4f}")
        else:
            lines.append("no effects selected")
        ms = self.timings.get("total_ms")
        if ms is not None:
            lines.append(f"runtime: {ms:.0f} ms")
        return "\n".join(lines)


@dataclass
class HiGarroteOptions:
    """End-to-end fit options (defaults reproduce the reference analyses)."""

    heredity: str = "weak"
    scope: str = "auto"
    seed: int = 0
    grid_points: int = 50
    wide_interval: bool = False
    selection_eps: float = SELECTION_EPS
    n_starts: int = None
    quadratic_child_of_linear: bool = False
    qp_tol: float = 1e-8


def shrinkage_qp(mm: ModelMatrix, beta_init, yc, M: float, heredity_mode: str = "weak",
                 quadratic_child_of_linear: bool = False) -> QpProblem:
    """QP over theta: data term from Z = U diag(beta), budget row, heredity rows."""
    beta_init = np.asarray(beta_init, dtype=float)
    if M <= 0:
        raise InvalidInputError("budget M must be positive")
    if not np.any(beta_init):
        raise DegenerateResponseError("all initial estimates are zero; nothing to shrink")
    U = mm.matrix()
    Z = U * beta_init
    Q = Z.T @ Z
    c = Z.T @ np.asarray(yc, dtype=float)
    Ah, bh = heredity_constraints(mm, heredity_mode, quadratic_child_of_linear)
    A = np.vstack([np.ones((1, mm.P)), Ah])
    b = np.concatenate([[M], bh])
    return QpProblem(Q=Q, c=c, A=A, b=b)


def gcv_value(theta, mm: ModelMatrix, beta_init, yc, w) -> float:
    """Generalized cross-validation: RSS / (n (1 - df/n)^2), inf once df >= n."""
    theta = np.asarray(theta, dtype=float)
    n = mm.n
    df = float(theta @ w)
    if df >= n:
        return float("inf")
    resid = yc - mm.matrix() @ (theta * beta_init)
    rss = float(resid @ resid)
    return rss / (n * (1.0 - df / n) ** 2)


def _solution_from_theta(theta, mm, beta_init, yc, w, M, eps, kkt, bump):
    theta = np.asarray(theta, dtype=float)
    selected = np.flatnonzero(theta > eps)
    beta_ng = np.where(theta > eps, theta * beta_init, 0.0)
    return GarroteSolution(
        M=float(M),
        theta=theta,
        beta_ng=beta_ng,
        df=float(theta @ w),
        gcv=gcv_value(theta, mm, beta_init, yc, w),
        selected=selected,
        kkt_residual=kkt,
        ridge_bump=bump,
    )


def default_grid(n: int, points: int = 50, wide: bool = False) -> np.ndarray:
    """Budget grid [0.1, 0.3(n-1)] (or the wide variant [0.1, n-1])."""
    top = (n - 1.0) if wide else 0.3 * (n - 1.0)
    return np.linspace(0.1, max(top, 0.1 + 1e-6), points)


def solve_path(mm: ModelMatrix, beta_init, yc, w, heredity_mode: str = "weak",
               grid=None, selection_eps: float = SELECTION_EPS, tol: float = 1e-8,
               quadratic_child_of_linear: bool = False):
    """Warm-started QP solves over an ascending budget grid.

    Returns (path, best) where best is the GCV-minimizing GarroteSolution.
    On a QP failure the partial path is attached to the raised error.
    """
    if grid is None:
        grid = default_grid(mm.n)
    grid = np.sort(np.asarray(grid, dtype=float))
    base = shrinkage_qp(mm, beta_init, yc, float(grid[0]), heredity_mode,
                        quadratic_child_of_linear)
    path = []
    best = None
    warm = None
    for M in grid:
        b = base.b.copy()
        b[0] = M
        problem = QpProblem(Q=base.Q, c=base.c, A=base.A, b=b)
        try:
            qsol = qp_solve(problem, tol=tol, warm_theta=warm)
        except NonconvergenceError as exc:
            exc.partial_path = path
            raise
        warm = qsol.theta
        sol = _solution_from_theta(
            qsol.theta, mm, beta_init, yc, w, M, selection_eps,
            qsol.kkt_residual, qsol.ridge_bump,
        )
        path.append(PathPoint(M=float(M), gcv=sol.gcv, df=sol.df,
                              n_selected=len(sol.selected),
                              kkt_residual=qsol.kkt_residual))
        if best is None or sol.gcv < best.gcv:
            best = sol
    return path, best


def replicated_fit(mm: ModelMatrix, beta_init, ymeans, sigma2_hat: float, m: int,
                   w, heredity_mode: str = "weak",
                   selection_eps: float = SELECTION_EPS, tol: float = 1e-8,
                   quadratic_child_of_linear: bool = False) -> GarroteSolution:
    """Direct garrote for replicated designs: RSS/2 on the run means plus a
    sigma2 * df penalty, under heredity and nonnegativity only (no budget
    row). The replicate count m is part of the calling contract; the
    criterion itself weights the penalty by the pooled variance directly."""
    if sigma2_hat < 0:
        raise InvalidInputError("sigma2_hat must be nonnegative")
    beta_init = np.asarray(beta_init, dtype=float)
    if not np.any(beta_init):
        raise DegenerateResponseError("all initial estimates are zero; nothing to shrink")
    ymeans = np.asarray(ymeans, dtype=float)
    U = mm.matrix()
    Z = U * beta_init
    Q = Z.T @ Z
    c = Z.T @ ymeans - sigma2_hat * np.asarray(w, dtype=float)
    Ah, bh = heredity_constraints(mm, heredity_mode, quadratic_child_of_linear)
    qsol = qp_solve(QpProblem(Q=Q, c=c, A=Ah, b=bh), tol=tol)
    return _solution_from_theta(
        qsol.theta, mm, beta_init, ymeans, w, float(qsol.theta.sum()),
        selection_eps, qsol.kkt_residual, qsol.ridge_bump,
    )


def ls_refit(mm: ModelMatrix, selected, yc):
    """Ordinary least squares of the centered response on the selected
    columns; exactly collinear columns are dropped with a warning.

    Returns (coefficients aligned with `selected`, R^2).
    """
    selected = np.asarray(selected, dtype=int)
    yc = np.asarray(yc, dtype=float)
    tss = float(yc @ yc)
    if selected.size == 0 or tss == 0.0:
        return np.zeros(0), 0.0
    X = mm.matrix()[:, selected]
    Rfac, piv = _qr(X, mode="r", pivoting=True)
    diag = np.abs(np.diag(Rfac))
    rank = int(np.sum(diag > max(X.shape) * np.finfo(float).eps * (diag[0] if diag.size else 1.0)))
    keep = np.sort(piv[:rank])
    if rank < selected.size:
        dropped = [mm.columns[selected[i]].label for i in sorted(piv[rank:])]
        warnings.warn(f"dropping exactly collinear columns: {dropped}", stacklevel=2)
    coef_kept, *_ = np.linalg.lstsq(X[:, keep], yc, rcond=None)
    coef = np.zeros(selected.size)
    coef[keep] = coef_kept
    rss = float(np.sum((yc - X[:, keep] @ coef_kept) ** 2))
    return coef, max(0.0, 1.0 - rss / tss)


def _column_sds(U):
    # population sd; exactly 1 for balanced +/-1 columns
    return np.sqrt(np.maximum(U.var(axis=0), 0.0))


def resolve_scope(design: DesignTable, scope: str) -> str:
    """auto -> main_only when there are at least as many main-effect
    columns as runs (screening regime), else main_plus_2fi."""
    if scope in (MAIN_ONLY, MAIN_PLUS_2FI):
        return scope
    if scope != "auto":
        raise InvalidInputError(f"unknown scope {scope!r}")
    n_mains = sum(f.n_levels - 1 for f in design.factors)
    return MAIN_ONLY if n_mains >= design.n_runs else MAIN_PLUS_2FI


def _stage(stage_name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except HiGarroteError as exc:
        raise exc.with_stage(stage_name)


def higarrote(design: DesignTable, options: HiGarroteOptions = None,
              dataset: str = None) -> FitReport:
    """Run the full pipeline on a design and return the fit report.

    Deterministic for a fixed options.seed. Stage failures re-raise the
    library error tagged with the stage name.
    """
    opt = options or HiGarroteOptions()
    t_start = time.perf_counter()
    timings = {}

    t0 = time.perf_counter()
    cr = _stage("center_response", center_response, design)
    scope = resolve_scope(design, opt.scope)
    mm = _stage("model_matrix", build_model_matrix, design, scope)
    timings["setup_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    fit_opts = FitOptions(rng_seed=opt.seed, n_starts=opt.n_starts)
    hp = _stage("fit_hyperparams", fit_hyperparams, design, cr.y, fit_opts)
    timings["hyperfit_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    est = _stage("initial_estimate", initial_estimate, design, mm, cr.y, hp)
    timings["initial_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    grid_spec = None
    if design.replicate_count > 1 and cr.sigma2 is not None:
        sol = _stage(
            "replicated_fit", replicated_fit, mm, est.beta, cr.y, cr.sigma2,
            design.replicate_count, est.posterior_weight_diag, opt.heredity,
            opt.selection_eps, opt.qp_tol, opt.quadratic_child_of_linear,
        )
        path = []
    else:
        grid = default_grid(mm.n, opt.grid_points, opt.wide_interval)
        grid_spec = (float(grid[0]), float(grid[-1]), len(grid))
        path, sol = _stage(
            "solve_path", solve_path, mm, est.beta, cr.y,
            est.posterior_weight_diag, opt.heredity, grid, opt.selection_eps,
            opt.qp_tol, opt.quadratic_child_of_linear,
        )
    timings["garrote_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    _, r2 = _stage("ls_refit", ls_refit, mm, sol.selected, cr.y)
    sds = _column_sds(mm.matrix())
    effects = [
        (mm.columns[i].label, float(sol.beta_ng[i] * sds[i])) for i in sol.selected
    ]
    effects.sort(key=lambda t: (-abs(t[1]), t[0]))
    timings["refit_ms"] = (time.perf_counter() - t0) * 1e3
    timings["total_ms"] = (time.perf_counter() - t_start) * 1e3

    return FitReport(
        solution=sol,
        path=path,
        effects=effects,
        r_squared=r2,
        hyper=hp,
        timings=timings,
        dataset=dataset,
        seed=opt.seed,
        heredity=opt.heredity,
        scope=scope,
        grid=grid_spec,
    )
