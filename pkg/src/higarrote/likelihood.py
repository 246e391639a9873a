"""Hyperparameter estimation and the generalized-ridge initial estimate.

The profiled negative log-likelihood is

    L(lambda, rho) = log nu2_hat + (1/n) log det(Psi_n + delta I),
    nu2_hat = y' (Psi_n + delta I)^{-1} y / n,   delta = lambda/(1-lambda)

(delta divided by the replicate count for replicated designs). Its exact
gradient drives a multi-start bounded quasi-Newton search. The inner
value+gradient evaluation is the hot loop; a compiled kernel is used when
available and a NumPy implementation otherwise.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.stats import qmc

from .design import DesignTable, ModelMatrix
from .errors import InvalidInputError, NumericalFailureError
from .prior import (
    LAMBDA_MAX,
    LAMBDA_MIN,
    RHO_MAX,
    RHO_MIN,
    Hyperparams,
    correlation_exponents,
    prior_diag,
)

_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def _nll_kernel_numpy(E, rho, delta, y):
    """Pure-NumPy twin of the compiled kernel."""
    n = y.shape[0]
    if E.shape[0]:
        psi = np.exp(np.einsum("tij,t->ij", E, np.log(rho)))
        np.fill_diagonal(psi, 1.0)
    else:
        psi = np.eye(n)
    eye = np.eye(n)
    cf = None
    for jit in _JITTERS:
        try:
            cf = cho_factor(psi + (delta + jit) * eye, lower=True)
            break
        except np.linalg.LinAlgError:
            continue
    if cf is None:
        raise NumericalFailureError(
            "Cholesky of the run correlation failed", jitter=_JITTERS[-1]
        )
    alpha = cho_solve(cf, y)
    nu2 = float(y @ alpha) / n
    if not nu2 > 0.0:
        raise NumericalFailureError("profiled variance is not positive", jitter=jit)
    logdet = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
    value = float(np.log(nu2)) + logdet / n
    kinv = cho_solve(cf, eye)
    B = kinv / n - np.outer(alpha, alpha) / (n * nu2)
    grad_delta = float(np.trace(B))
    grad_rho = np.einsum("ij,tij->t", B * psi, E) / rho if E.shape[0] else np.zeros(0)
    return value, grad_delta, grad_rho, nu2, jit


def _pick_backend():
    if os.environ.get("HIGARROTE_PURE_PYTHON", "") not in ("", "0"):
        return _nll_kernel_numpy, "python"
    try:
        from ._gpkern import nll_kernel
        return nll_kernel, "compiled"
    except ImportError:
        return _nll_kernel_numpy, "python"


_kernel, BACKEND = _pick_backend()


def backend_name() -> str:
    """Which likelihood kernel is active: "compiled" or "python"."""
    return BACKEND


@dataclass
class FitOptions:
    """Knobs for the multi-start hyperparameter search."""

    n_starts: int = None  # default k+1, one per rho parameter plus lambda
    rho_bounds: tuple = (RHO_MIN, RHO_MAX)
    lambda_bounds: tuple = (LAMBDA_MIN, LAMBDA_MAX)
    local_tol: float = 1e-8
    max_local_iters: int = 500
    rng_seed: int = 0

    def __post_init__(self):
        if self.rho_bounds[0] >= self.rho_bounds[1]:
            raise InvalidInputError("rho_bounds must be ordered")
        if self.lambda_bounds[0] >= self.lambda_bounds[1]:
            raise InvalidInputError("lambda_bounds must be ordered")
        if self.n_starts is not None and self.n_starts < 1:
            raise InvalidInputError("n_starts must be >= 1")


@dataclass
class InitialEstimate:
    """Generalized-ridge estimate and the posterior weights reused for df."""

    beta: np.ndarray
    hp: Hyperparams
    posterior_weight_diag: np.ndarray


class ProfiledLikelihood:
    """Profiled negative log-likelihood of a centered response on a design.

    Precomputes the correlation exponent tensor once; evaluations at
    different hyperparameter values are independent and read-only.
    """

    def __init__(self, design: DesignTable, yc: np.ndarray):
        yc = np.asarray(yc, dtype=float)
        if design.n_runs < 2:
            raise InvalidInputError("need at least 2 runs")
        if yc.shape != (design.n_runs,):
            raise InvalidInputError("centered response length must match runs")
        self.exponents = correlation_exponents(design)
        self.y = np.ascontiguousarray(yc)
        self.n = design.n_runs
        self.k = self.exponents.shape[0]
        self.m = design.replicate_count

    def _delta(self, lam):
        return lam / (1.0 - lam) / self.m

    def _check(self, rho):
        rho = np.ascontiguousarray(rho, dtype=float)
        if rho.shape != (self.k,):
            raise InvalidInputError(f"expected {self.k} rho parameters, got {rho.shape}")
        return rho

    def value(self, lam, rho):
        """(nll value, profiled nu2)."""
        value, _, _, nu2, _ = _kernel(self.exponents, self._check(rho), self._delta(lam), self.y)
        return value, nu2

    def value_and_grad(self, lam, rho):
        """(nll value, gradient over (lambda, rho), profiled nu2)."""
        value, g_delta, g_rho, nu2, _ = _kernel(
            self.exponents, self._check(rho), self._delta(lam), self.y
        )
        g_lam = g_delta / ((1.0 - lam) ** 2 * self.m)
        return value, np.concatenate(([g_lam], g_rho)), nu2


def nll(lam, rho, design: DesignTable, yc) -> tuple:
    """Profiled negative log-likelihood value and nu2 at (lambda, rho)."""
    return ProfiledLikelihood(design, yc).value(lam, rho)


def nll_grad(lam, rho, design: DesignTable, yc) -> np.ndarray:
    """Analytic gradient of the profiled nll over (lambda, rho...)."""
    return ProfiledLikelihood(design, yc).value_and_grad(lam, rho)[1]


def _maximin_lhs(n_points, dim, rng, candidates=32):
    """Best-of-`candidates` Latin hypercube by minimum pairwise distance."""
    best, best_score = None, -np.inf
    for _ in range(candidates):
        sampler = qmc.LatinHypercube(d=dim, seed=rng)
        pts = sampler.random(n_points)
        if n_points < 2:
            return pts
        dists = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        score = dists[np.triu_indices(n_points, 1)].min()
        if score > best_score:
            best, best_score = pts, score
    return best


def fit_hyperparams(design: DesignTable, yc, opts: FitOptions = None) -> Hyperparams:
    """Multi-start bounded minimization of the profiled nll.

    Starts are the box center plus a seeded maximin Latin hypercube; each
    start runs L-BFGS-B with the analytic gradient, and the lowest local
    optimum wins (earliest start index on ties). Deterministic for a fixed
    rng_seed.
    """
    opts = opts or FitOptions()
    like = ProfiledLikelihood(design, yc)
    k = like.k
    if k == 0:
        raise InvalidInputError("design has no factors")
    n_starts = opts.n_starts if opts.n_starts is not None else k + 1
    lo = np.array([opts.lambda_bounds[0]] + [opts.rho_bounds[0]] * k)
    hi = np.array([opts.lambda_bounds[1]] + [opts.rho_bounds[1]] * k)
    starts = [0.5 * (lo + hi)]
    if n_starts > 1:
        rng = np.random.default_rng(opts.rng_seed)
        unit = _maximin_lhs(n_starts - 1, k + 1, rng)
        starts.extend(lo + unit * (hi - lo))

    def objective(x):
        value, grad, _ = like.value_and_grad(x[0], x[1:])
        return value, grad

    bounds = list(zip(lo, hi))
    best_x, best_f = None, np.inf
    for x0 in starts:
        try:
            res = minimize(
                objective,
                x0,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={
                    "maxiter": opts.max_local_iters,
                    "gtol": opts.local_tol,
                    "ftol": 1e-14,
                },
            )
        except NumericalFailureError:
            continue
        if np.isfinite(res.fun) and res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)
    if best_x is None:
        raise NumericalFailureError("all local optimizations failed")
    _, nu2 = like.value(best_x[0], best_x[1:])
    return Hyperparams(rho=best_x[1:], lam=float(best_x[0]), nu2=nu2, nll=best_f)


def _cho_factor_jittered(K):
    eye = np.eye(K.shape[0])
    for jit in _JITTERS:
        try:
            return cho_factor(K + jit * eye if jit else K, lower=True)
        except np.linalg.LinAlgError:
            continue
    raise NumericalFailureError("posterior solve failed", jitter=_JITTERS[-1])


def initial_estimate(design: DesignTable, mm: ModelMatrix, yc,
                     hp: Hyperparams) -> InitialEstimate:
    """Posterior-mean coefficients under the induced prior, plus df weights.

    With D the prior diagonal (tau^2/nu^2 folded in) and delta the noise
    ridge: beta = D U' (U D U' + delta I)^{-1} y and w_i the i-th diagonal
    of D U' (U D U' + delta I)^{-1} U.
    """
    yc = np.asarray(yc, dtype=float)
    d = prior_diag(design, mm, hp).d
    U = mm.matrix()
    delta = hp.delta / design.replicate_count
    K = (U * d) @ U.T + delta * np.eye(mm.n)
    cf = _cho_factor_jittered(K)
    beta = d * (U.T @ cho_solve(cf, yc))
    w = d * np.einsum("ri,ri->i", U, cho_solve(cf, U))
    return InitialEstimate(beta=beta, hp=hp, posterior_weight_diag=w)
