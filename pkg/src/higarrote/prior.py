"""Product-Gaussian correlation structure and the induced prior diagonal.

A quantitative factor contributes one correlation parameter rho acting on
squared rank distances; a qualitative factor contributes one rho per dummy
column acting on 0/1 mismatch of that dummy's coded values. The prior
variance of each effect column (relative to the process variance) is the
product over factors of the per-factor diagonal of U^{-1} Psi U^{-T}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import QUANTITATIVE, DesignTable, FactorSpec, ModelMatrix, coding_matrix
from .errors import InvalidCodingError, InvalidInputError

RHO_MIN = 1e-15
RHO_MAX = 0.999
LAMBDA_MIN = 0.01
LAMBDA_MAX = 0.99

_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class Hyperparams:
    """Correlation parameters, noise ratio, and the profiled variance.

    rho is flat: one entry per quantitative factor, one per dummy column of
    each qualitative factor, in factor order. lam is sigma^2/(sigma^2+nu^2).
    """

    rho: np.ndarray
    lam: float
    nu2: float = float("nan")
    nll: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float))
        if self.rho.ndim != 1:
            raise InvalidInputError("rho must be a flat vector")
        if np.any(self.rho < RHO_MIN - _BOUND_SLACK) or np.any(self.rho > RHO_MAX + _BOUND_SLACK):
            raise InvalidInputError(f"rho out of [{RHO_MIN}, {RHO_MAX}]")
        if not (LAMBDA_MIN - _BOUND_SLACK <= self.lam <= LAMBDA_MAX + _BOUND_SLACK):
            raise InvalidInputError(f"lambda out of [{LAMBDA_MIN}, {LAMBDA_MAX}]")
        if not np.isnan(self.nu2) and self.nu2 < 0:
            raise InvalidInputError("nu2 must be >= 0")

    @property
    def delta(self):
        """Noise-to-signal ridge lambda/(1-lambda)."""
        return self.lam / (1.0 - self.lam)


def rho_dimension(factors) -> int:
    return sum(f.n_params for f in factors)


def rho_slices(factors):
    """Per-factor (start, stop) into the flat rho vector."""
    out = []
    pos = 0
    for f in factors:
        out.append((pos, pos + f.n_params))
        pos += f.n_params
    return out


def factor_correlation(factor: FactorSpec, rho_slice) -> np.ndarray:
    """m x m level correlation matrix Psi for one factor."""
    rho_slice = np.asarray(rho_slice, dtype=float)
    if rho_slice.shape != (factor.n_params,):
        raise InvalidInputError(
            f"factor {factor.name!r}: expected {factor.n_params} correlation "
            f"parameters, got {rho_slice.shape}"
        )
    m = factor.n_levels
    if factor.kind == QUANTITATIVE:
        ranks = np.arange(m)
        d2 = (ranks[:, None] - ranks[None, :]) ** 2
        return rho_slice[0] ** d2
    U = coding_matrix(factor)
    psi = np.ones((m, m))
    for d in range(1, m):
        mismatch = (np.abs(U[:, d][:, None] - U[:, d][None, :]) > 1e-12).astype(float)
        psi *= rho_slice[d - 1] ** mismatch
    return psi


def correlation_exponents(design: DesignTable) -> np.ndarray:
    """Exponent tensor E with Psi_n = prod_t rho_t ** E[t] elementwise.

    Shape (k, n, n) where k = rho_dimension(design.factors). This is the
    one structure both the correlation matrix and its rho-gradient need.
    """
    n = design.n_runs
    mats = []
    for j, f in enumerate(design.factors):
        lev = design.runs[:, j]
        if f.kind == QUANTITATIVE:
            mats.append(((lev[:, None] - lev[None, :]) ** 2).astype(float))
        else:
            U = coding_matrix(f)
            for d in range(1, f.n_levels):
                vals = U[lev, d]
                mats.append(
                    (np.abs(vals[:, None] - vals[None, :]) > 1e-12).astype(float)
                )
    if not mats:
        return np.zeros((0, n, n))
    return np.ascontiguousarray(np.stack(mats))


def run_correlation(design: DesignTable, hp: Hyperparams) -> np.ndarray:
    """n x n correlation matrix of the runs under the product structure."""
    E = correlation_exponents(design)
    if E.shape[0] != hp.rho.shape[0]:
        raise InvalidInputError(
            f"rho has {hp.rho.shape[0]} entries; design needs {E.shape[0]}"
        )
    S = np.einsum("tij,t->ij", E, np.log(hp.rho))
    psi = np.exp(S)
    np.fill_diagonal(psi, 1.0)
    return psi


@dataclass(frozen=True)
class PriorDiagonal:
    """Per-column prior variance over nu^2, plus the intercept's entry."""

    d: np.ndarray
    tau2_over_nu2: float


def _factor_variance_diag(factor: FactorSpec, rho_slice) -> np.ndarray:
    """diag(U^{-1} Psi U^{-T}) for one factor."""
    U = coding_matrix(factor)
    psi = factor_correlation(factor, rho_slice)
    try:
        Uinv = np.linalg.inv(U)
    except np.linalg.LinAlgError as exc:
        raise InvalidCodingError(f"factor {factor.name!r}: coding matrix is singular") from exc
    return np.einsum("ij,ij->i", Uinv @ psi, Uinv)


def prior_diag(design: DesignTable, mm: ModelMatrix, hp: Hyperparams) -> PriorDiagonal:
    """Prior variance diagonal for every model-matrix column.

    Entry i is prod_j v_j[profile_i(j)] where v_j = diag(U_j^{-1} Psi_j
    U_j^{-T}) and absent factors contribute their intercept entry v_j[0],
    so the tau^2/nu^2 factor is already folded in.
    """
    slices = rho_slices(design.factors)
    if hp.rho.shape[0] != (slices[-1][1] if slices else 0):
        raise InvalidInputError("rho length does not match the design's factors")
    v = [
        _factor_variance_diag(f, hp.rho[a:b])
        for f, (a, b) in zip(design.factors, slices)
    ]
    base = 1.0
    for vj in v:
        base *= vj[0]
    d = np.empty(mm.P)
    for col in mm.columns:
        di = base
        for j, dummy in col.dummy_profile.items():
            di *= v[j][dummy] / v[j][0]
        d[col.id] = di
    return PriorDiagonal(d=d, tau2_over_nu2=base)


def tau2_over_nu2(design: DesignTable, hp: Hyperparams) -> float:
    """Intercept prior variance over nu^2: prod_j sum(Psi_j) / q^2.

    Computed from correlation sums, independently of prior_diag's inverse
    route; the two must agree for orthogonal codings.
    """
    out = 1.0
    for f, (a, b) in zip(design.factors, rho_slices(design.factors)):
        psi = factor_correlation(f, hp.rho[a:b])
        out *= psi.sum() / f.n_levels**2
    return out
