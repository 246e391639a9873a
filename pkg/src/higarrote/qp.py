"""Dense primal active-set solver for the garrote quadratic programs.

    minimize   0.5 theta' Q theta - c' theta
    subject to theta >= 0  and  A theta <= b

theta = 0 must be feasible (b >= 0), which every garrote problem satisfies.
Constraints are indexed globally as: 0..P-1 the nonnegativity bounds,
P..P+r-1 the rows of A. Tie-breaking is deterministic: the most negative
multiplier leaves the working set first (lowest index on ties), and the
smallest-ratio blocker enters (lowest index on ties).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .errors import InvalidInputError, NonconvergenceError

_SYM_TOL = 1e-10
_ZERO = 1e-12


@dataclass
class QpProblem:
    """One convex QP instance; validates shapes, symmetry, and b >= 0."""

    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        P = self.c.shape[0]
        if self.Q.shape != (P, P):
            raise InvalidInputError(f"Q must be {P}x{P}, got {self.Q.shape}")
        scale = max(1.0, float(np.abs(self.Q).max()))
        if np.abs(self.Q - self.Q.T).max() > _SYM_TOL * scale:
            raise InvalidInputError("Q is not symmetric")
        if self.A.ndim != 2 or self.A.shape[1] != P:
            raise InvalidInputError(f"A must have {P} columns, got {self.A.shape}")
        if self.b.shape != (self.A.shape[0],):
            raise InvalidInputError("b length must match A rows")
        if self.b.size and self.b.min() < -1e-12:
            raise InvalidInputError("theta = 0 must be feasible (needs b >= 0)")

    @property
    def P(self):
        return self.c.shape[0]

    @property
    def n_rows(self):
        return self.A.shape[0]

    def objective(self, theta):
        return 0.5 * float(theta @ self.Q @ theta) - float(self.c @ theta)


@dataclass
class QpSolution:
    """KKT-certified solution; residuals are for the problem with the
    objective normalized by max(1, |Q|_max, |c|_max), so the tolerance is
    scale-free."""

    theta: np.ndarray
    objective: float
    kkt_residual: float
    active_set: np.ndarray
    iterations: int
    multipliers: np.ndarray = field(default=None, repr=False)
    ridge_bump: float = 0.0


def _chol_solve_reg(H, rhs, bump0):
    """Cholesky solve with escalating Tikhonov bumps for singular H."""
    try:
        L = np.linalg.cholesky(H)
        x = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
        return x, 0.0
    except np.linalg.LinAlgError:
        pass
    bump = bump0
    eye = np.eye(H.shape[0])
    for _ in range(18):
        try:
            L = np.linalg.cholesky(H + bump * eye)
            x = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
            return x, bump
        except np.linalg.LinAlgError:
            bump *= 10.0
    raise NonconvergenceError("reduced Hessian factorization failed")


def _certify(Q, c, A, b, theta, mult_bound, mult_gen):
    """Recompute the four KKT residuals from scratch."""
    stat = Q @ theta - c - mult_bound
    if A.shape[0]:
        stat = stat + A.T @ mult_gen
    r_stat = float(np.abs(stat).max()) if stat.size else 0.0
    viol = [-theta.min() if theta.size else 0.0]
    if A.shape[0]:
        viol.append(float((A @ theta - b).max()))
    r_prim = max(0.0, *viol)
    r_dual = 0.0
    if mult_bound.size:
        r_dual = max(r_dual, -float(mult_bound.min()))
    if mult_gen.size:
        r_dual = max(r_dual, -float(mult_gen.min()))
    comp = [0.0]
    if mult_bound.size:
        comp.append(float(np.abs(mult_bound * theta).max()))
    if mult_gen.size:
        comp.append(float(np.abs(mult_gen * (b - A @ theta)).max()))
    r_comp = max(comp)
    return max(r_stat, r_prim, r_dual, r_comp)


def solve(problem: QpProblem, tol: float = 1e-8, max_iter: int = None,
          warm_theta: np.ndarray = None) -> QpSolution:
    """Active-set solve; optionally warm-started from a feasible point.

    Raises
    ------
    NonconvergenceError
        Iteration cap reached with KKT residual above tol; `.best` carries
        the last iterate.
    """
    P, r = problem.P, problem.n_rows
    # scale-free internal problem: theta and the constraints are untouched
    s = max(1.0, float(np.abs(problem.Q).max()), float(np.abs(problem.c).max()))
    Q, c = problem.Q / s, problem.c / s
    A, b = problem.A, problem.b
    if max_iter is None:
        max_iter = 40 * (P + r) + 200

    if warm_theta is not None:
        theta = np.asarray(warm_theta, dtype=float).copy()
        theta[theta < 0] = 0.0
        if r and (A @ theta - b).max() > 1e-9:
            theta = np.zeros(P)
    else:
        theta = np.zeros(P)
    act_bound = theta <= _ZERO
    theta[act_bound] = 0.0
    act_gen = np.zeros(r, dtype=bool)

    bump0 = 1e-10 * max(np.trace(Q) / P, 1e-30)
    max_bump = 0.0
    sol = None

    for it in range(1, max_iter + 1):
        g = Q @ theta - c
        free = ~act_bound
        nF = int(free.sum())
        p = np.zeros(P)
        if nF:
            QFF = Q[np.ix_(free, free)]
            gF = g[free]
            ng = int(act_gen.sum())
            if ng == 0:
                pF, used = _chol_solve_reg(QFF, -gF, bump0)
                p[free] = pF
                max_bump = max(max_bump, used)
            else:
                Aw = A[act_gen][:, free]
                N = null_space(Aw)
                if N.shape[1]:
                    H = N.T @ QFF @ N
                    z, used = _chol_solve_reg(H, -(N.T @ gF), bump0)
                    p[free] = N @ z
                    max_bump = max(max_bump, used)

        if np.abs(p).max(initial=0.0) <= tol * max(1.0, np.abs(theta).max(initial=0.0)):
            # stationary on the working surface: check multipliers
            idx_b = np.flatnonzero(act_bound)
            idx_g = np.flatnonzero(act_gen)
            cols = []
            for i in idx_b:
                e = np.zeros(P)
                e[i] = -1.0
                cols.append(e)
            for j in idx_g:
                cols.append(A[j])
            if cols:
                GT = np.column_stack(cols)
                mult, *_ = np.linalg.lstsq(GT, -g, rcond=None)
            else:
                mult = np.zeros(0)
            worst = float(mult.min()) if mult.size else 0.0
            if worst >= -tol * max(1.0, np.abs(g).max(initial=0.0)):
                mult_bound = np.zeros(P)
                mult_gen = np.zeros(r)
                if mult.size:
                    mb = np.maximum(mult[: len(idx_b)], 0.0)
                    mg = np.maximum(mult[len(idx_b):], 0.0)
                    mult_bound[idx_b] = mb
                    mult_gen[idx_g] = mg
                kkt = _certify(Q, c, A, b, theta, mult_bound, mult_gen)
                active = np.concatenate(
                    [np.flatnonzero(act_bound), P + np.flatnonzero(act_gen)]
                ).astype(int)
                sol = QpSolution(
                    theta=theta,
                    objective=problem.objective(theta),
                    kkt_residual=kkt,
                    active_set=active,
                    iterations=it,
                    multipliers=np.concatenate([mult_bound, mult_gen]) * s,
                    ridge_bump=max_bump,
                )
                if kkt <= max(tol, 1e-7):
                    return sol
                # stationarity not certified (degenerate working set):
                # fall through and drop the worst multiplier anyway
            # drop the most negative multiplier; global index breaks ties
            glob = np.concatenate([idx_b, P + idx_g]).astype(int)
            if glob.size == 0:
                raise NonconvergenceError(
                    "stationary point failed certification", best=sol
                )
            order = np.lexsort((glob, mult))
            leave = glob[order[0]]
            if leave < P:
                act_bound[leave] = False
            else:
                act_gen[leave - P] = False
            continue

        # ratio test over constraints outside the working set; the
        # smallest ratio blocks, lowest global index on ties
        alpha = 1.0
        blocker = -1
        cand_b = np.flatnonzero(~act_bound & (p < -_ZERO))
        if cand_b.size:
            ratios = np.maximum(theta[cand_b] / (-p[cand_b]), 0.0)
            pick = np.lexsort((cand_b, ratios))[0]
            if ratios[pick] < alpha - 1e-15:
                alpha, blocker = float(ratios[pick]), int(cand_b[pick])
        if r:
            Ap = A @ p
            cand_g = np.flatnonzero(~act_gen & (Ap > _ZERO))
            if cand_g.size:
                ratios = np.maximum(b[cand_g] - A[cand_g] @ theta, 0.0) / Ap[cand_g]
                pick = np.lexsort((cand_g, ratios))[0]
                if ratios[pick] < alpha - 1e-15:
                    alpha, blocker = float(ratios[pick]), P + int(cand_g[pick])
        theta = theta + alpha * p
        theta[theta < _ZERO] = np.maximum(theta[theta < _ZERO], 0.0)
        theta[np.abs(theta) < _ZERO] = 0.0
        if blocker >= 0:
            if blocker < P:
                act_bound[blocker] = True
                theta[blocker] = 0.0
            else:
                act_gen[blocker - P] = True

    best = QpSolution(
        theta=theta,
        objective=problem.objective(theta),
        kkt_residual=np.inf,
        active_set=np.concatenate(
            [np.flatnonzero(act_bound), P + np.flatnonzero(act_gen)]
        ).astype(int),
        iterations=max_iter,
        ridge_bump=max_bump,
    )
    raise NonconvergenceError("active-set iteration cap reached", best=best)
