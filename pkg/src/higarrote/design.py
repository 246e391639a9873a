"""Factors, designs, coding matrices, and the effect model matrix.

Coding matrices follow the convention that every column (including the
intercept) has squared norm m, so the scaled matrix U/sqrt(m) is orthonormal
and U^{-1} = U'/m. Main-effect columns of any balanced design then all share
the same norm, which is what makes effect sizes comparable across factors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateResponseError, InvalidCodingError, InvalidInputError

QUANTITATIVE = "quantitative"
QUALITATIVE = "qualitative"

MAIN_ONLY = "main_only"
MAIN_PLUS_2FI = "main_plus_2fi"

_POLY_SUFFIX = ["_l", "_q", "_c"]

_ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class FactorSpec:
    """One experimental factor.

    Parameters
    ----------
    name : str
    kind : str
        "quantitative" or "qualitative".
    levels : tuple of str
        Ordered level labels, m >= 2, all distinct.
    coding : str or array, optional
        "orthogonal_polynomial" (default for quantitative), "helmert"
        (default for qualitative), "paired_level_4" (m = 4 only), or a
        custom m x m matrix with a leading ones column and mutually
        orthogonal columns.
    """

    name: str
    kind: str
    levels: tuple
    coding: object = None

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if self.kind not in (QUANTITATIVE, QUALITATIVE):
            raise InvalidInputError(f"factor {self.name!r}: unknown kind {self.kind!r}")
        if len(self.levels) < 2:
            raise InvalidInputError(f"factor {self.name!r}: needs at least 2 levels")
        if len(set(self.levels)) != len(self.levels):
            raise InvalidInputError(f"factor {self.name!r}: duplicate levels")

    @property
    def n_levels(self):
        return len(self.levels)

    @property
    def n_params(self):
        """Number of correlation parameters this factor contributes."""
        return 1 if self.kind == QUANTITATIVE else self.n_levels - 1

    def dummy_labels(self):
        """Labels of this factor's non-intercept coding columns."""
        m = self.n_levels
        if m == 2:
            return [self.name]
        if self.kind == QUANTITATIVE:
            return [
                self.name + (_POLY_SUFFIX[d - 1] if d <= 3 else f"_p{d}")
                for d in range(1, m)
            ]
        return [f"{self.name}_{d}" for d in range(1, m)]


def _orthogonal_polynomial(m):
    # QR of the Vandermonde on ranks 1..m; signs fixed so the linear
    # contrast increases with level, columns scaled to norm sqrt(m).
    x = np.arange(1.0, m + 1.0)
    V = np.vander(x, m, increasing=True)
    Q, R = np.linalg.qr(V)
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * np.sqrt(m)


def _helmert(m):
    U = np.zeros((m, m))
    U[:, 0] = 1.0
    for d in range(1, m):
        U[:d, d] = -1.0
        U[d, d] = d
        U[:, d] *= np.sqrt(m / (d * (d + 1.0)))
    return U


_PAIRED_LEVEL_4 = np.array(
    [
        [1.0, -1.0, 1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, 1.0, 1.0, 1.0],
    ]
)


def _validate_coding(U, m, name):
    U = np.asarray(U, dtype=float)
    if U.shape != (m, m):
        raise InvalidCodingError(f"factor {name!r}: coding must be {m}x{m}, got {U.shape}")
    scale = max(1.0, float(np.abs(U).max()) ** 2)
    if not np.allclose(U[:, 0], 1.0, atol=_ORTHO_TOL):
        raise InvalidCodingError(f"factor {name!r}: first coding column must be all ones")
    G = U.T @ U
    if np.max(np.abs(G - np.diag(np.diag(G)))) > _ORTHO_TOL * scale * m:
        raise InvalidCodingError(f"factor {name!r}: coding columns are not orthogonal")
    return U


def coding_matrix(factor: FactorSpec) -> np.ndarray:
    """Full m x m coding matrix for a factor, intercept column included.

    Raises
    ------
    InvalidCodingError
        If paired_level_4 is requested with m != 4 or a custom matrix
        fails the orthogonality checks.
    """
    m = factor.n_levels
    coding = factor.coding
    if coding is None:
        coding = "orthogonal_polynomial" if factor.kind == QUANTITATIVE else "helmert"
    if isinstance(coding, str):
        if coding == "orthogonal_polynomial":
            return _orthogonal_polynomial(m)
        if coding == "helmert":
            return _helmert(m)
        if coding == "paired_level_4":
            if m != 4:
                raise InvalidCodingError(
                    f"factor {factor.name!r}: paired_level_4 needs 4 levels, has {m}"
                )
            return _PAIRED_LEVEL_4.copy()
        raise InvalidCodingError(f"factor {factor.name!r}: unknown coding {coding!r}")
    return _validate_coding(coding, m, factor.name)


@dataclass
class DesignTable:
    """A design with its observed response.

    runs holds 0-based level indices, one column per factor. response is
    (n,) for single observations or (n, m) for m replicates per run.
    """

    factors: list
    runs: np.ndarray
    response: np.ndarray
    replicate_count: int = 1

    def __post_init__(self):
        self.runs = np.asarray(self.runs, dtype=int)
        self.response = np.asarray(self.response, dtype=float)
        n, p = self.runs.shape
        if p != len(self.factors):
            raise InvalidInputError(f"runs have {p} columns for {len(self.factors)} factors")
        for j, f in enumerate(self.factors):
            col = self.runs[:, j]
            if col.min() < 0 or col.max() >= f.n_levels:
                raise InvalidInputError(f"factor {f.name!r}: level index out of range")
        if self.replicate_count < 1:
            raise InvalidInputError("replicate_count must be >= 1")
        if self.replicate_count == 1:
            if self.response.shape != (n,):
                raise InvalidInputError(
                    f"response must have length {n}, got shape {self.response.shape}"
                )
        elif self.response.shape != (n, self.replicate_count):
            raise InvalidInputError(
                f"response must be {n}x{self.replicate_count}, got {self.response.shape}"
            )

    @property
    def n_runs(self):
        return self.runs.shape[0]

    @property
    def n_factors(self):
        return self.runs.shape[1]


@dataclass
class EffectColumn:
    """One model-matrix column with its effect metadata.

    dummy_profile maps factor index -> coding-column index (1..m-1); factors
    absent from the map contribute their intercept column. Degree-2 columns
    carry the ids of their two parent main effects.
    """

    id: int
    label: str
    values: np.ndarray
    degree: int
    parents: frozenset = field(default_factory=frozenset)
    dummy_profile: dict = field(default_factory=dict)


@dataclass
class ModelMatrix:
    """Ordered effect columns (intercept excluded) for a design."""

    columns: list
    n: int
    scope: str

    _matrix: np.ndarray = field(default=None, repr=False)
    _index: dict = field(default=None, repr=False)

    @property
    def P(self):
        return len(self.columns)

    def matrix(self) -> np.ndarray:
        """The n x P matrix of column values."""
        if self._matrix is None:
            self._matrix = np.column_stack([c.values for c in self.columns])
        return self._matrix

    def labels(self):
        return [c.label for c in self.columns]

    def column_index(self, label: str) -> int:
        if self._index is None:
            self._index = {c.label: c.id for c in self.columns}
        return self._index[label]


def build_model_matrix(design: DesignTable, scope: str = MAIN_PLUS_2FI) -> ModelMatrix:
    """Build main-effect columns and, under main_plus_2fi, all products of
    main-effect columns from distinct factors.

    Ordering is deterministic: mains in factor order (each factor's dummies
    in coding-column order), then interactions in lexicographic parent-id
    order. Labels concatenate the parent labels (e.g. "FG", "B_lH_q").
    """
    if scope not in (MAIN_ONLY, MAIN_PLUS_2FI):
        raise InvalidInputError(f"unknown scope {scope!r}")
    columns = []
    factor_of = []
    for j, f in enumerate(design.factors):
        U = coding_matrix(f)
        labels = f.dummy_labels()
        lev = design.runs[:, j]
        for d in range(1, f.n_levels):
            columns.append(
                EffectColumn(
                    id=len(columns),
                    label=labels[d - 1],
                    values=U[lev, d].copy(),
                    degree=1,
                    dummy_profile={j: d},
                )
            )
            factor_of.append(j)
    if scope == MAIN_PLUS_2FI:
        n_main = len(columns)
        for i in range(n_main):
            for k in range(i + 1, n_main):
                if factor_of[i] == factor_of[k]:
                    continue
                ci, ck = columns[i], columns[k]
                profile = dict(ci.dummy_profile)
                profile.update(ck.dummy_profile)
                columns.append(
                    EffectColumn(
                        id=len(columns),
                        label=ci.label + ck.label,
                        values=ci.values * ck.values,
                        degree=2,
                        parents=frozenset((i, k)),
                        dummy_profile=profile,
                    )
                )
    return ModelMatrix(columns=columns, n=design.n_runs, scope=scope)


def heredity_constraints(mm: ModelMatrix, mode: str = "weak",
                         quadratic_child_of_linear: bool = False):
    """Linear heredity rows (A, b) with A theta <= b over the P shrinkage factors.

    weak:   theta_col - theta_i - theta_j <= 0 for each interaction column;
    strong: theta_col - theta_i <= 0 and theta_col - theta_j <= 0.
    Pure polynomial mains get no rows unless quadratic_child_of_linear ties
    each higher-degree main to the factor's linear main.
    """
    if mode not in ("weak", "strong"):
        raise InvalidInputError(f"unknown heredity mode {mode!r}")
    rows = []
    for col in mm.columns:
        if col.degree != 2:
            continue
        i, k = sorted(col.parents)
        if mode == "weak":
            r = np.zeros(mm.P)
            r[col.id] = 1.0
            r[i] -= 1.0
            r[k] -= 1.0
            rows.append(r)
        else:
            for parent in (i, k):
                r = np.zeros(mm.P)
                r[col.id] = 1.0
                r[parent] -= 1.0
                rows.append(r)
    if quadratic_child_of_linear:
        # linear main of each factor = its first coding column
        first = {}
        for col in mm.columns:
            if col.degree == 1:
                (j, d), = col.dummy_profile.items()
                if d == 1:
                    first[j] = col.id
        for col in mm.columns:
            if col.degree == 1:
                (j, d), = col.dummy_profile.items()
                if d > 1 and j in first:
                    r = np.zeros(mm.P)
                    r[col.id] = 1.0
                    r[first[j]] -= 1.0
                    rows.append(r)
    if not rows:
        return np.zeros((0, mm.P)), np.zeros(0)
    A = np.array(rows)
    return A, np.zeros(len(rows))


@dataclass
class CenteredResponse:
    """Centered per-run response plus the pooled replicate variance."""

    y: np.ndarray
    grand_mean: float
    sigma2: float = None


def center_response(design: DesignTable) -> CenteredResponse:
    """Center the response; with replicates, average runs and pool variances.

    Raises
    ------
    DegenerateResponseError
        If every observation is identical.
    """
    raw = design.response
    if np.ptp(raw) == 0.0:
        raise DegenerateResponseError("response is constant; nothing to select")
    if design.replicate_count > 1:
        means = raw.mean(axis=1)
        sigma2 = float(raw.var(axis=1, ddof=1).mean())
        mu = float(means.mean())
        return CenteredResponse(y=means - mu, grand_mean=mu, sigma2=sigma2)
    mu = float(raw.mean())
    return CenteredResponse(y=raw - mu, grand_mean=mu)
