import numpy as np
import pytest

from higarrote import (
    DesignTable,
    FactorSpec,
    Hyperparams,
    InvalidInputError,
    build_model_matrix,
    coding_matrix,
    factor_correlation,
    prior_diag,
    run_correlation,
    tau2_over_nu2,
)
from higarrote.datasets import load_dataset
from higarrote.prior import rho_dimension, rho_slices


def test_hyperparams_validation():
    Hyperparams(rho=[0.5], lam=0.5)
    with pytest.raises(InvalidInputError):
        Hyperparams(rho=[1.5], lam=0.5)
    with pytest.raises(InvalidInputError):
        Hyperparams(rho=[0.5], lam=0.005)
    with pytest.raises(InvalidInputError):
        Hyperparams(rho=[[0.5]], lam=0.5)


def test_rho_layout():
    factors = [
        FactorSpec("A", "quantitative", ["1", "2", "3"]),
        FactorSpec("B", "qualitative", ["x", "y", "z"]),
        FactorSpec("C", "qualitative", ["u", "v"]),
    ]
    assert rho_dimension(factors) == 1 + 2 + 1
    assert rho_slices(factors) == [(0, 1), (1, 3), (3, 4)]


def test_quantitative_three_level_correlation():
    f = FactorSpec("X", "quantitative", ["1", "2", "3"])
    rho = 0.37
    psi = factor_correlation(f, [rho])
    expected = np.array(
        [[1, rho, rho**4], [rho, 1, rho], [rho**4, rho, 1]]
    )
    assert np.allclose(psi, expected, atol=1e-15)


def test_helmert_qualitative_correlation():
    f = FactorSpec("X", "qualitative", ["a", "b", "c"])
    r1, r2 = 0.3, 0.7
    psi = factor_correlation(f, [r1, r2])
    expected = np.array(
        [[1, r1, r1 * r2], [r1, 1, r1 * r2], [r1 * r2, r1 * r2, 1]]
    )
    assert np.allclose(psi, expected, atol=1e-15)


def test_correlation_all_ones_limit():
    for f in (FactorSpec("X", "quantitative", ["1", "2", "3"]),
              FactorSpec("Y", "qualitative", list("abcd"))):
        psi = factor_correlation(f, np.full(f.n_params, 0.999999999999))
        assert np.allclose(psi, 1.0, atol=1e-9)


def test_run_correlation_identical_and_mismatch_counts():
    design, _ = load_dataset("toy_pb12")
    hp = Hyperparams(rho=np.full(11, 0.5), lam=0.5)
    psi = run_correlation(design, hp)
    assert np.allclose(np.diag(psi), 1.0)
    assert np.allclose(psi, psi.T)
    # oracle: entry (i, k) must be 0.5 ** (#mismatching factor columns)
    runs = design.runs
    for i, k in [(0, 1), (0, 11), (3, 7), (5, 6)]:
        mism = int(np.sum(runs[i] != runs[k]))
        assert psi[i, k] == pytest.approx(0.5**mism, rel=1e-12)
    # the PB12 rows pairwise differ in exactly 6 of 11 columns
    assert int(np.sum(runs[0] != runs[1])) == 6
    assert psi[0, 1] == pytest.approx(0.5**6, rel=1e-12)


def test_run_correlation_duplicate_runs_entry_one():
    f = FactorSpec("X", "quantitative", ["1", "2", "3"])
    design = DesignTable(
        factors=[f], runs=np.array([[1], [1], [2]]), response=np.zeros(3)
    )
    psi = run_correlation(design, Hyperparams(rho=[0.3], lam=0.5))
    assert psi[0, 1] == 1.0


def test_run_correlation_single_factor_matches_factor_correlation():
    f = FactorSpec("X", "quantitative", ["1", "2", "3"])
    design = DesignTable(
        factors=[f], runs=np.array([[0], [2], [1]]), response=np.zeros(3)
    )
    hp = Hyperparams(rho=[0.42], lam=0.5)
    psi_n = run_correlation(design, hp)
    psi_f = factor_correlation(f, [0.42])
    lev = design.runs[:, 0]
    assert np.allclose(psi_n, psi_f[np.ix_(lev, lev)], atol=1e-15)


def test_run_correlation_psd(designs):
    for ds, design in designs.items():
        k = rho_dimension(design.factors)
        rng = np.random.default_rng(7)
        hp = Hyperparams(rho=rng.uniform(0.05, 0.95, k), lam=0.5)
        psi = run_correlation(design, hp)
        eig = np.linalg.eigvalsh(psi)
        assert eig.min() > -1e-10, ds


def _ratios(factor, rho):
    """prior_diag ratios for a one-factor design (independent slow route)."""
    design = DesignTable(
        factors=[factor],
        runs=np.arange(factor.n_levels).reshape(-1, 1),
        response=np.zeros(factor.n_levels),
    )
    mm = build_model_matrix(design, "main_only")
    hp = Hyperparams(rho=np.atleast_1d(rho), lam=0.5)
    pd = prior_diag(design, mm, hp)
    return pd.d / pd.tau2_over_nu2, pd.tau2_over_nu2


def test_closed_form_quantitative_three_level():
    # 1000 random draws against the closed forms for the polynomial coding
    rng = np.random.default_rng(11)
    f = FactorSpec("X", "quantitative", ["1", "2", "3"])
    for rho in rng.uniform(1e-6, 0.999, 1000):
        ratios, tau = _ratios(f, rho)
        denom = 3 + 4 * rho + 2 * rho**4
        r_l = (3 - 3 * rho**4) / denom
        r_q = (3 - 4 * rho + rho**4) / denom
        assert abs(ratios[0] - r_l) < 1e-10
        assert abs(ratios[1] - r_q) < 1e-10
        assert abs(tau - denom / 9.0) < 1e-10


def test_closed_form_helmert_three_level():
    rng = np.random.default_rng(12)
    f = FactorSpec("X", "qualitative", ["a", "b", "c"])
    for r1, r2 in rng.uniform(1e-6, 0.999, (1000, 2)):
        ratios, tau = _ratios(f, [r1, r2])
        denom = 3 + 2 * r1 + 4 * r1 * r2
        assert abs(ratios[0] - 3 * (1 - r1) / denom) < 1e-10
        assert abs(ratios[1] - (3 + r1 - 4 * r1 * r2) / denom) < 1e-10
        assert abs(tau - denom / 9.0) < 1e-10


def test_closed_form_two_level():
    # 2x2 matrix-algebra oracle: U^{-1} Psi U^{-T} has diagonal
    # ((1+rho)/2, (1-rho)/2)
    rng = np.random.default_rng(13)
    f = FactorSpec("X", "qualitative", ["-1", "1"])
    for rho in rng.uniform(1e-6, 0.999, 200):
        ratios, tau = _ratios(f, rho)
        assert abs(tau - (1 + rho) / 2) < 1e-12
        assert abs(ratios[0] - (1 - rho) / (1 + rho)) < 1e-12


def test_ratio_limits():
    f = FactorSpec("X", "quantitative", ["1", "2", "3"])
    ratios, _ = _ratios(f, 1e-15)
    assert np.allclose(ratios, 1.0, atol=1e-12)


def test_prior_diag_heredity_product_and_hierarchy(designs):
    rng = np.random.default_rng(21)
    for ds in ("cast_fatigue", "blood_glucose", "router_bit"):
        design = designs[ds]
        mm = build_model_matrix(design, "main_plus_2fi")
        k = rho_dimension(design.factors)
        hp = Hyperparams(rho=rng.uniform(0.05, 0.95, k), lam=0.5)
        pd = prior_diag(design, mm, hp)
        assert np.all(pd.d > 0)
        for col in mm.columns:
            if col.degree != 2:
                continue
            i, j = sorted(col.parents)
            lhs = pd.d[col.id] * pd.tau2_over_nu2
            rhs = pd.d[i] * pd.d[j]
            assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), 1e-300)
            # hierarchy: interactions never exceed their parents
            assert pd.d[col.id] < pd.d[i]
            assert pd.d[col.id] < pd.d[j]


def test_tau2_consistency_and_examples():
    f = FactorSpec("X", "qualitative", ["-1", "1"])
    design = DesignTable(
        factors=[f], runs=np.array([[0], [1]]), response=np.zeros(2)
    )
    rho = 0.63
    hp = Hyperparams(rho=[rho], lam=0.5)
    assert tau2_over_nu2(design, hp) == pytest.approx((1 + rho) / 2, abs=1e-14)
    mm = build_model_matrix(design, "main_only")
    pd = prior_diag(design, mm, hp)
    assert tau2_over_nu2(design, hp) == pytest.approx(pd.tau2_over_nu2, rel=1e-12)

    fq = FactorSpec("Y", "quantitative", ["1", "2", "3"])
    d3 = DesignTable(factors=[fq], runs=np.array([[0], [1], [2]]),
                     response=np.zeros(3))
    hp3 = Hyperparams(rho=[rho], lam=0.5)
    assert tau2_over_nu2(d3, hp3) == pytest.approx(
        (3 + 4 * rho + 2 * rho**4) / 9, abs=1e-14
    )


def test_tau2_all_rho_one_limit():
    # sum(Psi_j) -> m_j^2 as rho -> 1, so the product tends to 1
    for f in (FactorSpec("A", "qualitative", ["x", "y", "z"]),
              FactorSpec("B", "quantitative", ["1", "2", "3", "4"])):
        psi = factor_correlation(f, np.full(f.n_params, 1.0 - 1e-13))
        assert psi.sum() / f.n_levels**2 == pytest.approx(1.0, abs=1e-10)


def test_full_factorial_kronecker_consistency():
    # ground truth via the Kronecker route: with C = kron_j U_j^{-1} Psi_j
    # U_j^{-T}, (i) U_q C U_q' reproduces the run correlation on a full
    # factorial, and (ii) prior_diag picks out exactly diag(C)
    rng = np.random.default_rng(5)
    cases = [
        [FactorSpec("A", "quantitative", ["1", "2", "3"]),
         FactorSpec("B", "qualitative", ["x", "y"])],
        [FactorSpec("A", "qualitative", ["x", "y", "z"]),
         FactorSpec("B", "quantitative", ["1", "2", "3"])],
        [FactorSpec("A", "qualitative", list("wxyz"), coding="paired_level_4"),
         FactorSpec("B", "qualitative", ["u", "v", "w"]),
         FactorSpec("C", "quantitative", ["1", "2"])],
    ]
    for factors in cases:
        shapes = [f.n_levels for f in factors]
        runs = np.array([list(idx) for idx in np.ndindex(*shapes)], dtype=int)
        q = len(runs)
        design = DesignTable(factors=factors, runs=runs, response=np.zeros(q))
        k = rho_dimension(factors)
        hp = Hyperparams(rho=rng.uniform(0.1, 0.9, k), lam=0.5)

        C = np.ones((1, 1))
        U_q = np.ones((1, 1))
        for f, (a, b) in zip(factors, rho_slices(factors)):
            U = coding_matrix(f)
            Uinv = np.linalg.inv(U)
            psi = factor_correlation(f, hp.rho[a:b])
            C = np.kron(C, Uinv @ psi @ Uinv.T)
            U_q = np.kron(U_q, U)
        # (i) run-correlation consistency (rows of U_q follow np.ndindex order)
        assert np.max(np.abs(U_q @ C @ U_q.T - run_correlation(design, hp))) < 1e-10
        # (ii) diagonal consistency, matching columns by dummy profile
        mm = build_model_matrix(design, "main_plus_2fi")
        pd = prior_diag(design, mm, hp)
        diag = np.diag(C)
        strides = np.ones(len(factors), dtype=int)
        for j in range(len(factors) - 2, -1, -1):
            strides[j] = strides[j + 1] * shapes[j + 1]
        assert abs(pd.tau2_over_nu2 - diag[0]) < 1e-12
        for col in mm.columns:
            flat = sum(strides[j] * d for j, d in col.dummy_profile.items())
            assert abs(pd.d[col.id] - diag[flat]) < 1e-12 * max(1.0, abs(diag[flat]))
