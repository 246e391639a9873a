import json

import numpy as np
import pytest

from higarrote import InvalidInputError, build_model_matrix, coding_matrix
from higarrote.datasets import (
    BUNDLED_IDS,
    bundle,
    evaluate_expectations,
    load_dataset,
)
from higarrote.io import design_equal, load_config, load_design, write_design_csv


def test_all_bundles_load(designs):
    sizes = {
        "toy_pb12": (12, 11), "frac_2_9_5": (16, 9), "router_bit": (32, 9),
        "cast_fatigue": (12, 7), "blood_glucose": (18, 8),
        "resin_dsd": (21, 9), "epoxy_ssd": (14, 23),
    }
    for ds in BUNDLED_IDS:
        d = designs[ds]
        assert (d.n_runs, d.n_factors) == sizes[ds]
        assert d.replicate_count == 1


def test_unknown_dataset_rejected():
    with pytest.raises(InvalidInputError):
        bundle("nonexistent")


def test_two_level_designs_balanced_orthogonal(designs):
    # transcription checksum: the orthogonal-array designs have balanced,
    # mutually orthogonal +/- columns; the supersaturated epoxy design is
    # balanced only (23 factors in 14 runs cannot be orthogonal)
    for ds in ("toy_pb12", "frac_2_9_5", "cast_fatigue"):
        d = designs[ds]
        X = np.where(d.runs == 1, 1.0, -1.0)
        assert np.all(X.sum(axis=0) == 0), ds
        n = d.n_runs
        assert np.allclose(X.T @ X, n * np.eye(d.n_factors)), ds
    ep = designs["epoxy_ssd"]
    X = np.where(ep.runs == 1, 1.0, -1.0)
    assert np.all(X.sum(axis=0) == 0)


def test_toy_pb12_true_model_checksum(designs):
    d = designs["toy_pb12"]
    X = np.where(d.runs == 1, 1.0, -1.0)
    A, B, C = X[:, 0], X[:, 1], X[:, 2]
    assert np.array_equal(20 * A + 10 * A * B + 5 * A * C, d.response)
    # rows of the cyclic PB12 differ pairwise in exactly 6 of 11 columns
    dists = {
        int(np.sum(d.runs[i] != d.runs[j]))
        for i in range(12) for j in range(i + 1, 12)
    }
    assert dists == {6}


def test_frac_2_9_5_aliasing_checksum(designs):
    d = designs["frac_2_9_5"]
    X = np.where(d.runs == 1, 1.0, -1.0)
    ix = {f.name: j for j, f in enumerate(d.factors)}
    assert np.array_equal(X[:, ix["J"]], -X[:, ix["C"]] * X[:, ix["F"]])
    assert np.array_equal(X[:, ix["E"]], -X[:, ix["B"]] * X[:, ix["C"]])
    assert np.array_equal(X[:, ix["G"]], -X[:, ix["A"]] * X[:, ix["B"]])
    assert np.array_equal(X[:, ix["G"]], -X[:, ix["F"]] * X[:, ix["H"]])


def test_router_bit_columns_orthogonal(designs):
    d = designs["router_bit"]
    cols = []
    for j, f in enumerate(d.factors):
        U = coding_matrix(f)
        for c in range(1, f.n_levels):
            cols.append(U[d.runs[:, j], c])
    X = np.column_stack(cols)
    G = X.T @ X
    assert np.allclose(G, np.diag(np.diag(G)), atol=1e-9)
    assert np.allclose(np.diag(G), d.n_runs)


def test_blood_glucose_balance(designs):
    d = designs["blood_glucose"]
    for j, f in enumerate(d.factors):
        _, counts = np.unique(d.runs[:, j], return_counts=True)
        assert len(set(counts.tolist())) == 1, f.name


def test_resin_log_transform():
    design, config = load_dataset("resin_dsd")
    assert config["response"]["transform"] == "log"
    # run 1 has Impurity 1 -> log response 0
    assert design.response[0] == pytest.approx(0.0)
    assert design.response[13] == pytest.approx(np.log(390.0))


def test_expected_labels_exist_in_model_matrix(designs):
    from higarrote.garrote import resolve_scope
    for ds in BUNDLED_IDS:
        design = designs[ds]
        mm = build_model_matrix(design, resolve_scope(design, "auto"))
        labels = set(mm.labels())
        for check in bundle(ds).expected:
            for lab in check.params.get("labels", []):
                assert lab in labels, (ds, lab)
            if "label" in check.params:
                assert check.params["label"] in labels, (ds, check.params["label"])
            for lab in check.params.get("core", []):
                assert lab in labels, (ds, lab)


def test_expectations_have_provenance():
    for ds in BUNDLED_IDS:
        for check in bundle(ds).expected:
            assert check.provenance.strip()


def test_expectations_without_provenance_refused(tmp_path, monkeypatch):
    import higarrote.datasets as dsmod

    bad = {"dataset": "toy_pb12",
           "checks": [{"kind": "refit_r2_min", "value": 0.5}]}
    bad_file = tmp_path / "toy_pb12_expected.json"
    bad_file.write_text(json.dumps(bad))
    (tmp_path / "toy_pb12.csv").write_text("x\n")
    (tmp_path / "toy_pb12.json").write_text("{}")
    monkeypatch.setattr(dsmod, "_data_path", lambda name: tmp_path / name)
    with pytest.raises(InvalidInputError, match="provenance"):
        bundle("toy_pb12")


def test_roundtrip_replicated_design(tmp_path):
    from higarrote import DesignTable, FactorSpec

    factors = [FactorSpec("A", "qualitative", ["-1", "1"]),
               FactorSpec("B", "quantitative", ["1", "2", "3"])]
    design = DesignTable(
        factors=factors,
        runs=np.array([[0, 0], [1, 2], [0, 1]]),
        response=np.array([[1.0, 1.5], [2.0, 2.5], [3.0, 3.25]]),
        replicate_count=2,
    )
    out = tmp_path / "rep.csv"
    write_design_csv(design, out, response_column="y")
    header = out.read_text().splitlines()[0]
    assert header == "A,B,y_1,y_2"
    cfg = {
        "factors": [
            {"name": "A", "kind": "qualitative", "levels": ["-1", "1"]},
            {"name": "B", "kind": "quantitative", "levels": ["1", "2", "3"]},
        ],
        "response": {"column": "y", "replicates": 2},
    }
    assert design_equal(design, load_design(out, cfg))


def test_roundtrip_every_bundle(tmp_path, designs):
    for ds in BUNDLED_IDS:
        design = designs[ds]
        config = load_config(bundle(ds).config_path)
        out_csv = tmp_path / f"{ds}.csv"
        write_design_csv(design, out_csv, response_column="resp")
        cfg2 = dict(config)
        cfg2["response"] = {"column": "resp"}  # already-transformed values
        reloaded = load_design(out_csv, cfg2)
        assert design_equal(design, reloaded), ds


def test_evaluate_expectations_shapes(reports):
    for ds in BUNDLED_IDS:
        results = evaluate_expectations(reports[ds], bundle(ds))
        assert results
        for r in results:
            assert isinstance(r.passed, bool)
            assert r.provenance
