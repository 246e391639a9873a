import numpy as np
import pytest

from higarrote import InvalidInputError
from higarrote.simulate import SimSpec, run_simulation


def test_noiseless_single_replication_recovers_model():
    res = run_simulation(SimSpec(noise_sd=0.0, replications=1, seed=0), threads=1)
    rec = res.records[0]
    assert {"A", "AB", "AC"} <= set(rec)
    assert rec["A"] == pytest.approx(20.0, abs=0.5)
    assert rec["AB"] == pytest.approx(10.0, abs=0.5)
    assert rec["AC"] == pytest.approx(5.0, abs=0.5)


def test_frequencies_valid_and_thread_invariant():
    spec = SimSpec(noise_sd=1.0, replications=4, seed=3)
    seq = run_simulation(spec, threads=1)
    par = run_simulation(spec, threads=3)
    assert seq.records == par.records
    for s in seq.summaries:
        assert 0.0 < s.frequency <= 1.0
        assert s.q25 <= s.median <= s.q75
    for label in ("A", "AB"):
        hits = sum(1 for r in seq.records if label in r)
        assert seq.frequency(label) == hits / 4
        assert seq.frequency(label) + (4 - hits) / 4 == 1.0


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        SimSpec(replications=0)
    with pytest.raises(InvalidInputError):
        SimSpec(noise_sd=-1.0)
    with pytest.raises(InvalidInputError):
        run_simulation(SimSpec(true_model=[("ZZ", 1.0)], replications=1), threads=1)


def test_from_dict_defaults():
    spec = SimSpec.from_dict({"noise_sd": 2, "replications": 7, "seed": 5})
    assert spec.design_id == "toy_pb12"
    assert spec.true_model == [("A", 20.0), ("AB", 10.0), ("AC", 5.0)]
    assert spec.noise_sd == 2.0 and spec.replications == 7 and spec.seed == 5
