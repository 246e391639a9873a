import warnings

import numpy as np
import pytest

from higarrote import HiGarroteOptions, higarrote
from higarrote.datasets import BUNDLED_IDS, load_dataset

CASE_IDS = [i for i in BUNDLED_IDS if i != "toy_pb12"]


@pytest.fixture(scope="session")
def designs():
    return {ds: load_dataset(ds)[0] for ds in BUNDLED_IDS}


@pytest.fixture(scope="session")
def reports(designs):
    """One seed-0 fit per bundled dataset, shared across the suite."""
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for ds in BUNDLED_IDS:
            out[ds] = higarrote(designs[ds], HiGarroteOptions(seed=0), dataset=ds)
    return out


def rng(seed=0):
    return np.random.default_rng(seed)
