import sys

import numpy as np
import pytest

from ordinal_bst.model import OrdinalModel, Standardizer
from ordinal_bst.neuralnet import GRU_PARAM_NAMES, GruParams


def random_gru(rng, h, d_in, scale=0.8):
    shapes = {"W": (h, d_in), "U": (h, h), "b": (h,)}
    return GruParams(**{n: rng.normal(scale=scale, size=shapes[n[0]]) for n in GRU_PARAM_NAMES})


def random_model(rng, d, k, h, scale=0.8):
    return OrdinalModel(
        k_states=k,
        W_e=rng.normal(scale=scale, size=(h, d)),
        b_e=rng.normal(scale=scale, size=h),
        gru=random_gru(rng, h, 2, scale),
        w_o=rng.normal(scale=scale * 2, size=h),
        b_o=rng.normal(scale=scale),
        standardizer=Standardizer.identity(d),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    test_acceptance = sys.modules.get("tests.test_acceptance")
    if test_acceptance is None or not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(test_acceptance.RESULTS):
        status, detail = test_acceptance.RESULTS[number]
        terminalreporter.write_line(f"[{status}] criterion {number}: {detail}")
