import logging

import numpy as np
import pytest


def pytest_configure(config):
    # the ridge-fallback warning is exercised explicitly in test_predict;
    # keep the remaining output readable
    logging.getLogger("tssdr.predict").setLevel(logging.ERROR)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
