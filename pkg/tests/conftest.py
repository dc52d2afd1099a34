from __future__ import annotations

import pytest

import twoscale as ts
from twoscale.model import CSMA3_SPEC, CSMA5_SPEC, build_csma


@pytest.fixture(scope="session")
def toy():
    return ts.build_toy()


@pytest.fixture(scope="session")
def csma3():
    return build_csma(CSMA3_SPEC)


@pytest.fixture(scope="session")
def csma5():
    return build_csma(CSMA5_SPEC)


@pytest.fixture(scope="session")
def toy_fp(toy):
    return ts.fixed_point(toy)


@pytest.fixture(scope="session")
def toy_terms(toy, toy_fp):
    return ts.refinement_terms(toy, toy_fp)


@pytest.fixture(scope="session")
def csma3_fp(csma3):
    return ts.fixed_point(csma3)


@pytest.fixture(scope="session")
def csma3_terms(csma3, csma3_fp):
    return ts.refinement_terms(csma3, csma3_fp)


@pytest.fixture(scope="session")
def csma5_fp(csma5):
    return ts.fixed_point(csma5)


@pytest.fixture(autouse=True)
def _auto_backend():
    ts.set_backend("auto")
    yield
    ts.set_backend("auto")
