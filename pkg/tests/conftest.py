import math
from pathlib import Path

import pytest

from kobolbasket import FactorModel, KobolParams, MarketSpec

DATA = Path(__file__).parent / "data"

PINNED = KobolParams(nu=0.5, c_plus=1.0, c_minus=1.0, lambda_plus=8.0, lambda_minus=-4.0)


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def pinned() -> KobolParams:
    return PINNED


@pytest.fixture
def model1() -> FactorModel:
    return FactorModel.independent([PINNED])


@pytest.fixture
def model2() -> FactorModel:
    return FactorModel.independent([PINNED, PINNED])


@pytest.fixture
def market1() -> MarketSpec:
    return MarketSpec((100.0,), 100.0, 0.03, 0.5)


@pytest.fixture
def market2() -> MarketSpec:
    return MarketSpec((100.0, 40.0), 50.0, 0.03, 0.5)


E10 = math.exp(10.0)
