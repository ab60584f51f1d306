import json
import math
from dataclasses import replace

import pytest

from kobolbasket import price_basket_call
from kobolbasket.errors import ParameterError
from kobolbasket.io import (
    fmt,
    load_market,
    load_model,
    market_from_dict,
    market_to_dict,
    model_from_dict,
    model_to_dict,
    quote_csv_header,
    quote_csv_row,
    quote_from_json,
    quote_to_json,
)


def test_model_file_loads(data_dir, model2):
    m = load_model(data_dir / "model_n2.json")
    assert m.n == 2
    assert model_to_dict(m) == model_to_dict(model2)


def test_model_dict_round_trip(data_dir):
    m = load_model(data_dir / "model_n2.json")
    back = model_from_dict(json.loads(json.dumps(model_to_dict(m))))
    assert model_to_dict(back) == model_to_dict(m)


def test_model_defaults():
    m = model_from_dict({"idio": [{"nu": 0.5, "c_plus": 1, "c_minus": 1, "lambda_plus": 8, "lambda_minus": -4}]})
    assert m.n == 1 and m.strip_shrink == 0.9
    assert float(m.loadings[0][0]) == 0.0


@pytest.mark.parametrize(
    "d",
    [
        {},
        {"idio": []},
        {"idio": [{"nu": 0.5}]},
        {"idio": [{"nu": 0.5, "c_plus": 1, "c_minus": 1, "lambda_plus": 8, "lambda_minus": -4, "sigma": 1}]},
        {"idio": [{"nu": 0.5, "c_plus": 1, "c_minus": 1, "lambda_plus": 8, "lambda_minus": -4}], "extra": 1},
        {"idio": [{"nu": "x", "c_plus": 1, "c_minus": 1, "lambda_plus": 8, "lambda_minus": -4}]},
        {"idio": [{"nu": 0.5, "c_plus": 1, "c_minus": 1, "lambda_plus": 8, "lambda_minus": -4}], "loadings": "a"},
    ],
)
def test_model_dict_errors(d):
    with pytest.raises(ParameterError):
        model_from_dict(d)


def test_market_round_trip(data_dir, market2):
    mk = load_market(data_dir / "market_n2.json")
    assert mk == market2
    assert market_from_dict(market_to_dict(mk)) == mk
    assert market_from_dict({"spot": 100, "strike": 90, "rate": 0, "maturity": 1}).spot == (100.0,)


@pytest.mark.parametrize(
    "d",
    [
        {"spot": [100], "strike": 100, "rate": 0.0},
        {"spot": [100], "strike": 100, "rate": 0.0, "maturity": 1, "vol": 0.2},
        {"spot": ["a"], "strike": 100, "rate": 0.0, "maturity": 1},
    ],
)
def test_market_dict_errors(d):
    with pytest.raises(ParameterError):
        market_from_dict(d)


def test_file_errors(tmp_path):
    with pytest.raises(ParameterError):
        load_model(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParameterError):
        load_model(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ParameterError):
        load_market(bad)


@pytest.fixture(scope="module")
def quote():
    from kobolbasket import FactorModel, KobolParams, MarketSpec

    m = FactorModel.independent([KobolParams(0.5, 1, 1, 8, -4)])
    return price_basket_call(m, MarketSpec((100.0,), 100.0, 0.03, 0.5))


def test_quote_json_round_trip(quote):
    assert quote_from_json(quote_to_json(quote)) == quote


def test_quote_json_non_finite(quote):
    q = replace(quote, budget=replace(quote.budget, tail=math.inf, total=math.inf))
    text = quote_to_json(q)
    assert "Infinity" not in text
    back = quote_from_json(text)
    assert back.budget.tail == math.inf and back == q


def test_quote_json_malformed():
    with pytest.raises(ParameterError):
        quote_from_json('{"value": 1.0}')


def test_csv_layout(quote):
    head = quote_csv_header().split(",")
    row = quote_csv_row(quote).split(",")
    assert len(head) == len(row)
    assert row[0] == fmt(quote.value)
    assert float(row[0]) == pytest.approx(quote.value, rel=1e-11)


def test_fmt_digits():
    assert fmt(1.0 / 3.0) == "0.333333333333"
    assert fmt(123456789012345.0) == "1.23456789012e+14"
