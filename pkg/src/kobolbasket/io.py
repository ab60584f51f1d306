"""JSON model/market files and PriceQuote records.

Model file keys mirror the dataclass fields::

    {"idio": [{"nu": 0.5, "c_plus": 1, "c_minus": 1,
               "lambda_plus": 8, "lambda_minus": -4, "mu": 0.0}],
     "common": [...],            # optional, defaults to inert copies
     "loadings": [[0.0]],        # optional, defaults to zeros
     "strip_shrink": 0.9}        # optional

Market file: ``{"spot": [100], "strike": 100, "rate": 0.03, "maturity": 0.5}``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ParameterError
from .kobol import FactorModel, KobolParams
from .pricer import Diagnostics, ErrorBudget, MarketSpec, PriceQuote

__all__ = [
    "load_json",
    "model_from_dict",
    "model_to_dict",
    "market_from_dict",
    "market_to_dict",
    "load_model",
    "load_market",
    "quote_to_dict",
    "quote_from_dict",
    "quote_to_json",
    "quote_from_json",
    "quote_csv_header",
    "quote_csv_row",
    "fmt",
]

_PARAM_KEYS = {f.name for f in fields(KobolParams)}


def fmt(x: float) -> str:
    """Twelve significant digits."""
    return f"{x:.12g}"


def load_json(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParameterError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ParameterError(f"{path}: top level must be an object")
    return data


def _params(block: Any, where: str) -> KobolParams:
    if not isinstance(block, dict):
        raise ParameterError(f"{where}: expected an object")
    unknown = set(block) - _PARAM_KEYS
    if unknown:
        raise ParameterError(f"{where}: unknown keys {sorted(unknown)}")
    missing = {"nu", "c_plus", "c_minus", "lambda_plus", "lambda_minus"} - set(block)
    if missing:
        raise ParameterError(f"{where}: missing keys {sorted(missing)}")
    try:
        return KobolParams(**{k: float(v) for k, v in block.items()})
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"{where}: {exc}") from exc


def model_from_dict(d: dict) -> FactorModel:
    allowed = {"idio", "common", "loadings", "strip_shrink"}
    unknown = set(d) - allowed
    if unknown:
        raise ParameterError(f"model: unknown keys {sorted(unknown)}")
    if "idio" not in d or not isinstance(d["idio"], list) or not d["idio"]:
        raise ParameterError("model: 'idio' must be a nonempty list")
    idio = [_params(b, f"idio[{i}]") for i, b in enumerate(d["idio"])]
    n = len(idio)
    common = [_params(b, f"common[{i}]") for i, b in enumerate(d.get("common", []))] or list(idio)
    loadings = d.get("loadings", [[0.0] * n for _ in range(n)])
    try:
        A = np.asarray(loadings, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"model: bad loadings ({exc})") from exc
    return FactorModel(tuple(idio), tuple(common), A, float(d.get("strip_shrink", 0.9)))


def model_to_dict(model: FactorModel) -> dict:
    return {
        "idio": [asdict(p) for p in model.idio],
        "common": [asdict(p) for p in model.common],
        "loadings": [list(r) for r in model.loadings],
        "strip_shrink": model.strip_shrink,
    }


def market_from_dict(d: dict) -> MarketSpec:
    keys = {"spot", "strike", "rate", "maturity"}
    unknown = set(d) - keys
    missing = keys - set(d)
    if unknown or missing:
        raise ParameterError(f"market: unknown keys {sorted(unknown)}, missing {sorted(missing)}")
    spot = d["spot"] if isinstance(d["spot"], list) else [d["spot"]]
    try:
        return MarketSpec(tuple(float(s) for s in spot), float(d["strike"]), float(d["rate"]), float(d["maturity"]))
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"market: {exc}") from exc


def market_to_dict(market: MarketSpec) -> dict:
    return {"spot": list(market.spot), "strike": market.strike, "rate": market.rate, "maturity": market.maturity}


def load_model(path: str | Path) -> FactorModel:
    return model_from_dict(load_json(path))


def load_market(path: str | Path) -> MarketSpec:
    return market_from_dict(load_json(path))


def _num(x: float) -> float | str:
    # JSON has no inf/nan literals
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def quote_to_dict(q: PriceQuote) -> dict:
    b = {k: _num(v) for k, v in asdict(q.budget).items()}
    dg = asdict(q.diagnostics)
    dg["eps"] = list(dg["eps"])
    dg["tube"] = list(dg["tube"])
    return {
        "value": q.value,
        "raw_complex_residual": q.raw_complex_residual,
        "nonneg": q.nonneg,
        "budget": b,
        "diagnostics": dg,
    }


def quote_from_dict(d: dict) -> PriceQuote:
    try:
        b = ErrorBudget(**{k: float(v) for k, v in d["budget"].items()})
        dg = dict(d["diagnostics"])
        dg["eps"] = tuple(float(x) for x in dg["eps"])
        dg["tube"] = tuple(float(x) for x in dg["tube"])
        dg["P"] = int(dg["P"])
        dg["M"] = int(dg["M"])
        return PriceQuote(float(d["value"]), float(d["raw_complex_residual"]), b, Diagnostics(**dg), bool(d["nonneg"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"malformed quote record: {exc}") from exc


def quote_to_json(q: PriceQuote) -> str:
    """Lossless record (shortest round-trip float repr)."""
    return json.dumps(quote_to_dict(q), indent=2)


def quote_from_json(text: str) -> PriceQuote:
    return quote_from_dict(json.loads(text))


_CSV_COLS = [
    "value",
    "raw_complex_residual",
    "alias",
    "truncation",
    "tail",
    "total",
    "L_eps",
    "P",
    "R",
    "M",
    "eps",
    "runtime",
]


def quote_csv_header() -> str:
    return ",".join(_CSV_COLS)


def quote_csv_row(q: PriceQuote) -> str:
    b, dg = q.budget, q.diagnostics
    vals = [
        fmt(q.value),
        fmt(q.raw_complex_residual),
        fmt(b.alias),
        fmt(b.truncation),
        fmt(b.tail),
        fmt(b.total),
        fmt(b.L_eps),
        str(dg.P),
        fmt(dg.R),
        str(dg.M),
        " ".join(fmt(e) for e in dg.eps),
        fmt(dg.runtime),
    ]
    buf = io.StringIO()
    csv.writer(buf, lineterminator="").writerow(vals)
    return buf.getvalue()
