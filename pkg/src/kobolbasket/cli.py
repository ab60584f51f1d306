"""Command-line front end.

Exit codes: 0 success, 1 bad input (missing file, parse or parameter error),
2 infeasible model or domain violation, 3 resource cap exceeded,
4 accuracy failure (including a failed ``validate`` run).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import KobolError, ParameterError
from .io import fmt, load_market, load_model, quote_csv_header, quote_csv_row, quote_to_json
from .kobol import analytic_tube
from .lattice import (
    certify_period,
    density_error_bound,
    density_table,
    eval_density,
    lattice_density,
    majorant_MT,
    select_period,
    sign_majorant,
)
from .pricer import PriceQuote, PricingControl, price_basket_call
from .sparse import (
    DEFAULT_CAP,
    build_ball,
    cardinality_estimate,
    enumerate_indices,
    kappa_n,
    radius_for_budget,
)

EXIT_OK = 0
EXIT_VALIDATION = 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 means "infeasible" here
    def error(self, message):
        raise ParameterError(f"usage: {message}")


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}")
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v

    return conv


def _vector(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad vector {text!r}")


def _accuracy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps-alias", type=_positive(float), default=1e-8)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--terms", "-M", type=_positive(float), help="term budget M")
    g.add_argument("--radius", "-R", type=_positive(float), help="truncation radius R (> 1)")
    p.add_argument("--cap", type=_positive(float), default=DEFAULT_CAP, help="max index-set size")


def _output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--out", help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kobolbasket", description="Lattice-Fourier basket/spread pricing under KoBoL factor models.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, help_ in (("price", "price a basket/spread call"), ("budget", "price and print the error budget")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--model", required=True)
        p.add_argument("--market", required=True)
        _accuracy_flags(p)
        p.add_argument("--damping", type=_vector, help="contour shift, e.g. '-2.5,0.5'")
        p.add_argument("--threads", type=_positive(int))
        _output_flags(p)

    p = sub.add_parser("density", help="tabulate the lattice density on a grid")
    p.add_argument("--model", required=True)
    p.add_argument("--market", help="maturity is read from here unless --maturity is given")
    p.add_argument("--maturity", "-T", type=_positive(float))
    _accuracy_flags(p)
    p.add_argument("--grid", action="append", required=True, help="lo:hi:num, one per coordinate (or one for all)")
    p.add_argument("--p-norm", type=_positive(float), default=math.inf)
    p.add_argument("--threads", type=_positive(int))
    _output_flags(p)

    p = sub.add_parser("indexset", help="build the frequency set and report its size")
    p.add_argument("--model", required=True)
    p.add_argument("--market")
    p.add_argument("--maturity", "-T", type=_positive(float))
    _accuracy_flags(p)
    p.add_argument("--period", "-P", type=int, help="period (default: certified for --eps-alias)")
    p.add_argument("--export", help="save the indices to this file")
    _output_flags(p)

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.add_argument("--scope", choices=("gamma", "quick", "full"), default="quick")
    _output_flags(p)
    return ap


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    try:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    except OSError as exc:
        raise ParameterError(f"cannot write {out}: {exc}") from exc


def _control(args) -> PricingControl:
    return PricingControl(
        eps_alias=args.eps_alias,
        M=args.terms,
        R=args.radius,
        damping=getattr(args, "damping", None),
        cap=args.cap,
        threads=getattr(args, "threads", None),
    )


def _maturity(args) -> float:
    if args.maturity is not None:
        return args.maturity
    if args.market is None:
        raise ParameterError("give --maturity or --market")
    return load_market(args.market).maturity


def _radius(args, model, T) -> float:
    if args.radius is not None:
        if not args.radius > 1:
            raise ParameterError("R must exceed 1")
        return args.radius
    if args.terms is not None:
        return radius_for_budget(args.terms, model, T)
    return math.exp(10.0)


def _table(rows: list[tuple[str, str]]) -> str:
    w = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{w}}  {v}" for k, v in rows)


def _quote_table(q: PriceQuote, budget_only: bool = False) -> str:
    b, d = q.budget, q.diagnostics
    rows = [] if budget_only else [("value", fmt(q.value)), ("nonneg", str(q.nonneg))]
    rows += [
        ("alias", fmt(b.alias)),
        ("truncation", fmt(b.truncation)),
        ("tail", fmt(b.tail)),
        ("total", fmt(b.total)),
        ("L_eps", fmt(b.L_eps)),
        ("truncation_asymptotic", fmt(b.truncation_asymptotic)),
    ]
    if not budget_only:
        rows += [
            ("imag_residual", fmt(q.raw_complex_residual)),
            ("P", str(d.P)),
            ("R", fmt(d.R)),
            ("M", str(d.M)),
            ("eps", " ".join(fmt(e) for e in d.eps)),
            ("M_T", fmt(d.M_T)),
            ("M_star", fmt(d.M_star)),
            ("tube", f"({fmt(d.tube[0])}, {fmt(d.tube[1])})"),
            ("runtime_s", fmt(d.runtime)),
        ]
    return _table(rows)


def cmd_price(args, budget_only: bool = False) -> int:
    model = load_model(args.model)
    market = load_market(args.market)
    q = price_basket_call(model, market, _control(args))
    if args.format == "json":
        text = quote_to_json(q)
    elif args.format == "csv":
        text = quote_csv_header() + "\n" + quote_csv_row(q)
    else:
        text = _quote_table(q, budget_only)
    _emit(text, args.out)
    return EXIT_OK


def _grid(specs: list[str], n: int) -> np.ndarray:
    if len(specs) == 1:
        specs = specs * n
    if len(specs) != n:
        raise ParameterError(f"need 1 or {n} --grid specs, got {len(specs)}")
    axes = []
    for s in specs:
        try:
            lo, hi, num = s.split(":")
            axes.append(np.linspace(float(lo), float(hi), int(num)))
        except ValueError as exc:
            raise ParameterError(f"bad grid spec {s!r} (want lo:hi:num)") from exc
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def cmd_density(args) -> int:
    model = load_model(args.model)
    T = _maturity(args)
    R = _radius(args, model, T)
    approx, budget = lattice_density(model, T, args.eps_alias, R, cap=args.cap)
    pts = _grid(args.grid, model.n)
    bound = density_error_bound(budget, args.p_norm)
    if args.format == "json":
        re, im = eval_density(approx, pts, return_imag=True)
        rec = {
            "P": budget.P,
            "p_norm": repr(args.p_norm) if math.isinf(args.p_norm) else args.p_norm,
            "alias_bound": bound,
            "truncation_bound": approx.truncation,
            "terms": len(approx.indices),
            "points": pts.tolist(),
            "density": np.atleast_1d(re).tolist(),
            "imag_residual": np.atleast_1d(im).tolist(),
        }
        text = json.dumps(rec, indent=2)
    else:
        head = (
            f"# P={budget.P} terms={len(approx.indices)} p={fmt(args.p_norm)} "
            f"alias_bound={fmt(bound)} truncation_bound={fmt(approx.truncation)}\n"
        )
        text = head + density_table(approx, pts)
    _emit(text, args.out)
    return EXIT_OK


def cmd_indexset(args) -> int:
    model = load_model(args.model)
    T = _maturity(args)
    R = _radius(args, model, T)
    if args.period is not None:
        if args.period < 1:
            raise ParameterError("period must be >= 1")
        P = args.period
    else:
        tube = analytic_tube(model)
        a = np.full(model.n, tube.symmetric)
        P = select_period(majorant_MT(model, tube, T), a, args.eps_alias)
        P = certify_period(sign_majorant(model, T, a), a, args.eps_alias, P)
    ball = build_ball(model, T, R, P)
    idx = enumerate_indices(ball, args.cap)
    if args.export:
        try:
            idx.save(args.export)
        except OSError as exc:
            raise ParameterError(f"cannot write {args.export}: {exc}") from exc
    M_nom = cardinality_estimate(model, T, R)
    rec = {
        "n": model.n,
        "P": P,
        "R": R,
        "ln_R": math.log(R),
        "count": len(idx),
        "predicted_count": ball.predicted_count(),
        "kappa_n": kappa_n(model, T),
        "M_nominal": M_nom,
        "R_from_M": radius_for_budget(M_nom, model, T),
    }
    if args.format == "json":
        text = json.dumps(rec, indent=2)
    elif args.format == "csv":
        text = ",".join(rec) + "\n" + ",".join(fmt(v) if isinstance(v, float) else str(v) for v in rec.values())
    else:
        text = _table([(k, fmt(v) if isinstance(v, float) else str(v)) for k, v in rec.items()])
    _emit(text, args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validation import run_suite

    results = run_suite(args.scope)
    if args.format == "json":
        text = json.dumps(
            [
                {"name": r.name, "passed": r.passed, "tolerance": r.tolerance, "detail": r.detail, "runtime": r.runtime}
                for r in results
            ],
            indent=2,
        )
    elif args.format == "csv":
        lines = ["name,passed,tolerance,detail,runtime"]
        for r in results:
            lines.append(",".join(json.dumps(str(x)) for x in (r.name, r.passed, r.tolerance, r.detail)) + f",{r.runtime:.3f}")
        text = "\n".join(lines)
    else:
        text = "\n".join(r.line() for r in results)
        text += f"\n{sum(r.passed for r in results)}/{len(results)} passed"
    _emit(text, args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


_COMMANDS = {
    "price": cmd_price,
    "budget": lambda a: cmd_price(a, budget_only=True),
    "density": cmd_density,
    "indexset": cmd_indexset,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except KobolError as exc:
        print(f"kobolbasket: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
