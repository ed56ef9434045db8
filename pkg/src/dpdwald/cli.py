"""Command line interface: ``dpdwald <subcommand> ...``.

Every subcommand prints one JSON document on stdout. Exit status is 0 on
success, 2 for input errors (including usage errors) and 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from dpdwald.analyses import DEFAULT_GRID, EXAMPLES, parse_grid, run_example, sweep_first
from dpdwald.datasets import load_dataset
from dpdwald.errors import InputError, NumericError
from dpdwald.estimation import fit_mdpde
from dpdwald.models import get_family
from dpdwald.power import (
    approx_power_simple,
    composite_power_approx,
    contiguous_power_composite,
    contiguous_power_simple,
    required_sample_size,
    sample_size_terms,
)
from dpdwald.simulation import load_scenario, run_scenario
from dpdwald.tuning import select_beta
from dpdwald.wald import Restriction, composite_wald, signed_wald, simple_wald

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _clean(obj):
    """Make ``obj`` strict-JSON safe: numpy to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n")


def _vector(text) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise InputError(f"cannot parse {text!r} as a comma-separated vector") from None


def _component(text):
    return int(text) if str(text).lstrip("-").isdigit() else text


def _family(args):
    opts = {"k_form": args.k_form} if getattr(args, "k_form", None) else {}
    return get_family(args.family, **opts)


def _data(args):
    return load_dataset(args.data).array


def _write_csv(path, header, rows) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow(["" if v is None else v for v in row])
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


# -- subcommands -------------------------------------------------------------


def cmd_fit(args):
    fam = _family(args)
    fit = fit_mdpde(fam, _data(args), args.beta)
    return fit.to_dict()


def cmd_test(args):
    fam = _family(args)
    fit = fit_mdpde(fam, _data(args), args.beta)
    if args.kind == "simple":
        if args.theta0 is None:
            raise InputError("simple test needs --theta0")
        res = simple_wald(fit, _vector(args.theta0))
    elif args.kind == "composite":
        res = composite_wald(fit, Restriction.fix_component(fam, _component(args.component), args.value))
    else:
        res = signed_wald(
            fit,
            args.value,
            _component(args.component),
            args.alternative,
            reference=args.reference,
            ddof=args.ddof,
        )
    out = res.to_dict()
    out["theta_hat"] = fit.theta_hat.tolist()
    return out


def cmd_power(args):
    fam = _family(args)
    theta0 = _vector(args.theta0)
    composite = args.component is not None
    if args.mode == "approx":
        if args.theta_star is None or args.n is None:
            raise InputError("approx mode needs --theta-star and --n")
        ts = _vector(args.theta_star)
        if composite:
            R = Restriction.fix_component(fam, _component(args.component), args.value)
            res = composite_power_approx(ts, R, fam, args.beta, args.n, args.alpha)
        else:
            res = approx_power_simple(fam, theta0, ts, args.beta, args.n, args.alpha, args.variance)
    else:
        if composite:
            R = Restriction.fix_component(fam, _component(args.component), args.value)
            if args.delta is not None:
                res = contiguous_power_composite(R, fam, theta0, args.beta, args.alpha, delta=_vector(args.delta))
            else:
                if args.d is None:
                    raise InputError("contiguous mode needs --d or --delta")
                res = contiguous_power_composite(R, fam, theta0, args.beta, args.alpha, d=_vector(args.d))
        else:
            if args.d is None:
                raise InputError("contiguous mode needs --d")
            res = contiguous_power_simple(_vector(args.d), fam, theta0, args.beta, args.alpha)
    return res.to_dict()


def cmd_samplesize(args):
    fam = _family(args)
    t0, ts = _vector(args.theta0), _vector(args.theta_star)
    n = required_sample_size(
        ts, t0, fam, args.beta, args.alpha, args.power, variance=args.variance, formula=args.formula
    )
    A, B, l = sample_size_terms(fam, t0, ts, args.beta, args.alpha, args.power, args.variance)
    approx = approx_power_simple(fam, t0, ts, args.beta, n, args.alpha, args.variance)
    return {
        "n": n,
        "A": A,
        "B": B,
        "l_value": l,
        "variance": args.variance,
        "formula": args.formula,
        "approx_power_at_n": approx.power,
    }


def cmd_tune(args):
    fam = _family(args)
    grid = parse_grid(args.grid) if args.grid else None
    res = select_beta(fam, _data(args), grid, args.pilot_beta)
    if args.csv:
        _write_csv(args.csv, ["beta", "mse"], zip(res.grid.tolist(), _clean(res.mse_curve)))
    return res.to_dict()


def cmd_simulate(args):
    sc = load_scenario(args.scenario)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replications is not None:
        changes["replications"] = args.replications
    if changes:
        sc = replace(sc, **changes)
    rep = run_scenario(sc, workers=args.workers)
    if args.csv:
        try:
            Path(args.csv).write_text(rep.to_csv(), encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot write {args.csv}: {exc}") from exc
    return rep.to_dict()


def cmd_example(args):
    if args.sweep_first is not None:
        if args.name != "telephone":
            raise InputError("--sweep-first is only defined for the telephone example")
        return sweep_first(args.sweep_first)
    outliers = None
    if args.no_filter:
        outliers = []
    elif args.outliers is not None:
        outliers = [int(v) for v in _vector(args.outliers)]
    run = run_example(args.name, args.beta_grid, outliers, args.data)
    doc = run.to_dict()
    # top-level curves for the full data
    doc["theta_hat"] = doc["full"]["theta_hat"]
    doc["p_value"] = doc["full"]["p_value"]
    if args.csv:
        rows = []
        for k, b in enumerate(run.beta_grid.tolist()):
            for label, part in (("full", run.full), ("filtered", run.filtered)):
                if part is None:
                    continue
                th = part["theta_hat"][k]
                rows.append(
                    [label, b, json.dumps(th), part["p_value"][k], part.get("p_value_greater", [None] * len(run.beta_grid))[k]]
                )
        _write_csv(args.csv, ["data", "beta", "theta_hat", "p_value", "p_value_greater"], rows)
    return doc


# -- parser ------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dpdwald", description="Robust Wald-type tests from minimum DPD estimators.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def family_args(sp, data=True):
        sp.add_argument("--family", required=True, help="exponential | normal | weibull")
        sp.add_argument("--k-form", choices=("paper", "sandwich"), help="Weibull K matrix variant")
        if data:
            sp.add_argument("--data", required=True, help="built-in dataset name or data file")

    sp = sub.add_parser("fit", help="minimum DPD estimate with sandwich matrices")
    family_args(sp)
    sp.add_argument("--beta", type=float, required=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("test", help="simple, composite or signed Wald-type test")
    family_args(sp)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--kind", choices=("simple", "composite", "signed"), default="simple")
    sp.add_argument("--theta0", help="null parameter vector (simple test), comma separated")
    sp.add_argument("--component", default="0", help="tested component (index or name)")
    sp.add_argument("--value", type=float, default=0.0, help="null value of the component")
    sp.add_argument("--alternative", choices=("greater", "less", "two-sided"), default="greater")
    sp.add_argument("--reference", choices=("t", "normal"), default="t")
    sp.add_argument("--ddof", type=int, default=0)
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("power", help="approximate or contiguous power")
    family_args(sp, data=False)
    sp.add_argument("--mode", choices=("approx", "contiguous"), default="approx")
    sp.add_argument("--theta0", required=True, help="null point, comma separated")
    sp.add_argument("--theta-star", help="alternative (approx mode)")
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", help="contiguous direction")
    sp.add_argument("--delta", help="contiguous restriction shift (composite)")
    sp.add_argument("--component", help="composite null: component fixed at --value")
    sp.add_argument("--value", type=float, default=0.0)
    sp.add_argument("--beta", type=float, default=0.0)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--variance", choices=("delta", "paper"), default="delta")
    sp.set_defaults(func=cmd_power)

    sp = sub.add_parser("samplesize", help="sample size for a target approximate power")
    family_args(sp, data=False)
    sp.add_argument("--theta0", required=True)
    sp.add_argument("--theta-star", required=True)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--power", type=float, default=0.8)
    sp.add_argument("--beta", type=float, default=0.0)
    sp.add_argument("--variance", choices=("delta", "paper"), default="delta")
    sp.add_argument("--formula", choices=("exact", "printed"), default="exact")
    sp.set_defaults(func=cmd_samplesize)

    sp = sub.add_parser("tune", help="data-driven tuning parameter")
    family_args(sp)
    sp.add_argument("--grid", help="start:step:stop (default 0:0.01:1)")
    sp.add_argument("--pilot-beta", type=float, default=0.5)
    sp.add_argument("--csv", help="write beta,mse rows here")
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("simulate", help="Monte Carlo level/power study")
    sp.add_argument("scenario", help="scenario JSON file")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--replications", type=int)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--csv", help="write beta,n,rejection_rate,mc_se,failures rows here")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("example", help="analyses of the embedded datasets")
    sp.add_argument("name", choices=sorted(EXAMPLES))
    sp.add_argument("--beta-grid", default=DEFAULT_GRID)
    sp.add_argument("--outliers", help="0-based indices to drop, comma separated")
    sp.add_argument("--no-filter", action="store_true", help="skip the filtered analysis")
    sp.add_argument("--data", help="data file (required for aircon)")
    sp.add_argument("--sweep-first", help="telephone only: start:step:stop values for the first observation")
    sp.add_argument("--csv", help="write per-beta rows here")
    sp.set_defaults(func=cmd_example)
    return p


_NEGATIVE = re.compile(r"^-\.?\d")


def _glue_negative_values(argv):
    """Rewrite ``--opt -1,2`` as ``--opt=-1,2`` so argparse does not read a flag."""
    out = []
    for tok in argv:
        if out and _NEGATIVE.match(tok) and out[-1].startswith("--") and "=" not in out[-1]:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_glue_negative_values(argv))
    try:
        doc = args.func(args)
    except InputError as exc:
        print(f"dpdwald: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericError, ArithmeticError) as exc:
        print(f"dpdwald: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(doc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
