"""``regime-gauge`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 ``cst run`` adopted complexity,
3 data or input error.  Output is deterministic: JSON is key-sorted, floats
use ``repr`` and nothing depends on the clock.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence

from . import TOOL_NAME, __version__
from .datasets import DataError, SimConfig, load_csv, load_matrix
from .deff import estimate_from_data
from .evaluation import DEFAULT_DELTA, Decision, cst, shift_report
from .models import DivergenceError, ModelSpec, Rung, train, train_logistic
from .models.base import _to_jsonable
from .rate_reduction import DEMO_CONFIG, regime_adaptivity_demo
from .regime_index import Scorecard, score_card_summary
from .report import ReportError, load_documents, report_bundle
from .simulation import FIG2_COLUMNS, cst_sweep, fig2_sweep
from .synthesis_stats import FIXTURE_COLUMNS, concordance_table, load_table, reference_rows, rows_to_records, sensitivity
from .viability import BOUNDARY_CAVEAT, PhaseTable, ViabilityInput, phase_points, viability_gap

EXIT_OK, EXIT_USAGE, EXIT_ADOPT, EXIT_DATA = 0, 1, 2, 3

CHALLENGERS = {
    "mlp": Rung.DEEP_MLP,
    "deep_mlp": Rung.DEEP_MLP,
    "shallow_mlp": Rung.SHALLOW_MLP,
    "gbm": Rung.GBM,
    "extended_lr": Rung.EXTENDED_LR,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(kind: type):
    def parse(text: str) -> list:
        try:
            return [kind(t) for t in text.split(",") if t.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list of {kind.__name__}: {text!r}") from None

    return parse


def _clean(obj: Any) -> Any:
    obj = _to_jsonable(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return obj


def _config(args: argparse.Namespace) -> dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output", "format")}


def _envelope(command: str, args: argparse.Namespace, result: Any) -> dict[str, Any]:
    return {"tool": TOOL_NAME, "version": __version__, "command": command, "config": _config(args), "result": result}


def _json_text(doc: Any) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(
    command: str, args: argparse.Namespace, columns: Sequence[str], rows: Sequence[dict[str, Any]], notes: Sequence[str] = ()
) -> str:
    buf = io.StringIO()
    buf.write(f"# {TOOL_NAME} {__version__}\n# command: {command}\n")
    buf.write("# config: " + json.dumps(_clean(_config(args)), sort_keys=True, separators=(",", ":")) + "\n")
    for note in notes:
        buf.write(f"# {note}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row.get(c) is None else repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
    return buf.getvalue()


def _write(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_single(command: str, args: argparse.Namespace, result: Any) -> None:
    if args.format == "csv":
        raise UsageError(f"'{command}' produces a single result; use --format json")
    _write(_json_text(_envelope(command, args, result)), args.output)


def _emit_rows(
    command: str, args: argparse.Namespace, columns: Sequence[str], rows: list[dict[str, Any]], notes: Sequence[str] = ()
) -> None:
    if args.format == "json":
        _write(_json_text(_envelope(command, args, {"columns": list(columns), "rows": rows, "notes": list(notes)})), args.output)
    else:
        _write(_csv_text(command, args, columns, rows, notes), args.output)


# -- subcommands ------------------------------------------------------------


def cmd_ri_score(args: argparse.Namespace) -> int:
    card = Scorecard.load(args.card)
    result = score_card_summary(card, strict_gate=not args.lenient_gate)
    result["indicators"] = card.to_dict()["indicators"]
    _emit_single("ri score", args, result)
    return EXIT_OK


def cmd_deff_estimate(args: argparse.Namespace) -> int:
    if args.env:
        X = load_csv(args.data, args.label_column, args.env_column).subset(args.env).features
    else:
        X, _, _ = load_matrix(args.data, (args.label_column, args.env_column))
    result = estimate_from_data(X, args.methods, args.prior, args.variance_fraction)
    result["n_rows"] = int(X.shape[0])
    if args.domain:
        result["domain"] = args.domain
    _emit_single("deff estimate", args, result)
    return EXIT_OK


def cmd_gap(args: argparse.Namespace) -> int:
    if args.format is None:
        args.format = "csv" if args.action == "phase" else "json"
    if args.action == "phase":
        if not args.domains:
            raise UsageError("gap phase requires --domains <csv>")
        table = _phase_from_csv(args.domains)
        notes = [f"caveat: {BOUNDARY_CAVEAT}"] + [f"skipped row {e['index']}: {e['error']}" for e in table.errors]
        _emit_rows("gap phase", args, PhaseTable.COLUMNS, table.rows, notes)
        return EXIT_OK
    missing = [f"--{k}" for k in ("rho", "n", "deff") if getattr(args, k) is None]
    if missing:
        raise UsageError(f"gap requires {', '.join(missing)}")
    if (args.tau is None) != (args.accrual is None):
        raise UsageError("--tau and --accrual must be given together")
    n = args.n
    if n != int(n):
        raise DataError(f"N must be an integer, got {n}")
    inp = ViabilityInput(args.rho, int(n), args.deff, args.tau, args.accrual)
    result = viability_gap(inp).to_dict()
    if args.domain:
        result["domain"] = args.domain
    _emit_single("gap", args, result)
    return EXIT_OK


def _phase_from_csv(path: str) -> PhaseTable:
    p = Path(path)
    if not p.exists():
        raise DataError(f"no such file: {p}")
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        need = ("name", "rho", "n", "d_eff")
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in need):
            raise DataError(f"{p}: header must contain {', '.join(need)}")
        return phase_points((rec["name"], rec["rho"], rec["n"], rec["d_eff"]) for rec in reader)


def _hyperparams(args: argparse.Namespace, rung: Rung) -> dict[str, Any]:
    hp: dict[str, Any] = {}
    family = rung.family
    keys = {"logistic": ("l2",), "gbm": ("estimators", "depth", "lr"), "mlp": ("layers", "l2", "lr", "epochs", "batch")}
    for key in keys[family]:
        value = getattr(args, key, None)
        if value is not None:
            hp[key] = value
    return hp


def cmd_train(args: argparse.Namespace) -> int:
    rung = Rung(args.rung)
    if rung is Rung.EXPERT_LR and not args.features:
        raise UsageError("expert_lr needs --features")
    data = load_csv(args.data, args.label_column, args.env_column)
    spec = ModelSpec(rung, args.features or None, _hyperparams(args, rung), args.seed)
    model = train(spec, data, args.env)
    doc = model.to_dict()
    doc.update(
        {
            "tool": TOOL_NAME,
            "version": __version__,
            "command": "train",
            "config": _config(args),
            "evaluation": shift_report(model, data).to_dict(),
        }
    )
    if args.format == "csv":
        raise UsageError("'train' writes a JSON model document; use --format json")
    _write(_json_text(doc), args.output)
    return EXIT_OK


def cmd_cst_run(args: argparse.Namespace) -> int:
    data = load_csv(args.data, args.label_column, args.env_column)
    base = train_logistic(data, "A", args.baseline_features, seed=args.seed, rung=Rung.EXPERT_LR)
    rung = CHALLENGERS[args.challenger]
    spec = ModelSpec(rung, args.challenger_features or None, _hyperparams(args, rung), args.seed)
    chal = train(spec, data, "A")
    base_rep = shift_report(base, data, args.bootstrap, args.seed)
    chal_rep = shift_report(chal, data, args.bootstrap, args.seed)
    decision = cst(base_rep, chal_rep, args.delta)
    result = decision.to_dict()
    if args.domain:
        result["domain"] = args.domain
    _emit_single("cst run", args, result)
    return EXIT_ADOPT if decision.decision is Decision.ADOPT_COMPLEXITY else EXIT_OK


def _sim_config(args: argparse.Namespace, base: SimConfig = SimConfig()) -> SimConfig:
    fields = asdict(base)
    for key in ("rho", "seed", "repetitions", "n_per_env", "spurious_strength", "noise_sd", "max_spurious"):
        value = getattr(args, key, None)
        if value is not None:
            fields[key] = value
    config = SimConfig(**fields)
    # echo the resolved generator settings rather than the unset flags
    for key, value in asdict(config).items():
        setattr(args, key, value)
    return config


def cmd_simulate_fig2(args: argparse.Namespace) -> int:
    config = _sim_config(args)
    rows = fig2_sweep(config, args.capacities)
    _emit_rows("simulate fig2", args, FIG2_COLUMNS, rows)
    return EXIT_OK


def cmd_simulate_cst(args: argparse.Namespace) -> int:
    config = _sim_config(args)
    rows = [{k: v for k, v in r.items() if k != "cst"} for r in cst_sweep(config, args.delta)]
    _emit_rows("simulate cst", args, ("repetition", "baseline_delta", "challenger_delta", "margin", "decision"), rows)
    return EXIT_OK


def cmd_synth_stats(args: argparse.Namespace) -> int:
    rows = load_table(args.table) if args.table else reference_rows()
    table = concordance_table(rows)
    result = table.to_dict()
    if args.sensitivity:
        result["sensitivity"] = {
            f"ri>={t:g}": {"concordant": r.overall.successes, "trials": r.overall.trials}
            for t, r in sensitivity(rows, args.sensitivity).items()
        }
    _emit_single("synth stats", args, result)
    return EXIT_OK


def cmd_synth_fixture(args: argparse.Namespace) -> int:
    _emit_rows("synth fixture", args, FIXTURE_COLUMNS, rows_to_records(reference_rows()))
    return EXIT_OK


def cmd_rr_demo(args: argparse.Namespace) -> int:
    config = _sim_config(args, DEMO_CONFIG)
    del args.rho  # the demo sweeps rho itself
    rows = regime_adaptivity_demo(args.rhos, config, args.lam, args.epsilon, args.step, args.steps)
    notes = [f"rho={r['rho']!r}: {e}" for r in rows for e in r["errors"]]
    cols = ("rho", "active_directions_mean", "active_directions_sd", "n_features", "repetitions")
    _emit_rows("rr demo", args, cols, rows, notes)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    _emit_single("report", args, report_bundle(load_documents(args.inputs)))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _common(default_format: str | None) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    shown = default_format or "csv for 'gap phase', else json"
    p.add_argument("--seed", type=int, default=42, help="random seed (default 42)")
    p.add_argument("--format", choices=("json", "csv"), default=default_format, help=f"output format (default {shown})")
    p.add_argument("--output", "-o", metavar="PATH", help="write to PATH instead of stdout")
    return p


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, metavar="CSV")
    p.add_argument("--label-column", default="label")
    p.add_argument("--env-column", default="env")


def _model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("hyperparameters (rung defaults when omitted)")
    g.add_argument("--l2", type=float)
    g.add_argument("--lr", type=float)
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch", type=int)
    g.add_argument("--layers", type=_csv_list(int), metavar="W1,W2")
    g.add_argument("--estimators", type=int)
    g.add_argument("--depth", type=int)


def _sim_args(p: argparse.ArgumentParser, rho: bool = True) -> None:
    if rho:
        p.add_argument("--rho", type=float, required=True)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--n-per-env", type=int)
    p.add_argument("--spurious-strength", type=float)
    p.add_argument("--noise-sd", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=TOOL_NAME, description="Regime diagnostics for model-capacity selection under shift.")
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    js, cs = _common("json"), _common("csv")

    ri = sub.add_parser("ri", help="Regime Index scorecards").add_subparsers(dest="action", metavar="ACTION", required=True)
    p = ri.add_parser("score", parents=[js], help="score a scorecard JSON")
    p.add_argument("--card", required=True, metavar="JSON")
    p.add_argument("--lenient-gate", action="store_true", help="gate Stable only on a full temporal-instability score")
    p.set_defaults(func=cmd_ri_score)

    de = sub.add_parser("deff", help="effective dimensionality").add_subparsers(dest="action", metavar="ACTION", required=True)
    p = de.add_parser("estimate", parents=[js], help="estimate D_eff from a feature CSV")
    p.add_argument("--data", required=True, metavar="CSV")
    p.add_argument("--methods", type=_csv_list(str), default=["pca", "pr", "twonn"])
    p.add_argument("--prior", type=int, help="domain-prior upper bound K")
    p.add_argument("--variance-fraction", type=float, default=0.95)
    p.add_argument("--env", choices=("A", "B", "C"), help="restrict to one environment")
    p.add_argument("--label-column", default="label")
    p.add_argument("--env-column", default="env")
    p.add_argument("--domain")
    p.set_defaults(func=cmd_deff_estimate)

    p = sub.add_parser("gap", parents=[_common(None)], help="viability gap, or 'gap phase' for phase points")
    p.add_argument("action", nargs="?", choices=("phase",))
    p.add_argument("--rho", type=float)
    p.add_argument("--n", type=float)
    p.add_argument("--deff", type=float)
    p.add_argument("--tau", type=float, help="data half-life")
    p.add_argument("--accrual", type=float, help="stable samples accrued per unit time")
    p.add_argument("--domains", metavar="CSV", help="name,rho,n,d_eff rows (gap phase)")
    p.add_argument("--domain")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("train", parents=[js], help="train one rung on environment A")
    _data_args(p)
    p.add_argument("--rung", choices=[r.value for r in Rung], required=True)
    p.add_argument("--features", type=_csv_list(str), metavar="F1,F2")
    p.add_argument("--env", default="A", choices=("A", "B", "C"))
    _model_args(p)
    p.set_defaults(func=cmd_train)

    cst_p = sub.add_parser("cst", help="Compression Superiority Test").add_subparsers(dest="action", metavar="ACTION", required=True)
    p = cst_p.add_parser("run", parents=[js], help="expert LR baseline against a challenger")
    _data_args(p)
    p.add_argument("--baseline-features", type=_csv_list(str), required=True, metavar="F1,F2")
    p.add_argument("--challenger", choices=sorted(CHALLENGERS), default="mlp")
    p.add_argument("--challenger-features", type=_csv_list(str), metavar="F1,F2")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--bootstrap", action="store_true", help="add 95%% bootstrap AUROC intervals")
    p.add_argument("--domain")
    _model_args(p)
    p.set_defaults(func=cmd_cst_run)

    sim = sub.add_parser("simulate", help="synthetic shift simulations").add_subparsers(dest="action", metavar="ACTION", required=True)
    p = sim.add_parser("fig2", parents=[cs], help="robust accuracy against capacity")
    _sim_args(p)
    p.add_argument("--capacities", type=_csv_list(int), default=[0, 1, 2, 4, 8, 16, 32, 64])
    p.set_defaults(func=cmd_simulate_fig2)
    p = sim.add_parser("cst", parents=[cs], help="CST decisions per repetition")
    _sim_args(p)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.set_defaults(func=cmd_simulate_cst)

    syn = sub.add_parser("synth", help="concordance statistics").add_subparsers(dest="action", metavar="ACTION", required=True)
    p = syn.add_parser("stats", parents=[js], help="concordance of tier against winner")
    p.add_argument("--table", metavar="CSV", help="domain,ri_score|ri_tier,winner (default: reference fixture)")
    p.add_argument("--sensitivity", type=_csv_list(float), metavar="T1,T2", help="re-tier at RI >= T")
    p.set_defaults(func=cmd_synth_stats)
    p = syn.add_parser("fixture", parents=[cs], help="print the reference domain table")
    p.set_defaults(func=cmd_synth_fixture)

    rr = sub.add_parser("rr", help="rate reduction").add_subparsers(dest="action", metavar="ACTION", required=True)
    p = rr.add_parser("demo", parents=[cs], help="active directions against stability")
    p.add_argument("--rhos", type=_csv_list(float), default=[0.1, 0.3, 0.5, 0.7, 0.9])
    _sim_args(p, rho=False)
    p.add_argument("--lam", type=float, default=0.02)
    p.add_argument("--epsilon", type=float, default=10.0)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=200)
    p.set_defaults(func=cmd_rr_demo)

    p = sub.add_parser("report", parents=[js], help="merge subcommand outputs into one report")
    p.add_argument("inputs", nargs="+", metavar="JSON")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{TOOL_NAME}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ReportError, DivergenceError, ValueError, OSError) as exc:
        print(f"{TOOL_NAME}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
