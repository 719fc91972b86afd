"""Command-line interface: ``xplain fit|explain|metrics|recommend|demo``.

Artifacts are JSON. Diagnostics go to standard error as one line; the exit
status is 0 on success, 2 for usage errors, 3 for data errors and 4 for
algorithm failures. ``XPLAIN_SEED`` overrides ``--seed`` when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import QuestionKind, recommend_explainers
from .data import TabularDataset, load_csv, standardize
from .errors import DataError, SchemaViolation, UsageError, XplainError
from .explanation import (Explanation, FeatureAttribution, dumps, parse_explanation,
                          serialize_explanation)
from .models import ScaledModel, model_from_dict, train_logistic, train_mlp, train_tree

SEED_ENV = "XPLAIN_SEED"

METHODS = {
    "brcg": "BRCG", "glrm": "GLRM", "ted": "TED", "protodash": "ProtoDash",
    "lime": "LIME", "kshap": "KernelSHAP", "kernelshap": "KernelSHAP", "shap": "KernelSHAP",
    "cem": "CEM", "profweight": "ProfWeight",
}

# allowed --param keys per method, with their types
PARAMS = {
    "BRCG": {"lambda0": float, "lambda1": float, "cnf": bool, "max_degree": int,
             "beam_width": int, "max_clauses": int, "max_thresholds": int},
    "GLRM": {"link": str, "lam": float, "max_degree": int, "max_terms": int,
             "max_thresholds": int},
    "TED": {"explanation_column": str, "base": str, "depth": int},
    "ProtoDash": {"m": int, "sigma": str},
    "LIME": {"k": int, "nsamples": int, "kernel_width": float, "class": int},
    "KernelSHAP": {"nsamples": int, "class": int},
    "CEM": {"mode": str, "kappa": float, "beta": float, "c0": float, "c_steps": int,
            "max_iter": int, "direction": str},
    "ProfWeight": {"max_depth": int, "margin": float, "l2": float},
}

NEEDS_MODEL = {"LIME", "KernelSHAP", "CEM", "ProfWeight"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def parse_params(method: str, items: Sequence[str]) -> dict:
    """Turn ``key=value`` strings into typed parameters for ``method``."""
    allowed = PARAMS[method]
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"parameter {item!r} is not key=value")
        key, value = item.split("=", 1)
        if key not in allowed:
            raise UsageError(f"unknown parameter {key!r} for {method}")
        typ = allowed[key]
        try:
            out[key] = _parse_bool(value) if typ is bool else typ(value)
        except ValueError:
            raise UsageError(f"parameter {key!r} expects {typ.__name__}, got {value!r}") from None
    return out


def parse_schema(items: Sequence[str]) -> dict:
    schema = {}
    for item in items or ():
        name, sep, kind = item.partition("=")
        if not sep:
            raise UsageError(f"schema entry {item!r} is not column=kind")
        schema[name] = kind
    return schema


def effective_seed(seed: int) -> int:
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return int(seed)
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _write(path: Optional[str], text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load(args, need_labels=True) -> TabularDataset:
    ds = load_csv(args.data, parse_schema(args.schema), args.label)
    if need_labels and ds.labels is None:
        raise DataError("this command needs a label column")
    return ds


def _load_model(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"model file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise SchemaViolation("/", f"model file is not JSON: {e}") from None
    return model_from_dict(doc)


def _instance(ds: TabularDataset, index: Optional[int]) -> np.ndarray:
    if index is None:
        raise UsageError("--instance is required for this method")
    if not 0 <= index < ds.n_rows:
        raise UsageError(f"--instance {index} out of range [0, {ds.n_rows})")
    return ds.values[index]


# -- subcommands -----------------------------------------------------------------

def cmd_fit(args) -> int:
    seed = effective_seed(args.seed)
    ds = _load(args)
    scaler = None
    X = ds.values
    if args.model_type != "tree" and not args.no_standardize:
        scaler, scaled = standardize(ds)
        X = scaled.values
    y = ds.labels
    if args.model_type == "logistic":
        model = train_logistic(X, y, l2=args.l2, seed=seed)
    elif args.model_type == "mlp":
        hidden = [int(h) for h in args.hidden.split(",") if h]
        model = train_mlp(X, y, hidden=hidden, epochs=args.epochs, lr=args.lr,
                          batch_size=args.batch_size, seed=seed)
    else:
        model = train_tree(X, y, max_depth=args.depth)
    if scaler is not None:
        model = ScaledModel(model, scaler)
    _write(args.out, dumps(model.to_dict()))
    return 0


def _explain(method: str, params: dict, ds: TabularDataset, model, index, seed) -> Explanation:
    from .core import ExplainerKind, make_explainer

    names = list(ds.feature_names)
    if method == "BRCG":
        return make_explainer(ExplainerKind.BRCG, seed=seed, **params).fit(ds).explain()
    if method == "GLRM":
        return make_explainer(ExplainerKind.GLRM, **params).fit(ds).explain()
    if method == "TED":
        col = params.pop("explanation_column", None)
        if col is None or col not in names:
            raise UsageError("ted needs --param explanation_column=<feature column>")
        j = names.index(col)
        keep = [k for k in range(ds.n_features) if k != j]
        e = ds.values[:, j].astype(np.int64)
        ted = make_explainer(ExplainerKind.TED, **params).fit(ds.values[:, keep], ds.labels, e)
        return ted.explain(_instance(ds, index)[keep])
    if method == "ProtoDash":
        scaler, z = standardize(ds)
        sigma = params.get("sigma", "auto")
        sigma = sigma if sigma == "auto" else float(sigma)
        pd = make_explainer(ExplainerKind.ProtoDash, m=params.get("m", 5), sigma=sigma)
        pd.fit(z.values)
        target = None if index is None else scaler.transform(_instance(ds, index))[None, :]
        return pd.explain(target)
    if method == "ProfWeight":
        ex = make_explainer(ExplainerKind.ProfWeight, model, seed=seed, **params)
        return ex.fit(ds.values, ds.labels).explain()
    x = _instance(ds, index)
    if method == "KernelSHAP":
        cls = params.pop("class", None)
        ex = make_explainer(ExplainerKind.KernelSHAP, model, seed=seed, feature_names=names,
                            **params).fit(ds.values)
        return ex.explain_instance(x, cls)
    if method == "LIME":
        cls = params.pop("class", None)
        ex = make_explainer(ExplainerKind.LIME, model, seed=seed, feature_names=names,
                            **params).fit(ds.values)
        return ex.explain_instance(x, cls)
    if method == "CEM":
        mode = params.pop("mode", "PN").upper()
        box = (ds.values.min(axis=0), ds.values.max(axis=0))
        ex = make_explainer(ExplainerKind.CEM, model, feature_box=box, seed=seed,
                            feature_names=names, **params).fit(ds.values)
        return ex.explain_instance(x, mode)
    raise UsageError(f"unknown method {method!r}")


def ascii_bars(names, values, width: int = 30) -> str:
    """Horizontal bars centred on zero, one line per feature."""
    values = np.asarray(values, dtype=float)
    top = float(np.max(np.abs(values))) if len(values) else 0.0
    label_w = max((len(n) for n in names), default=0)
    lines = []
    for name, v in zip(names, values):
        n = 0 if top == 0 else int(round(abs(v) / top * width))
        left = " " * (width - n) + "#" * n if v < 0 else " " * width
        right = "#" * n if v > 0 else ""
        lines.append(f"{name:>{label_w}} {left}|{right:<{width}} {v:+.4g}")
    return "\n".join(lines) + "\n"


def cmd_explain(args) -> int:
    method = METHODS.get(args.method.lower())
    if method is None:
        raise UsageError(f"unknown method {args.method!r}")
    params = parse_params(method, args.param)
    seed = effective_seed(args.seed)
    if method in NEEDS_MODEL and not args.model:
        raise UsageError(f"{args.method} needs --model")
    ds = _load(args, need_labels=method in ("BRCG", "GLRM", "TED", "ProfWeight"))
    model = _load_model(args.model) if args.model else None
    expl = _explain(method, params, ds, model, args.instance, seed)
    _write(args.out, serialize_explanation(expl))
    if args.ascii_plot and isinstance(expl.payload, FeatureAttribution):
        sys.stdout.write(ascii_bars(expl.payload.feature_names, expl.payload.values))
    return 0


def cmd_metrics(args) -> int:
    from .metrics import faithfulness, monotonicity

    try:
        text = Path(args.explanation).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"explanation file not found: {args.explanation}") from None
    expl = parse_explanation(text)
    if not isinstance(expl.payload, FeatureAttribution):
        raise UsageError(f"metrics need a feature_attribution, got {expl.kind}")
    ds = _load(args, need_labels=False)
    model = _load_model(args.model)
    x = _instance(ds, args.instance)
    attr = expl.payload
    baseline = attr.baseline if attr.baseline is not None else ds.values.mean(axis=0)
    fns = {"faithfulness": faithfulness, "monotonicity": monotonicity}
    chosen = list(fns) if args.metric == "all" else [args.metric]
    results = [fns[name](model, x, attr, baseline).to_dict() for name in chosen]
    doc = results[0] if len(results) == 1 else results
    _write(args.out, json.dumps(doc, indent=2, allow_nan=False) + "\n")
    return 0


def cmd_recommend(args) -> int:
    try:
        question = QuestionKind.parse(args.question)
    except ValueError as e:
        raise UsageError(str(e)) from None
    for kind in recommend_explainers(question):
        print(kind.label)
    return 0


def cmd_demo(args) -> int:
    from .demo import run_demo

    seed = effective_seed(args.seed)
    start = time.perf_counter()
    paths = run_demo(Path(args.out), seed=seed, heloc=args.heloc, label=args.label)
    for persona, path in paths.items():
        print(f"{persona}: {path}")
    sys.stderr.write(f"demo finished in {time.perf_counter() - start:.1f}s\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="xplain", description="Explainability toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, data=True):
        sp.add_argument("--seed", type=int, default=0)
        if data:
            sp.add_argument("--data", required=True, help="CSV file with a header row")
            sp.add_argument("--label", help="label column (default: last column)")
            sp.add_argument("--schema", action="append", default=[], metavar="COL=KIND",
                            help="column kind: numeric, categorical or binary")

    f = sub.add_parser("fit", help="train a built-in model and write its JSON")
    common(f)
    f.add_argument("--model-type", choices=["logistic", "mlp", "tree"], default="logistic")
    f.add_argument("--hidden", default="16", help="comma-separated MLP widths")
    f.add_argument("--epochs", type=int, default=200)
    f.add_argument("--lr", type=float, default=0.1)
    f.add_argument("--batch-size", type=int, default=32)
    f.add_argument("--l2", type=float, default=1e-4)
    f.add_argument("--depth", type=int, default=3)
    f.add_argument("--no-standardize", action="store_true")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("explain", help="run an explainer and write an Explanation JSON")
    common(e)
    e.add_argument("--method", required=True)
    e.add_argument("--model")
    e.add_argument("--instance", type=int)
    e.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    e.add_argument("--ascii-plot", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_explain)

    m = sub.add_parser("metrics", help="score a stored feature attribution")
    common(m)
    m.add_argument("--explanation", required=True)
    m.add_argument("--model", required=True)
    m.add_argument("--instance", type=int, required=True)
    m.add_argument("--metric", choices=["faithfulness", "monotonicity", "all"], default="all")
    m.add_argument("--out")
    m.set_defaults(func=cmd_metrics)

    r = sub.add_parser("recommend", help="print the explainers suited to a question")
    r.add_argument("--question", required=True, help="Q1, Q2, Q3 or Q4")
    r.set_defaults(func=cmd_recommend)

    d = sub.add_parser("demo", help="three-persona walkthrough on a synthetic credit dataset")
    common(d, data=False)
    d.add_argument("--out", default="xplain-demo")
    d.add_argument("--heloc", help="optional HELOC-format CSV to use instead")
    d.add_argument("--label", default="RiskPerformance")
    d.set_defaults(func=cmd_demo)
    return p


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: fit, explain, metrics, recommend, demo")
        return args.func(args)
    except XplainError as e:
        sys.stderr.write(f"xplain: error: {e}\n")
        return e.exit_code
    except FileNotFoundError as e:
        sys.stderr.write(f"xplain: error: {e.strerror}: {e.filename}\n")
        return UsageError.exit_code
    except SystemExit as e:             # --help
        return int(e.code or 0)


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
