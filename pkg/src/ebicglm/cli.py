"""Command-line interface: fit, select, simulate, cv-links, diagnose.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Every output-producing run writes a ``manifest.json`` that reproduces it
bit for bit via ``--config manifest.json`` (single- or multi-threaded).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ebic import ebic_score, resolve_gamma
from .errors import DataError, EbicGlmError, InvalidArgs, UnsupportedPair
from .glm import Dataset, ModelIndex, c6_diagnostics, fit_mle
from .links import parse_link_family
from .select import SelectConfig, select_pipeline
from .simgen import design_for, generate_replicate
from .experiments import cv_select_link, run_simulation_batch

THREADS_ENV = "EBICGLM_THREADS"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the contract wants 1
    def error(self, message):
        raise _UsageError(message)


def _fmt(x) -> str:
    if isinstance(x, float):
        return "NA" if not np.isfinite(x) else f"{x:.6f}"
    return str(x)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise _UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _merge_config_file(args) -> None:
    """Values from --config override flags (flags override defaults)."""
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {args.config}: {exc}") from None
    params = payload.get("params", payload)
    for key, value in params.items():
        attr = key.replace("-", "_")
        if attr in ("command", "out", "config", "threads"):
            continue
        if not hasattr(args, attr):
            raise _UsageError(f"unknown config key {key!r} in {args.config}")
        setattr(args, attr, value)


def _manifest(args, command: str, fields: tuple) -> dict:
    return {
        "tool": "ebicglm",
        "version": __version__,
        "command": command,
        "params": {f: getattr(args, f) for f in fields},
    }


def _write_out(out_dir: str, files: dict, manifest: dict | None) -> None:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        (path / name).write_text(content, encoding="utf-8")
    if manifest is not None:
        (path / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _select_config(args) -> SelectConfig:
    kwargs = {}
    if getattr(args, "gamma", None):
        kwargs["gammas"] = tuple(args.gamma)
    if getattr(args, "max_steps", None) is not None:
        kwargs["max_steps"] = args.max_steps
    for attr, key in (
        ("screen_threshold", "screen_threshold"),
        ("screen_keep", "screen_keep"),
        ("k_multiplier", "k_multiplier"),
    ):
        if getattr(args, attr, None) is not None:
            kwargs[key] = getattr(args, attr)
    if getattr(args, "path_per_gamma", False):
        kwargs["path_per_gamma"] = True
    if getattr(args, "no_intercept", False):
        kwargs["include_intercept"] = False
    return SelectConfig(**kwargs)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_fit(args) -> int:
    data = Dataset.from_csv(args.input)
    lf = parse_link_family(args.link, args.family)
    data.validate_for_family(lf.family)
    if args.features:
        idx = tuple(int(t) - 1 for t in args.features.split(","))  # 1-based in
    else:
        if data.p > data.n - 2:
            raise _UsageError(
                f"--features is required when p={data.p} exceeds n-2={data.n - 2}"
            )
        idx = tuple(range(data.p))
    model = ModelIndex(idx, include_intercept=not args.no_intercept)
    fit = fit_mle(lf, data, model)
    gamma = resolve_gamma(args.gamma, data.n, data.p)
    sc = ebic_score(fit, model, data.n, data.p, gamma)

    lines = ["term\tcoefficient"]
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.p))
    off = 0
    if model.include_intercept:
        lines.append(f"(intercept)\t{_fmt(float(fit.beta[0]))}")
        off = 1
    for pos, j in enumerate(model.indices):
        lines.append(f"{names[j]}\t{_fmt(float(fit.beta[off + pos]))}")
    lines += [
        f"log_lik\t{_fmt(fit.log_lik)}",
        f"ebic\t{_fmt(sc.ebic)}",
        f"gamma\t{_fmt(gamma)}",
        f"converged\t{fit.converged}",
        f"quasi_separated\t{fit.quasi_separated}",
    ]
    table = "\n".join(lines) + "\n"
    sys.stdout.write(table)
    if args.out:
        fields = ("input", "link", "family", "features", "gamma", "no_intercept")
        _write_out(args.out, {"fit.tsv": table}, _manifest(args, "fit", fields))
    return 0


def _cmd_select(args) -> int:
    data = Dataset.from_csv(args.input)
    lf = parse_link_family(args.link, args.family)
    data.validate_for_family(lf.family)
    config = _select_config(args)
    report = select_pipeline(lf, data, config)

    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.p))
    head = ["step", "feature", "name", "log_lik"]
    head += [f"ebic_{spec}" for spec in report.gamma_specs]
    lines = ["\t".join(head)]
    null_row = ["0", "-", "(null)", _fmt(report.path.null_fit.log_lik)]
    null_row += [_fmt(s.ebic) for s in report.path.null_scores]
    lines.append("\t".join(null_row))
    for i, step in enumerate(report.path.steps):
        row = [str(i + 1), str(step.feature + 1), names[step.feature], _fmt(step.fit.log_lik)]
        row += [_fmt(s.ebic) for s in step.scores]
        lines.append("\t".join(row))
    path_tsv = "\n".join(lines) + "\n"

    chosen = ["gamma_spec\tgamma\tsize\tfeatures\tfeature_names\tlog_lik"]
    for spec, g, model in zip(report.gamma_specs, report.gammas, report.final_models):
        feats = ",".join(str(j + 1) for j in model.indices) or "-"
        fnames = ",".join(names[j] for j in model.indices) or "-"
        fit = report.path.fit_for(g)
        chosen.append(
            f"{spec}\t{_fmt(float(g))}\t{model.size}\t{feats}\t{fnames}\t{_fmt(fit.log_lik)}"
        )
    chosen_tsv = "\n".join(chosen) + "\n"

    fields = (
        "input", "link", "family", "gamma", "max_steps", "screen_threshold",
        "screen_keep", "k_multiplier", "path_per_gamma", "no_intercept",
    )
    _write_out(
        args.out,
        {"path.tsv": path_tsv, "chosen.tsv": chosen_tsv},
        _manifest(args, "select", fields),
    )
    sys.stdout.write(chosen_tsv)
    return 0


def _cmd_simulate(args) -> int:
    design = design_for(args.setting, args.n, rho=args.rho)
    config = None
    if args.gamma:
        # the simulated model has no intercept, so replication fits none
        config = SelectConfig(gammas=tuple(args.gamma), include_intercept=False)
    summary = run_simulation_batch(
        design, args.reps, config=config, seed=args.seed, threads=_threads(args)
    )
    files = {"summary.tsv": summary.to_tsv()}
    rep_lines = ["replicate\tgamma\tpdr\tfdr"]
    labels = [c.gamma_label for c in summary.cells]
    for rid, metrics in summary.replicate_metrics:
        for label, m in zip(labels, metrics):
            rep_lines.append(f"{rid}\t{label}\t{_fmt(m.pdr)}\t{_fmt(m.fdr)}")
    files["replicates.tsv"] = "\n".join(rep_lines) + "\n"
    if summary.failures:
        files["failures.tsv"] = (
            "replicate\terror\n"
            + "\n".join(f"{rid}\t{msg}" for rid, msg in summary.failures)
            + "\n"
        )
    if args.dump_data:
        for rid in range(min(args.reps, args.dump_data)):
            rep = generate_replicate(design, args.seed, rid)
            hdr = ",".join(["y"] + [f"x{j + 1}" for j in range(design.pn)])
            body = "\n".join(
                ",".join(_fmt(v) for v in np.concatenate(([rep.dataset.y[i]], rep.dataset.X[i])))
                for i in range(design.n)
            )
            files[f"replicate_{rid}.csv"] = hdr + "\n" + body + "\n"
        files["design.json"] = json.dumps(
            {
                "setting": design.setting, "n": design.n, "pn": design.pn,
                "p0n": design.p0n, "rho": design.rho, "L": design.L, "q": design.q,
                "true_support_1based": [design.L * t for t in range(1, design.p0n + 1)],
            },
            indent=2,
        ) + "\n"
    fields = ("setting", "n", "rho", "reps", "seed", "gamma", "dump_data")
    _write_out(args.out, files, _manifest(args, "simulate", fields))
    sys.stdout.write(summary.to_tsv())
    return 0


def _cmd_cv_links(args) -> int:
    data = Dataset.from_csv(args.input)
    links = [s.strip() for s in args.links.split(",") if s.strip()]
    for name in links:
        lf = parse_link_family(name)
        data.validate_for_family(lf.family)
    report = cv_select_link(
        data,
        links,
        path_length=args.path_length,
        folds=args.folds,
        seed=args.seed,
        threads=_threads(args),
    )
    lines = ["link\theld_out_log_lik\tchosen"]
    for name, value in zip(report.link_names, report.criteria):
        lines.append(f"{name}\t{_fmt(value)}\t{'*' if name == report.chosen else ''}")
    table = "\n".join(lines) + "\n"
    fields = ("input", "links", "folds", "path_length", "seed")
    _write_out(args.out, {"cv_links.tsv": table}, _manifest(args, "cv-links", fields))
    sys.stdout.write(table)
    return 0


def _cmd_diagnose(args) -> int:
    data = Dataset.from_csv(args.input)
    lf = parse_link_family(args.link, args.family)
    try:
        beta0 = np.loadtxt(args.beta, ndmin=1, dtype=float)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read coefficient file {args.beta}: {exc}") from None
    rep = c6_diagnostics(lf, data, beta0)
    second = "NA" if rep.second_ratio is None else _fmt(rep.second_ratio)
    second_ok = "NA" if rep.second_below_threshold is None else str(rep.second_below_threshold)
    lines = [
        "quantity\tvalue",
        f"first_ratio\t{_fmt(rep.first_ratio)}",
        f"second_ratio\t{second}",
        f"n_threshold\t{_fmt(rep.n_threshold)}",
        f"first_below_threshold\t{rep.first_below_threshold}",
        f"second_below_threshold\t{second_ok}",
        f"max_abs_x\t{_fmt(rep.max_abs_x)}",
        f"max_abs_h_prime\t{_fmt(rep.max_abs_h_prime)}",
        f"max_abs_h_double_prime\t{_fmt(rep.max_abs_h_double_prime)}",
        f"sigma2_min\t{_fmt(rep.sigma2_min)}",
        f"sigma2_max\t{_fmt(rep.sigma2_max)}",
    ]
    table = "\n".join(lines) + "\n"
    sys.stdout.write(table)
    if args.out:
        fields = ("input", "link", "family", "beta")
        _write_out(args.out, {"diagnostics.tsv": table}, _manifest(args, "diagnose", fields))
    return 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="ebicglm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ebicglm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="CSV with y as first column")
        p.add_argument("--config", help="JSON config/manifest; overrides flags")
        p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("fit", help="fit one model, print coefficients + logLik + EBIC")
    common(p)
    p.add_argument("--link", default="logit")
    p.add_argument("--family", default=None)
    p.add_argument("--features", default=None, help="comma list of 1-based columns")
    p.add_argument("--gamma", default="bic")
    p.add_argument("--no-intercept", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("select", help="screen + forward selection on a CSV")
    common(p)
    p.add_argument("--link", default="logit")
    p.add_argument("--family", default=None)
    p.add_argument("--gamma", action="append", default=None,
                   help="gamma value or preset; repeatable (first builds the path)")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--screen-threshold", type=int, default=None)
    p.add_argument("--screen-keep", type=int, default=None)
    p.add_argument("--k-multiplier", type=float, default=None)
    p.add_argument("--path-per-gamma", action="store_true")
    p.add_argument("--no-intercept", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("simulate", help="replicate batch with PDR/FDR summary")
    common(p, needs_input=False)
    p.add_argument("--setting", default="1", choices=["1", "2", "3", "S1", "S2", "S3"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", action="append", default=None)
    p.add_argument("--dump-data", type=int, default=0,
                   help="also write the first K replicates as CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("cv-links", help="k-fold CV choice among link functions")
    common(p)
    p.add_argument("--links", default="logit,probit,cauchit,cloglog")
    p.add_argument("--folds", type=int, default=8)
    p.add_argument("--path-length", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cv_links)

    p = sub.add_parser("diagnose", help="information-ratio diagnostics at beta0")
    common(p)
    p.add_argument("--link", default="cloglog")
    p.add_argument("--family", default=None)
    p.add_argument("--beta", required=True, help="text file, one coefficient per row")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        _merge_config_file(args)
        return args.func(args)
    except _UsageError as exc:
        print(f"ebicglm: usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"ebicglm: data error: {exc}", file=sys.stderr)
        return 2
    except (UnsupportedPair, InvalidArgs) as exc:
        print(f"ebicglm: usage error: {exc}", file=sys.stderr)
        return 1
    except EbicGlmError as exc:
        print(f"ebicglm: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
