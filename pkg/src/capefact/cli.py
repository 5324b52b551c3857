"""Command-line experiment harness.

Subcommands:
  sweep   run a privacy-utility grid and write the results CSV (optionally a
          summary CSV and rendered figures alongside)
  report  summarize an existing results CSV and render figures from it

Exit codes: 0 success (at least one cell produced a finite metric),
1 configuration error, 2 every cell failed.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .sweep import (
    ConfigError,
    SweepConfig,
    emit_results,
    emit_summary,
    ingest_csv,
    parse_results,
    run_sweep,
    summarize,
)

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; the harness reserves 2 for
    # "all cells failed", so usage errors are rerouted through ConfigError
    def error(self, message):
        raise ConfigError(message)


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v != "")


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v != "")


def _parse_strs(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


_CONFIG_PARSERS = {
    "family": str,
    "methods": _parse_strs,
    "eps_grid": _parse_floats,
    "delta_grid": _parse_floats,
    "ns_grid": _parse_ints,
    "sites": _parse_ints,
    "k": int,
    "dim": int,
    "trials": int,
    "seed": int,
    "sigma_sq": float,
    "words_per_doc": int,
    "noiseless": lambda v: v.lower() in ("1", "true", "yes"),
    "trusted_sites": lambda v: v.lower() in ("1", "true", "yes"),
    "out": str,
    "summary": str,
    "figures": str,
    "data_csv": str,
    "csv_has_header": lambda v: v.lower() in ("1", "true", "yes"),
    "csv_samples": str,
}


def _load_config_file(path: str) -> dict:
    """Flat key=value file; keys match flag names (dashes or underscores)."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_PARSERS:
            raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_PARSERS[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}: line {lineno}: {exc}") from None
    return values


def _build_parser() -> _Parser:
    parser = _Parser(prog="capefact", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="run an experiment grid")
    sw.add_argument("--config", help="flat key=value config file (flags win)")
    sw.add_argument("--family", choices=("pca", "mog", "stm"))
    sw.add_argument("--methods", type=_parse_strs,
                    help="comma list from cape,conv,local,pooled-dp,non-private")
    sw.add_argument("--eps-grid", type=_parse_floats, dest="eps_grid")
    sw.add_argument("--delta-grid", type=_parse_floats, dest="delta_grid")
    sw.add_argument("--ns-grid", type=_parse_ints, dest="ns_grid")
    sw.add_argument("--sites", type=_parse_ints, help="comma list of site counts")
    sw.add_argument("--k", type=int, help="number of components")
    sw.add_argument("--dim", type=int, help="feature dimension")
    sw.add_argument("--trials", type=int)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--sigma-sq", type=float, dest="sigma_sq",
                    help="MOG spherical noise variance")
    sw.add_argument("--words-per-doc", type=int, dest="words_per_doc")
    sw.add_argument("--noiseless", action="store_true", default=None,
                    help="run the private methods with zero noise")
    sw.add_argument("--trusted-sites", action="store_true", default=None,
                    dest="trusted_sites",
                    help="assume >= 2 non-colluding sites; drop the aggregator shares")
    sw.add_argument("--data-csv", dest="data_csv",
                    help="ingest a numeric CSV instead of generating data (pca only)")
    sw.add_argument("--csv-has-header", action="store_true", default=None,
                    dest="csv_has_header")
    sw.add_argument("--csv-samples", choices=("rows", "columns"), dest="csv_samples",
                    help="orientation of the ingested CSV (default rows)")
    sw.add_argument("--out", help="results CSV path (required via flag or config)")
    sw.add_argument("--summary", help="also write a per-cell summary CSV here")
    sw.add_argument("--figures", help="also render figures into this directory")

    rp = sub.add_parser("report", help="summarize results and render figures")
    rp.add_argument("--results", required=True, help="results CSV from a sweep")
    rp.add_argument("--out-dir", required=True, dest="out_dir")
    return parser


_CONFIG_DEFAULTS = {
    "family": None, "methods": None, "eps_grid": None, "delta_grid": None,
    "ns_grid": None, "sites": None, "k": None, "dim": None, "trials": None,
    "seed": None, "sigma_sq": None, "words_per_doc": None, "noiseless": None,
    "trusted_sites": None, "data_csv": None, "csv_has_header": None,
    "csv_samples": None, "out": None, "summary": None, "figures": None,
}


def _merged_values(args: argparse.Namespace) -> dict:
    """Config-file values overridden by any explicitly given flags."""
    values = dict(_CONFIG_DEFAULTS)
    if args.config:
        values.update(_load_config_file(args.config))
    for key in values:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _sweep_config(values: dict) -> SweepConfig:
    if values["family"] is None:
        raise ConfigError("--family is required (flag or config file)")

    data = None
    if values["data_csv"]:
        if values["family"] != "pca":
            raise ConfigError("--data-csv applies to the pca family only")
        try:
            data = ingest_csv(
                values["data_csv"],
                has_header=bool(values["csv_has_header"]),
                samples_as=values["csv_samples"] or "rows",
            )
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        values["dim"] = data.shape[0]

    kwargs = dict(family=values["family"], data=data)
    for key, attr in [
        ("methods", "methods"), ("eps_grid", "eps_grid"),
        ("delta_grid", "delta_grid"), ("ns_grid", "ns_grid"),
        ("sites", "sites_grid"), ("k", "k"), ("dim", "dim"),
        ("trials", "trials"), ("seed", "seed"), ("sigma_sq", "sigma_sq"),
        ("words_per_doc", "words_per_doc"), ("noiseless", "noiseless"),
        ("trusted_sites", "trusted_sites"),
    ]:
        if values[key] is not None:
            kwargs[attr] = values[key]
    return SweepConfig(**kwargs).resolved()


def _cmd_sweep(args: argparse.Namespace) -> int:
    values = _merged_values(args)
    if not values["out"]:
        raise ConfigError("--out is required (flag or config file)")
    config = _sweep_config(values)
    start = time.perf_counter()
    rows = run_sweep(config)
    elapsed = time.perf_counter() - start
    emit_results(rows, values["out"])
    print(f"wrote {len(rows)} rows to {values['out']} ({elapsed:.2f}s)")
    summary = summarize(rows)
    if values["summary"]:
        emit_summary(summary, values["summary"])
        print(f"wrote {len(summary)} summary rows to {values['summary']}")
    if values["figures"]:
        from .plots import render_figures

        paths = render_figures(summary, values["figures"])
        for p in paths:
            print(f"rendered {p}")
    finite = sum(1 for r in rows if not r.degenerate)
    if finite == 0:
        print("every cell failed (degenerate results only)", file=sys.stderr)
        return 2
    if finite < len(rows):
        print(f"{len(rows) - finite} degenerate cells flagged in the output")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    from .plots import render_figures

    try:
        rows = parse_results(args.results)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    summary = summarize(rows)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_path = out_dir / "summary.csv"
    emit_summary(summary, summary_path)
    print(f"wrote {len(summary)} summary rows to {summary_path}")
    for p in render_figures(summary, out_dir):
        print(f"rendered {p}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_report(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
