import argparse
import csv
import json
import logging
import math
import os
import sys

from joblib import Parallel, delayed

from calibration import run_scheme, score_split
from config import APP_TITLE, VALID_COPULA_KINDS, VALID_NORMS, load_run_config, resolve_jobs
from copulas import save_model
from database import ReportDatabase
from datagen import SyntheticSpec, generate, load_csv, write_csv
from models import split_data, split_indices, take_split
from report_tracker import ReportTracker

logger = logging.getLogger(APP_TITLE)

SWEEP_AXES = ("alpha", "n_cal")


def _format_float(value):
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.10g}"


def _split_list(text, cast=str):
    if text is None:
        return None
    return [cast(item.strip()) for item in text.split(",") if item.strip()]


def _parse_seeds(text):
    """'0,1,5' or '0-9'"""
    if text is None:
        return None
    if "-" in text and "," not in text:
        first, last = (int(v) for v in text.split("-", 1))
        return list(range(first, last + 1))
    return _split_list(text, int)


def load_dataset(config):
    """(X, Y) from the configured CSV file, or generated from the simulate section"""
    if config.data_path is not None:
        X, Y, _ = load_csv(config.data_path, config.targets)
        return X, Y
    return generate(SyntheticSpec(**config.simulate))


def _split_for(config, n_total, seed, n_cal=None):
    n_cal = config.n_cal if n_cal is None else n_cal
    if n_cal is None and config.n_test is None:
        return split_data(n_total, config.fractions, seed)
    n_cal = n_cal if n_cal is not None else int(config.fractions["cal"] * n_total)
    n_test = config.n_test if config.n_test is not None else int(config.fractions["test"] * n_total)
    return split_indices(n_total, n_cal, n_test, seed)


def run_seed(X, Y, config, seed, config_hash, alphas=None, n_cal=None):
    """Every scheme (and alpha) for one seed; the ridge model is fitted once"""
    data = take_split(X, Y, _split_for(config, len(X), seed, n_cal))
    scored = score_split(data, config.ridge_lambda)
    reports = []
    for alpha in alphas or [config.alpha]:
        for scheme in config.schemes:
            reports.append(run_scheme(scheme, scored, config, seed, alpha, config_hash))
    return reports


class ReportWriter:
    """Single writer for the per-run JSON files and the aggregate CSV"""

    def __init__(self, out_dir, dim):
        self.out_dir = out_dir
        self.dim = dim
        os.makedirs(os.path.join(out_dir, "reports"), exist_ok=True)

    def write_json(self, report, prefix=""):
        """Report JSON; a fitted copula goes to models/ under the same name and is linked"""
        name = f"{prefix}{report.scheme}_a{report.alpha:g}_n{report.n_cal}_s{report.seed}.json"
        data = report.to_dict()
        if report.model is not None:
            data["model_file"] = self.write_model(report.model, name)
        path = os.path.join(self.out_dir, "reports", name)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(data, handle, indent=2, sort_keys=True)
        return path

    def write_model(self, model, name):
        os.makedirs(os.path.join(self.out_dir, "models"), exist_ok=True)
        relative = os.path.join("models", name)
        save_model(model, os.path.join(self.out_dir, relative))
        return relative

    def write_csv(self, reports, name="results.csv"):
        path = os.path.join(self.out_dir, name)
        header = (["scheme", "alpha", "n_cal", "seed", "coverage", "efficiency"]
                  + [f"quantile_{j}" for j in range(self.dim)] + ["config_hash", "error"])
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for r in reports:
                writer.writerow(
                    [r.scheme, _format_float(r.alpha), r.n_cal, r.seed,
                     _format_float(r.coverage), _format_float(r.efficiency)]
                    + [_format_float(q) for q in r.quantile]
                    + [r.config_hash, r.error or ""]
                )
        return path

    def write_sweep_csv(self, axis, rows, name="sweep.csv"):
        path = os.path.join(self.out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["axis", "value", "scheme", "seed", "coverage", "efficiency",
                             "config_hash"])
            for value, r in rows:
                writer.writerow([axis, _format_float(value), r.scheme, r.seed,
                                 _format_float(r.coverage), _format_float(r.efficiency),
                                 r.config_hash])
        return path


class CopconfApp:
    def __init__(self, config, jobs=1):
        self.config = config
        self.jobs = jobs
        self.config_hash = config.config_hash()
        self.database = ReportDatabase(config.db_path) if config.db_path else None
        self.tracker = ReportTracker(self.database)

    def _run_seeds(self, X, Y, **kwargs):
        batches = Parallel(n_jobs=self.jobs)(
            delayed(run_seed)(X, Y, self.config, seed, self.config_hash, **kwargs)
            for seed in self.config.seeds
        )
        return [report for batch in batches for report in batch]

    def _store(self, reports, writer, prefix=""):
        for report in reports:
            writer.write_json(report, prefix)
            if self.database is not None:
                self.database.add_report(report)

    def calibrate(self):
        X, Y = load_dataset(self.config)
        logger.info("Calibrating %d seeds x %d schemes (config %s)",
                    len(self.config.seeds), len(self.config.schemes), self.config_hash)
        reports = self._run_seeds(X, Y)
        writer = ReportWriter(self.config.out_dir, Y.shape[1])
        self._store(reports, writer)
        path = writer.write_csv(reports)
        print(self.tracker.format_table(self.tracker.summarize(reports)))
        print(f"{len(reports)} reports written; aggregate CSV at {path}")
        if self.database is not None:
            print(f"Stored runs for config {self.config_hash}:")
            print(self.tracker.format_stored(self.tracker.summarize_stored(self.config_hash)))
        return reports

    def sweep(self, axis, values):
        if axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis: {axis}")
        if not values:
            raise ValueError("sweep values must be non-empty")
        X, Y = load_dataset(self.config)
        logger.info("Sweeping %s over %s", axis, list(values))
        writer = ReportWriter(self.config.out_dir, Y.shape[1])

        rows = []
        if axis == "alpha":
            reports = self._run_seeds(X, Y, alphas=list(values))
            rows = [(r.alpha, r) for r in reports]
            # Seeds vary slowest in the joblib batches; reorder to axis value first
            rows.sort(key=lambda row: values.index(row[0]))
        else:
            for value in values:
                rows.extend((value, r) for r in self._run_seeds(X, Y, n_cal=int(value)))
        self._store([r for _, r in rows], writer, prefix=f"{axis}_")
        path = writer.write_sweep_csv(axis, rows)
        print(self.tracker.format_table(self.tracker.summarize([r for _, r in rows])))
        print(f"{len(rows)} sweep rows written to {path}")
        return rows

    def close(self):
        if self.database is not None:
            self.database.close()


def cmd_simulate(args):
    if args.seed is None:
        raise ValueError("seed required")
    if args.n is None or args.n <= 0:
        raise ValueError("--n must be a positive row count")
    spec = SyntheticSpec(d=args.d, n=args.n, p=args.p, noise_copula=args.noise_copula,
                         relative_noise=args.relative_noise, seed=args.seed)
    X, Y = generate(spec)
    directory = os.path.dirname(args.out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    try:
        header = write_csv(args.out, X, Y)
    except OSError as e:
        raise OSError(f"cannot write {args.out}: {e}")
    print(f"Wrote {len(X)} rows x {len(header)} columns ({X.shape[1]} features, "
          f"{Y.shape[1]} targets) to {args.out}")
    return 0


def _config_from_args(args):
    overrides = {
        "alpha": args.alpha,
        "schemes": _split_list(args.schemes),
        "seeds": _parse_seeds(args.seeds),
        "family_set": _split_list(args.families),
        "copula_kind": args.copula_kind,
        "mc_samples": args.mc_samples,
        "n_cal": args.n_cal,
        "n_test": args.n_test,
        "norm": args.norm,
        "split_fraction": args.split_fraction,
        "data_path": args.data,
        "targets": _split_list(args.targets),
        "out_dir": args.out_dir,
        "db_path": args.db,
    }
    return load_run_config(args.config, overrides)


def cmd_calibrate(args):
    app = CopconfApp(_config_from_args(args), resolve_jobs(args.jobs))
    try:
        app.calibrate()
    finally:
        app.close()
    return 0


def cmd_sweep(args):
    cast = float if args.axis == "alpha" else int
    values = _split_list(args.values, cast)
    app = CopconfApp(_config_from_args(args), resolve_jobs(args.jobs))
    try:
        app.sweep(args.axis, values)
    finally:
        app.close()
    return 0


def _add_run_arguments(parser):
    parser.add_argument("--config", help="JSON run config; flags override its values")
    parser.add_argument("--data", help="CSV file with features and targets")
    parser.add_argument("--targets", help="comma-separated target column names")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--schemes", help="comma-separated scheme names")
    parser.add_argument("--seeds", help="comma-separated seeds or a range like 0-9")
    parser.add_argument("--families", help="comma-separated pair-copula families")
    parser.add_argument("--copula-kind", choices=VALID_COPULA_KINDS)
    parser.add_argument("--mc-samples", type=int)
    parser.add_argument("--n-cal", type=int)
    parser.add_argument("--n-test", type=int)
    parser.add_argument("--norm", choices=VALID_NORMS)
    parser.add_argument("--split-fraction", type=float)
    parser.add_argument("--out-dir")
    parser.add_argument("--db", help="also store reports in this sqlite file")
    parser.add_argument("--jobs", type=int, help="parallel seeds (COPCONF_JOBS wins)")


def build_parser():
    parser = argparse.ArgumentParser(prog=APP_TITLE,
                                     description="Copula-based conformal prediction for multiple targets")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="write a synthetic dataset")
    simulate.add_argument("--d", type=int, default=3)
    simulate.add_argument("--n", type=int)
    simulate.add_argument("--p", type=int, default=7)
    simulate.add_argument("--noise-copula", default="independence")
    simulate.add_argument("--relative-noise", type=float, default=0.10)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--out", required=True)
    simulate.set_defaults(handler=cmd_simulate)

    calibrate = sub.add_parser("calibrate", help="run calibration schemes over seeds")
    _add_run_arguments(calibrate)
    calibrate.set_defaults(handler=cmd_calibrate)

    sweep = sub.add_parser("sweep", help="repeat calibration over alpha or n_cal values")
    _add_run_arguments(sweep)
    sweep.add_argument("--axis", choices=SWEEP_AXES, required=True)
    sweep.add_argument("--values", required=True, help="comma-separated axis values")
    sweep.set_defaults(handler=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    try:
        return args.handler(args)
    except (ValueError, OSError, KeyError, TypeError) as e:
        print(f"{APP_TITLE}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
