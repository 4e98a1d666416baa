"""Command-line entry point: ``hls-bnc {train,predict,bench,timing}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .classifier import BncModel, SmootherConfig, parse_structure, predict_posterior, train
from .data import Dataset, load_csv
from .discretize import apply_discretization, discretize_values, fit_discretization
from .evaluation import ModelConfig, TimingConfig, run_benchmark, timing_record, wdl, write_summary_csv
from .exceptions import ConfigError, ParseError
from .fixtures import list_fixtures, load_fixture

log = logging.getLogger("hls_bnc")


def _load_input(args) -> Dataset:
    if args.fixture:
        return load_fixture(args.fixture)
    if not args.data or not args.schema:
        raise ConfigError("give --fixture, or both --data and --schema")
    return load_csv(args.data, args.schema)


def _column_metadata(raw: Dataset, disc) -> dict:
    attrs = []
    for j in raw.attribute_columns:
        if j in disc.cuts:
            attrs.append({"name": raw.names[j], "kind": "numeric", "cuts": disc.cuts[j].tolist()})
        else:
            attrs.append({"name": raw.names[j], "kind": "categorical", "levels": list(raw.levels[j] or ())})
    k = raw.class_index
    return {"attributes": attrs, "class": {"name": raw.names[k], "levels": list(raw.levels[k] or ())}}


def encode_rows(meta: dict, header: list[str], rows: list[list[str]]) -> np.ndarray:
    """Map raw CSV cells to the codes seen at training time.

    Unseen categorical labels get an out-of-range code, which prediction
    clips to the last value of that attribute.
    """
    index = {h.strip(): i for i, h in enumerate(header)}
    X = np.empty((len(rows), len(meta["attributes"])), dtype=np.int64)
    for a, col in enumerate(meta["attributes"]):
        if col["name"] not in index:
            raise ConfigError(f"input is missing column {col['name']!r}")
        cells = [r[index[col["name"]]].strip() for r in rows]
        if col["kind"] == "numeric":
            try:
                X[:, a] = discretize_values([float(c) for c in cells], col["cuts"])
            except ValueError as exc:
                raise ParseError(f"column {col['name']!r}: {exc}") from None
        else:
            lookup = {v: i for i, v in enumerate(col["levels"])}
            X[:, a] = [lookup.get(c, len(lookup)) for c in cells]
    return X


def cmd_train(args) -> int:
    raw = _load_input(args)
    disc = fit_discretization(raw)
    data = apply_discretization(disc, raw)
    model = train(data, args.structure, SmootherConfig.parse(args.smoother), seed=args.seed)
    model.metadata.update(_column_metadata(raw, disc))
    model.metadata.update({"structure_spec": args.structure, "smoother_spec": args.smoother, "seed": args.seed})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    log.info("wrote %s", out)
    return 0


def cmd_predict(args) -> int:
    model = BncModel.load(args.model)
    with open(args.data, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    X = encode_rows(model.metadata, header, rows)
    proba = predict_posterior(model, X)
    labels = model.metadata["class"]["levels"] or [str(c) for c in range(model.n_classes)]
    pred = np.argmax(proba, axis=1)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["prediction"] + [f"p_{lab}" for lab in labels])
        for k, p in zip(pred, proba):
            writer.writerow([labels[k]] + [f"{v:.10g}" for v in p])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_bench(args) -> int:
    names = list_fixtures() if args.fixtures == "all" else args.fixtures.split(",")
    datasets = {n: load_fixture(n) for n in names}
    parse_structure(args.structure)
    smoothers = args.smoother or ["add:1", "hls-nb:1"]
    configs = [ModelConfig(args.structure, s) for s in smoothers]
    for c in configs:
        SmootherConfig.parse(c.smoother)
    out = Path(args.out)
    table = run_benchmark(datasets, configs, k=args.folds, seed=args.seed, out_dir=out / "folds", n_jobs=args.jobs)
    write_summary_csv(table, out / "summary.csv")
    base = configs[0].label
    records = {}
    for cfg in configs[1:]:
        for loss in ("zero_one", "log_loss"):
            rec = wdl(table[cfg.label], table[base], loss)
            records[f"{cfg.label} vs {base} [{loss}]"] = {
                "wins": rec.wins,
                "draws": rec.draws,
                "losses": rec.losses,
                "per_dataset": rec.per_dataset,
            }
            print(f"{cfg.label} vs {base} ({loss}): {rec}")
    (out / "wdl.json").write_text(json.dumps(records, indent=2))
    return 0


def cmd_timing(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for card in args.cardinality:
        for n in args.samples:
            rec = timing_record(TimingConfig(card, n, args.parents, args.seed), args.repetitions, args.smoother)
            records.append(rec)
            print(
                f"card={card} n={n}: fast {rec['fast_seconds']:.4f}s slow {rec['slow_seconds']:.4f}s "
                f"total {rec['total_fast_seconds']:.4f}s"
            )
    (out / "timing.json").write_text(json.dumps(records, indent=2))
    with open(out / "timing.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, list(records[0]))
        writer.writeheader()
        writer.writerows(records)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hls-bnc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p):
        p.add_argument("--structure", default="tan", help="tan, nb or kdb:K")
        p.add_argument("--smoother", default="hls-nb:1", help="add:m, mle, hls-nb[:tau], hls-cv[:naive], hls-lasso:tau, hls-bayes:PRESET")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="fit a classifier and write it as JSON")
    p.add_argument("--data")
    p.add_argument("--schema")
    p.add_argument("--fixture", help="bundled dataset name instead of --data/--schema")
    model_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a CSV with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="cross-validate smoothers on the bundled datasets")
    p.add_argument("--fixtures", default="all", help="comma-separated names or 'all'")
    p.add_argument("--structure", default="kdb:3")
    p.add_argument("--smoother", action="append", help="repeatable; the first is the W-D-L baseline")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("timing", help="time count-based against duplicate-row fitting")
    p.add_argument("--cardinality", type=int, nargs="+", default=[2, 5])
    p.add_argument("--samples", type=int, nargs="+", default=[1000, 100000])
    p.add_argument("--parents", type=int, default=4)
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--smoother", default="hls-nb:1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_timing)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
