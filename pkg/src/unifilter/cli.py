"""Command line front end: ``unifilter <command> [options]``.

Every option can also come from a JSON ``--config`` file (keys are the
option names with dashes or underscores); explicit flags win over the file,
and the file wins over built-in defaults. Each command writes the resolved
configuration as ``config.json`` into its ``--out`` directory.

Exit codes: 0 on success, 1 for numerical or contract failures, 2 for
file and input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .basis import KINDS, BasisConfig, build_basis, iter_basis
from .errors import GraphFormatError, UniFilterError
from .graph import LabeledSplit, estimate_homophily, homophily_ratio
from .io import (
    load_features,
    load_graph,
    load_labels,
    load_split,
    save_features,
    save_graph,
    save_labels,
    save_split,
    write_json,
)
from .model import FilterModel, Hyper, train
from .spectral import consecutive_angles, spectrum_profile

log = logging.getLogger("unifilter")

EXIT_OK, EXIT_FAILURE, EXIT_IO = 0, 1, 2

DEFAULTS = {
    "kind": "unibasis",
    "hops": 10,
    "h_hat": None,
    "tau": 0.5,
    "lr": 0.01,
    "weight_decay": 5e-4,
    "dropout": 0.5,
    "patience": 200,
    "max_epochs": 1000,
    "hidden": 0,
    "seed": 0,
    "reorthogonalize": None,
    "train_fraction": 0.6,
    "target_h": 0.5,
    "feature_dim": 100,
    "base_h": 0.81,
    "plot": True,
}


def sub_seed(seed: int, name: str) -> int:
    """Named child seed, so adding a stage never shifts the others."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0])


def _add_common(p, *names):
    if "graph" in names:
        p.add_argument("--graph", help="edge list file (one 'u v' pair per line)")
    if "features" in names:
        p.add_argument("--features", help="whitespace-delimited n x d feature matrix")
    if "labels" in names:
        p.add_argument("--labels", help="one integer class per line")
    if "split" in names:
        p.add_argument("--split", help="JSON file with train/val/test index lists")
    if "basis" in names:
        p.add_argument("--kind", choices=KINDS, default=None)
        p.add_argument("--hops", "-K", type=int, default=None, help="number of propagation hops K")
        p.add_argument("--h-hat", type=float, default=None, help="homophily ratio; estimated from the split if omitted")
        p.add_argument("--tau", type=float, default=None)
        p.add_argument("--reorthogonalize", action=argparse.BooleanOptionalAction, default=None,
                       help="fully reorthogonalize the Krylov vectors (default on for 'angles')")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="JSON file with option values; flags take precedence")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unifilter", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-h", help="estimate the homophily ratio from training labels")
    _add_common(p, "graph", "labels", "split")
    p.add_argument("--train-fraction", type=float, default=None,
                   help="random split with this train share when --split is not given")

    p = sub.add_parser("build-basis", help="build a basis and export one file per hop")
    _add_common(p, "graph", "features", "labels", "split", "basis")

    p = sub.add_parser("train", help="build a basis, train the filter, write report and spectrum")
    _add_common(p, "graph", "features", "labels", "split", "basis")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None, help="width of an optional ReLU hidden layer")
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("angles", help="consecutive-hop angles of a (long) basis")
    _add_common(p, "graph", "features", "labels", "split", "basis")
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("synth", help="generate a relabelled synthetic dataset")
    _add_common(p, "graph", "labels")
    p.add_argument("--target-h", type=float, default=None)
    p.add_argument("--feature-dim", type=int, default=None)
    p.add_argument("--base-h", type=float, default=None,
                   help="homophily of the generated Cora-like base when --graph is not given")

    p = sub.add_parser("spectrum", help="per-hop frequency profile of a basis")
    _add_common(p, "graph", "features", "labels", "split", "basis")
    p.add_argument("--checkpoint", help="model checkpoint whose hop weights are paired with the profile")
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=None)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the optional config file and explicit flags (in that order)."""
    cfg = {}
    for key, val in DEFAULTS.items():
        if hasattr(args, key):
            cfg[key] = val
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise GraphFormatError(f"invalid JSON ({exc.msg})", args.config, exc.lineno) from None
        for key, val in raw.items():
            key = key.replace("-", "_")
            if not hasattr(args, key) or key in ("config", "command"):
                raise GraphFormatError(f"unknown option {key!r} for '{args.command}'", args.config)
            cfg[key] = val
    for key, val in vars(args).items():
        if key in ("config", "verbose"):
            continue
        if val is not None or key not in cfg:
            cfg[key] = val
    return cfg


def _require(cfg, *keys):
    missing = [k for k in keys if not cfg.get(k)]
    if missing:
        raise GraphFormatError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _out_dir(cfg) -> Path:
    _require(cfg, "out")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_inputs(cfg, need_labels=False, need_features=True):
    # row counts of the node files fix n, so trailing isolated nodes survive
    x = load_features(cfg["features"]) if need_features else None
    labels = load_labels(cfg["labels"]) if cfg.get("labels") else None
    if labels is None and need_labels:
        _require(cfg, "labels")
    sizes = {a.shape[0] for a in (x, labels) if a is not None}
    if len(sizes) > 1:
        raise GraphFormatError(f"feature and label files disagree on the node count: {sorted(sizes)}")
    g = load_graph(cfg["graph"], n_hint=sizes.pop() if sizes else None)
    for name, a in (("features", x), ("labels", labels)):
        if a is not None and a.shape[0] != g.n:
            raise GraphFormatError(f"edge list references node {g.n - 1} but {name} has {a.shape[0]} rows", cfg[name])
    split = None
    if labels is not None:
        if cfg.get("split"):
            split = load_split(cfg["split"], labels)
        else:
            frac = float(cfg.get("train_fraction") or 0.6)
            rest = (1.0 - frac) / 2
            split = LabeledSplit.random(labels, (frac, rest, rest), seed=sub_seed(cfg["seed"], "split"))
    return g, x, labels, split


def _basis_config(cfg, g, split, default_reorth=False) -> BasisConfig:
    h_hat = cfg.get("h_hat")
    if h_hat is None:
        if split is not None:
            h_hat = estimate_homophily(g, split).value
            log.info("estimated h_hat = %.4f from training labels", h_hat)
        else:
            h_hat = 0.5
            log.warning("no --h-hat and no labels; using h_hat = 0.5")
        cfg["h_hat"] = h_hat
    reorth = cfg.get("reorthogonalize")
    if reorth is None:
        reorth = default_reorth
        cfg["reorthogonalize"] = reorth
    return BasisConfig(K=int(cfg["hops"]), h_hat=float(h_hat), tau=float(cfg["tau"]), reorthogonalize=bool(reorth))


def _write_config(cfg, out: Path):
    record = {k: v for k, v in sorted(cfg.items()) if k != "out"}
    record["version"] = __version__
    write_json(record, out / "config.json")


def cmd_estimate_h(cfg) -> int:
    _require(cfg, "graph", "labels")
    g, _, labels, split = _load_inputs(cfg, need_labels=True, need_features=False)
    est = estimate_homophily(g, split)
    result = {
        "h_hat": est.value,
        "train_edges": est.n_edges,
        "fallback": est.fallback,
        "h_full": homophily_ratio(g, labels),
    }
    print(f"h_hat\t{est.value:.6f}\ttrain_edges\t{est.n_edges}\tfallback\t{str(est.fallback).lower()}")
    if cfg.get("out"):
        out = _out_dir(cfg)
        _write_config(cfg, out)
        write_json(result, out / "estimate.json")
    return EXIT_OK


def cmd_build_basis(cfg) -> int:
    _require(cfg, "graph", "features", "out")
    g, x, _, split = _load_inputs(cfg)
    bcfg = _basis_config(cfg, g, split)
    basis = build_basis(cfg["kind"], g, x, bcfg)
    out = _out_dir(cfg)
    _write_config(cfg, out)
    basis.save(out)
    print(f"wrote {basis.K + 1} hops of kind {basis.kind} to {out}")
    return EXIT_OK


def cmd_train(cfg) -> int:
    _require(cfg, "graph", "features", "labels", "out")
    g, x, _, split = _load_inputs(cfg, need_labels=True)
    bcfg = _basis_config(cfg, g, split)
    basis = build_basis(cfg["kind"], g, x, bcfg)
    hyper = Hyper(
        lr=float(cfg["lr"]),
        weight_decay=float(cfg["weight_decay"]),
        dropout=float(cfg["dropout"]),
        max_epochs=int(cfg["max_epochs"]),
        patience=int(cfg["patience"]),
        hidden=int(cfg["hidden"]),
    )
    model, report = train(basis, split, hyper, seed=sub_seed(cfg["seed"], "train"))
    out = _out_dir(cfg)
    _write_config(cfg, out)
    model.save(out / "checkpoint.json")
    report.save(out / "report.json")
    profile = spectrum_profile(g, basis, model.w)
    (out / "spectrum.json").write_text(profile.to_json() + "\n", encoding="utf-8")
    if cfg.get("plot", True):
        from .plotting import plot_spectrum

        plot_spectrum(profile, out / "spectrum.png", title=f"{cfg['kind']}, K={bcfg.K}")
    print(
        f"val_acc\t{report.best_val_accuracy:.4f}\ttest_acc\t{report.test_accuracy:.4f}"
        f"\tepochs\t{report.epochs_run}\tbest_epoch\t{report.best_epoch}"
    )
    return EXIT_OK


def cmd_angles(cfg) -> int:
    _require(cfg, "graph", "features", "out")
    g, x, _, split = _load_inputs(cfg)
    bcfg = _basis_config(cfg, g, split, default_reorth=True)
    report = consecutive_angles(iter_basis(cfg["kind"], g, x, bcfg))
    out = _out_dir(cfg)
    _write_config(cfg, out)
    with open(out / "angles.tsv", "w", encoding="utf-8") as fh:
        fh.write("hop\tdegrees\tskipped_columns\n")
        for k, (deg, skip) in enumerate(zip(report.degrees, report.skipped), start=1):
            fh.write(f"{k}\t{deg:.10g}\t{skip}\n")
    if cfg.get("plot", True):
        from .plotting import plot_angles

        plot_angles(report.degrees, out / "angles.png", title=f"{cfg['kind']}, K={bcfg.K}")
    d = report.degrees
    print(f"first\t{d[0]:.6g}\tlast\t{d[-1]:.6g}\tmin\t{d.min():.6g}\tmax\t{d.max():.6g}")
    return EXIT_OK


def cmd_synth(cfg) -> int:
    from .synth import SynthSpec, cora_like_graph, make_synthetic

    if cfg.get("graph"):
        _require(cfg, "labels")
        g = load_graph(cfg["graph"])
        base_labels = load_labels(cfg["labels"], n=g.n)
    else:
        g, base_labels = cora_like_graph(seed=sub_seed(cfg["seed"], "base"), homophily=float(cfg["base_h"]))
    spec = SynthSpec(g, base_labels, float(cfg["target_h"]), int(cfg["feature_dim"]), sub_seed(cfg["seed"], "synth"))
    ds = make_synthetic(spec)
    out = _out_dir(cfg)
    _write_config(cfg, out)
    save_graph(ds.graph, out / "edges.txt")
    save_labels(ds.split.labels, out / "labels.txt")
    save_features(ds.features, out / "features.txt", fmt="%d")
    save_split(ds.split, out / "split.json")
    write_json(ds.manifest(), out / "manifest.json")
    print(f"achieved_h\t{ds.achieved_h:.6f}\ttarget_h\t{ds.target_h:.6f}\texhausted\t{str(ds.exhausted).lower()}")
    return EXIT_OK


def cmd_spectrum(cfg) -> int:
    _require(cfg, "graph", "features", "out")
    g, x, _, split = _load_inputs(cfg)
    bcfg = _basis_config(cfg, g, split)
    basis = build_basis(cfg["kind"], g, x, bcfg)
    if cfg.get("checkpoint"):
        weights = FilterModel.load(cfg["checkpoint"]).w
    else:
        weights = np.full(basis.K + 1, 1.0 / (basis.K + 1))
    profile = spectrum_profile(g, basis, weights)
    out = _out_dir(cfg)
    _write_config(cfg, out)
    (out / "spectrum.json").write_text(profile.to_json() + "\n", encoding="utf-8")
    if cfg.get("plot", True):
        from .plotting import plot_spectrum

        plot_spectrum(profile, out / "spectrum.png", title=f"{cfg['kind']}, K={bcfg.K}")
    for rec in profile.to_records():
        print(f"{rec['hop']}\t{rec['frequency']:.6f}\t{rec['weight']:.6f}")
    return EXIT_OK


COMMANDS = {
    "estimate-h": cmd_estimate_h,
    "build-basis": cmd_build_basis,
    "train": cmd_train,
    "angles": cmd_angles,
    "synth": cmd_synth,
    "spectrum": cmd_spectrum,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except (OSError, GraphFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UniFilterError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
