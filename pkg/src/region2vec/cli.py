"""Command-line entry point: generate, embed, cluster, evaluate, benchmark.

Every option can also come from a flat ``key = value`` file given with
``--config``; flags override the file.  Keys are the flag names without
the leading dashes (``output-dim`` and ``output_dim`` both work).
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import benchmark as bench_mod
from .baselines import louvain
from .clustering import ward_constrained
from .data_io import (
    SynthConfig,
    generate_synthetic,
    load_dataset,
    read_embeddings,
    read_labels,
    write_dataset,
    write_embeddings,
    write_labels,
    write_loss_trace,
)
from .embedding import TrainingConfig, train
from .errors import Region2VecError
from .metrics import evaluate


class ConfigError(Region2VecError, ValueError):
    pass


# key -> (type, help).  Training keys map onto TrainingConfig fields below.
OPTIONS = {
    "nodes": (str, "nodes.csv path"),
    "adjacency": (str, "adjacency.csv path"),
    "flows": (str, "flows.csv path"),
    "labels": (str, "labels file to evaluate"),
    "ground-truth": (str, "ground-truth labels, enables adjusted_rand"),
    "embeddings": (str, "embeddings.csv to cluster (default: <out-dir>/embeddings.csv)"),
    "method": (str, "method name used in output file names"),
    "out-dir": (str, "directory for outputs (default: current directory)"),
    "k": (int, "community count (default: Louvain's count)"),
    "seed": (int, "seed for every random generator"),
    "epsilon": (int, "hop threshold for the distance-decay term"),
    "hidden": (int, "hidden layer width"),
    "output-dim": (int, "embedding width"),
    "iterations": (int, "training iterations"),
    "lr": (float, "Adam learning rate"),
    "layers": (int, "number of graph convolution layers"),
    "pair-sample": (float, "fraction of pairs sampled per iteration"),
    "bins": (int, "quantile classes for homogeneity"),
}
TRAINING_KEYS = {
    "epsilon": "hop_threshold",
    "hidden": "hidden_width",
    "output-dim": "output_width",
    "iterations": "iterations",
    "lr": "learning_rate",
    "layers": "layers",
    "pair-sample": "pair_sample",
    "seed": "seed",
}
SYNTH_FIELDS = {f.name.replace("_", "-"): f for f in dataclasses.fields(SynthConfig) if f.name != "seed"}


def _field_type(f):
    return {"int": int, "float": float}.get(str(f.type), float)


def _canonical(key):
    return key.strip().lstrip("-").replace("_", "-").lower()


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            sep = "=" if "=" in line else ":" if ":" in line else None
            if sep is None:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split(sep, 1))
            key = _canonical(key)
            if key == "external-labels":
                out.setdefault(key, []).append(value)
                continue
            conv = _converter(key)
            if conv is None:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = conv(value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return out


def _converter(key):
    if key in OPTIONS:
        return OPTIONS[key][0]
    if key in SYNTH_FIELDS:
        return _field_type(SYNTH_FIELDS[key])
    return None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="flat key = value file; flags override it")
    for key, (typ, help_text) in OPTIONS.items():
        common.add_argument(f"--{key}", type=typ, help=help_text)
    common.add_argument(
        "--external-labels", action="append", metavar="NAME=PATH", help="extra labels file for the benchmark (repeatable)"
    )
    synth = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    for key, f in SYNTH_FIELDS.items():
        synth.add_argument(f"--{key}", type=_field_type(f), help=f"synthetic generator {f.name} (default {f.default})")

    parser = argparse.ArgumentParser(prog="region2vec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common, synth], help="write a synthetic dataset")
    sub.add_parser("embed", parents=[common], help="train embeddings, write embeddings.csv and loss_trace.csv")
    sub.add_parser("cluster", parents=[common], help="constrained Ward on embeddings, write labels_region2vec.csv")
    sub.add_parser("evaluate", parents=[common], help="write metrics_<method>.json for a labels file")
    sub.add_parser("benchmark", parents=[common], help="compare Louvain, KMeans, Region2vec and external labels")
    return parser


def merge_options(args: argparse.Namespace) -> dict:
    """Config-file values overlaid by explicitly given flags."""
    flags = {_canonical(k): v for k, v in vars(args).items() if k not in ("command", "config")}
    merged = read_config_file(args.config) if getattr(args, "config", None) else {}
    if args.command != "generate":
        stray = sorted(k for k in merged if k in SYNTH_FIELDS)
        if stray:
            raise ConfigError(f"generator keys {stray} only apply to 'generate'")
    merged.update(flags)
    return merged


def training_config(opts) -> TrainingConfig:
    kw = {field: opts[key] for key, field in TRAINING_KEYS.items() if key in opts}
    return TrainingConfig(**kw)


def synth_config(opts) -> SynthConfig:
    kw = {f.name: opts[key] for key, f in SYNTH_FIELDS.items() if key in opts}
    if "seed" in opts:
        kw["seed"] = opts["seed"]
    return SynthConfig(**kw)


def _require(opts, *keys):
    missing = [k for k in keys if not opts.get(k)]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + k for k in missing))


def _external(opts) -> list:
    out = []
    for item in opts.get("external-labels", []):
        name, sep, path = item.partition("=")
        if not sep or not name.strip() or not path.strip():
            raise ConfigError(f"--external-labels expects NAME=PATH, got {item!r}")
        out.append((name.strip(), path.strip()))
    names = [n for n, _ in out]
    if len(set(names)) != len(names) or {"Louvain", "KMeans", "Region2vec"} & set(names):
        raise ConfigError("external label names must be unique and differ from the built-in methods")
    return out


def _load(opts):
    _require(opts, "nodes", "adjacency", "flows")
    return load_dataset(opts["nodes"], opts["adjacency"], opts["flows"], opts.get("ground-truth"))


def _out(opts, name):
    out_dir = opts.get("out-dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _say(path):
    print(f"wrote {path}")


def cmd_generate(opts):
    config = synth_config(opts)
    for path in write_dataset(generate_synthetic(config), opts.get("out-dir", ".")).values():
        _say(path)


def cmd_embed(opts):
    config = training_config(opts)
    ds = _load(opts)
    result = train(ds.graph, ds.flows, ds.attributes, config)
    write_embeddings(_out(opts, "embeddings.csv"), ds.node_ids, result.z)
    write_loss_trace(_out(opts, "loss_trace.csv"), result.trace)
    _say(_out(opts, "embeddings.csv"))
    _say(_out(opts, "loss_trace.csv"))


def _k(opts, ds):
    if "k" in opts:
        return opts["k"]
    return louvain(ds.flows, seed=opts.get("seed", 0)).assignment.k


def cmd_cluster(opts):
    ds = _load(opts)
    emb_path = opts.get("embeddings") or _out(opts, "embeddings.csv")
    _, z = read_embeddings(emb_path, ds.node_ids)
    assignment, merges = ward_constrained(z, ds.graph.adjacency, _k(opts, ds))
    flagged = sum(m.violation for m in merges)
    if flagged:
        print(f"warning: adjacency is disconnected; {flagged} merge(s) ignored contiguity", file=sys.stderr)
    path = _out(opts, f"labels_{opts.get('method', 'region2vec')}.csv")
    write_labels(path, ds.node_ids, assignment)
    _say(path)


def cmd_evaluate(opts):
    _require(opts, "labels")
    ds = _load(opts)
    assignment = read_labels(opts["labels"], ds.node_ids)
    method = opts.get("method")
    if not method:
        stem = os.path.splitext(os.path.basename(opts["labels"]))[0]
        method = stem[len("labels_"):] if stem.startswith("labels_") and len(stem) > 7 else stem
    report = evaluate(ds.flows, ds.attributes, ds.poverty_share, assignment, ds.ground_truth, opts.get("bins", 5))
    path = _out(opts, f"metrics_{method}.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    _say(path)


def cmd_benchmark(opts):
    config = training_config(opts)
    external = _external(opts)
    ds = _load(opts)
    ext = {name: read_labels(path, ds.node_ids) for name, path in external}
    result = bench_mod.run_benchmark(
        ds, k=opts.get("k"), seed=opts.get("seed", 0), config=config, external=ext, bins=opts.get("bins", 5)
    )
    written = [_out(opts, "embeddings.csv"), _out(opts, "loss_trace.csv")]
    write_embeddings(written[0], ds.node_ids, result.training.z)
    write_loss_trace(written[1], result.training.trace)
    for row in result.rows:
        tag = row.method.lower()
        if row.method not in ext:
            written.append(_out(opts, f"labels_{tag}.csv"))
            write_labels(written[-1], ds.node_ids, row.assignment)
        written.append(_out(opts, f"metrics_{tag}.json"))
        with open(written[-1], "w", encoding="utf-8") as fh:
            fh.write(row.report.to_json())
    for name, text in (("benchmark.csv", bench_mod.render_csv(result)), ("benchmark.txt", bench_mod.render_text(result))):
        written.append(_out(opts, name))
        with open(written[-1], "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    for path in written:
        _say(path)
    print(bench_mod.render_text(result), end="")


COMMANDS = {
    "generate": cmd_generate,
    "embed": cmd_embed,
    "cluster": cmd_cluster,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
}


def _qualified(exc):
    cls = type(exc)
    module = cls.__module__
    return cls.__name__ if module == "builtins" else f"{module}.{cls.__name__}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = merge_options(args)
        COMMANDS[args.command](opts)
    except ConfigError as exc:
        print(f"error: {_qualified(exc)}: {exc}", file=sys.stderr)
        return 2
    except (Region2VecError, OSError, ValueError) as exc:
        print(f"error: {_qualified(exc)}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
