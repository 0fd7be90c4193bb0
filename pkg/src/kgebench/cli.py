"""Command-line benchmark orchestrator.

Subcommands:

* ``run``    -- one experiment: load graph, probe RAM, train (timed), run the
  three inference phases (timed), probe RAM again, append one CSV row.
* ``matrix`` -- a declarative sweep over models x graphs x threads x
  backends, one experiment at a time, appending one row each.
* ``stats``  -- dataset statistics table.

Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags, unknown
model, missing dataset). Experiments never run concurrently; parallelism
exists only inside the training/scoring phases.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import itertools
import sys
from dataclasses import replace

import numpy as np
import yaml

from .errors import DatasetNotFoundError, KgeError
from .evaluation import infer_entities, infer_relations, infer_triples, rank_queries
from .graph import KnowledgeGraph, generate_synthetic, load_dataset, stats
from .kernels import Backend
from .metrics import (
    BenchmarkRecord,
    MemoryProbe,
    PhaseTiming,
    peak_rss_mb,
    write_record,
)
from .models import ModelKind, save_params
from .training import TrainConfig, train

MODEL_NAMES = tuple(k.value for k in ModelKind)
BACKEND_NAMES = tuple(b.value for b in Backend)


def parse_synthetic_spec(spec: str):
    """Parse ``ring:N[:R[:SEED]]`` into generate_synthetic arguments."""
    parts = spec.split(":")
    if parts[0] != "ring" or len(parts) < 2 or len(parts) > 4:
        raise ValueError(
            f"bad synthetic spec {spec!r}; expected ring:N[:R[:SEED]]"
        )
    try:
        n_entities = int(parts[1])
        n_relations = int(parts[2]) if len(parts) > 2 else 1
        seed = int(parts[3]) if len(parts) > 3 else 0
    except ValueError:
        raise ValueError(f"bad synthetic spec {spec!r}; sizes must be integers")
    return n_entities, n_relations, seed


def _load_graph(
    args_graph: str | None,
    args_synthetic: str | None,
    splits: str | None = None,
) -> KnowledgeGraph:
    if (args_graph is None) == (args_synthetic is None):
        raise ValueError("exactly one of --graph and --synthetic is required")
    if args_graph is not None:
        if splits:
            names = tuple(s.strip() for s in splits.split(","))
            if len(names) != 3 or not all(names):
                raise ValueError(
                    f"--splits needs three comma-separated file names, got {splits!r}"
                )
            return load_dataset(args_graph, names)
        return load_dataset(args_graph)
    n, r, seed = parse_synthetic_spec(args_synthetic)
    return generate_synthetic(n, r, "ring", seed)


def run_experiment(
    config: TrainConfig,
    kg: KnowledgeGraph,
    monitor_ram: bool,
    out_csv: str | None,
    save_model: str | None = None,
    eval_mode: str = "none",
    ram_after_load: float | None = None,
) -> BenchmarkRecord:
    """Train and time one experiment, optionally appending a CSV row.

    ``ram_after_load`` carries the probe taken right after the graph was
    loaded (before parameter init), when RAM monitoring is on.
    """
    config.validate()

    params, timings = train(kg, config)
    train_phase = PhaseTiming(timings.wall_train_seconds, timings.cpu_train_seconds)

    test = kg.test
    _, triples_phase = infer_triples(params, test, config.backend, config.threads)
    test_entities = np.concatenate([test[:, 0], test[:, 2]])
    _, entities_phase = infer_entities(params, test_entities)
    _, relations_phase = infer_relations(params, test[:, 1])

    memory = MemoryProbe(enabled=monitor_ram)
    if monitor_ram:
        memory.peak_after_load_mb = ram_after_load
        memory.peak_total_mb = peak_rss_mb()

    record = BenchmarkRecord(
        timestamp=_dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        model=config.model.value,
        graph=kg.name,
        threads=config.threads,
        backend=config.backend.value,
        epochs=config.epochs,
        eta=config.eta,
        n_batches=config.n_batches,
        dim=config.dim,
        lr=config.lr,
        seed=config.seed,
        train=train_phase,
        infer_triples=triples_phase,
        infer_entities=entities_phase,
        infer_relations=relations_phase,
        memory=memory,
    )
    if out_csv:
        write_record(out_csv, record)
    if save_model:
        save_params(save_model, params)
    if eval_mode == "rank":
        ranks = rank_queries(
            params, test, kg.all_triples(), mode="filtered", threads=config.threads
        )
        print(
            f"filtered ranking over {ranks.n_queries} queries: "
            f"mrr={ranks.mrr:.4f} "
            + " ".join(f"hits@{k}={v:.4f}" for k, v in sorted(ranks.hits_at.items()))
        )
    return record


def _config_from_args(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        model=ModelKind(args.model),
        dim=args.dim,
        epochs=args.epochs,
        eta=args.eta,
        n_batches=args.batches,
        lr=args.lr,
        margin=args.margin,
        threads=args.threads,
        backend=Backend(args.backend),
        seed=args.seed,
        tau=args.tau,
    )


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    kg = _load_graph(args.graph, args.synthetic, args.splits)
    ram_after_load = peak_rss_mb() if args.monitor_ram else None
    run_experiment(
        config,
        kg,
        monitor_ram=args.monitor_ram,
        out_csv=args.out,
        save_model=args.save_model,
        eval_mode=args.eval,
        ram_after_load=ram_after_load,
    )
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    kg = _load_graph(args.graph, args.synthetic, args.splits)
    st = stats(kg)
    rows = [
        ("graph", kg.name),
        ("entities", st.n_entities),
        ("relations", st.n_relations),
        ("train", st.n_train),
        ("validation", st.n_valid),
        ("test", st.n_test),
    ]
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print(f"{key:<{width}}  {value}")
    return 0


def load_matrix_spec(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        spec = yaml.safe_load(fh)
    if not isinstance(spec, dict):
        raise ValueError(f"matrix spec {path} must be a mapping")
    return spec


def run_matrix(spec: dict, out_csv: str) -> tuple[int, list[str]]:
    """Run the cartesian product of a matrix spec sequentially.

    Returns (completed runs, failure messages); failures do not stop the
    sweep.
    """
    models = spec.get("models") or []
    graphs = spec.get("graphs") or []
    thread_counts = spec.get("threads") or [1]
    backends = spec.get("backends") or [Backend.VECTORIZED.value]
    repeats = int(spec.get("repeats", 1))
    if not models:
        raise ValueError("matrix spec has an empty model list")
    if not graphs:
        raise ValueError("matrix spec has an empty graph list")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    monitor_ram = bool(spec.get("monitor_ram", False))

    override_keys = (
        "dim", "epochs", "eta", "n_batches", "lr", "margin", "seed", "tau"
    )
    overrides = {k: spec[k] for k in override_keys if k in spec}

    completed = 0
    failures: list[str] = []
    combos = itertools.product(models, graphs, thread_counts, backends, range(repeats))
    for model, graph_src, threads, backend, rep in combos:
        label = f"{model}/{graph_src}/threads={threads}/{backend}/rep={rep}"
        try:
            config = TrainConfig(
                model=ModelKind(model),
                threads=int(threads),
                backend=Backend(backend),
                **overrides,
            )
            if isinstance(graph_src, str) and graph_src.startswith("ring:"):
                kg = _load_graph(None, graph_src)
            else:
                kg = _load_graph(str(graph_src), None)
            ram_after_load = peak_rss_mb() if monitor_ram else None
            run_experiment(
                config,
                kg,
                monitor_ram=monitor_ram,
                out_csv=out_csv,
                ram_after_load=ram_after_load,
            )
            completed += 1
        except Exception as exc:  # keep sweeping past individual failures
            failures.append(f"{label}: {exc}")
    return completed, failures


def cmd_matrix(args: argparse.Namespace) -> int:
    spec = load_matrix_spec(args.spec)
    completed, failures = run_matrix(spec, args.out)
    print(f"completed {completed} experiment(s), {len(failures)} failure(s)")
    for msg in failures:
        print(f"  failed: {msg}", file=sys.stderr)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgebench",
        description="Knowledge-graph-embedding runtime benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_graph_source(p: argparse.ArgumentParser) -> None:
        p.add_argument("--graph", help="dataset directory (train/valid/test .txt)")
        p.add_argument(
            "--synthetic",
            metavar="SPEC",
            help="synthetic graph spec, e.g. ring:50 or ring:1000:1:7",
        )
        p.add_argument(
            "--splits",
            metavar="TRAIN,VALID,TEST",
            help="override the split file names (default train.txt,valid.txt,test.txt)",
        )

    run_p = sub.add_parser("run", help="run a single experiment")
    add_graph_source(run_p)
    run_p.add_argument("--model", choices=MODEL_NAMES, default="transe")
    run_p.add_argument("--threads", type=int, default=1)
    run_p.add_argument("--backend", choices=BACKEND_NAMES, default="vector")
    run_p.add_argument("--epochs", type=int, default=500)
    run_p.add_argument("--eta", type=int, default=2)
    run_p.add_argument("--batches", type=int, default=100)
    run_p.add_argument("--dim", type=int, default=256)
    run_p.add_argument("--lr", type=float, default=0.01)
    run_p.add_argument("--margin", type=float, default=1.0)
    run_p.add_argument("--tau", type=int, default=32)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--monitor-ram", action="store_true")
    run_p.add_argument("--out", help="results CSV to append to")
    run_p.add_argument("--save-model", help="write a model checkpoint here")
    run_p.add_argument("--eval", choices=("none", "rank"), default="none")
    run_p.set_defaults(func=cmd_run)

    matrix_p = sub.add_parser("matrix", help="run an experiment matrix from a YAML spec")
    matrix_p.add_argument("--spec", required=True, help="matrix spec file (YAML)")
    matrix_p.add_argument("--out", required=True, help="results CSV to append to")
    matrix_p.set_defaults(func=cmd_matrix)

    stats_p = sub.add_parser("stats", help="print dataset statistics")
    add_graph_source(stats_p)
    stats_p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DatasetNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # bad flag values, malformed specs, invalid configurations
        if isinstance(exc, KgeError):
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
