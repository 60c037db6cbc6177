"""Command-line front end.

Subcommands mirror the pipeline stages: ingest, gen, features, nodeflow,
run, latency-dist, sweep, compare-presets, validate-config. Experiment
commands emit CSV/JSON (and, unless --no-plot, a PNG figure alongside).

Exit codes: 0 success, 2 spec/usage error, 3 data error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .arch import apply_overrides, load_config, serialize_config, PRESETS
from .errors import DataError, GripError, InvariantError, SpecError
from .executor import save_embeddings
from .experiments import (
    ExperimentSpec,
    LATENCY_HEADER,
    cmd_compare_presets,
    cmd_latency_dist,
    cmd_run,
    cmd_sweep,
    rows_to_json,
    write_csv,
)
from .graph import (
    attach_features,
    generate_synthetic,
    graph_stats,
    load_graph,
    save_csr,
    save_features,
)
from .models import DEFAULT_DIMS, DEFAULT_SAMPLE_SIZES, MODEL_IDS
from .nodeflow import build_nodeflow, save_nodeflows


def _parse_synthetic(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise SpecError("--synthetic expects n:deg:kind, e.g. 10000:30:power-law")
    try:
        n, deg = int(parts[0]), int(parts[1])
    except ValueError:
        raise SpecError(f"--synthetic has non-integer sizes in {text!r}")
    return (parts[2], n, deg)


def _parse_int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x != ""]
    except ValueError:
        raise SpecError(f"expected a comma-separated integer list, got {text!r}")


def _parse_overrides(pairs) -> dict:
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise SpecError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def _parse_sweeps(pairs) -> list:
    axes = []
    for pair in pairs or []:
        if "=" not in pair:
            raise SpecError(f"--sweep expects key=v1,v2,..., got {pair!r}")
        key, _, values = pair.partition("=")
        axes.append((key.strip(), [v.strip() for v in values.split(",") if v != ""]))
    return axes


def _spec_from_args(args) -> ExperimentSpec:
    spec = ExperimentSpec(
        model=args.model,
        graph_path=args.graph,
        synthetic=_parse_synthetic(args.synthetic) if args.synthetic else None,
        dims=tuple(_parse_int_list(args.dims)),
        sample_sizes=tuple(_parse_int_list(args.fanouts)),
        preset=args.preset,
        overrides=_parse_overrides(args.set),
        targets=_parse_int_list(args.targets) if args.targets else None,
        samples=args.samples,
        sweep=_parse_sweeps(getattr(args, "sweep", None)),
        seed=args.seed,
        workers=args.workers,
    )
    if spec.graph_path is None and spec.synthetic is None:
        raise SpecError("provide --graph or --synthetic")
    if len(spec.dims) != 3:
        raise SpecError("--dims expects in,hidden,out")
    return spec.validate()


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_common(p: argparse.ArgumentParser, with_sweep=False):
    p.add_argument("--model", default="gcn", choices=MODEL_IDS)
    p.add_argument("--graph", help="graph file (edge list or binary CSR)")
    p.add_argument("--synthetic", help="synthetic graph spec n:deg:kind")
    p.add_argument("--preset", default="grip-default", choices=PRESETS)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="ArchConfig override (repeatable)")
    p.add_argument("--dims", default=",".join(map(str, DEFAULT_DIMS)),
                   help="feature dims in,hidden,out")
    p.add_argument("--fanouts", default=",".join(map(str, DEFAULT_SAMPLE_SIZES)),
                   help="per-layer neighbor sample sizes")
    p.add_argument("--targets", help="comma-separated target vertex ids")
    p.add_argument("--samples", type=int, default=100,
                   help="target sample count for latency-dist")
    if with_sweep:
        p.add_argument("--sweep", action="append", metavar="KEY=V1,V2,...",
                       help="sweep axis (repeatable, up to 2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--workers", type=int, default=4)
    plot = p.add_mutually_exclusive_group()
    plot.add_argument("--plot", dest="plot", action="store_true", default=True)
    plot.add_argument("--no-plot", dest="plot", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gripsim",
        description="Functional and timing simulator for a GNN inference accelerator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert an edge list to binary CSR")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="output .csr path")

    p = sub.add_parser("gen", help="generate a synthetic graph")
    p.add_argument("--synthetic", required=True, help="n:deg:kind")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output .csr path")

    p = sub.add_parser("features", help="attach seeded random features")
    p.add_argument("--graph", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixed", action="store_true", help="store quantized fixed16")
    p.add_argument("--out", required=True, help="output .fea path")

    p = sub.add_parser("nodeflow", help="build and dump per-layer nodeflows")
    p.add_argument("--graph", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--fanouts", default=",".join(map(str, DEFAULT_SAMPLE_SIZES)))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-self", action="store_true",
                   help="do not add self edges for output vertices")
    p.add_argument("--out", required=True, help="output .nf path")

    p = sub.add_parser("stats", help="degree and sampled 2-hop statistics")
    p.add_argument("--graph", required=True)
    p.add_argument("--fanouts", default=",".join(map(str, DEFAULT_SAMPLE_SIZES)))
    p.add_argument("--trials", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    _add_common(sub.add_parser("run", help="one timed inference"))
    _add_common(sub.add_parser("latency-dist", help="latency distribution"))
    _add_common(sub.add_parser("sweep", help="parameter sweep"), with_sweep=True)
    _add_common(sub.add_parser("compare-presets",
                               help="breakdown chain and prior-work emulation"))

    p = sub.add_parser("validate-config", help="check an ArchConfig file")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    return parser


def _do_ingest(args) -> int:
    graph = load_graph(args.input)
    save_csr(graph, args.out)
    print(f"{graph.num_vertices} vertices, {graph.num_edges} edges -> {args.out}")
    return 0


def _do_gen(args) -> int:
    kind, n, deg = _parse_synthetic(args.synthetic)
    graph = generate_synthetic(kind, n, deg, args.seed)
    save_csr(graph, args.out)
    print(f"{kind}: {graph.num_vertices} vertices, {graph.num_edges} edges -> {args.out}")
    return 0


def _do_features(args) -> int:
    graph = load_graph(args.graph)
    store = attach_features(graph, args.dim, seed=args.seed)
    if args.fixed:
        store = store.quantized()
    save_features(store, args.out)
    print(f"{store.rows} x {store.dim} features -> {args.out}")
    return 0


def _do_nodeflow(args) -> int:
    graph = load_graph(args.graph)
    layers = build_nodeflow(
        graph,
        _parse_int_list(args.targets),
        _parse_int_list(args.fanouts),
        args.seed,
        include_self=not args.no_self,
    )
    save_nodeflows(layers, args.out)
    shape = ", ".join(f"|U|={nf.num_inputs} |V|={nf.num_outputs} |E|={nf.num_edges}"
                      for nf in layers)
    print(f"{len(layers)} layers ({shape}) -> {args.out}")
    return 0


def _do_stats(args) -> int:
    graph = load_graph(args.graph)
    stats = graph_stats(graph, _parse_int_list(args.fanouts), seed=args.seed,
                        trials=args.trials)
    print(json.dumps({
        "degree_quantiles": {str(k): v for k, v in stats.degree_quantiles.items()},
        "median_khop": stats.median_khop,
        "nonempty_block_fraction": stats.nonempty_block_fraction,
    }, indent=2, sort_keys=True))
    return 0


def _do_run(args) -> int:
    spec = _spec_from_args(args)
    out = _outdir(args)
    emb, report, targets = cmd_run(spec)
    emb_path = out / "embeddings.emb"
    save_embeddings(emb, emb_path)
    payload = {
        "model": spec.model,
        "dims": list(spec.dims),
        "sample_sizes": list(spec.sample_sizes),
        "preset": spec.preset,
        "targets": [int(t) for t in targets],
        "report": report.to_dict(),
    }
    report_path = out / "report.json"
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"latency {report.latency_us:.2f} us ({report.total_cycles} cycles)")
    print(f"wrote {emb_path} and {report_path}")
    return 0


def _do_latency_dist(args) -> int:
    spec = _spec_from_args(args)
    out = _outdir(args)
    summary = cmd_latency_dist(spec)
    records_path = out / "latency_dist.csv"
    write_csv(records_path, LATENCY_HEADER, summary.records)
    if args.format == "json":
        (out / "latency_summary.json").write_text(
            json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    else:
        write_csv(out / "latency_summary.csv", ["metric", "value"],
                  sorted(summary.to_dict().items()))
    if args.plot:
        from .plots import plot_latency_dist

        plot_latency_dist(summary.records, out / "latency_dist.png")
    print(
        f"min {summary.min_us:.2f} us, median {summary.median_us:.2f} us, "
        f"p99 {summary.p99_us:.2f} us over {len(summary.records)} targets"
    )
    return 0


def _do_sweep(args) -> int:
    spec = _spec_from_args(args)
    if not spec.sweep:
        raise SpecError("sweep requires --sweep key=v1,v2,...")
    out = _outdir(args)
    header, rows = cmd_sweep(spec)
    path = out / "sweep.csv"
    write_csv(path, header, rows)
    if args.format == "json":
        (out / "sweep.json").write_text(rows_to_json(header, rows) + "\n")
    if args.plot:
        from .plots import plot_sweep

        plot_sweep(header, rows, out / "sweep.png")
    print(f"{len(rows)} sweep points -> {path}")
    return 0


def _do_compare(args) -> int:
    spec = _spec_from_args(args)
    out = _outdir(args)
    header, rows = cmd_compare_presets(spec)
    path = out / "compare_presets.csv"
    write_csv(path, header, rows)
    if args.format == "json":
        (out / "compare_presets.json").write_text(rows_to_json(header, rows) + "\n")
    if args.plot:
        from .plots import plot_compare

        plot_compare(header, rows, out / "compare_presets.png")
    for row in rows:
        print(f"{row[0]:22s} {row[2]:10.2f} us  {row[3]:6.2f}x")
    return 0


def _do_validate_config(args) -> int:
    cfg = load_config(args.config)
    cfg = apply_overrides(cfg, _parse_overrides(args.set))
    print(serialize_config(cfg), end="")
    print("# ok")
    return 0


_HANDLERS = {
    "ingest": _do_ingest,
    "gen": _do_gen,
    "features": _do_features,
    "nodeflow": _do_nodeflow,
    "stats": _do_stats,
    "run": _do_run,
    "latency-dist": _do_latency_dist,
    "sweep": _do_sweep,
    "compare-presets": _do_compare,
    "validate-config": _do_validate_config,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (InvariantError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    except GripError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
