"""``polypde gen|run|rates|plot``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

from polypde import bench
from polypde.mesh import quality_stats, write_mesh


def _csv_list(s: str) -> list[str]:
    return [x for x in s.split(",") if x]


def _int_list(s: str) -> list[int]:
    return [int(x) for x in _csv_list(s)]


def cmd_gen(args) -> int:
    mesh = bench.generate_mesh(args.domain, args.mesher, args.resolution, args.seed)
    q = quality_stats(mesh)
    if args.output:
        write_mesh(mesh, args.output)
    if args.svg:
        plot_mesh(mesh, args.svg)
    print(json.dumps(asdict(q), indent=2))
    return 0


def plot_mesh(mesh, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.collections import PolyCollection

    plt.rcParams["svg.hashsalt"] = "polypde"
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.add_collection(PolyCollection([mesh.vertices[c] for c in mesh.cells], facecolor="none", edgecolor="k", lw=0.4))
    ax.autoscale_view()
    ax.set_aspect("equal")
    ax.set_axis_off()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None}, bbox_inches="tight")
    plt.close(fig)


def _config_from_args(args) -> bench.BenchConfig:
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
    else:
        cfg = {}
    overrides = {
        "problems": args.problems,
        "domains": args.domains,
        "meshers": args.meshers,
        "resolutions": args.resolutions,
        "methods": args.methods,
        "solvers": args.solvers,
        "rng_seed": args.seed,
        "output_dir": args.output_dir,
        "threads": args.threads,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(bench.BenchConfig)}
    extra = set(cfg) - known
    if extra:
        raise bench.ConfigError(f"unknown config keys {sorted(extra)}")
    return bench.BenchConfig(**cfg)


def cmd_run(args) -> int:
    config = _config_from_args(args)

    def progress(rec):
        if not args.quiet:
            print(f"{rec.problem}-{rec.domain} {rec.mesher} n={rec.resolution} {bench.method_label(rec)} {rec.solver}: "
                  f"{rec.status} l2={rec.l2_error:.3e} t={rec.solve_time_s:.3g}s")

    bench.run_suite(config, resume=not args.fresh, progress=progress)
    out = Path(config.output_dir)
    records = bench.read_records(out / "records.csv")
    bench.emit_convergence_table(records, out / "rates.csv")
    if any(r.status == "ok" for r in records):
        bench.emit_time_error_plot(records, out / "time_error.svg")
    print(f"wrote {out / 'records.csv'}")
    return 0


def cmd_rates(args) -> int:
    records = bench.read_records(args.records)
    out = args.output or str(Path(args.records).with_name("rates.csv"))
    rows = bench.emit_convergence_table(records, out)
    for r in rows:
        rate = f"L2 {r['l2_rate']:.3f}  H1 {r['h1_rate']:.3f}" if r["status"] == "ok" else r["status"]
        stab = f":{r['stabilization']}" if r["stabilization"] else ""
        print(f"{r['problem']}-{r['domain']} {r['mesher']} {r['method']}{stab}: {rate}")
    return 0


def cmd_plot(args) -> int:
    records = bench.read_records(args.records)
    if args.problem:
        records = [r for r in records if f"{r.problem}-{r.domain}" == args.problem.upper() or r.problem == args.problem.upper()]
    out = args.output or str(Path(args.records).with_name("time_error.svg"))
    bench.emit_time_error_plot(records, out, group_by=args.group_by, title=args.title)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polypde", description="Polygonal mesh PDE benchmark harness")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate one mesh and print its quality statistics")
    g.add_argument("domain")
    g.add_argument("mesher", help="VP1-4, DP1-5, TP1-5, DT1-4, PT1-4 or e.g. DP2-PT3")
    g.add_argument("resolution", type=int, help="target cell count (seed count for DT)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", help="write the mesh in polymesh text format")
    g.add_argument("--svg", help="write a wireframe SVG")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a benchmark sweep")
    r.add_argument("--config", help="JSON file with BenchConfig fields")
    r.add_argument("--problems", type=_csv_list)
    r.add_argument("--domains", type=_csv_list)
    r.add_argument("--meshers", type=_csv_list)
    r.add_argument("--resolutions", type=_int_list)
    r.add_argument("--methods", type=_csv_list, help="e.g. P1,P2,MV,WACHSPRESS,VEM:gain")
    r.add_argument("--solvers", type=_csv_list)
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int)
    r.add_argument("-o", "--output-dir")
    r.add_argument("--fresh", action="store_true", help="discard existing records instead of resuming")
    r.add_argument("-q", "--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("rates", help="fit convergence rates from records.csv")
    t.add_argument("records")
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_rates)

    q = sub.add_parser("plot", help="time-vs-error SVG from records.csv")
    q.add_argument("records")
    q.add_argument("-o", "--output")
    q.add_argument("--group-by", choices=("family", "mesher"), default="family")
    q.add_argument("--problem", help="filter, e.g. PS3 or PS3-US")
    q.add_argument("--title")
    q.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (bench.ConfigError, ValueError, OSError) as err:
        print(f"polypde: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
