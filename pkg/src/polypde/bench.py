"""Benchmark sweeps: problem x domain x mesher x resolution x method x solver.

Records go to ``records.csv`` row by row (append-only, resumable); fitted
rates to ``rates.csv``; time-vs-error plots to SVG.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import re
import statistics
import time
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from polypde.displaced import DP_VARIANTS, displaced_mesh
from polypde.domains import DOMAIN_IDS, make_domain
from polypde.fem import check_compatible
from polypde.mesh import Mesh2D, read_mesh, validate, write_mesh
from polypde.metrics import fit_convergence_rate, h_max, problem_errors
from polypde.problems import PROBLEM_IDS, assemble_problem, make_problem
from polypde.solver import SOLVER_IDS, SolverError, solve
from polypde._clip import ARC_SPACING, refine_arcs
from polypde.tiled import TP_VARIANTS, gap_triangles, tiled_mesh
from polypde.triangulate import PT_VARIANTS, dual_delaunay, triangulate_mesh
from polypde.vem import StabilizationKind
from polypde.voronoi import VP_ITERATIONS, vp_variant

log = logging.getLogger(__name__)

DEFAULT_BASE = 50
DEFAULT_RUNGS = 8
TIMING_REPEATS = 3
STATUSES = ("ok", "solver-failed", "mesh-failed", "incompatible")

ALL_MESHERS = (
    tuple(VP_ITERATIONS)
    + DP_VARIANTS
    + TP_VARIANTS
    + tuple(f"DT{k}" for k in range(1, 5))
    + tuple(f"VP4-{v}" for v in PT_VARIANTS)
)
_MESHER_RE = re.compile(r"^(VP[1-4]|DP[1-5]|TP[1-5]|DT[1-4])(?:-(PT[1-4]))?$|^(PT[1-4])$")


class ConfigError(ValueError):
    pass


def ladder(base: int = DEFAULT_BASE, rungs: int = DEFAULT_RUNGS) -> list[int]:
    """Geometric ladder of target cell counts ``base * 2^k``."""
    return [base * 2**k for k in range(rungs)]


# ---------------------------------------------------------------------------
# meshers
# ---------------------------------------------------------------------------


def normalize_mesher(m) -> str:
    """``("VP", 4)``, ``"vp4"``, ``"PT1"`` or ``"DP2-PT3"`` to a canonical id.

    A bare ``PTk`` triangulates the VP4 mesh.
    """
    if isinstance(m, (list, tuple)):
        m = "".join(str(x) for x in m)
    s = str(m).upper().replace(" ", "")
    hit = _MESHER_RE.match(s)
    if not hit:
        raise ConfigError(f"unknown mesher {m!r}")
    if hit.group(3):
        return f"VP4-{hit.group(3)}"
    return s


def mesher_family(mesher: str) -> str:
    """Plot family: ``VP``, ``DP``, ``TP``, ``DT`` or ``PT`` for triangulated polygons."""
    return "PT" if "-PT" in mesher else mesher[:2]


def _grid_shape(domain, n: int, per_cell: int = 1) -> tuple[int, int]:
    x0, y0, x1, y1 = domain.bbox
    cells = max(n / per_cell, 1.0)
    nx = max(1, round(math.sqrt(cells * (x1 - x0) / (y1 - y0))))
    ny = max(1, round(cells / nx))
    return nx, ny


@lru_cache(maxsize=16)
def _voronoi(domain_id: str, n: int, variant: str, rng_seed: int):
    # DT and PT meshes of one resolution share their Voronoi parent
    return vp_variant(domain_id, n, variant, rng_seed, return_seeds=True)


def generate_mesh(domain_id: str, mesher: str, resolution: int, rng_seed: int = 0) -> Mesh2D:
    """Mesh with about ``resolution`` cells (polygonal families) or seeds (DT)."""
    domain = make_domain(domain_id)
    mesher = normalize_mesher(mesher)
    base, _, tri = mesher.partition("-")
    fam, n = base[:2], int(resolution)
    # curved walls follow a lattice tied to the rung so the area deficit shrinks with n
    spacing = ARC_SPACING * math.sqrt(domain.area / max(n, 1))
    if fam == "VP":
        mesh = refine_arcs(_voronoi(domain.id, n, base, rng_seed)[0], domain, spacing)
    elif fam == "DT":
        vp, seeds = _voronoi(domain.id, n, "VP" + base[2], rng_seed)
        mesh = refine_arcs(dual_delaunay(seeds, domain, vp, variant=base), domain, spacing)
    elif fam == "DP":
        # the grid clipper samples arcs itself
        nx, ny = _grid_shape(domain, n)
        mesh = displaced_mesh(domain, nx, ny, base, rng_seed)
    else:
        nx, ny = _grid_shape(domain, n, 1 + len(gap_triangles(base)))
        mesh = tiled_mesh(domain, nx, ny, base, rng_seed)
    if tri:
        mesh = triangulate_mesh(mesh, tri, rng_seed, domain)
    return mesh


class MeshCache:
    """Content-addressed meshes keyed on (domain, mesher, resolution, seed)."""

    def __init__(self, directory: Path | None = None):
        self.directory = Path(directory) if directory else None
        self._mem: dict = {}

    @staticmethod
    def key(domain_id, mesher, resolution, seed) -> str:
        raw = json.dumps([str(domain_id), normalize_mesher(mesher), int(resolution), seed])
        return hashlib.sha256(raw.encode()).hexdigest()[:20]

    def get(self, domain_id, mesher, resolution, seed) -> Mesh2D:
        k = self.key(domain_id, mesher, resolution, seed)
        if k in self._mem:
            return self._mem[k]
        path = self.directory / f"{k}.mesh" if self.directory else None
        if path is not None and path.exists():
            mesh = read_mesh(path)
        else:
            mesh = generate_mesh(domain_id, mesher, resolution, seed)
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                write_mesh(mesh, path)
        self._mem[k] = mesh
        return mesh


# ---------------------------------------------------------------------------
# config and records
# ---------------------------------------------------------------------------


def parse_method(m) -> tuple[str, str]:
    """``"VEM:gain"``, ``("VEM", "gain")`` or ``"P1"`` to ``(basis, stabilization)``."""
    if isinstance(m, (list, tuple)):
        basis, stab = str(m[0]), (str(m[1]) if len(m) > 1 and m[1] else "")
    else:
        basis, _, stab = str(m).partition(":")
    basis = basis.upper()
    if basis not in ("P1", "P2", "MV", "WACHSPRESS", "VEM"):
        raise ConfigError(f"unknown method {m!r}")
    if basis == "VEM":
        stab = StabilizationKind.parse(stab or None).value
    elif stab:
        raise ConfigError(f"stabilization only applies to VEM ({m!r})")
    return basis, stab


def thread_budget(default: int = 1) -> int:
    env = os.environ.get("POLYPDE_THREADS")
    return int(env) if env else int(default)


@dataclass
class BenchConfig:
    problems: list = field(default_factory=lambda: ["PS3"])
    domains: list = field(default_factory=lambda: ["US"])
    meshers: list = field(default_factory=lambda: ["DT4"])
    resolutions: list = field(default_factory=lambda: ladder())
    methods: list = field(default_factory=lambda: ["P1"])
    solvers: list = field(default_factory=lambda: ["direct"])
    rng_seed: int = 0
    output_dir: str = "bench_out"
    threads: int = 1

    def __post_init__(self):
        self.problems = [str(p).upper().replace("#", "") for p in self.problems]
        self.domains = [str(d).upper() for d in self.domains]
        for p in self.problems:
            if p not in PROBLEM_IDS:
                raise ConfigError(f"unknown problem {p!r}")
        for d in self.domains:
            if d not in DOMAIN_IDS:
                raise ConfigError(f"unknown domain {d!r}")
        self.meshers = [normalize_mesher(m) for m in self.meshers]
        self.methods = [parse_method(m) for m in self.methods]
        self.solvers = [str(s).lower() for s in self.solvers]
        for s in self.solvers:
            if s not in SOLVER_IDS:
                raise ConfigError(f"unknown solver {s!r}")
        self.resolutions = [int(r) for r in self.resolutions]
        self.threads = thread_budget(self.threads)

    @classmethod
    def from_json(cls, path) -> "BenchConfig":
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    def pairs(self):
        """Requested (problem, domain) pairs; raises on pairs outside the problem table."""
        out = []
        for p in self.problems:
            spec = make_problem(p)
            for d in self.domains:
                if d not in spec.compatible_domains:
                    raise ConfigError(f"{p}-{d} is not a benchmark pair ({p} runs on {spec.compatible_domains})")
                out.append((p, d))
        return out


@dataclass
class BenchRecord:
    problem: str
    domain: str
    mesher: str
    resolution: int
    n_vertices: int = 0
    n_cells: int = 0
    n_dofs: int = 0
    h_max: float = float("nan")
    method: str = ""
    stabilization: str = ""
    solver: str = ""
    assemble_time_s: float = float("nan")
    solve_time_s: float = float("nan")
    iterations: int = 0
    l2_error: float = float("nan")
    h1_error: float = float("nan")
    rng_seed: int = 0
    thread_budget: int = 1
    status: str = "ok"

    def key(self) -> tuple:
        return (self.problem, self.domain, self.mesher, int(self.resolution), self.method, self.stabilization, self.solver, int(self.rng_seed))


CSV_COLUMNS = tuple(f.name for f in fields(BenchRecord))
TIMING_COLUMNS = ("assemble_time_s", "solve_time_s")
_INT_COLUMNS = ("resolution", "n_vertices", "n_cells", "n_dofs", "iterations", "rng_seed", "thread_budget")
_FLOAT_COLUMNS = ("h_max", "assemble_time_s", "solve_time_s", "l2_error", "h1_error")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def read_records(path) -> list[BenchRecord]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for c in CSV_COLUMNS:
                v = row.get(c, "")
                if c in _INT_COLUMNS:
                    kw[c] = int(v) if v not in ("", None) else 0
                elif c in _FLOAT_COLUMNS:
                    kw[c] = float(v) if v not in ("", None) else float("nan")
                else:
                    kw[c] = v or ""
            out.append(BenchRecord(**kw))
    return out


class RecordWriter:
    """Append-only CSV writer; each row is flushed so a crash leaves a valid file."""

    def __init__(self, path):
        self.path = Path(path)
        new = not self.path.exists() or self.path.stat().st_size == 0
        self._fh = self.path.open("a", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        if new:
            self._w.writerow(CSV_COLUMNS)
            self._fh.flush()

    def write(self, rec: BenchRecord):
        d = asdict(rec)
        self._w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
        self._fh.flush()

    def close(self):
        self._fh.close()


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def exclusive_budget(threads: int) -> bool:
    """True when the 1-minute load leaves ``threads`` cores free for this run."""
    try:
        load = os.getloadavg()[0]
    except OSError:  # pragma: no cover - platform without load averages
        return False
    return load + threads <= (os.cpu_count() or 1) + 0.5


def _write_meta(out_dir: Path, config: BenchConfig, exclusive: bool):
    meta = {
        "thread_budget": config.threads,
        "exclusive": exclusive,
        "timing_repeats": TIMING_REPEATS,
        "config": {
            **asdict(config),
            "meshers": config.meshers,
            "methods": [f"VEM:{s}" if b == "VEM" else b for b, s in config.methods],
        },
    }
    (out_dir / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _solve_timed(system, solver: str, repeats: int):
    times, report = [], None
    for _ in range(repeats):
        report = solve(system, solver)
        times.append(report.wall_time)
    return report, statistics.median(times)


def run_suite(config: BenchConfig, *, resume: bool = True, repeats: int = TIMING_REPEATS, progress=None) -> list[BenchRecord]:
    """Run the full sweep; failures become rows and never abort it."""
    out_dir = Path(config.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise ConfigError(f"output directory {out_dir} is not writable: {err}") from None
    csv_path = out_dir / "records.csv"
    if not resume and csv_path.exists():
        csv_path.unlink()
    done = {r.key() for r in read_records(csv_path)} if resume else set()
    cache = MeshCache(out_dir / "meshes")
    exclusive = exclusive_budget(config.threads)
    if not exclusive:
        log.warning("host is loaded; timings in this run are not exclusive (see run_meta.json)")
    _write_meta(out_dir, config, exclusive)
    writer = RecordWriter(csv_path)
    new = []
    # CHOLMOD and BLAS are the only threaded kernels
    limiter = threadpool_limits(limits=max(1, config.threads))
    try:
        for pid, did in config.pairs():
            problem = make_problem(pid)
            for mesher in config.meshers:
                for res in config.resolutions:
                    base = dict(problem=pid, domain=did, mesher=mesher, resolution=res, rng_seed=config.rng_seed, thread_budget=config.threads)
                    todo = [
                        (b, s, sv)
                        for b, s in config.methods
                        for sv in config.solvers
                        if BenchRecord(**base, method=b, stabilization=s, solver=sv).key() not in done
                    ]
                    if not todo:
                        continue
                    try:
                        mesh = cache.get(did, mesher, res, config.rng_seed)
                        bad = validate(mesh)
                        if bad:
                            raise ValueError(f"invalid mesh: {bad[0]}")
                    except Exception as err:  # mesh generation failures are data
                        log.warning("mesh failed %s %s %s: %s", did, mesher, res, err)
                        for b, s, sv in todo:
                            rec = BenchRecord(**base, method=b, stabilization=s, solver=sv, status="mesh-failed")
                            writer.write(rec)
                            new.append(rec)
                        continue
                    geo = dict(n_vertices=mesh.n_vertices, n_cells=mesh.n_cells, h_max=h_max(mesh))
                    for b, s in config.methods:
                        subset = [sv for bb, ss, sv in todo if (bb, ss) == (b, s)]
                        if not subset:
                            continue
                        for rec in _run_method(problem, mesh, did, b, s, subset, base, geo, repeats):
                            writer.write(rec)
                            new.append(rec)
                            if progress:
                                progress(rec)
    finally:
        limiter.restore_original_limits()
        writer.close()
    return new


def _run_method(problem, mesh, did, basis, stab, solvers, base, geo, repeats):
    method = f"VEM:{stab}" if basis == "VEM" else basis
    reason = check_compatible(mesh, basis)
    if reason is not None:
        return [BenchRecord(**base, **geo, method=basis, stabilization=stab, solver=sv, status="incompatible") for sv in solvers]
    t0 = time.perf_counter()
    system = assemble_problem(problem, mesh, method, did)
    t_asm = time.perf_counter() - t0
    out = []
    for sv in solvers:
        rec = BenchRecord(**base, **geo, method=basis, stabilization=stab, solver=sv, n_dofs=system.n_dofs, assemble_time_s=t_asm)
        try:
            report, t = _solve_timed(system, sv, repeats)
        except SolverError as err:
            log.warning("solver %s failed on %s: %s", sv, method, err)
            rec.status = "solver-failed"
            out.append(rec)
            continue
        err = problem_errors(system, report.solution, problem)
        rec.solve_time_s = t
        rec.iterations = report.iterations
        rec.l2_error, rec.h1_error = err.l2, err.h1
        out.append(rec)
    return out


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def _series_key(r: BenchRecord):
    return (r.problem, r.domain, r.mesher, r.method, r.stabilization, r.solver)


def method_label(r: BenchRecord) -> str:
    return f"VEM:{r.stabilization}" if r.method == "VEM" else r.method


def _ok(records):
    return [r for r in records if r.status == "ok" and r.l2_error > 0 and r.solve_time_s > 0]


def emit_time_error_plot(records, path, group_by: str = "family", title: str | None = None) -> Path:
    """Log-log solve time against L2 error; series sharing a group become a min/max band.

    Groups are keyed by ``group_by`` (``family`` or ``mesher``) plus the method.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    records = list(records)
    if not _ok(records):
        raise ValueError("no ok records to plot")
    good = {id(r) for r in _ok(records)}
    groups: dict = {}
    for r in sorted(records, key=lambda r: (_series_key(r), r.resolution)):
        g = mesher_family(r.mesher) if group_by == "family" else r.mesher
        members = groups.setdefault((g, method_label(r)), {})
        series = members.setdefault(_series_key(r), [])
        if id(r) in good:
            series.append(r)

    plt.rcParams["svg.hashsalt"] = "polypde"
    plt.rcParams["svg.fonttype"] = "path"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    notes = []
    colors = plt.get_cmap("tab10")
    for i, (gkey, members) in enumerate(sorted(groups.items())):
        label = f"{gkey[0]} {gkey[1]}"
        c = colors(i % 10)
        gid = "series-" + re.sub(r"[^A-Za-z0-9]+", "-", label).strip("-")
        usable = [m for m in members.values() if m]
        if not usable:
            notes.append(f"{label}: no ok records")
            continue
        if len(usable) == 1:
            rs = usable[0]
            ax.plot([r.solve_time_s for r in rs], [r.l2_error for r in rs], "o-", color=c, label=label, gid=gid, ms=3)
            continue
        lo, hi, grid = band(usable)
        if grid is None:
            notes.append(f"{label}: no overlap")
            continue
        ax.fill_between(grid, lo, hi, color=c, alpha=0.3, label=label, gid=gid, lw=0)
    if not ax.has_data():
        plt.close(fig)
        raise ValueError("no plottable groups")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("solve time (s)")
    ax.set_ylabel("L2 error")
    if title:
        ax.set_title(title)
    if notes:
        ax.plot([], [], " ", label="omitted: " + "; ".join(notes))
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def band(members, n: int = 50):
    """Min/max of the series' log-log interpolants over their common time range."""
    logs = []
    for rs in members:
        t = np.log([r.solve_time_s for r in rs])
        e = np.log([r.l2_error for r in rs])
        order = np.argsort(t)
        logs.append((t[order], e[order]))
    a = max(t.min() for t, _ in logs)
    b = min(t.max() for t, _ in logs)
    if not a < b:
        # no common range: fall back to the union with edge clamping
        a = min(t.min() for t, _ in logs)
        b = max(t.max() for t, _ in logs)
        if not a < b:
            return None, None, None
    grid = np.linspace(a, b, n)
    vals = np.array([np.interp(grid, t, e) for t, e in logs])
    return np.exp(vals.min(0)), np.exp(vals.max(0)), np.exp(grid)


RATE_COLUMNS = ("problem", "domain", "mesher", "method", "stabilization", "n_points", "l2_rate", "h1_rate", "status")


def convergence_table(records) -> list[dict]:
    groups: dict = {}
    for r in records:
        if r.status != "ok":
            continue
        k = (r.problem, r.domain, r.mesher, r.method, r.stabilization)
        # errors do not depend on the solver; keep one row per resolution
        groups.setdefault(k, {}).setdefault(r.resolution, r)
    out = []
    for k, byres in sorted(groups.items()):
        rs = [byres[res] for res in sorted(byres)]
        row = dict(zip(RATE_COLUMNS[:5], k), n_points=len(rs), l2_rate="", h1_rate="", status="ok")
        if len(rs) < 3:
            row["status"] = f"skipped: {len(rs)} resolutions (need 3)"
        else:
            try:
                row["l2_rate"] = fit_convergence_rate([(r.h_max, r.l2_error) for r in rs])
                row["h1_rate"] = fit_convergence_rate([(r.h_max, r.h1_error) for r in rs])
            except ValueError as err:
                row["status"] = f"skipped: {err}"
        out.append(row)
    return out


def emit_convergence_table(records, path) -> list[dict]:
    rows = convergence_table(records)
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, RATE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    return rows


def monotone_fraction(records) -> float:
    """Share of adjacent resolution pairs, within one method and mesher, whose L2 error drops."""
    series: dict = {}
    for r in _ok(records):
        series.setdefault(_series_key(r), []).append(r)
    good = total = 0
    for rs in series.values():
        rs = sorted(rs, key=lambda r: r.resolution)
        for a, b in zip(rs, rs[1:]):
            total += 1
            good += b.l2_error < a.l2_error
    return good / total if total else float("nan")
