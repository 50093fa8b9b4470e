"""Small efficiency sweep: records, fitted rates and a time-vs-error plot.

Equivalent to
    polypde run --problems PS3 --domains US --meshers VP4,DT4 \
        --resolutions 100,200,400,800 --methods P1,MV,VEM -o sweep_out
    polypde rates sweep_out/records.csv
"""
from pathlib import Path

from polypde import bench

cfg = bench.BenchConfig(
    problems=["PS3"],
    domains=["US"],
    meshers=["VP4", "DT4"],
    resolutions=[100, 200, 400, 800],
    methods=["P1", "MV", "VEM"],
    solvers=["direct", "pcg"],
    output_dir="sweep_out",
)
records = bench.run_suite(cfg, resume=False)
out = Path(cfg.output_dir)
for row in bench.emit_convergence_table(records, out / "rates.csv"):
    if row["status"] == "ok":
        print(f"{row['mesher']:5s} {row['method']:4s} L2 {row['l2_rate']:.2f}  H1 {row['h1_rate']:.2f}")
bench.emit_time_error_plot(records, out / "time_error.svg")
print(f"monotone fraction {bench.monotone_fraction(records):.2f}, wrote {out}")
