"""Worker scaling of corpus programs on a synthetic dataset.

Prints a CSV of median run time and speedup per (task, workers). Speedups
are bounded by the number of cores, which is printed first.

    python scripts/scaling_experiment.py --tasks A.1 D.1 --workers 1 2 4 8
"""
import argparse
import csv
import sys
from pathlib import Path

from boat.cli import bench
from boat.corpus import load_corpus, select_entries
from boat.engine import cpu_count
from boat.ingest import SyntheticSpec, write_synthetic_dataset
from boat.lang import check_source
from boat.storage import open_dataset


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("scaling-experiment"))
    ap.add_argument("--tasks", nargs="+", default=["A.1", "D.1"])
    ap.add_argument("--workers", type=int, nargs="+", default=[1, 2, 4, 8])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--counties", type=int, default=64)
    ap.add_argument("--grids", type=int, default=16)
    ap.add_argument("--days", type=int, default=4)
    ap.add_argument("--speed-grids", type=int, default=2)
    ap.add_argument("--seed", type=int, default=6)
    args = ap.parse_args(argv)

    spec = SyntheticSpec(seed=args.seed, counties=args.counties, grids_per_county=args.grids,
                         days=args.days, speed_grids_per_county=args.speed_grids)
    path = args.out / "ds"
    if not (path / "manifest.btd").exists():
        print(f"building {path} ...", file=sys.stderr)
        write_synthetic_dataset(spec, path)
    print(f"# cores={cpu_count()}", file=sys.stderr)

    w = csv.writer(sys.stdout)
    w.writerow(["task", "records", "workers", "median_seconds", "speedup"])
    with open_dataset(path) as ds:
        records = sum(e.count for kind in ds.index for e in ds.index[kind])
        for entry in select_entries(load_corpus(), args.tasks):
            typed = check_source(entry.source)
            for n, median, speedup in bench(typed, ds, args.workers, args.repeats):
                w.writerow([entry.id, records, n, f"{median:.3f}", f"{speedup:.2f}"])
                sys.stdout.flush()


if __name__ == "__main__":
    main()
