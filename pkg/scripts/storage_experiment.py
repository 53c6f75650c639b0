"""Storage reduction of the binary format against the CSV feeds.

Builds seeded synthetic datasets of growing length and prints one CSV row
per (days, codec): raw CSV bytes, built bytes and the ratio.

    python scripts/storage_experiment.py --days 1 7 14 --out /tmp/storage
"""
import argparse
import csv
import shutil
import sys
import time
from pathlib import Path

from boat.ingest import SyntheticSpec, generate_synthetic, ingest
from boat.storage import CODEC_DEFLATE, CODEC_IDENTITY, open_dataset
from boat.storage.encoding import CODECS


def measure(spec, root: Path, codec: int) -> dict:
    raw_dir = root / f"raw-{spec.days}"
    if not (raw_dir / "weather.csv").exists():
        generate_synthetic(spec, raw_dir)
    out = root / f"ds-{spec.days}-{CODECS[codec]}"
    shutil.rmtree(out, ignore_errors=True)
    t0 = time.perf_counter()
    report = ingest([raw_dir / "weather.csv"], [raw_dir / "speed.csv"], raw_dir / "grids.csv",
                    out, codec=codec)
    seconds = time.perf_counter() - t0
    with open_dataset(out) as ds:
        st = ds.stats()
    return {"days": spec.days, "codec": CODECS[codec],
            "weather_rows": report.accepted["weather"], "speed_rows": report.accepted["speed"],
            "raw_bytes": st.raw_bytes, "built_bytes": st.total_bytes,
            "weather_ratio": f"{st.kinds['weather'].ratio:.2f}",
            "speed_ratio": f"{st.kinds['speed'].ratio:.2f}",
            "ratio": f"{st.ratio:.2f}", "ingest_seconds": f"{seconds:.1f}"}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("storage-experiment"))
    ap.add_argument("--days", type=int, nargs="+", default=[1, 7, 14])
    ap.add_argument("--counties", type=int, default=16)
    ap.add_argument("--grids", type=int, default=16)
    ap.add_argument("--speed-grids", type=int, default=2)
    ap.add_argument("--seed", type=int, default=4)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)

    writer = None
    for days in args.days:
        spec = SyntheticSpec(seed=args.seed, counties=args.counties, grids_per_county=args.grids,
                             days=days, speed_grids_per_county=args.speed_grids)
        for codec in (CODEC_IDENTITY, CODEC_DEFLATE):
            row = measure(spec, args.out, codec)
            if writer is None:
                writer = csv.DictWriter(sys.stdout, fieldnames=list(row))
                writer.writeheader()
            writer.writerow(row)
            sys.stdout.flush()


if __name__ == "__main__":
    main()
