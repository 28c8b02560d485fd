#!/usr/bin/env python3
"""Generate a synthetic WFDB-format database for pipeline testing.

Writes .hea/.dat/.atr triplets for every standard record name so the full
ingest -> preprocess -> train -> evaluate chain can run without the real
recordings. Usage:

    python scripts/make_synthetic_db.py /tmp/synthdb --duration 600 --seed 7
"""
import argparse

from ecgres import synthetic


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", help="directory to create the database in")
    ap.add_argument("--duration", type=int, default=600,
                    help="seconds of signal per record (default 600)")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    synthetic.make_database(args.out_dir, duration_s=args.duration, seed=args.seed)
    print(f"wrote synthetic database to {args.out_dir}")


if __name__ == "__main__":
    main()
