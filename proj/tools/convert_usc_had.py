#!/usr/bin/env python3
"""Convert the USC-HAD release into the clustercl CSV layout.

Input:  <src>/Subject<N>/a<activity>t<trial>.mat, each holding a
        `sensor_readings` array [T x 6] (acc x/y/z in g, gyro x/y/z in dps)
        sampled at 100 Hz.
Output: <dst>/subject-<N>_activity-<activity-1>_trial-<trial>.csv with the
        header t,ax,ay,az,gx,gy,gz, plus <dst>/manifest.json.
"""

import argparse
import csv
import json
import re
import sys
from pathlib import Path

import numpy as np
import scipy.io

SAMPLE_RATE_HZ = 100
CLASS_NAMES = [
    "walking_forward", "walking_left", "walking_right", "walking_upstairs",
    "walking_downstairs", "running_forward", "jumping_up", "sitting",
    "standing", "sleeping", "elevator_up", "elevator_down",
]
FILE_RE = re.compile(r"a(\d+)t(\d+)\.mat$")
SUBJECT_RE = re.compile(r"Subject(\d+)$", re.IGNORECASE)


def convert(src: Path, dst: Path) -> int:
    dst.mkdir(parents=True, exist_ok=True)
    written = 0
    for subject_dir in sorted(p for p in src.iterdir() if p.is_dir()):
        sm = SUBJECT_RE.match(subject_dir.name)
        if not sm:
            continue
        subject = int(sm.group(1))
        for mat in sorted(subject_dir.glob("*.mat")):
            fm = FILE_RE.search(mat.name)
            if not fm:
                print(f"skipping {mat}: unexpected file name", file=sys.stderr)
                continue
            activity, trial = int(fm.group(1)), int(fm.group(2))
            readings = np.asarray(scipy.io.loadmat(mat)["sensor_readings"], dtype=float)
            if readings.ndim != 2 or readings.shape[1] != 6:
                print(f"skipping {mat}: sensor_readings has shape {readings.shape}", file=sys.stderr)
                continue
            out = dst / f"subject-{subject}_activity-{activity - 1}_trial-{trial}.csv"
            with out.open("w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["t", "ax", "ay", "az", "gx", "gy", "gz"])
                for i, row in enumerate(readings):
                    w.writerow([f"{i / SAMPLE_RATE_HZ:.4f}", *(f"{v:.6g}" for v in row)])
            written += 1
    (dst / "manifest.json").write_text(
        json.dumps({"sample_rate_hz": SAMPLE_RATE_HZ, "class_names": CLASS_NAMES}, indent=2) + "\n")
    return written


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("src", type=Path, help="USC-HAD root containing Subject<N> folders")
    ap.add_argument("dst", type=Path, help="output directory")
    args = ap.parse_args()
    if not args.src.is_dir():
        print(f"error: {args.src} is not a directory", file=sys.stderr)
        return 2
    n = convert(args.src, args.dst)
    print(f"wrote {n} recordings to {args.dst}")
    return 0 if n else 1


if __name__ == "__main__":
    sys.exit(main())
