#!/usr/bin/env python3
"""Convert MotionSense DeviceMotion data into the clustercl CSV layout.

Input:  <src>/<code>_<trial>/sub_<N>.csv from A_DeviceMotion_data, with
        columns including gravity.{x,y,z}, rotationRate.{x,y,z} and
        userAcceleration.{x,y,z}, sampled at 50 Hz.
Output: <dst>/subject-<N>_activity-<label>_trial-<trial>.csv with the header
        t,ax,ay,az,gx,gy,gz, plus <dst>/manifest.json.

Total acceleration is gravity + userAcceleration (in g); the gyroscope
channels are rotationRate (rad/s).
"""

import argparse
import csv
import json
import re
import sys
from pathlib import Path

SAMPLE_RATE_HZ = 50
ACTIVITIES = ["dws", "ups", "wlk", "jog", "std", "sit"]
CLASS_NAMES = ["downstairs", "upstairs", "walking", "jogging", "standing", "sitting"]
DIR_RE = re.compile(r"([a-z]+)_(\d+)$")
FILE_RE = re.compile(r"sub_(\d+)\.csv$")


def convert(src: Path, dst: Path) -> int:
    dst.mkdir(parents=True, exist_ok=True)
    written = 0
    for trial_dir in sorted(p for p in src.iterdir() if p.is_dir()):
        dm = DIR_RE.match(trial_dir.name)
        if not dm or dm.group(1) not in ACTIVITIES:
            continue
        label, trial = ACTIVITIES.index(dm.group(1)), int(dm.group(2))
        for f in sorted(trial_dir.glob("sub_*.csv")):
            fm = FILE_RE.search(f.name)
            if not fm:
                continue
            subject = int(fm.group(1))
            out = dst / f"subject-{subject}_activity-{label}_trial-{trial}.csv"
            with f.open(newline="") as fin, out.open("w", newline="") as fout:
                reader = csv.DictReader(fin)
                w = csv.writer(fout)
                w.writerow(["t", "ax", "ay", "az", "gx", "gy", "gz"])
                for i, row in enumerate(reader):
                    acc = [float(row[f"gravity.{a}"]) + float(row[f"userAcceleration.{a}"]) for a in "xyz"]
                    gyro = [float(row[f"rotationRate.{a}"]) for a in "xyz"]
                    w.writerow([f"{i / SAMPLE_RATE_HZ:.4f}", *(f"{v:.6g}" for v in acc + gyro)])
            written += 1
    (dst / "manifest.json").write_text(
        json.dumps({"sample_rate_hz": SAMPLE_RATE_HZ, "class_names": CLASS_NAMES}, indent=2) + "\n")
    return written


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("src", type=Path, help="A_DeviceMotion_data directory")
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
