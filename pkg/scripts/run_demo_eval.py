#!/usr/bin/env python3
"""End-to-end offline demo: synthesize a corpus, run the eval harness, show the table.

Runs the two endpoint-free methods (``nn_interp`` and ``coz_null``) with native
NIQE, then prints the markdown comparison table. At the deepest magnifications
windows can go statistically flat and NIQE rows get worst-value substitutions;
the harness exits 2 in that case, which this demo reports but tolerates.

Example:
  python3 scripts/run_demo_eval.py --workdir demo_run --count 8 --recursions 4
"""

import argparse
import sys
from pathlib import Path

from coz.cli import main as coz_main
from coz.synth import synth_image
from coz.wire import save_png


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workdir", default="demo_run")
    ap.add_argument("--count", type=int, default=8)
    ap.add_argument("--seed", type=int, default=500)
    ap.add_argument("--scale", type=int, default=4)
    ap.add_argument("--recursions", type=int, default=4)
    ap.add_argument("--base-resolution", type=int, default=512)
    args = ap.parse_args(argv)

    work = Path(args.workdir)
    in_dir = work / "corpus"
    out_dir = work / "eval"
    in_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        save_png(synth_image(args.seed + i, side=args.base_resolution),
                 in_dir / f"demo_{i:03d}.png")
    print(f"corpus: {args.count} images in {in_dir}")

    code = coz_main([
        "eval",
        "--input-dir", str(in_dir),
        "--output-dir", str(out_dir),
        "--methods", "nn_interp,coz_null",
        "--metrics", "niqe",
        "--scale", str(args.scale),
        "--recursions", str(args.recursions),
        "--base-resolution", str(args.base_resolution),
        "--backend", "bicubic",
    ])
    print(f"\nharness exit code: {code}")

    report = out_dir / "report.md"
    if report.exists():
        print(f"\n{report}:\n")
        print(report.read_text())
    return 0 if code in (0, 2) else code


if __name__ == "__main__":
    sys.exit(main())
