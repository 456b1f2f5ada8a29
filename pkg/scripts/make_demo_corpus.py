#!/usr/bin/env python3
"""Generate a deterministic synthetic image corpus for eval and NIQE fitting.

Each image mixes smooth gradients, band-limited texture, and a few hard-edged
discs, so MSCN statistics have both signs and the sharpness gate keeps patches.

Examples:
  python3 scripts/make_demo_corpus.py --out demo_corpus --count 8
  python3 scripts/make_demo_corpus.py --out fit_corpus --count 20 --seed 100
"""

import argparse
import sys
from pathlib import Path

from coz.synth import synth_image
from coz.wire import save_png


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--count", type=int, default=8)
    ap.add_argument("--side", type=int, default=512)
    ap.add_argument("--seed", type=int, default=0, help="seed of the first image; image i uses seed+i")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        path = out / f"demo_{args.seed + i:04d}.png"
        save_png(synth_image(args.seed + i, side=args.side), path)
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
