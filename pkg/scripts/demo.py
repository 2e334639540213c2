#!/usr/bin/env python3
"""Build a synthetic coastal town end to end and optionally serve it.

    python scripts/demo.py --out /tmp/demo_town --seed 7 --buildings 50 --serve

Writes the whole artifact chain (LAS, DEM, footprints, LOD2 buildings,
tileset, 24 flood scenarios, summaries) under --out and, with --serve,
starts the scene server for the dashboard.
"""

import argparse
import json
import sys
from pathlib import Path

from coastaltwin.cli import main as twin_main


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", required=True, help="output directory for the scene bundle")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--buildings", type=int, default=50)
    p.add_argument("--extent", type=float, default=250.0)
    p.add_argument("--density", type=float, default=8.0)
    p.add_argument("--serve", action="store_true", help="start the HTTP server afterwards")
    p.add_argument("--port", type=int, default=8008)
    args = p.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg_path = out / "twin.json"
    cfg_path.write_text(
        json.dumps(
            {
                "synth": {
                    "seed": args.seed,
                    "n_buildings": args.buildings,
                    "extent_m": args.extent,
                    "density_pts_per_m2": args.density,
                },
                "server": {"port": args.port},
            },
            indent=2,
        )
    )
    for stage in ("synth", "all"):
        code = twin_main([stage, "--config", str(cfg_path)])
        if code != 0:
            return code
    print(f"scene bundle ready in {out}")
    if args.serve:
        print(f"serving on http://127.0.0.1:{args.port} (Ctrl-C to stop)")
        return twin_main(["serve", "--config", str(cfg_path)])
    print(f"serve it later with: twin serve --config {cfg_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
