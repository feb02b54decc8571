#!/usr/bin/env python3
"""Write the benchmark system files used in the README and the test suite.

Usage: python3 scripts/make_systems.py [OUTDIR]   (default: ./systems)
"""

import json
import pathlib
import sys

SYSTEMS = {
    # single input driving a chain of two integrators
    "double_integrator": {
        "A": [[0.0, 0.0], [1.0, 0.0]],
        "B": [[1.0], [0.0]],
    },
    # scalar unstable OU: dx = x dt + dw
    "scalar_ou": {
        "A": [[1.0]],
        "B": [[1.0]],
    },
    # same drift with an offset: dx = (x - 1) dt + dw, fixed point at 1
    "affine_ou": {
        "A": [[1.0]],
        "B": [[1.0]],
        "alpha": [-1.0],
    },
    # fully driven 3d Brownian motion
    "elliptic3": {
        "A": [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
        "B": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    },
    # length-3 integrator chain, deepest bracket structure in the suite
    "chain3": {
        "A": [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        "B": [[1.0], [0.0], [0.0]],
    },
}


def main() -> int:
    outdir = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "systems")
    outdir.mkdir(parents=True, exist_ok=True)
    for name, payload in SYSTEMS.items():
        path = outdir / f"{name}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
