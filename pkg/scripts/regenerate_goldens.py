"""Write tests/golden/manifest.json and one zero-elapsed CSV per default sweep.

Run this only when a solver change is intended to alter the sweep output;
tests/test_sweep.py and the acceptance suite compare against these files
byte for byte.
"""
import argparse
import json
import pathlib

from strn.solver import SolverParameters
from strn.suite import problem_names
from strn.sweep import SWEEPABLE, SweepSpecification, default_grid, emit_csv, run_sweep

GOLDEN = pathlib.Path(__file__).resolve().parent.parent / "tests" / "golden"


def golden_spec():
    base = SolverParameters()
    return {
        "problems": problem_names(),
        "start_indices": "all",
        "sweeps": [
            {"parameter": name, "values": list(default_grid(name, base)), "csv": f"sweep_{name}.csv"}
            for name in SWEEPABLE
        ],
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dir", type=pathlib.Path, default=GOLDEN)
    args = ap.parse_args()
    args.dir.mkdir(parents=True, exist_ok=True)
    spec = golden_spec()
    (args.dir / "manifest.json").write_text(json.dumps(spec, indent=2) + "\n", encoding="utf-8")
    for sweep in spec["sweeps"]:
        records = run_sweep(SweepSpecification(parameter=sweep["parameter"], values=sweep["values"],
                                               problems=spec["problems"]))
        emit_csv(records, args.dir / sweep["csv"], zero_elapsed=True)
        print(f"{sweep['csv']}: {len(records)} records")


if __name__ == "__main__":
    main()
