#!/usr/bin/env python3
"""Solve the unit-square Dirac barycenter problem with the exact LP oracle.

Demonstrates the degenerate W1 geometry: every grid point inside the square
attains the same optimal objective (4 under L1), and two different diagonal
pairs are both valid refined forming sets.
"""

import json
import tempfile
from pathlib import Path

from barycoal.barycenter import refined_forming_set_check
from barycoal.experiment import run_oracle
from barycoal.measures import L1, L2, DiscreteMeasure

CORNERS = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]


def main() -> None:
    problem = {
        "schema": 1,
        "metric": "l1",
        "inputs": [{"points": [c], "weights": [1.0], "weight": 1.0} for c in CORNERS],
    }
    with tempfile.TemporaryDirectory() as tmp:
        ppath = Path(tmp) / "problem.json"
        rpath = Path(tmp) / "result.json"
        ppath.write_text(json.dumps(problem))
        result = run_oracle(ppath, rpath)
    print(f"four-corner objective: {result['objective']:.6f} (flat optimum is 4)")
    print(f"barycenter support: {result['barycenter']['points']}")
    print(f"per-input W1: {[round(w, 6) for w in result['per_input_w1']]}")

    measures = [DiscreteMeasure.dirac(c) for c in CORNERS]
    diag = [measures[0], measures[3]]
    anti = [measures[1], measures[2]]
    print(f"L1 refined forming set (main diagonal):  {refined_forming_set_check(diag, measures, L1)}")
    print(f"L1 refined forming set (anti diagonal):  {refined_forming_set_check(anti, measures, L1)}")
    print(f"L2 counter-case (diagonal, should fail): {refined_forming_set_check(diag, measures, L2)}")


if __name__ == "__main__":
    main()
