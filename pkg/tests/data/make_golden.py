"""Regenerate the golden CLI outputs for ``fixture_1d.json``.

Run only after the oracle-backed tests pass; the SVG is not frozen.
"""
from pathlib import Path

from galerkin_branches.cli import main

HERE = Path(__file__).parent
GOLDEN = {
    "eig": ["curve.csv", "aux_spectrum.json"],
    "branch": ["branch.csv"],
    "sweep": ["distances.csv", "limit_diagnostics.csv", "sweep.json"],
}

if __name__ == "__main__":
    out = HERE / "golden"
    for cmd in GOLDEN:
        assert main([cmd, "--config", str(HERE / "fixture_1d.json"), "--out", str(out)]) == 0
    (out / "diagram.svg").unlink()
