"""
Driving the command-line tool
=============================

The same computations through the ``qrng-minentropy`` entry point.  Each
call returns the exit code the shell would see.
"""

import tempfile
from pathlib import Path

from qrng_minentropy.cli import main

print("exit", main(["entropy", "--pixels", "9", "--mu-px", "28", "--eta", "0.5", "--mode", "conditional"]))
print("exit", main(["entropy", "--pixels", "1024", "--mode", "classical", "--p1", "0.5", "--rate", "49000"]))
print("exit", main(["oracle-check", "--max-pixels", "4", "--max-photons", "5", "--numeric", "exact"]))

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "sweep.csv"
    main(["sweep", "--pixels", "9", "--eta", "0.5", "--mu-grid", "0.5,1,2", "--output", str(out)])
    print(out.read_text())

# an infeasible request: no efficiency reproduces this click probability
print("exit", main(["entropy", "--pixels", "4", "--mu-px", "1", "--p1", "0.9"]))
