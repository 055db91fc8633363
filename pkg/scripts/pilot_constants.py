"""Measure C_diam per ring and freeze the IFS constants into ccflab/data/constants.json.

Run once before the acceptance suite; the file is committed with the package.
"""

import json
import pathlib

from ccflab.ifs import c_diam_cap, ifs_constants, measure_c_diam
from ccflab.ring import SUPPORTED_D

MARGIN = 1.25
OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "ccflab" / "data" / "constants.json"


def main():
    table = {}
    for d in SUPPORTED_D:
        measured = measure_c_diam(d, n_words=2000, max_len=16, seed=7)
        cap = c_diam_cap(d)
        rec = ifs_constants(d)
        rec["C_diam_measured"] = measured
        rec["C_diam_cap"] = cap
        rec["C_diam"] = min(cap, MARGIN * measured)
        table[str(d)] = rec
        print(d, rec)
    OUT.parent.mkdir(exist_ok=True)
    OUT.write_text(json.dumps(table, indent=2) + "\n")


if __name__ == "__main__":
    main()
