"""Pilot run that freezes the acceptance thresholds into ccflab/data/criteria.json.

Thresholds the theory does not supply are measured here on seeds that the
acceptance suite never uses, then stored with a safety margin.
"""

import json
import pathlib

from ccflab.ifs import PatternConfig, build_pattern_prefix
from ccflab.metrics import shrinking_target_run, threshold_targets

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "ccflab" / "data" / "criteria.json"
PILOT_SEED = 1001
KAPPA_MARGIN = 1.5


def main():
    crit = {
        "exact": {"n_inputs": 1000, "max_seconds": 60},
        "growth": {"n_orbits": 100, "length": 200},
        "roundtrip": {"n_words": 1000, "length": 30},
        "sandwich": {"n_words": 1000, "max_len": 12, "max_seconds": 120},
        "tail": {"d": 1, "n_samples": 100_000_000, "plateau": [5, 50], "ratio_max": 1.5,
                 "rel_agreement": 0.05, "t_values": [5, 7, 10, 14, 20, 28, 35, 42, 50],
                 "seeds": [11, 12]},
        "bb": {"d": 1, "reps": 50, "checkpoints": [10_000, 100_000, 1_000_000],
               "factor": 5.0, "fraction": 0.9, "theta_div": 0.4, "theta_conv": 0.6, "seed": 21},
        "levy": {"n": 10_000, "reps": 100, "k_stderr": 2.0, "seed": 31},
        "khinchine": {"n": 10_000, "reps": 100, "k_stderr": 3.0, "seed": 41},
        "loglaw": {"window": [0.4, 0.65]},
        "cylinder": {"window": [0.5, 3.0]},
    }
    dim = {"tol": 0.05, "sets": {
        "full": {"B": [2 ** k for k in range(3, 11)], "R_max": 2 ** 10},
        "integers": {"B": [2 ** k for k in range(3, 21)], "R_max": 2 ** 12},
        "powers:2": {"B": [2 ** k for k in range(12, 31)], "R_max": 2 ** 14},
    }, "n_fit": 6, "max_seconds": 300}
    crit["dim"] = dim

    checkpoints = [1_000, 10_000, 100_000]
    rep = shrinking_target_run(threshold_targets(0.4, checkpoints[-1]), checkpoints, 200,
                               d=1, seed=PILOT_SEED)
    pilot = max(rep.extra["var_over_mean"])
    crit["target"] = {"d": 1, "theta": 0.4, "spacing": 2, "reps": 200, "checkpoints": checkpoints,
                      "pilot_var_over_mean": pilot, "kappa": KAPPA_MARGIN * pilot, "seed": 51}
    print("target pilot", rep.extra["var_over_mean"])

    cfg = PatternConfig()
    res = build_pattern_prefix(cfg, verify_reexpansion=False)
    crit["pattern"] = {"horizon": cfg.horizon, "t": cfg.t, "eps": cfg.eps, "m": cfg.m,
                       "set": cfg.set_spec, "cutoff_shift": cfg.cutoff_shift,
                       "burn_in": res.report.burn_in}
    print("pattern burn-in", res.report.burn_in)
    OUT.write_text(json.dumps(crit, indent=2) + "\n")


if __name__ == "__main__":
    main()
