"""ccf-lab: command-line front end.

Every run echoes its full configuration into its outputs.  With --out STEM the
command writes STEM.csv (data rows under a versioned comment header) and
STEM.json (config, data, verdict); without it the chosen --format goes to stdout.
Exit codes: 0 pass (or no verdict), 2 fail verdict, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import tempfile
from dataclasses import asdict, dataclass, field

from . import __version__

SCHEMA = "1"
EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class CliParseError(ValueError):
    def __init__(self, text, pos, why):
        self.pos = pos
        super().__init__(f"cannot parse {text!r} at position {pos}: {why}")


class _Parser(argparse.ArgumentParser):
    # usage errors are errors (exit 1); exit 2 is reserved for a failed verdict
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    command: str
    d: int = 1
    seed: int = 0
    samples: int | None = None
    n: int | None = None
    reps: int | None = None
    out: str | None = None
    format: str = "json"
    precision: str = "double"
    workers: int = 1
    options: dict = field(default_factory=dict)


@dataclass
class Result:
    header: list
    rows: list
    summary: dict
    verdict: bool | None = None


# --- parsing helpers ---------------------------------------------------------------------

_NUM = r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?"
_COMPLEX = re.compile(rf"\s*([+-]?\s*{_NUM})?\s*(?:([+-])\s*({_NUM})?\s*\*?\s*[ij])?\s*$")
_IMAG_ONLY = re.compile(rf"\s*([+-]?)\s*({_NUM})?\s*\*?\s*[ij]\s*$")


def _fail_pos(text, allowed):
    for i, ch in enumerate(text):
        if ch not in allowed:
            return i
    return len(text)


def parse_complex(text: str) -> complex:
    """Decimal complex such as '0.3+0.2i', '-1e-3i' or '0.25'."""
    m = _IMAG_ONLY.match(text)
    if m:
        mag = float(m.group(2) or 1)
        return complex(0, -mag if m.group(1) == "-" else mag)
    m = _COMPLEX.match(text)
    if not m or not text.strip() or (m.group(1) is None and m.group(2) is None):
        raise CliParseError(text, _fail_pos(text, "0123456789.+-eEij* "), "expected a decimal complex")
    re_part = float(m.group(1).replace(" ", "")) if m.group(1) else 0.0
    im_part = 0.0
    if m.group(2):
        im_part = float(m.group(3) or 1) * (-1 if m.group(2) == "-" else 1)
    return complex(re_part, im_part)


_RING_TERM = re.compile(r"\s*([+-]?)\s*([0-9]*)\s*\*?\s*([iw]?)\s*")


def parse_ring(text: str, d: int):
    """Ring element 'a+bw' in the basis {1, omega}; 'i' is accepted as a synonym for omega."""
    from .ring import element

    s = text.strip()
    if s.startswith("[") and s.endswith("]"):
        try:
            a, b = (int(v) for v in s[1:-1].split(","))
        except ValueError:
            raise CliParseError(text, 1, "expected [a,b]") from None
        return element(d, a, b)
    pos, a, b = 0, 0, 0
    seen = False
    while pos < len(s):
        m = _RING_TERM.match(s, pos)
        if not m or m.end() == pos or (not m.group(2) and not m.group(3)):
            raise CliParseError(text, m.end() if m else pos, "expected an integer or an omega term")
        if seen and not m.group(1):
            raise CliParseError(text, m.start(), "missing sign between terms")
        coef = int(m.group(2)) if m.group(2) else 1
        coef = -coef if m.group(1) == "-" else coef
        if m.group(3):
            b += coef
        else:
            a += coef
        seen = True
        pos = m.end()
    if not seen:
        raise CliParseError(text, 0, "empty element")
    return element(d, a, b)


def parse_field(text: str, d: int):
    """'num/den' with ring elements on both sides, e.g. '1/2+2i'."""
    from .ring import FieldElement

    if "/" not in text:
        return FieldElement(parse_ring(text, d), parse_ring("1", d))
    i = text.index("/")
    num = parse_ring(text[:i], d)
    try:
        den = parse_ring(text[i + 1:], d)
    except CliParseError as exc:
        raise CliParseError(text, i + 1 + exc.pos, "bad denominator") from None
    if den.is_zero():
        raise CliParseError(text, i + 1, "zero denominator")
    return FieldElement(num, den)


def _int_list(text):
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from None


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list, got {text!r}") from None


def _range_list(text):
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    return _int_list(text)


def _word(text, d):
    return [parse_ring(t, d) for t in text.split(";") if t.strip()]


# --- commands ------------------------------------------------------------------------------

def _criteria():
    from .metrics import load_criteria

    return load_criteria()


def cmd_expand(cfg: RunConfig) -> Result:
    from .dynamics import expand_exact, expand_float

    o = cfg.options
    if o.get("exact"):
        exp = expand_exact(parse_field(o["exact"], cfg.d))
    elif o.get("point"):
        exp = expand_float(parse_complex(o["point"]), cfg.n or 50, cfg.d, precision=cfg.precision)
    else:
        raise UsageError("expand needs --point or --exact")
    rec = exp.to_record()
    rows = [[k + 1, a.a, a.b] for k, a in enumerate(exp.digits)]
    return Result(["k", "a", "b"], rows, rec)


def cmd_domain(cfg: RunConfig) -> Result:
    from .geometry import build_domain

    dom = build_domain(cfg.d)
    rec = dom.to_json()
    return Result(["x", "y"], rec["vertices"], rec)


def cmd_constants(cfg: RunConfig) -> Result:
    from .ifs import _frozen_constants, ifs_constants

    rec = _frozen_constants().get(str(cfg.d)) or ifs_constants(cfg.d)
    return Result(["key", "value"], [[k, v] for k, v in rec.items()], dict(rec))


def cmd_tail(cfg: RunConfig) -> Result:
    from .metrics import tail_estimate

    c = _criteria().get("tail", {})
    ts = _float_list(cfg.options["t"]) if cfg.options.get("t") else c.get(
        "t_values", [5, 7, 10, 14, 20, 28, 35, 42, 50])
    r = tail_estimate(cfg.d, ts, cfg.samples or 1_000_000, seed=cfg.seed, workers=cfg.workers)
    rows = [[t, f.value, f.stderr, t * t * f.value] for t, f in zip(r.t_values, r.F)]
    ratio_max = c.get("ratio_max", 1.5)
    summary = {"H": r.H.to_dict(), "plateau": list(r.plateau), "plateau_ratio": r.plateau_ratio,
               "ratio_max": ratio_max, "n_discarded": r.n_discarded}
    return Result(["t", "F", "stderr", "t2F"], rows, summary, r.plateau_ratio <= ratio_max)


def cmd_levy(cfg: RunConfig) -> Result:
    from .metrics import levy_estimate

    r = levy_estimate(cfg.d, cfg.n or 10_000, cfg.reps or 100, seed=cfg.seed, workers=cfg.workers)
    rows = [["A", r.method_a.value, r.method_a.stderr], ["B", r.method_b.value, r.method_b.stderr]]
    ok = r.agree and r.method_a.value >= r.lower_bound
    summary = {"method_a": r.method_a.to_dict(), "method_b": r.method_b.to_dict(), "L": r.L,
               "growth_fit": r.growth_fit, "lower_bound": r.lower_bound,
               "combined_stderr": r.combined_stderr}
    return Result(["method", "beta", "stderr"], rows, summary, ok)


def cmd_khinchine(cfg: RunConfig) -> Result:
    from .metrics import khinchine_estimate

    r = khinchine_estimate(cfg.d, cfg.n or 10_000, cfg.reps or 100, seed=cfg.seed, workers=cfg.workers)
    k = _criteria().get("khinchine", {}).get("k_stderr", 3.0)
    ok = r.estimate.value > 0 and r.cauchy_gap <= k * r.estimate.stderr
    rows = [["n", r.estimate.value, r.estimate.stderr], ["n/2", r.half.value, r.half.stderr]]
    summary = {"kappa": r.estimate.to_dict(), "half": r.half.to_dict(), "K": r.K,
               "cauchy_gap": r.cauchy_gap}
    return Result(["length", "kappa", "stderr"], rows, summary, ok)


def _report_result(rep) -> Result:
    rows = [[n, s, ci[0], ci[1]] for n, s, ci in rep.checkpoints]
    return Result(["N", "statistic", "ci_lo", "ci_hi"], rows, rep.to_dict(), rep.verdict)


def cmd_bb(cfg: RunConfig) -> Result:
    from .metrics import bb_exceedance

    c = _criteria().get("bb", {})
    cps = _int_list(cfg.options["checkpoints"]) if cfg.options.get("checkpoints") else c.get(
        "checkpoints", [10_000, 100_000, 1_000_000])
    rep = bb_exceedance(cfg.d, float(cfg.options.get("theta", 0.4)), cps, cfg.reps or c.get("reps", 50),
                        seed=cfg.seed, workers=cfg.workers, factor=c.get("factor", 5.0),
                        fraction=c.get("fraction", 0.9))
    return _report_result(rep)


def cmd_target(cfg: RunConfig) -> Result:
    from .metrics import shrinking_target_run, threshold_targets

    c = _criteria().get("target", {})
    cps = _int_list(cfg.options["checkpoints"]) if cfg.options.get("checkpoints") else c.get(
        "checkpoints", [1_000, 10_000, 100_000])
    theta = float(cfg.options.get("theta", c.get("theta", 0.4)))
    targets = threshold_targets(theta, cps[-1], spacing=int(cfg.options.get("spacing", 2)))
    rep = shrinking_target_run(targets, cps, cfg.reps or c.get("reps", 200), d=cfg.d, seed=cfg.seed,
                               workers=cfg.workers, kappa=c.get("kappa"),
                               case="divergent" if theta <= 0.5 else "convergent")
    rows = [[n, s, ci[0], ci[1]] for n, s, ci in rep.checkpoints]
    return Result(["N", "mean", "var", "var_over_mean"], rows, rep.to_dict(), rep.verdict)


def cmd_mix(cfg: RunConfig) -> Result:
    from .metrics import mixing_probe

    o = cfg.options
    b = _word(o.get("b") or "2", cfg.d)
    c = _word(o.get("c") or o.get("b") or "2", cfg.d)
    gaps = _range_list(o.get("gaps") or "0:20")
    r = mixing_probe(b, c, gaps, cfg.samples or 1_000_000, seed=cfg.seed, d=cfg.d, workers=cfg.workers)
    rows = [[g, cv, se] for g, cv, se in zip(r.gaps, r.cov, r.stderr)]
    summary = {"rho": r.rho, "status": r.status, "mu_b": r.mu_b, "mu_c": r.mu_c, "lag0": r.lag0}
    return Result(["gap", "cov", "stderr"], rows, summary)


def cmd_dim(cfg: RunConfig) -> Result:
    from .ifs import DigitSet, dimension_trend, tau_analytic

    s = DigitSet.parse(cfg.options.get("set") or "integers", cfg.d)
    Bs = _float_list(cfg.options["B"]) if cfg.options.get("B") else [2.0 ** k for k in range(5, 13)]
    tr = dimension_trend(s, Bs)
    t = tau_analytic(s)
    half = None if t is None else float(t) / 2
    rows = [[cfg.d, s.name, b.B, b.s_lower, b.s_upper, half] for b in tr.brackets]
    summary = {"extrapolated": tr.extrapolated, "extrapolated_lower": tr.extrapolated_lower,
               "extrapolated_upper": tr.extrapolated_upper, "tau_half": half,
               "monotone": tr.monotone_lower and tr.monotone_upper}
    return Result(["d", "set", "B", "s_lower", "s_upper", "tau_half"], rows, summary)


def cmd_tau(cfg: RunConfig) -> Result:
    from .ifs import DigitSet, tau_analytic, tau_numeric

    s = DigitSet.parse(cfg.options.get("set") or "integers", cfg.d)
    R_max = float(cfg.options.get("rmax") or 2 ** 12)
    est = tau_numeric(s, R_max)
    t = tau_analytic(s)
    ok = None if t is None else abs(est.value - float(t)) <= 0.05
    summary = {"estimate": est.to_dict(), "tau_analytic": None if t is None else str(t)}
    return Result(["set", "R_max", "tau", "stderr"], [[s.name, R_max, est.value, est.stderr]], summary, ok)


def cmd_pattern(cfg: RunConfig) -> Result:
    from .ifs import PatternConfig, build_pattern_prefix

    o = cfg.options
    c = _criteria().get("pattern", {})
    pc = PatternConfig(d=cfg.d, set_spec=o.get("set") or c.get("set", "integers"),
                       horizon=int(cfg.n or c.get("horizon", 10_000)),
                       cutoff_shift=float(o.get("cutoff_shift", c.get("cutoff_shift", 3.0))),
                       seed=cfg.seed)
    if o.get("cutoff_const") is not None:
        const = float(o["cutoff_const"])
        pc.cutoff = lambda: (lambda n: const)  # type: ignore[method-assign]
    res = build_pattern_prefix(pc, corrupt_at=o.get("corrupt"))
    rep = res.report
    burn = c.get("burn_in", rep.burn_in)
    prof_ok = bool((res.profile[burn:] >= 0).all()) if burn < len(res.profile) else True
    rows = [[k + 1, a.a, a.b] for k, a in enumerate(res.word)]
    summary = {"ok": rep.ok, "first_failure": rep.first_failure, "reason": rep.reason,
               "sparse_times": rep.times, "n0": rep.n0, "c0": rep.c0, "burn_in": burn,
               "profile_ok": prof_ok, "profile_min_after_burn_in": rep.profile_min_after_burn_in}
    return Result(["k", "a", "b"], rows, summary, rep.ok and prof_ok)


COMMANDS = {
    "expand": cmd_expand, "domain": cmd_domain, "tail": cmd_tail, "levy": cmd_levy,
    "khinchine": cmd_khinchine, "bb": cmd_bb, "target": cmd_target, "mix": cmd_mix,
    "dim": cmd_dim, "tau": cmd_tau, "pattern": cmd_pattern, "constants": cmd_constants,
}


# --- output --------------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item"):
        return _jsonable(x.item())
    return x


def render_csv(cfg: RunConfig, res: Result) -> str:
    buf = io.StringIO()
    buf.write(f"# ccf-lab v{SCHEMA}\n")
    buf.write("# config: " + json.dumps(_jsonable(asdict(cfg)), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(res.header)
    for row in res.rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def render_json(cfg: RunConfig, res: Result) -> str:
    doc = {"schema": f"ccf-lab v{SCHEMA}", "version": __version__, "config": asdict(cfg),
           "verdict": res.verdict, "summary": res.summary,
           "data": {"header": res.header, "rows": res.rows}}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ccf-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _stem(out: str) -> str:
    root, ext = os.path.splitext(out)
    return root if ext in (".csv", ".json") else out


# --- entry point ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ccf-lab", description="Nearest-integer complex continued fractions.")
    p.add_argument("--version", action="version", version=f"ccf-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--d", type=int, default=1, help="ring parameter: 1, 2, 3, 7 or 11")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, help="Monte Carlo sample count")
    common.add_argument("--n", type=int, help="orbit length or horizon")
    common.add_argument("--reps", type=int, help="independent replicates")
    common.add_argument("--out", metavar="STEM", help="write STEM.csv and STEM.json atomically")
    common.add_argument("--format", choices=["csv", "json"], default="json", help="stdout format")
    common.add_argument("--precision", default="double", help="double or ext:<bits>")
    common.add_argument("--workers", type=int, default=1, help="threads; output does not depend on it")
    specs = {
        "expand": [("--point",), ("--exact",)],
        "tail": [("--t",)],
        "bb": [("--theta",), ("--checkpoints",)],
        "target": [("--theta",), ("--checkpoints",), ("--spacing",)],
        "mix": [("--b",), ("--c",), ("--gaps",)],
        "dim": [("--set",), ("--B",)],
        "tau": [("--set",), ("--rmax",)],
        "pattern": [("--set",), ("--cutoff-shift",), ("--cutoff-const",), ("--corrupt",)],
    }
    helps = {
        "expand": "digits of a point (--point x+yi) or an exact field element (--exact num/den)",
        "domain": "vertices and radii of the fundamental domain",
        "constants": "A0, C1, C2, gamma and C_diam",
        "tail": "tail probabilities of |a_1| and the plateau constant",
        "levy": "Levy exponent by two methods",
        "khinchine": "Khinchine-type mean of log|a_n|",
        "bb": "Borel-Bernstein exceedance counts",
        "target": "shrinking-target counts and variance-to-mean ratio",
        "mix": "covariance of two cylinder indicators across gaps",
        "dim": "pressure brackets for a digit set over a list of B",
        "tau": "numerical convergence exponent of a digit set",
        "pattern": "build and validate a sparse-pattern prefix",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps.get(name))
        for (flag,) in specs.get(name, []):
            kw = {"type": int} if flag == "--corrupt" else {}
            sp.add_argument(flag, **kw)
    return p


def _config(ns) -> RunConfig:
    from .ring import check_d

    check_d(ns.d)
    base = {"command", "d", "seed", "samples", "n", "reps", "out", "format", "precision", "workers"}
    opts = {k: v for k, v in vars(ns).items() if k not in base and v is not None}
    if ns.precision != "double" and not str(ns.precision).startswith("ext:"):
        raise UsageError(f"--precision must be double or ext:<bits>, got {ns.precision!r}")
    return RunConfig(ns.command, ns.d, ns.seed, ns.samples, ns.n, ns.reps, ns.out, ns.format,
                     ns.precision, ns.workers, opts)


def main(argv=None) -> int:
    from .ifs import CutoffTooTight, HorizonExhausted
    from .ring import RingError

    try:
        ns = build_parser().parse_args(argv)
        cfg = _config(ns)
        res = COMMANDS[cfg.command](cfg)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (UsageError, CliParseError, RingError, CutoffTooTight, HorizonExhausted,
            ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        csv_text, json_text = render_csv(cfg, res), render_json(cfg, res)
        if cfg.out:
            stem = _stem(cfg.out)
            atomic_write(stem + ".csv", csv_text)
            atomic_write(stem + ".json", json_text)
        sys.stdout.write(csv_text if cfg.format == "csv" else json_text)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if res.verdict is False:
        return EXIT_FAIL
    return EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
