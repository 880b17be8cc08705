"""Command-line front end: ``sepstein <command> ...``.

Exit codes: 0 success, 2 usage or parse error, 3 numerical failure,
4 internal-consistency failure.  Data goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import linalg
from .antisym import antisym_table, stein_smoothing_check, table_to_csv, table_to_json
from .conic import solve_log
from .errors import ConsistencyError, NumericError, SepSteinError
from .linalg import random_state, state_from_dict
from .models import parse_model
from .protocols import (
    DNE,
    NE,
    bounds_to_csv,
    construct_dilution,
    cost_bounds,
    distill_bounds,
    doubled_construction,
)
from .states import NamedState, diag_projector, make_state

log = logging.getLogger("sepstein")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_CONSISTENCY = 4

ENV_PREFIX = "SEPSTEIN_"
MEASURES = ("robustness", "dmax", "ekappa", "ekappa-tilde", "dh", "measured", "ree-ppt")


class SpecError(SepSteinError, ValueError):
    """A state specification failed to parse; ``offset`` is a byte offset."""

    def __init__(self, text, offset, message):
        super().__init__(f"{message} at byte {offset} in {text!r}")
        self.offset = offset


# ---------------------------------------------------------------------------
# State mini-language

_KEYS = {"maxent": ("d",), "isotropic": ("d", "p"), "werner": ("d", "p"), "antisym": ("d",)}


def parse_state_spec(text):
    """Parse ``kind:key=val,...`` or ``file:<path>`` into a BipartiteState."""
    colon = text.find(":")
    if colon <= 0:
        raise SpecError(text, max(colon, 0), "expected '<kind>:'")
    kind = text[:colon]
    body = text[colon + 1 :]
    base = colon + 1
    if kind == "file":
        if not body:
            raise SpecError(text, base, "missing file path")
        return _load_state_file(text, body, base)
    if kind not in _KEYS:
        raise SpecError(text, 0, f"unknown state kind {kind!r}")
    values = {}
    pos = base
    for item in body.split(","):
        eq = item.find("=")
        if eq <= 0:
            raise SpecError(text, pos, "expected key=value")
        key, raw = item[:eq], item[eq + 1 :]
        if key not in _KEYS[kind]:
            raise SpecError(text, pos, f"unexpected key {key!r} for {kind}")
        if key in values:
            raise SpecError(text, pos, f"duplicate key {key!r}")
        try:
            values[key] = int(raw) if key == "d" else float(raw)
        except ValueError:
            raise SpecError(text, pos + eq + 1, f"bad value {raw!r} for {key}") from None
        pos += len(item.encode()) + 1
    missing = [k for k in _KEYS[kind] if k not in values]
    if missing:
        raise SpecError(text, len(text.encode()), f"missing key {missing[0]!r}")
    try:
        return make_state(NamedState(kind, values["d"], values.get("p")))
    except SepSteinError as exc:
        raise SpecError(text, base, str(exc)) from None


def _load_state_file(text, path, offset):
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise SpecError(text, offset, f"cannot read file: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SpecError(text, offset, f"invalid JSON in file (byte {exc.pos})") from None
    try:
        return state_from_dict(obj)
    except (KeyError, TypeError, SepSteinError) as exc:
        raise SpecError(text, offset, f"invalid state file: {exc}") from None


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class RunConfig:
    model: str = "ppt"
    eps: float = 0.0
    delta: float = 0.0
    fmt: str = "json"
    jobs: int = 1
    seed: int = 0
    cap_dim: int = linalg.DEFAULT_MAX_DIM

    def validate(self):
        parse_model(self.model)
        if not 0.0 <= self.eps < 1.0:
            raise SepSteinError(f"--eps must lie in [0, 1), got {self.eps}")
        if not self.delta >= 0.0:
            raise SepSteinError(f"--delta must be nonnegative, got {self.delta}")
        if self.fmt not in ("json", "csv"):
            raise SepSteinError(f"--format must be json or csv, got {self.fmt!r}")
        if self.jobs < 1 or self.cap_dim < 4:
            raise SepSteinError("--jobs must be >= 1 and --cap-dim >= 4")
        return self


def _env(name, default):
    return os.environ.get(ENV_PREFIX + name, default)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", default=_env("MODEL", "ppt"),
                        help="ppt, dps:k, werner or isotropic")
    common.add_argument("--eps", type=float, default=_env("EPS", "0"))
    common.add_argument("--delta", type=float, default=_env("DELTA", "0"))
    common.add_argument("--format", dest="fmt", default=_env("FORMAT", "json"))
    common.add_argument("--jobs", type=int, default=_env("JOBS", "1"))
    common.add_argument("--seed", type=int, default=_env("SEED", "0"))
    common.add_argument("--cap-dim", type=int, default=_env("CAP_DIM", str(linalg.DEFAULT_MAX_DIM)))
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sepstein", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", parents=[common], help="evaluate an entanglement quantifier")
    p.add_argument("state")
    p.add_argument("measure", choices=MEASURES)

    p = sub.add_parser("distill-bounds", parents=[common], help="one-shot distillation bounds")
    p.add_argument("state")

    p = sub.add_parser("dilute-bounds", parents=[common], help="one-shot dilution bounds")
    p.add_argument("state")

    p = sub.add_parser("antisym-table", parents=[common], help="antisymmetric-state bound table")
    p.add_argument("d_min", type=int)
    p.add_argument("d_max", type=int)

    p = sub.add_parser("selftest", parents=[common], help="run the property suites")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--tol", type=float, default=float(_env("TOL", "1e-6")),
                   help="slack tolerance for every suite")
    return parser


def _config(args):
    return RunConfig(args.model, args.eps, args.delta, args.fmt, args.jobs, args.seed,
                     args.cap_dim).validate()


# ---------------------------------------------------------------------------
# Commands


def _emit(obj, fmt, out):
    if fmt == "json":
        out.write(json.dumps(obj) + "\n")
        return
    rows = obj if isinstance(obj, list) else [obj]
    fields = list(rows[0])
    w = csv.DictWriter(out, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (json.dumps(v) if isinstance(v, (dict, list)) else v) for k, v in r.items()})


def run_measure(state, name, cfg):
    from . import measures as M

    if name == "robustness":
        r = M.gen_robustness(state, cfg.model)
    elif name == "dmax":
        r = M.dmax_ent(state, cfg.model)
    elif name == "ekappa":
        r = M.e_kappa(state)
    elif name == "ekappa-tilde":
        r = M.e_kappa_tilde(state, cfg.model)[0]
    elif name == "dh":
        r = M.dh_ent(state, cfg.eps, model=cfg.model)
    elif name == "measured":
        if state.dim_a != state.dim_b:
            raise SepSteinError("the measured bound uses the diagonal projector and needs dA = dB")
        r = M.measured_lower_bound(state, diag_projector(state.dim_a), cfg.model)
    else:
        r = M.ree_lower_ppt(state)
    return r.to_dict()


def cmd_measure(args, cfg, out):
    state = parse_state_spec(args.state)
    _emit(run_measure(state, args.measure, cfg), cfg.fmt, out)
    return EXIT_OK


def cmd_distill_bounds(args, cfg, out):
    state = parse_state_spec(args.state)
    b = distill_bounds(state, cfg.eps, cfg.delta, cfg.model)
    if cfg.fmt == "csv":
        out.write(bounds_to_csv([b]))
    else:
        _emit(b.to_dict(), "json", out)
    return EXIT_OK


def cmd_dilute_bounds(args, cfg, out):
    state = parse_state_spec(args.state)
    b = cost_bounds(state, cfg.eps, cfg.delta, cfg.model)
    if cfg.fmt == "csv":
        out.write(bounds_to_csv([b]))
        return EXIT_OK
    obj = b.to_dict()
    if cfg.delta > 0 and b.core_bits > 1e-7:
        ne = construct_dilution(state, cfg.delta, NE, cfg.model)
        obj["constructions"] = [
            ne.to_dict(),
            construct_dilution(state, cfg.delta, DNE, cfg.model).to_dict(),
            doubled_construction(ne, cfg.model).to_dict(),
        ]
    _emit(obj, "json", out)
    return EXIT_OK


def cmd_antisym_table(args, cfg, out):
    if args.d_min > args.d_max:
        raise SepSteinError(f"d_min {args.d_min} exceeds d_max {args.d_max}")
    rows = antisym_table(args.d_min, args.d_max, max_dim=cfg.cap_dim, jobs=cfg.jobs)
    out.write(table_to_csv(rows) if cfg.fmt == "csv" else table_to_json(rows) + "\n")
    bad = [r.d for r in rows if not r.closed_form_ok]
    if bad:
        raise ConsistencyError(f"closed-form mismatch for d in {bad}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Self-test


def _entangled_states(rng, count):
    from .models import separability_test

    out = []
    while len(out) < count:
        st = random_state(2, 2, rng)
        if separability_test(st, "ppt").status == "Out":
            out.append(st)
    return out


def _suite_isotropic(rng, level):
    from .measures import gen_robustness
    from .states import isotropic

    slacks = []
    for d in (2, 3):
        for p in (0.0, 1 / d, 0.5, 1.0):
            r = gen_robustness(isotropic(d, p), "ppt").value
            slacks.append(1e-6 - abs(r - max(d * p - 1, 0.0)))
    return slacks


def _suite_antisym(rng, level):
    rows = antisym_table(3, 13 if level == "full" else 6)
    return [1e-6 - max(abs(r.lower_bits - math.log2(1 + 1 / r.d)),
                       abs(r.upper_bits - math.log2(1 + 2 / r.d))) for r in rows]


def _suite_fvdg(rng, level):
    from .divergences import check_fuchs_van_de_graaf

    n = 50 if level == "full" else 10
    return [check_fuchs_van_de_graaf(random_state(2, 2, rng), random_state(2, 2, rng)).min_slack
            for _ in range(n)]


def _suite_strong_converse(rng, level):
    from .divergences import check_anshu_chain

    n = 10 if level == "full" else 3
    return [check_anshu_chain(random_state(2, 2, rng), random_state(2, 2, rng), 0.25, 0.3).min_slack
            for _ in range(n)]


def _suite_distill(rng, level):
    out = []
    for st in _entangled_states(rng, 5 if level == "full" else 2):
        for delta in (0.0, 0.5):
            b = distill_bounds(st, 0.0, delta, "ppt")
            out.append(b.upper_bits - b.lower_bits)
    return out


def _suite_dilution(rng, level):
    out = []
    for st in _entangled_states(rng, 3 if level == "full" else 1):
        for delta in (0.1, 1.0):
            ne = construct_dilution(st, delta, NE)
            checks = [ne, construct_dilution(st, delta, DNE), doubled_construction(ne)]
            out.append(0.0 if all(c.verdict.status == "In" for c in checks) else -1.0)
    return out


def _suite_twirl_monotone(rng, level):
    from .measures import e_kappa_tilde
    from .states import twirl

    out = []
    for _ in range(5 if level == "full" else 2):
        st = random_state(2, 2, rng)
        a = e_kappa_tilde(st, "ppt")[0].value
        b = e_kappa_tilde(twirl(st.matrix), "ppt")[0].value
        out.append(a - b)
    return out


def _suite_stein(rng, level):
    cases = [(2, 1), (3, 1), (2, 2)] if level == "full" else [(2, 1)]
    return [stein_smoothing_check(d, n).min_slack for d, n in cases]


SUITES = (
    ("isotropic-robustness", _suite_isotropic),
    ("antisym-closed-forms", _suite_antisym),
    ("fuchs-van-de-graaf", _suite_fvdg),
    ("strong-converse-chain", _suite_strong_converse),
    ("distillation-sandwich", _suite_distill),
    ("dilution-constructions", _suite_dilution),
    ("twirl-monotonicity", _suite_twirl_monotone),
    ("stein-smoothing", _suite_stein),
)


def run_selftest(seed=0, level="quick", tol=1e-6):
    """Run every suite; returns (all_passed, rows)."""
    rng = np.random.default_rng(seed)
    rows = []
    with solve_log() as records:
        for name, fn in SUITES:
            t0 = time.perf_counter()
            slacks = fn(rng, level)
            lo = float(min(slacks))
            rows.append({"suite": name, "passed": lo >= -tol, "min_slack": lo,
                         "max_slack": float(max(slacks)), "cases": len(slacks),
                         "seconds": round(time.perf_counter() - t0, 3)})
    gaps = [r["gap"] for r in records if r["status"] == "Optimal"]
    worst = max(gaps) if gaps else 0.0
    rows.append({"suite": "solver-certification", "passed": worst <= 1e-7,
                 "min_slack": 1e-7 - worst, "max_slack": 1e-7, "cases": len(records), "seconds": 0.0})
    return all(r["passed"] for r in rows), rows


def cmd_selftest(args, cfg, out):
    if not (math.isfinite(args.tol) and args.tol >= 0.0):
        raise SepSteinError(f"--tol must be a finite nonnegative number, got {args.tol}")
    log.info("selftest seed=%d level=%s tol=%g", cfg.seed, args.level, args.tol)
    ok, rows = run_selftest(cfg.seed, args.level, args.tol)
    _emit({"seed": cfg.seed, "level": args.level, "passed": ok, "suites": rows}
          if cfg.fmt == "json" else rows, cfg.fmt, out)
    return EXIT_OK if ok else EXIT_CONSISTENCY


COMMANDS = {
    "measure": cmd_measure,
    "distill-bounds": cmd_distill_bounds,
    "dilute-bounds": cmd_dilute_bounds,
    "antisym-table": cmd_antisym_table,
    "selftest": cmd_selftest,
}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _config(args)
    except (SepSteinError, ValueError) as exc:
        print(f"sepstein: {exc}", file=sys.stderr)
        return EXIT_USAGE
    old_cap = linalg.DEFAULT_MAX_DIM
    linalg.DEFAULT_MAX_DIM = cfg.cap_dim
    try:
        return COMMANDS[args.command](args, cfg, out)
    except ConsistencyError as exc:
        print(f"sepstein: consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except NumericError as exc:
        print(f"sepstein: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SepSteinError as exc:
        print(f"sepstein: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        linalg.DEFAULT_MAX_DIM = old_cap

