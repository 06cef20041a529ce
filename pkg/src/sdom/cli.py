"""Single-binary experiment runner.

``sdom <command> --config <path> [--out <dir>] [--threads N]`` reads a
JSON config, runs one experiment, and writes a JSON report plus a CSV
of per-case scalars (some commands add extra JSON artifacts).  Every
report carries a hash of the config that produced it; no output embeds
a timestamp or machine identity, so reruns of the same config are byte
identical for any thread count.  Config validation reports every
problem at once rather than stopping at the first.

Exit codes: 0 on success, 1 on usage or config errors, 2 when an
invariant is violated during the run (a failed sparseness check, an
uncovered output cell, a divergent modulus integral).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .bank import BankSpec, make_bank, single_input
from .builder import build_sparse_family, domination_constant
from .grid import DyadicCube, GridFunction, GridSpec
from .kernels import (
    KernelSpec,
    Modulus,
    SamplePlan,
    dini_norm,
    h2_constant,
    hormander_constant,
    mpt_truncated_kernel,
)
from .maximal import (
    CubeFamilyMode,
    grand_maximal,
    local_grand_maximal,
    m_delta,
    multilinear_maximal,
)
from .operators import OperatorSpec
from .parallel import parallel_map, resolve_thread_request, set_thread_count
from .sparse import InvariantViolation, carleson_sum, verify_witness_sparsity
from .weights import WeightTuple, power_weight, weighted_norm_ratio

COMMANDS = ("kr", "h2", "dini", "build", "dominate", "maximal", "weights", "separation")


class ConfigError(Exception):
    """Carries the full list of config problems."""

    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class Checker:
    """Field-by-field validation that accumulates every error."""

    def __init__(self, data, errors, prefix=""):
        self.data = data if isinstance(data, dict) else {}
        self.errors = errors
        self.prefix = prefix
        if not isinstance(data, dict):
            errors.append(f"{prefix or 'config'}: must be a JSON object")

    def _name(self, key):
        return f"{self.prefix}{key}"

    def fail(self, key, msg):
        self.errors.append(f"{self._name(key)}: {msg}")

    def raw(self, key, default=None, required=False):
        if key in self.data:
            return self.data[key]
        if required:
            self.fail(key, "missing required field")
        return default

    def number(self, key, pred=None, msg="invalid value", default=None, required=False):
        v = self.raw(key, default=default, required=required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(key, "must be a number")
            return None
        v = float(v)
        if pred is not None and not pred(v):
            self.fail(key, msg)
            return None
        return v

    def integer(self, key, pred=None, msg="invalid value", default=None, required=False):
        v = self.raw(key, default=default, required=required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(key, "must be an integer")
            return None
        if pred is not None and not pred(v):
            self.fail(key, msg)
            return None
        return v

    def string(self, key, choices=None, default=None, required=False):
        v = self.raw(key, default=default, required=required)
        if v is None:
            return None
        if not isinstance(v, str):
            self.fail(key, "must be a string")
            return None
        if choices is not None and v not in choices:
            self.fail(key, f"must be one of {sorted(choices)}")
            return None
        return v

    def sub(self, key, required=False):
        v = self.raw(key, required=required)
        if v is None:
            return None
        return Checker(v, self.errors, prefix=f"{self._name(key)}.")


def _parse_grid(c: Checker):
    g = c.sub("grid", required=True)
    if g is None:
        return None
    n = g.integer("n", pred=lambda v: v in (1, 2), msg="must be 1 or 2", required=True)
    L = g.integer("L", pred=lambda v: v >= 1, msg="must be >= 1", required=True)
    origin = g.raw("origin", required=True)
    side = g.number("side", pred=lambda v: v > 0, msg="must be positive", required=True)
    if None in (n, L, side) or origin is None:
        return None
    try:
        return GridSpec(n=n, L=L, origin=tuple(origin) if isinstance(origin, list) else (origin,), side=side)
    except (ValueError, TypeError) as exc:
        c.fail("grid", str(exc))
        return None


def _parse_kernel(c: Checker, key="kernel"):
    d = c.raw(key, required=True)
    if d is None:
        return None
    try:
        return KernelSpec.from_json_dict(d)
    except (ValueError, TypeError, KeyError) as exc:
        c.fail(key, f"invalid kernel ({exc})")
        return None


def _parse_plan(c: Checker, grid):
    d = c.raw("plan", required=True)
    if d is None:
        return None
    try:
        plan = SamplePlan.from_json_dict(d)
    except (ValueError, TypeError, KeyError) as exc:
        c.fail("plan", f"invalid sampling plan ({exc})")
        return None
    if plan.levels is not None and grid is not None:
        bad = [lam for lam in plan.levels if not 0 <= lam <= grid.L]
        if bad:
            c.fail("plan.levels", f"levels {bad} outside [0, {grid.L}]")
            return None
    return plan


def _parse_root(c: Checker, grid):
    d = c.raw("root", required=True)
    if d is None:
        return None
    try:
        cube = DyadicCube.from_json_dict(d)
    except (ValueError, TypeError, KeyError) as exc:
        c.fail("root", f"invalid cube ({exc})")
        return None
    if grid is not None and (len(cube.index) != grid.n or cube.level > grid.L):
        c.fail("root", "cube does not fit the grid")
        return None
    return cube


def _parse_mode(c: Checker, default="dyadic"):
    text = c.string("mode", default=default)
    if text is None:
        return None
    try:
        return CubeFamilyMode.parse(text)
    except ValueError as exc:
        c.fail("mode", str(exc))
        return None


def _parse_modulus(c: Checker, key="modulus"):
    d = c.raw(key, required=True)
    if d is None:
        return None
    try:
        return Modulus.from_json_dict(d)
    except (ValueError, TypeError, KeyError) as exc:
        c.fail(key, f"invalid modulus ({exc})")
        return None


def _parse_inputs(c: Checker, grid, m, support):
    d = c.sub("inputs", required=True)
    if d is None or grid is None or m is None:
        return None
    kind = d.string("kind", choices=("bank", "values"), required=True)
    if kind == "bank":
        shape = d.string("shape", required=True)
        seed = d.integer("seed", default=0)
        entry = d.integer("entry", pred=lambda v: v >= 0, msg="must be >= 0", default=0)
        if None in (shape, seed, entry):
            return None
        try:
            return single_input(grid, m, shape, seed=seed, entry=entry, support=support)
        except ValueError as exc:
            d.fail("shape", str(exc))
            return None
    if kind == "values":
        vals = d.raw("values", required=True)
        if vals is None:
            return None
        if not isinstance(vals, list) or len(vals) != m:
            d.fail("values", f"must be a list of {m} cell arrays")
            return None
        out = []
        for i, v in enumerate(vals):
            try:
                out.append(GridFunction(grid, np.asarray(v, dtype=float)))
            except (ValueError, TypeError) as exc:
                d.fail(f"values[{i}]", str(exc))
                return None
        return tuple(out)
    return None


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _report(cfg, command, results) -> str:
    return _canonical(
        {
            "command": command,
            "tool": {"name": "sdom", "version": __version__},
            "config_hash": _config_hash(cfg),
            "config": cfg,
            "results": results,
        }
    )


# --- command runners: each returns {filename: text} ---------------------


def _run_kr(cfg):
    errors = []
    c = Checker(cfg, errors)
    grid = _parse_grid(c)
    kernel = _parse_kernel(c)
    r = c.number("r", pred=lambda v: v >= 1, msg="must be >= 1", required=True)
    plan = _parse_plan(c, grid)
    if errors:
        raise ConfigError(errors)
    rep = hormander_constant(kernel, grid, r, plan)
    csv_text = _csv_text(
        ["case", "value", "k_max", "tail_flag", "skipped"],
        [[0, rep.value, rep.k_max, rep.tail_flag, rep.skipped]],
    )
    return {
        "kr_report.json": _report(cfg, "kr", rep.to_json_dict()),
        "kr_cases.csv": csv_text,
    }


def _run_h2(cfg):
    errors = []
    c = Checker(cfg, errors)
    grid = _parse_grid(c)
    kernel = _parse_kernel(c)
    r = c.number("r", pred=lambda v: v >= 1, msg="must be >= 1", required=True)
    delta = c.number("delta", pred=lambda v: v > 0, msg="must be positive", required=True)
    plan = _parse_plan(c, grid)
    if grid is not None and r is not None and delta is not None and not delta > grid.n / r:
        c.fail("delta", f"must exceed n/r = {grid.n / r}")
    if errors:
        raise ConfigError(errors)
    rep = h2_constant(kernel, grid, r, delta, plan)
    csv_text = _csv_text(
        ["case", "value", "k_max", "tail_flag", "skipped"],
        [[0, rep.value, rep.k_max, rep.tail_flag, rep.skipped]],
    )
    return {
        "h2_report.json": _report(cfg, "h2", rep.to_json_dict()),
        "h2_cases.csv": csv_text,
    }


def _run_dini(cfg):
    errors = []
    c = Checker(cfg, errors)
    modulus = _parse_modulus(c)
    tol = c.number("tol", pred=lambda v: 0 < v < 1, msg="must be in (0,1)", default=1e-7)
    if errors:
        raise ConfigError(errors)
    try:
        value = dini_norm(modulus, tol=tol)
    except ValueError as exc:
        raise InvariantViolation(f"modulus integral failed: {exc}") from exc
    return {
        "dini_report.json": _report(cfg, "dini", {"value": value}),
        "dini_cases.csv": _csv_text(["case", "value"], [[0, value]]),
    }


def _parse_build_common(cfg):
    errors = []
    c = Checker(cfg, errors)
    grid = _parse_grid(c)
    kernel = _parse_kernel(c)
    root = _parse_root(c, grid)
    r = c.number("r", pred=lambda v: v >= 1, msg="must be >= 1", required=True)
    mode = _parse_mode(c)
    m = kernel.m if kernel is not None else None
    fs = _parse_inputs(c, grid, m, root)
    if errors:
        raise ConfigError(errors)
    return OperatorSpec(kernel, grid), fs, root, r, mode


def _build_payload(family, stats, rep):
    rows = [
        [
            i,
            st.cube.level,
            ";".join(str(k) for k in st.cube.index),
            st.scale,
            st.tau,
            st.e_count,
            st.selected_count,
            st.sum_pj_ratio,
            st.witness_count,
        ]
        for i, st in enumerate(stats)
    ]
    csv_text = _csv_text(
        ["case", "level", "index", "A", "tau", "E_cells", "selected", "sum_Pj_ratio", "witness_cells"],
        rows,
    )
    stats_json = _canonical({"nodes": [st.to_json_dict() for st in stats]})
    results = {
        "family_size": len(family.entries),
        "carleson": carleson_sum(family),
        "verify": rep.to_json_dict(),
    }
    return results, csv_text, stats_json


def _run_build(cfg):
    op, fs, root, r, mode = _parse_build_common(cfg)
    family, stats = build_sparse_family(op, fs, root, r, mode)
    rep = verify_witness_sparsity(family)
    if not rep.ok:
        raise InvariantViolation(f"sparseness verification failed: {rep.to_json_dict()}")
    results, csv_text, stats_json = _build_payload(family, stats, rep)
    return {
        "build_report.json": _report(cfg, "build", results),
        "build_cases.csv": csv_text,
        "build_family.json": family.to_json(),
        "build_stats.json": stats_json,
    }


def _run_dominate(cfg):
    op, fs, root, r, mode = _parse_build_common(cfg)
    family, stats = build_sparse_family(op, fs, root, r, mode)
    rep = verify_witness_sparsity(family)
    if not rep.ok:
        raise InvariantViolation(f"sparseness verification failed: {rep.to_json_dict()}")
    dom = domination_constant(op, fs, family, r)
    if dom.support_flag:
        raise InvariantViolation("sparse form misses operator output on the root")
    results, _, stats_json = _build_payload(family, stats, rep)
    results["domination"] = dom.to_json_dict()
    csv_text = _csv_text(
        ["case", "c_emp", "argmax_cell", "support_flag", "family_size", "carleson"],
        [[0, dom.c_emp, dom.argmax_cell, dom.support_flag, len(family.entries), results["carleson"]]],
    )
    return {
        "dominate_report.json": _report(cfg, "dominate", results),
        "dominate_cases.csv": csv_text,
        "dominate_family.json": family.to_json(),
        "dominate_stats.json": stats_json,
    }


def _run_maximal(cfg):
    errors = []
    c = Checker(cfg, errors)
    grid = _parse_grid(c)
    opname = c.string("op", choices=("multilinear", "mdelta", "grand", "local_grand"), required=True)
    mode = _parse_mode(c)
    m = c.integer("m", pred=lambda v: v in (1, 2), msg="must be 1 or 2", default=1)
    kernel = root = None
    delta = None
    if opname in ("grand", "local_grand"):
        kernel = _parse_kernel(c)
        m = kernel.m if kernel is not None else None
    if opname == "local_grand":
        root = _parse_root(c, grid)
    if opname == "mdelta":
        delta = c.number("delta", pred=lambda v: v > 0, msg="must be positive", required=True)
        m = 1
    support = None
    if opname == "local_grand" and root is not None:
        support = root
    fs = _parse_inputs(c, grid, m, support)
    if errors:
        raise ConfigError(errors)
    if opname == "multilinear":
        out = multilinear_maximal(fs, mode)
    elif opname == "mdelta":
        out = m_delta(fs[0], delta, mode)
    elif opname == "grand":
        out = grand_maximal(OperatorSpec(kernel, grid), fs, mode)
    else:
        out = local_grand_maximal(OperatorSpec(kernel, grid), fs, root, mode)
    arg = int(np.argmax(out.values))
    results = {"op": opname, "max_value": float(out.values[arg]), "argmax_cell": arg}
    return {
        "maximal_report.json": _report(cfg, "maximal", results),
        "maximal_cases.csv": _csv_text(
            ["case", "op", "max_value", "argmax_cell"], [[0, opname, results["max_value"], arg]]
        ),
        "maximal_field.json": out.to_json() + "\n",
    }


def _parse_weight(c: Checker, i, grid):
    d = Checker(c.raw("weights")[i], c.errors, prefix=f"weights[{i}].")
    kind = d.string("kind", choices=("power", "values"), required=True)
    if kind == "power" or kind is None:
        expo = d.number("exponent", required=True)
        center = d.raw("center")
        floor = d.number("floor", pred=lambda v: v > 0, msg="must be positive", default=1e-8)
        if expo is None or grid is None:
            return None
        return power_weight(grid, expo, center=center, floor=floor)
    vals = d.raw("values", required=True)
    if vals is None or grid is None:
        return None
    try:
        w = GridFunction(grid, np.asarray(vals, dtype=float))
        if not np.all(w.values > 0):
            d.fail("values", "weight must be strictly positive")
            return None
        return w
    except (ValueError, TypeError) as exc:
        d.fail("values", str(exc))
        return None


def _run_weights(cfg):
    errors = []
    c = Checker(cfg, errors)
    grid = _parse_grid(c)
    kernel = _parse_kernel(c)
    r = c.number("r", pred=lambda v: v >= 1, msg="must be >= 1", required=True)
    mode = _parse_mode(c)
    wlist = c.raw("weights", required=True)
    exponents = c.raw("exponents", required=True)
    m = kernel.m if kernel is not None else None
    weights = None
    if isinstance(wlist, list) and m is not None and len(wlist) == m:
        weights = [_parse_weight(c, i, grid) for i in range(m)]
    elif wlist is not None:
        c.fail("weights", f"must be a list of {m} weight specs")
    if not isinstance(exponents, list) or (m is not None and len(exponents) != m):
        c.fail("exponents", f"must be a list of {m} numbers")
        exponents = None
    bd = c.raw("bank", required=True)
    bank_spec = None
    if bd is not None:
        try:
            bank_spec = BankSpec.from_json_dict(bd)
        except (ValueError, TypeError, KeyError) as exc:
            c.fail("bank", str(exc))
    wt = None
    if not errors and weights is not None and all(w is not None for w in weights):
        try:
            wt = WeightTuple(tuple(weights), tuple(exponents), r)
        except (ValueError, TypeError) as exc:
            c.fail("weights", str(exc))
    if errors:
        raise ConfigError(errors)
    bank = make_bank(grid, m, bank_spec)
    rep = weighted_norm_ratio(OperatorSpec(kernel, grid), wt, bank, mode)
    rows = [[i, label, rep.ratios[i]] for i, (label, _) in enumerate(bank)]
    return {
        "weights_report.json": _report(cfg, "weights", rep.to_json_dict()),
        "weights_cases.csv": _csv_text(["case", "label", "ratio"], rows),
    }


def _run_separation(cfg):
    errors = []
    c = Checker(cfg, errors)
    grid = _parse_grid(c)
    if grid is not None and grid.n != 1:
        c.fail("grid.n", "separation runs in one dimension")
    beta = c.number("beta", pred=lambda v: v > 0, msg="must be positive", required=True)
    r = c.number("r", pred=lambda v: v > 1, msg="must exceed 1", required=True)
    delta = c.number("delta", pred=lambda v: v > 0, msg="must be positive", required=True)
    ells = c.raw("ells", required=True)
    pair_depth = c.integer("pair_depth", pred=lambda v: v >= 1, msg="must be >= 1", default=2)
    max_pairs = c.integer("max_pairs", pred=lambda v: v >= 1, msg="must be >= 1", default=6)
    if grid is not None and r is not None and delta is not None and not delta > 1.0 / r:
        c.fail("delta", f"must exceed 1/r = {1.0 / r}")
    if not isinstance(ells, list) or not ells or not all(isinstance(e, int) and e >= 0 for e in ells):
        c.fail("ells", "must be a nonempty list of nonnegative integers")
        ells = None
    if ells is not None and grid is not None:
        bad = [e for e in ells if e + 4 > grid.L]
        if bad:
            c.fail("ells", f"need L >= ell+4; too deep for this grid: {bad}")
    if errors:
        raise ConfigError(errors)

    def one_ell(ell):
        kernel = mpt_truncated_kernel(beta, r, ell)
        plan = SamplePlan(levels=(ell + 2, ell + 3, ell + 4), pair_depth=pair_depth, max_pairs=max_pairs)
        kr = hormander_constant(kernel, grid, r, plan)
        h2 = h2_constant(kernel, grid, r, delta, plan)
        return {"ell": ell, "kr": kr.value, "h2": h2.value, "kr_k_max": kr.k_max, "h2_j_max": h2.k_max}

    results = {"cases": parallel_map(one_ell, ells)}
    rows = [[i, d["ell"], d["kr"], d["h2"]] for i, d in enumerate(results["cases"])]
    return {
        "separation_report.json": _report(cfg, "separation", results),
        "separation_cases.csv": _csv_text(["case", "ell", "kr_value", "h2_value"], rows),
    }


_RUNNERS = {
    "kr": _run_kr,
    "h2": _run_h2,
    "dini": _run_dini,
    "build": _run_build,
    "dominate": _run_dominate,
    "maximal": _run_maximal,
    "weights": _run_weights,
    "separation": _run_separation,
}


def run_command(command: str, cfg: dict, out_dir: str) -> list:
    """Run one command and write its outputs; returns written paths.

    All artifacts are rendered in memory first, so a failing run leaves
    nothing behind; a failure while writing removes what was written.
    """
    files = _RUNNERS[command](cfg)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    try:
        for name, text in files.items():
            path = os.path.join(out_dir, name)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            written.append(path)
    except BaseException:
        for p in written:
            try:
                os.remove(p)
            except OSError:
                pass
        raise
    return written


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sdom", description="sparse domination workbench")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--threads", default=None, help="worker threads (integer or 'max'; default: SDOM_THREADS or 1)")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        set_thread_count(resolve_thread_request(args.threads))
    except ValueError as exc:
        print(f"sdom: error: {exc}", file=sys.stderr)
        return 1
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        print(f"sdom: error: cannot read config: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"sdom: error: config is not valid JSON: {exc}", file=sys.stderr)
        return 1
    try:
        written = run_command(args.command, cfg, args.out)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"sdom: config error: {e}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"sdom: invariant violation: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


def console_entry() -> None:
    sys.exit(main())
