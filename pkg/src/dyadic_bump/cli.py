"""Command-line driver: ``dyadic-bump <command> [--config FILE] [--seed N] [--out PATH]``.

Every command emits a JSON report (or CSV of its per-trial records).  The
``suite`` command exits with status 1 when any verdict fails.
"""
from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .mesh import DyadicMesh
from .suites import SUITES, ExperimentReport, _plain, run_suite
from .weights import WeightError, generate_weight
from .young import YoungError, conjugate_exponent, logbump, parse_young

COMMANDS = ("bump", "maximal", "shift-norm", "testing", "stopping", "decay", "interp",
            "tau-scaling", "hilbert", "search", "suite")

# key -> (type check, description)
_SCHEMA = {
    "mesh": (dict, "mapping with d and L"),
    "u": (str, "weight spec"),
    "sigma": (str, "weight spec"),
    "p": ((int, float), "exponent > 1"),
    "delta": ((int, float), "bump parameter >= 0"),
    "A": (str, "Young function spec"),
    "B": (str, "Young function spec"),
    "shift": (dict, "mapping with m, n, mode, seed"),
    "suite": (str, "suite name"),
    "budget": (int, "trial budget"),
    "seed": (int, "random seed"),
    "out": (str, "output path"),
    "format": (str, "json or csv"),
    "params": (dict, "extra suite parameters"),
}
_MESH_KEYS = {"d", "L"}
_SHIFT_KEYS = {"m", "n", "mode", "seed", "lerner"}
MAX_DEPTH = {1: 14, 2: 7}


class ConfigError(ValueError):
    """Configuration problem tied to a file position."""


# -- configuration -----------------------------------------------------------

def _line_map(node, prefix=()):
    """Dotted key path -> 1-based line number, from a composed YAML node."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = prefix + (str(k.value),)
            out[".".join(path)] = k.start_mark.line + 1
            out.update(_line_map(v, path))
    return out


def load_config(path: str | Path) -> dict:
    """Read a YAML or JSON config and validate it; errors carry ``file:line``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark is not None else 1
        line = max(1, min(line, len(text.splitlines())))
        raise ConfigError(f"{path}:{line}: {exc.problem or exc.context}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: top level must be a mapping")
    lines = _line_map(node)

    def fail(key, msg):
        raise ConfigError(f"{path}:{lines.get(key, 1)}: {msg}")

    for key, val in data.items():
        if key not in _SCHEMA:
            fail(key, f"unknown key {key!r}; expected one of {sorted(_SCHEMA)}")
        typ, desc = _SCHEMA[key]
        if isinstance(val, bool) or not isinstance(val, typ):
            fail(key, f"{key!r} must be a {desc}, got {val!r}")
    mesh = data.get("mesh", {})
    for k in mesh:
        if k not in _MESH_KEYS:
            fail(f"mesh.{k}", f"unknown mesh key {k!r}")
    d, L = mesh.get("d", 1), mesh.get("L", 8)
    if d not in MAX_DEPTH:
        fail("mesh.d", f"dimension must be 1 or 2, got {d!r}")
    if not isinstance(L, int) or not 1 <= L <= MAX_DEPTH[d]:
        fail("mesh.L", f"depth must be an integer in 1..{MAX_DEPTH[d]} for d={d}, got {L!r}")
    for k in data.get("shift", {}):
        if k not in _SHIFT_KEYS:
            fail(f"shift.{k}", f"unknown shift key {k!r}")
    if "p" in data and not data["p"] > 1:
        fail("p", f"p must exceed 1, got {data['p']}")
    if "suite" in data and data["suite"] not in SUITES:
        fail("suite", f"unknown suite {data['suite']!r}; choose from {sorted(SUITES)}")
    if data.get("format", "json") not in ("json", "csv"):
        fail("format", "format must be json or csv")
    for key in ("A", "B"):
        if key in data:
            try:
                parse_young(data[key])
            except (YoungError, ValueError) as exc:
                fail(key, str(exc))
    if "seed" not in data:
        data["_seed_missing"] = True
    data["_lines"] = lines
    data["_path"] = str(path)
    return data


def _weights(cfg, mesh, seed):
    out = []
    for key, default in (("u", f"cascade:0.5,{seed}"), ("sigma", f"cascade:0.5,{seed + 1}")):
        try:
            out.append(generate_weight(cfg.get(key, default), mesh))
        except (WeightError, ValueError) as exc:
            where = f"{cfg['_path']}:{cfg['_lines'].get(key, 1)}: " if "_path" in cfg else ""
            raise ConfigError(f"{where}{exc}") from exc
    return out


def _mesh(cfg):
    m = cfg.get("mesh", {})
    return DyadicMesh(m.get("d", 1), m.get("L", 8))


def _shift(cfg, mesh, seed):
    from .shifts import lerner_shift, random_shift, random_sparse_family
    sc = cfg.get("shift", {})
    s_seed = sc.get("seed", seed)
    if "lerner" in sc:
        i = int(sc["lerner"])
        return lerner_shift(random_sparse_family(mesh, s_seed, min_level=i), i)
    return random_shift(mesh, int(sc.get("m", 1)), int(sc.get("n", 1)), s_seed,
                        sc.get("mode", "cancellative"))


# -- commands ----------------------------------------------------------------

def cmd_bump(cfg, seed, rep):
    from .bumps import ap_constant, bump_joint, bump_separated_A, bump_separated_B
    from .young import bp_check
    mesh = _mesh(cfg)
    u, s = _weights(cfg, mesh, seed)
    p = float(cfg.get("p", 2.0))
    q = conjugate_exponent(p)
    delta = float(cfg.get("delta", 1.0))
    A = parse_young(cfg["A"]) if "A" in cfg else logbump(p, delta)
    B = parse_young(cfg["B"]) if "B" in cfg else logbump(q, delta)
    val, Q = ap_constant(u, s, p, argmax=True)
    rep.constant("A_p", val, "exact")
    rep.records.append({"constant": "A_p", "value": val, "cube": str(Q)})
    for name, fn in (("joint", lambda: bump_joint(u, s, A, B, p, argmax=True)),
                     ("separated_B", lambda: bump_separated_B(u, s, B, p, argmax=True)),
                     ("separated_A", lambda: bump_separated_A(u, s, A, p, argmax=True))):
        val, Q = fn()
        rep.constant(name, val, "exact")
        rep.records.append({"constant": name, "value": val, "cube": str(Q)})
    for tag, Y, expo in (("A", A, p), ("B", B, q)):
        v = bp_check(Y.complement(), conjugate_exponent(expo))
        rep.records.append({"constant": f"Bp({tag}bar)", "value": v.tail_slope,
                            "classification": v.classification, "analytic": v.analytic})


def cmd_maximal(cfg, seed, rep):
    from .bumps import bump_separated_B
    from .orlicz import maximal_ratio
    mesh = _mesh(cfg)
    u, s = _weights(cfg, mesh, seed)
    p = float(cfg.get("p", 2.0))
    B = parse_young(cfg["B"]) if "B" in cfg else logbump(conjugate_exponent(p), cfg.get("delta", 1.0))
    rng = np.random.default_rng(seed)
    best = 0.0
    for i in range(int(cfg.get("budget", 50))):
        f = rng.exponential(size=mesh.n_cells)
        r = maximal_ratio(f, u, s, p)
        best = max(best, r)
        rep.records.append({"trial": i, "ratio": r})
    K = bump_separated_B(u, s, B, p)
    rep.constant("ratio", best, "lower bound")
    rep.constant("K_B", K, "exact")
    rep.constant("ratio / K_B", best / K, "lower bound")


def cmd_shift_norm(cfg, seed, rep):
    from .shifts import weighted_norm_estimate
    mesh = _mesh(cfg)
    u, s = _weights(cfg, mesh, seed)
    S = _shift(cfg, mesh, seed)
    p = float(cfg.get("p", 2.0))
    est = weighted_norm_estimate(S, u, s, p, budget=int(cfg.get("budget", 16)), seed=seed)
    rep.constant("norm", est.estimate, "exact" if est.exact else "lower bound")
    rep.constant("unweighted L2 norm", S.l2_norm, "exact")
    rep.records.append({"complexity": list(S.complexity), "tau": S.tau, "method": est.method,
                        "norm": est.estimate})


def cmd_testing(cfg, seed, rep):
    from .shifts import dual_testing_constant, testing_constant
    mesh = _mesh(cfg)
    u, s = _weights(cfg, mesh, seed)
    S = _shift(cfg, mesh, seed)
    p = float(cfg.get("p", 2.0))
    t, Q = testing_constant(S, u, s, p, argmax=True)
    dt, dQ = dual_testing_constant(S, u, s, p, argmax=True)
    rep.constant("testing", t, "exact")
    rep.constant("dual testing", dt, "exact")
    rep.records += [{"constant": "testing", "value": t, "cube": str(Q)},
                    {"constant": "dual testing", "value": dt, "cube": str(dQ)}]


def cmd_stopping(cfg, seed, rep):
    from .stopping import build_forest, carleson_constant, main_rhs
    mesh = _mesh(cfg)
    u, s = _weights(cfg, mesh, seed)
    p = float(cfg.get("p", 2.0))
    prm = cfg.get("params", {})
    F = build_forest(u, s, p, None, int(prm.get("tau", 1)), int(prm.get("i", 0)))
    rep.constant("carleson", carleson_constant(F), "exact")
    rep.constant("main_rhs", main_rhs(u, s, p, F), "exact")
    rep.constant("a_range", list(F.a_range), "exact")
    for k in F.principal_cubes():
        rep.records.append({"cube": str(F.cube(k)), "a": int(F.a[k]),
                            "generation": int(F.generation[k]), "u_avg": float(F.u_avg[k]),
                            "sigma_avg": float(F.sigma_avg[k]), "mu": float(F.mu[k])})
    rep.forest = json.loads(F.to_json())


def cmd_decay(cfg, seed, rep):
    from .stopping import build_forest, decay_profile
    mesh = _mesh(cfg)
    u, s = _weights(cfg, mesh, seed)
    cfg = dict(cfg)
    cfg.setdefault("shift", {})
    cfg["shift"] = dict(cfg["shift"], mode="positive")
    S = _shift(cfg, mesh, seed)
    p = float(cfg.get("p", 2.0))
    t_grid = cfg.get("params", {}).get("t_grid")
    for i in range(S.tau):
        F = build_forest(u, s, p, None, S.tau, i)
        for k in F.principal_cubes():
            pr = decay_profile(S, s, u, F, int(F.a[k]), F.cube(k), t_grid)
            rep.records.append({"residue": i, "a": pr.a, "cube": str(pr.cube), "c": pr.c,
                                "r2": pr.r2, "points": pr.nonempty})
    fit = [r for r in rep.records if r["points"] >= 4]
    rep.constant("profiles", len(rep.records), "exact")
    rep.constant("fitted profiles", len(fit), "exact")
    if fit:
        rep.constant("fraction c>0, R^2>=0.8",
                     float(np.mean([r["c"] > 0 and r["r2"] >= 0.8 for r in fit])), "fitted")


def cmd_interp(cfg, seed, rep):
    from .bumps import balance_check, interp_log_ratios, random_probability_trials
    p = float(cfg.get("p", 2.0))
    delta = float(cfg.get("delta", 1.0))
    mu, f = random_probability_trials(int(cfg.get("budget", 1000)), 16, seed)
    r, parts = interp_log_ratios(mu, f, p, delta)
    rep.constant("C", float(r.max()), "fitted")
    rep.constant("gamma", parts["gamma"], "exact")
    bal = balance_check(p, delta)
    rep.constant("balance max ratio", bal["max_ratio"], "exact")
    rep.constant("balance tail slope", bal["tail_slope"], "fitted")
    rep.records = [{"trial": i, "ratio": float(x)} for i, x in enumerate(r)]


def cmd_hilbert(cfg, seed, rep):
    from . import hilbert as hb
    mesh = _mesh(cfg)
    u, s = _weights(cfg, mesh, seed)
    (Ts, Tu), (Qs, Qu) = hb.hilbert_testing(u, s, argmax=True)
    rep.constant("T_sigma", Ts, "exact")
    rep.constant("T_u", Tu, "exact")
    rep.records += [{"constant": "T_sigma", "value": Ts, "cube": str(Qs)},
                    {"constant": "T_u", "value": Tu, "cube": str(Qu)}]
    cz = hb.czm_rhs(u, s, budget=int(cfg.get("budget", 32)), seed=seed)
    for k, est in cz["estimators"].items():
        rep.constant(k, cz[k], est)
    rep.constant("lhs / rhs", cz["ratio"], "fitted")


def cmd_search(cfg, seed, rep):
    from . import hilbert as hb
    L = _mesh(cfg).depth
    res = hb.counterexample_search(seed, int(cfg.get("budget", 8)), L)
    rep.constant("ratio", res["ratio"], "lower bound")
    rep.constant("non_decreasing", res["non_decreasing"], "exact")
    rep.records = res["trajectory"]
    rep.search = {k: v for k, v in res.items() if k != "trajectory"}


def cmd_tau_scaling(cfg, seed, rep):
    prm = dict(cfg.get("params", {}))
    if "mesh" in cfg:
        prm.setdefault("L", _mesh(cfg).depth)
    return run_suite("tau-scaling", seed, **prm)


HANDLERS = {
    "bump": cmd_bump, "maximal": cmd_maximal, "shift-norm": cmd_shift_norm,
    "testing": cmd_testing, "stopping": cmd_stopping, "decay": cmd_decay,
    "interp": cmd_interp, "hilbert": cmd_hilbert, "search": cmd_search,
    "tau-scaling": cmd_tau_scaling,
}


# -- output ------------------------------------------------------------------

def report_json(rep: ExperimentReport) -> str:
    doc = rep.as_dict()
    for extra in ("forest", "search"):
        if hasattr(rep, extra):
            doc[extra] = getattr(rep, extra)
    return json.dumps(_plain(doc), sort_keys=True, indent=2, allow_nan=False)


def report_csv(rep: ExperimentReport) -> str:
    rows = [_plain(r) for r in rep.records]
    buf = io.StringIO()
    if not rows:
        rows = [{"name": k, **v} for k, v in _plain(rep.constants).items()]
    cols = sorted({k for r in rows for k in r})
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dyadic-bump", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("name", nargs="?", help="suite name for the 'suite' command")
    ap.add_argument("--config", help="YAML or JSON experiment config")
    ap.add_argument("--seed", type=int, help="random seed (overrides the config)")
    ap.add_argument("--out", help="output path (default: stdout)")
    ap.add_argument("--format", choices=("json", "csv"), help="report format")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        if args.seed is not None:
            seed = args.seed
        elif cfg.get("_seed_missing"):
            raise ConfigError(f"{cfg['_path']}:1: 'seed' is required in configs (or pass --seed)")
        else:
            seed = int(cfg.get("seed", 0))
        fmt = args.format or cfg.get("format", "json")
        out = args.out or cfg.get("out")
        t0 = time.perf_counter()
        if args.command == "suite":
            name = args.name or cfg.get("suite")
            if name not in SUITES:
                ap.print_usage(sys.stderr)
                print(f"dyadic-bump: unknown suite {name!r}; choose from {sorted(SUITES)}",
                      file=sys.stderr)
                return 2
            params = cfg.get("params", {})
            allowed = set(inspect.signature(SUITES[name]).parameters) - {"seed"}
            for k in params:
                if k not in allowed:
                    line = cfg["_lines"].get(f"params.{k}", 1)
                    raise ConfigError(f"{cfg['_path']}:{line}: suite {name!r} has no parameter "
                                      f"{k!r}; expected one of {sorted(allowed)}")
            rep = run_suite(name, seed, **params)
        else:
            clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
            rep = ExperimentReport(args.command, seed, clean)
            got = HANDLERS[args.command](cfg, seed, rep)
            if isinstance(got, ExperimentReport):
                rep = got
        rep.wall_time = time.perf_counter() - t0
    except ConfigError as exc:
        print(f"dyadic-bump: config error: {exc}", file=sys.stderr)
        return 2
    except (WeightError, YoungError, ValueError) as exc:
        print(f"dyadic-bump: error: {exc}", file=sys.stderr)
        return 2

    text = report_csv(rep) if fmt == "csv" else report_json(rep)
    if out:
        Path(out).write_text(text + ("" if text.endswith("\n") else "\n"))
        if fmt == "json" and rep.records:
            Path(out).with_suffix(".csv").write_text(report_csv(rep))
    else:
        sys.stdout.write(text + ("" if text.endswith("\n") else "\n"))
    for v in rep.verdicts:
        print(f"{'PASS' if v['passed'] else 'FAIL'} {v['name']}: {v['value']} "
              f"{v['relation']} {v['threshold']}", file=sys.stderr)
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
