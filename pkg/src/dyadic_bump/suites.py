"""Experiment suites, one per acceptance criterion.

Each suite takes keyword parameters (all with defaults) and returns an
:class:`ExperimentReport`.  Suites are deterministic under ``seed``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import hilbert as hb
from .bumps import (balance_check, bump_separated_A, bump_separated_B, gamma_lemma,
                    interp_log_ratios, random_probability_trials, spike_trials)
from .mesh import DyadicMesh, GridFunction
from .orlicz import holder_ratios, luxemburg_rows, maximal_ratio, orlicz_maximal
from .shifts import random_shift, weighted_norm_estimate
from .stopping import (build_forest, carleson_constant, carleson_embedding_check,
                       decay_profile, summation_in_a_check)
from .weights import cascade
from .young import b0, conjugate_exponent, logbump, loglogbump, power

__all__ = ["ExperimentReport", "SUITES", "run_suite"]


@dataclass
class ExperimentReport:
    suite: str
    seed: int
    config: dict
    constants: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts)

    def constant(self, name, value, estimator):
        self.constants[name] = {"value": _plain(value), "estimator": estimator}

    def verdict(self, name, value, threshold, passed, relation="<="):
        self.verdicts.append({"name": name, "value": _plain(value), "threshold": _plain(threshold),
                              "relation": relation, "passed": bool(passed)})

    def as_dict(self) -> dict:
        return {"suite": self.suite, "seed": self.seed, "config": self.config,
                "constants": self.constants, "records": self.records,
                "verdicts": self.verdicts, "passed": self.passed, "wall_time": self.wall_time}


def _plain(x):
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


# -- 1 ------------------------------------------------------------------------

def suite_oracle(seed=0, L=10, trials=100, exponents=(1.5, 2.0, 3.0), rtol=1e-9):
    """Luxemburg norm of ``power(p)`` against ``<|f|^p>^(1/p)``."""
    rep = ExperimentReport("oracle", seed, dict(L=L, trials=trials, exponents=list(exponents)))
    rng = np.random.default_rng(seed)
    mesh = DyadicMesh(1, L)
    worst = 0.0
    for p in exponents:
        A = power(p)
        for _ in range(trials):
            f = rng.exponential(size=mesh.n_cells) * (rng.random(mesh.n_cells) < 0.9)
            j = int(rng.integers(0, L + 1))
            k = int(rng.integers(0, mesh.n_cubes(j)))
            row = mesh.blocks(f, j)[k]
            exact = np.mean(row ** p) ** (1 / p)
            got = luxemburg_rows(row[None, :], A)[0]
            err = abs(got - exact) / exact if exact > 0 else abs(got)
            worst = max(worst, err)
            rep.records.append({"p": p, "level": j, "index": k, "norm": got, "closed_form": exact,
                                "rel_err": err})
    rep.verdict("max relative error", worst, rtol, worst <= rtol)
    return rep


# -- 2 ------------------------------------------------------------------------

def _families():
    return {"power(1.5)": power(1.5), "power(2)": power(2.0), "power(3)": power(3.0),
            "logbump(2,1)": logbump(2.0, 1.0), "logbump(3,0.5)": logbump(3.0, 0.5),
            "loglogbump(2,3)": loglogbump(2.0, 3.0)}


def suite_duality(seed=0, n_points=200, t_min=1e-6, t_max=1e6, rtol=1e-9):
    """``t <= A^-1(t) Abar^-1(t) <= 2t`` on a log grid."""
    rep = ExperimentReport("duality", seed, dict(n_points=n_points, t_min=t_min, t_max=t_max))
    t = np.logspace(math.log10(t_min), math.log10(t_max), n_points)
    bad = 0
    for name, A in _families().items():
        prod = A.inverse(t) * A.complement().inverse(t)
        r = prod / t
        lo_ok = r >= 1 - rtol
        hi_ok = r <= 2 * (1 + rtol)
        bad += int(np.sum(~(lo_ok & hi_ok)))
        rep.records.append({"family": name, "min_ratio": float(r.min()),
                            "max_ratio": float(r.max())})
    rep.verdict("sandwich violations", bad, 0, bad == 0, "==")
    return rep


# -- 3 ------------------------------------------------------------------------

def suite_holder(seed=0, trials=10_000, constant=2.0, rtol=1e-9):
    """Generalized Hoelder ratio over random cubes and families."""
    rep = ExperimentReport("holder", seed, dict(trials=trials, constant=constant))
    rng = np.random.default_rng(seed)
    fams = dict(_families(), **{"b0(2,1)": b0(2.0, 1.0)})
    names = list(fams)
    per = trials // len(names)
    worst, bad = 0.0, 0
    for i, name in enumerate(names):
        n = per + (1 if i < trials % len(names) else 0)
        sizes = 2 ** rng.integers(1, 7, n)
        r_all = np.empty(n)
        for m in np.unique(sizes):
            sel = np.flatnonzero(sizes == m)
            F = np.exp(rng.normal(0, 2, (sel.size, m))) * (rng.random((sel.size, m)) < 0.85)
            G = np.exp(rng.normal(0, 2, (sel.size, m))) * (rng.random((sel.size, m)) < 0.85)
            r_all[sel] = holder_ratios(F, G, fams[name])
        w = float(r_all.max())
        worst = max(worst, w)
        bad += int(np.sum(r_all > constant * (1 + rtol)))
        rep.records.append({"family": name, "trials": n, "max_ratio": w,
                            "mean_ratio": float(r_all.mean())})
    rep.constant("max ratio", worst, "exact")
    rep.verdict("violations of ratio <= 2", bad, 0, bad == 0, "==")
    return rep


# -- 4 ------------------------------------------------------------------------

def _maximal_normalized(L, pairs, n_f, eta, p, B, seed):
    mesh = DyadicMesh(1, L)
    best, rows = 0.0, []
    for k in range(pairs):
        u = cascade(mesh, eta, seed * 7919 + 1000 + k)
        s = cascade(mesh, eta, seed * 7919 + 2000 + k)
        K = bump_separated_B(u, s, B, p)
        rng = np.random.default_rng([seed, k])
        r = 0.0
        for i in range(n_f):
            if i % 2:
                f = rng.exponential(size=mesh.n_cells)
            else:
                lev = int(rng.integers(0, min(7, L) + 1))
                f = mesh.upsample(rng.exponential(size=mesh.n_cubes(lev)), lev)
            r = max(r, maximal_ratio(f, u, s, p))
        rows.append({"L": L, "pair": k, "ratio": r, "K_B": K, "normalized": r / K})
        best = max(best, r / K)
    return best, rows


def suite_maximal(seed=0, levels=(8, 10, 12), pairs=20, n_f=50, eta=0.1, p=2.0, delta=1.0,
                  max_variation=0.25, sweep_eta=(0.3,)):
    """Two-weight maximal ratio over ``bump_separated_B`` across resolutions.

    Cascades are exact martingales, so depth ``L`` shows the level-``L``
    averages of one pair.  ``sweep_eta`` amplitudes are recorded without a verdict.
    """
    rep = ExperimentReport("maximal", seed, dict(levels=list(levels), pairs=pairs, n_f=n_f,
                                                 eta=eta, p=p, delta=delta))
    B = logbump(conjugate_exponent(p), delta)
    peaks = {}
    for L in levels:
        peaks[L], rows = _maximal_normalized(L, pairs, n_f, eta, p, B, seed)
        rep.records.extend(rows)
    v = list(peaks.values())
    var = max(v) / min(v) - 1.0
    for L in levels:
        rep.constant(f"max normalized ratio L={L}", peaks[L], "lower bound")
    for e in sweep_eta:
        sp = [_maximal_normalized(L, pairs, n_f, e, p, B, seed)[0] for L in levels]
        rep.constant(f"variation at eta={e}", max(sp) / min(sp) - 1.0, "fitted")
    rep.verdict("variation across L", var, max_variation, var < max_variation, "<")
    return rep


# -- 5 ------------------------------------------------------------------------

def suite_tau_scaling(seed=0, L=10, taus=(1, 2, 3, 4, 5), shifts=30, eta=0.5, p=2.0, delta=1.0,
                      mode="cancellative", max_slope=0.1):
    """Weighted shift norms against ``K_A K_B tau^3``."""
    rep = ExperimentReport("tau-scaling", seed, dict(L=L, taus=list(taus), shifts=shifts,
                                                     eta=eta, p=p, delta=delta, mode=mode))
    mesh = DyadicMesh(1, L)
    u = cascade(mesh, eta, seed * 7919 + 11)
    s = cascade(mesh, eta, seed * 7919 + 12)
    KA = bump_separated_A(u, s, logbump(p, delta), p)
    KB = bump_separated_B(u, s, logbump(conjugate_exponent(p), delta), p)
    rep.constant("K_A", KA, "exact")
    rep.constant("K_B", KB, "exact")
    rng = np.random.default_rng(seed)
    peak = []
    for tau in taus:
        norms = []
        for _ in range(shifts):
            a = int(rng.integers(0, tau))
            m, n = (tau - 1, a) if rng.random() < 0.5 else (a, tau - 1)
            S = random_shift(mesh, m, n, seed=int(rng.integers(2 ** 31)), mode=mode)
            norms.append(weighted_norm_estimate(S, u, s, p).estimate)
        norms = np.asarray(norms)
        peak.append(norms.max())
        rep.records.append({"tau": tau, "max_norm": norms.max(), "mean_norm": norms.mean(),
                            "normalized": norms.max() / (KA * KB * tau ** 3)})
    normalized = np.array([r["normalized"] for r in rep.records])
    C = float(normalized.max())
    rep.constant("C", C, "fitted")
    slope = float(np.polyfit(np.log(taus), np.log(np.array(peak) / np.array(taus) ** 3), 1)[0])
    rep.constant("slope of log(norm / tau^3)", slope, "fitted")
    rep.verdict("norm / (K_A K_B tau^3) <= C", float(normalized.max()), C,
                bool(np.all(normalized <= C)))
    rep.verdict("slope in tau", slope, max_slope, slope <= max_slope)
    return rep


# -- 6 ------------------------------------------------------------------------

def _decay_profiles(L, n_shifts, eta, p, seed, t_grid=None):
    mesh = DyadicMesh(1, L)
    out = []
    for k in range(n_shifts):
        u = cascade(mesh, eta, seed * 7919 + 100 + k)
        s = cascade(mesh, eta, seed * 7919 + 200 + k)
        S = random_shift(mesh, k % 3, (k // 3) % 3, seed=seed * 7919 + k, mode="positive")
        for i in range(S.tau):
            F = build_forest(u, s, p, None, S.tau, i)
            for kk in F.principal_cubes():
                prof = decay_profile(S, s, u, F, int(F.a[kk]), F.cube(kk), t_grid)
                out.append((k, i, prof))
    return out


def suite_decay(seed=0, L=10, shifts=20, eta=0.5, p=2.0, min_fraction=0.95, min_r2=0.8):
    """Exponential decay of restricted positive-shift sums over principal cubes."""
    rep = ExperimentReport("decay", seed, dict(L=L, shifts=shifts, eta=eta, p=p))
    profs = _decay_profiles(L, shifts, eta, p, seed)
    fit = [(k, i, pr) for k, i, pr in profs if pr.nonempty >= 4]
    good = [pr.c > 0 and pr.r2 >= min_r2 for _, _, pr in fit]
    for k, i, pr in fit:
        rep.records.append({"shift": k, "residue": i, "a": pr.a, "cube": str(pr.cube),
                            "c": pr.c, "r2": pr.r2, "points": pr.nonempty})
    frac = float(np.mean(good)) if fit else 0.0
    rep.constant("profiles", len(profs), "exact")
    rep.constant("profiles with >= 4 points", len(fit), "exact")
    if fit:
        rep.constant("median c", float(np.median([pr.c for _, _, pr in fit])), "fitted")
    fine = [pr for _, _, pr in _decay_profiles(L, shifts, eta, p, seed, "breakpoints")
            if pr.nonempty >= 4]
    if fine:
        rep.constant("fraction on breakpoint grid",
                     float(np.mean([pr.c > 0 and pr.r2 >= min_r2 for pr in fine])), "fitted")
    rep.verdict("qualifying profiles", len(fit), 1, len(fit) >= 1, ">=")
    rep.verdict("fraction with c > 0 and R^2 >= 0.8", frac, min_fraction,
                frac >= min_fraction, ">=")
    return rep


# -- 7 ------------------------------------------------------------------------

def suite_carleson(seed=0, levels=(8, 10, 12), pairs=10, eta=0.5, p=2.0, n_F=1000,
                   max_variation=0.10, factor=4.0):
    """Carleson constants of principal-cube sequences and the embedding bound."""
    rep = ExperimentReport("carleson", seed, dict(levels=list(levels), pairs=pairs, eta=eta,
                                                  p=p, n_F=n_F))
    const_vals = []
    for L in levels:
        mesh = DyadicMesh(1, L)
        one = mesh.constant(1.0)
        const_vals.append(carleson_constant(build_forest(one, one, p)))
    rep.verdict("constant weights: carleson == 1", max(abs(c - 1) for c in const_vals), 0,
                all(c == 1.0 for c in const_vals), "==")
    worst = 0.0
    for k in range(pairs):
        vals = []
        for L in levels:
            mesh = DyadicMesh(1, L)
            u = cascade(mesh, eta, seed * 7919 + 1000 + k)
            s = cascade(mesh, eta, seed * 7919 + 2000 + k)
            vals.append(carleson_constant(build_forest(u, s, p)))
        var = max(vals) / min(vals) - 1
        worst = max(worst, var)
        rep.records.append({"pair": k, **{f"L={L}": v for L, v in zip(levels, vals)},
                            "variation": var})
    rep.verdict("cascade variation across L", worst, max_variation, worst < max_variation, "<")

    rng = np.random.default_rng(seed)
    L = levels[len(levels) // 2]
    mesh = DyadicMesh(1, L)
    forests = []
    for k in range(4):
        u = cascade(mesh, eta, seed * 7919 + 3000 + k)
        s = cascade(mesh, eta, seed * 7919 + 4000 + k)
        forests.append((build_forest(u, s, p), s))
    Bbar = b0(conjugate_exponent(p), 1.0).complement()
    piped = [orlicz_maximal(GridFunction(mesh, s.values ** (1 / p)), Bbar).values ** p
             for _, s in forests]
    bad, top = 0, 0.0
    for t in range(n_F):
        F_, _ = forests[t % len(forests)]
        kind = t % 4
        if kind == 0:
            Fv = rng.exponential(size=mesh.n_cells)
        elif kind == 1:
            j = int(rng.integers(0, L + 1))
            Fv = mesh.upsample(np.eye(mesh.n_cubes(j))[int(rng.integers(mesh.n_cubes(j)))], j)
        elif kind == 2:
            Fv = np.exp(rng.normal(0, 2, mesh.n_cells))
        else:
            Fv = piped[t % len(forests)]
        rpt = carleson_embedding_check(F_, GridFunction(mesh, Fv), factor)
        bad += not rpt["passed"]
        top = max(top, rpt["max_normalized"])
    rep.constant("max embedding ratio / carleson", top, "exact")
    rep.verdict("embedding violations", bad, 0, bad == 0, "==")
    return rep


# -- 8 ------------------------------------------------------------------------

def suite_interp(seed=0, trials=10_000, n_atoms=16, cases=((2.0, 1.0), (3.0, 2.0)),
                 homogeneity_tol=1e-9, holdout=2_000):
    """Log interpolation ratios, their homogeneity, and the balance check."""
    rep = ExperimentReport("interp", seed, dict(trials=trials, n_atoms=n_atoms,
                                                cases=[list(c) for c in cases]))
    heights = np.logspace(0, 12, 49)
    for p, delta in cases:
        tag = f"(p={p:g}, delta={delta:g})"
        q = conjugate_exponent(p)
        mu, f = random_probability_trials(trials, n_atoms, seed)
        r, _ = interp_log_ratios(mu, f, p, delta)
        spikes = []
        for mass in (0.3, 0.1, 0.01, 1e-3):
            ms, fs = spike_trials(heights, mass, n_atoms)
            spikes.append(interp_log_ratios(ms, fs, p, delta)[0])
        spikes = np.array(spikes)
        C = float(max(r.max(), spikes.max()))
        rep.constant(f"C {tag}", C, "fitted")
        rep.constant(f"gamma {tag}", gamma_lemma(q, delta), "exact")
        mu2, f2 = random_probability_trials(holdout, n_atoms, seed + 1)
        r2 = interp_log_ratios(mu2, f2, p, delta)[0]
        rep.verdict(f"held-out ratio <= fitted C {tag}", float(r2.max()), C, r2.max() <= C)
        # spike ratios must level off as the height grows without bound
        tail = spikes[:, heights >= 1e8].max(axis=1)
        mid = spikes[:, (heights >= 1e4) & (heights < 1e8)].max(axis=1)
        growth = float(np.max(tail / mid) - 1.0)
        rep.verdict(f"spike growth past 1e8 {tag}", growth, 0.01, growth <= 0.01)
        scales = (1e-3, 7.0, 1e4)
        dev = max(float(np.max(np.abs(interp_log_ratios(mu[:500], c * f[:500], p, delta)[0]
                                      - r[:500]) / r[:500].clip(1e-300))) for c in scales)
        rep.verdict(f"homogeneity {tag}", dev, homogeneity_tol, dev <= homogeneity_tol)
        bal = balance_check(p, delta)
        rep.records.append({"p": p, "delta": delta, "max_ratio_random": float(r.max()),
                            "max_ratio_spike": float(spikes.max()), "balance": bal})
        rep.verdict(f"balance bounded {tag}", bal["tail_slope"], 0.05, bal["bounded"])
    return rep


# -- 9 ------------------------------------------------------------------------

def suite_summation(seed=0, L=10, pairs=20, eta=0.5, p=2.0, delta=1.0):
    """Per-principal-cube chain behind the decay in ``a``."""
    rep = ExperimentReport("summation", seed, dict(L=L, pairs=pairs, eta=eta, p=p, delta=delta))
    mesh = DyadicMesh(1, L)
    total, cubes, slack = 0, 0, math.inf
    for k in range(pairs):
        u = cascade(mesh, eta, seed * 7919 + 500 + k)
        s = cascade(mesh, eta, seed * 7919 + 600 + k)
        r = summation_in_a_check(u, s, p, delta)
        total += r["violations"]
        cubes += r["cubes"]
        slack = min(slack, r["worst_slack"])
        rep.records.append({"pair": k, "cubes": r["cubes"], "violations": r["violations"],
                            "K": r["K"], "C1": r["C1"], "worst_slack": r["worst_slack"],
                            "a_range": r["a_range"]})
    rep.constant("principal cubes checked", cubes, "exact")
    rep.constant("worst slack", slack, "exact")
    rep.verdict("per-cube violations", total, 0, total == 0, "==")
    u = cascade(mesh, eta, seed * 7919 + 500)
    s = cascade(mesh, eta, seed * 7919 + 600)
    flag = summation_in_a_check(u, s, p, 0.0)["no_decay_flag"]
    rep.verdict("delta=0 reports no decay", flag, True, flag is True, "==")
    return rep


# -- 10 -----------------------------------------------------------------------

def suite_hilbert(seed=0, L=12, trials=1000, eta=0.5, homogeneity_tol=1e-9, search_L=10,
                  search_budget=4):
    """Antisymmetry, the Lorentz duality step, homogeneity and search determinism."""
    rep = ExperimentReport("hilbert", seed, dict(L=L, trials=trials, eta=eta))
    rng = np.random.default_rng(seed)
    mesh = DyadicMesh(1, L)
    worst = 0.0
    for _ in range(20):
        f = rng.standard_normal(mesh.n_cells)
        g = rng.standard_normal(mesh.n_cells)
        f /= np.linalg.norm(f)
        g /= np.linalg.norm(g)
        Hf = hb.hilbert_apply(GridFunction(mesh, f)).values
        Hg = hb.hilbert_apply(GridFunction(mesh, g)).values
        worst = max(worst, abs(Hf @ g + f @ Hg))
    rep.verdict("antisymmetry", worst, 1e-8, worst <= 1e-8)
    l2 = hb.hilbert_l2_norm(mesh)
    rep.constant("unweighted L2 norm", l2, "exact")
    rep.verdict("unweighted L2 norm <= 4", l2, 4.0, l2 <= 4.0)

    pairs = [(cascade(mesh, eta, seed * 7919 + 700 + k), cascade(mesh, eta, seed * 7919 + 800 + k))
             for k in range(4)]
    neg, min_slack = 0, math.inf
    for t in range(trials):
        u, s = pairs[t % len(pairs)]
        j = int(rng.integers(0, L + 1))
        Q = mesh.cube(j, int(rng.integers(mesh.n_cubes(j))))
        kind = t % 3
        if kind == 0:
            f = rng.standard_normal(mesh.n_cells)
        elif kind == 1:
            f = hb.hilbert_apply(GridFunction(mesh, mesh.indicator(Q).values * u.values)).values
        else:
            f = np.exp(rng.normal(0, 1, mesh.n_cells))
        r = hb.mw_duality_check(u, s, f, Q)
        neg += not r["passed"]
        min_slack = min(min_slack, r["slack"])
    rep.constant("min duality slack", min_slack, "exact")
    rep.verdict("negative duality slack", neg, 0, neg == 0, "==")

    u, s = pairs[0]
    base = hb.czm_rhs(u, s, seed=seed)
    keys = ("lhs", "m_sigma", "m_u", "t_sigma", "t_u")
    dev = 0.0
    for cu, cs in ((3.0, 1.0), (1.0, 5.0)):
        sc = hb.czm_rhs(GridFunction(mesh, cu * u.values), GridFunction(mesh, cs * s.values),
                        seed=seed)
        c = cu * cs
        dev = max(dev, max(abs(sc[k] / (base[k] * math.sqrt(c)) - 1) for k in keys))
    for k in keys:
        rep.constant(f"czm {k}", base[k], base["estimators"][k])
    rep.verdict("czm homogeneity", dev, homogeneity_tol, dev <= homogeneity_tol)

    a = hb.counterexample_search(seed, search_budget, search_L)
    b = hb.counterexample_search(seed, search_budget, search_L)
    same = _plain(a) == _plain(b)
    rep.records.append({"search_trajectory": a["trajectory"], "params": a["params"]})
    rep.verdict("search determinism", same, True, same, "==")
    return rep


SUITES = {
    "oracle": suite_oracle,
    "duality": suite_duality,
    "holder": suite_holder,
    "maximal": suite_maximal,
    "tau-scaling": suite_tau_scaling,
    "decay": suite_decay,
    "carleson": suite_carleson,
    "interp": suite_interp,
    "summation": suite_summation,
    "hilbert": suite_hilbert,
}


def run_suite(name: str, seed: int = 0, **params) -> ExperimentReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    t0 = time.perf_counter()
    rep = SUITES[name](seed=seed, **params)
    rep.wall_time = time.perf_counter() - t0
    return rep
