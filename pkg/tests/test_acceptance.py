"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py`` (the lines are repeated in the
terminal summary) or ``python tests/test_acceptance.py``.
"""

import json
import os
import sys
import tempfile
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from levifold import ObstructionError, catalog, gauge_transform  # noqa: E402
from levifold import currents as cu  # noqa: E402
from levifold.cli import run as cli_run  # noqa: E402
from levifold.frame import alpha_leafwise, frame_at, structure_residual  # noqa: E402
from levifold.hfield import (build_h, elliptic_fallback, partition_of_unity, patch_h, seed_grid,  # noqa: E402
                             verify_field)
from levifold.holonomy import germinal_holonomy, loop_integral_alpha  # noqa: E402
from levifold.leaves import leaf_loop_around, straight_curve, trace_curve, transversal_at  # noqa: E402
from levifold.surface import GAUGES, eval_jet2, point  # noqa: E402
from levifold.tangency import (bishop_graph, classify_tangency, find_complex_tangencies, gamma_sphere,  # noqa: E402
                               index_check, tangency_winding_index)

from oracles import fd_gradient, fd_hessian, rho_values, wirtinger  # noqa: E402

N = 1000
FOUR_PI = 4 * np.pi
CATALOG = ("sphere", "flat", "sheared_flat", "worm")
ACCEPTANCE_RESULTS = []


def _record(n, title, ok, detail, started):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d} {title}: {detail} [{time.time() - started:.1f}s]"
    ACCEPTANCE_RESULTS.append(line)
    print(line)
    assert ok, line


def _rel(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1.0)))


# -- 1 ------------------------------------------------------------------------------

def check_jets():
    worst = {}
    for name in CATALOG:
        s = catalog(name)
        p = s.box_sampler(np.random.default_rng(101), N)
        j = eval_jet2(s, p)
        f = lambda x: rho_values(s, x)  # noqa: E731
        g, H = fd_gradient(f, p), fd_hessian(f, p)
        holo, mixed, holo2 = wirtinger(g, H)
        worst[name] = max(_rel(j.value, f(p)), _rel(j.real_grad, g), _rel(j.real_hess, H),
                          _rel(j.holo_grad, holo), _rel(j.hess_mixed, mixed), _rel(j.hess_holo, holo2))
    m = max(worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    return m < 1e-6, f"max relative error {m:.2e} ({detail})"


# -- 2 ------------------------------------------------------------------------------

def check_frame():
    worst = 0.0
    for name in CATALOG:
        s = catalog(name)
        fr = frame_at(s, s.sample(N, seed=202))
        hg = fr.jet.holo_grad
        worst = max(worst, np.max(np.abs(np.sum(fr.eta * fr.T, -1) - 1)),
                    np.max(np.abs(np.sum(fr.Ln * hg, -1) - 0.5)), np.max(np.abs(np.sum(fr.L1 * hg, -1))))
    return worst < 1e-10, f"max defect of eta(T)=1, L_n rho=1/2, d rho(L1)=0: {worst:.2e}"


# -- 3 ------------------------------------------------------------------------------

def check_levi():
    w, s = catalog("worm"), catalog("sphere")
    lw = np.max(np.abs(frame_at(w, w.sample(N, seed=303)).levi))
    ls = np.min(frame_at(s, s.sample(N, seed=303)).levi)
    return lw < 1e-8 and ls >= 0.9, f"worm max |levi| {lw:.2e}, sphere min levi {ls:.6f}"


# -- 4 ------------------------------------------------------------------------------

def check_structure():
    f, w = catalog("flat"), catalog("worm")
    rf = float(np.max(structure_residual(f, f.sample(N, seed=404), step=1e-3)))
    pw = w.sample(N, seed=404)
    rw = [float(np.max(structure_residual(w, pw, step=st))) for st in (1e-3, 5e-4, 2.5e-4)]
    orders = np.log2(np.array(rw[:-1]) / np.array(rw[1:]))
    ok = rf < 1e-5 and rw[0] < 1e-5 and np.all(orders >= 1.95)
    return ok, (f"flat {rf:.1e}, worm {rw[0]:.2e} at step 1e-3; worm orders under halving "
                f"{orders[0]:.4f}, {orders[1]:.4f}")


# -- 5 ------------------------------------------------------------------------------

def check_gauge():
    worst = 0.0
    for name in ("flat", "sheared_flat", "worm"):
        s = catalog(name)
        p = s.sample(N, seed=505)
        fr = frame_at(s, p)
        for gname in ("wave", "zim_wre", "wre"):
            g = GAUGES[gname]
            diff = alpha_leafwise(gauge_transform(s, g), p) - alpha_leafwise(s, p)
            dg = g.jet(p, order=1).grad
            exp_ = np.stack([np.sum(dg * fr.e1, -1), np.sum(dg * fr.e2, -1)], -1)
            worst = max(worst, float(np.max(np.abs(diff - exp_))))
    per = 0.0
    for name, seed in (("worm", point(0, 2)), ("sheared_flat", point(0.3j, 0.5 - 0.2j))):
        s = catalog(name)
        base = loop_integral_alpha(s, leaf_loop_around(s, seed, 1, ds=1e-2))
        for gname in ("wave", "wre"):
            gs = gauge_transform(s, gname)
            per = max(per, abs(loop_integral_alpha(gs, leaf_loop_around(gs, seed, 1, ds=1e-2)) - base))
    return worst < 1e-6 and per < 1e-6, f"leafwise alpha - dg {worst:.2e}; period change {per:.2e}"


# -- 6 ------------------------------------------------------------------------------

def check_worm():
    w = catalog("worm")
    loop = leaf_loop_around(w, point(0, 2), 1, ds=1e-2)
    period = loop_integral_alpha(w, loop)
    # a positive turn multiplies |z| by e^(4 pi) and leaves the region, so lifts use the reversed loop
    back = leaf_loop_around(w, point(0, 2), -1, ds=1e-2)
    back_period = loop_integral_alpha(w, back)
    offsets = np.array([1e-3, 5e-4, 2.5e-4])
    ratios = np.array([germinal_holonomy(w, back, o).lift_log_ratio for o in offsets])
    defects = np.abs(ratios - back_period)
    C = float(np.max(defects / offsets))
    first_order = bool(np.all(defects <= C * offsets) and np.all(defects[1:] <= 0.5 * defects[:-1]))
    seeds = w.chart.forward(np.zeros(2), np.array([2.0, 3.0j]))
    try:
        build_h(w, seeds, transversal_at(w, point(0, 2.5), 0.05))
        obs = None
    except ObstructionError as exc:
        obs = exc.period
    ok = (abs(abs(period) - FOUR_PI) < 1e-3 and first_order and defects[-1] < 1e-3
          and obs is not None and abs(obs - period) < 1e-6)
    return ok, (f"|period| - 4pi = {abs(period) - FOUR_PI:.1e}; lift defects {', '.join(f'{d:.1e}' for d in defects)}"
                f" (C = {C:.2e}); ObstructionError period {obs if obs is None else f'{obs:.10f}'}")


# -- 7 ------------------------------------------------------------------------------

LABELS = np.linspace(-0.85, 0.85, 17)
_G = np.arange(-1.6, 1.6 + 1e-9, 0.2)
W = (_G[:, None] + 1j * _G[None, :]).ravel()


def _path_independence(s):
    worst = 0.0
    for c, a, b, corner in ((0.3, -1.0 - 0.5j, 1.2 + 0.8j, -1.0 + 0.8j), (-0.6, 1.3 + 1.3j, -0.4 - 1.1j, 1.3 - 1.1j)):
        p0 = s.chart.forward(c, a)
        one = trace_curve(s, p0, straight_curve(a, b), ds=1e-3)
        leg1 = trace_curve(s, p0, straight_curve(a, corner), ds=1e-3)
        leg2 = trace_curve(s, leg1.points[-1], straight_curve(corner, b), ds=1e-3)
        assert np.linalg.norm(one.points[-1] - leg2.points[-1]) < 1e-9
        d = loop_integral_alpha(s, one) - loop_integral_alpha(s, leg1) - loop_integral_alpha(s, leg2)
        worst = max(worst, abs(d))
    return worst


def check_pipeline():
    parts = []
    ok = True
    for name, params in (("flat", {}), ("sheared_flat", {}), ("sheared_flat", {"g": "wave"})):
        s = catalog(name, params)
        pi = _path_independence(s)
        ok &= pi < 1e-6
        tag = name + (f"[{params['g']}]" if params else "")
        if params:
            parts.append(f"{tag} path-indep {pi:.1e}")
            continue
        base = transversal_at(s, point(0, 0), 0.9, ds=1e-2)
        lo = build_h(s, seed_grid(s, LABELS[LABELS <= 0.35], W), base, interp_radius=0.25)
        hi = build_h(s, seed_grid(s, LABELS[LABELS >= -0.35], W), base, interp_radius=0.25)
        field = patch_h([lo, hi], partition_of_unity(-0.85, 0.85, 2))
        rep = verify_field(s, field, 1e-5, samples=N, seed=707)
        ok &= rep.passed and rep.samples >= 0.9 * N
        parts.append(f"{tag} arg {rep.max_arg_defect:.1e} comm {rep.max_commutator_defect:.1e} "
                     f"({rep.samples} covered) path-indep {pi:.1e}")
    return bool(ok), "; ".join(parts)


# -- 8 ------------------------------------------------------------------------------

def check_fallback():
    s = catalog("sphere")
    eps = 0.1
    r = elliptic_fallback(s, point(1, 0), 0.5, eps, samples=N)
    ok = r.passed and r.max_commutator_defect == 0.0 and r.max_arg_defect < eps and r.radius < 0.5
    return ok, (f"radius shrunk 0.5 -> {r.radius:g}; arg defect {r.max_arg_defect:.3e} < {eps}; "
                f"commutator defect {r.max_commutator_defect}")


# -- 9 ------------------------------------------------------------------------------

def check_tangency():
    g = gamma_sphere()
    pts = find_complex_tangencies(g)
    reps = [classify_tangency(g, p) for p in pts]
    ne, nh, genus, defect = index_check(g)
    sphere_ok = (len(pts) == 2 and all(r.kind == "elliptic" and abs(r.lam) < 1e-6 for r in reps)
                 and defect == 0 and all(tangency_winding_index(g, p) == 1 for p in pts))
    hb = bishop_graph(2.0)
    hp = find_complex_tangencies(hb)
    hr = classify_tangency(hb, hp[0]) if len(hp) == 1 else None
    hyp_ok = (hr is not None and abs(hr.lam - 2.0) < 1e-6 and hr.index == -1
              and tangency_winding_index(hb, hp[0]) == -1)
    return sphere_ok and hyp_ok, (f"gamma_sphere: {len(pts)} tangencies, lambdas "
                                  f"{[float(f'{r.lam:.1e}') for r in reps]}, (e,h,g,defect)=({ne},{nh},{genus},{defect}); "
                                  f"graph: lambda {hr.lam if hr else None:.8f}, index {hr.index if hr else None}")


# -- 10 -----------------------------------------------------------------------------

def _leaf_spread(mesh, d):
    return max(float(np.ptp(d[mesh.labels == c])) for c in np.unique(mesh.labels))


def check_sullivan():
    parts = []
    ok = True
    for name in ("flat", "sheared_flat"):
        s = catalog(name)
        base = transversal_at(s, point(0, 0), 0.9, ds=1e-2)
        errs = []
        for r in (8, 16):
            m = cu.build_mesh(s, (r, r, r))
            sol = cu.solve_closed_form(m)
            good = isinstance(sol, cu.Cochain1) and cu.check_cochain(m, sol)[0]
            ok &= good
            if not good:
                errs.append(np.inf)
                continue
            he = cu.extract_h_from_form(m, sol)
            hb = build_h(s, m.points, base).evaluate(s, m.points)[0]
            errs.append(_leaf_spread(m, he - hb))
        # O(1/res): error times resolution does not grow (flat is exact up to rounding)
        ok &= errs[1] < 1e-10 or errs[1] * 16 <= 1.05 * errs[0] * 8
        parts.append(f"{name} feasible, h error {errs[0]:.3e} (res 8) {errs[1]:.3e} (res 16)")
    w = catalog("worm")
    for res in ((8, 16, 8), (8, 32, 8), (12, 16, 8)):
        m = cu.build_mesh(w, res)
        cert = cu.solve_closed_form(m)
        good = isinstance(cert, cu.CurrentCertificate) and cu.check_certificate(m, cert)[0] and cert.pairing >= 1.0
        ok &= good
        parts.append(f"worm {res} {'certificate' if good else 'NO certificate'}"
                     f" (pairing {getattr(cert, 'pairing', float('nan')):.3f}, residual {getattr(cert, 'residual', float('nan')):.1e})")
    return bool(ok), "; ".join(parts)


# -- 11 -----------------------------------------------------------------------------

def check_determinism():
    runs = (["holonomy", "--surface", "worm", "--seed", "0,2", "--turns", "-1", "--offset", "1e-3"],
            ["sullivan", "--surface", "worm", "--res", "8,16,8"],
            ["build-h", "--surface", "sheared_flat", "--samples", "100"])
    ok = True
    with tempfile.TemporaryDirectory() as d:
        for argv in runs:
            reports, csvs = [], []
            for _ in range(2):
                code = cli_run(argv + ["--out", d])
                ok &= code == 0
                rep = json.load(open(os.path.join(d, "report.json")))
                rep.pop("timestamp")
                reports.append(json.dumps(rep, sort_keys=True))
                csvs.append({f: open(os.path.join(d, f), "rb").read() for f in sorted(os.listdir(d))
                             if f.endswith(".csv")})
            ok &= reports[0] == reports[1] and csvs[0] == csvs[1]
    return bool(ok), f"{len(runs)} commands run twice: reports (minus timestamp) and CSVs identical"


CRITERIA = [
    (1, "jet correctness", check_jets),
    (2, "frame identities", check_frame),
    (3, "Levi-flatness", check_levi),
    (4, "structure identity", check_structure),
    (5, "gauge law", check_gauge),
    (6, "worm obstruction", check_worm),
    (7, "constructive pipeline", check_pipeline),
    (8, "elliptic fallback", check_fallback),
    (9, "tangency and index", check_tangency),
    (10, "Sullivan criterion", check_sullivan),
    (11, "determinism", check_determinism),
]


@pytest.mark.parametrize("n,title,check", CRITERIA, ids=[f"criterion_{n:02d}" for n, _, _ in CRITERIA])
def test_acceptance(n, title, check):
    t0 = time.time()
    ok, detail = check()
    _record(n, title, ok, detail, t0)


if __name__ == "__main__":
    failed = 0
    for n, title, check in CRITERIA:
        t0 = time.time()
        try:
            _record(n, title, *check(), t0)
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
