"""Command line front end: ``levifold <command> [options]``.

Every run writes ``report.json`` (plus command specific CSV files) into the
output directory.  Exit codes: 0 when the computation finished (an
obstruction found on the worm counts as a finished computation), 1 for
usage errors, 2 for numerical failures.

A config file (``--config FILE``) holds ``key = value`` lines using the long
option names without dashes; options given on the command line win.
"""

import argparse
import csv
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import (BadParams, DomainError, LevifoldError, LiftEscaped, NoChart, ObstructionError,
                     OffSurface, UnknownSurface)

SCHEMA = "levifold.report/1"
USAGE_ERRORS = (UnknownSurface, BadParams, DomainError, OffSurface, NoChart)

DEFAULTS = {
    "surface": "flat", "R": 4.0, "g": "zim_wre", "tol": 1e-6, "ds": 1e-2, "out": ".",
    "samples": 200, "rng": 0, "seed": None, "turns": 1, "to": None, "offset": None,
    "grid": 64, "res": "8,8,8", "epsilon": None, "h": "build", "labels": 17, "spacing": 0.2,
    "radius": 0.5, "point": None,
}


class UsageError(Exception):
    pass


def _complex(s):
    return complex(s.strip().replace("i", "j"))


def _point(text):
    from .surface import point
    parts = [p for p in str(text).split(",") if p.strip()]
    if len(parts) == 2:
        return point(_complex(parts[0]), _complex(parts[1]))
    if len(parts) == 4:
        return np.array([float(p) for p in parts])
    raise UsageError(f"cannot parse point {text!r}: use 'z,w' or four reals")


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _read_config(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"bad config line {line!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--surface")
    common.add_argument("--R", type=float, help="worm parameter R > 1")
    common.add_argument("--g", help="gauge for sheared_flat")
    common.add_argument("--tol", type=float)
    common.add_argument("--ds", type=float)
    common.add_argument("--out", help="output directory")
    common.add_argument("--config", help="key = value file mirroring the options")

    parser = argparse.ArgumentParser(prog="levifold", description="Levi-flat foliation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="frame, Levi form and structure residual sweep")
    p.add_argument("--samples", type=int)
    p.add_argument("--rng", type=int)

    p = sub.add_parser("tangencies", parents=[common], help="complex tangencies of a 2-surface")
    p.add_argument("--grid", type=int)

    p = sub.add_parser("trace", parents=[common], help="trace a leaf path or loop")
    p.add_argument("--seed")
    p.add_argument("--turns", type=int)
    p.add_argument("--to", help="target w for an open path")

    p = sub.add_parser("holonomy", parents=[common], help="alpha period and germinal holonomy of a loop")
    p.add_argument("--seed")
    p.add_argument("--turns", type=int)
    p.add_argument("--offset", help="comma separated lift offsets")

    p = sub.add_parser("build-h", parents=[common], help="leafwise potential h from a base transversal")
    p.add_argument("--labels", type=int)
    p.add_argument("--spacing", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("verify-field", parents=[common], help="check X = e^h L_n")
    p.add_argument("--h", choices=["zero", "build", "fallback"])
    p.add_argument("--epsilon", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--point", help="elliptic point for the fallback field")
    p.add_argument("--radius", type=float)
    p.add_argument("--labels", type=int)
    p.add_argument("--spacing", type=float)

    p = sub.add_parser("sullivan", parents=[common], help="closed defining form or current certificate")
    p.add_argument("--res", help="mesh resolution, e.g. 8,16,8")
    return parser


def _config(ns):
    cfg = dict(DEFAULTS)
    if ns.config:
        cfg.update(_read_config(ns.config))
    for k, v in vars(ns).items():
        if v is not None:
            cfg[k] = v
    # values from the config file arrive as strings
    for k in ("R", "tol", "ds", "epsilon", "spacing", "radius"):
        if cfg.get(k) is not None:
            cfg[k] = float(cfg[k])
    for k in ("samples", "rng", "turns", "grid", "labels"):
        if cfg.get(k) is not None:
            cfg[k] = int(cfg[k])
    cfg.pop("config", None)
    return cfg


def _surface(cfg):
    from .surface import catalog
    name = cfg["surface"]
    params = {}
    if name == "worm":
        params["R"] = cfg["R"]
    if name == "sheared_flat":
        params["g"] = cfg["g"]
    return catalog(name, params)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _f(x):
    return float(x)


# -- commands ------------------------------------------------------------------------

def cmd_analyze(cfg, out):
    from .frame import alpha_at, frame_at, structure_residual
    s = _surface(cfg)
    pts = s.sample(cfg["samples"], cfg["rng"])
    fr = frame_at(s, pts)
    etaT = np.sum(fr.eta * fr.T, axis=-1)
    Ln_rho = np.sum(fr.Ln * fr.jet.holo_grad, axis=-1)
    dL1 = np.sum(fr.L1 * fr.jet.holo_grad, axis=-1)
    result = {"surface": s.describe(), "samples": len(pts),
              "max_eta_T_defect": _f(np.max(np.abs(etaT - 1))),
              "max_Ln_rho_defect": _f(np.max(np.abs(Ln_rho - 0.5))),
              "max_drho_L1": _f(np.max(np.abs(dL1))),
              "levi_min": _f(np.min(fr.levi)), "levi_max": _f(np.max(fr.levi))}
    res = np.full(len(pts), np.nan)
    disc = np.full(len(pts), np.nan)
    if s.levi_flat is not None:
        al = alpha_at(s, pts)
        disc = np.max(al.discrepancy, axis=-1)
        res = structure_residual(s, pts, step=1e-3, alpha=al)
        result["max_structure_residual"] = _f(np.max(res))
        result["max_alpha_route_discrepancy"] = _f(np.max(disc))
    _write_csv(os.path.join(out, "analyze.csv"),
               ["z_re", "z_im", "w_re", "w_im", "levi", "eta_T", "structure_residual", "alpha_discrepancy"],
               [list(p) + [fr.levi[i], etaT[i], res[i], disc[i]] for i, p in enumerate(pts)])
    return result


def cmd_tangencies(cfg, out):
    from . import tangency as tg
    name = cfg["surface"]
    if name not in tg.SURFACES_2D:
        raise UnknownSurface(f"unknown 2-surface {name!r}; choose from {sorted(tg.SURFACES_2D)}")
    gamma = tg.SURFACES_2D[name]()
    pts, failures = tg.find_complex_tangencies(gamma, cfg["grid"], return_failures=True)
    reports = [tg.classify_tangency(gamma, p) for p in pts]
    ne = sum(r.kind == "elliptic" for r in reports)
    nh = sum(r.kind == "hyperbolic" for r in reports)
    defect = None if any(r.kind == "degenerate" for r in reports) else ne - nh - (2 - 2 * gamma.genus)
    _write_csv(os.path.join(out, "tangencies.csv"), ["z_re", "z_im", "w_re", "w_im", "lambda", "kind", "index"],
               [list(r.point) + [r.lam, r.kind, r.index] for r in reports])
    return {"surface": name, "genus": gamma.genus, "tangencies": [r.to_dict() for r in reports],
            "index_check": {"elliptic": ne, "hyperbolic": nh, "genus": gamma.genus, "defect": defect},
            "rejected_candidates": len(failures)}


def _seed(cfg, s):
    if cfg["seed"] is None:
        return s.sample(1, cfg["rng"])[0]
    from .surface import project_to_surface
    p = _point(cfg["seed"])
    if abs(float(s.value(p))) > 1e-8:
        p = project_to_surface(s, p, iterations=4)
    return p


def cmd_trace(cfg, out):
    from . import leaves
    s = _surface(cfg)
    seed = _seed(cfg, s)
    result = {"surface": s.describe(), "seed": [float(x) for x in seed]}
    if cfg["to"] is not None:
        path = leaves.trace_to_w(s, seed, _complex(cfg["to"]), ds=cfg["ds"])
    else:
        loop = leaves.leaf_loop_around(s, seed, cfg["turns"], ds=cfg["ds"])
        path = loop.path
        result.update(turns=loop.turns, closure_defect=_f(loop.closure_defect), closed=bool(loop.closed))
    result.update(steps=len(path.points) - 1, max_rho_defect=path.max_rho_defect,
                  max_eta_defect=path.max_eta_defect, length=path.length)
    if s.chart is not None:
        lab = path.labels(s)
        result["label_start"], result["label_end"] = _f(lab[0]), _f(lab[-1])
        result["principal_label_end"] = _f(s.chart.label(path.points[-1]))
    leaves.write_path_csv(path, os.path.join(out, "paths.csv"))
    return result


def cmd_holonomy(cfg, out):
    from . import holonomy as hol
    from . import leaves
    s = _surface(cfg)
    seed = _seed(cfg, s)
    loop = leaves.leaf_loop_around(s, seed, cfg["turns"], ds=cfg["ds"])
    base = hol.holonomy(s, loop)
    result = {"surface": s.describe(), "seed": [float(x) for x in seed], "turns": loop.turns,
              "alpha_period": base.alpha_period, "abs_alpha_period": abs(base.alpha_period),
              "orientation": base.orientation, "quadrature_error": base.error_estimate,
              "closure_defect": _f(loop.closure_defect), "lifts": []}
    for off in _floats(cfg["offset"]) if cfg["offset"] else []:
        try:
            r = hol.germinal_holonomy(s, loop, off)
            result["lifts"].append({"offset": off, "lift_log_ratio": r.lift_log_ratio,
                                    "lift_time": r.lift_time})
        except LiftEscaped as exc:
            result["lifts"].append({"offset": off, "error": exc.to_dict()})
    leaves.write_path_csv(loop, os.path.join(out, "paths.csv"))
    return result


def _default_h(s, cfg):
    """Base transversal and seed grid used by build-h and verify-field."""
    from . import hfield, leaves
    from .surface import point
    if s.chart is None:
        raise NoChart(f"{s.name} has no leaf chart")
    n = cfg["labels"]
    if s.chart.kind == "annulus":
        R = s.params["R"]
        base = leaves.transversal_at(s, point(0, 0.5 * (1 + R)), 0.05, ds=1e-3)
        labels = np.linspace(0.0, 1e-3, n)
        rs = np.linspace(1.1, R - 0.1, 4)
        ths = np.linspace(-np.pi, np.pi, 9)[:-1]
        W = (rs[:, None] * np.exp(1j * ths[None, :])).ravel()
    else:
        base = leaves.transversal_at(s, point(0, 0), 0.9, ds=1e-2)
        labels = np.linspace(-0.85, 0.85, n)
        g = np.arange(-1.6, 1.6 + 1e-9, cfg["spacing"])
        W = (g[:, None] + 1j * g[None, :]).ravel()
    seeds = hfield.seed_grid(s, labels, W)
    return hfield.build_h(s, seeds, base, ds=cfg["ds"], stride=10 ** 9,
                          interp_radius=max(hfield.INTERP_RADIUS, 1.25 * cfg["spacing"]))


def cmd_build_h(cfg, out):
    from . import hfield
    s = _surface(cfg)
    try:
        F = _default_h(s, cfg)
    except ObstructionError as exc:
        return {"surface": s.describe(), "obstruction": True, "period": _f(exc.period),
                "abs_period": abs(_f(exc.period)), "error": exc.to_dict()}
    F.write_csv(os.path.join(out, "h.csv"))
    eps = cfg["epsilon"] if cfg["epsilon"] is not None else 1e-5
    rep = hfield.verify_field(s, F, eps, cfg["samples"], cfg["rng"])
    return {"surface": s.describe(), "obstruction": False, "samples_stored": len(F),
            "h_max_abs": _f(np.max(np.abs(F.h))), "field_report": rep.to_dict()}


def cmd_verify_field(cfg, out):
    from . import hfield
    s = _surface(cfg)
    eps = cfg["epsilon"] if cfg["epsilon"] is not None else 1e-5
    if cfg["h"] == "fallback":
        P = _point(cfg["point"]) if cfg["point"] else s.sample(1, cfg["rng"])[0]
        rep = hfield.elliptic_fallback(s, P, cfg["radius"], eps, seed=cfg["rng"])
        return {"surface": s.describe(), "h": "fallback", "field_report": rep.to_dict()}
    if cfg["h"] == "zero":
        F = hfield.ConstantField(0.0)
    else:
        F = _default_h(s, cfg)
    pts = s.sample(cfg["samples"], cfg["rng"])
    arg, comm, covered = hfield.field_defects(s, F, pts)
    rep = hfield.verify_field(s, F, eps, points=pts)
    _write_csv(os.path.join(out, "field.csv"), ["z_re", "z_im", "w_re", "w_im", "arg_defect", "commutator_defect", "covered"],
               [list(p) + [arg[i], comm[i], int(covered[i])] for i, p in enumerate(pts)])
    return {"surface": s.describe(), "h": cfg["h"], "field_report": rep.to_dict()}


def cmd_sullivan(cfg, out):
    from . import currents
    s = _surface(cfg)
    res = _ints(cfg["res"])
    mesh = currents.build_mesh(s, res)
    sol = currents.solve_closed_form(mesh)
    result = {"surface": s.describe(), "resolution": res, "vertices": len(mesh.points),
              "edges": len(mesh.edges), "faces": len(mesh.faces), "seam_edges": len(mesh.seam_edges),
              "dd_norm": mesh.dd_norm(), "leafwise_eta_defect": mesh.leafwise_eta_defect()}
    if isinstance(sol, currents.Cochain1):
        ok, face = currents.check_cochain(mesh, sol)
        h = currents.extract_h_from_form(mesh, sol)
        _write_csv(os.path.join(out, "h.csv"), ["label", "z_re", "z_im", "w_re", "w_im", "h"],
                   [[mesh.labels[i]] + list(mesh.points[i]) + [h[i]] for i in range(len(h))])
        _write_csv(os.path.join(out, "omega.csv"), ["edge", "kind", "tail", "head", "omega"],
                   [[e, "transverse" if mesh.kinds[e] else "leafwise", int(a), int(b), sol.values[e]]
                    for e, (a, b) in enumerate(mesh.edges)])
        result.update(feasible=True, verified=ok, max_face_residual=face)
    else:
        ok, res_ = currents.check_certificate(mesh, sol)
        currents.write_certificate_csv(mesh, sol, os.path.join(out, "certificate.csv"))
        result.update(feasible=False, verified=ok, certificate_residual=res_, pairing=sol.pairing)
    return result


COMMANDS = {"analyze": cmd_analyze, "tangencies": cmd_tangencies, "trace": cmd_trace,
            "holonomy": cmd_holonomy, "build-h": cmd_build_h, "verify-field": cmd_verify_field,
            "sullivan": cmd_sullivan}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_report(out, command, cfg, result=None, error=None):
    report = {"schema": SCHEMA, "version": __version__, "command": command,
              "config": _clean(cfg), "result": _clean(result), "error": error,
              "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def run(argv=None):
    """Run one command; returns the process exit code."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        cfg = _config(ns)
    except (UsageError, OSError, ValueError) as exc:
        print(f"levifold: {exc}", file=sys.stderr)
        return 1
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    command = cfg.pop("command")
    try:
        result = COMMANDS[command](cfg, out)
    except UsageError as exc:
        write_report(out, command, cfg, error={"code": "usage", "message": str(exc)})
        print(f"levifold: {exc}", file=sys.stderr)
        return 1
    except ObstructionError as exc:
        write_report(out, command, cfg, result={"obstruction": True, "period": float(exc.period)},
                     error=_clean(exc.to_dict()))
        return 0
    except LevifoldError as exc:
        write_report(out, command, cfg, error=_clean(exc.to_dict()))
        print(f"levifold: {exc.code}: {exc}", file=sys.stderr)
        if isinstance(exc, USAGE_ERRORS):
            return 1
        return 2
    write_report(out, command, cfg, result=result)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
