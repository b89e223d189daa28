"""Command-line front end: spectrum, clusters, synthesize, verify, cost-sweep, angles.

Exit status: 0 success, 2 configuration error, 3 regime mismatch,
4 verification failure.  Errors are reported as JSON on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ._io import dumps, read_csv, write_csv, write_json
from .control import ControlKind, ControlSignal, Profiles, cost_sweep, synthesize, verify_control
from .errors import BeamCtlError, ConfigError, VerificationFailed
from .modal import BeamState, angle_table
from .spectrum import SpectralParams, classify_regime, cluster_map, frequency_set


def _params(args) -> SpectralParams:
    return SpectralParams(args.alpha, args.rho, args.modes)


def _emit(obj, out):
    text = dumps(obj)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def load_state(path, n_modes: int, fmt_: str = "auto") -> BeamState:
    """Initial condition from CSV `n,u0,u1` (coefficients) or `x,u0,u1` (samples on [0, pi])."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"initial-condition file not found: {path}")
    try:
        header, data = read_csv(p)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if fmt_ == "auto":
        fmt_ = {"n": "coeffs", "x": "samples"}.get(header[0], "")
    if fmt_ == "coeffs" and header == ["n", "u0", "u1"]:
        n = data[:, 0].astype(int)
        if np.any(n < 1) or np.any(data[:, 0] != n):
            raise ConfigError("mode indices must be positive integers")
        u0 = np.zeros(n_modes)
        u1 = np.zeros(n_modes)
        keep = n <= n_modes
        u0[n[keep] - 1] = data[keep, 1]
        u1[n[keep] - 1] = data[keep, 2]
        return BeamState(u0, u1)
    if fmt_ == "samples" and header == ["x", "u0", "u1"]:
        return BeamState.from_samples(data[:, 0], data[:, 1], data[:, 2], n_modes)
    raise ConfigError(f"{path}: expected header n,u0,u1 or x,u0,u1, got {','.join(header)}")


# ---------------------------------------------------------------- subcommands

def cmd_spectrum(args):
    fs = frequency_set(_params(args))
    _emit({"frequency_set": fs.to_dict(), "regime": classify_regime(fs.params).to_dict()}, args.out)


def cmd_clusters(args):
    fs = frequency_set(_params(args))
    _emit(cluster_map(fs, args.epsilon).to_dict(), args.out)


def write_control(ctrl: ControlSignal, csv_path, manifest_path, extra: dict):
    if ctrl.kind is ControlKind.INTERIOR:
        rows = ((t, x, ctrl.f_xt[i, j]) for i, t in enumerate(ctrl.t) for j, x in enumerate(ctrl.x))
        write_csv(csv_path, ["t", "x", "f"], rows)
    else:
        write_csv(csv_path, ["t", "f1", "f2"], zip(ctrl.t, ctrl.f1, ctrl.f2))
    write_json(manifest_path, {**ctrl.manifest(), **extra})


def read_control(csv_path, manifest_path) -> ControlSignal:
    for p in (csv_path, manifest_path):
        if not Path(p).is_file():
            raise ConfigError(f"file not found: {p}")
    man = json.loads(Path(manifest_path).read_text())
    kind = ControlKind(man["kind"])
    header, data = read_csv(csv_path)
    if kind is ControlKind.INTERIOR:
        t = np.unique(data[:, 0])
        x = np.unique(data[:, 1])
        f = data[:, 2].reshape(len(t), len(x))
        return ControlSignal(kind, t, x=x, f_xt=f, interval=tuple(man["interval"]), meta=man.get("meta", {}))
    prof = man["profiles"]
    profiles = Profiles(np.array(prof["h1"]), np.array(prof["h2"]), prof["assignment_log"])
    return ControlSignal(kind, data[:, 0], data[:, 1], data[:, 2], profiles=profiles, meta=man.get("meta", {}))


def cmd_synthesize(args):
    params = _params(args)
    state = load_state(args.ic, params.n_modes, args.ic_format)
    interval = tuple(args.interval) if args.interval else None
    syn = synthesize(params, state, args.T, strategy=args.strategy, epsilon=args.epsilon, interval=interval,
                     eps_weak=args.eps_weak, force=args.force, max_cond=args.max_cond)
    extra = {"params": params.to_dict(), "regime": syn.regime.value,
             "cluster_map": syn.cluster_map.to_dict() if syn.cluster_map else None}
    write_control(syn.control, args.out, args.manifest or str(Path(args.out).with_suffix(".json")), extra)
    print(dumps({"kind": syn.control.kind.value, "norm": syn.control.norm, "regime": syn.regime.value}))


def cmd_verify(args):
    manifest = args.manifest or str(Path(args.control).with_suffix(".json"))
    ctrl = read_control(args.control, manifest)
    man = json.loads(Path(manifest).read_text())
    p = man.get("params", {})
    params = SpectralParams(p.get("alpha", args.alpha), p.get("rho", args.rho), p.get("n_modes", args.modes))
    state = load_state(args.ic, params.n_modes, args.ic_format)
    res = verify_control(state, ctrl, frequency_set(params))
    tol = args.tol
    out = {**res.to_dict(), "tolerance": tol, "pass": bool(res.relative_energy <= tol)}
    _emit(out, args.out)
    if not out["pass"]:
        raise VerificationFailed(f"relative endpoint energy {res.relative_energy:.3e} exceeds {tol:.1e}")


def cmd_cost_sweep(args):
    params = _params(args)
    state = load_state(args.ic, params.n_modes, args.ic_format) if args.ic else BeamState.eigenmode(1, params.n_modes)
    rep = cost_sweep(params, state, args.T_list, strategy=args.strategy)
    write_csv(args.out, ["T", "norm"], zip(rep.T, rep.norms))
    summary = rep.to_dict()
    if args.report:
        write_json(args.report, summary)
    print(dumps({"best_exponent": rep.best_exponent, "monotone": rep.monotone, "fits": summary["fits"]}))


def cmd_angles(args):
    n, m, c = angle_table(args.max, args.a, args.b)
    write_csv(args.out, ["n", "m", "cos_phi"], zip(n.tolist(), m.tolist(), c))
    i = int(np.argmax(c)) if len(c) else None
    summary = {"min_angle": float(np.arccos(min(c.max(), 1.0))) if len(c) else None,
               "max_cos": float(c.max()) if len(c) else None,
               "argmin": [int(n[i]), int(m[i])] if i is not None else None}
    print(dumps(summary))


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="beamctl", description="Null controls for the structurally damped beam.")
    sub = ap.add_subparsers(dest="command", required=True)

    def spectral(p, modes=8):
        p.add_argument("--alpha", type=float, required=True)
        p.add_argument("--rho", type=float, required=True)
        p.add_argument("--modes", type=int, default=modes)

    def ic(p, required=True):
        p.add_argument("--ic", required=required, help="CSV with n,u0,u1 or x,u0,u1")
        p.add_argument("--ic-format", choices=["auto", "coeffs", "samples"], default="auto")

    p = sub.add_parser("spectrum", help="frequency set and regime as JSON")
    spectral(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("clusters", help="cluster map as JSON")
    spectral(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_clusters)

    p = sub.add_parser("synthesize", help="build a control and write CSV + manifest")
    spectral(p)
    ic(p)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--strategy", choices=["gram", "analytic"], default="gram")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--interval", type=float, nargs=2, metavar=("A", "B"))
    p.add_argument("--eps-weak", type=float, default=1e-3)
    p.add_argument("--force", choices=["1d", "2d"])
    p.add_argument("--max-cond", type=float, default=1e12)
    p.add_argument("--out", default="control.csv")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verify", help="re-simulate a control and check the endpoint energy")
    p.add_argument("--control", default="control.csv")
    p.add_argument("--manifest")
    ic(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cost-sweep", help="control norm against the horizon")
    spectral(p)
    ic(p, required=False)
    p.add_argument("--T-list", type=float, nargs="+", default=[1.0, 0.5, 0.25, 0.125])
    p.add_argument("--strategy", choices=["gram", "analytic"], default="gram")
    p.add_argument("--out", default="cost.csv")
    p.add_argument("--report")
    p.set_defaults(func=cmd_cost_sweep)

    p = sub.add_parser("angles", help="cosines between restricted eigenfunctions")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--max", type=int, default=10)
    p.add_argument("--out", default="angles.csv")
    p.set_defaults(func=cmd_angles)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except BeamCtlError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}),
              file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
