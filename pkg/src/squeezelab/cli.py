"""Command-line front end.

Exit codes: 0 success, 1 the computation has no meaningful answer for
the input (for example a criterion that applies at no k), 2 input error.
"""

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import extreme, gaussian, lg, ssi
from .io import (InputError, RunConfig, config_from_kv, load_moments, read_config,
                 write_csv, write_fcurve)
from .oracle import n_threads

CONFIG_KEYS = ("n_atoms", "n_photons", "coupling_g", "scattering_eta", "atom_spin",
               "back_action", "scatter_order", "initial_variance", "theta", "n_light",
               "n_atoms_grid", "n_list", "theta_protocol", "seed", "samples", "output")


class DomainError(RuntimeError):
    """The requested quantity is undefined for this input."""


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    if isinstance(v, ssi.NotApplicable):
        return None
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return None if math.isnan(v) else float(v)
    return v


def _emit(text, args):
    path = getattr(args, "output", None) or getattr(args, "_config_output", "")
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------ depth

def moment_depth(md):
    """Depth certified by the improved and the polarization-based criterion.

    The improved criterion uses the direction of smallest variance; the
    other uses the smallest variance orthogonal to the mean spin.
    """
    N, j = md.N, md.j
    w, v = np.linalg.eigh(md.Gamma)
    e = v[:, 0]
    var = max(float(w[0]), 0.0)
    perp = float(np.trace(md.C) - e @ md.C @ e)
    out = {"improved": None, "sm": None}
    if float(N).is_integer() and N >= 2:
        N = int(N)
        out["improved"] = extreme.depth_infer(var, N, criterion="improved",
                                              sum_perp_sq=perp, j=j)
        m = float(np.linalg.norm(md.mean))
        if m > 1e-12 * N * j:
            n = md.mean / m
            P = np.eye(3) - np.outer(n, n)
            wp, vp = np.linalg.eigh(P @ md.Gamma @ P + 1e9 * N * N * np.outer(n, n))
            out["sm"] = extreme.depth_infer(max(float(wp[0]), 0.0), N, criterion="sm",
                                            mean_z=min(m, N * j), j=j)
        else:
            out["sm"] = 1
    ks = [k for k in out.values() if k is not None]
    out["depth"] = max(ks) if ks else None
    return out


# ------------------------------------------------------------ subcommands

def cmd_ssi_eval(args):
    md = load_moments(args.moments)
    problems = md.validate()
    fixed = ssi.ssi_set_check(md)
    report = {
        "N": md.N, "j": md.j,
        "invalid": problems,
        "named": ssi.named_parameters(md),
        "compact": {"".join(ssi.AXES[i] for i in I) or "-": v for I, v in fixed.compact.items()},
        "complete_fixed": dict(zip("abcd", fixed.slacks)),
    }
    if args.search:
        searched, frame = ssi.search_frame(md)
        report["complete_searched"] = dict(zip("abcd", searched.slacks))
        report["searched_frame"] = frame
    if md.N >= 2:
        xg = ssi.xi_G(md)
        report["xi_G"] = xg.value
        report["squeezed_directions"] = xg.squeezed_directions
        tb, _, _ = ssi.two_body_form(md)
        report["two_body_min"] = min(tb.values())
    depth = moment_depth(md)
    report["depth"] = depth["depth"]
    report["depth_by_criterion"] = {"improved": depth["improved"], "sm": depth["sm"]}
    report["entangled"] = bool(fixed.entangled or report.get("xi_G", 1) < 1 - 1e-9
                               or (depth["depth"] or 1) > 1)
    report = _clean(report)
    if args.json:
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        lines = []
        for k in sorted(report):
            v = report[k]
            if isinstance(v, dict):
                for kk in sorted(v):
                    lines.append(f"{k}.{kk}: {v[kk]}")
            else:
                lines.append(f"{k}: {v}")
        text = "\n".join(lines) + "\n"
    _emit(text, args)
    return 0


def cmd_fcurve(args):
    J = args.J
    if J <= 0 or abs(2 * J - round(2 * J)) > 1e-12:
        raise InputError("J must be a positive half-integer")
    if J > 200:
        raise InputError("J exceeds the cap of 200 for tabulated curves; use f_value instead")
    grid = None
    if args.points:
        grid = extreme.default_mu_grid(J, args.points)
    curve = extreme.f_curve(J, grid)
    _emit(write_fcurve(curve), args)
    return 0


def cmd_depth(args):
    if args.moments:
        md = load_moments(args.moments)
        res = moment_depth(md)
        if res["depth"] is None:
            raise DomainError("no depth criterion applies to these moments")
        _emit(json.dumps(_clean(res), sort_keys=True) + "\n", args)
        return 0
    if args.N is None or args.var_x is None:
        raise InputError("give a moment file or --N and --var-x")
    N, j, crit = args.N, args.j, args.criterion
    needs = {"improved": "sum_perp", "duan": "sum_perp", "sm": "mean_z"}[crit]
    if getattr(args, needs) is None:
        raise InputError(f"criterion {crit} needs --{needs.replace('_', '-')}")
    if args.k is not None:
        if crit == "improved":
            r = extreme.improved_depth_check(args.var_x, args.sum_perp, N, args.k, j)
            if not r.applicable:
                raise DomainError(f"improved criterion does not apply at k={args.k}")
            slack = r.slack
        elif crit == "sm":
            slack = extreme.sm_depth_check(args.var_x, args.mean_z, N, j, args.k)
        else:
            slack = extreme.duan_check(args.var_x, args.sum_perp, N, args.k)
        _emit(json.dumps({"k": args.k, "slack": slack, "violated": slack < 0}) + "\n", args)
        return 0
    # the applicability condition is weakest at k = 1
    if crit == "improved" and not extreme.improved_depth_check(
            args.var_x, args.sum_perp, N, 1, j).applicable:
        raise DomainError("improved criterion is inapplicable for every k")
    k = extreme.depth_infer(args.var_x, N, criterion=crit, sum_perp_sq=args.sum_perp,
                            mean_z=args.mean_z, j=j)
    _emit(json.dumps({"criterion": crit, "depth_at_least": k}) + "\n", args)
    return 0


def _pmap(fn, items):
    with ThreadPoolExecutor(n_threads()) as pool:
        return list(pool.map(fn, items))


def cmd_lg_kn(args, cfg):
    params = cfg.gauss_params()
    th = np.asarray(cfg.theta)
    ns = sorted(set(int(n) for n in cfg.n_list))
    tables = dict(zip(ns, _pmap(lambda n: lg.family_correlators(th, n, params), ns)))
    cols = ["theta"] + [f"K{n}" for n in ns]
    vals = [lg.k_n(th, n, params, table=tables[n]) for n in ns]
    n_tr = max(ns)
    if n_tr >= 3:
        tv, trip = lg.k3_triple(th, n_tr, params, table=tables[n_tr])
        cols += [f"K3_triple_n{n_tr}", "triple"]
    rows = []
    for i, t in enumerate(th):
        row = [float(t)] + [float(v[i]) for v in vals]
        if n_tr >= 3:
            row += [float(tv[i]), "-".join(map(str, trip[i]))]
        rows.append(row)
    _emit(write_csv(cols, rows, cfg), args)
    return 0


def cmd_lg_ki(args, cfg):
    prot = lg.seven_measurement_protocol(cfg.theta_protocol)

    def row(nl):
        ki, parts = lg.ki_n(prot, cfg.gauss_params(n_photons=nl))
        I = parts["I"]
        return [float(nl), float(parts["K"]), float(I[(3, 5)]), float(I[(5, 7)]),
                float(I[(3, 7)]), float(ki)]

    rows = _pmap(row, cfg.n_light)
    _emit(write_csv(["N_L", "K3", "I35", "I57", "I37", "KI3"], rows, cfg,
                    [f"N_A = {cfg.n_atoms!r}", f"theta = {cfg.theta_protocol!r}"]), args)
    return 0


def cmd_lg_invasivity(args, cfg):
    prot = lg.seven_measurement_protocol(cfg.theta_protocol)
    jobs = [(na, nl) for na in cfg.n_atoms_grid for nl in cfg.n_light]

    def row(job):
        na, nl = job
        p = cfg.gauss_params(n_atoms=na, n_photons=nl)
        return [float(na), float(nl)] + [lg.invasivity(prot, pair, p)
                                         for pair in ((3, 5), (5, 7), (3, 7))]

    rows = _pmap(row, jobs)
    _emit(write_csv(["N_A", "N_L", "I35", "I57", "I37"], rows, cfg,
                    [f"theta = {cfg.theta_protocol!r}"]), args)
    return 0


def cmd_qnd_fom(args, cfg):
    res = lg.qnd_fom(cfg.gauss_params())
    flags = res.pop("flags")
    rows = [[k, float(v)] for k, v in res.items()]
    rows.append(["conditional_squeezing",
                 gaussian.conditional_squeezing(cfg.n_atoms, cfg.n_photons, cfg.coupling_g,
                                                cfg.atom_spin)])
    _emit(write_csv(["quantity", "value"], rows, cfg, flags), args)
    return 0


def cmd_gauss_dump(args, cfg):
    try:
        with open(args.sequence) as fh:
            seq = lg.MeasurementSequence.from_text(fh.read(), args.sequence)
    except ValueError as e:
        raise InputError(f"{args.sequence}: {e}") from None
    params = cfg.gauss_params()
    labels = seq.measurements
    state = gaussian.init_state(params, len(labels))
    pulse_of = {lab: i + 1 for i, lab in enumerate(labels)}
    for st in seq.steps:
        if st[0] == "rot":
            state = gaussian.rotate_atoms(state, st[1])
        else:
            state = gaussian.measure(state, pulse_of[st[1]])
    body = gaussian.dump_csv(state)
    head = f"# config-hash: {cfg.digest()}\n# pulses in order: {' '.join(map(str, labels))}\n"
    _emit(head + body, args)
    return 0


# ------------------------------------------------------------------ parser

def _add_config_flags(p):
    p.add_argument("--config", help="key = value run configuration file")
    for key in CONFIG_KEYS:
        p.add_argument("--" + key.replace("_", "-"), dest="cfg_" + key, metavar="VALUE")


def build_parser():
    ap = argparse.ArgumentParser(prog="squeezelab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ssi-eval", help="evaluate all criteria on a moment file")
    p.add_argument("moments")
    p.add_argument("--json", action="store_true")
    p.add_argument("--no-search", dest="search", action="store_false",
                   help="skip the optimal-frame search")
    p.add_argument("--output")
    p.set_defaults(func=cmd_ssi_eval)

    p = sub.add_parser("fcurve", help="tabulate F_J(X)")
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--points", type=int, default=0, help="initial mu grid size")
    p.add_argument("--output")
    p.set_defaults(func=cmd_fcurve)

    p = sub.add_parser("depth", help="entanglement depth from moments or raw values")
    p.add_argument("moments", nargs="?")
    p.add_argument("--N", type=int)
    p.add_argument("--j", type=float, default=0.5)
    p.add_argument("--var-x", type=float)
    p.add_argument("--sum-perp", type=float)
    p.add_argument("--mean-z", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--criterion", choices=("improved", "sm", "duan"), default="improved")
    p.add_argument("--output")
    p.set_defaults(func=cmd_depth)

    for name, fn, hlp in (("lg-kn", cmd_lg_kn, "K_n versus rotation angle"),
                          ("lg-ki", cmd_lg_ki, "KI_3 versus photon number"),
                          ("lg-invasivity", cmd_lg_invasivity, "I_ij versus N_A and N_L"),
                          ("qnd-fom", cmd_qnd_fom, "QND figures of merit")):
        p = sub.add_parser(name, help=hlp)
        _add_config_flags(p)
        p.set_defaults(func=fn, needs_config=True)

    p = sub.add_parser("gauss-dump", help="covariance after a measurement sequence")
    p.add_argument("sequence", help="one step per line: 'rot <theta>' or 'meas <idx> [record]'")
    _add_config_flags(p)
    p.set_defaults(func=cmd_gauss_dump, needs_config=True)
    return ap


def _config(args):
    cfg = RunConfig()
    if args.config:
        with open(args.config) as fh:
            cfg = read_config(fh.read(), args.config)
    flags = {k: getattr(args, "cfg_" + k) for k in CONFIG_KEYS
             if getattr(args, "cfg_" + k) is not None}
    return config_from_kv(flags, cfg, "command line")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "needs_config", False):
            cfg = _config(args)
            args.output = cfg.output
            return args.func(args, cfg)
        return args.func(args)
    except (InputError, FileNotFoundError, IsADirectoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DomainError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
