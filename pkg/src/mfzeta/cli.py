"""mfzeta command line.

    mfzeta dim --system sysA.json
    mfzeta spectrum --system sysA.json --alpha-grid 0.25:1.45:25 --out curve.csv

Numbers are printed with 15 significant digits. A run manifest (config hash,
seed, version, parameters, wall time) goes to stderr, or next to ``--out``
as ``<out>.manifest.json``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._numerics import grid_spec
from .errors import ConfigError, DegenerateTarget, MfzetaError, UnknownSubcommand
from .graph import load_system
from .potentials import Potential, RatioMap, builtin_lambda, builtin_phi, load_table

SUBCOMMANDS = ("dim", "pressure", "zeta", "beta", "spectrum", "mfpressure", "mfzeta",
               "birkhoff", "ldp-check", "validate")


def fmt(x) -> str:
    if isinstance(x, complex):
        return f"{x.real:.15g}{x.imag:+.15g}j"
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.15g}"


def _ladder(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse ladder {text!r}") from exc


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", required=True, help="system JSON file")
    common.add_argument("--phi-table", help="CSV table word,value or word,lo,hi")
    common.add_argument("--potential", choices=("zero", "phi", "lambda"), default=None,
                        help="built-in potential when no --phi-table is given")
    common.add_argument("--scale", type=float, default=1.0, help="multiply the potential by this")
    common.add_argument("--target", help='target set "lo,hi[;lo,hi...]"')
    common.add_argument("--q-grid", default="-2:2:5")
    common.add_argument("--alpha-grid")
    common.add_argument("--n-ladder", default="8,10,12")
    common.add_argument("--r-ladder", default="0.05")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", help="write the main output here")
    common.add_argument("--dry-run", action="store_true", help="validate inputs and print the plan")

    p = argparse.ArgumentParser(prog="mfzeta", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("dim", parents=[common], help="Bowen root of P(sΛ) = 0")
    sp = sub.add_parser("pressure", parents=[common], help="pressure of a potential")
    sp.add_argument("--n", type=int, help="finite-n pressure instead of the exact value")
    sp.add_argument("--branch", choices=("sup", "inf"), default="sup")
    sp = sub.add_parser("zeta", parents=[common], help="zeta partial sum and radius")
    sp.add_argument("--z", type=complex, default=0j)
    sp.add_argument("--N", type=int, default=200)
    sub.add_parser("beta", parents=[common], help="β(q) on --q-grid")
    sub.add_parser("spectrum", parents=[common], help="Legendre spectrum on --alpha-grid")
    sp = sub.add_parser("mfpressure", parents=[common], help="restricted pressure sequence")
    sp.add_argument("--mode", choices=("lower", "upper"), default="upper")
    sp.add_argument("--source", choices=("L", "M"), default="L")
    sp = sub.add_parser("mfzeta", parents=[common], help="multifractal Bowen roots and zeta radius")
    sp.add_argument("--alpha", type=float, help="shrinking target centre")
    sp.add_argument("--N", type=int, default=14)
    sp = sub.add_parser("birkhoff", parents=[common], help="Birkhoff-average spectrum")
    sp.add_argument("--f-table", help="CSV table of the averaged potential")
    sp.add_argument("--g-table", help="denominator table for ratio averages")
    sp.add_argument("--alpha", type=float)
    sp = sub.add_parser("ldp-check", parents=[common], help="large-deviation rate check")
    sp.add_argument("--edges", help="comma separated edge ids; U = frequency of these edges")
    sp.add_argument("--samples", type=int, default=10**5)
    sub.add_parser("validate", parents=[common], help="validate a system file")
    return p


def _potential(system, args) -> Potential:
    if args.phi_table:
        phi = load_table(system, args.phi_table)
    else:
        kind = args.potential or "zero"
        phi = {"zero": lambda: Potential.constant(system, 0.0),
               "phi": lambda: builtin_phi(system),
               "lambda": lambda: builtin_lambda(system)}[kind]()
    return phi * args.scale if args.scale != 1.0 else phi


def _emit(text: str, args, stdout) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) if isinstance(x, (float, complex)) else x for x in r])
    return buf.getvalue()


def _target(args, default=None):
    from .targets import TargetSet

    if args.target is None:
        if default is None:
            raise ConfigError("--target is required")
        return default
    return TargetSet.parse(args.target)


def _run(args, system, stdout, report: dict) -> None:
    from . import birkhoff as bk
    from . import ldp, multifractal as mf, thermo
    from .targets import TargetSet

    cmd = args.command
    if cmd == "validate":
        _emit(f"ok: {system.n_vertices} vertices, {system.n_edges} edges\n", args, stdout)
    elif cmd == "dim":
        _emit(fmt(thermo.bowen_root(system, builtin_lambda(system))) + "\n", args, stdout)
    elif cmd == "pressure":
        phi = _potential(system, args)
        if args.n:
            est = thermo.pressure_finite(system, phi, args.n, args.branch)
            _emit(f"{fmt(est.value)}\nerror_bound {fmt(est.error_bound)}\n", args, stdout)
        else:
            est = thermo.pressure_exact(system, phi)
            _emit(f"{fmt(est.value)}\nenclosure {fmt(est.lo)} {fmt(est.hi)}\n", args, stdout)
    elif cmd == "zeta":
        phi = _potential(system, args)
        zr = thermo.zeta_radius(system, phi, args.N)
        s = thermo.zeta_partial(system, phi, args.z, args.N)
        flag = "inside" if zr.converges(args.z) else "outside-or-boundary"
        _emit(f"partial_sum {fmt(s)}\nradius {fmt(zr.radius)}\nradius_enclosure {fmt(zr.enclosure.lo)} "
              f"{fmt(zr.enclosure.hi)}\nminus_log_radius {fmt(zr.minus_log)}\nz {flag}\n", args, stdout)
    elif cmd == "beta":
        b = mf.BetaFunction(system)
        rows = [(q, b(q), b.alpha(q), b.tangent_value(q)) for q in grid_spec(args.q_grid)]
        _emit(_csv(["q", "beta", "alpha", "f_alpha"], rows), args, stdout)
    elif cmd == "spectrum":
        if not args.alpha_grid:
            raise ConfigError("--alpha-grid is required")
        curve = mf.spectrum_curve(system, grid_spec(args.alpha_grid))
        _emit(curve.to_csv(), args, stdout)
        report["concavity"] = {"max_second_difference": curve.concavity(),
                               "concave": bool(curve.is_concave())}
    elif cmd == "mfpressure":
        phi = _potential(system, args)
        C = _target(args)
        U = RatioMap.local_dimension(system)
        ladder = [int(n) for n in _ladder(args.n_ladder)]
        rows = []
        for r in [0.0] + _ladder(args.r_ladder):
            res = mf.mf_pressure(system, phi, C.inflate(r), U, ladder, args.mode, args.source)
            rows.extend((r, n, v) for n, v in zip(res.ladder, res.values))
        _emit(_csv(["r", "n", "value"], rows), args, stdout)
    elif cmd == "mfzeta":
        U = RatioMap.local_dimension(system)
        ladder = [int(n) for n in _ladder(args.n_ladder)]
        lines = []
        if args.alpha is not None:
            res = mf.shrinking_target_root(system, U, args.alpha, _ladder(args.r_ladder), ladder)
            lines.append(f"shrinking_root {fmt(res.value)}")
            lines.append(f"shrinking_enclosure {fmt(res.enclosure.lo)} {fmt(res.enclosure.hi)}")
            lines.append(f"reference {fmt(res.reference)}")
        if args.target:
            C = _target(args)
            try:
                res = mf.fixed_target_root(system, U, C, ladder)
                lines.append(f"fixed_root {fmt(res.value)}")
                lines.append(f"reference {fmt(res.reference)}")
            except DegenerateTarget as exc:
                lines.append(f"fixed_root -inf  # {exc}")
            phi = _potential(system, args)
            zr = mf.restricted_zeta_radius(system, phi, C, U, args.N)
            lines.append(f"restricted_radius {fmt(zr.radius)}")
        if not lines:
            raise ConfigError("mfzeta needs --alpha or --target")
        _emit("\n".join(lines) + "\n", args, stdout)
    elif cmd == "birkhoff":
        if not args.f_table:
            raise ConfigError("--f-table is required")
        f = load_table(system, args.f_table)
        if args.alpha is not None:
            alphas = [args.alpha]
        elif args.alpha_grid:
            alphas = grid_spec(args.alpha_grid)
        else:
            raise ConfigError("birkhoff needs --alpha or --alpha-grid")
        rows = []
        for a in alphas:
            if args.g_table:
                pt = bk.ratio_spectrum_point(system, f, load_table(system, args.g_table), a)
            else:
                pt = bk.birkhoff_spectrum_point(system, f, a)
            rows.append((a, pt.value, pt.width, int(pt.empty)))
        text = _csv(["alpha", "value", "width", "empty"], rows)
        if args.target:
            C = _target(args)
            ev = (lambda a: bk.birkhoff_spectrum_point(system, f, a).value)
            tv = bk.target_spectrum(ev, C)
            report["target_value"] = tv.value
        _emit(text, args, stdout)
    elif cmd == "ldp-check":
        C = _target(args)
        if args.edges:
            U = RatioMap.mean(Potential.edge_indicator(system, args.edges.split(",")))
        else:
            U = RatioMap.local_dimension(system)
        ladder = [int(n) for n in _ladder(args.n_ladder)]
        rep = ldp.rate_check(system, U, C, ladder, samples=args.samples, seed=args.seed,
                             threads=args.threads)
        _emit(json.dumps(rep.to_json(), indent=2, default=float) + "\n", args, stdout)


def main(argv=None, stdout=None, stderr=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        if argv and not argv[0].startswith("-") and argv[0] not in SUBCOMMANDS:
            raise UnknownSubcommand(f"unknown subcommand {argv[0]!r}; choose from {', '.join(SUBCOMMANDS)}")
        args = _parser().parse_args(argv)
        t0 = time.perf_counter()
        raw = Path(args.system).read_bytes() if Path(args.system).exists() else None
        if raw is None:
            raise ConfigError(f"--system: no such file {args.system}")
        system = load_system(args.system)
        manifest = {
            "tool": "mfzeta",
            "version": __version__,
            "subcommand": args.command,
            "config_sha256": hashlib.sha256(raw).hexdigest(),
            "seed": args.seed,
            "parameters": {k: v for k, v in sorted(vars(args).items()) if k != "command"},
        }
        if args.dry_run:
            stdout.write(json.dumps({"plan": args.command, **manifest}, indent=2, default=str) + "\n")
            return 0
        report: dict = {}
        _run(args, system, stdout, report)
        manifest.update(report)
        manifest["wall_time_s"] = round(time.perf_counter() - t0, 6)
        text = json.dumps(manifest, indent=2, default=str) + "\n"
        if args.out:
            Path(args.out + ".manifest.json").write_text(text)
        else:
            stderr.write(text)
        return 0
    except ConfigError as exc:
        stderr.write(f"error: {exc}\n")
        return 2
    except (MfzetaError, ValueError, OSError) as exc:
        stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
