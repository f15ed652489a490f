"""Command-line entry point: ``bulksurf <subcommand> ...``.

Exit codes: 0 success, 1 a verification check failed, 2 usage error,
3 I/O or numerical error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io as bio
from .assembly import build_system
from .eigen import DEFAULT_SEED, solve_smallest
from .mesh import AnnulusParams, generate_annulus, load_mesh, refine_uniform, save_mesh
from .oracle import find_modes, lowest_modes
from .verify import PRESETS, SuiteConfig, run_suite
from .wave import WaveState, energy_series, omegas_of, project_initial_data, write_energy_csv

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class CliError(Exception):
    pass


def _annulus_args(p, n_radial=16, n_angular=64):
    p.add_argument("--r-inner", type=float, default=1.0)
    p.add_argument("--r-outer", type=float, default=2.0)
    p.add_argument("--n-radial", type=int, default=n_radial)
    p.add_argument("--n-angular", type=int, default=n_angular)


def _int_auto(text):
    return int(text, 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bulksurf", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=1,
                        help="threads for dense linear algebra (default 1, deterministic)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="write a structured annulus mesh")
    _annulus_args(p)
    p.add_argument("--refine", type=int, default=0, help="uniform refinements to apply")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("solve", help="smallest eigenpairs of a mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seed", type=_int_auto, default=DEFAULT_SEED)
    p.add_argument("--no-vectors", action="store_true")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("oracle", help="shooting-method reference spectrum of the annulus")
    p.add_argument("--r-inner", type=float, default=1.0)
    p.add_argument("--r-outer", type=float, default=2.0)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--m-max", type=int, default=6)
    p.add_argument("--lambda-max", default="auto",
                   help="scan cutoff, or 'auto' to capture the -k smallest values")
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--no-profiles", action="store_true")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    _annulus_args(p)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seed", type=_int_auto, default=DEFAULT_SEED)
    p.add_argument("-o", "--output", help="JSON report path")
    p.add_argument("--text", help="plain-text report path (also printed to stdout)")

    p = sub.add_parser("wave", help="energy time series of a modal superposition")
    p.add_argument("--mesh", required=True)
    p.add_argument("--spectrum", required=True)
    p.add_argument("--init", help="JSON initial-data spec")
    p.add_argument("--modes", default="1",
                   help="comma list of 1-based modes with unit cosine amplitude (without --init)")
    p.add_argument("--t-end", type=float, default=None, help="default 100/omega_1")
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--probes", default="", help="comma list of vertex indices")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("export-vtk", help="eigenfunctions as VTK point data")
    p.add_argument("--mesh", required=True)
    p.add_argument("--spectrum", required=True)
    p.add_argument("--modes", default="all", help="comma list of 1-based modes, or 'all'")
    p.add_argument("-o", "--output", required=True)
    return parser


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"expected a comma-separated list of integers, got {text!r}") from None


def _require(path):
    if not Path(path).is_file():
        raise CliError(f"input file not found: {path}")
    return path


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items())}


def cmd_mesh(args, argv):
    mesh = generate_annulus(AnnulusParams(args.r_inner, args.r_outer, args.n_radial,
                                          args.n_angular))
    for _ in range(args.refine):
        mesh = refine_uniform(mesh)
    save_mesh(mesh, args.output)
    print(f"wrote {args.output}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles")
    return EXIT_OK


def cmd_solve(args, argv):
    mesh = load_mesh(_require(args.mesh))
    system = build_system(mesh)
    spectrum = solve_smallest(system, args.k, args.tol, seed=args.seed)
    meta = bio.provenance("solve", argv, _config(args), [args.mesh])
    bio.write_json(args.output, bio.spectrum_payload(spectrum, system, meta,
                                                     include_vectors=not args.no_vectors))
    for i, (lam, res) in enumerate(zip(spectrum.lambdas, spectrum.residuals), 1):
        print(f"{i:3d}  {lam:.12f}  residual {res:.2e}")
    return EXIT_OK


def cmd_oracle(args, argv):
    if args.lambda_max == "auto":
        if args.dim != 2:
            raise CliError("--lambda-max auto is supported for --dim 2 only")
        spec = lowest_modes(args.r_inner, args.r_outer, args.k)
    else:
        try:
            lmax = float(args.lambda_max)
        except ValueError:
            raise CliError("--lambda-max must be a number or 'auto'") from None
        spec = find_modes(args.r_inner, args.r_outer, args.dim, args.m_max, lmax)
    payload = spec.to_dict(with_profile=not args.no_profiles)
    payload["meta"] = bio.provenance("oracle", argv, _config(args))
    bio.write_json(args.output, payload)
    for md in spec.modes:
        print(f"m={md.m:<2d} n={md.index:<2d} lambda={md.lam:.12f} x{md.multiplicity}")
    return EXIT_OK


def cmd_verify(args, argv):
    cfg = PRESETS[args.preset] if args.preset else SuiteConfig()
    if not args.preset:
        cfg = replace(cfg, r_inner=args.r_inner, r_outer=args.r_outer, n_radial=args.n_radial,
                      n_angular=args.n_angular, k=args.k, tol=args.tol, seed=args.seed)
    report = run_suite(cfg)
    report.metadata["meta"] = bio.provenance("verify", argv, _config(args))
    text = report.to_text()
    print(text)
    if args.output:
        Path(args.output).write_text(report.to_json() + "\n", encoding="utf-8")
    if args.text:
        Path(args.text).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_CHECK


def _load_pair(args):
    mesh = load_mesh(_require(args.mesh))
    system = build_system(mesh)
    spectrum = bio.spectrum_from_payload(bio.read_json(_require(args.spectrum)), system)
    return mesh, system, spectrum


def _initial_field(spec, system, spectrum, name):
    if spec is None:
        return np.zeros(system.dim)
    if "values" in spec:
        return np.asarray(spec["values"], dtype=float)
    if "modes" in spec:
        out = np.zeros(system.dim)
        for n, amp in spec["modes"].items():
            n = int(n)
            if not 1 <= n <= len(spectrum):
                raise CliError(f"{name}: mode {n} outside 1..{len(spectrum)}")
            out += float(amp) * spectrum.vectors[:, n - 1]
        return out
    raise CliError(f"{name}: expected 'values' or 'modes'")


def cmd_wave(args, argv):
    mesh, system, spectrum = _load_pair(args)
    inputs = [args.mesh, args.spectrum]
    if args.init:
        spec = bio.read_json(_require(args.init))
        inputs.append(args.init)
        w0 = _initial_field(spec.get("w0"), system, spectrum, "w0")
        w1 = _initial_field(spec.get("w1"), system, spectrum, "w1")
        state = project_initial_data(system, spectrum, w0, w1)
    else:
        coeffs = np.zeros(len(spectrum))
        for n in _int_list(args.modes):
            if not 1 <= n <= len(spectrum):
                raise CliError(f"mode {n} outside 1..{len(spectrum)}")
            coeffs[n - 1] = 1.0
        state = WaveState(coeffs, np.zeros(len(spectrum)), omegas_of(spectrum), 0.0,
                          spectrum.mesh_ref)
    t_end = args.t_end if args.t_end is not None else 100.0 / state.omegas[0]
    times = np.linspace(0.0, t_end, args.samples)
    probes = _int_list(args.probes)
    for p in probes:
        if not 0 <= p < mesh.n_vertices:
            raise CliError(f"probe vertex {p} outside 0..{mesh.n_vertices - 1}")
    rows = energy_series(system, spectrum, state, times, probes)
    meta = bio.provenance("wave", argv, _config(args), inputs)
    write_energy_csv(args.output, rows, probes)
    with open(args.output, "r+", encoding="utf-8") as fh:
        body = fh.read()
        fh.seek(0)
        fh.write("".join(f"# {k}: {v}\n" for k, v in sorted(meta.items())) + body)
    e = np.array([r[1] for r in rows])
    print(f"E(0) = {e[0]:.15g}, max relative drift {np.abs(e - e[0]).max() / e[0]:.2e}")
    return EXIT_OK


def cmd_export_vtk(args, argv):
    mesh, system, spectrum = _load_pair(args)
    modes = range(1, len(spectrum) + 1) if args.modes == "all" else _int_list(args.modes)
    fields = {}
    for n in modes:
        if not 1 <= n <= len(spectrum):
            raise CliError(f"mode {n} outside 1..{len(spectrum)}")
        fields[f"u{n}"] = system.to_vertices(spectrum.vectors[:, n - 1])
    meta = bio.provenance("export-vtk", argv, _config(args), [args.mesh, args.spectrum])
    title = f"bulksurf {meta['version']} export-vtk mesh_ref={spectrum.mesh_ref}"
    bio.write_vtk(args.output, mesh, fields, title)
    print(f"wrote {args.output}: {len(fields)} field(s)")
    return EXIT_OK


COMMANDS = {
    "mesh": cmd_mesh,
    "solve": cmd_solve,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
    "wave": cmd_wave,
    "export-vtk": cmd_export_vtk,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        with threadpool_limits(limits=args.threads):
            return COMMANDS[args.command](args, argv)
    except (CliError, OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"bulksurf {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
