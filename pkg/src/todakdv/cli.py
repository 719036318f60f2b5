"""Command-line entry point: verify, expand, simulate, spectrum, conserved.

Every run writes its exact configuration as a key=value file next to its
outputs, and all CSV output is deterministic given the configuration.

Exit codes: 0 success / verified, 1 verification failure, 2 usage error,
3 numerical failure (blow-up or Newton breakdown).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import bloch, hierarchy, lattice, solver
from .diffpoly import EpsSeries

__all__ = ["main", "write_config", "read_config"]

FMT = "%.17g"


def write_config(path: Path, mapping: dict) -> None:
    lines = [f"{k}={mapping[k]}" for k in sorted(mapping)]
    path.write_text("\n".join(lines) + "\n")


def read_config(path: Path) -> dict:
    out = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            k, _, v = line.partition("=")
            out[k] = v
    return out


def _fmt(x: float) -> str:
    return FMT % x


# ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    R = hierarchy.standard_R(args.order_cap)
    if args.truncate_R is not None:
        if args.truncate_R < 1:
            print("--truncate-R must keep at least one coefficient", file=sys.stderr)
            return 2
        coeffs = list(R.coeffs[: args.truncate_R])
        R = EpsSeries(coeffs, order_cap=args.order_cap)
    ansatz = hierarchy.build_ansatz(R)
    res = hierarchy.residual(args.flow, ansatz)
    check_through = min(8, res.order_cap)
    print(f"flow {args.flow}: residual coefficients through eps^{res.order_cap}")
    print(res.render())
    first_bad = None
    for k in range(check_through + 1):
        if not res.coeff(k).is_zero():
            first_bad = k
            break
    if first_bad is None:
        print(f"VERIFIED: residual vanishes exactly through eps^{check_through}")
        return 0
    print(f"FAILED: first nonzero residual at eps^{first_bad}: {res.coeff(first_bad)}")
    return 1


def cmd_expand(args) -> int:
    name = args.expr
    if name == "R":
        print(hierarchy.standard_R(11).truncate(5).render())
        return 0
    if name in ("Z1", "Z2", "Z3", "Z4"):
        j = int(name[1])
        ansatz = hierarchy.build_ansatz(hierarchy.standard_R(11))
        print(hierarchy.flow_rhs_combined(j, ansatz).Z.render())
        return 0
    series = {"C1": lattice.C1_EXPANSION, "C2": lattice.C2_EXPANSION, "C3": lattice.C3_EXPANSION}[name]
    print(lattice.render_integral_series(series))
    return 0


# ---------------------------------------------------------------------------


def _parse_init(tag: str, N: int, variant: str) -> tuple[lattice.LatticeState, lattice.Profile | None]:
    if tag.startswith("builtin:"):
        prof = lattice.builtin_profile(tag.split(":", 1)[1])
        return lattice.init_from_profile(prof, N, variant), prof
    if tag.startswith("csv:"):
        state = lattice.read_state_csv(tag.split(":", 1)[1])
        if state.N != N:
            raise ValueError(f"state file has N={state.N}, requested {N}")
        return state, None
    raise ValueError(f"init must be builtin:<name> or csv:<path>, got {tag!r}")


_VARIANTS = {"paper": "paper_25_26", "consistent": "consistent_R"}


def cmd_simulate(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    variant = _VARIANTS[args.init_variant]
    state0, profile = _parse_init(args.init, args.N, variant)
    cfg = solver.SolverConfig(
        dt=args.dt,
        t_end=args.t_end,
        scheme=args.scheme,
        output_every=args.output_every,
    )
    write_config(
        outdir / "config.txt",
        {
            "subcommand": "simulate",
            "N": args.N,
            "dt": args.dt,
            "t_end": args.t_end,
            "scheme": args.scheme,
            "init": args.init,
            "init_variant": args.init_variant,
            "output_every": args.output_every,
            "seed": args.seed,
        },
    )
    rho = solver.linear_spectral_radius(args.N)
    print(
        f"linearized stencil spectral radius {rho:.1f} "
        f"(explicit stability needs dt well below {2.8 / rho:.2e}; dt*N^3 = {args.dt * args.N**3:.3g})"
    )
    traj = solver.run(state0, cfg)

    with open(outdir / "trajectory.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "n", "a", "b"])
        for t, s, _ in traj.samples:
            for n in range(s.N):
                wr.writerow([_fmt(t), n, _fmt(s.a[n]), _fmt(s.b[n])])
    with open(outdir / "conserved.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(lattice.ConservedReport.COLUMNS)
        for _, _, rep in traj.samples:
            wr.writerow([_fmt(v) for v in rep.row()])
    lattice.write_state_csv(outdir / "state.csv", traj.samples[-1][1])  # restartable
    if profile is not None:
        rep = solver.compare_to_kdv(traj, profile, args.t_end)
        with open(outdir / "comparison.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "lattice", "reference", "error"])
            for i in range(len(rep.x)):
                wr.writerow(
                    [
                        _fmt(rep.x[i]),
                        _fmt(rep.lattice[i]),
                        _fmt(rep.reference[i]),
                        _fmt(rep.lattice[i] - rep.reference[i]),
                    ]
                )
        print(f"comparison at t={rep.t:g}: max err {rep.max_err:.3e}, l2 err {rep.l2_err:.3e}")
    print(f"wrote {outdir}/trajectory.csv, conserved.csv ({len(traj.samples)} snapshots)")
    return 0


def cmd_spectrum(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if not args.g.startswith("builtin:"):
        raise ValueError("--g must be builtin:<name>")
    prof = lattice.builtin_profile(args.g.split(":", 1)[1])
    lams = np.linspace(-args.lambda_max, args.lambda_max, args.samples)
    write_config(
        outdir / "config.txt",
        {
            "subcommand": "spectrum",
            "g": args.g,
            "N": args.N,
            "lambda_max": args.lambda_max,
            "samples": args.samples,
            "tol": args.tol,
            "seed": args.seed,
        },
    )
    rows = bloch.discriminant_scan(prof, args.N, lams, tol=args.tol)
    with open(outdir / "spectrum.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["lambda", "trace_discrete", "trace_continuous", "det_discrete", "det_continuous"])
        for r in rows:
            wr.writerow(
                [_fmt(r.lam), _fmt(r.trace_discrete), _fmt(r.trace_continuous),
                 _fmt(r.det_discrete), _fmt(r.det_continuous)]
            )
    print(f"wrote {outdir}/spectrum.csv ({len(rows)} samples)")
    return 0


def cmd_conserved(args) -> int:
    traj_dir = Path(args.traj)
    src = traj_dir / "conserved.csv"
    with open(src, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = [[float(x) for x in row] for row in rd]
    if header != list(lattice.ConservedReport.COLUMNS):
        raise ValueError(f"unexpected conserved.csv header {header}")
    outdir = Path(args.out) if args.out else traj_dir
    outdir.mkdir(parents=True, exist_ok=True)
    base = rows[0]
    with open(outdir / "drift.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t"] + [f"{c}_drift" for c in header[1:]])
        for row in rows:
            wr.writerow([_fmt(row[0])] + [_fmt(row[i] - base[i]) for i in range(1, len(row))])
    worst = [max(abs(row[i] - base[i]) for row in rows) for i in range(1, len(header))]
    for name, w in zip(header[1:], worst):
        print(f"max |{name} drift| = {w:.3e}")
    print(f"wrote {outdir}/drift.csv")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="todakdv", description=__doc__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    v = sub.add_parser("verify", help="check the hierarchy residuals symbolically")
    v.add_argument("--flow", type=int, required=True, choices=(1, 2, 3, 4))
    v.add_argument("--order-cap", type=int, default=hierarchy.DEFAULT_CAP)
    v.add_argument("--truncate-R", type=int, default=None,
                   help="keep only the first K coefficients of the correction series")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("expand", help="print a verified series in canonical form")
    e.add_argument("expr", choices=("R", "Z1", "Z2", "Z3", "Z4", "C1", "C2", "C3"))
    e.set_defaults(func=cmd_expand)

    s = sub.add_parser("simulate", help="integrate the lattice flow")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--dt", type=float, required=True)
    s.add_argument("--t-end", type=float, required=True)
    s.add_argument("--scheme", choices=("rk4", "cn"), default="cn")
    s.add_argument("--init", default="builtin:cos")
    s.add_argument("--init-variant", choices=("paper", "consistent"), default="consistent")
    s.add_argument("--out", required=True)
    s.add_argument("--output-every", type=int, default=16)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("spectrum", help="discriminant scan, discrete vs continuous")
    sp.add_argument("--g", default="builtin:cos")
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--lambda-max", type=float, default=200.0)
    sp.add_argument("--samples", type=int, default=2048)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_spectrum)

    c = sub.add_parser("conserved", help="drift columns for a recorded trajectory")
    c.add_argument("--traj", required=True)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_conserved)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (solver.BlowUpError, solver.NewtonError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
