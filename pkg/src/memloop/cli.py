"""Command-line front end.

Subcommands: mp2me, me2mp, solve, spectrum, stationary, check, dde, simulate,
and the kernel group (eval | laplace | moments | check).  Inputs are inline
JSON or file paths; delimited output goes to stdout or --out, and report
paths can additionally render matplotlib figures via --plot.

Exit codes: 0 success, 1 domain error (e.g. an infeasible embedding),
2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dde, embed, kernels, markov, me_solver
from .core import (
    DomainError,
    ExpPolyKernel,
    GeneratorMatrix,
    InconsistentMass,
    InfeasibleDecomposition,
    LoopGenerator,
    ParseError,
    ZeroMass,
    from_json,
    point_mass,
    time_grid,
    to_json,
)


def _load_input(value: str):
    """Inline JSON when the value looks like JSON, otherwise a file path."""
    text = value.strip()
    if not text.startswith("{"):
        path = Path(value)
        if not path.exists():
            raise ParseError(f"input file not found: {value}")
        text = path.read_text()
    return from_json(text)


def _load_loop(value: str) -> LoopGenerator:
    obj = _load_input(value)
    if not isinstance(obj, LoopGenerator):
        raise ParseError("expected a {'loop': ...} object")
    return obj


def _load_kernel(value: str) -> ExpPolyKernel:
    obj = _load_input(value)
    if not isinstance(obj, ExpPolyKernel):
        raise ParseError("expected a {'kernel': ...} object")
    return obj


def _load_generator(value: str) -> GeneratorMatrix:
    obj = _load_input(value)
    if isinstance(obj, LoopGenerator):
        return markov.build_generator(obj)
    if not isinstance(obj, GeneratorMatrix):
        raise ParseError("expected a {'generator': ...} or {'loop': ...} object")
    return obj


def _write_text(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(payload: dict, out: str | None) -> None:
    _write_text(json.dumps(payload, sort_keys=True) + "\n", out)


def _complex_pairs(values) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(values, complex)]


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_mp2me(args) -> int:
    gen = _load_loop(args.loop)
    lk = kernels.loop_kernel(gen)
    flat = lk.flatten()
    _write_text(to_json(flat) + "\n", args.out)
    if args.plot:
        from . import plots

        entries = [(flat, "K")] + [
            (lk.component(j).scaled(gen.a[j - 1]), f"a{j}*K{j}")
            for j in range(1, gen.n_loops + 1)
        ]
        plots.save_kernels(entries, args.plot, title="loop kernel and components")
    return 0


def cmd_me2mp(args) -> int:
    K = _load_kernel(args.kernel)
    try:
        A, _ = embed.me_to_mp(args.a, K, args.u0)
    except InfeasibleDecomposition as exc:
        report = {
            "infeasible": True,
            "certificates": [
                {"ordering": list(ordering), "min_weight": worst}
                for ordering, worst in exc.certificates
            ],
        }
        _emit_json(report, args.out)
        print(str(exc), file=sys.stderr)
        return 1
    _write_text(to_json(A) + "\n", args.out)
    return 0


def _resolve_problem(args):
    """Return (a, kernel, loop_or_None) from --loop or --a/--kernel flags."""
    if args.loop:
        gen = _load_loop(args.loop)
        return gen.total_split, kernels.loop_kernel(gen).flatten(), gen
    if args.kernel is None or args.a is None:
        raise ParseError("provide either --loop or both --a and --kernel")
    return args.a, _load_kernel(args.kernel), None


def _limit_value(a: float, K: ExpPolyKernel, u0: float):
    """Final value of the memory equation, or None when no finite limit
    exists (kernel mass exceeding the decay rate makes the equation grow)."""
    try:
        mom = kernels.moments(K)
    except ZeroMass:
        return 0.0  # pure decay
    if abs(a - mom.mass) <= 1e-9 * abs(a):
        return u0 / (1.0 + mom.mass * mom.mean_time)
    return 0.0 if a > mom.mass else None


def cmd_solve(args) -> int:
    a, K, gen = _resolve_problem(args)
    grid = time_grid(args.t_end, args.h)
    if args.method == "volterra":
        traj = me_solver.solve_me(a, K, args.u0, grid)
    elif args.method == "chain":
        if gen is not None:
            traj = me_solver.solve_loop_me(gen, args.u0, grid)
        else:
            traj = me_solver.solve_me_via_mp(a, K, args.u0, grid)
    else:  # closed-form
        if gen is None:
            mass = kernels.moments(K).mass
            if abs(a - mass) > 1e-9 * abs(a):
                raise InconsistentMass(
                    f"closed form needs the kernel mass ({mass}) to equal "
                    f"the decay rate ({a})"
                )
            gen = embed.decompose_to_loop(K)
        traj = me_solver.closed_form_eval(
            me_solver.closed_form(gen, args.u0), grid
        )

    summary: dict = {"method": args.method}
    summary["u_infinity"] = _limit_value(a, K, args.u0)
    if gen is None:
        try:
            gen = embed.decompose_to_loop(K)
        except (InfeasibleDecomposition, DomainError):
            gen = None
    if gen is not None:
        pairs = me_solver.closed_form(gen, args.u0)
        summary["poles"] = _complex_pairs([p for _, p in pairs])
        summary["residues"] = _complex_pairs([r for r, _ in pairs])
    else:
        summary["poles"] = None
        summary["residues"] = None

    _write_text(traj.to_csv(["u"]), args.out)
    summary_text = json.dumps(summary, sort_keys=True) + "\n"
    if args.summary:
        Path(args.summary).write_text(summary_text)
    elif args.out:
        sys.stdout.write(summary_text)
    else:
        sys.stderr.write(summary_text)
    if args.plot:
        from . import plots

        plots.save_trajectories(
            [(traj, f"u ({args.method})")],
            args.plot,
            title="memory equation solution",
            hlines=[(summary["u_infinity"], "u_infinity")],
        )
    return 0


def cmd_spectrum(args) -> int:
    A = _load_generator(args.loop or args.generator)
    values = markov.spectrum(A)
    _emit_json({"eigenvalues": _complex_pairs(values)}, args.out)
    if args.plot:
        from . import plots

        plots.save_spectrum(values, args.plot, title="generator spectrum")
    return 0


def cmd_stationary(args) -> int:
    payload: dict = {}
    if args.loop:
        gen = _load_loop(args.loop)
        mu = markov.stationary_loop(gen, args.u0)
        payload["Z"] = markov.partition_z(gen)
    else:
        A = _load_generator(args.generator)
        mu = markov.stationary(A, args.u0)
    payload["stationary"] = mu.p.tolist()
    _emit_json(payload, args.out)
    return 0


def cmd_check(args) -> int:
    payload: dict = {}
    if args.loop:
        gen = _load_loop(args.loop)
        K = kernels.loop_kernel(gen).flatten()
        a = gen.total_split
        A = markov.build_generator(gen)
        mu = markov.stationary(A, 1.0)
        balance = markov.detailed_balance(A, mu)
        payload["detailed_balance"] = balance.holds
        payload["max_violation"] = balance.max_violation
    elif args.kernel:
        K = _load_kernel(args.kernel)
        a = args.a
    else:
        raise ParseError("provide --loop or --kernel")
    report = kernels.positivity_check(K, args.horizon)
    mom = kernels.moments(K)
    payload.update(
        positive=report.positive,
        min_value=report.min_value,
        argmin=report.argmin,
        mass=mom.mass,
        mean_time=mom.mean_time,
    )
    if a is not None:
        payload["mass_consistent"] = bool(abs(a - mom.mass) <= 1e-9 * abs(a))
        payload["a"] = a
    _emit_json(payload, args.out)
    return 0


def cmd_dde(args) -> int:
    n_list = [int(x) for x in args.n_list.split(",") if x]
    if not n_list:
        raise ParseError("--N-list must name at least one chain length")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t_end = args.t_end if args.t_end is not None else 10.0 * args.T

    ref = dde.solve_dde(args.a, args.T, args.u0, time_grid(t_end, args.h))
    (out_dir / "dde.csv").write_text(ref.to_csv(["u"]))

    roots_ref = dde.dde_char_roots(args.a, args.T, args.count)
    nonzero_ref = roots_ref[np.abs(roots_ref) > 1e-9]

    sup_errors = []
    root_distances = []
    equilibria = []
    chain_trajs = []
    for n in n_list:
        chain = dde.chain_approximation(args.a, args.T, n, args.u0, ref.times)
        chain_trajs.append((chain, f"chain N={n}"))
        (out_dir / f"chain_N{n}.csv").write_text(chain.to_csv(["u"]))
        sup_errors.append(me_solver.sup_difference(chain, ref))
        eigs = dde.cyclic_spectrum(args.a, args.T, n)
        small = min(
            (z for z in eigs if abs(z) > 1e-9), key=abs, default=None
        )
        if small is None or len(nonzero_ref) == 0:
            root_distances.append(None)
        else:
            root_distances.append(
                float(min(abs(small - z) for z in nonzero_ref))
            )
        loop = markov.cyclic_loop(args.a, n / args.T, n)
        equilibria.append(me_solver.equilibrium_me(loop, args.u0))
        if args.emit_kernels:
            kern = dde.erlang_kernel(n, args.T)
            tk = np.linspace(0.0, 3.0 * args.T, 601)
            lines = ["t,K"] + [
                f"{t:.17g},{v:.17g}"
                for t, v in zip(tk, kernels.kernel_eval(kern, tk))
            ]
            (out_dir / f"kernel_N{n}.csv").write_text("\n".join(lines) + "\n")

    report = {
        "a": args.a,
        "T": args.T,
        "N": n_list,
        "equilibrium": args.u0 / (1.0 + args.a * args.T),
        "chain_equilibria": equilibria,
        "sup_errors": sup_errors,
        "root_distances": root_distances,
        "dde_roots": _complex_pairs(roots_ref),
    }
    _emit_json(report, args.out)
    if args.plot:
        from . import plots

        plots.save_trajectories(
            [(ref, "delay equation")] + chain_trajs,
            out_dir / "dde_trajectories.png",
            title=f"delay limit: a={args.a}, T={args.T}",
            hlines=[(report["equilibrium"], "equilibrium")],
        )
        plots.save_spectrum(
            dde.cyclic_spectrum(args.a, args.T, n_list[-1]),
            out_dir / "dde_spectrum.png",
            reference=roots_ref,
            title=f"chain spectrum (N={n_list[-1]}) vs delay roots",
        )
    return 0


def cmd_simulate(args) -> int:
    A = _load_generator(args.loop or args.generator)
    p0 = point_mass(A.n, args.u0)
    result = markov.simulate_ctmc(
        A, p0, args.t_end, args.n_paths, args.seed, n_times=args.n_times
    )
    _write_text(result.mean.to_csv(), args.out)
    summary = {
        "n_paths": result.n_paths,
        "seed": args.seed,
        "stderr": [[float(x) for x in row] for row in result.stderr],
    }
    summary_text = json.dumps(summary, sort_keys=True) + "\n"
    if args.summary:
        Path(args.summary).write_text(summary_text)
    elif args.out:
        sys.stdout.write(summary_text)
    else:
        sys.stderr.write(summary_text)
    if args.plot:
        from . import plots

        plots.save_trajectories(
            [(result.mean, "ensemble mean")], args.plot,
            title=f"jump-chain ensemble ({args.n_paths} paths)",
            ylabel="mass",
        )
    return 0


def cmd_kernel(args) -> int:
    K = _load_kernel(args.kernel)
    if args.kernel_op == "eval":
        if args.t is not None:
            _emit_json({"t": args.t, "value": kernels.kernel_eval(K, args.t)}, args.out)
        else:
            grid = time_grid(args.t_end, args.h)
            vals = kernels.kernel_eval(K, grid)
            lines = ["t,K"] + [f"{t:.17g},{v:.17g}" for t, v in zip(grid, vals)]
            _write_text("\n".join(lines) + "\n", args.out)
        if args.plot:
            from . import plots

            plots.save_kernels([(K, "K")], args.plot)
    elif args.kernel_op == "laplace":
        rf = kernels.kernel_laplace(K)
        _emit_json({"num": rf.num.tolist(), "den": rf.den.tolist()}, args.out)
    elif args.kernel_op == "moments":
        mom = kernels.moments(K)
        _emit_json({"mass": mom.mass, "mean_time": mom.mean_time}, args.out)
    else:  # check
        report = kernels.positivity_check(K, args.horizon)
        mom = kernels.moments(K)
        _emit_json(
            {
                "positive": report.positive,
                "min_value": report.min_value,
                "argmin": report.argmin,
                "mass": mom.mass,
                "mean_time": mom.mean_time,
            },
            args.out,
        )
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memloop",
        description="Convert between exponential-sum memory equations and "
        "loop Markov chains, solve both, and verify their equivalence.",
    )
    parser.add_argument(
        "--json-errors",
        action="store_true",
        help="report errors as JSON on stderr",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, out=True, plot=True):
        if out:
            p.add_argument("--out", help="output path (default: stdout)")
        if plot:
            p.add_argument("--plot", help="also render a figure to this path")

    p = sub.add_parser("mp2me", help="loop chain -> memory kernel")
    p.add_argument("--loop", required=True, help="loop JSON (inline or path)")
    add_common(p)
    p.set_defaults(handler=cmd_mp2me)

    p = sub.add_parser("me2mp", help="memory equation -> embedded chain")
    p.add_argument("--a", type=float, required=True, help="decay rate")
    p.add_argument("--kernel", required=True, help="kernel JSON (inline or path)")
    p.add_argument("--u0", type=float, default=1.0)
    add_common(p, plot=False)
    p.set_defaults(handler=cmd_me2mp)

    p = sub.add_parser("solve", help="solve the memory equation")
    p.add_argument("--loop", help="loop JSON (inline or path)")
    p.add_argument("--a", type=float, help="decay rate (with --kernel)")
    p.add_argument("--kernel", help="kernel JSON (inline or path)")
    p.add_argument(
        "--method",
        choices=["volterra", "chain", "closed-form"],
        default="volterra",
    )
    p.add_argument("--u0", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--summary", help="write the JSON summary to this path")
    add_common(p)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("spectrum", help="generator eigenvalues")
    p.add_argument("--loop", help="loop JSON (inline or path)")
    p.add_argument("--generator", help="generator JSON (inline or path)")
    add_common(p)
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("stationary", help="stationary state")
    p.add_argument("--loop", help="loop JSON (inline or path)")
    p.add_argument("--generator", help="generator JSON (inline or path)")
    p.add_argument("--u0", type=float, default=1.0, help="total mass")
    add_common(p, plot=False)
    p.set_defaults(handler=cmd_stationary)

    p = sub.add_parser(
        "check", help="positivity, detailed balance, and mass consistency"
    )
    p.add_argument("--loop", help="loop JSON (inline or path)")
    p.add_argument("--kernel", help="kernel JSON (inline or path)")
    p.add_argument("--a", type=float, help="decay rate for mass consistency")
    p.add_argument("--horizon", type=float, help="positivity search horizon")
    add_common(p, plot=False)
    p.set_defaults(handler=cmd_check)

    p = sub.add_parser("dde", help="delay-limit study over chain lengths")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--T", type=float, required=True, help="delay")
    p.add_argument(
        "--N-list", dest="n_list", required=True,
        help="comma-separated chain lengths",
    )
    p.add_argument("--u0", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--t-end", type=float, help="default 10*T")
    p.add_argument("--count", type=int, default=6, help="delay roots to locate")
    p.add_argument("--out-dir", default=".", help="directory for CSV output")
    p.add_argument(
        "--emit-kernels", action="store_true", help="also write Erlang kernel CSVs"
    )
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument(
        "--plot", action="store_true", help="render figures into --out-dir"
    )
    p.set_defaults(handler=cmd_dde)

    p = sub.add_parser("simulate", help="jump-chain ensemble")
    p.add_argument("--loop", help="loop JSON (inline or path)")
    p.add_argument("--generator", help="generator JSON (inline or path)")
    p.add_argument("--u0", type=float, default=1.0)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--n-paths", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-times", type=int, default=61)
    p.add_argument("--summary", help="write stderr estimates to this path")
    add_common(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("kernel", help="kernel analysis")
    ksub = p.add_subparsers(dest="kernel_op", required=True)
    for name, extra in [
        ("eval", "evaluate K(t) at a point or on a grid"),
        ("laplace", "rational transform coefficients"),
        ("moments", "mass and mean time"),
        ("check", "positivity report"),
    ]:
        kp = ksub.add_parser(name, help=extra)
        kp.add_argument("--kernel", required=True, help="kernel JSON (inline or path)")
        if name == "eval":
            kp.add_argument("--t", type=float, help="single evaluation point")
            kp.add_argument("--t-end", type=float, default=10.0)
            kp.add_argument("--h", type=float, default=0.01)
            kp.add_argument("--plot", help="also render the kernel curve")
        else:
            kp.set_defaults(plot=None)
        if name == "check":
            kp.add_argument("--horizon", type=float)
        kp.add_argument("--out", help="output path (default: stdout)")
        kp.set_defaults(handler=cmd_kernel)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ParseError as exc:
        _report_error(args, exc)
        return 2
    except DomainError as exc:
        _report_error(args, exc)
        return 1


def _report_error(args, exc: Exception) -> None:
    if getattr(args, "json_errors", False):
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, InfeasibleDecomposition):
            payload["certificates"] = [
                {"ordering": list(o), "min_weight": w} for o, w in exc.certificates
            ]
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    else:
        print(f"memloop: {type(exc).__name__}: {exc}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
