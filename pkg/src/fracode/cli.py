"""Command-line driver.

Four subcommands: `kernel` exports a certified exponential-sum coefficient
table, `solve` integrates a built-in or config-defined problem and emits
solution CSV plus statistics JSON, `bench` times the dense against the
structured linear algebra on the same run, and `list` prints the built-in
problem descriptors.

Config files are flat `key=value` lines ('#' starts a comment); keys are
exactly the RunConfig fields, unknown keys are errors.  CSV uses '.' as
decimal mark and ',' as separator with one header row.  All outputs are
byte-stable across repeated runs up to the wall-time fields in the JSON.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from ._backend import BACKEND
from .augment import augment
from .bench_problems import available, build_problem, get_spec
from .problem import FractionalIVP
from .radau import STATUS_SUCCESS, IntegratorConfig, SolveReport, integrate
from .soe import build_soe, choose_parameters, verify_soe, write_soe
from .structlinalg import make_solver

__all__ = ["RunConfig", "main"]


@dataclass
class RunConfig:
    """One solve/bench request, flag-for-flag the CLI surface.

    eps defaults to tol (the achieved error tracks whichever is larger, so
    balancing them wastes nothing).  t_end and the problem parameters
    alpha, beta, ordering, grid_d, formulation are forwarded to the
    problem builder only when that builder takes them; supplying one the
    problem does not accept is an error.
    """

    problem: str = ""
    tol: float = 1e-6
    eps: Optional[float] = None
    t_end: Optional[float] = None
    grid_d: Optional[int] = None
    linalg: str = "structured"
    formulation: str = "auto"
    outputs: int = 1
    out_csv: Optional[str] = None
    out_stats: Optional[str] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    ordering: Optional[str] = None

    def validate(self) -> None:
        if not self.problem:
            raise ValueError("no problem named; use --problem or a config file")
        if not 0.0 < self.tol < 1.0:
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")
        if self.eps is not None and not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.outputs < 1:
            raise ValueError(f"outputs must be at least 1, got {self.outputs}")


_COERCE = {
    "problem": str, "tol": float, "eps": float, "t_end": float,
    "grid_d": int, "linalg": str, "formulation": str, "outputs": int,
    "out_csv": str, "out_stats": str, "alpha": float, "beta": float,
    "ordering": str,
}


def parse_config_file(path: str) -> dict:
    """Read a flat key=value config; unknown keys fail loudly."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(
                    f"{path}:{lineno}: expected key=value, got {raw.strip()!r}"
                )
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in _COERCE:
                raise ValueError(
                    f"{path}:{lineno}: unknown config key {key!r}; "
                    f"known keys: {', '.join(sorted(_COERCE))}"
                )
            try:
                values[key] = _COERCE[key](val)
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: cannot parse {val!r} as "
                    f"{_COERCE[key].__name__} for key {key!r}"
                ) from None
    return values


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    """Merge an optional config file with explicit flags (flags win)."""
    import os

    base = {}
    name = args.problem or ""
    if name and name not in available() and os.path.isfile(name):
        base = parse_config_file(name)
        name = base.pop("problem", "")
    cfg = RunConfig(problem=name, **base)
    for f in fields(RunConfig):
        if f.name == "problem":
            continue
        flag_val = getattr(args, f.name, None)
        if flag_val is not None:
            setattr(cfg, f.name, flag_val)
    cfg.validate()
    return cfg


def _build_from_config(cfg: RunConfig) -> FractionalIVP:
    spec = get_spec(cfg.problem)
    requested = {
        "alpha": cfg.alpha,
        "beta": cfg.beta,
        "ordering": cfg.ordering,
        "d": cfg.grid_d,
        "t_end": cfg.t_end,
    }
    if cfg.formulation != "auto":
        requested["formulation"] = cfg.formulation
    kw = {}
    for key, val in requested.items():
        if val is None:
            continue
        if key not in spec.parameters:
            flag = "grid_d" if key == "d" else key
            raise ValueError(
                f"problem {spec.name} does not take {flag}; "
                f"accepted parameters: {', '.join(sorted(spec.parameters))}"
            )
        kw[key] = val
    return build_problem(cfg.problem, **kw)


def _output_points(t_end: float, outputs: int) -> np.ndarray:
    # equally spaced, endpoint included; outputs=1 gives just the endpoint
    return np.linspace(t_end / outputs, t_end, outputs)


def _soe_table(p: FractionalIVP, eps: float, t_end: float) -> dict:
    """Kernel discretization parameters per distinct integral order."""
    table = {}
    for term in p.integrals:
        key = f"{term.alpha:.12g}"
        if key in table:
            continue
        m = math.ceil(term.alpha)
        alpha0 = term.alpha - m + 1
        par = choose_parameters(alpha0, eps, t_end)
        table[key] = {
            "order": term.alpha,
            "kernel_order": alpha0,
            "delta": par.delta,
            "h": par.h,
            "M": par.m_lo,
            "N": par.n_hi,
            "terms": par.n_terms,
        }
    return table


def _achieved_error(p: FractionalIVP, pts, head, status: str):
    """Error vs the problem's truth source, when one applies."""
    if p.exact is not None:
        rows = ~np.isnan(head).any(axis=1)
        if not rows.any():
            return None
        ex = np.array([np.atleast_1d(p.exact(t)) for t in pts[rows]], dtype=float)
        den = max(float(np.abs(ex).max()), 1e-300)
        val = float(np.abs(head[rows] - ex).max() / den)
        return {"measure": "max relative deviation over outputs", "value": val}
    spec = get_spec(p.name) if p.name in available() else None
    ref = spec.reference_values if spec is not None else None
    if (
        ref is not None
        and "y" in ref
        and status == STATUS_SUCCESS
        and abs(ref["conditions"]["t_end"] - pts[-1]) <= 1e-9 * pts[-1]
    ):
        r = np.asarray(ref["y"], dtype=float)
        val = float(np.linalg.norm((head[-1] - r) / r))
        return {
            "measure": "norm of componentwise relative deviation at reference",
            "value": val,
        }
    return None


def _row_errors(p: FractionalIVP, pts, head):
    if p.exact is None:
        return None
    ex = np.array([np.atleast_1d(p.exact(t)) for t in pts], dtype=float)
    den = np.maximum(np.abs(ex).max(axis=1), 1e-300)
    return np.abs(head - ex).max(axis=1) / den


def _write_csv(path: str, pts, head, errs) -> None:
    cols = ["t"] + [f"y_{j + 1}" for j in range(head.shape[1])]
    if errs is not None:
        cols.append("err")
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(len(pts)):
            if np.isnan(head[k]).any():
                break  # undelivered tail after a failure; keep what we have
            row = [f"{pts[k]:.17g}"] + [f"{v:.17g}" for v in head[k]]
            if errs is not None:
                row.append(f"{errs[k]:.17g}")
            fh.write(",".join(row) + "\n")


def _stats_payload(cfg, p, sys_aug, rep: SolveReport, pts, head, eps) -> dict:
    err = _achieved_error(p, pts, head, rep.status)
    return {
        "problem": p.name,
        "parameters": dict(p.params),
        "config": {
            "tol": cfg.tol,
            "eps": eps,
            "t_end": float(pts[-1]),
            "linalg": cfg.linalg,
            "formulation": cfg.formulation,
            "outputs": cfg.outputs,
        },
        "backend": BACKEND,
        "dimensions": {
            "head": sys_aug.dim_head,
            "auxiliary": sys_aug.total_dim - sys_aug.dim_head,
            "total": sys_aug.total_dim,
            "integral_terms": len(p.integrals),
        },
        "soe": _soe_table(p, eps, float(pts[-1])),
        "counters": {
            "nstep": rep.nstep,
            "naccpt": rep.naccpt,
            "nrejct": rep.nrejct,
            "nfcn": rep.nfcn,
            "njac": rep.njac,
            "ndec": rep.ndec,
            "nsol": rep.nsol,
        },
        "status": rep.status,
        "message": rep.message,
        "wall_time": rep.wall_time,
        "error": err,
    }


def _run(cfg: RunConfig):
    p = _build_from_config(cfg)
    eps = cfg.tol if cfg.eps is None else cfg.eps
    t_end = p.t_span[1]
    sys_aug = augment(p, eps, t_end)
    icfg = IntegratorConfig(rtol=cfg.tol, atol=cfg.tol)
    pts = _output_points(t_end, cfg.outputs)
    rep = integrate(sys_aug, icfg, make_solver(cfg.linalg), pts)
    head = rep.y_samples[:, : p.dim]
    return p, sys_aug, rep, pts, head, eps


def cmd_solve(cfg: RunConfig) -> int:
    p, sys_aug, rep, pts, head, eps = _run(cfg)
    errs = _row_errors(p, pts, head) if p.exact is not None else None
    if cfg.out_csv:
        _write_csv(cfg.out_csv, pts, head, errs)
    stats = _stats_payload(cfg, p, sys_aug, rep, pts, head, eps)
    if cfg.out_stats:
        with open(cfg.out_stats, "w") as fh:
            json.dump(stats, fh, indent=2, sort_keys=True)
            fh.write("\n")
    dims = stats["dimensions"]
    print(
        f"problem {p.name} (head {dims['head']}, terms "
        f"{dims['integral_terms']}, total dimension {dims['total']})"
    )
    print(
        f"status {rep.status}: {rep.naccpt} accepted / {rep.nrejct} rejected "
        f"steps, nfcn {rep.nfcn}, njac {rep.njac}, ndec {rep.ndec}, "
        f"nsol {rep.nsol}"
    )
    if not np.isnan(head[-1]).any():
        shown = ", ".join(f"y_{j + 1}={v:.10g}" for j, v in enumerate(head[-1][:4]))
        if p.dim > 4:
            shown += ", ..."
        print(f"endpoint t={pts[-1]:g}: {shown}")
    if stats["error"] is not None:
        print(f"{stats['error']['measure']}: {stats['error']['value']:.3e}")
    print(f"wall time {rep.wall_time:.3f} s")
    if rep.status != STATUS_SUCCESS:
        print(f"integration failed: {rep.message}", file=sys.stderr)
        return 1
    return 0


def cmd_bench(cfg: RunConfig, repeat: int) -> int:
    p = _build_from_config(cfg)
    eps = cfg.tol if cfg.eps is None else cfg.eps
    t_end = p.t_span[1]
    sys_aug = augment(p, eps, t_end)
    icfg = IntegratorConfig(rtol=cfg.tol, atol=cfg.tol)
    pts = _output_points(t_end, cfg.outputs)
    results = {}
    for mode in ("dense", "structured"):
        best = math.inf
        rep = None
        for _ in range(max(1, repeat)):
            r = integrate(sys_aug, icfg, make_solver(mode), pts)
            if r.status != STATUS_SUCCESS:
                print(
                    f"{mode} run failed with status {r.status}: {r.message}",
                    file=sys.stderr,
                )
                return 1
            best = min(best, r.wall_time)
            rep = r
        results[mode] = (best, rep)
    head_d = results["dense"][1].y_samples[:, : p.dim]
    head_s = results["structured"][1].y_samples[:, : p.dim]
    agree = float(
        np.abs(head_d - head_s).max() / max(np.abs(head_d).max(), 1e-300)
    )
    td, ts = results["dense"][0], results["structured"][0]
    print(f"problem {p.name}, tol {cfg.tol:g}, eps {eps:g}, backend {BACKEND}")
    print(f"dense      {td:.4f} s")
    print(f"structured {ts:.4f} s")
    print(f"speedup    {td / ts:.2f}x")
    print(f"trajectory agreement {agree:.3e} (relative)")
    if agree > 1e-10:
        print(
            f"modes disagree beyond 1e-10 (got {agree:.3e})", file=sys.stderr
        )
        return 1
    return 0


def cmd_kernel(args: argparse.Namespace) -> int:
    if not 0.0 < args.alpha < 1.0:
        print(
            "error: alpha must lie in (0,1); use the solver's split for alpha>1",
            file=sys.stderr,
        )
        return 2
    try:
        params = choose_parameters(args.alpha, args.eps, args.t_end)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    soe = build_soe(params)
    max_rel = verify_soe(soe, 1000)
    if args.out:
        with open(args.out, "w") as fh:
            write_soe(soe, params, fh)
    print(f"delta {params.delta:.17g}")
    print(f"h     {params.h:.17g}")
    print(f"M     {params.m_lo}")
    print(f"N     {params.n_hi}")
    print(f"terms {params.n_terms}")
    print(f"max relative error on [delta, T] (1000 samples): {max_rel:.3e}")
    return 0


def cmd_list(as_json: bool) -> int:
    if as_json:
        print(
            json.dumps(
                [get_spec(n).describe() for n in available()],
                indent=2,
                sort_keys=True,
            )
        )
        return 0
    for name in available():
        spec = get_spec(name)
        d = spec.describe()
        pars = ", ".join(f"{k}={v}" for k, v in sorted(d["parameters"].items()))
        print(f"{name:20s} {d['description']}")
        print(f"{'':20s} parameters: {pars}")
        print(f"{'':20s} truth: {d['truth']}")
    return 0


def _add_run_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--problem", required=True,
        help="built-in problem name or config-file path",
    )
    sub.add_argument("--tol", type=float, default=None, help="integrator tolerance")
    sub.add_argument(
        "--eps", type=float, default=None,
        help="kernel accuracy (defaults to tol)",
    )
    sub.add_argument("--t-end", type=float, default=None, help="final time")
    sub.add_argument(
        "--grid-d", type=int, default=None, help="grid size for PDE problems"
    )
    sub.add_argument(
        "--linalg", default=None, choices=("dense", "structured", "banded"),
        help="linear algebra mode",
    )
    sub.add_argument(
        "--formulation", default=None, choices=("volt1", "volt2", "auto"),
        help="first-order rewrite for orders above one",
    )
    sub.add_argument(
        "--outputs", type=int, default=None,
        help="number of equally spaced output points",
    )
    sub.add_argument("--alpha", type=float, default=None, help="derivative order")
    sub.add_argument("--beta", type=float, default=None, help="forcing exponent")
    sub.add_argument(
        "--ordering", default=None, choices=("by-species", "by-gridpoint"),
        help="state layout for reaction_diffusion",
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracode",
        description="Solve fractional integro-differential equations by "
        "kernel compression and stiff Runge-Kutta integration.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    kern = subs.add_parser("kernel", help="export an exponential-sum table")
    kern.add_argument("--alpha", type=float, required=True)
    kern.add_argument("--eps", type=float, required=True)
    kern.add_argument("--t-end", type=float, required=True)
    kern.add_argument("--out", default=None, help="coefficient file path")

    solve = subs.add_parser("solve", help="integrate a problem")
    _add_run_flags(solve)
    solve.add_argument("--out-csv", default=None, help="solution CSV path")
    solve.add_argument("--out-stats", default=None, help="statistics JSON path")

    bench = subs.add_parser(
        "bench", help="time dense vs structured linear algebra"
    )
    _add_run_flags(bench)
    bench.add_argument(
        "--repeat", type=int, default=1,
        help="timing repetitions (best of), run sequentially",
    )

    lst = subs.add_parser("list", help="show built-in problems")
    lst.add_argument("--json", action="store_true", help="machine-readable dump")

    args = parser.parse_args(argv)
    try:
        if args.command == "kernel":
            return cmd_kernel(args)
        if args.command == "list":
            return cmd_list(args.json)
        cfg = _config_from_args(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        return cmd_bench(cfg, args.repeat)
    except (ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
