"""``anisotens`` command-line interface."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import cli_io
from .bases import monomial_basis, orthogonal_basis
from .classifier import NAMED_TENSORS, NONE, breaking_graph, detect_symmetry
from .groups import GroupClosureError, build_group, invariant_space_analytic, invariant_space_numeric, principal_angles
from .maxent import InfeasibleTargetsError, NotConvergedError, sample_density, solve_maxent

log = logging.getLogger("anisotens")

EXIT_OK, EXIT_INPUT, EXIT_NONE = 0, 1, 2


def _emit(args, payload: dict, text: str) -> None:
    out = cli_io.dumps(payload) + "\n" if args.format == "json" else text.rstrip("\n") + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(cli_io.dumps(payload) + "\n")
        if args.format == "text":
            sys.stdout.write(text.rstrip("\n") + "\n")
        return
    sys.stdout.write(out)


def _labels(space) -> tuple:
    return space.labels or tuple(f"X{i + 1}" for i in range(len(space.members)))


def _space_payload(space, exact: bool) -> dict:
    members = []
    for X, lab, meta in zip(space.members, _labels(space), space.meta or [None] * len(space.members)):
        entry = {"label": lab, "tensor": cli_io.symtensor_to_json(X.to_float())}
        if meta:
            entry["meta"] = dict(meta)
        if exact and X.exact:
            entry["exact"] = {f"{k[0]},{k[1]},{k[2]}": str(v) for k, v in X.to_dict().items()}
        members.append(entry)
    return {"order": space.order, "dim": len(space.members), "members": members}


def cmd_basis(args) -> int:
    space = orthogonal_basis(args.order) if args.kind == "orthogonal" else monomial_basis(args.order)
    payload = {"kind": args.kind, **_space_payload(space, args.exact)}
    lines = [f"{args.kind} basis of order {args.order}: {len(space.members)} tensors"]
    for X, lab in zip(space.members, _labels(space)):
        terms = ", ".join(f"{k}: {v}" for k, v in X.to_dict().items() if v != 0)
        lines.append(f"  {lab}: {{{terms}}}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_invariants(args) -> int:
    G = build_group(args.group)
    space = invariant_space_analytic(G, args.order)
    payload = {"group": G.name, **_space_payload(space, False)}
    lines = [f"invariant tensors of order {args.order} for {G.name}: dim {space.dim}"]
    if args.check == "numeric":
        num = invariant_space_numeric(G, args.order)
        angles = principal_angles(space, num)
        payload["numeric_dim"] = num.dim
        payload["principal_angles"] = [float(a) for a in angles]
        lines.append(f"numeric construction: dim {num.dim}, largest principal angle "
                     f"{max(angles, default=0.0):.3e}")
        if num.dim != space.dim:
            lines.append("WARNING: analytic and numeric dimensions differ")
    for X, lab in zip(space.members, _labels(space)):
        terms = ", ".join(f"{k}: {v:.12g}" for k, v in X.to_float().to_dict().items() if abs(v) > 1e-15)
        lines.append(f"  {lab}: {{{terms}}}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    targets = cli_io.targets_from_json(json.loads(Path(args.targets).read_text()))
    sol = solve_maxent(targets, tol=args.tol)
    payload = cli_io.solution_to_json(sol)
    lines = [
        f"converged: |grad J| = {sol.gradient_norm:.3e}, logZ = {sol.logZ:.12g}",
        f"grid: {sol.grid.spec}",
    ]
    for t, blk, r in zip(sol.targets, sol.multipliers(), sol.residuals):
        lines.append(f"  {t.name} (order {t.order}): residual {r:.3e}, b = {np.array2string(blk, precision=6)}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def _tensors_from_file(path: str) -> dict:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or not data:
        raise cli_io.InputError('params file must map tensor names to tensors, e.g. {"Q2": {...}}')
    out = {}
    for name, obj in data.items():
        U = cli_io.symtensor_from_json(obj)
        if name in NAMED_TENSORS and NAMED_TENSORS[name].order != U.order:
            raise cli_io.InputError(f"{name} must have order {NAMED_TENSORS[name].order}, got {U.order}")
        out[name] = U
    return out


def _report_text(report) -> str:
    lines = [f"detected: {report.detected}"]
    lines.append("frame: " + np.array2string(np.asarray(report.frame), precision=6).replace("\n", ""))
    lines.append(f"threshold: {report.threshold:.3e}")
    lines.append("distances:")
    lines += [f"  {g:>5}: {d:.3e}" for g, d in report.distances.items()]
    lines.append("coefficients:")
    lines += [f"  {k:>4} = {v: .10f}" for k, v in report.coefficients.items()]
    if report.graph is not None:
        lines.append("breaking graph:")
        for e in report.graph.edges:
            extra = ", ".join(list(e["freed_coefficients"]) + list(e["released_constraints"]))
            lines.append(f"  {e['from']} -> {e['to']}: {extra}")
    return "\n".join(lines)


def cmd_classify(args) -> int:
    if args.samples:
        selection = [s.strip() for s in (args.tensors or "Q2").split(",") if s.strip()]
        for name in selection:
            cli_io.base_tensor(name)
        sample = cli_io.ingest(args.samples, args.encoding)
        report, est = cli_io.run_pipeline(
            sample, selection, confidence=args.confidence, with_graph=args.graph,
            molecular_group=args.molecule, threads=args.threads,
        )
        payload = report.to_json()
        payload["n_samples"] = len(sample)
        payload["moments"] = {k: cli_io.symtensor_to_json(U) for k, U in est.means.items()}
    else:
        if not args.tensors:
            raise cli_io.InputError("give --tensors params.json, or --samples with a tensor list")
        tensors = _tensors_from_file(args.tensors)
        report = detect_symmetry(tensors, tol=args.tol, with_graph=args.graph, molecular_group=args.molecule)
        payload = report.to_json()
    _emit(args, payload, _report_text(report))
    return EXIT_NONE if report.detected == NONE else EXIT_OK


def cmd_graph(args) -> int:
    selection = [s.strip() for s in args.tensors.split(",") if s.strip()]
    graph = breaking_graph(tuple(selection), args.molecule)
    lines = ["nodes: " + ", ".join(graph.to_json()["nodes"])]
    for e in graph.edges:
        extra = ", ".join(list(e["freed_coefficients"]) + list(e["released_constraints"]))
        lines.append(f"  {e['from']} -> {e['to']}: {extra}")
    _emit(args, graph.to_json(), "\n".join(lines))
    return EXIT_OK


def cmd_sample(args) -> int:
    sol = cli_io.solution_from_json(json.loads(Path(args.solution).read_text()))
    rots = sample_density(sol, args.n, np.random.default_rng(args.seed))
    lines = [cli_io.dumps(cli_io.rotation_to_json(p, args.encoding), indent=None) for p in rots]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        if args.format == "text":
            print(f"wrote {len(rots)} orientations to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _threads(value) -> int:
    if value is None:
        value = os.environ.get("ANISOTENS_THREADS", "1")
    try:
        n = int(value)
    except ValueError:
        raise cli_io.InputError(f"thread count must be an integer, got {value!r}") from None
    if n < 1:
        raise cli_io.InputError("thread count must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed for sampling")
    common.add_argument("--threads", default=argparse.SUPPRESS, help="worker threads (env ANISOTENS_THREADS)")
    common.add_argument("--format", choices=("json", "text"), default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="anisotens", description="Symmetric traceless tensors, invariant spaces, max-entropy densities "
        "and mesoscopic symmetry classification."
    )
    parser.add_argument("--seed", type=int, default=0, help="random seed for sampling")
    parser.add_argument("--threads", default=None, help="worker threads (env ANISOTENS_THREADS)")
    parser.add_argument("--format", choices=("json", "text"), default="json")
    parser.add_argument("-v", "--verbose", action="store_true", default=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis", parents=[common], help="monomial or orthogonal basis of one order")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--kind", choices=("orthogonal", "monomial"), default="orthogonal")
    p.add_argument("--exact", action="store_true", help="also print rational components")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("invariants", parents=[common], help="invariant tensors of a point group")
    p.add_argument("--group", required=True, help="Cn, Dn, Cinf, Dinf, T, O, I or SO3")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--check", choices=("none", "numeric"), default="none",
                   help="cross-check against group averaging")
    p.set_defaults(func=cmd_invariants)

    p = sub.add_parser("reconstruct", parents=[common], help="max-entropy density from tensor moments")
    p.add_argument("--targets", required=True, help="targets.json")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", help="write solution.json here")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("classify", parents=[common], help="mesoscopic symmetry of order parameters")
    p.add_argument("--tensors", help="params.json, or with --samples a list such as Q2,M2,T3")
    p.add_argument("--samples", help="orientation file (JSON lines or a JSON list)")
    p.add_argument("--encoding", choices=("quat", "matrix", "euler"), default=None,
                   help="insist on one rotation encoding in --samples")
    p.add_argument("--molecule", help="molecular point group the named tensors must respect")
    p.add_argument("--tol", type=float, default=1e-8, help="relative tolerance for exact tensors")
    p.add_argument("--confidence", type=float, default=1 - 1e-6,
                   help="noise quantile used for the sample threshold")
    p.add_argument("--graph", action="store_true", help="include the symmetry-breaking graph")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("graph", parents=[common], help="symmetry-breaking graph of a tensor selection")
    p.add_argument("--tensors", required=True, help="comma list such as Q2,Q4")
    p.add_argument("--molecule")
    p.add_argument("--out")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("sample", parents=[common], help="draw orientations from a max-entropy solution")
    p.add_argument("--solution", required=True, help="solution.json")
    p.add_argument("-n", "--n", type=int, default=1000)
    p.add_argument("--encoding", choices=("quat", "matrix", "euler"), default="quat")
    p.add_argument("--out", help="write JSON lines here")
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.threads = _threads(args.threads)
        with threadpool_limits(args.threads):
            return args.func(args)
    except (cli_io.InputError, ValueError, KeyError, OSError, GroupClosureError,
            InfeasibleTargetsError, NotConvergedError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"anisotens: error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
