"""Command line interface: ``gptt run | verify | models | describe``."""

from __future__ import annotations

import argparse
import itertools
import json
import sys

import numpy as np

from .cone import ConeMap, is_order_iso
from .errors import GPTError, UnknownModel
from .scalar import RATIONAL, f64, format_scalar, inverse, rank, solve
from .scenario import (
    AssertionFailed,
    ParseError,
    ValidationError,
    load_scenario,
    replay,
    run_scenario,
)
from .state_space import make_model, model_families

__all__ = ["main", "list_models", "describe"]


def list_models() -> str:
    return "\n".join(f"{k:16s} {v}" for k, v in model_families().items())


def _weak_self_duality(space):
    """An order isomorphism ``A* -> A`` sending dual generators onto vertex rays, if any.

    A linear map is fixed up to scale by the images of ``dim + 1`` rays in
    general position, so every injective assignment of such a frame of
    facets to vertices is tried.
    """
    b = space.backend
    H = space.cone.facets
    V = space.omega_vertices
    d = space.dim
    if len(H) != len(V):
        return None
    idx = []
    for i in range(len(H)):
        if rank(H[idx + [i]], b) == len(idx) + 1:
            idx.append(i)
        if len(idx) == d:
            break
    basis_inv = inverse(H[idx].T, b)
    extra = None
    for i in range(len(H)):
        c = basis_inv @ H[i]
        if i not in idx and not any(b.is_zero(x) for x in c):
            extra, coeff = i, c
            break
    if extra is None:
        return None
    dual = space.dual()
    for target in itertools.permutations(range(len(V)), d + 1):
        Vt = V[list(target[:d])]
        lam = solve(Vt.T, V[target[d]], b)
        if lam is None:
            continue
        scales = [lam[j] / coeff[j] for j in range(d)]
        if any(b.sign(x) <= 0 for x in scales):
            continue
        images = np.array([Vt[j] * scales[j] for j in range(d)])
        W = images.T @ basis_inv
        if rank(W, b) == d and is_order_iso(ConeMap(W, dual, space)):
            return W
    return None


def describe(name: str, backend=None) -> str:
    """Dimension, vertex and facet counts and self-duality of a built-in model."""
    b = backend
    if b is None:
        try:
            space = make_model(name, backend=RATIONAL)
        except GPTError:
            space = make_model(name, backend=f64())
    else:
        space = make_model(name, backend=b)
    b = space.backend
    nv = len(space.omega_vertices)
    nf = len(space.cone.facets)
    self_dual = space.cone.equals(space.cone.dual())
    weak = self_dual or _weak_self_duality(space) is not None
    if nv == space.dim:
        shape = "simplex"
    elif nf == nv:
        shape = f"{nf}-facet cone (same count as vertices)"
    else:
        shape = f"{nf}-facet cone"
    lines = [
        f"model: {space.name}",
        f"backend: {b.name}",
        f"dim: {space.dim}",
        f"vertices: {nv}",
        f"facets: {nf}",
        f"shape: {shape}",
        f"dual cone: {nf} extreme rays, {nv} facets",
        f"self-dual: {'yes' if self_dual else 'no'}",
        f"weakly self-dual: {'yes' if weak else 'no'}",
        f"unit: [{', '.join(format_scalar(x) for x in space.unit)}]",
    ]
    return "\n".join(lines)


def _text(report) -> str:
    rows = [f"scenario {report.scenario.path}  backend {report.scenario.backend.name}  seed {report.scenario.seed}"]
    rows.append(f"{'task':12s} {'op':18s} {'verdict':16s} {'time':>9s}  details")
    for line in report.lines():
        if line.get("type") != "task":
            continue
        details = []
        for key in ("dim", "extreme_rays", "facets", "outcomes", "probabilities", "corrections", "scale", "probability", "recovered", "reason"):
            if key in line and line[key] not in ("", None):
                v = line[key]
                details.append(f"{key}={_short(v)}")
        if "certificate" in line:
            details.append("certificate=" + line["certificate"]["kind"])
        t = report.timings[line["task"]]
        rows.append(f"{line['task']:12s} {line['op']:18s} {str(line.get('verdict', '')):16s} {t:8.3f}s  {' '.join(details)}")
    for a in report.assertions:
        rows.append(f"assert {a['assertion']}: {'pass' if a['passed'] else 'FAIL'}")
    rows.append(f"status: {'pass' if report.ok else 'fail'}")
    return "\n".join(rows)


def _short(v):
    if isinstance(v, list):
        return "[" + ",".join(_short(x) for x in v) + "]"
    return str(v)


def _machine(report) -> str:
    return "\n".join(json.dumps(line, sort_keys=True, separators=(",", ":")) for line in report.lines())


def _overrides(args) -> dict:
    return {"backend": args.backend, "seed": args.seed, "tol": args.tol}


def cmd_run(args) -> int:
    sc = load_scenario(args.file, _overrides(args))
    report = run_scenario(sc, jobs=args.jobs)
    out = _machine(report) if args.format == "machine" else _text(report)
    print(out)
    if not report.ok:
        raise AssertionFailed("one or more assertions failed")
    return 0


def cmd_verify(args) -> int:
    try:
        with open(args.report) as fh:
            lines = [json.loads(x) for x in fh if x.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(str(exc)) from None
    results = replay(lines)
    for task, ok, kind in results:
        print(f"{task}: {kind} certificate {'verified' if ok else 'REJECTED'}")
    print(f"{len(results)} certificate(s) replayed")
    if not all(ok for _, ok, _ in results):
        raise AssertionFailed("a certificate failed replay")
    return 0


def cmd_models(args) -> int:
    print(list_models())
    return 0


def cmd_describe(args) -> int:
    b = None
    if args.backend:
        b = RATIONAL if args.backend == "rational" else f64(args.tol or 1e-9)
    try:
        print(describe(args.name, b))
    except (UnknownModel, ValueError) as exc:
        raise ValidationError(f"unknown model {args.name!r}: {exc}") from None
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gptt", description="Teleportation and composites in finite-dimensional GPTs")
    sub = p.add_subparsers(dest="command", required=True)

    def flags(q):
        q.add_argument("--backend", choices=["rational", "f64"], default=None)
        q.add_argument("--tol", type=float, default=None, help="f64 tolerance (default 1e-9)")
        q.add_argument("--seed", type=int, default=None)

    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("file")
    flags(r)
    r.add_argument("--format", choices=["text", "machine"], default="text")
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="replay the certificates in a machine report")
    v.add_argument("report")
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("models", help="list the built-in model families")
    m.set_defaults(func=cmd_models)

    d = sub.add_parser("describe", help="summarize a built-in model")
    d.add_argument("name")
    flags(d)
    d.set_defaults(func=cmd_describe)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "tol", None) is not None and getattr(args, "backend", None) == "rational":
        print("error: --tol applies to the f64 backend only", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ParseError, ValidationError, AssertionFailed) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except GPTError as exc:
        print(f"ValidationError: {type(exc).__name__}: {exc}", file=sys.stderr)
        return ValidationError.exit_code


if __name__ == "__main__":
    sys.exit(main())
