"""Scenario files: parsing, execution and certificate replay.

A scenario is a sequence of ``;``-terminated statements (blocks in braces
need no terminator)::

    backend rational;
    seed 7;
    model SQ = polygon(4);
    composite H = min(SQ, max(SQ, SQ));
    group G { model: SQ; kind: cyclic(4) }
    protocol P { models: [SQ, SQ, SQ]; f: hat [[..]]; omega: hat [[..]]; eta: identity }
    swap S { models: [SQ, SQ, SQ, SQ]; mu: hat [[..]]; omega: hat [[..]]; f: hat [[..]]; pairing: [1-3, 2-4] }
    task t = synthesize(SQ, G);
    assert t.verdict == Deterministic;

``#`` starts a comment.  Task records are plain dictionaries whose values
are strings, numbers and lists; exact scalars appear as ``"p/q"`` strings.
"""

from __future__ import annotations

import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import composite as comp
from .cone import ConeMap, Outside, minimal_generators
from .errors import GPTError
from .scalar import RATIONAL, Backend, f64, format_scalar, parse_scalar
from .state_space import (
    make_model,
    parse_fields,
    parse_model,
    parse_value,
    validate,
)
from .swap import SwapScenario, audit_nonregularity, teleport_through, transported
from .symmetry import (
    check_equivariant,
    cyclic_action,
    equivariant_self_duality,
    synthesize_theorem3,
)
from .teleport import ProtocolCandidate, classify, compression_of

__all__ = [
    "ParseError",
    "ValidationError",
    "AssertionFailed",
    "Scenario",
    "parse_scenario",
    "load_scenario",
    "run_scenario",
    "Report",
    "replay",
    "encode",
]


class ParseError(Exception):
    exit_code = 2


class ValidationError(Exception):
    exit_code = 3


class AssertionFailed(Exception):
    exit_code = 1


@dataclass
class Scenario:
    path: str = ""
    backend: Backend = RATIONAL
    seed: int = 0
    tol: float = 1e-9
    models: dict = field(default_factory=dict)
    composites: dict = field(default_factory=dict)
    groups: dict = field(default_factory=dict)
    protocols: dict = field(default_factory=dict)
    swaps: dict = field(default_factory=dict)
    tasks: list = field(default_factory=list)
    assertions: list = field(default_factory=list)
    raw: list = field(default_factory=list)

    def lookup_space(self, name: str):
        if name in self.models:
            return self.models[name]
        if name in self.composites:
            return self.composites[name]
        raise ValidationError(f"unknown model or composite {name!r}")


# -- lexing --------------------------------------------------------------


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("#", 1)[0] for line in text.splitlines())


def _statements(text: str) -> list:
    out, cur, depth = [], [], 0
    for ch in _strip_comments(text):
        if ch in "{[(":
            depth += 1
        elif ch in "}])":
            depth -= 1
            if depth < 0:
                raise ParseError("unbalanced closing bracket")
        if ch == ";" and depth == 0:
            out.append("".join(cur).strip())
            cur = []
            continue
        cur.append(ch)
        if ch == "}" and depth == 0:
            out.append("".join(cur).strip())
            cur = []
    if depth != 0:
        raise ParseError("unbalanced brackets at end of file")
    tail = "".join(cur).strip()
    if tail:
        raise ParseError(f"statement not terminated: {tail[:40]!r}")
    return [s for s in out if s]


_BLOCK = re.compile(r"(\w+)\s*(\w*)\s*\{(.*)\}$", re.S)
_ASSIGN = re.compile(r"(\w+)\s+(\w+)\s*=\s*(.+)$", re.S)
_CALL = re.compile(r"([\w-]+)\s*\((.*)\)$", re.S)
_ASSERT = re.compile(r"assert\s+(\w+)\.(\w+)\s*(==|!=)\s*(.+)$", re.S)


def parse_scenario(text: str, path: str = "", overrides: dict | None = None) -> Scenario:
    """Parse and bind a scenario.  ``overrides`` may set backend, seed and tol."""
    overrides = overrides or {}
    stmts = _statements(text)
    if not stmts:
        raise ParseError("empty scenario")
    sc = Scenario(path=path)
    settings = {"backend": "rational", "seed": "0", "tol": "1e-9"}
    body = []
    for s in stmts:
        head = s.split(None, 1)
        if head[0] in settings and len(head) == 2:
            settings[head[0]] = head[1].strip()
        else:
            body.append(s)
    try:
        backend = overrides.get("backend") or settings["backend"]
        tol = float(overrides["tol"]) if overrides.get("tol") is not None else float(settings["tol"])
        sc.seed = int(overrides["seed"]) if overrides.get("seed") is not None else int(settings["seed"])
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    if backend not in ("rational", "f64"):
        raise ParseError(f"unknown backend {backend!r}")
    sc.tol = tol
    sc.backend = RATIONAL if backend == "rational" else f64(tol)
    for s in body:
        try:
            _bind(sc, s)
        except (ParseError, ValidationError):
            raise
        except KeyError as exc:
            raise ValidationError(f"unknown name {exc.args[0]!r} in {s[:60]!r}") from None
        except GPTError as exc:
            raise ValidationError(f"{type(exc).__name__}: {exc}") from None
        except ValueError as exc:
            raise ParseError(f"{exc} in {s[:60]!r}") from None
    if not sc.tasks:
        raise ParseError("scenario defines no tasks")
    return sc


def load_scenario(path: str, overrides: dict | None = None) -> Scenario:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(str(exc)) from None
    return parse_scenario(text, path, overrides)


def _bind(sc: Scenario, s: str) -> None:
    b = sc.backend
    if s.startswith("assert"):
        m = _ASSERT.fullmatch(s)
        if not m:
            raise ParseError(f"bad assertion {s!r}")
        task, key, op, value = m.groups()
        if task not in [t[0] for t in sc.tasks]:
            raise ValidationError(f"assertion refers to unknown task {task!r}")
        sc.assertions.append((task, key, op, value.strip()))
        return
    m = _BLOCK.fullmatch(s)
    if m:
        kind, name, inner = m.groups()
        fields = parse_fields(inner)
        if kind == "model":
            space = parse_model(f"model {{{inner}}}", b)
            sc.models[name or space.name] = space
        elif kind == "group":
            name = name or fields.get("name", "G")
            space = sc.lookup_space(fields["model"])
            sc.groups[name] = _make_group(space, fields.get("kind", "cyclic"))
        elif kind == "protocol":
            sc.protocols[name or fields.get("name", "P")] = _make_protocol(sc, fields)
        elif kind == "swap":
            sc.swaps[name or fields.get("name", "S")] = _make_swap(sc, fields)
        else:
            raise ParseError(f"unknown block {kind!r}")
        return
    m = _ASSIGN.fullmatch(s)
    if not m:
        raise ParseError(f"cannot parse statement {s[:60]!r}")
    kind, name, rhs = m.groups()
    rhs = rhs.strip()
    if kind == "model":
        if rhs.startswith("model"):
            sc.models[name] = parse_model(rhs, b)
        else:
            sc.models[name] = make_model(rhs, backend=b)
        sc.models[name].name = name
    elif kind == "composite":
        recipe = comp.parse_recipe(rhs, {**sc.models, **sc.composites})
        sc.composites[name] = comp.tensor(recipe)
    elif kind == "task":
        c = _CALL.fullmatch(rhs)
        if not c:
            raise ParseError(f"bad task {rhs!r}")
        op, args = c.group(1).replace("-", "_"), _split_args(c.group(2))
        op = _ALIASES.get(op, op)
        if op not in _TASKS:
            raise ParseError(f"unknown task kind {op!r}")
        sc.tasks.append((name, op, args))
    else:
        raise ParseError(f"unknown statement {kind!r}")


def _split_args(text: str) -> list:
    out, cur, depth = [], [], 0
    for ch in text + ",":
        if ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
        if ch == "," and depth == 0:
            item = "".join(cur).strip()
            if item:
                out.append(item)
            cur = []
        else:
            cur.append(ch)
    return out


def _names(text: str) -> list:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ParseError(f"expected a bracketed name list, got {text!r}")
    return [t.strip() for t in text[1:-1].split(",") if t.strip()]


def _make_group(space, kind: str):
    kind = kind.strip()
    m = re.fullmatch(r"cyclic(?:\((\d+)\))?", kind)
    if not m:
        raise ParseError(f"unknown group kind {kind!r}")
    a = cyclic_action(space)
    if m.group(1) and int(m.group(1)) != a.order:
        raise ValidationError(f"{space.name} has a cyclic action of order {a.order}, not {m.group(1)}")
    return a


def _matrix_expr(text: str, b: Backend, shape) -> np.ndarray:
    """``hat [[..]]`` (operator), ``identity`` or ``zero``."""
    text = text.strip()
    if text.startswith("hat"):
        text = text[3:].strip()
    if text == "identity":
        return b.eye(shape[0])
    if text == "zero":
        return b.zeros(shape)
    M = b.array(parse_value(text, b))
    if M.shape != tuple(shape):
        raise ValidationError(f"matrix of shape {M.shape}, expected {tuple(shape)}")
    return M


def _make_protocol(sc: Scenario, fields: dict) -> ProtocolCandidate:
    b = sc.backend
    A1, A2, B = [sc.lookup_space(n) for n in _names(fields["models"])]
    F = _matrix_expr(fields["f"], b, (A2.dim, A1.dim))
    W = _matrix_expr(fields["omega"], b, (B.dim, A2.dim))
    eta = _matrix_expr(fields.get("eta", "identity"), b, (B.dim, A1.dim))
    p = ProtocolCandidate.from_maps(F, W, A1, A2, B, eta)
    problems = p.validate()
    if problems:
        raise ValidationError("; ".join(problems))
    return p


def _make_swap(sc: Scenario, fields: dict) -> SwapScenario:
    b = sc.backend
    A1, A2, B1, B2 = [sc.lookup_space(n) for n in _names(fields["models"])]
    pairing = fields.get("pairing", "[1-3, 2-4]").replace(" ", "")
    if pairing != "[1-3,2-4]":
        raise ValidationError("only the pairing [1-3, 2-4] is supported")
    mu = comp.unhat(_matrix_expr(fields["mu"], b, (B1.dim, A1.dim)), comp.tensor(comp.tmax(A1, B1)))
    om = comp.unhat(_matrix_expr(fields["omega"], b, (B2.dim, A2.dim)), comp.tensor(comp.tmax(A2, B2)))
    f = comp.unhat(
        _matrix_expr(fields["f"], b, (A2.dim, A1.dim)), comp.tensor(comp.tmin(A1, A2)), (0,), "effect"
    )
    s = SwapScenario(mu, om, f)
    problems = s.validate()
    if problems:
        raise ValidationError("; ".join(problems))
    return s


# -- encoding ------------------------------------------------------------


def encode(x):
    """Plain JSON-ready form; exact scalars become ``"p/q"`` strings."""
    if isinstance(x, dict):
        return {k: encode(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [encode(v) for v in x]
    if isinstance(x, np.ndarray):
        return [encode(v) for v in x.tolist()]
    if isinstance(x, Fraction):
        return format_scalar(x)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _decode_vec(x, b: Backend):
    return b.array([parse_scalar(v, b) if isinstance(v, str) else v for v in x])


# -- tasks ---------------------------------------------------------------


def _task_validate(sc, args):
    space = sc.lookup_space(args[0])
    role = args[1] if len(args) > 1 else "state"
    value = parse_value(args[2], sc.backend) if len(args) > 2 else None
    chk = validate(space, value, role)
    rec = {"verdict": "Valid" if chk else "Invalid", "reason": chk.reason}
    if isinstance(chk.certificate, Outside):
        rec["certificate"] = {"kind": "outside", "space": args[0], "functional": chk.certificate.functional, "element": value}
    return rec


def _task_tensor(sc, args):
    c = sc.lookup_space(args[0])
    cone = c.cone
    rec = {"dim": c.dim, "recipe": str(getattr(c, "recipe", c.name))}
    rec["extreme_rays"] = len(minimal_generators(cone).generators) if cone.has_generators else len(cone.generators)
    rec["facets"] = len(cone.facets)
    rec["verdict"] = "Built"
    return rec


def _task_regularity(sc, args):
    c = sc.lookup_space(args[0])
    parts = comp.bipartitions(c.n_leaves)
    checked = []
    for p in parts:
        r = comp.check_regular(c, p)
        checked.append([list(q) for q in p])
        if not r:
            return {
                "verdict": "NotRegular",
                "partitions": checked,
                "certificate": {
                    "kind": "outside" if r.kind == "state" else "dual_outside",
                    "space": args[0],
                    "partition": [list(q) for q in r.partition],
                    "functional": r.certificate.functional,
                    "element": r.element,
                },
            }
    return {"verdict": "Regular", "partitions": checked}


def _task_swap_audit(sc, args):
    c = sc.lookup_space(args[0])
    r = audit_nonregularity(c)
    if r:
        return {"verdict": "NoWitnessFound", "reason": r.reason}
    return {
        "verdict": "NotRegular",
        "certificate": {
            "kind": "swap",
            "space": args[0],
            "functional": r.certificate.functional,
            "element": r.pivoted,
        },
        "mu": r.mu,
        "omega": r.omega,
        "f": r.f,
    }


def _task_classify(sc, args):
    p = sc.protocols[args[0]]
    v = classify(p)
    rec = {"verdict": v.kind, "reason": v.reason, "probabilities": list(v.probabilities)}
    if v:
        rec["scale"] = v.scale
        rec["correction"] = v.correction.matrix
        rec["per_state_success"] = list(v.per_state_success)
        rec["compression"] = compression_of(p, v).matrix
    return rec


def _task_synthesize(sc, args):
    space = sc.lookup_space(args[0])
    a = sc.groups[args[1]]
    w = equivariant_self_duality(space, a, seed=sc.seed)
    if w is None:
        return {"verdict": "NoWitness"}
    out = synthesize_theorem3(space, a, w)
    b = space.backend
    # outcome probabilities on the first vertex (they do not depend on the input)
    v0 = space.omega_vertices[0]
    probs = [v.probabilities[0] for v in out.result.verdicts]
    inv = [a.labels[a.inverse_index(i)] for i in range(a.order)]
    constant = all(
        b.is_zero(x - probs[i]) for i, v in enumerate(out.result.verdicts) for x in v.probabilities
    )
    return {
        "verdict": "Deterministic",
        "outcomes": len(out.observable),
        "labels": list(out.observable.labels),
        "probabilities": probs,
        "probabilities_constant": constant,
        "corrections": inv,
        "witness": w.matrix,
        "equivariant": check_equivariant(w, a),
        "invariant_state": out.invariant,
        "unit_sum": b.equal(
            sum((e.functional for e in out.observable.effects[1:]), out.observable.effects[0].functional),
            out.observable.space.unit,
        ),
        "first_vertex": v0,
    }


def _task_teleport_through(sc, args):
    s = sc.swaps[args[0]]
    A1 = s.mu.side(0)
    B2 = s.B2
    eta = ConeMap(sc.backend.eye(A1.dim), A1, B2)
    out, p = teleport_through(s, eta)
    expect = transported(s.mu, eta, out.host)
    target = expect.tensor / (out.host.unit @ expect.tensor)
    return {
        "verdict": "Transported",
        "probability": p,
        "recovered": sc.backend.equal(out.tensor, target),
        "state": out.tensor,
    }


def _task_admissible(sc, args):
    c = sc.lookup_space(args[0])
    trials = int(args[1]) if len(args) > 1 else 1000
    r = comp.check_admissible(c, trials=trials, seed=sc.seed)
    rec = {"verdict": type(r).__name__}
    if isinstance(r, comp.Falsified):
        rec["state"] = r.state
        rec["image"] = r.image
    return rec


_TASKS = {
    "validate": _task_validate,
    "tensor": _task_tensor,
    "regularity": _task_regularity,
    "swap_audit": _task_swap_audit,
    "classify": _task_classify,
    "synthesize": _task_synthesize,
    "teleport_through": _task_teleport_through,
    "admissible": _task_admissible,
}

_ALIASES = {
    "teleport_classify": "classify",
    "teleport_synthesize": "synthesize",
}


# -- running -------------------------------------------------------------


@dataclass
class Report:
    scenario: Scenario
    records: list
    assertions: list
    timings: dict

    @property
    def ok(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def header(self) -> dict:
        sc = self.scenario
        return {
            "type": "header",
            "scenario": sc.path,
            "backend": sc.backend.name,
            "seed": sc.seed,
            "tol": sc.tol,
        }

    def lines(self) -> list:
        out = [self.header()]
        out += [encode({"type": "task", **r}) for r in self.records]
        out += [encode({"type": "assert", **a}) for a in self.assertions]
        out.append({"type": "status", "status": "pass" if self.ok else "fail"})
        return out


def _run_task(sc, task):
    name, op, args = task
    t0 = time.perf_counter()
    try:
        rec = _TASKS[op](sc, args)
    except KeyError as exc:
        raise ValidationError(f"task {name}: unknown name {exc.args[0]!r}") from None
    except GPTError as exc:
        raise ValidationError(f"task {name}: {type(exc).__name__}: {exc}") from None
    return {"task": name, "op": op, "args": list(args), **rec}, time.perf_counter() - t0


def _canon(x, b: Backend):
    """Comparable form of a record value or an assertion literal."""
    if isinstance(x, str):
        s = x.strip()
        if s.lower() in ("true", "false"):
            return s.lower() == "true"
        try:
            return parse_scalar(s, b)
        except (ValueError, ZeroDivisionError):
            return s
    if isinstance(x, (list, tuple)):
        return [_canon(v, b) for v in x]
    return x


def _equal(a, c, b: Backend) -> bool:
    if isinstance(a, list) and isinstance(c, list):
        return len(a) == len(c) and all(_equal(x, y, b) for x, y in zip(a, c))
    if isinstance(a, bool) or isinstance(c, bool):
        return a is c if isinstance(a, bool) and isinstance(c, bool) else False
    if isinstance(a, (int, float, Fraction)) and isinstance(c, (int, float, Fraction)):
        return b.is_zero(a - c) if not b.exact else a == c
    return a == c


def _literal(text: str, b: Backend):
    text = text.strip()
    if text.startswith("["):
        return _canon(_literal_list(text), b)
    return _canon(text, b)


def _literal_list(text):
    inner = text.strip()[1:-1]
    return [(_literal_list(p) if p.strip().startswith("[") else p.strip()) for p in _split_args(inner)]


def run_scenario(sc: Scenario, jobs: int = 1) -> Report:
    """Run every task (in parallel when ``jobs > 1``), then check assertions."""
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(lambda t: _run_task(sc, t), sc.tasks))
    else:
        results = [_run_task(sc, t) for t in sc.tasks]
    records = [r for r, _ in results]
    timings = {r["task"]: dt for r, dt in results}
    by_name = {r["task"]: encode(r) for r in records}
    checks = []
    b = sc.backend
    for task, key, op, value in sc.assertions:
        actual = by_name[task].get(key)
        same = actual is not None and _equal(_canon(actual, b), _literal(value, b), b)
        passed = same if op == "==" else not same
        checks.append(
            {"assertion": f"{task}.{key} {op} {value}", "passed": passed, "actual": actual}
        )
    return Report(sc, records, checks, timings)


# -- replay --------------------------------------------------------------


def replay(lines: list, overrides: dict | None = None) -> list:
    """Re-check every certificate in a machine report.

    The scenario named in the header is re-parsed (not re-run) so that the
    cones the certificates refer to are rebuilt independently of the report.
    Returns a list of ``(task, ok, message)``.
    """
    header = next((x for x in lines if x.get("type") == "header"), None)
    if header is None:
        raise ParseError("report has no header")
    ov = {"backend": header["backend"], "seed": header["seed"], "tol": header["tol"]}
    ov.update(overrides or {})
    sc = load_scenario(header["scenario"], ov)
    b = sc.backend
    out = []
    for rec in lines:
        if rec.get("type") != "task" or "certificate" not in rec:
            continue
        cert = rec["certificate"]
        h = _decode_vec(cert["functional"], b)
        x = _decode_vec(cert["element"], b)
        space = sc.lookup_space(cert["space"])
        kind = cert["kind"]
        if kind == "outside":
            ok = Outside(h).verify(space.cone, x)
        elif kind == "dual_outside":
            ok = Outside(h).verify(space.cone.dual(), x)
        elif kind == "swap":
            ok = Outside(h).verify(comp.partial_subsystem(space, (2, 3)).cone, x)
        else:
            ok = False
        out.append((rec["task"], bool(ok), kind))
    return out

