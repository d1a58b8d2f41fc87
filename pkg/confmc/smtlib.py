"""SMT-LIB 2 emission and the external solver seam.

The payload is one QF_NRA problem: declarations sorted by name, then the
assertions block by block, then ``(check-sat)`` and ``(get-model)``.  The
solver runs as a subprocess reading the payload on stdin; its model is parsed
back into exact rationals.  Algebraic model values (``root-obj``) are refused.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import sympy

from confmc.elimination import ExistentialBlock
from confmc.errors import InvalidInput, ModelParseError, SolverSpawnFailure

# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

# Solver command line; the payload is written to its stdin.  Override with
# env var CONFMC_SOLVER_CMD.
SOLVER_CMD: str = os.environ.get("CONFMC_SOLVER_CMD", "z3 -in -smt2")

# Wall-clock limit per solver call in seconds.  Override with env var
# CONFMC_SOLVER_TIMEOUT.
SOLVER_TIMEOUT_S: float = float(os.environ.get("CONFMC_SOLVER_TIMEOUT", 120))

SAT = "sat"
UNSAT = "unsat"
UNKNOWN = "unknown"


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _numeral(value: sympy.Rational) -> str:
    p, q = int(value.p), int(value.q)
    body = f"{abs(p)}.0" if q == 1 else f"(/ {abs(p)}.0 {q}.0)"
    return f"(- {body})" if p < 0 else body


def to_smt(expr) -> str:
    """Render a polynomial sympy expression as an SMT-LIB term."""
    expr = sympy.sympify(expr)
    if expr.is_Symbol:
        return expr.name
    if expr.is_Rational:
        return _numeral(expr)
    if expr.is_Add:
        terms = sorted(expr.args, key=sympy.default_sort_key)
        return "(+ " + " ".join(to_smt(t) for t in terms) + ")"
    if expr.is_Mul:
        coeff, rest = expr.as_coeff_Mul()
        if coeff == -1:
            return f"(- {to_smt(rest)})"
        factors = sorted(expr.args, key=sympy.default_sort_key)
        return "(* " + " ".join(to_smt(f) for f in factors) + ")"
    if expr.is_Pow and expr.exp.is_Integer and expr.exp > 0:
        return "(* " + " ".join([to_smt(expr.base)] * int(expr.exp)) + ")"
    raise InvalidInput(f"cannot express '{expr}' in QF_NRA")


def _symbols(blocks: Sequence[ExistentialBlock]) -> List[sympy.Symbol]:
    found = set()
    for b in blocks:
        found.update(b.multipliers)
        for e in list(b.equalities) + list(b.nonnegatives):
            found.update(sympy.sympify(e).free_symbols)
    return sorted(found, key=lambda s: s.name)


def emit_problem(blocks: Sequence[ExistentialBlock], extra: Sequence[str] = ()) -> str:
    """One existential QF_NRA problem; byte-stable for a fixed block list."""
    lines = ["(set-logic QF_NRA)", "(set-option :produce-models true)"]
    for sym in _symbols(blocks):
        lines.append(f"(declare-fun {sym.name} () Real)")
    for b in blocks:
        lines.append(f"; {b.name}")
        for lam in b.multipliers:
            lines.append(f"(assert (>= {lam.name} 0.0))")
        for e in b.equalities:
            lines.append(f"(assert (= {to_smt(e)} 0.0))")
        for e in b.nonnegatives:
            lines.append(f"(assert (>= {to_smt(e)} 0.0))")
    lines.extend(extra)
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Model parsing
# ---------------------------------------------------------------------------

def _tokenize(text: str) -> List[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _read(tokens: List[str], pos: int):
    tok = tokens[pos]
    if tok == "(":
        out = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = _read(tokens, pos)
            out.append(item)
        if pos >= len(tokens):
            raise ValueError("unbalanced parentheses")
        return out, pos + 1
    if tok == ")":
        raise ValueError("unexpected ')'")
    return tok, pos + 1


def parse_sexprs(text: str) -> list:
    tokens = _tokenize(text)
    out, pos = [], 0
    while pos < len(tokens):
        item, pos = _read(tokens, pos)
        out.append(item)
    return out


def _value(term, raw: str) -> Fraction:
    if isinstance(term, str):
        try:
            return Fraction(term)
        except ValueError:
            raise ModelParseError(f"unexpected model value '{term}'", raw) from None
    if not term:
        raise ModelParseError("empty model term", raw)
    head, args = term[0], term[1:]
    if head == "root-obj":
        raise ModelParseError("algebraic model value (root-obj) cannot be used exactly", raw)
    vals = [_value(a, raw) for a in args]
    if head == "-" and len(vals) == 1:
        return -vals[0]
    if head == "-":
        return vals[0] - sum(vals[1:], Fraction(0))
    if head == "+":
        return sum(vals, Fraction(0))
    if head == "*":
        out = Fraction(1)
        for v in vals:
            out *= v
        return out
    if head == "/" and len(vals) == 2 and vals[1] != 0:
        return vals[0] / vals[1]
    raise ModelParseError(f"unsupported model term '{head}'", raw)


def parse_model_output(text: str) -> Dict[str, Fraction]:
    """Parse a ``(get-model)`` response into exact values per symbol."""
    try:
        exprs = parse_sexprs(text)
    except (ValueError, IndexError) as exc:
        raise ModelParseError(f"malformed model: {exc}", text) from None
    model: Dict[str, Fraction] = {}
    stack = list(exprs)
    while stack:
        item = stack.pop()
        if not isinstance(item, list) or not item:
            continue
        if item[0] == "define-fun":
            if len(item) != 5:
                raise ModelParseError(f"malformed define-fun {item!r}", text)
            _, name, params, sort, body = item
            if params:
                continue
            if sort not in ("Real", "Int"):
                raise ModelParseError(f"symbol '{name}' has sort {sort}", text)
            model[name] = _value(body, text)
        elif item[0] in ("model",) or isinstance(item[0], list):
            stack.extend(item)
        elif item[0] == "error":
            raise ModelParseError(" ".join(str(x) for x in item[1:]), text)
    return model


# ---------------------------------------------------------------------------
# Solver process
# ---------------------------------------------------------------------------

@dataclass
class SolverResult:
    status: str
    model: Dict[str, Fraction] = field(default_factory=dict)
    raw: str = ""
    reason: str = ""


def run_solver(
    payload: str,
    cmd: Optional[str] = None,
    timeout: Optional[float] = None,
    verbose: bool = False,
) -> SolverResult:
    """Run the external solver on *payload*; Unknown on timeout / unusable answer."""
    cmd = cmd or SOLVER_CMD
    timeout = SOLVER_TIMEOUT_S if timeout is None else timeout
    if timeout <= 0:
        return SolverResult(UNKNOWN, reason="timeout")
    argv = shlex.split(cmd)
    if verbose:
        print(f"  [solver] {cmd} ({len(payload)} bytes, timeout {timeout}s)", file=sys.stderr)
    try:
        proc = subprocess.run(
            argv, input=payload, capture_output=True, text=True, timeout=timeout,
        )
    except FileNotFoundError as exc:
        raise SolverSpawnFailure(f"cannot start solver '{argv[0]}': {exc}") from exc
    except OSError as exc:
        raise SolverSpawnFailure(f"cannot start solver '{argv[0]}': {exc}") from exc
    except subprocess.TimeoutExpired as exc:
        raw = exc.stdout if isinstance(exc.stdout, str) else ""
        return SolverResult(UNKNOWN, raw=raw or "", reason="timeout")

    out = proc.stdout.strip()
    first, _, rest = out.partition("\n")
    first = first.strip()
    if verbose:
        print(f"  [solver] answer: {first or '<empty>'}", file=sys.stderr)
    if first == UNSAT:
        return SolverResult(UNSAT, raw=out)
    if first == SAT:
        return SolverResult(SAT, model=parse_model_output(rest), raw=out)
    if first == UNKNOWN:
        return SolverResult(UNKNOWN, raw=out, reason="solver answered unknown")
    reason = (proc.stderr.strip() or out or f"exit code {proc.returncode}").splitlines()[0]
    return SolverResult(UNKNOWN, raw=out, reason=f"unparseable output: {reason}")
