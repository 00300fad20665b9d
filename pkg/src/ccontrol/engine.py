"""SLD resolution with a pluggable selection strategy and builtins.

Search is depth-first with textual clause order, driven by an explicit
stack so deep derivations do not exhaust host recursion.  The inference
counter adds one per successful clause resolution and one per builtin
invocation; failed unification attempts are free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .terms import (Atom, Const, FreshNames, LogicError, Program, Struct,
                    Substitution, Var, compose, is_closed_list, list_parts,
                    mklist, rename_apart, term_vars, unify, NIL)

DEFAULT_MAX_INFERENCES = 10_000_000
DEFAULT_MAX_DEPTH = 100_000


class EngineError(LogicError):
    pass


class ModeError(EngineError):
    """A builtin was invoked with argument modes it cannot run."""


@dataclass
class Limits:
    max_inferences: int = DEFAULT_MAX_INFERENCES
    max_depth: int = DEFAULT_MAX_DEPTH
    max_answers: int | None = None   # stop after this many answers


@dataclass
class RunResult:
    answers: list            # of Substitution restricted to query vars
    inference_count: int
    exhausted: bool


def _int(t, atom):
    if isinstance(t, Const) and isinstance(t.name, int):
        return t.name
    raise ModeError(f"expected integer argument in {atom}")


def _bi_select(args, atom):
    x, lst, rest = args
    if not is_closed_list(lst):
        raise ModeError(f"select/3 needs a closed list: {atom}")
    items, _ = list_parts(lst)
    out = []
    for i in range(len(items)):
        removed = items[i]
        remainder = mklist(items[:i] + items[i + 1:])
        s = unify(x, removed)
        if s is None:
            continue
        s2 = unify(s.apply(rest), s.apply(remainder))
        if s2 is None:
            continue
        out.append(compose(s, s2))
    return out


def _bi_leq(args, atom):
    a, b = (_int(t, atom) for t in args)
    return [Substitution()] if a <= b else []


def _arith3(args, atom, fwd, inv_left, inv_right):
    """Three-place arithmetic over the naturals: any one argument may be
    computed from the other two; a negative result fails instead of
    producing a value outside the domain."""
    a, b, c = args
    known = [isinstance(t, Const) and isinstance(t.name, int) for t in args]
    if known[0] and known[1]:
        r = fwd(a.name, b.name)
    elif known[0] and known[2]:
        r = inv_right(a.name, c.name)
    elif known[1] and known[2]:
        r = inv_left(b.name, c.name)
    else:
        r = None
    if r is not None:
        if r < 0:
            return []
        target = args[known.index(False)] if False in known else None
        if target is None:
            return [Substitution()] if fwd(a.name, b.name) == c.name else []
        s = unify(target, Const(r))
        return [s] if s is not None else []
    raise ModeError(f"need two integer arguments in {atom}")


def _bi_plus(args, atom):
    return _arith3(args, atom, lambda a, b: a + b,
                   lambda b, c: c - b, lambda a, c: c - a)


def _bi_minus(args, atom):
    return _arith3(args, atom, lambda a, b: a - b,
                   lambda b, c: b + c, lambda a, c: a - c)


def _bi_divides(args, atom):
    n, m = (_int(t, atom) for t in args)
    return [Substitution()] if n != 0 and m % n == 0 else []


def _bi_does_not_divide(args, atom):
    n, m = (_int(t, atom) for t in args)
    return [Substitution()] if n == 0 or m % n != 0 else []


def _bi_noattack(args, atom):
    q1, q2, d = (_int(t, atom) for t in args)
    return [Substitution()] if q1 != q2 and abs(q1 - q2) != d else []


class BuiltinTable:
    """predicate/arity -> procedure yielding output substitutions."""

    def __init__(self, entries=None):
        self.entries = dict(entries if entries is not None else _DEFAULTS)

    def __contains__(self, indicator):
        return indicator in self.entries

    def evaluate(self, atom: Atom) -> list:
        proc = self.entries.get(atom.indicator)
        if proc is None:
            raise EngineError(f"unknown builtin {atom.pred}/{len(atom.args)}")
        return proc(atom.args, atom)


_DEFAULTS = {
    ("select", 3): _bi_select,
    ("=<", 2): _bi_leq,
    ("plus", 3): _bi_plus,
    ("minus", 3): _bi_minus,
    ("divides", 2): _bi_divides,
    ("does_not_divide", 2): _bi_does_not_divide,
    ("noattack", 3): _bi_noattack,
}


def leftmost(goal) -> int:
    return 0


class Solver:
    """One solve call; single-threaded, owns its fresh-name counter."""

    def __init__(self, program: Program, builtins: BuiltinTable = None,
                 limits: Limits = None, occurs_check: bool = True):
        self.program = program
        self.builtins = builtins or BuiltinTable()
        self.limits = limits or Limits()
        self.occurs_check = occurs_check
        self.fresh = FreshNames()
        self.inferences = 0

    def _check_known(self, goal):
        for a in goal:
            if a.pred == "call" and len(a.args) == 1:
                continue
            if a.indicator in self.builtins:
                continue
            if self.program.clauses_for(a.pred, len(a.args)):
                continue
            if a.indicator in self.program.predicates:
                continue
            raise EngineError(
                f"unknown predicate {a.pred}/{len(a.args)}")

    def _eval_callable(self, atom: Atom) -> list:
        """Full evaluation of an atom: builtin, or nested LTR solve."""
        if atom.indicator in self.builtins:
            self.inferences += 1
            return self.builtins.evaluate(atom)
        # user-defined fully evaluated predicate: run to exhaustion
        sub = Solver(self.program, self.builtins, self.limits,
                     self.occurs_check)
        res = sub.run((atom,), strategy=leftmost)
        self.inferences += res.inference_count
        if not res.exhausted:
            raise EngineError(f"full evaluation of {atom} hit limits")
        return res.answers

    def run(self, goal, strategy=leftmost) -> RunResult:
        """Enumerate all answers of ``goal`` under the given strategy."""
        self._check_known(goal)
        qvars = term_vars(goal)
        answers = []
        exhausted = True
        # stack entries: (goal tuple, query-variable instantiation, depth);
        # carrying the instantiation instead of an accumulated substitution
        # keeps each step linear in the current goal size
        stack = [(tuple(goal), tuple(qvars), 0)]
        while stack:
            if self.inferences > self.limits.max_inferences:
                exhausted = False
                break
            goal_, ans, depth = stack.pop()
            if not goal_:
                answers.append(Substitution(
                    {v: t for v, t in zip(qvars, ans) if t != v}))
                if self.limits.max_answers is not None and \
                        len(answers) >= self.limits.max_answers:
                    exhausted = not stack
                    break
                continue
            if depth > self.limits.max_depth:
                exhausted = False
                continue
            idx = strategy(goal_)
            atom = goal_[idx]
            before, after = goal_[:idx], goal_[idx + 1:]
            if atom.pred == "call" and len(atom.args) == 1:
                inner = atom.args[0]
                if isinstance(inner, Const) and isinstance(inner.name, str):
                    inner = Atom(inner.name)
                elif isinstance(inner, Struct):
                    inner = Atom(inner.functor, inner.args)
                else:
                    raise EngineError(f"call/1 on non-callable {inner}")
                atom = inner
                is_call = True
            else:
                is_call = False
            if atom.indicator in self.builtins or is_call:
                outs = self._eval_callable(atom)
                for out in reversed(outs):
                    stack.append((out.apply(before + after),
                                  out.apply(ans), depth))
                continue
            if atom.indicator not in self.program.predicates:
                raise EngineError(
                    f"unknown predicate {atom.pred}/{len(atom.args)}")
            alternatives = []
            for clause in self.program.clauses_for(atom.pred, len(atom.args)):
                rc = rename_apart(clause, self.fresh)
                mgu = unify(atom, rc.head, occurs_check=self.occurs_check)
                if mgu is None:
                    continue
                newgoal = mgu.apply(before + rc.body + after)
                alternatives.append((newgoal, mgu.apply(ans)))
            self.inferences += len(alternatives)
            for newgoal, newans in reversed(alternatives):
                stack.append((newgoal, newans, depth + 1))
        return RunResult(answers, self.inferences, exhausted)


def solve(program: Program, goal, builtins: BuiltinTable = None,
          strategy=leftmost, limits: Limits = None,
          occurs_check: bool = True) -> RunResult:
    return Solver(program, builtins, limits, occurs_check).run(goal, strategy)
