"""Concrete terms, atoms, clauses, substitutions and unification.

The object language is a pure Prolog subset: no cut, no negation, no
operators apart from infix ``=<``.  All values are immutable; the only
mutable facility is the fresh-name counter used for renaming apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

NIL = "[]"
CONS = "."


class LogicError(Exception):
    """Base error for this package."""


class ParseError(LogicError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    name: Union[str, int]

    def __repr__(self):
        return str(self.name)


@dataclass(frozen=True)
class Struct:
    functor: str
    args: tuple

    def __post_init__(self):
        assert self.args, "zero-arity symbols are Consts"

    def __repr__(self):
        return print_term(self)


Term = Union[Var, Const, Struct]


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple = ()

    @property
    def indicator(self) -> tuple:
        return (self.pred, len(self.args))

    def __repr__(self):
        return print_atom(self)


@dataclass(frozen=True)
class Clause:
    head: Atom
    body: tuple  # of Atom
    id: int

    def __repr__(self):
        return print_clause(self)


@dataclass(frozen=True)
class Program:
    clauses: tuple  # of Clause, textual order

    def __post_init__(self):
        ids = [c.id for c in self.clauses]
        assert len(ids) == len(set(ids)), "clause ids must be unique"

    def clauses_for(self, pred: str, arity: int) -> list:
        return [c for c in self.clauses if c.head.indicator == (pred, arity)]

    @property
    def predicates(self) -> set:
        return {c.head.indicator for c in self.clauses}

    def __repr__(self):
        return print_program(self)


def mklist(items: Iterable[Term], tail: Term = Const(NIL)) -> Term:
    out = tail
    for x in reversed(list(items)):
        out = Struct(CONS, (x, out))
    return out


def list_parts(t: Term) -> tuple:
    """Split a list term into (elements, tail)."""
    items = []
    while isinstance(t, Struct) and t.functor == CONS and len(t.args) == 2:
        items.append(t.args[0])
        t = t.args[1]
    return items, t


def is_closed_list(t: Term) -> bool:
    _, tail = list_parts(t)
    return tail == Const(NIL)


def term_vars(t, acc=None) -> list:
    """Variables of a term/atom/sequence, in first-occurrence order."""
    if acc is None:
        acc = []
    if isinstance(t, Var):
        if t not in acc:
            acc.append(t)
    elif isinstance(t, Struct):
        for a in t.args:
            term_vars(a, acc)
    elif isinstance(t, Atom):
        for a in t.args:
            term_vars(a, acc)
    elif isinstance(t, (tuple, list)):
        for x in t:
            term_vars(x, acc)
    return acc


# --- substitutions ------------------------------------------------------

class Substitution:
    """Idempotent mapping Var -> Term."""

    __slots__ = ("bindings",)

    def __init__(self, bindings=None):
        self.bindings = dict(bindings or {})

    def __bool__(self):
        return True

    def __eq__(self, other):
        return isinstance(other, Substitution) and self.bindings == other.bindings

    def __repr__(self):
        inner = ", ".join(f"{v}={print_term(t)}" for v, t in self.bindings.items())
        return "{" + inner + "}"

    def get(self, v: Var):
        return self.bindings.get(v)

    def apply(self, x):
        if isinstance(x, Var):
            t = self.bindings.get(x)
            return x if t is None else self.apply(t)
        if isinstance(x, Struct):
            return Struct(x.functor, tuple(self.apply(a) for a in x.args))
        if isinstance(x, Atom):
            return Atom(x.pred, tuple(self.apply(a) for a in x.args))
        if isinstance(x, tuple):
            return tuple(self.apply(a) for a in x)
        if isinstance(x, list):
            return [self.apply(a) for a in x]
        return x

    def normalized(self) -> "Substitution":
        """Resolve chains so no bound variable occurs in any range term."""
        out = {}
        for v in self.bindings:
            t = self.apply(v)
            if t != v:
                out[v] = t
        return Substitution(out)

    def restrict(self, vs: Iterable[Var]) -> "Substitution":
        keep = set(vs)
        return Substitution({v: t for v, t in self.normalized().bindings.items()
                             if v in keep})

    def extend(self, v: Var, t: Term) -> "Substitution":
        new = dict(self.bindings)
        new[v] = t
        return Substitution(new)


def compose(s1: Substitution, s2: Substitution) -> Substitution:
    """Composition: apply s1 first, then s2."""
    out = {}
    for v, t in s1.bindings.items():
        t2 = s2.apply(t)
        if t2 != v:
            out[v] = t2
    for v, t in s2.bindings.items():
        if v not in s1.bindings:
            out[v] = t
    return Substitution(out)


# --- unification --------------------------------------------------------

def _walk(t: Term, bindings: dict) -> Term:
    while isinstance(t, Var) and t in bindings:
        t = bindings[t]
    return t


def _occurs(v: Var, t: Term, bindings: dict) -> bool:
    t = _walk(t, bindings)
    if isinstance(t, Var):
        return t == v
    if isinstance(t, Struct):
        return any(_occurs(v, a, bindings) for a in t.args)
    return False


def unify(t1, t2, occurs_check: bool = True, bindings=None):
    """Most general unifier of two terms or atoms, or None on failure."""
    work = []
    if isinstance(t1, Atom) and isinstance(t2, Atom):
        if t1.indicator != t2.indicator:
            return None
        work = list(zip(t1.args, t2.args))
    else:
        work = [(t1, t2)]
    b = dict(bindings or {})
    while work:
        x, y = work.pop()
        x = _walk(x, b)
        y = _walk(y, b)
        if x == y:
            continue
        if isinstance(x, Var):
            if occurs_check and _occurs(x, y, b):
                return None
            b[x] = y
        elif isinstance(y, Var):
            if occurs_check and _occurs(y, x, b):
                return None
            b[y] = x
        elif isinstance(x, Const) and isinstance(y, Const):
            if x.name != y.name:
                return None
        elif isinstance(x, Struct) and isinstance(y, Struct):
            if x.functor != y.functor or len(x.args) != len(y.args):
                return None
            work.extend(zip(x.args, y.args))
        else:
            return None
    # without the occurs check the result may be cyclic; leave chains to
    # apply(), which walks them lazily
    return Substitution(b).normalized() if occurs_check else Substitution(b)


class FreshNames:
    """Fresh-name source; confined to a single engine/analysis instance."""

    def __init__(self, prefix: str = "_V"):
        self.prefix = prefix
        self.n = 0

    def var(self) -> Var:
        self.n += 1
        return Var(f"{self.prefix}{self.n}")


def _replace_vars(x, mapping: dict):
    """Simultaneous variable replacement (no chain walking, unlike
    Substitution.apply, so the range may reuse domain names)."""
    if isinstance(x, Var):
        return mapping.get(x, x)
    if isinstance(x, Struct):
        return Struct(x.functor, tuple(_replace_vars(a, mapping)
                                       for a in x.args))
    if isinstance(x, Atom):
        return Atom(x.pred, tuple(_replace_vars(a, mapping) for a in x.args))
    if isinstance(x, tuple):
        return tuple(_replace_vars(a, mapping) for a in x)
    return x


def rename_apart(c: Clause, fresh: FreshNames) -> Clause:
    vs = term_vars((c.head,) + c.body)
    if not vs:
        return c
    mapping = {v: fresh.var() for v in vs}
    return Clause(_replace_vars(c.head, mapping),
                  _replace_vars(c.body, mapping), c.id)


def rename_atom_apart(a: Atom, fresh: FreshNames) -> Atom:
    return _replace_vars(a, {v: fresh.var() for v in term_vars(a)})


# --- parsing ------------------------------------------------------------

RESERVED_PREDICATES = ("cmulti", "building_block")

_PUNCT = [":-", "=<", "->", "(", ")", "[", "]", "{", "}", "|", ",",
          "<", "=", ";", ".", "/", ":"]


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1
        self.tokens = list(self._lex())
        self.i = 0

    def _advance(self, n):
        for ch in self.text[self.pos:self.pos + n]:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n

    def _lex(self):
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch in " \t\r\n":
                self._advance(1)
                continue
            if ch == "%":
                nl = text.find("\n", self.pos)
                self._advance((nl if nl >= 0 else len(text)) - self.pos)
                continue
            loc = (self.line, self.col)
            for p in _PUNCT:
                if text.startswith(p, self.pos):
                    # '.' inside a float/end: '.' followed by '(' is the cons
                    # functor written explicitly; treat '.' as punct always.
                    self._advance(len(p))
                    yield (p, p, loc)
                    break
            else:
                if ch.isdigit() or (ch == "-" and self.pos + 1 < len(text)
                                    and text[self.pos + 1].isdigit()):
                    j = self.pos + 1
                    while j < len(text) and text[j].isdigit():
                        j += 1
                    tok = text[self.pos:j]
                    self._advance(j - self.pos)
                    yield ("int", int(tok), loc)
                elif ch.islower():
                    j = self.pos
                    while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                        j += 1
                    tok = text[self.pos:j]
                    self._advance(j - self.pos)
                    yield ("name", tok, loc)
                elif ch.isupper() or ch == "_":
                    j = self.pos
                    while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                        j += 1
                    tok = text[self.pos:j]
                    self._advance(j - self.pos)
                    yield ("var", tok, loc)
                else:
                    raise ParseError(f"unexpected character {ch!r}", *loc)

    def peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return ("eof", None, (self.line, self.col))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", *tok[2])
        return tok


class _Parser:
    def __init__(self, text: str):
        self.lx = _Lexer(text)

    def parse_program(self) -> Program:
        clauses = []
        cid = 0
        while self.lx.peek()[0] != "eof":
            cid += 1
            clauses.append(self.parse_clause(cid))
        return Program(tuple(clauses))

    def parse_clause(self, cid: int) -> Clause:
        head = self.parse_atom()
        if head.pred in RESERVED_PREDICATES:
            tok = self.lx.peek()
            raise ParseError(f"reserved predicate {head.pred!r} cannot be "
                             "redefined", *tok[2])
        body = ()
        kind, _, _ = self.lx.peek()
        if kind == ":-":
            self.lx.next()
            body = tuple(self.parse_body())
        self.lx.expect(".")
        return Clause(head, body, cid)

    def parse_body(self):
        atoms = [self.parse_atom()]
        while self.lx.peek()[0] == ",":
            self.lx.next()
            atoms.append(self.parse_atom())
        return atoms

    def parse_atom(self) -> Atom:
        t = self.parse_term()
        if self.lx.peek()[0] == "=<":
            self.lx.next()
            rhs = self.parse_term()
            return Atom("=<", (t, rhs))
        if isinstance(t, Const) and isinstance(t.name, str):
            return Atom(t.name)
        if isinstance(t, Struct) and t.functor != CONS:
            return Atom(t.functor, t.args)
        tok = self.lx.peek()
        raise ParseError(f"expected an atom, found term {print_term(t)!r}",
                         *tok[2])

    def parse_term(self) -> Term:
        kind, val, loc = self.lx.next()
        if kind == "int":
            return Const(val)
        if kind == "var":
            return Var(val)
        if kind == "name" or (kind == "=<" and self.lx.peek()[0] == "("):
            if kind == "=<":
                val = "=<"   # reified comparison, written prefix
            if self.lx.peek()[0] == "(":
                self.lx.next()
                args = [self.parse_term()]
                while self.lx.peek()[0] == ",":
                    self.lx.next()
                    args.append(self.parse_term())
                self.lx.expect(")")
                return Struct(val, tuple(args))
            return Const(val)
        if kind == "[":
            if self.lx.peek()[0] == "]":
                self.lx.next()
                return Const(NIL)
            items = [self.parse_term()]
            while self.lx.peek()[0] == ",":
                self.lx.next()
                items.append(self.parse_term())
            tail = Const(NIL)
            if self.lx.peek()[0] == "|":
                self.lx.next()
                tail = self.parse_term()
            self.lx.expect("]")
            return mklist(items, tail)
        raise ParseError(f"unexpected token {val!r}", *loc)


def parse_program(text: str) -> Program:
    return _Parser(text).parse_program()


def parse_term(text: str) -> Term:
    p = _Parser(text)
    t = p.parse_term()
    if p.lx.peek()[0] != "eof":
        tok = p.lx.peek()
        raise ParseError(f"trailing input {tok[1]!r}", *tok[2])
    return t


def parse_atom(text: str) -> Atom:
    p = _Parser(text)
    a = p.parse_atom()
    if p.lx.peek()[0] != "eof":
        tok = p.lx.peek()
        raise ParseError(f"trailing input {tok[1]!r}", *tok[2])
    return a


def parse_goal(text: str) -> tuple:
    """A comma-separated conjunction of atoms."""
    p = _Parser(text)
    atoms = tuple(p.parse_body())
    if p.lx.peek()[0] != "eof":
        tok = p.lx.peek()
        raise ParseError(f"trailing input {tok[1]!r}", *tok[2])
    return atoms


# --- printing -----------------------------------------------------------

def print_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return str(t.name)
    if t.functor == CONS and len(t.args) == 2:
        items, tail = list_parts(t)
        inner = ",".join(print_term(x) for x in items)
        if tail == Const(NIL):
            return f"[{inner}]"
        return f"[{inner}|{print_term(tail)}]"
    inner = ",".join(print_term(a) for a in t.args)
    return f"{t.functor}({inner})"


def print_atom(a: Atom) -> str:
    if a.pred == "=<" and len(a.args) == 2:
        return f"{print_term(a.args[0])} =< {print_term(a.args[1])}"
    if not a.args:
        return a.pred
    inner = ",".join(print_term(x) for x in a.args)
    return f"{a.pred}({inner})"


def print_clause(c: Clause) -> str:
    head = print_atom(c.head)
    if not c.body:
        return f"{head}."
    body = ", ".join(print_atom(a) for a in c.body)
    return f"{head} :- {body}."


def print_program(p: Program) -> str:
    return "\n".join(print_clause(c) for c in p.clauses) + "\n"
