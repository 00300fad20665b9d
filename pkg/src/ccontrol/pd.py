"""Offline partial deduction.

A source program is specialized with respect to a partially known goal.
Control is fixed before specialization by two kinds of data: clause-body
*annotations* saying what happens to each call (unfold it, execute it,
residualize it, or memoize it) and *filters* describing which parts of a
memoized call are known at specialization time.  Specialization is then a
deterministic memo-table worklist: every memoized call pattern becomes a
residual predicate whose clauses are the resultants of unfolding it.

Applied to the table-driven interpreter of :mod:`ccontrol.metaint` with
its goal list as the partially known input, this removes the entire
interpretation layer and leaves a direct program per control state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import BuiltinTable, ModeError
from .terms import (Atom, Const, FreshNames, LogicError, ParseError, Program,
                    Struct, Var, _Lexer, is_closed_list, list_parts, mklist,
                    print_atom, print_term, rename_apart, term_vars, unify,
                    CONS)

DEFAULT_BUDGET = 10_000

UNFOLD = "unfold"        # resolve against program clauses now
CALL = "call"            # execute fully now (builtins)
MEMO = "memo"            # generalize, residualize, specialize separately
RESCALL = "rescall"      # keep the call as-is in the residual clause
ANNOTATIONS = (UNFOLD, CALL, MEMO, RESCALL)


class PDError(LogicError):
    pass


# --- binding types -------------------------------------------------------

class BindingType:
    """How much of an argument is known at specialization time.

    ``admits`` says whether a term fits the type; ``generalize`` maps a
    term to the most general term of the type that it instantiates,
    introducing fresh variables for the unknown parts.
    """

    def admits(self, term) -> bool:
        raise NotImplementedError

    def generalize(self, term, fresh: FreshNames):
        raise NotImplementedError


class Static(BindingType):
    """Fully known: kept verbatim; must be ground."""

    def admits(self, term):
        return not term_vars(term)

    def generalize(self, term, fresh):
        if term_vars(term):
            raise PDError(f"static argument {print_term(term)} is not ground")
        return term

    def __repr__(self):
        return "static"


class Dynamic(BindingType):
    """Unknown: replaced by a fresh variable."""

    def admits(self, term):
        return True

    def generalize(self, term, fresh):
        return fresh.var()

    def __repr__(self):
        return "dynamic"


class Nonvar(BindingType):
    """Top functor known, arguments unknown."""

    def admits(self, term):
        return not isinstance(term, Var)

    def generalize(self, term, fresh):
        if isinstance(term, Var):
            raise PDError("nonvar argument is a variable")
        if isinstance(term, Const):
            return term
        return Struct(term.functor, tuple(fresh.var() for _ in term.args))

    def __repr__(self):
        return "nonvar"


@dataclass(frozen=True)
class ListOf(BindingType):
    """A closed list whose elements each fit the element type."""
    elem: BindingType

    def admits(self, term):
        return is_closed_list(term) and \
            all(self.elem.admits(x) for x in list_parts(term)[0])

    def generalize(self, term, fresh):
        if not is_closed_list(term):
            raise PDError(
                f"list-typed argument {print_term(term)} has an open tail")
        items, _ = list_parts(term)
        return mklist([self.elem.generalize(x, fresh) for x in items])

    def __repr__(self):
        return f"list({self.elem!r})"


@dataclass(frozen=True)
class StructOf(BindingType):
    """A fixed functor with per-argument types."""
    functor: str
    args: tuple              # of BindingType

    def admits(self, term):
        if isinstance(term, Const):
            return term.name == self.functor and not self.args
        return isinstance(term, Struct) and term.functor == self.functor \
            and len(term.args) == len(self.args) \
            and all(t.admits(a) for t, a in zip(self.args, term.args))

    def generalize(self, term, fresh):
        if not self.admits(term):
            raise PDError(
                f"{print_term(term)} does not fit struct "
                f"{self.functor}/{len(self.args)}")
        if isinstance(term, Const):
            return term
        return Struct(self.functor,
                      tuple(t.generalize(a, fresh)
                            for t, a in zip(self.args, term.args)))

    def __repr__(self):
        return f"struct({self.functor},{list(self.args)!r})"


@dataclass(frozen=True)
class OneOf(BindingType):
    """Alternatives tried in order; the first that admits the term wins."""
    alternatives: tuple

    def admits(self, term):
        return any(a.admits(term) for a in self.alternatives)

    def generalize(self, term, fresh):
        for a in self.alternatives:
            if a.admits(term):
                return a.generalize(term, fresh)
        raise PDError(
            f"{print_term(term)} fits no alternative of {self!r}")

    def __repr__(self):
        return " ; ".join(repr(a) for a in self.alternatives)


def generalize_call(atom: Atom, types, fresh: FreshNames) -> Atom:
    """The call pattern obtained by generalizing each argument."""
    if len(types) != len(atom.args):
        raise PDError(f"filter arity mismatch for {print_atom(atom)}")
    return Atom(atom.pred,
                tuple(t.generalize(a, fresh)
                      for t, a in zip(types, atom.args)))


# --- filter and annotation declarations ----------------------------------

@dataclass
class Filters:
    """Per-predicate argument binding types for memoized calls."""
    table: dict = field(default_factory=dict)   # (pred, arity) -> types

    def declare(self, pred, types):
        self.table[(pred, len(types))] = tuple(types)

    def for_atom(self, atom: Atom):
        types = self.table.get(atom.indicator)
        if types is None:
            raise PDError(
                f"no filter declared for memoized call {print_atom(atom)}")
        return types


@dataclass
class Annotations:
    """Per-predicate call treatment, with an optional default rule."""
    table: dict = field(default_factory=dict)   # (pred, arity) -> annotation
    builtins: BuiltinTable = None

    def of(self, atom: Atom) -> str:
        ann = self.table.get(atom.indicator)
        if ann is not None:
            return ann
        if self.builtins is not None and atom.indicator in self.builtins:
            return CALL
        return UNFOLD

    def declare(self, pred, arity, annotation):
        if annotation not in ANNOTATIONS:
            raise PDError(f"unknown annotation {annotation!r}")
        self.table[(pred, arity)] = annotation


def _parse_binding_type(lx):
    alts = [_parse_binding_primary(lx)]
    while lx.peek()[0] == ";":
        lx.next()
        alts.append(_parse_binding_primary(lx))
    if len(alts) == 1:
        return alts[0]
    return OneOf(tuple(alts))


def _parse_binding_primary(lx):
    kind, val, loc = lx.next()
    if kind != "name":
        raise ParseError(f"expected a binding type, got {val!r}", *loc)
    if val == "static":
        return Static()
    if val == "dynamic":
        return Dynamic()
    if val == "nonvar":
        return Nonvar()
    if val == "type":
        lx.expect("(")
        inner = _parse_binding_type(lx)
        lx.expect(")")
        return inner
    if val == "list":
        lx.expect("(")
        inner = _parse_binding_type(lx)
        lx.expect(")")
        return ListOf(inner)
    if val == "struct":
        lx.expect("(")
        fk, functor, floc = lx.next()
        if fk not in ("name", "."):
            raise ParseError(f"expected a functor name, got {functor!r}",
                             *floc)
        lx.expect(",")
        lx.expect("[")
        args = []
        if lx.peek()[0] != "]":
            args.append(_parse_binding_type(lx))
            while lx.peek()[0] == ",":
                lx.next()
                args.append(_parse_binding_type(lx))
        lx.expect("]")
        lx.expect(")")
        return StructOf(functor, tuple(args))
    raise ParseError(f"unknown binding type {val!r}", *loc)


def parse_filters(text: str) -> Filters:
    """Filter declarations, one ``pred(type, ...).`` per clause."""
    lx = _Lexer(text)
    filters = Filters()
    while lx.peek()[0] != "eof":
        kind, pred, loc = lx.next()
        if kind != "name":
            raise ParseError(f"expected a predicate name, got {pred!r}", *loc)
        lx.expect("(")
        types = [_parse_binding_type(lx)]
        while lx.peek()[0] == ",":
            lx.next()
            types.append(_parse_binding_type(lx))
        lx.expect(")")
        lx.expect(".")
        filters.declare(pred, types)
    return filters


def parse_annotations(text: str,
                      builtins: BuiltinTable = None) -> Annotations:
    """Annotation declarations, one ``ann(kind, pred/arity).`` per clause."""
    lx = _Lexer(text)
    ann = Annotations(builtins=builtins)
    while lx.peek()[0] != "eof":
        kind, val, loc = lx.next()
        if kind != "name" or val != "ann":
            raise ParseError(f"expected 'ann', got {val!r}", *loc)
        lx.expect("(")
        _, treatment, tloc = lx.expect("name")
        if treatment not in ANNOTATIONS:
            raise ParseError(f"unknown annotation {treatment!r}", *tloc)
        lx.expect(",")
        nkind, pred, nloc = lx.next()
        if nkind not in ("name", "=<"):
            raise ParseError(f"expected a predicate name, got {pred!r}",
                             *nloc)
        lx.expect("/")
        _, arity, _ = lx.expect("int")
        lx.expect(")")
        lx.expect(".")
        ann.declare(pred, arity, treatment)
    return ann


def load_filters(path) -> Filters:
    with open(path, encoding="utf-8") as f:
        return parse_filters(f.read())


def load_annotations(path, builtins: BuiltinTable = None) -> Annotations:
    with open(path, encoding="utf-8") as f:
        return parse_annotations(f.read(), builtins)


# --- specialization ------------------------------------------------------

@dataclass
class MemoEntry:
    name: str                # residual predicate name
    call: Atom               # the generalized call pattern


@dataclass
class ResidualProgram:
    program: Program
    entry_call: Atom         # residual call equivalent to the request
    memo: tuple              # of MemoEntry
    unfold_steps: int


def _variant_key(term, mapping):
    """A hashable key equal for terms that are variants of each other."""
    if isinstance(term, Var):
        if term not in mapping:
            mapping[term] = len(mapping)
        return ("v", mapping[term])
    if isinstance(term, Const):
        return ("c", term.name)
    if isinstance(term, (Struct, Atom)):
        functor = term.functor if isinstance(term, Struct) else term.pred
        return ("s", functor,
                tuple(_variant_key(a, mapping) for a in term.args))
    raise PDError(f"cannot key {term!r}")


def _atom_key(atom: Atom):
    return _variant_key(atom, {})


class _Specializer:
    def __init__(self, program, annotations, filters, budget, builtins):
        self.program = program
        self.annotations = annotations
        self.filters = filters
        self.budget = budget
        self.builtins = builtins or BuiltinTable()
        self.fresh = FreshNames()
        self.memo = []                    # of MemoEntry
        self.memo_index = {}              # variant key -> MemoEntry
        self.worklist = []
        self.clauses = []
        self.steps = 0
        self.names = set()

    def request(self, atom: Atom) -> Atom:
        """Memoize a call; returns the residual call replacing it."""
        types = self.filters.for_atom(atom)
        gatom = generalize_call(atom, types, self.fresh)
        key = _atom_key(gatom)
        entry = self.memo_index.get(key)
        if entry is None:
            entry = MemoEntry(self._name_for(gatom), gatom)
            self.memo.append(entry)
            self.memo_index[key] = entry
            self.worklist.append(entry)
        return Atom(entry.name, atom.args)

    def _name_for(self, gatom: Atom) -> str:
        last = gatom.args[-1] if gatom.args else None
        if isinstance(last, Const):
            base = f"{gatom.pred}__s{last.name}"
        else:
            base = f"{gatom.pred}__g{len(self.memo)}"
        name = base
        k = 1
        while name in self.names:
            name = f"{base}__{k}"
            k += 1
        self.names.add(name)
        return name

    def _tick(self):
        self.steps += 1
        if self.steps > self.budget:
            raise PDError(f"unfold budget exceeded ({self.budget} steps)")

    def run(self):
        while self.worklist:
            entry = self.worklist.pop(0)
            self._define(entry)
        self._copy_support()

    def _define(self, entry: MemoEntry):
        """Unfold the memoized pattern into residual clauses."""
        gatom = entry.call
        clauses = self.program.clauses_for(gatom.pred, len(gatom.args))
        if not clauses:
            raise PDError(
                f"memoized predicate {gatom.pred}/{len(gatom.args)} has no "
                "clauses")
        stack = []
        for clause in reversed(clauses):
            rc = rename_apart(clause, self.fresh)
            mgu = unify(gatom, rc.head)
            if mgu is None:
                continue
            self._tick()
            stack.append((mgu.apply(rc.body), mgu.apply(gatom.args), ()))
        out = []
        while stack:
            goal, hargs, resid = stack.pop()
            if not goal:
                out.append((Atom(entry.name, hargs), resid))
                continue
            atom, rest = goal[0], goal[1:]
            ann = self.annotations.of(atom)
            if ann == MEMO:
                stack.append((rest, hargs, resid + (self.request(atom),)))
            elif ann == RESCALL:
                stack.append((rest, hargs, resid + (self._unwrap(atom),)))
            elif ann == CALL:
                if atom.indicator not in self.builtins:
                    raise PDError(
                        f"call annotation on non-builtin {print_atom(atom)}")
                self._tick()
                try:
                    outs = self.builtins.evaluate(atom)
                except ModeError as e:
                    raise PDError(
                        f"builtin {print_atom(atom)} is insufficiently "
                        f"instantiated at specialization time: {e}") from None
                for sub in reversed(outs):
                    stack.append((sub.apply(rest), sub.apply(hargs),
                                  sub.apply(resid)))
            else:                        # unfold
                alternatives = []
                defining = self.program.clauses_for(atom.pred, len(atom.args))
                if not defining and atom.indicator not in \
                        self.program.predicates:
                    raise PDError(
                        f"cannot unfold unknown predicate "
                        f"{atom.pred}/{len(atom.args)}")
                for clause in defining:
                    rc = rename_apart(clause, self.fresh)
                    mgu = unify(atom, rc.head)
                    if mgu is None:
                        continue
                    self._tick()
                    alternatives.append((mgu.apply(rc.body + rest),
                                         mgu.apply(hargs), mgu.apply(resid)))
                stack.extend(reversed(alternatives))
        for head, body in out:
            self.clauses.append((head, body))

    @staticmethod
    def _unwrap(atom: Atom) -> Atom:
        """A residualized ``call/1`` whose argument is already a structure
        becomes the argument itself."""
        if atom.pred == "call" and len(atom.args) == 1:
            inner = atom.args[0]
            if isinstance(inner, Struct):
                return Atom(inner.functor, inner.args)
            if isinstance(inner, Const) and isinstance(inner.name, str):
                return Atom(inner.name)
        return atom

    def _copy_support(self):
        """Copy rescalled source predicates the residual clauses still use."""
        needed = []
        seen = set(self.names)
        for _, body in self.clauses:
            for a in body:
                if a.indicator not in self.builtins and \
                        a.pred not in seen and \
                        self.program.clauses_for(a.pred, len(a.args)):
                    seen.add(a.pred)
                    needed.append(a.indicator)
        while needed:
            pred, arity = needed.pop(0)
            for clause in self.program.clauses_for(pred, arity):
                self.clauses.append((clause.head, clause.body))
                for a in clause.body:
                    if a.indicator not in self.builtins and \
                            a.pred not in seen and \
                            self.program.clauses_for(a.pred, len(a.args)):
                        seen.add(a.pred)
                        needed.append(a.indicator)

    def program_out(self) -> Program:
        from .terms import Clause
        return Program(tuple(Clause(h, b, i + 1)
                             for i, (h, b) in enumerate(self.clauses)))


def specialize(program: Program, entry: Atom, annotations: Annotations,
               filters: Filters, budget: int = DEFAULT_BUDGET,
               builtins: BuiltinTable = None) -> ResidualProgram:
    """Specialize ``program`` with respect to the partially known ``entry``.

    The entry call is memoized first; specialization proceeds until the
    memo table is closed, so every residual call is defined.
    """
    sp = _Specializer(program, annotations, filters, budget, builtins)
    entry_call = sp.request(entry)
    sp.run()
    return ResidualProgram(sp.program_out(), entry_call, tuple(sp.memo),
                           sp.steps)


def check_closedness(residual: ResidualProgram,
                     builtins: BuiltinTable = None):
    """Every residual body atom must be defined, builtin, or callable.

    Returns (ok, offending indicators).
    """
    builtins = builtins or BuiltinTable()
    missing = []
    for clause in residual.program.clauses:
        for a in clause.body:
            if a.pred == "call" and len(a.args) == 1:
                continue
            if a.indicator in builtins:
                continue
            if residual.program.clauses_for(a.pred, len(a.args)):
                continue
            if a.indicator not in missing:
                missing.append(a.indicator)
    return not missing, missing


# --- the interpreter as the specialized program --------------------------

def interpreter_annotations(builtins: BuiltinTable = None) -> Annotations:
    """Treatment of the table-driven interpreter's own predicates: the
    interpretation layer is unfolded away, the interpreted steps stay."""
    ann = Annotations(builtins=builtins or BuiltinTable())
    ann.declare("mi", 2, MEMO)
    ann.declare("call", 1, RESCALL)
    ann.declare("bb_append", 3, RESCALL)
    return ann


def interpreter_filters(variant: str = "simple") -> Filters:
    """Binding types of the interpreter's goal list: the atom skeletons
    are known, their arguments are not; the state is fully known."""
    plain = Nonvar()
    if variant == "extended":
        block = StructOf("building_block", (ListOf(Nonvar()),))
        wrapped = StructOf("cmulti", (StructOf(CONS, (block, Dynamic())),))
        elem = OneOf((wrapped, plain))
    elif variant == "simple":
        elem = plain
    else:
        raise PDError(f"unknown variant {variant!r}")
    filters = Filters()
    filters.declare("mi", (ListOf(elem), Static()))
    return filters


def interpreter_filter_text(variant: str = "simple") -> str:
    """The default filters in their declaration syntax."""
    if variant == "extended":
        elem = ("struct(cmulti,[struct(.,[struct(building_block,"
                "[type(list(nonvar))]),dynamic])]) ; nonvar")
    else:
        elem = "nonvar"
    return f"mi(type(list({elem})), static).\n"


def interpreter_annotation_text() -> str:
    """The default annotations in their declaration syntax."""
    return ("ann(memo, mi/2).\n"
            "ann(rescall, call/1).\n"
            "ann(rescall, bb_append/3).\n")


def specialize_encoded(tables, variant: str = "simple",
                       budget: int = DEFAULT_BUDGET,
                       builtins: BuiltinTable = None,
                       annotations: Annotations = None,
                       filters: Filters = None) -> ResidualProgram:
    """First projection: specialize the encoded interpreter with respect
    to its control tables and the entry goal's shape.

    The result contains a ``compute/1`` wrapper, so it is run exactly like
    the encoded program it replaces.
    """
    from .metaint import encode_as_logic_program
    from .terms import Clause
    encoded = encode_as_logic_program(tables, variant)
    entry_aatom = tables.state_conjs[tables.entry][0]
    fresh = FreshNames()
    skeleton = Struct(entry_aatom.pred,
                      tuple(fresh.var() for _ in entry_aatom.args))
    entry = Atom("mi", (mklist([skeleton]), Const(tables.entry)))
    annotations = annotations or interpreter_annotations(builtins)
    filters = filters or interpreter_filters(variant)
    residual = specialize(encoded, entry, annotations, filters, budget,
                          builtins)
    gs = Var("Gs")
    wrapper = Clause(Atom("compute", (gs,)),
                     (Atom(residual.entry_call.pred,
                           (gs, Const(tables.entry))),),
                     len(residual.program.clauses) + 1)
    return ResidualProgram(Program(residual.program.clauses + (wrapper,)),
                           residual.entry_call, residual.memo,
                           residual.unfold_steps)
