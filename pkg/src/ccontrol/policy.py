"""Instantiation-based selection rules.

A selection policy is given as data: a generating set of ordering pairs
over abstract-atom equivalence classes, declarations of fully evaluated
atoms with their output bindings, and optional quantified rule templates
over named atom sets.  The strict partial order used for atom selection is
derived from these by closing under instantiation and transitivity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .absdom import (AAtom, ASub, AVar, FULLEVAL, LogicError, UNFOLD,
                     abstract_instance, avars, canonicalize, equivalent,
                     print_aatom, strict_instance, _conv)
from .terms import ParseError, _Parser


class PolicyError(LogicError):
    pass


class NoMinimumError(PolicyError):
    """A conjunction has no selectable atom under the derived order."""


@dataclass(frozen=True)
class FullEvalDecl:
    """A fully evaluated abstract atom: call pattern, the possible output
    bindings over the pattern's variables, and the linked procedure."""
    pattern: AAtom
    outputs: tuple           # of ASub
    link: tuple              # (predicate, arity)
    link_is_builtin: bool


@dataclass(frozen=True)
class RuleTemplate:
    kind: str                # "never_before" | "instances_first"
    target: AAtom | None     # for never_before
    set_name: str


@dataclass
class SelectionPolicy:
    entry: AAtom
    preprior: tuple = ()         # of (AAtom, AAtom) pairs, renamed apart
    sets: dict = field(default_factory=dict)    # name -> tuple of AAtom
    rules: tuple = ()            # of RuleTemplate
    fulleval: tuple = ()         # of FullEvalDecl

    def fulleval_match(self, a: AAtom):
        """The first declaration whose pattern covers ``a``, if any."""
        for decl in self.fulleval:
            if a.indicator == decl.pattern.indicator and \
                    abstract_instance(a.unmarked(), decl.pattern) is not None:
                return decl
        return None


# --- parsing -------------------------------------------------------------

def parse_policy(text: str) -> SelectionPolicy:
    parser = _Parser(text)
    lx = parser.lx
    entry = None
    preprior = []
    sets = {}
    rules = []
    fulleval = []

    def aatom():
        from .absdom import aatom_from_atom
        return aatom_from_atom(parser.parse_atom())

    def set_name():
        kind, val, loc = lx.next()
        if kind not in ("name", "var"):
            raise ParseError(f"expected a set name, got {val!r}", *loc)
        return val

    while lx.peek()[0] != "eof":
        kind, val, loc = lx.next()
        if kind != "name":
            raise ParseError(f"expected a policy keyword, got {val!r}", *loc)
        if val == "entry":
            lx.expect(":")
            entry = aatom()
        elif val == "preprior":
            lx.expect(":")
            lhs = aatom()
            lx.expect("<")
            rhs = aatom()
            preprior.append((lhs, rhs))
        elif val == "set":
            name = set_name()
            lx.expect("=")
            lx.expect("{")
            members = [aatom()]
            while lx.peek()[0] == ",":
                lx.next()
                members.append(aatom())
            lx.expect("}")
            sets[name] = tuple(members)
        elif val == "rule":
            lx.expect(":")
            _, rkind, rloc = lx.expect("name")
            if rkind == "never_before":
                lx.expect("(")
                target = aatom()
                lx.expect(")")
                _, over, oloc = lx.expect("name")
                if over != "over":
                    raise ParseError("expected 'over'", *oloc)
                rules.append(RuleTemplate("never_before", target,
                                          set_name()))
            elif rkind == "instances_first":
                lx.expect("(")
                rules.append(RuleTemplate("instances_first", None,
                                          set_name()))
                lx.expect(")")
            else:
                raise ParseError(f"unknown rule {rkind!r}", *rloc)
        elif val == "fulleval":
            lx.expect(":")
            pattern = aatom()
            lx.expect("->")
            outputs = [_parse_output(parser, pattern)]
            while lx.peek()[0] == ";":
                lx.next()
                outputs.append(_parse_output(parser, pattern))
            _, via, vloc = lx.expect("name")
            if via != "via":
                raise ParseError("expected 'via'", *vloc)
            _, linkkind, kloc = lx.expect("name")
            if linkkind not in ("builtin", "user"):
                raise ParseError("expected 'builtin' or 'user'", *kloc)
            nkind, pname, nloc = lx.next()
            if nkind not in ("name", "=<"):
                raise ParseError(f"expected a predicate name, got {pname!r}",
                                 *nloc)
            lx.expect("/")
            _, arity, _ = lx.expect("int")
            fulleval.append(FullEvalDecl(pattern, tuple(outputs),
                                         (pname, arity),
                                         linkkind == "builtin"))
        else:
            raise ParseError(f"unknown policy keyword {val!r}", *loc)
        lx.expect(".")

    if entry is None:
        raise PolicyError("policy declares no entry goal")
    for rule in rules:
        if rule.set_name not in sets:
            raise PolicyError(f"rule references unknown set {rule.set_name}")
    return SelectionPolicy(entry, tuple(preprior), sets, tuple(rules),
                           tuple(fulleval))


def _parse_output(parser, pattern: AAtom) -> ASub:
    lx = parser.lx
    lx.expect("{")
    pairs = {}
    pattern_vars = set(avars(pattern))
    while lx.peek()[0] != "}":
        lhs = _conv(parser.parse_term())
        if not isinstance(lhs, AVar):
            raise PolicyError(f"output binds non-variable {lhs!r}")
        if lhs not in pattern_vars:
            raise PolicyError(
                f"output binds {lhs}, which is not in {print_aatom(pattern)}")
        lx.expect("=")
        pairs[lhs] = _conv(parser.parse_term())
        if lx.peek()[0] == ",":
            lx.next()
    lx.expect("}")
    return ASub(pairs)


def load_policy(path) -> SelectionPolicy:
    with open(path, encoding="utf-8") as f:
        return parse_policy(f.read())


# --- the derived order ---------------------------------------------------

class DerivedOrder:
    """Strict partial order over the equivalence classes of a finite atom
    set, generated from a policy and closed under transitivity."""

    def __init__(self, classes, less):
        self.classes = classes          # canonical unmarked atoms
        self.less = less                # set of (i, j) index pairs

    def index_of(self, a: AAtom):
        key = canonicalize(a.unmarked())
        for i, c in enumerate(self.classes):
            if c == key:
                return i
        return None

    def lt(self, x: AAtom, y: AAtom) -> bool:
        i, j = self.index_of(x), self.index_of(y)
        return i is not None and j is not None and (i, j) in self.less


def derive_order(policy: SelectionPolicy, atoms) -> DerivedOrder:
    """The selection order over the given atoms' equivalence classes.

    Generated from: explicit preprior pairs; the instantiation rule (a
    strict instance precedes what it instantiates); fulleval priority
    (atoms covered by a fulleval declaration precede all others); and the
    quantified rule templates.  Closed under transitivity and checked for
    irreflexivity.
    """
    classes = []
    reps = []
    mentioned = [a for pair in policy.preprior for a in pair]
    mentioned += [r.target for r in policy.rules if r.target is not None]
    for members in policy.sets.values():
        mentioned += list(members)
    for a in list(atoms) + mentioned:
        key = canonicalize(a.unmarked())
        if key not in classes:
            classes.append(key)
            reps.append(a.unmarked())
    n = len(classes)
    less = set()

    def matches_set(a, name):
        return any(equivalent(a, m) for m in policy.sets[name])

    def instance_of_set(a, name):
        return any(strict_instance(a, m) for m in policy.sets[name])

    fe = [policy.fulleval_match(r) is not None for r in reps]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            x, y = reps[i], reps[j]
            for p, q in policy.preprior:
                if equivalent(x, p) and equivalent(y, q):
                    less.add((i, j))
            if strict_instance(x, y):
                less.add((i, j))
            if fe[i] and not fe[j]:
                less.add((i, j))
            for rule in policy.rules:
                if rule.kind == "instances_first" and \
                        instance_of_set(x, rule.set_name) and \
                        matches_set(y, rule.set_name):
                    less.add((i, j))
    for rule in policy.rules:
        if rule.kind == "never_before":
            for i in range(n):
                for j in range(n):
                    if (i, j) in less and matches_set(reps[i], rule.set_name) \
                            and equivalent(reps[j], rule.target):
                        less.discard((i, j))
    # transitive closure
    changed = True
    while changed:
        changed = False
        for i, j in list(less):
            for j2, k in list(less):
                if j2 == j and (i, k) not in less and i != k:
                    less.add((i, k))
                    changed = True
                elif j2 == j and i == k:
                    raise PolicyError(
                        "selection order is cyclic: "
                        f"{print_aatom(reps[i])} < {print_aatom(reps[j])} "
                        f"< {print_aatom(reps[i])}")
    for i in range(n):
        if (i, i) in less:
            raise PolicyError(
                f"selection order is reflexive at {print_aatom(reps[i])}")
    return DerivedOrder(classes, less)


# --- selection -----------------------------------------------------------

def _effective_atoms(conj):
    """Positions and atoms to rank: plain atoms stand for themselves, a
    multi contributes the atoms of its virtual first instance."""
    out = []
    for pos, c in enumerate(conj):
        if isinstance(c, AAtom):
            out.append((pos, c))
        else:
            for a in c.virtual_first_instance():
                out.append((pos, a))
    return out


def select_conjunct(policy: SelectionPolicy, conj):
    """Selection over a conjunction that may contain multi abstractions.

    Returns (position, mark): mark is FULLEVAL or UNFOLD for a plain atom,
    or "split" when the selected atom is a virtual multi instance (the
    caller must case-split the multi at that position first).
    """
    eff = _effective_atoms(conj)
    if not eff:
        raise PolicyError("cannot select from an empty conjunction")
    # fulleval priority is absolute; ties are broken left-to-right
    for pos, a in eff:
        if policy.fulleval_match(a) is not None:
            if isinstance(conj[pos], AAtom):
                return pos, FULLEVAL
            return pos, "split"
    order = derive_order(policy, [a for _, a in eff])
    present = []
    for _, a in eff:
        key = canonicalize(a.unmarked())
        if key not in present:
            present.append(key)
    idx = {c: i for i, c in enumerate(order.classes)}
    winners = []
    for ci in present:
        i = idx[ci]
        if all(cj == ci or (i, idx[cj]) in order.less for cj in present):
            winners.append(ci)
    if not winners:
        raise NoMinimumError(
            "no minimal atom in " +
            " , ".join(print_aatom(a) for _, a in eff))
    target = winners[0]
    for pos, a in eff:
        if canonicalize(a.unmarked()) == target:
            if isinstance(conj[pos], AAtom):
                return pos, UNFOLD
            return pos, "split"
    raise PolicyError("internal selection failure")  # pragma: no cover


def select_atom(policy: SelectionPolicy, conj):
    """Selection restricted to plain-atom conjunctions.

    Returns (index, atom, mark) with mark FULLEVAL or UNFOLD.
    """
    pos, mark = select_conjunct(policy, conj)
    if mark == "split":
        raise PolicyError("selected a multi instance; case-split first")
    return pos, conj[pos], mark


def is_complete(policy: SelectionPolicy, states):
    """Check every state has a selectable minimum; returns (ok, witness)."""
    for state in states:
        try:
            select_conjunct(policy, state)
        except NoMinimumError:
            return False, state
    return True, None
