"""Finite representation of unboundedly many repetitions of a pattern.

A multi abstraction stands for every conjunction of n >= 1 instances of a
conjunctive pattern: ``init`` constraints tie the first instance to the
surrounding conjunction, ``consecutive`` constraints chain neighbouring
instances, and ``final`` constraints tie the last instance to the outside.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .absdom import (AAtom, ANY, ASub, AVar, AbsConst, AbsStruct,
                     AbstractDomainError, FreshAVars, GROUND, MVar,
                     MixedUnifier, aatom_from_atom, abstract_instance,
                     canonicalize, print_aatom, print_aterm, _conv)
from .terms import Atom, Const, ParseError, Struct, Var


def _sorted_pairs(d):
    return tuple(sorted(d.items(), key=lambda kv: (kv[0].kind, kv[0].local)))


@dataclass(frozen=True)
class Multi:
    id: int
    pattern: tuple       # of AAtom over MVars and constants
    init: tuple          # of (MVar, ATerm over outer variables)
    consecutive: tuple   # of (MVar, MVar): slot i+1 var = slot i var
    final: tuple         # of (MVar, ATerm over outer variables)

    @property
    def init_map(self):
        return dict(self.init)

    @property
    def cons_map(self):
        return dict(self.consecutive)

    @property
    def final_map(self):
        return dict(self.final)

    @property
    def plen(self):
        return len(self.pattern)

    def pattern_vars(self) -> list:
        seen = []

        def walk(t):
            if isinstance(t, MVar):
                if t not in seen:
                    seen.append(t)
            elif isinstance(t, AbsStruct):
                for a in t.args:
                    walk(a)
        for a in self.pattern:
            for t in a.args:
                walk(t)
        return seen

    def outer_terms(self) -> list:
        return [t for _, t in self.init] + [t for _, t in self.final]

    def apply_outer(self, sub: ASub) -> "Multi":
        return Multi(self.id, self.pattern,
                     tuple((v, sub.apply(t)) for v, t in self.init),
                     self.consecutive,
                     tuple((v, sub.apply(t)) for v, t in self.final))

    def renumber(self, walk, new_id: int) -> "Multi":
        counters = {ANY: 0, GROUND: 0}
        mapping = {}

        def mwalk(t):
            if isinstance(t, MVar):
                if t not in mapping:
                    counters[t.kind] += 1
                    mapping[t] = MVar(t.kind, counters[t.kind])
                return mapping[t]
            if isinstance(t, AbsStruct):
                return AbsStruct(t.functor, tuple(mwalk(a) for a in t.args))
            return t

        pattern = tuple(AAtom(a.pred, tuple(mwalk(t) for t in a.args), a.mark)
                        for a in self.pattern)
        init = {mwalk(v): walk(t) for v, t in self.init}
        cons = {mwalk(v): mwalk(w) for v, w in self.consecutive}
        final = {mwalk(v): walk(t) for v, t in self.final}
        return Multi(new_id, pattern, _sorted_pairs(init),
                     _sorted_pairs(cons), _sorted_pairs(final))

    def instantiate(self, mapping) -> tuple:
        """Pattern with MVars replaced per ``mapping`` (MVar -> ATerm)."""
        def walk(t):
            if isinstance(t, MVar):
                return mapping[t]
            if isinstance(t, AbsStruct):
                return AbsStruct(t.functor, tuple(walk(a) for a in t.args))
            return t
        return tuple(AAtom(a.pred, tuple(walk(t) for t in a.args))
                     for a in self.pattern)

    def virtual_first_instance(self) -> tuple:
        """First represented pattern instance, with throwaway variables
        (negative indices) for unconstrained positions; used only to decide
        whether an instance of the multi would be selected."""
        init = self.init_map
        mapping = {}
        for i, v in enumerate(self.pattern_vars()):
            mapping[v] = init.get(v, AVar(v.kind, -(i + 1)))
        return self.instantiate(mapping)

    def __repr__(self):
        return print_multi(self)


def print_multi(m: Multi) -> str:
    patt = " , ".join(print_aatom(a) for a in m.pattern)

    def pv(v):
        return f"m{v.kind}{v.local}"

    init = ",".join(f"{pv(v)}={print_aterm(t)}" for v, t in m.init)
    cons = ",".join(f"{pv(v)}={pv(w)}" for v, w in m.consecutive)
    final = ",".join(f"{pv(v)}={print_aterm(t)}" for v, t in m.final)
    return (f"multi(({patt}), init{{{init}}}, consec{{{cons}}}, "
            f"final{{{final}}}, id={m.id})")


# --- parsing -------------------------------------------------------------

def _as_mvar(name):
    if (isinstance(name, str) and len(name) >= 3 and name[0] == "m"
            and name[1] in (ANY, GROUND) and name[2:].isdigit()):
        return MVar(name[1], int(name[2:]))
    return None


def _mvarify(t):
    """Turn mg1/ma2-named constants (from the generic term parser) into
    pattern variables."""
    if isinstance(t, AbsConst):
        mv = _as_mvar(t.name)
        return mv if mv is not None else t
    if isinstance(t, AbsStruct):
        return AbsStruct(t.functor, tuple(_mvarify(a) for a in t.args))
    return t


def parse_conjunct(parser):
    """One conjunct inside an abstract conjunction: atom or multi form."""
    kind, val, _ = parser.lx.peek()
    if kind == "name" and val == "multi":
        nxt = parser.lx.tokens[parser.lx.i + 1: parser.lx.i + 2]
        if nxt and nxt[0][0] == "(":
            return _parse_multi(parser)
    a = aatom_from_atom(parser.parse_atom())
    return AAtom(a.pred, tuple(_mvarify(t) for t in a.args), a.mark)


def _parse_multi(parser) -> Multi:
    lx = parser.lx
    lx.expect("name")   # multi
    lx.expect("(")
    lx.expect("(")
    pattern = []
    while True:
        a = aatom_from_atom(parser.parse_atom())
        pattern.append(AAtom(a.pred, tuple(_mvarify(t) for t in a.args)))
        if lx.peek()[0] != ",":
            break
        lx.next()
    lx.expect(")")
    lx.expect(",")

    def constraints(header, rhs_is_mvar=False):
        k, v, loc = lx.next()
        if k != "name" or v != header:
            raise ParseError(f"expected {header!r}", *loc)
        lx.expect("{")
        out = {}
        while lx.peek()[0] != "}":
            _, name, loc2 = lx.expect("name")
            lhs = _as_mvar(name)
            if lhs is None:
                raise ParseError(f"expected pattern variable, got {name!r}",
                                 *loc2)
            lx.expect("=")
            if rhs_is_mvar:
                _, name2, loc3 = lx.expect("name")
                rhs = _as_mvar(name2)
                if rhs is None:
                    raise ParseError(
                        f"expected pattern variable, got {name2!r}", *loc3)
            else:
                rhs = _conv(parser.parse_term())
            out[lhs] = rhs
            if lx.peek()[0] == ",":
                lx.next()
        lx.expect("}")
        return _sorted_pairs(out)

    init = constraints("init")
    lx.expect(",")
    cons = constraints("consec", rhs_is_mvar=True)
    lx.expect(",")
    final = constraints("final")
    lx.expect(",")
    _, v, loc = lx.expect("name")
    if v != "id":
        raise ParseError("expected id=N", *loc)
    lx.expect("=")
    _, n, _ = lx.expect("int")
    lx.expect(")")
    return Multi(n, tuple(pattern), init, cons, final)


# --- case split ----------------------------------------------------------

def case_split(m: Multi, fresh: FreshAVars):
    """Split a multi into its one-occurrence and many-occurrences readings.

    Returns (one, one_sub, (head_instance, rest_multi)).  ``one`` is the
    pattern under init and final simultaneously; when a variable carries
    both constraints with different outer values, those values are unified
    abstractly and ``one_sub`` carries the induced aliasing for the rest of
    the conjunction.  The many case extracts the first instance under init
    and leaves a residual multi whose init follows the consecutive
    constraints.
    """
    init, final = m.init_map, m.final_map
    clashes = [v for v in m.pattern_vars()
               if v in init and v in final and init[v] != final[v]]
    one_sub = ASub()
    if clashes:
        mu = MixedUnifier(fresh)
        if not mu.unify_same_side(tuple(init[v] for v in clashes),
                                  tuple(final[v] for v in clashes)):
            raise AbstractDomainError(
                f"irreconcilable init/final constraints in {m}")
        one_sub = mu.theta_x()
    one_map = {}
    for v in m.pattern_vars():
        if v in init:
            one_map[v] = one_sub.apply(init[v])
        elif v in final:
            one_map[v] = one_sub.apply(final[v])
        else:
            one_map[v] = fresh.var(v.kind)
    one = m.instantiate(one_map)

    head_map = {}
    for v in m.pattern_vars():
        head_map[v] = init[v] if v in init else fresh.var(v.kind)
    head = m.instantiate(head_map)
    new_init = {v: head_map[w] for v, w in m.consecutive}
    rest = Multi(m.id, m.pattern, _sorted_pairs(new_init),
                 m.consecutive, m.final)
    return one, one_sub, (head, rest)


# --- concretization membership -------------------------------------------

def _ground_concrete(t) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Const):
        return True
    return all(_ground_concrete(a) for a in t.args)


def _match_term(ct, at, slot, binding) -> bool:
    """Match a concrete term against an abstract one; MVars are keyed per
    instance ``slot`` so separate instances bind independently."""
    if isinstance(at, MVar):
        at = (slot, at)
    if isinstance(at, tuple):
        if at[1].kind == GROUND and not _ground_concrete(ct):
            return False
        if at in binding:
            return binding[at] == ct
        binding[at] = ct
        return True
    if isinstance(at, AVar):
        if at.kind == GROUND and not _ground_concrete(ct):
            return False
        if at in binding:
            return binding[at] == ct
        binding[at] = ct
        return True
    if isinstance(at, AbsConst):
        return isinstance(ct, Const) and ct.name == at.name
    if isinstance(at, AbsStruct):
        return (isinstance(ct, Struct) and ct.functor == at.functor
                and len(ct.args) == len(at.args)
                and all(_match_term(c, a, slot, binding)
                        for c, a in zip(ct.args, at.args)))
    raise AbstractDomainError(f"not an abstract term: {at!r}")


def _match_atom(ca: Atom, aa: AAtom, slot, binding) -> bool:
    return (ca.indicator == aa.indicator
            and all(_match_term(c, a, slot, binding)
                    for c, a in zip(ca.args, aa.args)))


def multi_member(atoms, m: Multi, binding=None, slot_base=0) -> bool:
    """True iff ``atoms`` splits into n >= 1 instances of the pattern
    satisfying init, consecutive and final under a consistent assignment."""
    if binding is None:
        binding = {}
    if len(atoms) == 0 or len(atoms) % m.plen != 0:
        return False
    n = len(atoms) // m.plen
    trial = dict(binding)
    for j in range(1, n + 1):
        block = atoms[(j - 1) * m.plen: j * m.plen]
        for ca, aa in zip(block, m.pattern):
            if not _match_atom(ca, aa, (slot_base, j, m.id), trial):
                return False
    for v, t in m.init:
        key = ((slot_base, 1, m.id), v)
        if key not in trial or not _match_term(trial[key], t, None, trial):
            return False
    for j in range(1, n):
        for v, w in m.consecutive:
            kv = ((slot_base, j + 1, m.id), v)
            kw = ((slot_base, j, m.id), w)
            if kv not in trial or kw not in trial or trial[kv] != trial[kw]:
                return False
    for v, t in m.final:
        key = ((slot_base, n, m.id), v)
        if key not in trial or not _match_term(trial[key], t, None, trial):
            return False
    binding.clear()
    binding.update(trial)
    return True


def conj_member(concrete_atoms, conj, binding=None) -> bool:
    """Membership of a concrete conjunction in an abstract one that may
    contain multi abstractions (each absorbing a variable number of
    concrete atoms)."""
    if binding is None:
        binding = {}
    concrete_atoms = tuple(concrete_atoms)
    conj = tuple(conj)

    def go(ci, ai, bnd):
        if ai == len(conj):
            return bnd if ci == len(concrete_atoms) else None
        c = conj[ai]
        if isinstance(c, AAtom):
            if ci >= len(concrete_atoms):
                return None
            trial = dict(bnd)
            if _match_atom(concrete_atoms[ci], c, None, trial):
                return go(ci + 1, ai + 1, trial)
            return None
        maxn = (len(concrete_atoms) - ci) // c.plen
        for n in range(1, maxn + 1):
            trial = dict(bnd)
            chunk = concrete_atoms[ci: ci + n * c.plen]
            if multi_member(chunk, c, trial, slot_base=ai):
                res = go(ci + n * c.plen, ai + 1, trial)
                if res is not None:
                    return res
        return None

    res = go(0, 0, dict(binding))
    if res is None:
        return False
    binding.clear()
    binding.update(res)
    return True


# --- generalization into a multi ----------------------------------------

@dataclass(frozen=True)
class FoldEvent:
    """One grouping step over a conjunction.

    ``start`` is the first folded conjunct position, ``plen`` the pattern
    length; ``kind`` says whether a fresh multi was formed from two blocks
    ("new") or an atom block was absorbed by an existing multi on its
    init side ("left") or final side ("right").
    """
    start: int
    plen: int
    kind: str


def _avar_occurrences(x, acc=None) -> list:
    if acc is None:
        acc = []
    if isinstance(x, AVar):
        acc.append(x)
    elif isinstance(x, (AbsStruct, AAtom)):
        for a in x.args:
            _avar_occurrences(a, acc)
    elif isinstance(x, Multi):
        for t in x.outer_terms():
            _avar_occurrences(t, acc)
    elif isinstance(x, (tuple, list)):
        for item in x:
            _avar_occurrences(item, acc)
    return acc


def _occurrences_outside(conj, span) -> dict:
    counts = {}
    for i, c in enumerate(conj):
        if i in span:
            continue
        for v in _avar_occurrences(c):
            counts[v] = counts.get(v, 0) + 1
    return counts


def _block_binding(block, pattern):
    """Match a block of atoms against a pattern; the correspondence must
    map pattern variables bijectively onto plain variables."""
    if len(block) != len(pattern):
        return None
    sub = abstract_instance(tuple(block), tuple(pattern))
    if sub is None:
        return None
    mapping = {}
    for v, t in sub.pairs.items():
        if not isinstance(t, AVar):
            return None
        mapping[v] = t
    if len(set(mapping.values())) != len(mapping):
        return None
    return mapping


def _pattern_of(block):
    """Abstract a block of atoms into a pattern, one MVar per variable."""
    mapping = {}
    counters = {ANY: 0, GROUND: 0}

    def walk(t):
        if isinstance(t, AVar):
            if t not in mapping:
                counters[t.kind] += 1
                mapping[t] = MVar(t.kind, counters[t.kind])
            return mapping[t]
        if isinstance(t, AbsStruct):
            return AbsStruct(t.functor, tuple(walk(a) for a in t.args))
        return t

    pattern = tuple(AAtom(a.pred, tuple(walk(t) for t in a.args))
                    for a in block)
    slot_map = {mv: av for av, mv in mapping.items()}
    return pattern, slot_map


def try_fold(conj, next_multi_id, max_plen: int = 3):
    """One generalization step: fold a repeated chained pattern, or an atom
    block adjacent to a compatible multi, into a multi abstraction.

    Returns (new_conj, FoldEvent) or None when no fold applies.  Folds are
    concretization-increasing by construction; a candidate that would drop
    aliasing shared with the rest of the conjunction is rejected instead.
    """
    conj = tuple(conj)
    for i, c in enumerate(conj):
        if isinstance(c, Multi):
            res = _fold_adjacent(conj, i, c)
            if res is not None:
                return res
    for plen in range(1, max_plen + 1):
        for i in range(0, len(conj) - 2 * plen + 1):
            window = conj[i: i + 2 * plen]
            if not all(isinstance(x, AAtom) for x in window):
                continue
            res = _fold_new(conj, i, plen, next_multi_id)
            if res is not None:
                return res
    return None


def _fold_new(conj, start, plen, next_multi_id):
    block1 = tuple(a.unmarked() for a in conj[start: start + plen])
    block2 = tuple(a.unmarked()
                   for a in conj[start + plen: start + 2 * plen])
    if canonicalize(block1) != canonicalize(block2):
        return None
    pattern, slot1 = _pattern_of(block1)
    slot2 = _block_binding(block2, pattern)
    if slot2 is None:
        return None
    inv1 = {av: v for v, av in slot1.items()}
    cons = {}
    links = set()
    for v, av in slot2.items():
        if av in inv1:
            cons[v] = inv1[av]
            links.add(av)
    if not cons:
        return None  # no aliasing between the blocks: not a chain
    init = {v: slot1[v] for v in cons}
    final = {w: slot2[w] for w in set(cons.values())}
    endpoints = set(init.values()) | set(final.values())
    span = set(range(start, start + 2 * plen))
    outside = _occurrences_outside(conj, span)
    for av in links:
        if outside.get(av, 0) > 0 and av not in endpoints:
            return None  # internal chain variable leaks out of the fold
    m = Multi(next_multi_id, pattern, _sorted_pairs(init),
              _sorted_pairs(cons), _sorted_pairs(final))
    new_conj = conj[:start] + (m,) + conj[start + 2 * plen:]
    return new_conj, FoldEvent(start, plen, "new")


def _fold_adjacent(conj, mi, m: Multi):
    if not m.cons_map:
        return None
    if mi + 1 < len(conj) and isinstance(conj[mi + 1], Multi):
        res = _fold_merge(conj, mi, m, conj[mi + 1])
        if res is not None:
            return res
    if mi - m.plen >= 0:
        block = tuple(a.unmarked() for a in conj[mi - m.plen: mi]
                      if isinstance(a, AAtom))
        if len(block) == m.plen:
            bmap = _block_binding(block, m.pattern)
            if bmap is not None:
                res = _fold_left(conj, mi, m, bmap)
                if res is not None:
                    return res
    if mi + m.plen < len(conj) + 1:
        block = tuple(a.unmarked() for a in conj[mi + 1: mi + 1 + m.plen]
                      if isinstance(a, AAtom))
        if len(block) == m.plen:
            bmap = _block_binding(block, m.pattern)
            if bmap is not None:
                res = _fold_right(conj, mi, m, bmap)
                if res is not None:
                    return res
    return None


def _fold_merge(conj, mi, m1: Multi, m2: Multi):
    """Merge two adjacent multis whose chains connect directly: the second
    continues the first's pattern, its init fed by the first's final."""
    if m1.pattern != m2.pattern or m1.consecutive != m2.consecutive:
        return None
    cons = m1.cons_map
    f1, i2 = m1.final_map, m2.init_map
    for v, w in cons.items():
        if v not in i2 or w not in f1 or i2[v] != f1[w]:
            return None
    if any(v not in cons for v in i2) or \
            any(w not in set(cons.values()) for w in f1):
        return None
    span = {mi, mi + 1}
    outside = _occurrences_outside(conj, span)
    allowed = {t for _, t in m1.init} | {t for _, t in m2.final}
    for w, lv in f1.items():
        if isinstance(lv, AVar):
            if outside.get(lv, 0) > 0 and lv not in allowed:
                return None
        else:
            for v in _avar_occurrences(lv):
                if outside.get(v, 0) > 0 and v not in allowed:
                    return None
    nm = Multi(m1.id, m1.pattern, m1.init, m1.consecutive, m2.final)
    new_conj = conj[:mi] + (nm,) + conj[mi + 2:]
    return new_conj, FoldEvent(mi, m1.plen, "merge")


def _fold_left(conj, mi, m: Multi, bmap):
    """Absorb the block before the multi as a new first instance."""
    init, cons = m.init_map, m.cons_map
    for v, w in cons.items():
        if init.get(v) != bmap[w]:
            return None  # block output does not feed the chain input
    if any(v not in cons for v in init):
        return None  # extra first-instance constraint would bind a middle
    new_init = {v: bmap[v] for v in cons}
    span = set(range(mi - m.plen, mi + 1))
    outside = _occurrences_outside(conj, span)
    allowed = set(new_init.values()) | {t for _, t in m.final}
    for v in cons:
        lv = init[v]
        if outside.get(lv, 0) > 0 and lv not in allowed:
            return None  # old chain-input variable leaks out of the fold
    nm = Multi(m.id, m.pattern, _sorted_pairs(new_init),
               m.consecutive, m.final)
    new_conj = conj[:mi - m.plen] + (nm,) + conj[mi + 1:]
    return new_conj, FoldEvent(mi - m.plen, m.plen, "left")


def _fold_right(conj, mi, m: Multi, bmap):
    """Absorb the block after the multi as a new last instance."""
    final, cons = m.final_map, m.cons_map
    outs = set(cons.values())
    for v, w in cons.items():
        if final.get(w) != bmap[v]:
            return None
    if any(w not in outs for w in final):
        return None
    new_final = {w: bmap[w] for w in outs}
    span = set(range(mi, mi + 1 + m.plen))
    outside = _occurrences_outside(conj, span)
    allowed = set(new_final.values()) | {t for _, t in m.init}
    for w in outs:
        lv = final[w]
        if outside.get(lv, 0) > 0 and lv not in allowed:
            return None
    nm = Multi(m.id, m.pattern, m.init, m.consecutive,
               _sorted_pairs(new_final))
    new_conj = conj[:mi] + (nm,) + conj[mi + 1 + m.plen:]
    return new_conj, FoldEvent(mi, m.plen, "right")


# --- conjunction simplification ------------------------------------------

def simplify_conj(conj) -> tuple:
    """Drop dangling alias constraints: an init/final entry whose right
    side is a lone variable of the pattern variable's own kind occurring
    nowhere else in the conjunction constrains nothing."""
    conj = tuple(conj)
    while True:
        occ = {}
        for v in _avar_occurrences(conj):
            occ[v] = occ.get(v, 0) + 1
        out = []
        changed = False
        for c in conj:
            if isinstance(c, Multi):
                init = tuple((v, t) for v, t in c.init
                             if not _dangling(v, t, occ))
                final = tuple((v, t) for v, t in c.final
                              if not _dangling(v, t, occ))
                if init != c.init or final != c.final:
                    changed = True
                    c = Multi(c.id, c.pattern, init, c.consecutive, final)
            out.append(c)
        conj = tuple(out)
        if not changed:
            return conj


def _dangling(v: MVar, t, occ) -> bool:
    return (isinstance(t, AVar) and occ.get(t, 0) == 1
            and t.kind == v.kind)


# --- sampling the concretization -----------------------------------------

class Sampler:
    """Random members of the denotation of abstract values, for property
    tests and simulation checks.  Samples are best-effort: callers should
    re-check membership when a multi's constraints can conflict."""

    def __init__(self, rng: random.Random, depth: int = 2,
                 functors=("f", "g"), consts=("c", "d", 0, 1, 2)):
        self.rng = rng
        self.depth = depth
        self.functors = functors
        self.consts = consts
        self.varc = 0

    def _fresh_var(self):
        self.varc += 1
        return Var(f"S{self.varc}")

    def concrete_term(self, ground: bool, depth=None):
        depth = self.depth if depth is None else depth
        roll = self.rng.random()
        if not ground and roll < 0.3:
            return self._fresh_var()
        if depth <= 0 or roll < 0.7:
            return Const(self.rng.choice(self.consts))
        f = self.rng.choice(self.functors)
        n = self.rng.randint(1, 2)
        return Struct(f, tuple(self.concrete_term(ground, depth - 1)
                               for _ in range(n)))

    def term(self, at, env):
        if isinstance(at, (AVar, MVar)):
            if at not in env:
                env[at] = self.concrete_term(at.kind == GROUND)
            return env[at]
        if isinstance(at, AbsConst):
            return Const(at.name)
        if isinstance(at, AbsStruct):
            return Struct(at.functor, tuple(self.term(a, env)
                                            for a in at.args))
        raise AbstractDomainError(f"cannot sample {at!r}")

    def atom(self, aa: AAtom, env) -> Atom:
        return Atom(aa.pred, tuple(self.term(t, env) for t in aa.args))

    def multi(self, m: Multi, env, n: int) -> list:
        init, cons, final = m.init_map, m.cons_map, m.final_map
        atoms = []
        prev = None
        for j in range(1, n + 1):
            inst = {}
            for v in m.pattern_vars():
                if j == 1 and v in init:
                    inst[v] = self.term(init[v], env)
                elif j > 1 and v in cons:
                    inst[v] = prev[cons[v]]
                elif j == n and v in final:
                    inst[v] = self.term(final[v], env)
                else:
                    inst[v] = self.concrete_term(v.kind == GROUND)
            atoms.extend(self.atom(a, inst) for a in m.pattern)
            prev = inst
        return atoms

    def conjunction(self, conj, env=None, multi_len=None) -> list:
        env = {} if env is None else env
        atoms = []
        for c in conj:
            if isinstance(c, AAtom):
                atoms.append(self.atom(c, env))
            else:
                n = multi_len or self.rng.randint(1, 3)
                atoms.extend(self.multi(c, env, n))
        return atoms
