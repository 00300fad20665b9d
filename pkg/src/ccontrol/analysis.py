"""Abstract interpretation of a program under a selection policy.

A breadth-first worklist explores the abstract conjunctions reachable from
the entry pattern.  Each state either folds repeated structure into a
multi abstraction (a grouping transition), case-splits a multi whose
instance would be selected, or resolves/fully evaluates its selected atom.
The result is a finite state graph: the compile-time control encoding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .absdom import (AAtom, FULLEVAL, FreshAVars, LogicError, UNFOLD,
                     abstract_unify_with_clause, canonicalize,
                     full_eval_output, parse_aconj, print_aconj, print_aatom,
                     widen_depth_k)
from .engine import BuiltinTable
from .multi import FoldEvent, Multi, case_split, simplify_conj, try_fold
from .policy import NoMinimumError, SelectionPolicy, select_conjunct
from .terms import Program

EMPTY_STATE = 0
DEFAULT_MAX_STATES = 500


class AnalysisError(LogicError):
    pass


class CompletenessError(AnalysisError):
    """A reachable state has no selectable minimal atom."""

    def __init__(self, message, witness):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class Transition:
    src: int
    dst: int                 # EMPTY_STATE for an empty successor goal
    cause: tuple             # ("clause", id) | ("fulleval", decl-idx, out-idx)
    #                        # | ("one",) | ("many",) | ("grouping", kind)
    selected_index: int | None


@dataclass
class StateGraph:
    entry: int
    states: dict             # id -> canonical conjunction tuple
    transitions: list        # of Transition
    actions: dict            # id -> ("select", pos, mark) | ("split", pos)
    #                        # | ("group", FoldEvent) | ("leaf",)
    groupings: dict = field(default_factory=dict)  # src id -> FoldEvent

    def successors(self, sid):
        return [t for t in self.transitions if t.src == sid]

    def state_of(self, conj):
        key = canonicalize(conj)
        for sid, c in self.states.items():
            if c == key:
                return sid
        return None


@dataclass
class AnalysisOptions:
    depth_k: int | None = None
    max_states: int = DEFAULT_MAX_STATES
    enable_multi: bool = True    # fold repeated structure into multis


def _widen(conj, k):
    out = []
    for c in conj:
        if isinstance(c, AAtom):
            out.append(widen_depth_k(c, k))
        else:
            out.append(c)
    return tuple(out)


def analyze(program: Program, policy: SelectionPolicy,
            opts: AnalysisOptions = None,
            builtins: BuiltinTable = None) -> StateGraph:
    """Build the finite state graph of the program's abstract control flow.

    Raises CompletenessError when a state has no selectable atom, and
    AnalysisError with a growth diagnostic when max_states is exceeded.
    """
    opts = opts or AnalysisOptions()
    builtins = builtins or BuiltinTable()
    entry_conj = canonicalize((policy.entry.unmarked(),))
    states = {1: entry_conj}
    index = {entry_conj: 1}
    parents = {1: None}
    transitions = []
    actions = {}
    worklist = [1]
    next_id = 2
    multi_counter = [100]

    def intern(conj, src):
        nonlocal next_id
        conj = canonicalize(simplify_conj(conj))
        if not conj:
            return EMPTY_STATE
        if conj in index:
            return index[conj]
        if opts.depth_k is not None:
            widened = canonicalize(simplify_conj(_widen(conj, opts.depth_k)))
            if widened in index:
                return index[widened]
            conj = widened
        sid = next_id
        next_id += 1
        states[sid] = conj
        index[conj] = sid
        parents[sid] = src
        worklist.append(sid)
        if len(states) > opts.max_states:
            raise AnalysisError(_growth_diagnostic(states, parents, sid,
                                                   opts.max_states))
        return sid

    while worklist:
        sid = worklist.pop(0)
        conj = states[sid]
        fresh = FreshAVars.above(conj)

        multi_counter[0] += 1
        fold = try_fold(conj, multi_counter[0]) if opts.enable_multi else None
        if fold is not None:
            new_conj, ev = fold
            dst = intern(new_conj, sid)
            transitions.append(Transition(sid, dst, ("grouping", ev.kind),
                                          None))
            actions[sid] = ("group", ev)
            continue

        try:
            pos, mark = select_conjunct(policy, conj)
        except NoMinimumError as e:
            raise CompletenessError(
                f"state {sid} has no selectable atom: "
                f"{print_aconj(conj)} ({e})", conj) from None

        if mark == "split":
            m = conj[pos]
            one, one_sub, (head, rest) = case_split(m, fresh)
            one_conj = (one_sub.apply(conj[:pos]) + one
                        + one_sub.apply(conj[pos + 1:]))
            many_conj = conj[:pos] + head + (rest,) + conj[pos + 1:]
            transitions.append(Transition(sid, intern(one_conj, sid),
                                          ("one",), pos))
            transitions.append(Transition(sid, intern(many_conj, sid),
                                          ("many",), pos))
            actions[sid] = ("split", pos)
            continue

        atom = conj[pos]
        rest_conj = conj[:pos], conj[pos + 1:]
        if mark == FULLEVAL:
            decl = policy.fulleval_match(atom)
            decl_idx = policy.fulleval.index(decl)
            produced = False
            for out_idx, out in enumerate(decl.outputs):
                theta = full_eval_output(atom, decl.pattern, out, fresh)
                if theta is None:
                    continue
                produced = True
                new_conj = theta.apply(rest_conj[0] + rest_conj[1])
                transitions.append(Transition(
                    sid, intern(new_conj, sid),
                    ("fulleval", decl_idx, out_idx), pos))
            if not produced:
                raise AnalysisError(
                    f"no output binding of {print_aatom(decl.pattern)} "
                    f"applies to {print_aatom(atom)} in state {sid}")
            actions[sid] = ("select", pos, FULLEVAL)
            continue

        # unfold against program clauses
        clauses = program.clauses_for(atom.pred, len(atom.args))
        if not clauses:
            kind = "builtin" if atom.indicator in builtins else "predicate"
            raise AnalysisError(
                f"cannot unfold {kind} {atom.pred}/{len(atom.args)} in "
                f"state {sid}; declare it as fully evaluated or define it")
        for clause in clauses:
            res = abstract_unify_with_clause(atom, clause,
                                             FreshAVars.above(conj))
            if res is None:
                continue
            body, theta = res
            new_conj = (theta.apply(rest_conj[0]) + body
                        + theta.apply(rest_conj[1]))
            transitions.append(Transition(sid, intern(new_conj, sid),
                                          ("clause", clause.id), pos))
        actions[sid] = ("select", pos, UNFOLD)

    for sid in states:
        actions.setdefault(sid, ("leaf",))
    groupings = {t.src: actions[t.src][1] for t in transitions
                 if t.cause[0] == "grouping"}
    return StateGraph(1, states, transitions, actions, groupings)


def _pred_multiset(conj):
    out = {}
    for c in conj:
        if isinstance(c, AAtom):
            key = c.indicator
        else:
            key = ("multi",) + tuple(a.indicator for a in c.pattern)
        out[key] = out.get(key, 0) + 1
    return out


def _growth_diagnostic(states, parents, sid, max_states) -> str:
    msg = [f"state budget exceeded ({max_states})"]
    cur = _pred_multiset(states[sid])
    anc = parents.get(sid)
    while anc:
        ms = _pred_multiset(states[anc])
        if all(ms.get(k, 0) <= v for k, v in cur.items()) and \
                sum(ms.values()) < sum(cur.values()):
            msg.append(
                f"state {sid} ({print_aconj(states[sid])}) grows from "
                f"ancestor {anc} ({print_aconj(states[anc])}); "
                "consider a multi-enabling policy or depth-k widening")
            break
        anc = parents.get(anc)
    return "; ".join(msg)


# --- tables --------------------------------------------------------------

@dataclass
class StateTables:
    """The relational form of a state graph, as consumed by the
    table-driven meta-interpreter."""
    entry: int
    selected_index: dict     # state -> conjunct position
    state_transition: dict   # (state, cause) -> next state
    fulleval_atoms: dict     # state -> (decl index, position)
    split_states: dict       # state -> position of the multi
    groupings: dict          # state -> (next, FoldEvent)
    state_conjs: dict        # state -> conjunction (for patterns/lengths)


def emit_tables(g: StateGraph) -> StateTables:
    selected_index = {}
    state_transition = {}
    fulleval_atoms = {}
    split_states = {}
    groupings = {}
    for sid, action in g.actions.items():
        if action[0] == "select":
            selected_index[sid] = action[1]
            if action[2] == FULLEVAL:
                for t in g.successors(sid):
                    fulleval_atoms[sid] = (t.cause[1], action[1])
        elif action[0] == "split":
            split_states[sid] = action[1]
        elif action[0] == "group":
            t = g.successors(sid)[0]
            groupings[sid] = (t.dst, action[1])
    for t in g.transitions:
        state_transition[(t.src, t.cause)] = t.dst
    return StateTables(g.entry, selected_index, state_transition,
                       fulleval_atoms, split_states, groupings,
                       dict(g.states))


# --- rendering -----------------------------------------------------------

def render_graph(g: StateGraph, fmt: str = "text") -> str:
    if fmt == "text":
        return _render_text(g)
    if fmt == "dot":
        return _render_dot(g)
    if fmt == "json":
        return _render_json(g)
    raise AnalysisError(f"unknown render format {fmt!r}")


def _state_label(g, sid):
    if sid == EMPTY_STATE:
        return "empty"
    conj = g.states[sid]
    action = g.actions.get(sid, ("leaf",))
    parts = []
    for i, c in enumerate(conj):
        if isinstance(c, AAtom):
            s = print_aatom(c)
            if action[0] == "select" and action[1] == i:
                s = f"=={s}==" if action[2] == FULLEVAL else f"__{s}__"
            parts.append(s)
        else:
            parts.append(repr(c))
    return " , ".join(parts)


def _cause_str(cause):
    if cause[0] == "clause":
        return f"clause {cause[1]}"
    if cause[0] == "fulleval":
        return f"fulleval {cause[1]}.{cause[2]}"
    if cause[0] == "grouping":
        return f"grouping {cause[1]}"
    return cause[0]


def _render_text(g: StateGraph) -> str:
    lines = []
    for sid in sorted(g.states):
        lines.append(f"state {sid}: {_state_label(g, sid)}")
        for t in g.successors(sid):
            lines.append(f"  -> {t.dst} [{_cause_str(t.cause)}]")
    return "\n".join(lines) + "\n"


def _render_dot(g: StateGraph) -> str:
    lines = ["digraph control {", "  rankdir=TB;", "  node [shape=box];"]
    targets = {t.dst for t in g.transitions}
    if EMPTY_STATE in targets:
        lines.append('  s0 [label="empty"];')
    for sid in sorted(g.states):
        label = _state_label(g, sid).replace('"', r'\"')
        lines.append(f'  s{sid} [label="{sid}: {label}"];')
    for t in g.transitions:
        lines.append(f'  s{t.src} -> s{t.dst} '
                     f'[label="{_cause_str(t.cause)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _render_json(g: StateGraph) -> str:
    doc = {
        "entry": g.entry,
        "states": [{"id": sid, "conjunction": print_aconj(g.states[sid])}
                   for sid in sorted(g.states)],
        "transitions": [
            {"from": t.src, "to": t.dst, "cause": list(t.cause),
             "selected_index": t.selected_index}
            for t in g.transitions],
        "actions": {str(sid): _action_json(a)
                    for sid, a in sorted(g.actions.items())},
        "groupings": [
            {"state": sid, "start": ev.start, "plen": ev.plen,
             "kind": ev.kind}
            for sid, ev in sorted(g.groupings.items())],
    }
    return json.dumps(doc, indent=2) + "\n"


def _action_json(action):
    if action[0] == "group":
        ev = action[1]
        return ["group", ev.start, ev.plen, ev.kind]
    return list(action)


def parse_graph(text: str) -> StateGraph:
    """Inverse of the json rendering."""
    doc = json.loads(text)
    states = {s["id"]: parse_aconj(s["conjunction"])
              for s in doc["states"]}
    transitions = [Transition(t["from"], t["to"], tuple(t["cause"]),
                              t["selected_index"])
                   for t in doc["transitions"]]
    actions = {}
    for sid, a in doc.get("actions", {}).items():
        if a[0] == "group":
            actions[int(sid)] = ("group", FoldEvent(a[1], a[2], a[3]))
        else:
            actions[int(sid)] = tuple(a)
    groupings = {gr["state"]: FoldEvent(gr["start"], gr["plen"], gr["kind"])
                 for gr in doc.get("groupings", [])}
    return StateGraph(doc["entry"], states, transitions, actions, groupings)
