"""Table-driven interpreter and its logic-program encoding."""

import pytest

from ccontrol.engine import Limits, solve
from ccontrol.metaint import (MetaintError, atom_to_term, build_tables,
                              cmulti_blocks, encode_as_logic_program,
                              is_cmulti, make_cmulti, mi_run, term_to_atom)
from ccontrol.terms import Atom, mklist, parse_goal, parse_program, \
    print_program

from conftest import answer_set


def run_encoded(entry, goal, limits=None):
    program = encode_as_logic_program(entry.tables, entry.variant)
    wrapped = (Atom("compute", (mklist([atom_to_term(a) for a in goal]),)),)
    return solve(program, wrapped, limits=limits)


def test_atom_term_round_trip():
    a = parse_goal("perm([1|X],Y)")[0]
    assert term_to_atom(atom_to_term(a)) == a


def test_cmulti_construction():
    blocks = [tuple(parse_goal("p(1)")), tuple(parse_goal("p(2)"))]
    c = make_cmulti(blocks)
    assert is_cmulti(c)
    assert cmulti_blocks(c) == blocks


def test_tables_classify_states(corpus):
    assert not corpus("permsort").tables.split_states
    assert corpus("primes").tables.split_states
    assert corpus("primes").tables.grouping
    assert corpus("queens").tables.split_states
    assert corpus("permsort").variant == "simple"
    assert corpus("queens").variant == "extended"


def test_mi_run_matches_naive_engine(corpus):
    for name in ("permsort", "zigzag", "countdown"):
        entry = corpus(name)
        for goal in entry.queries:
            assert answer_set(entry.run_mi(goal)) == \
                answer_set(entry.run_naive(goal)), (name, goal)


def test_mi_run_follows_the_analyzed_selection(corpus):
    # the analyzed control finds queens answers the naive engine also finds
    entry = corpus("queens")
    goal = parse_goal("queens([1,2,3,4],Qs)")
    assert answer_set(entry.run_mi(goal)) == answer_set(entry.run_naive(goal))


def test_mi_run_terminates_where_naive_does_not(corpus):
    entry = corpus("primes")
    res = entry.run_mi(parse_goal("primes(3,P)"))
    assert res.exhausted and res.answers
    naive = entry.run_naive(parse_goal("primes(3,P)"),
                            limits=Limits(max_inferences=20000))
    assert not naive.exhausted


def test_encoded_program_matches_mi_run(corpus):
    for name in ("permsort", "primes", "queens"):
        entry = corpus(name)
        for goal in entry.queries[:4]:
            assert answer_set(run_encoded(entry, goal)) == \
                answer_set(entry.run_mi(goal)), (name, goal)


def test_encoded_program_round_trips_through_parser(corpus):
    for name in ("permsort", "queens"):
        entry = corpus(name)
        program = encode_as_logic_program(entry.tables, entry.variant)
        reparsed = parse_program(print_program(program))
        assert len(reparsed.clauses) == len(program.clauses)


def test_unknown_variant_rejected(corpus):
    with pytest.raises(MetaintError):
        encode_as_logic_program(corpus("permsort").tables, "fancy")
