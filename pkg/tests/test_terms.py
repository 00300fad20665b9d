"""Terms, parsing, printing, substitution, and unification."""

import pytest

from ccontrol.terms import (Atom, Clause, Const, FreshNames, ParseError,
                            Struct, Substitution, Var, is_closed_list,
                            list_parts, mklist, parse_atom, parse_goal,
                            parse_program, parse_term, print_atom,
                            print_program, print_term, rename_apart,
                            term_vars, unify)

from oracles import check_unify_against_brute_force


# --- parsing and printing -------------------------------------------------

def test_parse_print_round_trip():
    text = ("app([],L,L).\n"
            "app([X|Xs],Y,[X|Zs]) :- app(Xs,Y,Zs).\n")
    prog = parse_program(text)
    assert print_program(prog) == text
    assert parse_program(print_program(prog)).clauses == prog.clauses


def test_parse_leq_infix_and_prefix():
    c = parse_program("ord([X,Y|Z]) :- X =< Y, ord([Y|Z]).").clauses[0]
    assert c.body[0] == Atom("=<", (Var("X"), Var("Y")))
    # the reified prefix form round-trips as a term
    t = parse_term("f(=<(A,B))")
    assert t == Struct("f", (Struct("=<", (Var("A"), Var("B"))),))
    assert parse_term(print_term(t)) == t


def test_parse_lists():
    assert parse_term("[]") == Const("[]")
    assert parse_term("[1,2]") == mklist([Const(1), Const(2)])
    assert parse_term("[X|Xs]") == mklist([Var("X")], Var("Xs"))
    items, tail = list_parts(parse_term("[a,b|T]"))
    assert items == [Const("a"), Const("b")] and tail == Var("T")
    assert is_closed_list(parse_term("[a,b]"))
    assert not is_closed_list(parse_term("[a|T]"))


def test_parse_goal_conjunction():
    goal = parse_goal("p(X) , q(X,1)")
    assert goal == (Atom("p", (Var("X"),)),
                    Atom("q", (Var("X"), Const(1))))


def test_parse_error_reports_location():
    with pytest.raises(ParseError):
        parse_program("p(X) :- .")
    with pytest.raises(ParseError):
        parse_atom("[1,2]")


def test_print_atom_leq_is_infix():
    assert print_atom(Atom("=<", (Const(1), Const(2)))) == "1 =< 2"


# --- substitution and renaming -------------------------------------------

def test_substitution_application_walks_chains():
    s = Substitution({Var("X"): Var("Y"), Var("Y"): Const("c")})
    assert s.apply(Struct("f", (Var("X"),))) == Struct("f", (Const("c"),))


def test_rename_apart_freshens_all_vars():
    c = parse_program("p(X,Y) :- q(X), r(Y,X).").clauses[0]
    rc = rename_apart(c, FreshNames())
    vs = term_vars((rc.head,) + rc.body)
    assert len(vs) == 2
    assert not set(vs) & set(term_vars((c.head,) + c.body))


def test_rename_apart_with_overlapping_names():
    # clause variables already named like the fresh ones must not collapse
    head = Atom("p", (Var("_V1"), Var("_V2")))
    c = Clause(head, (), 1)
    rc = rename_apart(c, FreshNames())
    a, b = rc.head.args
    assert a != b


# --- unification ----------------------------------------------------------

def test_unify_basic():
    mgu = unify(parse_term("f(X,c)"), parse_term("f(d,Y)"))
    assert mgu.apply(Var("X")) == Const("d")
    assert mgu.apply(Var("Y")) == Const("c")
    assert unify(parse_term("f(X)"), parse_term("g(X)")) is None
    assert unify(parse_term("f(X,X)"), parse_term("f(a,b)")) is None


def test_unify_aliasing():
    mgu = unify(parse_term("f(X,X)"), parse_term("f(Y,c)"))
    assert mgu.apply(Var("X")) == Const("c")
    assert mgu.apply(Var("Y")) == Const("c")


def test_unify_occurs_check():
    assert unify(Var("X"), parse_term("f(X)")) is None
    assert unify(Var("X"), parse_term("f(X)"), occurs_check=False) \
        is not None


def test_unify_against_brute_force_oracle():
    failures = check_unify_against_brute_force(cases=1000, seed=0)
    assert not failures, failures[:3]
