from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from choreo.errors import OsrSyntaxError
from choreo.osr import FALSE, TRUE, And, Comparison, Op, Or, evaluate, normalize, parse_osr, serialize_osr

from oracles import osr_truth_table, reference_parse

PATHS = ["room", "floor", "price", "extent.city", "owner.name", "on"]
STRINGS = ["A", "B", "Munich", 'q"uote', "back\\slash", ""]
NUMBERS = [-3, 0, 1, 2, 2.5, 10, 0.1]

# -- random trees shared with the acceptance suite --------------------------------


def literals():
    return st.one_of(
        st.sampled_from(STRINGS),
        st.sampled_from(NUMBERS).map(lambda v: Decimal(str(v))),
        st.booleans(),
    )


@st.composite
def comparisons(draw):
    lit = draw(literals())
    ops = list(Op) if isinstance(lit, Decimal) else [Op.EQ, Op.NE]
    return ("cmp", draw(st.sampled_from(PATHS)), draw(st.sampled_from(ops)).value, lit)


def trees(depth=4):
    return st.recursive(
        comparisons(),
        lambda kids: st.tuples(st.sampled_from(["and", "or"]), st.lists(kids, max_size=3)),
        max_leaves=2 ** depth,
    )


def to_ast(tree):
    if tree[0] == "cmp":
        return Comparison(tree[1], Op(tree[2]), tree[3])
    kind = And if tree[0] == "and" else Or
    return kind([to_ast(c) for c in tree[1]])


def props():
    value = st.one_of(st.sampled_from(STRINGS), st.sampled_from(NUMBERS), st.booleans())
    return st.dictionaries(st.sampled_from(PATHS), value, max_size=len(PATHS))


# -- properties ----------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(trees(), props())
def test_evaluate_matches_truth_table(tree, p):
    assert evaluate(to_ast(tree), p) == osr_truth_table(tree, p)


@settings(max_examples=300, deadline=None)
@given(trees())
def test_round_trip_on_normalized_ast(tree):
    ast = normalize(to_ast(tree))
    assert parse_osr(serialize_osr(ast)) == ast


@settings(max_examples=300, deadline=None)
@given(trees(), props())
def test_normalize_preserves_meaning(tree, p):
    ast = to_ast(tree)
    assert evaluate(normalize(ast), p) == evaluate(ast, p)


@settings(max_examples=200, deadline=None)
@given(trees(), trees(), props())
def test_or_is_monotone(a, b, p):
    # adding a disjunct can only turn false into true
    if evaluate(to_ast(a), p):
        assert evaluate(Or([to_ast(a), to_ast(b)]), p)
    if not evaluate(to_ast(a), p):
        assert not evaluate(And([to_ast(a), to_ast(b)]), p)


@st.composite
def flat_texts(draw):
    """Unparenthesized rules mixing AND and OR, checked against a shunting-yard parser."""
    atoms = draw(st.lists(comparisons(), min_size=1, max_size=6))
    joins = draw(st.lists(st.sampled_from(["AND", "OR"]), min_size=len(atoms) - 1, max_size=len(atoms) - 1))
    out = [_text(atoms[0])]
    for j, a in zip(joins, atoms[1:]):
        out += [j, _text(a)]
    return " ".join(out)


def _text(cmp):
    _, path, op, lit = cmp
    return serialize_osr(Comparison(path, Op(op), lit))[1:-1]


def _from_ref(node):
    if node[0] == "cmp":
        lit = node[3]
        if not isinstance(lit, (str, bool)):
            lit = Decimal(lit.numerator) / Decimal(lit.denominator)
        return Comparison(node[1], Op(node[2]), lit)
    return (And if node[0] == "and" else Or)([_from_ref(c) for c in node[1]])


@settings(max_examples=300, deadline=None)
@given(flat_texts())
def test_precedence_matches_reference_parser(text):
    assert normalize(parse_osr(text)) == normalize(_from_ref(reference_parse(text)))


# -- examples ------------------------------------------------------------------


def test_and_binds_tighter_than_or():
    ast = parse_osr('room = "A" OR room = "B" AND price <= 10')
    assert ast == Or([
        Comparison("room", Op.EQ, "A"),
        And([Comparison("room", Op.EQ, "B"), Comparison("price", Op.LE, Decimal(10))]),
    ])
    assert serialize_osr(ast) == '((room = "A") OR ((room = "B") AND (price <= 10)))'


def test_empty_rule_is_true():
    assert parse_osr("") == TRUE
    assert parse_osr("   ") == TRUE
    assert evaluate(TRUE, {})
    assert serialize_osr(TRUE) == ""


def test_false_constant_round_trips():
    assert not evaluate(FALSE, {"x": 1})
    assert serialize_osr(FALSE) == "FALSE"
    assert parse_osr("FALSE") == FALSE


def test_keyword_named_property_still_parses():
    assert parse_osr("TRUE = true") == Comparison("TRUE", Op.EQ, True)


def test_nested_path_against_offering_properties(office_light):
    from choreo.models import OfferingDescription

    od = OfferingDescription.from_dict(office_light)
    assert evaluate(parse_osr('extent.city = "Munich"'), od)
    assert not evaluate(parse_osr('extent.city = "Berlin"'), od)


def test_missing_and_mismatched_are_false():
    assert not evaluate(parse_osr("price < 10"), {})
    assert not evaluate(parse_osr("price < 10"), {"price": "cheap"})
    assert not evaluate(parse_osr('price != "x"'), {"price": 3})
    assert not evaluate(parse_osr("on = 1"), {"on": True})


def test_decimal_comparison_is_exact():
    assert evaluate(parse_osr("x = 0.1"), {"x": 0.1})
    assert not evaluate(parse_osr("x = 0.3"), {"x": 0.1 + 0.2})


def test_literal_kinds_are_distinct():
    assert Comparison("x", Op.EQ, True) != Comparison("x", Op.EQ, 1)


def test_ordering_needs_number():
    with pytest.raises(ValueError):
        Comparison("x", Op.LT, "a")


@pytest.mark.parametrize(
    "text,pos",
    [
        ('room = "A" AND', 14),
        ("room == 1", 6),
        ('room < "A"', 7),
        ("(room = 1", 9),
        ("room = 1)", 8),
        ("room 1", 5),
        ("room = #", 7),
    ],
)
def test_syntax_errors_carry_position(text, pos):
    with pytest.raises(OsrSyntaxError) as exc:
        parse_osr(text)
    assert exc.value.position == pos
