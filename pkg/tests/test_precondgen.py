import pytest

from homeplan.errors import GenerationFailedError, KeyMismatchError
from homeplan.formula import parse_precondition
from homeplan.llm import ScriptedBackend
from homeplan.precondgen import (
    compare_fixture,
    compare_sets,
    flatten_atoms,
    generate_preconditions,
    load_fixture_formulas,
    match_atoms,
)

OPEN_GENERATED = "(and (openable ?x) (not (isOpen ?x)) (visible ?x) (not (isBroken ?x)))"
OPEN_TRUTH = "(and (openable ?x) (not (isOpen ?x)) (visible ?x) (not (isHoldingObject)))"
TOGGLE_OFF_GENERATED = "(and (toggleable ?x) (isToggled ?x))"
TOGGLE_OFF_TRUTH = (
    "(and (toggleable ?x) (isToggled ?x) (visible ?x) (not (isHoldingObject)))"
)


def test_match_atoms_open_object():
    result = match_atoms(
        parse_precondition(OPEN_GENERATED), parse_precondition(OPEN_TRUTH)
    )
    assert len(result.correct) == 3
    assert [k.render() for k in result.incorrect] == ["isBroken=false"]
    assert [k.render() for k in result.missing] == ["isHoldingObject=false"]


def test_match_atoms_toggle_off():
    result = match_atoms(
        parse_precondition(TOGGLE_OFF_GENERATED), parse_precondition(TOGGLE_OFF_TRUTH)
    )
    assert len(result.correct) == 2
    assert len(result.incorrect) == 0
    assert sorted(k.name for k in result.missing) == ["isHoldingObject", "visible"]


def test_match_atoms_identical_formulas():
    formula = parse_precondition(OPEN_TRUTH)
    result = match_atoms(formula, formula)
    assert len(result.correct) == 4
    assert result.incorrect == ()
    assert result.missing == ()


def test_match_atoms_swap_symmetry():
    gen = parse_precondition(OPEN_GENERATED)
    truth = parse_precondition(OPEN_TRUTH)
    forward = match_atoms(gen, truth)
    backward = match_atoms(truth, gen)
    assert forward.incorrect == backward.missing
    assert forward.missing == backward.incorrect
    assert forward.correct == backward.correct


def test_flatten_distinguishes_modifier_context():
    inside = parse_precondition("(when (and (openable ?x)) (and (isOpen ?x)))")
    outside = parse_precondition("(and (openable ?x) (isOpen ?x))")
    assert flatten_atoms(inside) != flatten_atoms(outside)
    keys = sorted(flatten_atoms(inside))
    assert [k.render() for k in keys] == ["if:openable=true", "then:isOpen=true"]


def test_flatten_transparent_conjunction_nesting():
    flat = parse_precondition("(and (visible ?x) (openable ?x))")
    nested = parse_precondition("(and (and (visible ?x)) (openable ?x))")
    assert flatten_atoms(flat) == flatten_atoms(nested)


def test_flatten_exists_alpha_equivalence():
    a = parse_precondition("(exists (?y) (and (isPickedUp ?y)))")
    b = parse_precondition("(exists (?z) (and (isPickedUp ?z)))")
    assert flatten_atoms(a) == flatten_atoms(b)


def test_compare_sets_key_mismatch():
    formula = parse_precondition("(and (visible ?x))")
    with pytest.raises(KeyMismatchError):
        compare_sets({"A": formula}, {"B": formula})


def test_compare_sets_identical_maps():
    formula = parse_precondition(OPEN_TRUTH)
    report = compare_sets({"Open Object": formula}, {"Open Object": formula})
    assert report.accuracy == 1.0
    assert report.recall == 1.0


def test_compare_sets_empty_generated_warns():
    # A degenerate generated set: zero atoms cannot be encoded in the formula
    # grammar, so the closest degenerate case is a mismatched singleton.
    gen = {"Open Object": parse_precondition("(and (isBroken ?x))")}
    truth = {"Open Object": parse_precondition(OPEN_TRUTH)}
    report = compare_sets(gen, truth)
    assert report.accuracy == 0.0
    assert report.recall == 0.0


def test_fixture_census_matches_acceptance_fractions():
    report = compare_fixture()
    assert report.correct == 37
    assert report.total_generated == 38
    assert report.total_ground_truth == 42
    assert report.accuracy == 37 / 38
    assert report.recall == 37 / 42
    assert f"{100 * report.accuracy:.1f}%" == "97.4%"
    assert f"{100 * report.recall:.1f}%" == "88.1%"


def test_fixture_count_identities():
    report = compare_fixture()
    assert report.accuracy * report.total_generated == pytest.approx(report.correct)
    assert report.recall * report.total_ground_truth == pytest.approx(report.correct)


def test_fixture_report_flags_reported_disagreement():
    report = compare_fixture()
    text = report.render_text()
    assert "97.4%" in text
    assert "88.1%" in text
    assert "reported" in text
    assert "disagrees with the computed census" in text


def test_fixture_formulas_align_with_tool_library():
    from homeplan.tools import builtin_tool_library

    _, ground_truth, _ = load_fixture_formulas()
    lib = builtin_tool_library()
    for tool, formula in ground_truth.items():
        assert lib.get(tool).precondition == formula


VALID_COMPLETION = """Preconditions:
```pddl
(and
    (receptacle ?x)
    (visible ?x)
    (when
        (and
            (openable ?x)
        )
        (and
            (isOpen ?x)
        )
    )
    (not (isHoldingObject))
)
```
Justification: standard search constraints.
"""


def test_generate_preconditions_parses_reply():
    backend = ScriptedBackend.ordered([VALID_COMPLETION])
    formula = generate_preconditions(
        backend,
        "Search Object",
        "Return a list of all items inside or on a target object.",
    )
    assert formula == parse_precondition(
        "(and (receptacle ?x) (visible ?x) (when (and (openable ?x)) (and (isOpen ?x)))"
        " (not (isHoldingObject)))"
    )
    assert "Search Object" in backend.prompts[0]


def test_generate_preconditions_retries_then_succeeds():
    backend = ScriptedBackend.ordered(["no code here", "still nothing", VALID_COMPLETION])
    formula = generate_preconditions(backend, "Search Object", "desc", retry_budget=2)
    assert formula is not None
    assert backend.call_count == 3


def test_generate_preconditions_fails_after_budget():
    backend = ScriptedBackend.ordered(["prose"] * 3)
    with pytest.raises(GenerationFailedError):
        generate_preconditions(backend, "Search Object", "desc", retry_budget=2)


def test_generate_preconditions_requires_description():
    backend = ScriptedBackend.ordered([VALID_COMPLETION])
    with pytest.raises(ValueError):
        generate_preconditions(backend, "Search Object", "")
