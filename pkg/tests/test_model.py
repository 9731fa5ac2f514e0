import itertools

import pytest
from hypothesis import given, settings, strategies as st

from mbtkit.corpus import ENTRIES, corpus_ping, load_entry
from mbtkit.dsl import format_model, format_profile, parse_model, parse_profile
from mbtkit.model import (
    BoolDomain, DuplicateIdentifierError, EnumDomain, IntRange, ModelSyntaxError, Profile,
    TypeMismatchError, UnknownOptionError, UnresolvedReferenceError, apply_profile, atoms,
    evaluate, fire, guard_env, initial_valuation, validate,
)

from randmodels import random_model, random_model_text

PING = corpus_ping().model_text


def test_minimal_model():
    m = parse_model("model tiny\nstate Idle initial\n")
    assert m.states == ("Idle",)
    assert m.transitions == ()
    assert validate(m) == []


def test_ping_fixture_shape():
    m = parse_model(PING)
    assert len(m.states) == 1
    assert [(v.name, v.domain, v.initial) for v in m.variables] == [("n", IntRange(0, 2), 0)]
    assert [t.id for t in m.transitions] == ["t1", "t2"]
    assert validate(m) == []


def test_undeclared_state_is_named():
    src = PING.replace("t2: Idle -> Idle", "t2: Idle -> Wait")
    with pytest.raises(UnresolvedReferenceError) as exc:
        parse_model(src)
    assert exc.value.name == "Wait"
    assert exc.value.line is not None


def test_syntax_error_reports_position_and_expectation():
    with pytest.raises(ModelSyntaxError) as exc:
        parse_model("model m\nstate Idle initial\ntrans t1 Idle -> Idle on PING\n")
    assert exc.value.line == 3
    assert exc.value.column == 10
    assert exc.value.expected == ("':'",)


def test_duplicate_state():
    with pytest.raises(DuplicateIdentifierError):
        parse_model("model m\nstate A initial\nstate A\n")


def test_type_mismatch_in_guard():
    src = "model m\nstate A initial\nvar b : bool = false\nstimulus S\ntrans t: A -> A on S [b < 1]\n"
    with pytest.raises(TypeMismatchError):
        parse_model(src)


def test_type_mismatch_in_action():
    src = "model m\nstate A initial\nvar n : int[0..3] = 0\nstimulus S\ntrans t: A -> A on S / n := true\n"
    with pytest.raises(TypeMismatchError):
        parse_model(src)


def test_trigger_must_be_stimulus():
    src = "model m\nstate A initial\nobservation O\ntrans t: A -> A on O\n"
    with pytest.raises(TypeMismatchError):
        parse_model(src)


def test_initial_value_outside_domain():
    with pytest.raises(TypeMismatchError):
        parse_model("model m\nstate A initial\nvar n : int[0..3] = 7\n")


def test_unreachable_state_warning():
    m = parse_model(PING.replace("state Idle initial", "state Idle initial\nstate Orphan"))
    diags = validate(m)
    assert [(d.severity, d.code, d.subject) for d in diags] == [("warning", "unreachable-state", "Orphan")]


def test_untagged_requirement_warning():
    m = parse_model(PING + 'req RQ-9 "never tagged" clause "PING/9"\n')
    assert [(d.code, d.subject) for d in validate(m)] == [("untagged-requirement", "RQ-9")]


def test_record_variables_are_flattened():
    src = ("model m\nstate A initial\nvar loc : record{a: int[0..2], b: bool} = {a=1, b=true}\n"
           "stimulus S\ntrans t: A -> A [loc.b] / loc.a := loc.a + 1\n").replace("[loc.b]", "on S [loc.b]")
    m = parse_model(src)
    assert [(v.name, v.initial) for v in m.variables] == [("loc.a", 1), ("loc.b", True)]
    _, val = fire(m, m.transitions[0], initial_valuation(m), ())
    assert dict(val)["loc.a"] == 2


def test_integer_results_saturate():
    m = parse_model(PING.replace("[n < 2]", ""))
    t1 = m.transition_map["t1"]
    _, val = fire(m, t1, (("n", 2),), ())
    assert val == (("n", 2),)


def test_outputs_see_updated_variables():
    src = ("model m\nstate A initial\nvar n : int[0..3] = 0\nstimulus S\nobservation O(v: int[0..3])\n"
           "trans t: A -> A on S / n := n + 1 ! O(n)\n")
    m = parse_model(src)
    outs, _ = fire(m, m.transitions[0], initial_valuation(m), ())
    assert outs == (("O", (1,)),)


def test_domains():
    assert IntRange(-1, 1).values() == (-1, 0, 1)
    assert IntRange(0, 3).clamp(9) == 3
    assert EnumDomain(("a", "b")).contains("b")
    assert not BoolDomain().contains(1)
    with pytest.raises(ValueError):
        IntRange(2, 1)
    with pytest.raises(ValueError):
        EnumDomain(("a", "a"))


# -- profiles ---------------------------------------------------------------

OPT_PING = PING.replace("trans t1", 'option OPT-A "busy reply" default true\ntrans t1') \
    .replace("@RQ-PING-2", "@RQ-PING-2 %OPT-A")


def test_profile_deselecting_option_removes_transition():
    m = parse_model(OPT_PING)
    pruned = apply_profile(m, parse_profile("OPT-A = false\n"))
    assert [t.id for t in pruned.transitions] == ["t1"]
    assert pruned.excluded_requirements == frozenset({"RQ-PING-2"})
    assert [t.id for t in m.transitions] == ["t1", "t2"]


def test_default_profile_is_identity():
    m = parse_model(PING)
    assert apply_profile(m, Profile({})) == m


def test_unknown_option():
    with pytest.raises(UnknownOptionError) as exc:
        apply_profile(parse_model(PING), Profile({"OPT-Z": True}))
    assert exc.value.option_id == "OPT-Z"


def test_profile_idempotent_and_all_selected_identity():
    m = parse_model(OPT_PING)
    off = Profile({"OPT-A": False})
    assert apply_profile(apply_profile(m, off), off) == apply_profile(m, off)
    assert apply_profile(m, Profile({"OPT-A": True})).transitions == m.transitions


def test_profile_round_trip():
    p = parse_profile("# comment\nOPT-B = true\nOPT-A = false\n")
    assert parse_profile(format_profile(p)) == p


@pytest.mark.parametrize("name", ENTRIES)
def test_corpus_profiles_are_idempotent(name):
    e = load_entry(name)
    for p in e.profiles.values():
        once = apply_profile(e.model, p)
        assert apply_profile(once, p) == once


# -- round trip and type soundness ------------------------------------------


@pytest.mark.parametrize("name", ENTRIES)
def test_corpus_round_trip(name):
    m = load_entry(name).model
    again = parse_model(format_model(m))
    assert again == m
    assert format_model(again) == format_model(m)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_random_round_trip(seed):
    m = random_model(seed)
    assert parse_model(format_model(m)) == m


def _valuations(model):
    names = [v.name for v in model.variables]
    for combo in itertools.product(*(v.domain.values() for v in model.variables)):
        yield tuple(zip(names, combo))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_guards_are_boolean_under_every_valuation(seed):
    m = random_model(seed)
    assert not [d for d in validate(m) if d.severity == "error"]
    for t in m.transitions:
        doms = [d for _, d in m.event_map[t.trigger].params]
        for val in _valuations(m):
            for args in itertools.product(*(d.values() for d in doms)):
                env = guard_env(m, t, val, args)
                assert isinstance(evaluate(t.guard, env), bool)
                for a in atoms(t.guard):
                    assert isinstance(evaluate(a, env), bool)


def test_random_model_text_is_deterministic():
    assert random_model_text(7) == random_model_text(7)
