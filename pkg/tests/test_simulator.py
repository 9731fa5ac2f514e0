import pytest
from hypothesis import given, settings, strategies as st

from mbtkit.corpus import ENTRIES, corpus_ping, load_entry
from mbtkit.dsl import parse_model
from mbtkit.explorer import Bounds, explore, traces_of
from mbtkit.simulator import (
    FAIL, INCONCLUSIVE, OPERATORS, PASS, Sut, adequacy, all_mutants, distinguishing_sequence, mutate, run,
)
from mbtkit.testgen import EXPECT, SEND, TestCase, TestStep, build_suite, trace_to_testcase

from oracles import bounded_equivalent, replay
from randmodels import random_model

PING = corpus_ping().model


def drop_busy():
    return next(m for mu, m in all_mutants(PING) if str(mu) == "drop-output(t2: BUSY (output 0))")


def ping_case():
    t = [t for t in traces_of(explore(PING, Bounds(max_depth=3))) if len(t) == 3][0]
    return trace_to_testcase(t, PING, "TC_PING_TRANSITION_001")


@pytest.mark.parametrize("name", ENTRIES)
@pytest.mark.parametrize("criterion", ["transition", "branch", "requirement"])
def test_generated_tests_pass_on_reference(name, criterion):
    m = load_entry(name).model
    suite, _ = build_suite(m, explore(m), criterion, Bounds())
    sut = Sut(m)
    for tc in suite.cases:
        assert run(tc, sut).verdict == PASS


def test_dropped_busy_fails_at_expect_step():
    mutant = drop_busy()
    res = run(ping_case(), Sut(mutant))
    assert res.verdict == FAIL
    assert res.failing_step == 5


def test_unexpected_output_fails():
    tc = TestCase("TC", "TP", (), (TestStep(SEND, "PING"),))
    assert run(tc, Sut(PING)).verdict == FAIL


def test_undeclared_event_is_inconclusive():
    tc = TestCase("TC", "TP", (), (TestStep(SEND, "PANG"),))
    assert run(tc, Sut(PING)).verdict == INCONCLUSIVE
    tc = TestCase("TC", "TP", (), (TestStep(SEND, "PING"), TestStep(EXPECT, "PING")))
    assert run(tc, Sut(PING)).verdict == INCONCLUSIVE


def test_model_without_transitions_has_no_mutants():
    m = parse_model("model m\nstate A initial\n")
    assert all_mutants(m) == [] and mutate(m, 0, 40) == []


def test_ping_operator_set():
    ops = {mu.operator for mu, _ in all_mutants(PING)}
    assert ops == {"negate-guard-comparison", "drop-output", "perturb-constant"}
    assert ops <= set(OPERATORS)


def test_mutate_is_deterministic_and_distinct():
    m = load_entry("geonet_ls").model
    a = mutate(m, 0, 40)
    assert [str(mu) for mu, _ in a] == [str(mu) for mu, _ in mutate(m, 0, 40)]
    assert len(a) == 40 and len({str(mu) for mu, _ in a}) == 40
    assert [str(mu) for mu, _ in a] != [str(mu) for mu, _ in mutate(m, 1, 40)]


def test_empty_mutant_list_scores_one():
    suite, _ = build_suite(PING, explore(PING), "transition", Bounds())
    rep = adequacy(suite, PING, [])
    assert (rep.total, rep.score) == (0, 1.0)


def test_ping_suite_kills_all_distinguishable_mutants():
    suite, _ = build_suite(PING, explore(PING), "transition", Bounds())
    rep = adequacy(suite, PING, all_mutants(PING))
    assert rep.score == 1.0
    assert rep.killed + rep.survived + rep.equivalent == rep.total == 7


def test_distinguishing_sequence_on_ping():
    mutant = drop_busy()
    assert distinguishing_sequence(PING, mutant) == [("PING", ())] * 3
    assert distinguishing_sequence(PING, PING) is None


@pytest.mark.parametrize("name", ["atm", "rx"])
def test_classification_agrees_with_replay_oracle(name):
    m = load_entry(name).model
    suite, _ = build_suite(m, explore(m), "transition", Bounds())
    mutants = mutate(m, 0, 20)
    rep = adequacy(suite, m, mutants)
    for (mu, mutant), row in zip(mutants, rep.mutants):
        killed = any(not replay(mutant, tc) for tc in suite.cases)
        if killed:
            assert row["status"] == "killed"
        elif bounded_equivalent(m, mutant, Bounds().max_depth):
            assert row["status"] == "equivalent"
        else:
            assert row["status"] == "survived"


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_replay_oracle_agrees_on_random_models(seed):
    m = random_model(seed)
    g = explore(m, Bounds(max_depth=4))
    suite, _ = build_suite(m, g, "branch", Bounds(max_depth=4))
    for mu, mutant in mutate(m, seed, 6):
        for tc in suite.cases:
            assert (run(tc, Sut(mutant)).verdict == PASS) == replay(mutant, tc)
