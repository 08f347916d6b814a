import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.errors import MachineError, NegativeCounterError
from app.services.counter_machine import (
    ALL_TAGS,
    FLAG_CASES,
    SCM,
    Config,
    CounterMachine,
    RunOutcome,
    bounded_probe,
    cm_run,
    cm_step,
    cm_to_scm,
    copier_scm,
    odd_copy,
    ramp_scm,
    random_cm,
    random_scm,
    scm_run,
    scm_step,
)


def single_state_cm(delta, halting=None):
    gamma = {("s", b1, b2): ("s", delta) for b1, b2 in FLAG_CASES}
    return CounterMachine(("s",), gamma, "s", halting or Config("s", 99, 99)).validate()


def test_cm_step_applies_delta():
    assert cm_step(single_state_cm((1, 0)), Config("s", 2, 0)) == Config("s", 3, 0)


def test_cm_step_rejects_negative_counter():
    with pytest.raises(NegativeCounterError) as info:
        cm_step(single_state_cm((-1, 0)), Config("s", 0, 0), step=4)
    assert info.value.step == 4


def test_cm_run_stops_at_halting_configuration():
    cm = single_state_cm((0, 1), halting=Config("s", 0, 1))
    run = cm_run(cm, None, 10)
    assert run.outcome == RunOutcome.HALTED
    assert run.trajectory == [Config("s"), Config("s", 0, 1)]


def test_cm_run_non_strict_reports_error():
    run = cm_run(single_state_cm((0, -1)), None, 5, strict=False)
    assert run.outcome == RunOutcome.ERROR
    assert run.error.step == 1
    assert run.final == Config("s")


def test_cm_validate_rejects_illegal_delta():
    gamma = {("s", b1, b2): ("s", (1, 1)) for b1, b2 in FLAG_CASES}
    with pytest.raises(MachineError):
        CounterMachine(("s",), gamma, "s", Config("s")).validate()


def test_incrementer_runs_without_halting(incrementer):
    run = scm_run(incrementer, None, 100)
    assert run.outcome == RunOutcome.RUNNING
    assert len(run.trajectory) == 101
    assert run.final == Config("s1", 100, 0)


def test_scm_step_uses_beta_of_the_new_state():
    scm = SCM(
        ("a", "b"),
        {("a", b1, b2): "b" for b1, b2 in FLAG_CASES} | {("b", b1, b2): "a" for b1, b2 in FLAG_CASES},
        {"a": (0, 0), "b": (0, 1)},
        "a",
    ).validate()
    assert scm_step(scm, Config("a", 0, 0)) == Config("b", 0, 1)
    assert scm_step(scm, Config("b", 0, 1)) == Config("a", 0, 1)


def test_oscillator_trajectory(oscillator):
    run = scm_run(oscillator, None, 4)
    assert run.trajectory == [
        Config("inc", 0, 0),
        Config("dec", 1, 0),
        Config("inc", 0, 0),
        Config("dec", 1, 0),
        Config("inc", 0, 0),
    ]


def test_scm_validate_rejects_partial_alpha(oscillator):
    alpha = dict(oscillator.alpha)
    del alpha[("dec", 1, 1)]
    with pytest.raises(MachineError, match="alpha undefined"):
        SCM(oscillator.states, alpha, oscillator.beta, oscillator.initial).validate()


def test_scm_validate_rejects_unknown_target(oscillator):
    alpha = dict(oscillator.alpha)
    alpha[("dec", 0, 0)] = "nowhere"
    with pytest.raises(MachineError):
        SCM(oscillator.states, alpha, oscillator.beta, oscillator.initial).validate()


def test_cm_to_scm_has_ten_states_per_cm_state():
    cm = random_cm(0, 2)
    scm = cm_to_scm(cm).validate()
    assert scm.m == 20
    assert scm.initial == odd_copy(cm.initial)
    assert {scm.beta[s] for s in scm.states} == set(ALL_TAGS) | {(0, 0)}


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(1, 4))
def test_cm_to_scm_tracks_the_cm_on_even_steps(seed, m):
    cm = random_cm(seed, m).validate()
    scm = cm_to_scm(cm)
    budget = 100
    cm_trajectory = cm_run(cm, None, budget).trajectory
    scm_trajectory = scm_run(scm, None, 2 * budget).trajectory
    for n, config in enumerate(cm_trajectory):
        assert scm_trajectory[2 * n] == Config(odd_copy(config.state), config.z1, config.z2)


def test_bounded_probe(oscillator, incrementer, idle):
    assert bounded_probe(oscillator, 1000) == bounded_probe(oscillator, 10)
    probe = bounded_probe(oscillator, 1000)
    assert (probe.max_z1, probe.max_z2, probe.halted) == (1, 0, False)
    assert bounded_probe(incrementer, 50).max_z1 == 50
    assert bounded_probe(idle, 50).max_z1 == 0


def test_bounded_probe_reports_halting(incrementer):
    assert bounded_probe(incrementer, 10, halting=Config("s1", 3, 0)).halted


def test_copier_visits_every_flag_case():
    run = scm_run(copier_scm(2), None, 12)
    assert {c.flags for c in run.trajectory} == set(FLAG_CASES)
    assert run.final == Config("hold", 0, 2)


@pytest.mark.parametrize("height", [1, 5, 10])
def test_ramp_reaches_its_height_and_holds(height):
    scm = ramp_scm(height, pad_to=11).validate()
    assert scm.m == 11
    run = scm_run(scm, None, height + 5)
    assert run.trajectory[height] == Config(f"r{height}", height, 0)
    assert run.final == Config("hold", height, 0)


def test_ramp_cannot_pad_down():
    with pytest.raises(MachineError):
        ramp_scm(5, pad_to=3)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(1, 6))
def test_random_scm_never_underflows(seed, m):
    scm = random_scm(seed, m).validate()
    run = scm_run(scm, None, 200)
    assert run.outcome == RunOutcome.RUNNING


def test_random_machines_are_seeded():
    assert random_scm(7, 4) == random_scm(7, 4)
    assert random_cm(7, 4) == random_cm(7, 4)
