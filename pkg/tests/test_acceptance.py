"""Long lockstep runs over the machine families, plain and load-normalized."""

import pytest

from app.services.counter_machine import copier_scm, incrementer_scm, oscillator_scm, random_scm
from app.services.verification import verify_boundedness, verify_lockstep

CYCLES = 200

MACHINES = {
    "incrementer": incrementer_scm(),
    "oscillator": oscillator_scm(),
    "copier": copier_scm(2),
    **{f"random-{seed}": random_scm(seed, 2 + seed % 3) for seed in range(10)},
}

pytestmark = pytest.mark.slow


@pytest.mark.parametrize("normalized", [False, True], ids=["plain", "normalized"])
@pytest.mark.parametrize("name", sorted(MACHINES))
def test_statuses_follow_machine(name, normalized):
    report = verify_lockstep(MACHINES[name], CYCLES, normalized=normalized)
    assert report.first_mismatch is None, report.first_mismatch
    assert report.violations == [], report.violations[:3]
    assert len(report.statuses) == CYCLES + 1


def test_oscillator_stays_bounded_for_500_cycles():
    scm = oscillator_scm()
    report = verify_lockstep(scm, 500)
    assert report.ok
    bounds = verify_boundedness(scm, 500, report)
    assert bounds.within_bound
    assert bounds.left_limit_max <= bounds.bound
    assert not bounds.growth
