"""Two-counter machines and simplified counter machines: interpreters, the
CM -> SCM transform, budget-bounded probes and a few machine families used
for verification runs."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import MachineError, NegativeCounterError

logger = logging.getLogger(__name__)

Delta = Tuple[int, int]
Flags = Tuple[int, int]

LEGAL_DELTAS: Tuple[Delta, ...] = ((-1, 0), (0, -1), (0, 0), (1, 0), (0, 1))
ALL_TAGS: Tuple[Delta, ...] = tuple((d1, d2) for d1 in (-1, 0, 1) for d2 in (-1, 0, 1))
FLAG_CASES: Tuple[Flags, ...] = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class Config:
    state: str
    z1: int = 0
    z2: int = 0

    @property
    def flags(self) -> Flags:
        return (int(self.z1 > 0), int(self.z2 > 0))


@dataclass(frozen=True)
class CounterMachine:
    states: Tuple[str, ...]
    gamma: Dict[Tuple[str, int, int], Tuple[str, Delta]]
    initial: str
    halting: Config

    def validate(self) -> "CounterMachine":
        known = set(self.states)
        if len(known) != len(self.states):
            raise MachineError("duplicate state names")
        if self.initial not in known:
            raise MachineError(f"initial state {self.initial!r} is not a state")
        if self.halting.state not in known:
            raise MachineError(f"halting state {self.halting.state!r} is not a state")
        for s in self.states:
            for b1, b2 in FLAG_CASES:
                if (s, b1, b2) not in self.gamma:
                    raise MachineError(f"gamma undefined at ({s}, {b1}, {b2})")
                nxt, delta = self.gamma[(s, b1, b2)]
                if nxt not in known:
                    raise MachineError(f"gamma({s}, {b1}, {b2}) names unknown state {nxt!r}")
                if tuple(delta) not in LEGAL_DELTAS:
                    raise MachineError(f"gamma({s}, {b1}, {b2}) has illegal delta {delta}")
        return self


@dataclass(frozen=True)
class SCM:
    """Counter machine whose counter update depends only on the new state"""

    states: Tuple[str, ...]
    alpha: Dict[Tuple[str, int, int], str]
    beta: Dict[str, Delta]
    initial: str

    def validate(self) -> "SCM":
        known = set(self.states)
        if not self.states:
            raise MachineError("machine has no states")
        if len(known) != len(self.states):
            raise MachineError("duplicate state names")
        if self.initial not in known:
            raise MachineError(f"initial state {self.initial!r} is not a state")
        for s in self.states:
            for b1, b2 in FLAG_CASES:
                nxt = self.alpha.get((s, b1, b2))
                if nxt is None:
                    raise MachineError(f"alpha undefined at ({s}, {b1}, {b2})")
                if nxt not in known:
                    raise MachineError(f"alpha({s}, {b1}, {b2}) names unknown state {nxt!r}")
            delta = self.beta.get(s)
            if delta is None:
                raise MachineError(f"beta undefined at {s}")
            if tuple(delta) not in ALL_TAGS:
                raise MachineError(f"beta({s}) = {delta} is not a counter delta")
        return self

    @property
    def m(self) -> int:
        return len(self.states)

    def index(self, state: str) -> int:
        """1-based position of a state, the j used to name network classes"""
        return self.states.index(state) + 1

    def gamma(self, state: str, b1: int, b2: int) -> Tuple[str, Delta]:
        nxt = self.alpha[(state, b1, b2)]
        return nxt, self.beta[nxt]


class RunOutcome(str, Enum):
    HALTED = "HALTED"
    RUNNING = "RUNNING"
    ERROR = "ERROR"


@dataclass
class RunResult:
    trajectory: List[Config]
    outcome: RunOutcome
    error: Optional[NegativeCounterError] = None

    @property
    def final(self) -> Config:
        return self.trajectory[-1]


@dataclass(frozen=True)
class ProbeResult:
    max_z1: int
    max_z2: int
    halted: bool


def _apply(config: Config, nxt: str, delta: Delta, step: int) -> Config:
    z1, z2 = config.z1 + delta[0], config.z2 + delta[1]
    if z1 < 0 or z2 < 0:
        raise NegativeCounterError(
            f"step {step}: delta {delta} from ({config.state}, {config.z1}, {config.z2}) drives a counter negative",
            step=step,
        )
    return Config(nxt, z1, z2)


def cm_step(cm: CounterMachine, config: Config, step: int = 1) -> Config:
    nxt, delta = cm.gamma[(config.state, *config.flags)]
    return _apply(config, nxt, delta, step)


def scm_step(scm: SCM, config: Config, step: int = 1) -> Config:
    nxt, delta = scm.gamma(config.state, *config.flags)
    return _apply(config, nxt, delta, step)


def _run(step_fn, start: Config, budget: int, halting: Optional[Config], strict: bool) -> RunResult:
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    trajectory = [start]
    config = start
    for n in range(1, budget + 1):
        try:
            config = step_fn(config, n)
        except NegativeCounterError as e:
            if strict:
                raise
            return RunResult(trajectory, RunOutcome.ERROR, e)
        trajectory.append(config)
        if halting is not None and config == halting:
            return RunResult(trajectory, RunOutcome.HALTED)
    return RunResult(trajectory, RunOutcome.RUNNING)


def cm_run(cm: CounterMachine, config: Optional[Config], budget: int, strict: bool = True) -> RunResult:
    """Iterate cm_step up to `budget` times, stopping at the halting configuration.

    With strict=False a negative counter ends the run with outcome ERROR instead
    of raising.
    """
    start = config or Config(cm.initial)
    return _run(lambda c, n: cm_step(cm, c, n), start, budget, cm.halting, strict)


def scm_run(
    scm: SCM,
    config: Optional[Config],
    budget: int,
    halting: Optional[Config] = None,
    strict: bool = True,
) -> RunResult:
    start = config or Config(scm.initial)
    return _run(lambda c, n: scm_step(scm, c, n), start, budget, halting, strict)


def odd_copy(state: str) -> str:
    return f"{state}/odd"


def even_copy(state: str, delta: Delta) -> str:
    return f"{state}/even[{delta[0]},{delta[1]}]"


def cm_to_scm(cm: CounterMachine) -> SCM:
    """Each CM step becomes two SCM steps: first into an even copy of the target
    state tagged with the delta, then back to the target's odd copy."""
    states: List[str] = [odd_copy(s) for s in cm.states]
    alpha: Dict[Tuple[str, int, int], str] = {}
    beta: Dict[str, Delta] = {}
    for s in cm.states:
        beta[odd_copy(s)] = (0, 0)
        for b1, b2 in FLAG_CASES:
            nxt, delta = cm.gamma[(s, b1, b2)]
            alpha[(odd_copy(s), b1, b2)] = even_copy(nxt, tuple(delta))
    for s in cm.states:
        for tag in ALL_TAGS:
            name = even_copy(s, tag)
            states.append(name)
            beta[name] = tag
            for b1, b2 in FLAG_CASES:
                alpha[(name, b1, b2)] = odd_copy(s)
    return SCM(tuple(states), alpha, beta, odd_copy(cm.initial))


def bounded_probe(
    scm: SCM, budget: int, config: Optional[Config] = None, halting: Optional[Config] = None
) -> ProbeResult:
    run = scm_run(scm, config, budget, halting=halting)
    return ProbeResult(
        max_z1=max(c.z1 for c in run.trajectory),
        max_z2=max(c.z2 for c in run.trajectory),
        halted=run.outcome == RunOutcome.HALTED,
    )


# Machine families


def _constant_alpha(states: Sequence[str], targets: Dict[str, str]) -> Dict[Tuple[str, int, int], str]:
    return {(s, b1, b2): targets[s] for s in states for b1, b2 in FLAG_CASES}


def incrementer_scm() -> SCM:
    return SCM(("s1",), _constant_alpha(["s1"], {"s1": "s1"}), {"s1": (1, 0)}, "s1")


def idle_scm() -> SCM:
    return SCM(("s1",), _constant_alpha(["s1"], {"s1": "s1"}), {"s1": (0, 0)}, "s1")


def oscillator_scm() -> SCM:
    """`inc` is the state the next step increments from, `dec` the one it decrements from"""
    states = ("inc", "dec")
    return SCM(states, _constant_alpha(states, {"inc": "dec", "dec": "inc"}), {"inc": (-1, 0), "dec": (1, 0)}, "inc")


def ramp_scm(height: int, pad_to: Optional[int] = None) -> SCM:
    """Increment counter 1 `height` times, then hold. Padding states are
    unreachable and keep the state count fixed across heights."""
    ramp = [f"r{k}" for k in range(1, height + 1)]
    states = ["hold"] + ramp
    if pad_to is not None:
        if pad_to < len(states):
            raise MachineError(f"cannot pad {len(states)} states down to {pad_to}")
        states += [f"pad{k}" for k in range(1, pad_to - len(states) + 1)]
    alpha: Dict[Tuple[str, int, int], str] = {}
    beta: Dict[str, Delta] = {}
    for s in states:
        beta[s] = (0, 0)
        for b1, b2 in FLAG_CASES:
            alpha[(s, b1, b2)] = s
    for k, s in enumerate(ramp):
        beta[s] = (1, 0)
        nxt = ramp[k + 1] if k + 1 < len(ramp) else "hold"
        for b1, b2 in FLAG_CASES:
            alpha[(s, b1, b2)] = nxt
    if ramp:
        alpha[("hold", 0, 0)] = ramp[0]
    return SCM(tuple(states), alpha, beta, "hold")


def copier_scm(load: int = 2) -> SCM:
    """Load counter 1 with `load` increments, move it into counter 2 one unit
    at a time, then hold. The run sees all four zero/nonzero flag cases."""
    loaders = [f"load{k}" for k in range(1, load + 1)]
    states = ["hold"] + loaders + ["take", "give"]
    alpha: Dict[Tuple[str, int, int], str] = {}
    beta: Dict[str, Delta] = {"hold": (0, 0), "take": (-1, 0), "give": (0, 1)}
    for s in states:
        for b1, b2 in FLAG_CASES:
            alpha[(s, b1, b2)] = "hold"
    for k, s in enumerate(loaders):
        beta[s] = (1, 0)
        nxt = loaders[k + 1] if k + 1 < len(loaders) else "take"
        for b1, b2 in FLAG_CASES:
            alpha[(s, b1, b2)] = nxt
    alpha[("hold", 0, 0)] = loaders[0] if loaders else "hold"
    for b1, b2 in FLAG_CASES:
        alpha[("take", b1, b2)] = "give"
        if b1:
            alpha[("give", b1, b2)] = "take"
    return SCM(tuple(states), alpha, beta, "hold")


def _safe(delta: Delta, flags: Flags) -> bool:
    return not ((delta[0] < 0 and flags[0] == 0) or (delta[1] < 0 and flags[1] == 0))


def random_scm(seed: int, m: int) -> SCM:
    """Random SCM whose every reachable step keeps the counters nonnegative:
    alpha only picks targets whose beta is safe under the observed flags."""
    if m < 1:
        raise MachineError("a machine needs at least one state")
    rng = np.random.default_rng(seed)
    states = tuple(f"s{k}" for k in range(1, m + 1))
    beta: Dict[str, Delta] = {s: LEGAL_DELTAS[int(rng.integers(len(LEGAL_DELTAS)))] for s in states}
    beta[states[int(rng.integers(m))]] = (0, 0)
    alpha: Dict[Tuple[str, int, int], str] = {}
    for s in states:
        for flags in FLAG_CASES:
            allowed = [t for t in states if _safe(beta[t], flags)]
            alpha[(s, *flags)] = allowed[int(rng.integers(len(allowed)))]
    return SCM(states, alpha, beta, states[0])


def random_cm(seed: int, m: int) -> CounterMachine:
    if m < 1:
        raise MachineError("a machine needs at least one state")
    rng = np.random.default_rng(seed)
    states = tuple(f"q{k}" for k in range(1, m + 1))
    gamma: Dict[Tuple[str, int, int], Tuple[str, Delta]] = {}
    for s in states:
        for flags in FLAG_CASES:
            deltas = [d for d in LEGAL_DELTAS if _safe(d, flags)]
            gamma[(s, *flags)] = (states[int(rng.integers(m))], deltas[int(rng.integers(len(deltas)))])
    halting = Config(states[-1], int(rng.integers(3)), int(rng.integers(3)))
    return CounterMachine(states, gamma, states[0], halting)
