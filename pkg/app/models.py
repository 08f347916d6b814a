from dataclasses import asdict
from fractions import Fraction
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

from pydantic import AfterValidator, BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import MachineError, ParseError
from .services.compiler import CompiledNetwork
from .services.counter_machine import SCM, Config, CounterMachine
from .services.network import ArrivalProcess, ClassSpec, InitialCondition, NetworkSpec, validate_network
from .services.verification import BoundednessRecord, LoadAudit, StatusReport, VerifyReport
from .utils.rational import (
    INFINITE,
    format_optional_rational,
    format_rational,
    parse_optional_rational,
    parse_rational,
    to_decimal,
)


def _check_rational(value: Union[int, str]) -> Union[int, str]:
    parse_rational(value)
    return value


Rational = Annotated[Union[int, str], AfterValidator(_check_rational)]
Bit = Literal[0, 1]


# Network file

class ArrivalModel(BaseModel):
    period: Union[int, str] = INFINITE
    offset: Rational = "0"
    start_index: int = Field(default=0, ge=0)

    @field_validator("period")
    @classmethod
    def check_period(cls, v):
        p = parse_optional_rational(v)
        if p is not None and p <= 0:
            raise ValueError("period must be positive")
        return v


class ClassModel(BaseModel):
    id: str
    server: str
    service: Rational
    capacity: Union[int, str] = INFINITE
    next: Optional[str] = None
    priority: int
    arrival: Optional[ArrivalModel] = None

    @field_validator("service")
    @classmethod
    def check_service(cls, v):
        if parse_rational(v) < 0:
            raise ValueError("service time must be nonnegative")
        return v

    @field_validator("capacity")
    @classmethod
    def check_capacity(cls, v):
        if isinstance(v, str) and v.strip().lower() == INFINITE:
            return INFINITE
        try:
            cap = int(v)
        except ValueError as e:
            raise ValueError(f"capacity must be a nonnegative integer or \"inf\", got {v!r}") from e
        if cap < 0:
            raise ValueError(f"capacity must be nonnegative, got {cap}")
        return cap


class InServiceModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    class_id: str = Field(alias="class")
    remaining: Rational


class InitialModel(BaseModel):
    queued: Dict[str, int] = {}
    in_service: List[InServiceModel] = []


class NetworkFile(BaseModel):
    name: str
    normalized: bool = False
    classes: List[ClassModel]
    initial: InitialModel = InitialModel()
    directory: Dict[str, str] = {}
    state_index: Dict[str, int] = {}

    def to_compiled(self) -> CompiledNetwork:
        classes = []
        for c in self.classes:
            arrival = None
            if c.arrival is not None:
                arrival = ArrivalProcess(
                    parse_optional_rational(c.arrival.period),
                    parse_rational(c.arrival.offset),
                    c.arrival.start_index,
                )
            capacity = None if c.capacity == INFINITE else int(c.capacity)
            classes.append(ClassSpec(c.id, c.server, parse_rational(c.service), capacity, c.next, c.priority, arrival))
        spec = validate_network(NetworkSpec(name=self.name, classes=tuple(classes)))
        init = InitialCondition(
            queued=dict(self.initial.queued),
            in_service=tuple((s.class_id, parse_rational(s.remaining)) for s in self.initial.in_service),
        )
        return CompiledNetwork(
            spec, init, dict(self.directory), normalized=self.normalized, scm_state_index=dict(self.state_index)
        )

    @classmethod
    def from_compiled(cls, cn: CompiledNetwork) -> "NetworkFile":
        classes = []
        for c in cn.spec.classes:
            arrival = None
            if c.arrival is not None:
                arrival = ArrivalModel(
                    period=format_optional_rational(c.arrival.period),
                    offset=format_rational(c.arrival.offset),
                    start_index=c.arrival.start_index,
                )
            classes.append(
                ClassModel(
                    id=c.class_id,
                    server=c.server_id,
                    service=format_rational(c.service_time),
                    capacity=INFINITE if c.capacity is None else c.capacity,
                    next=c.next_class,
                    priority=c.priority,
                    arrival=arrival,
                )
            )
        initial = InitialModel(
            queued=dict(cn.init.queued),
            in_service=[InServiceModel(class_id=cid, remaining=format_rational(r)) for cid, r in cn.init.in_service],
        )
        return cls(
            name=cn.spec.name,
            normalized=cn.normalized,
            classes=classes,
            initial=initial,
            directory=dict(cn.directory),
            state_index=dict(cn.scm_state_index),
        )


def _parse_error(e: ValidationError, path: Optional[str]) -> ParseError:
    first = e.errors()[0]
    where = ".".join(str(p) for p in first["loc"])
    return ParseError(first["msg"], path=path, field=where)


def parse_network(text: str, path: Optional[str] = None) -> CompiledNetwork:
    try:
        return NetworkFile.model_validate_json(text).to_compiled()
    except ValidationError as e:
        raise _parse_error(e, path) from e


def serialize_network(cn: CompiledNetwork) -> str:
    return NetworkFile.from_compiled(cn).model_dump_json(indent=2, by_alias=True) + "\n"


# Machine files

class GammaRow(BaseModel):
    state: str
    b1: Bit
    b2: Bit
    next: str
    delta: Tuple[int, int]


class HaltingModel(BaseModel):
    state: str
    z1: int = Field(default=0, ge=0)
    z2: int = Field(default=0, ge=0)


class CMFile(BaseModel):
    states: List[str]
    gamma: List[GammaRow]
    initial: str
    halting: HaltingModel

    def to_machine(self) -> CounterMachine:
        gamma = {}
        for row in self.gamma:
            key = (row.state, row.b1, row.b2)
            if key in gamma:
                raise MachineError(f"gamma defined twice at {key}")
            gamma[key] = (row.next, tuple(row.delta))
        halting = Config(self.halting.state, self.halting.z1, self.halting.z2)
        return CounterMachine(tuple(self.states), gamma, self.initial, halting).validate()


class AlphaRow(BaseModel):
    state: str
    b1: Bit
    b2: Bit
    next: str


class BetaRow(BaseModel):
    state: str
    delta: Tuple[int, int]


class SCMFile(BaseModel):
    states: List[str]
    alpha: List[AlphaRow]
    beta: List[BetaRow]
    initial: str

    def to_machine(self) -> SCM:
        alpha = {}
        for row in self.alpha:
            key = (row.state, row.b1, row.b2)
            if key in alpha:
                raise MachineError(f"alpha defined twice at {key}")
            alpha[key] = row.next
        beta = {}
        for row in self.beta:
            if row.state in beta:
                raise MachineError(f"beta defined twice at {row.state}")
            beta[row.state] = tuple(row.delta)
        return SCM(tuple(self.states), alpha, beta, self.initial).validate()

    @classmethod
    def from_machine(cls, scm: SCM) -> "SCMFile":
        alpha = [AlphaRow(state=s, b1=b1, b2=b2, next=n) for (s, b1, b2), n in scm.alpha.items()]
        beta = [BetaRow(state=s, delta=scm.beta[s]) for s in scm.states]
        return cls(states=list(scm.states), alpha=alpha, beta=beta, initial=scm.initial)


# Reports

class StatusRow(BaseModel):
    t: int
    status_mn: int
    status_sn1: int
    status_sn2: int
    expected_state: str
    expected_index: int
    expected_z1: int
    expected_z2: int
    match: bool

    @classmethod
    def from_status(cls, s: StatusReport) -> "StatusRow":
        return cls(
            t=s.t,
            status_mn=s.status_mn,
            status_sn1=s.status_sn1,
            status_sn2=s.status_sn2,
            expected_state=s.expected.state,
            expected_index=s.expected_index,
            expected_z1=s.expected.z1,
            expected_z2=s.expected.z2,
            match=s.match,
        )


class ViolationRow(BaseModel):
    check: str
    cycle: int
    time: str
    detail: str


class BoundednessModel(BaseModel):
    max_counter: int
    bound: int
    left_limit_max: int
    within_bound: bool
    excess: int
    growth: bool


class VerifyReportFile(BaseModel):
    machine: str
    cycles: int
    normalized: bool
    ok: bool
    first_mismatch: Optional[int] = None
    max_total_jobs: int
    boundedness: Optional[BoundednessModel] = None
    violations: List[ViolationRow] = []
    left_limit_totals: List[int] = []
    statuses: List[StatusRow] = []

    @classmethod
    def from_report(
        cls, machine: str, report: VerifyReport, boundedness: Optional[BoundednessRecord] = None
    ) -> "VerifyReportFile":
        return cls(
            machine=machine,
            cycles=report.cycles,
            normalized=report.normalized,
            ok=report.ok,
            first_mismatch=report.first_mismatch,
            max_total_jobs=report.max_total_jobs,
            boundedness=BoundednessModel(**asdict(boundedness)) if boundedness else None,
            violations=[
                ViolationRow(check=v.check, cycle=v.cycle, time=format_rational(v.time), detail=v.detail)
                for v in report.violations
            ],
            left_limit_totals=list(report.left_limit_totals),
            statuses=[StatusRow.from_status(s) for s in report.statuses],
        )


class LoadRow(BaseModel):
    server: str
    load: str
    load_decimal: str
    ok: bool

    @classmethod
    def from_audit(cls, server: str, audit: LoadAudit, places: int = 6) -> "LoadRow":
        return cls(server=server, load=format_rational(audit.load), load_decimal=to_decimal(audit.load, places), ok=audit.ok)


def probe_spec(text: str) -> Tuple[List[str], Fraction]:
    """Parse `W:<class>,<class>@<cadence>` into the class list and cadence"""
    if not text.startswith("W:") or "@" not in text:
        raise ParseError(f"probe must look like W:<class>,<class>@<cadence>, got {text!r}", field="probe")
    classes, cadence = text[2:].rsplit("@", 1)
    names = [c.strip() for c in classes.split(",") if c.strip()]
    if not names:
        raise ParseError("probe names no classes", field="probe")
    try:
        period = parse_rational(cadence)
    except ValueError as e:
        raise ParseError(str(e), field="probe") from e
    if period <= 0:
        raise ParseError("probe cadence must be positive", field="probe")
    return names, period
