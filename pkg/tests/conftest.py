from fractions import Fraction

import pytest

from app.services.compiler import build_rs_network, compile_scm
from app.services.counter_machine import copier_scm, idle_scm, incrementer_scm, oscillator_scm
from app.services.network import ArrivalProcess, ClassSpec, NetworkSpec, validate_network

F = Fraction


def make_class(cid, server, service, capacity=None, nxt=None, priority=1, arrival=None):
    return ClassSpec(cid, server, F(service), capacity, nxt, priority, arrival)


def make_network(*classes, name="test"):
    return validate_network(NetworkSpec(name=name, classes=tuple(classes)))


def arrivals(period, offset=0, start_index=0):
    return ArrivalProcess(None if period is None else F(period), F(offset), start_index)


@pytest.fixture
def incrementer():
    return incrementer_scm()


@pytest.fixture
def oscillator():
    return oscillator_scm()


@pytest.fixture
def idle():
    return idle_scm()


@pytest.fixture
def copier():
    return copier_scm()


@pytest.fixture
def compiled_incrementer(incrementer):
    return compile_scm(incrementer)


@pytest.fixture
def compiled_oscillator(oscillator):
    return compile_scm(oscillator)


@pytest.fixture
def rs_network():
    return build_rs_network(2)
