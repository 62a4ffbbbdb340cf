import pytest

from pfsurrogate.caseparse import bundled_case_path, parse_case
from pfsurrogate.netmodel import Branch, Bus, BusKind, Generator, Network

CASES = {"case9": 9, "case24": 24, "case39": 39, "case57": 57, "case118": 118}


@pytest.fixture(scope="session")
def case_text():
    return {name: bundled_case_path(name).read_text() for name in CASES}


@pytest.fixture(scope="session")
def nets(case_text):
    return {name: parse_case(text) for name, text in case_text.items()}


def two_bus(p_load=100.0, q_load=0.0, r=0.0, x=0.1, b_charge=0.0):
    """Slack at bus 1, PQ load at bus 2, one line."""
    return Network(
        base_mva=100.0,
        buses=[Bus(1, BusKind.SLACK), Bus(2, BusKind.PQ, p_demand=p_load, q_demand=q_load)],
        branches=[Branch(1, 2, r=r, x=x, b_charge=b_charge)],
        gens=[Generator(1, v_set=1.0)],
    )


@pytest.fixture
def lossless_two_bus():
    return two_bus()
