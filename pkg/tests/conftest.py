import textwrap

import pytest

from gpopf.caseio.parser import load_case, parse_case

# lossless line, x = 0.1 pu, 50 MW load at the far end, no reactive demand
TWO_BUS = textwrap.dedent(
    """
    function mpc = two_bus
    mpc.version = '2';
    mpc.baseMVA = 100;
    mpc.bus = [
        1   3   0   0   0   0   1   1.0   0   230   1   1.1   0.9;
        2   1   50  0   0   0   1   1.0   0   230   1   1.1   0.9;
    ];
    mpc.gen = [
        1   0   0   100   -100   1.0   100   1   200   0;
    ];
    mpc.branch = [
        1   2   0   0.1   0   0   0   0   0   0   1   -360   360;
    ];
    mpc.gencost = [
        2   0   0   3   0.01   10   0;
    ];
    """
)

# baseMVA 1 so MW and pu coincide; 1 MW load at bus 2
DC_ONE_GEN = textwrap.dedent(
    """
    function mpc = dc_one_gen
    mpc.version = '2';
    mpc.baseMVA = 1;
    mpc.bus = [
        1   3   0   0   0   0   1   1   0   1   1   1.1   0.9;
        2   1   1   0   0   0   1   1   0   1   1   1.1   0.9;
    ];
    mpc.gen = [
        1   0   0   0   0   1   1   1   5   0;
    ];
    mpc.branch = [
        1   2   0   0.1   0   0   0   0   0   0   1   -360   360;
    ];
    mpc.gencost = [
        2   0   0   2   1   0;
    ];
    """
)

# two quadratic units sharing 1 MW: p1^2 + 2 p2^2 -> (2/3, 1/3)
DC_TWO_GEN = textwrap.dedent(
    """
    function mpc = dc_two_gen
    mpc.version = '2';
    mpc.baseMVA = 1;
    mpc.bus = [
        1   3   0   0   0   0   1   1   0   1   1   1.1   0.9;
        2   2   1   0   0   0   1   1   0   1   1   1.1   0.9;
    ];
    mpc.gen = [
        1   0   0   0   0   1   1   1   5   0;
        2   0   0   0   0   1   1   1   5   0;
    ];
    mpc.branch = [
        1   2   0   0.1   0   0   0   0   0   0   1   -360   360;
    ];
    mpc.gencost = [
        2   0   0   3   1   0   0;
        2   0   0   3   2   0   0;
    ];
    """
)


@pytest.fixture
def two_bus():
    return parse_case(TWO_BUS)


@pytest.fixture
def dc_one_gen():
    return parse_case(DC_ONE_GEN)


@pytest.fixture
def dc_two_gen():
    return parse_case(DC_TWO_GEN)


@pytest.fixture(scope="session")
def case14():
    return load_case("case14")


@pytest.fixture(scope="session")
def case30():
    return load_case("case30")


@pytest.fixture(scope="session")
def case14_renewable(case14):
    from gpopf.caseio.model import add_renewables, renewable_capacities

    return add_renewables(case14, [7, 9, 14], renewable_capacities(case14, 3, 10.0))


@pytest.fixture(scope="session")
def spec14(case14_renewable):
    from gpopf.popf.uncertainty import build_uncertainty

    return build_uncertainty(case14_renewable, [7, 9, 14], load_fraction=0.1, renewable_fraction=1.0)
