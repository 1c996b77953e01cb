from fractions import Fraction

import pytest
from hypothesis import settings
from hypothesis import strategies as st

from khinlab.exactnum import surrogate_family

settings.register_profile("lab", deadline=None, max_examples=60)
settings.load_profile("lab")


def ratios(max_den: int = 10**6, lo: int = -5, hi: int = 5):
    return st.builds(
        lambda n, d: Fraction(n, d),
        st.integers(lo * max_den, hi * max_den),
        st.integers(1, max_den),
    )


@pytest.fixture(scope="session", params=["quad-sqrt2", "quad-pair", "liouville"])
def gamma(request):
    return surrogate_family(request.param)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
