import pytest

from ellreg.arith import RATIONALS, AbelianField
from ellreg.curve import EllipticCurveData, periods
from ellreg.lfun import lvalues_all
from ellreg.mpnum import PrecisionContext

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def acceptance_record():
    def record(number: int, ok: bool, detail: str):
        _ACCEPTANCE[number] = (bool(ok), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def ctx40():
    return PrecisionContext.from_digits(40)


@pytest.fixture(scope="session")
def ctx192():
    return PrecisionContext(192)


@pytest.fixture(scope="session")
def e11():
    return EllipticCurveData.from_label("11a1")


@pytest.fixture(scope="session")
def e37():
    return EllipticCurveData.from_label("37a1")


@pytest.fixture(scope="session")
def lat11(e11, ctx40):
    return periods(e11, ctx40)


@pytest.fixture(scope="session")
def lat37(e37, ctx40):
    return periods(e37, ctx40)


@pytest.fixture(scope="session")
def field5():
    return AbelianField(5)


@pytest.fixture(scope="session")
def field11():
    return AbelianField(11, (10,))


@pytest.fixture(scope="session")
def lv11_Q(e11, ctx40):
    return lvalues_all(e11, RATIONALS, ctx40)


@pytest.fixture(scope="session")
def lv11_m5(e11, field5, ctx40):
    return lvalues_all(e11, field5, ctx40)


@pytest.fixture(scope="session")
def lv11_m11(e11, field11, ctx40):
    return lvalues_all(e11, field11, ctx40)
