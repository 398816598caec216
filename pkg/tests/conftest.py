import pytest

_CRITERIA: dict[int, dict] = {}


class CriterionRecorder:
    def __init__(self, number: int, title: str):
        self.entry = _CRITERIA.setdefault(number, {"title": title, "detail": "", "outcome": None})

    def detail(self, text: str):
        self.entry["detail"] = text


@pytest.fixture
def criterion(request):
    mark = request.node.get_closest_marker("acceptance")
    number, title = mark.args
    rec = CriterionRecorder(number, title)
    request.node.criterion_number = number
    return rec


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    number = getattr(item, "criterion_number", None)
    if number is None:
        return
    entry = _CRITERIA[number]
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        entry["outcome"] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        line = f"criterion {n:2d} {e['outcome'] or 'NOT RUN'}: {e['title']}"
        if e["detail"]:
            line += f" [{e['detail']}]"
        terminalreporter.write_line(line)
