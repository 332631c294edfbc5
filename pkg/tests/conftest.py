import pytest

_CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA] = []


@pytest.fixture
def criterion(request):
    """Record for one acceptance criterion; printed in the terminal summary.

    A test sets ``label`` and ``detail`` and flips ``ok`` once its check
    holds, so an exception or failed assert is reported as FAIL.
    """
    rec = {"label": request.node.name, "detail": "", "ok": False}
    yield rec
    request.config.stash[_CRITERIA].append(rec)


def pytest_terminal_summary(terminalreporter, config):
    recs = config.stash.get(_CRITERIA, [])
    if not recs:
        return
    terminalreporter.section("acceptance criteria")
    for rec in sorted(recs, key=lambda r: r["label"]):
        status = "PASS" if rec["ok"] else "FAIL"
        terminalreporter.write_line(f"{status}  {rec['label']}: {rec['detail']}")
