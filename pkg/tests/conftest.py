"""Session-level guard: the radial oracles must pass their independent check
before any test that relies on them runs."""
import pytest

from gplap.oracle import radial_oracle, verify_radial_oracle

ORACLE_CASES = [
    (1.0, 1.0, 2.0, 2),
    (1.0, -0.5, 2.5, 2),
    (1.0, 0.0, 3.0, 2),
    (0.7, 0.5, 1.5, 2),
    (1.3, 2.0, 4.0, 2),
    (1.0, -0.5, 2.5, 3),
]


def pytest_sessionstart(session):
    for c, gamma, p, n in ORACLE_CASES:
        o = radial_oracle(c, gamma, p, n)
        h = 1.0 / 32 if n == 2 else 1.0 / 8
        try:
            verify_radial_oracle(o, h=h)
        except AssertionError as exc:
            pytest.exit(f"radial oracle check failed for c={c}, gamma={gamma}, p={p}, n={n}: {exc}",
                        returncode=3)


_criteria = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_criteria] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    number, title = mark.args
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    status = "PASS" if rep.passed else "FAIL"
    item.config.stash[_criteria][(number, item.nodeid)] = f"criterion {number:>2} {status}  {title}  [{detail}]"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_criteria, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for key in sorted(lines):
            terminalreporter.write_line(lines[key])
