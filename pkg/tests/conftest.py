import pytest
from hypothesis import settings

from asymverify import ModelConfig, honest_claim

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture
def ref_config():
    return ModelConfig("ref", 0, 50257, 4096)


@pytest.fixture
def prompt():
    return [11, 22, 33, 44, 55, 66, 77, 88]


@pytest.fixture
def claim_792(ref_config, prompt):
    """Honest 792-token claim split into 20 segments."""
    return honest_claim(ref_config, prompt, 792, 20)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion, printed in the summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def report(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip()
        lines.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
