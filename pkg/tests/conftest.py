import itertools
from fractions import Fraction

import pytest

from lookdown import validate_spec


@pytest.fixture
def spec233():
    return validate_spec({"X": (2, 3, 3), "litters": ((2, 1), (2, 1, 0))})


def brute_completely_neutral(spec):
    """Uniform law over all parent maps whose out-degree profile matches the
    spec; written independently of the package samplers."""
    valid = []
    ranges = [itertools.product(range(spec.X[n]), repeat=spec.X[n + 1]) for n in range(spec.last)]
    for maps in itertools.product(*ranges):
        ok = True
        for n, m in enumerate(maps):
            od = sorted((m.count(i) for i in range(spec.X[n])), reverse=True)
            if tuple(od) != spec.litters[n]:
                ok = False
                break
        if ok:
            valid.append(maps)
    return {m: Fraction(1, len(valid)) for m in valid}


def brute_expected_max_frequency(spec, n):
    """E[max_v x_last(v)] over generation n under the brute-force law."""
    total = Fraction(0)
    last = spec.last
    for maps, p in brute_completely_neutral(spec).items():
        anc = list(range(spec.X[last]))
        for j in range(last - 1, n - 1, -1):
            anc = [maps[j][a] for a in anc]
        top = max(anc.count(v) for v in set(anc))
        total += p * Fraction(top, spec.X[last])
    return total


# one line per acceptance criterion, filled by test_acceptance
ACCEPTANCE = []


def _criterion_order(line):
    tag = line.split()[1]
    return int(tag.rstrip("ab")), tag


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=_criterion_order):
            terminalreporter.write_line(line)
