"""The ten acceptance criteria, run once per session at seed 0."""

import pytest

from geoblock import experiments as E

from conftest import ACCEPTANCE

SEED = 0


@pytest.fixture(scope="session")
def first_run():
    return {}


def _run(k, first_run):
    if k not in first_run:
        first_run[k] = E.CRITERIA[k](1, SEED)
    out = first_run[k]
    ACCEPTANCE[k] = out
    print(f"criterion {k}: {'PASS' if out.passed else 'FAIL'} {out.summary}")
    return out


@pytest.mark.slow
@pytest.mark.parametrize("k", sorted(E.CRITERIA))
def test_criterion(k, first_run):
    out = _run(k, first_run)
    assert out.passed, out.summary


@pytest.mark.slow
def test_criterion_10_determinism(first_run):
    for k in E.CRITERIA:
        _run(k, first_run)
    out = E.determinism({k: first_run[k] for k in E.CRITERIA}, SEED)
    ACCEPTANCE[10] = out
    print(f"criterion 10: {'PASS' if out.passed else 'FAIL'} {out.summary}")
    assert out.passed, out.summary
