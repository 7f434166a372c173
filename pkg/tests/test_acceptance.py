"""Headline acceptance checks, one test per criterion.

Each test prints its pass/fail line (run pytest with -s or look at the
captured output of a failure) and asserts the criterion record.  The
randomized batch behind the first three criteria is solved once per
session.
"""

import pytest

from shadowprice.acceptance import (
    _Batch,
    criterion_analytical_invariants,
    criterion_complementary_slackness,
    criterion_falling_bid_market,
    criterion_initial_information_arithmetic,
    criterion_minimax,
    criterion_one_period_saddle,
    criterion_shadow_property,
    criterion_strong_duality,
)

SEED = 0


@pytest.fixture(scope="module")
def batch():
    return _Batch(seed=SEED)


def report(result):
    line = f"[{'PASS' if result.passed else 'FAIL'}] {result.name}: {result.detail}"
    print(line)
    assert result.passed, line


def test_criterion_strong_duality(batch):
    report(criterion_strong_duality(batch))


def test_criterion_shadow_price_property(batch):
    report(criterion_shadow_property(batch))


def test_criterion_complementary_slackness(batch):
    report(criterion_complementary_slackness(batch))


def test_criterion_initial_information_arithmetic():
    report(criterion_initial_information_arithmetic())


def test_criterion_falling_bid_market():
    report(criterion_falling_bid_market())


def test_criterion_one_period_saddle():
    report(criterion_one_period_saddle(SEED))


def test_criterion_minimax():
    report(criterion_minimax(SEED))


def test_criterion_analytical_invariants():
    report(criterion_analytical_invariants())
