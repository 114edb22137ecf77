"""Acceptance suite: every criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v` to get one pass/fail line per
criterion, or `kamtori verify-acceptance` for the same checks outside
pytest. Paper-sized workloads (10^5-step runs, full step-size grids) make
this module take a few minutes.

Two criteria are strict expected failures with the measured analysis in
their assertion messages: the symplectic-Euler drift order (actual drift is
O(h^2) on the pendulum) and the 3-DOF equal-spacing peak family (implicit
midpoint conserves the quadratic actions exactly).
"""

import pytest

from kamtori.acceptance import CRITERIA, EXPECTED_FAILURES, Context


@pytest.fixture(scope="module")
def ctx():
    return Context(fast=False)


@pytest.mark.parametrize(
    "cid,description,check",
    [
        pytest.param(
            cid,
            description,
            check,
            id=cid,
            marks=(
                [pytest.mark.xfail(reason=EXPECTED_FAILURES[cid], strict=True)]
                if cid in EXPECTED_FAILURES
                else []
            ),
        )
        for cid, description, check in CRITERIA
    ],
)
def test_acceptance_criterion(ctx, cid, description, check):
    detail = check(ctx)
    print(f"{cid}: {detail}")
