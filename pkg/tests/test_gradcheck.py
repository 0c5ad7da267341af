"""The finite-difference checker itself: exactness, reporting, guards."""

import numpy as np
import pytest

from mixcast.runtime import GradCheckError, Parameter, grad_check, ops


def test_quadratic_loss_is_exact_up_to_roundoff():
    # Central differences are exact for quadratics; only roundoff remains.
    rng = np.random.default_rng(0)
    p = Parameter("p", rng.uniform(-2, 2, size=(4, 3)))
    report = grad_check(lambda: ops.sum(ops.mul(p, p)), [p], delta=1e-4, tol=1e-8)
    assert report.passed, report.format()
    assert report.max_rel_err < 1e-8


def test_disconnected_parameter_reports_zero_error():
    used = Parameter("used", [1.0, -1.0])
    spare = Parameter("spare", [[0.5, 0.5]])
    report = grad_check(lambda: ops.sum(ops.mul(used, used)), [used, spare],
                        tol=1e-8)
    spare_check = next(c for c in report.per_param if c.pid == "spare")
    assert spare_check.max_rel_err == 0.0
    assert spare_check.worst_analytic == 0.0


def test_nondeterministic_model_fn_detected():
    p = Parameter("p", [1.0])
    state = {"calls": 0}

    def noisy():
        state["calls"] += 1
        return ops.sum(ops.mul(p, ops.const(float(state["calls"]))))

    with pytest.raises(GradCheckError, match="deterministic"):
        grad_check(noisy, [p])


def test_invalid_delta_rejected():
    p = Parameter("p", [1.0])
    with pytest.raises(ValueError, match="delta"):
        grad_check(lambda: ops.sum(p), [p], delta=0.0)


def test_entry_sampling_is_seeded_and_bounded():
    rng = np.random.default_rng(1)
    p = Parameter("p", rng.uniform(-1, 1, size=(30,)))
    report = grad_check(lambda: ops.sum(ops.mul(p, p)), [p],
                        max_entries_per_param=10,
                        rng=np.random.default_rng(123))
    assert report.per_param[0].n_checked == 10
    report2 = grad_check(lambda: ops.sum(ops.mul(p, p)), [p],
                         max_entries_per_param=10,
                         rng=np.random.default_rng(123))
    assert report.per_param[0].worst_index == report2.per_param[0].worst_index


def test_report_format_mentions_verdict():
    p = Parameter("p", [2.0])
    report = grad_check(lambda: ops.sum(ops.mul(p, p)), [p], tol=1e-6)
    text = report.format()
    assert "PASS" in text and "max_rel_err" in text
