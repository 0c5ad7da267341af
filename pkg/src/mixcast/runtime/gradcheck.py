"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Parameter, Tensor, backward


class GradCheckError(RuntimeError):
    """The check could not be run (e.g. non-deterministic model function)."""


def relative_error(analytic: float, numeric: float) -> float:
    """|a - f| / max(1, |a|, |f|); the unit floor keeps near-zero gradients
    from turning finite-difference noise into spurious failures."""
    return abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))


@dataclass
class ParamCheck:
    pid: str
    n_checked: int
    max_rel_err: float
    worst_index: tuple[int, ...]
    worst_analytic: float
    worst_numeric: float


@dataclass
class GradCheckReport:
    delta: float
    tol: float
    per_param: list[ParamCheck] = field(default_factory=list)

    @property
    def max_rel_err(self) -> float:
        return max((c.max_rel_err for c in self.per_param), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol

    def format(self) -> str:
        lines = [
            f"gradient check: delta={self.delta:g} tol={self.tol:g} "
            f"(relative error |a-f|/max(1,|a|,|f|))"
        ]
        for c in sorted(self.per_param, key=lambda c: -c.max_rel_err):
            lines.append(
                f"  {c.pid:<40s} entries={c.n_checked:<5d} "
                f"max_rel_err={c.max_rel_err:.3e} at {c.worst_index} "
                f"(analytic={c.worst_analytic:+.6e} numeric={c.worst_numeric:+.6e})"
            )
        lines.append(f"overall max_rel_err={self.max_rel_err:.3e} -> "
                     f"{'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def grad_check(
    model_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    delta: float = 1e-4,
    tol: float = 1e-3,
    max_entries_per_param: int | None = 200,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare reverse-mode gradients against central finite differences.

    ``model_fn`` must rebuild the scalar loss from the current parameter
    values and be deterministic; two identical forward passes are compared
    first and a mismatch raises :class:`GradCheckError`. For each parameter,
    up to ``max_entries_per_param`` entries are perturbed by +/- delta and
    the worst relative error is reported.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    rng = rng or np.random.default_rng(0)

    l1 = model_fn().data
    l2 = model_fn().data
    if not np.array_equal(l1, l2):
        raise GradCheckError(
            f"model_fn is not deterministic: {float(l1)!r} != {float(l2)!r}"
        )

    loss = model_fn()
    backward(loss, params)
    report = GradCheckReport(delta=delta, tol=tol)
    for p in params:
        flat_grad = p.grad.reshape(-1)
        n = flat_grad.size
        if max_entries_per_param is None or n <= max_entries_per_param:
            entries = np.arange(n)
        else:
            entries = rng.choice(n, size=max_entries_per_param, replace=False)
        worst = ParamCheck(p.pid, len(entries), -1.0, (), 0.0, 0.0)
        for i in entries:
            idx = np.unravel_index(i, p.data.shape)
            orig = p.data[idx]
            p.data[idx] = orig + delta
            f_plus = float(model_fn().data)
            p.data[idx] = orig - delta
            f_minus = float(model_fn().data)
            p.data[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * delta)
            err = relative_error(float(flat_grad[i]), numeric)
            if err > worst.max_rel_err:
                worst.max_rel_err = err
                worst.worst_index = tuple(int(v) for v in idx)
                worst.worst_analytic = float(flat_grad[i])
                worst.worst_numeric = numeric
        report.per_param.append(worst)
    return report
