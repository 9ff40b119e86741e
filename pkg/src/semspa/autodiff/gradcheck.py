"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Parameter, Tensor, no_grad


@dataclass
class GradCheckReport:
    max_relative_error: float
    passed: bool
    checked: int
    worst: str = ""
    diagnostics: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} max_rel_err={self.max_relative_error:.3e} over {self.checked} coords {self.worst}"


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))


def _coords(size: int, max_coords: int | None, rng: np.random.Generator) -> np.ndarray:
    if max_coords is None or size <= max_coords:
        return np.arange(size)
    return np.sort(rng.choice(size, size=max_coords, replace=False))


def _check_arrays(
    targets: Sequence[tuple[str, np.ndarray, np.ndarray]],
    evaluate: Callable[[], float],
    step: float,
    tol: float,
    max_coords: int | None,
    seed: int,
) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    worst_err, worst, checked = 0.0, "", 0
    diagnostics: list[str] = []
    for name, value, analytic in targets:
        flat = value.reshape(-1)
        ana = analytic.reshape(-1)
        for i in _coords(flat.size, max_coords, rng):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = evaluate()
            flat[i] = orig - step
            f_minus = evaluate()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            checked += 1
            if not np.isfinite(numeric):
                diagnostics.append(f"{name}[{i}]: non-finite numeric derivative")
                worst_err = float("inf")
                worst = f"({name}[{i}])"
                continue
            err = _relative_error(float(ana[i]), numeric)
            if err > worst_err:
                worst_err, worst = err, f"({name}[{i}] analytic={ana[i]:.6g} numeric={numeric:.6g})"
    passed = not diagnostics and worst_err < tol
    return GradCheckReport(worst_err, passed, checked, worst, diagnostics)


def grad_check(
    f: Callable[[Tensor], Tensor],
    point,
    step: float = 1e-5,
    tol: float = 1e-5,
    max_coords: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare the recorded gradient of scalar ``f`` at ``point`` to central differences.

    The per-coordinate error is ``|a - n| / max(1, |a|, |n|)``; the check
    passes iff the maximum stays below ``tol``.
    """
    value = np.array(point.data if isinstance(point, Tensor) else point, dtype=np.float64)
    x = Tensor(value, requires_grad=True)
    out = f(x)
    out.backward()
    analytic = x.grad if x.grad is not None else np.zeros_like(value)

    def evaluate() -> float:
        with no_grad():
            return float(f(Tensor(value)).data)

    return _check_arrays([("x", value, analytic)], evaluate, step, tol, max_coords, seed)


def grad_check_params(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    step: float = 1e-5,
    tol: float = 1e-5,
    max_coords: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Check gradients of ``loss_fn()`` with respect to parameters, perturbed in place."""
    for p in params:
        p.zero_grad()
    loss_fn().backward()
    targets = [(p.name or f"param{i}", p.data, p.grad.copy()) for i, p in enumerate(params)]

    def evaluate() -> float:
        with no_grad():
            return float(loss_fn().data)

    return _check_arrays(targets, evaluate, step, tol, max_coords, seed)
