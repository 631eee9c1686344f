"""Parameter containers, the AdamW optimizer, and the gradient checker.

Row-wise numeric kernels (softmax, cross-entropy, layernorm, GELU, BCE) live
in structkit.kernels with a compiled core and numpy fallback; they are
re-exported here so this module presents the full numeric surface.
"""

from typing import Callable, Sequence

import numpy as np

from structkit.errors import GradCheckFailure
from structkit.kernels import (  # noqa: F401  (re-exports)
    adamw_update, bce_with_logits, cross_entropy_rows, gelu, gelu_bwd,
    layernorm, layernorm_bwd, masked_softmax, masked_softmax_bwd,
)


class Param:
    """A learnable tensor paired with its gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Param({self.name!r}, shape={self.value.shape})"


class AdamW:
    """Decoupled-weight-decay Adam over a fixed parameter list."""

    def __init__(self, params: Sequence[Param], lr: float = 3e-4,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = [np.zeros_like(p.value) for p in self.params]
        self._v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        self.t += 1
        for p, m, v in zip(self.params, self._m, self._v):
            adamw_update(p.value, p.grad, m, v, self.t, self.lr,
                         self.beta1, self.beta2, self.eps, self.weight_decay)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def finite_diff_check(loss_and_grad: Callable[[], float],
                      params: Sequence[Param], h: float = 1e-5,
                      tolerance: float = 1e-4, coords_per_param: int = 3,
                      raise_on_failure: bool = True) -> dict[str, float]:
    """Compare analytic gradients against central differences.

    loss_and_grad must zero grads, run forward+backward on a fixed example,
    and return the scalar loss; it is called repeatedly under coordinate
    perturbations. For each parameter the coordinates with the largest
    analytic |gradient| are checked (near-zero coordinates sit at the
    finite-difference noise floor and carry no signal). Returns a map of
    parameter name to max relative error; raises GradCheckFailure on the
    first parameter out of tolerance when raise_on_failure is set.
    """
    loss_and_grad()
    analytic = {p.name: p.grad.copy() for p in params}
    report: dict[str, float] = {}
    for p in params:
        flat_grad = analytic[p.name].ravel()
        k = min(coords_per_param, flat_grad.size)
        coords = np.argsort(-np.abs(flat_grad), kind="stable")[:k]
        worst = 0.0
        flat_value = p.value.ravel()
        for c in coords:
            a = float(flat_grad[c])
            keep = flat_value[c]
            flat_value[c] = keep + h
            up = loss_and_grad()
            flat_value[c] = keep - h
            down = loss_and_grad()
            flat_value[c] = keep
            n = (up - down) / (2.0 * h)
            rel = abs(a - n) / max(abs(a), abs(n), 1e-8)
            worst = max(worst, rel)
        report[p.name] = worst
        if raise_on_failure and worst > tolerance:
            raise GradCheckFailure(p.name, worst, tolerance)
    return report
