"""Adam optimizer over a flat dict of named parameter tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradient(ValueError):
    """A gradient tensor contained NaN/Inf; the step was aborted."""


@dataclass
class AdamState:
    """First/second moment accumulators congruent with the parameter set.

    Note the update divides by sqrt(v_hat + eps), matching the hand-checked
    single-step value -0.000999999995 for (theta=0, g=1, defaults).
    """

    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay: float = 0.0            # inverse-time step-size decay; 0 = constant
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step_size(self) -> float:
        """Effective learning rate at the current step count."""
        return self.alpha / (1.0 + self.decay * max(self.t - 1, 0))

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], **hyper) -> "AdamState":
        state = cls(**hyper)
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
        return state


def adam_step(adam: AdamState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray]) -> None:
    """One in-place Adam update of every tensor in ``params``.

    Raises NonFiniteGradient (naming the tensor) before touching anything if
    any gradient entry is NaN/Inf.
    """
    for name in sorted(params):
        g = grads[name]
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape mismatch for {name!r}: "
                             f"{g.shape} vs {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient in tensor {name!r}")
    adam.t += 1
    bc1 = 1.0 - adam.beta1 ** adam.t
    bc2 = 1.0 - adam.beta2 ** adam.t
    lr = adam.step_size()
    for name in sorted(params):
        g = grads[name]
        m = adam.m[name]
        v = adam.v[name]
        m *= adam.beta1
        m += (1.0 - adam.beta1) * g
        v *= adam.beta2
        v += (1.0 - adam.beta2) * (g * g)
        params[name] -= lr * (m / bc1) / np.sqrt(v / bc2 + adam.eps)
