"""RMSprop, written functionally over lists of parameter dicts."""
from typing import Sequence

import numpy as np

from ..schemas.training import TrainConfig
from ..utils.errors import ShapeMismatchError, ValidationError
from .layers import Params


def init_state(params: Sequence[Params]) -> list[Params]:
    """Zeroed squared-gradient accumulators shaped like params."""
    return [{name: np.zeros_like(value) for name, value in group.items()} for group in params]


def rmsprop_step(
    params: Sequence[Params],
    grads: Sequence[Params],
    state: Sequence[Params],
    config: TrainConfig,
) -> tuple[list[Params], list[Params]]:
    """
    One RMSprop update.

        s <- rho * s + (1 - rho) * g^2
        p <- p - lr * g / (sqrt(s) + eps)

    Returns:
        (new params, new state); inputs are left untouched
    """
    if not len(params) == len(grads) == len(state):
        raise ValidationError(
            f"Parameter, gradient and state group counts differ: {len(params)}, {len(grads)}, {len(state)}"
        )
    for index, (group, grad_group, state_group) in enumerate(zip(params, grads, state)):
        if not set(group) == set(grad_group) == set(state_group):
            raise ValidationError(f"Group {index}: parameter, gradient and state keys differ")
        for name, value in group.items():
            for kind, other in (("gradient", grad_group[name]), ("state", state_group[name])):
                if np.shape(other) != np.shape(value):
                    raise ShapeMismatchError(f"Group {index} {kind} {name}", np.shape(value), np.shape(other))

    new_params: list[Params] = []
    new_state: list[Params] = []
    for group, grad_group, state_group in zip(params, grads, state):
        p_out, s_out = {}, {}
        for name, value in group.items():
            g = grad_group[name]
            s = config.rho * state_group[name] + (1.0 - config.rho) * g * g
            p_out[name] = value - config.learning_rate * g / (np.sqrt(s) + config.epsilon)
            s_out[name] = s
        new_params.append(p_out)
        new_state.append(s_out)
    return new_params, new_state
