"""
Small feed-forward networks on torch (float64, CPU)

Supplies the score network, the selection-weight network and the
propensity classifier. Gradients come from torch autograd; derivatives in
the outcome direction are differentiable central differences so they can
sit inside a training loss.
"""

import copy
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn.utils import parameters_to_vector, vector_to_parameters

from .errors import EstimationError, ShapeError, UnsupportedOperationError

logger = logging.getLogger(__name__)

DTYPE = torch.float64
DY_STEP = 1e-3


class Activation:
    SOFTPLUS = "softplus"
    TANH = "tanh"
    RELU = "relu"

    ALL = (SOFTPLUS, TANH, RELU)


def _make_activation(name: str) -> nn.Module:
    if name == Activation.SOFTPLUS:
        return nn.Softplus()
    if name == Activation.TANH:
        return nn.Tanh()
    if name == Activation.RELU:
        return nn.ReLU()
    raise ValueError(f"unknown activation '{name}'. Available: {', '.join(Activation.ALL)}")


class Mlp(nn.Module):
    """
    Affine layers with a shared hidden activation and a linear output layer.

    Weights are initialized uniform in +-sqrt(6 / (fan_in + fan_out)) from a
    generator seeded with init_seed; biases start at zero.
    """

    def __init__(self, layer_sizes: Sequence[int], activation: str = Activation.SOFTPLUS,
                 init_seed: int = 0):
        super().__init__()
        if len(layer_sizes) < 2 or any(int(s) < 1 for s in layer_sizes):
            raise ValueError(f"invalid layer sizes {list(layer_sizes)}")
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.activation = activation
        self.init_seed = int(init_seed)

        generator = torch.Generator().manual_seed(self.init_seed)
        modules: List[nn.Module] = []
        pairs = list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))
        for index, (fan_in, fan_out) in enumerate(pairs):
            linear = nn.Linear(fan_in, fan_out, dtype=DTYPE)
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            with torch.no_grad():
                linear.weight.uniform_(-bound, bound, generator=generator)
                linear.bias.zero_()
            modules.append(linear)
            if index < len(pairs) - 1:
                modules.append(_make_activation(activation))
        self.body = nn.Sequential(*modules)

    @property
    def linear_layers(self) -> List[nn.Linear]:
        return [m for m in self.body if isinstance(m, nn.Linear)]

    @property
    def weights(self) -> List[np.ndarray]:
        return [layer.weight.detach().numpy().copy() for layer in self.linear_layers]

    @property
    def biases(self) -> List[np.ndarray]:
        return [layer.bias.detach().numpy().copy() for layer in self.linear_layers]

    def set_parameters(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]) -> None:
        """Overwrite all weights and biases (shapes must match)"""
        with torch.no_grad():
            for layer, w, b in zip(self.linear_layers, weights, biases):
                layer.weight.copy_(torch.as_tensor(np.asarray(w, dtype=float), dtype=DTYPE))
                layer.bias.copy_(torch.as_tensor(np.asarray(b, dtype=float), dtype=DTYPE))

    def forward(self, inputs: torch.Tensor) -> torch.Tensor:
        if inputs.shape[-1] != self.layer_sizes[0]:
            raise ShapeError(f"network expects {self.layer_sizes[0]} inputs, got {inputs.shape[-1]}")
        return self.body(inputs)


def as_tensor(values) -> torch.Tensor:
    if isinstance(values, torch.Tensor):
        return values.to(DTYPE)
    return torch.as_tensor(np.asarray(values, dtype=float), dtype=DTYPE)


def forward(net: Mlp, inputs) -> np.ndarray:
    """
    Evaluate a network without tracking gradients.

    A 1-D input is treated as a single example and a 1-D output is returned.
    """
    tensor = as_tensor(inputs)
    single = tensor.dim() == 1
    if single:
        tensor = tensor.unsqueeze(0)
    with torch.no_grad():
        out = net(tensor)
    out = out.numpy()
    return out[0] if single else out


def d_dy(fn: Callable[[torch.Tensor], torch.Tensor], inputs: torch.Tensor,
         y_index: int = 1, h: float = DY_STEP) -> torch.Tensor:
    """
    Central difference of fn along input column y_index.

    Built from two evaluations of fn, so autograd flows through it and it
    can be nested for second derivatives.
    """
    offset = torch.zeros_like(inputs)
    offset[..., y_index] = h
    return (fn(inputs + offset) - fn(inputs - offset)) / (2.0 * h)


LossFn = Callable[[nn.Module, torch.Tensor], torch.Tensor]


def _scalar_loss(net: nn.Module, loss_fn: LossFn, batch: torch.Tensor) -> torch.Tensor:
    loss = loss_fn(net, batch)
    if not isinstance(loss, torch.Tensor) or loss.dim() != 0:
        raise UnsupportedOperationError("loss must return a scalar torch tensor")
    if not loss.requires_grad:
        raise UnsupportedOperationError("loss is not differentiable in the network parameters")
    return loss


def param_gradients(net: nn.Module, loss_fn: LossFn, batch) -> np.ndarray:
    """Reverse-mode gradient of loss_fn(net, batch), flattened in parameter order"""
    params = list(net.parameters())
    loss = _scalar_loss(net, loss_fn, as_tensor(batch))
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    flat = [torch.zeros_like(p).reshape(-1) if g is None else g.reshape(-1)
            for p, g in zip(params, grads)]
    return torch.cat(flat).detach().numpy()


def numeric_gradients(net: nn.Module, loss_fn: LossFn, batch, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient, same layout as param_gradients"""
    batch = as_tensor(batch)
    params = list(net.parameters())
    base = parameters_to_vector(params).detach().clone()
    grad = np.zeros(base.numel())
    try:
        with torch.no_grad():
            for i in range(base.numel()):
                for sign in (1.0, -1.0):
                    shifted = base.clone()
                    shifted[i] += sign * h
                    vector_to_parameters(shifted, params)
                    value = float(loss_fn(net, batch))
                    grad[i] += sign * value
                grad[i] /= 2.0 * h
    finally:
        vector_to_parameters(base, params)
    return grad


@dataclass
class GradientReport:
    analytic: np.ndarray
    numeric: np.ndarray
    max_rel_err: float


def gradient_check(net: nn.Module, loss_fn: LossFn, batch, h: float = 1e-5,
                   floor: float = 1e-6) -> GradientReport:
    analytic = param_gradients(net, loss_fn, batch)
    numeric = numeric_gradients(net, loss_fn, batch, h)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    max_rel = float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0
    return GradientReport(analytic=analytic, numeric=numeric, max_rel_err=max_rel)


def make_optimizer(params: Iterable[torch.Tensor], lr: float = 0.01) -> torch.optim.Optimizer:
    return torch.optim.Adam(list(params), lr=lr)


def train_adam(modules: Sequence[nn.Module], loss_closure: Callable[[], torch.Tensor],
               steps: int, lr: float = 0.01, max_retries: int = 5,
               label: str = "network") -> List[float]:
    """
    Full-batch Adam on the parameters of `modules`.

    A non-finite loss restores the last finite parameters, halves the
    learning rate and carries on; after max_retries halvings it raises.

    Returns:
        Loss value per completed step
    """
    params = [p for module in modules for p in module.parameters()]
    optimizer = make_optimizer(params, lr)
    snapshot = [copy.deepcopy(m.state_dict()) for m in modules]
    history: List[float] = []
    retries = 0
    step = 0
    while step < steps:
        optimizer.zero_grad()
        loss = loss_closure()
        if not torch.isfinite(loss):
            retries += 1
            if retries > max_retries:
                raise EstimationError(f"{label}: loss stayed non-finite after {max_retries} "
                                      "learning-rate halvings")
            lr /= 2.0
            logger.warning("%s: non-finite loss at step %d, halving lr to %g", label, step, lr)
            for module, state in zip(modules, snapshot):
                module.load_state_dict(state)
            optimizer = make_optimizer(params, lr)
            continue
        loss.backward()
        snapshot = [copy.deepcopy(m.state_dict()) for m in modules]
        optimizer.step()
        history.append(float(loss.detach()))
        if step % 500 == 0:
            logger.debug("%s: step %d loss %.6g", label, step, history[-1])
        step += 1
    return history


def predict_scalar(net: Mlp, inputs: np.ndarray, head: Optional[Callable] = None) -> np.ndarray:
    """Batch evaluation returning a flat numpy array"""
    with torch.no_grad():
        out = net(as_tensor(inputs)).reshape(-1)
        if head is not None:
            out = head(out)
    return out.numpy()
