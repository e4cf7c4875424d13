"""Central finite-difference gradient checking for modules and loss functions.

The check compares autograd gradients against (f(x+h) - f(x-h)) / 2h at
float64. Module outputs are reduced to a scalar through a fixed random
projection so every output coordinate contributes. Coordinates where both
gradients are below the dead-path floor are skipped (e.g. inactive ReLU
branches); the checker reports how many coordinates it actually compared.
"""

import copy

import numpy as np
import torch

REL_TOL = 1e-4
STEP = 1e-5
# with the scalar normalised to O(1), central differences carry ~1e-10 of
# double-precision noise, so only gradients above this floor can be certified
# at 1e-4 relative error; smaller coordinates are skipped and counted
DEAD_FLOOR = 1e-5


def _leaves(out):
    if isinstance(out, torch.Tensor):
        return [out]
    if hasattr(out, "_fields"):  # NamedTuple
        out = tuple(out)
    if isinstance(out, (list, tuple)):
        leaves = []
        for item in out:
            leaves.extend(_leaves(item))
        return leaves
    raise TypeError(f"cannot project output of type {type(out)}")


class _Projection:
    """Fixed random linear functional over all output tensors."""

    def __init__(self, seed):
        self.gen = torch.Generator().manual_seed(seed)
        self.coeffs = None

    def __call__(self, out):
        leaves = _leaves(out)
        if self.coeffs is None:
            # coefficients scaled by 1/numel keep the scalar at O(1) so the
            # finite-difference signal stays above double-precision noise
            self.coeffs = [
                torch.rand(l.shape, generator=self.gen, dtype=torch.float64) / l.numel()
                for l in leaves
            ]
        return sum((l * c).sum() for l, c in zip(leaves, self.coeffs))


def _compare(fd, ag, worst):
    denom = max(abs(fd), abs(ag))
    if denom < DEAD_FLOOR:
        return worst, 0
    return max(worst, abs(fd - ag) / denom), 1


def _fd_scan(values, grads, forward, rng, max_coords):
    """Central differences over (possibly sampled) coordinates of `values`."""
    flat = values.view(-1)
    gflat = grads.reshape(-1)
    n = flat.numel()
    coords = range(n)
    if max_coords is not None and n > max_coords:
        coords = rng.choice(n, size=max_coords, replace=False)
    worst = 0.0
    checked = 0
    with torch.no_grad():
        for k in coords:
            orig = flat[k].item()
            flat[k] = orig + STEP
            plus = forward()
            flat[k] = orig - STEP
            minus = forward()
            flat[k] = orig
            fd = (plus - minus) / (2.0 * STEP)
            worst, used = _compare(fd, gflat[k].item(), worst)
            checked += used
    return worst, checked


def check_module_gradients(
    module, inputs, seed=0, max_per_tensor=None, check_input_indices=(), loss_fn=None
):
    """Assert autograd matches central differences for module parameters.

    Returns (worst relative error, coordinate count); raises AssertionError
    when the worst relative error reaches REL_TOL.
    """
    module = copy.deepcopy(module).double().train()
    inputs = [
        x.detach().clone().double() if isinstance(x, torch.Tensor) else x for x in inputs
    ]
    for idx in check_input_indices:
        inputs[idx].requires_grad_(True)

    projection = _Projection(seed)

    def forward_scalar():
        out = module(*inputs)
        return projection(out) if loss_fn is None else loss_fn(out)

    loss = forward_scalar()
    loss.backward()

    def forward_value():
        return forward_scalar().item()

    rng = np.random.default_rng(seed)
    worst = 0.0
    total_checked = 0
    for _, param in module.named_parameters():
        grads = (
            param.grad.detach().clone()
            if param.grad is not None
            else torch.zeros_like(param)
        )
        w, c = _fd_scan(param.data, grads, forward_value, rng, max_per_tensor)
        worst = max(worst, w)
        total_checked += c
    for idx in check_input_indices:
        x = inputs[idx]
        grads = x.grad.detach().clone() if x.grad is not None else torch.zeros_like(x)
        w, c = _fd_scan(x.data, grads, forward_value, rng, max_per_tensor)
        worst = max(worst, w)
        total_checked += c

    assert total_checked > 0, "gradient check compared no coordinates"
    assert worst < REL_TOL, f"worst relative gradient error {worst:.3e} >= {REL_TOL}"
    return worst, total_checked


def check_function_gradients(fn, args, wrt=(0,), seed=0):
    """Finite-difference check of a scalar-valued function w.r.t. chosen args."""
    args = [a.detach().clone().double() if isinstance(a, torch.Tensor) else a for a in args]
    for idx in wrt:
        args[idx].requires_grad_(True)
    loss = fn(*args)
    loss.backward()

    def forward_value():
        with torch.no_grad():
            return fn(*args).item()

    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    for idx in wrt:
        x = args[idx]
        grads = x.grad.detach().clone()
        w, c = _fd_scan(x.data, grads, forward_value, rng, None)
        worst = max(worst, w)
        checked += c
    assert checked > 0
    assert worst < REL_TOL, f"worst relative gradient error {worst:.3e} >= {REL_TOL}"
    return worst, checked
