import numpy as np

from lanegraph.autodiff.tensor import Tensor
from lanegraph.errors import ContractError


def grad_check(f, x: Tensor, h=1e-5, indices=None):
    """Max relative error between reverse-mode and central-difference gradients.

    Relative error per element is ``|a - b| / max(1, |a|, |b|)``. ``indices``
    restricts the check to a subset of flat positions of ``x``.
    """
    x.requires_grad = True
    x.grad = None
    out = f(x)
    if out.data.size != 1:
        raise ContractError(f"grad_check needs a scalar function, got shape {out.shape}")
    out.backward()
    analytic = np.zeros(x.data.size) if x.grad is None else x.grad.reshape(-1).copy()
    flat = x.data.reshape(-1)
    positions = range(flat.size) if indices is None else indices
    worst = 0.0
    for i in positions:
        orig = flat[i]
        flat[i] = orig + h
        up = float(f(x).data)
        flat[i] = orig - h
        down = float(f(x).data)
        flat[i] = orig
        num = (up - down) / (2 * h)
        a = analytic[i]
        worst = max(worst, abs(a - num) / max(1.0, abs(a), abs(num)))
    return worst
