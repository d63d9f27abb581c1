from lanegraph.autodiff.gradcheck import grad_check
from lanegraph.autodiff.params import (
    ParamRegistry,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
)
from lanegraph.autodiff.tensor import (
    Tensor,
    add,
    as_tensor,
    concat,
    exp,
    gather_rows,
    grad_enabled,
    huber,
    layer_norm,
    log,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    scatter_rows,
    segment_softmax,
    segment_sum,
    sigmoid,
    slice_,
    sub,
    sum,
    tanh,
)
