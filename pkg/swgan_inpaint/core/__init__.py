"""
Tensor core - dense arrays with reverse-mode automatic differentiation
"""

from .tensor import (
    Tensor,
    abs_,
    add,
    backward,
    default_dtype,
    leaky_relu,
    matmul,
    mul,
    no_grad,
    reduce_mean,
    reduce_sum,
    square,
    sub,
    tanh,
)

__all__ = [
    'Tensor', 'abs_', 'add', 'backward', 'default_dtype', 'leaky_relu', 'matmul',
    'mul', 'no_grad', 'reduce_mean', 'reduce_sum', 'square', 'sub', 'tanh',
]
