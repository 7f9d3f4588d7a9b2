#!/usr/bin/env python3


#######################################################
# Unit tests for the tensor / tape core
#
#######################################################


import unittest

import numpy as np

## Functions and classes to tests
#
from ..tensor import Tensor, Tape, current_tape
from ..functions import log, mul, add
from ..errors import NonFiniteError, DimensionError

## Responsible for testing the tape based reverse mode engine
#
# Note:
# + = positive test, (valid input handling)
# - = stress test, (invalid input handling)
#
# ==Current Tests==
# + Test the tape records operations in execution order
# + Test gradients accumulate when a tensor is used twice
# + Test nothing is recorded without an open tape
# + Test identical forward+backward runs give bitwise identical grads
# - Test a non-finite forward result raises
# - Test backward on a non-scalar output without a seed raises
#
class Test_Tensor_Tape(unittest.TestCase):


    ## Tape order
    #
    # Every node's inputs were produced before it
    #
    def test_tape_records_in_order(self):

        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            y = x * x
            z = y + x

        assert len(tape.nodes) == 2
        assert tape.nodes[0].output is y
        assert tape.nodes[1].output is z
        assert tape.nodes[1].inputs[0] is y


    ## Additive accumulation
    #
    # d/dx (x*x + x) = 2x + 1
    #
    def test_gradient_accumulates(self):

        x = Tensor([1.5, -2.0, 3.0], requires_grad=True)
        with Tape() as tape:
            out = add(mul(x, x), x).sum()
        tape.backward(out)

        assert np.array_equal(x.grad, 2.0 * x.data + 1.0)


    ## Inference mode
    #
    def test_no_tape_no_recording(self):

        assert current_tape() is None
        x = Tensor([1.0, 2.0], requires_grad=True)
        y = x * x

        assert y.requires_grad is False
        assert x.grad is None


    ## Bitwise reproducibility
    #
    def test_repeat_is_bitwise_identical(self):

        rng = np.random.default_rng(3)
        a_data = rng.standard_normal((4, 5))
        b_data = rng.standard_normal((5, 3))

        grads = []
        for _ in range(2):
            a = Tensor(a_data, requires_grad=True)
            b = Tensor(b_data, requires_grad=True)
            with Tape() as tape:
                out = (a @ b).sum()
            tape.backward(out)
            grads.append((a.grad.copy(), b.grad.copy()))

        assert np.array_equal(grads[0][0], grads[1][0])
        assert np.array_equal(grads[0][1], grads[1][1])


    ## NaN / Inf is an error state
    #
    def test_non_finite_forward(self):

        with self.assertRaises(NonFiniteError):
            with np.errstate(divide='ignore'):
                log(Tensor([0.0, 1.0]))


    ## Non-scalar output needs a seed gradient
    #
    def test_backward_needs_seed(self):

        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            y = x * x

        with self.assertRaises(DimensionError):
            tape.backward(y)


if __name__ == '__main__':
    unittest.main()
