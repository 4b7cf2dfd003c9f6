import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from src.core.errors import UsageError

logger = logging.getLogger(__name__)

# Maps the upstream gradient of a node's output to one gradient per input
# (None where an input receives nothing).
BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass(frozen=True, eq=False)
class Node:
    """One recorded operation"""

    op: str
    inputs: tuple
    output: object
    rule: BackwardRule


class Tape:
    """Single-writer record of differentiable operations in execution order"""

    def __init__(self):
        self.nodes = []
        self._outputs = set()

    def __len__(self):
        return len(self.nodes)

    def record(self, op, inputs, output, rule):
        """Append an operation; returns the output so ops can `return tape.record(...)`"""
        self.nodes.append(Node(op, tuple(inputs), output, rule))
        self._outputs.add(id(output))
        return output

    def produced(self, value):
        """Whether value is the output of a recorded operation"""
        return id(value) in self._outputs

    def reset(self):
        self.nodes.clear()
        self._outputs.clear()

    def backward(self, loss):
        return backward(self, loss)


def maybe_record(tape, op, inputs, output, rule):
    """Record on tape when one is active; eval passes run with tape=None"""
    if tape is None:
        return output
    return tape.record(op, inputs, output, rule)


def backward(tape, loss):
    """
    Reverse-mode sweep from a scalar loss.

    Returns a dict mapping every gradient-requiring leaf seen on the tape
    (Parameters and Tensor4 marked requires_grad) to d(loss)/d(leaf), shaped
    like the leaf. Leaves the loss does not depend on get zeros. The tape is
    reset afterwards.
    """
    if not tape.produced(loss):
        raise UsageError("loss was not recorded on this tape")
    if loss.size != 1:
        raise UsageError(f"loss must be a scalar, got shape {loss.shape}")

    grads = {id(loss): np.ones(loss.shape)}
    leaves = {}

    for node in reversed(tape.nodes):
        # Collect leaves even on branches that do not reach the loss
        for value in node.inputs:
            if getattr(value, "requires_grad", False) and not tape.produced(value):
                leaves[id(value)] = value

        upstream = grads.get(id(node.output))
        if upstream is None:
            continue

        input_grads = node.rule(upstream)
        for value, grad in zip(node.inputs, input_grads):
            if grad is None:
                continue
            if grad.shape != value.shape:
                raise UsageError(
                    f"{node.op}: gradient shape {grad.shape} does not match input {value.shape}"
                )
            key = id(value)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad

    logger.debug("backward over %d recorded ops, %d leaves", len(tape), len(leaves))
    tape.reset()
    return {
        leaf: grads.get(key, np.zeros(leaf.shape)) for key, leaf in leaves.items()
    }
