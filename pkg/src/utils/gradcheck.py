import logging
from dataclasses import dataclass

import numpy as np

from src.core import ops
from src.core.constants import FD_STEP, GRAD_ATOL, GRAD_RTOL, KINK_MARGIN
from src.core.errors import OracleFailure, UsageError
from src.core.tape import Tape, backward
from src.core.tensor import Tensor4
from src.norms import NormKind, NormParams, compute_stats, normalize_train
from src.utils.math_utils import relative_error
from src.utils.stats_oracle import explicit_set_stats

logger = logging.getLogger(__name__)

# NC, single-sample and four-sample shapes; C = 4 keeps G = 2 valid for GN
VERIFY_SHAPES = ((3, 4, 1, 1), (1, 4, 2, 2), (4, 4, 2, 3))
VERIFY_KINDS = (
    NormKind("bn"),
    NormKind("ebn"),
    NormKind("ebn", std_center="global"),
    NormKind("ln"),
    NormKind("in"),
    NormKind("gn", groups=2),
)


@dataclass(frozen=True)
class GradReport:
    """Elementwise comparison of an analytic gradient against the oracle"""

    max_abs_error: float
    max_rel_error: float
    worst_coordinate: tuple
    step: float
    rtol: float
    atol: float
    passed: bool


def finite_difference(f, x, h=FD_STEP):
    """Central differences (f(x + h e_i) - f(x - h e_i)) / 2h at every coordinate"""
    if h <= 0:
        raise UsageError(f"step must be positive, got {h}")

    base = x.data
    grad = np.zeros(base.shape)
    for index in np.ndindex(*base.shape):
        probe = base.copy()
        probe[index] = base[index] + h
        f_plus = f(Tensor4(probe))
        probe[index] = base[index] - h
        f_minus = f(Tensor4(probe))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise OracleFailure(index, f_plus if not np.isfinite(f_plus) else f_minus)
        grad[index] = (f_plus - f_minus) / (2.0 * h)
    return Tensor4(grad)


def compare(analytic, numeric, rtol=GRAD_RTOL, atol=GRAD_ATOL, h=FD_STEP):
    """Pass iff |a - n| <= atol + rtol * |n| at every coordinate"""
    a = analytic.data if isinstance(analytic, Tensor4) else np.asarray(analytic, dtype=float)
    n = numeric.data if isinstance(numeric, Tensor4) else np.asarray(numeric, dtype=float)
    if a.shape != n.shape:
        raise UsageError(f"shape mismatch: analytic {a.shape}, numeric {n.shape}")

    abs_error = np.abs(a - n)
    excess = abs_error - (atol + rtol * np.abs(n))
    worst = np.unravel_index(int(np.argmax(excess)), a.shape)
    return GradReport(
        max_abs_error=float(abs_error.max()),
        max_rel_error=float(relative_error(a, n).max()),
        worst_coordinate=tuple(int(i) for i in worst),
        step=h,
        rtol=rtol,
        atol=atol,
        passed=bool(np.all(excess <= 0)),
    )


def tape_gradient(loss_fn, x):
    """d loss_fn(x) / dx through the tape; loss_fn(x, tape) returns a scalar tensor"""
    leaf = Tensor4(x.data, requires_grad=True)
    tape = Tape()
    loss = loss_fn(leaf, tape)
    return Tensor4(backward(tape, loss)[leaf])


def check(loss_fn, x, rtol=GRAD_RTOL, atol=GRAD_ATOL, h=FD_STEP):
    """Tape gradient of loss_fn at x compared against central differences"""
    analytic = tape_gradient(loss_fn, x)
    numeric = finite_difference(lambda t: loss_fn(t, None).item(), x, h)
    return compare(analytic, numeric, rtol, atol, h)


def sample_away_from_kinks(rng, shape, margin=KINK_MARGIN):
    """Standard normal sample with every |value| >= margin"""
    values = rng.standard_normal(shape)
    close = np.abs(values) < margin
    while close.any():
        values[close] = rng.standard_normal(int(close.sum()))
        close = np.abs(values) < margin
    return values


def self_test(h=FD_STEP):
    """Central differences must be exact (to rounding) on polynomials of degree <= 2"""
    rng = np.random.default_rng(0)
    x = Tensor4(rng.standard_normal((2, 3, 2, 2)))
    a = rng.standard_normal(x.shape)
    b = rng.standard_normal(x.shape)

    cases = (
        (lambda t: float(t.data.sum()), np.ones(x.shape)),
        (lambda t: 0.5 * float((t.data**2).sum()), x.data),
        (lambda t: float((a * t.data**2 + b * t.data).sum()) + 3.0, 2 * a * x.data + b),
    )
    for f, expected in cases:
        report = compare(expected, finite_difference(f, x, h), rtol=1e-7, atol=1e-7, h=h)
        if not report.passed:
            raise OracleFailure(report.worst_coordinate, report.max_abs_error)
    logger.debug("finite-difference self-test passed")


def norm_probe(kind, shape, rng):
    params = NormParams.create(shape[1])
    params.gamma.data = rng.uniform(0.5, 2.0, shape[1])
    params.beta.data = rng.standard_normal(shape[1])
    r = rng.standard_normal(shape)

    def loss_fn(x, tape):
        y, _ = normalize_train(x, kind, params, tape=tape)
        return ops.weighted_sum(y, r, tape=tape)

    return loss_fn


def linear_probe(shape, rng):
    weight = rng.uniform(-1, 1, (5, shape[1]))
    bias = rng.uniform(-1, 1, 5)
    r = rng.standard_normal((shape[0], 5, 1, 1))

    def loss_fn(x, tape):
        return ops.weighted_sum(ops.linear_forward(x, weight, bias, tape=tape), r, tape=tape)

    return loss_fn


def relu_probe(shape, rng):
    r = rng.standard_normal(shape)

    def loss_fn(x, tape):
        return ops.weighted_sum(ops.relu(x, tape=tape), r, tape=tape)

    return loss_fn


def cross_entropy_probe(shape, rng):
    labels = rng.integers(0, shape[1], shape[0])

    def loss_fn(x, tape):
        return ops.softmax_cross_entropy(x, labels, tape=tape)

    return loss_fn


def verify_suite(seeds=range(10), shapes=VERIFY_SHAPES, kinds=VERIFY_KINDS):
    """
    Check every backward rule against the oracle.

    Returns a list of (label, shape, seed, GradReport). NC-only ops
    (linear, cross entropy) are checked on the NC shapes only.
    """
    self_test()
    results = []
    for shape in shapes:
        for seed in seeds:
            rng = np.random.default_rng(seed)
            x = Tensor4(sample_away_from_kinks(rng, shape))

            probes = [(kind.label(), norm_probe(kind, shape, rng)) for kind in kinds]
            probes.append(("relu", relu_probe(shape, rng)))
            if x.is_nc:
                probes.append(("linear", linear_probe(shape, rng)))
                probes.append(("softmax_cross_entropy", cross_entropy_probe(shape, rng)))

            for label, loss_fn in probes:
                report = check(loss_fn, x)
                if not report.passed:
                    logger.warning(
                        "%s failed on shape %s seed %d: max rel error %.3g at %s",
                        label,
                        shape,
                        seed,
                        report.max_rel_error,
                        report.worst_coordinate,
                    )
                results.append((label, shape, seed, report))
    return results


def stats_sweep(count=200, seed=0, eps=1e-5, tol=1e-12):
    """
    compute_stats against the explicit-set oracle on random small tensors.

    Shapes are drawn from (1..4) x (1..6) x (1..3) x (1..3); every kind is
    checked on every tensor (GN with the largest G < m_C dividing m_C, so
    it differs from IN whenever possible). Returns a list of mismatch
    descriptions, empty when everything agrees.
    """
    rng = np.random.default_rng(seed)
    mismatches = []
    for _ in range(count):
        shape = (
            int(rng.integers(1, 5)),
            int(rng.integers(1, 7)),
            int(rng.integers(1, 4)),
            int(rng.integers(1, 4)),
        )
        x = Tensor4(rng.standard_normal(shape))
        channels = shape[1]
        groups = max([g for g in range(1, channels) if channels % g == 0] or [1])
        kinds = [k for k in VERIFY_KINDS if k.variant != "gn"] + [NormKind("gn", groups=groups)]

        for kind in kinds:
            expected = explicit_set_stats(x, kind, eps)
            got = compute_stats(x, kind, eps)
            counts_ok = (got.m, got.m_prime) == (expected.m, expected.m_prime)
            values_ok = np.allclose(got.mean, expected.mean, rtol=0, atol=tol) and np.allclose(
                got.std, expected.std, rtol=0, atol=tol
            )
            if not (counts_ok and values_ok):
                mismatches.append(f"{kind.label()} on shape {shape}")
    return mismatches
