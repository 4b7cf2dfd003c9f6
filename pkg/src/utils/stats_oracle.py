"""Brute-force statistics that materialize every coordinate set explicitly.

Slow on purpose: each set is built by testing every coordinate of the
tensor against the set's membership rule, with no reshapes or axis
reductions shared with src.norms.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass
class OracleStats:
    """Per-set statistics in N-major set order, plus the set sizes"""

    mean: np.ndarray
    std: np.ndarray
    m: int
    m_prime: int


def _coordinates(shape):
    return list(itertools.product(*(range(d) for d in shape)))


def _mean_member(kind, shape):
    channels_per_group = shape[1] // kind.groups
    rules = {
        "bn": lambda k, i: k[1] == i[1],
        "ebn": lambda k, i: k[1] == i[1],
        "ln": lambda k, i: k[0] == i[0],
        "in": lambda k, i: k[0] == i[0] and k[1] == i[1],
        "gn": lambda k, i: k[0] == i[0]
        and k[1] // channels_per_group == i[1] // channels_per_group,
    }
    return rules[kind.variant]


def _std_member(kind, shape):
    if kind.variant == "ebn":
        return lambda k, i: True
    return _mean_member(kind, shape)


def _set_key(kind, shape, i, which):
    """Identifier of the set containing i; sorted keys give N-major order"""
    if kind.variant == "ebn" and which == "std":
        return ()
    if kind.variant in ("bn", "ebn"):
        return (i[1],)
    if kind.variant == "ln":
        return (i[0],)
    if kind.variant == "in":
        return (i[0], i[1])
    return (i[0], i[1] // (shape[1] // kind.groups))


def explicit_set_stats(x, kind, eps):
    """Mean over S_i and std over S'_i computed from explicit coordinate lists"""
    data = x.data
    shape = data.shape
    coords = _coordinates(shape)
    in_mean_set = _mean_member(kind, shape)
    in_std_set = _std_member(kind, shape)

    means = {}
    mean_sizes = set()
    for i in coords:
        key = _set_key(kind, shape, i, "mean")
        if key in means:
            continue
        members = [k for k in coords if in_mean_set(k, i)]
        mean_sizes.add(len(members))
        means[key] = math.fsum(data[k] for k in members) / len(members)

    def mean_at(k):
        return means[_set_key(kind, shape, k, "mean")]

    if kind.variant == "ebn" and kind.std_center == "global":
        grand = math.fsum(data[k] for k in coords) / len(coords)

        def center(k):
            return grand

    else:
        center = mean_at

    stds = {}
    std_sizes = set()
    for i in coords:
        key = _set_key(kind, shape, i, "std")
        if key in stds:
            continue
        members = [k for k in coords if in_std_set(k, i)]
        std_sizes.add(len(members))
        var = math.fsum((data[k] - center(k)) ** 2 for k in members) / len(members)
        stds[key] = math.sqrt(var + eps)

    # Every position's set has the same size for these kinds
    assert len(mean_sizes) == 1 and len(std_sizes) == 1
    return OracleStats(
        mean=np.array([means[k] for k in sorted(means)]),
        std=np.array([stds[k] for k in sorted(stds)]),
        m=mean_sizes.pop(),
        m_prime=std_sizes.pop(),
    )
