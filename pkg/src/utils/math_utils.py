import numpy as np


def lerp(a, b, t):
    """Blend a towards b by t (0-1) as (1 - t) * a + t * b; t = 1 returns b exactly"""
    return (1.0 - t) * a + t * b


def linear_scaled_lr(base_lr, batch_size, reference_batch):
    """Learning rate under the linear scaling rule"""
    return base_lr * batch_size / reference_batch


def tail_mean(values, window):
    """Arithmetic mean of the last `window` values"""
    values = np.asarray(values, dtype=float)
    return float(values[-window:].mean())


def step_std(values, window):
    """Std of consecutive differences over the last `window` values"""
    values = np.asarray(values, dtype=float)[-window:]
    if values.size < 2:
        return 0.0
    return float(np.diff(values).std())


def relative_error(a, b, floor=1e-12):
    """Elementwise |a - b| / max(|a|, |b|, floor)"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
