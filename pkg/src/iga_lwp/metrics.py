import math

import numpy as np

from .errors import ValidationError


class UndefinedCorrelation(ValidationError):
    """PCC of a constant vector; reported as NA rather than 0."""


def pcc(y, y_hat):
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1:
        raise ValidationError(f"pcc needs two 1-d vectors of equal length, got {y.shape} and {y_hat.shape}")
    if len(y) < 2:
        raise ValidationError("pcc needs at least two samples")
    dy = y - y.mean()
    dh = y_hat - y_hat.mean()
    sy = math.sqrt(float(dy @ dy))
    sh = math.sqrt(float(dh @ dh))
    if sy == 0.0 or sh == 0.0:
        raise UndefinedCorrelation("correlation is undefined for a constant vector")
    return float(np.clip((dh @ dy) / (sh * sy), -1.0, 1.0))


def rmse(y, y_hat):
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1:
        raise ValidationError(f"rmse needs two 1-d vectors of equal length, got {y.shape} and {y_hat.shape}")
    if len(y) < 1:
        raise ValidationError("rmse needs at least one sample")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def pcc_or_nan(y, y_hat):
    try:
        return pcc(y, y_hat)
    except UndefinedCorrelation:
        return float("nan")
