import numpy as np
import pytest

from sensipw import Mode, validate_table


def make_missing_table(rng, n=60, d=2):
    """Random missing-data table with a moderate selection model (keeps both
    classes populated so logistic fits do not separate)."""
    x = rng.normal(size=(n, d))
    g = 0.2 + x @ np.linspace(0.6, -0.4, d)
    a = (rng.random(n) < 1.0 / (1.0 + np.exp(-g))).astype(int)
    if a.sum() < d + 2 or (1 - a).sum() < 1:
        a[: d + 2] = 1
        a[d + 2] = 0
    y = np.where(a == 1, x[:, 0] + 0.5 * rng.normal(size=n), np.nan)
    return validate_table(a, x, y, Mode.MISSING_DATA)


def make_observational_table(rng, n=80, d=2):
    x = rng.normal(size=(n, d))
    g = 0.3 + x @ np.linspace(0.6, -0.4, d)
    a = (rng.random(n) < 1.0 / (1.0 + np.exp(-g))).astype(int)
    if a.sum() < d + 2 or (1 - a).sum() < d + 2:
        a[: d + 2] = 1
        a[d + 2 : 2 * (d + 2)] = 0
    y = 1.0 + x[:, 0] + 0.4 * a + rng.normal(size=n)
    return validate_table(a, x, y, Mode.OBSERVATIONAL)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
