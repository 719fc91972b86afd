"""Seeded synthetic datasets used by the demo and the test suites."""

from __future__ import annotations

import numpy as np

from .data import TabularDataset

# noisy-band task: class 1 is a narrow bump on x1 inside a wide class-0
# distribution, x2 carries a weaker shift, and a band of coin-flip labels
# sits far out on x1 where neither class has mass
BAND_PI1 = 0.3
BAND_CLASS1 = (1.5, 0.5)
BAND_X2_SHIFT = 0.7
BAND_FRACTION = 0.1
BAND_RANGE = (3.0, 6.0)


def noisy_band(n: int, seed: int, clean: bool = False):
    """Two Gaussian classes plus a label-noise band.

    Args:
        n: number of rows.
        seed: generator seed.
        clean: omit the band (for measuring accuracy on uncorrupted data).

    Returns:
        ``(X, y, band)`` where ``band`` marks the noise rows.
    """
    rng = np.random.default_rng(seed)
    nb = 0 if clean else int(round(BAND_FRACTION * n))
    nc = n - nb
    y = (rng.random(nc) < BAND_PI1).astype(np.int64)
    m1, s1 = BAND_CLASS1
    x1 = np.where(y == 1, rng.normal(m1, s1, nc), rng.normal(0.0, 1.0, nc))
    x2 = rng.normal(np.where(y == 1, BAND_X2_SHIFT, -BAND_X2_SHIFT), 1.0)
    X = np.column_stack([x1, x2])
    band = np.zeros(nc, dtype=bool)
    if nb:
        Xb = np.column_stack([rng.uniform(*BAND_RANGE, nb), rng.normal(0.0, 1.0, nb)])
        X = np.vstack([X, Xb])
        y = np.concatenate([y, rng.integers(0, 2, nb)])
        band = np.concatenate([band, np.ones(nb, dtype=bool)])
    return X, y, band


CREDIT_FEATURES = (
    "ExternalRiskEstimate", "MSinceOldestTradeOpen", "NumSatisfactoryTrades",
    "PercentTradesNeverDelq", "NetFractionRevolvingBurden", "NumInqLast6M",
)


def credit_dataset(n: int = 400, seed: int = 0) -> TabularDataset:
    """Credit-style applicants with a ``RiskPerformance`` label (1 = good).

    Features are integer-valued and loosely mimic a bureau report; the label
    follows a logistic rule of the standardized features.
    """
    rng = np.random.default_rng(seed)
    risk = np.clip(rng.normal(72, 9, n), 40, 95).round()
    oldest = np.clip(rng.gamma(4.0, 50.0, n), 2, 600).round()
    trades = np.clip(rng.poisson(20, n), 0, 80).astype(float)
    never_delq = np.clip(rng.normal(92, 9, n), 40, 100).round()
    burden = np.clip(rng.normal(35, 25, n), 0, 150).round()
    inq = np.clip(rng.poisson(1.5, n), 0, 20).astype(float)
    X = np.column_stack([risk, oldest, trades, never_delq, burden, inq])
    z = (X - X.mean(axis=0)) / X.std(axis=0)
    logit = 1.6 * z[:, 0] + 0.5 * z[:, 1] + 0.3 * z[:, 2] + 0.7 * z[:, 3] \
        - 0.8 * z[:, 4] - 0.6 * z[:, 5]
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(np.int64)
    return TabularDataset.from_arrays(X, y, feature_names=list(CREDIT_FEATURES))


def write_csv(dataset: TabularDataset, path, label: str = "label") -> None:
    """Write numeric columns and integer labels as a plain CSV."""
    lines = [",".join(list(dataset.feature_names) + [label])]
    for row, lab in zip(dataset.values, dataset.labels):
        cells = [format(float(v), "g") for v in row] + [str(int(lab))]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
