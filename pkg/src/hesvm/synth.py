"""Synthetic two-class dataset with a nonlinear decision boundary.

The label depends mostly on the product x1*x2 plus a weak linear part, so a
linear decision function performs poorly while a degree-2 polynomial kernel
separates well.  A couple of categorical and numeric noise columns round out
the schema.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

NOISE_RATE = 0.05


def gen_synth(n_rows: int = 1000, seed: int = 7) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    x1 = rng.normal(0, 1, n_rows)
    x2 = rng.normal(0, 1, n_rows)
    n1 = rng.normal(0, 1, n_rows)
    n2 = rng.uniform(-2, 2, n_rows)
    cat1 = rng.choice(["red", "green", "blue"], n_rows)
    cat2 = rng.choice(["yes", "no"], n_rows)

    margin = x1 * x2 + 0.25 * (x1 + x2)
    y = np.where(margin > 0, 1, -1)
    flip = rng.random(n_rows) < NOISE_RATE
    y = np.where(flip, -y, y)

    return pd.DataFrame(
        {
            "x1": x1,
            "x2": x2,
            "noise_a": n1,
            "noise_b": n2,
            "color": cat1,
            "flag": cat2,
            "label": np.where(y > 0, "+", "-"),
        }
    )
