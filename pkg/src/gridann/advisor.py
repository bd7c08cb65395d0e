"""Cell-count advisor from a coarse query-cost model.

With S cells, a query at selectivity sigma touches about sigma * S of them.
Entry points seeded from a finished cell shorten the next cell's walk by a
factor alpha, so the per-query cost behaves like

    T(S) = (1 + sigma * S * alpha) * log(n / S)

which is scanned exactly over integer S in [1, n/4].  Setting the derivative
to zero gives the closed form S ~ theta / sigma with
theta = 1 / (alpha * (log(n / S0) - 1)), evaluated once at the numeric
argmin S0, hence the recommendation scales with 1 / sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CellCountAdvice:
    recommended: int              # integer argmin of the scanned curve
    s_values: np.ndarray          # scanned S range
    t_values: np.ndarray          # T(S) over the range
    theta: float
    closed_form: float | None     # theta / sigma; None in the sigma = 0 limit


def cost_curve(n: int, sigma: float, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """T(S) over integer S in [1, n/4]."""
    s = np.arange(1, max(n // 4, 1) + 1, dtype=np.float64)
    t = (1.0 + sigma * s * alpha) * np.log(n / s)
    return s.astype(np.int64), t


def advise_cell_count(n: int, sigma: float, alpha: float = 0.5) -> CellCountAdvice:
    """Recommended cell count for a dataset size and typical selectivity.

    sigma = 0 is the unfiltered limiting case: the curve is monotone
    decreasing, the argmin sits at the n/4 boundary and no closed form
    exists.  alpha outside (0, 1) or sigma outside [0, 1] are hard errors.
    """
    if n < 4:
        raise ValueError(f"n must be >= 4, got {n}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if not 0 <= sigma <= 1:
        raise ValueError(f"sigma must be in [0, 1], got {sigma}")
    s_values, t_values = cost_curve(n, sigma, alpha)
    s0 = int(s_values[int(np.argmin(t_values))])
    log_term = np.log(n / s0) - 1.0
    theta = float(1.0 / (alpha * log_term)) if log_term > 0 else float("inf")
    closed = theta / sigma if sigma > 0 and np.isfinite(theta) else None
    return CellCountAdvice(recommended=s0, s_values=s_values,
                           t_values=t_values, theta=theta, closed_form=closed)
