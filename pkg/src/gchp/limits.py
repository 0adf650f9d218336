"""Long-run drift and volatility of the compound mid-price process.

For a mid-price that moves by ``a(X_k)`` at the k-th arrival of a
self-exciting process, the centered and scaled process converges to a
Brownian motion whose parameters depend only on the chain (``P``, ``pi``,
``a``) and the arrival process (background rate and branching ratio):

    a_star   = sum_i pi_i a(i)                       drift per event
    b        = a - a_star
    g        solves (P + Pi - I) g = b               (Pi has rows pi)
    v(i)     = sum_j P(i,j) * (b(i) - g(j) + g(i))^2
    sigma^2  = sum_i pi_i v(i)                       variance per event
    sigma*   = sigma * sqrt(rate)                    with rate = lambda0/(1-branching)
    sigma_bar = sqrt(sigma*^2 + a_star^2 * lambda0/(1-branching)^3)

``sigma*`` scales the event-clock Brownian limit to wall-clock time;
``sigma_bar`` additionally carries the drift's arrival-count noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularFundamentalMatrix
from .hawkes import HawkesParams, branching_ratio
from .states import StateSpace, StationaryDistribution, TransitionMatrix

__all__ = ["LimitParams", "compute_limit_params"]

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class LimitParams:
    a_star: float
    b: np.ndarray
    g: np.ndarray
    v: np.ndarray
    sigma_sq: float
    sigma_star: float
    sigma_bar: float

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma_sq))


def compute_limit_params(space: StateSpace, P: TransitionMatrix,
                         pi: StationaryDistribution,
                         hawkes: HawkesParams) -> LimitParams:
    """Evaluate the diffusive-limit parameters for a fitted state model.

    Requires an ergodic chain (pi solved beforehand) and a stationary
    arrival process.  Raises SingularFundamentalMatrix when the linear
    solve for ``g`` is ill-conditioned, which signals a degenerate chain.
    """
    a = space.values
    p = P.P
    piv = pi.pi
    if not (a.size == p.shape[0] == piv.size):
        raise ValueError("space, P and pi must agree on the state count")

    a_star = float(piv @ a)
    b = a - a_star

    system = p + np.tile(piv, (piv.size, 1)) - np.eye(piv.size)
    if np.linalg.cond(system) > _COND_LIMIT:
        raise SingularFundamentalMatrix(
            "condition number of (P + Pi - I) exceeds 1e12; chain is "
            "non-ergodic or degenerate"
        )
    g = np.linalg.solve(system, b)

    # per-state variance in the guaranteed-nonnegative square form;
    # algebraically equal to b^2 + sum_j (g_j - g_i)^2 P_ij - 2 b sum_j (g_j - g_i) P_ij
    diff = g[None, :] - g[:, None]
    v = np.einsum("ij,ij->i", p, (b[:, None] - diff) ** 2)

    sigma_sq = float(piv @ v)
    rate = hawkes.lambda0 / (1.0 - branching_ratio(hawkes))
    sigma_star = float(np.sqrt(sigma_sq * rate))
    sigma_bar = float(np.sqrt(
        sigma_star**2 + a_star**2 * hawkes.lambda0 / (1.0 - branching_ratio(hawkes)) ** 3
    ))
    return LimitParams(a_star=a_star, b=b, g=g, v=v, sigma_sq=sigma_sq,
                       sigma_star=sigma_star, sigma_bar=sigma_bar)
