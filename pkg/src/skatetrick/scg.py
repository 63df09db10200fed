"""Scaled conjugate gradient minimisation (Moller, 1993).

Full-batch conjugate-direction method that replaces the line search by a
finite-difference Hessian-vector estimate and a Levenberg-Marquardt style
scale ``lambda`` adjusted from the ratio of actual to predicted reduction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import FloatArray


@dataclass
class ScgState:
    """Snapshot handed to the per-iteration callback."""

    iteration: int
    w: FloatArray
    loss: float
    grad_norm: float
    success: bool
    lam: float


def scg_minimize(
    fun: Callable[[FloatArray], float],
    grad: Callable[[FloatArray], FloatArray],
    w0: FloatArray,
    max_iter: int = 200,
    sigma0: float = 5e-5,
    lambda0: float = 5e-7,
    min_grad: float = 1e-6,
    callback: Callable[[ScgState], bool] | None = None,
) -> tuple[FloatArray, str]:
    """Minimise ``fun`` from ``w0``.

    ``callback`` runs after every iteration, accepted or not, and may
    return True to stop. Returns the final weights and a stop reason
    (``"max_iter"``, ``"min_grad"`` or ``"callback"``). The objective never
    increases between iterations: a step is only taken when the
    comparison ratio is non-negative.
    """
    w = np.array(w0, dtype=np.float64)
    n = w.size
    e = fun(w)
    r = -grad(w)
    p = r.copy()
    lam, lam_bar = float(lambda0), 0.0
    success = True
    delta = 0.0
    if np.linalg.norm(r) < min_grad:
        return w, "min_grad"

    for k in range(1, max_iter + 1):
        p2 = float(p @ p)
        if success:
            sigma = sigma0 / np.sqrt(p2)
            s = (grad(w + sigma * p) + r) / sigma  # r = -grad(w)
            delta = float(p @ s)

        delta += (lam - lam_bar) * p2
        if delta <= 0:
            lam_bar = 2.0 * (lam - delta / p2)
            delta = -delta + lam * p2
            lam = lam_bar

        mu = float(p @ r)
        if mu == 0.0:
            return w, "min_grad"
        alpha = mu / delta
        w_new = w + alpha * p
        e_new = fun(w_new)
        comparison = 2.0 * delta * (e - e_new) / (mu * mu)

        if comparison >= 0:
            w, e = w_new, e_new
            r_new = -grad(w)
            lam_bar = 0.0
            success = True
            if k % n == 0:
                p_new = r_new
            else:
                beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                p_new = r_new + beta * p
            r = r_new
            if comparison >= 0.75:
                lam *= 0.25
        else:
            lam_bar = lam
            success = False
            p_new = p

        if comparison < 0.25:
            lam += delta * (1.0 - comparison) / p2
        p = p_new

        gnorm = float(np.linalg.norm(r))
        if callback is not None and callback(ScgState(k, w, e, gnorm, success, lam)):
            return w, "callback"
        if gnorm < min_grad:
            return w, "min_grad"
    return w, "max_iter"
