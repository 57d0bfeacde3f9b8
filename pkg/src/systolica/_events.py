"""Step an ODE until an event function changes sign, then bisect on the dense output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import DOP853


class IntegrationError(ArithmeticError):
    pass


@dataclass
class EventHit:
    time: float
    state: np.ndarray
    steps: int
    rows: list | None


def integrate_to_event(rhs, y0, gap, *, rtol=1e-10, atol=1e-13, max_steps=200_000, time_tol=1e-12,
                       record=False, skip=0) -> EventHit:
    """Integrate until ``gap(y)`` goes from negative to ``>= 0``.

    ``skip`` ignores that many earlier upward crossings.  The crossing time
    is bisected to ``time_tol``.
    """
    solver = DOP853(rhs, 0.0, np.asarray(y0, dtype=float), t_bound=np.inf, rtol=rtol, atol=atol)
    rows = [(0.0, *solver.y)] if record else None
    steps = 0
    prev_gap = gap(solver.y)
    while True:
        t_prev, g_prev = solver.t, prev_gap
        msg = solver.step()
        steps += 1
        if solver.status == "failed":
            raise IntegrationError(f"step failure at time {solver.t}: {msg}")
        if steps > max_steps:
            raise IntegrationError(f"no event within {max_steps} steps")
        if record:
            rows.append((solver.t, *solver.y))
        prev_gap = gap(solver.y)
        if g_prev < 0 <= prev_gap:
            if skip == 0:
                break
            skip -= 1
    dense = solver.dense_output()
    a, b = t_prev, solver.t
    for _ in range(200):
        if b - a <= time_tol:
            break
        m = 0.5 * (a + b)
        if gap(dense(m)) >= 0:
            b = m
        else:
            a = m
    else:
        raise IntegrationError("event isolation did not converge")
    t = 0.5 * (a + b)
    y = dense(t)
    if record:
        rows[-1] = (t, *y)
    return EventHit(float(t), y, steps, rows)
