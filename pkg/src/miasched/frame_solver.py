"""Per-frame subproblem: pick powers to minimise the expected sum of
``V + Q (P - beta)`` over the frame, subject to delivering ``L`` data units.

When some per-slot penalty is negative the lowest power is optimal for the
whole frame (``Case.LOWEST``). Otherwise the value table

    m[k] = min_j  r[j] + sum_i phi_i * m[k - K(alpha_i, P_j)],   m[k <= 0] = 0

is filled bottom-up for k = 1..L.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .model import ContractError, LinkModel, PowerMenu


class Case(str, enum.Enum):
    LOWEST = "case1"  # some penalty < 0: transmit at P_1 until the frame ends
    DP = "case2"  # all penalties >= 0: follow the value table


@dataclass(frozen=True)
class ValueTable:
    """Frame policy for remaining demand k = 0..L.

    ``values[0]`` is 0 and ``choice[0]`` is -1 (no decision at k = 0). In the
    ``LOWEST`` case ``values`` holds the expected penalty of the all-P_1 policy.
    """

    values: tuple[float, ...]
    choice: tuple[int, ...]
    mode: Case
    penalties: tuple[float, ...]

    @property
    def length(self) -> int:
        return len(self.values) - 1


def penalties(q: float, v: float, menu: PowerMenu | Sequence[float], beta: float) -> tuple[float, ...]:
    levels = menu.levels if isinstance(menu, PowerMenu) else menu
    return tuple(v + q * (p - beta) for p in levels)


def case_split(pen: Sequence[float]) -> Case:
    # R = 0 exactly belongs to the DP case.
    return Case.LOWEST if min(pen) < 0 else Case.DP


def case1_threshold(v: float, beta: float, p1: float) -> float:
    """Queue level above which the lowest-power shortcut applies."""
    return v / (beta - p1)


def _require_dp(pen: Sequence[float], length: int):
    if case_split(pen) is not Case.DP:
        raise ContractError("value table requested for penalties with a negative entry")
    if length < 1:
        raise ContractError(f"packet length must be >= 1, got {length}")


def build_value_table_static(length: int, pen: Sequence[float], rates: Sequence[int]) -> ValueTable:
    """Unbounded-knapsack recursion for a fixed channel gain.

    ``rates[j]`` is the number of data units option ``j`` delivers.
    """
    _require_dp(pen, length)
    m = [0.0] * (length + 1)
    choice = [-1] * (length + 1)
    for k in range(1, length + 1):
        best = arg = None
        for j, r in enumerate(pen):
            rem = k - rates[j]
            val = r + (m[rem] if rem > 0 else 0.0)
            if best is None or val < best:
                best, arg = val, j
        m[k] = best
        choice[k] = arg
    return ValueTable(tuple(m), tuple(choice), Case.DP, tuple(pen))


def build_value_table_stochastic(length: int, pen: Sequence[float], model: LinkModel) -> ValueTable:
    _require_dp(pen, length)
    probs = model.channel.probs
    k_tab = model.rates.k
    m = [0.0] * (length + 1)
    choice = [-1] * (length + 1)
    for k in range(1, length + 1):
        best = arg = None
        for j, r in enumerate(pen):
            acc = 0.0
            for i, p in enumerate(probs):
                rem = k - k_tab[i][j]
                if rem > 0:
                    acc += p * m[rem]
            val = r + acc
            if best is None or val < best:
                best, arg = val, j
        m[k] = best
        choice[k] = arg
    return ValueTable(tuple(m), tuple(choice), Case.DP, tuple(pen))


def lowest_power_table(length: int, pen: Sequence[float], model: LinkModel) -> ValueTable:
    """Table for the all-P_1 policy, valued at its expected total penalty."""
    probs = model.channel.probs
    k_low = model.rates.column(0)
    r = pen[0]
    m = [0.0] * (length + 1)
    for k in range(1, length + 1):
        acc = 0.0
        for p, kk in zip(probs, k_low):
            if k - kk > 0:
                acc += p * m[k - kk]
        m[k] = r + acc
    choice = (-1,) + (0,) * length
    return ValueTable(tuple(m), choice, Case.LOWEST, tuple(pen))


def solve_frame(q: float, length: int, model: LinkModel, v: float, beta: float) -> ValueTable:
    """Build the frame policy for queue value ``q`` and packet length ``length``."""
    if length < 1:
        raise ContractError(f"packet length must be >= 1, got {length}")
    pen = penalties(q, v, model.menu, beta)
    if case_split(pen) is Case.LOWEST:
        return lowest_power_table(length, pen, model)
    if len(model.channel.gains) == 1:
        return build_value_table_static(length, pen, model.rates.k[0])
    return build_value_table_stochastic(length, pen, model)


def choose_power(table: ValueTable, remaining: int) -> int:
    if not 1 <= remaining <= table.length:
        raise ContractError(f"remaining={remaining} outside 1..{table.length}")
    if table.mode is Case.LOWEST:
        return 0
    return table.choice[remaining]
