"""Brute-force ground truth for small instances.

A frame policy is a map from remaining demand k = 1..L to a power option.
Every expectation below is computed by exact backward recursion over k, so
nothing here is Monte Carlo.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .frame_solver import penalties, solve_frame
from .model import ContractError, LinkModel

ENUMERATION_LIMIT = 10**7
_BLOCK = 1 << 15


class GuardExceeded(ContractError):
    pass


@dataclass(frozen=True)
class PolicyStats:
    expected_length: float
    expected_surplus: float

    def expected_penalty(self, q: float, v: float) -> float:
        # E[sum_t V + Q (P - beta)] is linear in the two frame expectations
        return v * self.expected_length + q * self.expected_surplus


def _evaluate(policy: Sequence[int], costs: Sequence[float], model: LinkModel) -> float:
    probs = model.channel.probs
    k_tab = model.rates.k
    val = [0.0] * (len(policy) + 1)
    for k in range(1, len(policy) + 1):
        j = policy[k - 1]
        acc = 0.0
        for i, p in enumerate(probs):
            rem = k - k_tab[i][j]
            if rem > 0:
                acc += p * val[rem]
        val[k] = costs[j] + acc
    return val[-1]


def policy_stats(policy: Sequence[int], model: LinkModel, length: int, beta: float) -> PolicyStats:
    """Expected frame length and power surplus of a deterministic frame policy.

    ``policy[k - 1]`` is the option used when ``k`` units remain.
    """
    if len(policy) != length:
        raise ContractError(f"policy covers {len(policy)} states, expected {length}")
    n_opt = len(model.menu)
    if any(not 0 <= j < n_opt for j in policy):
        raise ContractError("policy uses an unknown power option")
    ones = [1.0] * n_opt
    surplus = [p - beta for p in model.menu.levels]
    return PolicyStats(_evaluate(policy, ones, model), _evaluate(policy, surplus, model))


# --- vectorised enumeration ------------------------------------------------


def policy_count(model: LinkModel, length: int) -> int:
    return len(model.menu) ** length


def _guard(model: LinkModel, length: int):
    n = policy_count(model, length)
    if n > ENUMERATION_LIMIT:
        raise GuardExceeded(
            f"{len(model.menu)}^{length} = {n} policies exceeds the enumeration limit {ENUMERATION_LIMIT}"
        )


def decode_policies(codes: np.ndarray, n_opt: int, length: int) -> np.ndarray:
    """Row ``r`` is the policy with index ``codes[r]``; column ``k-1`` is state ``k``."""
    out = np.empty((len(codes), length), dtype=np.int64)
    rest = codes.astype(np.int64)
    for col in range(length):
        rest, out[:, col] = np.divmod(rest, n_opt)
    return out


def _evaluate_block(pol: np.ndarray, cost_sets: Sequence[np.ndarray], model: LinkModel) -> list[np.ndarray]:
    n, length = pol.shape
    probs = np.asarray(model.channel.probs)
    k_tab = np.asarray(model.rates.k, dtype=np.int64)
    rows = np.arange(n)
    vals = [np.zeros((n, length + 1)) for _ in cost_sets]
    for k in range(1, length + 1):
        j = pol[:, k - 1]
        for costs, val in zip(cost_sets, vals):
            acc = np.zeros(n)
            for i, p in enumerate(probs):
                rem = np.maximum(k - k_tab[i][j], 0)
                acc += p * val[rows, rem]
            val[:, k] = costs[j] + acc
    return [val[:, -1] for val in vals]


def enumerate_values(
    model: LinkModel, length: int, cost_sets: Sequence[Sequence[float]]
) -> Iterator[tuple[np.ndarray, list[np.ndarray]]]:
    """Yield (policy codes, [expected total cost per cost vector]) block by block."""
    _guard(model, length)
    n_opt = len(model.menu)
    total = n_opt**length
    costs = [np.asarray(c, dtype=float) for c in cost_sets]
    for start in range(0, total, _BLOCK):
        codes = np.arange(start, min(start + _BLOCK, total))
        pol = decode_policies(codes, n_opt, length)
        yield codes, _evaluate_block(pol, costs, model)


# --- DP verification -------------------------------------------------------


@dataclass(frozen=True)
class DPCheck:
    dp_value: float
    oracle_value: float
    match: bool
    oracle_policy: tuple[int, ...]


def verify_dp(model: LinkModel, length: int, q: float, v: float, beta: float, rtol: float = 1e-9) -> DPCheck:
    """Compare the value table's m[L] with the best of all |P|^L frame policies.

    With a negative penalty the table holds the value of the all-P_1 policy,
    so the same comparison checks that the lowest-power shortcut is optimal.
    """
    pen = penalties(q, v, model.menu, beta)
    table = solve_frame(q, length, model, v, beta)
    best, best_code = np.inf, -1
    for codes, (vals,) in enumerate_values(model, length, [pen]):
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, best_code = float(vals[i]), int(codes[i])
    dp = table.values[length]
    policy = tuple(decode_policies(np.array([best_code]), len(model.menu), length)[0].tolist())
    ok = abs(dp - best) <= rtol * max(1.0, abs(best))
    return DPCheck(dp, best, ok, policy)


# --- optimal constrained delay --------------------------------------------


@dataclass
class Frontier:
    """All (expected surplus, expected length) points for one packet length."""

    length: int
    prob: float
    n_options: int
    surplus: np.ndarray
    expected_length: np.ndarray
    envelope: list[int] = field(default_factory=list)  # policy codes, min-length end first

    def point(self, code: int) -> tuple[float, float]:
        return float(self.surplus[code]), float(self.expected_length[code])


def frontier(model: LinkModel, length: int, prob: float, beta: float) -> Frontier:
    s_parts, e_parts = [], []
    ones = [1.0] * len(model.menu)
    surplus = [p - beta for p in model.menu.levels]
    for _, (e, s) in enumerate_values(model, length, [ones, surplus]):
        e_parts.append(e)
        s_parts.append(s)
    fr = Frontier(length, prob, len(model.menu), np.concatenate(s_parts), np.concatenate(e_parts))
    fr.envelope = _envelope(fr.surplus, fr.expected_length)
    return fr


def _envelope(s: np.ndarray, e: np.ndarray) -> list[int]:
    """Lower convex envelope of the points reachable by minimising e + lam*s, lam >= 0.

    Returned from the minimum-length vertex to the minimum-surplus vertex.
    """
    order = np.lexsort((np.arange(len(s)), e, s))
    # for equal surplus keep only the shortest (first after sorting)
    first = np.ones(len(order), dtype=bool)
    first[1:] = s[order[1:]] != s[order[:-1]]
    pts = order[first].tolist()
    hull: list[int] = []
    for b in pts:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (s[a] - s[o]) * (e[b] - e[o]) - (e[a] - e[o]) * (s[b] - s[o])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(b)
    keep = [hull[0]]
    for idx in hull[1:]:
        if e[idx] < e[keep[-1]]:
            keep.append(idx)
        else:
            break
    return keep[::-1]


@dataclass(frozen=True)
class ThetaStar:
    theta: float
    expected_surplus: float
    multiplier: float
    support: tuple[dict, ...]
    frontiers: tuple[Frontier, ...]


def theta_star(model: LinkModel, beta: float) -> ThetaStar:
    """Minimum expected frame length subject to nonpositive expected surplus,
    over randomised mixtures of deterministic frame policies chosen per L.

    Walks the Lagrange multiplier up through the envelope breakpoints until
    the expected surplus turns nonpositive, then mixes the two selections on
    either side of that breakpoint.
    """
    if not model.menu.lowest < beta:
        raise ContractError("infeasible: P_1 must be below beta")
    fronts = tuple(
        frontier(model, L, p, beta) for L, p in zip(model.packets.lengths, model.packets.probs)
    )

    def totals(state):
        s = e = 0.0
        for fr, idx in zip(fronts, state):
            ps, pe = fr.point(fr.envelope[idx])
            s += fr.prob * ps
            e += fr.prob * pe
        return s, e

    state = [0] * len(fronts)
    s0, e0 = totals(state)
    if s0 <= 0:
        return ThetaStar(e0, s0, 0.0, _support(fronts, state, state, 1.0), fronts)

    events = []
    for n, fr in enumerate(fronts):
        for idx in range(1, len(fr.envelope)):
            sa, ea = fr.point(fr.envelope[idx - 1])
            sb, eb = fr.point(fr.envelope[idx])
            events.append(((eb - ea) / (sa - sb), n))
    events.sort()
    pos = 0
    while pos < len(events):
        lam = events[pos][0]
        left = list(state)
        while pos < len(events) and events[pos][0] == lam:
            state[events[pos][1]] += 1
            pos += 1
        s_right, e_right = totals(state)
        if s_right <= 0:
            s_left, e_left = totals(left)
            w = -s_right / (s_left - s_right)
            theta = w * e_left + (1.0 - w) * e_right
            surplus = w * s_left + (1.0 - w) * s_right
            return ThetaStar(theta, surplus, lam, _support(fronts, left, state, w), fronts)
    raise AssertionError("all-P_1 policies should make the surplus negative")


def _support(fronts, left, right, w) -> tuple[dict, ...]:
    out = []
    for fr, a, b in zip(fronts, left, right):
        parts = [(fr.envelope[a], w), (fr.envelope[b], 1.0 - w)] if a != b else [(fr.envelope[a], 1.0)]
        for code, weight in parts:
            if weight <= 0:
                continue
            s, e = fr.point(code)
            policy = decode_policies(np.array([code]), fr.n_options, fr.length)[0]
            out.append(
                {
                    "length": fr.length,
                    "length_prob": fr.prob,
                    "policy": policy.tolist(),
                    "weight": weight,
                    "expected_length": e,
                    "expected_surplus": s,
                }
            )
    return tuple(out)


def min_expected_delay(model: LinkModel, beta: float) -> float:
    """Expected frame length of the fastest policies, ignoring the power budget."""
    total = 0.0
    for L, p in zip(model.packets.lengths, model.packets.probs):
        fr = frontier(model, L, p, beta)
        total += p * float(fr.expected_length.min())
    return total


def frontier_csv(fr: Frontier) -> str:
    on_env = set(fr.envelope)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy_code", "expected_surplus", "expected_length", "on_envelope"])
    for code in range(len(fr.surplus)):
        w.writerow([code, format(fr.surplus[code], ".17g"), format(fr.expected_length[code], ".17g"),
                    int(code in on_env)])
    return buf.getvalue()
