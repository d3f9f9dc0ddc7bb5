"""Online frame-based controller.

At the start of each frame the controller looks at the virtual queue and the
packet length, builds one frame policy, then transmits slot by slot until the
accumulated data units reach the packet length. The queue is updated once per
frame with the frame's total power surplus.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator

from .frame_solver import Case, ValueTable, choose_power, solve_frame
from .model import (
    ContractError,
    LinkModel,
    SystemConfig,
    check,
    fingerprint,
    max_frame_slots,
    queue_bound,
)
from .rng import RandomStreams

log = logging.getLogger(__name__)

_CACHE_LIMIT = 200_000


class BoundViolation(AssertionError):
    """A deterministic sample-path bound failed; always a bug."""


@dataclass(frozen=True)
class FrameRecord:
    index: int
    length: int
    start_slot: int
    slots: int
    powers: tuple[int, ...]
    gains: tuple[int, ...]
    delivered: tuple[int, ...]
    power_sum: float
    surplus: float
    q_before: float
    q_after: float
    mode: Case


@dataclass(frozen=True)
class Trace:
    frames: tuple[FrameRecord, ...]
    model: LinkModel
    config: SystemConfig
    fingerprint: str
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.frames)

    @property
    def total_slots(self) -> int:
        return sum(fr.slots for fr in self.frames)


def queue_update(q: float, surplus: float) -> float:
    return max(q + surplus, 0.0)


def run_frame(
    q: float,
    packet_length: int,
    model: LinkModel,
    config: SystemConfig,
    channel_stream: Iterator[int],
    *,
    table: ValueTable | None = None,
    planning_model: LinkModel | None = None,
    index: int = 0,
    start_slot: int = 0,
) -> tuple[FrameRecord, float]:
    """Transmit one packet.

    ``channel_stream`` yields realised gain indices; each draw happens after
    the slot's power is fixed. ``planning_model`` (default ``model``) is the
    channel law the policy is built from and may differ from the true one.
    """
    if packet_length not in model.packets.lengths:
        raise ContractError(f"packet length {packet_length} not in the supported set")
    if table is None:
        table = solve_frame(q, packet_length, planning_model or model, config.v_param, config.beta)
    levels = model.menu.levels
    k_tab = model.rates.k
    beta = config.beta

    powers, gains, delivered = [], [], []
    power_sum = surplus = 0.0
    remaining = packet_length
    while remaining > 0:
        j = choose_power(table, remaining)
        i = next(channel_stream)
        units = k_tab[i][j]
        # overshoot on the last slot is discarded
        remaining = max(remaining - units, 0)
        powers.append(j)
        gains.append(i)
        delivered.append(units)
        power_sum += levels[j]
        surplus += levels[j] - beta

    q_after = queue_update(q, surplus)
    record = FrameRecord(
        index=index,
        length=packet_length,
        start_slot=start_slot,
        slots=len(powers),
        powers=tuple(powers),
        gains=tuple(gains),
        delivered=tuple(delivered),
        power_sum=power_sum,
        surplus=surplus,
        q_before=q,
        q_after=q_after,
        mode=table.mode,
    )
    return record, q_after


def run_horizon(
    model: LinkModel,
    config: SystemConfig,
    *,
    planning_model: LinkModel | None = None,
    streams: RandomStreams | None = None,
    check_bounds: bool = True,
) -> Trace:
    """Run ``config.horizon_frames`` frames from Q[0] = 0.

    With ``check_bounds`` every frame is checked against the deterministic
    queue bound and the frame-length bound; a failure raises BoundViolation.
    """
    model = check(model, config.replace(horizon_frames=max(config.horizon_frames, 1)))
    planning = model if planning_model is None else check(planning_model)
    if planning.rates != model.rates or planning.menu != model.menu:
        raise ContractError("planning model may only differ in channel probabilities")
    streams = streams or RandomStreams(config.seed)
    channel = streams.channel(model.channel.probs)
    packets = streams.packets(model.packets.probs)
    lengths = model.packets.lengths

    bound = queue_bound(model, config.beta, config.v_param)
    v, beta = config.v_param, config.beta
    cache: dict[tuple[float, int], ValueTable] = {}
    frames = []
    q = 0.0
    slot = 0
    for f in range(config.horizon_frames):
        length = lengths[next(packets)]
        key = (q, length)
        table = cache.get(key)
        if table is None:
            if len(cache) >= _CACHE_LIMIT:
                cache.clear()
            table = cache[key] = solve_frame(q, length, planning, v, beta)
        record, q = run_frame(
            q, length, model, config, channel, table=table, index=f, start_slot=slot
        )
        if check_bounds:
            _check_frame(record, model, bound)
        frames.append(record)
        slot += record.slots
    return Trace(tuple(frames), model, config, fingerprint(model, config))


def _check_frame(record: FrameRecord, model: LinkModel, bound: float):
    if record.q_after > bound:
        raise BoundViolation(f"queue bound {bound!r} exceeded: {record!r}")
    if record.slots > max_frame_slots(model, record.length):
        raise BoundViolation(f"frame longer than ceil(L/K_min): {record!r}")
    if sum(record.delivered) < record.length or sum(record.delivered[:-1]) >= record.length:
        raise BoundViolation(f"frame did not end on the first crossing slot: {record!r}")
