"""Seeded simulation runs, trace I/O, metrics and V sweeps."""

from __future__ import annotations

import csv
import io
import math
from fractions import Fraction
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .controller import FrameRecord, Trace, run_horizon
from .frame_solver import Case
from .model import ContractError, LinkModel, SystemConfig, drift_constant, fingerprint, queue_bound
from .rng import RandomStreams, derive_seed

FRAME_COLUMNS = ("f", "L", "T", "power_sum", "surplus", "q_before", "q_after", "mode")
SLOT_COLUMNS = ("t", "f", "power_index", "gain_index", "delivered_units")
SWEEP_COLUMNS = (
    "v", "mean_delay", "se_delay", "mean_slack", "q_max", "theta_star", "gap_times_v",
    "se_slack", "mean_drift_penalty", "se_drift_penalty", "c0", "reps",
)


def fmt(x: float) -> str:
    return format(x, ".17g")


def simulate(model: LinkModel, config: SystemConfig, planning_model: LinkModel | None = None) -> Trace:
    return run_horizon(
        model, config, planning_model=planning_model, streams=RandomStreams(config.seed)
    )


@dataclass(frozen=True)
class Metrics:
    frames: int
    total_slots: int
    avg_delay: float
    avg_power_per_slot: float
    constraint_slack: float
    per_frame_surplus_mean: float
    q_max: float
    q_final: float
    q_bound: float
    drift_penalty_mean: float
    c0_bound: float

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(trace: Trace, config: SystemConfig | None = None) -> Metrics:
    """Time averages over the trace.

    ``per_frame_surplus_mean`` is the frame-normalised form of the power
    constraint; ``constraint_slack`` is the slot-normalised ratio form.
    """
    if not trace.frames:
        raise ContractError("metrics need a nonempty trace")
    config = config or trace.config
    frames = trace.frames
    n = len(frames)
    total_slots = sum(fr.slots for fr in frames)
    total_power = math.fsum(fr.power_sum for fr in frames)
    avg_power = total_power / total_slots
    v = config.v_param
    drift_penalty = math.fsum(
        0.5 * (fr.q_after**2 - fr.q_before**2) + v * fr.slots for fr in frames
    )
    q_max = max(max(fr.q_before, fr.q_after) for fr in frames)
    return Metrics(
        frames=n,
        total_slots=total_slots,
        avg_delay=total_slots / n,
        avg_power_per_slot=avg_power,
        constraint_slack=avg_power - config.beta,
        per_frame_surplus_mean=math.fsum(fr.surplus for fr in frames) / n,
        q_max=q_max,
        q_final=frames[-1].q_after,
        q_bound=queue_bound(trace.model, config.beta, v),
        drift_penalty_mean=drift_penalty / n,
        c0_bound=drift_constant(trace.model, config.beta),
    )


def surplus_prefix_violations(trace: Trace, bound: float) -> list[int]:
    """Prefix lengths F' at which (1/F') * sum(surplus) exceeds bound / F'.

    Partial sums are kept as exact rationals so the check carries no tolerance.
    """
    bad = []
    limit = Fraction(bound)
    total = Fraction(0)
    for n, fr in enumerate(trace.frames, start=1):
        total += Fraction(fr.surplus)
        if total > limit:
            bad.append(n)
    return bad


# --- trace serialisation --------------------------------------------------


def frames_csv(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRAME_COLUMNS)
    for fr in trace.frames:
        w.writerow(
            [fr.index, fr.length, fr.slots, fmt(fr.power_sum), fmt(fr.surplus),
             fmt(fr.q_before), fmt(fr.q_after), fr.mode.value]
        )
    return buf.getvalue()


def slots_csv(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SLOT_COLUMNS)
    for fr in trace.frames:
        for s, (j, i, k) in enumerate(zip(fr.powers, fr.gains, fr.delivered)):
            w.writerow([fr.start_slot + s, fr.index, j, i, k])
    return buf.getvalue()


def write_trace(trace: Trace, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fpath, spath = out / "frames.csv", out / "slots.csv"
    fpath.write_bytes(frames_csv(trace).encode("utf-8"))
    spath.write_bytes(slots_csv(trace).encode("utf-8"))
    return fpath, spath


def load_trace(
    frames_path: str | Path, slots_path: str | Path, model: LinkModel, config: SystemConfig
) -> Trace:
    """Rebuild a trace from its CSV files. Slot rows are matched to frames by ``f``."""
    per_frame: dict[int, list[tuple[int, int, int, int]]] = {}
    with open(slots_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            per_frame.setdefault(int(row["f"]), []).append(
                (int(row["t"]), int(row["power_index"]), int(row["gain_index"]), int(row["delivered_units"]))
            )
    frames = []
    with open(frames_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            f = int(row["f"])
            slots = sorted(per_frame.get(f, []))
            frames.append(
                FrameRecord(
                    index=f,
                    length=int(row["L"]),
                    start_slot=slots[0][0] if slots else 0,
                    slots=int(row["T"]),
                    powers=tuple(s[1] for s in slots),
                    gains=tuple(s[2] for s in slots),
                    delivered=tuple(s[3] for s in slots),
                    power_sum=float(row["power_sum"]),
                    surplus=float(row["surplus"]),
                    q_before=float(row["q_before"]),
                    q_after=float(row["q_after"]),
                    mode=Case(row["mode"]),
                )
            )
    return Trace(tuple(frames), model, config, fingerprint(model, config))


# --- sweeps ---------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    v: float
    mean_delay: float
    se_delay: float
    mean_slack: float
    se_slack: float
    q_max: float
    mean_drift_penalty: float
    se_drift_penalty: float
    c0: float
    reps: int
    theta_star: float | None = None

    @property
    def gap_times_v(self) -> float | None:
        if self.theta_star is None:
            return None
        return (self.mean_delay - self.theta_star) * self.v


def _mean_se(xs: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(xs, dtype=float)
    if len(a) < 2:
        return float(a.mean()), 0.0
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(len(a)))


def sweep_v(
    model: LinkModel,
    base_config: SystemConfig,
    v_values: Iterable[float],
    repetitions: int,
    theta_star: float | None = None,
    progress=None,
) -> list[SweepRow]:
    """Run ``repetitions`` independent simulations per V.

    Repetition ``r`` uses the seed derived from (base seed, r) for every V, so
    the V values are compared on common random numbers.
    """
    v_values = list(v_values)
    if not v_values or repetitions < 1:
        raise ContractError("need at least one V and one repetition")
    rows = []
    for v in v_values:
        delays, slacks, dpp, qmax = [], [], [], 0.0
        for rep in range(repetitions):
            seed = base_config.seed if repetitions == 1 else derive_seed(base_config.seed, rep)
            cfg = base_config.replace(v_param=v, seed=seed)
            m = compute_metrics(simulate(model, cfg), cfg)
            delays.append(m.avg_delay)
            slacks.append(m.constraint_slack)
            dpp.append(m.drift_penalty_mean)
            qmax = max(qmax, m.q_max)
            if progress is not None:
                progress(v, rep, m)
        md, sd = _mean_se(delays)
        ms, ss = _mean_se(slacks)
        mp, sp = _mean_se(dpp)
        rows.append(
            SweepRow(v=v, mean_delay=md, se_delay=sd, mean_slack=ms, se_slack=ss, q_max=qmax,
                     mean_drift_penalty=mp, se_drift_penalty=sp,
                     c0=drift_constant(model, base_config.beta), reps=repetitions,
                     theta_star=theta_star)
        )
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        opt = lambda x: "" if x is None else fmt(x)  # noqa: E731
        w.writerow(
            [fmt(r.v), fmt(r.mean_delay), fmt(r.se_delay), fmt(r.mean_slack), fmt(r.q_max),
             opt(r.theta_star), opt(r.gap_times_v), fmt(r.se_slack), fmt(r.mean_drift_penalty),
             fmt(r.se_drift_penalty), fmt(r.c0), r.reps]
        )
    return buf.getvalue()


def read_sweep_csv(path: str | Path) -> list[dict[str, float | None]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append({k: (float(v) if v not in ("", None) else None) for k, v in row.items()})
    return rows
