"""System model: power menu, channel alphabet, integer rate table, packet lengths.

All quantities are in data units (positive integers) for information, and
joules/slot/Hz for powers. Option and gain indices are 0-based.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

PROB_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when a model or config violates an invariant.

    ``violations`` holds the stable identifiers of every failed check.
    """

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ContractError(ValueError):
    """Raised when an operation is called outside its precondition."""


def _finite(values) -> bool:
    return all(isinstance(v, (int, float)) and math.isfinite(v) for v in values)


def shannon_rate(alpha: float, power: float, noise_psd: float) -> int:
    """Data units delivered in one slot: ceil(log2(1 + alpha*power/noise_psd))."""
    for name, value in (("alpha", alpha), ("power", power), ("noise_psd", noise_psd)):
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ValidationError([f"{name} must be a positive finite number, got {value!r}"])
    return max(1, math.ceil(math.log2(1.0 + alpha * power / noise_psd)))


@dataclass(frozen=True)
class PowerMenu:
    levels: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, j):
        return self.levels[j]

    @property
    def lowest(self) -> float:
        return self.levels[0]

    @property
    def highest(self) -> float:
        return self.levels[-1]


@dataclass(frozen=True)
class ChannelDistribution:
    gains: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(float(x) for x in self.gains))
        object.__setattr__(self, "probs", tuple(float(x) for x in self.probs))

    def __len__(self):
        return len(self.gains)

    @classmethod
    def point_mass(cls, gain: float = 1.0) -> "ChannelDistribution":
        return cls((gain,), (1.0,))


@dataclass(frozen=True)
class PacketLengthDistribution:
    lengths: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(self.lengths))
        object.__setattr__(self, "probs", tuple(float(x) for x in self.probs))

    def __len__(self):
        return len(self.lengths)


@dataclass(frozen=True)
class RateTable:
    """``k[i][j]`` = data units delivered under gain ``i`` and power option ``j``."""

    k: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(tuple(row) for row in self.k))

    def __getitem__(self, i):
        return self.k[i]

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(row[j] for row in self.k)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.k), len(self.k[0]) if self.k else 0)


def build_rate_table(
    channel: ChannelDistribution, menu: PowerMenu, noise_psd: float
) -> RateTable:
    return RateTable(
        tuple(
            tuple(shannon_rate(a, p, noise_psd) for p in menu.levels)
            for a in channel.gains
        )
    )


@dataclass(frozen=True)
class LinkModel:
    menu: PowerMenu
    channel: ChannelDistribution
    rates: RateTable
    packets: PacketLengthDistribution

    def with_channel_probs(self, probs: Sequence[float]) -> "LinkModel":
        """Same model with different channel probabilities (e.g. a mismatched planning model)."""
        return LinkModel(
            self.menu,
            ChannelDistribution(self.channel.gains, tuple(probs)),
            self.rates,
            self.packets,
        )


@dataclass(frozen=True)
class SystemConfig:
    beta: float
    v_param: float
    horizon_frames: int
    seed: int = 0
    noise_psd: float | None = None

    def replace(self, **changes) -> "SystemConfig":
        values = {
            "beta": self.beta,
            "v_param": self.v_param,
            "horizon_frames": self.horizon_frames,
            "seed": self.seed,
            "noise_psd": self.noise_psd,
        }
        values.update(changes)
        return SystemConfig(**values)


def kmin(model: LinkModel) -> int:
    return min(row[0] for row in model.rates.k)


def lmax(model: LinkModel) -> int:
    return max(model.packets.lengths)


def max_frame_slots(model: LinkModel, length: int | None = None) -> int:
    """Upper bound on frame length: ceil(L / K_min)."""
    if length is None:
        length = lmax(model)
    return -(-length // kmin(model))


def queue_bound(model: LinkModel, beta: float, v: float) -> float:
    """Deterministic bound on the virtual queue under the online algorithm."""
    p1, pmax = model.menu.lowest, model.menu.highest
    return max(v / (beta - p1) + max_frame_slots(model) * (pmax - beta), 0.0)


def drift_constant(model: LinkModel, beta: float) -> float:
    """C_0 = 1/2 (ceil(L_max/K_min) (P_max + beta))^2."""
    return 0.5 * (max_frame_slots(model) * (model.menu.highest + beta)) ** 2


def _check_probs(probs, label: str, out: list[str]):
    if not _finite(probs):
        out.append(f"{label} probabilities not finite")
        return
    if any(p < 0 for p in probs):
        out.append(f"{label} probabilities negative")
    if abs(sum(probs) - 1.0) > PROB_TOL:
        out.append(f"{label} probabilities do not sum to 1")


def validate_model(model: LinkModel, config: SystemConfig | None = None) -> list[str]:
    """Return every violated invariant; an empty list means the model is valid."""
    out: list[str] = []
    levels = model.menu.levels
    if not levels:
        out.append("power menu empty")
    elif not _finite(levels):
        out.append("power menu not finite")
    else:
        if levels[0] <= 0:
            out.append("power menu not positive")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            out.append("power menu not strictly increasing")

    ch = model.channel
    if not ch.gains:
        out.append("channel alphabet empty")
    elif len(ch.gains) != len(ch.probs):
        out.append("channel gains/probs length mismatch")
    else:
        if not _finite(ch.gains):
            out.append("channel gains not finite")
        elif any(a <= 0 for a in ch.gains):
            out.append("channel gains not positive")
        _check_probs(ch.probs, "channel", out)

    pk = model.packets
    if not pk.lengths:
        out.append("packet length set empty")
    elif len(pk.lengths) != len(pk.probs):
        out.append("packet lengths/probs length mismatch")
    else:
        if any(not isinstance(x, (int, np.integer)) or isinstance(x, bool) or x < 1 for x in pk.lengths):
            out.append("packet lengths not positive integers")
        if len(set(pk.lengths)) != len(pk.lengths):
            out.append("packet lengths not distinct")
        _check_probs(pk.probs, "packet length", out)

    k = model.rates.k
    if len(k) != len(ch.gains) or any(len(row) != len(levels) for row in k):
        out.append("rate table shape mismatch")
    else:
        flat = [x for row in k for x in row]
        if any(not isinstance(x, (int, np.integer)) or isinstance(x, bool) for x in flat):
            out.append("rate table entries not integers")
        elif any(x < 1 for x in flat):
            out.append("rate table entries not positive")
        else:
            rows_ok = all(b >= a for row in k for a, b in zip(row, row[1:]))
            if not rows_ok:
                out.append("rate table not nondecreasing in power")
            if _finite(ch.gains) and not _gain_monotone(ch.gains, k):
                out.append("rate table not nondecreasing in gain")

    if config is not None:
        if not _finite([config.beta, config.v_param]):
            out.append("beta/v not finite")
        else:
            if config.v_param < 0:
                out.append("v negative")
            if levels and _finite(levels) and not levels[0] < config.beta:
                out.append("P_1 >= beta")
        if (
            not isinstance(config.horizon_frames, (int, np.integer))
            or config.horizon_frames < 1
        ):
            out.append("horizon_frames not a positive integer")
        if config.noise_psd is not None and not (
            _finite([config.noise_psd]) and config.noise_psd > 0
        ):
            out.append("noise_psd not positive")
    return out


def _gain_monotone(gains, k) -> bool:
    order = sorted(range(len(gains)), key=lambda i: gains[i])
    for a, b in zip(order, order[1:]):
        if gains[a] == gains[b]:
            if k[a] != k[b]:
                return False
        elif any(y < x for x, y in zip(k[a], k[b])):
            return False
    return True


def normalized(model: LinkModel) -> LinkModel:
    """Renormalize probabilities of a validated model to remove representation error."""
    def renorm(p):
        s = math.fsum(p)
        return tuple(x / s for x in p)

    return LinkModel(
        model.menu,
        ChannelDistribution(model.channel.gains, renorm(model.channel.probs)),
        model.rates,
        PacketLengthDistribution(model.packets.lengths, renorm(model.packets.probs)),
    )


def check(model: LinkModel, config: SystemConfig | None = None) -> LinkModel:
    """Validate and renormalize, raising ValidationError on any violation."""
    violations = validate_model(model, config)
    if violations:
        raise ValidationError(violations)
    return normalized(model)


# --- JSON config ---------------------------------------------------------


def config_from_dict(doc: dict[str, Any]) -> tuple[LinkModel, SystemConfig]:
    """Parse the JSON config document. Structural problems raise ValidationError;
    invariant checks are left to :func:`validate_model`."""
    required = ("power_menu", "channel", "packet_lengths", "beta", "v", "horizon_frames", "seed")
    missing = [key for key in required if key not in doc]
    if missing:
        raise ValidationError([f"missing key {key!r}" for key in missing])
    try:
        menu = PowerMenu(tuple(doc["power_menu"]))
        channel = ChannelDistribution(tuple(doc["channel"]["gains"]), tuple(doc["channel"]["probs"]))
        packets = PacketLengthDistribution(
            tuple(doc["packet_lengths"]["values"]), tuple(doc["packet_lengths"]["probs"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError([f"malformed config: {exc}"]) from exc
    noise = doc.get("noise_psd")
    if "rate_table" in doc and doc["rate_table"] is not None:
        rows = doc["rate_table"]
        bad = [
            x for row in rows for x in row
            if not (isinstance(x, int) and not isinstance(x, bool))
            and not (isinstance(x, float) and x.is_integer())
        ]
        if bad:
            raise ValidationError(["rate table entries not integers"])
        rates = RateTable(tuple(tuple(int(x) for x in row) for row in rows))
    elif noise is not None:
        if not (_finite([noise]) and noise > 0):
            raise ValidationError(["noise_psd not positive"])
        if not (_finite(channel.gains) and _finite(menu.levels)) or min(channel.gains + menu.levels, default=0) <= 0:
            raise ValidationError(["cannot build rate table from nonpositive gains or powers"])
        rates = build_rate_table(channel, menu, noise)
    else:
        raise ValidationError(["either rate_table or noise_psd is required"])
    seed = doc["seed"]
    config = SystemConfig(
        beta=doc["beta"],
        v_param=doc["v"],
        horizon_frames=doc["horizon_frames"],
        seed=int(seed),
        noise_psd=noise,
    )
    return LinkModel(menu, channel, rates, packets), config


def config_to_dict(model: LinkModel, config: SystemConfig) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "power_menu": list(model.menu.levels),
        "channel": {"gains": list(model.channel.gains), "probs": list(model.channel.probs)},
        "rate_table": [list(row) for row in model.rates.k],
        "packet_lengths": {"values": list(model.packets.lengths), "probs": list(model.packets.probs)},
        "beta": config.beta,
        "v": config.v_param,
        "horizon_frames": config.horizon_frames,
        "seed": config.seed,
    }
    if config.noise_psd is not None:
        doc["noise_psd"] = config.noise_psd
    return doc


def load_config(path: str | Path) -> tuple[LinkModel, SystemConfig]:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def fingerprint(model: LinkModel, config: SystemConfig) -> str:
    """SHA-256 of the canonical JSON form of model + config."""
    blob = json.dumps(config_to_dict(model, config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
