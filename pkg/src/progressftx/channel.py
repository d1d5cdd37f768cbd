"""Slot-level uplink abstraction: deterministic rate or Bernoulli outage.

A Gaussian channel always delivers and its per-slot feature budget follows
from bandwidth, slot length, SNR and quantization depth.  A fading channel
is reduced to a fixed feature budget plus an i.i.d. per-slot outage flag;
the fading-gain distribution itself is never modelled.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class SlotOutcome(enum.Enum):
    DELIVERED = "delivered"
    OUTAGE = "outage"


@dataclass(frozen=True)
class GaussianChannel:
    """Static channel: rate matched to the known gain, no outages.

    ``snr`` is the linear receive SNR (rho * g0).
    """

    bandwidth_hz: float
    slot_s: float
    snr: float
    bits_per_feature: int

    def __post_init__(self):
        if self.bandwidth_hz <= 0 or self.slot_s <= 0 or self.bits_per_feature <= 0:
            raise ValueError("bandwidth, slot length and bits/feature must be > 0")
        if self.snr < 0:
            raise ValueError("snr must be >= 0")
        if features_per_slot(self) < 1:
            raise ValueError(
                "configuration yields a feature budget of 0 per slot")

    @staticmethod
    def from_snr_db(bandwidth_hz: float, slot_s: float, snr_db: float,
                    bits_per_feature: int) -> "GaussianChannel":
        return GaussianChannel(bandwidth_hz=bandwidth_hz, slot_s=slot_s,
                               snr=10.0 ** (snr_db / 10.0),
                               bits_per_feature=bits_per_feature)


@dataclass(frozen=True)
class FadingChannel:
    """Fixed-rate channel whose slots fail independently with probability outage_prob."""

    features_per_slot: int
    outage_prob: float

    def __post_init__(self):
        if self.features_per_slot < 1:
            raise ValueError("features_per_slot must be >= 1")
        if not 0.0 <= self.outage_prob < 1.0:
            raise ValueError("outage_prob must be in [0, 1)")


ChannelModel = GaussianChannel | FadingChannel


def features_per_slot(ch: ChannelModel) -> int:
    """Feature budget of one slot.

    Gaussian: ``floor(B * log2(1 + snr) * T / Q)`` (the floor is kept even
    though it rarely matters at sensible rates).  Fading: the configured
    budget.
    """
    if isinstance(ch, FadingChannel):
        return ch.features_per_slot
    rate = ch.bandwidth_hz * np.log2(1.0 + ch.snr)
    return int(np.floor(rate * ch.slot_s / ch.bits_per_feature))


def outage_prob(ch: ChannelModel) -> float:
    return ch.outage_prob if isinstance(ch, FadingChannel) else 0.0


def slot_outcome(ch: ChannelModel, rng: np.random.Generator) -> SlotOutcome:
    """Draw one slot: Gaussian always delivers, fading fails i.i.d."""
    if isinstance(ch, FadingChannel) and rng.random() < ch.outage_prob:
        return SlotOutcome.OUTAGE
    return SlotOutcome.DELIVERED
