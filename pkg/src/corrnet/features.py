"""The sixteen per-flow traffic features.

Bytes of a packet are its network-layer datagram length; "sent" means
initiator-to-responder. Rates over a zero-duration flow are defined as 0
so every vector stays finite, and directions with fewer than two packets
have a 0 mean inter-arrival time.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dataset import FEATURE_IDS, ClassLabel
from .flows import Direction, FlowRecord

FEATURE_NAMES = {
    "F1": "Average_packet_size",
    "F2": "Time_interval_between_packets_sent",
    "F3": "Time_interval_between_packets_received",
    "F4": "Flow_duration",
    "F5": "Ratio_of_incoming_to_outgoing_packets",
    "F6": "Ratio_of_incoming_to_outgoing_bytes",
    "F7": "Packet_size_sent",
    "F8": "Packets_sent_per_flow",
    "F9": "Packets_sent_per_second",
    "F10": "Packets_received_per_second",
    "F11": "Packets_received_per_flow",
    "F12": "Packet_size_received",
    "F13": "Bytes_sent",
    "F14": "Bytes_sent_per_second",
    "F15": "Bytes_received",
    "F16": "Bytes_received_per_second",
}


@dataclass
class FeatureVector:
    flow_id: str
    values: dict[str, float]
    label: ClassLabel | None = None

    def as_row(self) -> list[float]:
        return [self.values[fid] for fid in FEATURE_IDS]


def _mean_gap(timestamps: list[float]) -> float:
    if len(timestamps) < 2:
        return 0.0
    gaps = [b - a for a, b in zip(timestamps, timestamps[1:])]
    return sum(gaps) / len(gaps)


def compute_features(flow: FlowRecord, flow_id: str = "") -> FeatureVector:
    """The feature dictionary applied to one assembled flow."""
    sent = [e for e in flow.events if e.direction is Direction.SENT]
    received = [e for e in flow.events if e.direction is Direction.RECEIVED]

    f8 = float(len(sent))
    f11 = float(len(received))
    f13 = float(sum(e.ip_total_length for e in sent))
    f15 = float(sum(e.ip_total_length for e in received))
    f7 = f13 / f8 if f8 > 0 else 0.0
    f12 = f15 / f11 if f11 > 0 else 0.0
    f1 = (f13 + f15) / (f8 + f11)
    f4 = flow.last_timestamp - flow.first_timestamp
    f2 = _mean_gap([e.timestamp for e in sent])
    f3 = _mean_gap([e.timestamp for e in received])
    f5 = f11 / f8
    f6 = f15 / f13
    f9 = f8 / f4 if f4 > 0 else 0.0
    f10 = f11 / f4 if f4 > 0 else 0.0
    f14 = f13 / f4 if f4 > 0 else 0.0
    f16 = f15 / f4 if f4 > 0 else 0.0

    return FeatureVector(flow_id=flow_id, values={
        "F1": f1, "F2": f2, "F3": f3, "F4": f4,
        "F5": f5, "F6": f6, "F7": f7, "F8": f8,
        "F9": f9, "F10": f10, "F11": f11, "F12": f12,
        "F13": f13, "F14": f14, "F15": f15, "F16": f16,
    })
