"""Byte accounting for the simulated inter-robot exchange."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..graph import CommGraph
from ..model import ModelConfig

# Published reference point: one message per level vs sharing the raw image, in MB per frame.
REFERENCE_MESSAGE_MBPF = 2.5
REFERENCE_RAW_MBPF = 6.0
REFERENCE_RATIO = REFERENCE_MESSAGE_MBPF / REFERENCE_RAW_MBPF


@dataclass
class BandwidthReport:
    link_bytes: dict = field(default_factory=dict)  # (src, dst) -> bytes per frame per level
    levels: int = 1
    message_bytes: int = 0  # one message, one level
    raw_bytes: int = 0  # one raw image
    total_message_bytes: int = 0  # all links, all levels, per frame
    total_raw_bytes: int = 0  # raw image over every link, per frame

    @property
    def ratio(self) -> float:
        return self.message_bytes / self.raw_bytes

    def to_text(self) -> str:
        rows = [
            f"links (directed)          {len(self.link_bytes)}",
            f"levels                    {self.levels}",
            f"message bytes/link/level  {self.message_bytes}",
            f"raw image bytes           {self.raw_bytes}",
            f"total message bytes/frame {self.total_message_bytes}",
            f"total raw bytes/frame     {self.total_raw_bytes}",
            f"message/raw ratio         {self.ratio:.4f}",
            f"reference ratio           {REFERENCE_MESSAGE_MBPF} / {REFERENCE_RAW_MBPF} MBpf = {REFERENCE_RATIO:.3f}",
        ]
        return "\n".join(rows) + "\n"


def simulate_exchange(graph: CommGraph, cfg: ModelConfig, payload_width: int = 4) -> BandwidthReport:
    """Count the bytes every directed link carries for one frame.

    Args:
        graph: communication topology; each undirected edge is two links.
        cfg: model configuration giving the node feature shape.
        payload_width: bytes per transmitted scalar.

    Returns:
        A :class:`BandwidthReport`.
    """
    if payload_width < 1:
        raise ValueError("payload_width must be positive")
    h, w = cfg.feature_hw
    per_msg = cfg.channels * h * w * payload_width
    raw = 3 * cfg.height * cfg.width * payload_width
    links = {e: per_msg for e in graph.directed_edges()}
    return BandwidthReport(
        link_bytes=links,
        levels=cfg.levels,
        message_bytes=per_msg,
        raw_bytes=raw,
        total_message_bytes=sum(links.values()) * cfg.levels,
        total_raw_bytes=raw * len(links),
    )
