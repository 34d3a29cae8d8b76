"""Print message and raw-image bandwidth for a few team sizes and feature widths."""

from mrcp.graph import complete_graph
from mrcp.harness import simulate_exchange
from mrcp.model import ModelConfig

for n in (3, 5, 8):
    for channels in (16, 32, 64):
        rep = simulate_exchange(complete_graph(n), ModelConfig(channels=channels, height=64, width=64), 4)
        print(f"agents={n} channels={channels}: {rep.total_message_bytes} B messages, "
              f"{rep.total_raw_bytes} B raw, ratio {rep.ratio:.3f}")
print(simulate_exchange(complete_graph(5), ModelConfig(), 4).to_text())
