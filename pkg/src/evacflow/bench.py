"""Timing benchmark: oracle cost growth versus flat surrogate sampling.

Times the oracle and the surrogate over complexity tiers of increasing
occupant count, then contrasts both on the dense demo floor where the
oracle's cost dominates. Surrogate cost depends only on image size and
chain length, so its per-tier wall clock should be nearly constant.
"""

from __future__ import annotations

import json
import time as _time
from dataclasses import dataclass, field
from pathlib import Path

from .checkpoint import Checkpoint, condition_for_layout
from .demo import benchmark_tiers, dense_demo_layout
from .oracle import SimConfig, seed_occupants, simulate


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)  # per-tier dicts
    surrogate_flatness: float = 0.0  # max/min sampling time across tiers
    demo: dict = field(default_factory=dict)
    seed: int = 0
    model_id: str = ""

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "model_id": self.model_id,
            "rows": self.rows,
            "surrogate_flatness": self.surrogate_flatness,
            "demo": self.demo,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    def render_text(self) -> str:
        header = (
            f"{'tier':<6}{'shape':<14}{'occupants':>10}{'oracle_s':>10}"
            f"{'surrogate_s':>12}{'speedup':>9}"
        )
        lines = [header, "-" * len(header)]
        for row in self.rows:
            lines.append(
                f"{row['tier']:<6}{row['shape']:<14}{row['occupants']:>10}"
                f"{row['oracle_s']:>10.2f}{row['surrogate_s']:>12.2f}"
                f"{row['speedup']:>9.2f}"
            )
        lines.append(
            f"surrogate flatness (max/min): {self.surrogate_flatness:.2f}"
        )
        if self.demo:
            lines.append(
                f"demo layout: occupants={self.demo['occupants']} "
                f"oracle={self.demo['oracle_s']:.2f}s "
                f"surrogate={self.demo['surrogate_s']:.2f}s "
                f"speedup={self.demo['speedup']:.2f}x"
            )
        return "\n".join(lines)


def _time_surrogate(checkpoint: Checkpoint, layout, seed: int) -> float:
    condition = condition_for_layout(layout, checkpoint)
    checkpoint.build_model()  # exclude one-time construction from timing
    t0 = _time.perf_counter()
    checkpoint.predict(condition, seed=seed)
    return _time.perf_counter() - t0


def run_time_benchmark(
    checkpoint: Checkpoint,
    n_tiers: int = 5,
    seed: int = 0,
    demo_blocks: int = 12,
    sim_time_cap_s: float = 7200.0,
    model_id: str = "",
) -> BenchReport:
    report = BenchReport(seed=seed, model_id=model_id or checkpoint.run_id)
    tiers = benchmark_tiers(seed, n_tiers)
    surrogate_times = []
    for i, layout in enumerate(tiers):
        occupants = len(seed_occupants(layout, seed=seed))
        t0 = _time.perf_counter()
        simulate(layout, SimConfig(seed=seed, max_sim_time_s=sim_time_cap_s))
        oracle_s = _time.perf_counter() - t0
        surrogate_s = _time_surrogate(checkpoint, layout, seed)
        surrogate_times.append(surrogate_s)
        report.rows.append(
            {
                "tier": i,
                "shape": _shape_name(i),
                "occupants": occupants,
                "oracle_s": oracle_s,
                "surrogate_s": surrogate_s,
                "speedup": oracle_s / surrogate_s,
            }
        )
    report.surrogate_flatness = max(surrogate_times) / min(surrogate_times)

    if demo_blocks:
        demo = dense_demo_layout(demo_blocks)
        occupants = len(seed_occupants(demo, seed=seed))
        t0 = _time.perf_counter()
        simulate(demo, SimConfig(seed=seed, max_sim_time_s=sim_time_cap_s))
        oracle_s = _time.perf_counter() - t0
        surrogate_s = _time_surrogate(checkpoint, demo, seed)
        report.demo = {
            "occupants": occupants,
            "oracle_s": oracle_s,
            "surrogate_s": surrogate_s,
            "speedup": oracle_s / surrogate_s,
        }
    return report


def _shape_name(tier: int) -> str:
    from .demo import _TIER_SHAPES

    return _TIER_SHAPES[tier % len(_TIER_SHAPES)].value
