from typing import List, Optional, Sequence

from manetguard.scenario import ScenarioConfig


def static_config(
    positions: Sequence[Sequence[float]],
    flows: Sequence[Sequence[float]],
    duration: float = 60.0,
    range_m: float = 100.0,
    adversary_nodes: Optional[List[int]] = None,
    seed: int = 1,
    **overrides,
) -> ScenarioConfig:
    """Scenario on a fixed topology with explicit flows; the workhorse for
    deterministic protocol tests."""
    cfg = ScenarioConfig(seed=seed)
    cfg.world.node_count = len(positions)
    cfg.world.width_m = cfg.world.height_m = 2000.0
    cfg.world.duration_s = duration
    cfg.world.range_m = range_m
    cfg.mobility.model = "static"
    cfg.mobility.static_positions = [list(p) for p in positions]
    cfg.traffic.flows = [list(f) for f in flows]
    cfg.adversaries.count = len(adversary_nodes) if adversary_nodes else 0
    cfg.adversaries.nodes = adversary_nodes
    cfg.network.connectivity_epoch_s = 0.5
    for key, value in overrides.items():
        section, _, field = key.partition("__")
        if field:
            setattr(getattr(cfg, section), field, value)
        else:
            setattr(cfg, section, value)
    return cfg


def chain_positions(n: int, spacing: float = 80.0) -> List[List[float]]:
    return [[100.0 + i * spacing, 100.0] for i in range(n)]
