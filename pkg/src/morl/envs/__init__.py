from morl.envs.deep_sea_treasure import (
    DeepSeaTreasure,
    DeepSeaTreasureConfig,
    dst_momdp,
    dst_start_state,
    dst_step,
    dst_true_front,
)
from morl.envs.reservoir import OBJECTIVE_NAMES, WaterReservoir, WaterReservoirConfig, reservoir_step
from morl.envs.toy import CoinFlipEnv, ScriptedEnv

__all__ = [
    "CoinFlipEnv",
    "DeepSeaTreasure",
    "DeepSeaTreasureConfig",
    "OBJECTIVE_NAMES",
    "ScriptedEnv",
    "WaterReservoir",
    "WaterReservoirConfig",
    "dst_momdp",
    "dst_start_state",
    "dst_step",
    "dst_true_front",
    "reservoir_step",
]
