"""Offline actor-critic set-point control for data-center cooling.

Subpackages by responsibility: `nn` (dense networks, backprop, Adadelta),
`objective` (cost head, fan law), `trace` (offline data pipeline),
`cca` (batch actor-critic training), `baselines` (fixed rule, DE two-stage
controller, grid oracle), `simulator` (surrogate two-zone plant), and `cli`
(the experiment workflow).
"""

from .objective import CostParams, cost, cost_gradient, fan_power
from .simulator import PlantModel, Scenario, make_scenario, plant_step, rollout
from .trace import (ActionBounds, NormalizationSpec, Trace, TraceRecord,
                    WindowedDataset, build_windows, fit_normalization,
                    generate_random_trace, load_csv, normalize_records,
                    save_csv, split)
from .cca import Actor, Critic, TrainConfig, TrainReport, act, train
from .baselines import (DEConfig, FixedController, fixed_policy, grid_oracle,
                        grid_search, minimize_de, ts_optimize)
from .nn import (AdadeltaState, Layer, Network, adadelta_step, backprop,
                 forward, init_adadelta, init_network, load_network,
                 save_network, stable_softplus)

__version__ = "0.1.0"
