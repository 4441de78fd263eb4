"""Multi-exit federated edge learning simulator."""
from .data import Dataset, Partition, load_idx, partition_noniid, save_idx, synth_blobs
from .errors import CapacityError, ConfigurationError, FormatError, SchedulingError, ShapeError
from .federation import LocalUpdate, aggregation_sets, fedavg, local_update, me_fedavg, sample_subset
from .nncore import (ArchConfig, LossBreakdown, MultiExitModel, OptimizerConfig, OptimizerState,
                     backward, build_model, forward_all_exits, joint_loss, kd_loss, loss_and_grad,
                     optimizer_step, prediction_loss, teacher_ensemble, tempered_softmax)
from .radio import (ChannelRealization, CostModel, DeviceProfile, rate, required_bandwidth,
                    sample_channels, t_local, t_up)
from .scheduler import (PlanEntry, RoundPlan, bruteforce_plan, evensplit_plan, greedy_plan,
                        leastdemand_plan)
from .config import SimConfig, load_config, parse_config
from .simulation import MetricsLog, emit_metrics, evaluate, run_simulation

__version__ = "0.1.0"
