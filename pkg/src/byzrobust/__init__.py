"""Byzantine-robust decentralized stochastic optimization toolkit."""

from .algorithms import (AlgoConfig, ConstantSchedule, PracticalSchedule,
                         TheoreticalSchedule, bridge_step, dpsgd_step,
                         penalty_subgradient, proposed_step, sign_vec)
from .attacks import (CopyRegular, NoAttack, SameValue, SignFlip, ZeroSum,
                      craft_message)
from .engine import (ExperimentConfig, MetricsLog, MetricsRecord,
                     consensus_variance, dist_sq_to, run)
from .graph import (Periodic, RandomActivation, Static, Topology,
                    assign_byzantine, gen_erdos_renyi, incidence_matrix,
                    min_nonzero_singular_value, regular_subgraph_connected)
from .objectives import (QuadraticObjective, SoftmaxObjective, global_optimum,
                         load_idx_images, load_idx_labels, partition_iid,
                         partition_per_digit_groups)
from .analysis import (TheoryBundle, default_eps, lambda_zero,
                       sign_certificate, solve_penalized_exact,
                       theory_constants, verify_neighborhood)

__version__ = "0.1.0"
