"""Knowledge-informed training of wide bias-free ReLU networks."""

from .advisor import AdvisorDecision, beta_lambda, choose_lambda
from .effective_labels import (EffectiveLabelTable, convergence_gap, effective_risk_table,
                               solve_effective_label)
from .imperfectness import (FitConfig, ImperfectnessReport, beta_sweep,
                            fit_knowledge_hypothesis, imperfectness_report,
                            knowledge_imperfectness)
from .nn_core import Network, backward, forward, init_network, predict, risk_gradient
from .risks import (ObjectiveWeights, RiskSpec, WeightedObjective, eq1_weights, eq3_weights,
                    generalized_informed_risk, informed_risk, knowledge_risk, label_risk,
                    weighted_form)
from .smooth_sets import (SmoothSetPartition, build_partition, build_phi_net,
                          separability_report)
from .trainer import TrainConfig, TrainHistory, TrainingDivergedError, train

__version__ = "0.1.0"
