"""Energy-constrained goal reachability in POMDPs.

Build the energy product of a partially observable model, compute the
actions that keep the objective almost-surely achievable, optimise cost with
RTDP-Bel over discretised beliefs, and compress the result into a decision
tree that can still only play safe actions.
"""

__version__ = "0.1.0"

from .model import INIT_OBSERVATION, Pomdp, RawPomdp, determinize_observations, validate
from .fileformat import emit_model, load_model, parse_model, read_training_set, write_training_set
from .product import ProductPomdp, as_product, build_product, energy_update, lift_run, project_run
from .belief import Belief, belief_key, belief_update, discretize, initial_belief
from .qualitative import AllowedTable, analyze, build_support_graph, compute_allowed, qualitative_answer, sigma_all
from .rtdp import ValueTable, greedy_policy, mdp_heuristic, solve
from .trees import (
    DecisionTree,
    TrainingSet,
    dt_policy,
    eval_tree,
    export_tree_dot,
    generate_training_data,
    grid_features_for,
    learn_tree,
    prune_tree,
    raw_features,
    tree_from_text,
    tree_to_text,
)
from .simulate import EvalReport, evaluate, report_csv, report_table
from .benchmarks import (
    HallwaySpec,
    RockSampleSpec,
    corridor,
    energy_tiger,
    gen_hallway,
    gen_rocksample,
    hallway_spec,
    standard_instances,
)

__all__ = [name for name in dir() if not name.startswith("_")]
