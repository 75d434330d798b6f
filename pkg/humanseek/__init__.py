from humanseek.backends import CsvBackend
from humanseek.backends import JsonBackend
from humanseek.backends import JsonLinesBackend
from humanseek.backends import NumpyBackend
from humanseek.backends import SvgBackend
from humanseek.backends import VolatileBackend
from humanseek.backends import YamlBackend
from humanseek.compgraph import ComputationGraph
from humanseek.compgraph import NodeWrapper
from humanseek.config import RunConfig
from humanseek.config import resolve_config
from humanseek.core import AnnotatedMap
from humanseek.core import ApproachState
from humanseek.core import Pose2D
from humanseek.core import StateGrid
from humanseek.core import Trajectory
from humanseek.core import Waypoint
from humanseek.core import discretize
from humanseek.core import from_human_frame
from humanseek.core import load_map
from humanseek.core import to_human_frame
from humanseek.distill import DistillParams
from humanseek.distill import distill_reward
from humanseek.distill import estimate_kd_reward
from humanseek.distill import extract_keywords
from humanseek.distill import smooth_reward
from humanseek.distill import word_to_segments
from humanseek.exceptions import *
from humanseek.gridmap import GridGraph
from humanseek.gridmap import bresenham
from humanseek.gridmap import line_of_sight
from humanseek.kdmrl import Demonstration
from humanseek.kdmrl import KdmrlParams
from humanseek.kdmrl import estimate_density
from humanseek.kdmrl import fit_kdmrl
from humanseek.kdmrl import leverage
from humanseek.kdmrl import load_demonstrations
from humanseek.kdmrl import solve_alpha
from humanseek.locker import FileLockExistsException
from humanseek.perception import SensorModel
from humanseek.perception import bbox_from_activation
from humanseek.perception import gaze_flag
from humanseek.perception import observe
from humanseek.planner import PlannerParams
from humanseek.planner import assign_velocities
from humanseek.planner import blend
from humanseek.planner import edge_cost
from humanseek.planner import plan
from humanseek.prior import EmbeddingTable
from humanseek.prior import compute_label_priors
from humanseek.prior import label_cost
from humanseek.prior import load_embeddings
from humanseek.prior import occurrence_score
from humanseek.reward import RewardField
from humanseek.search import Method
from humanseek.search import SearchAgent
from humanseek.search import SearchConfig
from humanseek.search import frontier_waypoints
from humanseek.search import select_next_label
from humanseek.search import should_visit
from humanseek.sim import World
from humanseek.sim import compute_metrics
from humanseek.sim import load_world
from humanseek.sim import run_approach_episode
from humanseek.sim import run_search_episode
from humanseek.sim import run_search_suite
from humanseek.theory import run_theorem_trials
from humanseek.theory import value_gap
from humanseek.version import __version__
