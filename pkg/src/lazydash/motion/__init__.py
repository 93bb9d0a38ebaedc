from .roadmap import (INVALID, UNKNOWN, VALID, Counters, EdgeContext, PathResult, Roadmap, eager_path,
                      lazy_path, shortest_path)
from .query import (APPROACH, CARRY, RETREAT, MotionConstraint, MotionParams, MotionStore, MoveArc,
                    OptimisticSchedule, TaskConstraintFeedback, TransitionArc, body_checker, element_key,
                    plan_move, query_motion_plan, sample_disc)
from .eager import BaselineResult, EagerModel, build_eager_motion_hypergraph, combined_query_baseline

# short aliases for the two roadmap statuses most callers look at
Unknown, Valid, Invalid = UNKNOWN, VALID, INVALID
