//! Multi-cable unweaving: perception, prediction, planning, simulation.
//!
//! The crate implements a closed-loop pipeline that separates a bundle of
//! loosely interwoven cables lying on a plane:
//!
//! * [`graph`] — the graph-based cable state: typed nodes (endpoints,
//!   regular points, over/under crossings) on directed paths, plus pure
//!   geometric queries and the state document format.
//! * [`perception`] — reconstructs a state from a color raster:
//!   HSV segmentation, sliding-window tracing, flood-fill node typing,
//!   overcrossing refinement.
//! * [`transition`] — deterministic prediction of the next state for a
//!   pick-and-place action defined by a grasp node and pivot angle.
//! * [`planner`] — valid action subspace enumeration, primitive
//!   selection (elimination vs redistribution), reward optimization and
//!   execution geometry (lift height).
//! * [`sim`] — seeded 2D cable-world generator, rasterizer and action
//!   executor with configurable reality-gap perturbations.
//! * [`harness`] — the closed loop (perceive, plan, execute, repeat),
//!   batch experiment runner and episode rendering.

pub mod geom;
pub mod graph;
pub mod harness;
pub mod palette;
pub mod perception;
pub mod planner;
pub mod sim;
pub mod transition;

pub use geom::{Rect, Vec2};
pub use graph::{
    assemble_state, count_crossings, deserialize_state, geometric_crossings, serialize_state,
    CableGraph, CableState, Crossing, EdgeLabel, GraphError, Node, NodeKind,
};
pub use perception::{build_state, CableMask, PerceptionConfig, PerceptionError};
pub use planner::{
    enumerate_subspaces, is_valid, lift_height, optimize_action, reward_elimination,
    reward_redistribution, select_primitive, ActionSubspace, LiftHeight, PlanError, PlannedAction,
    PlannerConfig, PrimitiveChoice, Workspace,
};
pub use sim::{generate_world, render, PhysicsConfig, ScenarioSpec, SimError, StiffnessPreset, World};
pub use transition::{
    crossings_eliminated, pivot_node, predict, Action, ActionGeometry, TransitionConfig,
    TransitionError,
};
