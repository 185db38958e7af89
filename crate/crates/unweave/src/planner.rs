//! Action planning: validity, subspace enumeration, primitive selection,
//! reward optimization, lift height.
//!
//! The planner grids the pivot angle for every graspable node, keeps the
//! maximal runs of consecutive valid samples whose predicted crossing
//! elimination count agrees (the action subspaces), picks the high-level
//! primitive — elimination when any subspace removes a crossing,
//! redistribution otherwise — and then maximizes the primitive's reward
//! over the in-domain subspaces, with a local numeric-gradient touch-up
//! around the best grid sample.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{angle_between, point_segment_distance, Rect, Vec2};
use crate::graph::{CableState, NodeKind};
use crate::transition::{
    action_geometry, assign_crossings, compact_new_path, predict_with_geometry, state_old_hits,
    Action, ActionGeometry, TransitionConfig, TransitionError,
};

/// Region of the table that is both visible and reachable, in world
/// meters. The fixed endpoints live on its bottom edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min_m: Vec2,
    pub max_m: Vec2,
}

impl Workspace {
    pub fn rect_px(&self, cfg: &TransitionConfig) -> Rect {
        Rect::new(
            Vec2::new(cfg.px(self.min_m.x), cfg.px(self.min_m.y)),
            Vec2::new(cfg.px(self.max_m.x), cfg.px(self.max_m.y)),
        )
    }

    /// Full-canvas workspace shrunk by a pixel margin.
    pub fn for_canvas(cfg: &TransitionConfig, margin_px: f64) -> Workspace {
        Workspace {
            min_m: Vec2::new(cfg.meters(margin_px), cfg.meters(margin_px)),
            max_m: Vec2::new(
                cfg.meters(cfg.canvas_px.0 as f64 - margin_px),
                cfg.meters(cfg.canvas_px.1 as f64 - margin_px),
            ),
        }
    }
}

/// A maximal pivot-angle interval over which one grasp node stays valid
/// and eliminates the same number of crossings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSubspace {
    pub cable_id: u32,
    pub grasp_node_id: u32,
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// Predicted crossings eliminated, constant over the interval.
    pub crossings_eliminated: i64,
}

/// High-level mode for the next action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrimitiveChoice {
    Elimination,
    Redistribution,
    Done,
}

/// Planner parameters; reward weights follow the tuned values
/// w_dist=1, w_curv=100, w_cred=100, w_std=3000, w_elim=30.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Gripper fingerpad clearance around the grasp node, meters.
    pub finger_clearance_m: f64,
    /// Pivot-angle grid resolution for validity sampling, radians.
    pub theta_grid: f64,
    pub w_dist: f64,
    pub w_curv: f64,
    pub w_cred: f64,
    pub w_std: f64,
    pub w_elim: f64,
    /// Local refinement: iteration budget and initial step.
    pub refine_iters: u32,
    pub refine_step: f64,
    /// Perception window width in pixels; feature clearance scales with
    /// it (sqrt(2) * d_w).
    pub window_px: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            finger_clearance_m: 0.02,
            theta_grid: 0.0349,
            w_dist: 1.0,
            w_curv: 100.0,
            w_cred: 100.0,
            w_std: 3000.0,
            w_elim: 30.0,
            refine_iters: 16,
            refine_step: 0.0349 / 2.0,
            window_px: 35.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("deadlock: no valid action subspaces")]
    Deadlock,
    #[error("no candidate actions for {0:?}")]
    NoCandidates(PrimitiveChoice),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

/// Why an action failed validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvalidReason {
    /// Grasp node closer than the fingerpad clearance to another cable.
    Clearance,
    /// A regular node of the moved cable would leave the workspace while
    /// its free endpoint stays inside.
    BrokenInMiddle,
    /// A node of the moved cable would sit within sqrt(2) d_w of another
    /// cable's endpoint or of a crossing not involving the moved cable.
    FeatureProximity,
    /// The action is structurally impossible (bad grasp node, degenerate
    /// geometry).
    Structural(String),
}

impl std::fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InvalidReason::Clearance => write!(f, "clearance"),
            InvalidReason::BrokenInMiddle => write!(f, "broken in the middle"),
            InvalidReason::FeatureProximity => write!(f, "feature proximity"),
            InvalidReason::Structural(s) => write!(f, "structural: {s}"),
        }
    }
}

/// Per-cable precomputation reused across the theta grid.
struct CableContext {
    graph_index: usize,
    cable_id: u32,
    pivot_index: usize,
    /// Positions of the unmoved nodes past the pivot.
    suffix: Vec<Vec2>,
    /// Other cables' endpoints and crossing nodes not involving this
    /// cable, at sqrt(2) d_w clearance.
    features: Vec<Vec2>,
    /// Whether any unmoved regular node already sits outside the
    /// workspace / too close to a feature (poisons every action).
    unmoved_outside: bool,
    unmoved_near_feature: bool,
}

fn cable_context(
    state: &CableState,
    graph_index: usize,
    ws: &Workspace,
    tcfg: &TransitionConfig,
    pcfg: &PlannerConfig,
) -> Option<CableContext> {
    let graph = &state.graphs[graph_index];
    let pivot_index = crate::transition::pivot_node(graph).ok()?;
    let nodes = graph.nodes();
    let suffix: Vec<Vec2> = nodes[pivot_index + 1..].iter().map(|n| n.pos_px).collect();
    let mut features = Vec::new();
    for other in &state.graphs {
        if other.cable_id == graph.cable_id {
            continue;
        }
        for n in other.nodes() {
            let keep = match n.kind {
                NodeKind::Endpoint => true,
                NodeKind::OverCrossing | NodeKind::UnderCrossing => {
                    // Crossings paired with the moved cable coincide with
                    // its own nodes; only foreign crossings repel.
                    let cid = n.crossing_id.expect("crossing node carries id");
                    let reg = &state.crossings[&cid];
                    reg.over_cable != graph.cable_id && reg.under_cable != graph.cable_id
                }
                NodeKind::Regular => false,
            };
            if keep {
                features.push(n.pos_px);
            }
        }
    }
    let rect = ws.rect_px(tcfg);
    let clear_px = (2.0f64).sqrt() * pcfg.window_px;
    let unmoved_outside = nodes[pivot_index..]
        .iter()
        .any(|n| n.kind == NodeKind::Regular && !rect.contains(n.pos_px));
    let unmoved_near_feature = nodes[pivot_index..].iter().any(|n| {
        features
            .iter()
            .any(|f| f.dist(n.pos_px) < clear_px)
    });
    Some(CableContext {
        graph_index,
        cable_id: graph.cable_id,
        pivot_index,
        suffix,
        features,
        unmoved_outside,
        unmoved_near_feature,
    })
}

/// One evaluated candidate: validity verdict and predicted elimination.
struct CandidateEval {
    verdict: Result<(), InvalidReason>,
    eliminated: i64,
}

fn eval_candidate(
    state: &CableState,
    ctx: &CableContext,
    geom: &ActionGeometry,
    grasp_clear: bool,
    ws: &Workspace,
    tcfg: &TransitionConfig,
    pcfg: &PlannerConfig,
) -> CandidateEval {
    // Criterion 1: fingerpad clearance at the grasp node (precomputed).
    if !grasp_clear {
        return CandidateEval {
            verdict: Err(InvalidReason::Clearance),
            eliminated: 0,
        };
    }
    let rect = ws.rect_px(tcfg);
    let clear_px = (2.0f64).sqrt() * pcfg.window_px;
    let free_inside = rect.contains(geom.tail_end);

    // Criterion 2: no regular node outside the workspace unless the free
    // endpoint is outside too. Moved nodes lie on two straight segments,
    // so containment of the segment endpoints covers all of them.
    if free_inside {
        let moved_inside = rect.contains(geom.place) && rect.contains(geom.pivot);
        if !moved_inside || ctx.unmoved_outside {
            return CandidateEval {
                verdict: Err(InvalidReason::BrokenInMiddle),
                eliminated: 0,
            };
        }
    }

    // Criterion 3: stay sqrt(2) d_w away from other cables' endpoints
    // and foreign crossings.
    if ctx.unmoved_near_feature {
        return CandidateEval {
            verdict: Err(InvalidReason::FeatureProximity),
            eliminated: 0,
        };
    }
    for f in &ctx.features {
        let d_tail = point_segment_distance(*f, geom.tail_end, geom.place);
        let d_grasp = point_segment_distance(*f, geom.place, geom.pivot);
        if d_tail < clear_px || d_grasp < clear_px {
            return CandidateEval {
                verdict: Err(InvalidReason::FeatureProximity),
                eliminated: 0,
            };
        }
    }

    // Crossing recomputation on the compact moved path.
    let mut polylines: Vec<Vec<Vec2>> = state.graphs.iter().map(|g| g.polyline()).collect();
    polylines[ctx.graph_index] = compact_new_path(geom, &ctx.suffix);
    let old = state_old_hits(state);
    match assign_crossings(&polylines, &old, ctx.graph_index, 2, tcfg.crossing_merge_px) {
        Ok(hits) => CandidateEval {
            verdict: Ok(()),
            eliminated: state.count_crossings() as i64 - hits.len() as i64,
        },
        Err(e) => CandidateEval {
            verdict: Err(InvalidReason::Structural(e.to_string())),
            eliminated: 0,
        },
    }
}

fn grasp_clearance_ok(
    state: &CableState,
    cable_id: u32,
    grasp: Vec2,
    tcfg: &TransitionConfig,
    pcfg: &PlannerConfig,
) -> bool {
    let min_px = tcfg.px(pcfg.finger_clearance_m);
    state
        .graphs
        .iter()
        .filter(|g| g.cable_id != cable_id)
        .flat_map(|g| g.nodes())
        .all(|n| n.pos_px.dist(grasp) >= min_px)
}

/// Validity verdict for a single action, evaluated on its predicted
/// outcome. `Ok(())` means the action may be executed.
pub fn is_valid(
    state: &CableState,
    action: &Action,
    ws: &Workspace,
    tcfg: &TransitionConfig,
    pcfg: &PlannerConfig,
) -> Result<(), InvalidReason> {
    let geom = match action_geometry(state, action, tcfg) {
        Ok(g) => g,
        Err(e) => return Err(InvalidReason::Structural(e.to_string())),
    };
    let gi = state
        .graphs
        .iter()
        .position(|g| g.cable_id == action.cable_id)
        .expect("geometry resolved, cable exists");
    let ctx = match cable_context(state, gi, ws, tcfg, pcfg) {
        Some(c) => c,
        None => return Err(InvalidReason::Structural("cable too short to pivot".into())),
    };
    let clear = grasp_clearance_ok(state, action.cable_id, geom.grasp, tcfg, pcfg);
    eval_candidate(state, &ctx, &geom, clear, ws, tcfg, pcfg).verdict
}

/// Theta grid over the configured pivot bounds.
pub fn theta_grid(tcfg: &TransitionConfig, pcfg: &PlannerConfig) -> Vec<f64> {
    let mut out = Vec::new();
    let mut theta = tcfg.theta_min;
    while theta <= tcfg.theta_max + 1e-12 {
        out.push(theta.min(tcfg.theta_max));
        theta += pcfg.theta_grid;
    }
    out
}

/// Enumerate every valid action subspace of the state.
pub fn enumerate_subspaces(
    state: &CableState,
    ws: &Workspace,
    tcfg: &TransitionConfig,
    pcfg: &PlannerConfig,
) -> Vec<ActionSubspace> {
    let grid = theta_grid(tcfg, pcfg);
    let mut out = Vec::new();
    for gi in 0..state.graphs.len() {
        let ctx = match cable_context(state, gi, ws, tcfg, pcfg) {
            Some(c) => c,
            None => continue,
        };
        let graph = &state.graphs[gi];
        let nodes = graph.nodes();
        for (ni, node) in nodes.iter().enumerate() {
            if ni == 0 || ni >= ctx.pivot_index || node.kind != NodeKind::Regular {
                continue;
            }
            let clear = grasp_clearance_ok(state, ctx.cable_id, node.pos_px, tcfg, pcfg);
            let mut run: Option<(f64, f64, i64)> = None;
            for &theta in &grid {
                let action = Action {
                    cable_id: ctx.cable_id,
                    grasp_node_id: node.node_id,
                    pivot_angle: theta,
                };
                let eval = match action_geometry(state, &action, tcfg) {
                    Ok(geom) => eval_candidate(state, &ctx, &geom, clear, ws, tcfg, pcfg),
                    Err(_) => CandidateEval {
                        verdict: Err(InvalidReason::Structural("geometry".into())),
                        eliminated: 0,
                    },
                };
                match (eval.verdict.is_ok(), &mut run) {
                    (true, Some((_, hi, m))) if *m == eval.eliminated => *hi = theta,
                    (true, _) => {
                        if let Some((lo, hi, m)) = run.take() {
                            out.push(ActionSubspace {
                                cable_id: ctx.cable_id,
                                grasp_node_id: node.node_id,
                                theta_lo: lo,
                                theta_hi: hi,
                                crossings_eliminated: m,
                            });
                        }
                        run = Some((theta, theta, eval.eliminated));
                    }
                    (false, _) => {
                        if let Some((lo, hi, m)) = run.take() {
                            out.push(ActionSubspace {
                                cable_id: ctx.cable_id,
                                grasp_node_id: node.node_id,
                                theta_lo: lo,
                                theta_hi: hi,
                                crossings_eliminated: m,
                            });
                        }
                    }
                }
            }
            if let Some((lo, hi, m)) = run {
                out.push(ActionSubspace {
                    cable_id: ctx.cable_id,
                    grasp_node_id: node.node_id,
                    theta_lo: lo,
                    theta_hi: hi,
                    crossings_eliminated: m,
                });
            }
        }
    }
    out
}

/// Choose the primitive: done when unwoven, elimination when some
/// subspace removes crossings, redistribution otherwise.
pub fn select_primitive(
    subspaces: &[ActionSubspace],
    state: &CableState,
) -> Result<PrimitiveChoice, PlanError> {
    if state.count_crossings() == 0 {
        return Ok(PrimitiveChoice::Done);
    }
    if subspaces.iter().any(|s| s.crossings_eliminated > 0) {
        return Ok(PrimitiveChoice::Elimination);
    }
    if subspaces.is_empty() {
        return Err(PlanError::Deadlock);
    }
    Ok(PrimitiveChoice::Redistribution)
}

/// The four elimination reward terms, in order: graph distance,
/// curvature, grasp-to-tail credit, eliminated crossings.
pub fn elimination_reward_terms(
    moved_nodes_m: &[Vec2],
    other_graphs_m: &[Vec<Vec2>],
    pivot_angle_term: f64,
    grasp_len_m: f64,
    tail_len_m: f64,
    eliminated: i64,
    tail_eps_m: f64,
    pcfg: &PlannerConfig,
) -> [f64; 4] {
    let mut dist = 0.0;
    for other in other_graphs_m {
        if other.is_empty() || moved_nodes_m.is_empty() {
            continue;
        }
        let mut sum = 0.0;
        for a in moved_nodes_m {
            for b in other {
                sum += a.dist_sq(*b);
            }
        }
        dist += sum / (moved_nodes_m.len() as f64 * other.len() as f64);
    }
    let cred = if tail_len_m > 0.0 {
        grasp_len_m / tail_len_m
    } else {
        grasp_len_m / tail_eps_m
    };
    [
        pcfg.w_dist * dist,
        pcfg.w_curv * pivot_angle_term,
        pcfg.w_cred * cred,
        pcfg.w_elim * eliminated as f64,
    ]
}

/// Redistribution reward terms: negated spread of normalized image-frame
/// y coordinates, curvature, grasp-to-tail credit.
pub fn redistribution_reward_terms(
    moved_norm_y: &[f64],
    pivot_angle_term: f64,
    grasp_len_m: f64,
    tail_len_m: f64,
    tail_eps_m: f64,
    pcfg: &PlannerConfig,
) -> [f64; 3] {
    let n = moved_norm_y.len().max(1) as f64;
    let mean = moved_norm_y.iter().sum::<f64>() / n;
    let var = moved_norm_y.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    let cred = if tail_len_m > 0.0 {
        grasp_len_m / tail_len_m
    } else {
        grasp_len_m / tail_eps_m
    };
    [
        -pcfg.w_std * var.sqrt(),
        pcfg.w_curv * pivot_angle_term,
        pcfg.w_cred * cred,
    ]
}

fn pivot_angle_term(state: &CableState, geom: &ActionGeometry) -> f64 {
    // Angle between c -> Succ(c) (first unmoved node) and c -> p; pi
    // means the placed segment leaves the pivot straight.
    let graph = state.graph(geom.cable_id).expect("cable exists");
    let succ = graph.nodes()[geom.pivot_index + 1].pos_px;
    angle_between(succ - geom.pivot, geom.place - geom.pivot)
}

fn graph_nodes_m(state: &CableState, cable_id: u32, tcfg: &TransitionConfig) -> Vec<Vec2> {
    state
        .graph(cable_id)
        .map(|g| {
            g.nodes()
                .iter()
                .map(|n| Vec2::new(tcfg.meters(n.pos_px.x), tcfg.meters(n.pos_px.y)))
                .collect()
        })
        .unwrap_or_default()
}

/// Elimination reward of an executed-and-predicted action pair.
pub fn reward_elimination(
    state: &CableState,
    next: &CableState,
    geom: &ActionGeometry,
    tcfg: &TransitionConfig,
    pcfg: &PlannerConfig,
) -> f64 {
    let moved = graph_nodes_m(next, geom.cable_id, tcfg);
    let others: Vec<Vec<Vec2>> = next
        .graphs
        .iter()
        .filter(|g| g.cable_id != geom.cable_id)
        .map(|g| graph_nodes_m(next, g.cable_id, tcfg))
        .collect();
    let eliminated = state.count_crossings() as i64 - next.count_crossings() as i64;
    let terms = elimination_reward_terms(
        &moved,
        &others,
        pivot_angle_term(state, geom),
        geom.grasp_len_m,
        geom.tail_len_m,
        eliminated,
        tcfg.resample_step_m,
        pcfg,
    );
    terms[0] + terms[1] + terms[2] + terms[3]
}

/// Redistribution reward of an executed-and-predicted action pair.
pub fn reward_redistribution(
    state: &CableState,
    next: &CableState,
    geom: &ActionGeometry,
    tcfg: &TransitionConfig,
    pcfg: &PlannerConfig,
) -> f64 {
    let canvas_h = tcfg.canvas_px.1 as f64;
    let norm_y: Vec<f64> = next
        .graph(geom.cable_id)
        .map(|g| g.nodes().iter().map(|n| n.pos_px.y / canvas_h).collect())
        .unwrap_or_default();
    let terms = redistribution_reward_terms(
        &norm_y,
        pivot_angle_term(state, geom),
        geom.grasp_len_m,
        geom.tail_len_m,
        tcfg.resample_step_m,
        pcfg,
    );
    terms[0] + terms[1] + terms[2]
}

/// A planned action with its predicted outcome.
#[derive(Clone, Debug)]
pub struct PlannedAction {
    pub action: Action,
    pub geometry: ActionGeometry,
    pub predicted: CableState,
    pub eliminated: i64,
    pub reward: f64,
    pub lift: LiftHeight,
}

/// Candidate bookkeeping during optimization.
#[derive(Clone, Copy)]
struct Candidate {
    subspace_index: usize,
    theta: f64,
    reward: f64,
    dist_to_mid: f64,
}

/// Reward of an action under a primitive, evaluated through a full
/// prediction; `None` when prediction fails.
fn primitive_reward(
    state: &CableState,
    action: &Action,
    primitive: PrimitiveChoice,
    tcfg: &TransitionConfig,
    pcfg: &PlannerConfig,
) -> Option<(f64, i64, ActionGeometry)> {
    let geom = action_geometry(state, action, tcfg).ok()?;
    let next = predict_with_geometry(state, &geom, tcfg).ok()?;
    let m = state.count_crossings() as i64 - next.count_crossings() as i64;
    let r = match primitive {
        PrimitiveChoice::Elimination => reward_elimination(state, &next, &geom, tcfg, pcfg),
        PrimitiveChoice::Redistribution => reward_redistribution(state, &next, &geom, tcfg, pcfg),
        PrimitiveChoice::Done => return None,
    };
    Some((r, m, geom))
}

/// Optimize the action parameters for the chosen primitive.
///
/// Every grid sample of every in-domain subspace is evaluated, then the
/// best sample's angle is refined by hill climbing on a central
/// difference gradient estimate, clamped to its subspace interval.
/// Ties break toward the subspace midpoint, then smaller |theta|,
/// smaller grasp index, smaller cable id.
pub fn optimize_action(
    subspaces: &[ActionSubspace],
    primitive: PrimitiveChoice,
    state: &CableState,
    ws: &Workspace,
    tcfg: &TransitionConfig,
    pcfg: &PlannerConfig,
) -> Result<PlannedAction, PlanError> {
    optimize_action_with(subspaces, primitive, state, ws, tcfg, pcfg, |s, a, p| {
        primitive_reward(s, a, p, tcfg, pcfg).map(|(r, m, _)| (r, m))
    })
}

/// Optimization core with an injectable reward, used by tests to probe
/// the search behavior with synthetic landscapes.
pub fn optimize_action_with<F>(
    subspaces: &[ActionSubspace],
    primitive: PrimitiveChoice,
    state: &CableState,
    ws: &Workspace,
    tcfg: &TransitionConfig,
    pcfg: &PlannerConfig,
    reward_fn: F,
) -> Result<PlannedAction, PlanError>
where
    F: Fn(&CableState, &Action, PrimitiveChoice) -> Option<(f64, i64)>,
{
    let domain: Vec<(usize, &ActionSubspace)> = subspaces
        .iter()
        .enumerate()
        .filter(|(_, s)| match primitive {
            PrimitiveChoice::Elimination => s.crossings_eliminated > 0,
            PrimitiveChoice::Redistribution => s.crossings_eliminated == 0,
            PrimitiveChoice::Done => false,
        })
        .collect();
    if domain.is_empty() {
        return Err(PlanError::NoCandidates(primitive));
    }

    let mut best: Option<Candidate> = None;
    for (si, sub) in &domain {
        let mid = 0.5 * (sub.theta_lo + sub.theta_hi);
        let mut theta = sub.theta_lo;
        let mut sub_best: Option<Candidate> = None;
        loop {
            let action = Action {
                cable_id: sub.cable_id,
                grasp_node_id: sub.grasp_node_id,
                pivot_angle: theta,
            };
            if let Some((reward, _)) = reward_fn(state, &action, primitive) {
                let cand = Candidate {
                    subspace_index: *si,
                    theta,
                    reward,
                    dist_to_mid: (theta - mid).abs(),
                };
                let better = match &sub_best {
                    None => true,
                    Some(b) => {
                        cand.reward > b.reward
                            || (cand.reward == b.reward && cand.dist_to_mid < b.dist_to_mid - 1e-12)
                    }
                };
                if better {
                    sub_best = Some(cand);
                }
            }
            if theta >= sub.theta_hi - 1e-12 {
                break;
            }
            theta = (theta + pcfg.theta_grid).min(sub.theta_hi);
        }
        if let Some(cand) = sub_best {
            let better = match &best {
                None => true,
                Some(b) => {
                    cand.reward > b.reward
                        || (cand.reward == b.reward && {
                            let (ca, cb) = (cand.theta.abs(), b.theta.abs());
                            ca < cb - 1e-12
                                || ((ca - cb).abs() <= 1e-12 && {
                                    let sa = &subspaces[cand.subspace_index];
                                    let sb = &subspaces[b.subspace_index];
                                    (sa.grasp_node_id, sa.cable_id)
                                        < (sb.grasp_node_id, sb.cable_id)
                                })
                        })
                }
            };
            if better {
                best = Some(cand);
            }
        }
    }
    let mut best = best.ok_or(PlanError::NoCandidates(primitive))?;

    // Local refinement inside the winning interval: hill climb along the
    // central-difference gradient direction with a shrinking step,
    // accepting only valid moves that keep the subspace's elimination
    // count.
    let sub = subspaces[best.subspace_index];
    let clamp = |t: f64| t.clamp(sub.theta_lo, sub.theta_hi);
    let eval = |theta: f64| -> Option<(f64, i64)> {
        let action = Action {
            cable_id: sub.cable_id,
            grasp_node_id: sub.grasp_node_id,
            pivot_angle: theta,
        };
        let (r, m) = reward_fn(state, &action, primitive)?;
        if m != sub.crossings_eliminated {
            return None;
        }
        is_valid(state, &action, ws, tcfg, pcfg).ok()?;
        Some((r, m))
    };
    let mut step = pcfg.refine_step;
    for _ in 0..pcfg.refine_iters {
        if step < 1e-6 {
            break;
        }
        let h = (step / 2.0).max(1e-7);
        let up = eval(clamp(best.theta + h)).map(|(r, _)| r);
        let down = eval(clamp(best.theta - h)).map(|(r, _)| r);
        let dir = match (up, down) {
            (Some(u), Some(d)) => {
                if u > d {
                    1.0
                } else {
                    -1.0
                }
            }
            (Some(_), None) => 1.0,
            (None, Some(_)) => -1.0,
            (None, None) => break,
        };
        let cand_theta = clamp(best.theta + dir * step);
        match eval(cand_theta) {
            Some((r, _)) if r > best.reward => {
                best.theta = cand_theta;
                best.reward = r;
            }
            _ => step /= 2.0,
        }
    }

    let action = Action {
        cable_id: sub.cable_id,
        grasp_node_id: sub.grasp_node_id,
        pivot_angle: best.theta,
    };
    let geom = action_geometry(state, &action, tcfg)?;
    let predicted = predict_with_geometry(state, &geom, tcfg)?;
    let eliminated = state.count_crossings() as i64 - predicted.count_crossings() as i64;
    let lift = lift_height(geom.pivot, geom.grasp, geom.place, tcfg.scale_m_per_px);
    Ok(PlannedAction {
        action,
        geometry: geom,
        predicted,
        eliminated,
        reward: best.reward,
        lift,
    })
}

/// Lift height for moving the grasped segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftHeight {
    pub meters: f64,
    /// The cable is taut (place distance exceeds the straight-line grasp
    /// distance); no lift is possible.
    pub taut: bool,
}

/// Pythagorean lift height from pixel positions of the pivot, grasp and
/// place points under the orthographic scale.
pub fn lift_height(pivot: Vec2, grasp: Vec2, place: Vec2, scale_m_per_px: f64) -> LiftHeight {
    let straight_sq = pivot.dist_sq(grasp);
    let placed_sq = pivot.dist_sq(place);
    if placed_sq > straight_sq {
        return LiftHeight {
            meters: 0.0,
            taut: true,
        };
    }
    LiftHeight {
        meters: (straight_sq - placed_sq).sqrt() * scale_m_per_px,
        taut: false,
    }
}
