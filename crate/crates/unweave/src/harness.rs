//! Closed-loop driver and batch experiment runner: render, perceive,
//! plan, execute, repeat until no crossing is detected.

use image::RgbImage;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::graph::{serialize_state, CableState, NodeKind};
use crate::perception::{build_state, PerceptionConfig};
use crate::planner::{
    enumerate_subspaces, optimize_action, select_primitive, ActionSubspace, PlanError,
    PlannedAction, PlannerConfig, PrimitiveChoice, Workspace,
};
use crate::sim::{
    deserialize_world, execute, generate_world, render, serialize_world, PhysicsConfig,
    ScenarioSpec, SimError, World,
};
use crate::transition::TransitionConfig;

/// Outcome of one planning call: the enumerated subspaces, the selected
/// primitive, and the optimized action when one exists.
pub struct PlanOutcome {
    pub subspaces: Vec<ActionSubspace>,
    pub primitive: PrimitiveChoice,
    pub planned: Option<PlannedAction>,
}

/// Enumerate, select the primitive and optimize in one call.
pub fn plan_once(
    state: &CableState,
    ws: &Workspace,
    tcfg: &TransitionConfig,
    pcfg: &PlannerConfig,
    allow_redistribution: bool,
) -> Result<PlanOutcome, PlanError> {
    let subspaces = enumerate_subspaces(state, ws, tcfg, pcfg);
    let primitive = select_primitive(&subspaces, state)?;
    let planned = match primitive {
        PrimitiveChoice::Done => None,
        PrimitiveChoice::Elimination => {
            Some(optimize_action(&subspaces, primitive, state, ws, tcfg, pcfg)?)
        }
        PrimitiveChoice::Redistribution => {
            if !allow_redistribution {
                return Err(PlanError::Deadlock);
            }
            match optimize_action(&subspaces, primitive, state, ws, tcfg, pcfg) {
                Ok(p) => Some(p),
                Err(PlanError::NoCandidates(_)) => return Err(PlanError::Deadlock),
                Err(e) => return Err(e),
            }
        }
    };
    Ok(PlanOutcome {
        subspaces,
        primitive,
        planned,
    })
}

/// Why an episode ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeStatus {
    Success,
    Deadlock,
    PerceptionFailure,
    IterationBudgetExceeded,
}

/// How one perception pass compared against the simulator truth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerceptionOutcome {
    /// Crossing structure matches the world registry.
    Exact,
    /// Valid state, actions available, but structure or positions are
    /// off against the truth.
    MinorMisclassification,
    Failed(String),
    /// States taken straight from the world, bypassing vision.
    Oracle,
}

/// The executed action in plain fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub cable_id: u32,
    pub grasp_node_id: u32,
    pub pivot_angle: f64,
    pub place_px: Vec2,
    pub lift_m: f64,
    pub taut: bool,
    pub reward: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub world_doc: String,
    pub state_doc: Option<String>,
    pub perception: PerceptionOutcome,
    pub primitive: Option<PrimitiveChoice>,
    pub action: Option<ActionRecord>,
    pub predicted_eliminated: i64,
    pub realized_eliminated: i64,
    pub planning_secs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub status: EpisodeStatus,
    pub iterations: Vec<IterationRecord>,
    pub total_actions: u32,
    pub initial_crossings: usize,
    pub final_crossings: usize,
    pub budget: u32,
    pub perceives: u32,
    pub perception_failures: u32,
    pub minor_misclassifications: u32,
}

impl EpisodeLog {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("episode log serializes")
    }

    pub fn total_planning_secs(&self) -> f64 {
        self.iterations.iter().map(|i| i.planning_secs).sum()
    }
}

/// Episode knobs beyond the physical configuration.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Iteration budget; default 3 x initial crossings + 5.
    pub budget: Option<u32>,
    /// Ablation: deadlock instead of redistributing.
    pub no_redistribution: bool,
    /// Plan on exact world-derived states instead of rendered images.
    pub oracle_perception: bool,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    #[cfg(target_arch = "wasm32")]
    {
        (f(), 0.0)
    }
    #[cfg(not(target_arch = "wasm32"))]
    {
        let t = std::time::Instant::now();
        let r = f();
        (r, t.elapsed().as_secs_f64())
    }
}

/// Perception config matching a world: palette for its cables and the
/// true fixed endpoints.
pub fn perception_config_for(world: &World) -> PerceptionConfig {
    let mut cfg = PerceptionConfig::default_for_cables(world.cables.len());
    cfg.window_px = world.window_px;
    cfg.step_px = world.window_px / 2.0;
    cfg.fixed_endpoints = world
        .cables
        .iter()
        .map(|c| *c.polyline_px.last().unwrap())
        .collect();
    cfg
}

/// Does the perceived crossing structure match the world truth: same
/// count, and a position-wise bijection preserving the over/under pair.
pub fn state_matches_truth(state: &CableState, world: &World, tol_px: f64) -> bool {
    if state.count_crossings() != world.crossings.len() {
        return false;
    }
    let mut used = vec![false; world.crossings.len()];
    for reg in state.crossings.values() {
        let mut found = false;
        for (i, truth) in world.crossings.iter().enumerate() {
            if used[i] || truth.pos_px.dist(reg.pos_px) > tol_px {
                continue;
            }
            let pair_match = truth.over == reg.over_cable
                && (truth.a == reg.under_cable || truth.b == reg.under_cable);
            if pair_match {
                used[i] = true;
                found = true;
                break;
            }
        }
        if !found {
            return false;
        }
    }
    true
}

/// Run one closed-loop episode on a generated scenario.
pub fn run_episode(
    spec: &ScenarioSpec,
    physics: &PhysicsConfig,
    pcfg: &PlannerConfig,
    opts: &RunOptions,
) -> Result<EpisodeLog, SimError> {
    let world = generate_world(spec)?;
    Ok(run_episode_on_world(world, spec.seed, physics, pcfg, opts))
}

/// Run one closed-loop episode starting from an explicit world.
pub fn run_episode_on_world(
    mut world: World,
    seed: u64,
    physics: &PhysicsConfig,
    pcfg: &PlannerConfig,
    opts: &RunOptions,
) -> EpisodeLog {
    let tcfg = world.transition_config();
    let percfg = perception_config_for(&world);
    let ws = world.workspace;
    let initial_crossings = world.crossing_count();
    let budget = opts.budget.unwrap_or(3 * initial_crossings as u32 + 5);
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xD00D_F00D_u64);

    let mut log = EpisodeLog {
        status: EpisodeStatus::IterationBudgetExceeded,
        iterations: Vec::new(),
        total_actions: 0,
        initial_crossings,
        final_crossings: initial_crossings,
        budget,
        perceives: 0,
        perception_failures: 0,
        minor_misclassifications: 0,
    };

    for iteration in 0..=budget {
        let truth_count = world.crossing_count();
        let world_doc = serialize_world(&world);

        log.perceives += 1;
        let (state, perception) = if opts.oracle_perception {
            match world.to_state() {
                Ok(s) => (Some(s), PerceptionOutcome::Oracle),
                Err(e) => (None, PerceptionOutcome::Failed(e.to_string())),
            }
        } else {
            let (img, _) = render(&world);
            match build_state(&img, &percfg) {
                Ok(s) => {
                    let outcome = if state_matches_truth(&s, &world, percfg.window_px / 2.0) {
                        PerceptionOutcome::Exact
                    } else {
                        PerceptionOutcome::MinorMisclassification
                    };
                    (Some(s), outcome)
                }
                Err(e) => (None, PerceptionOutcome::Failed(e.to_string())),
            }
        };
        let state = match state {
            Some(s) => s,
            None => {
                log.perception_failures += 1;
                log.iterations.push(IterationRecord {
                    iteration,
                    world_doc,
                    state_doc: None,
                    perception,
                    primitive: None,
                    action: None,
                    predicted_eliminated: 0,
                    realized_eliminated: 0,
                    planning_secs: 0.0,
                });
                log.status = EpisodeStatus::PerceptionFailure;
                log.final_crossings = truth_count;
                return log;
            }
        };
        let state_doc = serialize_state(&state);

        let (outcome, planning_secs) =
            timed(|| plan_once(&state, &ws, &tcfg, pcfg, !opts.no_redistribution));
        let outcome = match outcome {
            Ok(o) => o,
            Err(PlanError::Deadlock) | Err(PlanError::NoCandidates(_)) => {
                let misperceived = matches!(perception, PerceptionOutcome::MinorMisclassification);
                if misperceived {
                    // A wrong state that blocks planning is a perception
                    // failure, not a planner deadlock.
                    log.perception_failures += 1;
                }
                log.iterations.push(IterationRecord {
                    iteration,
                    world_doc,
                    state_doc: Some(state_doc),
                    perception,
                    primitive: None,
                    action: None,
                    predicted_eliminated: 0,
                    realized_eliminated: 0,
                    planning_secs,
                });
                log.status = if misperceived {
                    EpisodeStatus::PerceptionFailure
                } else {
                    EpisodeStatus::Deadlock
                };
                log.final_crossings = truth_count;
                return log;
            }
            Err(PlanError::Transition(e)) => {
                log.iterations.push(IterationRecord {
                    iteration,
                    world_doc,
                    state_doc: Some(state_doc),
                    perception,
                    primitive: None,
                    action: None,
                    predicted_eliminated: 0,
                    realized_eliminated: 0,
                    planning_secs,
                });
                let _ = e;
                log.status = EpisodeStatus::Deadlock;
                log.final_crossings = truth_count;
                return log;
            }
        };
        if matches!(perception, PerceptionOutcome::MinorMisclassification) {
            log.minor_misclassifications += 1;
        }

        match outcome.primitive {
            PrimitiveChoice::Done => {
                log.iterations.push(IterationRecord {
                    iteration,
                    world_doc,
                    state_doc: Some(state_doc),
                    perception,
                    primitive: Some(PrimitiveChoice::Done),
                    action: None,
                    predicted_eliminated: 0,
                    realized_eliminated: 0,
                    planning_secs,
                });
                log.final_crossings = truth_count;
                if truth_count == 0 {
                    log.status = EpisodeStatus::Success;
                } else {
                    // Perception believes the scene is unwoven; the
                    // world disagrees.
                    log.perception_failures += 1;
                    log.status = EpisodeStatus::PerceptionFailure;
                }
                return log;
            }
            PrimitiveChoice::Elimination | PrimitiveChoice::Redistribution => {
                let planned = outcome.planned.expect("non-done primitives carry an action");
                let next_world = execute(&world, &planned.geometry, physics, &mut rng);
                let realized = truth_count as i64 - next_world.crossing_count() as i64;
                log.iterations.push(IterationRecord {
                    iteration,
                    world_doc,
                    state_doc: Some(state_doc),
                    perception,
                    primitive: Some(outcome.primitive),
                    action: Some(ActionRecord {
                        cable_id: planned.action.cable_id,
                        grasp_node_id: planned.action.grasp_node_id,
                        pivot_angle: planned.action.pivot_angle,
                        place_px: planned.geometry.place,
                        lift_m: planned.lift.meters,
                        taut: planned.lift.taut,
                        reward: planned.reward,
                    }),
                    predicted_eliminated: planned.eliminated,
                    realized_eliminated: realized,
                    planning_secs,
                });
                log.total_actions += 1;
                world = next_world;
                log.final_crossings = world.crossing_count();
            }
        }
    }
    log.status = EpisodeStatus::IterationBudgetExceeded;
    log
}

/// One aggregated grid row of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub n_cables: u32,
    pub n_crossings: u32,
    pub trials: u32,
    pub successes: u32,
    pub success_rate_pct: f64,
    pub mean_planning_secs_per_action: f64,
    pub perception_failure_pct: f64,
    pub minor_misclassification_pct: f64,
    pub mean_actions: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub trials_per_row: u32,
    pub base_seed: u64,
    pub redistribution_enabled: bool,
}

impl ExperimentReport {
    /// CSV with the experiment table column layout.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n_cables,n_crossings,trials,avg_planning_time_per_action_s,success_rate_pct,\
             perception_failure_pct,minor_misclassification_pct,mean_actions\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.4},{:.1},{:.2},{:.2},{:.2}\n",
                r.n_cables,
                r.n_crossings,
                r.trials,
                r.mean_planning_secs_per_action,
                r.success_rate_pct,
                r.perception_failure_pct,
                r.minor_misclassification_pct,
                r.mean_actions,
            ));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "cables  crossings  trials  plan s/action  success %  percept fail %  minor %\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:>6}  {:>9}  {:>6}  {:>13.4}  {:>9.1}  {:>14.2}  {:>7.2}\n",
                r.n_cables,
                r.n_crossings,
                r.trials,
                r.mean_planning_secs_per_action,
                r.success_rate_pct,
                r.perception_failure_pct,
                r.minor_misclassification_pct,
            ));
        }
        out
    }
}

/// Deterministic per-episode seed.
pub fn episode_seed(base: u64, row: usize, trial: u32) -> u64 {
    base.wrapping_add((row as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((trial as u64 + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

/// Run a seeded grid of scenarios.
pub fn run_experiment(
    grid: &[(u32, u32)],
    trials: u32,
    base_seed: u64,
    physics: &PhysicsConfig,
    pcfg: &PlannerConfig,
    opts: &RunOptions,
) -> Result<ExperimentReport, SimError> {
    let mut rows = Vec::with_capacity(grid.len());
    for (row_idx, (n_cables, n_crossings)) in grid.iter().enumerate() {
        let mut successes = 0u32;
        let mut planning = 0.0f64;
        let mut actions = 0u64;
        let mut perceives = 0u64;
        let mut failures = 0u64;
        let mut minors = 0u64;
        for trial in 0..trials {
            let spec = ScenarioSpec {
                n_cables: *n_cables,
                n_crossings: *n_crossings,
                seed: episode_seed(base_seed, row_idx, trial),
                ..ScenarioSpec::default()
            };
            let log = run_episode(&spec, physics, pcfg, opts)?;
            if log.status == EpisodeStatus::Success {
                successes += 1;
            }
            planning += log.total_planning_secs();
            actions += log.total_actions as u64;
            perceives += log.perceives as u64;
            failures += log.perception_failures as u64;
            minors += log.minor_misclassifications as u64;
        }
        rows.push(ExperimentRow {
            n_cables: *n_cables,
            n_crossings: *n_crossings,
            trials,
            successes,
            success_rate_pct: 100.0 * successes as f64 / trials.max(1) as f64,
            mean_planning_secs_per_action: if actions > 0 {
                planning / actions as f64
            } else {
                0.0
            },
            perception_failure_pct: 100.0 * failures as f64 / perceives.max(1) as f64,
            minor_misclassification_pct: 100.0 * minors as f64 / perceives.max(1) as f64,
            mean_actions: actions as f64 / trials.max(1) as f64,
        });
    }
    Ok(ExperimentReport {
        rows,
        trials_per_row: trials,
        base_seed,
        redistribution_enabled: !opts.no_redistribution,
    })
}

// ---------------------------------------------------------------------
// Episode rendering
// ---------------------------------------------------------------------

fn node_color(kind: NodeKind) -> [u8; 3] {
    match kind {
        NodeKind::Endpoint => [20, 20, 20],
        NodeKind::Regular => [250, 250, 250],
        NodeKind::OverCrossing => [255, 150, 20],
        NodeKind::UnderCrossing => [40, 70, 255],
    }
}

fn draw_disk(img: &mut RgbImage, center: Vec2, radius: f64, color: [u8; 3]) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = (center.x - radius).floor() as i64;
    let x1 = (center.x + radius).ceil() as i64;
    let y0 = (center.y - radius).floor() as i64;
    let y1 = (center.y + radius).ceil() as i64;
    for y in y0.max(0)..=y1.min(h - 1) {
        for x in x0.max(0)..=x1.min(w - 1) {
            let dx = x as f64 + 0.5 - center.x;
            let dy = y as f64 + 0.5 - center.y;
            if dx * dx + dy * dy <= radius * radius {
                img.put_pixel(x as u32, y as u32, image::Rgb(color));
            }
        }
    }
}

fn draw_line(img: &mut RgbImage, a: Vec2, b: Vec2, color: [u8; 3]) {
    let len = a.dist(b).max(1.0);
    let n = (len * 2.0) as usize;
    for i in 0..=n {
        let p = a.lerp(b, i as f64 / n as f64);
        draw_disk(img, p, 0.8, color);
    }
}

/// Overlay the perceived graphs on a frame: nodes colored by kind.
pub fn draw_state_overlay(img: &mut RgbImage, state: &CableState) {
    for g in &state.graphs {
        let poly = g.polyline();
        for w in poly.windows(2) {
            draw_line(img, w[0], w[1], [90, 90, 90]);
        }
        for n in g.nodes() {
            draw_disk(img, n.pos_px, 3.5, [30, 30, 30]);
            draw_disk(img, n.pos_px, 2.4, node_color(n.kind));
        }
    }
}

/// Overlay a chosen action: pivot ring, grasp marker, arc arrow to the
/// place point.
pub fn draw_action_overlay(img: &mut RgbImage, state: &CableState, record: &ActionRecord) {
    if let Some(g) = state.graph(record.cable_id) {
        if let Ok(pidx) = crate::transition::pivot_node(g) {
            let pivot = g.nodes()[pidx].pos_px;
            draw_disk(img, pivot, 5.0, [0, 0, 0]);
            draw_disk(img, pivot, 3.4, [255, 255, 90]);
            if let Some((_, grasp)) = g.node_by_id(record.grasp_node_id) {
                draw_disk(img, grasp.pos_px, 5.0, [0, 0, 0]);
                draw_disk(img, grasp.pos_px, 3.4, [90, 255, 120]);
                draw_line(img, grasp.pos_px, record.place_px, [200, 30, 30]);
                draw_disk(img, record.place_px, 4.0, [200, 30, 30]);
            }
        }
    }
}

/// Render each logged iteration to an annotated frame: the world as the
/// camera saw it, the perceived graph, and the chosen action.
pub fn render_episode(log: &EpisodeLog) -> Result<Vec<RgbImage>, SimError> {
    let mut frames = Vec::with_capacity(log.iterations.len());
    for record in &log.iterations {
        let world = deserialize_world(&record.world_doc)?;
        let (mut img, _) = render(&world);
        if let Some(doc) = &record.state_doc {
            if let Ok(state) = crate::graph::deserialize_state(doc) {
                draw_state_overlay(&mut img, &state);
                if let Some(action) = &record.action {
                    draw_action_overlay(&mut img, &state, action);
                }
            }
        }
        frames.push(img);
    }
    Ok(frames)
}

/// Best reachable reward per graspable node under the active primitive,
/// for cost-landscape visualization. `None` marks nodes with no valid
/// in-domain action.
pub fn cost_landscape(
    state: &CableState,
    ws: &Workspace,
    tcfg: &TransitionConfig,
    pcfg: &PlannerConfig,
) -> Vec<(u32, u32, Vec2, Option<f64>)> {
    let subspaces = enumerate_subspaces(state, ws, tcfg, pcfg);
    let primitive = match select_primitive(&subspaces, state) {
        Ok(PrimitiveChoice::Done) | Err(_) => return Vec::new(),
        Ok(p) => p,
    };
    let mut out = Vec::new();
    for g in &state.graphs {
        for n in g.nodes() {
            if n.kind != NodeKind::Regular {
                continue;
            }
            let mine: Vec<&ActionSubspace> = subspaces
                .iter()
                .filter(|s| {
                    s.cable_id == g.cable_id
                        && s.grasp_node_id == n.node_id
                        && match primitive {
                            PrimitiveChoice::Elimination => s.crossings_eliminated > 0,
                            PrimitiveChoice::Redistribution => s.crossings_eliminated == 0,
                            PrimitiveChoice::Done => false,
                        }
                })
                .collect();
            if mine.is_empty() {
                out.push((g.cable_id, n.node_id, n.pos_px, None));
                continue;
            }
            let best = optimize_action(
                &subspaces
                    .iter()
                    .filter(|s| s.cable_id == g.cable_id && s.grasp_node_id == n.node_id)
                    .cloned()
                    .collect::<Vec<_>>(),
                primitive,
                state,
                ws,
                tcfg,
                pcfg,
            )
            .ok()
            .map(|p| p.reward);
            out.push((g.cable_id, n.node_id, n.pos_px, best));
        }
    }
    out
}

/// Render the cost landscape: grasp nodes shaded blue (worst) to red
/// (best); nodes without valid actions in dark gray.
pub fn render_cost_landscape(
    world: &World,
    state: &CableState,
    landscape: &[(u32, u32, Vec2, Option<f64>)],
) -> RgbImage {
    let (mut img, _) = render(world);
    draw_state_overlay(&mut img, state);
    let rewards: Vec<f64> = landscape.iter().filter_map(|(_, _, _, r)| *r).collect();
    let (lo, hi) = rewards
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(*r), hi.max(*r))
        });
    for (_, _, pos, reward) in landscape {
        match reward {
            None => {
                draw_disk(&mut img, *pos, 3.0, [70, 70, 70]);
            }
            Some(r) => {
                let t = if hi > lo { (r - lo) / (hi - lo) } else { 0.5 };
                let color = [
                    (60.0 + 195.0 * t) as u8,
                    40,
                    (255.0 - 215.0 * t) as u8,
                ];
                draw_disk(&mut img, *pos, 3.6, color);
            }
        }
    }
    img
}
