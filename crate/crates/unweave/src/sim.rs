//! Ground-truth 2D cable world: seeded scenario generation, rasterization
//! with correct over/under occlusion, and physical execution of planned
//! actions with a configurable reality gap.
//!
//! The simulator's physics is the transition model itself plus optional
//! perturbations (tail elasticity bleed and per-vertex jitter), which
//! isolates the perception/planning pipeline while letting the model
//! mismatch be dialed in.

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{point_at_arc, polyline_length, project_onto_polyline, sample_segment, Vec2};
use crate::graph::{
    assemble_state, geometric_crossings, CableState, GraphError, NodeKind, ProtoNode,
};
use crate::palette;
use crate::planner::Workspace;
use crate::transition::{
    apply_crossings, assign_crossings, ActionGeometry, OldHit, TailBranch, TransitionConfig,
};

/// Vertex spacing of world polylines, pixels. Matches the node spacing
/// scale of traced graphs so exact state extraction keeps the same
/// vertices.
pub const WORLD_STEP_PX: f64 = 12.0;

/// One physical cable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldCable {
    pub cable_id: u32,
    pub color: String,
    /// Vertices in raster-frame pixels, free end first. The world
    /// document serializes these in meters; in memory they stay in
    /// pixels so that state extraction and execution share bit-identical
    /// coordinates with the planner.
    pub polyline_px: Vec<Vec2>,
    pub width_m: f64,
}

/// Ground-truth crossing: cable pair (`a < b`), position, who is on top.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldCrossing {
    pub a: u32,
    pub b: u32,
    pub pos_px: Vec2,
    pub over: u32,
}

/// The simulator's hidden truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub cables: Vec<WorldCable>,
    pub crossings: Vec<WorldCrossing>,
    pub workspace: Workspace,
    pub scale_m_per_px: f64,
    pub canvas_px: (u32, u32),
    /// Perception window width the world was generated against.
    pub window_px: f64,
}

/// Requested scenario shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub n_cables: u32,
    pub n_crossings: u32,
    pub seed: u64,
    pub min_len_m: f64,
    pub max_len_m: f64,
    pub stiffness: StiffnessPreset,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            n_cables: 2,
            n_crossings: 2,
            seed: 0,
            min_len_m: 0.6,
            max_len_m: 2.4,
            stiffness: StiffnessPreset::Electric,
        }
    }
}

/// Cable material presets; electric cable is springier than shoelace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StiffnessPreset {
    Electric,
    Shoelace,
}

impl StiffnessPreset {
    pub fn physics(self) -> PhysicsConfig {
        match self {
            StiffnessPreset::Electric => PhysicsConfig {
                noise_sigma_m: 0.002,
                elasticity_bleed: 0.15,
            },
            StiffnessPreset::Shoelace => PhysicsConfig {
                noise_sigma_m: 0.001,
                elasticity_bleed: 0.05,
            },
        }
    }
}

/// Reality-gap knobs applied when executing an action.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsConfig {
    /// Per-vertex Gaussian jitter on the moved segment, meters.
    pub noise_sigma_m: f64,
    /// Fraction of the tail's pre-action shape retained after placing.
    pub elasticity_bleed: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            noise_sigma_m: 0.0,
            elasticity_bleed: 0.0,
        }
    }
}

impl PhysicsConfig {
    pub fn is_zero(&self) -> bool {
        self.noise_sigma_m == 0.0 && self.elasticity_bleed == 0.0
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("generation budget exceeded for spec {n_cables} cables / {n_crossings} crossings, seed {seed}")]
    GenerationBudgetExceeded {
        n_cables: u32,
        n_crossings: u32,
        seed: u64,
    },
    #[error("scenario spec invalid: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Fixed world-building parameters.
#[derive(Clone, Copy, Debug)]
pub struct SimParams {
    pub canvas_px: (u32, u32),
    pub scale_m_per_px: f64,
    pub window_px: f64,
    pub cable_width_m: f64,
    pub workspace_margin_px: f64,
    pub attempt_budget: u32,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            canvas_px: (640, 480),
            scale_m_per_px: 1.0 / 500.0,
            window_px: 35.0,
            cable_width_m: 0.012,
            workspace_margin_px: 10.0,
            attempt_budget: 6000,
        }
    }
}

impl World {
    pub fn transition_config(&self) -> TransitionConfig {
        TransitionConfig {
            scale_m_per_px: self.scale_m_per_px,
            crossing_merge_px: self.window_px / 2.0,
            canvas_px: self.canvas_px,
            ..TransitionConfig::default()
        }
    }

    pub fn crossing_count(&self) -> usize {
        self.crossings.len()
    }

    fn cable_index(&self, cable_id: u32) -> Option<usize> {
        self.cables.iter().position(|c| c.cable_id == cable_id)
    }

    fn old_hits(&self) -> Vec<OldHit> {
        self.crossings
            .iter()
            .map(|c| {
                let i = self.cable_index(c.a).expect("crossing cable exists");
                let j = self.cable_index(c.b).expect("crossing cable exists");
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                OldHit {
                    a,
                    b,
                    pos: c.pos_px,
                    over_is_a: self.cables[a].cable_id == c.over,
                }
            })
            .collect()
    }

    /// Exact graph extraction: every polyline vertex becomes a node and
    /// crossing nodes are inserted at the registered positions, so state
    /// and world describe bit-identical curves.
    pub fn to_state(&self) -> Result<CableState, GraphError> {
        let mut cables = Vec::with_capacity(self.cables.len());
        for cable in &self.cables {
            let n = cable.polyline_px.len();
            let base: Vec<ProtoNode> = cable
                .polyline_px
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    ProtoNode::plain(
                        *p,
                        if i == 0 || i == n - 1 {
                            NodeKind::Endpoint
                        } else {
                            NodeKind::Regular
                        },
                    )
                })
                .collect();
            let mut inserts = Vec::new();
            for (key, cr) in self.crossings.iter().enumerate() {
                if cr.a != cable.cable_id && cr.b != cable.cable_id {
                    continue;
                }
                let kind = if cr.over == cable.cable_id {
                    NodeKind::OverCrossing
                } else {
                    NodeKind::UnderCrossing
                };
                let (arc, _) = project_onto_polyline(cr.pos_px, &cable.polyline_px);
                inserts.push((arc, cr.pos_px, kind, key));
            }
            let protos = apply_crossings(base, &[], &inserts);
            cables.push((cable.cable_id, cable.color.clone(), protos));
        }
        assemble_state(cables)
    }

    /// World invariant report: an empty list means all hold. Violations
    /// after noisy execution are recorded, not repaired.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        let min_sep = (2.0f64).sqrt() * self.window_px;
        for (i, a) in self.crossings.iter().enumerate() {
            for b in self.crossings.iter().skip(i + 1) {
                let d = a.pos_px.dist(b.pos_px);
                if d < min_sep {
                    out.push(format!(
                        "crossings at ({:.0},{:.0}) and ({:.0},{:.0}) only {:.1}px apart",
                        a.pos_px.x, a.pos_px.y, b.pos_px.x, b.pos_px.y, d
                    ));
                }
            }
        }
        let rect = self.workspace.rect_px(&self.transition_config());
        for c in &self.cables {
            let fix = *c.polyline_px.last().unwrap();
            if !rect.contains(fix) {
                out.push(format!("cable {} fixed endpoint outside workspace", c.cable_id));
            }
            if self_intersects(&c.polyline_px) {
                out.push(format!("cable {} self-intersects", c.cable_id));
            }
        }
        out
    }
}

fn self_intersects(poly: &[Vec2]) -> bool {
    for i in 0..poly.len().saturating_sub(1) {
        for j in (i + 2)..poly.len() - 1 {
            if i == 0 && j == poly.len() - 2 && poly.len() < 4 {
                continue;
            }
            match crate::geom::segment_intersection(poly[i], poly[i + 1], poly[j], poly[j + 1]) {
                Ok(Some(_)) | Err(()) => return true,
                Ok(None) => {}
            }
        }
    }
    false
}

fn gauss(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generate a world matching the requested crossing count exactly, by
/// rejection sampling over smoothed random walks. Deterministic per
/// seed.
pub fn generate_world(spec: &ScenarioSpec) -> Result<World, SimError> {
    generate_world_with(spec, &SimParams::default())
}

pub fn generate_world_with(spec: &ScenarioSpec, params: &SimParams) -> Result<World, SimError> {
    if spec.n_cables < 1 || spec.n_cables > 8 {
        return Err(SimError::BadSpec(format!(
            "n_cables {} outside 1..=8",
            spec.n_cables
        )));
    }
    if spec.min_len_m <= 0.0 || spec.max_len_m < spec.min_len_m {
        return Err(SimError::BadSpec("bad cable length range".into()));
    }
    let (w, h) = (params.canvas_px.0 as f64, params.canvas_px.1 as f64);
    let margin = params.workspace_margin_px;
    let fixed_y = h - margin;
    let d_w = params.window_px;

    for attempt in 0..params.attempt_budget {
        let mut rng = ChaCha20Rng::seed_from_u64(
            spec.seed ^ (attempt as u64).wrapping_mul(0x9E3779B97F4A7C15),
        );
        if let Ok(world) = try_generate(spec, params, &mut rng, w, h, fixed_y, d_w) {
            return Ok(world);
        }
    }
    Err(SimError::GenerationBudgetExceeded {
        n_cables: spec.n_cables,
        n_crossings: spec.n_crossings,
        seed: spec.seed,
    })
}

pub(crate) fn try_generate(
    spec: &ScenarioSpec,
    params: &SimParams,
    rng: &mut ChaCha20Rng,
    w: f64,
    h: f64,
    fixed_y: f64,
    d_w: f64,
) -> Result<World, &'static str> {
    let n = spec.n_cables as usize;
    let m = spec.n_crossings as usize;

    // Fixed anchors along the bottom edge.
    let anchors: Vec<f64> = (0..n)
        .map(|i| w * (i as f64 + 1.0) / (n as f64 + 1.0) + rng.random_range(-20.0..20.0))
        .collect();

    // Plan the crossing sites: assign each to a cable pair (balancing
    // the per-cable load), then sample it inside that pair's corridor so
    // routes stay short and clear of uninvolved cables. Each involved
    // cable is routed exactly through its sites, so the only thing left
    // to reject is incidental extras.
    let all_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect();
    if all_pairs.is_empty() && m > 0 {
        return Err("crossing count");
    }
    let mut load = vec![0usize; n];
    let mut assignments: Vec<(usize, usize)> = Vec::with_capacity(m);
    for _ in 0..m {
        let min_load = all_pairs
            .iter()
            .map(|(a, b)| load[*a] + load[*b])
            .min()
            .unwrap();
        let candidates: Vec<&(usize, usize)> = all_pairs
            .iter()
            .filter(|(a, b)| load[*a] + load[*b] == min_load)
            .collect();
        let pick = *candidates[rng.random_range(0..candidates.len())];
        load[pick.0] += 1;
        load[pick.1] += 1;
        assignments.push(pick);
    }
    let min_site_sep = 1.35 * (2.0f64).sqrt() * d_w;
    let mut sites: Vec<Vec2> = Vec::with_capacity(m);
    'sites: for (a, b) in &assignments {
        let mid = 0.5 * (anchors[*a] + anchors[*b]);
        let half = 0.5 * (anchors[*a] - anchors[*b]).abs() + 0.12 * w;
        let x_lo = (mid - half).max(0.12 * w);
        let x_hi = (mid + half).min(0.88 * w);
        for _ in 0..80 {
            let p = Vec2::new(
                rng.random_range(x_lo..x_hi),
                rng.random_range(0.2 * h..0.62 * h),
            );
            if sites.iter().all(|q| q.dist(p) >= min_site_sep) {
                sites.push(p);
                continue 'sites;
            }
        }
        return Err("site sampling");
    }

    let mut polylines: Vec<Vec<Vec2>> = Vec::with_capacity(n);
    for i in 0..n {
        let fx = anchors[i];
        let mut targets: Vec<Vec2> = sites
            .iter()
            .zip(&assignments)
            .filter(|(_, (a, b))| *a == i || *b == i)
            .map(|(p, _)| *p)
            .collect();
        // Visit lower sites first so the route climbs; within a height
        // band, avoid lateral backtracking by following x.
        targets.sort_by(|a, b| b.y.partial_cmp(&a.y).unwrap());
        let band = 0.2 * h;
        let mut i2 = 0;
        while i2 < targets.len() {
            let mut j2 = i2 + 1;
            while j2 < targets.len() && (targets[i2].y - targets[j2].y).abs() < band {
                j2 += 1;
            }
            let prev_x = if i2 == 0 { fx } else { targets[i2 - 1].x };
            targets[i2..j2].sort_by(|a, b| {
                (a.x - prev_x)
                    .abs()
                    .partial_cmp(&(b.x - prev_x).abs())
                    .unwrap()
            });
            i2 = j2;
        }
        if targets.is_empty() {
            // Crossing-free cable: wander near its anchor.
            targets.push(Vec2::new(
                (fx + rng.random_range(-0.18 * w..0.18 * w)).clamp(0.1 * w, 0.9 * w),
                rng.random_range(0.3 * h..0.55 * h),
            ));
        }
        // Terminal escape so the free end clears the weave.
        targets.push(Vec2::new(
            (targets.last().unwrap().x + rng.random_range(-0.25 * w..0.25 * w))
                .clamp(0.12 * w, 0.88 * w),
            rng.random_range(0.16 * h..0.26 * h),
        ));
        // Lead-in points ahead of each target let the bounded-turn walk
        // line up before threading it, instead of orbiting a target
        // caught inside its own turning circle.
        let mut legs: Vec<(Vec2, f64, bool)> = Vec::with_capacity(2 * targets.len());
        let mut prev = Vec2::new(fx, fixed_y);
        for t in &targets {
            // The lead-in sits beyond the walk's turning radius with an
            // accept radius to match, so it cannot be orbit-trapped, and
            // leaves the walk aligned for the exact threading.
            if let Some(u) = (*t - prev).unit() {
                let lead = *t - u * (9.0 * WORLD_STEP_PX);
                let lead = Vec2::new(
                    lead.x.clamp(0.12 * w, 0.88 * w),
                    lead.y.clamp(0.16 * h, 0.82 * h),
                );
                legs.push((lead, 4.6 * WORLD_STEP_PX, false));
            }
            legs.push((*t, 1.2 * WORLD_STEP_PX, true));
            prev = *t;
        }
        let poly = walk_through(rng, Vec2::new(fx, fixed_y), &legs, w, h)
            .ok_or("route failed")?;
        polylines.push(poly);
    }
    // Free end first, like every cable path in the crate.
    for p in &mut polylines {
        p.reverse();
    }
    for p in &polylines {
        let len_m = polyline_length(p) * params.scale_m_per_px;
        if len_m < spec.min_len_m || len_m > spec.max_len_m {
            return Err("length range");
        }
    }

    let merge = d_w / 2.0;
    let hits = geometric_crossings(&polylines, merge).map_err(|_| "degenerate")?;
    if hits.len() != m {
        return Err("crossing count");
    }
    // Crossing separation with margin over the sqrt(2) d_w minimum.
    let min_sep = 1.15 * (2.0f64).sqrt() * d_w;
    for (i, a) in hits.iter().enumerate() {
        for b in hits.iter().skip(i + 1) {
            if a.pos.dist(b.pos) < min_sep {
                return Err("crossing separation");
            }
        }
    }
    for hit in &hits {
        // Transversal enough that occlusion stays short.
        let dir_a = (polylines[hit.a][hit.seg_a + 1] - polylines[hit.a][hit.seg_a])
            .unit()
            .ok_or("zero segment")?;
        let dir_b = (polylines[hit.b][hit.seg_b + 1] - polylines[hit.b][hit.seg_b])
            .unit()
            .ok_or("zero segment")?;
        let ang = crate::geom::angle_between(dir_a, dir_b);
        if ang.min(std::f64::consts::PI - ang) < 0.38 {
            return Err("crossing angle");
        }
        // Clear of every endpoint and of cables not involved.
        for (ci, poly) in polylines.iter().enumerate() {
            if hit.pos.dist(poly[0]) < 1.5 * d_w || hit.pos.dist(*poly.last().unwrap()) < 1.5 * d_w
            {
                return Err("crossing near endpoint");
            }
            if ci != hit.a && ci != hit.b
                && crate::geom::point_polyline_distance(hit.pos, poly) < 1.6 * d_w
            {
                return Err("crossing near third cable");
            }
        }
    }
    // Bodies keep daylight between them away from their own crossings.
    for a in 0..n {
        for b in (a + 1)..n {
            let pair_hits: Vec<Vec2> = hits
                .iter()
                .filter(|h| (h.a, h.b) == (a, b))
                .map(|h| h.pos)
                .collect();
            for v in &polylines[a] {
                if pair_hits.iter().any(|q| q.dist(*v) < 1.4 * d_w) {
                    continue;
                }
                if crate::geom::point_polyline_distance(*v, &polylines[b]) < 0.75 * d_w {
                    return Err("body clearance");
                }
            }
        }
    }
    // Free endpoints keep clear of other cables.
    for (ci, poly) in polylines.iter().enumerate() {
        for (cj, other) in polylines.iter().enumerate() {
            if ci != cj && crate::geom::point_polyline_distance(poly[0], other) < 1.8 * d_w {
                return Err("free endpoint clearance");
            }
        }
        if self_intersects(poly) {
            return Err("self intersection");
        }
    }

    let crossings: Vec<WorldCrossing> = hits
        .iter()
        .map(|hit| {
            let (a, b) = (hit.a as u32, hit.b as u32);
            let over = if rng.random::<bool>() { a } else { b };
            WorldCrossing {
                a,
                b,
                pos_px: hit.pos,
                over,
            }
        })
        .collect();

    let cables = polylines
        .into_iter()
        .enumerate()
        .map(|(i, polyline_px)| WorldCable {
            cable_id: i as u32,
            color: palette::cable_name(i).to_string(),
            polyline_px,
            width_m: params.cable_width_m,
        })
        .collect();
    let tcfg = TransitionConfig {
        scale_m_per_px: params.scale_m_per_px,
        canvas_px: params.canvas_px,
        ..TransitionConfig::default()
    };
    Ok(World {
        cables,
        crossings,
        workspace: Workspace::for_canvas(&tcfg, params.workspace_margin_px),
        scale_m_per_px: params.scale_m_per_px,
        canvas_px: params.canvas_px,
        window_px: params.window_px,
    })
}

/// Smoothed bounded-turn walk through legs of (point, accept radius,
/// thread-exactly). Crossing sites become polyline vertices,
/// guaranteeing the planned crossings exist; the turn rate keeps
/// window-sized stretches near straight.
fn walk_through(
    rng: &mut ChaCha20Rng,
    start: Vec2,
    legs: &[(Vec2, f64, bool)],
    w: f64,
    h: f64,
) -> Option<Vec<Vec2>> {
    let step = WORLD_STEP_PX;
    let max_turn = 0.22;
    let border = 30.0;
    let mut pts = vec![start];
    let mut heading = Vec2::new(0.0, -1.0).rotate_ccw(rng.random_range(-0.3..0.3));
    let mut turn_state = 0.0;
    for (target, accept, thread) in legs {
        let mut leg_steps = 0;
        loop {
            let pos = *pts.last().unwrap();
            if pos.dist(*target) <= *accept {
                if *thread {
                    pts.push(*target);
                    heading = (*target - pos).unit().unwrap_or(heading);
                }
                break;
            }
            leg_steps += 1;
            if leg_steps > 300 {
                return None;
            }
            let mut turn_to = 0.65
                * crate::geom::signed_angle(heading, (*target - pos).unit().unwrap_or(heading))
                    .clamp(-1.0, 1.0);
            let next = pos + heading * (3.0 * step);
            let near_target = pos.dist(*target) < 7.0 * step;
            if !near_target
                && (next.x < border || next.x > w - border || next.y < border || next.y > h - border)
            {
                let center = Vec2::new(w / 2.0, h * 0.4);
                turn_to = 0.7
                    * crate::geom::signed_angle(heading, (center - pos).unit().unwrap_or(heading))
                        .clamp(-1.0, 1.0);
            }
            turn_to += 0.04 * gauss(rng);
            turn_state = 0.5 * turn_state + 0.5 * turn_to;
            turn_state = turn_state.clamp(-max_turn, max_turn);
            heading = heading.rotate_ccw(turn_state);
            pts.push(pos + heading * step);
        }
    }
    Some(pts)
}

/// Background color of rendered frames.
pub const BACKGROUND: [u8; 3] = [202, 202, 198];

/// Rasterize the world: each cable stroked in its palette color, and at
/// every crossing a disk of twice the stroke width repainted with the
/// over cable's color. Returns the image and per-cable painted pixel
/// counts (before occlusion).
pub fn render(world: &World) -> (RgbImage, Vec<u64>) {
    let (w, h) = world.canvas_px;
    let mut img = RgbImage::from_pixel(w, h, image::Rgb(BACKGROUND));
    let mut painted: Vec<u64> = vec![0; world.cables.len()];
    for (ci, cable) in world.cables.iter().enumerate() {
        let radius = cable.width_m / world.scale_m_per_px / 2.0;
        let color = palette::cable_rgb(ci);
        let mut touched = vec![false; (w * h) as usize];
        stroke_polyline(&mut img, &cable.polyline_px, radius, color, &mut touched);
        painted[ci] = touched.iter().filter(|t| **t).count() as u64;
    }
    for crossing in &world.crossings {
        let ci = world
            .cable_index(crossing.over)
            .expect("over cable exists");
        let radius = world.cables[ci].width_m / world.scale_m_per_px;
        fill_disk(&mut img, crossing.pos_px, radius, palette::cable_rgb(ci));
    }
    (img, painted)
}

fn stroke_polyline(
    img: &mut RgbImage,
    poly: &[Vec2],
    radius: f64,
    color: [u8; 3],
    touched: &mut [bool],
) {
    let total = polyline_length(poly);
    let step = 0.6;
    let n = (total / step).ceil().max(1.0) as usize;
    for i in 0..=n {
        let p = point_at_arc(poly, total * i as f64 / n as f64);
        stamp_disk(img, p, radius, color, Some(touched));
    }
}

fn fill_disk(img: &mut RgbImage, center: Vec2, radius: f64, color: [u8; 3]) {
    stamp_disk(img, center, radius, color, None);
}

fn stamp_disk(
    img: &mut RgbImage,
    center: Vec2,
    radius: f64,
    color: [u8; 3],
    mut touched: Option<&mut [bool]>,
) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let r = radius;
    let x0 = (center.x - r).floor() as i64;
    let x1 = (center.x + r).ceil() as i64;
    let y0 = (center.y - r).floor() as i64;
    let y1 = (center.y + r).ceil() as i64;
    for y in y0.max(0)..=y1.min(h - 1) {
        for x in x0.max(0)..=x1.min(w - 1) {
            let dx = x as f64 + 0.5 - center.x;
            let dy = y as f64 + 0.5 - center.y;
            if dx * dx + dy * dy <= r * r {
                img.put_pixel(x as u32, y as u32, image::Rgb(color));
                if let Some(t) = touched.as_deref_mut() {
                    t[(y * w + x) as usize] = true;
                }
            }
        }
    }
}

/// Physically execute a planned action.
///
/// The grasp and pivot re-anchor onto the cable's true polyline, the
/// cable straightens by its own arc lengths (beliefs do not stretch
/// cables), and the same straighten-rotate-place geometry as the
/// transition model shapes the result. Elasticity bleed then blends the
/// tail toward its pre-action shape and jitter perturbs the moved
/// vertices. Crossings are re-derived with the moved cable on top of
/// anything it newly lies across.
pub fn execute(
    world: &World,
    geom: &ActionGeometry,
    physics: &PhysicsConfig,
    rng: &mut ChaCha20Rng,
) -> World {
    let cable_idx = world
        .cable_index(geom.cable_id)
        .expect("acted cable exists");
    let poly = &world.cables[cable_idx].polyline_px;
    let tcfg = world.transition_config();

    let (s_c, c_w) = project_onto_polyline(geom.pivot, poly);
    let (mut s_g, _) = project_onto_polyline(geom.grasp, poly);
    if s_g > s_c - WORLD_STEP_PX / 2.0 {
        s_g = (s_c - WORLD_STEP_PX / 2.0).max(0.0);
    }
    let g_w = point_at_arc(poly, s_g);
    let l_grasp = s_c - s_g;
    let l_tail = s_g;

    let dir0 = (g_w - c_w).unit().unwrap_or(Vec2::new(0.0, -1.0));
    let place = c_w + dir0.rotate_ccw(geom.theta) * l_grasp;
    let k = tcfg.stiffness_threshold;
    let branch = if tcfg.meters(l_tail) < k * tcfg.meters(l_grasp) {
        TailBranch::Straight
    } else {
        TailBranch::Bent
    };
    let tail_dir = match branch {
        TailBranch::Straight => (place - c_w).unit().unwrap_or(dir0),
        TailBranch::Bent => (poly[0] - place).unit().unwrap_or_else(|| {
            (place - c_w).unit().unwrap_or(dir0)
        }),
    };
    let tail_end = place + tail_dir * l_tail;

    let mut tail_pts = sample_segment(tail_end, place, WORLD_STEP_PX);
    if physics.elasticity_bleed > 0.0 && l_tail > 1e-9 {
        // Blend the exact tail with the pre-action tail shape carried
        // along with the grasp point.
        let shift = place - g_w;
        let count = tail_pts.len();
        for (i, p) in tail_pts.iter_mut().enumerate() {
            // Arc from the free end: 0 at tail_end, l_tail at place.
            let u = l_tail * i as f64 / (count - 1).max(1) as f64;
            let old = point_at_arc(poly, u) + shift;
            *p = p.lerp(old, physics.elasticity_bleed);
        }
    }
    let grasp_pts: Vec<Vec2> = sample_segment(place, c_w, WORLD_STEP_PX);
    let mut new_poly = tail_pts;
    new_poly.extend_from_slice(&grasp_pts[1..]);
    let seam_index = new_poly.len() - 1; // c_w

    // Unmoved suffix: vertices strictly past the cut.
    let mut acc = 0.0;
    for (i, w2) in poly.windows(2).enumerate() {
        let seg = w2[0].dist(w2[1]);
        if acc + seg > s_c + 1e-9 {
            // Vertex i+1 and onward are past the cut.
            new_poly.extend_from_slice(&poly[i + 1..]);
            break;
        }
        acc += seg;
    }

    if physics.noise_sigma_m > 0.0 {
        let sigma_px = physics.noise_sigma_m / world.scale_m_per_px;
        for p in new_poly.iter_mut().take(seam_index) {
            *p = *p + Vec2::new(gauss(rng) * sigma_px, gauss(rng) * sigma_px);
        }
    }

    let mut polylines: Vec<&[Vec2]> = world
        .cables
        .iter()
        .map(|c| c.polyline_px.as_slice())
        .collect();
    polylines[cable_idx] = &new_poly;
    let owned: Vec<Vec<Vec2>> = polylines.iter().map(|p| p.to_vec()).collect();
    let old = world.old_hits();
    // Degenerate overlap after an action is vanishingly rare; nudging
    // the merge radius epsilon would mask it, so treat it as no hits
    // rather than crash (perception will surface the mess downstream).
    let hits = assign_crossings(
        &owned,
        &old,
        cable_idx,
        seam_index,
        world.window_px / 2.0,
    )
    .unwrap_or_default();

    let crossings: Vec<WorldCrossing> = hits
        .iter()
        .map(|h| {
            let (ida, idb) = (
                world.cables[h.a].cable_id,
                world.cables[h.b].cable_id,
            );
            WorldCrossing {
                a: ida.min(idb),
                b: ida.max(idb),
                pos_px: h.pos,
                over: if h.over_is_a { ida } else { idb },
            }
        })
        .collect();

    let mut cables = world.cables.clone();
    cables[cable_idx].polyline_px = new_poly;
    World {
        cables,
        crossings,
        ..world.clone()
    }
}

// ---------------------------------------------------------------------
// World document (meters, per the interface convention)
// ---------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct WorldDoc {
    canvas_px: (u32, u32),
    scale_m_per_px: f64,
    window_px: f64,
    workspace: Workspace,
    cables: Vec<WorldCableDoc>,
    crossings: Vec<WorldCrossingDoc>,
}

#[derive(Serialize, Deserialize)]
struct WorldCableDoc {
    cable_id: u32,
    color: String,
    width_m: f64,
    polyline_m: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct WorldCrossingDoc {
    a: u32,
    b: u32,
    over: u32,
    x_m: f64,
    y_m: f64,
}

/// Serialize a world document (world coordinates in meters).
pub fn serialize_world(world: &World) -> String {
    let s = world.scale_m_per_px;
    let doc = WorldDoc {
        canvas_px: world.canvas_px,
        scale_m_per_px: s,
        window_px: world.window_px,
        workspace: world.workspace,
        cables: world
            .cables
            .iter()
            .map(|c| WorldCableDoc {
                cable_id: c.cable_id,
                color: c.color.clone(),
                width_m: c.width_m,
                polyline_m: c.polyline_px.iter().map(|p| (p.x * s, p.y * s)).collect(),
            })
            .collect(),
        crossings: world
            .crossings
            .iter()
            .map(|c| WorldCrossingDoc {
                a: c.a,
                b: c.b,
                over: c.over,
                x_m: c.pos_px.x * s,
                y_m: c.pos_px.y * s,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("world serialization cannot fail")
}

/// Parse a world document.
pub fn deserialize_world(doc: &str) -> Result<World, SimError> {
    let doc: WorldDoc = serde_json::from_str(doc)
        .map_err(|e| SimError::Graph(GraphError::Malformed(e.to_string())))?;
    let s = doc.scale_m_per_px;
    Ok(World {
        cables: doc
            .cables
            .into_iter()
            .map(|c| WorldCable {
                cable_id: c.cable_id,
                color: c.color,
                width_m: c.width_m,
                polyline_px: c
                    .polyline_m
                    .into_iter()
                    .map(|(x, y)| Vec2::new(x / s, y / s))
                    .collect(),
            })
            .collect(),
        crossings: doc
            .crossings
            .into_iter()
            .map(|c| WorldCrossing {
                a: c.a,
                b: c.b,
                over: c.over,
                pos_px: Vec2::new(c.x_m / s, c.y_m / s),
            })
            .collect(),
        workspace: doc.workspace,
        scale_m_per_px: s,
        canvas_px: doc.canvas_px,
        window_px: doc.window_px,
    })
}

#[cfg(test)]
mod gen_probe {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    #[ignore = "diagnostic probe"]
    fn rejection_reasons() {
        let params = SimParams::default();
        let (w, h) = (params.canvas_px.0 as f64, params.canvas_px.1 as f64);
        let fixed_y = h - params.workspace_margin_px;
        for (n, m) in [(2u32, 2u32), (2, 3), (3, 4), (3, 5)] {
            let spec = ScenarioSpec {
                n_cables: n,
                n_crossings: m,
                ..Default::default()
            };
            let mut tally: BTreeMap<&'static str, u32> = BTreeMap::new();
            for attempt in 0..2000u64 {
                let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(
                    attempt.wrapping_mul(0x9E3779B97F4A7C15),
                );
                match try_generate(&spec, &params, &mut rng, w, h, fixed_y, params.window_px) {
                    Ok(_) => *tally.entry("ok").or_default() += 1,
                    Err(e) => *tally.entry(e).or_default() += 1,
                }
            }
            println!();
            println!("({n},{m}): {tally:?}");
        }
    }
}
