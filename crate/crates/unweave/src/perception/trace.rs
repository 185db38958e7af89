//! Sliding-window cable tracing and window classification.
//!
//! A square window slides from the fixed endpoint toward the free end in
//! fixed steps, following the local tangent of the mask. Each window
//! yields one node at the mean of the mask pixels it contains. Flood
//! filling the window tells the node type: two islands mean the cable is
//! occluded there (an undercrossing); one island that spans the window
//! is a regular point; otherwise a probe window half a width ahead
//! separates endpoints from undercrossings sitting on the window edge.

use crate::geom::Vec2;
use crate::graph::NodeKind;

use super::color::CableMask;
use super::{PerceptionConfig, PerceptionError};

/// The sliding window: center, side length and travel direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceWindow {
    pub center_px: Vec2,
    pub width: f64,
    pub heading: Vec2,
}

impl TraceWindow {
    pub fn new(center_px: Vec2, width: f64, heading: Vec2) -> Result<Self, PerceptionError> {
        if width <= 0.0 {
            return Err(PerceptionError::BadConfig("window width must be positive".into()));
        }
        if (heading.norm() - 1.0).abs() > 1e-9 {
            return Err(PerceptionError::BadConfig("heading must be unit length".into()));
        }
        Ok(TraceWindow {
            center_px,
            width,
            heading,
        })
    }
}

/// Mask pixels inside the window, as pixel-center coordinates plus the
/// window-local bitmap used for flood filling.
struct WindowView {
    pixels: Vec<Vec2>,
    local: Vec<bool>,
    w: usize,
    h: usize,
}

fn window_view(mask: &CableMask, center: Vec2, width: f64) -> WindowView {
    let half = width / 2.0;
    let x0 = (center.x - half).floor() as i64;
    let x1 = (center.x + half).ceil() as i64 - 1;
    let y0 = (center.y - half).floor() as i64;
    let y1 = (center.y + half).ceil() as i64 - 1;
    let (x0c, x1c) = (x0.max(0), x1.min(mask.width as i64 - 1));
    let (y0c, y1c) = (y0.max(0), y1.min(mask.height as i64 - 1));
    let w = (x1c - x0c + 1).max(0) as usize;
    let h = (y1c - y0c + 1).max(0) as usize;
    let mut local = vec![false; w * h];
    let mut pixels = Vec::new();
    for y in y0c..=y1c {
        for x in x0c..=x1c {
            if mask.get(x, y) {
                local[((y - y0c) as usize) * w + (x - x0c) as usize] = true;
                pixels.push(Vec2::new(x as f64 + 0.5, y as f64 + 0.5));
            }
        }
    }
    WindowView {
        pixels,
        local,
        w,
        h,
    }
}

fn mean(pixels: &[Vec2]) -> Option<Vec2> {
    if pixels.is_empty() {
        return None;
    }
    let sum = pixels
        .iter()
        .fold(Vec2::ZERO, |acc, p| acc + *p);
    Some(sum * (1.0 / pixels.len() as f64))
}

/// Principal axis of the pixel cloud (unoriented).
fn principal_axis(pixels: &[Vec2]) -> Option<Vec2> {
    let m = mean(pixels)?;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pixels {
        let d = *p - m;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    if sxx + syy < 1e-9 {
        return None;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some(Vec2::new(angle.cos(), angle.sin()))
}

/// Flood-fill islands of the window and the number of distinct window
/// edges the union of a given island's pixels touches.
fn islands(view: &WindowView) -> Vec<(usize, [bool; 4])> {
    let (w, h) = (view.w, view.h);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..view.local.len() {
        if !view.local[start] || seen[start] {
            continue;
        }
        let mut size = 0usize;
        let mut edges = [false; 4];
        stack.push(start);
        seen[start] = true;
        while let Some(idx) = stack.pop() {
            size += 1;
            let (x, y) = (idx % w, idx / w);
            if x == 0 {
                edges[0] = true;
            }
            if x == w - 1 {
                edges[1] = true;
            }
            if y == 0 {
                edges[2] = true;
            }
            if y == h - 1 {
                edges[3] = true;
            }
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let nidx = (ny as usize) * w + nx as usize;
                    if view.local[nidx] && !seen[nidx] {
                        seen[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
        out.push((size, edges));
    }
    out
}

/// Classify the node under a window by flood-fill island counting.
pub fn classify_window(
    mask: &CableMask,
    window: &TraceWindow,
    cfg: &PerceptionConfig,
) -> Result<NodeKind, PerceptionError> {
    let view = window_view(mask, window.center_px, window.width);
    let isl = islands(&view);
    match isl.len() {
        0 => Err(PerceptionError::EmptyWindow),
        1 => {
            let (_, edges) = isl[0];
            if edges.iter().filter(|e| **e).count() >= 2 {
                return Ok(NodeKind::Regular);
            }
            // Endpoint, or an undercrossing clipped by the window edge:
            // probe half a window ahead.
            let probe = window.center_px + window.heading * (cfg.window_px / 2.0);
            let probe_view = window_view(mask, probe, window.width);
            if islands(&probe_view).len() <= 1 {
                Ok(NodeKind::Endpoint)
            } else {
                Ok(NodeKind::UnderCrossing)
            }
        }
        _ => Ok(NodeKind::UnderCrossing),
    }
}

/// One traced node before overcrossing refinement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracedNode {
    pub pos: Vec2,
    pub kind: NodeKind,
}

/// Trace one cable from its fixed endpoint to its free endpoint.
///
/// Returns nodes ordered free-to-fixed, matching the cable graph
/// direction. Occlusions are crossed with a frozen heading; the hidden
/// stretch is backfilled with interpolated nodes so consecutive spacing
/// stays within 1.5 steps.
pub fn trace_cable(
    mask: &CableMask,
    fixed_endpoint: Vec2,
    cfg: &PerceptionConfig,
) -> Result<Vec<TracedNode>, PerceptionError> {
    let step = cfg.step_px;
    let width = cfg.window_px;
    let start_view = window_view(mask, fixed_endpoint, width);
    let start_mean = mean(&start_view.pixels).ok_or(PerceptionError::FixedEndpointOffMask)?;
    let axis = principal_axis(&start_view.pixels).ok_or(PerceptionError::FixedEndpointOffMask)?;
    // Orient the axis into the cable: toward the pixel mean, or upward
    // when the window is centered on the mass already.
    let hint = start_mean - fixed_endpoint;
    let mut heading = if hint.norm() > 1.0 {
        if axis.dot(hint) >= 0.0 {
            axis
        } else {
            -axis
        }
    } else if axis.y <= 0.0 {
        axis
    } else {
        -axis
    };

    let mut nodes = vec![TracedNode {
        pos: start_mean,
        kind: NodeKind::Endpoint,
    }];
    let diag = ((mask.width as f64).powi(2) + (mask.height as f64).powi(2)).sqrt();
    let budget = (diag / step * 4.0) as usize;
    // Re-detections of one crossing land within a hop or two; distinct
    // crossings sit at least sqrt(2) d_w apart, so 1.2 d_w separates the
    // two cases with margin on both sides.
    let suppress_radius = 1.2 * width;

    let mut center = start_mean + heading * step;
    let mut hopping = false;
    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > budget {
            return Err(PerceptionError::TraceRunaway);
        }
        let view = window_view(mask, center, width);
        if view.pixels.is_empty() {
            if hopping {
                center = center + heading * step;
                continue;
            }
            return Err(PerceptionError::TraceBroke {
                last: nodes.last().unwrap().pos,
            });
        }
        let window = TraceWindow {
            center_px: center,
            width,
            heading,
        };
        let kind = classify_window(mask, &window, cfg)?;
        let node_mean = mean(&view.pixels).unwrap();
        match kind {
            NodeKind::UnderCrossing => {
                if hopping {
                    // Still straddling the occlusion already recorded.
                    center = center + heading * step;
                    continue;
                }
                let suppressed = nodes.iter().any(|n| {
                    n.kind == NodeKind::UnderCrossing && n.pos.dist(node_mean) < suppress_radius
                });
                push_with_backfill(
                    &mut nodes,
                    TracedNode {
                        pos: node_mean,
                        kind: if suppressed {
                            NodeKind::Regular
                        } else {
                            NodeKind::UnderCrossing
                        },
                    },
                    step,
                );
                hopping = true;
                center = center + heading * step;
            }
            NodeKind::Regular => {
                hopping = false;
                push_with_backfill(
                    &mut nodes,
                    TracedNode {
                        pos: node_mean,
                        kind: NodeKind::Regular,
                    },
                    step,
                );
                if let Some(axis) = principal_axis(&view.pixels) {
                    heading = if axis.dot(heading) >= 0.0 { axis } else { -axis };
                }
                center = node_mean + heading * step;
            }
            NodeKind::Endpoint => {
                push_with_backfill(
                    &mut nodes,
                    TracedNode {
                        pos: node_mean,
                        kind: NodeKind::Endpoint,
                    },
                    step,
                );
                break;
            }
            NodeKind::OverCrossing => unreachable!("classification never yields overcrossings"),
        }
    }
    if nodes.len() < 3 {
        return Err(PerceptionError::CableTooShort);
    }
    nodes.reverse();
    Ok(nodes)
}

/// Append a node, inserting interpolated regular nodes whenever the gap
/// to the previous node exceeds 1.4 steps (occluded stretches).
fn push_with_backfill(nodes: &mut Vec<TracedNode>, node: TracedNode, step: f64) {
    let prev = nodes.last().unwrap().pos;
    let gap = prev.dist(node.pos);
    if gap > 1.4 * step {
        let n = (gap / step).ceil() as usize;
        for i in 1..n {
            nodes.push(TracedNode {
                pos: prev.lerp(node.pos, i as f64 / n as f64),
                kind: NodeKind::Regular,
            });
        }
    }
    nodes.push(node);
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Horizontal stroke: rows `y0..y0+thickness`, columns `x0..x1`.
    fn stroke_mask(w: u32, h: u32, x0: u32, x1: u32, y0: u32, thickness: u32) -> CableMask {
        let mut bits = vec![false; (w * h) as usize];
        for y in y0..y0 + thickness {
            for x in x0..x1 {
                bits[(y * w + x) as usize] = true;
            }
        }
        let pixel_count = bits.iter().filter(|b| **b).count() as u32;
        CableMask {
            cable_id: 0,
            width: w,
            height: h,
            bits,
            pixel_count,
        }
    }

    fn cfg() -> PerceptionConfig {
        PerceptionConfig {
            step_px: 17.0,
            ..PerceptionConfig::default_for_cables(1)
        }
    }

    #[test]
    fn straight_cable_traces_to_collinear_nodes() {
        // 300 px horizontal cable, 8 px thick, step 17.
        let mask = stroke_mask(640, 480, 100, 400, 200, 8);
        let nodes = trace_cable(&mask, Vec2::new(399.0, 204.0), &cfg()).unwrap();
        assert!(
            (16..=20).contains(&nodes.len()),
            "expected ~18 nodes, got {}",
            nodes.len()
        );
        // Free endpoint first, fixed endpoint last, regulars between.
        assert_eq!(nodes.first().unwrap().kind, NodeKind::Endpoint);
        assert_eq!(nodes.last().unwrap().kind, NodeKind::Endpoint);
        for n in &nodes[1..nodes.len() - 1] {
            assert_eq!(n.kind, NodeKind::Regular);
        }
        // Mask rows 200..208 have pixel-center mean y = 204.
        for n in &nodes {
            assert!((n.pos.y - 204.0).abs() <= 1.0, "{:?}", n.pos);
        }
        // The trace ran toward decreasing x; after reversal the free
        // endpoint sits near x = 100.
        assert!(nodes.first().unwrap().pos.x < 130.0);
        assert!(nodes.last().unwrap().pos.x > 370.0);
        // Spacing bound.
        for w in nodes.windows(2) {
            assert!(w[0].pos.dist(w[1].pos) <= 1.5 * 17.0 + 1e-9);
        }
    }

    #[test]
    fn occluded_cable_yields_one_undercrossing() {
        // Horizontal cable with a 14 px occlusion gap in the middle.
        let mut mask = stroke_mask(640, 480, 100, 400, 200, 8);
        for y in 200..208 {
            for x in 243..257 {
                mask.bits[(y * 640 + x) as usize] = false;
            }
        }
        let nodes = trace_cable(&mask, Vec2::new(399.0, 204.0), &cfg()).unwrap();
        let unders: Vec<&TracedNode> = nodes
            .iter()
            .filter(|n| n.kind == NodeKind::UnderCrossing)
            .collect();
        assert_eq!(unders.len(), 1, "{nodes:?}");
        assert!((unders[0].pos.x - 250.0).abs() < 25.0);
        for w in nodes.windows(2) {
            assert!(w[0].pos.dist(w[1].pos) <= 1.5 * 17.0 + 1e-9);
        }
    }

    #[test]
    fn tiny_dot_is_too_short() {
        let mask = stroke_mask(640, 480, 200, 215, 200, 8);
        let r = trace_cable(&mask, Vec2::new(207.0, 204.0), &cfg());
        assert!(matches!(r, Err(PerceptionError::CableTooShort)));
    }

    #[test]
    fn classify_straight_window_is_regular() {
        let mask = stroke_mask(640, 480, 100, 400, 200, 8);
        let window = TraceWindow::new(
            Vec2::new(250.0, 204.0),
            35.0,
            Vec2::new(-1.0, 0.0),
        )
        .unwrap();
        let kind = classify_window(&mask, &window, &cfg()).unwrap();
        assert_eq!(kind, NodeKind::Regular);
    }

    #[test]
    fn classify_split_window_is_undercrossing() {
        let mut mask = stroke_mask(640, 480, 100, 400, 200, 8);
        for y in 200..208 {
            for x in 244..256 {
                mask.bits[(y * 640 + x) as usize] = false;
            }
        }
        let window = TraceWindow::new(
            Vec2::new(250.0, 204.0),
            35.0,
            Vec2::new(-1.0, 0.0),
        )
        .unwrap();
        let kind = classify_window(&mask, &window, &cfg()).unwrap();
        assert_eq!(kind, NodeKind::UnderCrossing);
    }

    #[test]
    fn classify_tip_window_is_endpoint() {
        let mask = stroke_mask(640, 480, 100, 260, 200, 8);
        // Window just past the tip at x = 260, moving along -x means the
        // cable ends behind; probe ahead sees nothing.
        let window = TraceWindow::new(
            Vec2::new(110.0, 204.0),
            35.0,
            Vec2::new(-1.0, 0.0),
        )
        .unwrap();
        let kind = classify_window(&mask, &window, &cfg()).unwrap();
        assert_eq!(kind, NodeKind::Endpoint);
    }

    #[test]
    fn classification_is_deterministic() {
        let mask = stroke_mask(640, 480, 100, 400, 200, 8);
        let window = TraceWindow::new(
            Vec2::new(250.0, 204.0),
            35.0,
            Vec2::new(-1.0, 0.0),
        )
        .unwrap();
        let a = classify_window(&mask, &window, &cfg()).unwrap();
        let b = classify_window(&mask, &window, &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_undercrossing_detections_are_suppressed() {
        // Two occlusion gaps 40 px apart, closer than sqrt(2) d_w: the
        // second detection must demote to regular.
        let mut mask = stroke_mask(640, 480, 100, 400, 200, 8);
        for y in 200..208 {
            for x in 241..253 {
                mask.bits[(y * 640 + x) as usize] = false;
            }
            for x in 281..293 {
                mask.bits[(y * 640 + x) as usize] = false;
            }
        }
        let nodes = trace_cable(&mask, Vec2::new(399.0, 204.0), &cfg()).unwrap();
        let unders = nodes
            .iter()
            .filter(|n| n.kind == NodeKind::UnderCrossing)
            .count();
        assert_eq!(unders, 1, "{nodes:?}");
    }
}
