//! Cable state reconstruction from a color raster.
//!
//! The pipeline segments the image into per-cable binary masks by HSV
//! thresholding, traces each mask from its known fixed endpoint with a
//! sliding window, then pairs every undercrossing with the nearest
//! regular node on another cable to mark the overcrossings and build the
//! crossing registry.

mod color;
mod trace;

pub use color::{remove_small_components, threshold, CableMask, ColorRange};
pub use trace::{classify_window, trace_cable, TraceWindow, TracedNode};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::graph::{assemble_state, CableState, GraphError, NodeKind, ProtoNode};
use crate::palette;

/// Perception parameters: window geometry, color palette and the known
/// fixed endpoint of every cable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceptionConfig {
    /// Sliding window side length, pixels.
    pub window_px: f64,
    /// Slide step; half the window by default so windows overlap.
    pub step_px: f64,
    /// Cable color names with their HSV acceptance ranges; index is the
    /// cable id.
    pub palette: Vec<(String, ColorRange)>,
    /// Fixed endpoint pixel position per cable id.
    pub fixed_endpoints: Vec<Vec2>,
    /// Connected components smaller than this are segmentation noise.
    pub noise_min_px: u32,
}

impl PerceptionConfig {
    pub fn default_for_cables(n: usize) -> Self {
        let palette = palette::CABLE_COLORS
            .iter()
            .take(n)
            .map(|(name, hue)| (name.to_string(), ColorRange::around_hue(*hue, 18.0)))
            .collect();
        PerceptionConfig {
            window_px: 35.0,
            step_px: 17.5,
            palette,
            fixed_endpoints: Vec::new(),
            noise_min_px: 20,
        }
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.step_px <= 0.0 || self.step_px > self.window_px {
            return Err(PerceptionError::BadConfig(
                "step must be positive and no larger than the window".into(),
            ));
        }
        for (i, (name_a, a)) in self.palette.iter().enumerate() {
            for (name_b, b) in self.palette.iter().skip(i + 1) {
                if a.overlaps(b) {
                    return Err(PerceptionError::BadConfig(format!(
                        "palette colors {name_a} and {name_b} overlap"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("cable not visible: {0}")]
    CableNotVisible(String),
    #[error("fixed endpoint lies off the cable mask")]
    FixedEndpointOffMask,
    #[error("trace broke at ({}, {})", last.x, last.y)]
    TraceBroke { last: Vec2 },
    #[error("trace runaway: step budget exhausted")]
    TraceRunaway,
    #[error("cable too short")]
    CableTooShort,
    #[error("empty window")]
    EmptyWindow,
    #[error("orphan undercrossing at ({}, {}) on cable {cable}", pos.x, pos.y)]
    OrphanUndercrossing { cable: u32, pos: Vec2 },
    #[error("cable {color}: {source}")]
    Cable {
        color: String,
        #[source]
        source: Box<PerceptionError>,
    },
    #[error("state invariant violated: {0}")]
    State(#[from] GraphError),
    #[error("bad perception config: {0}")]
    BadConfig(String),
}

/// Segment the image into one mask per palette color.
pub fn segment_by_color(
    img: &RgbImage,
    cfg: &PerceptionConfig,
) -> Result<Vec<CableMask>, PerceptionError> {
    cfg.validate()?;
    let mut masks = Vec::with_capacity(cfg.palette.len());
    for (i, (name, range)) in cfg.palette.iter().enumerate() {
        let mut mask = threshold(img, i as u32, range);
        remove_small_components(&mut mask, cfg.noise_min_px);
        if mask.pixel_count == 0 {
            return Err(PerceptionError::CableNotVisible(name.clone()));
        }
        masks.push(mask);
    }
    Ok(masks)
}

/// A traced cable before overcrossing refinement.
#[derive(Clone, Debug)]
pub struct TracedCable {
    pub cable_id: u32,
    pub color: String,
    pub nodes: Vec<TracedNode>,
}

/// Convert undercrossing marks into paired overcrossings and assemble
/// the cable state.
///
/// For each undercrossing the nearest regular node on any other cable
/// becomes the paired overcrossing, taking the same id and coordinates.
/// A missing neighbor within sqrt(2) d_w is a perception failure.
pub fn refine_overcrossings(
    traced: Vec<TracedCable>,
    cfg: &PerceptionConfig,
) -> Result<CableState, PerceptionError> {
    let max_pair_dist = (2.0f64).sqrt() * cfg.window_px;
    // Proto nodes, mutable while pairing.
    let mut protos: Vec<Vec<ProtoNode>> = traced
        .iter()
        .map(|t| {
            t.nodes
                .iter()
                .map(|n| ProtoNode::plain(n.pos, n.kind))
                .collect()
        })
        .collect();

    let mut crossing_key = 0usize;
    for ci in 0..traced.len() {
        for ni in 0..protos[ci].len() {
            if protos[ci][ni].kind != NodeKind::UnderCrossing {
                continue;
            }
            let under_pos = protos[ci][ni].pos;
            // Nearest unused regular node on any other cable.
            let mut best: Option<(usize, usize, f64)> = None;
            for (cj, cable) in protos.iter().enumerate() {
                if cj == ci {
                    continue;
                }
                for (nj, node) in cable.iter().enumerate() {
                    if node.kind != NodeKind::Regular || node.crossing_key.is_some() {
                        continue;
                    }
                    let d = node.pos.dist(under_pos);
                    if best.map_or(true, |(_, _, bd)| d < bd) {
                        best = Some((cj, nj, d));
                    }
                }
            }
            match best {
                Some((cj, nj, d)) if d <= max_pair_dist => {
                    protos[ci][ni].crossing_key = Some(crossing_key);
                    protos[cj][nj] = ProtoNode {
                        pos: under_pos,
                        kind: NodeKind::OverCrossing,
                        crossing_key: Some(crossing_key),
                    };
                    crossing_key += 1;
                }
                _ => {
                    return Err(PerceptionError::OrphanUndercrossing {
                        cable: traced[ci].cable_id,
                        pos: under_pos,
                    });
                }
            }
        }
    }

    let cables: Vec<(u32, String, Vec<ProtoNode>)> = traced
        .iter()
        .zip(protos)
        .map(|(t, p)| (t.cable_id, t.color.clone(), p))
        .collect();
    let state = assemble_state(cables)?;
    state.validate_crossing_spacing(max_pair_dist)?;
    Ok(state)
}

/// Full perception: segmentation, tracing, refinement, validation.
pub fn build_state(img: &RgbImage, cfg: &PerceptionConfig) -> Result<CableState, PerceptionError> {
    if cfg.fixed_endpoints.len() < cfg.palette.len() {
        return Err(PerceptionError::BadConfig(format!(
            "{} fixed endpoints for {} palette colors",
            cfg.fixed_endpoints.len(),
            cfg.palette.len()
        )));
    }
    let masks = segment_by_color(img, cfg)?;
    let mut traced = Vec::with_capacity(masks.len());
    for (i, mask) in masks.iter().enumerate() {
        let color = cfg.palette[i].0.clone();
        let nodes = trace_cable(mask, cfg.fixed_endpoints[i], cfg).map_err(|e| {
            PerceptionError::Cable {
                color: color.clone(),
                source: Box::new(e),
            }
        })?;
        traced.push(TracedCable {
            cable_id: i as u32,
            color,
            nodes,
        });
    }
    refine_overcrossings(traced, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traced_straight(cable_id: u32, color: &str, y: f64, marks: &[(f64, NodeKind)]) -> TracedCable {
        TracedCable {
            cable_id,
            color: color.into(),
            nodes: marks
                .iter()
                .map(|(x, kind)| TracedNode {
                    pos: Vec2::new(*x, y),
                    kind: *kind,
                })
                .collect(),
        }
    }

    #[test]
    fn refine_pairs_the_geometrically_correct_cables() {
        use NodeKind::*;
        // Vertical cable 1 passes over horizontal cable 0 at (100, 100).
        let a = traced_straight(
            0,
            "red",
            100.0,
            &[
                (0.0, Endpoint),
                (50.0, Regular),
                (100.0, UnderCrossing),
                (150.0, Regular),
                (200.0, Endpoint),
            ],
        );
        let b = TracedCable {
            cable_id: 1,
            color: "blue".into(),
            nodes: [0.0, 55.0, 103.0, 155.0, 200.0]
                .iter()
                .enumerate()
                .map(|(i, y)| TracedNode {
                    pos: Vec2::new(100.0 + (i as f64) * 0.5, *y),
                    kind: if i == 0 || i == 4 { Endpoint } else { Regular },
                })
                .collect(),
        };
        let cfg = PerceptionConfig::default_for_cables(2);
        let state = refine_overcrossings(vec![a, b], &cfg).unwrap();
        assert_eq!(state.count_crossings(), 1);
        let reg = state.crossings.values().next().unwrap();
        assert_eq!(reg.over_cable, 1);
        assert_eq!(reg.under_cable, 0);
        // Shared position: the undercrossing's coordinates.
        assert_eq!(reg.pos_px, Vec2::new(100.0, 100.0));
        state.validate().unwrap();
    }

    #[test]
    fn refine_without_undercrossings_is_identity() {
        use NodeKind::*;
        let a = traced_straight(
            0,
            "red",
            100.0,
            &[(0.0, Endpoint), (50.0, Regular), (100.0, Endpoint)],
        );
        let b = traced_straight(
            1,
            "blue",
            300.0,
            &[(0.0, Endpoint), (50.0, Regular), (100.0, Endpoint)],
        );
        let cfg = PerceptionConfig::default_for_cables(2);
        let state = refine_overcrossings(vec![a, b], &cfg).unwrap();
        assert_eq!(state.count_crossings(), 0);
        assert!(state
            .graphs
            .iter()
            .all(|g| g.nodes().iter().all(|n| !n.kind.is_crossing())));
    }

    #[test]
    fn orphan_undercrossing_is_an_error() {
        use NodeKind::*;
        let a = traced_straight(
            0,
            "red",
            100.0,
            &[
                (0.0, Endpoint),
                (50.0, Regular),
                (100.0, UnderCrossing),
                (150.0, Regular),
                (200.0, Endpoint),
            ],
        );
        // The other cable is far away.
        let b = traced_straight(
            1,
            "blue",
            400.0,
            &[(0.0, Endpoint), (50.0, Regular), (100.0, Endpoint)],
        );
        let cfg = PerceptionConfig::default_for_cables(2);
        let r = refine_overcrossings(vec![a, b], &cfg);
        assert!(matches!(
            r,
            Err(PerceptionError::OrphanUndercrossing { cable: 0, .. })
        ));
    }

    #[test]
    fn segment_missing_color_names_it() {
        let img = RgbImage::from_pixel(64, 48, image::Rgb([200, 200, 200]));
        let mut cfg = PerceptionConfig::default_for_cables(2);
        cfg.palette[1].0 = "yellow".into();
        let r = segment_by_color(&img, &cfg);
        match r {
            Err(PerceptionError::CableNotVisible(color)) => assert_eq!(color, "red"),
            other => panic!("expected cable-not-visible, got {other:?}"),
        }
    }

    #[test]
    fn masks_are_disjoint_after_thresholding() {
        let mut img = RgbImage::from_pixel(64, 48, image::Rgb([200, 200, 200]));
        for x in 0..30 {
            img.put_pixel(x, 10, image::Rgb(crate::palette::cable_rgb(0)));
            img.put_pixel(x, 30, image::Rgb(crate::palette::cable_rgb(1)));
        }
        let cfg = PerceptionConfig::default_for_cables(2);
        let masks = segment_by_color(&img, &cfg).unwrap();
        for i in 0..masks[0].bits.len() {
            assert!(!(masks[0].bits[i] && masks[1].bits[i]));
        }
    }
}
