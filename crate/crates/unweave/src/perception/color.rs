//! HSV color thresholding and mask cleanup.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::palette::rgb_to_hsv;

/// HSV acceptance window for one cable color. The hue window may wrap
/// around 360.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorRange {
    pub hue_lo_deg: f64,
    pub hue_hi_deg: f64,
    pub sat: (f64, f64),
    pub val: (f64, f64),
}

impl ColorRange {
    /// Window of `half_width` degrees either side of a palette hue.
    pub fn around_hue(hue_deg: f64, half_width: f64) -> Self {
        ColorRange {
            hue_lo_deg: (hue_deg - half_width).rem_euclid(360.0),
            hue_hi_deg: (hue_deg + half_width).rem_euclid(360.0),
            sat: (0.35, 1.0),
            val: (0.3, 1.0),
        }
    }

    pub fn contains(&self, h: f64, s: f64, v: f64) -> bool {
        let hue_ok = if self.hue_lo_deg <= self.hue_hi_deg {
            h >= self.hue_lo_deg && h <= self.hue_hi_deg
        } else {
            h >= self.hue_lo_deg || h <= self.hue_hi_deg
        };
        hue_ok && s >= self.sat.0 && s <= self.sat.1 && v >= self.val.0 && v <= self.val.1
    }

    fn hue_window(&self) -> (f64, f64) {
        if self.hue_lo_deg <= self.hue_hi_deg {
            (self.hue_lo_deg, self.hue_hi_deg)
        } else {
            (self.hue_lo_deg, self.hue_hi_deg + 360.0)
        }
    }

    /// Two ranges are disjoint when their hue windows cannot both accept
    /// one hue (ignoring the sat/val dimensions, conservatively).
    pub fn overlaps(&self, other: &ColorRange) -> bool {
        let (a0, a1) = self.hue_window();
        let (b0, b1) = other.hue_window();
        for shift in [-360.0, 0.0, 360.0] {
            if a0 <= b1 + shift && b0 + shift <= a1 {
                return true;
            }
        }
        false
    }
}

/// Binary raster of one cable's pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct CableMask {
    pub cable_id: u32,
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
    pub pixel_count: u32,
}

impl CableMask {
    pub fn get(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.bits[(y as usize) * self.width as usize + x as usize]
    }
}

/// Threshold an image against one color range.
pub fn threshold(img: &RgbImage, cable_id: u32, range: &ColorRange) -> CableMask {
    let (w, h) = (img.width(), img.height());
    let mut bits = vec![false; (w * h) as usize];
    for (i, px) in img.pixels().enumerate() {
        let (hh, ss, vv) = rgb_to_hsv(px.0);
        if range.contains(hh, ss, vv) {
            bits[i] = true;
        }
    }
    let pixel_count = bits.iter().filter(|b| **b).count() as u32;
    CableMask {
        cable_id,
        width: w,
        height: h,
        bits,
        pixel_count,
    }
}

/// Drop 8-connected components smaller than `min_px` pixels.
pub fn remove_small_components(mask: &mut CableMask, min_px: u32) {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut seen = vec![false; mask.bits.len()];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..mask.bits.len() {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        component.clear();
        stack.push(start);
        seen[start] = true;
        while let Some(idx) = stack.pop() {
            component.push(idx);
            let (x, y) = ((idx % w as usize) as i64, (idx / w as usize) as i64);
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let nidx = (ny * w + nx) as usize;
                    if mask.bits[nidx] && !seen[nidx] {
                        seen[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
        if (component.len() as u32) < min_px {
            for idx in &component {
                mask.bits[*idx] = false;
            }
        }
    }
    mask.pixel_count = mask.bits.iter().filter(|b| **b).count() as u32;
}
