//! Shared cable color palette: evenly spaced hues so HSV thresholding
//! separates the cables cleanly on synthetic renders.

/// Named hues, 45 degrees apart. Index doubles as the default cable id.
pub const CABLE_COLORS: [(&str, f64); 8] = [
    ("red", 0.0),
    ("orange", 45.0),
    ("lime", 90.0),
    ("green", 135.0),
    ("cyan", 180.0),
    ("blue", 225.0),
    ("purple", 270.0),
    ("magenta", 315.0),
];

pub const CABLE_SATURATION: f64 = 0.8;
pub const CABLE_VALUE: f64 = 0.85;

/// RGB stroke color for cable index `i`.
pub fn cable_rgb(i: usize) -> [u8; 3] {
    let (_, hue) = CABLE_COLORS[i % CABLE_COLORS.len()];
    hsv_to_rgb(hue, CABLE_SATURATION, CABLE_VALUE)
}

pub fn cable_name(i: usize) -> &'static str {
    CABLE_COLORS[i % CABLE_COLORS.len()].0
}

/// Standard HSV to RGB, h in degrees, s and v in [0, 1].
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    ]
}

/// Standard RGB to HSV, returning (h degrees, s, v).
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let r = rgb[0] as f64 / 255.0;
    let g = rgb[1] as f64 / 255.0;
    let b = rgb[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta < 1e-12 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max < 1e-12 { 0.0 } else { delta / max };
    (h, s, max)
}
