//! Sign-pattern labels for post-buckling shapes of the four-segment chain.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Joint angles smaller than this are structural zeros.
pub const SIGN_DEAD_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapeLabel {
    U,
    Z,
    ZU,
    Straight,
    Other,
}

impl fmt::Display for ShapeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ShapeLabel::U => "U",
            ShapeLabel::Z => "Z",
            ShapeLabel::ZU => "ZU",
            ShapeLabel::Straight => "Straight",
            ShapeLabel::Other => "Other",
        };
        f.write_str(s)
    }
}

/// Signs of the angles as `+`, `-` or `0` (inside the dead band).
pub fn sign_pattern(q: &[f64]) -> String {
    q.iter()
        .map(|&x| {
            if x.abs() < SIGN_DEAD_BAND {
                '0'
            } else if x > 0.0 {
                '+'
            } else {
                '-'
            }
        })
        .collect()
}

/// Named shape of a four-angle configuration. A pattern and its mirror map
/// to the same label; any other length, or a partial zero, gives `Other`.
pub fn shape_label(q: &[f64]) -> ShapeLabel {
    if q.iter().all(|x| x.abs() < SIGN_DEAD_BAND) {
        return ShapeLabel::Straight;
    }
    if q.len() != 4 {
        return ShapeLabel::Other;
    }
    match sign_pattern(q).as_str() {
        "-+++" | "+---" => ShapeLabel::U,
        "-+-+" | "+-+-" => ShapeLabel::Z,
        "-+--" | "+-++" => ShapeLabel::ZU,
        _ => ShapeLabel::Other,
    }
}
