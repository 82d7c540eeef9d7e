use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::InstanceError;

/// Largest station count representable by a state bitmask.
pub const MAX_STATIONS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    Circular,
    Hexagonal,
    Quadratic,
}

impl Layout {
    pub fn code(self) -> &'static str {
        match self {
            Layout::Circular => "C",
            Layout::Hexagonal => "H",
            Layout::Quadratic => "Q",
        }
    }

    /// Station counts this layout can place.
    pub fn supported_sizes(self) -> Vec<usize> {
        match self {
            Layout::Quadratic => (2..).map(|k| k * k).take_while(|&n| n <= MAX_STATIONS).collect(),
            Layout::Circular | Layout::Hexagonal => {
                (1..).map(|k| 1 + 3 * k * (k + 1)).take_while(|&n| n <= MAX_STATIONS).collect()
            }
        }
    }

    /// Station coordinates in km, center station first for ring layouts,
    /// row-major for the grid.
    pub fn coordinates(self, stations: usize, spacing: f64) -> Result<Vec<[f64; 2]>, InstanceError> {
        if !self.supported_sizes().contains(&stations) {
            return Err(InstanceError::UnsupportedSize {
                layout: self,
                stations,
                supported: self.supported_sizes(),
            });
        }
        Ok(match self {
            Layout::Quadratic => {
                let side = (1..=stations).find(|k| k * k == stations).unwrap_or(1);
                (0..stations)
                    .map(|i| [(i % side) as f64 * spacing, (i / side) as f64 * spacing])
                    .collect()
            }
            Layout::Circular => {
                let mut pts = vec![[0.0, 0.0]];
                let mut ring = 1;
                while pts.len() < stations {
                    let count = 6 * ring;
                    let radius = ring as f64 * spacing;
                    for p in 0..count {
                        let angle = 2.0 * PI * p as f64 / count as f64;
                        pts.push([radius * angle.cos(), radius * angle.sin()]);
                    }
                    ring += 1;
                }
                pts
            }
            Layout::Hexagonal => {
                // Axial hex coordinates, walked ring by ring.
                const DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
                let to_xy = |q: i64, r: i64| {
                    [spacing * (q as f64 + r as f64 / 2.0), spacing * (3f64.sqrt() / 2.0) * r as f64]
                };
                let mut pts = vec![[0.0, 0.0]];
                let mut ring = 1i64;
                while pts.len() < stations {
                    let (mut q, mut r) = (DIRS[4].0 * ring, DIRS[4].1 * ring);
                    for dir in DIRS {
                        for _ in 0..ring {
                            pts.push(to_xy(q, r));
                            q += dir.0;
                            r += dir.1;
                        }
                    }
                    ring += 1;
                }
                pts
            }
        })
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Layout {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "c" | "circular" => Ok(Layout::Circular),
            "h" | "hexagonal" => Ok(Layout::Hexagonal),
            "q" | "quadratic" => Ok(Layout::Quadratic),
            _ => Err(InstanceError::InvalidSpec(format!("unknown layout {s:?} (expected C, H or Q)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Balance {
    #[serde(rename = "BAL")]
    Balanced,
    #[serde(rename = "IMB")]
    Imbalanced,
}

impl Balance {
    pub fn code(self) -> &'static str {
        match self {
            Balance::Balanced => "BAL",
            Balance::Imbalanced => "IMB",
        }
    }
}

impl fmt::Display for Balance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Balance {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BAL" | "BALANCED" => Ok(Balance::Balanced),
            "IMB" | "IMBALANCED" => Ok(Balance::Imbalanced),
            _ => Err(InstanceError::InvalidSpec(format!("unknown balance {s:?} (expected BAL or IMB)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    #[test]
    fn hexagonal_neighbours_sit_at_lattice_spacing() {
        let pts = Layout::Hexagonal.coordinates(19, 1.5).unwrap();
        for p in &pts[1..7] {
            assert!((dist(pts[0], *p) - 1.5).abs() < 1e-12);
        }
        let outer: Vec<f64> = pts[7..].iter().map(|p| dist(pts[0], *p)).collect();
        assert_eq!(outer.iter().filter(|d| (**d - 3.0).abs() < 1e-12).count(), 6);
        assert_eq!(outer.iter().filter(|d| (**d - 1.5 * 3f64.sqrt()).abs() < 1e-12).count(), 6);
        for i in 0..pts.len() {
            for j in 0..i {
                assert!(dist(pts[i], pts[j]) > 1.5 - 1e-9);
            }
        }
    }

    #[test]
    fn circular_rings() {
        let pts = Layout::Circular.coordinates(19, 1.0).unwrap();
        assert_eq!(pts.len(), 19);
        assert!(pts[1..7].iter().all(|p| (dist(*p, [0.0, 0.0]) - 1.0).abs() < 1e-12));
        assert!(pts[7..].iter().all(|p| (dist(*p, [0.0, 0.0]) - 2.0).abs() < 1e-12));
    }

    #[test]
    fn unsupported_counts_name_alternatives() {
        let err = Layout::Circular.coordinates(9, 1.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("7") && msg.contains("19"), "{msg}");
        assert!(Layout::Quadratic.coordinates(10, 1.0).is_err());
    }
}
