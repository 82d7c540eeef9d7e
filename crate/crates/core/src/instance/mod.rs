//! Benchmark instances: station geometry, rates and costs, their seeded
//! generation and a JSON file format.
//!
//! Generated instances follow the benchmark recipe: per-station hourly
//! demand drawn uniformly, split evenly over the other stations; trip time
//! `3/60 + d/25` hours; margin and rebalancing cost of $0.3 per km; vehicles
//! at $1; station costs drawn from `U[1000, 3000]`; service level 0.5.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`. A draw
//! `U[lo, hi]` consumes one `next_u64` as `lo + (hi - lo) * (x >> 11) / 2^53`.
//! Draws happen in a fixed order: station demand totals by ascending index,
//! then station costs by ascending index.

mod layout;

use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use layout::{Balance, Layout, MAX_STATIONS};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("{layout} layout cannot place {stations} stations; supported counts: {supported:?}")]
    UnsupportedSize { layout: Layout, stations: usize, supported: Vec<usize> },
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: parse error: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid instance field `{field}`: {message}")]
    Validation { field: &'static str, message: String },
}

/// Parameters for one generated benchmark instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub layout: Layout,
    pub stations: usize,
    pub balance: Balance,
    pub seed: u64,
    /// Lattice spacing / ring radius step in km.
    pub spacing: f64,
}

impl GenSpec {
    pub fn new(layout: Layout, stations: usize, balance: Balance, seed: u64) -> Self {
        Self { layout, stations, balance, seed, spacing: 1.0 }
    }

    /// `Q-9-BAL-s1` style identifier.
    pub fn name(&self) -> String {
        format!("{}-{}-{}-s{}", self.layout, self.stations, self.balance, self.seed)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.stations < 2 {
            return Err(InstanceError::InvalidSpec(format!("need at least 2 stations, got {}", self.stations)));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(InstanceError::InvalidSpec(format!("spacing must be positive, got {}", self.spacing)));
        }
        Ok(())
    }

    /// The eleven benchmark configurations (seven balanced, four imbalanced).
    pub fn benchmark_family(seed: u64) -> Vec<GenSpec> {
        use Balance::*;
        use Layout::*;
        [
            (Circular, 7, Balanced),
            (Hexagonal, 7, Balanced),
            (Quadratic, 9, Balanced),
            (Quadratic, 16, Balanced),
            (Quadratic, 16, Imbalanced),
            (Circular, 19, Balanced),
            (Circular, 19, Imbalanced),
            (Hexagonal, 19, Balanced),
            (Hexagonal, 19, Imbalanced),
            (Quadratic, 25, Balanced),
            (Quadratic, 25, Imbalanced),
        ]
        .into_iter()
        .map(|(layout, r, balance)| GenSpec::new(layout, r, balance, seed))
        .collect()
    }
}

/// Station geometry, demand and cost data. Matrices are `R × R` and indexed
/// `[origin][destination]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    #[serde(rename = "R")]
    pub stations: usize,
    pub coords: Vec<[f64; 2]>,
    /// Arrival rates λ (customers/hour), zero diagonal.
    pub lambda: Vec<Vec<f64>>,
    /// Return rates μ = 1 / travel time (1/hour).
    pub mu: Vec<Vec<f64>>,
    /// Contribution δ per served trip ($).
    pub margin: Vec<Vec<f64>>,
    /// Cost per empty rebalancing trip ($).
    pub rebalance_cost: Vec<Vec<f64>>,
    /// Opening cost per station ($).
    pub station_cost: Vec<f64>,
    /// Procurement cost per vehicle ($).
    pub vehicle_cost: f64,
    /// Service level α in (0, 1).
    pub service_level: f64,
    pub budget: f64,
    pub name: String,
    pub seed: u64,
}

const TRIP_OVERHEAD_HOURS: f64 = 3.0 / 60.0;
const SPEED_KMH: f64 = 25.0;
const MARGIN_PER_KM: f64 = 0.3;
const REBALANCE_PER_KM: f64 = 0.3;
const VEHICLE_COST: f64 = 1.0;
const SERVICE_LEVEL: f64 = 0.5;

struct Uniform(ChaCha8Rng);

impl Uniform {
    fn draw(&mut self, lo: f64, hi: f64) -> f64 {
        let unit = (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + (hi - lo) * unit
    }
}

/// Stations whose distance to the centroid is at most the median distance.
pub fn center_stations(coords: &[[f64; 2]]) -> Vec<bool> {
    let n = coords.len() as f64;
    let cx = coords.iter().map(|c| c[0]).sum::<f64>() / n;
    let cy = coords.iter().map(|c| c[1]).sum::<f64>() / n;
    let dist: Vec<f64> = coords.iter().map(|c| (c[0] - cx).hypot(c[1] - cy)).collect();
    let mut sorted = dist.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
    dist.iter().map(|&d| d <= median + 1e-12).collect()
}

/// Generates the instance described by `spec`; a pure function of `spec`.
pub fn generate(spec: &GenSpec) -> Result<Instance, InstanceError> {
    spec.validate()?;
    let r = spec.stations;
    let coords = spec.layout.coordinates(r, spec.spacing)?;
    let mut rng = Uniform(ChaCha8Rng::seed_from_u64(spec.seed));

    let center = center_stations(&coords);
    let totals: Vec<f64> = (0..r)
        .map(|i| match (spec.balance, center[i]) {
            (Balance::Balanced, _) => rng.draw(80.0, 120.0),
            (Balance::Imbalanced, true) => rng.draw(110.0, 140.0),
            (Balance::Imbalanced, false) => rng.draw(60.0, 90.0),
        })
        .collect();
    let station_cost: Vec<f64> = (0..r).map(|_| rng.draw(1000.0, 3000.0)).collect();

    let dist = |i: usize, j: usize| (coords[i][0] - coords[j][0]).hypot(coords[i][1] - coords[j][1]);
    let matrix = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..r).map(|i| (0..r).map(|j| f(i, j)).collect()).collect()
    };
    let lambda = matrix(&|i, j| if i == j { 0.0 } else { totals[i] / (r - 1) as f64 });
    let mu = matrix(&|i, j| 1.0 / (TRIP_OVERHEAD_HOURS + dist(i, j) / SPEED_KMH));
    let margin = matrix(&|i, j| MARGIN_PER_KM * dist(i, j));
    let rebalance_cost = matrix(&|i, j| REBALANCE_PER_KM * dist(i, j));

    let instance = Instance {
        stations: r,
        coords,
        lambda,
        mu,
        margin,
        rebalance_cost,
        station_cost,
        vehicle_cost: VEHICLE_COST,
        service_level: SERVICE_LEVEL,
        budget: if r >= 10 { 10_000.0 } else { 500.0 * r as f64 },
        name: spec.name(),
        seed: spec.seed,
    };
    instance.validate()?;
    Ok(instance)
}

impl Instance {
    /// Vehicles parked at each open station: α / (1 − α).
    pub fn safety_stock(&self) -> f64 {
        self.service_level / (1.0 - self.service_level)
    }

    /// Occupied vehicles in transit on `i → j`: λ_ij / μ_ij.
    pub fn occupied_flow(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.lambda[i][j] / self.mu[i][j]
        }
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let r = self.stations;
        let fail = |field: &'static str, message: String| Err(InstanceError::Validation { field, message });
        if !(2..=MAX_STATIONS).contains(&r) {
            return fail("R", format!("station count {r} outside 2..={MAX_STATIONS}"));
        }
        if self.coords.len() != r {
            return fail("coords", format!("expected {r} entries, found {}", self.coords.len()));
        }
        if self.coords.iter().flatten().any(|c| !c.is_finite()) {
            return fail("coords", "non-finite coordinate".into());
        }
        let matrices: [(&'static str, &Vec<Vec<f64>>); 4] = [
            ("lambda", &self.lambda),
            ("mu", &self.mu),
            ("margin", &self.margin),
            ("rebalance_cost", &self.rebalance_cost),
        ];
        for (field, m) in matrices {
            if m.len() != r || m.iter().any(|row| row.len() != r) {
                return fail(field, format!("expected a {r}x{r} matrix"));
            }
            for (i, row) in m.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if !v.is_finite() {
                        return fail(field, format!("entry [{i}][{j}] is not finite"));
                    }
                    let ok = match field {
                        "mu" => i == j || v > 0.0,
                        _ => v >= 0.0,
                    };
                    if !ok {
                        return fail(field, format!("entry [{i}][{j}] = {v} out of range"));
                    }
                }
            }
        }
        for i in 0..r {
            if self.lambda[i][i] != 0.0 {
                return fail("lambda", format!("diagonal entry [{i}][{i}] = {} must be 0", self.lambda[i][i]));
            }
        }
        if self.station_cost.len() != r {
            return fail("station_cost", format!("expected {r} entries, found {}", self.station_cost.len()));
        }
        if let Some((i, c)) = self.station_cost.iter().enumerate().find(|(_, c)| !(c.is_finite() && **c > 0.0)) {
            return fail("station_cost", format!("entry {i} = {c} must be positive"));
        }
        if !(self.vehicle_cost.is_finite() && self.vehicle_cost > 0.0) {
            return fail("vehicle_cost", format!("{} must be positive", self.vehicle_cost));
        }
        if !(self.service_level > 0.0 && self.service_level < 1.0) {
            return fail("service_level", format!("{} must lie in (0, 1)", self.service_level));
        }
        if !(self.budget.is_finite() && self.budget >= 0.0) {
            return fail("budget", format!("{} must be non-negative", self.budget));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self, InstanceError> {
        let instance: Instance = serde_json::from_str(text)
            .map_err(|e| InstanceError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        instance.validate()?;
        Ok(instance)
    }
}

pub fn save(instance: &Instance, path: &Path) -> Result<(), InstanceError> {
    fs::write(path, instance.to_json()).map_err(|source| InstanceError::Io { path: path.to_path_buf(), source })
}

pub fn load(path: &Path) -> Result<Instance, InstanceError> {
    let text = fs::read_to_string(path).map_err(|source| InstanceError::Io { path: path.to_path_buf(), source })?;
    Instance::from_json(&text, path)
}
