use crate::instance::Instance;
use crate::lp::{LexicographicProgram, LinearProgram, Objective, Relation, Sense};

use super::StateKey;

/// The profit LP of one open set together with its variable layout.
///
/// With `m` open stations (in ascending index order) the variables are
/// `e[a][b]` for every ordered pair of open stations, diagonal included,
/// followed by `f[a][b]` for the off-diagonal pairs.
#[derive(Clone, Debug)]
pub struct StateLp {
    pub program: LexicographicProgram<f64>,
    pub stations: Vec<usize>,
}

impl StateLp {
    pub fn open_count(&self) -> usize {
        self.stations.len()
    }

    pub fn e(&self, a: usize, b: usize) -> usize {
        e_index(self.stations.len(), a, b)
    }

    pub fn f(&self, a: usize, b: usize) -> usize {
        f_index(self.stations.len(), a, b)
    }

    pub fn num_vars(&self) -> usize {
        let m = self.stations.len();
        m * m + m * (m - 1)
    }

    /// Scatters a solution vector into `R × R` full and empty flow matrices.
    pub fn flows(&self, r: usize, values: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut full = vec![vec![0.0; r]; r];
        let mut empty = vec![vec![0.0; r]; r];
        for (a, &i) in self.stations.iter().enumerate() {
            for (b, &j) in self.stations.iter().enumerate() {
                empty[i][j] = values[self.e(a, b)];
                if a != b {
                    full[i][j] = values[self.f(a, b)];
                }
            }
        }
        (full, empty)
    }
}

fn e_index(m: usize, a: usize, b: usize) -> usize {
    a * m + b
}

fn f_index(m: usize, a: usize, b: usize) -> usize {
    debug_assert_ne!(a, b);
    m * m + a * (m - 1) + if b > a { b - 1 } else { b }
}

/// Builds the lexicographic profit / acquisition-cost LP for the open set `s`.
///
/// Stage one maximizes `α(Σ λδ − Σ c^r μ e)`; stage two minimizes
/// `c^p Σ(e + f) + Σ c^b` over open stations.
pub fn build_state_lp(instance: &Instance, s: StateKey) -> StateLp {
    debug_assert!(!s.is_empty());
    let stations: Vec<usize> = s.stations().collect();
    let m = stations.len();
    let alpha = instance.service_level;
    let st = &stations;
    let n = m * m + m * (m - 1);
    let e = |a, b| e_index(m, a, b);
    let f = |a, b| f_index(m, a, b);

    let mut profit = vec![0.0; n];
    let mut revenue = 0.0;
    for (a, &i) in st.iter().enumerate() {
        for (b, &j) in st.iter().enumerate() {
            revenue += instance.lambda[i][j] * instance.margin[i][j];
            profit[e(a, b)] = -alpha * instance.rebalance_cost[i][j] * instance.mu[i][j];
        }
    }
    let mut lp = LinearProgram::new(Objective::new(Sense::Maximize, profit).with_offset(alpha * revenue));

    for (a, &i) in st.iter().enumerate() {
        for (b, &j) in st.iter().enumerate() {
            if a != b {
                lp.add_constraint(vec![(f(a, b), instance.mu[i][j])], Relation::Eq, instance.lambda[i][j]);
            }
        }
    }
    if m > 1 {
        for (a, &i) in st.iter().enumerate() {
            let inflow: Vec<(usize, f64)> = st
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(b, &j)| (e(b, a), instance.mu[j][i]))
                .collect();
            let departures: f64 = st.iter().map(|&j| instance.lambda[i][j]).sum();
            lp.add_constraint(inflow, Relation::Le, departures);
        }
        for (a, &i) in st.iter().enumerate() {
            let mut terms = Vec::with_capacity(2 * (m - 1));
            let mut rhs = 0.0;
            for (b, &j) in st.iter().enumerate() {
                if a == b {
                    continue;
                }
                terms.push((e(a, b), instance.mu[i][j]));
                terms.push((e(b, a), -instance.mu[j][i]));
                rhs += instance.lambda[j][i] - instance.lambda[i][j];
            }
            lp.add_constraint(terms, Relation::Eq, rhs);
        }
    }
    for a in 0..m {
        lp.set_bounds(e(a, a), instance.safety_stock(), None);
    }

    let station_costs: f64 = st.iter().map(|&i| instance.station_cost[i]).sum();
    let cost = Objective::new(Sense::Minimize, vec![instance.vehicle_cost; n]).with_offset(station_costs);
    StateLp { program: LexicographicProgram::new(lp, cost), stations }
}

/// Largest violation of each model constraint family for a flow solution
/// over the open set `s`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    /// `|μ f − λ|` on open pairs.
    pub trip_flow: f64,
    /// Excess of empty inflow over departures.
    pub empty_inflow: f64,
    /// Vehicle flow balance at open stations.
    pub balance: f64,
    /// Shortfall of idle vehicles below the safety stock.
    pub safety_stock: f64,
    /// `|n − Σ(e + f)|`.
    pub fleet: f64,
    /// Negative flows anywhere.
    pub sign: f64,
    /// Flow on a pair with a closed endpoint.
    pub closed: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        [self.trip_flow, self.empty_inflow, self.balance, self.safety_stock, self.fleet, self.sign, self.closed]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Checks `(full, empty, fleet)` against the state constraints of `s`.
pub fn residuals(instance: &Instance, s: StateKey, full: &[Vec<f64>], empty: &[Vec<f64>], fleet: f64) -> Residuals {
    let r = instance.stations;
    let mut res = Residuals::default();
    let mut total = 0.0;
    for i in 0..r {
        for j in 0..r {
            res.sign = res.sign.max(-full[i][j]).max(-empty[i][j]);
            if !(s.contains(i) && s.contains(j)) {
                res.closed = res.closed.max(full[i][j].abs()).max(empty[i][j].abs());
                continue;
            }
            total += full[i][j] + empty[i][j];
            if i != j {
                res.trip_flow = res.trip_flow.max((instance.mu[i][j] * full[i][j] - instance.lambda[i][j]).abs());
            }
        }
    }
    res.fleet = (fleet - total).abs();
    for i in s.stations() {
        let mut inflow = 0.0;
        let mut departures = 0.0;
        let mut net = 0.0;
        for j in s.stations().filter(|&j| j != i) {
            inflow += instance.mu[j][i] * empty[j][i];
            departures += instance.lambda[i][j];
            net += instance.lambda[i][j] + instance.mu[i][j] * empty[i][j]
                - instance.mu[j][i] * empty[j][i]
                - instance.lambda[j][i];
        }
        res.empty_inflow = res.empty_inflow.max(inflow - departures);
        res.balance = res.balance.max(net.abs());
        res.safety_stock = res.safety_stock.max(instance.safety_stock() - empty[i][i]);
    }
    res
}

/// Profit recomputed from flows: `α(Σ λδ − Σ c^r μ e)` over open pairs.
pub fn profit_from_flows(instance: &Instance, s: StateKey, empty: &[Vec<f64>]) -> f64 {
    let mut value = 0.0;
    for i in s.stations() {
        for j in s.stations() {
            value += instance.lambda[i][j] * instance.margin[i][j]
                - instance.rebalance_cost[i][j] * instance.mu[i][j] * empty[i][j];
        }
    }
    instance.service_level * value
}
