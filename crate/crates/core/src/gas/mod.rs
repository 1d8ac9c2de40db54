//! Gas pipeline model, steady-state simulation, and optimal gas flow market
//! clearing with nodal prices.
//!
//! Pressures are carried in Pa at the API surface; the solvers work in MPa^2
//! squared-pressure units to keep the linear algebra well scaled. Mass flow
//! is kg/s throughout, prices $/kg.

mod ogf;
mod oracle;
mod steady;

pub use ogf::{clear_gas_market, GasClearing, SlpOptions};
pub use oracle::{brute_force_ogf, OracleGrid};
pub use steady::{simulate_steady_state, GasFlowState};

use thiserror::Error;

pub(crate) const MPA2_PER_PA2: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GasNode {
    pub id: usize,
    pub pmin_pa: f64,
    pub pmax_pa: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GasPipe {
    pub from: usize,
    pub to: usize,
    pub length_m: f64,
    pub diameter_m: f64,
    pub friction: f64,
    /// Pa^2 per (kg/s)^2; derived from geometry, checked on validation.
    pub resistance: f64,
}

impl GasPipe {
    pub fn new(from: usize, to: usize, length_m: f64, diameter_m: f64, friction: f64) -> Self {
        let mut p = GasPipe {
            from,
            to,
            length_m,
            diameter_m,
            friction,
            resistance: 0.0,
        };
        p.resistance = p.derived_resistance(steady::DEFAULT_WAVE_SPEED_M_PER_S);
        p
    }

    pub fn area_m2(&self) -> f64 {
        std::f64::consts::PI * self.diameter_m * self.diameter_m / 4.0
    }

    /// a^2 * friction * length / (area^2 * diameter).
    pub fn derived_resistance(&self, wave_speed: f64) -> f64 {
        let a2 = wave_speed * wave_speed;
        a2 * self.friction * self.length_m / (self.area_m2().powi(2) * self.diameter_m)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GasCompressor {
    pub from: usize,
    pub to: usize,
    pub alpha_max: f64,
    /// $ per kg/s per unit of (alpha^r - 1).
    pub cost_usd_per_kg: f64,
    /// Adiabatic exponent r.
    pub exponent: f64,
}

pub const DEFAULT_COMPRESSION_EXPONENT: f64 = 0.2857;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GasNetwork {
    pub nodes: Vec<GasNode>,
    pub pipes: Vec<GasPipe>,
    pub compressors: Vec<GasCompressor>,
    pub wave_speed_m_per_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GasRole {
    Supply,
    Demand,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GasParticipant {
    pub id: String,
    pub node: usize,
    pub role: GasRole,
    pub qty_max_kg_s: f64,
    pub price_usd_per_kg: f64,
    pub owner: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GasMarket {
    pub participants: Vec<GasParticipant>,
}

impl GasMarket {
    pub fn participant_index(&self, id: &str) -> Option<usize> {
        self.participants.iter().position(|p| p.id == id)
    }
}

#[derive(Debug, Error)]
pub enum GasError {
    #[error("invalid gas network: {0}")]
    InvalidNetwork(String),
    #[error("invalid gas market: {0}")]
    InvalidMarket(String),
    #[error("injections do not balance: sum {0}")]
    UnbalancedInjections(f64),
    #[error("newton iteration failed: {0}")]
    NewtonDivergence(String),
    #[error("squared pressure became non-positive at node {node}")]
    NegativeSquaredPressure { node: usize },
    #[error("cycle through a compressor is unsupported")]
    CompressorLoop,
    #[error("sequential linearization stalled below trust radius {0}")]
    SlpStall(f64),
    #[error("gas network cannot support any feasible operating point")]
    InfeasibleGasNetwork,
    #[error("oracle problem too large: {0}")]
    ProblemTooLarge(String),
    #[error("solver failure: {0}")]
    Solver(#[from] crate::lp::LpError),
}

impl GasNetwork {
    pub fn node_index(&self, id: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Internal pressure-reference node: lowest node id.
    pub fn reference_index(&self) -> usize {
        let mut best = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id < self.nodes[best].id {
                best = i;
            }
        }
        best
    }

    pub fn n_edges(&self) -> usize {
        self.pipes.len() + self.compressors.len()
    }

    /// Edge endpoints by edge index: pipes first, then compressors.
    pub(crate) fn edge_endpoints(&self, e: usize) -> (usize, usize) {
        if e < self.pipes.len() {
            let p = &self.pipes[e];
            (
                self.node_index(p.from).unwrap(),
                self.node_index(p.to).unwrap(),
            )
        } else {
            let c = &self.compressors[e - self.pipes.len()];
            (
                self.node_index(c.from).unwrap(),
                self.node_index(c.to).unwrap(),
            )
        }
    }

    pub fn validate(&self) -> Result<(), GasError> {
        if self.nodes.is_empty() {
            return Err(GasError::InvalidNetwork("no nodes".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) {
                return Err(GasError::InvalidNetwork(format!(
                    "duplicate node id {}",
                    n.id
                )));
            }
            if !(n.pmin_pa > 0.0 && n.pmin_pa < n.pmax_pa) {
                return Err(GasError::InvalidNetwork(format!(
                    "node {} pressure bounds must satisfy 0 < min < max",
                    n.id
                )));
            }
        }
        for p in &self.pipes {
            if self.node_index(p.from).is_none() || self.node_index(p.to).is_none() {
                return Err(GasError::InvalidNetwork(format!(
                    "pipe {}->{} references an unknown node",
                    p.from, p.to
                )));
            }
            if !(p.diameter_m > 0.0) {
                return Err(GasError::InvalidNetwork(format!(
                    "pipe {}->{} has non-positive diameter",
                    p.from, p.to
                )));
            }
            if !(p.length_m > 0.0 && p.friction > 0.0) {
                return Err(GasError::InvalidNetwork(format!(
                    "pipe {}->{} has non-positive length or friction",
                    p.from, p.to
                )));
            }
            let derived = p.derived_resistance(self.wave_speed_m_per_s);
            if (p.resistance - derived).abs() > 1e-9 * derived {
                return Err(GasError::InvalidNetwork(format!(
                    "pipe {}->{} stores resistance {} but geometry gives {}",
                    p.from, p.to, p.resistance, derived
                )));
            }
        }
        for c in &self.compressors {
            if self.node_index(c.from).is_none() || self.node_index(c.to).is_none() {
                return Err(GasError::InvalidNetwork(format!(
                    "compressor {}->{} references an unknown node",
                    c.from, c.to
                )));
            }
            if !(c.alpha_max >= 1.0) {
                return Err(GasError::InvalidNetwork(format!(
                    "compressor {}->{} boost limit below 1",
                    c.from, c.to
                )));
            }
        }
        if !self.is_connected() {
            return Err(GasError::InvalidNetwork("network is not connected".into()));
        }
        Ok(())
    }

    pub fn validate_market(&self, market: &GasMarket) -> Result<(), GasError> {
        let mut ids = std::collections::BTreeSet::new();
        for p in &market.participants {
            if !ids.insert(p.id.as_str()) {
                return Err(GasError::InvalidMarket(format!(
                    "duplicate participant id {}",
                    p.id
                )));
            }
            if self.node_index(p.node).is_none() {
                return Err(GasError::InvalidMarket(format!(
                    "participant {} attached to unknown node {}",
                    p.id, p.node
                )));
            }
            if !(p.qty_max_kg_s >= 0.0) {
                return Err(GasError::InvalidMarket(format!(
                    "participant {} has negative quantity cap",
                    p.id
                )));
            }
            if !p.price_usd_per_kg.is_finite() {
                return Err(GasError::InvalidMarket(format!(
                    "participant {} has non-finite price",
                    p.id
                )));
            }
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for e in 0..self.n_edges() {
            let (a, b) = self.edge_endpoints(e);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }
}

#[cfg(test)]
mod tests;
