//! Power network model, DC optimal power flow clearing, locational marginal
//! prices, and generation shift factors.

mod gsf;
mod opf;

pub use gsf::{compute_gsf, lmp_decomposition};
pub use opf::{build_opf, clear_market, DispatchResult, OpfProgram};

use crate::lp::Infeasibility;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerBus {
    pub id: usize,
    pub demand_mw: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub reactance_pu: f64,
    pub limit_mw: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: usize,
    pub pmin_mw: f64,
    pub pmax_mw: f64,
    /// Reference marginal cost in $/MWh, the monitor's benchmark.
    pub reference_cost: f64,
    pub owner: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerNetwork {
    pub buses: Vec<PowerBus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
}

/// Price-quantity offer for one generator, aligned with
/// `PowerNetwork::generators` by position.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerBid {
    pub price_usd_per_mwh: f64,
    pub qty_max_mw: f64,
    pub qty_min_mw: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerBidSet {
    pub bids: Vec<PowerBid>,
}

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("invalid power network: {0}")]
    InvalidNetwork(String),
    #[error("invalid bid set: {0}")]
    InvalidBids(String),
    #[error("network is not connected")]
    DisconnectedNetwork,
    #[error("dispatch infeasible")]
    InfeasibleDispatch(Infeasibility),
    #[error("solver failure: {0}")]
    Solver(#[from] crate::lp::LpError),
    #[error("unknown generator id {0}")]
    UnknownGenerator(String),
}

impl PowerNetwork {
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn generator_index(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }

    /// Slack bus: the lowest-numbered bus id.
    pub fn slack_index(&self) -> usize {
        let mut best = 0;
        for (i, b) in self.buses.iter().enumerate() {
            if b.id < self.buses[best].id {
                best = i;
            }
        }
        best
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        if self.buses.is_empty() {
            return Err(PowerError::InvalidNetwork("no buses".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.buses {
            if !seen.insert(b.id) {
                return Err(PowerError::InvalidNetwork(format!(
                    "duplicate bus id {}",
                    b.id
                )));
            }
            if !(b.demand_mw >= 0.0) {
                return Err(PowerError::InvalidNetwork(format!(
                    "bus {} has negative demand {}",
                    b.id, b.demand_mw
                )));
            }
        }
        for l in &self.lines {
            if self.bus_index(l.from).is_none() || self.bus_index(l.to).is_none() {
                return Err(PowerError::InvalidNetwork(format!(
                    "line {}-{} references an unknown bus",
                    l.from, l.to
                )));
            }
            if l.from == l.to {
                return Err(PowerError::InvalidNetwork(format!(
                    "line {}-{} is a self-loop",
                    l.from, l.to
                )));
            }
            if !(l.reactance_pu > 0.0) {
                return Err(PowerError::InvalidNetwork(format!(
                    "line {}-{} has non-positive reactance",
                    l.from, l.to
                )));
            }
            if !(l.limit_mw > 0.0) {
                return Err(PowerError::InvalidNetwork(format!(
                    "line {}-{} has non-positive thermal limit",
                    l.from, l.to
                )));
            }
        }
        let mut gen_ids = std::collections::BTreeSet::new();
        for g in &self.generators {
            if !gen_ids.insert(g.id.as_str()) {
                return Err(PowerError::InvalidNetwork(format!(
                    "duplicate generator id {}",
                    g.id
                )));
            }
            if self.bus_index(g.bus).is_none() {
                return Err(PowerError::InvalidNetwork(format!(
                    "generator {} sits on unknown bus {}",
                    g.id, g.bus
                )));
            }
            if g.pmin_mw > g.pmax_mw {
                return Err(PowerError::InvalidNetwork(format!(
                    "generator {} has pmin above pmax",
                    g.id
                )));
            }
        }
        if !self.is_connected() {
            return Err(PowerError::DisconnectedNetwork);
        }
        Ok(())
    }

    pub fn is_connected(&self) -> bool {
        if self.buses.is_empty() {
            return false;
        }
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for l in &self.lines {
            let (a, b) = (self.bus_index(l.from), self.bus_index(l.to));
            if let (Some(a), Some(b)) = (a, b) {
                adj[a].push(b);
                adj[b].push(a);
            }
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

impl PowerBidSet {
    /// Cost-reflective bids: price at reference cost, full physical range.
    pub fn reference(net: &PowerNetwork) -> Self {
        PowerBidSet {
            bids: net
                .generators
                .iter()
                .map(|g| PowerBid {
                    price_usd_per_mwh: g.reference_cost,
                    qty_max_mw: g.pmax_mw,
                    qty_min_mw: g.pmin_mw,
                })
                .collect(),
        }
    }

    pub fn validate(&self, net: &PowerNetwork) -> Result<(), PowerError> {
        if self.bids.len() != net.generators.len() {
            return Err(PowerError::InvalidBids(format!(
                "{} bids for {} generators",
                self.bids.len(),
                net.generators.len()
            )));
        }
        for (g, bid) in net.generators.iter().zip(&self.bids) {
            if !bid.price_usd_per_mwh.is_finite() {
                return Err(PowerError::InvalidBids(format!(
                    "generator {} has non-finite price bid",
                    g.id
                )));
            }
            let eps = 1e-9;
            if bid.qty_max_mw > g.pmax_mw + eps || bid.qty_min_mw < g.pmin_mw - eps {
                return Err(PowerError::InvalidBids(format!(
                    "generator {} offers quantity outside physical limits",
                    g.id
                )));
            }
            if bid.qty_min_mw > bid.qty_max_mw + eps {
                return Err(PowerError::InvalidBids(format!(
                    "generator {} offers min above max",
                    g.id
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
