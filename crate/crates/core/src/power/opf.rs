//! DC-OPF construction and clearing.
//!
//! Variables are generator outputs and bus voltage angles with the slack
//! angle pinned to zero. Power balance is an equality row per bus whose dual
//! is the LMP in $/MWh of incremental demand; line limits and generator
//! offer limits are explicit `<=` rows.

use super::{PowerBidSet, PowerError, PowerNetwork};
use crate::lp::{LinearProgram, LpOutcome, Sense, VarId};

/// Tolerance below a line's limit at which the line counts as binding.
pub const BINDING_TOL_MW: f64 = 1e-6;

/// A built OPF with the index maps needed to read the solution back.
#[derive(Debug, Clone)]
pub struct OpfProgram {
    pub lp: LinearProgram,
    pub p_vars: Vec<VarId>,
    pub theta_vars: Vec<VarId>,
    /// Equality row per bus, aligned with `PowerNetwork::buses`.
    pub balance_rows: Vec<usize>,
    /// Per line: (`flow <= limit`, `-flow <= limit`) row indices.
    pub line_rows: Vec<(usize, usize)>,
    /// Per generator: (`p <= qmax`, `-p <= -qmin`) row indices.
    pub gen_rows: Vec<(usize, usize)>,
    pub slack_bus: usize,
}

pub fn build_opf(net: &PowerNetwork, bids: &PowerBidSet) -> Result<OpfProgram, PowerError> {
    net.validate()?;
    bids.validate(net)?;

    let slack = net.slack_index();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let p_vars: Vec<VarId> = net
        .generators
        .iter()
        .zip(&bids.bids)
        .map(|(g, bid)| {
            lp.add_var(
                format!("P_{}", g.id),
                f64::NEG_INFINITY,
                f64::INFINITY,
                bid.price_usd_per_mwh,
            )
        })
        .collect();
    let theta_vars: Vec<VarId> = net
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if i == slack {
                lp.add_var(format!("theta_{}", b.id), 0.0, 0.0, 0.0)
            } else {
                lp.add_var(
                    format!("theta_{}", b.id),
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                    0.0,
                )
            }
        })
        .collect();

    // Power balance per bus: generation minus net angle-driven outflow
    // equals demand, so the row dual prices incremental demand directly.
    let mut balance_terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); net.buses.len()];
    for (gi, g) in net.generators.iter().enumerate() {
        let b = net.bus_index(g.bus).unwrap();
        balance_terms[b].push((p_vars[gi], 1.0));
    }
    for l in &net.lines {
        let i = net.bus_index(l.from).unwrap();
        let j = net.bus_index(l.to).unwrap();
        let susceptance = 1.0 / l.reactance_pu;
        // Flow i->j = (theta_i - theta_j) * b leaves bus i, enters bus j.
        balance_terms[i].push((theta_vars[i], -susceptance));
        balance_terms[i].push((theta_vars[j], susceptance));
        balance_terms[j].push((theta_vars[i], susceptance));
        balance_terms[j].push((theta_vars[j], -susceptance));
    }
    let balance_rows: Vec<usize> = net
        .buses
        .iter()
        .enumerate()
        .map(|(b, bus)| lp.add_eq(&balance_terms[b], bus.demand_mw))
        .collect();

    let line_rows: Vec<(usize, usize)> = net
        .lines
        .iter()
        .map(|l| {
            let i = net.bus_index(l.from).unwrap();
            let j = net.bus_index(l.to).unwrap();
            let susceptance = 1.0 / l.reactance_pu;
            let terms = [
                (theta_vars[i], susceptance),
                (theta_vars[j], -susceptance),
            ];
            let pos = lp.add_le(&terms, l.limit_mw);
            let neg_terms = [
                (theta_vars[i], -susceptance),
                (theta_vars[j], susceptance),
            ];
            let neg = lp.add_le(&neg_terms, l.limit_mw);
            (pos, neg)
        })
        .collect();

    let gen_rows: Vec<(usize, usize)> = net
        .generators
        .iter()
        .enumerate()
        .map(|(gi, _)| {
            let bid = &bids.bids[gi];
            let hi = lp.add_le(&[(p_vars[gi], 1.0)], bid.qty_max_mw);
            let lo = lp.add_le(&[(p_vars[gi], -1.0)], -bid.qty_min_mw);
            (hi, lo)
        })
        .collect();

    Ok(OpfProgram {
        lp,
        p_vars,
        theta_vars,
        balance_rows,
        line_rows,
        gen_rows,
        slack_bus: slack,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DispatchResult {
    /// Cleared output per generator, MW.
    pub p_mw: Vec<f64>,
    /// Voltage angle per bus, radians, slack fixed at zero.
    pub theta_rad: Vec<f64>,
    /// Locational marginal price per bus, $/MWh of incremental demand.
    pub lmp: Vec<f64>,
    /// Flow per line in its from->to orientation, MW.
    pub flow_mw: Vec<f64>,
    /// Indices of lines within `BINDING_TOL_MW` of their limit.
    pub binding_lines: Vec<usize>,
    /// Cleared production cost, $/h.
    pub objective: f64,
}

impl DispatchResult {
    pub fn is_congested(&self) -> bool {
        !self.binding_lines.is_empty()
    }

    /// Largest power-balance residual across buses, MW. Diagnostic.
    pub fn balance_residual(&self, net: &PowerNetwork) -> f64 {
        let mut worst: f64 = 0.0;
        for (b, bus) in net.buses.iter().enumerate() {
            let mut acc = -bus.demand_mw;
            for (gi, g) in net.generators.iter().enumerate() {
                if net.bus_index(g.bus).unwrap() == b {
                    acc += self.p_mw[gi];
                }
            }
            for (li, l) in net.lines.iter().enumerate() {
                let i = net.bus_index(l.from).unwrap();
                let j = net.bus_index(l.to).unwrap();
                if i == b {
                    acc -= self.flow_mw[li];
                }
                if j == b {
                    acc += self.flow_mw[li];
                }
            }
            worst = worst.max(acc.abs());
        }
        worst
    }
}

pub fn clear_market(net: &PowerNetwork, bids: &PowerBidSet) -> Result<DispatchResult, PowerError> {
    let opf = build_opf(net, bids)?;
    let outcome = opf.lp.solve()?;
    match outcome {
        LpOutcome::Optimal(opt) => {
            let p_mw: Vec<f64> = opf.p_vars.iter().map(|v| opt.primal[v.0]).collect();
            let theta_rad: Vec<f64> = opf.theta_vars.iter().map(|v| opt.primal[v.0]).collect();
            let lmp: Vec<f64> = opf.balance_rows.iter().map(|&r| opt.dual_eq[r]).collect();
            let flow_mw: Vec<f64> = net
                .lines
                .iter()
                .map(|l| {
                    let i = net.bus_index(l.from).unwrap();
                    let j = net.bus_index(l.to).unwrap();
                    (theta_rad[i] - theta_rad[j]) / l.reactance_pu
                })
                .collect();
            let binding_lines: Vec<usize> = net
                .lines
                .iter()
                .enumerate()
                .filter(|(li, l)| flow_mw[*li].abs() >= l.limit_mw - BINDING_TOL_MW)
                .map(|(li, _)| li)
                .collect();
            Ok(DispatchResult {
                p_mw,
                theta_rad,
                lmp,
                flow_mw,
                binding_lines,
                objective: opt.objective,
            })
        }
        LpOutcome::Infeasible(cert) => Err(PowerError::InfeasibleDispatch(cert)),
        LpOutcome::Unbounded(_) => Err(PowerError::Solver(crate::lp::LpError::Numerical(
            "bounded dispatch reported unbounded".into(),
        ))),
    }
}
