//! Steady-state pipeline simulation on the tree/loop formulation.
//!
//! Flows on a spanning tree are fixed exactly by the injections, loop flows
//! on chord pipes are solved by Newton iteration on the cycle closure
//! residuals, and squared pressures propagate from a reference node. Because
//! compressors act multiplicatively on squared pressure, each node's value
//! is affine in the reference: pi_n = scale_n * pi_ref + offset_n, which the
//! market clearing uses to slide the whole profile inside pressure bounds.

use super::{GasError, GasNetwork, MPA2_PER_PA2};
use crate::linalg::lu_solve;

pub const DEFAULT_WAVE_SPEED_M_PER_S: f64 = 377.0;

const NEWTON_MAX_ITERS: usize = 100;
const NEWTON_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GasFlowState {
    /// Pa per node.
    pub pressure_pa: Vec<f64>,
    /// kg/s per edge, pipes first then compressors, positive from->to.
    pub flow_kg_s: Vec<f64>,
}

/// Squared-pressure profile that is affine in the reference value
/// (MPa^2 units): pi_n = scale_n * x + offset_n.
#[derive(Debug, Clone)]
pub(crate) struct PressureProfile {
    pub scale: Vec<f64>,
    pub offset_mpa2: Vec<f64>,
    pub flow_kg_s: Vec<f64>,
    pub reference: usize,
}

impl PressureProfile {
    /// Reference interval [lo, hi] of x for which every node stays within
    /// its pressure bounds; empty when lo > hi.
    pub fn feasible_reference_interval(&self, net: &GasNetwork) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (n, node) in net.nodes.iter().enumerate() {
            let pmin2 = (node.pmin_pa * node.pmin_pa) * MPA2_PER_PA2;
            let pmax2 = (node.pmax_pa * node.pmax_pa) * MPA2_PER_PA2;
            let a = self.scale[n];
            let b = self.offset_mpa2[n];
            lo = lo.max((pmin2 - b) / a);
            hi = hi.min((pmax2 - b) / a);
        }
        (lo, hi)
    }

    pub fn pressures_at(&self, x_mpa2: f64) -> Result<Vec<f64>, GasError> {
        self.scale
            .iter()
            .zip(&self.offset_mpa2)
            .enumerate()
            .map(|(n, (&a, &b))| {
                let pi = a * x_mpa2 + b;
                if pi <= 0.0 {
                    Err(GasError::NegativeSquaredPressure { node: n })
                } else {
                    Ok(pi.sqrt() * 1e6)
                }
            })
            .collect()
    }
}

struct TreeStructure {
    /// Parent node and connecting edge per node (reference has none).
    parent: Vec<Option<(usize, usize)>>,
    /// Nodes in breadth-first visit order from the reference.
    order: Vec<usize>,
    /// Edges not in the tree.
    chords: Vec<usize>,
}

fn spanning_tree(net: &GasNetwork, root: usize) -> Result<TreeStructure, GasError> {
    let n = net.nodes.len();
    let mut incident = vec![Vec::new(); n];
    for e in 0..net.n_edges() {
        let (a, b) = net.edge_endpoints(e);
        incident[a].push((e, b));
        incident[b].push((e, a));
    }
    let mut parent = vec![None; n];
    let mut in_tree = vec![false; net.n_edges()];
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    visited[root] = true;
    queue.push_back(root);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &(e, w) in &incident[v] {
            if !visited[w] {
                visited[w] = true;
                parent[w] = Some((v, e));
                in_tree[e] = true;
                queue.push_back(w);
            }
        }
    }
    if order.len() != n {
        return Err(GasError::InvalidNetwork("network is not connected".into()));
    }
    let chords = (0..net.n_edges()).filter(|&e| !in_tree[e]).collect();
    Ok(TreeStructure {
        parent,
        order,
        chords,
    })
}

/// Flows implied by injections plus chord circulation, exact by subtree
/// accumulation on the spanning tree.
fn flows_for(
    net: &GasNetwork,
    tree: &TreeStructure,
    injections: &[f64],
    chord_flow: &[f64],
) -> Vec<f64> {
    let n = net.nodes.len();
    let mut flows = vec![0.0; net.n_edges()];
    // Effective injection after ejecting chord circulation at endpoints.
    let mut inj = injections.to_vec();
    for (k, &e) in tree.chords.iter().enumerate() {
        let (a, b) = net.edge_endpoints(e);
        flows[e] = chord_flow[k];
        inj[a] -= chord_flow[k];
        inj[b] += chord_flow[k];
    }
    // Subtree accumulation in reverse visit order.
    let mut subtree = inj;
    for &v in tree.order.iter().rev() {
        if let Some((p, e)) = tree.parent[v] {
            let (from, _to) = net.edge_endpoints(e);
            // Net subtree injection leaves the subtree through edge e.
            let outbound = subtree[v];
            if from == v {
                flows[e] = outbound;
            } else {
                flows[e] = -outbound;
            }
            subtree[p] += outbound;
            let _ = n;
        }
    }
    flows
}

/// Squared-pressure drop across a pipe, MPa^2 per (kg/s)^2 scaling applied.
fn pipe_drop_mpa2(net: &GasNetwork, pipe_idx: usize, flow: f64) -> f64 {
    net.pipes[pipe_idx].resistance * MPA2_PER_PA2 * flow * flow.abs()
}

/// Affine coefficients per node for the given flows and boosts.
fn propagate(
    net: &GasNetwork,
    tree: &TreeStructure,
    flows: &[f64],
    boosts: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = net.nodes.len();
    let mut scale = vec![0.0; n];
    let mut offset = vec![0.0; n];
    scale[tree.order[0]] = 1.0;
    for &v in tree.order.iter().skip(1) {
        let (p, e) = tree.parent[v].unwrap();
        let (from, to) = net.edge_endpoints(e);
        if e < net.pipes.len() {
            let drop = pipe_drop_mpa2(net, e, flows[e]);
            // pi_to = pi_from - drop, walked in either direction.
            if to == v {
                scale[v] = scale[p];
                offset[v] = offset[p] - drop;
            } else {
                scale[v] = scale[p];
                offset[v] = offset[p] + drop;
            }
        } else {
            let gamma = {
                let c = e - net.pipes.len();
                boosts[c] * boosts[c]
            };
            if to == v {
                scale[v] = scale[p] * gamma;
                offset[v] = offset[p] * gamma;
            } else {
                debug_assert!(from == v);
                scale[v] = scale[p] / gamma;
                offset[v] = offset[p] / gamma;
            }
        }
    }
    (scale, offset)
}

/// Solves chord flows and returns the affine pressure profile. Cycles must
/// be free of compressors so closure residuals stay independent of the
/// reference level.
pub(crate) fn pressure_profile(
    net: &GasNetwork,
    injections: &[f64],
    boosts: &[f64],
) -> Result<PressureProfile, GasError> {
    let total: f64 = injections.iter().sum();
    let scale_inj = injections.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if total.abs() > 1e-9 * (1.0 + scale_inj) {
        return Err(GasError::UnbalancedInjections(total));
    }
    let root = net.reference_index();
    let tree = spanning_tree(net, root)?;
    for &e in &tree.chords {
        if e >= net.pipes.len() {
            return Err(GasError::CompressorLoop);
        }
    }

    let mut chord_flow = vec![0.0; tree.chords.len()];
    let residuals = |q: &[f64]| -> Result<Vec<f64>, GasError> {
        let flows = flows_for(net, &tree, injections, q);
        let (scale, offset) = propagate(net, &tree, &flows, boosts);
        tree.chords
            .iter()
            .enumerate()
            .map(|(k, &e)| {
                let (a, b) = net.edge_endpoints(e);
                if (scale[a] - scale[b]).abs() > 1e-12 * scale[a].abs().max(1.0) {
                    return Err(GasError::CompressorLoop);
                }
                Ok(offset[a] - offset[b] - pipe_drop_mpa2(net, e, flows[e]))
            })
            .collect()
    };

    if !tree.chords.is_empty() {
        let dim = chord_flow.len();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITERS {
            let r = residuals(&chord_flow)?;
            let norm = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if norm <= NEWTON_TOL {
                converged = true;
                break;
            }
            // Forward-difference Jacobian; systems here have a handful of
            // loops at most.
            let mut jac = vec![vec![0.0; dim]; dim];
            for j in 0..dim {
                let h = 1e-6 * (1.0 + chord_flow[j].abs());
                let mut q = chord_flow.clone();
                q[j] += h;
                let rj = residuals(&q)?;
                for i in 0..dim {
                    jac[i][j] = (rj[i] - r[i]) / h;
                }
            }
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let step = lu_solve(jac, rhs)
                .ok_or_else(|| GasError::NewtonDivergence("singular jacobian".into()))?;
            for j in 0..dim {
                chord_flow[j] += step[j];
            }
        }
        if !converged {
            let r = residuals(&chord_flow)?;
            let norm = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if norm > NEWTON_TOL {
                return Err(GasError::NewtonDivergence(format!(
                    "residual {norm} after {NEWTON_MAX_ITERS} iterations"
                )));
            }
        }
    }

    let flows = flows_for(net, &tree, injections, &chord_flow);
    let (scale, offset) = propagate(net, &tree, &flows, boosts);
    Ok(PressureProfile {
        scale,
        offset_mpa2: offset,
        flow_kg_s: flows,
        reference: root,
    })
}

/// Steady-state pressures and flows for fixed injections and compressor
/// boosts, anchored at `reference = (node id, pressure in Pa)`.
pub fn simulate_steady_state(
    net: &GasNetwork,
    injections_kg_s: &[f64],
    boosts: &[f64],
    reference: (usize, f64),
) -> Result<GasFlowState, GasError> {
    net.validate()?;
    if injections_kg_s.len() != net.nodes.len() {
        return Err(GasError::InvalidNetwork(format!(
            "{} injections for {} nodes",
            injections_kg_s.len(),
            net.nodes.len()
        )));
    }
    if boosts.len() != net.compressors.len() {
        return Err(GasError::InvalidNetwork(format!(
            "{} boosts for {} compressors",
            boosts.len(),
            net.compressors.len()
        )));
    }
    for (c, &a) in net.compressors.iter().zip(boosts) {
        if !(a >= 1.0 && a <= c.alpha_max + 1e-9) {
            return Err(GasError::InvalidNetwork(format!(
                "boost {a} outside [1, {}]",
                c.alpha_max
            )));
        }
    }
    let profile = pressure_profile(net, injections_kg_s, boosts)?;
    let (ref_id, ref_pa) = reference;
    let r = net
        .node_index(ref_id)
        .ok_or_else(|| GasError::InvalidNetwork(format!("unknown reference node {ref_id}")))?;
    let target = (ref_pa * ref_pa) * MPA2_PER_PA2;
    let x = (target - profile.offset_mpa2[r]) / profile.scale[r];
    let pressure_pa = profile.pressures_at(x)?;
    Ok(GasFlowState {
        pressure_pa,
        flow_kg_s: profile.flow_kg_s,
    })
}

/// Largest squared-pressure closure defect across pipes, MPa^2.
pub fn weymouth_residual_mpa2(net: &GasNetwork, state: &GasFlowState) -> f64 {
    let mut worst: f64 = 0.0;
    for (pi, p) in net.pipes.iter().enumerate() {
        let i = net.node_index(p.from).unwrap();
        let j = net.node_index(p.to).unwrap();
        let lhs = (state.pressure_pa[i].powi(2) - state.pressure_pa[j].powi(2)) * MPA2_PER_PA2;
        let rhs = pipe_drop_mpa2(net, pi, state.flow_kg_s[pi]);
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// Node-balance defect given participant injections, kg/s.
pub fn mass_balance_residual(net: &GasNetwork, injections: &[f64], state: &GasFlowState) -> f64 {
    let mut worst: f64 = 0.0;
    for n in 0..net.nodes.len() {
        let mut acc = injections[n];
        for e in 0..net.n_edges() {
            let (a, b) = net.edge_endpoints(e);
            if a == n {
                acc -= state.flow_kg_s[e];
            }
            if b == n {
                acc += state.flow_kg_s[e];
            }
        }
        worst = worst.max(acc.abs());
    }
    worst
}
