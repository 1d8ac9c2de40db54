//! Optimal gas flow market clearing.
//!
//! Maximizes market surplus minus compression cost subject to the
//! steady-state pipe physics. The nonconvex closure equation is handled by
//! sequential linear programming in squared pressures and flows, with the
//! compressor ratio held fixed inside each LP and stepped between solves
//! from the LP duals. Candidates are accepted only when the exact physics
//! (via the affine pressure profile) stays feasible and the exact objective
//! improves, so the incumbent is feasible at every stage.

use super::steady::{pressure_profile, PressureProfile};
use super::{GasError, GasMarket, GasNetwork, GasRole, MPA2_PER_PA2};
use crate::lp::{LinearProgram, LpOutcome, Sense, VarId};

#[derive(Debug, Clone)]
pub struct SlpOptions {
    pub max_iters: usize,
    pub gamma_step: f64,
    pub convergence_tol: f64,
    pub min_trust: f64,
}

impl Default for SlpOptions {
    fn default() -> Self {
        SlpOptions {
            max_iters: 120,
            gamma_step: 0.05,
            convergence_tol: 1e-7,
            min_trust: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GasClearing {
    /// Cleared quantity per participant: supply for suppliers, delivery for
    /// consumers, kg/s.
    pub cleared_kg_s: Vec<f64>,
    pub pressure_pa: Vec<f64>,
    /// Flow per edge (pipes then compressors), kg/s.
    pub flow_kg_s: Vec<f64>,
    /// Boost ratio per compressor.
    pub boost: Vec<f64>,
    /// Marginal value of one more kg/s delivered at each node, $/kg.
    pub nodal_price_usd_per_kg: Vec<f64>,
    /// Surplus minus compression cost, $/s.
    pub objective_usd_per_s: f64,
}

impl GasClearing {
    pub fn total_supplied(&self, market: &GasMarket) -> f64 {
        market
            .participants
            .iter()
            .zip(&self.cleared_kg_s)
            .filter(|(p, _)| p.role == GasRole::Supply)
            .map(|(_, &q)| q)
            .sum()
    }

    pub fn total_delivered(&self, market: &GasMarket) -> f64 {
        market
            .participants
            .iter()
            .zip(&self.cleared_kg_s)
            .filter(|(p, _)| p.role == GasRole::Demand)
            .map(|(_, &q)| q)
            .sum()
    }
}

#[derive(Debug, Clone)]
struct Incumbent {
    cleared: Vec<f64>,
    flows: Vec<f64>,
    gamma: Vec<f64>,
    objective: f64,
}

/// Exact surplus minus compression cost for physics flows, $/s.
fn exact_objective(
    net: &GasNetwork,
    market: &GasMarket,
    cleared: &[f64],
    flows: &[f64],
    gamma: &[f64],
) -> f64 {
    let mut j = 0.0;
    for (p, &q) in market.participants.iter().zip(cleared) {
        match p.role {
            GasRole::Demand => j += p.price_usd_per_kg * q,
            GasRole::Supply => j -= p.price_usd_per_kg * q,
        }
    }
    for (c, comp) in net.compressors.iter().enumerate() {
        let alpha = gamma[c].sqrt();
        j -= comp.cost_usd_per_kg * flows[net.pipes.len() + c] * (alpha.powf(comp.exponent) - 1.0);
    }
    j
}

fn injections(net: &GasNetwork, market: &GasMarket, cleared: &[f64]) -> Vec<f64> {
    let mut inj = vec![0.0; net.nodes.len()];
    for (p, &q) in market.participants.iter().zip(cleared) {
        let n = net.node_index(p.node).unwrap();
        match p.role {
            GasRole::Supply => inj[n] += q,
            GasRole::Demand => inj[n] -= q,
        }
    }
    inj
}

/// Physics check: profile must exist, admit a pressure level within bounds,
/// and keep compressor flow one-directional. Returns the profile on success.
fn physics_feasible(
    net: &GasNetwork,
    market: &GasMarket,
    cleared: &[f64],
    gamma: &[f64],
) -> Option<PressureProfile> {
    let boosts: Vec<f64> = gamma.iter().map(|g| g.sqrt()).collect();
    let inj = injections(net, market, cleared);
    let profile = pressure_profile(net, &inj, &boosts).ok()?;
    for c in 0..net.compressors.len() {
        if profile.flow_kg_s[net.pipes.len() + c] < -1e-9 {
            return None;
        }
    }
    let (lo, hi) = profile.feasible_reference_interval(net);
    if lo > hi + 1e-12 {
        return None;
    }
    Some(profile)
}

struct LpLayout {
    lp: LinearProgram,
    s_vars: Vec<VarId>,
    flow_vars: Vec<VarId>,
    pi_vars: Vec<VarId>,
    balance_rows: Vec<usize>,
    compressor_rows: Vec<usize>,
}

fn build_lp(
    net: &GasNetwork,
    market: &GasMarket,
    incumbent: &Incumbent,
    trust: f64,
) -> LpLayout {
    let mut lp = LinearProgram::new(Sense::Maximize);
    let s_vars: Vec<VarId> = market
        .participants
        .iter()
        .map(|p| {
            let obj = match p.role {
                GasRole::Demand => p.price_usd_per_kg,
                GasRole::Supply => -p.price_usd_per_kg,
            };
            lp.add_var(format!("q_{}", p.id), 0.0, p.qty_max_kg_s, obj)
        })
        .collect();
    let flow_vars: Vec<VarId> = (0..net.n_edges())
        .map(|e| {
            let base = incumbent.flows[e];
            let (lo, hi) = if e < net.pipes.len() {
                (base - trust, base + trust)
            } else {
                ((base - trust).max(0.0), base + trust)
            };
            let obj = if e < net.pipes.len() {
                0.0
            } else {
                let c = e - net.pipes.len();
                let comp = &net.compressors[c];
                let alpha = incumbent.gamma[c].sqrt();
                -comp.cost_usd_per_kg * (alpha.powf(comp.exponent) - 1.0)
            };
            lp.add_var(format!("flow_{e}"), lo, hi, obj)
        })
        .collect();
    let pi_vars: Vec<VarId> = net
        .nodes
        .iter()
        .map(|n| {
            lp.add_var(
                format!("pi_{}", n.id),
                n.pmin_pa * n.pmin_pa * MPA2_PER_PA2,
                n.pmax_pa * n.pmax_pa * MPA2_PER_PA2,
                0.0,
            )
        })
        .collect();

    let mut balance_terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); net.nodes.len()];
    for e in 0..net.n_edges() {
        let (a, b) = net.edge_endpoints(e);
        balance_terms[a].push((flow_vars[e], -1.0));
        balance_terms[b].push((flow_vars[e], 1.0));
    }
    for (pi, p) in market.participants.iter().enumerate() {
        let n = net.node_index(p.node).unwrap();
        let sign = match p.role {
            GasRole::Supply => 1.0,
            GasRole::Demand => -1.0,
        };
        balance_terms[n].push((s_vars[pi], sign));
    }
    let balance_rows: Vec<usize> = balance_terms
        .iter()
        .map(|terms| lp.add_eq(terms, 0.0))
        .collect();

    for (e, pipe) in net.pipes.iter().enumerate() {
        let i = net.node_index(pipe.from).unwrap();
        let j = net.node_index(pipe.to).unwrap();
        let beta = pipe.resistance * MPA2_PER_PA2;
        let base = incumbent.flows[e];
        let slope = 2.0 * beta * base.abs().max(1e-3);
        let rhs = beta * base * base.abs() - slope * base;
        lp.add_eq(
            &[
                (pi_vars[i], 1.0),
                (pi_vars[j], -1.0),
                (flow_vars[e], -slope),
            ],
            rhs,
        );
    }
    let compressor_rows: Vec<usize> = net
        .compressors
        .iter()
        .enumerate()
        .map(|(c, comp)| {
            let i = net.node_index(comp.from).unwrap();
            let j = net.node_index(comp.to).unwrap();
            lp.add_eq(
                &[(pi_vars[j], 1.0), (pi_vars[i], -incumbent.gamma[c])],
                0.0,
            )
        })
        .collect();

    LpLayout {
        lp,
        s_vars,
        flow_vars,
        pi_vars,
        balance_rows,
        compressor_rows,
    }
}

/// Clears the gas market: locally optimal surplus maximization with nodal
/// prices from the final linearization's balance duals.
pub fn clear_gas_market(
    net: &GasNetwork,
    market: &GasMarket,
    opts: &SlpOptions,
) -> Result<GasClearing, GasError> {
    net.validate()?;
    net.validate_market(market)?;
    let has_supply = market
        .participants
        .iter()
        .any(|p| p.role == GasRole::Supply);
    let has_demand = market
        .participants
        .iter()
        .any(|p| p.role == GasRole::Demand);
    if !has_supply || !has_demand {
        return Err(GasError::InvalidMarket(
            "need at least one supply and one demand participant".into(),
        ));
    }

    let mut incumbent = Incumbent {
        cleared: vec![0.0; market.participants.len()],
        flows: vec![0.0; net.n_edges()],
        gamma: vec![1.0; net.compressors.len()],
        objective: 0.0,
    };
    let mut profile = physics_feasible(net, market, &incumbent.cleared, &incumbent.gamma)
        .ok_or(GasError::InfeasibleGasNetwork)?;

    let total_cap: f64 = market
        .participants
        .iter()
        .filter(|p| p.role == GasRole::Supply)
        .map(|p| p.qty_max_kg_s)
        .sum();
    let mut trust = (total_cap + 1.0).max(1.0);
    let mut last_duals: Vec<f64> = vec![0.0; net.nodes.len()];
    let mut last_pi_ref = f64::NAN;

    for _ in 0..opts.max_iters {
        let layout = build_lp(net, market, &incumbent, trust);
        let outcome = layout.lp.solve()?;
        let opt = match outcome {
            LpOutcome::Optimal(o) => o,
            // Linearization too coarse for the pressure box: tighten.
            LpOutcome::Infeasible(_) => {
                trust *= 0.5;
                if trust < opts.min_trust {
                    return Err(GasError::SlpStall(trust));
                }
                continue;
            }
            LpOutcome::Unbounded(_) => {
                return Err(GasError::Solver(crate::lp::LpError::Numerical(
                    "surplus maximization unbounded".into(),
                )))
            }
        };
        for (n, &row) in layout.balance_rows.iter().enumerate() {
            last_duals[n] = -opt.dual_eq[row];
        }
        last_pi_ref = opt.primal[layout.pi_vars[net.reference_index()].0];

        // Compressor ratio step from the fixed-ratio row duals.
        let mut gamma_cand = incumbent.gamma.clone();
        for (c, comp) in net.compressors.iter().enumerate() {
            let i = net.node_index(comp.from).unwrap();
            let lam = opt.dual_eq[layout.compressor_rows[c]];
            let pi_from = opt.primal[layout.pi_vars[i].0];
            let flow = opt.primal[layout.flow_vars[net.pipes.len() + c].0];
            let g = lam * pi_from
                - comp.cost_usd_per_kg
                    * flow
                    * (comp.exponent / 2.0)
                    * incumbent.gamma[c].powf(comp.exponent / 2.0 - 1.0);
            if g.abs() > 1e-12 {
                gamma_cand[c] = (incumbent.gamma[c] + opts.gamma_step * g.signum())
                    .clamp(1.0, comp.alpha_max * comp.alpha_max);
            }
        }

        let cleared_cand: Vec<f64> = layout.s_vars.iter().map(|v| opt.primal[v.0]).collect();

        // The linearization underestimates pressure drops, so the LP point
        // can sit just outside the true feasible set. Walk back toward the
        // (always feasible) incumbent until the physics admits the point.
        let blend = |t: f64| -> (Vec<f64>, Vec<f64>) {
            let cleared: Vec<f64> = incumbent
                .cleared
                .iter()
                .zip(&cleared_cand)
                .map(|(a, b)| a + t * (b - a))
                .collect();
            let gamma: Vec<f64> = incumbent
                .gamma
                .iter()
                .zip(&gamma_cand)
                .map(|(a, b)| a + t * (b - a))
                .collect();
            (cleared, gamma)
        };
        let mut t_feasible = None;
        if physics_feasible(net, market, &cleared_cand, &gamma_cand).is_some() {
            t_feasible = Some(1.0);
        } else {
            let mut lo = 0.0f64;
            let mut hi = 1.0f64;
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                let (c, g) = blend(mid);
                if physics_feasible(net, market, &c, &g).is_some() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if lo > 0.0 {
                t_feasible = Some(lo);
            }
        }

        let accepted = t_feasible.and_then(|t| {
            let (cleared, gamma) = blend(t);
            let p = physics_feasible(net, market, &cleared, &gamma)?;
            let j = exact_objective(net, market, &cleared, &p.flow_kg_s, &gamma);
            (j >= incumbent.objective - 1e-12).then_some((cleared, gamma, p, j))
        });

        match accepted {
            Some((cleared, gamma, p, j)) => {
                let mut step: f64 = 0.0;
                for (a, b) in cleared.iter().zip(&incumbent.cleared) {
                    step = step.max((a - b).abs());
                }
                for (a, b) in p.flow_kg_s.iter().zip(&incumbent.flows) {
                    step = step.max((a - b).abs());
                }
                for (a, b) in gamma.iter().zip(&incumbent.gamma) {
                    step = step.max((a - b).abs());
                }
                incumbent = Incumbent {
                    cleared,
                    flows: p.flow_kg_s.clone(),
                    gamma,
                    objective: j,
                };
                profile = p;
                if step <= opts.convergence_tol {
                    break;
                }
                trust = (trust * 1.5).min((total_cap + 1.0).max(1.0));
            }
            None => {
                trust *= 0.5;
                if trust < opts.min_trust {
                    break; // incumbent is feasible; treat as converged
                }
            }
        }
    }

    // Anchor the pressure level: follow the final linearization's reference
    // value, clamped into the physically admissible interval. The interval
    // can collapse to a point up to rounding, hence the reordering.
    let (lo, hi) = profile.feasible_reference_interval(net);
    let (lo, hi) = (lo.min(hi), lo.max(hi));
    let x = if last_pi_ref.is_finite() {
        last_pi_ref.clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    };
    let pressure_pa = profile.pressures_at(x)?;

    Ok(GasClearing {
        cleared_kg_s: incumbent.cleared,
        pressure_pa,
        flow_kg_s: profile.flow_kg_s.clone(),
        boost: incumbent.gamma.iter().map(|g| g.sqrt()).collect(),
        nodal_price_usd_per_kg: last_duals,
        objective_usd_per_s: incumbent.objective,
    })
}
