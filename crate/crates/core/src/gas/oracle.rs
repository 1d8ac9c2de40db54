//! Exhaustive grid oracle for the gas clearing, used to validate the
//! sequential linearization on small instances.

use super::ogf::GasClearing;
use super::steady::pressure_profile;
use super::{GasError, GasMarket, GasNetwork, GasRole};
use crate::{map_indexed, Parallelism};

#[derive(Debug, Clone)]
pub struct OracleGrid {
    pub qty_step_kg_s: f64,
    pub alpha_step: f64,
    /// Guard against runaway enumeration.
    pub max_points: usize,
}

impl Default for OracleGrid {
    fn default() -> Self {
        OracleGrid {
            qty_step_kg_s: 0.01,
            alpha_step: 0.1,
            max_points: 5_000_000,
        }
    }
}

fn axis(cap: f64, step: f64) -> Vec<f64> {
    let mut vals = Vec::new();
    let mut k = 0usize;
    loop {
        let v = k as f64 * step;
        if v >= cap - 1e-12 {
            break;
        }
        vals.push(v);
        k += 1;
    }
    vals.push(cap);
    vals
}

fn alpha_axis(alpha_max: f64, step: f64) -> Vec<f64> {
    let mut vals = vec![1.0];
    let mut a = 1.0 + step;
    while a < alpha_max - 1e-12 {
        vals.push(a);
        a += step;
    }
    if alpha_max > 1.0 {
        vals.push(alpha_max);
    }
    vals
}

/// Enumerates participant quantities and compressor boosts on the grid,
/// simulating each combination, and returns the best feasible clearing.
/// Deterministic: ties resolve to the earliest enumeration index.
pub fn brute_force_ogf(
    net: &GasNetwork,
    market: &GasMarket,
    grid: &OracleGrid,
    par: Parallelism,
) -> Result<GasClearing, GasError> {
    net.validate()?;
    net.validate_market(market)?;
    if net.nodes.len() > 12 {
        return Err(GasError::ProblemTooLarge(format!(
            "{} nodes exceeds the 12-node oracle bound",
            net.nodes.len()
        )));
    }
    if !(grid.qty_step_kg_s > 0.0) {
        return Err(GasError::ProblemTooLarge("grid step must be positive".into()));
    }

    // The last supply participant balances the books exactly; everything
    // else (demands, remaining supplies, boosts) walks the grid.
    let balancer = market
        .participants
        .iter()
        .rposition(|p| p.role == GasRole::Supply);
    let axes: Vec<Vec<f64>> = market
        .participants
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if Some(i) == balancer {
                vec![0.0] // placeholder, solved per point
            } else {
                axis(p.qty_max_kg_s, grid.qty_step_kg_s)
            }
        })
        .collect();
    let alpha_axes: Vec<Vec<f64>> = net
        .compressors
        .iter()
        .map(|c| alpha_axis(c.alpha_max, grid.alpha_step))
        .collect();
    let mut total: usize = 1;
    for a in axes.iter().chain(alpha_axes.iter()) {
        total = total.saturating_mul(a.len());
        if total > grid.max_points {
            return Err(GasError::ProblemTooLarge(format!(
                "grid would enumerate more than {} points",
                grid.max_points
            )));
        }
    }

    let all_axes: Vec<&Vec<f64>> = axes.iter().chain(alpha_axes.iter()).collect();
    let n_part = market.participants.len();

    let evaluate = |index: usize| -> Option<(f64, usize, Vec<f64>, Vec<f64>)> {
        // Decode the odometer index into one value per axis.
        let mut rest = index;
        let mut point = Vec::with_capacity(all_axes.len());
        for ax in &all_axes {
            point.push(ax[rest % ax.len()]);
            rest /= ax.len();
        }
        let mut cleared = point[..n_part].to_vec();
        let boosts = &point[n_part..];
        let mut supplied = 0.0;
        let mut delivered = 0.0;
        for (i, (p, &q)) in market.participants.iter().zip(&cleared).enumerate() {
            if Some(i) == balancer {
                continue;
            }
            match p.role {
                GasRole::Supply => supplied += q,
                GasRole::Demand => delivered += q,
            }
        }
        match balancer {
            Some(b) => {
                let need = delivered - supplied;
                if need < -1e-12 || need > market.participants[b].qty_max_kg_s + 1e-12 {
                    return None;
                }
                cleared[b] = need.max(0.0);
            }
            None => {
                if (supplied - delivered).abs() > 1e-9 {
                    return None;
                }
            }
        }
        let mut inj = vec![0.0; net.nodes.len()];
        for (p, &q) in market.participants.iter().zip(&cleared) {
            let n = net.node_index(p.node).unwrap();
            match p.role {
                GasRole::Supply => inj[n] += q,
                GasRole::Demand => inj[n] -= q,
            }
        }
        let profile = pressure_profile(net, &inj, boosts).ok()?;
        for c in 0..net.compressors.len() {
            if profile.flow_kg_s[net.pipes.len() + c] < -1e-9 {
                return None;
            }
        }
        let (lo, hi) = profile.feasible_reference_interval(net);
        if lo > hi + 1e-12 {
            return None;
        }
        let mut j = 0.0;
        for (p, &q) in market.participants.iter().zip(&cleared) {
            match p.role {
                GasRole::Demand => j += p.price_usd_per_kg * q,
                GasRole::Supply => j -= p.price_usd_per_kg * q,
            }
        }
        for (c, comp) in net.compressors.iter().enumerate() {
            j -= comp.cost_usd_per_kg
                * profile.flow_kg_s[net.pipes.len() + c]
                * (boosts[c].powf(comp.exponent) - 1.0);
        }
        Some((j, index, cleared, boosts.to_vec()))
    };

    // Deterministic reduction: best objective, earliest index on ties.
    let best = map_indexed(total, par, evaluate)
        .into_iter()
        .flatten()
        .fold(None::<(f64, usize, Vec<f64>, Vec<f64>)>, |acc, cand| {
            match acc {
                None => Some(cand),
                Some(best) => {
                    if cand.0 > best.0 + 1e-15 || (cand.0 >= best.0 - 1e-15 && cand.1 < best.1) {
                        Some(cand)
                    } else {
                        Some(best)
                    }
                }
            }
        });

    let (objective, _, cleared, boosts) =
        best.ok_or(GasError::InfeasibleGasNetwork)?;
    let inj = {
        let mut inj = vec![0.0; net.nodes.len()];
        for (p, &q) in market.participants.iter().zip(&cleared) {
            let n = net.node_index(p.node).unwrap();
            match p.role {
                GasRole::Supply => inj[n] += q,
                GasRole::Demand => inj[n] -= q,
            }
        }
        inj
    };
    let profile = pressure_profile(net, &inj, &boosts)?;
    let (lo, hi) = profile.feasible_reference_interval(net);
    let pressure_pa = profile.pressures_at(0.5 * (lo + hi))?;
    Ok(GasClearing {
        cleared_kg_s: cleared,
        pressure_pa,
        flow_kg_s: profile.flow_kg_s.clone(),
        boost: boosts,
        // The oracle ranks operating points; it does not price nodes.
        nodal_price_usd_per_kg: vec![0.0; net.nodes.len()],
        objective_usd_per_s: objective,
    })
}
