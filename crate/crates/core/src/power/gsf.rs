//! Generation shift factors and LMP decomposition.

use super::{DispatchResult, PowerError, PowerNetwork};
use crate::linalg::lu_solve;

/// MW flow change on each line per MW injected at each generator's bus and
/// withdrawn at the slack bus. Rows follow `net.generators`, columns follow
/// `net.lines`. Slack-bus generators have all-zero rows.
pub fn compute_gsf(net: &PowerNetwork) -> Result<Vec<Vec<f64>>, PowerError> {
    net.validate()?;
    let n = net.buses.len();
    let slack = net.slack_index();

    // Reduced susceptance Laplacian without the slack row/column.
    let reduced_index: Vec<Option<usize>> = (0..n)
        .map(|b| {
            if b == slack {
                None
            } else if b < slack {
                Some(b)
            } else {
                Some(b - 1)
            }
        })
        .collect();
    let nr = n - 1;
    let mut lap = vec![vec![0.0; nr]; nr];
    for l in &net.lines {
        let i = net.bus_index(l.from).unwrap();
        let j = net.bus_index(l.to).unwrap();
        let b = 1.0 / l.reactance_pu;
        if let Some(ri) = reduced_index[i] {
            lap[ri][ri] += b;
        }
        if let Some(rj) = reduced_index[j] {
            lap[rj][rj] += b;
        }
        if let (Some(ri), Some(rj)) = (reduced_index[i], reduced_index[j]) {
            lap[ri][rj] -= b;
            lap[rj][ri] -= b;
        }
    }

    // Angle response per injection bus, computed once per distinct bus.
    let mut theta_cache: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut rows = Vec::with_capacity(net.generators.len());
    for g in &net.generators {
        let bus = net.bus_index(g.bus).unwrap();
        if bus == slack {
            rows.push(vec![0.0; net.lines.len()]);
            continue;
        }
        if theta_cache[bus].is_none() {
            let mut rhs = vec![0.0; nr];
            rhs[reduced_index[bus].unwrap()] = 1.0;
            let sol = lu_solve(lap.clone(), rhs)
                .ok_or(PowerError::DisconnectedNetwork)?;
            let mut theta = vec![0.0; n];
            for b in 0..n {
                if let Some(rb) = reduced_index[b] {
                    theta[b] = sol[rb];
                }
            }
            theta_cache[bus] = Some(theta);
        }
        let theta = theta_cache[bus].as_ref().unwrap();
        let row: Vec<f64> = net
            .lines
            .iter()
            .map(|l| {
                let i = net.bus_index(l.from).unwrap();
                let j = net.bus_index(l.to).unwrap();
                (theta[i] - theta[j]) / l.reactance_pu
            })
            .collect();
        rows.push(row);
    }
    Ok(rows)
}

/// Splits each bus LMP into (energy, congestion): the energy component is
/// the slack-bus LMP and the parts sum back to the LMP exactly.
pub fn lmp_decomposition(res: &DispatchResult, net: &PowerNetwork) -> Vec<(f64, f64)> {
    let energy = res.lmp[net.slack_index()];
    res.lmp.iter().map(|&l| (energy, l - energy)).collect()
}
