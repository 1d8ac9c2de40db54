//! LP-duality market-power certificate.
//!
//! For a generator set G* with offer quantities fixed, two feasibility tests
//! decide whether G* can raise its offer prices without losing dispatch:
//! the stationarity system of the cost-maximization program (price variables
//! free for G*, multipliers signed for every dispatch constraint), and the
//! dispatch program with G*'s generation pinned to zero. When the first is
//! feasible and the second is not, G* sets the price without limit.

use crate::lp::{Feasibility, LinearProgram, Sense, VarId};
use crate::power::{build_opf, PowerBidSet, PowerError, PowerNetwork};

#[derive(Debug, Clone, PartialEq)]
pub enum CertificateVerdict {
    /// G* can escalate its offer prices without bound.
    Unbounded,
    /// Escalation is capped; the witness dispatch serves demand with G*
    /// producing nothing.
    Bounded { witness_p_mw: Vec<f64> },
}

/// Builds the pinned-dispatch feasibility program: the full set of dispatch
/// rows with the G* generators' output forced to zero.
fn pinned_dispatch_lp(
    net: &PowerNetwork,
    bids: &PowerBidSet,
    gstar: &[usize],
) -> Result<(LinearProgram, Vec<VarId>), PowerError> {
    let opf = build_opf(net, bids)?;
    let mut lp = opf.lp.clone();
    for &gi in gstar {
        lp.add_eq(&[(opf.p_vars[gi], 1.0)], 0.0);
    }
    Ok((lp, opf.p_vars))
}

/// Builds the stationarity feasibility program over (x_c, lambda, mu >= 0):
/// one equality per dispatch variable (G* price coefficients become free
/// variables), with multipliers for every balance and inequality row.
fn stationarity_lp(
    net: &PowerNetwork,
    bids: &PowerBidSet,
    gstar: &[usize],
) -> Result<LinearProgram, PowerError> {
    let opf = build_opf(net, bids)?;
    let src = &opf.lp;
    let n_vars = src.n_vars();
    let mut lp = LinearProgram::new(Sense::Minimize);

    let price_vars: Vec<Option<VarId>> = (0..net.generators.len())
        .map(|gi| {
            if gstar.contains(&gi) {
                Some(lp.add_var(
                    format!("price_{}", net.generators[gi].id),
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                    0.0,
                ))
            } else {
                None
            }
        })
        .collect();
    let lambda: Vec<VarId> = (0..src.n_eq_rows())
        .map(|i| lp.add_var(format!("lambda_{i}"), f64::NEG_INFINITY, f64::INFINITY, 0.0))
        .collect();
    let mu: Vec<VarId> = (0..src.n_le_rows())
        .map(|i| lp.add_var(format!("mu_{i}"), 0.0, f64::INFINITY, 0.0))
        .collect();

    // Transpose the dispatch rows into per-variable stationarity columns.
    let mut columns: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n_vars];
    for (i, row) in src.eq_rows().iter().enumerate() {
        for &(v, c) in &row.terms {
            columns[v].push((lambda[i], c));
        }
    }
    for (i, row) in src.le_rows().iter().enumerate() {
        for &(v, c) in &row.terms {
            columns[v].push((mu[i], c));
        }
    }

    let slack_theta = opf.theta_vars[opf.slack_bus];
    for v in 0..n_vars {
        if v == slack_theta.0 {
            continue; // pinned angle has no stationarity condition
        }
        let mut terms = columns[v].clone();
        let mut rhs = 0.0;
        if let Some(gi) = opf.p_vars.iter().position(|pv| pv.0 == v) {
            match price_vars[gi] {
                Some(xc) => terms.push((xc, 1.0)),
                None => rhs = -bids.bids[gi].price_usd_per_mwh,
            }
        }
        lp.add_eq(&terms, rhs);
    }
    Ok(lp)
}

/// Decides whether the generators in `gstar_ids` hold market power under the
/// offered quantity limits: `Unbounded` exactly when the stationarity system
/// is feasible and the pinned dispatch is not.
pub fn market_power_certificate(
    net: &PowerNetwork,
    bids: &PowerBidSet,
    gstar_ids: &[String],
) -> Result<CertificateVerdict, PowerError> {
    let gstar: Vec<usize> = gstar_ids
        .iter()
        .map(|id| {
            net.generator_index(id)
                .ok_or_else(|| PowerError::UnknownGenerator(id.clone()))
        })
        .collect::<Result<_, _>>()?;

    let stationarity = stationarity_lp(net, bids, &gstar)?;
    let stationarity_ok = stationarity.check_feasible()?.is_feasible();

    let (pinned, p_vars) = pinned_dispatch_lp(net, bids, &gstar)?;
    match pinned.check_feasible()? {
        Feasibility::Feasible(point) => Ok(CertificateVerdict::Bounded {
            witness_p_mw: p_vars.iter().map(|v| point[v.0]).collect(),
        }),
        Feasibility::Infeasible(_) if stationarity_ok => Ok(CertificateVerdict::Unbounded),
        Feasibility::Infeasible(_) => {
            // Escalation cannot be certified without a stationary price
            // system; treat as bounded with no witness dispatch.
            Ok(CertificateVerdict::Bounded {
                witness_p_mw: Vec::new(),
            })
        }
    }
}
