//! Market-power monitoring: constrained-area identification, conduct and
//! impact tests, mitigation, and the LP-duality market-power certificate.

mod certificate;

pub use certificate::{market_power_certificate, CertificateVerdict};

use crate::power::{clear_market, DispatchResult, PowerBidSet, PowerError, PowerNetwork};
use serde::Serialize;
use thiserror::Error;

/// Load perturbation used by the constrained-area probe, MW.
pub const AREA_PROBE_MW: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MonitorMode {
    /// Fixed ratio-4 / $100-adder thresholds.
    Formal,
    /// Narrow constrained area: threshold from net annual fixed cost spread
    /// over binding hours.
    Nca,
    /// Broad constrained area: formal thresholds plus the sub-$25 exemption
    /// and shift-factor screening.
    Bca,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorConfig {
    pub mode: MonitorMode,
    /// $/MW of new generation per year, NCA threshold numerator.
    pub nca_net_annual_fixed_cost: f64,
    /// Hours the interface binds per year, capped at 2000.
    pub nca_constrained_hours: f64,
    pub bca_price_adder: f64,
    pub bca_ratio: f64,
    pub bca_exempt_below: f64,
    /// Shift-factor cutoff for pulling generators into a broad area.
    pub cgsfc_cutoff: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            mode: MonitorMode::Formal,
            nca_net_annual_fixed_cost: 44_100.0,
            nca_constrained_hours: 2000.0,
            bca_price_adder: 100.0,
            bca_ratio: 4.0,
            bca_exempt_below: 25.0,
            cgsfc_cutoff: 0.05,
        }
    }
}

impl MonitorConfig {
    pub fn nca_threshold(&self) -> f64 {
        self.nca_net_annual_fixed_cost / self.nca_constrained_hours
    }

    pub fn validate(&self) -> Result<(), MonitorError> {
        if !(self.nca_constrained_hours > 0.0 && self.nca_constrained_hours <= 2000.0) {
            return Err(MonitorError::InvalidConfig(format!(
                "constrained hours {} outside (0, 2000]",
                self.nca_constrained_hours
            )));
        }
        if !(self.cgsfc_cutoff >= 0.03 && self.cgsfc_cutoff <= 0.06) {
            return Err(MonitorError::InvalidConfig(format!(
                "shift-factor cutoff {} outside [0.03, 0.06]",
                self.cgsfc_cutoff
            )));
        }
        if !(self.bca_ratio > 1.0) {
            return Err(MonitorError::InvalidConfig("ratio must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("invalid monitor config: {0}")]
    InvalidConfig(String),
    #[error("reference level must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error(transparent)]
    Power(#[from] PowerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConductTrigger {
    Ratio,
    Adder,
    Exempt,
    NotTested,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConductResult {
    pub pass: bool,
    pub trigger: Option<ConductTrigger>,
}

impl ConductResult {
    fn pass_plain() -> Self {
        ConductResult {
            pass: true,
            trigger: None,
        }
    }
}

/// Conduct test. Thresholds are strict: a bid exactly at ratio times the
/// reference (or exactly adder above it) does not trigger.
pub fn conduct_test(
    bid: f64,
    reference: f64,
    cfg: &MonitorConfig,
) -> Result<ConductResult, MonitorError> {
    if !(reference > 0.0) {
        return Err(MonitorError::NonPositiveReference(reference));
    }
    let formal = |cfg: &MonitorConfig| {
        // Adder reported first when both thresholds are crossed.
        if bid > cfg.bca_price_adder + reference {
            ConductResult {
                pass: false,
                trigger: Some(ConductTrigger::Adder),
            }
        } else if bid > cfg.bca_ratio * reference {
            ConductResult {
                pass: false,
                trigger: Some(ConductTrigger::Ratio),
            }
        } else {
            ConductResult::pass_plain()
        }
    };
    Ok(match cfg.mode {
        MonitorMode::Formal => formal(cfg),
        MonitorMode::Nca => {
            if bid > reference + cfg.nca_threshold() {
                ConductResult {
                    pass: false,
                    trigger: Some(ConductTrigger::Adder),
                }
            } else {
                ConductResult::pass_plain()
            }
        }
        MonitorMode::Bca => {
            if bid < cfg.bca_exempt_below {
                ConductResult {
                    pass: true,
                    trigger: Some(ConductTrigger::Exempt),
                }
            } else {
                formal(cfg)
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpactResult {
    pub pass: bool,
    pub lmp_with_bid: f64,
    pub lmp_with_reference: f64,
}

/// Pure impact threshold: does the bid-clearing LMP exceed what the
/// reference clearing allows? Strict thresholds, matching the conduct test.
pub fn impact_exceeds(lmp_bid: f64, lmp_ref: f64, cfg: &MonitorConfig) -> bool {
    match cfg.mode {
        MonitorMode::Formal | MonitorMode::Bca => {
            // "whichever is lower" of tripling and the adder.
            lmp_bid > (3.0 * lmp_ref).min(lmp_ref + cfg.bca_price_adder)
        }
        MonitorMode::Nca => lmp_bid - lmp_ref > cfg.nca_threshold(),
    }
}

/// Impact test: re-clears with the failed generator's bid replaced by its
/// reference and compares the LMP at its bus.
pub fn impact_test(
    net: &PowerNetwork,
    bids: &PowerBidSet,
    failed_gen: &str,
    cfg: &MonitorConfig,
    base: &DispatchResult,
) -> Result<ImpactResult, MonitorError> {
    let gi = net
        .generator_index(failed_gen)
        .ok_or_else(|| PowerError::UnknownGenerator(failed_gen.to_string()))?;
    let bus = net.bus_index(net.generators[gi].bus).unwrap();
    let mut ref_bids = bids.clone();
    ref_bids.bids[gi].price_usd_per_mwh = net.generators[gi].reference_cost;
    let ref_res = clear_market(net, &ref_bids)?;
    let lmp_bid = base.lmp[bus];
    let lmp_ref = ref_res.lmp[bus];
    Ok(ImpactResult {
        pass: !impact_exceeds(lmp_bid, lmp_ref, cfg),
        lmp_with_bid: lmp_bid,
        lmp_with_reference: lmp_ref,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConstrainedArea {
    /// Bus ids (not indices) inside the area.
    pub buses: Vec<usize>,
    /// Generator ids subject to testing.
    pub generators: Vec<String>,
    /// Indices of binding lines in the clearing that defined the area.
    pub binding_lines: Vec<usize>,
}

impl ConstrainedArea {
    pub fn is_empty(&self) -> bool {
        self.buses.is_empty() && self.generators.is_empty()
    }
}

/// Identifies the constrained area of a cleared market. A bus is inside the
/// area when a small load increase there can only be served by the bus's own
/// generators: holding those at their cleared output makes the re-dispatch
/// infeasible. With no binding lines the area is empty and nothing is
/// tested.
pub fn detect_constrained_area(
    net: &PowerNetwork,
    bids: &PowerBidSet,
    res: &DispatchResult,
    cfg: &MonitorConfig,
) -> Result<ConstrainedArea, MonitorError> {
    if res.binding_lines.is_empty() {
        return Ok(ConstrainedArea::default());
    }
    let mut area_buses = Vec::new();
    for (b, bus) in net.buses.iter().enumerate() {
        let mut bumped = net.clone();
        bumped.buses[b].demand_mw += AREA_PROBE_MW;

        let mut frozen_bids = bids.clone();
        for (gi, g) in net.generators.iter().enumerate() {
            if net.bus_index(g.bus).unwrap() == b {
                let p = res.p_mw[gi].clamp(g.pmin_mw, g.pmax_mw);
                frozen_bids.bids[gi].qty_min_mw = p;
                frozen_bids.bids[gi].qty_max_mw = p;
            }
        }
        let in_area = match clear_market(&bumped, &frozen_bids) {
            Ok(_) => false,
            Err(PowerError::InfeasibleDispatch(_)) => true,
            Err(e) => return Err(e.into()),
        };
        if in_area {
            area_buses.push(bus.id);
        }
    }

    let mut gens: Vec<String> = net
        .generators
        .iter()
        .filter(|g| area_buses.contains(&g.bus))
        .map(|g| g.id.clone())
        .collect();

    // Broad-area screening: generators moving a binding line by more than
    // the shift-factor cutoff are tested too.
    if cfg.mode == MonitorMode::Bca {
        let gsf = crate::power::compute_gsf(net)?;
        for (gi, g) in net.generators.iter().enumerate() {
            if gens.contains(&g.id) {
                continue;
            }
            let exposed = res
                .binding_lines
                .iter()
                .any(|&li| gsf[gi][li].abs() > cfg.cgsfc_cutoff);
            if exposed {
                gens.push(g.id.clone());
            }
        }
    }

    Ok(ConstrainedArea {
        buses: area_buses,
        generators: gens,
        binding_lines: res.binding_lines.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenMonitorRecord {
    pub gen_id: String,
    pub reference_cost: f64,
    pub bid_cost: f64,
    pub conduct: ConductResult,
    pub impact: Option<ImpactResult>,
    pub mitigated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorReport {
    pub records: Vec<GenMonitorRecord>,
    /// Generators mitigated only through common ownership in the area.
    pub owner_cascade: Vec<String>,
    pub area: ConstrainedArea,
}

impl MonitorReport {
    pub fn any_mitigated(&self) -> bool {
        self.records.iter().any(|r| r.mitigated) || !self.owner_cascade.is_empty()
    }

    /// One structured text record per generator.
    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for r in &self.records {
            let conduct = if r.conduct.pass { "pass" } else { "fail" };
            let trigger = match r.conduct.trigger {
                Some(ConductTrigger::Ratio) => "ratio",
                Some(ConductTrigger::Adder) => "adder",
                Some(ConductTrigger::Exempt) => "exempt",
                Some(ConductTrigger::NotTested) => "not-tested",
                None => "-",
            };
            write!(
                out,
                "gen={} reference={:.2} bid={:.2} conduct={conduct} trigger={trigger}",
                r.gen_id, r.reference_cost, r.bid_cost
            )
            .unwrap();
            if let Some(imp) = &r.impact {
                write!(
                    out,
                    " impact={} lmp_bid={:.2} lmp_ref={:.2}",
                    if imp.pass { "pass" } else { "fail" },
                    imp.lmp_with_bid,
                    imp.lmp_with_reference
                )
                .unwrap();
            }
            writeln!(out, " mitigated={}", r.mitigated).unwrap();
        }
        if !self.owner_cascade.is_empty() {
            writeln!(out, "owner-cascade: {}", self.owner_cascade.join(",")).unwrap();
        }
        writeln!(
            out,
            "constrained-area buses: {:?} generators: {:?}",
            self.area.buses, self.area.generators
        )
        .unwrap();
        out
    }
}

/// Full monitoring pipeline: clear, find the constrained area, run conduct
/// tests inside it, impact tests on conduct failures, and flag mitigations
/// with the same-owner cascade.
pub fn run_monitor(
    net: &PowerNetwork,
    bids: &PowerBidSet,
    cfg: &MonitorConfig,
) -> Result<MonitorReport, MonitorError> {
    cfg.validate()?;
    let res = clear_market(net, bids)?;
    let area = detect_constrained_area(net, bids, &res, cfg)?;

    let mut records = Vec::with_capacity(net.generators.len());
    for (gi, g) in net.generators.iter().enumerate() {
        let bid = bids.bids[gi].price_usd_per_mwh;
        if !area.generators.contains(&g.id) {
            records.push(GenMonitorRecord {
                gen_id: g.id.clone(),
                reference_cost: g.reference_cost,
                bid_cost: bid,
                conduct: ConductResult {
                    pass: true,
                    trigger: Some(ConductTrigger::NotTested),
                },
                impact: None,
                mitigated: false,
            });
            continue;
        }
        let conduct = conduct_test(bid, g.reference_cost, cfg)?;
        let impact = if conduct.pass {
            None
        } else {
            Some(impact_test(net, bids, &g.id, cfg, &res)?)
        };
        let mitigated = impact.map(|i| !i.pass).unwrap_or(false);
        records.push(GenMonitorRecord {
            gen_id: g.id.clone(),
            reference_cost: g.reference_cost,
            bid_cost: bid,
            conduct,
            impact,
            mitigated,
        });
    }

    // Same-owner cascade within the area.
    let mitigated_owners: Vec<String> = records
        .iter()
        .filter(|r| r.mitigated)
        .map(|r| {
            net.generators[net.generator_index(&r.gen_id).unwrap()]
                .owner
                .clone()
        })
        .collect();
    let owner_cascade: Vec<String> = net
        .generators
        .iter()
        .filter(|g| {
            mitigated_owners.contains(&g.owner)
                && area.generators.contains(&g.id)
                && !records
                    .iter()
                    .any(|r| r.gen_id == g.id && r.mitigated)
        })
        .map(|g| g.id.clone())
        .collect();

    Ok(MonitorReport {
        records,
        owner_cascade,
        area,
    })
}

/// Replaces every mitigated generator's price bid (and its same-owner
/// cascade within the area) with the reference level.
pub fn mitigate(net: &PowerNetwork, bids: &PowerBidSet, report: &MonitorReport) -> PowerBidSet {
    let mut out = bids.clone();
    for r in &report.records {
        if r.mitigated {
            let gi = net.generator_index(&r.gen_id).unwrap();
            out.bids[gi].price_usd_per_mwh = net.generators[gi].reference_cost;
        }
    }
    for id in &report.owner_cascade {
        let gi = net.generator_index(id).unwrap();
        out.bids[gi].price_usd_per_mwh = net.generators[gi].reference_cost;
    }
    out
}
