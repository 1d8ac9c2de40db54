//! Deterministic random-instance generators and independent validators used
//! by the property suites. Test support only; not part of the solver paths.

use crate::gas::{
    GasCompressor, GasMarket, GasNetwork, GasNode, GasParticipant, GasPipe, GasRole,
    DEFAULT_COMPRESSION_EXPONENT,
};
use crate::lp::{LinearProgram, LpOutcome, Sense};
use crate::power::{Generator, Line, PowerBid, PowerBidSet, PowerNetwork, PowerBus};
use crate::units;

/// Small xorshift generator so the suites do not depend on rand in the
/// library itself. Deterministic across platforms.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}

/// Random small LP with mixed senses, bound patterns and row types.
pub fn random_lp(rng: &mut SplitMix64) -> LinearProgram {
    let sense = if rng.chance(0.5) {
        Sense::Minimize
    } else {
        Sense::Maximize
    };
    let mut lp = LinearProgram::new(sense);
    let n = 1 + rng.below(5);
    let mut vars = Vec::with_capacity(n);
    for j in 0..n {
        let (lower, upper) = match rng.below(4) {
            0 => (0.0, f64::INFINITY),
            1 => (rng.range(-5.0, 0.0), rng.range(0.0, 5.0)),
            2 => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (f64::NEG_INFINITY, rng.range(0.0, 5.0)),
        };
        let obj = rng.range(-5.0, 5.0);
        vars.push(lp.add_var(format!("v{j}"), lower, upper, obj));
    }
    let rows = rng.below(5);
    for _ in 0..rows {
        let mut terms = Vec::new();
        for &v in &vars {
            if rng.chance(0.7) {
                terms.push((v, rng.range(-4.0, 4.0)));
            }
        }
        if terms.is_empty() {
            terms.push((vars[0], rng.range(0.5, 2.0)));
        }
        let rhs = rng.range(-6.0, 6.0);
        match rng.below(3) {
            0 => {
                lp.add_eq(&terms, rhs);
            }
            1 => {
                lp.add_le(&terms, rhs);
            }
            _ => {
                lp.add_ge(&terms, rhs);
            }
        }
    }
    lp
}

/// Checks every certificate the solver can emit. Panics with context on any
/// violated guarantee; returns the outcome kind for counting.
pub fn validate_lp_outcome(lp: &LinearProgram) -> &'static str {
    match lp.solve().expect("generated LPs are well-formed") {
        LpOutcome::Optimal(opt) => {
            let infeas = lp.max_infeasibility(&opt.primal);
            assert!(infeas <= 1e-7, "optimal point infeasible by {infeas}");
            let dual = opt.dual_objective(lp);
            let gap = (opt.objective - dual).abs();
            assert!(
                gap <= 1e-6 * opt.objective.abs().max(1.0),
                "duality gap {gap} (primal {} dual {dual})\n{}",
                opt.objective,
                lp.dump()
            );
            assert!(opt.dual_le.iter().all(|&w| w >= 0.0));
            assert!(
                opt.max_complementarity_defect(lp) <= 1e-6,
                "complementary slackness violated\n{}",
                lp.dump()
            );
            "optimal"
        }
        LpOutcome::Infeasible(cert) => {
            let margin = cert.violation_margin(lp);
            assert!(
                margin < -1e-8,
                "unsound infeasibility certificate, margin {margin}\n{}",
                lp.dump()
            );
            assert!(cert.le_multipliers.iter().all(|&w| w >= 0.0));
            "infeasible"
        }
        LpOutcome::Unbounded(ray) => {
            let defect = ray.max_defect(lp);
            assert!(
                defect <= 1e-7,
                "ray leaves the feasible cone by {defect}\n{}",
                lp.dump()
            );
            assert!(
                ray.improvement_rate(lp) > 1e-9,
                "ray does not improve the objective\n{}",
                lp.dump()
            );
            "unbounded"
        }
    }
}

/// Canonical three-bus study network: equal reactances on a triangle,
/// generators at every bus with costs (30, 20, 10) $/MWh, loads
/// (40, 20, 10) MW and line limits 1-2: 15, 1-3: 26, 2-3: 16 MW.
/// Frozen output of the brute-force reconstruction search in the test suite.
pub fn three_bus_network() -> PowerNetwork {
    PowerNetwork {
        buses: vec![
            PowerBus {
                id: 1,
                demand_mw: 40.0,
            },
            PowerBus {
                id: 2,
                demand_mw: 20.0,
            },
            PowerBus {
                id: 3,
                demand_mw: 10.0,
            },
        ],
        lines: vec![
            Line {
                from: 1,
                to: 2,
                reactance_pu: 2.81e-4,
                limit_mw: 15.0,
            },
            Line {
                from: 1,
                to: 3,
                reactance_pu: 2.81e-4,
                limit_mw: 26.0,
            },
            Line {
                from: 2,
                to: 3,
                reactance_pu: 2.81e-4,
                limit_mw: 16.0,
            },
        ],
        generators: vec![
            Generator {
                id: "g1".into(),
                bus: 1,
                pmin_mw: 0.0,
                pmax_mw: 100.0,
                reference_cost: 30.0,
                owner: "alpha".into(),
            },
            Generator {
                id: "g2".into(),
                bus: 2,
                pmin_mw: 0.0,
                pmax_mw: 100.0,
                reference_cost: 20.0,
                owner: "alpha".into(),
            },
            Generator {
                id: "g3".into(),
                bus: 3,
                pmin_mw: 0.0,
                pmax_mw: 58.0,
                reference_cost: 10.0,
                owner: "beta".into(),
            },
        ],
    }
}

/// Five-node gas chain: supply feeds two delivery points through two
/// compressors and two pipes. Pressure bounds 3-6 MPa everywhere; the second
/// pipe's diameter matches the first (the upstream listing's zero is treated
/// as a recording error). Deliveries 1 and 2 fuel the study network's
/// gas-fired generators.
pub fn five_node_gas() -> (GasNetwork, GasMarket) {
    let wave = 377.0;
    let mk_pipe = |from: usize, to: usize, length: f64| {
        let mut p = GasPipe::new(from, to, length, 0.6, 0.025);
        p.resistance = p.derived_resistance(wave);
        p
    };
    let net = GasNetwork {
        nodes: (1..=5)
            .map(|id| GasNode {
                id,
                pmin_pa: 3.0e6,
                pmax_pa: 6.0e6,
            })
            .collect(),
        pipes: vec![mk_pipe(2, 3, 5000.0), mk_pipe(4, 5, 8000.0)],
        compressors: vec![
            GasCompressor {
                from: 1,
                to: 2,
                alpha_max: 1.4,
                cost_usd_per_kg: 10.0,
                exponent: DEFAULT_COMPRESSION_EXPONENT,
            },
            GasCompressor {
                from: 3,
                to: 4,
                alpha_max: 1.4,
                cost_usd_per_kg: 10.0,
                exponent: DEFAULT_COMPRESSION_EXPONENT,
            },
        ],
        wave_speed_m_per_s: wave,
    };
    let market = GasMarket {
        participants: vec![
            GasParticipant {
                id: "s1".into(),
                node: 1,
                role: GasRole::Supply,
                qty_max_kg_s: units::mmbtu_per_hour_to_kg_per_s(40.0),
                price_usd_per_kg: units::usd_per_mmbtu_to_usd_per_kg(3.0),
                owner: "pipeline".into(),
            },
            GasParticipant {
                id: "d1".into(),
                node: 3,
                role: GasRole::Demand,
                qty_max_kg_s: units::mmbtu_per_hour_to_kg_per_s(19.0),
                price_usd_per_kg: units::usd_per_mmbtu_to_usd_per_kg(3.5),
                owner: "alpha".into(),
            },
            GasParticipant {
                id: "d2".into(),
                node: 5,
                role: GasRole::Demand,
                qty_max_kg_s: units::mmbtu_per_hour_to_kg_per_s(19.0),
                price_usd_per_kg: units::usd_per_mmbtu_to_usd_per_kg(3.5),
                owner: "alpha".into(),
            },
        ],
    };
    (net, market)
}

/// The five-node market with delivery 1 bidding up: price 3.5 -> 3.6
/// $/MMBtu and quantity 19 -> 26 MMBtu/h.
pub fn five_node_gas_collusion() -> (GasNetwork, GasMarket) {
    let (net, mut market) = five_node_gas();
    market.participants[1].qty_max_kg_s = units::mmbtu_per_hour_to_kg_per_s(26.0);
    market.participants[1].price_usd_per_kg = units::usd_per_mmbtu_to_usd_per_kg(3.6);
    (net, market)
}

/// Random connected power network with adequate supply, for the market-law
/// property suites.
pub fn random_power_network(rng: &mut SplitMix64) -> (PowerNetwork, PowerBidSet) {
    let n_bus = 2 + rng.below(5);
    let buses: Vec<PowerBus> = (0..n_bus)
        .map(|i| PowerBus {
            id: i + 1,
            demand_mw: rng.range(0.0, 40.0),
        })
        .collect();
    let mut lines = Vec::new();
    // Spanning tree then a few extra corridors.
    for i in 1..n_bus {
        lines.push(Line {
            from: 1 + rng.below(i),
            to: i + 1,
            reactance_pu: rng.range(1e-4, 5e-4),
            limit_mw: rng.range(15.0, 80.0),
        });
    }
    let extra = rng.below(3);
    for _ in 0..extra {
        let a = 1 + rng.below(n_bus);
        let b = 1 + rng.below(n_bus);
        if a != b && !lines.iter().any(|l| (l.from, l.to) == (a, b) || (l.to, l.from) == (a, b)) {
            lines.push(Line {
                from: a,
                to: b,
                reactance_pu: rng.range(1e-4, 5e-4),
                limit_mw: rng.range(15.0, 80.0),
            });
        }
    }
    let total_demand: f64 = buses.iter().map(|b| b.demand_mw).sum();
    let n_gen = 1 + rng.below(4);
    let mut generators = Vec::new();
    let mut bids = Vec::new();
    for g in 0..n_gen {
        let pmax = rng.range(10.0, 60.0) + 2.0 * total_demand / n_gen as f64;
        generators.push(Generator {
            id: format!("g{}", g + 1),
            bus: 1 + rng.below(n_bus),
            pmin_mw: 0.0,
            pmax_mw: pmax,
            reference_cost: rng.range(5.0, 50.0),
            owner: format!("o{}", 1 + rng.below(2)),
        });
        bids.push(PowerBid {
            price_usd_per_mwh: rng.range(5.0, 60.0),
            qty_max_mw: pmax,
            qty_min_mw: 0.0,
        });
    }
    let net = PowerNetwork {
        buses,
        lines,
        generators,
    };
    (net, PowerBidSet { bids })
}
