use super::steady::{mass_balance_residual, weymouth_residual_mpa2};
use super::*;
use crate::testkit::{five_node_gas, five_node_gas_collusion};
use crate::units;
use crate::Parallelism;

fn single_pipe(length_m: f64, diameter_m: f64) -> GasNetwork {
    let mut pipe = GasPipe::new(1, 2, length_m, diameter_m, 0.025);
    pipe.resistance = pipe.derived_resistance(377.0);
    GasNetwork {
        nodes: vec![
            GasNode {
                id: 1,
                pmin_pa: 3.0e6,
                pmax_pa: 6.0e6,
            },
            GasNode {
                id: 2,
                pmin_pa: 3.0e6,
                pmax_pa: 6.0e6,
            },
        ],
        pipes: vec![pipe],
        compressors: vec![],
        wave_speed_m_per_s: 377.0,
    }
}

#[test]
fn resistance_matches_hand_formula() {
    let pipe = GasPipe::new(2, 3, 5000.0, 0.6, 0.025);
    let a: f64 = 377.0;
    let area = std::f64::consts::PI * 0.6f64 * 0.6 / 4.0;
    let expected = a * a * 0.025 * 5000.0 / (area * area * 0.6);
    assert!((pipe.resistance - expected).abs() <= 1e-9 * expected);
    // A doctored stored value fails validation.
    let mut net = single_pipe(5000.0, 0.6);
    net.pipes[0].resistance *= 1.0 + 1e-6;
    assert!(matches!(net.validate(), Err(GasError::InvalidNetwork(_))));
}

#[test]
fn single_pipe_matches_closed_form() {
    let net = single_pipe(5000.0, 0.6);
    let phi = 0.2; // kg/s
    let p1 = 5.5e6;
    let state = simulate_steady_state(&net, &[phi, -phi], &[], (1, p1)).unwrap();
    let beta = net.pipes[0].resistance;
    let expected_pi2 = p1 * p1 - beta * phi * phi.abs();
    let got = state.pressure_pa[1] * state.pressure_pa[1];
    assert!(
        (got - expected_pi2).abs() <= 1e-10 * expected_pi2,
        "pi {got} vs {expected_pi2}"
    );
    assert!((state.flow_kg_s[0] - phi).abs() < 1e-12);
}

#[test]
fn reverse_flow_raises_downstream_pressure() {
    let net = single_pipe(5000.0, 0.6);
    let phi = -0.15;
    let state = simulate_steady_state(&net, &[phi, -phi], &[], (1, 4.0e6)).unwrap();
    assert!(state.pressure_pa[1] > 4.0e6);
}

#[test]
fn zero_injections_uniform_pressure() {
    let (net, _) = five_node_gas();
    let state = simulate_steady_state(&net, &[0.0; 5], &[1.0, 1.0], (1, 4.0e6)).unwrap();
    for &p in &state.pressure_pa {
        assert!((p - 4.0e6).abs() < 1e-6);
    }
    for &f in &state.flow_kg_s {
        assert!(f.abs() < 1e-12);
    }
}

#[test]
fn compressor_boost_multiplies_squared_pressure() {
    let (net, _) = five_node_gas();
    let state = simulate_steady_state(&net, &[0.0; 5], &[1.2, 1.0], (1, 4.0e6)).unwrap();
    let expected = (4.0e6f64 * 4.0e6 * 1.2 * 1.2).sqrt();
    assert!((state.pressure_pa[1] - expected).abs() < 1e-3);
}

#[test]
fn looped_network_newton_closes_cycles() {
    // Triangle of pipes with unequal lengths forces a genuine loop solve.
    let mk = |from, to, len| {
        let mut p = GasPipe::new(from, to, len, 0.4, 0.02);
        p.resistance = p.derived_resistance(377.0);
        p
    };
    let net = GasNetwork {
        nodes: (1..=3)
            .map(|id| GasNode {
                id,
                pmin_pa: 2.0e6,
                pmax_pa: 8.0e6,
            })
            .collect(),
        pipes: vec![mk(1, 2, 4000.0), mk(2, 3, 6000.0), mk(1, 3, 9000.0)],
        compressors: vec![],
        wave_speed_m_per_s: 377.0,
    };
    let inj = [1.5, -0.4, -1.1];
    let state = simulate_steady_state(&net, &inj, &[], (1, 6.0e6)).unwrap();
    assert!(mass_balance_residual(&net, &inj, &state) <= 1e-9);
    assert!(weymouth_residual_mpa2(&net, &state) <= 1e-10);
    // Parallel paths share the transfer: both 1->2 and 1->3 carry flow.
    assert!(state.flow_kg_s[0] > 0.0 && state.flow_kg_s[2] > 0.0);
}

#[test]
fn unbalanced_injections_rejected() {
    let net = single_pipe(5000.0, 0.6);
    assert!(matches!(
        simulate_steady_state(&net, &[1.0, -0.5], &[], (1, 4.0e6)),
        Err(GasError::UnbalancedInjections(_))
    ));
}

#[test]
fn full_nominations_clear_when_capacity_allows() {
    let (net, market) = five_node_gas();
    let clearing = clear_gas_market(&net, &market, &SlpOptions::default()).unwrap();
    for (p, &q) in market.participants.iter().zip(&clearing.cleared_kg_s) {
        if p.role == GasRole::Demand {
            assert!(
                (q - p.qty_max_kg_s).abs() < 1e-9,
                "{} curtailed: {q} vs {}",
                p.id,
                p.qty_max_kg_s
            );
        }
    }
    let supplied = clearing.total_supplied(&market);
    let delivered = clearing.total_delivered(&market);
    assert!((supplied - delivered).abs() <= 1e-8);
    // Uncongested: every nodal price sits at the supply offer.
    let supply_price = market.participants[0].price_usd_per_kg;
    for &p in &clearing.nodal_price_usd_per_kg {
        assert!((p - supply_price).abs() < 1e-6, "price {p}");
    }
}

#[test]
fn collusive_overbidding_curtails_the_second_delivery() {
    let (net, market) = five_node_gas_collusion();
    let clearing = clear_gas_market(&net, &market, &SlpOptions::default()).unwrap();
    let d1 = units::kg_per_s_to_mmbtu_per_hour(clearing.cleared_kg_s[1]);
    let d2 = units::kg_per_s_to_mmbtu_per_hour(clearing.cleared_kg_s[2]);
    assert!((d1 - 26.0).abs() < 1e-6, "delivery 1 cleared {d1}");
    assert!((d2 - 14.0).abs() < 1e-6, "delivery 2 cleared {d2}");
}

#[test]
fn clearing_satisfies_physics_invariants() {
    let (net, market) = five_node_gas_collusion();
    let clearing = clear_gas_market(&net, &market, &SlpOptions::default()).unwrap();
    let mut inj = vec![0.0; net.nodes.len()];
    for (p, &q) in market.participants.iter().zip(&clearing.cleared_kg_s) {
        let n = net.node_index(p.node).unwrap();
        match p.role {
            GasRole::Supply => inj[n] += q,
            GasRole::Demand => inj[n] -= q,
        }
    }
    let state = GasFlowState {
        pressure_pa: clearing.pressure_pa.clone(),
        flow_kg_s: clearing.flow_kg_s.clone(),
    };
    assert!(mass_balance_residual(&net, &inj, &state) <= 1e-8);
    assert!(weymouth_residual_mpa2(&net, &state) <= 1e-6);
    for (n, node) in net.nodes.iter().enumerate() {
        assert!(clearing.pressure_pa[n] >= node.pmin_pa - 1e-6);
        assert!(clearing.pressure_pa[n] <= node.pmax_pa + 1e-6);
    }
    for (c, comp) in net.compressors.iter().enumerate() {
        assert!(clearing.boost[c] >= 1.0 - 1e-12);
        assert!(clearing.boost[c] <= comp.alpha_max + 1e-9);
    }
    // Direction law on pipes.
    for (pi, p) in net.pipes.iter().enumerate() {
        let i = net.node_index(p.from).unwrap();
        let j = net.node_index(p.to).unwrap();
        let flow = clearing.flow_kg_s[pi];
        if flow.abs() > 1e-9 {
            assert_eq!(
                flow.signum(),
                (clearing.pressure_pa[i] - clearing.pressure_pa[j]).signum()
            );
        }
    }
}

#[test]
fn pressure_limited_pipe_curtails_delivery() {
    // Long narrow pipe: the pressure budget, not nominations, caps flow.
    let mut net = single_pipe(50_000.0, 0.1);
    net.pipes[0].resistance = net.pipes[0].derived_resistance(377.0);
    let market = GasMarket {
        participants: vec![
            GasParticipant {
                id: "s".into(),
                node: 1,
                role: GasRole::Supply,
                qty_max_kg_s: 3.0,
                price_usd_per_kg: 1.0,
                owner: "x".into(),
            },
            GasParticipant {
                id: "d".into(),
                node: 2,
                role: GasRole::Demand,
                qty_max_kg_s: 2.0,
                price_usd_per_kg: 4.0,
                owner: "y".into(),
            },
        ],
    };
    let clearing = clear_gas_market(&net, &market, &SlpOptions::default()).unwrap();
    let delivered = clearing.cleared_kg_s[1];
    assert!(delivered < 2.0 - 1e-3, "pressure limit should bind: {delivered}");
    assert!(delivered > 0.5);
    // The limiting profile pins both ends of the pipe.
    assert!((clearing.pressure_pa[0] - 6.0e6).abs() < 1e3);
    assert!((clearing.pressure_pa[1] - 3.0e6).abs() < 1e3);
    // Independent grid search agrees within 2 percent.
    let grid = OracleGrid {
        qty_step_kg_s: 0.02,
        alpha_step: 0.1,
        max_points: 5_000_000,
    };
    let oracle = brute_force_ogf(&net, &market, &grid, Parallelism::Sequential).unwrap();
    let rel = (clearing.objective_usd_per_s - oracle.objective_usd_per_s).abs()
        / oracle.objective_usd_per_s.abs();
    assert!(rel <= 0.02, "slp {} oracle {}", clearing.objective_usd_per_s, oracle.objective_usd_per_s);
}

#[test]
fn oracle_matches_slp_on_single_pipe_toy() {
    let net = single_pipe(5000.0, 0.6);
    let market = GasMarket {
        participants: vec![
            GasParticipant {
                id: "s".into(),
                node: 1,
                role: GasRole::Supply,
                qty_max_kg_s: 0.3,
                price_usd_per_kg: 0.15,
                owner: "x".into(),
            },
            GasParticipant {
                id: "d".into(),
                node: 2,
                role: GasRole::Demand,
                qty_max_kg_s: 0.25,
                price_usd_per_kg: 0.20,
                owner: "y".into(),
            },
        ],
    };
    let clearing = clear_gas_market(&net, &market, &SlpOptions::default()).unwrap();
    let grid = OracleGrid {
        qty_step_kg_s: 0.005,
        alpha_step: 0.1,
        max_points: 5_000_000,
    };
    let oracle = brute_force_ogf(&net, &market, &grid, Parallelism::Sequential).unwrap();
    let rel = (clearing.objective_usd_per_s - oracle.objective_usd_per_s).abs()
        / oracle.objective_usd_per_s.abs().max(1e-9);
    assert!(rel <= 0.02);
}

#[test]
fn oracle_zero_demand_returns_null_state() {
    let net = single_pipe(5000.0, 0.6);
    let market = GasMarket {
        participants: vec![
            GasParticipant {
                id: "s".into(),
                node: 1,
                role: GasRole::Supply,
                qty_max_kg_s: 0.5,
                price_usd_per_kg: 0.2,
                owner: "x".into(),
            },
            GasParticipant {
                id: "d".into(),
                node: 2,
                role: GasRole::Demand,
                qty_max_kg_s: 0.0,
                price_usd_per_kg: 0.3,
                owner: "y".into(),
            },
        ],
    };
    let grid = OracleGrid::default();
    let oracle = brute_force_ogf(&net, &market, &grid, Parallelism::Sequential).unwrap();
    assert_eq!(oracle.objective_usd_per_s, 0.0);
    assert!(oracle.flow_kg_s.iter().all(|f| f.abs() < 1e-12));
}

#[test]
fn oracle_finds_the_only_feasible_boost() {
    // Disjoint pressure windows across a compressor: only alpha = 1.2 on the
    // grid maps the upstream window into the downstream one.
    let net = GasNetwork {
        nodes: vec![
            GasNode {
                id: 1,
                pmin_pa: 4.999e6,
                pmax_pa: 5.001e6,
            },
            GasNode {
                id: 2,
                pmin_pa: 5.998e6,
                pmax_pa: 6.002e6,
            },
        ],
        pipes: vec![],
        compressors: vec![GasCompressor {
            from: 1,
            to: 2,
            alpha_max: 1.4,
            cost_usd_per_kg: 10.0,
            exponent: DEFAULT_COMPRESSION_EXPONENT,
        }],
        wave_speed_m_per_s: 377.0,
    };
    let market = GasMarket {
        participants: vec![
            GasParticipant {
                id: "s".into(),
                node: 1,
                role: GasRole::Supply,
                qty_max_kg_s: 0.05,
                price_usd_per_kg: 0.1,
                owner: "x".into(),
            },
            GasParticipant {
                id: "d".into(),
                node: 2,
                role: GasRole::Demand,
                qty_max_kg_s: 0.05,
                price_usd_per_kg: 0.5,
                owner: "y".into(),
            },
        ],
    };
    let grid = OracleGrid {
        qty_step_kg_s: 0.05,
        alpha_step: 0.1,
        max_points: 5_000_000,
    };
    let oracle = brute_force_ogf(&net, &market, &grid, Parallelism::Sequential).unwrap();
    assert!((oracle.boost[0] - 1.2).abs() < 1e-12, "boost {}", oracle.boost[0]);
}

#[test]
fn oracle_rejects_oversized_networks() {
    let mut nodes = Vec::new();
    let mut pipes = Vec::new();
    for id in 1..=13 {
        nodes.push(GasNode {
            id,
            pmin_pa: 3.0e6,
            pmax_pa: 6.0e6,
        });
        if id > 1 {
            let mut p = GasPipe::new(id - 1, id, 1000.0, 0.3, 0.01);
            p.resistance = p.derived_resistance(377.0);
            pipes.push(p);
        }
    }
    let net = GasNetwork {
        nodes,
        pipes,
        compressors: vec![],
        wave_speed_m_per_s: 377.0,
    };
    let market = GasMarket {
        participants: vec![],
    };
    assert!(matches!(
        brute_force_ogf(&net, &market, &OracleGrid::default(), Parallelism::Sequential),
        Err(GasError::ProblemTooLarge(_))
    ));
}

#[test]
fn lowering_a_bid_never_raises_delivery_under_scarcity() {
    // Supply cap binds; delivery 2's cleared volume is monotone in its bid.
    let (net, base_market) = five_node_gas_collusion();
    let mut last = f64::INFINITY;
    for price_mmbtu in [3.5, 3.2, 3.0, 2.9] {
        let mut market = base_market.clone();
        market.participants[2].price_usd_per_kg =
            units::usd_per_mmbtu_to_usd_per_kg(price_mmbtu);
        let clearing = clear_gas_market(&net, &market, &SlpOptions::default()).unwrap();
        let d2 = clearing.cleared_kg_s[2];
        assert!(d2 <= last + 1e-9, "bid {price_mmbtu} raised delivery");
        last = d2;
    }
}

#[test]
fn slp_matches_oracle_on_five_node_fixture() {
    let (net, market) = five_node_gas_collusion();
    let clearing = clear_gas_market(&net, &market, &SlpOptions::default()).unwrap();
    let grid = OracleGrid {
        qty_step_kg_s: 0.001,
        alpha_step: 0.2,
        max_points: 5_000_000,
    };
    let oracle = brute_force_ogf(&net, &market, &grid, Parallelism::Sequential).unwrap();
    let rel = (clearing.objective_usd_per_s - oracle.objective_usd_per_s).abs()
        / oracle.objective_usd_per_s.abs();
    assert!(
        rel <= 0.02,
        "slp {} vs oracle {}",
        clearing.objective_usd_per_s,
        oracle.objective_usd_per_s
    );
}
