use super::*;
use crate::testkit::three_bus_network;

fn cents(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

fn lmp_cents(res: &DispatchResult) -> Vec<i64> {
    res.lmp.iter().map(|&l| cents(l)).collect()
}

fn two_bus() -> PowerNetwork {
    PowerNetwork {
        buses: vec![
            PowerBus {
                id: 1,
                demand_mw: 0.0,
            },
            PowerBus {
                id: 2,
                demand_mw: 10.0,
            },
        ],
        lines: vec![Line {
            from: 1,
            to: 2,
            reactance_pu: 2.81e-4,
            limit_mw: 50.0,
        }],
        generators: vec![Generator {
            id: "g1".into(),
            bus: 1,
            pmin_mw: 0.0,
            pmax_mw: 40.0,
            reference_cost: 20.0,
            owner: "o".into(),
        }],
    }
}

#[test]
fn opf_structure_two_bus() {
    let net = two_bus();
    let bids = PowerBidSet::reference(&net);
    let opf = build_opf(&net, &bids).unwrap();
    assert_eq!(opf.lp.n_vars(), 3); // P, theta1 (pinned), theta2
    assert_eq!(opf.lp.n_eq_rows(), 2);
    let (lo, hi) = opf.lp.bounds(opf.theta_vars[opf.slack_bus]);
    assert_eq!((lo, hi), (0.0, 0.0));
}

#[test]
fn opf_structure_three_bus() {
    let net = three_bus_network();
    let bids = PowerBidSet::reference(&net);
    let opf = build_opf(&net, &bids).unwrap();
    assert_eq!(opf.lp.n_vars(), 6); // 3 P + 3 theta
    assert_eq!(opf.lp.n_eq_rows(), 3);
    assert_eq!(opf.lp.n_le_rows(), 12); // 6 line rows + 6 generator rows
    assert_eq!(opf.line_rows.len(), 3);
    assert_eq!(opf.gen_rows.len(), 3);
}

#[test]
fn supply_shortage_is_infeasible() {
    let mut net = two_bus();
    net.buses[1].demand_mw = 100.0; // above the generator's 40 MW
    let bids = PowerBidSet::reference(&net);
    match clear_market(&net, &bids) {
        Err(PowerError::InfeasibleDispatch(cert)) => {
            let opf = build_opf(&net, &bids).unwrap();
            assert!(cert.is_sound(&opf.lp));
        }
        other => panic!("expected infeasible dispatch, got {other:?}"),
    }
}

#[test]
fn uncongested_single_generator_prices_uniformly() {
    let net = two_bus();
    let bids = PowerBidSet::reference(&net);
    let res = clear_market(&net, &bids).unwrap();
    assert_eq!(lmp_cents(&res), vec![2000, 2000]);
    assert!(res.binding_lines.is_empty());
    assert!(res.balance_residual(&net) <= 1e-6);
}

#[test]
fn three_bus_base_case_prices_by_local_bid() {
    let net = three_bus_network();
    let bids = PowerBidSet::reference(&net);
    let res = clear_market(&net, &bids).unwrap();
    assert_eq!(lmp_cents(&res), vec![3000, 2000, 1000]);
    assert!(res.is_congested());
    // The corridor into bus 1 from the cheap generator is saturated.
    assert!(res
        .binding_lines
        .iter()
        .any(|&l| (net.lines[l].from, net.lines[l].to) == (1, 3)));
}

#[test]
fn three_bus_price_spike_does_not_move_lmps() {
    let net = three_bus_network();
    let mut bids = PowerBidSet::reference(&net);
    bids.bids[0].price_usd_per_mwh = 100.0;
    let res = clear_market(&net, &bids).unwrap();
    assert_eq!(lmp_cents(&res), vec![3000, 2000, 1000]);
    assert!(res.p_mw[0].abs() < 1e-9);
}

#[test]
fn three_bus_high_load_gives_bidder_the_price() {
    let mut net = three_bus_network();
    net.buses[0].demand_mw = 50.0;
    let mut bids = PowerBidSet::reference(&net);
    bids.bids[0].price_usd_per_mwh = 100.0;
    let res = clear_market(&net, &bids).unwrap();
    assert_eq!(lmp_cents(&res), vec![10000, 2000, 1000]);
}

#[test]
fn three_bus_wide_limits_remove_congestion() {
    let mut net = three_bus_network();
    for l in &mut net.lines {
        l.limit_mw = 30.0;
    }
    let bids = PowerBidSet::reference(&net);
    let res = clear_market(&net, &bids).unwrap();
    assert_eq!(lmp_cents(&res), vec![2000, 2000, 2000]);
    assert!(res.binding_lines.is_empty());
}

#[test]
fn three_bus_without_gen2_prices_above_any_bid() {
    let mut net = three_bus_network();
    net.generators.remove(1);
    let bids = PowerBidSet::reference(&net);
    let res = clear_market(&net, &bids).unwrap();
    assert_eq!(lmp_cents(&res), vec![3000, 5000, 1000]);
}

#[test]
fn three_bus_negative_lmp_under_tight_corridor() {
    let mut net = three_bus_network();
    net.lines[0].limit_mw = 10.0; // line 1-2
    net.buses[1].demand_mw = 5.0;
    let bids = PowerBidSet::reference(&net);
    let res = clear_market(&net, &bids).unwrap();
    assert_eq!(lmp_cents(&res), vec![3000, -1000, 1000]);
}

#[test]
fn gsf_two_bus_full_transfer() {
    let net = two_bus();
    // Generator at bus 2 (non-slack) must shift everything over the line.
    let mut net2 = net.clone();
    net2.generators[0].bus = 2;
    let gsf = compute_gsf(&net2).unwrap();
    assert!((gsf[0][0].abs() - 1.0).abs() < 1e-9);
}

#[test]
fn gsf_slack_generator_row_is_zero() {
    let net = two_bus();
    let gsf = compute_gsf(&net).unwrap();
    assert!(gsf[0].iter().all(|&v| v.abs() < 1e-12));
}

#[test]
fn gsf_equal_reactance_triangle_magnitudes() {
    let net = three_bus_network();
    let gsf = compute_gsf(&net).unwrap();
    // Slack generator row all zero, every other entry is 1/3 or 2/3.
    for (gi, row) in gsf.iter().enumerate() {
        for &v in row {
            if gi == 0 {
                assert!(v.abs() < 1e-9);
            } else {
                let m = v.abs();
                assert!(
                    (m - 1.0 / 3.0).abs() < 1e-9 || (m - 2.0 / 3.0).abs() < 1e-9,
                    "unexpected shift factor {v}"
                );
            }
        }
    }
}

#[test]
fn decomposition_components_sum_to_lmp() {
    let net = three_bus_network();
    let bids = PowerBidSet::reference(&net);
    let res = clear_market(&net, &bids).unwrap();
    let parts = lmp_decomposition(&res, &net);
    for (b, &(energy, congestion)) in parts.iter().enumerate() {
        assert_eq!(energy, res.lmp[net.slack_index()]);
        assert!((energy + congestion - res.lmp[b]).abs() < 1e-12);
    }
}

#[test]
fn decomposition_uncongested_has_zero_congestion() {
    let net = two_bus();
    let bids = PowerBidSet::reference(&net);
    let res = clear_market(&net, &bids).unwrap();
    for (energy, congestion) in lmp_decomposition(&res, &net) {
        assert!((energy - 20.0).abs() < 1e-9);
        assert!(congestion.abs() < 1e-9);
    }
}

#[test]
fn single_bus_decomposition_is_energy_only() {
    let net = PowerNetwork {
        buses: vec![PowerBus {
            id: 7,
            demand_mw: 3.0,
        }],
        lines: vec![],
        generators: vec![Generator {
            id: "g".into(),
            bus: 7,
            pmin_mw: 0.0,
            pmax_mw: 10.0,
            reference_cost: 12.5,
            owner: "o".into(),
        }],
    };
    let bids = PowerBidSet::reference(&net);
    let res = clear_market(&net, &bids).unwrap();
    let parts = lmp_decomposition(&res, &net);
    assert!((parts[0].0 - 12.5).abs() < 1e-9);
    assert!(parts[0].1.abs() < 1e-12);
}

#[test]
fn disconnected_network_is_rejected() {
    let net = PowerNetwork {
        buses: vec![
            PowerBus {
                id: 1,
                demand_mw: 0.0,
            },
            PowerBus {
                id: 2,
                demand_mw: 1.0,
            },
        ],
        lines: vec![],
        generators: vec![Generator {
            id: "g".into(),
            bus: 1,
            pmin_mw: 0.0,
            pmax_mw: 10.0,
            reference_cost: 10.0,
            owner: "o".into(),
        }],
    };
    assert!(matches!(
        build_opf(&net, &PowerBidSet::reference(&net)),
        Err(PowerError::DisconnectedNetwork)
    ));
}

#[test]
fn negative_demand_is_rejected() {
    let mut net = two_bus();
    net.buses[0].demand_mw = -5.0;
    assert!(matches!(
        net.validate(),
        Err(PowerError::InvalidNetwork(_))
    ));
}

#[test]
fn dispatch_respects_offered_limits_and_flows() {
    let net = three_bus_network();
    let bids = PowerBidSet::reference(&net);
    let res = clear_market(&net, &bids).unwrap();
    for (gi, bid) in bids.bids.iter().enumerate() {
        assert!(res.p_mw[gi] >= bid.qty_min_mw - 1e-6);
        assert!(res.p_mw[gi] <= bid.qty_max_mw + 1e-6);
    }
    for (li, l) in net.lines.iter().enumerate() {
        assert!(res.flow_mw[li].abs() <= l.limit_mw + 1e-6);
    }
    assert!(res.balance_residual(&net) <= 1e-6);
}
