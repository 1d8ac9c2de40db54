use super::*;

fn solve(lp: &LinearProgram) -> LpOutcome {
    lp.solve().expect("well-formed program")
}

#[test]
fn one_variable_lower_bound() {
    let mut lp = LinearProgram::new(Sense::Minimize);
    lp.add_var("x", 3.0, f64::INFINITY, 1.0);
    let out = solve(&lp);
    let opt = out.optimal().expect("optimal");
    assert!((opt.primal[0] - 3.0).abs() < 1e-9);
    assert!((opt.objective - 3.0).abs() < 1e-9);
}

#[test]
fn one_variable_bound_as_rows() {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
    lp.add_ge(&[(x, 1.0)], 3.0);
    let out = solve(&lp);
    let opt = out.optimal().unwrap();
    assert!((opt.primal[0] - 3.0).abs() < 1e-9);
    // The >= row is binding; its multiplier prices the bound.
    assert!(opt.dual_le[0] > 0.9);
}

#[test]
fn contradictory_rows_are_infeasible_with_sound_certificate() {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 0.0);
    lp.add_ge(&[(x, 1.0)], 1.0);
    lp.add_le(&[(x, 1.0)], 0.0);
    match solve(&lp) {
        LpOutcome::Infeasible(cert) => {
            assert!(cert.le_multipliers.iter().all(|&w| w >= 0.0));
            assert!(
                cert.violation_margin(&lp) < -1e-8,
                "margin {}",
                cert.violation_margin(&lp)
            );
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn unbounded_cone_returns_improving_ray() {
    let mut lp = LinearProgram::new(Sense::Maximize);
    lp.add_var("x", 0.0, f64::INFINITY, 1.0);
    match solve(&lp) {
        LpOutcome::Unbounded(ray) => {
            assert!((ray.direction[0] - 1.0).abs() < 1e-9);
            assert!(ray.max_defect(&lp) <= 1e-9);
            assert!(ray.improvement_rate(&lp) > 1e-8);
        }
        other => panic!("expected unbounded, got {other:?}"),
    }
}

#[test]
fn feasibility_point_satisfies_rows() {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = lp.add_var("x", 0.0, f64::INFINITY, 0.0);
    let y = lp.add_var("y", 0.0, f64::INFINITY, 0.0);
    lp.add_eq(&[(x, 1.0), (y, 1.0)], 1.0);
    match lp.check_feasible().unwrap() {
        Feasibility::Feasible(point) => {
            assert!((point[0] + point[1] - 1.0).abs() <= 1e-8);
            assert!(point[0] >= -1e-9 && point[1] >= -1e-9);
        }
        Feasibility::Infeasible(_) => panic!("feasible system misclassified"),
    }
}

#[test]
fn conflicting_equalities_are_infeasible() {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 0.0);
    lp.add_eq(&[(x, 1.0)], 1.0);
    lp.add_eq(&[(x, 1.0)], 2.0);
    match lp.check_feasible().unwrap() {
        Feasibility::Infeasible(cert) => assert!(cert.is_sound(&lp)),
        Feasibility::Feasible(_) => panic!("inconsistent equalities accepted"),
    }
}

#[test]
fn duality_holds_on_transport_lp() {
    // min 2a + 3b  s.t. a + b >= 4, a <= 3, b <= 3, a,b >= 0
    let mut lp = LinearProgram::new(Sense::Minimize);
    let a = lp.add_var("a", 0.0, f64::INFINITY, 2.0);
    let b = lp.add_var("b", 0.0, f64::INFINITY, 3.0);
    lp.add_ge(&[(a, 1.0), (b, 1.0)], 4.0);
    lp.add_le(&[(a, 1.0)], 3.0);
    lp.add_le(&[(b, 1.0)], 3.0);
    let out = solve(&lp);
    let opt = out.optimal().unwrap();
    assert!((opt.objective - 9.0).abs() < 1e-8); // a=3, b=1
    let gap = (opt.objective - opt.dual_objective(&lp)).abs();
    assert!(gap <= 1e-6 * opt.objective.abs().max(1.0), "gap {gap}");
    assert!(opt.max_complementarity_defect(&lp) <= 1e-6);
}

#[test]
fn duality_holds_when_maximizing() {
    // max 5x + 4y  s.t. 6x + 4y <= 24, x + 2y <= 6, x,y >= 0 -> x=3, y=1.5
    let mut lp = LinearProgram::new(Sense::Maximize);
    let x = lp.add_var("x", 0.0, f64::INFINITY, 5.0);
    let y = lp.add_var("y", 0.0, f64::INFINITY, 4.0);
    lp.add_le(&[(x, 6.0), (y, 4.0)], 24.0);
    lp.add_le(&[(x, 1.0), (y, 2.0)], 6.0);
    let out = solve(&lp);
    let opt = out.optimal().unwrap();
    assert!((opt.objective - 21.0).abs() < 1e-8);
    assert!(opt.dual_le.iter().all(|&d| d >= 0.0));
    let gap = (opt.objective - opt.dual_objective(&lp)).abs();
    assert!(gap <= 1e-6 * opt.objective.abs().max(1.0));
}

#[test]
fn equality_dual_prices_demand() {
    // min 10g  s.t. g == 7: marginal value of one more unit of rhs is 10.
    let mut lp = LinearProgram::new(Sense::Minimize);
    let g = lp.add_var("g", 0.0, f64::INFINITY, 10.0);
    lp.add_eq(&[(g, 1.0)], 7.0);
    let out = solve(&lp);
    let opt = out.optimal().unwrap();
    assert!((opt.dual_eq[0] - 10.0).abs() < 1e-9);
}

#[test]
fn resolving_with_fixed_primal_reproduces_objective() {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let a = lp.add_var("a", 0.0, 5.0, 1.0);
    let b = lp.add_var("b", 0.0, 5.0, 4.0);
    lp.add_ge(&[(a, 1.0), (b, 2.0)], 6.0);
    let first = solve(&lp).optimal().unwrap().clone();

    let mut pinned = LinearProgram::new(Sense::Minimize);
    pinned.add_var("a", first.primal[0], first.primal[0], 1.0);
    pinned.add_var("b", first.primal[1], first.primal[1], 4.0);
    let va = VarId(0);
    let vb = VarId(1);
    pinned.add_ge(&[(va, 1.0), (vb, 2.0)], 6.0);
    let second = pinned.solve().unwrap();
    let opt = second.optimal().expect("pinned primal stays feasible");
    assert!((opt.objective - first.objective).abs() <= 1e-6);
}

#[test]
fn identical_inputs_produce_identical_outputs() {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let a = lp.add_var("a", 0.0, 10.0, 3.0);
    let b = lp.add_var("b", -2.0, 10.0, -1.0);
    lp.add_le(&[(a, 1.0), (b, 1.0)], 6.0);
    lp.add_ge(&[(a, 2.0), (b, -1.0)], 1.0);
    let x = solve(&lp);
    let y = solve(&lp);
    match (x, y) {
        (LpOutcome::Optimal(p), LpOutcome::Optimal(q)) => {
            assert_eq!(p.primal, q.primal);
            assert_eq!(p.objective.to_bits(), q.objective.to_bits());
            assert_eq!(p.dual_eq, q.dual_eq);
            assert_eq!(p.dual_le, q.dual_le);
        }
        _ => panic!("expected optimal twice"),
    }
}

#[test]
fn dump_is_stable_and_ordered() {
    let mut lp = LinearProgram::new(Sense::Maximize);
    let a = lp.add_var("alpha", 0.0, 1.0, 2.0);
    let b = lp.add_var("beta", f64::NEG_INFINITY, f64::INFINITY, 0.0);
    lp.add_eq(&[(a, 1.0), (b, -1.0)], 0.5);
    lp.add_le(&[(b, 3.0)], 9.0);
    let d1 = lp.dump();
    let d2 = lp.dump();
    assert_eq!(d1, d2);
    assert!(d1.starts_with("lp sense=max vars=2 eq=1 le=1\n"));
    assert!(d1.contains("var 0 name=alpha lb=0 ub=1 obj=2"));
    assert!(d1.contains("eq 0 rhs=0.5 0=1 1=-1"));
}

#[test]
fn malformed_programs_are_rejected() {
    let mut nan_coeff = LinearProgram::new(Sense::Minimize);
    let x = nan_coeff.add_var("x", 0.0, 1.0, 0.0);
    nan_coeff.add_le(&[(x, f64::NAN)], 1.0);
    assert!(matches!(nan_coeff.solve(), Err(LpError::Malformed(_))));

    let mut dangling = LinearProgram::new(Sense::Minimize);
    dangling.add_var("x", 0.0, 1.0, 0.0);
    dangling.add_eq(&[(VarId(5), 1.0)], 0.0);
    assert!(matches!(dangling.solve(), Err(LpError::Malformed(_))));

    let mut crossed = LinearProgram::new(Sense::Minimize);
    crossed.add_var("x", 2.0, 1.0, 0.0);
    assert!(matches!(crossed.solve(), Err(LpError::Malformed(_))));
}

#[test]
fn degenerate_cycling_candidate_terminates() {
    // Beale's cycling example under naive pricing; Bland fallback must end it.
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x1 = lp.add_var("x1", 0.0, f64::INFINITY, -0.75);
    let x2 = lp.add_var("x2", 0.0, f64::INFINITY, 150.0);
    let x3 = lp.add_var("x3", 0.0, f64::INFINITY, -0.02);
    let x4 = lp.add_var("x4", 0.0, f64::INFINITY, 6.0);
    lp.add_le(&[(x1, 0.25), (x2, -60.0), (x3, -0.04), (x4, 9.0)], 0.0);
    lp.add_le(&[(x1, 0.5), (x2, -90.0), (x3, -0.02), (x4, 3.0)], 0.0);
    lp.add_le(&[(x3, 1.0)], 1.0);
    let out = solve(&lp);
    let opt = out.optimal().unwrap();
    assert!((opt.objective - -0.05).abs() < 1e-9);
}

#[test]
fn fixed_variables_are_respected() {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = lp.add_var("x", 2.0, 2.0, 1.0);
    let y = lp.add_var("y", 0.0, 10.0, 1.0);
    lp.add_eq(&[(x, 1.0), (y, 1.0)], 5.0);
    let out = solve(&lp);
    let opt = out.optimal().unwrap();
    assert!((opt.primal[0] - 2.0).abs() < 1e-12);
    assert!((opt.primal[1] - 3.0).abs() < 1e-9);
}

#[test]
fn upper_bounded_entering_flips() {
    // Optimum sits at an upper bound reachable only through a bound flip.
    let mut lp = LinearProgram::new(Sense::Maximize);
    let x = lp.add_var("x", 0.0, 2.0, 1.0);
    let y = lp.add_var("y", 0.0, 2.0, 1.0);
    lp.add_le(&[(x, 1.0), (y, 1.0)], 10.0);
    let out = solve(&lp);
    let opt = out.optimal().unwrap();
    assert!((opt.objective - 4.0).abs() < 1e-9);
}

#[test]
fn negative_lower_bounds_and_free_variables() {
    // min x + y with x free, y in [-3, -1], x - y == 4  ->  x = 1 + y, pick y=-3.
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
    let y = lp.add_var("y", -3.0, -1.0, 1.0);
    lp.add_eq(&[(x, 1.0), (y, -1.0)], 4.0);
    let out = solve(&lp);
    let opt = out.optimal().unwrap();
    assert!((opt.primal[1] - -3.0).abs() < 1e-9);
    assert!((opt.primal[0] - 1.0).abs() < 1e-9);
    assert!((opt.objective - -2.0).abs() < 1e-9);
}
