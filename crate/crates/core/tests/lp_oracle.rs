mod common;

use common::vertex_enumeration;
use proptest::prelude::*;
use shp_core::lp::{dual_objective, solve_lp, LinearProgram, LpStatus, RowSense, SimplexOptions, SimplexSolver};

/// Three buses on a triangle of equal lines, cheap unit at bus 0, expensive
/// unit at bus 1, 120 MW load at bus 2, 50 MW limit on line 0-2.
fn three_bus_dcopf() -> LinearProgram<f64> {
    let mut lp = LinearProgram::new();
    let g0 = lp.add_var("g0", 0.0, 100.0, 10.0);
    let g1 = lp.add_var("g1", 0.0, 100.0, 30.0);
    let th: Vec<usize> = (0..3).map(|b| lp.add_var(format!("theta{b}"), -0.5, 0.5, 0.0)).collect();
    let lines = [(0usize, 1usize, 100.0, 80.0), (1, 2, 100.0, 80.0), (0, 2, 100.0, 50.0)];
    let load = [0.0, 0.0, 120.0];
    let gens = [(g0, 0usize), (g1, 1usize)];
    for b in 0..3 {
        // injections minus outgoing flows: sum_g g - sum_l B (th_from - th_to) = load
        let mut coeffs = Vec::new();
        for &(g, at) in &gens {
            if at == b {
                coeffs.push((g, 1.0));
            }
        }
        for &(f, t, s, _) in &lines {
            if f == b {
                coeffs.push((th[f], -s));
                coeffs.push((th[t], s));
            }
            if t == b {
                coeffs.push((th[f], s));
                coeffs.push((th[t], -s));
            }
        }
        lp.add_row(format!("bal{b}"), coeffs, RowSense::Eq, load[b]);
    }
    for (k, &(f, t, s, cap)) in lines.iter().enumerate() {
        lp.add_range_row(format!("flow{k}"), vec![(th[f], s), (th[t], -s)], -cap, cap);
    }
    lp
}

#[test]
fn dcopf_matches_vertex_enumeration() {
    let lp = three_bus_dcopf();
    let (oracle, _) = vertex_enumeration(&lp).expect("feasible");
    let sol = solve_lp(&lp, None).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()), "{} vs {}", sol.objective, oracle);
    // line 0-2 binds: cheap unit limited to 50 + share through 0-1-2
    assert!(lp.max_violation(&sol.x) <= 1e-7);
}

#[test]
fn transportation_duals_match_potentials() {
    // supplies 20, 40; demands 25, 25; costs [[1,3],[4,2]]
    let mut lp = LinearProgram::new();
    let c = [[1.0, 3.0], [4.0, 2.0]];
    let mut x = [[0usize; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            x[i][j] = lp.add_var(format!("x{i}{j}"), 0.0, f64::INFINITY, c[i][j]);
        }
    }
    let supply = [20.0, 40.0];
    let demand = [25.0, 25.0];
    for i in 0..2 {
        lp.add_row(format!("s{i}"), vec![(x[i][0], 1.0), (x[i][1], 1.0)], RowSense::Le, supply[i]);
    }
    for j in 0..2 {
        lp.add_row(format!("d{j}"), vec![(x[0][j], 1.0), (x[1][j], 1.0)], RowSense::Ge, demand[j]);
    }
    let sol = solve_lp(&lp, None).unwrap();
    assert!((sol.objective - 90.0).abs() < 1e-9);
    let expected = [-3.0, 0.0, 4.0, 2.0];
    for (d, e) in sol.duals.iter().zip(expected) {
        assert!((d - e).abs() < 1e-9, "{:?}", sol.duals);
    }
    // complementary slackness
    for (i, row) in lp.rows.iter().enumerate() {
        let act = row.activity(&sol.x);
        let slack = (act - row.lo).abs().min((row.hi - act).abs());
        assert!(sol.duals[i].abs() * slack <= 1e-7);
    }
}

#[test]
fn warm_start_from_optimal_basis_takes_no_pivots() {
    let lp = three_bus_dcopf();
    let first = solve_lp(&lp, None).unwrap();
    assert!(first.iterations > 0);
    let again = solve_lp(&lp, Some(&first.basis)).unwrap();
    assert_eq!(again.iterations, 0);
    assert!((again.objective - first.objective).abs() < 1e-9);
}

#[test]
fn resolve_after_rhs_change_uses_previous_basis() {
    let lp = three_bus_dcopf();
    let mut solver = SimplexSolver::new(&lp, SimplexOptions::default());
    let base = solver.solve();
    assert!(base.is_optimal());
    for load in [90.0, 130.0, 60.0, 150.0] {
        solver.set_row_bounds(2, load, load);
        let warm = solver.solve();
        let mut cold_lp = lp.clone();
        cold_lp.set_row_bounds(2, load, load);
        let cold = solve_lp(&cold_lp, None).unwrap();
        assert_eq!(warm.status, cold.status);
        assert!((warm.objective - cold.objective).abs() <= 1e-7 * (1.0 + cold.objective.abs()));
    }
}

#[test]
fn cost_scaling_keeps_argmin() {
    let lp = three_bus_dcopf();
    let a = solve_lp(&lp, None).unwrap();
    let mut scaled = lp.clone();
    scaled.obj.iter_mut().for_each(|c| *c *= 7.5);
    let b = solve_lp(&scaled, None).unwrap();
    assert!((b.objective - 7.5 * a.objective).abs() <= 1e-7 * b.objective.abs());
    for (u, v) in a.x.iter().zip(&b.x) {
        assert!((u - v).abs() <= 1e-9);
    }
}

fn random_lp(seed_vals: &[f64], n: usize, m: usize) -> LinearProgram<f64> {
    let mut it = seed_vals.iter().copied().cycle();
    let mut next = move || it.next().unwrap();
    let mut lp = LinearProgram::new();
    for j in 0..n {
        let lo = -2.0 + 2.0 * next();
        let hi = lo + 0.5 + 4.0 * next();
        lp.add_var(format!("x{j}"), lo, hi, -5.0 + 10.0 * next());
    }
    for i in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, (-3.0 + 6.0 * next()).round())).collect();
        let sense = match (next() * 3.0) as usize {
            0 => RowSense::Le,
            1 => RowSense::Ge,
            _ => RowSense::Eq,
        };
        lp.add_row(format!("r{i}"), coeffs, sense, -3.0 + 6.0 * next());
    }
    lp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_bounded_lps_match_enumeration(vals in prop::collection::vec(0.0f64..1.0, 64), n in 2usize..5, m in 1usize..4) {
        let lp = random_lp(&vals, n, m);
        let oracle = vertex_enumeration(&lp);
        let sol = solve_lp(&lp, None).unwrap();
        match oracle {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some((obj, _)) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - obj).abs() <= 1e-6 * (1.0 + obj.abs()));
                prop_assert!(lp.max_violation(&sol.x) <= 1e-7);
                let dual = dual_objective(&lp, &sol.duals, &sol.reduced_costs);
                prop_assert!((dual - sol.objective).abs() <= 1e-6 * (1.0 + sol.objective.abs()));
            }
        }
    }
}
