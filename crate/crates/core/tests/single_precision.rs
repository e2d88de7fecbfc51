mod common;

use common::stochastic::Newsvendor;
use shp_core::lp::{solve_lp, LpStatus, RowSense};
use shp_core::mip::{solve_mip, MipOptions, MipStatus};
use shp_core::sp::{solve_lshaped, BoundSide, Coupling, CouplingTarget, LShapedOptions};
use shp_core::{LinearProgramF32, MixedIntegerProgramF32, ScenariosF32, TwoStageProblemF32};

#[test]
fn lp_in_single_precision() {
    // max 3x + 2y st x + y <= 4, x + 3y <= 6, x <= 3  ->  x = 3, y = 1
    let mut lp = LinearProgramF32::new();
    let x = lp.add_var("x", 0.0, 3.0, -3.0);
    let y = lp.add_var("y", 0.0, f32::INFINITY, -2.0);
    lp.add_row("a", vec![(x, 1.0), (y, 1.0)], RowSense::Le, 4.0);
    lp.add_row("b", vec![(x, 1.0), (y, 3.0)], RowSense::Le, 6.0);
    let sol = solve_lp(&lp, None).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective + 11.0).abs() < 1e-4);
    assert!((sol.x[x] - 3.0).abs() < 1e-4 && (sol.x[y] - 1.0).abs() < 1e-4);
}

#[test]
fn mip_in_single_precision() {
    let mut lp = LinearProgramF32::new();
    let w = [5.0f32, 4.0, 3.0, 2.0];
    let v = [10.0f32, 40.0, 30.0, 50.0];
    let items: Vec<usize> = (0..4).map(|i| lp.add_var(format!("i{i}"), 0.0, 1.0, -v[i])).collect();
    lp.add_row("cap", items.iter().zip(w).map(|(&i, w)| (i, w)).collect(), RowSense::Le, 5.0);
    let opts = MipOptions { gap_tol: 0.0, ..MipOptions::default() };
    let sol = solve_mip(&MixedIntegerProgramF32::new(lp, items), &opts, None).unwrap();
    assert_eq!(sol.status, MipStatus::Optimal);
    // {2, 3} fills the capacity exactly for a value of 80
    let best = (0u32..16)
        .filter(|m| (0..4).filter(|i| m >> i & 1 == 1).map(|i| w[i]).sum::<f32>() <= 5.0)
        .map(|m| (0..4).filter(|i| m >> i & 1 == 1).map(|i| v[i]).sum::<f32>())
        .fold(0.0, f32::max);
    assert!((sol.objective + best).abs() < 1e-3, "{} vs {best}", sol.objective);
}

#[test]
fn lshaped_in_single_precision_agrees_with_double() {
    let mut first = LinearProgramF32::new();
    for (i, c) in Newsvendor::COST.iter().enumerate() {
        first.add_var(format!("x{i}"), 0.0, f32::INFINITY, *c as f32);
    }
    first.add_row("capacity", vec![(0, 1.0), (1, 1.0)], RowSense::Le, Newsvendor::CAPACITY as f32);
    let mut rec = LinearProgramF32::new();
    let mut couplings = Vec::new();
    for i in 0..2 {
        let short = rec.add_var(format!("short{i}"), 0.0, f32::INFINITY, Newsvendor::SHORTAGE[i] as f32);
        let excess = rec.add_var(format!("excess{i}"), 0.0, f32::INFINITY, Newsvendor::EXCESS as f32);
        let row = rec.add_row(format!("balance{i}"), vec![(short, 1.0), (excess, -1.0)], RowSense::Eq, 0.0);
        couplings.push(Coupling { target: CouplingTarget::Row(row), side: BoundSide::Both, constant: 0.0, first_stage: vec![(i, -1.0)], random: vec![(i, 1.0)] });
    }
    let problem = TwoStageProblemF32 { first_stage: MixedIntegerProgramF32::new(first, vec![]), recourse: rec, couplings, xi_dim: 2 };
    let scenarios = ScenariosF32 {
        xi: Newsvendor::DEMAND.iter().map(|d| d.iter().map(|&v| v as f32).collect()).collect(),
        prob: Newsvendor::PROB.iter().map(|&p| p as f32).collect(),
    };
    let sol = solve_lshaped(&problem, &scenarios, &LShapedOptions::default()).unwrap();
    let exact = solve_lp(&Newsvendor::extensive_form(), None).unwrap().objective;
    assert!(((sol.objective as f64) - exact).abs() <= 1e-4 * exact.abs(), "{} vs {exact}", sol.objective);
    let x: Vec<f64> = sol.x.iter().map(|&v| v as f64).collect();
    assert!((Newsvendor::cost(&x) - exact).abs() <= 1e-3 * exact.abs());
}
