use super::*;
use crate::instance::testing::toy;
use crate::model::{build_mip, check_solution, DeliveryMode, VarKey, VarKind};

fn single(lp: LpProblem, integer: Vec<usize>) -> MilpProblem {
    MilpProblem {
        lp,
        integer,
        upper: Vec::new(),
        start: None,
    }
}

#[test]
fn container_count_is_a_ceiling() {
    // min T  s.t.  100 <= 48000 T
    let lp = LpProblem::from_triplets(
        vec![RowSense::Le],
        vec![-100.0],
        vec![1.0],
        &[(0, 0, -48_000.0)],
    )
    .unwrap();
    let out = solve_milp(&single(lp, vec![0]), &MilpParams::default()).unwrap();
    assert_eq!(out.status, MilpStatus::Optimal);
    assert_eq!(out.incumbent.unwrap(), vec![1.0]);
    assert_eq!(out.objective, 1.0);
    assert!(out.root_bound < 1.0);
}

#[test]
fn full_container_load() {
    let inst = toy(1, 1, 10, 9, 2, 1, &[(0, 0, 48_000.0)]);
    let m = build_mip(&inst, DeliveryMode::Window).unwrap();
    let out = solve_milp(&MilpProblem::from_model(&m), &MilpParams::default()).unwrap();
    assert_eq!(out.status, MilpStatus::Optimal);
    // Land to the gateway, one container straight through, no holding.
    let expected = 48_000.0 * 0.29 + 4773.0;
    assert!((out.objective - expected).abs() < 1e-6, "{}", out.objective);
    let x = out.incumbent.unwrap();
    let sum = |kind: VarKind| -> f64 { m.dims.block(kind).map(|j| x[j]).sum() };
    assert_eq!(sum(VarKind::T), 1.0);
    assert!((sum(VarKind::U) - 48_000.0).abs() < 1e-6);
    assert!(sum(VarKind::Z).abs() < 1e-6);
    assert!(check_solution(&m, &x).passes(1e-6));
    assert_eq!(x[m.column(&VarKey::T { h: 0, d: 2 }).unwrap()], 1.0);
}

#[test]
fn integral_root_needs_one_node() {
    let inst = toy(2, 1, 8, 5, 2, 1, &[(0, 0, 0.0), (1, 2, 0.0)]);
    let m = build_mip(&inst, DeliveryMode::Window).unwrap();
    let out = solve_milp(&MilpProblem::from_model(&m), &MilpParams::default()).unwrap();
    assert_eq!(
        (out.status, out.nodes, out.objective),
        (MilpStatus::Optimal, 1, 0.0)
    );
}

#[test]
fn infeasible_relaxation_and_integer_infeasibility() {
    let lp = LpProblem::from_triplets(vec![RowSense::Le], vec![-1.0], vec![1.0], &[(0, 0, 1.0)])
        .unwrap();
    let out = solve_milp(&single(lp, vec![0]), &MilpParams::default()).unwrap();
    assert_eq!(out.status, MilpStatus::Infeasible);
    assert!(out.incumbent.is_none());

    // 2x = 1 has a fractional solution only.
    let lp =
        LpProblem::from_triplets(vec![RowSense::Eq], vec![1.0], vec![1.0], &[(0, 0, 2.0)]).unwrap();
    let out = solve_milp(&single(lp, vec![0]), &MilpParams::default()).unwrap();
    assert_eq!(out.status, MilpStatus::Infeasible);
    assert_eq!(out.nodes, 3);
}

fn knapsack() -> MilpProblem {
    // max 5a + 4b + 3c  s.t.  2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8, binaries.
    let trips = [
        (0, 0, 2.0),
        (0, 1, 3.0),
        (0, 2, 1.0),
        (1, 0, 4.0),
        (1, 1, 1.0),
        (1, 2, 2.0),
        (2, 0, 3.0),
        (2, 1, 4.0),
        (2, 2, 2.0),
    ];
    let lp = LpProblem::from_triplets(
        vec![RowSense::Le; 3],
        vec![5.5, 11.0, 8.5],
        vec![-5.0, -4.0, -3.0],
        &trips,
    )
    .unwrap();
    MilpProblem {
        lp,
        integer: vec![0, 1, 2],
        upper: vec![(0, 1.0), (1, 1.0), (2, 1.0)],
        start: None,
    }
}

#[test]
fn knapsack_against_enumeration() {
    let problem = knapsack();
    let mut best = f64::INFINITY;
    for mask in 0..8u32 {
        let x: Vec<f64> = (0..3).map(|i| ((mask >> i) & 1) as f64).collect();
        let act = problem.lp.row_activity(&x);
        if act.iter().zip(problem.lp.rhs()).all(|(a, b)| a <= b) {
            best = best.min(problem.lp.objective_value(&x));
        }
    }
    let out = solve_milp(
        &problem,
        &MilpParams {
            log: true,
            ..MilpParams::default()
        },
    )
    .unwrap();
    assert_eq!(out.status, MilpStatus::Optimal);
    assert!((out.objective - best).abs() < 1e-9);
    assert!(out.root_bound <= out.objective + 1e-9);
    assert!(out.gap <= 1e-9);
    assert!(out
        .log_csv()
        .starts_with("node,depth,bound,incumbent\n0,0,"));
    let incumbents: Vec<f64> = out.log.iter().map(|e| e.incumbent).collect();
    assert!(incumbents.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn node_limit_is_reported() {
    let out = solve_milp(
        &knapsack(),
        &MilpParams {
            node_limit: 1,
            ..MilpParams::default()
        },
    )
    .unwrap();
    assert_eq!(out.status, MilpStatus::NodeLimit);
    assert!(out.bound <= out.objective);
}

#[test]
fn deterministic() {
    let a = solve_milp(
        &knapsack(),
        &MilpParams {
            log: true,
            ..MilpParams::default()
        },
    )
    .unwrap();
    let b = solve_milp(
        &knapsack(),
        &MilpParams {
            log: true,
            ..MilpParams::default()
        },
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn warm_start_keeps_the_optimum() {
    let cold = solve_milp(&knapsack(), &MilpParams::default()).unwrap();
    for start in [
        vec![1.0, 0.0, 1.0],
        vec![1.0, 1.0, 1.0],
        vec![0.5, 0.0, 0.0],
    ] {
        let problem = MilpProblem {
            start: Some(start),
            ..knapsack()
        };
        let warm = solve_milp(&problem, &MilpParams::default()).unwrap();
        assert_eq!(warm.status, MilpStatus::Optimal);
        assert!((warm.objective - cold.objective).abs() < 1e-9);
    }
    // The starting point is feasible but infeasible ones are ignored.
    assert!(knapsack().is_feasible(&[1.0, 0.0, 1.0], 1e-9));
    assert!(!knapsack().is_feasible(&[1.0, 1.0, 1.0], 1e-9));
    assert!(!knapsack().is_feasible(&[0.5, 0.0, 0.0], 1e-9));
}
