use super::*;
use crate::instance::testing::toy;
use crate::simplex::{solve_lp, LpParams};

fn lp_optimum(model: &MipModel) -> Vec<f64> {
    let out = solve_lp(&model.lp, &LpParams::default()).unwrap();
    out.optimal().expect("feasible model").x.clone()
}

#[test]
fn single_pickup_dimensions() {
    let inst = toy(1, 1, 10, 9, 2, 1, &[(0, 0, 100.0)]);
    let m = build_mip(&inst, DeliveryMode::Window).unwrap();
    assert_eq!(m.num_cols(), 70);
    assert_eq!(m.num_rows(), 10 + 10 + 10 + 10);
    let tally = m.row_tally();
    assert_eq!(tally[0], 10);
    assert_eq!(tally[1], 10);
    assert_eq!(tally[2], 10);
    assert_eq!(tally[3] + tally[4], 10);
    assert_eq!(tally[3], 1, "only day 9 is at or past the window");
    assert_eq!(m.integer_columns().len(), 10);

    let exact = build_mip(&inst, DeliveryMode::ExactDay).unwrap();
    assert_eq!(exact.num_cols(), 60);
    assert!(exact.dims.block(VarKind::N).is_empty());
}

#[test]
fn closed_form_counts() {
    let inst = toy(3, 2, 12, 6, 2, 1, &[(0, 0, 10.0), (2, 3, 5.0)]);
    for mode in [DeliveryMode::Window, DeliveryMode::ExactDay] {
        let m = build_mip(&inst, mode).unwrap();
        let (p, s, h, d) = (3, 1, 2, 12);
        let pd = if mode == DeliveryMode::Window {
            p * d
        } else {
            0
        };
        assert_eq!(m.num_cols(), 2 * p * s * h * d + 3 * p * h * d + h * d + pd);
        assert_eq!(m.num_rows(), p * s * d + h * d + p * h * d + p * d);
        let tally = m.row_tally();
        assert_eq!(tally, [p * s * d, h * d, p * h * d, p * (d - 6), p * 6]);
    }
}

#[test]
fn assembly_is_deterministic() {
    let inst = toy(2, 2, 8, 5, 2, 1, &[(0, 0, 10.0), (1, 1, 30.0)]);
    let a = build_mip(&inst, DeliveryMode::Window).unwrap();
    let b = build_mip(&inst, DeliveryMode::Window).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.dump(), b.dump());
    assert!(a.dump().contains("capacity capacity[1,3] <= 0"));
}

#[test]
fn capacity_rows_hold_only_u_and_t() {
    let inst = toy(2, 2, 8, 5, 2, 1, &[(0, 0, 10.0), (1, 1, 30.0)]);
    let m = build_mip(&inst, DeliveryMode::Window).unwrap();
    for j in 0..m.num_cols() {
        let key = m.key(j);
        let (idx, val) = m.lp.column(j);
        for (&r, &v) in idx.iter().zip(val) {
            if m.row_tag(r) != RowTag::Capacity {
                continue;
            }
            match key {
                VarKey::U { h, d, .. } => {
                    assert_eq!(v, 1.0);
                    assert_eq!(r, m.capacity_row(h, d));
                }
                VarKey::T { h, d } => {
                    assert_eq!(v, -48_000.0);
                    assert_eq!(r, m.capacity_row(h, d));
                }
                other => panic!("{other} in a capacity row"),
            }
        }
    }
    for r in 0..m.num_rows() {
        if m.row_tag(r) == RowTag::Capacity {
            assert_eq!(m.lp.rhs()[r], 0.0);
        }
    }
}

#[test]
fn cost_partition() {
    let inst = toy(1, 1, 6, 4, 2, 1, &[(0, 0, 1.0)]);
    let m = build_mip(&inst, DeliveryMode::Window).unwrap();
    for j in 0..m.num_cols() {
        let class = m.cost_class(j);
        let c = m.lp.objective()[j];
        match m.key(j).kind() {
            VarKind::U | VarKind::N => {
                assert_eq!(class, CostClass::Free);
                assert_eq!(c, 0.0);
            }
            VarKind::T => assert_eq!((class, c), (CostClass::Fcl, 4773.0)),
            VarKind::Z => assert_eq!((class, c), (CostClass::LclAndHold, 0.255)),
            VarKind::I => assert_eq!((class, c), (CostClass::LclAndHold, 0.001)),
            VarKind::X => assert_eq!((class, c), (CostClass::FirstLeg, 0.29)),
            VarKind::Y => assert_eq!((class, c), (CostClass::FirstLeg, 0.87)),
        }
    }
}

#[test]
fn zero_demand_costs_nothing() {
    let inst = toy(2, 1, 6, 4, 2, 1, &[(0, 0, 0.0), (1, 1, 0.0)]);
    let m = build_mip(&inst, DeliveryMode::Window).unwrap();
    assert!(m.lp.rhs().iter().all(|&b| b == 0.0));
    let x = lp_optimum(&m);
    assert_eq!(m.lp.objective_value(&x), 0.0);
    let b = objective_breakdown(&m, &x).unwrap();
    assert_eq!(b.total, 0.0);
    assert_eq!(b.pickup_fixed, 0.0, "empty pickups carry no fixed charge");
}

#[test]
fn breakdown_components() {
    let inst = toy(1, 1, 10, 9, 2, 1, &[(0, 0, 100.0)]);
    let m = build_mip(&inst, DeliveryMode::Window).unwrap();
    let mut x = vec![0.0; m.num_cols()];
    let b = objective_breakdown(&m, &x).unwrap();
    assert_eq!(
        (b.first_leg, b.lcl_and_hold, b.fcl, b.total),
        (0.0, 0.0, 0.0, 0.0)
    );
    assert_eq!(b.pickup_fixed, 80.0);
    x[m.column(&VarKey::T { h: 0, d: 3 }).unwrap()] = 1.0;
    let b = objective_breakdown(&m, &x).unwrap();
    assert_eq!(b.fcl, 4773.0);
    assert_eq!(b.grand_total(), 4853.0);
    assert!(matches!(
        objective_breakdown(&m, &x[1..]),
        Err(ModelError::LengthMismatch {
            expected: 70,
            got: 69
        })
    ));
}

#[test]
fn residuals_name_the_violation() {
    let inst = toy(1, 1, 10, 9, 2, 1, &[(0, 0, 100.0)]);
    let m = build_mip(&inst, DeliveryMode::Window).unwrap();
    let mut x = lp_optimum(&m);
    let report = check_solution(&m, &x);
    assert!(
        report.max_row() <= 1e-6 && report.negativity == 0.0,
        "{report:?}"
    );

    let j = m
        .column(&VarKey::X {
            p: 0,
            s: 0,
            h: 0,
            d: 0,
        })
        .unwrap();
    let z = m.column(&VarKey::Z { p: 0, h: 0, d: 2 }).unwrap();
    let mut bumped = x.clone();
    bumped[j] += 5.0;
    bumped[z] += 5.0;
    // The extra land freight reaches the gateway and leaves LCL, so only the
    // pickup row and the customer side see the surplus.
    assert_eq!(check_solution(&m, &bumped).family(RowTag::Pickup), 5.0);

    for t in m.integer_columns() {
        x[t] = 0.0;
    }
    x[m.column(&VarKey::T { h: 0, d: 4 }).unwrap()] = 0.5;
    assert_eq!(check_solution(&m, &x).integrality, 0.5);
}

#[test]
fn mass_is_conserved() {
    let inst = toy(
        2,
        2,
        12,
        6,
        2,
        1,
        &[(0, 0, 700.0), (0, 2, 300.0), (1, 4, 55.5)],
    );
    for mode in [DeliveryMode::Window, DeliveryMode::ExactDay] {
        let m = build_mip(&inst, mode).unwrap();
        let x = lp_optimum(&m);
        assert!(check_solution(&m, &x).max_row() <= 1e-6);
        let delivered: f64 = arrivals(&m, &inst, &x).iter().flatten().sum();
        assert!(
            (delivered - inst.total_weight()).abs() < 1e-6,
            "{delivered}"
        );
    }
}

#[test]
fn exact_day_solutions_are_window_feasible() {
    let inst = toy(
        2,
        2,
        12,
        6,
        2,
        1,
        &[(0, 0, 700.0), (0, 2, 300.0), (1, 4, 55.5)],
    );
    let exact = build_mip(&inst, DeliveryMode::ExactDay).unwrap();
    let window = build_mip(&inst, DeliveryMode::Window).unwrap();
    let x = lp_optimum(&exact);
    let mut padded = x.clone();
    padded.resize(window.num_cols(), 0.0);
    let report = check_solution(&window, &padded);
    assert!(
        report.max_row() <= 1e-6 && report.fixed_zero == 0.0,
        "{report:?}"
    );
    assert!(window.lp.objective_value(&lp_optimum(&window)) <= exact.lp.objective_value(&x) + 1e-9);
}

#[test]
fn unroutable_pickup_is_rejected() {
    let inst = toy(1, 1, 20, 2, 3, 1, &[(0, 0, 5.0)]);
    match build_mip(&inst, DeliveryMode::Window) {
        Err(ModelError::Routes(diag)) => assert_eq!(diag.issues.len(), 1),
        other => panic!("expected route failure, got {other:?}"),
    }
}
