use super::*;
use crate::benders::{lp_relaxation, run_benders, BendersParams};
use crate::instance::testing::toy;
use crate::model::build_mip;

fn solved(inst: &Instance, mode: DeliveryMode) -> (MipModel, Vec<f64>) {
    let model = build_mip(inst, mode).unwrap();
    let res = run_benders(inst, mode, &BendersParams::default()).unwrap();
    assert!(res.proven);
    (model, res.solution)
}

fn staggered() -> Instance {
    toy(
        2,
        1,
        12,
        5,
        2,
        1,
        &[
            (0, 0, 20_000.0),
            (0, 2, 9_000.0),
            (1, 1, 19_000.0),
            (1, 3, 700.0),
        ],
    )
}

#[test]
fn exact_day_puts_everything_at_the_window() {
    let inst = staggered();
    let (model, x) = solved(&inst, DeliveryMode::ExactDay);
    let hist = delivery_histogram(&model, &inst, &x).unwrap();
    assert!((hist.total_weight() - inst.total_weight()).abs() < 1e-6);
    assert_eq!(hist.support(), Some((5, 5)));
    assert!((hist.share(5).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(hist.bins[5].products, 2);
}

#[test]
fn window_mode_stays_inside_the_window() {
    let inst = staggered();
    let (model, x) = solved(&inst, DeliveryMode::Window);
    let hist = delivery_histogram(&model, &inst, &x).unwrap();
    assert_eq!(hist.bins.len(), 6);
    assert!((hist.total_weight() - inst.total_weight()).abs() < 1e-6);
    let (lo, hi) = hist.support().unwrap();
    assert!(lo >= 3, "shortest route is 3 days, got {lo}");
    assert!(hi <= 5);
}

#[test]
fn relaxation_can_be_binned() {
    let inst = staggered();
    let model = build_mip(&inst, DeliveryMode::Window).unwrap();
    let relax = lp_relaxation(&inst, DeliveryMode::Window).unwrap();
    let hist = delivery_histogram(&model, &inst, &relax.solution).unwrap();
    assert!((hist.total_weight() - inst.total_weight()).abs() < 1e-6);
}

#[test]
fn no_demand_gives_an_empty_histogram() {
    let inst = toy(1, 1, 8, 4, 2, 1, &[]);
    let model = build_mip(&inst, DeliveryMode::Window).unwrap();
    let x = vec![0.0; model.num_cols()];
    let hist = delivery_histogram(&model, &inst, &x).unwrap();
    assert!(hist.is_empty());
    assert_eq!(hist.support(), None);
    assert_eq!(hist.share(0), None);
    assert_eq!(consolidation_share(&model, &x), None);
}

#[test]
fn broken_flows_are_rejected() {
    let inst = staggered();
    let (model, mut x) = solved(&inst, DeliveryMode::Window);
    let j = model
        .dims
        .block(VarKind::Z)
        .chain(model.dims.block(VarKind::U))
        .find(|&j| x[j] > 1.0)
        .unwrap();
    x[j] += 500.0;
    assert!(matches!(
        delivery_histogram(&model, &inst, &x),
        Err(ReportError::Infeasible { .. })
    ));
}

#[test]
fn consolidation_share_extremes() {
    let light = toy(1, 1, 10, 5, 2, 1, &[(0, 0, 900.0)]);
    let (model, x) = solved(&light, DeliveryMode::Window);
    assert_eq!(consolidation_share(&model, &x), Some(0.0));

    let full = toy(1, 1, 10, 5, 2, 1, &[(0, 0, 48_000.0)]);
    let (model, x) = solved(&full, DeliveryMode::Window);
    assert!((consolidation_share(&model, &x).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn scenario_total_adds_up() {
    let inst = staggered();
    let (model, x) = solved(&inst, DeliveryMode::Window);
    let row = ScenarioRow::from_solution("window", &model, &x).unwrap();
    let costs = objective_breakdown(&model, &x).unwrap();
    assert!((row.total - costs.grand_total()).abs() < 1e-6);
    assert!(
        (row.total - (row.pickup_fixed + row.first_leg + row.lcl + row.hold + row.fcl)).abs()
            < 1e-6
    );
    assert_eq!(row.pickup_fixed, 4.0 * 80.0);
    assert!(row.containers.fract() == 0.0);
}

#[test]
fn table_and_csv_have_one_line_per_row() {
    let mut report = ScenarioReport::default();
    let costs = CostBreakdown {
        first_leg: 100.0,
        lcl: 10.0,
        fcl: 0.0,
        hold: 0.5,
        lcl_and_hold: 10.5,
        total: 110.5,
        pickup_fixed: 80.0,
    };
    report.push(ScenarioRow::from_costs("relax", &costs, 0.25, Some(0.5)));
    report.push(ScenarioRow::from_costs("benders-window", &costs, 1.0, None));
    let csv = report.to_csv().unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("scenario,containers"));
    assert!(lines[1].starts_with("relax,0.2500,80.00,100.00,10.00,0.50,0.00,190.50,"));
    assert!(
        lines[2].ends_with(','),
        "absent share is an empty cell: {}",
        lines[2]
    );

    let table = report.to_table();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 3);
    let col = rows[0].find("total").unwrap() + "total".len();
    assert_eq!(&rows[1][col - 6..col], "190.50");
}

#[test]
fn solution_file_round_trips_and_reproduces_reports() {
    let inst = staggered();
    let (model, x) = solved(&inst, DeliveryMode::ExactDay);
    let file = SolutionFile::new("exact", &inst, &model, &x, 1.0);
    let back = SolutionFile::from_json(&file.to_json().unwrap()).unwrap();
    assert_eq!(back, file);

    let rebuilt = build_mip(&back.instance, back.mode).unwrap();
    let y = back.column_values(&rebuilt).unwrap();
    assert_eq!(y, x);
    assert_eq!(
        delivery_histogram(&rebuilt, &back.instance, &y).unwrap(),
        delivery_histogram(&model, &inst, &x).unwrap()
    );
}

#[test]
fn unknown_keys_are_reported() {
    let inst = staggered();
    let model = build_mip(&inst, DeliveryMode::ExactDay).unwrap();
    let mut file = SolutionFile::new("x", &inst, &model, &vec![0.0; model.num_cols()], 0.0);
    file.values.insert("T[7,0]".into(), 1.0);
    assert!(matches!(
        file.column_values(&model),
        Err(ReportError::File(_))
    ));
    file.values.clear();
    file.values.insert("bogus".into(), 1.0);
    assert!(matches!(
        file.column_values(&model),
        Err(ReportError::File(_))
    ));
}
