mod common;

use common::{vertex_oracle, DenseLp, OracleResult};
use freightcon::simplex::{
    solve_lp, solve_lp_warm, verify_certificate, LpParams, LpProblem, LpStatus, RowSense,
};
use proptest::prelude::*;

fn check_against_oracle(lp: &DenseLp, params: &LpParams) -> Result<(), String> {
    let problem = lp.to_problem();
    let outcome = solve_lp(&problem, params).map_err(|e| e.to_string())?;
    let oracle = vertex_oracle(lp);
    if outcome.status() != oracle.status() {
        return Err(format!(
            "status {:?} vs oracle {:?} for {lp:?}",
            outcome.status(),
            oracle
        ));
    }
    if let (Some(sol), OracleResult::Optimal(best)) = (outcome.optimal(), oracle) {
        if (sol.objective - best).abs() > 1e-7 {
            return Err(format!("objective {} vs oracle {best}", sol.objective));
        }
    }
    let report = verify_certificate(&problem, &outcome, 1e-7);
    if !report.passed() {
        return Err(format!("certificate: {:?}", report.failures));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_lps_match_vertex_enumeration(seed in any::<u64>()) {
        let lp = DenseLp::random_seeded(seed);
        prop_assert!(check_against_oracle(&lp, &LpParams::default()).is_ok(),
            "{:?}", check_against_oracle(&lp, &LpParams::default()));
        let raw = LpParams { presolve: false, ..LpParams::default() };
        prop_assert!(check_against_oracle(&lp, &raw).is_ok(), "{:?}", check_against_oracle(&lp, &raw));
    }

    #[test]
    fn warm_start_after_added_rows_matches_cold(seed in any::<u64>(), extra in 1usize..3) {
        // Solve, append `extra` random <= rows, re-solve from the old basis.
        let lp = DenseLp::random_seeded(seed);
        let (first, basis) = solve_lp_warm(&lp.to_problem(), &LpParams::default(), None).unwrap();
        let grown_lp = {
            let more = DenseLp::random_seeded(seed ^ 0x9e37_79b9);
            let mut g = lp.clone();
            for r in 0..extra.min(more.a.len()) {
                let row: Vec<f64> = (0..lp.c.len()).map(|j| more.a[r].get(j).copied().unwrap_or(0.0)).collect();
                g.a.push(row);
                g.b.push(more.b[r]);
                g.senses.push(RowSense::Le);
            }
            g
        };
        let grown = grown_lp.to_problem();
        // Slacks of the new rows join the old basis.
        let start = basis.map(|mut b| {
            let n = grown.num_cols();
            b.extend((lp.b.len()..grown.num_rows()).map(|i| n + i));
            b
        });
        let (warm, _) = solve_lp_warm(&grown, &LpParams::default(), start.as_deref()).unwrap();
        let cold = solve_lp(&grown, &LpParams::default()).unwrap();
        prop_assert_eq!(warm.status(), cold.status(), "first {:?}", first.status());
        if let (Some(a), Some(b)) = (warm.optimal(), cold.optimal()) {
            prop_assert!((a.objective - b.objective).abs() <= 1e-7 * (1.0 + b.objective.abs()));
        }
        prop_assert!(verify_certificate(&grown, &warm, 1e-7).passed());
    }

    #[test]
    fn objective_scaling_is_equivariant(seed in any::<u64>(), scale in 0.1f64..20.0) {
        let lp = DenseLp::random_seeded(seed);
        let base = solve_lp(&lp.to_problem(), &LpParams::default()).unwrap();
        let mut scaled = lp.clone();
        scaled.c.iter_mut().for_each(|c| *c *= scale);
        let out = solve_lp(&scaled.to_problem(), &LpParams::default()).unwrap();
        prop_assert_eq!(base.status(), out.status());
        if let (Some(a), Some(b)) = (base.optimal(), out.optimal()) {
            prop_assert!((b.objective - scale * a.objective).abs() <= 1e-7 * (1.0 + b.objective.abs()));
            for (x, y) in a.x.iter().zip(&b.x) {
                prop_assert!((x - y).abs() <= 1e-7);
            }
            for (x, y) in a.duals.iter().zip(&b.duals) {
                prop_assert!((scale * x - y).abs() <= 1e-7 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn duplicated_rows_terminate(seed in any::<u64>(), copies in 2usize..5) {
        // Degenerate LPs: every row repeated, rhs forced to zero on some.
        let mut lp = DenseLp::random_seeded(seed);
        lp.b.iter_mut().enumerate().for_each(|(i, b)| if i % 2 == 0 { *b = 0.0 });
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut senses = Vec::new();
        for _ in 0..copies {
            a.extend(lp.a.iter().cloned());
            b.extend(lp.b.iter().cloned());
            senses.extend(lp.senses.iter().cloned());
        }
        let dup = DenseLp { a, b, senses, c: lp.c.clone() };
        let params = LpParams { bland_after: 3, ..LpParams::default() };
        prop_assert!(check_against_oracle(&dup, &params).is_ok(), "{:?}", check_against_oracle(&dup, &params));
    }
}

#[test]
fn klee_minty_cube_solves() {
    // max sum 2^(n-j) x_j over the Klee-Minty cube, as a minimization.
    let n = 6;
    let mut trips = Vec::new();
    for i in 0..n {
        for j in 0..i {
            trips.push((i, j, 2f64.powi((i - j + 1) as i32)));
        }
        trips.push((i, i, 1.0));
    }
    let rhs: Vec<f64> = (0..n).map(|i| 5f64.powi(i as i32 + 1)).collect();
    let obj: Vec<f64> = (0..n).map(|j| -(2f64.powi((n - 1 - j) as i32))).collect();
    let p = LpProblem::from_triplets(vec![RowSense::Le; n], rhs, obj, &trips).unwrap();
    let out = solve_lp(&p, &LpParams::default()).unwrap();
    assert_eq!(out.status(), LpStatus::Optimal);
    assert!((out.optimal().unwrap().objective + 5f64.powi(n as i32)).abs() < 1e-6);
}
