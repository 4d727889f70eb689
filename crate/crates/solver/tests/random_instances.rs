mod support;

use dispatch_solver::{solve_lp, solve_milp, LpStatus, MilpOptions, MilpProblem, MilpStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{milp_enumeration, vertex_enumeration, Dense};

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut optimal = 0;
    for case in 0..20 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=12);
        let d = Dense::random(&mut rng, m, n);
        let lp = d.to_lp();
        let sol = solve_lp(&lp).unwrap();
        match vertex_enumeration(&d) {
            Some((obj, _)) => {
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
                assert!((sol.objective - obj).abs() <= 1e-7 * obj.abs().max(1.0), "case {case}: {} vs {obj}", sol.objective);
                let cert = lp.certify(&sol);
                assert!(cert.within(1e-7, 1e-6), "case {case}: {cert:?}");
                optimal += 1;
            }
            None => assert_eq!(sol.status, LpStatus::Infeasible, "case {case}"),
        }
    }
    assert!(optimal >= 10);
}

#[test]
fn random_milps_match_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..20 {
        let nb = rng.gen_range(3..=8);
        let n = nb + rng.gen_range(1..=3);
        let m = rng.gen_range(2..=6);
        let mut d = Dense::random(&mut rng, m, n);
        let binaries: Vec<usize> = (0..nb).collect();
        for &j in &binaries {
            d.ub[j] = 1.0;
        }
        let p = MilpProblem {
            lp: d.to_lp(),
            binaries: binaries.clone(),
        };
        let sol = solve_milp(&p, &MilpOptions::default()).unwrap();
        match milp_enumeration(&d, &binaries) {
            Some(obj) => {
                assert_eq!(sol.status, MilpStatus::Optimal, "case {case}");
                assert!((sol.objective - obj).abs() <= 1e-6, "case {case}: {} vs {obj}", sol.objective);
                assert!(sol.gap >= 0.0 && sol.gap <= 1e-6);
                let x = sol.incumbent.unwrap();
                for &j in &binaries {
                    assert!((x[j] - x[j].round()).abs() <= 1e-6);
                }
            }
            None => assert_eq!(sol.status, MilpStatus::Infeasible, "case {case}"),
        }
    }
}

#[test]
fn repeated_solves_are_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = Dense::random(&mut rng, 10, 6);
    let a = solve_lp(&d.to_lp()).unwrap();
    let b = solve_lp(&d.to_lp()).unwrap();
    assert_eq!(a.status, b.status);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.x, b.x);
}


#[test]
fn large_sparse_lps_certify() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..5 {
        let (m, n) = (300, 200);
        let mut b = dispatch_solver::LpBuilder::new(dispatch_solver::Direction::Maximize);
        for _ in 0..n {
            b.add_var(-rng.gen_range(0.0..2.0), rng.gen_range(0.5..3.0), rng.gen_range(-1.0..1.0));
        }
        for _ in 0..m {
            let k = rng.gen_range(2..6);
            let row: Vec<(usize, f64)> = (0..k).map(|_| (rng.gen_range(0..n), rng.gen_range(-10.0..10.0))).collect();
            let sense = match rng.gen_range(0..5) {
                0 => dispatch_solver::RowSense::Eq,
                1 => dispatch_solver::RowSense::Ge,
                _ => dispatch_solver::RowSense::Le,
            };
            let rhs = match sense {
                dispatch_solver::RowSense::Eq => 0.0,
                dispatch_solver::RowSense::Ge => -rng.gen_range(0.0..1.0),
                dispatch_solver::RowSense::Le => rng.gen_range(0.0..1.0),
            };
            b.add_row(&row, sense, rhs);
        }
        // The origin is feasible, so each instance is feasible and bounded.
        let lp = b.build();
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        let cert = lp.certify(&s);
        assert!(cert.within(1e-7, 1e-6), "{cert:?}");
    }
}
