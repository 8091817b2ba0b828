//! Randomized solver validation against independent oracles:
//! vertex enumeration for linear programs and brute-force enumeration
//! over all binary fixings for mixed-integer programs.

use ies_core::linalg::{lu_solve, Mat};
use ies_solver::branch_bound::{solve_milp, MilpConfig, MilpStatus};
use ies_solver::linprog::{LinProgram, MilpProblem, Sense};
use ies_solver::simplex::{simplex_solve, LpStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random LP with finite box bounds and <= rows (bounded by construction).
fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinProgram {
    let mut lp = LinProgram::new(0);
    for j in 0..n {
        let lo = rng.gen_range(-3.0..0.0);
        let hi = lo + rng.gen_range(0.5..4.0);
        let c = rng.gen_range(-2.0..2.0);
        lp.add_var(format!("x{j}"), lo, hi, c);
    }
    for i in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .filter_map(|j| {
                if rng.gen_range(0.0..1.0) < 0.8 {
                    Some((j, rng.gen_range(-2.0..2.0)))
                } else {
                    None
                }
            })
            .collect();
        if coeffs.is_empty() {
            continue;
        }
        let rhs = rng.gen_range(-2.0..3.0);
        lp.add_row(format!("r{i}"), coeffs, Sense::Le, rhs);
    }
    lp
}

/// Independent oracle: enumerate candidate vertices as intersections of
/// `n` active constraints drawn from rows and bounds, keep the feasible
/// ones, and return the best objective.
fn vertex_enumeration_opt(lp: &LinProgram) -> Option<f64> {
    let n = lp.n_vars;
    // Constraint pool as (normal, rhs) treated as equalities when active.
    let mut pool: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        let mut a = vec![0.0; n];
        for (j, c) in &row.coeffs {
            a[*j] = *c;
        }
        pool.push((a, row.rhs));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        pool.push((a.clone(), lp.lower[j]));
        pool.push((a, lp.upper[j]));
    }

    let mut best: Option<f64> = None;
    let k = pool.len();
    let mut combo: Vec<usize> = (0..n).collect();
    loop {
        // Solve the active system.
        let rows: Vec<Vec<f64>> = combo.iter().map(|&i| pool[i].0.clone()).collect();
        let rhs: Vec<f64> = combo.iter().map(|&i| pool[i].1).collect();
        let a = Mat::from_rows(&rows);
        if let Some(x) = lu_solve(&a, &rhs) {
            if lp.max_violation(&x) <= 1e-7 {
                let obj = lp.objective_value(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // Next combination (lexicographic).
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if combo[i] != i + k - n {
                combo[i] += 1;
                for j in i + 1..n {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn fifty_random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e5);
    let mut solved = 0;
    let mut infeasible = 0;
    let mut case = 0;
    while solved + infeasible < 50 {
        case += 1;
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=4);
        let lp = random_lp(&mut rng, n, m);
        let oracle = vertex_enumeration_opt(&lp);
        let sol = simplex_solve(&lp).unwrap();
        match (oracle, sol.status) {
            (Some(best), LpStatus::Optimal) => {
                assert!(
                    (best - sol.objective).abs() <= 1e-6 * best.abs().max(1.0),
                    "case {case}: simplex {} vs enumeration {best}",
                    sol.objective
                );
                assert!(lp.max_violation(&sol.x) <= 1e-6);
                solved += 1;
            }
            (None, LpStatus::Infeasible) => {
                infeasible += 1;
            }
            (oracle, status) => {
                panic!("case {case}: oracle {oracle:?} vs simplex {status:?}");
            }
        }
    }
    assert!(solved >= 30, "want mostly feasible cases, got {solved}");
}

/// Random mixed-binary program; continuous part kept small enough for the
/// exhaustive oracle.
fn random_milp(rng: &mut ChaCha8Rng, n_cont: usize, n_bin: usize, m: usize) -> MilpProblem {
    let mut lp = random_lp(rng, n_cont, m);
    let mut binaries = Vec::new();
    for b in 0..n_bin {
        let idx = lp.add_var(format!("b{b}"), 0.0, 1.0, rng.gen_range(-2.0..2.0));
        binaries.push(idx);
        // Couple binaries into some rows.
        for row in 0..lp.rows.len() {
            if rng.gen_range(0.0..1.0) < 0.5 {
                let c = rng.gen_range(-2.0..2.0);
                lp.rows[row].coeffs.push((idx, c));
            }
        }
    }
    MilpProblem { lp, binaries }
}

/// Exhaustive oracle: solve the LP for every 0/1 fixing of the binaries.
fn brute_force_milp(milp: &MilpProblem) -> Option<f64> {
    let b = milp.binaries.len();
    let mut best: Option<f64> = None;
    for mask in 0..(1u32 << b) {
        let mut lp = milp.lp.clone();
        for (i, &var) in milp.binaries.iter().enumerate() {
            let v = if (mask >> i) & 1 == 1 { 1.0 } else { 0.0 };
            lp.lower[var] = v;
            lp.upper[var] = v;
        }
        let sol = simplex_solve(&lp).unwrap();
        if sol.status == LpStatus::Optimal {
            best = Some(best.map_or(sol.objective, |x: f64| x.min(sol.objective)));
        }
    }
    best
}

#[test]
fn fifty_random_milps_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb1ab);
    let cfg = MilpConfig::default();
    let mut done = 0;
    let mut case = 0;
    while done < 50 {
        case += 1;
        let n_cont = rng.gen_range(1..=4);
        let n_bin = rng.gen_range(2..=8);
        let m = rng.gen_range(1..=4);
        let milp = random_milp(&mut rng, n_cont, n_bin, m);
        let oracle = brute_force_milp(&milp);
        let sol = solve_milp(&milp, &cfg, None).unwrap();
        match (oracle, sol.status) {
            (Some(best), MilpStatus::Optimal) => {
                assert!(
                    (best - sol.objective).abs() <= 1e-6 * best.abs().max(1.0),
                    "case {case}: bb {} vs brute force {best}",
                    sol.objective
                );
                assert!(sol.objective >= sol.bound - 1e-9, "incumbent below bound");
                done += 1;
            }
            (None, MilpStatus::Infeasible) => {
                done += 1;
            }
            (oracle, status) => panic!("case {case}: oracle {oracle:?} vs bb {status:?}"),
        }
    }
}

#[test]
fn simplex_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lp = random_lp(&mut rng, 8, 5);
    let a = simplex_solve(&lp).unwrap();
    let b = simplex_solve(&lp).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.objective, b.objective);
    assert_eq!(a.pivots, b.pivots);
}
