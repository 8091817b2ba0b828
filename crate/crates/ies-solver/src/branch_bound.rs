//! Branch-and-bound over binary variables.
//!
//! Depth-first search on a single persistent simplex tableau: branching
//! tightens one binary's bounds, the child re-solves warm, and bounds are
//! restored on backtrack. Branches on the most fractional binary (ties to
//! the lowest index), diving on the nearer side first. An optional
//! incumbent heuristic is consulted at every node.
//!
//! Budgets are deterministic (node and pivot counters); the optional wall
//! clock limit is intended for interactive use and breaks run-to-run
//! reproducibility when it triggers.

use crate::linprog::{LpError, MilpProblem};
use crate::simplex::{LpStatus, SimplexCore, FEAS_TOL};
use std::time::Instant;

pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MilpConfig {
    /// Relative optimality gap at which the search stops.
    pub gap: f64,
    pub node_limit: usize,
    pub pivot_limit: usize,
    pub time_limit: Option<f64>,
}

impl Default for MilpConfig {
    fn default() -> Self {
        MilpConfig {
            gap: 1e-4,
            node_limit: 200_000,
            pivot_limit: 20_000_000,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    GapNotClosed,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub pivots: usize,
}

/// Proposes a full-dimensional feasible point from an LP-relaxation point;
/// the search verifies feasibility before accepting it.
pub type IncumbentHeuristic<'a> = dyn Fn(&[f64]) -> Option<Vec<f64>> + 'a;

struct Search<'a> {
    milp: &'a MilpProblem,
    core: SimplexCore,
    cfg: MilpConfig,
    heuristic: Option<&'a IncumbentHeuristic<'a>>,
    incumbent: Option<(Vec<f64>, f64)>,
    /// Smallest LP bound among subtrees abandoned due to budgets.
    min_abandoned: f64,
    nodes: usize,
    started: Instant,
    out_of_budget: bool,
}

impl<'a> Search<'a> {
    fn budget_exhausted(&mut self) -> bool {
        if self.out_of_budget {
            return true;
        }
        let hit = self.nodes >= self.cfg.node_limit
            || self.core.pivots >= self.cfg.pivot_limit
            || self
                .cfg
                .time_limit
                .map(|t| self.started.elapsed().as_secs_f64() >= t)
                .unwrap_or(false);
        if hit {
            self.out_of_budget = true;
        }
        hit
    }

    fn offer_incumbent(&mut self, x: Vec<f64>, objective: f64) {
        let better = self
            .incumbent
            .as_ref()
            .map(|(_, obj)| objective < *obj)
            .unwrap_or(true);
        if better {
            self.incumbent = Some((x, objective));
        }
    }

    fn try_heuristic(&mut self, x_relax: &[f64]) {
        let Some(h) = self.heuristic else { return };
        let Some(cand) = h(x_relax) else { return };
        if cand.len() != self.milp.lp.n_vars {
            return;
        }
        if self.milp.lp.max_violation(&cand) > 1e-6 {
            return;
        }
        if self
            .milp
            .binaries
            .iter()
            .any(|&b| (cand[b] - cand[b].round()).abs() > INT_TOL)
        {
            return;
        }
        let obj = self.milp.lp.objective_value(&cand);
        self.offer_incumbent(cand, obj);
    }

    fn prune_threshold(&self) -> f64 {
        match &self.incumbent {
            Some((_, obj)) => obj - self.cfg.gap * obj.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn dfs(&mut self, depth: usize, parent_bound: f64) {
        self.nodes += 1;
        if self.budget_exhausted() {
            self.min_abandoned = self.min_abandoned.min(parent_bound);
            return;
        }
        let status = self.core.solve();
        match status {
            LpStatus::Infeasible => return,
            LpStatus::Unbounded => {
                // The relaxation is unbounded below; treat as abandoned with
                // an unbounded node bound so the caller sees it in the gap.
                self.min_abandoned = f64::NEG_INFINITY;
                return;
            }
            LpStatus::PivotLimit => {
                self.min_abandoned = self.min_abandoned.min(parent_bound);
                return;
            }
            LpStatus::Optimal => {}
        }
        let node_bound = self.core.objective();
        if node_bound >= self.prune_threshold() {
            return;
        }
        let x = self.core.x();
        self.try_heuristic(&x);
        if node_bound >= self.prune_threshold() {
            return;
        }

        // Most fractional binary, ties to the lowest variable index.
        let mut branch: Option<(usize, f64)> = None;
        for &b in &self.milp.binaries {
            let frac = (x[b] - x[b].round()).abs();
            if frac > INT_TOL {
                let score = (x[b] - 0.5).abs();
                match branch {
                    Some((_, best)) if score >= best => {}
                    _ => branch = Some((b, score)),
                }
            }
        }
        let Some((var, _)) = branch else {
            // Integral: snap binaries and accept.
            let mut xi = x;
            for &b in &self.milp.binaries {
                xi[b] = xi[b].round();
            }
            self.offer_incumbent(xi, node_bound);
            return;
        };

        let near = x[var].round().clamp(0.0, 1.0);
        let far = 1.0 - near;
        let saved = (self.core.lower[var], self.core.upper[var]);
        for side in [near, far] {
            self.core.set_bounds(var, side, side);
            self.dfs(depth + 1, node_bound);
            if self.out_of_budget {
                // Sibling subtree not explored; its bound is the parent's.
                self.min_abandoned = self.min_abandoned.min(node_bound);
                break;
            }
        }
        self.core.set_bounds(var, saved.0, saved.1);
    }
}

/// Best-effort exact solve of a mixed-binary linear program.
pub fn solve_milp(
    milp: &MilpProblem,
    cfg: &MilpConfig,
    heuristic: Option<&IncumbentHeuristic<'_>>,
) -> Result<MilpSolution, LpError> {
    milp.validate()?;
    let mut core = SimplexCore::new(&milp.lp)?;
    core.set_pivot_limit(cfg.pivot_limit);
    let mut search = Search {
        milp,
        core,
        cfg: cfg.clone(),
        heuristic,
        incumbent: None,
        min_abandoned: f64::INFINITY,
        nodes: 0,
        started: Instant::now(),
        out_of_budget: false,
    };
    search.dfs(0, f64::NEG_INFINITY);

    let nodes = search.nodes;
    let pivots = search.core.pivots;
    match search.incumbent {
        Some((x, objective)) => {
            let explored_bound = objective - cfg.gap * objective.abs().max(1.0);
            let bound = explored_bound.min(search.min_abandoned);
            let gap = (objective - bound) / objective.abs().max(1.0);
            let status = if search.min_abandoned.is_finite() || search.out_of_budget {
                MilpStatus::GapNotClosed
            } else {
                MilpStatus::Optimal
            };
            Ok(MilpSolution {
                status,
                x,
                objective,
                bound,
                gap,
                nodes,
                pivots,
            })
        }
        None => {
            let status = if search.out_of_budget {
                MilpStatus::GapNotClosed
            } else if search.min_abandoned == f64::NEG_INFINITY {
                MilpStatus::Unbounded
            } else {
                MilpStatus::Infeasible
            };
            Ok(MilpSolution {
                status,
                x: Vec::new(),
                objective: f64::INFINITY,
                bound: search.min_abandoned.min(f64::INFINITY),
                gap: f64::INFINITY,
                nodes,
                pivots,
            })
        }
    }
}

/// Convenience check used by tests and callers that verify candidate
/// incumbents: binaries integral and constraints satisfied.
pub fn is_milp_feasible(milp: &MilpProblem, x: &[f64]) -> bool {
    milp.lp.max_violation(x) <= 10.0 * FEAS_TOL
        && milp
            .binaries
            .iter()
            .all(|&b| (x[b] - x[b].round()).abs() <= INT_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linprog::{LinProgram, Sense};

    /// Small knapsack: max 5a + 4b + 3c, weights 2,3,4 <= 5.
    #[test]
    fn knapsack_exact() {
        let mut lp = LinProgram::new(0);
        let a = lp.add_var("a", 0.0, 1.0, -5.0);
        let b = lp.add_var("b", 0.0, 1.0, -4.0);
        let c = lp.add_var("c", 0.0, 1.0, -3.0);
        lp.add_row("w", vec![(a, 2.0), (b, 3.0), (c, 4.0)], Sense::Le, 5.0);
        let milp = MilpProblem {
            lp,
            binaries: vec![a, b, c],
        };
        let sol = solve_milp(&milp, &MilpConfig::default(), None).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.objective + 9.0).abs() < 1e-9, "obj {}", sol.objective);
        assert_eq!(sol.x[0].round() as i32, 1);
        assert_eq!(sol.x[1].round() as i32, 1);
        assert_eq!(sol.x[2].round() as i32, 0);
    }

    #[test]
    fn all_binaries_fixed_reduces_to_lp() {
        let mut lp = LinProgram::new(0);
        let a = lp.add_var("a", 1.0, 1.0, 2.0);
        let x = lp.add_var("x", 0.0, 10.0, -1.0);
        lp.add_row("r", vec![(a, 3.0), (x, 1.0)], Sense::Le, 7.0);
        let milp = MilpProblem {
            lp: lp.clone(),
            binaries: vec![a],
        };
        let sol = solve_milp(&milp, &MilpConfig::default(), None).unwrap();
        let lp_sol = crate::simplex::simplex_solve(&lp).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.objective - lp_sol.objective).abs() < 1e-9);
    }

    #[test]
    fn infeasible_binary_problem() {
        let mut lp = LinProgram::new(0);
        let a = lp.add_var("a", 0.0, 1.0, 1.0);
        let b = lp.add_var("b", 0.0, 1.0, 1.0);
        lp.add_row("need", vec![(a, 1.0), (b, 1.0)], Sense::Ge, 3.0);
        let milp = MilpProblem {
            lp,
            binaries: vec![a, b],
        };
        let sol = solve_milp(&milp, &MilpConfig::default(), None).unwrap();
        assert_eq!(sol.status, MilpStatus::Infeasible);
    }

    #[test]
    fn heuristic_is_used_and_verified() {
        let mut lp = LinProgram::new(0);
        let a = lp.add_var("a", 0.0, 1.0, -1.0);
        let x = lp.add_var("x", 0.0, 2.0, -1.0);
        lp.add_row("r", vec![(a, 1.0), (x, 1.0)], Sense::Le, 2.5);
        let milp = MilpProblem {
            lp,
            binaries: vec![a],
        };
        let called = std::cell::Cell::new(false);
        let h = |x_relax: &[f64]| {
            called.set(true);
            let mut x = x_relax.to_vec();
            x[0] = x[0].round();
            x[1] = (2.5f64 - x[0]).min(2.0);
            Some(x)
        };
        let sol = solve_milp(&milp, &MilpConfig::default(), Some(&h)).unwrap();
        assert!(called.get());
        assert_eq!(sol.status, MilpStatus::Optimal);
        // a = 1, x = 1.5 under a + x <= 2.5.
        assert!((sol.objective + 2.5).abs() < 1e-9);
    }

    #[test]
    fn node_budget_reports_gap_not_closed() {
        // A problem needing branching, with a 1-node budget.
        let mut lp = LinProgram::new(0);
        let a = lp.add_var("a", 0.0, 1.0, -1.0);
        let b = lp.add_var("b", 0.0, 1.0, -1.0);
        lp.add_row("r", vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.5);
        let milp = MilpProblem {
            lp,
            binaries: vec![a, b],
        };
        let cfg = MilpConfig {
            node_limit: 1,
            ..Default::default()
        };
        let sol = solve_milp(&milp, &cfg, None).unwrap();
        assert_eq!(sol.status, MilpStatus::GapNotClosed);
    }
}
