//! Conic-solver contract and a Clarabel-backed implementation.
//!
//! The synthesiser emits one [`SocProgram`]: a linear objective to
//! maximise, affine nonnegativity rows and second-order cone blocks over
//! a shared dense decision vector. Anything that can solve that shape can
//! be plugged in through [`ConicSolver`]; the contract demands
//! determinism (identical input, identical output) so synthesis runs are
//! reproducible byte for byte.

use std::fmt;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

/// Sparse affine expression `sum coeffs * x + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        AffineExpr { terms, constant }
    }

    /// Single-variable expression `scale * x_var + constant`.
    pub fn variable(var: usize, scale: f64, constant: f64) -> Self {
        AffineExpr {
            terms: vec![(var, scale)],
            constant,
        }
    }

    pub fn push(&mut self, var: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((var, coeff));
        }
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(v, c)| c * x[v])
            .sum::<f64>()
            + self.constant
    }

    /// `self + other`, merging terms.
    pub fn plus(&self, other: &AffineExpr) -> AffineExpr {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        AffineExpr {
            terms,
            constant: self.constant + other.constant,
        }
    }

    /// `self - other`.
    pub fn minus(&self, other: &AffineExpr) -> AffineExpr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|&(v, c)| (v, -c)));
        AffineExpr {
            terms,
            constant: self.constant - other.constant,
        }
    }

    pub fn scaled(&self, s: f64) -> AffineExpr {
        AffineExpr {
            terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(),
            constant: self.constant * s,
        }
    }
}

/// A conic feasibility/optimisation problem over `num_vars` variables:
/// maximise `objective . x` subject to every `nonneg` expression being
/// `>= 0` and every `soc` block `[e0, e1, .., ek]` satisfying
/// `e0 >= ||(e1, .., ek)||_2`.
#[derive(Debug, Clone, Default)]
pub struct SocProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub nonneg: Vec<AffineExpr>,
    pub soc: Vec<Vec<AffineExpr>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveStatus::Optimal => write!(f, "optimal"),
            SolveStatus::Infeasible => write!(f, "infeasible"),
            SolveStatus::NumericalFailure => write!(f, "numerical-failure"),
        }
    }
}

/// Raw solver output: primal point and objective as reported.
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub solver_iterations: usize,
    /// Backend-specific status text, for diagnostics.
    pub detail: String,
}

pub trait ConicSolver {
    fn name(&self) -> &'static str;
    fn solve(&self, program: &SocProgram) -> RawSolution;
}

/// Interior-point backend. Settings are fixed at construction so repeated
/// solves of one program are bit-identical.
#[derive(Debug, Clone, Default)]
pub struct ClarabelSolver;

impl ConicSolver for ClarabelSolver {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve(&self, program: &SocProgram) -> RawSolution {
        let n = program.num_vars;
        // Rows: all nonnegative constraints first, then SOC blocks in
        // order. Clarabel wants A x + s = b with s in the cone product,
        // so each expression e(x) = c.x + d becomes row (-c, b = d).
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if !program.nonneg.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(program.nonneg.len()));
        }
        for block in &program.soc {
            cones.push(SupportedConeT::SecondOrderConeT(block.len()));
        }
        let rows: Vec<&AffineExpr> = program
            .nonneg
            .iter()
            .chain(program.soc.iter().flatten())
            .collect();
        let m = rows.len();
        let mut b = vec![0.0; m];
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, expr) in rows.iter().enumerate() {
            b[r] = expr.constant_part();
            for &(v, c) in expr.terms() {
                cols[v].push((r, -c));
            }
        }
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        colptr.push(0);
        for col in &mut cols {
            col.sort_by_key(|&(r, _)| r);
            // Merge duplicate rows; Clarabel requires strictly increasing
            // row indices per column.
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
            for &(r, v) in col.iter() {
                match merged.last_mut() {
                    Some((lr, lv)) if *lr == r => *lv += v,
                    _ => merged.push((r, v)),
                }
            }
            for (r, v) in merged {
                rowval.push(r);
                nzval.push(v);
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(m, n, colptr, rowval, nzval);
        let p = CscMatrix::new(n, n, vec![0; n + 1], vec![], vec![]);
        let q: Vec<f64> = program.objective.iter().map(|&c| -c).collect();
        // Tighter-than-default targets: callers audit the returned point
        // against an absolute residual gate, so ask for an extra decade of
        // feasibility and let the audit decide what a stall is worth.
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_feas(1e-9)
            .tol_gap_abs(1e-9)
            .tol_gap_rel(1e-9)
            .build()
            .expect("static solver settings are valid");
        let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
            Ok(s) => s,
            Err(e) => {
                return RawSolution {
                    status: SolveStatus::NumericalFailure,
                    x: vec![0.0; n],
                    objective: f64::NAN,
                    solver_iterations: 0,
                    detail: format!("setup rejected: {e:?}"),
                }
            }
        };
        solver.solve();
        let status = match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible
            | SolverStatus::DualInfeasible
            | SolverStatus::AlmostPrimalInfeasible
            | SolverStatus::AlmostDualInfeasible => SolveStatus::Infeasible,
            _ => SolveStatus::NumericalFailure,
        };
        RawSolution {
            status,
            x: solver.solution.x.clone(),
            objective: -solver.solution.obj_val,
            solver_iterations: solver.solution.iterations as usize,
            detail: format!("{:?}", solver.solution.status),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_expr_arithmetic() {
        let a = AffineExpr::new(vec![(0, 2.0), (1, -1.0)], 3.0);
        let b = AffineExpr::variable(1, 4.0, -1.0);
        let x = [0.5, 2.0];
        assert_eq!(a.eval(&x), 2.0);
        assert_eq!(a.plus(&b).eval(&x), 2.0 + 7.0);
        assert_eq!(a.minus(&b).eval(&x), 2.0 - 7.0);
        assert_eq!(a.scaled(-2.0).eval(&x), -4.0);
    }

    #[test]
    fn solves_a_bounded_lp() {
        // maximize x0 subject to x0 <= 3, x0 >= -10.
        let program = SocProgram {
            num_vars: 1,
            objective: vec![1.0],
            nonneg: vec![
                AffineExpr::variable(0, -1.0, 3.0),
                AffineExpr::variable(0, 1.0, 10.0),
            ],
            soc: vec![],
        };
        let sol = ClarabelSolver.solve(&program);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 3.0).abs() < 1e-7);
        assert!((sol.objective - 3.0).abs() < 1e-7);
    }

    #[test]
    fn solves_a_second_order_cone_program() {
        // maximize x + y subject to ||(x, y)|| <= sqrt(2): optimum (1,1).
        let program = SocProgram {
            num_vars: 2,
            objective: vec![1.0, 1.0],
            nonneg: vec![],
            soc: vec![vec![
                AffineExpr::constant(2.0f64.sqrt()),
                AffineExpr::variable(0, 1.0, 0.0),
                AffineExpr::variable(1, 1.0, 0.0),
            ]],
        };
        let sol = ClarabelSolver.solve(&program);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-6, "x = {:?}", sol.x);
        assert!((sol.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reports_infeasibility() {
        // x >= 1 and -x >= 0 cannot both hold.
        let program = SocProgram {
            num_vars: 1,
            objective: vec![0.0],
            nonneg: vec![
                AffineExpr::variable(0, 1.0, -1.0),
                AffineExpr::variable(0, -1.0, 0.0),
            ],
            soc: vec![],
        };
        let sol = ClarabelSolver.solve(&program);
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn repeated_solves_are_identical() {
        let program = SocProgram {
            num_vars: 2,
            objective: vec![1.0, 0.3],
            nonneg: vec![AffineExpr::new(vec![(0, -1.0), (1, -2.0)], 4.0)],
            soc: vec![vec![
                AffineExpr::constant(3.0),
                AffineExpr::new(vec![(0, 1.0), (1, -0.5)], 0.1),
                AffineExpr::variable(1, 1.0, 0.0),
            ]],
        };
        let a = ClarabelSolver.solve(&program);
        let b = ClarabelSolver.solve(&program);
        assert_eq!(a.status, SolveStatus::Optimal);
        assert_eq!(a.x, b.x);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn duplicate_terms_are_merged() {
        // x appearing twice in one row must behave as its sum: maximize x
        // with 0.5x + 0.5x <= 1.
        let mut e = AffineExpr::constant(1.0);
        e.push(0, -0.5);
        e.push(0, -0.5);
        let program = SocProgram {
            num_vars: 1,
            objective: vec![1.0],
            nonneg: vec![e],
            soc: vec![],
        };
        let sol = ClarabelSolver.solve(&program);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-7);
    }
}
