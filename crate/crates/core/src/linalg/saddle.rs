//! Saddle-point systems for the constrained local basis problems:
//!
//! ```text
//! [ A  Bᵀ ] [ ψ ]   [ g ]
//! [ B  0  ] [ μ ] = [ t ]
//! ```
//!
//! with A the local flow operator (zero-Dirichlet exterior already
//! eliminated), B the mean-value constraint rows and t the Kronecker target.
//! The system is factorized once per patch and solved for every basis target.

use super::ldlt::{factor, LdltFactor, MatrixOrdering};
use super::sparse::{SparseMatrix, TripletBuilder};
use crate::{Error, Result};

/// A local constrained problem. `a` is n×n symmetric, `b` is m×n with full
/// row rank (after sliver filtering), and `augment` optionally adds
/// ρ·BᵀB to the flow block — required when the local operator alone is
/// singular (patch covering the whole domain, pure Neumann).
pub struct SaddleSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub augment: Option<f64>,
}

/// One solved basis: primal values, multipliers and achieved residuals.
#[derive(Debug)]
pub struct SaddleSolution {
    pub primal: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// ‖A ψ + Bᵀμ − g‖∞ relative to the system scale.
    pub flow_residual: f64,
    /// max_j |(B ψ − t)_j| (absolute; constraint rows are mean-normalized).
    pub constraint_residual: f64,
}

/// Factorized saddle system, reusable across right-hand sides.
pub struct SaddleFactor {
    n: usize,
    m: usize,
    k: SparseMatrix,
    a: SparseMatrix,
    b: SparseMatrix,
    bt: SparseMatrix,
    rho: f64,
    factor: LdltFactor,
}

impl SaddleSystem {
    /// Chooses the augmentation weight so ρ·BᵀB has entries comparable to A.
    pub fn default_rho(a: &SparseMatrix, b: &SparseMatrix) -> f64 {
        let bmax = b.max_abs();
        if bmax == 0.0 {
            return 1.0;
        }
        (a.max_abs() / (bmax * bmax)).max(f64::MIN_POSITIVE)
    }

    /// Assembles and factorizes the saddle operator, flow unknowns first.
    /// A zero pivot in the multiplier block is reported as a rank-deficient
    /// constraint via `describe_constraint`.
    pub fn factorize(
        self,
        describe_constraint: &dyn Fn(usize) -> String,
    ) -> Result<SaddleFactor> {
        let (n, m) = (self.a.nrows(), self.b.nrows());
        if self.a.ncols() != n || self.b.ncols() != n {
            return Err(Error::Solver(format!(
                "saddle block mismatch: A is {}x{}, B is {}x{}",
                self.a.nrows(),
                self.a.ncols(),
                self.b.nrows(),
                self.b.ncols()
            )));
        }
        let rho = self.augment.unwrap_or(0.0);
        let bt = self.b.transpose();
        let mut kb = TripletBuilder::new(n + m, n + m);
        for (r, c, v) in self.a.iter() {
            kb.push(r, c, v);
        }
        if rho != 0.0 {
            // ρ·BᵀB, assembled symmetrically per constraint row.
            for cr in 0..m {
                let (cols, vals) = self.b.row(cr);
                for (&ci, &vi) in cols.iter().zip(vals) {
                    for (&cj, &vj) in cols.iter().zip(vals) {
                        kb.push(ci, cj, rho * vi * vj);
                    }
                }
            }
        }
        for (r, c, v) in self.b.iter() {
            kb.push(n + r, c, v);
            kb.push(c, n + r, v);
        }
        let k = kb.build(true);
        let factor = factor(&k, MatrixOrdering::Natural).map_err(|e| match e {
            Error::Solver(msg) if msg.starts_with("zero pivot at index ") => {
                let idx: usize = msg["zero pivot at index ".len()..].parse().unwrap_or(0);
                if idx >= n {
                    Error::Solver(format!(
                        "rank-deficient constraints: zero pivot on {}",
                        describe_constraint(idx - n)
                    ))
                } else {
                    Error::Solver(format!(
                        "singular local flow operator: zero pivot at flow unknown {idx}"
                    ))
                }
            }
            other => other,
        })?;

        // Rank-deficiency that survives to a tiny (not exactly zero) pivot:
        // flag multiplier pivots collapsing relative to their block.
        let mut mult_min = (0usize, f64::INFINITY);
        let mut mult_max = 0.0f64;
        for (idx, dj) in factor.pivots() {
            if idx >= n {
                let a = dj.abs();
                if a < mult_min.1 {
                    mult_min = (idx - n, a);
                }
                mult_max = mult_max.max(a);
            }
        }
        if m > 0 && mult_min.1 < 1e-12 * mult_max {
            return Err(Error::Solver(format!(
                "rank-deficient constraints: pivot ratio {:e} on {}",
                mult_min.1 / mult_max,
                describe_constraint(mult_min.0)
            )));
        }
        Ok(SaddleFactor {
            n,
            m,
            k,
            a: self.a,
            b: self.b,
            bt,
            rho,
            factor,
        })
    }
}

impl SaddleFactor {
    pub fn n_flow(&self) -> usize {
        self.n
    }

    pub fn n_constraints(&self) -> usize {
        self.m
    }

    /// Solves for one basis: zero flow load and constraint target `t`.
    pub fn solve(&self, target: &[f64]) -> Result<SaddleSolution> {
        self.solve_with_load(None, target)
    }

    /// Solves with an optional flow load g: A ψ + Bᵀ μ = g, B ψ = t.
    pub fn solve_with_load(&self, load: Option<&[f64]>, target: &[f64]) -> Result<SaddleSolution> {
        if target.len() != self.m {
            return Err(Error::Solver(format!(
                "constraint target has {} entries, expected {}",
                target.len(),
                self.m
            )));
        }
        let mut rhs = vec![0.0; self.n + self.m];
        if let Some(g) = load {
            rhs[..self.n].copy_from_slice(g);
        }
        if self.rho != 0.0 {
            // Augmented flow equation: (A + ρBᵀB)ψ + Bᵀμ̃ = g + ρBᵀt.
            let bt_t = self.bt.matvec(target);
            for (r, v) in rhs[..self.n].iter_mut().zip(&bt_t) {
                *r += self.rho * v;
            }
        }
        rhs[self.n..].copy_from_slice(target);

        let (x, _) = self.factor.solve_refined(&self.k, &rhs, 1e-15, 6);
        let primal = x[..self.n].to_vec();
        let mut multipliers = x[self.n..].to_vec();

        // Residuals against the plain (unaugmented) saddle form; the
        // augmented multiplier recovers μ = μ̃ + ρ(Bψ − t).
        let bpsi = self.b.matvec(&primal);
        if self.rho != 0.0 {
            for ((mu, &bp), &t) in multipliers.iter_mut().zip(&bpsi).zip(target) {
                *mu += self.rho * (bp - t);
            }
        }
        let constraint_residual = bpsi
            .iter()
            .zip(target)
            .fold(0.0f64, |w, (&bp, &t)| w.max((bp - t).abs()));
        let apsi = self.a.matvec(&primal);
        let btmu = self.bt.matvec(&multipliers);
        let mut flow_res = 0.0f64;
        let mut flow_scale = 0.0f64;
        for i in 0..self.n {
            let g = load.map_or(0.0, |g| g[i]);
            flow_res = flow_res.max((apsi[i] + btmu[i] - g).abs());
            flow_scale = flow_scale.max(apsi[i].abs()).max(btmu[i].abs()).max(g.abs());
        }
        let flow_residual = if flow_scale > 0.0 { flow_res / flow_scale } else { flow_res };
        Ok(SaddleSolution {
            primal,
            multipliers,
            flow_residual,
            constraint_residual,
        })
    }
}

/// One-shot convenience: factorize and solve a single target.
pub fn solve_saddle(
    system: SaddleSystem,
    target: &[f64],
    describe_constraint: &dyn Fn(usize) -> String,
) -> Result<SaddleSolution> {
    let f = system.factorize(describe_constraint)?;
    f.solve(target)
}
