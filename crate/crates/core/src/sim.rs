//! Implicit-Euler time stepping and the cell-average error metric.

use crate::fvm::BlockSystem;
use crate::geometry::{CoarseGrid, FractureDofs};
use crate::linalg::{factor, norm_inf, LdltFactor, MatrixOrdering, SparseMatrix};
use crate::nlmc::CoarseModel;
use crate::{Error, Result};

/// Time discretization: `n_steps` uniform implicit steps to `t_max`,
/// starting from the constant initial pressure `p0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub t_max: f64,
    pub n_steps: usize,
    pub p0: f64,
}

impl TimeSpec {
    pub fn tau(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be ≥ 1".into()));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::Config(format!("t_max = {} must be positive", self.t_max)));
        }
        Ok(())
    }
}

/// The computed states: `states[k]` is the solution at `times[k]`, with
/// `states[0]` the initial condition (so `n_steps + 1` entries).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }
}

/// Factorizes K = A + M/τ once; every step then solves
/// K p = M p̌/τ + F by refined substitution.
struct Stepper {
    k: SparseMatrix,
    m: SparseMatrix,
    f: Vec<f64>,
    tau: f64,
    factor: LdltFactor,
}

impl Stepper {
    fn new(m: &SparseMatrix, a: &SparseMatrix, f: &[f64], tau: f64) -> Result<Stepper> {
        let k = a.add_scaled(m, 1.0 / tau)?;
        let factor = factor(&k, MatrixOrdering::Rcm).map_err(|e| match e {
            Error::Solver(msg) => Error::Solver(format!("time-step operator: {msg}")),
            other => other,
        })?;
        if let Some((idx, d)) = factor.pivots().find(|&(_, d)| d <= 0.0) {
            return Err(Error::Solver(format!(
                "time-step operator is not positive definite (pivot {d:e} at index {idx})"
            )));
        }
        Ok(Stepper {
            k,
            m: m.clone(),
            f: f.to_vec(),
            tau,
            factor,
        })
    }

    fn step(&self, p_prev: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = self.m.matvec(p_prev);
        for (r, &fv) in rhs.iter_mut().zip(&self.f) {
            *r = *r / self.tau + fv;
        }
        let (p, residual) = self.factor.solve_refined(&self.k, &rhs, 1e-14, 4);
        let scale = norm_inf(&rhs) + self.k.max_abs() * norm_inf(&p);
        if residual > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Solver(format!(
                "time-step solve stalled at residual {residual:e} (tolerance {:e})",
                1e-10 * scale
            )));
        }
        Ok(p)
    }
}

/// One implicit-Euler step: solves (M/τ + A) p = M p̌/τ + F.
pub fn step_implicit(
    m: &SparseMatrix,
    a: &SparseMatrix,
    f: &[f64],
    p_prev: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("time step τ = {tau} must be positive")));
    }
    Stepper::new(m, a, f, tau)?.step(p_prev)
}

/// Runs the full implicit-Euler trajectory for one (M, A, F) triple,
/// factorizing the step operator once.
pub fn run_system(
    m: &SparseMatrix,
    a: &SparseMatrix,
    f: &[f64],
    time: &TimeSpec,
) -> Result<Trajectory> {
    time.validate()?;
    let n = a.nrows();
    let tau = time.tau();
    let stepper = Stepper::new(m, a, f, tau)?;
    let mut times = Vec::with_capacity(time.n_steps + 1);
    let mut states = Vec::with_capacity(time.n_steps + 1);
    times.push(0.0);
    states.push(vec![time.p0; n]);
    for k in 1..=time.n_steps {
        let p = stepper.step(states.last().unwrap()).map_err(|e| match e {
            Error::Solver(msg) => Error::Solver(format!("step {k}: {msg}")),
            other => other,
        })?;
        times.push(k as f64 * tau);
        states.push(p);
    }
    Ok(Trajectory { times, states })
}

/// Fine-model trajectory (diagonal storage matrix from the block system).
pub fn run_fine(system: &BlockSystem, time: &TimeSpec) -> Result<Trajectory> {
    let m = SparseMatrix::from_diag(&system.m_diag);
    run_system(&m, &system.a, &system.f, time)
}

/// Coarse-model trajectory.
pub fn run_coarse(model: &CoarseModel, time: &TimeSpec) -> Result<Trajectory> {
    run_system(&model.m, &model.a, &model.f, time)
}

/// Area-weighted mean of the fine matrix block over each coarse cell.
pub fn cell_average(p_matrix: &[f64], grid: &CoarseGrid, cell_area: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.n_cells());
    for k in 0..grid.n_cells() {
        let num: f64 = grid.fine_in_coarse[k]
            .iter()
            .map(|&c| p_matrix[c] * cell_area[c])
            .sum();
        out.push(num / grid.cell_area[k]);
    }
    out
}

/// Length-weighted mean of the fine fracture block over each fragment.
pub fn fragment_average(p_fracture: &[f64], grid: &CoarseGrid, fdofs: &FractureDofs) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.n_fragments());
    for frag in &grid.fragments {
        let num: f64 = frag
            .dofs
            .iter()
            .map(|&l| p_fracture[l] * fdofs.dofs[l].length)
            .sum();
        out.push(num / frag.measure);
    }
    out
}

/// Relative L² distance between two coarse vectors:
/// sqrt(Σ(aᵢ−bᵢ)² / Σaᵢ²) with `a` the reference.
pub fn relative_l2(reference: &[f64], candidate: &[f64]) -> Result<f64> {
    debug_assert_eq!(reference.len(), candidate.len());
    let num: f64 = reference
        .iter()
        .zip(candidate)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    let den: f64 = reference.iter().map(|&a| a * a).sum();
    if den == 0.0 {
        return Err(Error::Config(
            "relative error undefined: the reference averages are all zero".into(),
        ));
    }
    Ok((num / den).sqrt())
}

/// The accuracy metric: relative L² error between the coarse-cell averages
/// of the fine matrix solution and the coarse matrix DOFs. Multiply by 100
/// to report percent.
pub fn relative_error(
    p_fine_matrix: &[f64],
    p_coarse_cells: &[f64],
    grid: &CoarseGrid,
    cell_area: &[f64],
) -> Result<f64> {
    if p_coarse_cells.len() != grid.n_cells() {
        return Err(Error::Config(format!(
            "coarse vector has {} entries, grid has {} cells",
            p_coarse_cells.len(),
            grid.n_cells()
        )));
    }
    let averages = cell_average(p_fine_matrix, grid, cell_area);
    relative_l2(&averages, p_coarse_cells)
}

/// Fracture-continuum analog of [`relative_error`], over fragments.
pub fn relative_error_fracture(
    p_fine_fracture: &[f64],
    p_coarse_frags: &[f64],
    grid: &CoarseGrid,
    fdofs: &FractureDofs,
) -> Result<f64> {
    if p_coarse_frags.len() != grid.n_fragments() {
        return Err(Error::Config(format!(
            "coarse fracture vector has {} entries, grid has {} fragments",
            p_coarse_frags.len(),
            grid.n_fragments()
        )));
    }
    let averages = fragment_average(p_fine_fracture, grid, fdofs);
    relative_l2(&averages, p_coarse_frags)
}

/// Total stored mass Σᵢ(M·p)ᵢ — the conserved quantity of the no-flow
/// problem with balanced sources.
pub fn total_mass(m: &SparseMatrix, p: &[f64]) -> f64 {
    m.matvec(p).iter().sum()
}
