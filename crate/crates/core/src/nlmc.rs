//! Non-local multicontinuum upscaling.
//!
//! For every coarse cell K_i an oversampled patch K_i⁺ is cut out of the fine
//! system and a constrained energy-minimization problem is solved per coarse
//! DOF of K_i: find ψ with minimal energy whose mean value is one on the
//! target coarse cell (or network fragment) and zero on every other coarse
//! cell and fragment inside the patch. The solved bases become the rows of
//! the projection R; the upscaled operator is Ā = R A Rᵀ with a conservation
//! repair on its diagonal, and the coarse mass/RHS come either from the
//! Galerkin projection or directly from coarse measures.

use rayon::prelude::*;

use crate::fvm::BlockSystem;
use crate::geometry::{CoarseGrid, FineMesh, FractureDofs, Oversample};
use crate::linalg::{
    triple_product, SaddleFactor, SaddleSystem, SparseMatrix, TripletBuilder,
};
use crate::{Error, Result};

/// Which coarse DOF a basis (or constraint target) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Matrix-continuum basis ψ₀ of the owning coarse cell.
    Matrix,
    /// Fracture-continuum basis of one network fragment (global fragment
    /// index).
    Fracture { fragment: usize },
}

/// One mean-value constraint row over the local flow unknowns of a patch.
///
/// `indices` are patch-local flow indices (matrix cells first, then fracture
/// DOFs), `weights` the raw measures (cell areas / sub-segment lengths); they
/// sum to `measure`, the measure of the coarse cell or fragment. The solver
/// normalizes each row by its measure, so the constrained quantity is the
/// mean value and the targets stay 0/1.
#[derive(Debug, Clone)]
pub struct ConstraintRow {
    /// Global coarse DOF this row represents (cells first, then fragments).
    pub coarse_dof: usize,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub measure: f64,
}

/// The constraint rows of one patch plus the Kronecker target of one basis.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub owner: usize,
    pub kind: BasisKind,
    pub rows: Vec<ConstraintRow>,
    pub target: Vec<f64>,
}

/// A solved multiscale basis: sparse over the fine flow DOFs (global
/// indices, matrix block first), zero outside its patch.
#[derive(Debug, Clone)]
pub struct BasisFunction {
    pub owner: usize,
    pub kind: BasisKind,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    /// max |mean-value constraint violation| achieved by the local solve.
    pub constraint_residual: f64,
}

/// The mean-value constraint rows of a patch: one matrix row per member
/// coarse cell (ascending), then one fracture row per member fragment
/// (ascending global fragment index).
pub fn constraint_rows(
    mesh: &FineMesh,
    fdofs: &FractureDofs,
    grid: &CoarseGrid,
    over: &Oversample,
) -> Vec<ConstraintRow> {
    let n_mc = over.fine_cells.len();
    let mut rows = Vec::new();
    for &k in &over.coarse_members {
        let fine = &grid.fine_in_coarse[k];
        let indices = fine.iter().map(|c| over.local_of_cell[c]).collect();
        let weights: Vec<f64> = fine.iter().map(|&c| mesh.cell_area[c]).collect();
        rows.push(ConstraintRow {
            coarse_dof: k,
            indices,
            weights,
            measure: grid.cell_area[k],
        });
    }
    for &k in &over.coarse_members {
        for &g in &grid.frags_in_coarse[k] {
            let frag = &grid.fragments[g];
            let indices = frag
                .dofs
                .iter()
                .map(|d| n_mc + over.local_of_frac[d])
                .collect();
            let weights: Vec<f64> = frag.dofs.iter().map(|&d| fdofs.dofs[d].length).collect();
            rows.push(ConstraintRow {
                coarse_dof: grid.n_cells() + g,
                indices,
                weights,
                measure: frag.measure,
            });
        }
    }
    // Member iteration above yields matrix rows ascending by construction;
    // fragment ids are grouped by cell in cell order, so the second pass is
    // ascending too. Keep the global (cells, then fragments) order.
    rows.sort_by_key(|r| r.coarse_dof);
    rows
}

fn describe_row(rows: &[ConstraintRow], grid: &CoarseGrid, r: usize) -> String {
    let dof = rows[r].coarse_dof;
    if dof < grid.n_cells() {
        format!("matrix mean-value row of coarse cell {dof}")
    } else {
        let frag = &grid.fragments[dof - grid.n_cells()];
        format!(
            "fracture mean-value row of fragment (coarse cell {}, network {})",
            frag.cell, frag.network
        )
    }
}

fn kronecker_target(rows: &[ConstraintRow], dof: usize) -> Option<Vec<f64>> {
    let hit = rows.iter().position(|r| r.coarse_dof == dof)?;
    let mut t = vec![0.0; rows.len()];
    t[hit] = 1.0;
    Some(t)
}

/// Builds the constraint set for one basis of the patch owner: all
/// mean-value rows of the patch plus the Kronecker target selecting `kind`.
pub fn build_constraints(
    mesh: &FineMesh,
    fdofs: &FractureDofs,
    grid: &CoarseGrid,
    over: &Oversample,
    kind: BasisKind,
) -> Result<ConstraintSet> {
    let rows = constraint_rows(mesh, fdofs, grid, over);
    let dof = match kind {
        BasisKind::Matrix => over.center,
        BasisKind::Fracture { fragment } => {
            if fragment >= grid.n_fragments() {
                return Err(Error::Config(format!(
                    "fracture basis requested for fragment {fragment}, but only {} exist",
                    grid.n_fragments()
                )));
            }
            grid.n_cells() + fragment
        }
    };
    let target = kronecker_target(&rows, dof).ok_or_else(|| {
        Error::Config(format!(
            "basis target (coarse DOF {dof}) lies outside the oversampled region of cell {}",
            over.center
        ))
    })?;
    Ok(ConstraintSet {
        owner: over.center,
        kind,
        rows,
        target,
    })
}

/// A factorized patch problem, reusable for every basis of the owner cell.
pub struct PatchSolver<'g> {
    grid: &'g CoarseGrid,
    over: &'g Oversample,
    rows: Vec<ConstraintRow>,
    factor: SaddleFactor,
    n_m_global: usize,
}

impl<'g> PatchSolver<'g> {
    /// Restricts the fine operator to the patch (zero-Dirichlet exterior),
    /// assembles the mean-value constraints and factorizes the saddle system.
    /// A patch covering the whole coarse grid has a singular flow block
    /// (pure Neumann); it gets an augmented-Lagrangian regularization.
    pub fn new(
        system: &BlockSystem,
        grid: &'g CoarseGrid,
        over: &'g Oversample,
        rows: Vec<ConstraintRow>,
    ) -> Result<PatchSolver<'g>> {
        let n_mc = over.fine_cells.len();
        let n_loc = over.n_flow();
        let local_of_flow = |g: usize| -> Option<usize> {
            if g < system.n_m {
                over.local_of_cell.get(&g).copied()
            } else {
                over.local_of_frac.get(&(g - system.n_m)).map(|l| n_mc + l)
            }
        };

        let mut ab = TripletBuilder::new(n_loc, n_loc);
        let mut push_row = |li: usize, g: usize| {
            let (cols, vals) = system.a.row(g);
            for (&cg, &v) in cols.iter().zip(vals) {
                if let Some(lj) = local_of_flow(cg) {
                    ab.push(li, lj, v);
                }
            }
        };
        for (li, &c) in over.fine_cells.iter().enumerate() {
            push_row(li, c);
        }
        for (lf, &d) in over.frac_dofs.iter().enumerate() {
            push_row(n_mc + lf, system.n_m + d);
        }
        let a_loc = ab.build(true);

        let mut bb = TripletBuilder::new(rows.len(), n_loc);
        for (r, row) in rows.iter().enumerate() {
            for (&li, &w) in row.indices.iter().zip(&row.weights) {
                bb.push(r, li, w / row.measure);
            }
        }
        let b = bb.build(false);

        let whole_domain = over.coarse_members.len() == grid.n_cells();
        let augment = whole_domain.then(|| SaddleSystem::default_rho(&a_loc, &b));
        let system_loc = SaddleSystem {
            a: a_loc,
            b,
            augment,
        };
        let describe = |r: usize| describe_row(&rows, grid, r);
        let factor = system_loc.factorize(&describe).map_err(|e| match e {
            Error::Solver(msg) => Error::Solver(format!(
                "patch of coarse cell {}: {msg}",
                over.center
            )),
            other => other,
        })?;
        Ok(PatchSolver {
            grid,
            over,
            rows,
            factor,
            n_m_global: system.n_m,
        })
    }

    /// Solves one basis of the owner cell.
    pub fn solve_kind(&self, kind: BasisKind) -> Result<BasisFunction> {
        let dof = match kind {
            BasisKind::Matrix => self.over.center,
            BasisKind::Fracture { fragment } => self.grid.n_cells() + fragment,
        };
        let target = kronecker_target(&self.rows, dof).ok_or_else(|| {
            Error::Config(format!(
                "basis target (coarse DOF {dof}) lies outside the oversampled region of cell {}",
                self.over.center
            ))
        })?;
        let sol = self.factor.solve(&target).map_err(|e| match e {
            Error::Solver(msg) => {
                Error::Solver(format!("basis of coarse cell {}: {msg}", self.over.center))
            }
            other => other,
        })?;
        let n_mc = self.over.fine_cells.len();
        let mut indices = Vec::with_capacity(self.over.n_flow());
        indices.extend_from_slice(&self.over.fine_cells);
        indices.extend(self.over.frac_dofs.iter().map(|&d| self.n_m_global + d));
        debug_assert_eq!(indices.len(), n_mc + self.over.frac_dofs.len());
        Ok(BasisFunction {
            owner: self.over.center,
            kind,
            indices,
            values: sol.primal,
            constraint_residual: sol.constraint_residual,
        })
    }
}

/// Solves a single basis from a prepared constraint set (one-shot version of
/// [`PatchSolver`]; the batched path factorizes once per patch instead).
pub fn solve_basis(
    system: &BlockSystem,
    grid: &CoarseGrid,
    over: &Oversample,
    constraints: &ConstraintSet,
) -> Result<BasisFunction> {
    let solver = PatchSolver::new(system, grid, over, constraints.rows.clone())?;
    solver.solve_kind(constraints.kind)
}

/// Builds every basis of the coarse grid: per coarse cell one matrix basis
/// plus one fracture basis per owned fragment, each from the same patch
/// factorization. With `parallel` the patches are solved on the rayon pool;
/// the result is identical to the serial order either way.
pub fn build_all_bases(
    system: &BlockSystem,
    mesh: &FineMesh,
    fdofs: &FractureDofs,
    grid: &CoarseGrid,
    layers: usize,
    parallel: bool,
) -> Result<Vec<BasisFunction>> {
    let build_cell = |i: usize| -> Result<Vec<BasisFunction>> {
        let over = crate::geometry::oversample(grid, i, layers)?;
        let rows = constraint_rows(mesh, fdofs, grid, &over);
        let solver = PatchSolver::new(system, grid, &over, rows)?;
        let mut out = Vec::with_capacity(1 + grid.frags_in_coarse[i].len());
        out.push(solver.solve_kind(BasisKind::Matrix)?);
        for &g in &grid.frags_in_coarse[i] {
            out.push(solver.solve_kind(BasisKind::Fracture { fragment: g })?);
        }
        Ok(out)
    };
    let per_cell: Vec<Result<Vec<BasisFunction>>> = if parallel {
        (0..grid.n_cells()).into_par_iter().map(build_cell).collect()
    } else {
        (0..grid.n_cells()).map(build_cell).collect()
    };
    let mut bases = Vec::with_capacity(grid.n_coarse_dofs());
    for cell in per_cell {
        bases.extend(cell?);
    }
    Ok(bases)
}

/// Identity of one coarse DOF (row of R).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseDofId {
    /// Matrix continuum of a coarse cell.
    Cell(usize),
    /// Fracture continuum of one fragment.
    Fragment {
        cell: usize,
        network: usize,
        fragment: usize,
    },
}

/// The projection matrix R: one row per coarse DOF (matrix rows by coarse
/// cell, then fragment rows by (cell, network)), one column per fine flow
/// DOF (matrix block first).
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    pub r: SparseMatrix,
    pub dof_map: Vec<CoarseDofId>,
    /// Fine matrix DOF count (column split between the continua).
    pub n_m_fine: usize,
    /// Coarse cell count (row split between the continua).
    pub n_cells: usize,
}

impl ProjectionMatrix {
    pub fn n_coarse(&self) -> usize {
        self.r.nrows()
    }
}

/// Assembles R from the solved bases. Every coarse cell must contribute its
/// matrix basis and every fragment its fracture basis.
pub fn assemble_projection(
    bases: &[BasisFunction],
    grid: &CoarseGrid,
    system: &BlockSystem,
) -> Result<ProjectionMatrix> {
    let n_rows = grid.n_coarse_dofs();
    let mut by_row: Vec<Option<&BasisFunction>> = vec![None; n_rows];
    for b in bases {
        let row = match b.kind {
            BasisKind::Matrix => b.owner,
            BasisKind::Fracture { fragment } => grid.n_cells() + fragment,
        };
        if by_row[row].is_some() {
            return Err(Error::Config(format!(
                "duplicate basis for coarse DOF {row}"
            )));
        }
        by_row[row] = Some(b);
    }
    let mut tb = TripletBuilder::new(n_rows, system.n_total());
    let mut dof_map = Vec::with_capacity(n_rows);
    for (row, slot) in by_row.iter().enumerate() {
        let id = if row < grid.n_cells() {
            CoarseDofId::Cell(row)
        } else {
            let g = row - grid.n_cells();
            CoarseDofId::Fragment {
                cell: grid.fragments[g].cell,
                network: grid.fragments[g].network,
                fragment: g,
            }
        };
        let basis = slot.ok_or_else(|| match id {
            CoarseDofId::Cell(i) => {
                Error::Config(format!("missing matrix basis for coarse cell {i}"))
            }
            CoarseDofId::Fragment { cell, network, .. } => Error::Config(format!(
                "missing fracture basis for fragment (coarse cell {cell}, network {network})"
            )),
        })?;
        for (&g, &v) in basis.indices.iter().zip(&basis.values) {
            if v != 0.0 {
                tb.push(row, g, v);
            }
        }
        dof_map.push(id);
    }
    Ok(ProjectionMatrix {
        r: tb.build(false),
        dof_map,
        n_m_fine: system.n_m,
        n_cells: grid.n_cells(),
    })
}

/// How the coarse mass matrix is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMode {
    /// M̄ = R M Rᵀ.
    Galerkin,
    /// Diagonal M̄ from coarse measures: a_m|K_i| per cell, a_f|γ| per
    /// fragment.
    Diagonal,
}

/// How the coarse right-hand side is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsMode {
    /// F̄ = R F.
    Galerkin,
    /// Direct coarse integration: fine source entries summed per coarse DOF
    /// (equals f·|K_i| and f·|γ| for piecewise-constant densities).
    Direct,
}

/// The upscaled model ready for time stepping.
#[derive(Debug, Clone)]
pub struct CoarseModel {
    /// Upscaled operator with the conservation repair applied.
    pub a: SparseMatrix,
    /// Coarse mass matrix (diagonal in [`MassMode::Diagonal`]).
    pub m: SparseMatrix,
    pub f: Vec<f64>,
    pub mass_mode: MassMode,
    pub rhs_mode: RhsMode,
    pub dof_map: Vec<CoarseDofId>,
}

impl CoarseModel {
    pub fn n_dofs(&self) -> usize {
        self.a.nrows()
    }
}

/// Forms Ā, M̄ and F̄ from the projection and the fine system.
///
/// Truncating the oversampled patches leaves the basis family short of a
/// partition of unity, so the raw R A Rᵀ picks up spurious row sums that act
/// as artificial sinks; repairing the diagonal restores zero row sums — the
/// discrete no-flow conservation property — without touching any coupling.
pub fn build_coarse_model(
    proj: &ProjectionMatrix,
    system: &BlockSystem,
    grid: &CoarseGrid,
    mass_mode: MassMode,
    rhs_mode: RhsMode,
) -> Result<CoarseModel> {
    if proj.r.ncols() != system.n_total() {
        return Err(Error::Config(format!(
            "projection has {} columns but the fine system has {} unknowns",
            proj.r.ncols(),
            system.n_total()
        )));
    }
    let raw = triple_product(&proj.r, &system.a)?;
    let sums = raw.row_sums();
    let correction: Vec<f64> = sums.iter().map(|s| -s).collect();
    let a = raw.with_added_diag(&correction);

    let m = match mass_mode {
        MassMode::Galerkin => triple_product(&proj.r, &SparseMatrix::from_diag(&system.m_diag))?,
        MassMode::Diagonal => {
            let mut d = Vec::with_capacity(proj.n_coarse());
            for id in &proj.dof_map {
                let v = match *id {
                    CoarseDofId::Cell(i) => grid.fine_in_coarse[i]
                        .iter()
                        .map(|&c| system.m_diag[c])
                        .sum(),
                    CoarseDofId::Fragment { fragment, .. } => grid.fragments[fragment]
                        .dofs
                        .iter()
                        .map(|&l| system.m_diag[system.n_m + l])
                        .sum(),
                };
                d.push(v);
            }
            SparseMatrix::from_diag(&d)
        }
    };
    let f = match rhs_mode {
        RhsMode::Galerkin => proj.r.matvec(&system.f),
        RhsMode::Direct => {
            let mut f = Vec::with_capacity(proj.n_coarse());
            for id in &proj.dof_map {
                let v = match *id {
                    CoarseDofId::Cell(i) => {
                        grid.fine_in_coarse[i].iter().map(|&c| system.f[c]).sum()
                    }
                    CoarseDofId::Fragment { fragment, .. } => grid.fragments[fragment]
                        .dofs
                        .iter()
                        .map(|&l| system.f[system.n_m + l])
                        .sum(),
                };
                f.push(v);
            }
            f
        }
    };
    Ok(CoarseModel {
        a,
        m,
        f,
        mass_mode,
        rhs_mode,
        dof_map: proj.dof_map.clone(),
    })
}
