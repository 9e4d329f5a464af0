//! Fine-grid finite-volume assembly.
//!
//! Both fracture models discretize the same mixed-dimensional flow problem
//! with a two-point flux approximation: cell unknowns carry the matrix
//! pressure, fracture unknowns live on lower-dimensional elements (mesh
//! facets in DFM, clipped sub-segments in EFM), and a transfer term σ couples
//! the continua. The assembled operator is
//!
//! ```text
//! A = [ A_m + Q_mm     −Q      ]        Q_mm = diag(row sums of Q)
//!     [   −Qᵀ       A_f + Q_ff ]        Q_ff = diag(column sums of Q)
//! ```
//!
//! which is symmetric with zero row sums (pure Neumann problem); the storage
//! matrix M is diagonal and carries no 1/τ factor — the time step is applied
//! at solve time.

use std::collections::HashMap;

use crate::geometry::{
    segment_contact, FineMesh, FracDof, FractureDofs, FractureGeometry, FractureMode, Rect,
    Segment,
};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::{Error, Result};

/// A coefficient that is either uniform or resolved per entity (cell or
/// network, depending on where it is used).
#[derive(Debug, Clone)]
pub enum Coefficient {
    Uniform(f64),
    PerEntity(Vec<f64>),
}

impl Coefficient {
    pub fn get(&self, i: usize) -> f64 {
        match self {
            Coefficient::Uniform(v) => *v,
            Coefficient::PerEntity(v) => v[i],
        }
    }

    fn check(&self, n: usize, name: &str, strictly_positive: bool) -> Result<()> {
        let values: Box<dyn Iterator<Item = f64>> = match self {
            Coefficient::Uniform(v) => Box::new(std::iter::once(*v)),
            Coefficient::PerEntity(v) => {
                if v.len() != n {
                    return Err(Error::Config(format!(
                        "{name} has {} entries, expected {n}",
                        v.len()
                    )));
                }
                Box::new(v.iter().copied())
            }
        };
        for (i, v) in values.enumerate() {
            if !v.is_finite() || v < 0.0 || (strictly_positive && v == 0.0) {
                return Err(Error::Config(format!("{name}[{i}] = {v} is invalid")));
            }
        }
        Ok(())
    }
}

/// Physical coefficients of the mixed-dimensional problem.
///
/// `a_m`/`a_f` are the storage coefficients (compressibilities), `b_m` the
/// matrix mobility k_m/μ (uniform or per fine cell), `b_f` the fracture
/// mobility and `sigma` the matrix–fracture transfer coefficient, both
/// resolved per fracture network.
#[derive(Debug, Clone)]
pub struct MaterialParams {
    pub a_m: f64,
    pub a_f: f64,
    pub b_m: Coefficient,
    pub b_f: Coefficient,
    pub sigma: Coefficient,
}

impl MaterialParams {
    /// Uniform coefficients everywhere (the common single-network setup).
    pub fn uniform(a_m: f64, a_f: f64, b_m: f64, b_f: f64, sigma: f64) -> MaterialParams {
        MaterialParams {
            a_m,
            a_f,
            b_m: Coefficient::Uniform(b_m),
            b_f: Coefficient::Uniform(b_f),
            sigma: Coefficient::Uniform(sigma),
        }
    }

    pub fn validate(&self, n_cells: usize, n_networks: usize) -> Result<()> {
        if !(self.a_m.is_finite() && self.a_m >= 0.0) {
            return Err(Error::Config(format!("a_m = {} is invalid", self.a_m)));
        }
        if !(self.a_f.is_finite() && self.a_f >= 0.0) {
            return Err(Error::Config(format!("a_f = {} is invalid", self.a_f)));
        }
        self.b_m.check(n_cells, "b_m", true)?;
        self.b_f.check(n_networks, "b_f", true)?;
        self.sigma.check(n_networks, "sigma", false)
    }
}

/// Transfer coefficient from the matrix/fracture permeabilities:
/// σ = 2/(k_m⁻¹ + k_f⁻¹), the harmonic average scaled by 2.
pub fn sigma_from_perms(k_m: f64, k_f: f64) -> Result<f64> {
    if !(k_m > 0.0 && k_f > 0.0) {
        return Err(Error::Config(format!(
            "sigma_from_perms requires positive permeabilities, got k_m={k_m}, k_f={k_f}"
        )));
    }
    Ok(2.0 / (1.0 / k_m + 1.0 / k_f))
}

/// TPFA transmissibility of an interior facet: T = b̃·|E|/d with d the
/// centroid distance and b̃ the distance-weighted harmonic mean of the two
/// incident-cell mobilities.
pub fn transmissibility(mesh: &FineMesh, facet: usize, b_m: &Coefficient) -> Result<f64> {
    let f = &mesh.facets[facet];
    let j = f.right.ok_or_else(|| {
        Error::Geometry(format!("facet {facet} is a boundary facet; no transmissibility"))
    })?;
    let i = f.left;
    let ci = mesh.cell_centroid[i];
    let cj = mesh.cell_centroid[j];
    let d_ij = crate::geometry::dist(ci, cj);
    if d_ij <= f64::EPSILON * mesh.domain.diameter() {
        return Err(Error::Geometry(format!(
            "cells {i} and {j} across facet {facet} have coincident centroids"
        )));
    }
    let d_i = crate::geometry::dist(ci, f.midpoint);
    let d_j = crate::geometry::dist(cj, f.midpoint);
    let (bi, bj) = (b_m.get(i), b_m.get(j));
    let b_tilde = (d_i + d_j) / (d_i / bi + d_j / bj);
    Ok(b_tilde * f.length / d_ij)
}

/// Fracture-segment coupling W = b_f/d between two adjacent fracture DOFs,
/// with d the distance between their midpoints.
pub fn fracture_transmissibility(mid_l: [f64; 2], mid_n: [f64; 2], b_f: f64) -> Result<f64> {
    let d = crate::geometry::dist(mid_l, mid_n);
    if d <= 0.0 {
        return Err(Error::Geometry(
            "adjacent fracture elements have coincident midpoints".into(),
        ));
    }
    Ok(b_f / d)
}

/// The assembled fine-scale system. Unknowns are ordered matrix cells first,
/// then fracture DOFs in the [`FractureDofs`] order.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub n_m: usize,
    pub n_f: usize,
    /// Matrix-block TPFA operator (n_m × n_m, no coupling).
    pub a_m: SparseMatrix,
    /// Fracture-block TPFA operator (n_f × n_f, no coupling).
    pub a_f: SparseMatrix,
    /// Coupling block Q (n_m × n_f).
    pub q: SparseMatrix,
    /// Full assembled operator with the coupling folded in.
    pub a: SparseMatrix,
    /// Diagonal storage matrix, a_m|ς_i| then a_f|ι_l| (no 1/τ factor).
    pub m_diag: Vec<f64>,
    /// Right-hand side (zero until sources are applied).
    pub f: Vec<f64>,
}

impl BlockSystem {
    pub fn n_total(&self) -> usize {
        self.n_m + self.n_f
    }

    pub fn f_matrix(&self) -> &[f64] {
        &self.f[..self.n_m]
    }

    pub fn f_fracture(&self) -> &[f64] {
        &self.f[self.n_m..]
    }

    pub fn m_matrix(&self) -> &[f64] {
        &self.m_diag[..self.n_m]
    }

    pub fn m_fracture(&self) -> &[f64] {
        &self.m_diag[self.n_m..]
    }
}

/// Assembles the full operator from the three blocks; the coupling
/// compensation diagonals keep every row sum exactly zero.
fn assemble_blocks(
    mesh: &FineMesh,
    fdofs: &FractureDofs,
    params: &MaterialParams,
    a_m: SparseMatrix,
    a_f: SparseMatrix,
    q: SparseMatrix,
) -> BlockSystem {
    let (n_m, n_f) = (mesh.n_cells(), fdofs.len());
    let n = n_m + n_f;
    let mut full = TripletBuilder::new(n, n);
    for (r, c, v) in a_m.iter() {
        full.push(r, c, v);
    }
    for (r, c, v) in a_f.iter() {
        full.push(n_m + r, n_m + c, v);
    }
    let mut q_ff = vec![0.0; n_f];
    for (r, c, v) in q.iter() {
        // Row/column compensation keeps A·1 = 0: the pair (+v on the
        // diagonal, −v off-diagonal) telescopes exactly.
        full.push(r, r, v);
        full.push(r, n_m + c, -v);
        full.push(n_m + c, r, -v);
        q_ff[c] += v;
    }
    for (l, &v) in q_ff.iter().enumerate() {
        full.push(n_m + l, n_m + l, v);
    }
    let a = full.build(true);

    let mut m_diag = Vec::with_capacity(n);
    for i in 0..n_m {
        m_diag.push(params.a_m * mesh.cell_area[i]);
    }
    for dof in &fdofs.dofs {
        m_diag.push(params.a_f * dof.length);
    }
    BlockSystem {
        n_m,
        n_f,
        a_m,
        a_f,
        q,
        a,
        m_diag,
        f: vec![0.0; n],
    }
}

/// Matrix-block TPFA over interior facets, skipping the given facet set
/// (fracture facets in DFM; empty in EFM).
fn matrix_tpfa(
    mesh: &FineMesh,
    b_m: &Coefficient,
    skip: &dyn Fn(usize) -> bool,
) -> Result<SparseMatrix> {
    let mut tb = TripletBuilder::new(mesh.n_cells(), mesh.n_cells());
    for (fi, f) in mesh.facets.iter().enumerate() {
        let Some(j) = f.right else { continue };
        if skip(fi) {
            continue;
        }
        let t = transmissibility(mesh, fi, b_m)?;
        tb.push_pair(f.left, j, t);
    }
    Ok(tb.build(true))
}

/// Fracture-block TPFA from an adjacency pair list.
fn fracture_tpfa(
    dofs: &[FracDof],
    pairs: &[(usize, usize)],
    b_f: &Coefficient,
) -> Result<SparseMatrix> {
    let mut tb = TripletBuilder::new(dofs.len(), dofs.len());
    for &(l, n) in pairs {
        debug_assert_eq!(dofs[l].network, dofs[n].network);
        let w = fracture_transmissibility(
            dofs[l].midpoint,
            dofs[n].midpoint,
            b_f.get(dofs[l].network),
        )?;
        tb.push_pair(l, n, w);
    }
    Ok(tb.build(true))
}

/// Assembles the discrete fracture model: fractures resolved by mesh facets.
/// Matrix–matrix flux across fracture facets is removed, and each fracture
/// facet couples BOTH incident cells to its fracture DOF with coefficient σ.
pub fn assemble_dfm(
    mesh: &FineMesh,
    fractures: &FractureGeometry,
    fdofs: &FractureDofs,
    params: &MaterialParams,
) -> Result<BlockSystem> {
    if fdofs.mode != FractureMode::Dfm {
        return Err(Error::Config("assemble_dfm called with EFM fracture DOFs".into()));
    }
    params.validate(mesh.n_cells(), fractures.n_networks.max(fdofs.n_networks))?;

    let mut facet_is_frac = vec![false; mesh.n_facets()];
    for dof in &fdofs.dofs {
        let fi = dof.facet.ok_or_else(|| {
            Error::Geometry("DFM fracture DOF without a matched facet".into())
        })?;
        facet_is_frac[fi] = true;
    }
    let a_m = matrix_tpfa(mesh, &params.b_m, &|fi| facet_is_frac[fi])?;

    // Fracture adjacency: DOFs whose facets share a mesh vertex. The network
    // check guards against facets of unrelated fractures meeting at a vertex.
    let mut by_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
    for (l, dof) in fdofs.dofs.iter().enumerate() {
        let f = &mesh.facets[dof.facet.unwrap()];
        by_vertex.entry(f.v[0]).or_default().push(l);
        by_vertex.entry(f.v[1]).or_default().push(l);
    }
    let mut verts: Vec<usize> = by_vertex.keys().copied().collect();
    verts.sort_unstable();
    let mut pairs = Vec::new();
    for v in verts {
        let ls = &by_vertex[&v];
        for a in 0..ls.len() {
            for b in a + 1..ls.len() {
                if fdofs.dofs[ls[a]].network == fdofs.dofs[ls[b]].network {
                    pairs.push((ls[a], ls[b]));
                }
            }
        }
    }
    let a_f = fracture_tpfa(&fdofs.dofs, &pairs, &params.b_f)?;

    let mut qb = TripletBuilder::new(mesh.n_cells(), fdofs.len());
    for (l, dof) in fdofs.dofs.iter().enumerate() {
        let f = &mesh.facets[dof.facet.unwrap()];
        let s = params.sigma.get(dof.network);
        qb.push(f.left, l, s);
        let j = f.right.ok_or_else(|| {
            Error::Geometry(format!(
                "fracture DOF {l} sits on boundary facet {}; DFM fractures must be interior",
                dof.facet.unwrap()
            ))
        })?;
        qb.push(j, l, s);
    }
    let q = qb.build(false);
    Ok(assemble_blocks(mesh, fdofs, params, a_m, a_f, q))
}

/// Assembles the embedded fracture model: the matrix keeps its full TPFA
/// stencil, fracture DOFs are the clipped sub-segments, and Q couples each
/// sub-segment to its host cell with coefficient σ.
pub fn assemble_efm(
    mesh: &FineMesh,
    fractures: &FractureGeometry,
    fdofs: &FractureDofs,
    params: &MaterialParams,
) -> Result<BlockSystem> {
    if fdofs.mode != FractureMode::Efm {
        return Err(Error::Config("assemble_efm called with DFM fracture DOFs".into()));
    }
    if fdofs.is_empty() && fractures.n_segments() > 0 {
        return Err(Error::Geometry(
            "EFM assembly requires a clip table but the fracture DOF set is empty".into(),
        ));
    }
    params.validate(mesh.n_cells(), fractures.n_networks.max(fdofs.n_networks))?;

    let a_m = matrix_tpfa(mesh, &params.b_m, &|_| false)?;

    // Adjacency along a parent: clip pieces are emitted in parameter order,
    // so consecutive DOFs of the same segment are neighbors.
    let mut pairs = Vec::new();
    for l in 1..fdofs.len() {
        if fdofs.dofs[l].segment == fdofs.dofs[l - 1].segment {
            pairs.push((l - 1, l));
        }
    }
    // Adjacency across parents: where two segments of one network touch, the
    // sub-segment of each parent nearest the contact point gets coupled.
    let mut by_segment: HashMap<usize, Vec<usize>> = HashMap::new();
    for (l, dof) in fdofs.dofs.iter().enumerate() {
        by_segment.entry(dof.segment).or_default().push(l);
    }
    let tol = crate::geometry::GEOM_REL_TOL * mesh.domain.diameter();
    let near_tol = 1e-9 * mesh.domain.diameter();
    let nearest_piece = |si: usize, x: [f64; 2]| -> Option<usize> {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for &l in by_segment.get(&si)? {
            let piece = Segment::new(fdofs.dofs[l].a, fdofs.dofs[l].b);
            let d = piece.distance_to_point(x);
            if d < best_d {
                best_d = d;
                best = Some(l);
            }
        }
        (best_d <= near_tol).then_some(best).flatten()
    };
    for s1 in 0..fractures.n_segments() {
        for s2 in s1 + 1..fractures.n_segments() {
            if fractures.network_id[s1] != fractures.network_id[s2] {
                continue;
            }
            let Some(x) = segment_contact(
                &fractures.segments[s1],
                &fractures.segments[s2],
                tol,
            ) else {
                continue;
            };
            if let (Some(la), Some(lb)) = (nearest_piece(s1, x), nearest_piece(s2, x)) {
                pairs.push((la, lb));
            }
        }
    }
    let a_f = fracture_tpfa(&fdofs.dofs, &pairs, &params.b_f)?;

    let mut qb = TripletBuilder::new(mesh.n_cells(), fdofs.len());
    for (l, dof) in fdofs.dofs.iter().enumerate() {
        qb.push(dof.cell, l, params.sigma.get(dof.network));
    }
    let q = qb.build(false);
    Ok(assemble_blocks(mesh, fdofs, params, a_m, a_f, q))
}

/// Dispatches on the fracture DOF mode.
pub fn assemble(
    mesh: &FineMesh,
    fractures: &FractureGeometry,
    fdofs: &FractureDofs,
    params: &MaterialParams,
) -> Result<BlockSystem> {
    match fdofs.mode {
        FractureMode::Dfm => assemble_dfm(mesh, fractures, fdofs, params),
        FractureMode::Efm => assemble_efm(mesh, fractures, fdofs, params),
    }
}

/// Where a source term acts.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceRegion {
    /// Entities whose representative point (cell centroid / DOF midpoint)
    /// lies strictly inside the rectangle.
    Rect(Rect),
    /// Explicit entity indices into the target continuum.
    Cells(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceTarget {
    Matrix,
    Fracture,
}

/// One source/sink: rate density q applied as q·|ς_i| or q·|ι_l| on every
/// target entity in the region.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTerm {
    pub region: SourceRegion,
    pub target: SourceTarget,
    pub rate: f64,
}

/// The full source specification of an experiment.
#[derive(Debug, Clone, Default)]
pub struct SourceSpec {
    pub terms: Vec<SourceTerm>,
}

/// Outcome of source application: which entities each term reached.
#[derive(Debug, Clone)]
pub struct SourceReport {
    /// Number of entities hit, per term.
    pub hits: Vec<usize>,
    /// Indices of terms whose region contained no target entity.
    pub empty_terms: Vec<usize>,
}

/// Adds the source terms onto the right-hand side. A term whose region
/// contains no target entity is flagged in the report, not an error.
pub fn apply_sources(
    system: &mut BlockSystem,
    sources: &SourceSpec,
    mesh: &FineMesh,
    fdofs: &FractureDofs,
) -> Result<SourceReport> {
    let tol = crate::geometry::GEOM_REL_TOL * mesh.domain.diameter();
    let mut report = SourceReport {
        hits: Vec::with_capacity(sources.terms.len()),
        empty_terms: Vec::new(),
    };
    for (ti, term) in sources.terms.iter().enumerate() {
        if let SourceRegion::Rect(r) = &term.region {
            let inside = mesh.domain.contains([r.x0, r.y0], tol)
                && mesh.domain.contains([r.x1, r.y1], tol);
            if !inside {
                return Err(Error::Config(format!(
                    "source region {ti} [{},{}]x[{},{}] extends outside the domain",
                    r.x0, r.x1, r.y0, r.y1
                )));
            }
        }
        let mut hit = 0usize;
        match term.target {
            SourceTarget::Matrix => match &term.region {
                SourceRegion::Rect(r) => {
                    for i in 0..system.n_m {
                        if r.contains_open(mesh.cell_centroid[i]) {
                            system.f[i] += term.rate * mesh.cell_area[i];
                            hit += 1;
                        }
                    }
                }
                SourceRegion::Cells(cells) => {
                    for &i in cells {
                        if i >= system.n_m {
                            return Err(Error::Config(format!(
                                "source term {ti} names matrix cell {i}, but the mesh has {} cells",
                                system.n_m
                            )));
                        }
                        system.f[i] += term.rate * mesh.cell_area[i];
                        hit += 1;
                    }
                }
            },
            SourceTarget::Fracture => match &term.region {
                SourceRegion::Rect(r) => {
                    for (l, dof) in fdofs.dofs.iter().enumerate() {
                        if r.contains_open(dof.midpoint) {
                            system.f[system.n_m + l] += term.rate * dof.length;
                            hit += 1;
                        }
                    }
                }
                SourceRegion::Cells(dofs) => {
                    for &l in dofs {
                        if l >= system.n_f {
                            return Err(Error::Config(format!(
                                "source term {ti} names fracture DOF {l}, but there are {}",
                                system.n_f
                            )));
                        }
                        system.f[system.n_m + l] += term.rate * fdofs.dofs[l].length;
                        hit += 1;
                    }
                }
            },
        }
        if hit == 0 {
            report.empty_terms.push(ti);
        }
        report.hits.push(hit);
    }
    Ok(report)
}

/// Rescales the negative RHS entries so injection and production cancel:
/// after the call Σf = 0 up to roundoff. No-op when either part vanishes.
pub fn balance_rhs(f: &mut [f64]) {
    let pos: f64 = f.iter().filter(|v| **v > 0.0).sum();
    let neg: f64 = -f.iter().filter(|v| **v < 0.0).sum::<f64>();
    if pos == 0.0 || neg == 0.0 {
        return;
    }
    let scale = pos / neg;
    for v in f.iter_mut() {
        if *v < 0.0 {
            *v *= scale;
        }
    }
}
