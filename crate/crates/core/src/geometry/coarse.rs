//! Coarse rectangular grids, fracture fragments and oversampled patches.

use std::collections::HashMap;

use super::clip::clip_segment_to_cells;
use super::fracture::{FractureGeometry, FractureMode};
use super::mesh::{FineMesh, Rect};
use crate::{Error, Result};

/// A fine-scale fracture degree of freedom.
///
/// In EFM mode these are the clipped sub-segments (one per cell a fracture
/// passes through); in DFM mode each fracture facet is one DOF. The DOF
/// order — segments in input order, pieces in parameter order — fixes the
/// fracture block layout of the assembled system.
#[derive(Debug, Clone, Copy)]
pub struct FracDof {
    /// Parent fracture segment.
    pub segment: usize,
    pub network: usize,
    /// Host cell: the containing cell (EFM) or the facet's first incident
    /// cell (DFM).
    pub cell: usize,
    /// Matched mesh facet (DFM only).
    pub facet: Option<usize>,
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub midpoint: [f64; 2],
    pub length: f64,
}

/// The fracture DOF table shared by assembly and coarse-grid construction,
/// so that both see the identical set of fracture unknowns.
#[derive(Debug, Clone)]
pub struct FractureDofs {
    pub mode: FractureMode,
    pub dofs: Vec<FracDof>,
    pub n_networks: usize,
}

impl FractureDofs {
    /// Derives the fracture DOFs from a labeled fracture set: clipping in
    /// EFM mode, facet matching in DFM mode. An empty labeled set is allowed
    /// through [`FractureDofs::empty`]; here segments are required.
    pub fn build(mesh: &FineMesh, fractures: &FractureGeometry) -> Result<FractureDofs> {
        let mut dofs = Vec::new();
        match fractures.mode {
            FractureMode::Efm => {
                let locator = mesh.locator();
                for (si, seg) in fractures.segments.iter().enumerate() {
                    let pieces = clip_segment_to_cells(seg.a, seg.b, mesh, &locator)?;
                    if pieces.is_empty() {
                        return Err(Error::Geometry(format!(
                            "fracture segment {si} produced no clipped pieces (zero length?)"
                        )));
                    }
                    for p in pieces {
                        dofs.push(FracDof {
                            segment: si,
                            network: fractures.network_id[si],
                            cell: p.cell,
                            facet: None,
                            a: p.a,
                            b: p.b,
                            midpoint: [(p.a[0] + p.b[0]) / 2.0, (p.a[1] + p.b[1]) / 2.0],
                            length: p.length,
                        });
                    }
                }
            }
            FractureMode::Dfm => {
                let matched = fractures.match_to_facets(mesh)?;
                for (si, (seg, &fi)) in fractures.segments.iter().zip(&matched).enumerate() {
                    let facet = &mesh.facets[fi];
                    if !facet.is_interior() {
                        return Err(Error::Geometry(format!(
                            "fracture segment {si} lies on boundary facet {fi}; fracture facets must be interior"
                        )));
                    }
                    dofs.push(FracDof {
                        segment: si,
                        network: fractures.network_id[si],
                        cell: facet.left,
                        facet: Some(fi),
                        a: seg.a,
                        b: seg.b,
                        midpoint: facet.midpoint,
                        length: facet.length,
                    });
                }
            }
        }
        Ok(FractureDofs {
            mode: fractures.mode,
            dofs,
            n_networks: fractures.n_networks,
        })
    }

    /// A fracture-free DOF table (meshes without fractures).
    pub fn empty(mode: FractureMode) -> FractureDofs {
        FractureDofs {
            mode,
            dofs: Vec::new(),
            n_networks: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }
}

/// A fracture fragment: the portion of one network inside one coarse cell,
/// realized as the set of fine fracture DOFs whose midpoint lies there. Each
/// fragment carries one coarse DOF.
#[derive(Debug, Clone)]
pub struct Fragment {
    pub cell: usize,
    pub network: usize,
    /// Σ of member DOF lengths.
    pub measure: f64,
    /// Member fine fracture DOF indices (ascending).
    pub dofs: Vec<usize>,
}

/// Uniform rectangular coarse grid over the fine mesh, with the fine-cell
/// ownership map and the fracture fragment table.
#[derive(Debug, Clone)]
pub struct CoarseGrid {
    pub nx: usize,
    pub ny: usize,
    pub domain: Rect,
    /// Owning coarse cell per fine cell (by centroid).
    pub cell_of_fine: Vec<usize>,
    /// Fine cells per coarse cell (ascending).
    pub fine_in_coarse: Vec<Vec<usize>>,
    /// Coarse-cell measure |K_i| = Σ of owned fine-cell areas.
    pub cell_area: Vec<f64>,
    /// Owning coarse cell per fine fracture DOF (by midpoint), including
    /// DOFs whose fragment was discarded as a sliver.
    pub coarse_of_dof: Vec<usize>,
    /// Fragments sorted by (coarse cell, network); the fracture coarse-DOF
    /// order.
    pub fragments: Vec<Fragment>,
    /// Fragment indices per coarse cell (ascending). `L_i` is the length of
    /// entry `i`.
    pub frags_in_coarse: Vec<Vec<usize>>,
    /// Fragment membership per fine fracture DOF (`None` for DOFs of
    /// discarded sliver fragments).
    pub frag_of_dof: Vec<Option<usize>>,
}

impl CoarseGrid {
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_fragments(&self) -> usize {
        self.fragments.len()
    }

    /// Number of networks present in coarse cell `i` (the paper's L_i).
    pub fn networks_in(&self, i: usize) -> usize {
        self.frags_in_coarse[i].len()
    }

    /// Total coarse DOF count: one per coarse cell plus one per fragment.
    pub fn n_coarse_dofs(&self) -> usize {
        self.n_cells() + self.n_fragments()
    }

    pub fn cell_coords(&self, i: usize) -> (usize, usize) {
        (i % self.nx, i / self.nx)
    }

    pub fn cell_rect(&self, i: usize) -> Rect {
        let (ix, iy) = self.cell_coords(i);
        let hx = self.domain.width() / self.nx as f64;
        let hy = self.domain.height() / self.ny as f64;
        Rect::new(
            self.domain.x0 + ix as f64 * hx,
            self.domain.y0 + iy as f64 * hy,
            self.domain.x0 + (ix + 1) as f64 * hx,
            self.domain.y0 + (iy + 1) as f64 * hy,
        )
    }

    /// Owning coarse cell of a point (clamped floor rule; points on a coarse
    /// gridline belong to the higher cell except on the domain boundary).
    pub fn coarse_cell_of_point(&self, p: [f64; 2]) -> usize {
        let fx = (p[0] - self.domain.x0) / self.domain.width() * self.nx as f64;
        let fy = (p[1] - self.domain.y0) / self.domain.height() * self.ny as f64;
        let ix = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let iy = (fy.floor().max(0.0) as usize).min(self.ny - 1);
        iy * self.nx + ix
    }

    /// Looks up a fragment index by (coarse cell, network).
    pub fn fragment_index(&self, cell: usize, network: usize) -> Option<usize> {
        self.frags_in_coarse[cell]
            .iter()
            .copied()
            .find(|&g| self.fragments[g].network == network)
    }
}

/// Builds the coarse grid: fine cells are assigned by centroid, fracture
/// DOFs by midpoint, and fragments aggregate the DOFs of one network inside
/// one coarse cell. Fragments with measure ≤ 1e-12 of the domain diameter
/// are discarded (their DOFs keep no fragment and get no coarse DOF).
pub fn build_coarse_grid(
    mesh: &FineMesh,
    fdofs: &FractureDofs,
    nx_c: usize,
    ny_c: usize,
) -> Result<CoarseGrid> {
    if nx_c == 0 || ny_c == 0 {
        return Err(Error::Config(format!(
            "coarse resolution {nx_c}x{ny_c} must be positive"
        )));
    }
    let n_coarse = nx_c * ny_c;
    let mut grid = CoarseGrid {
        nx: nx_c,
        ny: ny_c,
        domain: mesh.domain,
        cell_of_fine: Vec::with_capacity(mesh.n_cells()),
        fine_in_coarse: vec![Vec::new(); n_coarse],
        cell_area: vec![0.0; n_coarse],
        coarse_of_dof: Vec::with_capacity(fdofs.len()),
        fragments: Vec::new(),
        frags_in_coarse: vec![Vec::new(); n_coarse],
        frag_of_dof: vec![None; fdofs.len()],
    };

    let tol = super::GEOM_REL_TOL * mesh.domain.diameter();
    for (ci, &c) in mesh.cell_centroid.iter().enumerate() {
        if !mesh.domain.contains(c, tol) {
            return Err(Error::Geometry(format!(
                "fine cell {ci} centroid ({:.6},{:.6}) lies outside every coarse cell",
                c[0], c[1]
            )));
        }
        let k = grid.coarse_cell_of_point(c);
        grid.cell_of_fine.push(k);
        grid.fine_in_coarse[k].push(ci);
        grid.cell_area[k] += mesh.cell_area[ci];
    }

    // Aggregate fracture DOFs into (coarse cell, network) fragments.
    let mut frag_map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (di, dof) in fdofs.dofs.iter().enumerate() {
        let k = grid.coarse_cell_of_point(dof.midpoint);
        grid.coarse_of_dof.push(k);
        frag_map.entry((k, dof.network)).or_default().push(di);
    }
    let mut keys: Vec<(usize, usize)> = frag_map.keys().copied().collect();
    keys.sort_unstable();
    let sliver = 1e-12 * mesh.domain.diameter();
    for (cell, network) in keys {
        let dofs = frag_map.remove(&(cell, network)).unwrap();
        let measure: f64 = dofs.iter().map(|&d| fdofs.dofs[d].length).sum();
        if measure <= sliver {
            continue;
        }
        let g = grid.fragments.len();
        for &d in &dofs {
            grid.frag_of_dof[d] = Some(g);
        }
        grid.frags_in_coarse[cell].push(g);
        grid.fragments.push(Fragment {
            cell,
            network,
            measure,
            dofs,
        });
    }
    Ok(grid)
}

/// An oversampled patch K_i^+: the coarse cell `center` grown by `layers`
/// rings of coarse neighbors, together with the fine entities it contains.
#[derive(Debug, Clone)]
pub struct Oversample {
    pub center: usize,
    pub layers: usize,
    /// Member coarse cells (ascending).
    pub coarse_members: Vec<usize>,
    /// Member fine cells (ascending).
    pub fine_cells: Vec<usize>,
    /// Member fine fracture DOFs (ascending): every DOF whose owning coarse
    /// cell is a member.
    pub frac_dofs: Vec<usize>,
    /// fine cell → local index within `fine_cells`.
    pub local_of_cell: HashMap<usize, usize>,
    /// fracture DOF → local index within `frac_dofs`.
    pub local_of_frac: HashMap<usize, usize>,
}

impl Oversample {
    /// Number of local flow unknowns (matrix + fracture).
    pub fn n_flow(&self) -> usize {
        self.fine_cells.len() + self.frac_dofs.len()
    }

    pub fn contains_coarse(&self, k: usize) -> bool {
        self.coarse_members.binary_search(&k).is_ok()
    }
}

/// Builds the oversampled region for coarse cell `i` with `s` layers: all
/// coarse cells within Chebyshev distance `s` (an interior cell at s=1 gets
/// the full 3×3 block; the boundary truncates).
pub fn oversample(grid: &CoarseGrid, i: usize, s: usize) -> Result<Oversample> {
    if i >= grid.n_cells() {
        return Err(Error::Config(format!(
            "coarse cell index {i} out of range (grid has {} cells)",
            grid.n_cells()
        )));
    }
    if s == 0 {
        return Err(Error::Config("oversampling layer count must be ≥ 1".into()));
    }
    let (cx, cy) = grid.cell_coords(i);
    let x0 = cx.saturating_sub(s);
    let x1 = (cx + s).min(grid.nx - 1);
    let y0 = cy.saturating_sub(s);
    let y1 = (cy + s).min(grid.ny - 1);
    let mut coarse_members = Vec::with_capacity((x1 - x0 + 1) * (y1 - y0 + 1));
    for iy in y0..=y1 {
        for ix in x0..=x1 {
            coarse_members.push(iy * grid.nx + ix);
        }
    }
    coarse_members.sort_unstable();

    let mut fine_cells = Vec::new();
    for &k in &coarse_members {
        fine_cells.extend_from_slice(&grid.fine_in_coarse[k]);
    }
    fine_cells.sort_unstable();

    let member = |k: usize| coarse_members.binary_search(&k).is_ok();
    let mut frac_dofs: Vec<usize> = grid
        .coarse_of_dof
        .iter()
        .enumerate()
        .filter(|(_, &k)| member(k))
        .map(|(d, _)| d)
        .collect();
    frac_dofs.sort_unstable();

    let local_of_cell = fine_cells.iter().enumerate().map(|(l, &c)| (c, l)).collect();
    let local_of_frac = frac_dofs.iter().enumerate().map(|(l, &d)| (d, l)).collect();
    Ok(Oversample {
        center: i,
        layers: s,
        coarse_members,
        fine_cells,
        frac_dofs,
        local_of_cell,
        local_of_frac,
    })
}
