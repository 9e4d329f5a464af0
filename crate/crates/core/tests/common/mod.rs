//! Shared fixtures for the integration tests: the anchored analog geometries
//! and parameter sets exercised by the whole suite. Two segments (EFM) or
//! facet chains (DFM) are pinned through the source rectangles so the source
//! terms are never empty, and the remaining fractures come from the seeded
//! generators.
#![allow(dead_code)]

use nlmc_flow::fvm::{
    self, BlockSystem, Coefficient, MaterialParams, SourceRegion, SourceSpec, SourceTarget,
    SourceTerm,
};
use nlmc_flow::geometry::{
    build_coarse_grid, generate_fractures_dfm, generate_fractures_efm, generate_structured_mesh,
    label_networks, label_networks_with_hints, CoarseGrid, FineMesh, FractureDofs,
    FractureGeometry, FractureMode, FractureSpec, GeneratorParams, Rect, Segment,
};
use nlmc_flow::nlmc::{self, CoarseModel, MassMode, RhsMode};
use nlmc_flow::sim::TimeSpec;

pub const Q_RATE: f64 = 1e-3;

pub fn unit() -> Rect {
    Rect::new(0.0, 0.0, 1.0, 1.0)
}

pub struct Fixture {
    pub mesh: FineMesh,
    pub fractures: FractureGeometry,
    pub fdofs: FractureDofs,
    pub grid: CoarseGrid,
}

impl Fixture {
    pub fn dof_fine(&self) -> usize {
        self.mesh.n_cells() + self.fdofs.dofs.len()
    }
}

/// EFM analog geometry: two fixed fractures through the source regions plus
/// `n_random` seeded ones, `n` fine cells per side, `nc` coarse.
pub fn efm_fixture(n: usize, nc: usize, seed: u64, n_random: usize) -> Fixture {
    let domain = unit();
    let mesh = generate_structured_mesh(n, n, domain).unwrap();
    let mut segments = vec![
        Segment::new([0.105, 0.02], [0.145, 0.28]),
        Segment::new([0.58, 0.86], [0.68, 0.93]),
    ];
    let params = GeneratorParams {
        n_fractures: n_random,
        min_length: 0.2,
        max_length: 0.4,
        seed,
    };
    for spec in generate_fractures_efm(&domain, &params).unwrap() {
        segments.push(Segment::new(spec.a, spec.b));
    }
    let fractures = label_networks(segments, FractureMode::Efm).unwrap();
    let fdofs = FractureDofs::build(&mesh, &fractures).unwrap();
    let grid = build_coarse_grid(&mesh, &fdofs, nc, nc).unwrap();
    Fixture {
        mesh,
        fractures,
        fdofs,
        grid,
    }
}

/// Vertex coordinate helpers matching the structured-mesh construction
/// exactly, so anchored DFM chains coincide with facets bitwise.
fn vx(domain: &Rect, n: usize, i: usize) -> f64 {
    if i == n {
        domain.x1
    } else {
        domain.x0 + i as f64 * (domain.width() / n as f64)
    }
}

fn vy(domain: &Rect, n: usize, j: usize) -> f64 {
    if j == n {
        domain.y1
    } else {
        domain.y0 + j as f64 * (domain.height() / n as f64)
    }
}

/// DFM analog geometry on an `n`×`n` grid (`n` a multiple of 8): a vertical
/// chain through the lower-left source rectangle, a horizontal one through
/// the upper-right, plus `n_random` seeded lattice chains.
pub fn dfm_fixture(n: usize, nc: usize, seed: u64, n_random: usize) -> Fixture {
    let domain = unit();
    let mesh = generate_structured_mesh(n, n, domain).unwrap();
    let mut specs: Vec<FractureSpec> = Vec::new();
    // Vertical chain at x = 0.075, y in [h, h + 20 segments].
    let vi = (3 * n).div_euclid(40).max(1);
    for j in 1..=(n / 4) {
        specs.push(FractureSpec {
            a: [vx(&domain, n, vi), vy(&domain, n, j)],
            b: [vx(&domain, n, vi), vy(&domain, n, j + 1)],
            network_hint: Some(0),
        });
    }
    // Horizontal chain at y = 0.925 with x spanning [0.625, 0.75].
    let hj = (37 * n).div_euclid(40).min(n - 1);
    for i in (5 * n).div_euclid(8)..(3 * n).div_euclid(4) {
        specs.push(FractureSpec {
            a: [vx(&domain, n, i), vy(&domain, n, hj)],
            b: [vx(&domain, n, i + 1), vy(&domain, n, hj)],
            network_hint: Some(1),
        });
    }
    let anchor_mids: Vec<[f64; 2]> = specs
        .iter()
        .map(|s| [0.5 * (s.a[0] + s.b[0]), 0.5 * (s.a[1] + s.b[1])])
        .collect();
    let params = GeneratorParams {
        n_fractures: n_random,
        min_length: 0.1,
        max_length: 0.3,
        seed,
    };
    for spec in generate_fractures_dfm(&domain, n, n, &params).unwrap() {
        // Drop generator facets that collide with an anchor facet.
        let mid = [0.5 * (spec.a[0] + spec.b[0]), 0.5 * (spec.a[1] + spec.b[1])];
        let clash = anchor_mids
            .iter()
            .any(|m| (m[0] - mid[0]).abs() + (m[1] - mid[1]).abs() < 1e-12);
        if clash {
            continue;
        }
        specs.push(FractureSpec {
            a: spec.a,
            b: spec.b,
            network_hint: spec.network_hint.map(|h| h + 2),
        });
    }
    let (segments, hints): (Vec<Segment>, Vec<Option<usize>>) = specs
        .iter()
        .map(|s| (Segment::new(s.a, s.b), s.network_hint))
        .unzip();
    let fractures = label_networks_with_hints(segments, &hints, FractureMode::Dfm).unwrap();
    let fdofs = FractureDofs::build(&mesh, &fractures).unwrap();
    let grid = build_coarse_grid(&mesh, &fdofs, nc, nc).unwrap();
    Fixture {
        mesh,
        fractures,
        fdofs,
        grid,
    }
}

/// Uniform material set with the harmonic transfer coefficient (unit
/// viscosity and thickness).
pub fn uniform_params(n_networks: usize, k_m: f64, k_f: f64, c_m: f64, c_f: f64) -> MaterialParams {
    let nn = n_networks.max(1);
    let sigma = fvm::sigma_from_perms(k_m, k_f).unwrap();
    MaterialParams {
        a_m: c_m,
        a_f: c_f,
        b_m: Coefficient::Uniform(k_m),
        b_f: Coefficient::PerEntity(vec![k_f; nn]),
        sigma: Coefficient::PerEntity(vec![sigma; nn]),
    }
}

/// High-permeability fracture set (k_m = 1e-6, k_f = 1).
pub fn high_perm_params(n_networks: usize) -> MaterialParams {
    uniform_params(n_networks, 1e-6, 1.0, 1e-5, 1e-6)
}

/// Low-permeability fracture set (k_f = 1e-10 << k_m).
pub fn low_perm_params(n_networks: usize) -> MaterialParams {
    uniform_params(n_networks, 1e-4, 1e-10, 1e-5, 1e-6)
}

/// Log-uniform heterogeneous permeability field around `k_m`, one decade in
/// each direction; sigma stays at the nominal value.
pub fn heterogeneous_params(n_networks: usize, n_cells: usize, k_m: f64, seed: u64) -> MaterialParams {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 1000);
    let lo = (k_m / 10.0).log10();
    let hi = (k_m * 10.0).log10();
    let field: Vec<f64> = (0..n_cells)
        .map(|_| 10f64.powf(rng.gen_range(lo..hi)))
        .collect();
    let mut p = uniform_params(n_networks, k_m, 1.0, 1e-5, 1e-6);
    p.b_m = Coefficient::PerEntity(field);
    p
}

/// The two fracture-targeted source rectangles. `balanced` flips the second
/// rate; the unbalanced variant injects on both (the two-injection layout).
pub fn fracture_sources(balanced: bool) -> SourceSpec {
    let (r1, r2) = if balanced {
        (
            Rect::new(0.1, 0.05, 0.15, 0.1),
            Rect::new(0.6, 0.9, 0.65, 0.95),
        )
    } else {
        (
            Rect::new(0.05, 0.05, 0.1, 0.1),
            Rect::new(0.65, 0.9, 0.7, 0.95),
        )
    };
    let sign = if balanced { -1.0 } else { 1.0 };
    SourceSpec {
        terms: vec![
            SourceTerm {
                region: SourceRegion::Rect(r1),
                target: SourceTarget::Fracture,
                rate: Q_RATE,
            },
            SourceTerm {
                region: SourceRegion::Rect(r2),
                target: SourceTarget::Fracture,
                rate: sign * Q_RATE,
            },
        ],
    }
}

/// Assembles the fixture with sources applied; panics if a term is empty.
pub fn assemble_with_sources(
    fix: &Fixture,
    params: &MaterialParams,
    sources: &SourceSpec,
) -> BlockSystem {
    let mut sys = fvm::assemble(&fix.mesh, &fix.fractures, &fix.fdofs, params).unwrap();
    let report = fvm::apply_sources(&mut sys, sources, &fix.mesh, &fix.fdofs).unwrap();
    assert!(
        report.empty_terms.is_empty(),
        "fixture source terms {:?} hit nothing",
        report.empty_terms
    );
    sys
}

pub fn default_time() -> TimeSpec {
    TimeSpec {
        t_max: 0.1,
        n_steps: 20,
        p0: 1.0,
    }
}

/// Builds bases, projection and coarse model for one layer count.
pub fn coarse_model(
    sys: &BlockSystem,
    fix: &Fixture,
    layers: usize,
    mass: MassMode,
    rhs: RhsMode,
) -> CoarseModel {
    let bases =
        nlmc::build_all_bases(sys, &fix.mesh, &fix.fdofs, &fix.grid, layers, false).unwrap();
    let proj = nlmc::assemble_projection(&bases, &fix.grid, sys).unwrap();
    nlmc::build_coarse_model(&proj, sys, &fix.grid, mass, rhs).unwrap()
}

/// Relative matrix error (percent) of the coarse trajectory against the fine
/// one at the final time.
pub fn final_matrix_error(sys: &BlockSystem, fix: &Fixture, model: &CoarseModel) -> f64 {
    let time = default_time();
    let fine = nlmc_flow::sim::run_fine(sys, &time).unwrap();
    let coarse = nlmc_flow::sim::run_coarse(model, &time).unwrap();
    let pf = fine.final_state();
    let pc = coarse.final_state();
    nlmc_flow::sim::relative_error(
        &pf[..sys.n_m],
        &pc[..fix.grid.n_cells()],
        &fix.grid,
        &fix.mesh.cell_area,
    )
    .unwrap()
}

pub fn matrix_norm_max(m: &nlmc_flow::linalg::SparseMatrix) -> f64 {
    m.iter().map(|(_, _, v)| v.abs()).fold(0.0, f64::max)
}

/// Largest relative symmetry defect |a_ij - a_ji| / ||A||_max.
pub fn symmetry_defect(m: &nlmc_flow::linalg::SparseMatrix) -> f64 {
    let scale = matrix_norm_max(m).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for (r, c, v) in m.iter() {
        worst = worst.max((v - m.get(c, r)).abs());
    }
    worst / scale
}
