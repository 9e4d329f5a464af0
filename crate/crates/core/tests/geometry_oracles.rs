//! Brute-force oracles for the geometry layer: clipping conservation,
//! fragment conservation and network labeling, each over 100 random seeds.

mod common;

use common::unit;
use nlmc_flow::geometry::{
    build_coarse_grid, clip_segment_to_cells, generate_fractures_dfm, generate_fractures_efm,
    generate_structured_mesh, label_networks, FineMesh, FractureDofs, FractureGeometry,
    FractureMode, GeneratorParams, Segment,
};

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Distance from point `p` to segment `ab`.
fn point_seg_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

fn orient(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Minimum distance between two segments; zero when they properly cross.
fn seg_seg_dist(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return 0.0;
    }
    point_seg_dist(a, c, d)
        .min(point_seg_dist(b, c, d))
        .min(point_seg_dist(c, a, b))
        .min(point_seg_dist(d, a, b))
}

/// Point-in-triangle with a slack proportional to the cell size.
fn in_cell(mesh: &FineMesh, cell: usize, p: [f64; 2], tol: f64) -> bool {
    let [i, j, k] = mesh.cells[cell];
    let (a, b, c) = (mesh.vertices[i], mesh.vertices[j], mesh.vertices[k]);
    orient(a, b, p) >= -tol && orient(b, c, p) >= -tol && orient(c, a, p) >= -tol
}

#[test]
fn clipping_conserves_length_and_order() {
    let domain = unit();
    let mesh = generate_structured_mesh(20, 20, domain).unwrap();
    let locator = mesh.locator();
    for seed in 0..100 {
        let params = GeneratorParams {
            n_fractures: 8,
            min_length: 0.1,
            max_length: 0.5,
            seed,
        };
        for spec in generate_fractures_efm(&domain, &params).unwrap() {
            let pieces = clip_segment_to_cells(spec.a, spec.b, &mesh, &locator).unwrap();
            assert!(!pieces.is_empty(), "seed {seed}: segment clipped to nothing");
            let len = dist(spec.a, spec.b);
            let total: f64 = pieces.iter().map(|p| p.length).sum();
            assert!(
                (total - len).abs() <= 1e-12 * len,
                "seed {seed}: clipped length {total} vs segment length {len}"
            );
            // Pieces chain from a to b without gaps, in parameter order.
            assert!(dist(pieces[0].a, spec.a) <= 1e-12);
            assert!(dist(pieces.last().unwrap().b, spec.b) <= 1e-12);
            for w in pieces.windows(2) {
                assert!(
                    dist(w[0].b, w[1].a) <= 1e-12,
                    "seed {seed}: gap between consecutive pieces"
                );
            }
            for p in &pieces {
                let mid = [0.5 * (p.a[0] + p.b[0]), 0.5 * (p.a[1] + p.b[1])];
                assert!(
                    in_cell(&mesh, p.cell, mid, 1e-12),
                    "seed {seed}: piece midpoint {mid:?} outside claimed cell {}",
                    p.cell
                );
            }
        }
    }
}

fn check_fragments(fix_mesh: &FineMesh, fdofs: &FractureDofs, seed: u64) {
    let grid = build_coarse_grid(fix_mesh, fdofs, 5, 5).unwrap();
    // Per network, fragment measures sum to the network's total DOF length.
    for net in 0..fdofs.n_networks {
        let frag_total: f64 = grid
            .fragments
            .iter()
            .filter(|f| f.network == net)
            .map(|f| f.measure)
            .sum();
        let dof_total: f64 = fdofs
            .dofs
            .iter()
            .filter(|d| d.network == net)
            .map(|d| d.length)
            .sum();
        assert!(
            (frag_total - dof_total).abs() <= 1e-12 * dof_total,
            "seed {seed}: network {net} fragment measure {frag_total} vs DOF total {dof_total}"
        );
    }
    // Every fragment owns at least one DOF of its own network, and every DOF
    // belongs to exactly one fragment.
    let mut owned = vec![0usize; fdofs.dofs.len()];
    for frag in &grid.fragments {
        assert!(!frag.dofs.is_empty(), "seed {seed}: DOF-less fragment");
        for &l in &frag.dofs {
            assert_eq!(fdofs.dofs[l].network, frag.network, "seed {seed}");
            owned[l] += 1;
        }
    }
    assert!(
        owned.iter().all(|&c| c == 1),
        "seed {seed}: a fracture DOF is owned by {} fragments",
        owned.iter().max().unwrap()
    );
}

#[test]
fn fragments_conserve_networks_both_modes() {
    let domain = unit();
    let mesh = generate_structured_mesh(20, 20, domain).unwrap();
    for seed in 0..50 {
        let params = GeneratorParams {
            n_fractures: 6,
            min_length: 0.1,
            max_length: 0.4,
            seed,
        };
        let segs: Vec<Segment> = generate_fractures_efm(&domain, &params)
            .unwrap()
            .into_iter()
            .map(|s| Segment::new(s.a, s.b))
            .collect();
        let fractures = label_networks(segs, FractureMode::Efm).unwrap();
        let fdofs = FractureDofs::build(&mesh, &fractures).unwrap();
        check_fragments(&mesh, &fdofs, seed);
    }
    for seed in 0..50 {
        let params = GeneratorParams {
            n_fractures: 5,
            min_length: 0.1,
            max_length: 0.4,
            seed,
        };
        let segs: Vec<Segment> = generate_fractures_dfm(&domain, 20, 20, &params)
            .unwrap()
            .into_iter()
            .map(|s| Segment::new(s.a, s.b))
            .collect();
        let fractures = label_networks(segs, FractureMode::Dfm).unwrap();
        let fdofs = FractureDofs::build(&mesh, &fractures).unwrap();
        check_fragments(&mesh, &fdofs, seed);
    }
}

/// Independent union-find labeling from pairwise segment distances.
fn brute_force_labels(segs: &[Segment], tol: f64) -> Vec<usize> {
    let n = segs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            if seg_seg_dist(segs[i].a, segs[i].b, segs[j].a, segs[j].b) <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

/// Two labelings agree when they induce the same partition.
fn same_partition(a: &[usize], b: &[usize]) -> bool {
    assert_eq!(a.len(), b.len());
    let mut map_ab = std::collections::HashMap::new();
    let mut map_ba = std::collections::HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        if *map_ab.entry(x).or_insert(y) != y || *map_ba.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

fn check_labeling(fractures: &FractureGeometry, seed: u64) {
    let diameter = fractures
        .segments
        .iter()
        .flat_map(|s| [s.a, s.b])
        .fold([f64::MAX, f64::MAX, f64::MIN, f64::MIN], |acc, p| {
            [
                acc[0].min(p[0]),
                acc[1].min(p[1]),
                acc[2].max(p[0]),
                acc[3].max(p[1]),
            ]
        });
    let diag = (diameter[2] - diameter[0]).hypot(diameter[3] - diameter[1]);
    let brute = brute_force_labels(&fractures.segments, 1e-9 * diag);
    assert!(
        same_partition(&fractures.network_id, &brute),
        "seed {seed}: labeling disagrees with brute force\n got {:?}\n want {brute:?}",
        fractures.network_id
    );
    let distinct: std::collections::HashSet<_> = fractures.network_id.iter().collect();
    assert_eq!(distinct.len(), fractures.n_networks, "seed {seed}");
    assert!(
        fractures.network_id.iter().all(|&l| l < fractures.n_networks),
        "seed {seed}: label out of range"
    );
}

#[test]
fn network_labeling_matches_brute_force() {
    let domain = unit();
    for seed in 0..50 {
        let params = GeneratorParams {
            n_fractures: 12,
            min_length: 0.1,
            max_length: 0.5,
            seed,
        };
        let segs: Vec<Segment> = generate_fractures_efm(&domain, &params)
            .unwrap()
            .into_iter()
            .map(|s| Segment::new(s.a, s.b))
            .collect();
        let fractures = label_networks(segs, FractureMode::Efm).unwrap();
        check_labeling(&fractures, seed);
    }
    for seed in 0..50 {
        let params = GeneratorParams {
            n_fractures: 6,
            min_length: 0.1,
            max_length: 0.4,
            seed,
        };
        let segs: Vec<Segment> = generate_fractures_dfm(&domain, 20, 20, &params)
            .unwrap()
            .into_iter()
            .map(|s| Segment::new(s.a, s.b))
            .collect();
        let fractures = label_networks(segs, FractureMode::Dfm).unwrap();
        check_labeling(&fractures, seed);
    }
}

#[test]
fn dfm_generator_emits_facet_chains() {
    let domain = unit();
    let mesh = generate_structured_mesh(24, 24, domain).unwrap();
    // Facet midpoints, for conformity lookup.
    let mids: Vec<[f64; 2]> = mesh.facets.iter().map(|f| f.midpoint).collect();
    for seed in 0..100 {
        let params = GeneratorParams {
            n_fractures: 6,
            min_length: 0.1,
            max_length: 0.4,
            seed,
        };
        let specs = generate_fractures_dfm(&domain, 24, 24, &params).unwrap();
        let mut seen = std::collections::HashSet::new();
        for s in &specs {
            let mid = [0.5 * (s.a[0] + s.b[0]), 0.5 * (s.a[1] + s.b[1])];
            let fi = mids
                .iter()
                .position(|m| dist(*m, mid) <= 1e-12)
                .unwrap_or_else(|| panic!("seed {seed}: segment {mid:?} matches no facet"));
            assert!(
                (dist(s.a, s.b) - mesh.facets[fi].length).abs() <= 1e-12,
                "seed {seed}: segment length differs from facet"
            );
            assert!(
                mesh.facets[fi].is_interior(),
                "seed {seed}: generator used a boundary facet"
            );
            assert!(seen.insert(fi), "seed {seed}: duplicate facet in output");
        }
    }
}
