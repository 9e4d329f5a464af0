//! Random fracture-set generation.
//!
//! EFM fractures are free segments: uniform midpoint, uniform orientation,
//! uniform length in a given range, rejected and redrawn when an endpoint
//! would leave the domain. DFM fractures must conform to the structured
//! mesh, so the generator emits chains of facet-aligned unit segments
//! (horizontal, vertical or cell-diagonal lattice lines), one segment per
//! facet, sharing a network hint per chain. All draws come from a seeded
//! ChaCha stream, so a seed pins the geometry exactly.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mesh::{FractureSpec, Rect};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GeneratorParams {
    pub n_fractures: usize,
    pub min_length: f64,
    pub max_length: f64,
    pub seed: u64,
}

impl GeneratorParams {
    fn validate(&self, domain: &Rect) -> Result<()> {
        if !(self.min_length > 0.0 && self.max_length >= self.min_length) {
            return Err(Error::Config(format!(
                "fracture length range [{}, {}] is invalid",
                self.min_length, self.max_length
            )));
        }
        if self.max_length >= domain.width().min(domain.height()) {
            return Err(Error::Config(format!(
                "max fracture length {} does not fit in the domain",
                self.max_length
            )));
        }
        Ok(())
    }
}

/// Free (non-conforming) fracture segments for the embedded model.
pub fn generate_fractures_efm(domain: &Rect, p: &GeneratorParams) -> Result<Vec<FractureSpec>> {
    p.validate(domain)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let margin = 1e-6 * domain.diameter();
    let mut out = Vec::with_capacity(p.n_fractures);
    let mut attempts = 0usize;
    while out.len() < p.n_fractures {
        attempts += 1;
        if attempts > 1000 * (p.n_fractures + 1) {
            return Err(Error::Config(
                "fracture generation failed: too many rejected draws (domain too small?)".into(),
            ));
        }
        let mx = rng.gen_range(domain.x0..domain.x1);
        let my = rng.gen_range(domain.y0..domain.y1);
        let theta = rng.gen_range(0.0..std::f64::consts::PI);
        let len = rng.gen_range(p.min_length..=p.max_length);
        let (dx, dy) = (theta.cos() * len / 2.0, theta.sin() * len / 2.0);
        let a = [mx - dx, my - dy];
        let b = [mx + dx, my + dy];
        let inside = |q: [f64; 2]| {
            q[0] > domain.x0 + margin
                && q[0] < domain.x1 - margin
                && q[1] > domain.y0 + margin
                && q[1] < domain.y1 - margin
        };
        if inside(a) && inside(b) {
            out.push(FractureSpec {
                a,
                b,
                network_hint: None,
            });
        }
    }
    Ok(out)
}

/// Orientation of one conforming chain on the structured-mesh lattice.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum LatticeDir {
    Horizontal,
    Vertical,
    Diagonal,
}

/// Conforming fracture chains for the discrete model on an `nx`×`ny`
/// structured mesh: every emitted segment coincides with one interior mesh
/// facet, and the segments of a chain share a network hint. Chains never
/// reuse a facet, so each facet carries at most one fracture DOF.
pub fn generate_fractures_dfm(
    domain: &Rect,
    nx: usize,
    ny: usize,
    p: &GeneratorParams,
) -> Result<Vec<FractureSpec>> {
    p.validate(domain)?;
    if nx < 2 || ny < 2 {
        return Err(Error::Config(format!(
            "conforming fracture generation needs a mesh of at least 2x2 cells, got {nx}x{ny}"
        )));
    }
    let (hx, hy) = (domain.width() / nx as f64, domain.height() / ny as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut used: HashSet<(LatticeDir, usize, usize)> = HashSet::new();
    let mut out = Vec::new();
    let mut attempts = 0usize;
    let vx = |i: usize| {
        if i == nx {
            domain.x1
        } else {
            domain.x0 + i as f64 * hx
        }
    };
    let vy = |j: usize| {
        if j == ny {
            domain.y1
        } else {
            domain.y0 + j as f64 * hy
        }
    };
    for chain in 0..p.n_fractures {
        loop {
            attempts += 1;
            if attempts > 1000 * (p.n_fractures + 1) {
                return Err(Error::Config(
                    "conforming fracture generation failed: lattice too crowded for the requested count"
                        .into(),
                ));
            }
            let dir = match rng.gen_range(0..3) {
                0 => LatticeDir::Horizontal,
                1 => LatticeDir::Vertical,
                _ => LatticeDir::Diagonal,
            };
            let len = rng.gen_range(p.min_length..=p.max_length);
            let step = match dir {
                LatticeDir::Horizontal => hx,
                LatticeDir::Vertical => hy,
                LatticeDir::Diagonal => hx.hypot(hy),
            };
            let n_fac = ((len / step).round() as usize).max(1);
            // Draw a start so the whole chain stays on interior facets.
            let facets: Option<Vec<(LatticeDir, usize, usize)>> = match dir {
                LatticeDir::Horizontal => (n_fac <= nx).then(|| {
                    let j = rng.gen_range(1..ny);
                    let i0 = rng.gen_range(0..=nx - n_fac);
                    (0..n_fac).map(|t| (dir, i0 + t, j)).collect()
                }),
                LatticeDir::Vertical => (n_fac <= ny).then(|| {
                    let i = rng.gen_range(1..nx);
                    let j0 = rng.gen_range(0..=ny - n_fac);
                    (0..n_fac).map(|t| (dir, i, j0 + t)).collect()
                }),
                LatticeDir::Diagonal => (n_fac <= nx.min(ny)).then(|| {
                    let i0 = rng.gen_range(0..=nx - n_fac);
                    let j0 = rng.gen_range(0..=ny - n_fac);
                    (0..n_fac).map(|t| (dir, i0 + t, j0 + t)).collect()
                }),
            };
            let Some(facets) = facets else { continue };
            if facets.iter().any(|f| used.contains(f)) {
                continue;
            }
            for &(d, i, j) in &facets {
                used.insert((d, i, j));
                let (a, b) = match d {
                    LatticeDir::Horizontal => ([vx(i), vy(j)], [vx(i + 1), vy(j)]),
                    LatticeDir::Vertical => ([vx(i), vy(j)], [vx(i), vy(j + 1)]),
                    LatticeDir::Diagonal => ([vx(i), vy(j)], [vx(i + 1), vy(j + 1)]),
                };
                out.push(FractureSpec {
                    a,
                    b,
                    network_hint: Some(chain),
                });
            }
            break;
        }
    }
    Ok(out)
}
