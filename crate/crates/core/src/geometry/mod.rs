//! Geometric foundations: fine triangular meshes, fracture sets, segment
//! clipping, coarse rectangular grids and oversampled patches.

mod clip;
mod coarse;
mod fracture;
mod generate;
mod mesh;

pub use clip::{clip_segment_to_cells, SubSegment};
pub use generate::{generate_fractures_dfm, generate_fractures_efm, GeneratorParams};
pub use coarse::{
    build_coarse_grid, oversample, CoarseGrid, FracDof, FractureDofs, Fragment, Oversample,
};
pub use fracture::{label_networks, label_networks_with_hints, FractureGeometry, FractureMode, Segment};
pub(crate) use fracture::segment_contact;
pub use mesh::{
    generate_structured_mesh, read_celldata, read_mesh, write_mesh, CellLocator, Facet, FineMesh,
    FractureSpec, Rect,
};

/// Relative tolerance (scaled by the domain diameter) used for point
/// coincidence and adjacency decisions throughout the geometry code.
pub(crate) const GEOM_REL_TOL: f64 = 1e-9;

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}
