//! Compressed sparse row matrices and the products the upscaling needs.

use crate::{Error, Result};

/// Immutable CSR matrix with sorted, duplicate-free column indices per row.
///
/// The `symmetric` flag is a structural promise: it is only set by
/// constructors that guarantee ‖A − Aᵀ‖ = 0 exactly.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
    pub symmetric: bool,
}

/// Triplet accumulator used during assembly; duplicates sum on `build`.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> TripletBuilder {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Adds the four entries of a symmetric two-point coupling with
    /// transmissibility `t`: +t on both diagonals, −t off-diagonal.
    pub fn push_pair(&mut self, i: usize, j: usize, t: f64) {
        self.push(i, i, t);
        self.push(j, j, t);
        self.push(i, j, -t);
        self.push(j, i, -t);
    }

    /// Finalizes into CSR. Duplicate entries are summed in insertion order,
    /// so assembly is deterministic. `symmetric` asserts that entries were
    /// pushed in exactly transpose-symmetric pairs.
    pub fn build(mut self, symmetric: bool) -> SparseMatrix {
        // Stable sort keeps duplicate summation in insertion order.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut data: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            indptr[r + 1] += indptr[r];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
            symmetric,
        }
    }
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> SparseMatrix {
        SparseMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
            symmetric: nrows == ncols,
        }
    }

    pub fn identity(n: usize) -> SparseMatrix {
        SparseMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn from_diag(d: &[f64]) -> SparseMatrix {
        SparseMatrix {
            nrows: d.len(),
            ncols: d.len(),
            indptr: (0..=d.len()).collect(),
            indices: (0..d.len()).collect(),
            data: d.to_vec(),
            symmetric: true,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Row `r` as (column indices, values).
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[s..e], &self.data[s..e])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Iterator over all stored entries as (row, col, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        let mut next = counts.clone();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let k = next[c];
                indices[k] = r;
                data[k] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr: counts,
            indices,
            data,
            symmetric: self.symmetric,
        }
    }

    /// Sparse matrix product `self · other` (Gustavson's algorithm; output
    /// rows sorted by column).
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::Solver(format!(
                "dimension mismatch in matmul: {}x{} · {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut active: Vec<usize> = Vec::new();
        for r in 0..self.nrows {
            active.clear();
            let (cols, vals) = self.row(r);
            for (&k, &v) in cols.iter().zip(vals) {
                let (kcols, kvals) = other.row(k);
                for (&c, &w) in kcols.iter().zip(kvals) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        active.push(c);
                    }
                    acc[c] += v * w;
                }
            }
            active.sort_unstable();
            for &c in &active {
                indices.push(c);
                data.push(acc[c]);
            }
            indptr[r + 1] = indices.len();
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            data,
            symmetric: false,
        })
    }

    /// Exact symmetrization (self + selfᵀ)/2. Entry (i,j) becomes
    /// 0.5·a_ij + 0.5·a_ji and entry (j,i) becomes 0.5·a_ji + 0.5·a_ij;
    /// floating-point addition is commutative, so the two are bit-identical
    /// and the result satisfies ‖M − Mᵀ‖_max = 0 exactly.
    pub fn symmetrized(&self) -> SparseMatrix {
        let t = self.transpose();
        let mut b = TripletBuilder::new(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            b.push(r, c, 0.5 * v);
        }
        for (r, c, v) in t.iter() {
            b.push(r, c, 0.5 * v);
        }
        b.build(true)
    }

    /// Maximum absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Row sums (A·1).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| {
                let (_, vals) = self.row(r);
                vals.iter().sum()
            })
            .collect()
    }

    /// Maximum absolute asymmetry ‖A − Aᵀ‖_max.
    pub fn max_asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst = 0.0f64;
        for (r, c, v) in self.iter() {
            worst = worst.max((v - t.get(r, c)).abs());
        }
        for (r, c, v) in t.iter() {
            worst = worst.max((v - self.get(r, c)).abs());
        }
        worst
    }

    /// Entrywise sum `self + alpha·other`. The result is flagged symmetric
    /// only when both operands are.
    pub fn add_scaled(&self, other: &SparseMatrix, alpha: f64) -> Result<SparseMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::Solver(format!(
                "matrix sum shape mismatch: {}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut b = TripletBuilder::new(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            b.push(r, c, v);
        }
        for (r, c, v) in other.iter() {
            b.push(r, c, alpha * v);
        }
        Ok(b.build(self.symmetric && other.symmetric))
    }

    /// Returns a copy with `delta[i]` added to diagonal entry (i, i).
    pub fn with_added_diag(&self, delta: &[f64]) -> SparseMatrix {
        debug_assert_eq!(delta.len(), self.nrows.min(self.ncols));
        let mut b = TripletBuilder::new(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            b.push(r, c, v);
        }
        for (i, &d) in delta.iter().enumerate() {
            b.push(i, i, d);
        }
        b.build(self.symmetric)
    }

    /// Dense copy, for small-scale test oracles.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.iter() {
            d[r][c] = v;
        }
        d
    }
}

/// The Galerkin triple product R·A·Rᵀ. When `a` is flagged symmetric the
/// result is exactly symmetrized and flagged accordingly.
pub fn triple_product(r: &SparseMatrix, a: &SparseMatrix) -> Result<SparseMatrix> {
    if r.ncols() != a.nrows() || a.nrows() != a.ncols() {
        return Err(Error::Solver(format!(
            "dimension mismatch in triple product: R is {}x{}, A is {}x{}",
            r.nrows(),
            r.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    let ra = r.matmul(a)?;
    let rart = ra.matmul(&r.transpose())?;
    if a.symmetric {
        Ok(rart.symmetrized())
    } else {
        Ok(rart)
    }
}
