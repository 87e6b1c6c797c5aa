//! Dense symmetric linear algebra: spectral decompositions, symmetric-definite
//! pencils, kernels, restrictions and complements.
//!
//! Decompositions are backed by nalgebra; this module fixes ordering, sign
//! conventions and rank decisions on top of it.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{PencilError, Result};

/// Relative tolerance for every rank decision (kernels, zero eigenvalues).
pub const KERNEL_REL_TOL: f64 = 1e-10;
/// Relative tolerance for the symmetry check of input matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues closer than this (relative) are treated as tied when ordering.
const TIE_REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    /// Validates symmetry and stores the exact symmetric part.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(PencilError::DimensionMismatch(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(PencilError::InvalidInput("matrix has non-finite entries".into()));
        }
        let tol = SYMMETRY_TOL * m.amax().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = (m[(i, j)] - m[(j, i)]).abs();
                if gap > tol {
                    return Err(PencilError::NotSymmetric { row: i, col: j, gap });
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(PencilError::DimensionMismatch(
                "rows must all have length equal to the number of rows".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Self { m: DMatrix::identity(n, n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: DMatrix::zeros(n, n) }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self { m: DMatrix::from_diagonal(&DVector::from_column_slice(d)) }
    }

    /// Symmetric part of a square matrix that is symmetric up to rounding.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let s = (&m + m.transpose()) * 0.5;
        Self { m: s }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.m.amax()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| self.m.row(i).iter().copied().collect()).collect()
    }

    /// The quadratic form vᵀ M v.
    pub fn quad(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.m * v))
    }

    /// `self - s * other`.
    pub fn sub_scaled(&self, other: &SymMatrix, s: f64) -> SymMatrix {
        Self { m: &self.m - &other.m * s }
    }

    pub fn scaled(&self, s: f64) -> SymMatrix {
        Self { m: &self.m * s }
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|&x| x == 0.0)
    }
}

/// Eigenvalues in ascending order with matching eigenvector columns,
/// orthonormal in the metric the decomposition was computed for.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SpectralDecomp {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.vectors.column(k).into_owned()
    }
}

/// Column basis of a subspace of R^n. The metric in which the columns are
/// orthonormal is documented by whoever builds it.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    vectors: DMatrix<f64>,
}

impl Basis {
    pub fn new(vectors: DMatrix<f64>) -> Self {
        Self { vectors }
    }

    pub fn empty(n: usize) -> Self {
        Self { vectors: DMatrix::zeros(n, 0) }
    }

    pub fn identity(n: usize) -> Self {
        Self { vectors: DMatrix::identity(n, n) }
    }

    /// Number of basis vectors.
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn column(&self, k: usize) -> DVector<f64> {
        self.vectors.column(k).into_owned()
    }

    /// max |Vᵀ·metric·V − I|.
    pub fn gram_residual(&self, metric: &SymMatrix) -> f64 {
        let g = self.vectors.transpose() * metric.matrix() * &self.vectors;
        let k = self.dim();
        (g - DMatrix::<f64>::identity(k, k)).amax()
    }
}

/// Full spectral decomposition in the Euclidean metric.
pub fn sym_eigen(m: &SymMatrix) -> SpectralDecomp {
    if m.dim() == 0 {
        return SpectralDecomp { values: Vec::new(), vectors: DMatrix::zeros(0, 0) };
    }
    let eig = SymmetricEigen::new(m.matrix().clone());
    canonical(eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Solves M v = μ A v for symmetric M and positive definite A. The vectors
/// are A-orthonormal.
pub fn gen_sym_def_eigen(m: &SymMatrix, a: &SymMatrix) -> Result<SpectralDecomp> {
    check_same_dim(m, a)?;
    if m.dim() == 0 {
        return Ok(SpectralDecomp { values: Vec::new(), vectors: DMatrix::zeros(0, 0) });
    }
    let l = cholesky_factor(a, "metric matrix")?;
    let n = m.dim();
    // Standard form L⁻¹ M L⁻ᵀ.
    let x = l
        .solve_lower_triangular(m.matrix())
        .ok_or_else(|| PencilError::Numerical("triangular solve failed".into()))?;
    let y = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| PencilError::Numerical("triangular solve failed".into()))?;
    let std = SymMatrix::symmetrized(y);
    let eig = SymmetricEigen::new(std.into_matrix());
    let lt = l.transpose();
    let v = lt
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or_else(|| PencilError::Numerical("triangular solve failed".into()))?;
    debug_assert_eq!(v.nrows(), n);
    Ok(canonical(eig.eigenvalues.iter().copied().collect(), v))
}

/// Euclidean-orthonormal basis of the numerical kernel of M.
pub fn kernel_basis(m: &SymMatrix, rel_tol: f64) -> Basis {
    let dec = sym_eigen(m);
    let max = dec.values.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let cut = if max == 0.0 { rel_tol } else { rel_tol * max };
    let keep: Vec<usize> = (0..dec.len()).filter(|&k| dec.values[k].abs() <= cut).collect();
    Basis::new(dec.vectors.select_columns(keep.iter()))
}

/// Vᵀ M V.
pub fn restrict_form(m: &SymMatrix, v: &Basis) -> Result<SymMatrix> {
    if v.ambient_dim() != m.dim() {
        return Err(PencilError::DimensionMismatch(format!(
            "basis lives in R^{} but the form acts on R^{}",
            v.ambient_dim(),
            m.dim()
        )));
    }
    let r = v.matrix().transpose() * m.matrix() * v.matrix();
    Ok(SymMatrix::symmetrized(r))
}

/// Restriction of M to the column span of a raw matrix.
pub(crate) fn restrict_raw(m: &SymMatrix, v: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::symmetrized(v.transpose() * m.matrix() * v)
}

/// Metric-orthonormal basis W of the metric-orthogonal complement of span(V).
pub fn orthonormal_complement(v: &Basis, metric: &SymMatrix) -> Result<Basis> {
    let n = metric.dim();
    if v.ambient_dim() != n {
        return Err(PencilError::DimensionMismatch(format!(
            "basis lives in R^{} but the metric acts on R^{}",
            v.ambient_dim(),
            n
        )));
    }
    cholesky_factor(metric, "metric matrix")?;
    if v.is_empty() {
        return Ok(Basis::new(orthonormalize(&DMatrix::identity(n, n), metric)?));
    }
    let constraints = (metric.matrix() * v.matrix()).transpose();
    let w = null_space(&constraints, KERNEL_REL_TOL);
    if w.ncols() != n - v.dim() {
        return Err(PencilError::InvalidInput(format!(
            "basis columns are linearly dependent (complement has dimension {} instead of {})",
            w.ncols(),
            n - v.dim()
        )));
    }
    Ok(Basis::new(orthonormalize(&w, metric)?))
}

/// Euclidean-orthonormal basis of {x : M x = 0} for a rectangular M, with
/// singular values below `rel_tol · σ_max` counted as zero.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 || m.amax() == 0.0 {
        return DMatrix::identity(n, n);
    }
    // Pad to at least square so that the SVD returns a full right basis.
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max();
    let cut = rel_tol * smax;
    let keep: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] <= cut).collect();
    let mut out = DMatrix::zeros(n, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        out.set_column(c, &vt.row(k).transpose());
    }
    for c in 0..out.ncols() {
        sign_normalize(&mut out, c);
    }
    out
}

/// Numerical rank of a rectangular matrix.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    m.ncols() - null_space(m, rel_tol).ncols()
}

/// Re-orthonormalizes the columns of V in the given metric (V L⁻ᵀ with
/// VᵀGV = LLᵀ).
pub fn orthonormalize(v: &DMatrix<f64>, metric: &SymMatrix) -> Result<DMatrix<f64>> {
    if v.ncols() == 0 {
        return Ok(v.clone());
    }
    let g = restrict_raw(metric, v);
    let l = cholesky_factor(&g, "restricted metric")?;
    let w = l
        .solve_lower_triangular(&v.transpose())
        .ok_or_else(|| PencilError::Numerical("triangular solve failed".into()))?;
    Ok(w.transpose())
}

/// Lower Cholesky factor, or an error naming the smallest eigenvalue.
pub fn cholesky_factor(a: &SymMatrix, what: &str) -> Result<DMatrix<f64>> {
    match Cholesky::new(a.matrix().clone()) {
        Some(c) => Ok(c.l()),
        None => {
            let min_eig = sym_eigen(a).values.first().copied().unwrap_or(f64::NAN);
            Err(PencilError::NotPositiveDefinite { what: what.to_string(), min_eig })
        }
    }
}

/// Largest |μ| over the eigenvalues of (M, A).
pub fn spectral_radius(m: &SymMatrix, a: &SymMatrix) -> Result<f64> {
    let dec = gen_sym_def_eigen(m, a)?;
    Ok(dec.values.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())))
}

fn check_same_dim(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(PencilError::DimensionMismatch(format!(
            "{}x{} versus {}x{}",
            a.dim(),
            a.dim(),
            b.dim(),
            b.dim()
        )));
    }
    Ok(())
}

fn sign_normalize(v: &mut DMatrix<f64>, col: usize) {
    let c = v.column(col);
    let max = c.amax();
    if max == 0.0 {
        return;
    }
    let first = c.iter().copied().find(|x| x.abs() > 1e-10 * max).unwrap_or(0.0);
    if first < 0.0 {
        v.column_mut(col).neg_mut();
    }
}

fn lexicographic(a: &DMatrix<f64>, i: usize, j: usize) -> std::cmp::Ordering {
    for r in 0..a.nrows() {
        let o = a[(r, i)].total_cmp(&a[(r, j)]);
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Sorts ascending, fixes signs, breaks ties lexicographically.
fn canonical(values: Vec<f64>, mut vectors: DMatrix<f64>) -> SpectralDecomp {
    for c in 0..vectors.ncols() {
        sign_normalize(&mut vectors, c);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let scale = values.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
    let tie = TIE_REL_TOL * scale;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] - values[order[end - 1]] <= tie {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by(|&i, &j| lexicographic(&vectors, i, j));
        }
        start = end;
    }
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let sorted_vectors = vectors.select_columns(order.iter());
    SpectralDecomp { values: sorted_values, vectors: sorted_vectors }
}
