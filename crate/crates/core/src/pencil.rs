//! The finite-dimensional triple (H, a, b^t): A v = λ (B − tC) v with the
//! ambient inner product given by a Gram matrix G.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PencilError, Result};
use crate::linalg::{
    gen_sym_def_eigen, kernel_basis, null_space, orthonormal_complement, orthonormalize,
    restrict_form, restrict_raw, spectral_radius, sym_eigen, Basis, SymMatrix, KERNEL_REL_TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// A is positive definite on the whole space.
    Fixed,
    /// A has a finite-dimensional kernel; the problem lives on H^t.
    Moving,
}

#[derive(Clone, Debug)]
pub struct Pencil {
    a: SymMatrix,
    b: SymMatrix,
    c: SymMatrix,
    g: SymMatrix,
    ker_a: Basis,
    mode: Mode,
    threshold: Option<f64>,
    /// Size of B and C measured against A (fixed) or G (moving).
    form_scale: f64,
}

/// One finite eigenpair. `vector` has A(u) = 1, `g_vector` has ‖u‖_G = 1.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub lambda: f64,
    pub vector: DVector<f64>,
    pub g_vector: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub t: Option<f64>,
    /// λ_1 ≤ λ_2 ≤ …
    pub positives: Vec<Eigenpair>,
    /// λ_{−1} ≥ λ_{−2} ≥ …, closest to zero first.
    pub negatives: Vec<Eigenpair>,
    pub zero_multiplicity: usize,
    pub infinity_multiplicity: usize,
    /// A-orthonormal basis of Ker(B^t) on the active space.
    pub infinity_basis: DMatrix<f64>,
    pub active_dim: usize,
    /// Moving mode with |t| ≤ T: computed but not covered by the theory's indexing.
    pub pre_threshold: bool,
}

impl Spectrum {
    pub fn positive_values(&self) -> Vec<f64> {
        self.positives.iter().map(|p| p.lambda).collect()
    }

    pub fn negative_values(&self) -> Vec<f64> {
        self.negatives.iter().map(|p| p.lambda).collect()
    }

    pub fn finite_count(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }
}

/// The restriction of a moving pencil to H^t.
#[derive(Clone, Debug)]
pub struct Deflation {
    pub t: f64,
    /// Fixed-mode restriction; its C may be definite, so it skips validation.
    pub pencil: Pencil,
    /// G-orthonormal basis of H^t.
    pub basis: Basis,
}

/// On-disk pencil description. Matrices are row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PencilSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<Vec<f64>>>,
    pub mode: Mode,
}

impl PencilSpec {
    pub fn into_pencil(self) -> Result<Pencil> {
        let g = self.g.as_deref().map(SymMatrix::from_rows).transpose()?;
        Pencil::new(
            SymMatrix::from_rows(&self.a)?,
            SymMatrix::from_rows(&self.b)?,
            SymMatrix::from_rows(&self.c)?,
            g,
            self.mode,
        )
    }
}

impl Pencil {
    /// Builds and validates a pencil. `g` defaults to the identity.
    pub fn new(a: SymMatrix, b: SymMatrix, c: SymMatrix, g: Option<SymMatrix>, mode: Mode) -> Result<Self> {
        let n = a.dim();
        let g = g.unwrap_or_else(|| SymMatrix::identity(n));
        check_dims(&[&a, &b, &c, &g])?;
        let ker_a = match mode {
            Mode::Fixed => Basis::empty(n),
            Mode::Moving => kernel_basis(&a, KERNEL_REL_TOL),
        };
        Self::validated(a, b, c, g, ker_a, mode)
    }

    /// Moving pencil whose kernel generators are supplied by the caller
    /// (for instance from the continuum description of Ker(a)). They must
    /// span the numerical kernel of A.
    pub fn with_kernel(a: SymMatrix, b: SymMatrix, c: SymMatrix, g: SymMatrix, ker: DMatrix<f64>) -> Result<Self> {
        check_dims(&[&a, &b, &c, &g])?;
        if ker.nrows() != a.dim() {
            return Err(PencilError::DimensionMismatch("kernel generators have wrong length".into()));
        }
        let numerical = kernel_basis(&a, KERNEL_REL_TOL);
        if numerical.dim() != ker.ncols() {
            return Err(PencilError::InvalidInput(format!(
                "supplied kernel has dimension {} but Ker(A) has dimension {}",
                ker.ncols(),
                numerical.dim()
            )));
        }
        let scale = a.max_abs_entry().max(1e-300);
        for j in 0..ker.ncols() {
            let w = ker.column(j);
            let r = (a.matrix() * w).amax();
            if r > 1e-8 * scale * w.amax() {
                return Err(PencilError::InvalidInput(format!(
                    "kernel generator {j} is not annihilated by A (residual {r:e})"
                )));
            }
        }
        let ker_a = Basis::new(orthonormalize(&ker, &g)?);
        Self::validated(a, b, c, g, ker_a, Mode::Moving)
    }

    /// Fixed-mode pencil with C = 0, used for limiting problems that are
    /// assembled directly.
    pub fn limiting_problem(a: SymMatrix, b: SymMatrix, g: Option<SymMatrix>) -> Result<Self> {
        let n = a.dim();
        let g = g.unwrap_or_else(|| SymMatrix::identity(n));
        check_dims(&[&a, &b, &g])?;
        check_coercive(&a, &g)?;
        let form_scale = spectral_radius(&b, &a)?.max(f64::MIN_POSITIVE);
        Ok(Self { a, b, c: SymMatrix::zeros(n), g, ker_a: Basis::empty(n), mode: Mode::Fixed, threshold: None, form_scale })
    }

    fn validated(a: SymMatrix, b: SymMatrix, c: SymMatrix, g: SymMatrix, ker_a: Basis, mode: Mode) -> Result<Self> {
        crate::linalg::cholesky_factor(&g, "Gram matrix G")?;
        if c.is_zero() {
            return Err(PencilError::InvalidInput("C must be nonzero".into()));
        }
        let c_dec = sym_eigen(&c);
        let c_max = c_dec.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if c_dec.values[0] < -KERNEL_REL_TOL * c_max {
            return Err(PencilError::InvalidInput(format!(
                "C is not positive semi-definite (eigenvalue {:e})",
                c_dec.values[0]
            )));
        }
        if kernel_basis(&c, KERNEL_REL_TOL).is_empty() {
            return Err(PencilError::InvalidInput("Ker(C) is trivial".into()));
        }
        let mut threshold = None;
        let form_scale;
        match mode {
            Mode::Fixed => {
                check_coercive(&a, &g)?;
                form_scale = spectral_radius(&b, &a)?.max(spectral_radius(&c, &a)?);
            }
            Mode::Moving => {
                if ker_a.is_empty() {
                    return Err(PencilError::InvalidInput(
                        "moving mode needs a nontrivial Ker(A); use fixed mode".into(),
                    ));
                }
                let ag = gen_sym_def_eigen(&a, &g)?;
                let a_max = ag.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                if ag.values[0] < -KERNEL_REL_TOL * a_max {
                    return Err(PencilError::InvalidInput(format!(
                        "A is not positive semi-definite (eigenvalue {:e})",
                        ag.values[0]
                    )));
                }
                let w = orthonormal_complement(&ker_a, &g)?;
                let aw = restrict_form(&a, &w)?;
                let aw_min = sym_eigen(&aw).values.first().copied().unwrap_or(f64::INFINITY);
                if aw_min <= KERNEL_REL_TOL * a_max {
                    return Err(PencilError::Coercivity(format!(
                        "A is not positive definite off Ker(A) (smallest eigenvalue {aw_min:e})"
                    )));
                }
                let c_scale = spectral_radius(&c, &g)?;
                form_scale = spectral_radius(&b, &g)?.max(c_scale);
                threshold = Some(compute_threshold(&b, &c, &g, &ker_a, c_scale)?);
            }
        }
        Ok(Self { a, b, c, g, ker_a, mode, threshold, form_scale })
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    pub fn b(&self) -> &SymMatrix {
        &self.b
    }

    pub fn c(&self) -> &SymMatrix {
        &self.c
    }

    pub fn g(&self) -> &SymMatrix {
        &self.g
    }

    pub fn ker_a(&self) -> &Basis {
        &self.ker_a
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// B^t = B − tC.
    pub fn b_at(&self, t: f64) -> SymMatrix {
        self.b.sub_scaled(&self.c, t)
    }

    /// The same pencil with B replaced by −B.
    pub fn negated_b(&self) -> Pencil {
        let mut p = self.clone();
        p.b = self.b.scaled(-1.0);
        p
    }

    pub fn to_spec(&self) -> PencilSpec {
        let identity = self.g == SymMatrix::identity(self.dim());
        PencilSpec {
            a: self.a.to_rows(),
            b: self.b.to_rows(),
            c: self.c.to_rows(),
            g: if identity { None } else { Some(self.g.to_rows()) },
            mode: self.mode,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: PencilSpec = serde_json::from_str(s)?;
        spec.into_pencil()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_spec())?)
    }

    /// Spectrum at parameter t. Moving mode requires |t| > T.
    pub fn spectrum_at(&self, t: f64) -> Result<Spectrum> {
        match self.mode {
            Mode::Fixed => self.fixed_spectrum(t),
            Mode::Moving => {
                let threshold = self.threshold_t()?;
                if t.abs() <= threshold {
                    return Err(PencilError::BelowThreshold { t, threshold });
                }
                self.moving_spectrum(t)
            }
        }
    }

    /// Like `spectrum_at`, but in moving mode also computes |t| ≤ T whenever
    /// Ker(A)ᵀ B^t Ker(A) is nonsingular, flagging the result.
    pub fn spectrum_any(&self, t: f64) -> Result<Spectrum> {
        match self.mode {
            Mode::Fixed => self.fixed_spectrum(t),
            Mode::Moving => self.moving_spectrum(t),
        }
    }

    fn fixed_spectrum(&self, t: f64) -> Result<Spectrum> {
        let bt = self.b_at(t);
        let mut s = solve_reciprocal(&self.a, &bt, &self.g, self.zero_tol(), None)?;
        s.t = Some(t);
        Ok(s)
    }

    fn moving_spectrum(&self, t: f64) -> Result<Spectrum> {
        let d = self.deflate_unchecked(t)?;
        let w = d.basis.matrix();
        let mut s = solve_reciprocal(&d.pencil.a, &d.pencil.b, &d.pencil.g, self.zero_tol(), Some(w))?;
        s.t = Some(t);
        s.zero_multiplicity = self.ker_a.dim();
        s.active_dim = self.dim();
        s.pre_threshold = t.abs() <= self.threshold.unwrap_or(0.0);
        Ok(s)
    }

    fn zero_tol(&self) -> f64 {
        KERNEL_REL_TOL * self.form_scale
    }

    /// Spectrum of (A, B) restricted to K = Ker(C).
    pub fn limiting_spectrum(&self) -> Result<Spectrum> {
        let k = kernel_basis(&self.c, KERNEL_REL_TOL);
        let ak = restrict_form(&self.a, &k)?;
        let bk = restrict_form(&self.b, &k)?;
        let gk = restrict_form(&self.g, &k)?;
        if self.mode == Mode::Moving {
            let dec = gen_sym_def_eigen(&ak, &gk)?;
            let max = dec.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if dec.values.first().map_or(false, |&m| m <= KERNEL_REL_TOL * max) {
                return Err(PencilError::KernelIntersection(format!(
                    "A restricted to Ker(C) has eigenvalue {:e}",
                    dec.values[0]
                )));
            }
        }
        solve_reciprocal(&ak, &bk, &gk, self.zero_tol(), Some(k.matrix()))
    }

    /// T = M_|B| / m_C + 1 over the G-unit sphere of Ker(A).
    pub fn threshold_t(&self) -> Result<f64> {
        self.threshold
            .ok_or_else(|| PencilError::NotApplicable("the threshold T is defined in moving mode only".into()))
    }

    /// Restriction to H^t = {u : Ker(A)ᵀ B^t u = 0}; requires |t| > T.
    pub fn deflate_moving(&self, t: f64) -> Result<Deflation> {
        let threshold = self.threshold_t()?;
        if t.abs() <= threshold {
            return Err(PencilError::BelowThreshold { t, threshold });
        }
        self.deflate_unchecked(t)
    }

    fn deflate_unchecked(&self, t: f64) -> Result<Deflation> {
        let n = self.dim();
        let z = self.ker_a.matrix();
        let m = z.ncols();
        let bt = self.b_at(t);
        let constraints = (bt.matrix() * z).transpose();
        let h = null_space(&constraints, KERNEL_REL_TOL);
        if h.ncols() != n - m {
            return Err(PencilError::Numerical(format!(
                "Ker(A)ᵀ B^t Ker(A) is singular at t = {t}; H^t has the wrong dimension"
            )));
        }
        let w = orthonormalize(&h, &self.g)?;
        let mut joined = DMatrix::zeros(n, n);
        joined.view_mut((0, 0), (n, n - m)).copy_from(&w);
        joined.view_mut((0, n - m), (n, m)).copy_from(z);
        if crate::linalg::rank(&joined, KERNEL_REL_TOL) != n {
            return Err(PencilError::Numerical(format!("H^t and Ker(A) do not span the space at t = {t}")));
        }
        let reduced = Pencil {
            a: restrict_raw(&self.a, &w),
            b: restrict_raw(&bt, &w),
            c: restrict_raw(&self.c, &w),
            g: restrict_raw(&self.g, &w),
            ker_a: Basis::empty(n - m),
            mode: Mode::Fixed,
            threshold: None,
            form_scale: self.form_scale,
        };
        Ok(Deflation { t, pencil: reduced, basis: Basis::new(w) })
    }

    /// Fails with a common kernel vector when Ker(B) ∩ Ker(C) ≠ {0}.
    pub fn check_common_kernel(&self) -> Result<()> {
        check_common_kernel(&self.b, &self.c)
    }

    /// The real t with Ker(B − tC) ≠ {0}, repeated by multiplicity, ascending.
    pub fn singular_times(&self) -> Result<Vec<f64>> {
        singular_times(&self.b, &self.c)
    }

    /// G-orthonormal basis of H^∞ = {u : Ker(A)ᵀ B u = Ker(A)ᵀ C u = 0}.
    /// Fixed mode returns the whole space.
    pub fn hinf_basis(&self) -> Result<Basis> {
        match self.mode {
            Mode::Fixed => Ok(Basis::identity(self.dim())),
            Mode::Moving => {
                let h = hinf_subspace(&self.b, &self.c, &self.ker_a);
                Ok(Basis::new(orthonormalize(&h, &self.g)?))
            }
        }
    }

    /// rank(C) in fixed mode; dim H^∞ − dim(K ∩ H^∞) in moving mode.
    pub fn negative_limit_count(&self) -> usize {
        let n = self.dim();
        let rank_c = n - kernel_basis(&self.c, KERNEL_REL_TOL).dim();
        match self.mode {
            Mode::Fixed => rank_c,
            Mode::Moving => {
                let z = self.ker_a.matrix();
                let hinf = hinf_subspace(&self.b, &self.c, &self.ker_a).ncols();
                let zb = z.transpose() * self.b.matrix();
                let mut stacked = DMatrix::zeros(n + zb.nrows(), n);
                stacked.view_mut((0, 0), (n, n)).copy_from(self.c.matrix());
                stacked.view_mut((n, 0), (zb.nrows(), n)).copy_from(&zb);
                let k_cap = null_space(&stacked, KERNEL_REL_TOL).ncols();
                hinf - k_cap
            }
        }
    }
}

/// Fails with a common kernel vector when Ker(B) ∩ Ker(C) ≠ {0}.
pub fn check_common_kernel(b: &SymMatrix, c: &SymMatrix) -> Result<()> {
    let n = b.dim();
    let mut stacked = DMatrix::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(b.matrix());
    stacked.view_mut((n, 0), (n, n)).copy_from(c.matrix());
    let common = null_space(&stacked, KERNEL_REL_TOL);
    if common.ncols() > 0 {
        return Err(PencilError::CommonKernel { vector: common.column(0).iter().copied().collect() });
    }
    Ok(())
}

/// Singular times of an arbitrary symmetric pair with C ⪰ 0: the real t
/// with Ker(B − tC) ≠ {0}, repeated by multiplicity, ascending.
pub fn singular_times(b_form: &SymMatrix, c: &SymMatrix) -> Result<Vec<f64>> {
    check_common_kernel(b_form, c)?;
    let c_dec = sym_eigen(c);
    let c_max = c_dec.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let cut = KERNEL_REL_TOL * c_max;
    let kcols: Vec<usize> = (0..c_dec.len()).filter(|&i| c_dec.values[i].abs() <= cut).collect();
    let rcols: Vec<usize> = (0..c_dec.len()).filter(|&i| c_dec.values[i] > cut).collect();
    let kmat = c_dec.vectors.select_columns(kcols.iter());
    let rmat = c_dec.vectors.select_columns(rcols.iter());
    let r = rcols.len();
    let c_rr = DMatrix::from_diagonal(&DVector::from_iterator(r, rcols.iter().map(|&i| c_dec.values[i])));

    let b = b_form.matrix();
    let b_kk = restrict_raw(b_form, &kmat);
    let zk = kernel_basis(&b_kk, KERNEL_REL_TOL);
    let yk = orthonormal_complement(&zk, &SymMatrix::identity(kmat.ncols()))?;
    let ymat = &kmat * yk.matrix();
    let zmat = &kmat * zk.matrix();

    let b_rr = rmat.transpose() * b * &rmat;
    let s = if ymat.ncols() > 0 {
        let b_ry = rmat.transpose() * b * &ymat;
        let b_yy = ymat.transpose() * b * &ymat;
        let lu = b_yy.lu();
        let x = lu
            .solve(&b_ry.transpose())
            .ok_or_else(|| PencilError::Numerical("singular Y-block in singular_times".into()))?;
        b_rr - &b_ry * x
    } else {
        b_rr
    };
    let w = if zmat.ncols() > 0 {
        let e = zmat.transpose() * b * &rmat;
        null_space(&e, KERNEL_REL_TOL)
    } else {
        DMatrix::identity(r, r)
    };
    if w.ncols() == 0 {
        return Ok(Vec::new());
    }
    let s_w = SymMatrix::symmetrized(w.transpose() * s * &w);
    let c_w = SymMatrix::symmetrized(w.transpose() * c_rr * &w);
    let dec = gen_sym_def_eigen(&s_w, &c_w)?;
    let mut times: Vec<f64> = dec.values.iter().map(|&t0| polish_singular_time(b_form, c, t0)).collect();
    times.sort_by(|a, b| a.total_cmp(b));
    Ok(times)
}

/// A few Rayleigh-quotient steps on the near-null vector of B − tC.
fn polish_singular_time(b: &SymMatrix, c: &SymMatrix, t0: f64) -> f64 {
    let smallest = |t: f64| {
        let dec = sym_eigen(&b.sub_scaled(c, t));
        let k = (0..dec.len())
            .min_by(|&i, &j| dec.values[i].abs().total_cmp(&dec.values[j].abs()))
            .expect("nonempty");
        (dec.values[k].abs(), dec.vector(k))
    };
    let mut t = t0;
    let (mut res, mut v) = smallest(t);
    for _ in 0..3 {
        let cv = c.quad(&v);
        if cv <= f64::EPSILON * c.max_abs_entry() {
            break;
        }
        let t1 = b.quad(&v) / cv;
        let (res1, v1) = smallest(t1);
        if res1 < res {
            t = t1;
            res = res1;
            v = v1;
        } else {
            break;
        }
    }
    t
}

/// Euclidean-orthonormal basis of {u : Zᵀ B u = 0, Zᵀ C u = 0} for Z = span(kerA).
pub fn hinf_subspace(b: &SymMatrix, c: &SymMatrix, ker_a: &Basis) -> DMatrix<f64> {
    let n = b.dim();
    let z = ker_a.matrix();
    let m = z.ncols();
    let mut stacked = DMatrix::zeros(2 * m, n);
    stacked.view_mut((0, 0), (m, n)).copy_from(&(z.transpose() * b.matrix()));
    stacked.view_mut((m, 0), (m, n)).copy_from(&(z.transpose() * c.matrix()));
    null_space(&stacked, KERNEL_REL_TOL)
}

fn check_dims(ms: &[&SymMatrix]) -> Result<()> {
    let n = ms[0].dim();
    if ms.iter().any(|m| m.dim() != n) {
        return Err(PencilError::DimensionMismatch(
            "A, B, C and G must all have the same dimension".into(),
        ));
    }
    Ok(())
}

fn check_coercive(a: &SymMatrix, g: &SymMatrix) -> Result<()> {
    let dec = match gen_sym_def_eigen(a, g) {
        Ok(d) => d,
        Err(PencilError::NotPositiveDefinite { .. }) => unreachable!("G was checked before"),
        Err(e) => return Err(e),
    };
    let max = dec.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if dec.values[0] <= KERNEL_REL_TOL * max {
        return Err(PencilError::Coercivity(format!(
            "smallest eigenvalue of (A, G) is {:e}; fixed mode needs A positive definite",
            dec.values[0]
        )));
    }
    Ok(())
}

fn compute_threshold(b: &SymMatrix, c: &SymMatrix, g: &SymMatrix, ker_a: &Basis, c_scale: f64) -> Result<f64> {
    let bz = restrict_form(b, ker_a)?;
    let cz = restrict_form(c, ker_a)?;
    let gz = restrict_form(g, ker_a)?;
    let max_b = spectral_radius(&bz, &gz)?;
    let min_c = gen_sym_def_eigen(&cz, &gz)?.values[0];
    if min_c <= KERNEL_REL_TOL * c_scale {
        return Err(PencilError::KernelIntersection(format!(
            "smallest eigenvalue of C on the unit sphere of Ker(A) is {min_c:e}"
        )));
    }
    Ok(max_b / min_c + 1.0)
}

/// Solves B^t v = μ A v and inverts: λ = 1/μ for |μ| above the zero
/// tolerance, an eigenvalue at infinity otherwise. `lift` maps reduced
/// coordinates back to the ambient space.
fn solve_reciprocal(
    a: &SymMatrix,
    bt: &SymMatrix,
    g: &SymMatrix,
    zero_tol: f64,
    lift: Option<&DMatrix<f64>>,
) -> Result<Spectrum> {
    let dec = gen_sym_def_eigen(bt, a)?;
    let radius = dec.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let tol = zero_tol + 64.0 * f64::EPSILON * radius;
    let make = |k: usize| {
        let v = dec.vector(k);
        let gn = g.quad(&v).sqrt();
        let g_red = &v / gn;
        let (vector, g_vector) = match lift {
            Some(w) => (w * &v, w * g_red),
            None => (v, g_red),
        };
        Eigenpair { lambda: 1.0 / dec.values[k], vector, g_vector }
    };
    let n = dec.len();
    let positives = (0..n).rev().filter(|&k| dec.values[k] > tol).map(make).collect();
    let negatives = (0..n).filter(|&k| dec.values[k] < -tol).map(make).collect();
    let inf: Vec<usize> = (0..n).filter(|&k| dec.values[k].abs() <= tol).collect();
    let inf_red = dec.vectors.select_columns(inf.iter());
    let infinity_basis = match lift {
        Some(w) => w * inf_red,
        None => inf_red,
    };
    Ok(Spectrum {
        t: None,
        positives,
        negatives,
        zero_multiplicity: 0,
        infinity_multiplicity: inf.len(),
        infinity_basis,
        active_dim: n,
        pre_threshold: false,
    })
}

/// The 5×5 pencil with A = I used throughout the examples.
pub fn reference_5x5() -> Pencil {
    let b = SymMatrix::from_rows(&[
        vec![0.0, 0.0, 0.0, -2.0, 0.0],
        vec![0.0, 2.0, -1.0, 2.0, 0.0],
        vec![0.0, -1.0, -3.0, 3.0, 0.0],
        vec![-2.0, 2.0, 3.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.0, 1.0],
    ])
    .expect("symmetric");
    let c = SymMatrix::from_diagonal(&[0.0, 0.0, 0.0, 1.0, 2.0]);
    Pencil::new(SymMatrix::identity(5), b, c, None, Mode::Fixed).expect("valid pencil")
}
