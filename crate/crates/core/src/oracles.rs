//! Independent checks: a hand-written small eigensolver, random-subspace
//! sampling of the sup-inf characterization, and the audit suite run on
//! sweep reports.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuation::{Clause, Sign, SweepReport};
use crate::error::{PencilError, Result};
use crate::linalg::{
    cholesky_factor, gen_sym_def_eigen, kernel_basis, null_space, restrict_raw, SymMatrix, KERNEL_REL_TOL,
};
use crate::pencil::{Eigenpair, Mode, Pencil, Spectrum};

/// Largest dimension accepted by the brute-force solver.
pub const BRUTE_FORCE_MAX_DIM: usize = 8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub passed: bool,
    /// Smallest slack seen; negative means violated.
    pub worst_margin: f64,
    pub samples: usize,
    /// Reported but never fails the suite.
    pub informational: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub seed: u64,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.informational || c.skipped.is_some())
    }

    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&AuditCheck> {
        self.checks.iter().filter(|c| !c.passed && !c.informational && c.skipped.is_none()).collect()
    }
}

/// Accumulates the worst margin of one check.
struct Probe {
    name: &'static str,
    worst: f64,
    samples: usize,
    witness: Option<Witness>,
    informational: bool,
}

impl Probe {
    fn new(name: &'static str) -> Self {
        Self { name, worst: f64::INFINITY, samples: 0, witness: None, informational: false }
    }

    fn observe(&mut self, margin: f64, witness: impl FnOnce() -> Witness) {
        self.samples += 1;
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        if margin < self.worst {
            self.worst = margin;
            if margin < 0.0 {
                self.witness = Some(witness());
            }
        }
    }

    fn finish(self) -> AuditCheck {
        AuditCheck {
            name: self.name.to_string(),
            passed: self.worst >= 0.0,
            worst_margin: if self.samples == 0 { 0.0 } else { self.worst },
            samples: self.samples,
            informational: self.informational,
            skipped: None,
            witness: self.witness,
        }
    }

    fn skip(self, why: &str) -> AuditCheck {
        AuditCheck {
            name: self.name.to_string(),
            passed: true,
            worst_margin: 0.0,
            samples: 0,
            informational: self.informational,
            skipped: Some(why.to_string()),
            witness: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Brute-force eigensolver. Deliberately shares nothing with `linalg`.

fn bf_cholesky(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Solves L X = B column by column.
fn bf_forward(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// L⁻¹ M L⁻ᵀ.
fn bf_standard_form(m: &DMatrix<f64>, l: &DMatrix<f64>) -> DMatrix<f64> {
    let x = bf_forward(l, m);
    let y = bf_forward(l, &x.transpose());
    (&y + y.transpose()) * 0.5
}

/// Householder reduction of a symmetric matrix to tridiagonal form; returns
/// the diagonal and the sub-diagonal.
fn bf_tridiagonal(a: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let mut v: Vec<f64> = (0..m).map(|i| a[(k + 1 + i, k)]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for x in v.iter_mut() {
            *x /= vn;
        }
        let mut p = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                p[i] += a[(k + 1 + i, k + 1 + j)] * v[j];
            }
        }
        let vp: f64 = (0..m).map(|i| v[i] * p[i]).sum();
        let w: Vec<f64> = (0..m).map(|i| 2.0 * p[i] - 2.0 * vp * v[i]).collect();
        for i in 0..m {
            for j in 0..m {
                a[(k + 1 + i, k + 1 + j)] -= v[i] * w[j] + w[i] * v[j];
            }
        }
        a[(k + 1, k)] = alpha;
        a[(k, k + 1)] = alpha;
        for i in 1..m {
            a[(k + 1 + i, k)] = 0.0;
            a[(k, k + 1 + i)] = 0.0;
        }
    }
    let d = (0..n).map(|i| a[(i, i)]).collect();
    let e = (0..n.saturating_sub(1)).map(|i| a[(i + 1, i)]).collect();
    (d, e)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below x.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let scale = d.iter().chain(e.iter()).fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
    let tiny = f64::EPSILON * scale;
    let mut count = 0;
    let mut q = d[0] - x;
    if q == 0.0 {
        q = -tiny;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        q = d[i] - x - e[i - 1] * e[i - 1] / q;
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// All eigenvalues of a symmetric tridiagonal matrix by Sturm bisection.
fn bisect_all(d: &[f64], e: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut radius = 0.0_f64;
    for i in 0..n {
        let off = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        radius = radius.max(d[i].abs() + off);
    }
    let (lo0, hi0) = (-radius - 1e-300, radius + 1e-300);
    (0..n)
        .map(|k| {
            let (mut lo, mut hi) = (lo0, hi0);
            for _ in 0..300 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if sturm_count(d, e, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Ascending eigenvalues of M v = μ A v for A positive definite.
fn bf_generalized(m: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let l = bf_cholesky(a)
        .ok_or_else(|| PencilError::Numerical("brute force: metric is not positive definite".into()))?;
    let s = bf_standard_form(m, &l);
    let (d, e) = bf_tridiagonal(&s);
    Ok(bisect_all(&d, &e))
}

/// Orthonormal basis of the orthogonal complement of range(X) via a full
/// Householder QR of X.
fn bf_range_complement(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (x.nrows(), x.ncols());
    let mut r = x.clone();
    let mut q = DMatrix::<f64>::identity(n, n);
    for k in 0..m.min(n) {
        let len = n - k;
        let mut v: Vec<f64> = (0..len).map(|i| r[(k + i, k)]).collect();
        let norm = v.iter().map(|z| z * z).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vn = v.iter().map(|z| z * z).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vn;
        }
        for c in 0..m {
            let dot: f64 = (0..len).map(|i| v[i] * r[(k + i, c)]).sum();
            for i in 0..len {
                r[(k + i, c)] -= 2.0 * v[i] * dot;
            }
        }
        for row in 0..n {
            let dot: f64 = (0..len).map(|i| q[(row, k + i)] * v[i]).sum();
            for i in 0..len {
                q[(row, k + i)] -= 2.0 * dot * v[i];
            }
        }
    }
    q.columns(m, n - m).into_owned()
}

/// Spectrum at t from the independent solver. Only eigenvalues are filled
/// in; vectors are empty.
pub fn brute_force_spectrum(p: &Pencil, t: f64) -> Result<Spectrum> {
    let n = p.dim();
    if n > BRUTE_FORCE_MAX_DIM {
        return Err(PencilError::InvalidInput(format!(
            "brute-force solver accepts dimension <= {BRUTE_FORCE_MAX_DIM}, got {n}"
        )));
    }
    let a = p.a().matrix();
    let bt = p.b().matrix() - p.c().matrix() * t;
    let (a_r, b_r, bb_r, c_r, zero) = match p.mode() {
        Mode::Fixed => (a.clone(), bt, p.b().matrix().clone(), p.c().matrix().clone(), 0),
        Mode::Moving => {
            let z = p.ker_a().matrix();
            let h = bf_range_complement(&(&bt * z));
            let r = |m: &DMatrix<f64>| {
                let x = h.transpose() * m * &h;
                (&x + x.transpose()) * 0.5
            };
            (r(a), r(&bt), r(p.b().matrix()), r(p.c().matrix()), z.ncols())
        }
    };
    let mu = bf_generalized(&b_r, &a_r)?;
    let radius = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let scale = radius(&bf_generalized(&bb_r, &a_r)?).max(radius(&bf_generalized(&c_r, &a_r)?));
    let tol = KERNEL_REL_TOL * scale + 64.0 * f64::EPSILON * radius(&mu);
    let empty = || Eigenpair { lambda: 0.0, vector: DVector::zeros(0), g_vector: DVector::zeros(0) };
    let positives = mu.iter().rev().filter(|&&m| m > tol).map(|&m| Eigenpair { lambda: 1.0 / m, ..empty() }).collect();
    let negatives = mu.iter().filter(|&&m| m < -tol).map(|&m| Eigenpair { lambda: 1.0 / m, ..empty() }).collect();
    let inf = mu.iter().filter(|m| m.abs() <= tol).count();
    Ok(Spectrum {
        t: Some(t),
        positives,
        negatives,
        zero_multiplicity: zero,
        infinity_multiplicity: inf,
        infinity_basis: DMatrix::zeros(n, 0),
        active_dim: n,
        pre_threshold: false,
    })
}

// ---------------------------------------------------------------------------
// Variational sampling.

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VcEstimate {
    /// Best value over the random subspaces.
    pub sampled_max: f64,
    /// Value on the span of the first j eigenvectors.
    pub eigen_span: f64,
    /// 1/λ_j^t.
    pub target: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl VcEstimate {
    /// Best value including the eigen-span sample.
    pub fn best(&self) -> f64 {
        self.sampled_max.max(self.eigen_span)
    }
}

/// inf{B^t(u) : u ∈ span(S), A(u) = 1}, or None when span(S) meets Ker(A).
fn subspace_inf(p: &Pencil, bt: &SymMatrix, s: &DMatrix<f64>) -> Option<f64> {
    let sa = restrict_raw(p.a(), s);
    let sg = restrict_raw(p.g(), s);
    let coercive = gen_sym_def_eigen(&sa, &sg).ok()?;
    let max = coercive.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if coercive.values[0] <= KERNEL_REL_TOL * max {
        return None;
    }
    let sb = restrict_raw(bt, s);
    gen_sym_def_eigen(&sb, &sa).ok().map(|d| d.values[0])
}

/// Samples nSamples random j-dimensional subspaces (G-Gaussian directions)
/// and evaluates the inner infimum on each; also evaluates the span of the
/// first j eigenvectors.
pub fn vc_lower_bound(p: &Pencil, t: f64, j: usize, n_samples: usize, seed: u64) -> Result<VcEstimate> {
    let spec = p.spectrum_at(t)?;
    if j == 0 || j > spec.positives.len() {
        return Err(PencilError::InvalidInput(format!(
            "index j = {j} outside the {} positive eigenvalues at t = {t}",
            spec.positives.len()
        )));
    }
    if n_samples == 0 {
        return Err(PencilError::InvalidInput("need at least one sample".into()));
    }
    let n = p.dim();
    let bt = p.b_at(t);
    let lg = cholesky_factor(p.g(), "Gram matrix G")?;
    let lgt = lg.transpose();
    let values: Vec<Option<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let z = DMatrix::from_fn(n, j, |_, _| rng.sample::<f64, _>(StandardNormal));
            let s = lgt.solve_upper_triangular(&z)?;
            subspace_inf(p, &bt, &s)
        })
        .collect();
    let accepted: Vec<f64> = values.iter().flatten().copied().collect();
    let span = DMatrix::from_fn(n, j, |r, c| spec.positives[c].vector[r]);
    let eigen_span = subspace_inf(p, &bt, &span)
        .ok_or_else(|| PencilError::Numerical("eigenvector span meets Ker(A)".into()))?;
    Ok(VcEstimate {
        sampled_max: accepted.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        eigen_span,
        target: 1.0 / spec.positives[j - 1].lambda,
        accepted: accepted.len(),
        rejected: n_samples - accepted.len(),
    })
}

// ---------------------------------------------------------------------------
// Audit suite.

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AuditOptions {
    pub seed: u64,
    /// Random subspaces per (t, j) in the variational check; 0 disables it.
    pub vc_samples: usize,
    /// Number of grid points at which the variational check runs.
    pub vc_points: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self { seed: 0, vc_samples: 64, vc_points: 5 }
    }
}

fn rel(x: f64) -> f64 {
    x.abs().max(1.0)
}

/// Runs every audit against the report's curves and freshly computed
/// spectra at the audited grid points.
pub fn run_audit_suite(p: &Pencil, report: &SweepReport, opts: AuditOptions) -> AuditReport {
    let threshold = report.threshold.unwrap_or(0.0);
    let moving = p.mode() == Mode::Moving;
    let audited: Vec<f64> = report
        .grid
        .points
        .iter()
        .filter(|q| q.audited && (!moving || q.t > threshold))
        .map(|q| q.t)
        .collect();
    let spectra: Vec<(f64, Result<Spectrum>)> = audited.par_iter().map(|&t| (t, p.spectrum_at(t))).collect();
    let mut checks = Vec::new();
    checks.push(monotonicity(report, moving, threshold));
    checks.push(count_monotonicity(report, moving, threshold));
    checks.push(upper_bound(p, report, &spectra));
    checks.push(lipschitz(p, report));
    checks.extend(draining(p, &spectra));
    checks.push(decomposition(p, &spectra));
    checks.push(negative_drain_rate(p, &spectra));
    if moving {
        checks.push(threshold_sign(p, &audited));
    }
    if opts.vc_samples > 0 {
        checks.push(variational(p, &spectra, opts));
    }
    if let Some(cl) = &report.classification {
        let mut probe = Probe::new("classification");
        let failures = cl.failures.len() + usize::from(cl.counts != cl.expected);
        probe.observe(0.0 - failures as f64, || Witness {
            t: cl.t_large,
            index: None,
            curve: None,
            vector: None,
            detail: format!("counts {:?} expected {:?}; {}", cl.counts, cl.expected, cl.failures.join("; ")),
        });
        checks.push(probe.finish());
    }
    AuditReport { seed: opts.seed, checks }
}

fn monotonicity(report: &SweepReport, moving: bool, threshold: f64) -> AuditCheck {
    let mut probe = Probe::new("monotonicity");
    // (t, lambda, curve, sign) for every audited point, grouped by grid time.
    let mut pts: Vec<(f64, f64, usize, Sign)> = report
        .curves
        .iter()
        .filter(|c| !c.pre_threshold && !(moving && c.sign == Sign::Negative))
        .flat_map(|c| c.points.iter().map(move |q| (q.t, q.lambda, c.id, c.sign)))
        .filter(|q| !moving || q.0 > threshold)
        .collect();
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let groups: Vec<&[(f64, f64, usize, Sign)]> = pts.chunk_by(|x, y| x.0 == y.0).collect();
    let ranked = |g: &[(f64, f64, usize, Sign)], sign: Sign| {
        let mut v: Vec<(f64, usize)> = g.iter().filter(|q| q.3 == sign).map(|q| (q.1, q.2)).collect();
        // Positives ascending, negatives closest to zero first.
        match sign {
            Sign::Positive => v.sort_by(|a, b| a.0.total_cmp(&b.0)),
            Sign::Negative => v.sort_by(|a, b| b.0.total_cmp(&a.0)),
        }
        v
    };
    for w in groups.windows(2) {
        let (t0, t1) = (w[0][0].0, w[1][0].0);
        for sign in [Sign::Positive, Sign::Negative] {
            let (a, b) = (ranked(w[0], sign), ranked(w[1], sign));
            for (j, (x, y)) in a.iter().zip(&b).enumerate() {
                let margin = (y.0 - x.0) + 1e-9 * x.0.abs().max(y.0.abs());
                probe.observe(margin, || Witness {
                    t: t1,
                    index: Some(j + 1),
                    curve: Some(y.1),
                    vector: None,
                    detail: format!(
                        "{:?} eigenvalue {} decreases from {} at t = {} to {} at t = {} (curve {})",
                        sign,
                        j + 1,
                        x.0,
                        t0,
                        y.0,
                        t1,
                        y.1
                    ),
                });
            }
        }
    }
    probe.finish()
}

fn count_monotonicity(report: &SweepReport, moving: bool, threshold: f64) -> AuditCheck {
    let mut probe = Probe::new("count-monotonicity");
    let pts: Vec<_> = report
        .counts
        .iter()
        .zip(report.grid.points.iter())
        .filter(|(c, g)| c.computed && g.audited && (!moving || g.t > threshold))
        .map(|(c, _)| c)
        .collect();
    for w in pts.windows(2) {
        let (x, y) = (w[0], w[1]);
        let margin = (x.positives as f64 - y.positives as f64).min(y.negatives as f64 - x.negatives as f64);
        probe.observe(margin, || Witness {
            t: y.t,
            index: None,
            curve: None,
            vector: None,
            detail: format!(
                "counts (+{}, -{}) at t = {} then (+{}, -{}) at t = {}",
                x.positives, x.negatives, x.t, y.positives, y.negatives, y.t
            ),
        });
    }
    probe.finish()
}

fn upper_bound(p: &Pencil, report: &SweepReport, spectra: &[(f64, Result<Spectrum>)]) -> AuditCheck {
    let mut probe = Probe::new("upper-bound");
    let lim = match report.limiting.clone().map(Ok).unwrap_or_else(|| p.limiting_spectrum()) {
        Ok(l) => l,
        Err(e) => return probe.skip(&format!("no limiting spectrum: {e}")),
    };
    for c in &report.curves {
        if let Some(Clause::ToPositiveLimit(j)) = c.clause {
            let limit = lim.positives[j - 1].lambda;
            for q in &c.points {
                if report.threshold.map_or(false, |tt| q.t <= tt) {
                    continue;
                }
                probe.observe(limit + 1e-9 * rel(limit) - q.lambda, || Witness {
                    t: q.t,
                    index: Some(j),
                    curve: Some(c.id),
                    vector: None,
                    detail: format!("curve {} value {} exceeds limit {}", c.id, q.lambda, limit),
                });
            }
        }
    }
    for (t, s) in spectra {
        let Ok(s) = s else { continue };
        for (j, (e, l)) in s.positives.iter().zip(lim.positives.iter()).enumerate() {
            probe.observe(l.lambda + 1e-9 * rel(l.lambda) - e.lambda, || Witness {
                t: *t,
                index: Some(j + 1),
                curve: None,
                vector: Some(e.vector.iter().copied().collect()),
                detail: format!("λ_{} = {} exceeds the limit {}", j + 1, e.lambda, l.lambda),
            });
        }
    }
    probe.finish()
}

fn lipschitz(p: &Pencil, report: &SweepReport) -> AuditCheck {
    let mut probe = Probe::new("lipschitz");
    if p.mode() == Mode::Moving {
        return probe.skip("the Lipschitz bound is audited in fixed mode only");
    }
    let constant = match gen_sym_def_eigen(p.c(), p.a()) {
        Ok(d) => d.values.last().copied().unwrap_or(0.0),
        Err(e) => return probe.skip(&format!("no constant: {e}")),
    };
    for c in &report.curves {
        for w in c.points.windows(2) {
            let (x, y) = (&w[0], &w[1]);
            let quotient = (1.0 / y.lambda - 1.0 / x.lambda).abs() / (y.t - x.t).abs();
            let margin = constant + 1e-8 * constant.max(1.0) - quotient;
            probe.observe(margin, || Witness {
                t: y.t,
                index: None,
                curve: Some(c.id),
                vector: None,
                detail: format!(
                    "curve {}: difference quotient {} of 1/λ over [{}, {}] exceeds {}",
                    c.id, quotient, x.t, y.t, constant
                ),
            });
        }
    }
    probe.finish()
}

fn draining(p: &Pencil, spectra: &[(f64, Result<Spectrum>)]) -> Vec<AuditCheck> {
    let mut probe = Probe::new("draining");
    let mut info = Probe::new("draining-g-normalized");
    info.informational = true;
    if p.mode() == Mode::Moving {
        return vec![probe.skip("the draining bound is audited in fixed mode only"), info.skip("fixed mode only")];
    }
    let mu = match gen_sym_def_eigen(p.b(), p.a()) {
        Ok(d) => d.values.last().copied().unwrap_or(0.0),
        Err(e) => return vec![probe.skip(&format!("{e}")), info.skip("no bound")],
    };
    if mu <= 0.0 {
        return vec![probe.skip("B is nowhere positive"), info.skip("B is nowhere positive")];
    }
    for (t, s) in spectra {
        let Ok(s) = s else { continue };
        for (j, e) in s.positives.iter().enumerate() {
            let drained = t * p.c().quad(&e.vector);
            probe.observe(mu + 1e-8 * rel(mu) - drained, || Witness {
                t: *t,
                index: Some(j + 1),
                curve: None,
                vector: Some(e.vector.iter().copied().collect()),
                detail: format!("t·C(u) = {drained} exceeds μ = {mu}"),
            });
            let g_drained = t * p.c().quad(&e.g_vector);
            info.observe(mu + 1e-8 * rel(mu) - g_drained, || Witness {
                t: *t,
                index: Some(j + 1),
                curve: None,
                vector: None,
                detail: format!("G-normalized t·C(u) = {g_drained} versus μ = {mu}"),
            });
        }
    }
    vec![probe.finish(), info.finish()]
}

fn decomposition(p: &Pencil, spectra: &[(f64, Result<Spectrum>)]) -> AuditCheck {
    let mut probe = Probe::new("decomposition");
    for (t, s) in spectra {
        let s = match s {
            Ok(s) => s,
            Err(e) => {
                probe.observe(f64::NEG_INFINITY, || Witness {
                    t: *t,
                    index: None,
                    curve: None,
                    vector: None,
                    detail: format!("spectrum failed: {e}"),
                });
                continue;
            }
        };
        let (res, count_gap) = decomposition_residual(p, *t, s);
        probe.observe((1e-8 - res).min(0.0 - count_gap as f64), || Witness {
            t: *t,
            index: None,
            curve: None,
            vector: None,
            detail: format!("a-orthogonality residual {res:e}, count gap {count_gap}"),
        });
    }
    probe.finish()
}

/// Max residual of VᵀAV = I and VᵀB^tV = diag(1/λ, 0) over the
/// eigenvectors and infinity basis, relative to ‖B^t‖; plus the shortfall
/// in the dimension count.
pub fn decomposition_residual(p: &Pencil, t: f64, s: &Spectrum) -> (f64, usize) {
    let n = p.dim();
    let mut cols: Vec<DVector<f64>> = s.positives.iter().chain(s.negatives.iter()).map(|e| e.vector.clone()).collect();
    let mut diag: Vec<f64> = s.positives.iter().chain(s.negatives.iter()).map(|e| 1.0 / e.lambda).collect();
    for k in 0..s.infinity_basis.ncols() {
        cols.push(s.infinity_basis.column(k).into_owned());
        diag.push(0.0);
    }
    let v = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let bt = p.b_at(t);
    let va = v.transpose() * p.a().matrix() * &v;
    let vb = v.transpose() * bt.matrix() * &v;
    let k = cols.len();
    let ra = (va - DMatrix::<f64>::identity(k, k)).amax();
    let scale = diag.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let rb = (vb - DMatrix::from_diagonal(&DVector::from_vec(diag))).amax() / scale;
    let expected = s.active_dim - s.zero_multiplicity;
    let total = s.finite_count() + s.infinity_multiplicity;
    let gap = expected.abs_diff(total) + expected.abs_diff(k);
    (ra.max(rb), gap)
}

/// H′ = range(C) (fixed) or range(C) ∩ H^∞ (moving), as raw columns.
fn drain_subspace(p: &Pencil) -> DMatrix<f64> {
    let n = p.dim();
    let k = kernel_basis(p.c(), KERNEL_REL_TOL);
    let range = crate::linalg::orthonormal_complement(&k, &SymMatrix::identity(n))
        .map(|b| b.matrix().clone())
        .unwrap_or_else(|_| DMatrix::zeros(n, 0));
    match p.mode() {
        Mode::Fixed => range,
        Mode::Moving => {
            let z = p.ker_a().matrix();
            let m = z.ncols();
            let mut cons = DMatrix::zeros(2 * m, n);
            cons.view_mut((0, 0), (m, n)).copy_from(&(z.transpose() * p.b().matrix()));
            cons.view_mut((m, 0), (m, n)).copy_from(&(z.transpose() * p.c().matrix()));
            let y = null_space(&(cons * &range), KERNEL_REL_TOL);
            range * y
        }
    }
}

fn negative_drain_rate(p: &Pencil, spectra: &[(f64, Result<Spectrum>)]) -> AuditCheck {
    let mut probe = Probe::new("negative-drain-rate");
    let h = drain_subspace(p);
    if h.ncols() == 0 {
        return probe.skip("H′ is trivial");
    }
    let ah = restrict_raw(p.a(), &h);
    let (cdec, bdec) = match (gen_sym_def_eigen(&restrict_raw(p.c(), &h), &ah), gen_sym_def_eigen(&restrict_raw(p.b(), &h), &ah)) {
        (Ok(c), Ok(b)) => (c, b),
        _ => return probe.skip("A is not positive definite on H′"),
    };
    let m_c = cdec.values[0];
    let m_b = bdec.values.last().copied().unwrap_or(0.0);
    let big_m = m_b.max(0.0) / m_c;
    let start = big_m + 1.0;
    let count = p.negative_limit_count().min(h.ncols());
    // λ_j(H′, a, c) = 1/ν_j with ν descending.
    let lam: Vec<f64> = cdec.values.iter().rev().map(|nu| 1.0 / nu).collect();
    for (t, s) in spectra {
        let Ok(s) = s else { continue };
        if *t <= start {
            continue;
        }
        for j in 0..count.min(s.negatives.len()) {
            let bound = lam[j] / (t - big_m);
            let value = s.negatives[j].lambda.abs();
            probe.observe(bound + 1e-8 - value, || Witness {
                t: *t,
                index: Some(j + 1),
                curve: None,
                vector: Some(s.negatives[j].vector.iter().copied().collect()),
                detail: format!("|λ_-{}| = {value} exceeds {bound} (M = {big_m})", j + 1),
            });
        }
    }
    probe.finish()
}

fn threshold_sign(p: &Pencil, audited: &[f64]) -> AuditCheck {
    let mut probe = Probe::new("threshold-sign");
    let z = p.ker_a().matrix();
    let gz = restrict_raw(p.g(), z);
    for &t in audited {
        let bz = restrict_raw(&p.b_at(t), z);
        if let Ok(d) = gen_sym_def_eigen(&bz, &gz) {
            let top = d.values.last().copied().unwrap_or(f64::NEG_INFINITY);
            probe.observe(-top, || Witness {
                t,
                index: None,
                curve: None,
                vector: Some(d.vector(d.len() - 1).iter().copied().collect()),
                detail: format!("B^t is not negative on the unit sphere of Ker(A): max {top}"),
            });
        }
    }
    probe.finish()
}

fn variational(p: &Pencil, spectra: &[(f64, Result<Spectrum>)], opts: AuditOptions) -> AuditCheck {
    let mut probe = Probe::new("variational");
    let usable: Vec<(f64, usize)> = spectra
        .iter()
        .filter_map(|(t, s)| s.as_ref().ok().map(|s| (*t, s.positives.len())))
        .filter(|(_, k)| *k > 0)
        .collect();
    if usable.is_empty() {
        return probe.skip("no positive eigenvalues at audited points");
    }
    let picks = opts.vc_points.max(1).min(usable.len());
    for i in 0..picks {
        let (t, k) = usable[i * (usable.len() - 1) / picks.max(2).saturating_sub(1).max(1)];
        for j in 1..=k.min(3) {
            let seed = opts.seed.wrapping_add((i * 16 + j) as u64);
            match vc_lower_bound(p, t, j, opts.vc_samples, seed) {
                Ok(est) => {
                    let sampled = est.target + 1e-9 * rel(est.target) - est.sampled_max;
                    let attained = 1e-9 * rel(est.target) - (est.eigen_span - est.target).abs();
                    probe.observe(sampled.min(attained), || Witness {
                        t,
                        index: Some(j),
                        curve: None,
                        vector: None,
                        detail: format!(
                            "seed {seed}: sampled max {} / eigen-span {} versus 1/λ_j = {}",
                            est.sampled_max, est.eigen_span, est.target
                        ),
                    });
                }
                Err(e) => probe.observe(f64::NEG_INFINITY, || Witness {
                    t,
                    index: Some(j),
                    curve: None,
                    vector: None,
                    detail: format!("sampling failed: {e}"),
                }),
            }
        }
    }
    probe.finish()
}

/// Turns one positive curve into a decreasing one, for negative-control runs.
pub fn corrupt_positive_curve(report: &mut SweepReport) -> Option<usize> {
    let c = report
        .curves
        .iter_mut()
        .find(|c| c.sign == Sign::Positive && !c.pre_threshold && c.points.len() >= 3)?;
    let k = c.points.len() / 2;
    c.points[k].lambda = 0.5 * c.points[k - 1].lambda;
    Some(c.id)
}

// ---------------------------------------------------------------------------
// Random pencils.

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-3.0..=3.0))
}

/// Fixed-mode pencil of dimension d with entries in [−3, 3]:
/// A = MᵀM + I/2, B symmetric, C = WWᵀ of rank between 1 and d − 1.
pub fn random_pencil(seed: u64, d: usize) -> Result<Pencil> {
    if d < 2 {
        return Err(PencilError::InvalidInput("random pencils need d >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = uniform_matrix(&mut rng, d, d);
    let a = m.transpose() * &m + DMatrix::identity(d, d) * 0.5;
    let b0 = uniform_matrix(&mut rng, d, d);
    let b = (&b0 + b0.transpose()) * 0.5;
    let rank = rng.random_range(1..d);
    let w = uniform_matrix(&mut rng, d, rank);
    let c = &w * w.transpose();
    Pencil::new(SymMatrix::symmetrized(a), SymMatrix::symmetrized(b), SymMatrix::symmetrized(c), None, Mode::Fixed)
}

/// Moving-mode pencil: A = MᵀM with M of size (d − k)×d, so Ker(A) has
/// dimension k; C of rank between k and d − 1.
pub fn random_moving_pencil(seed: u64, d: usize, k: usize) -> Result<Pencil> {
    if k == 0 || k >= d {
        return Err(PencilError::InvalidInput("need 1 <= k < d".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = uniform_matrix(&mut rng, d - k, d);
    let a = m.transpose() * &m;
    let b0 = uniform_matrix(&mut rng, d, d);
    let b = (&b0 + b0.transpose()) * 0.5;
    let rank = rng.random_range(k..d);
    let w = uniform_matrix(&mut rng, d, rank);
    let c = &w * w.transpose();
    Pencil::new(SymMatrix::symmetrized(a), SymMatrix::symmetrized(b), SymMatrix::symmetrized(c), None, Mode::Moving)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pencil::reference_5x5;

    #[test]
    fn tridiagonal_bisection_matches_closed_form() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, -3.0]);
        let ev = bf_generalized(&m, &DMatrix::identity(2, 2)).unwrap();
        let s = 29f64.sqrt();
        assert!((ev[0] - (-1.0 - s) / 2.0).abs() < 1e-13);
        assert!((ev[1] - (-1.0 + s) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn brute_force_diagonal() {
        let p = Pencil::new(
            SymMatrix::identity(2),
            SymMatrix::from_diagonal(&[2.0, -3.0]),
            SymMatrix::from_diagonal(&[0.0, 1.0]),
            None,
            Mode::Fixed,
        )
        .unwrap();
        let s = brute_force_spectrum(&p, 0.0).unwrap();
        assert!((s.positives[0].lambda - 0.5).abs() < 1e-15);
        assert!((s.negatives[0].lambda + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn brute_force_matches_main_solver_on_reference_pencil() {
        let p = reference_5x5();
        for t in [0.0, 10.0, 100.0] {
            let a = p.spectrum_at(t).unwrap();
            let b = brute_force_spectrum(&p, t).unwrap();
            assert_eq!(a.positive_values().len(), b.positive_values().len());
            for (x, y) in a.positive_values().iter().zip(b.positive_values()) {
                assert!((x - y).abs() <= 1e-7 * x.abs().max(1.0));
            }
            for (x, y) in a.negative_values().iter().zip(b.negative_values()) {
                assert!((x - y).abs() <= 1e-7 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn range_complement_is_orthogonal() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 2.0, 1.0, 0.0, 3.0, 1.0, 1.0]);
        let h = bf_range_complement(&x);
        assert_eq!(h.ncols(), 2);
        assert!((x.transpose() * &h).amax() < 1e-13);
        assert!((h.transpose() * &h - DMatrix::<f64>::identity(2, 2)).amax() < 1e-13);
    }

    #[test]
    fn vc_attains_on_eigen_span() {
        let p = reference_5x5();
        let est = vc_lower_bound(&p, 10.0, 1, 200, 7).unwrap();
        assert!(est.sampled_max <= est.target + 1e-9);
        assert!((est.eigen_span - est.target).abs() < 1e-9);
        assert!(vc_lower_bound(&p, 10.0, 5, 10, 7).is_err());
    }

    #[test]
    fn vc_is_deterministic() {
        let p = reference_5x5();
        let a = vc_lower_bound(&p, 3.0, 1, 50, 11).unwrap();
        let b = vc_lower_bound(&p, 3.0, 1, 50, 11).unwrap();
        assert_eq!(a.sampled_max, b.sampled_max);
    }

    #[test]
    fn vc_whole_space_on_definite_pencil() {
        let p = Pencil::new(
            SymMatrix::identity(2),
            SymMatrix::from_diagonal(&[2.0, 3.0]),
            SymMatrix::from_diagonal(&[0.0, 1.0]),
            None,
            Mode::Fixed,
        )
        .unwrap();
        let est = vc_lower_bound(&p, 0.0, 2, 5, 1).unwrap();
        assert!((est.sampled_max - 2.0).abs() < 1e-12);
        assert!((est.target - 2.0).abs() < 1e-12);
    }

    #[test]
    fn random_pencils_are_valid() {
        for seed in 0..20 {
            let d = 2 + (seed as usize % 5);
            random_pencil(seed, d).unwrap();
        }
        random_moving_pencil(3, 5, 1).unwrap();
    }

    fn reference_sweep() -> (Pencil, SweepReport) {
        use crate::continuation::*;
        let p = reference_5x5();
        let grid = make_grid(-1e3, 1e5, 200, &p, GridOptions::default()).unwrap();
        let r = sweep(&p, &grid, SweepOptions::default()).unwrap();
        let lim = p.limiting_spectrum().unwrap();
        let r = classify_asymptotics(r, &lim, p.negative_limit_count(), ClassifyOptions::default()).unwrap();
        (p, r)
    }

    #[test]
    fn audit_suite_passes_on_reference_pencil() {
        let (p, r) = reference_sweep();
        let audit = run_audit_suite(&p, &r, AuditOptions::default());
        for c in &audit.checks {
            assert!(c.passed || c.informational || c.skipped.is_some(), "{c:?}");
        }
        assert!(audit.passed());
        assert!(audit.check("variational").unwrap().samples > 0);
    }

    #[test]
    fn negative_control_is_caught() {
        let (p, mut r) = reference_sweep();
        let id = corrupt_positive_curve(&mut r).unwrap();
        let audit = run_audit_suite(&p, &r, AuditOptions { vc_samples: 0, ..AuditOptions::default() });
        let mono = audit.check("monotonicity").unwrap();
        assert!(!mono.passed);
        assert_eq!(mono.witness.as_ref().unwrap().curve, Some(id));
        assert!(!audit.passed());
    }
}
