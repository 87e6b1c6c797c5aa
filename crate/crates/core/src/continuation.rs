//! Eigenvalue curves t ↦ λ(t) over a compactified t-grid: tracking, blow-up
//! and reappearance detection, asymptotic classification and export.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PencilError, Result};
use crate::io::{write_atomic, Format};
use crate::oracles::AuditReport;
use crate::pencil::{Mode, Pencil, Spectrum};

/// Curves whose |λ| exceeds this are numerically infinite.
pub const BLOW_UP_CAP: f64 = 1e9;
/// A negative curve born after a singular time must start below −BLOW_UP_CAP·ε.
const REAPPEAR_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct GridOptions {
    /// t = scale · tan(πs/2).
    pub scale: f64,
    /// Refinement points t* ± 2⁻ᵏ·gap, k = 1..8, around each singular time t*.
    pub refine_gap: f64,
    /// Log-spaced points per decade between the outermost uniform point and each endpoint.
    pub tail_per_decade: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { scale: 1.0, refine_gap: 1.0, tail_per_decade: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub t: f64,
    pub s: f64,
    /// False for moving-mode points with |t| ≤ T.
    pub audited: bool,
}

#[derive(Clone, Debug)]
pub struct TGrid {
    pub scale: f64,
    pub points: Vec<GridPoint>,
    pub singular_times: Vec<f64>,
    pub threshold: Option<f64>,
}

pub fn compactify(t: f64, scale: f64) -> f64 {
    2.0 / std::f64::consts::PI * (t / scale).atan()
}

pub fn decompactify(s: f64, scale: f64) -> f64 {
    scale * (std::f64::consts::FRAC_PI_2 * s).tan()
}

impl TGrid {
    /// Grid over explicit t-values (sorted and deduplicated).
    pub fn from_values(ts: &[f64], scale: f64, singular_times: Vec<f64>, threshold: Option<f64>) -> Result<Self> {
        let mut ts: Vec<f64> = ts.to_vec();
        if ts.iter().any(|t| !t.is_finite()) {
            return Err(PencilError::InvalidInput("grid values must be finite".into()));
        }
        ts.sort_by(|a, b| a.total_cmp(b));
        ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
        let points = ts
            .into_iter()
            .map(|t| GridPoint { t, s: compactify(t, scale), audited: threshold.map_or(true, |tt| t.abs() > tt) })
            .collect();
        Ok(Self { scale, points, singular_times, threshold })
    }

    /// The grid t ↦ −t, for sweeping the B-negated pencil.
    pub fn mirrored(&self) -> TGrid {
        let points = self.points.iter().rev().map(|p| GridPoint { t: -p.t, s: -p.s, audited: p.audited }).collect();
        let mut singular_times: Vec<f64> = self.singular_times.iter().map(|t| -t).collect();
        singular_times.reverse();
        TGrid { scale: self.scale, points, singular_times, threshold: self.threshold }
    }

    pub fn ts(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }
}

/// Compactified grid on [t_min, t_max] refined around the singular times of p.
pub fn make_grid(t_min: f64, t_max: f64, n_points: usize, p: &Pencil, opts: GridOptions) -> Result<TGrid> {
    if n_points < 2 || !(t_min < t_max) || !t_min.is_finite() || !t_max.is_finite() {
        return Err(PencilError::InvalidInput(format!(
            "grid needs n_points >= 2 and finite t_min < t_max (got {n_points}, [{t_min}, {t_max}])"
        )));
    }
    if !(opts.scale > 0.0) || !(opts.refine_gap > 0.0) {
        return Err(PencilError::InvalidInput("grid scale and refine gap must be positive".into()));
    }
    let singular = p.singular_times()?;
    let s0 = compactify(t_min, opts.scale);
    let s1 = compactify(t_max, opts.scale);
    let mut ts: Vec<f64> = (0..n_points)
        .map(|i| {
            if i == 0 {
                t_min
            } else if i == n_points - 1 {
                t_max
            } else {
                decompactify(s0 + (s1 - s0) * i as f64 / (n_points - 1) as f64, opts.scale)
            }
        })
        .collect();
    if n_points > 2 && opts.tail_per_decade > 0 {
        let (lo, hi) = (ts[1], ts[n_points - 2]);
        for (inner, outer) in [(lo, t_min), (hi, t_max)] {
            if inner * outer <= 0.0 || outer.abs() <= inner.abs() * 1.5 {
                continue;
            }
            let decades = (outer / inner).log10();
            let n = (decades * opts.tail_per_decade as f64).ceil() as usize;
            for k in 1..n {
                ts.push(inner * 10f64.powf(decades * k as f64 / n as f64));
            }
        }
    }
    let mut inside: Vec<f64> = singular.iter().copied().filter(|&t| t >= t_min && t <= t_max).collect();
    inside.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    for &ts_star in &inside {
        for k in 1..=8 {
            let d = opts.refine_gap * 0.5_f64.powi(k);
            for t in [ts_star - d, ts_star + d] {
                if t >= t_min && t <= t_max {
                    ts.push(t);
                }
            }
        }
    }
    // Grid points sitting on a singular time would carry an eigenvalue at infinity.
    ts.retain(|&t| !inside.iter().any(|&u| (t - u).abs() <= 1e-9 * u.abs().max(1.0)));
    let threshold = match p.mode() {
        Mode::Fixed => None,
        Mode::Moving => Some(p.threshold_t()?),
    };
    TGrid::from_values(&ts, opts.scale, singular, threshold)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CurveOrigin {
    GridStart,
    /// Born from −∞ just after the singular time.
    ReappearsFrom(f64),
    Appears(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CurveStatus {
    ConvergesTo(f64),
    /// `None` means t → +∞.
    BlowsUpAt(Option<f64>),
    DrainsToZero,
    PreThresholdUnlabeled,
    Unclassified,
}

/// The clause of the large-t limit statement a curve falls under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Clause {
    /// Positive curve unbounded as t → ∞.
    ToInfinity,
    /// Converges to λ_j of the limiting problem.
    ToPositiveLimit(usize),
    /// Negative curve increasing to zero.
    DrainsToZero,
    /// Converges to λ_{−j} of the limiting problem.
    ToNegativeLimit(usize),
}

#[derive(Clone, Debug)]
pub struct CurvePoint {
    pub t: f64,
    pub s: f64,
    pub lambda: f64,
    pub vector: Option<DVector<f64>>,
}

#[derive(Clone, Debug)]
pub struct Curve {
    pub id: usize,
    pub sign: Sign,
    pub points: Vec<CurvePoint>,
    pub origin: CurveOrigin,
    pub status: CurveStatus,
    pub clause: Option<Clause>,
    /// Lies in the unaudited moving-mode region |t| ≤ T.
    pub pre_threshold: bool,
}

impl Curve {
    pub fn first_t(&self) -> f64 {
        self.points[0].t
    }

    pub fn last(&self) -> &CurvePoint {
        self.points.last().expect("curves are never empty")
    }

    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.points.iter().find(|p| p.t == t).map(|p| p.lambda)
    }

    pub fn label(&self) -> String {
        let status = self.status.to_string();
        match self.origin {
            CurveOrigin::ReappearsFrom(t) => format!("reappears-from({t})->{status}"),
            _ => status,
        }
    }
}

impl fmt::Display for CurveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveStatus::ConvergesTo(x) => write!(f, "converges-to({x})"),
            CurveStatus::BlowsUpAt(Some(t)) => write!(f, "blows-up-at({t})"),
            CurveStatus::BlowsUpAt(None) => write!(f, "blows-up-at(+inf)"),
            CurveStatus::DrainsToZero => write!(f, "drains-to-zero"),
            CurveStatus::PreThresholdUnlabeled => write!(f, "pre-threshold-unlabeled"),
            CurveStatus::Unclassified => write!(f, "unclassified"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SweepOptions {
    pub blow_up_cap: f64,
    /// Minimum |uᵀAv| for two eigenvectors to belong to one curve.
    pub overlap_threshold: f64,
    /// Overlaps closer than this are ambiguous.
    pub tie_tol: f64,
    /// Keep every eigenvector on the curves (memory heavy for large pencils).
    pub keep_vectors: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { blow_up_cap: BLOW_UP_CAP, overlap_threshold: 0.5, tie_tol: 1e-6, keep_vectors: false }
    }
}

/// Eigenvalue counts at one grid point; `computed` is false when the
/// pre-threshold spectrum could not be formed there.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PointCounts {
    pub t: f64,
    pub computed: bool,
    pub positives: usize,
    pub negatives: usize,
    pub infinity: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseCounts {
    pub to_infinity: usize,
    pub to_positive_limit: usize,
    pub drains_to_zero: usize,
    pub to_negative_limit: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Classification {
    pub t_large: f64,
    pub counts: ClauseCounts,
    pub expected: ClauseCounts,
    pub reappearances: usize,
    pub failures: Vec<String>,
}

impl Classification {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.counts == self.expected
    }
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub mode: Mode,
    pub threshold: Option<f64>,
    pub grid: TGrid,
    pub curves: Vec<Curve>,
    pub counts: Vec<PointCounts>,
    pub singular_times: Vec<f64>,
    pub limiting: Option<Spectrum>,
    pub warnings: Vec<String>,
    pub classification: Option<Classification>,
    pub audits: Option<AuditReport>,
}

impl SweepReport {
    pub fn empty(mode: Mode) -> Self {
        SweepReport {
            mode,
            threshold: None,
            grid: TGrid { scale: 1.0, points: Vec::new(), singular_times: Vec::new(), threshold: None },
            curves: Vec::new(),
            counts: Vec::new(),
            singular_times: Vec::new(),
            limiting: None,
            warnings: Vec::new(),
            classification: None,
            audits: None,
        }
    }

    /// All curve values present at grid value t, ascending.
    pub fn values_at(&self, t: f64) -> Vec<f64> {
        let mut v: Vec<f64> = self.curves.iter().filter_map(|c| c.value_at(t)).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn reappearances(&self) -> Vec<&Curve> {
        self.curves.iter().filter(|c| matches!(c.origin, CurveOrigin::ReappearsFrom(_))).collect()
    }
}

struct Tracked {
    curve: usize,
    vector: DVector<f64>,
}

struct Candidate {
    sign: Sign,
    lambda: f64,
    vector: DVector<f64>,
}

fn candidates(s: &Spectrum) -> Vec<Candidate> {
    let pos = s.positives.iter().map(|e| Candidate { sign: Sign::Positive, lambda: e.lambda, vector: e.vector.clone() });
    let neg = s.negatives.iter().map(|e| Candidate { sign: Sign::Negative, lambda: e.lambda, vector: e.vector.clone() });
    pos.chain(neg).collect()
}

/// Tracks eigenvalue curves over the grid.
pub fn sweep(p: &Pencil, grid: &TGrid, opts: SweepOptions) -> Result<SweepReport> {
    let spectra: Vec<Result<Spectrum>> = grid.points.par_iter().map(|pt| p.spectrum_any(pt.t)).collect();
    let mut report = SweepReport::empty(p.mode());
    report.threshold = grid.threshold;
    report.grid = grid.clone();
    report.singular_times = grid.singular_times.clone();

    let mut active: Vec<Tracked> = Vec::new();
    let mut prev: Option<GridPoint> = None;
    for (pt, spec) in grid.points.iter().zip(spectra) {
        let spec = match (spec, p.mode()) {
            (Ok(s), _) => s,
            (Err(e), Mode::Moving) if !pt.audited => {
                report.warnings.push(format!("no pre-threshold spectrum at t = {}: {e}", pt.t));
                report.counts.push(PointCounts { t: pt.t, computed: false, positives: 0, negatives: 0, infinity: 0 });
                close_all(&mut report, &mut active, prev.map(|q| q.t), pt.t, opts);
                prev = None;
                continue;
            }
            (Err(e), _) => return Err(e),
        };
        report.counts.push(PointCounts {
            t: pt.t,
            computed: true,
            positives: spec.positives.len(),
            negatives: spec.negatives.len(),
            infinity: spec.infinity_multiplicity,
        });
        let region_break = prev.map_or(true, |q| q.audited != pt.audited);
        if region_break {
            close_all(&mut report, &mut active, prev.map(|q| q.t), pt.t, opts);
        }
        let cands = candidates(&spec);
        let (pairs, ambiguous) = match_candidates(p, &report, &active, &cands, opts);
        for (ci, t) in ambiguous {
            report.warnings.push(format!(
                "ambiguous overlap for curve {ci} at t = {t}; tie broken by eigenvalue proximity"
            ));
        }
        let mut cand_curve: Vec<Option<usize>> = vec![None; cands.len()];
        let mut matched = vec![false; active.len()];
        for &(a, c) in &pairs {
            cand_curve[c] = Some(active[a].curve);
            matched[a] = true;
        }
        let t_prev = prev.map(|q| q.t);
        for (a, tr) in active.iter().enumerate() {
            if !matched[a] {
                close_curve(&mut report, tr.curve, t_prev, pt.t, opts);
            }
        }
        let mut next_active = Vec::with_capacity(cands.len());
        for (c, cand) in cands.into_iter().enumerate() {
            let curve = match cand_curve[c] {
                Some(id) => id,
                None => {
                    let origin = birth_origin(&report, t_prev, pt.t, &cand, region_break, opts);
                    let id = report.curves.len();
                    report.curves.push(Curve {
                        id,
                        sign: cand.sign,
                        points: Vec::new(),
                        origin,
                        status: CurveStatus::Unclassified,
                        clause: None,
                        pre_threshold: !pt.audited,
                    });
                    id
                }
            };
            report.curves[curve].points.push(CurvePoint {
                t: pt.t,
                s: pt.s,
                lambda: cand.lambda,
                vector: if opts.keep_vectors { Some(cand.vector.clone()) } else { None },
            });
            next_active.push(Tracked { curve, vector: cand.vector });
        }
        active = next_active;
        prev = Some(*pt);
    }
    for tr in &active {
        if report.curves[tr.curve].pre_threshold {
            report.curves[tr.curve].status = CurveStatus::PreThresholdUnlabeled;
        }
    }
    for c in report.curves.iter_mut() {
        if c.pre_threshold && c.status == CurveStatus::Unclassified {
            c.status = CurveStatus::PreThresholdUnlabeled;
        }
    }
    Ok(report)
}

fn close_all(report: &mut SweepReport, active: &mut Vec<Tracked>, t_prev: Option<f64>, t_next: f64, opts: SweepOptions) {
    for tr in active.drain(..) {
        close_curve(report, tr.curve, t_prev, t_next, opts);
    }
}

/// Greedy maximal-overlap matching between the active curves and the new
/// eigenpairs of the same sign. Returns (active index, candidate index)
/// pairs plus the curves whose best overlaps tied.
fn match_candidates(
    p: &Pencil,
    report: &SweepReport,
    active: &[Tracked],
    cands: &[Candidate],
    opts: SweepOptions,
) -> (Vec<(usize, usize)>, Vec<(usize, f64)>) {
    if active.is_empty() || cands.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let n = p.dim();
    let u = DMatrix::from_fn(n, active.len(), |i, j| active[j].vector[i]);
    let v = DMatrix::from_fn(n, cands.len(), |i, j| cands[j].vector[i]);
    let overlap = u.transpose() * p.a().matrix() * v;
    let scale = cands.iter().fold(1.0_f64, |m, c| m.max(c.lambda.abs()));
    let mut pairs: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut ambiguous = Vec::new();
    for (a, tr) in active.iter().enumerate() {
        let curve = &report.curves[tr.curve];
        let last = curve.last().lambda;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for (c, cand) in cands.iter().enumerate() {
            if cand.sign != curve.sign {
                continue;
            }
            let o = overlap[(a, c)].abs();
            if o >= opts.overlap_threshold {
                row.push((c, o));
                pairs.push((a, c, o, (cand.lambda - last).abs() / scale));
            }
        }
        row.sort_by(|x, y| y.1.total_cmp(&x.1));
        if row.len() >= 2 && row[0].1 - row[1].1 < opts.tie_tol {
            ambiguous.push((curve.id, curve.last().t));
        }
    }
    let mut chosen = Vec::new();
    let mut used_a = vec![false; active.len()];
    let mut used_c = vec![false; cands.len()];
    loop {
        let best = pairs
            .iter()
            .filter(|q| !used_a[q.0] && !used_c[q.1])
            .map(|q| q.2)
            .fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            break;
        }
        // Among near-ties, prefer eigenvalue proximity, then index order.
        let pick = pairs
            .iter()
            .filter(|q| !used_a[q.0] && !used_c[q.1] && q.2 >= best - opts.tie_tol)
            .min_by(|x, y| x.3.total_cmp(&y.3).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)))
            .copied()
            .expect("at least the best pair qualifies");
        used_a[pick.0] = true;
        used_c[pick.1] = true;
        chosen.push((pick.0, pick.1));
    }
    (chosen, ambiguous)
}

fn singular_between(report: &SweepReport, lo: Option<f64>, hi: f64) -> Option<f64> {
    let lo = lo?;
    report.singular_times.iter().copied().find(|&s| s > lo && s <= hi)
}

fn close_curve(report: &mut SweepReport, id: usize, t_prev: Option<f64>, t_next: f64, opts: SweepOptions) {
    let sing = singular_between(report, t_prev, t_next);
    let curve = &report.curves[id];
    let last = curve.last().lambda;
    let peak = curve.points.iter().fold(0.0_f64, |m, q| m.max(q.lambda.abs()));
    if curve.pre_threshold {
        report.curves[id].status = CurveStatus::PreThresholdUnlabeled;
        return;
    }
    let status = match (curve.sign, sing) {
        (Sign::Positive, Some(ts)) if last > opts.blow_up_cap * REAPPEAR_EPS => CurveStatus::BlowsUpAt(Some(ts)),
        (Sign::Positive, _) if peak > opts.blow_up_cap => {
            let after = report.singular_times.iter().copied().find(|&s| s > curve.last().t);
            CurveStatus::BlowsUpAt(after)
        }
        _ => {
            let msg = format!("curve {id} ends at t = {} without a singular time", curve.last().t);
            report.warnings.push(msg);
            CurveStatus::Unclassified
        }
    };
    report.curves[id].status = status;
}

fn birth_origin(
    report: &SweepReport,
    t_prev: Option<f64>,
    t: f64,
    cand: &Candidate,
    region_break: bool,
    opts: SweepOptions,
) -> CurveOrigin {
    if region_break {
        return CurveOrigin::GridStart;
    }
    match singular_between(report, t_prev, t) {
        Some(ts) if cand.sign == Sign::Negative && cand.lambda < -opts.blow_up_cap * REAPPEAR_EPS => {
            CurveOrigin::ReappearsFrom(ts)
        }
        _ => CurveOrigin::Appears(t),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ClassifyOptions {
    /// Relative tolerance for matching a limit value.
    pub match_tol: f64,
    pub blow_up_cap: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { match_tol: 1e-3, blow_up_cap: BLOW_UP_CAP }
    }
}

/// Assigns every curve alive at the largest grid t to one clause of the
/// large-t limit statement and checks the tallies against the limiting
/// spectrum and the negative limit count.
pub fn classify_asymptotics(
    mut report: SweepReport,
    lim: &Spectrum,
    negative_limit_count: usize,
    opts: ClassifyOptions,
) -> Result<SweepReport> {
    let t_star = report.singular_times.iter().fold(1.0_f64, |m, t| m.max(t.abs()));
    let t_large = report
        .grid
        .points
        .iter()
        .rev()
        .map(|p| p.t)
        .find(|&t| t >= 100.0 * t_star)
        .ok_or_else(|| {
            PencilError::InvalidInput(format!("the sweep must reach t >= {} for classification", 100.0 * t_star))
        })?;
    let t_ref = report
        .grid
        .points
        .iter()
        .map(|p| p.t)
        .filter(|&t| t < t_large)
        .min_by(|a, b| (a - t_large / 10.0).abs().total_cmp(&(b - t_large / 10.0).abs()))
        .unwrap_or(t_large);

    let expected = ClauseCounts {
        to_infinity: lim.infinity_multiplicity,
        to_positive_limit: lim.positives.len(),
        drains_to_zero: negative_limit_count,
        to_negative_limit: lim.negatives.len(),
    };
    let mut failures = Vec::new();
    let mut counts = ClauseCounts::default();
    let mut pos: Vec<(usize, f64)> = Vec::new();
    let mut neg: Vec<(usize, f64)> = Vec::new();
    for c in &report.curves {
        if let Some(v) = c.value_at(t_large) {
            match c.sign {
                Sign::Positive => pos.push((c.id, v)),
                Sign::Negative => neg.push((c.id, v)),
            }
        }
    }
    pos.sort_by(|a, b| a.1.total_cmp(&b.1));
    neg.sort_by(|a, b| b.1.total_cmp(&a.1));
    let matches = |v: f64, target: f64| (v - target).abs() <= opts.match_tol * target.abs().max(1.0);

    for (j, &(id, v)) in pos.iter().enumerate() {
        let reference = report.curves[id].value_at(t_ref);
        if j < expected.to_positive_limit {
            let target = lim.positives[j].lambda;
            if matches(v, target) {
                counts.to_positive_limit += 1;
                report.curves[id].status = CurveStatus::ConvergesTo(target);
                report.curves[id].clause = Some(Clause::ToPositiveLimit(j + 1));
            } else {
                failures.push(format!(
                    "positive curve {id}: value {v} at t = {t_large} does not match limit λ_{} = {target}",
                    j + 1
                ));
            }
        } else {
            let growing = reference.map_or(false, |r| v >= 2.0 * r) || v >= opts.blow_up_cap;
            if growing {
                counts.to_infinity += 1;
                report.curves[id].status = CurveStatus::BlowsUpAt(None);
                report.curves[id].clause = Some(Clause::ToInfinity);
            } else {
                failures.push(format!(
                    "positive curve {id}: value {v} at t = {t_large} neither matches a limit nor grows (value {reference:?} at t = {t_ref})"
                ));
            }
        }
    }
    for (j, &(id, v)) in neg.iter().enumerate() {
        let reference = report.curves[id].value_at(t_ref);
        if j < expected.drains_to_zero {
            let below_limits = lim.negatives.first().map_or(true, |l| v.abs() < l.lambda.abs() * (1.0 - opts.match_tol));
            let decaying = reference.map_or(false, |r| v.abs() <= 0.5 * r.abs());
            if below_limits && decaying {
                counts.drains_to_zero += 1;
                report.curves[id].status = CurveStatus::DrainsToZero;
                report.curves[id].clause = Some(Clause::DrainsToZero);
            } else {
                failures.push(format!(
                    "negative curve {id}: value {v} at t = {t_large} is not draining to zero (value {reference:?} at t = {t_ref})"
                ));
            }
        } else if j < expected.drains_to_zero + expected.to_negative_limit {
            let k = j - expected.drains_to_zero;
            let target = lim.negatives[k].lambda;
            if matches(v, target) {
                counts.to_negative_limit += 1;
                report.curves[id].status = CurveStatus::ConvergesTo(target);
                report.curves[id].clause = Some(Clause::ToNegativeLimit(k + 1));
            } else {
                failures.push(format!(
                    "negative curve {id}: value {v} at t = {t_large} does not match limit λ_-{} = {target}",
                    k + 1
                ));
            }
        } else {
            failures.push(format!("negative curve {id}: surplus negative eigenvalue {v} at t = {t_large}"));
        }
    }
    for c in &report.curves {
        if c.value_at(t_large).is_none() && c.last().t > t_large {
            failures.push(format!("curve {} starts after t_large = {t_large}", c.id));
        } else if c.value_at(t_large).is_none() && c.status == CurveStatus::Unclassified && !c.pre_threshold {
            failures.push(format!("curve {} ended at t = {} without classification", c.id, c.last().t));
        }
    }
    let reappearances = report.reappearances().len();
    report.classification = Some(Classification { t_large, counts, expected, reappearances, failures });
    Ok(report)
}

/// One row of the curve export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub curve_id: usize,
    pub t: f64,
    pub s_compactified: f64,
    pub lambda: f64,
    pub status: String,
}

pub fn curve_rows(report: &SweepReport) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for c in &report.curves {
        let label = c.label();
        for q in &c.points {
            rows.push(CurveRow { curve_id: c.id, t: q.t, s_compactified: q.s, lambda: q.lambda, status: label.clone() });
        }
    }
    rows
}

/// Writes the curves as CSV (header curve_id,t,s_compactified,lambda,status)
/// or as a JSON array of the same rows.
pub fn emit_curves(report: &SweepReport, format: Format, path: &Path) -> Result<()> {
    let rows = curve_rows(report);
    let bytes = match format {
        Format::Csv => crate::io::csv_bytes(&rows, &["curve_id", "t", "s_compactified", "lambda", "status"])?,
        Format::Json => serde_json::to_vec_pretty(&rows)?,
    };
    write_atomic(path, &bytes)
}

pub fn read_curves(path: &Path, format: Format) -> Result<Vec<CurveRow>> {
    let bytes = std::fs::read(path).map_err(|e| PencilError::io(path, e))?;
    match format {
        Format::Csv => {
            let mut rdr = csv::Reader::from_reader(bytes.as_slice());
            let mut out = Vec::new();
            for r in rdr.deserialize() {
                out.push(r?);
            }
            Ok(out)
        }
        Format::Json => Ok(serde_json::from_slice(&bytes)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pencil::reference_5x5;

    fn reference_report() -> SweepReport {
        let p = reference_5x5();
        let grid = make_grid(-1e4, 1e6, 400, &p, GridOptions::default()).unwrap();
        let report = sweep(&p, &grid, SweepOptions::default()).unwrap();
        let lim = p.limiting_spectrum().unwrap();
        classify_asymptotics(report, &lim, p.negative_limit_count(), ClassifyOptions::default()).unwrap()
    }

    #[test]
    fn compactification_round_trip() {
        for t in [-1e6, -3.0, 0.0, 0.5, 1e8] {
            let s = compactify(t, 2.0);
            assert!(s > -1.0 && s < 1.0);
            assert!((decompactify(s, 2.0) - t).abs() <= 1e-7 * t.abs().max(1.0));
        }
    }

    #[test]
    fn grid_is_refined_around_singular_time() {
        let p = reference_5x5();
        let g = make_grid(-10.0, 10.0, 50, &p, GridOptions::default()).unwrap();
        let ts = g.ts();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert!(ts.iter().any(|&t| (t - (0.5 + 1.0 / 256.0)).abs() < 1e-15));
        assert!(!ts.iter().any(|&t| t == 0.5));
        assert!(make_grid(1.0, 1.0, 10, &p, GridOptions::default()).is_err());
        assert!(make_grid(0.0, 1.0, 1, &p, GridOptions::default()).is_err());
    }

    #[test]
    fn reference_pencil_clause_counts() {
        let r = reference_report();
        let cl = r.classification.as_ref().unwrap();
        assert!(cl.passed(), "{:?}", cl.failures);
        assert_eq!(
            cl.counts,
            ClauseCounts { to_infinity: 1, to_positive_limit: 1, drains_to_zero: 2, to_negative_limit: 1 }
        );
        assert_eq!(cl.reappearances, 1);
    }

    #[test]
    fn decoupled_curve_blows_up_and_reappears() {
        let r = reference_report();
        let blow: Vec<_> = r.curves.iter().filter(|c| c.status == CurveStatus::BlowsUpAt(Some(0.5))).collect();
        assert_eq!(blow.len(), 1);
        let back = r.reappearances();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].origin, CurveOrigin::ReappearsFrom(0.5));
        assert_eq!(back[0].status, CurveStatus::DrainsToZero);
        for q in &back[0].points {
            assert!((q.lambda - 1.0 / (1.0 - 2.0 * q.t)).abs() <= 1e-8 * q.lambda.abs());
        }
    }

    #[test]
    fn export_round_trip() {
        let r = reference_report();
        let dir = tempfile::tempdir().unwrap();
        for f in [Format::Csv, Format::Json] {
            let path = dir.path().join(format!("curves.{}", f.extension()));
            emit_curves(&r, f, &path).unwrap();
            let rows = read_curves(&path, f).unwrap();
            assert_eq!(rows, curve_rows(&r));
        }
        let empty = SweepReport::empty(Mode::Fixed);
        let path = dir.path().join("empty.csv");
        emit_curves(&empty, Format::Csv, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().trim(), "curve_id,t,s_compactified,lambda,status");
    }
}
