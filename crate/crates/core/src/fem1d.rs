//! Galerkin assembly of one-dimensional weighted eigenproblems: linear
//! elements for second-order operators, C¹ Hermite cubics for beams.
//!
//! Degrees of freedom: node i carries dof i for linear elements, and dofs
//! 2i (value) and 2i + 1 (slope) for Hermite elements.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PencilError, Result};
use crate::linalg::SymMatrix;
use crate::pencil::{Mode, Pencil};
use crate::sturm1d;

/// Relative tolerance for snapping the interface onto an existing node.
const SNAP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh1D {
    pub nodes: Vec<f64>,
    pub interface_node: Option<usize>,
}

impl Mesh1D {
    pub fn n_elems(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    /// Largest element length.
    pub fn h(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Uniform mesh with nElems elements; an interface point that is not already
/// a node is inserted as one.
pub fn make_mesh(x_min: f64, x_max: f64, n_elems: usize, interface_x: Option<f64>) -> Result<Mesh1D> {
    if n_elems == 0 || !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
        return Err(PencilError::InvalidInput(format!(
            "mesh needs nElems >= 1 and finite xMin < xMax (got {n_elems}, [{x_min}, {x_max}])"
        )));
    }
    let len = x_max - x_min;
    let mut nodes: Vec<f64> = (0..=n_elems).map(|i| x_min + len * i as f64 / n_elems as f64).collect();
    nodes[n_elems] = x_max;
    let interface_node = match interface_x {
        None => None,
        Some(x) => {
            if !(x > x_min && x < x_max) {
                return Err(PencilError::InvalidInput(format!("interface {x} is not inside ({x_min}, {x_max})")));
            }
            match nodes.iter().position(|&n| (n - x).abs() <= SNAP_TOL * len) {
                Some(i) => {
                    nodes[i] = x;
                    Some(i)
                }
                None => {
                    let i = nodes.partition_point(|&n| n < x);
                    nodes.insert(i, x);
                    Some(i)
                }
            }
        }
    };
    Ok(Mesh1D { nodes, interface_node })
}

/// Per-element constant weights b and c.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseWeight {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl PiecewiseWeight {
    pub fn new(b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if b.len() != c.len() || b.is_empty() {
            return Err(PencilError::DimensionMismatch(format!(
                "b has {} entries and c has {}",
                b.len(),
                c.len()
            )));
        }
        if b.iter().chain(c.iter()).any(|x| !x.is_finite()) {
            return Err(PencilError::InvalidInput("weights must be finite".into()));
        }
        if let Some(e) = c.iter().position(|&x| x < 0.0) {
            return Err(PencilError::InvalidInput(format!("c is negative on element {e}")));
        }
        if c.iter().all(|&x| x == 0.0) {
            return Err(PencilError::InvalidInput("c vanishes identically".into()));
        }
        if c.iter().all(|&x| x > 0.0) {
            return Err(PencilError::InvalidInput("{c = 0} is empty, so Ker(C) would be trivial".into()));
        }
        Ok(Self { b, c })
    }

    /// Interval-problem weights on a mesh of (−1, 1) with a node at 0: b = 1 and c = 0
    /// left of the interface, b = 0 and c = 1 right of it.
    pub fn two_sided(mesh: &Mesh1D, left: (f64, f64), right: (f64, f64)) -> Result<Self> {
        let k = mesh
            .interface_node
            .ok_or_else(|| PencilError::InvalidInput("two-sided weights need an interface node".into()))?;
        let (b, c) = (0..mesh.n_elems()).map(|e| if e < k { left } else { right }).unzip();
        Self::new(b, c)
    }
}

/// The six one-dimensional problem families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// −u″ + Vu with u = 0 at both ends; V per element.
    DirichletSchrodinger { potential: Vec<f64> },
    /// −u″ with u′ = ±αu at the ends.
    Robin { alpha: f64 },
    /// u⁗ − τu″ with u = u′ = 0 at both ends.
    ClampedBeam { tau: f64 },
    Neumann,
    FreeBeam { tau: f64 },
    /// b^t(u) = ∫u² − t(u(x_min)² + u(x_max)²).
    DynamicalBc,
}

impl ProblemKind {
    pub fn is_fourth_order(&self) -> bool {
        matches!(self, ProblemKind::ClampedBeam { .. } | ProblemKind::FreeBeam { .. })
    }

    pub fn mode(&self) -> Mode {
        match self {
            ProblemKind::DirichletSchrodinger { .. } | ProblemKind::Robin { .. } | ProblemKind::ClampedBeam { .. } => {
                Mode::Fixed
            }
            _ => Mode::Moving,
        }
    }

    fn validate(&self, n_elems: usize) -> Result<()> {
        match self {
            ProblemKind::DirichletSchrodinger { potential } => {
                if potential.len() != n_elems {
                    return Err(PencilError::DimensionMismatch(format!(
                        "potential has {} entries for {n_elems} elements",
                        potential.len()
                    )));
                }
                if potential.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(PencilError::InvalidInput("potential V must be finite and >= 0".into()));
                }
            }
            ProblemKind::Robin { alpha } if !(*alpha > 0.0) || !alpha.is_finite() => {
                return Err(PencilError::InvalidInput(format!("Robin coefficient must be > 0, got {alpha}")));
            }
            ProblemKind::ClampedBeam { tau } | ProblemKind::FreeBeam { tau } if !(*tau >= 0.0) || !tau.is_finite() => {
                return Err(PencilError::InvalidInput(format!("tension must be >= 0, got {tau}")));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Symbolic description of Ker(A).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelDescription {
    pub dim: usize,
    pub generators: Vec<String>,
}

pub fn expected_kernel(kind: &ProblemKind) -> KernelDescription {
    let gens: Vec<&str> = match kind {
        ProblemKind::Neumann | ProblemKind::DynamicalBc => vec!["1"],
        ProblemKind::FreeBeam { tau } if *tau == 0.0 => vec!["1", "x"],
        ProblemKind::FreeBeam { .. } => vec!["1"],
        _ => vec![],
    };
    KernelDescription { dim: gens.len(), generators: gens.into_iter().map(String::from).collect() }
}

// Element matrices on an element of length h.

fn p1_stiffness(h: f64) -> [[f64; 2]; 2] {
    [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]]
}

fn p1_mass(h: f64) -> [[f64; 2]; 2] {
    [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]]
}

fn hermite_mass(h: f64) -> [[f64; 4]; 4] {
    let s = h / 420.0;
    [
        [156.0 * s, 22.0 * h * s, 54.0 * s, -13.0 * h * s],
        [22.0 * h * s, 4.0 * h * h * s, 13.0 * h * s, -3.0 * h * h * s],
        [54.0 * s, 13.0 * h * s, 156.0 * s, -22.0 * h * s],
        [-13.0 * h * s, -3.0 * h * h * s, -22.0 * h * s, 4.0 * h * h * s],
    ]
}

/// ∫ u′v′.
fn hermite_k1(h: f64) -> [[f64; 4]; 4] {
    let s = 1.0 / (30.0 * h);
    [
        [36.0 * s, 3.0 * h * s, -36.0 * s, 3.0 * h * s],
        [3.0 * h * s, 4.0 * h * h * s, -3.0 * h * s, -h * h * s],
        [-36.0 * s, -3.0 * h * s, 36.0 * s, -3.0 * h * s],
        [3.0 * h * s, -h * h * s, -3.0 * h * s, 4.0 * h * h * s],
    ]
}

/// ∫ u″v″.
fn hermite_k2(h: f64) -> [[f64; 4]; 4] {
    let s = 1.0 / (h * h * h);
    [
        [12.0 * s, 6.0 * h * s, -12.0 * s, 6.0 * h * s],
        [6.0 * h * s, 4.0 * h * h * s, -6.0 * h * s, 2.0 * h * h * s],
        [-12.0 * s, -6.0 * h * s, 12.0 * s, -6.0 * h * s],
        [6.0 * h * s, 2.0 * h * h * s, -6.0 * h * s, 4.0 * h * h * s],
    ]
}

/// Global matrices before boundary elimination.
struct Forms {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    g: DMatrix<f64>,
    per_node: usize,
}

fn scatter<const N: usize>(m: &mut DMatrix<f64>, dofs: [usize; N], local: &[[f64; N]; N], w: f64) {
    if w == 0.0 {
        return;
    }
    for i in 0..N {
        for j in 0..N {
            m[(dofs[i], dofs[j])] += w * local[i][j];
        }
    }
}

/// Assembles over the elements selected by `active`.
fn assemble_forms(kind: &ProblemKind, mesh: &Mesh1D, w: Option<&PiecewiseWeight>, active: &[bool]) -> Forms {
    let fourth = kind.is_fourth_order();
    let per_node = if fourth { 2 } else { 1 };
    let n = per_node * mesh.nodes.len();
    let z = || DMatrix::zeros(n, n);
    let (mut a, mut b, mut c, mut g) = (z(), z(), z(), z());
    for e in 0..mesh.n_elems() {
        if !active[e] {
            continue;
        }
        let (x0, x1) = mesh.element(e);
        let h = x1 - x0;
        let (bw, cw) = match (kind, w) {
            (ProblemKind::DynamicalBc, _) => (1.0, 0.0),
            (_, Some(w)) => (w.b[e], w.c[e]),
            (_, None) => (1.0, 0.0),
        };
        if fourth {
            let dofs = [2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3];
            let tau = match kind {
                ProblemKind::ClampedBeam { tau } | ProblemKind::FreeBeam { tau } => *tau,
                _ => 0.0,
            };
            let (m, k1, k2) = (hermite_mass(h), hermite_k1(h), hermite_k2(h));
            scatter(&mut a, dofs, &k2, 1.0);
            scatter(&mut a, dofs, &k1, tau);
            scatter(&mut b, dofs, &m, bw);
            scatter(&mut c, dofs, &m, cw);
            scatter(&mut g, dofs, &k2, 1.0);
            scatter(&mut g, dofs, &k1, 1.0);
            scatter(&mut g, dofs, &m, 1.0);
        } else {
            let dofs = [e, e + 1];
            let (m, k) = (p1_mass(h), p1_stiffness(h));
            scatter(&mut a, dofs, &k, 1.0);
            if let ProblemKind::DirichletSchrodinger { potential } = kind {
                scatter(&mut a, dofs, &m, potential[e]);
            }
            scatter(&mut b, dofs, &m, bw);
            scatter(&mut c, dofs, &m, cw);
            scatter(&mut g, dofs, &k, 1.0);
            scatter(&mut g, dofs, &m, 1.0);
        }
    }
    Forms { a, b, c, g, per_node }
}

fn sym(m: DMatrix<f64>) -> SymMatrix {
    SymMatrix::new(m).expect("assembled matrices are symmetric")
}

fn check_weight(mesh: &Mesh1D, w: &PiecewiseWeight) -> Result<()> {
    if w.b.len() != mesh.n_elems() {
        return Err(PencilError::DimensionMismatch(format!(
            "weights have {} entries for {} elements",
            w.b.len(),
            mesh.n_elems()
        )));
    }
    Ok(())
}

/// Dofs that survive elimination, given the nodes whose value (and, for
/// beams, slope) is constrained.
fn kept_dofs(n_dofs: usize, per_node: usize, value_fixed: &[usize], slope_fixed: &[usize]) -> Vec<usize> {
    (0..n_dofs)
        .filter(|&d| {
            let node = d / per_node;
            let is_slope = per_node == 2 && d % 2 == 1;
            !(if is_slope { slope_fixed.contains(&node) } else { value_fixed.contains(&node) })
        })
        .collect()
}

fn select(m: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(keep.len(), keep.len(), |i, j| m[(keep[i], keep[j])])
}

/// Galerkin pencil for the given problem, weights and mesh.
pub fn assemble(kind: &ProblemKind, mesh: &Mesh1D, w: &PiecewiseWeight) -> Result<Pencil> {
    kind.validate(mesh.n_elems())?;
    if *kind != ProblemKind::DynamicalBc {
        check_weight(mesh, w)?;
    }
    let active = vec![true; mesh.n_elems()];
    let mut f = assemble_forms(kind, mesh, Some(w), &active);
    let last = mesh.nodes.len() - 1;
    let n_dofs = f.a.nrows();
    let ends = [0, last];
    let keep = match kind {
        ProblemKind::DirichletSchrodinger { .. } => kept_dofs(n_dofs, 1, &ends, &[]),
        ProblemKind::ClampedBeam { .. } => kept_dofs(n_dofs, 2, &ends, &ends),
        ProblemKind::Robin { alpha } => {
            f.a[(0, 0)] += alpha;
            f.a[(last, last)] += alpha;
            (0..n_dofs).collect()
        }
        ProblemKind::DynamicalBc => {
            f.c[(0, 0)] = 1.0;
            f.c[(last, last)] = 1.0;
            (0..n_dofs).collect()
        }
        _ => (0..n_dofs).collect(),
    };
    if keep.is_empty() {
        return Err(PencilError::InvalidInput("no degrees of freedom left after elimination".into()));
    }
    let (a, b, c, g) = (
        sym(select(&f.a, &keep)),
        sym(select(&f.b, &keep)),
        sym(select(&f.c, &keep)),
        sym(select(&f.g, &keep)),
    );
    match kind.mode() {
        Mode::Fixed => Pencil::new(a, b, c, Some(g), Mode::Fixed),
        Mode::Moving => {
            let ker = kernel_generators(kind, mesh, f.per_node);
            Pencil::with_kernel(a, b, c, g, ker)
        }
    }
}

/// Nodal coefficients of the generators listed by `expected_kernel`.
pub fn kernel_generators(kind: &ProblemKind, mesh: &Mesh1D, per_node: usize) -> DMatrix<f64> {
    let desc = expected_kernel(kind);
    let n = per_node * mesh.nodes.len();
    DMatrix::from_fn(n, desc.dim, |d, j| {
        let node = d / per_node;
        let is_slope = per_node == 2 && d % 2 == 1;
        match (desc.generators[j].as_str(), is_slope) {
            ("1", false) => 1.0,
            ("1", true) => 0.0,
            (_, false) => mesh.nodes[node],
            (_, true) => 1.0,
        }
    })
}

/// The limiting problem on {c = 0}: the same forms restricted to those
/// elements, with u = 0 (and u′ = 0 for beams) imposed on the interface
/// and the outer boundary conditions kept. For the dynamical boundary
/// condition the limit is the Dirichlet problem on the whole interval.
pub fn assemble_limiting(kind: &ProblemKind, mesh: &Mesh1D, w: &PiecewiseWeight) -> Result<Pencil> {
    kind.validate(mesh.n_elems())?;
    let last = mesh.nodes.len() - 1;
    let active: Vec<bool> = match kind {
        ProblemKind::DynamicalBc => vec![true; mesh.n_elems()],
        _ => {
            check_weight(mesh, w)?;
            w.c.iter().map(|&c| c == 0.0).collect()
        }
    };
    if !active.iter().any(|&x| x) {
        return Err(PencilError::InvalidInput("{c = 0} is empty".into()));
    }
    let mut f = assemble_forms(kind, mesh, Some(w), &active);
    let touches = |node: usize, want: bool| {
        (node > 0 && active[node - 1] == want) || (node < mesh.n_elems() && active[node] == want)
    };
    let inside: Vec<usize> = (0..=last).filter(|&i| touches(i, true)).collect();
    let mut fixed: Vec<usize> = inside.iter().copied().filter(|&i| touches(i, false)).collect();
    let outer: Vec<usize> = [0, last].into_iter().filter(|i| inside.contains(i)).collect();
    match kind {
        ProblemKind::DirichletSchrodinger { .. } | ProblemKind::ClampedBeam { .. } | ProblemKind::DynamicalBc => {
            fixed.extend(outer.iter().copied())
        }
        ProblemKind::Robin { alpha } => {
            for &i in &outer {
                f.a[(i, i)] += alpha;
            }
        }
        _ => {}
    }
    let per_node = f.per_node;
    let candidates: Vec<usize> = (0..f.a.nrows()).filter(|d| inside.contains(&(d / per_node))).collect();
    let slope_fixed: &[usize] = if per_node == 2 { &fixed } else { &[] };
    let keep: Vec<usize> = kept_dofs(f.a.nrows(), per_node, &fixed, slope_fixed)
        .into_iter()
        .filter(|d| candidates.contains(d))
        .collect();
    if keep.is_empty() {
        return Err(PencilError::InvalidInput("the limiting problem has no degrees of freedom".into()));
    }
    Pencil::limiting_problem(sym(select(&f.a, &keep)), sym(select(&f.b, &keep)), Some(sym(select(&f.g, &keep))))
}

/// JSON problem description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: KindName,
    #[serde(default)]
    pub params: Params,
    pub domain: [f64; 2],
    #[serde(rename = "nElems")]
    pub n_elems: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interface: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    DirichletSchrodinger,
    Robin,
    ClampedBeam,
    Neumann,
    FreeBeam,
    DynamicalBc,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, rename = "V", skip_serializing_if = "Option::is_none")]
    pub potential: Option<Vec<f64>>,
}

/// Expands a piecewise-constant array: one entry is a constant, two are the
/// values left and right of the interface, otherwise one per element.
fn expand(values: &[f64], mesh: &Mesh1D, what: &str) -> Result<Vec<f64>> {
    let n = mesh.n_elems();
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        2 if n != 2 => {
            let k = mesh.interface_node.ok_or_else(|| {
                PencilError::InvalidInput(format!("two-valued {what} needs an interface"))
            })?;
            Ok((0..n).map(|e| if e < k { values[0] } else { values[1] }).collect())
        }
        len if len == n => Ok(values.to_vec()),
        len => Err(PencilError::DimensionMismatch(format!(
            "{what} has {len} entries; expected 1, 2 or {n} (the element count after snapping)"
        ))),
    }
}

impl ProblemConfig {
    /// The interval setup: Neumann on (−1, 1), b = 1 on the left half and
    /// c = 1 on the right half.
    pub fn fig2(n_elems: usize) -> Self {
        Self {
            kind: KindName::Neumann,
            params: Params::default(),
            domain: [-1.0, 1.0],
            n_elems,
            interface: Some(0.0),
            b: Some(vec![1.0, 0.0]),
            c: Some(vec![0.0, 1.0]),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PencilError::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn with_n_elems(&self, n_elems: usize) -> Self {
        Self { n_elems, ..self.clone() }
    }

    pub fn mesh(&self) -> Result<Mesh1D> {
        make_mesh(self.domain[0], self.domain[1], self.n_elems, self.interface)
    }

    pub fn problem_kind(&self, mesh: &Mesh1D) -> Result<ProblemKind> {
        let need = |x: Option<f64>, name: &str| {
            x.ok_or_else(|| PencilError::InvalidInput(format!("params.{name} is required for {:?}", self.kind)))
        };
        Ok(match self.kind {
            KindName::DirichletSchrodinger => ProblemKind::DirichletSchrodinger {
                potential: match &self.params.potential {
                    Some(v) => expand(v, mesh, "V")?,
                    None => vec![0.0; mesh.n_elems()],
                },
            },
            KindName::Robin => ProblemKind::Robin { alpha: need(self.params.alpha, "alpha")? },
            KindName::ClampedBeam => ProblemKind::ClampedBeam { tau: self.params.tau.unwrap_or(0.0) },
            KindName::Neumann => ProblemKind::Neumann,
            KindName::FreeBeam => ProblemKind::FreeBeam { tau: self.params.tau.unwrap_or(0.0) },
            KindName::DynamicalBc => ProblemKind::DynamicalBc,
        })
    }

    pub fn weights(&self, mesh: &Mesh1D) -> Result<PiecewiseWeight> {
        if self.kind == KindName::DynamicalBc {
            // B is the mass matrix and C the boundary matrix; b and c are ignored.
            let n = mesh.n_elems();
            return Ok(PiecewiseWeight { b: vec![1.0; n], c: vec![0.0; n] });
        }
        let b = self.b.as_deref().ok_or_else(|| PencilError::InvalidInput("weight b is required".into()))?;
        let c = self.c.as_deref().ok_or_else(|| PencilError::InvalidInput("weight c is required".into()))?;
        PiecewiseWeight::new(expand(b, mesh, "b")?, expand(c, mesh, "c")?)
    }

    pub fn assemble(&self) -> Result<Pencil> {
        let mesh = self.mesh()?;
        assemble(&self.problem_kind(&mesh)?, &mesh, &self.weights(&mesh)?)
    }

    pub fn assemble_limiting(&self) -> Result<Pencil> {
        let mesh = self.mesh()?;
        assemble_limiting(&self.problem_kind(&mesh)?, &mesh, &self.weights(&mesh)?)
    }

    /// True for the Neumann interval setup, where the shooting solution is exact.
    pub fn is_fig2(&self) -> bool {
        let Ok(mesh) = self.mesh() else { return false };
        let Ok(w) = self.weights(&mesh) else { return false };
        let k = mesh.interface_node.map(|k| mesh.nodes[k]);
        self.kind == KindName::Neumann
            && self.domain == [-1.0, 1.0]
            && k == Some(0.0)
            && mesh
                .nodes
                .windows(2)
                .zip(w.b.iter().zip(w.c.iter()))
                .all(|(x, (&b, &c))| if x[1] <= 0.0 { b == 1.0 && c == 0.0 } else { b == 0.0 && c == 1.0 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_elems: usize,
    pub h: f64,
    pub t: f64,
    pub lambda1: f64,
    pub reference: Option<f64>,
    pub error: Option<f64>,
    /// Observed order from this and the previous mesh at the same t.
    pub order: Option<f64>,
}

/// λ_1^t on a sequence of meshes for every t. The order is measured against
/// the shooting reference when one exists, otherwise by Richardson
/// extrapolation over three consecutive meshes.
pub fn convergence_study(config: &ProblemConfig, n_elems: &[usize], ts: &[f64]) -> Result<Vec<ConvergenceRow>> {
    if n_elems.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PencilError::InvalidInput("mesh sizes must decrease (element counts increase)".into()));
    }
    let fig2 = config.is_fig2();
    let jobs: Vec<(usize, f64)> = ts.iter().flat_map(|&t| n_elems.iter().map(move |&n| (n, t))).collect();
    let values: Vec<(usize, f64, f64, f64)> = jobs
        .par_iter()
        .map(|&(n, t)| {
            let ctx = |e: PencilError| PencilError::Numerical(format!("nElems = {n}, t = {t}: {e}"));
            let cfg = config.with_n_elems(n);
            let mesh = cfg.mesh().map_err(ctx)?;
            let p = cfg.assemble().map_err(ctx)?;
            let s = p.spectrum_at(t).map_err(ctx)?;
            let l = s.positives.first().map(|e| e.lambda).ok_or_else(|| {
                PencilError::Numerical(format!("nElems = {n}, t = {t}: no positive eigenvalue"))
            })?;
            Ok((n, t, mesh.h(), l))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(values.len());
    for (i, &(n, t, h, l)) in values.iter().enumerate() {
        let reference = if fig2 && t > 1.0 { Some(sturm1d::first_positive_eig(t)?) } else { None };
        let error = reference.map(|r| (l - r).abs());
        let same_t = i > 0 && values[i - 1].1 == t;
        let order = match (reference, same_t) {
            (Some(_), true) => {
                let prev = &rows[i - 1];
                Some((prev.error.unwrap() / error.unwrap()).ln() / (prev.h / h).ln())
            }
            (None, true) if i > 1 && values[i - 2].1 == t => {
                let (l0, l1) = (values[i - 2].3, values[i - 1].3);
                Some(((l0 - l1) / (l1 - l)).abs().ln() / (values[i - 1].2 / h).ln())
            }
            _ => None,
        };
        rows.push(ConvergenceRow { n_elems: n, h, t, lambda1: l, reference, error, order });
    }
    Ok(rows)
}
