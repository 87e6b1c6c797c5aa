//! Closed-form principal eigenpair of −u″ = λ b^t u on (−1, 1) with Neumann
//! ends and weight b^t = 1 on (−1, 0), −t on (0, 1), plus its limiting mixed
//! problem on (−1, 0).
//!
//! The eigenfunction is u = L cos(√λ (x+1)) on the left half and
//! u = R cosh(√(λt) (x−1)) on the right half; matching value and slope at 0
//! gives √λ tan √λ = √(λt) tanh √(λt).

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PencilError, Result};
use crate::io::{csv_bytes, write_atomic};

/// Bisection stops short of the pole of tan by this much in √λ.
pub const POLE_MARGIN: f64 = 1e-9;
/// Width of the final bisection bracket in λ.
pub const BISECTION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingEigenpair {
    pub t: f64,
    pub lambda: f64,
    /// L in the left-hand form; 1 under L∞ normalization.
    pub left_amplitude: f64,
    /// R = cos √λ / cosh √(λt); may underflow to zero for very large t.
    pub right_amplitude: f64,
}

/// f(λ) = √λ tan √λ − √(λt) tanh √(λt).
pub fn matching_residual(lambda: f64, t: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(t > 0.0) || !lambda.is_finite() || !t.is_finite() {
        return Err(PencilError::InvalidInput(format!("need λ > 0 and t > 0, got λ = {lambda}, t = {t}")));
    }
    let k = lambda.sqrt();
    if k.cos().abs() < 1e-12 {
        return Err(PencilError::PoleProximity { sqrt_lambda: k });
    }
    let y = (lambda * t).sqrt();
    Ok(k * k.tan() - y * y.tanh())
}

/// Principal eigenvalue, the unique root of the matching residual in
/// (0, (π/2)²).
pub fn first_positive_eig(t: f64) -> Result<f64> {
    if !(t > 1.0) || !t.is_finite() {
        return Err(PencilError::NoPrincipalRoot { t });
    }
    // f ~ λ(1 − t) < 0 near 0 and f → +∞ at the pole.
    let mut lo = 0.0_f64;
    let mut hi = (FRAC_PI_2 - POLE_MARGIN).powi(2);
    if matching_residual(hi, t)? <= 0.0 {
        return Err(PencilError::Numerical(format!("no sign change below the pole at t = {t}")));
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if matching_residual(mid, t)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// j-th eigenvalue of −u″ = λu on (−1, 0) with u′(−1) = 0, u(0) = 0.
pub fn limiting_eig(j: usize) -> Result<f64> {
    if j == 0 {
        return Err(PencilError::InvalidInput("eigenvalue indices start at 1".into()));
    }
    Ok(((2 * j - 1) as f64 * FRAC_PI_2).powi(2))
}

/// L∞-normalized principal eigenpair.
pub fn shooting_pair(t: f64) -> Result<ShootingEigenpair> {
    let lambda = first_positive_eig(t)?;
    let (k, y) = (lambda.sqrt(), (lambda * t).sqrt());
    Ok(ShootingEigenpair { t, lambda, left_amplitude: 1.0, right_amplitude: k.cos() / y.cosh() })
}

/// cosh(y(x−1)) / cosh(y) for x in [0, 1], without overflow.
fn cosh_ratio(y: f64, x: f64) -> f64 {
    (-y * x).exp() * (1.0 + (-2.0 * y * (1.0 - x)).exp()) / (1.0 + (-2.0 * y).exp())
}

fn sinh_ratio(y: f64, x: f64) -> f64 {
    (-y * x).exp() * (1.0 - (-2.0 * y * (1.0 - x)).exp()) / (1.0 + (-2.0 * y).exp())
}

impl ShootingEigenpair {
    fn rates(&self) -> (f64, f64) {
        (self.lambda.sqrt(), (self.lambda * self.t).sqrt())
    }

    /// u(x) for x in [−1, 1].
    pub fn value(&self, x: f64) -> f64 {
        let (k, y) = self.rates();
        if x <= 0.0 {
            self.left_amplitude * (k * (x + 1.0)).cos()
        } else {
            self.left_amplitude * k.cos() * cosh_ratio(y, x)
        }
    }

    /// u′(x) for x in [−1, 1]; the right-hand limit at 0 is taken for x = 0⁺
    /// through `slope_jump`.
    pub fn derivative(&self, x: f64) -> f64 {
        let (k, y) = self.rates();
        if x <= 0.0 {
            -self.left_amplitude * k * (k * (x + 1.0)).sin()
        } else {
            -self.left_amplitude * k.cos() * y * sinh_ratio(y, x)
        }
    }

    /// (|u(0⁻) − u(0⁺)|, |u′(0⁻) − u′(0⁺)|).
    pub fn continuity_defects(&self) -> (f64, f64) {
        let (k, y) = self.rates();
        let value_right = self.left_amplitude * k.cos();
        let slope_left = -self.left_amplitude * k * k.sin();
        let slope_right = -self.left_amplitude * k.cos() * y * y.tanh();
        ((self.value(0.0) - value_right).abs(), (slope_left - slope_right).abs())
    }

    /// a(u) = ∫ u′² over (−1, 1).
    pub fn energy(&self) -> f64 {
        let (k, y) = self.rates();
        let l2 = self.left_amplitude.powi(2);
        let left = l2 * k * k * (0.5 - (2.0 * k).sin() / (4.0 * k));
        // R² y² ∫₀¹ sinh²(ys) ds with R = cos k / cosh y.
        let right = l2 * k.cos().powi(2) * y * y * (y.tanh() / (2.0 * y) - 0.5 / y.cosh().powi(2));
        left + right
    }

    /// c(u) = ∫₀¹ u².
    pub fn right_mass(&self) -> f64 {
        let (k, y) = self.rates();
        self.left_amplitude.powi(2) * k.cos().powi(2) * (y.tanh() / (2.0 * y) + 0.5 / y.cosh().powi(2))
    }
}

/// Samples u at sorted points of [−1, 1].
pub fn eigenfunction_sample(pair: &ShootingEigenpair, xs: &[f64]) -> Result<Vec<f64>> {
    if let Some(x) = xs.iter().find(|x| !(-1.0..=1.0).contains(*x)) {
        return Err(PencilError::InvalidInput(format!("sample point {x} outside [-1, 1]")));
    }
    if xs.windows(2).any(|w| w[0] > w[1]) {
        return Err(PencilError::InvalidInput("sample points must be sorted".into()));
    }
    Ok(xs.iter().map(|&x| pair.value(x)).collect())
}

/// u(0) of the L∞-normalized principal eigenfunction.
pub fn interface_value(t: f64) -> Result<f64> {
    Ok(shooting_pair(t)?.value(0.0))
}

/// t · c(u) for the a-normalized principal eigenfunction.
pub fn drain_quantity(t: f64) -> Result<f64> {
    let p = shooting_pair(t)?;
    Ok(t * p.right_mass() / p.energy())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrincipalRow {
    pub t: f64,
    pub lambda: f64,
    pub u0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub x: f64,
    pub u: f64,
}

pub fn principal_table(ts: &[f64]) -> Result<Vec<PrincipalRow>> {
    ts.par_iter()
        .map(|&t| {
            let p = shooting_pair(t)?;
            Ok(PrincipalRow { t, lambda: p.lambda, u0: p.value(0.0) })
        })
        .collect()
}

/// n + 1 equispaced points of [−1, 1].
pub fn uniform_samples(n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect()
}

pub fn write_principal_csv(rows: &[PrincipalRow], path: &Path) -> Result<()> {
    write_atomic(path, &csv_bytes(rows, &["t", "lambda", "u0"])?)
}

pub fn write_sample_csv(pair: &ShootingEigenpair, xs: &[f64], path: &Path) -> Result<()> {
    let us = eigenfunction_sample(pair, xs)?;
    let rows: Vec<SampleRow> = xs.iter().zip(us).map(|(&x, u)| SampleRow { x, u }).collect();
    write_atomic(path, &csv_bytes(&rows, &["x", "u"])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_root_at_t_one() {
        for i in 1..200 {
            let lambda = 2.4674 * i as f64 / 200.0;
            assert!(matching_residual(lambda, 1.0).unwrap() > 0.0);
        }
        assert!(matches!(first_positive_eig(1.0), Err(PencilError::NoPrincipalRoot { .. })));
        assert!(matches!(first_positive_eig(0.3), Err(PencilError::NoPrincipalRoot { .. })));
    }

    #[test]
    fn small_lambda_sign() {
        for t in [0.5, 3.0] {
            let l = 1e-6;
            let f = matching_residual(l, t).unwrap();
            assert!((f / (l * (1.0 - t)) - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn pole_is_flagged() {
        assert!(matches!(matching_residual(FRAC_PI_2.powi(2), 2.0), Err(PencilError::PoleProximity { .. })));
        assert!(matching_residual(-1.0, 2.0).is_err());
    }

    #[test]
    fn bracket_at_large_t() {
        let l = first_positive_eig(1e5).unwrap();
        assert!(matching_residual(l - 1e-6, 1e5).unwrap() < 0.0);
        assert!(matching_residual(l + 1e-6, 1e5).unwrap() > 0.0);
    }

    #[test]
    fn t_one_and_a_half() {
        let l = first_positive_eig(1.5).unwrap();
        assert!((l.sqrt() - 0.708).abs() < 2e-3, "{}", l.sqrt());
        assert!((l - 0.501).abs() < 3e-3);
    }

    #[test]
    fn approach_to_limit() {
        let lim = limiting_eig(1).unwrap();
        assert!((lim - 2.467401100272339).abs() < 1e-12);
        assert!((limiting_eig(2).unwrap() - 22.2066099024).abs() < 1e-8);
        assert!(limiting_eig(0).is_err());
        // The deficit behaves like π/√t.
        for t in [1e4, 1e5, 1e8] {
            let d = lim - first_positive_eig(t).unwrap();
            assert!(d > 0.0);
            assert!((d * t.sqrt() / std::f64::consts::PI - 1.0).abs() < 0.05, "t = {t}: {d}");
        }
    }

    #[test]
    fn monotone_and_bounded() {
        let mut prev = 0.0;
        for t in [1.01, 1.5, 2.0, 5.0, 100.0, 1e5, 1e7] {
            let l = first_positive_eig(t).unwrap();
            assert!(l > prev && l < FRAC_PI_2.powi(2));
            prev = l;
        }
    }

    #[test]
    fn eigenfunction_shape() {
        for t in [1.5, 5.0, 100.0, 1e5] {
            let p = shooting_pair(t).unwrap();
            let (dv, ds) = p.continuity_defects();
            assert!(dv < 1e-10 && ds < 1e-10, "t = {t}: {dv} {ds}");
            assert_eq!(p.derivative(-1.0), 0.0);
            assert!(p.derivative(1.0).abs() < 1e-12);
            assert_eq!(p.value(-1.0), 1.0);
            let xs = uniform_samples(400);
            let us = eigenfunction_sample(&p, &xs).unwrap();
            assert!(us.iter().all(|u| *u > 0.0 && *u <= 1.0));
            if t < 1e3 {
                assert!((p.value(1.0) - p.right_amplitude).abs() < 1e-14);
            }
        }
        let p = shooting_pair(1e5).unwrap();
        let xs: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        assert!(eigenfunction_sample(&p, &xs).unwrap().iter().all(|u| u.abs() < 0.05));
        assert!(eigenfunction_sample(&p, &[1.5]).is_err());
        assert!(eigenfunction_sample(&p, &[0.5, 0.1]).is_err());
    }

    #[test]
    fn interface_values() {
        let u: Vec<f64> = [1.5, 5.0, 100.0, 1e5].iter().map(|&t| interface_value(t).unwrap()).collect();
        assert!(u.windows(2).all(|w| w[1] < w[0]));
        assert!(u.iter().all(|&v| v > 0.0));
        assert!(u[3] < 0.01);
    }

    #[test]
    fn energy_matches_quadrature() {
        let p = shooting_pair(5.0).unwrap();
        let n = 200_000;
        let (mut e, mut m) = (0.0, 0.0);
        for i in 0..n {
            let x = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
            e += p.derivative(x).powi(2) * 2.0 / n as f64;
            if x > 0.0 {
                m += p.value(x).powi(2) * 2.0 / n as f64;
            }
        }
        assert!((e - p.energy()).abs() < 1e-8);
        assert!((m - p.right_mass()).abs() < 1e-8);
    }

    #[test]
    fn drain_is_bounded() {
        let ts: Vec<f64> = (0..=30).map(|i| 2.0 * 10f64.powf(i as f64 * 5.7 / 30.0)).collect();
        let d: Vec<f64> = ts.iter().map(|&t| drain_quantity(t).unwrap()).collect();
        let max = d.iter().copied().fold(0.0, f64::max);
        assert!(max.is_finite() && max < 10.0);
        assert!(d.last().unwrap() < &d[0]);
    }

    #[test]
    fn csv_output() {
        let dir = tempfile::tempdir().unwrap();
        let rows = principal_table(&[1.5, 5.0]).unwrap();
        let path = dir.path().join("p.csv");
        write_principal_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,lambda,u0\n1.5,"));
        let pair = shooting_pair(5.0).unwrap();
        let path = dir.path().join("u.csv");
        write_sample_csv(&pair, &uniform_samples(4), &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 6);
    }
}
