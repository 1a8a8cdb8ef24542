//! Sampled transverse fields and Laguerre-Gaussian OAM states.
//!
//! Coordinates: column `j` maps to `x = (j - n/2)·pitch`, row `i` to
//! `y = (i - n/2)·pitch`, so the grid center is the sample `(n/2, n/2)`.
//! Azimuth is `φ = atan2(y, x)`, counter-clockwise from `+x` in that frame.
//!
//! A balanced superposition `(|−ℓ⟩ + e^{iθ}|ℓ⟩)/√2` has intensity
//! `∝ cos²(ℓφ + θ/2)`: `2ℓ` petals, one of them at `φ₀ = (−θ/(2ℓ)) mod (π/ℓ)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square sampling of the transverse plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    extent: f64,
}

impl GridSpec {
    pub const MIN_SAMPLES: usize = 64;

    pub fn new(n: usize, extent: f64) -> Result<Self> {
        if n < Self::MIN_SAMPLES || !n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "grid side must be a power of two >= {}, got {n}",
                Self::MIN_SAMPLES
            )));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::invalid(format!("grid extent must be > 0, got {extent}")));
        }
        Ok(GridSpec { n, extent })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn pitch(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    /// Physical coordinate of sample index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.pitch()
    }

    /// Fractional sample index of physical coordinate `x`.
    pub fn index_of(&self, x: f64) -> f64 {
        x / self.pitch() + (self.n / 2) as f64
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{} over {} m", self.n, self.n, self.extent)
    }
}

/// Complex amplitude sampled on a [`GridSpec`], row-major.
///
/// Units are √W/m, so `norm_sqr()` is the carried power (1 when normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field has {} samples, grid {grid} needs {}",
                data.len(),
                grid.len()
            )));
        }
        if data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("field contains non-finite samples"));
        }
        Ok(ComplexField { grid, data })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        ComplexField {
            grid,
            data: vec![Complex64::default(); grid.len()],
        }
    }

    /// Builds a field from a function of physical `(x, y)`.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let n = grid.n();
        let mut data = Vec::with_capacity(grid.len());
        for i in 0..n {
            let y = grid.coord(i);
            for j in 0..n {
                data.push(f(grid.coord(j), y));
            }
        }
        Self::new(grid, data)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Sample at `(row, col)`.
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.grid.n() + col]
    }

    /// `Σ|a|²·pitch²`.
    pub fn norm_sqr(&self) -> f64 {
        let p2 = self.grid.pitch().powi(2);
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * p2
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Rescaled to unit power by the discrete sum.
    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm_sqr();
        if !(norm > 0.0) {
            return Err(Error::invalid("cannot normalize a field with zero power"));
        }
        let s = norm.sqrt().recip();
        self.data.iter_mut().for_each(|v| *v *= s);
        Ok(self)
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.data.iter_mut().for_each(|v| *v *= factor);
        self
    }

    /// Intensity-weighted centroid `(x, y)` in meters.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.grid.n();
        let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let y = self.grid.coord(i);
            for j in 0..n {
                let w = self.data[i * n + j].norm_sqr();
                sx += w * self.grid.coord(j);
                sy += w * y;
                s += w;
            }
        }
        if s > 0.0 {
            (sx / s, sy / s)
        } else {
            (0.0, 0.0)
        }
    }

    /// Second-moment beam radius `sqrt(2⟨r²⟩)` about the centroid.
    ///
    /// Equals `w` for a Gaussian and `w·sqrt(2p+|ℓ|+1)` for an LG mode.
    pub fn beam_radius(&self) -> f64 {
        let n = self.grid.n();
        let (cx, cy) = self.centroid();
        let (mut sr, mut s) = (0.0, 0.0);
        for i in 0..n {
            let dy = self.grid.coord(i) - cy;
            for j in 0..n {
                let w = self.data[i * n + j].norm_sqr();
                let dx = self.grid.coord(j) - cx;
                sr += w * (dx * dx + dy * dy);
                s += w;
            }
        }
        if s > 0.0 {
            (2.0 * sr / s).sqrt()
        } else {
            0.0
        }
    }

    pub(crate) fn check_same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid.to_string(),
                right: other.grid.to_string(),
            });
        }
        Ok(())
    }
}

/// Laguerre-Gaussian mode parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LGModeSpec {
    pub ell: i32,
    pub p: u32,
    pub waist: f64,
    pub wavelength: f64,
}

impl LGModeSpec {
    pub fn new(ell: i32, p: u32, waist: f64, wavelength: f64) -> Result<Self> {
        let spec = LGModeSpec {
            ell,
            p,
            waist,
            wavelength,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.waist > 0.0 && self.waist.is_finite()) {
            return Err(Error::invalid(format!("waist must be > 0, got {}", self.waist)));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::invalid(format!(
                "wavelength must be > 0, got {}",
                self.wavelength
            )));
        }
        Ok(())
    }

    pub fn rayleigh_range(&self) -> f64 {
        PI * self.waist * self.waist / self.wavelength
    }

    /// Gaussian `1/e²` radius `w(z)`.
    pub fn width_at(&self, z: f64) -> f64 {
        self.waist * (1.0 + (z / self.rayleigh_range()).powi(2)).sqrt()
    }

    /// Second-moment radius `w(z)·sqrt(2p+|ℓ|+1)`.
    pub fn beam_radius_at(&self, z: f64) -> f64 {
        self.width_at(z) * ((2 * self.p + self.ell.unsigned_abs() + 1) as f64).sqrt()
    }
}

/// A point on the order-ℓ Bloch sphere: `√(1−w)|−ℓ⟩ + √w·e^{iθ}|ℓ⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionSpec {
    pub ell: u32,
    pub theta: f64,
    pub weight: f64,
}

impl SuperpositionSpec {
    /// Balanced superposition; `theta` is wrapped into `[0, 2π)`.
    pub fn balanced(ell: u32, theta: f64) -> Result<Self> {
        Self::new(ell, theta, 0.5)
    }

    pub fn new(ell: u32, theta: f64, weight: f64) -> Result<Self> {
        if ell < 1 {
            return Err(Error::invalid("superposition order |ℓ| must be >= 1"));
        }
        if !theta.is_finite() {
            return Err(Error::invalid("relative phase must be finite"));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::invalid(format!("weight must lie in [0, 1], got {weight}")));
        }
        Ok(SuperpositionSpec {
            ell,
            theta: wrap_tau(theta),
            weight,
        })
    }

    /// Petal orientation `(−θ/(2ℓ)) mod (π/ℓ)` in radians.
    pub fn orientation(&self) -> f64 {
        expected_orientation(self.theta, self.ell)
    }
}

/// Orientation in `[0, π/ℓ)` of the petal pattern encoding `theta`.
pub fn expected_orientation(theta: f64, ell: u32) -> f64 {
    let ell = ell as f64;
    (-theta / (2.0 * ell)).rem_euclid(PI / ell)
}

pub(crate) fn wrap_tau(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Generalized Laguerre polynomial `L_p^α(x)` by upward recurrence.
pub fn laguerre(p: u32, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if p == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..p {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Checks that `grid` resolves a mode of this waist and radius at `z`.
pub fn check_sampling(mode: &LGModeSpec, grid: &GridSpec, z: f64) -> Result<()> {
    let pitch = grid.pitch();
    if mode.waist < 8.0 * pitch * (1.0 - 1e-9) {
        return Err(Error::Sampling(format!(
            "waist {:.4e} m spans {:.2} pixels; need >= 8 (pitch {:.4e} m)",
            mode.waist,
            mode.waist / pitch,
            pitch
        )));
    }
    let radius = mode.beam_radius_at(z);
    if grid.extent() < 6.0 * radius * (1.0 - 1e-9) {
        return Err(Error::Sampling(format!(
            "extent {:.4e} m is {:.2} beam radii at z = {z} m; need >= 6 (radius {:.4e} m)",
            grid.extent(),
            grid.extent() / radius,
            radius
        )));
    }
    Ok(())
}

/// Paraxial LG amplitude at distance `z` from the waist, normalized on the grid.
///
/// Convention: envelope of `exp(i(kz − ωt))`, so the field carries
/// `exp(+ikr²/2R)` and Gouy phase `exp(−i(2p+|ℓ|+1)ζ)`, and matches
/// propagation by [`crate::channel::propagate_step`].
pub fn lg_field(mode: &LGModeSpec, grid: &GridSpec, z: f64) -> Result<ComplexField> {
    mode.validate()?;
    if !z.is_finite() {
        return Err(Error::invalid("propagation distance must be finite"));
    }
    check_sampling(mode, grid, z)?;

    let k = TAU / mode.wavelength;
    let zr = mode.rayleigh_range();
    let w = mode.width_at(z);
    let inv_r = z / (z * z + zr * zr);
    let order = (2 * mode.p + mode.ell.unsigned_abs() + 1) as f64;
    let gouy = -order * (z / zr).atan();
    let abs_ell = mode.ell.unsigned_abs() as i32;
    let alpha = abs_ell as f64;
    let ell = mode.ell as f64;

    ComplexField::from_fn(*grid, |x, y| {
        let r2 = x * x + y * y;
        let s = 2.0 * r2 / (w * w);
        let radial = s.sqrt().powi(abs_ell) * laguerre(mode.p, alpha, s) * (-r2 / (w * w)).exp();
        let phase = ell * y.atan2(x) + 0.5 * k * r2 * inv_r + gouy;
        Complex64::from_polar(radial, phase)
    })?
    .normalized()
}

/// Balanced or weighted `±ℓ` superposition at the waist plane.
pub fn superpose(
    spec: &SuperpositionSpec,
    grid: &GridSpec,
    waist: f64,
    wavelength: f64,
) -> Result<ComplexField> {
    superpose_at(spec, grid, waist, wavelength, 0.0)
}

pub fn superpose_at(
    spec: &SuperpositionSpec,
    grid: &GridSpec,
    waist: f64,
    wavelength: f64,
    z: f64,
) -> Result<ComplexField> {
    let ell = spec.ell as i32;
    let minus = lg_field(&LGModeSpec::new(-ell, 0, waist, wavelength)?, grid, z)?;
    let plus = lg_field(&LGModeSpec::new(ell, 0, waist, wavelength)?, grid, z)?;
    let a = (1.0 - spec.weight).sqrt();
    let b = Complex64::from_polar(spec.weight.sqrt(), spec.theta);
    let data = minus
        .data()
        .iter()
        .zip(plus.data())
        .map(|(m, p)| a * m + b * p)
        .collect();
    ComplexField::new(*grid, data)?.normalized()
}

/// Discrete inner product `Σ conj(a)·b·pitch²`.
pub fn overlap(a: &ComplexField, b: &ComplexField) -> Result<Complex64> {
    a.check_same_grid(b)?;
    let sum: Complex64 = a.data().iter().zip(b.data()).map(|(u, v)| u.conj() * v).sum();
    Ok(sum * a.grid().pitch().powi(2))
}

/// `|⟨ψ(θa)|ψ(θb)⟩|² = cos²((θb − θa)/2)` for balanced same-order superpositions.
pub fn analytic_fidelity(theta_a: f64, theta_b: f64) -> f64 {
    let c = ((theta_b - theta_a) / 2.0).cos();
    (c * c).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const LAMBDA: f64 = 532e-9;
    const W0: f64 = 5e-3;

    fn grid() -> GridSpec {
        GridSpec::new(128, 16.0 * W0).unwrap()
    }

    fn mode(ell: i32) -> LGModeSpec {
        LGModeSpec::new(ell, 0, W0, LAMBDA).unwrap()
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(GridSpec::new(32, 1.0).is_err());
        assert!(GridSpec::new(96, 1.0).is_err());
        assert!(GridSpec::new(64, 0.0).is_err());
        assert!(GridSpec::new(64, f64::NAN).is_err());
        let g = GridSpec::new(64, 1.0).unwrap();
        assert_eq!(g.coord(32), 0.0);
        assert_abs_diff_eq!(g.index_of(g.coord(5)), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_has_flat_phase_at_waist() {
        let f = lg_field(&mode(0), &grid(), 0.0).unwrap();
        assert_abs_diff_eq!(f.norm_sqr(), 1.0, epsilon = 1e-6);
        let peak = f.data().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for v in f.data().iter().filter(|v| v.norm() > 1e-3 * peak) {
            assert!(v.arg().abs() < 1e-12);
        }
    }

    #[test]
    fn vortex_mode_has_null_at_center() {
        let g = grid();
        let f = lg_field(&mode(1), &g, 0.0).unwrap();
        let c = g.n() / 2;
        assert_eq!(f.at(c, c).norm(), 0.0);
        let peak = f.data().iter().map(|v| v.norm()).fold(0.0, f64::max);
        // donut: ring maximum near r = w/√2
        let ring = g.index_of(W0 / 2f64.sqrt()).round() as usize;
        assert!(f.at(c, ring).norm() > 0.95 * peak);
    }

    #[test]
    fn rejects_underresolved_and_unphysical() {
        let coarse = GridSpec::new(64, 16.0 * W0).unwrap(); // 4 px per waist
        assert!(matches!(
            lg_field(&mode(1), &coarse, 0.0),
            Err(Error::Sampling(_))
        ));
        let small = GridSpec::new(256, 4.0 * W0).unwrap();
        assert!(matches!(lg_field(&mode(3), &small, 0.0), Err(Error::Sampling(_))));
        assert!(LGModeSpec::new(1, 0, -1.0, LAMBDA).is_err());
        assert!(LGModeSpec::new(1, 0, W0, 0.0).is_err());
    }

    #[test]
    fn radial_index_modes_are_normalized_and_orthogonal() {
        let g = GridSpec::new(256, 24.0 * W0).unwrap();
        let a = lg_field(&LGModeSpec::new(1, 0, W0, LAMBDA).unwrap(), &g, 0.0).unwrap();
        let b = lg_field(&LGModeSpec::new(1, 1, W0, LAMBDA).unwrap(), &g, 0.0).unwrap();
        assert_abs_diff_eq!(b.norm_sqr(), 1.0, epsilon = 1e-6);
        assert!(overlap(&a, &b).unwrap().norm() < 1e-6);
    }

    #[test]
    fn laguerre_matches_closed_forms() {
        for &x in &[0.0, 0.5, 1.7, 4.0] {
            assert_abs_diff_eq!(laguerre(1, 2.0, x), 3.0 - x, epsilon = 1e-12);
            let l2 = 0.5 * (x * x - 2.0 * (2.0 + 2.0) * x + (2.0 + 1.0) * (2.0 + 2.0));
            assert_abs_diff_eq!(laguerre(2, 2.0, x), l2, epsilon = 1e-12);
        }
    }

    #[test]
    fn overlap_rejects_mismatched_grids() {
        let a = lg_field(&mode(0), &grid(), 0.0).unwrap();
        let b = lg_field(&mode(0), &GridSpec::new(128, 15.0 * W0).unwrap(), 0.0).unwrap();
        assert!(matches!(overlap(&a, &b), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn self_overlap_and_orthogonality() {
        let g = grid();
        let p = lg_field(&mode(1), &g, 0.0).unwrap();
        let m = lg_field(&mode(-1), &g, 0.0).unwrap();
        assert_abs_diff_eq!(overlap(&p, &p).unwrap().re, 1.0, epsilon = 1e-9);
        assert!(overlap(&p, &m).unwrap().norm() < 1e-6);
    }

    #[test]
    fn analytic_fidelity_values() {
        assert_abs_diff_eq!(analytic_fidelity(0.3, 0.3), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(analytic_fidelity(0.0, PI), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(analytic_fidelity(0.0, PI / 4.0), 0.853_553_390_593_273_7, epsilon = 1e-12);
        assert_abs_diff_eq!(analytic_fidelity(1.0, 2.0), analytic_fidelity(2.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn quarter_turn_overlap_matches_closed_form() {
        let g = grid();
        let a = superpose(&SuperpositionSpec::balanced(1, 0.0).unwrap(), &g, W0, LAMBDA).unwrap();
        let b = superpose(&SuperpositionSpec::balanced(1, PI / 2.0).unwrap(), &g, W0, LAMBDA).unwrap();
        assert_abs_diff_eq!(overlap(&a, &b).unwrap().norm_sqr(), 0.5, epsilon = 1e-3);
    }

    #[test]
    fn superposition_validation_and_wrapping() {
        assert!(SuperpositionSpec::balanced(0, 0.0).is_err());
        assert!(SuperpositionSpec::new(1, 0.0, 1.5).is_err());
        let s = SuperpositionSpec::balanced(1, -PI / 2.0).unwrap();
        assert_abs_diff_eq!(s.theta, 1.5 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_orientation(PI, 1), PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_orientation(PI / 2.0, 1), 0.75 * PI, epsilon = 1e-12);
    }

    #[test]
    fn petal_maxima_follow_convention() {
        let g = grid();
        let c = g.n() / 2;
        let r = g.index_of(W0 / 2f64.sqrt()).round() as usize - c;
        // θ = 0: petals on the x axis; θ = π: on the y axis
        let f0 = superpose(&SuperpositionSpec::balanced(1, 0.0).unwrap(), &g, W0, LAMBDA).unwrap();
        assert!(f0.at(c, c + r).norm() > 10.0 * f0.at(c + r, c).norm());
        let fpi = superpose(&SuperpositionSpec::balanced(1, PI).unwrap(), &g, W0, LAMBDA).unwrap();
        assert!(fpi.at(c + r, c).norm() > 10.0 * fpi.at(c, c + r).norm());
    }

    #[test]
    fn unbalanced_weight_limits_to_pure_mode() {
        let g = grid();
        let s = SuperpositionSpec::new(2, 0.7, 1.0).unwrap();
        let f = superpose(&s, &g, W0, LAMBDA).unwrap();
        let pure = lg_field(&mode(2), &g, 0.0).unwrap();
        assert_abs_diff_eq!(overlap(&pure, &f).unwrap().norm_sqr(), 1.0, epsilon = 1e-9);
    }
}
