//! Cone-supported initial data.
//!
//! The profiles `a0` and `m0` have spectra inside the cone
//! `C = { |xi1 + xi2| <= eps, 1 <= |xi| <= 2 }`. From them the large parts of
//! the data are `U0 = (d2 a0, -d1 a0)` and `V0 = (m0, m0)`; the perturbation
//! `(w0, c0, theta0)` is added on top.
//!
//! Coefficients approximate a whole-plane transform: a function whose Fourier
//! transform is `F(xi)` gets series coefficients `F(xi_k) / S^2`, so the
//! constructed fields do not depend on the torus size once it is large enough.

use std::f64::consts::E;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TcmError};
use crate::grid::{Grid, SpectralField, VectorField};
use crate::norms::{hs_norm, initial_energy, l2_norm, spectral_l1, vector_hs_norm};

/// Relative slack used for closed-set membership tests on lattice points.
const BOUNDARY_SLACK: f64 = 1e-12;

/// Relative divergence accepted for `w0`.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-10;

/// The frequency cone `C` and its plateau `C~`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeSpec {
    epsilon: f64,
}

impl ConeSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(TcmError::InvalidInput(format!(
                "cone width epsilon = {epsilon} must be positive"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Closed membership in `C`.
    pub fn contains(&self, xi1: f64, xi2: f64) -> bool {
        let strip = (xi1 + xi2).abs();
        let radius = xi1.hypot(xi2);
        strip <= self.epsilon * (1.0 + BOUNDARY_SLACK)
            && (1.0 - BOUNDARY_SLACK..=2.0 + BOUNDARY_SLACK).contains(&radius)
    }

    /// Closed membership in the plateau `C~ = { |xi1 + xi2| <= eps/2, 4/3 <= |xi| <= 5/3 }`.
    pub fn plateau_contains(&self, xi1: f64, xi2: f64) -> bool {
        let strip = (xi1 + xi2).abs();
        let radius = xi1.hypot(xi2);
        strip <= 0.5 * self.epsilon * (1.0 + BOUNDARY_SLACK)
            && (4.0 / 3.0 - BOUNDARY_SLACK..=5.0 / 3.0 + BOUNDARY_SLACK).contains(&radius)
    }

    /// The lattice must step at most `eps/2` across the strip, and the ring
    /// `|xi| <= 2` must sit inside the dealiased band.
    pub fn check_resolved(&self, grid: &Grid) -> Result<()> {
        let dxi = grid.lattice_spacing();
        if dxi > 0.5 * self.epsilon * (1.0 + BOUNDARY_SLACK) {
            return Err(TcmError::UnresolvedCone(format!(
                "lattice spacing 2pi/S = {dxi} exceeds eps/2 = {}",
                0.5 * self.epsilon
            )));
        }
        if grid.dealias_wavenumber() < 2.0 * (1.0 - BOUNDARY_SLACK) {
            return Err(TcmError::UnresolvedCone(format!(
                "dealiased band reaches |xi| = {}, below the cone radius 2",
                grid.dealias_wavenumber()
            )));
        }
        Ok(())
    }

    /// Bump profile: `psi_strip(|xi1 + xi2|) * psi_ring(|xi|)`, one on `C~`,
    /// zero outside `C`, smooth in between.
    pub fn bump(&self, xi1: f64, xi2: f64) -> f64 {
        let strip = (xi1 + xi2).abs();
        let half = 0.5 * self.epsilon;
        let strip_part = if strip <= half {
            1.0
        } else if strip >= self.epsilon {
            0.0
        } else {
            smooth_step((self.epsilon - strip) / half)
        };
        if strip_part == 0.0 {
            return 0.0;
        }
        let r = xi1.hypot(xi2);
        let ring_part = if !(1.0..=2.0).contains(&r) {
            0.0
        } else if r < 4.0 / 3.0 {
            smooth_step(3.0 * (r - 1.0))
        } else if r > 5.0 / 3.0 {
            smooth_step(3.0 * (2.0 - r))
        } else {
            1.0
        };
        strip_part * ring_part
    }
}

/// `C^inf` step from 0 (t <= 0) to 1 (t >= 1).
pub fn smooth_step(t: f64) -> f64 {
    fn g(t: f64) -> f64 {
        if t > 0.0 {
            (-1.0 / t).exp()
        } else {
            0.0
        }
    }
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        g(t) / (g(t) + g(1.0 - t))
    }
}

/// Spectrum of the bump `chi` on the grid lattice.
pub fn build_bump_chi(cone: &ConeSpec, grid: &Grid) -> Result<SpectralField> {
    cone.check_resolved(grid)?;
    let area = grid.side() * grid.side();
    Ok(SpectralField::from_wavenumbers(grid, |x1, x2| {
        Complex64::new(cone.bump(x1, x2) / area, 0.0)
    }))
}

/// Sample of the whole-plane transform behind a coefficient, `S^2 c_k`.
pub fn transform_sample(f: &SpectralField, k1: i64, k2: i64) -> Complex64 {
    let side = f.grid().side();
    f.coeff(k1, k2) * (side * side)
}

/// `(1/eps) (log log 1/eps)^{1/2}`.
pub fn remark_amplitude(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0 / E) {
        return Err(TcmError::EpsilonTooLarge(epsilon));
    }
    Ok((1.0 / epsilon) * (1.0 / epsilon).ln().ln().sqrt())
}

/// `log log 1/eps`.
pub fn log_log(epsilon: f64) -> f64 {
    (1.0 / epsilon).ln().ln()
}

/// Spectra of `a0` and `m0`.
#[derive(Clone, Debug)]
pub struct LinearData {
    pub a0: SpectralField,
    pub m0: SpectralField,
    pub cone: ConeSpec,
}

impl LinearData {
    /// Checks that both spectra share a grid and vanish outside the cone.
    pub fn new(a0: SpectralField, m0: SpectralField, cone: ConeSpec) -> Result<Self> {
        if !a0.same_grid(&m0) {
            return Err(TcmError::GridMismatch);
        }
        let mut a0 = a0;
        let mut m0 = m0;
        for (name, f) in [("a0", &mut a0), ("m0", &mut m0)] {
            if !restrict_to_cone(f, &cone) {
                return Err(TcmError::InvalidInput(format!(
                    "{name} has spectral content outside the cone"
                )));
            }
        }
        Ok(Self { a0, m0, cone })
    }

    pub fn zero(grid: &Grid, cone: ConeSpec) -> Self {
        Self {
            a0: SpectralField::zeros(grid),
            m0: SpectralField::zeros(grid),
            cone,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.a0.grid()
    }

    pub fn is_zero(&self) -> bool {
        self.a0.is_zero() && self.m0.is_zero()
    }
}

/// `a0 = m0 = (1/eps)(log log 1/eps)^{1/2} chi`.
pub fn build_remark_data(cone: &ConeSpec, grid: &Grid) -> Result<LinearData> {
    let amplitude = remark_amplitude(cone.epsilon())?;
    build_scaled_data(cone, grid, amplitude)
}

/// `a0 = m0 = amplitude * chi`.
pub fn build_scaled_data(cone: &ConeSpec, grid: &Grid, amplitude: f64) -> Result<LinearData> {
    if !amplitude.is_finite() {
        return Err(TcmError::NonFinite("amplitude".into()));
    }
    let chi = build_bump_chi(cone, grid)?;
    let profile = chi.scaled(amplitude);
    Ok(LinearData {
        a0: profile.clone(),
        m0: profile,
        cone: *cone,
    })
}

/// True iff every nonzero coefficient sits on a lattice point of the closed cone.
/// Zero the coefficients outside the cone when they are roundoff relative to
/// the peak (`<= 1e-12 max|c|`); returns `false`, leaving `f` untouched, when
/// genuine content lies outside.
pub fn restrict_to_cone(f: &mut SpectralField, cone: &ConeSpec) -> bool {
    let floor = 1e-12 * f.max_abs_coeff();
    let grid = f.grid().clone();
    let outside = |i: usize, j: usize| !cone.contains(grid.wavenumber(i), grid.wavenumber(j));
    let clean = f
        .coeffs()
        .indexed_iter()
        .all(|((i, j), c)| !outside(i, j) || c.norm() <= floor);
    if clean {
        for ((i, j), c) in f.coeffs_mut().indexed_iter_mut() {
            if outside(i, j) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }
    clean
}

pub fn verify_support(f: &SpectralField, cone: &ConeSpec) -> bool {
    let grid = f.grid();
    f.coeffs().indexed_iter().all(|((i, j), c)| {
        *c == Complex64::new(0.0, 0.0) || cone.contains(grid.wavenumber(i), grid.wavenumber(j))
    })
}

/// Full initial condition `u0 = U0 + w0`, `v0 = V0 + c0`, `theta0`.
#[derive(Clone, Debug)]
pub struct InitialCondition {
    pub linear: LinearData,
    pub w0: VectorField,
    pub c0: VectorField,
    pub theta0: SpectralField,
}

impl InitialCondition {
    pub fn grid(&self) -> &Grid {
        self.linear.grid()
    }

    /// `U0 = (d2 a0, -d1 a0)`.
    pub fn big_u0(&self) -> VectorField {
        VectorField::curl_of(&self.linear.a0)
    }

    /// `V0 = (m0, m0)`.
    pub fn big_v0(&self) -> VectorField {
        VectorField::diagonal(&self.linear.m0)
    }

    pub fn u0(&self) -> VectorField {
        &self.big_u0() + &self.w0
    }

    pub fn v0(&self) -> VectorField {
        &self.big_v0() + &self.c0
    }

    /// `A0 = ||w0, c0, theta0||^2_{H^3}`.
    pub fn a0(&self) -> f64 {
        initial_energy(&self.w0, &self.c0, &self.theta0)
    }
}

pub fn assemble_initial(
    linear: LinearData,
    w0: VectorField,
    c0: VectorField,
    theta0: SpectralField,
) -> Result<InitialCondition> {
    let grid = linear.grid();
    if w0.grid() != grid || c0.grid() != grid || theta0.grid() != grid {
        return Err(TcmError::GridMismatch);
    }
    let div = w0.relative_divergence();
    if div > DIVERGENCE_TOLERANCE {
        return Err(TcmError::NotDivergenceFree(div));
    }
    Ok(InitialCondition {
        linear,
        w0,
        c0,
        theta0,
    })
}

/// Unperturbed data `(w0, c0, theta0) = 0`.
pub fn unperturbed(linear: LinearData) -> InitialCondition {
    let grid = linear.grid().clone();
    InitialCondition {
        linear,
        w0: VectorField::zeros(&grid),
        c0: VectorField::zeros(&grid),
        theta0: SpectralField::zeros(&grid),
    }
}

/// Sizes (in `H^3`) and seed for random perturbations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSeeds {
    pub w_amplitude: f64,
    pub c_amplitude: f64,
    pub theta_amplitude: f64,
    pub seed: u64,
}

/// Random real field with Gaussian coefficients on `0 < |xi| <= radius`,
/// restricted to the dealiased band.
pub fn random_band_limited<R: Rng>(grid: &Grid, radius: f64, rng: &mut R) -> SpectralField {
    let n = grid.n();
    let cutoff = grid.dealias_cutoff();
    let mut field = SpectralField::zeros(grid);
    for i in 0..n {
        for j in 0..n {
            let (k1, k2) = (grid.mode(i), grid.mode(j));
            // One representative per conjugate pair.
            if !(k1 > 0 || (k1 == 0 && k2 > 0)) {
                continue;
            }
            if k1.abs() > cutoff || k2.abs() > cutoff || grid.is_nyquist(i) || grid.is_nyquist(j) {
                continue;
            }
            let (x1, x2) = (grid.wavenumber(i), grid.wavenumber(j));
            if x1.hypot(x2) > radius {
                continue;
            }
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let c = Complex64::new(re, im);
            let coeffs = field.coeffs_mut();
            coeffs[[i, j]] = c;
            coeffs[[(n - i) % n, (n - j) % n]] = c.conj();
        }
    }
    field
}

fn normalized(field: SpectralField, amplitude: f64) -> SpectralField {
    let norm = hs_norm(&field, 3);
    if amplitude == 0.0 || norm == 0.0 {
        SpectralField::zeros(field.grid())
    } else {
        field.scaled(amplitude / norm)
    }
}

/// Seeded perturbation `(w0, c0, theta0)` on `|xi| <= 2`, each scaled to the
/// requested `H^3` size; `w0` is projected to be divergence-free.
pub fn seeded_perturbation(
    grid: &Grid,
    seeds: &PerturbationSeeds,
) -> (VectorField, VectorField, SpectralField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.seed);
    let radius = 2.0;
    let w_raw = VectorField::new(
        random_band_limited(grid, radius, &mut rng),
        random_band_limited(grid, radius, &mut rng),
    )
    .expect("same grid")
    .leray_project();
    let w_norm = vector_hs_norm(&w_raw, 3);
    let w = if seeds.w_amplitude == 0.0 || w_norm == 0.0 {
        VectorField::zeros(grid)
    } else {
        w_raw.scaled(seeds.w_amplitude / w_norm)
    };
    let c_raw = VectorField::new(
        random_band_limited(grid, radius, &mut rng),
        random_band_limited(grid, radius, &mut rng),
    )
    .expect("same grid");
    let c_norm = vector_hs_norm(&c_raw, 3);
    let c = if seeds.c_amplitude == 0.0 || c_norm == 0.0 {
        VectorField::zeros(grid)
    } else {
        c_raw.scaled(seeds.c_amplitude / c_norm)
    };
    let theta = normalized(random_band_limited(grid, radius, &mut rng), seeds.theta_amplitude);
    (w, c, theta)
}

/// Ingredients of the smallness condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionTerms {
    pub a0: f64,
    /// `||a0||_{L2} ||a0^||_{L1} + ||m0||_{L2} (1 + ||m0^||_{L1})`.
    pub coupling: f64,
    /// `||a0^, m0^||_{L1}`.
    pub l1: f64,
    pub epsilon: f64,
}

impl ConditionTerms {
    pub fn from_initial(ic: &InitialCondition) -> Self {
        let a = &ic.linear.a0;
        let m = &ic.linear.m0;
        let (l1_a, l1_m) = (spectral_l1(a), spectral_l1(m));
        Self {
            a0: ic.a0(),
            coupling: l2_norm(a) * l1_a + l2_norm(m) * (1.0 + l1_m),
            l1: l1_a + l1_m,
            epsilon: ic.linear.cone.epsilon(),
        }
    }

    /// `(A0 + eps K) exp{C eps K + C (L + L^2)}`.
    pub fn lhs(&self, constant: f64) -> f64 {
        let ek = self.epsilon * self.coupling;
        let exponent = constant * ek + constant * (self.l1 + self.l1 * self.l1);
        (self.a0 + ek) * exponent.exp()
    }
}

/// Left side of the smallness condition for a chosen constant `C > 0`.
pub fn condition_lhs(ic: &InitialCondition, constant: f64) -> f64 {
    ConditionTerms::from_initial(ic).lhs(constant)
}

/// [`condition_lhs`] over several constants.
pub fn condition_curve(ic: &InitialCondition, constants: &[f64]) -> Vec<(f64, f64)> {
    let terms = ConditionTerms::from_initial(ic);
    constants.iter().map(|&c| (c, terms.lhs(c))).collect()
}

/// Closed-form size `C eps^{1/2} (log log 1/eps) exp{C log log 1/eps}` of the
/// condition for the log-log family.
pub fn remark_condition_estimate(epsilon: f64, constant: f64) -> f64 {
    let ll = log_log(epsilon);
    constant * epsilon.sqrt() * ll * (constant * ll).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RealField;
    use crate::norms::linf_norm;
    use std::f64::consts::PI;

    /// Grid with lattice spacing exactly eps/2 and the cone inside the band.
    fn cone_grid(eps: f64) -> Grid {
        let side = 4.0 * PI / eps;
        let min_n = (3.0 * 2.0 * side / (2.0 * PI)).ceil() as usize;
        let n = min_n.next_power_of_two().max(8);
        Grid::new(n, side).unwrap()
    }

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        assert!(smooth_step(0.3) < smooth_step(0.31));
    }

    #[test]
    fn bump_values() {
        let cone = ConeSpec::new(0.1).unwrap();
        // xi1 + xi2 = 0 and |xi| = 1.5.
        let x = 1.5 / 2f64.sqrt();
        assert_eq!(cone.bump(x, -x), 1.0);
        let y = 2.5 / 2f64.sqrt();
        assert_eq!(cone.bump(y, -y), 0.0);
        assert_eq!(cone.bump(1.5, 0.0), 0.0);
        let z = 1.1 / 2f64.sqrt();
        assert!(cone.bump(z, -z) > 0.0 && cone.bump(z, -z) < 1.0);
    }

    #[test]
    fn bump_spectrum_properties() {
        let eps = 0.1;
        let cone = ConeSpec::new(eps).unwrap();
        let grid = cone_grid(eps);
        let chi = build_bump_chi(&cone, &grid).unwrap();
        let area = grid.side() * grid.side();
        for ((i, j), c) in chi.coeffs().indexed_iter() {
            let (x1, x2) = (grid.wavenumber(i), grid.wavenumber(j));
            let value = c.re * area;
            assert!(c.im == 0.0 && (0.0..=1.0 + 1e-14).contains(&value));
            if cone.plateau_contains(x1, x2) {
                assert!((value - 1.0).abs() < 1e-14, "plateau at ({x1}, {x2})");
            }
            if !cone.contains(x1, x2) {
                assert_eq!(value, 0.0);
            }
            assert_eq!(*c, chi.coeff(-grid.mode(i), -grid.mode(j)));
        }
        assert!(crate::grid::inverse_imaginary_residual(&chi) <= 1e-12);
        assert!(verify_support(&chi, &cone));
    }

    #[test]
    fn unresolved_cone_is_rejected() {
        let cone = ConeSpec::new(0.05).unwrap();
        let coarse = Grid::new(256, 40.0 * PI).unwrap();
        assert!(matches!(build_bump_chi(&cone, &coarse), Err(TcmError::UnresolvedCone(_))));
        let narrow_band = Grid::new(128, 80.0 * PI).unwrap();
        assert!(matches!(build_bump_chi(&cone, &narrow_band), Err(TcmError::UnresolvedCone(_))));
        let ok = Grid::new(256, 80.0 * PI).unwrap();
        assert!(build_bump_chi(&cone, &ok).is_ok());
    }

    #[test]
    fn amplitude_examples() {
        // 20 (log log 20)^{1/2} = 20 (log 2.99573...)^{1/2}.
        let oracle = 20.0 * (20f64.ln().ln()).sqrt();
        assert!((remark_amplitude(0.05).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 20.94).abs() < 0.01);
        assert_eq!(remark_amplitude(0.5), Err(TcmError::EpsilonTooLarge(0.5)));
        assert!(remark_amplitude(1.0 / E).is_err());
        let cone = ConeSpec::new(0.5).unwrap();
        let grid = Grid::new(64, 8.0 * PI).unwrap();
        assert!(matches!(build_remark_data(&cone, &grid), Err(TcmError::EpsilonTooLarge(_))));
    }

    #[test]
    fn support_checks() {
        let grid = Grid::new(16, 2.0 * PI).unwrap();
        let cone = ConeSpec::new(0.1).unwrap();
        let c = RealField::from_fn(&grid, |x, _| x.cos()).forward();
        assert!(!verify_support(&c, &cone));
        assert!(verify_support(&SpectralField::zeros(&grid), &cone));
        // cos(x1 - x2) sits on the diagonal with |xi| = sqrt 2.
        let d = RealField::from_fn(&grid, |x, y| (x - y).cos()).forward();
        assert!(!verify_support(&c, &cone) || verify_support(&d, &cone));
        let mut d = d;
        assert!(restrict_to_cone(&mut d, &cone));
        assert!(verify_support(&d, &cone));
        let mut c = c;
        assert!(!restrict_to_cone(&mut c, &cone));
    }

    #[test]
    fn assemble_from_diagonal_profiles() {
        let grid = Grid::new(16, 2.0 * PI).unwrap();
        let cone = ConeSpec::new(0.1).unwrap();
        let a = RealField::from_fn(&grid, |x, y| (x - y).cos()).forward();
        let linear = LinearData::new(a.clone(), a.clone(), cone).unwrap();
        let z = VectorField::zeros(&grid);
        let ic = assemble_initial(linear, z.clone(), z, SpectralField::zeros(&grid)).unwrap();
        let u0 = ic.u0();
        // U0 = (d2 a, -d1 a) = (sin(x1 - x2), sin(x1 - x2)).
        let s = RealField::from_fn(&grid, |x, y| (x - y).sin()).forward();
        for comp in u0.components() {
            assert!(l2_norm(&(comp - &s)) < 1e-12);
        }
        for comp in ic.v0().components() {
            assert!(l2_norm(&(comp - &a)) < 1e-12);
        }
        assert_eq!(ic.a0(), 0.0);
        assert_eq!(u0.relative_divergence(), 0.0);
    }

    #[test]
    fn assemble_rejects_compressible_w0() {
        let grid = Grid::new(16, 2.0 * PI).unwrap();
        let cone = ConeSpec::new(0.1).unwrap();
        let phi = RealField::from_fn(&grid, |x, y| (x + 2.0 * y).cos()).forward();
        let w0 = VectorField::gradient(&phi);
        let z = VectorField::zeros(&grid);
        let err = assemble_initial(LinearData::zero(&grid, cone), w0, z, SpectralField::zeros(&grid));
        assert!(matches!(err, Err(TcmError::NotDivergenceFree(_))));
    }

    #[test]
    fn curl_structure_is_exactly_solenoidal() {
        let eps = 0.1;
        let cone = ConeSpec::new(eps).unwrap();
        let grid = cone_grid(eps);
        let data = build_remark_data(&cone, &grid).unwrap();
        let u0 = VectorField::curl_of(&data.a0);
        let div = u0.divergence();
        assert!(div.max_abs_coeff() <= 1e-14);
    }

    #[test]
    fn condition_lhs_properties() {
        let eps = 0.1;
        let cone = ConeSpec::new(eps).unwrap();
        let grid = cone_grid(eps);
        let zero = unperturbed(LinearData::zero(&grid, cone));
        assert_eq!(condition_lhs(&zero, 1.0), 0.0);
        let ic = unperturbed(build_remark_data(&cone, &grid).unwrap());
        let one = condition_lhs(&ic, 1.0);
        let two = condition_lhs(&ic, 2.0);
        assert!(one > 0.0 && two > one);
        let curve = condition_curve(&ic, &[0.5, 1.0, 2.0]);
        assert!(curve.windows(2).all(|w| w[1].1 > w[0].1));
        assert!((curve[1].1 - one).abs() <= 1e-15 * one);
    }

    #[test]
    fn diagonal_derivative_carries_most_mass() {
        // On the cone |xi2| >= (sqrt(2 - eps^2) - eps)/2; the plateau has |xi2| ~ 1.06.
        for eps in [0.2, 0.1] {
            let cone = ConeSpec::new(eps).unwrap();
            let grid = cone_grid(eps);
            let min_xi2 = grid
                .wavenumbers()
                .iter()
                .flat_map(|&a| grid.wavenumbers().iter().map(move |&b| (a, b)))
                .filter(|&(a, b)| cone.contains(a, b))
                .map(|(_, b)| b.abs())
                .fold(f64::INFINITY, f64::min);
            assert!(min_xi2 >= ((2.0 - eps * eps).sqrt() - eps) / 2.0 - 1e-12);
            let data = build_remark_data(&cone, &grid).unwrap();
            let ratio = spectral_l1(&data.a0.d2()) / spectral_l1(&data.a0);
            assert!(ratio >= 2.0 / 3.0, "eps {eps}: ratio {ratio}");
        }
    }

    #[test]
    fn v0_peak_grows_as_cone_narrows() {
        let mut last = 0.0;
        for eps in [0.1, 0.05, 0.025] {
            let cone = ConeSpec::new(eps).unwrap();
            let grid = cone_grid(eps);
            let ic = unperturbed(build_remark_data(&cone, &grid).unwrap());
            let peak = ic.v0().components().iter().map(linf_norm).fold(0.0, f64::max);
            assert!(peak >= last, "eps {eps}: {peak} < {last}");
            last = peak;
        }
    }

    #[test]
    fn seeded_perturbations_are_reproducible() {
        let grid = Grid::new(32, 4.0 * PI).unwrap();
        let seeds = PerturbationSeeds {
            w_amplitude: 0.1,
            c_amplitude: 0.2,
            theta_amplitude: 0.3,
            seed: 7,
        };
        let (w, c, t) = seeded_perturbation(&grid, &seeds);
        let (w2, _, _) = seeded_perturbation(&grid, &seeds);
        assert_eq!(w.first().coeffs(), w2.first().coeffs());
        assert!(w.relative_divergence() < 1e-12);
        assert!((vector_hs_norm(&w, 3) - 0.1).abs() < 1e-12);
        assert!((vector_hs_norm(&c, 3) - 0.2).abs() < 1e-12);
        assert!((hs_norm(&t, 3) - 0.3).abs() < 1e-12);
        assert!(crate::grid::inverse_imaginary_residual(&t) < 1e-14);
    }
}
