//! Spectral evaluation of Sobolev-type norms and the energy functionals.
//!
//! `H^s` uses the derivative-sum convention
//! `||f||^2_{H^s} = sum_{|alpha| <= s} ||D^alpha f||^2_{L2}`, evaluated through
//! the multiplier `m_s(xi) = sum_{|alpha| <= s} xi_1^{2 alpha_1} xi_2^{2 alpha_2}`.
//! `L^inf` is a grid maximum (a lower bound on the true supremum) while
//! [`spectral_l1`] bounds it from above.

use crate::error::{Result, TcmError};
use crate::grid::{forward_many, inverse_many, MultiIndex, RealField, SpectralField, VectorField};

/// Sobolev multiplier `m_s(xi)`; always `>= 1`.
pub fn sobolev_multiplier(xi1: f64, xi2: f64, s: u32) -> f64 {
    let (a, b) = (xi1 * xi1, xi2 * xi2);
    let mut total = 0.0;
    for order in 0..=s {
        for j in 0..=order {
            total += a.powi(j as i32) * b.powi((order - j) as i32);
        }
    }
    total
}

/// Multiplier of the homogeneous top-order seminorm, `sum_{|alpha| = s} xi^{2 alpha}`.
pub fn homogeneous_multiplier(xi1: f64, xi2: f64, s: u32) -> f64 {
    let (a, b) = (xi1 * xi1, xi2 * xi2);
    (0..=s)
        .map(|j| a.powi(j as i32) * b.powi((s - j) as i32))
        .sum()
}

fn weighted_energy(f: &SpectralField, weight: impl Fn(f64, f64) -> f64) -> f64 {
    let grid = f.grid();
    let area = grid.side() * grid.side();
    let mut sum = 0.0;
    for ((i, j), c) in f.coeffs().indexed_iter() {
        let m2 = c.norm_sqr();
        if m2 != 0.0 {
            sum += weight(grid.wavenumber(i), grid.wavenumber(j)) * m2;
        }
    }
    area * sum
}

/// `||f||_{H^s}`.
pub fn hs_norm(f: &SpectralField, s: u32) -> f64 {
    weighted_energy(f, |x1, x2| sobolev_multiplier(x1, x2, s)).sqrt()
}

/// `||f||_{L2}`.
pub fn l2_norm(f: &SpectralField) -> f64 {
    hs_norm(f, 0)
}

/// Top-order seminorm `||f||_{\dot H^s}`.
pub fn homogeneous_hs_norm(f: &SpectralField, s: u32) -> f64 {
    weighted_energy(f, |x1, x2| homogeneous_multiplier(x1, x2, s)).sqrt()
}

/// `H^s` norm of a vector field, `sqrt(sum_i ||v_i||^2_{H^s})`.
pub fn vector_hs_norm(v: &VectorField, s: u32) -> f64 {
    v.components()
        .iter()
        .map(|c| hs_norm(c, s).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `||f_1, ..., f_n||_{H^s} = ||f_1||_{H^s} + ... + ||f_n||_{H^s}`.
pub fn multinorm(fields: &[&SpectralField], s: u32) -> Result<f64> {
    let first = fields
        .first()
        .ok_or_else(|| TcmError::InvalidInput("multinorm of an empty list".into()))?;
    if fields.iter().any(|f| !f.same_grid(first)) {
        return Err(TcmError::GridMismatch);
    }
    Ok(fields.iter().map(|f| hs_norm(f, s)).sum())
}

/// `sum_k |c_k|`, the series analogue of `||f^||_{L1}`.
pub fn spectral_l1(f: &SpectralField) -> f64 {
    f.coeffs().iter().map(|c| c.norm()).sum()
}

/// Grid maximum of `|f|`.
pub fn linf_norm(f: &SpectralField) -> f64 {
    f.inverse().max_abs()
}

/// Grid maximum of the Euclidean magnitude `|v(x)|`.
pub fn vector_linf_norm(v: &VectorField) -> f64 {
    tensor_linf(&v.components().iter().collect::<Vec<_>>(), 0)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `max_x |grad^order F(x)|` for the field with the given components, where the
/// magnitude runs over every component and every ordered derivative index.
pub fn tensor_linf(components: &[&SpectralField], order: u32) -> f64 {
    let Some(first) = components.first() else {
        return 0.0;
    };
    let mut derivs = Vec::new();
    let mut weights = Vec::new();
    for comp in components {
        for alpha in MultiIndex::of_order(order) {
            derivs.push(comp.derivative(alpha));
            weights.push(binomial(order, alpha.first));
        }
    }
    let real = inverse_many(&derivs.iter().collect::<Vec<_>>());
    let n = first.grid().n();
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let sq: f64 = real
                .iter()
                .zip(&weights)
                .map(|(r, w)| w * r.values()[[i, j]].powi(2))
                .sum();
            best = best.max(sq);
        }
    }
    best.sqrt()
}

/// `||f||_{W^{s,inf}} = sum_{i <= s} ||grad^i f||_{L^inf}`.
pub fn winf_norm(f: &SpectralField, s: u32) -> f64 {
    (0..=s).map(|i| tensor_linf(&[f], i)).sum()
}

/// Vector version of [`winf_norm`].
pub fn vector_winf_norm(v: &VectorField, s: u32) -> f64 {
    let comps: Vec<&SpectralField> = v.components().iter().collect();
    (0..=s).map(|i| tensor_linf(&comps, i)).sum()
}

/// Crossing term `sum_{|l| <= 2} <D^l c, D^l grad theta>`.
pub fn crossing_term(c: &VectorField, theta: &SpectralField) -> f64 {
    let grid = theta.grid();
    let area = grid.side() * grid.side();
    let (c1, c2, th) = (c.first().coeffs(), c.second().coeffs(), theta.coeffs());
    let mut sum = 0.0;
    for ((i, j), t) in th.indexed_iter() {
        if *t == num_complex::Complex64::new(0.0, 0.0) {
            continue;
        }
        let (x1, x2) = (grid.wavenumber(i), grid.wavenumber(j));
        let m = sobolev_multiplier(x1, x2, 2);
        // grad theta has coefficients i xi theta.
        let g1 = num_complex::Complex64::new(0.0, x1) * t;
        let g2 = num_complex::Complex64::new(0.0, x2) * t;
        sum += m * ((c1[[i, j]] * g1.conj()).re + (c2[[i, j]] * g2.conj()).re);
    }
    area * sum
}

/// Cauchy-Schwarz bound `||c||_{H^2} ||grad theta||_{H^2}` on the crossing term.
pub fn crossing_bound(c: &VectorField, theta: &SpectralField) -> f64 {
    vector_hs_norm(c, 2) * vector_hs_norm(&VectorField::gradient(theta), 2)
}

/// Energy functionals of a perturbation `(w, c, theta)` and forcing `(f, g, h)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyFunctionals {
    /// `||(w, c, theta)||^2_{H^3}`.
    pub a: f64,
    /// `||(w, grad c)||^2_{H^3} + ||grad theta||^2_{H^2}`.
    pub b: f64,
    /// `||f, g, h||_{H^3}`, not squared.
    pub e: f64,
    /// Initial size `||w0, c0, theta0||^2_{H^3}`; filled in by [`EnergyFunctionals::with_a0`].
    pub a0: f64,
    pub crossing: f64,
}

impl EnergyFunctionals {
    pub fn with_a0(mut self, a0: f64) -> Self {
        self.a0 = a0;
        self
    }
}

/// Evaluate `A`, `B`, `E` and the crossing term.
pub fn functionals(
    w: &VectorField,
    c: &VectorField,
    theta: &SpectralField,
    f: &VectorField,
    g: &VectorField,
    h: &SpectralField,
) -> Result<EnergyFunctionals> {
    let grid = theta.grid();
    for v in [w, c, f, g] {
        if v.grid() != grid {
            return Err(TcmError::GridMismatch);
        }
    }
    if h.grid() != grid {
        return Err(TcmError::GridMismatch);
    }
    let finite = w.is_finite() && c.is_finite() && theta.is_finite();
    let forcing_finite = f.is_finite() && g.is_finite() && h.is_finite();
    if !(finite && forcing_finite) {
        return Err(TcmError::NonFinite("energy functional inputs".into()));
    }

    let a = vector_hs_norm(w, 3).powi(2) + vector_hs_norm(c, 3).powi(2) + hs_norm(theta, 3).powi(2);

    // ||grad c||^2_{H^3} sums the H^3 weight against |xi|^2 over both components.
    let grad_c_sq: f64 = c
        .components()
        .iter()
        .map(|comp| weighted_energy(comp, |x1, x2| (x1 * x1 + x2 * x2) * sobolev_multiplier(x1, x2, 3)))
        .sum();
    let grad_theta_sq = weighted_energy(theta, |x1, x2| {
        (x1 * x1 + x2 * x2) * sobolev_multiplier(x1, x2, 2)
    });
    let b = vector_hs_norm(w, 3).powi(2) + grad_c_sq + grad_theta_sq;

    let e = vector_hs_norm(f, 3) + vector_hs_norm(g, 3) + hs_norm(h, 3);
    let crossing = crossing_term(c, theta);
    Ok(EnergyFunctionals {
        a,
        b,
        e,
        a0: 0.0,
        crossing,
    })
}

/// `A_0 = ||w0, c0, theta0||^2_{H^3}` (sum of norms, then squared).
pub fn initial_energy(w0: &VectorField, c0: &VectorField, theta0: &SpectralField) -> f64 {
    (vector_hs_norm(w0, 3) + vector_hs_norm(c0, 3) + hs_norm(theta0, 3)).powi(2)
}

/// Dealiased pseudospectral product `f g`.
pub fn product(f: &SpectralField, g: &SpectralField) -> SpectralField {
    let real = inverse_many(&[f, g]);
    let values = real[0].values() * real[1].values();
    let prod = RealField::from_values(f.grid(), values).expect("finite product");
    prod.forward().dealias()
}

/// Dealiased `v . grad g`.
pub fn advect(v: &VectorField, g: &SpectralField) -> SpectralField {
    let (d1, d2) = (g.d1(), g.d2());
    let real = inverse_many(&[v.first(), v.second(), &d1, &d2]);
    let values = real[0].values() * real[2].values() + real[1].values() * real[3].values();
    let out = RealField::from_values(g.grid(), values).expect("finite product");
    forward_many(&[out]).remove(0).dealias()
}

/// Commutator `[D^alpha, v .] grad g = D^alpha (v . grad g) - v . grad (D^alpha g)`.
pub fn commutator_bracket(v: &VectorField, g: &SpectralField, alpha: MultiIndex) -> Result<SpectralField> {
    let order = alpha.order();
    if order == 0 || order > 3 {
        return Err(TcmError::InvalidOrder(order));
    }
    if v.grid() != g.grid() {
        return Err(TcmError::GridMismatch);
    }
    let outer = advect(v, g).derivative(alpha);
    let inner = advect(v, &g.derivative(alpha));
    Ok(&outer - &inner)
}

/// `sum_{0 < |alpha| <= 3} ||[D^alpha, v .] grad g||_{L2}`.
pub fn commutator_sum(v: &VectorField, g: &SpectralField) -> Result<f64> {
    let mut total = 0.0;
    for alpha in MultiIndex::up_to(3).filter(|a| a.order() > 0) {
        total += l2_norm(&commutator_bracket(v, g, alpha)?);
    }
    Ok(total)
}

/// One evaluation of an inequality `lhs <= C rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityProbe {
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityProbe {
    /// Smallest constant making this instance hold.
    pub fn ratio(&self) -> f64 {
        if self.rhs == 0.0 {
            if self.lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.lhs / self.rhs
        }
    }
}

/// Commutator bound with `||grad g||_{H^2} ||grad v||_inf + ||grad g||_inf ||v||_{H^3}`.
pub fn probe_commutator_mixed(v: &VectorField, g: &SpectralField) -> Result<InequalityProbe> {
    let grad_g = VectorField::gradient(g);
    let comps: Vec<&SpectralField> = v.components().iter().collect();
    let rhs = vector_hs_norm(&grad_g, 2) * tensor_linf(&comps, 1)
        + vector_linf_norm(&grad_g) * vector_hs_norm(v, 3);
    Ok(InequalityProbe {
        lhs: commutator_sum(v, g)?,
        rhs,
    })
}

/// Commutator bound with `(||grad v||_inf + ||grad^3 v||_inf) ||grad g||_{H^2}`.
pub fn probe_commutator_smooth(v: &VectorField, g: &SpectralField) -> Result<InequalityProbe> {
    let grad_g = VectorField::gradient(g);
    let comps: Vec<&SpectralField> = v.components().iter().collect();
    let rhs = (tensor_linf(&comps, 1) + tensor_linf(&comps, 3)) * vector_hs_norm(&grad_g, 2);
    Ok(InequalityProbe {
        lhs: commutator_sum(v, g)?,
        rhs,
    })
}

/// Algebra bound `||f g||_{H^m} <= C ||f||_{H^m} ||g||_{H^m}`.
pub fn probe_product_algebra(f: &SpectralField, g: &SpectralField, m: u32) -> InequalityProbe {
    InequalityProbe {
        lhs: hs_norm(&product(f, g), m),
        rhs: hs_norm(f, m) * hs_norm(g, m),
    }
}

/// Bound `||f g||_{H^m} <= C (||f||_inf + ||grad^m f||_inf) ||g||_{H^m}`.
pub fn probe_product_multiplier(f: &SpectralField, g: &SpectralField, m: u32) -> InequalityProbe {
    InequalityProbe {
        lhs: hs_norm(&product(f, g), m),
        rhs: (tensor_linf(&[f], 0) + tensor_linf(&[f], m)) * hs_norm(g, m),
    }
}

/// Empirical constant fitted over repeated trials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FittedConstant {
    pub max: f64,
    pub median: f64,
    pub trials: usize,
}

impl FittedConstant {
    /// `max / median`; a large value means the fitted constant is not stable.
    pub fn spread(&self) -> f64 {
        self.max / self.median
    }
}

pub fn fit_constant(ratios: &[f64]) -> Result<FittedConstant> {
    if ratios.is_empty() {
        return Err(TcmError::InvalidInput("no trials to fit".into()));
    }
    let mut sorted = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    Ok(FittedConstant {
        max: *sorted.last().expect("nonempty"),
        median,
        trials: sorted.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn torus(n: usize) -> Grid {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    fn cos_diag(g: &Grid) -> SpectralField {
        RealField::from_fn(g, |x, y| (x - y).cos()).forward()
    }

    /// Oracle: sum over multi-indices of |symbol|^2 |c|^2, one mode at a time.
    fn hs_by_multi_indices(f: &SpectralField, s: u32) -> f64 {
        let grid = f.grid();
        let mut total = 0.0;
        for ((i, j), c) in f.coeffs().indexed_iter() {
            for alpha in MultiIndex::up_to(s) {
                let sym = alpha.symbol(grid.wavenumber(i), grid.wavenumber(j));
                total += (sym * c).norm_sqr();
            }
        }
        (grid.side().powi(2) * total).sqrt()
    }

    #[test]
    fn hs_examples() {
        let g = torus(16);
        assert_eq!(hs_norm(&SpectralField::zeros(&g), 3), 0.0);
        let f = cos_diag(&g);
        let expected = (20.0 * PI * PI).sqrt();
        assert!((hs_norm(&f, 3) - expected).abs() < 1e-12 * expected);
        assert!((hs_by_multi_indices(&f, 3) - expected).abs() < 1e-12 * expected);
        let c = RealField::from_fn(&g, |x, _| x.cos()).forward();
        assert!((hs_norm(&c, 0) - (2.0 * PI * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn multinorm_examples() {
        let g = torus(16);
        let f = cos_diag(&g);
        let z = SpectralField::zeros(&g);
        assert!((multinorm(&[&f, &z], 2).unwrap() - hs_norm(&f, 2)).abs() < 1e-14);
        assert!((multinorm(&[&f, &f], 2).unwrap() - 2.0 * hs_norm(&f, 2)).abs() < 1e-12);
        let c = RealField::from_fn(&g, |x, _| x.cos()).forward();
        let s = RealField::from_fn(&g, |_, y| y.sin()).forward();
        let expected = 2.0 * (2.0 * PI * PI).sqrt();
        assert!((multinorm(&[&c, &s], 0).unwrap() - expected).abs() < 1e-12);
        let other = SpectralField::zeros(&torus(32));
        assert_eq!(multinorm(&[&f, &other], 0), Err(TcmError::GridMismatch));
        assert!(multinorm(&[], 0).is_err());
    }

    #[test]
    fn spectral_l1_examples() {
        let g = torus(16);
        let c = RealField::from_fn(&g, |x, _| x.cos()).forward();
        assert!((spectral_l1(&c) - 1.0).abs() < 1e-13);
        assert_eq!(spectral_l1(&SpectralField::zeros(&g)), 0.0);
    }

    #[test]
    fn winf_examples() {
        let g = torus(64);
        let five = RealField::from_fn(&g, |_, _| 5.0).forward();
        assert!((winf_norm(&five, 2) - 5.0).abs() < 1e-12);
        let c = RealField::from_fn(&g, |x, _| x.cos()).forward();
        assert!((winf_norm(&c, 0) - 1.0).abs() < 1e-3);
        assert!((winf_norm(&c, 1) - 2.0).abs() < 1e-3);
    }

    #[test]
    fn homogeneous_is_top_order() {
        let g = torus(16);
        let f = cos_diag(&g);
        // Four multi-indices of order 3, each with |symbol| = 1.
        assert!((homogeneous_hs_norm(&f, 3) - (4.0 * 2.0 * PI * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn functional_examples() {
        let g = torus(16);
        let z = VectorField::zeros(&g);
        let zs = SpectralField::zeros(&g);
        let f = functionals(&z, &z, &zs, &z, &z, &zs).unwrap();
        assert_eq!(f, EnergyFunctionals::default());

        let c = VectorField::new(cos_diag(&g), RealField::from_fn(&g, |x, _| x.sin()).forward()).unwrap();
        let f = functionals(&z, &c, &zs, &z, &z, &zs).unwrap();
        assert_eq!(f.crossing, 0.0);

        let theta = RealField::from_fn(&g, |x, y| (x + 2.0 * y).sin() + 0.5 * (3.0 * y).cos()).forward();
        let grad = VectorField::gradient(&theta);
        let f = functionals(&z, &grad, &theta, &z, &z, &zs).unwrap();
        // Self-pairing oracle: sum over |l| <= 2 of ||D^l grad theta||^2.
        let mut oracle = 0.0;
        for alpha in MultiIndex::up_to(2) {
            for comp in grad.components() {
                oracle += l2_norm(&comp.derivative(alpha)).powi(2);
            }
        }
        assert!((f.crossing - oracle).abs() < 1e-10 * oracle);

        let mut bad = cos_diag(&g);
        bad.coeffs_mut()[[1, 1]] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(
            functionals(&z, &z, &bad, &z, &z, &zs),
            Err(TcmError::NonFinite(_))
        ));
    }

    #[test]
    fn commutator_edge_cases() {
        let g = torus(32);
        let constant = VectorField::new(
            RealField::from_fn(&g, |_, _| 2.0).forward(),
            RealField::from_fn(&g, |_, _| -1.0).forward(),
        )
        .unwrap();
        let scalar = RealField::from_fn(&g, |x, y| (x + y).sin() + (2.0 * x).cos()).forward();
        let alpha = MultiIndex::new(1, 2);
        assert!(l2_norm(&commutator_bracket(&constant, &scalar, alpha).unwrap()) < 1e-12);
        let flow = VectorField::curl_of(&scalar);
        let flat = RealField::from_fn(&g, |_, _| 4.0).forward();
        assert!(l2_norm(&commutator_bracket(&flow, &flat, alpha).unwrap()) < 1e-12);
        assert_eq!(
            commutator_bracket(&flow, &scalar, MultiIndex::new(0, 0)).unwrap_err(),
            TcmError::InvalidOrder(0)
        );
        assert_eq!(
            commutator_bracket(&flow, &scalar, MultiIndex::new(2, 2)).unwrap_err(),
            TcmError::InvalidOrder(4)
        );
    }

    #[test]
    fn commutator_matches_leibniz_for_first_order() {
        // [d1, v.] grad g = (d1 v) . grad g.
        let g = torus(32);
        let a = RealField::from_fn(&g, |x, y| (x + 2.0 * y).sin()).forward();
        let v = VectorField::new(a.clone(), a.d2()).unwrap();
        let s = RealField::from_fn(&g, |x, y| (2.0 * x - y).cos()).forward();
        let bracket = commutator_bracket(&v, &s, MultiIndex::new(1, 0)).unwrap();
        let expected = advect(&v.map(|c| c.d1()), &s);
        assert!(l2_norm(&(&bracket - &expected)) < 1e-12 * (1.0 + l2_norm(&expected)));
    }

    #[test]
    fn fit_constant_median() {
        let fit = fit_constant(&[1.0, 3.0, 2.0, 10.0]).unwrap();
        assert_eq!(fit.max, 10.0);
        assert_eq!(fit.median, 2.5);
        assert_eq!(fit.trials, 4);
        assert!(fit_constant(&[]).is_err());
    }
}
