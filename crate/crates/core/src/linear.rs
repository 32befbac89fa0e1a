//! Closed-form linear flow and the forcing it generates.
//!
//! `a(t) = e^{-mu t} a0` and `m(t) = e^{nu t Lap} m0` are evaluated with exact
//! per-mode multipliers, giving `U = (d2 a, -d1 a)` and `V = (m, m)`. The
//! forcing of the renormalized system is
//!
//! ```text
//! f = -U.grad U - V.grad V - V div V,   g = -U.grad V - V.grad U,   h = -div V
//! ```
//!
//! [`forcing_factored`] evaluates the same terms after pulling a `(d1 + d2)`
//! factor onto `a` or `m`; on cone-supported data that factor is `O(eps)`.

use num_complex::Complex64;

use crate::error::{Result, TcmError};
use crate::grid::{forward_many, inverse_many, RealField, SpectralField, VectorField};
use crate::initial::LinearData;
use crate::norms::{hs_norm, vector_hs_norm, vector_winf_norm};

/// Linear flow evaluated at time `t`.
#[derive(Clone, Debug)]
pub struct LinearFlow {
    pub t: f64,
    pub mu: f64,
    pub nu: f64,
    pub a: SpectralField,
    pub m: SpectralField,
    pub big_u: VectorField,
    pub big_v: VectorField,
}

impl LinearFlow {
    pub fn grid(&self) -> &crate::grid::Grid {
        self.a.grid()
    }

    /// `dU/dt = -mu U`.
    pub fn du_dt(&self) -> VectorField {
        self.big_u.scaled(-self.mu)
    }

    /// `dV/dt = nu Lap V`.
    pub fn dv_dt(&self) -> VectorField {
        self.big_v.map(|c| c.laplacian().scaled(self.nu))
    }
}

/// Flow with the unit damping and diffusion used throughout the analysis.
pub fn evolve_linear(data: &LinearData, t: f64) -> Result<LinearFlow> {
    evolve_linear_with(data, t, 1.0, 1.0)
}

/// Flow for `da/dt = -mu a`, `dm/dt = nu Lap m`.
pub fn evolve_linear_with(data: &LinearData, t: f64, mu: f64, nu: f64) -> Result<LinearFlow> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(TcmError::InvalidInput(format!("evaluation time t = {t} must be >= 0")));
    }
    let a = data.a0.scaled((-mu * t).exp());
    let m = data
        .m0
        .apply_real_multiplier(|x1, x2| (-nu * (x1 * x1 + x2 * x2) * t).exp());
    Ok(LinearFlow {
        t,
        mu,
        nu,
        big_u: VectorField::curl_of(&a),
        big_v: VectorField::diagonal(&m),
        a,
        m,
    })
}

/// Forcing `(f, g, h)` of the renormalized system at one time.
#[derive(Clone, Debug)]
pub struct ForcingTriple {
    pub f: VectorField,
    pub g: VectorField,
    pub h: SpectralField,
    pub t: f64,
}

impl ForcingTriple {
    pub fn zero(grid: &crate::grid::Grid, t: f64) -> Self {
        Self {
            f: VectorField::zeros(grid),
            g: VectorField::zeros(grid),
            h: SpectralField::zeros(grid),
            t,
        }
    }

    /// `E = ||f, g, h||_{H^3}`.
    pub fn energy(&self) -> f64 {
        vector_hs_norm(&self.f, 3) + vector_hs_norm(&self.g, 3) + hs_norm(&self.h, 3)
    }

    pub fn is_finite(&self) -> bool {
        self.f.is_finite() && self.g.is_finite() && self.h.is_finite()
    }
}

fn to_spectral(grid: &crate::grid::Grid, values: [ndarray::Array2<f64>; 4]) -> [SpectralField; 4] {
    let real: Vec<RealField> = values
        .into_iter()
        .map(|v| RealField::from_values_unchecked(grid, v))
        .collect();
    let mut out = forward_many(&real).into_iter().map(|f| f.dealias());
    [
        out.next().unwrap(),
        out.next().unwrap(),
        out.next().unwrap(),
        out.next().unwrap(),
    ]
}

/// Forcing from the defining products, evaluated as written.
pub fn forcing_raw(flow: &LinearFlow) -> ForcingTriple {
    let grid = flow.grid();
    let u = &flow.big_u;
    let m = &flow.m;
    let spectral = [
        u.first().clone(),
        u.second().clone(),
        u.first().d1(),
        u.first().d2(),
        u.second().d1(),
        u.second().d2(),
        m.clone(),
        m.d1(),
        m.d2(),
    ];
    let r = inverse_many(&spectral.iter().collect::<Vec<_>>());
    let [u1, u2, u1_1, u1_2, u2_1, u2_2, mm, m_1, m_2] = [
        r[0].values(),
        r[1].values(),
        r[2].values(),
        r[3].values(),
        r[4].values(),
        r[5].values(),
        r[6].values(),
        r[7].values(),
        r[8].values(),
    ];
    // V = (m, m): V.grad V_i = m d1 m + m d2 m, V_i div V = m (d1 m + d2 m).
    let v_grad_v = mm * m_1 + mm * m_2;
    let v_div_v = mm * &(m_1 + m_2);
    let u_grad_m = u1 * m_1 + u2 * m_2;
    let f1 = -(u1 * u1_1 + u2 * u1_2) - &v_grad_v - &v_div_v;
    let f2 = -(u1 * u2_1 + u2 * u2_2) - &v_grad_v - &v_div_v;
    let g1 = -&u_grad_m - mm * u1_1 - mm * u1_2;
    let g2 = -&u_grad_m - mm * u2_1 - mm * u2_2;
    let [f1, f2, g1, g2] = to_spectral(grid, [f1, f2, g1, g2]);
    let h = -&(&m.d1() + &m.d2());
    ForcingTriple {
        f: VectorField::new(f1, f2).expect("same grid"),
        g: VectorField::new(g1, g2).expect("same grid"),
        h,
        t: flow.t,
    }
}

/// Forcing from the `(d1 + d2)`-factored expansions:
///
/// ```text
/// f1 =  (d1+d2)a d2d2 a - d2 a d2(d1+d2)a - 2 m (d1+d2)m
/// f2 = -(d1+d2)a d1d2 a + d2 a d1(d1+d2)a - 2 m (d1+d2)m
/// g1 =  (d1+d2)a d2 m   - d2 a (d1+d2)m   - m (d1+d2) d2 a
/// g2 =  (d1+d2)a d2 m   - d2 a (d1+d2)m   + m (d1+d2) d1 a
/// h  = -(d1+d2) m
/// ```
pub fn forcing_factored(flow: &LinearFlow) -> ForcingTriple {
    let grid = flow.grid();
    let a = &flow.a;
    let m = &flow.m;
    let sa = a.diagonal_derivative();
    let sm = m.diagonal_derivative();
    let spectral = [
        sa.clone(),
        a.d2().d2(),
        a.d2(),
        sa.d2(),
        a.d1().d2(),
        sa.d1(),
        m.clone(),
        sm.clone(),
        m.d2(),
    ];
    let r = inverse_many(&spectral.iter().collect::<Vec<_>>());
    let [sa_r, a22, a2, sa2, a12, sa1, mm, sm_r, m2] = [
        r[0].values(),
        r[1].values(),
        r[2].values(),
        r[3].values(),
        r[4].values(),
        r[5].values(),
        r[6].values(),
        r[7].values(),
        r[8].values(),
    ];
    let m_sm = mm * sm_r * 2.0;
    let cross = sa_r * m2 - a2 * sm_r;
    let f1 = sa_r * a22 - a2 * sa2 - &m_sm;
    let f2 = -(sa_r * a12) + a2 * sa1 - &m_sm;
    let g1 = &cross - &(mm * sa2);
    let g2 = &cross + &(mm * sa1);
    let [f1, f2, g1, g2] = to_spectral(grid, [f1, f2, g1, g2]);
    ForcingTriple {
        f: VectorField::new(f1, f2).expect("same grid"),
        g: VectorField::new(g1, g2).expect("same grid"),
        h: -&sm,
        t: flow.t,
    }
}

/// One sample of the decay envelope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeSample {
    pub t: f64,
    /// `E(t) = ||f, g, h||_{H^3}`.
    pub e: f64,
    /// `e^t E(t)`.
    pub scaled_e: f64,
    /// `||U(t)||_{W^{s,inf}}`.
    pub winf_u: f64,
    /// `||V(t)||_{W^{s,inf}}`.
    pub winf_v: f64,
}

/// Measure `E(t)` and `||U, V||_{W^{s,inf}}` on the given (nondecreasing) times.
pub fn decay_envelope(data: &LinearData, times: &[f64], s: u32) -> Result<Vec<EnvelopeSample>> {
    if times.is_empty() {
        return Err(TcmError::InvalidInput("decay envelope needs at least one time".into()));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(TcmError::InvalidInput(
            "decay envelope times must be finite, >= 0 and nondecreasing".into(),
        ));
    }
    times
        .iter()
        .map(|&t| {
            let flow = evolve_linear(data, t)?;
            let e = forcing_factored(&flow).energy();
            Ok(EnvelopeSample {
                t,
                e,
                scaled_e: t.exp() * e,
                winf_u: vector_winf_norm(&flow.big_u, s),
                winf_v: vector_winf_norm(&flow.big_v, s),
            })
        })
        .collect()
}

/// Largest `e^t E(t)` over the samples.
pub fn sup_scaled_forcing(samples: &[EnvelopeSample]) -> f64 {
    samples.iter().map(|s| s.scaled_e).fold(0.0, f64::max)
}

/// `max_k e^{-|xi_k|^2 t} / e^{-t}` over the nonzero modes of `f`; at most one
/// when the support stays in `|xi| >= 1`.
pub fn heat_to_damping_ratio(f: &SpectralField, t: f64) -> f64 {
    let grid = f.grid();
    let zero = Complex64::new(0.0, 0.0);
    f.coeffs()
        .indexed_iter()
        .filter(|(_, c)| **c != zero)
        .map(|((i, j), _)| {
            let k2 = grid.wavenumber(i).powi(2) + grid.wavenumber(j).powi(2);
            (-(k2 - 1.0) * t).exp()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::initial::{build_remark_data, verify_support, ConeSpec};
    use crate::norms::{l2_norm, spectral_l1, tensor_linf, winf_norm};
    use std::f64::consts::PI;

    fn diagonal_grid() -> Grid {
        Grid::new(16, 2.0 * PI).unwrap()
    }

    fn diag_data(grid: &Grid) -> LinearData {
        let cone = ConeSpec::new(0.1).unwrap();
        let a = RealField::from_fn(grid, |x, y| (x - y).cos()).forward();
        LinearData::new(a.clone(), a, cone).unwrap()
    }

    fn remark(eps: f64) -> LinearData {
        let side = 4.0 * PI / eps;
        let n = ((6.0 * side / (2.0 * PI)).ceil() as usize).next_power_of_two();
        let grid = Grid::new(n, side).unwrap();
        build_remark_data(&ConeSpec::new(eps).unwrap(), &grid).unwrap()
    }

    fn relative_h3(a: &ForcingTriple, b: &ForcingTriple) -> f64 {
        let diff = vector_hs_norm(&(&a.f - &b.f), 3)
            + vector_hs_norm(&(&a.g - &b.g), 3)
            + hs_norm(&(&a.h - &b.h), 3);
        diff / a.energy().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn evolve_examples() {
        let grid = diagonal_grid();
        let data = diag_data(&grid);
        let flow0 = evolve_linear(&data, 0.0).unwrap();
        assert_eq!(flow0.a.coeffs(), data.a0.coeffs());
        assert_eq!(flow0.m.coeffs(), data.m0.coeffs());

        let flow = evolve_linear(&data, 2f64.ln()).unwrap();
        let half = data.a0.scaled(0.5);
        assert!(l2_norm(&(&flow.a - &half)) < 1e-14);

        // |xi|^2 = 2 for cos(x1 - x2).
        let flow1 = evolve_linear(&data, 1.0).unwrap();
        let expected = data.m0.scaled((-2.0f64).exp());
        assert!(l2_norm(&(&flow1.m - &expected)) < 1e-14);
        assert!(flow1.big_u.divergence().is_zero() || flow1.big_u.divergence().max_abs_coeff() < 1e-15);
        assert!(evolve_linear(&data, -1.0).is_err());
    }

    #[test]
    fn zero_data_gives_zero_forcing() {
        let grid = diagonal_grid();
        let data = LinearData::zero(&grid, ConeSpec::new(0.1).unwrap());
        let flow = evolve_linear(&data, 0.3).unwrap();
        for forcing in [forcing_raw(&flow), forcing_factored(&flow)] {
            assert_eq!(forcing.energy(), 0.0);
        }
    }

    #[test]
    fn diagonal_modes_cancel() {
        let grid = diagonal_grid();
        let m0 = RealField::from_fn(&grid, |x, y| (x - y).cos()).forward();
        let cone = ConeSpec::new(0.1).unwrap();
        let data = LinearData::new(SpectralField::zeros(&grid), m0, cone).unwrap();
        let flow = evolve_linear(&data, 0.0).unwrap();
        assert!(forcing_raw(&flow).energy() < 1e-12);
        assert!(forcing_factored(&flow).energy() < 1e-12);

        let both = diag_data(&grid);
        let flow = evolve_linear(&both, 0.5).unwrap();
        assert!(forcing_factored(&flow).energy() < 1e-12);
        assert!(forcing_raw(&flow).energy() < 1e-12);
    }

    #[test]
    fn tilted_mode_forcing_tracks_offset() {
        // a0 = m0 = cos(k.x) with k = (K, -K + j): the offset j sets xi1 + xi2.
        let grid = Grid::new(64, 16.0 * PI).unwrap();
        let cone = ConeSpec::new(0.5).unwrap();
        let mut energies = Vec::new();
        for offset in [1i64, 2] {
            let a = SpectralField::from_modes(&grid, |k1, k2| {
                if (k1, k2) == (10, -10 + offset) || (k1, k2) == (-10, 10 - offset) {
                    Complex64::new(0.5, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let data = LinearData::new(a.clone(), a, cone).unwrap();
            let flow = evolve_linear(&data, 0.0).unwrap();
            let raw = forcing_raw(&flow);
            let fac = forcing_factored(&flow);
            assert!(raw.energy() > 0.0);
            assert!(relative_h3(&raw, &fac) < 1e-10);
            energies.push(fac.energy());
        }
        // Single-mode forcing: h and the quadratic terms are all linear in xi1 + xi2.
        let ratio = energies[1] / energies[0];
        assert!(ratio > 1.5 && ratio < 2.5, "ratio {ratio}");
    }

    #[test]
    fn h_is_diagonal_derivative_multiplier() {
        let data = remark(0.1);
        let flow = evolve_linear(&data, 0.7).unwrap();
        let forcing = forcing_factored(&flow);
        let expected = flow.m.apply_multiplier(|x1, x2| Complex64::new(0.0, -(x1 + x2)));
        assert!(hs_norm(&(&forcing.h - &expected), 3) <= 1e-12 * hs_norm(&expected, 3));
        let raw = forcing_raw(&flow);
        assert!(relative_h3(&raw, &forcing) < 1e-10);
    }

    #[test]
    fn support_and_decay_invariants() {
        let data = remark(0.1);
        let l1 = spectral_l1(&data.a0);
        let h0 = hs_norm(&forcing_factored(&evolve_linear(&data, 0.0).unwrap()).h, 3);
        for t in [0.0, 0.5, 2.0] {
            let flow = evolve_linear(&data, t).unwrap();
            assert!(verify_support(&flow.a, &data.cone) && verify_support(&flow.m, &data.cone));
            let zero = Complex64::new(0.0, 0.0);
            for (a, b) in flow.m.coeffs().iter().zip(data.m0.coeffs()) {
                assert_eq!(*a == zero, *b == zero);
            }
            assert!(heat_to_damping_ratio(&data.m0, t) <= 1.0);
            let h = hs_norm(&forcing_factored(&flow).h, 3);
            assert!(h <= (-t).exp() * h0 * (1.0 + 1e-12));
            for order in 0..=4u32 {
                let bound = (-t).exp() * 2f64.powi(order as i32) * l1;
                assert!(tensor_linf(&[&flow.a], order) <= bound * (1.0 + 1e-12));
            }
            assert!(winf_norm(&flow.a, 4) <= (-t).exp() * 31.0 * l1 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn envelope_shapes() {
        let grid = diagonal_grid();
        let zero = LinearData::zero(&grid, ConeSpec::new(0.1).unwrap());
        let samples = decay_envelope(&zero, &[0.0, 1.0, 2.0], 4).unwrap();
        assert!(samples.iter().all(|s| s.e == 0.0));
        assert!(decay_envelope(&zero, &[], 4).is_err());
        assert!(decay_envelope(&zero, &[1.0, 0.5], 4).is_err());

        let data = remark(0.1);
        let times: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
        let samples = decay_envelope(&data, &times, 4).unwrap();
        for w in samples.windows(2) {
            let (a, b) = (w[0].t.exp() * w[0].winf_u, w[1].t.exp() * w[1].winf_u);
            assert!(b <= a * 1.01);
            assert!(w[1].scaled_e <= w[0].scaled_e * 1.01);
        }
        assert!(sup_scaled_forcing(&samples) > 0.0);
    }
}
