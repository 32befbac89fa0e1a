//! Right-hand sides of the full tropical climate model and of the system for
//! the perturbation around the linear flow.
//!
//! Full system, with `P` the Leray projector and `div(v (x) v)_i = d_j(v_j v_i)`:
//!
//! ```text
//! du/dt     = -P[u.grad u + div(v (x) v)] - mu u
//! dv/dt     = -u.grad v - v.grad u - grad theta + nu Lap v
//! dtheta/dt = -u.grad theta - div v
//! ```
//!
//! Every quadratic product is formed pointwise on the grid and truncated by
//! the 2/3 rule, so on band-limited states the products are exact.

use ndarray::{Array2, Zip};

use crate::error::{Result, TcmError};
use crate::grid::{forward_many, inverse_many, Grid, RealField, SpectralField, VectorField};
use crate::linear::{ForcingTriple, LinearFlow};
use crate::norms::{homogeneous_hs_norm, hs_norm, l2_norm, vector_hs_norm};

/// Relative divergence allowed in `u` and `w`.
pub const STATE_DIVERGENCE_TOLERANCE: f64 = 1e-8;

/// Tolerance used when matching the times of a state, a flow and a forcing.
fn times_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Triple of spectral fields shaped like a state: a divergence-free vector,
/// a general vector and a scalar. Used for states, tendencies and RK stages.
#[derive(Clone, Debug)]
pub struct Fields {
    pub first: VectorField,
    pub second: VectorField,
    pub theta: SpectralField,
}

/// Tendency `(du, dv, dtheta)` or `(dw, dc, dtheta)`.
pub type Tendency = Fields;

impl Fields {
    pub fn new(first: VectorField, second: VectorField, theta: SpectralField) -> Result<Self> {
        if first.grid() != second.grid() || first.grid() != theta.grid() {
            return Err(TcmError::GridMismatch);
        }
        Ok(Self { first, second, theta })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            first: VectorField::zeros(grid),
            second: VectorField::zeros(grid),
            theta: SpectralField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.theta.grid()
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &Fields) {
        self.first.add_scaled(factor, &other.first);
        self.second.add_scaled(factor, &other.second);
        self.theta.add_scaled(factor, &other.theta);
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            first: self.first.scaled(factor),
            second: self.second.scaled(factor),
            theta: self.theta.scaled(factor),
        }
    }

    pub fn difference(&self, other: &Fields) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn dealias(&self) -> Self {
        Self {
            first: self.first.dealias(),
            second: self.second.dealias(),
            theta: self.theta.dealias(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.first.is_finite() && self.second.is_finite() && self.theta.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.first.is_zero() && self.second.is_zero() && self.theta.is_zero()
    }

    /// `(||first||^2_{H^s} + ||second||^2_{H^s} + ||theta||^2_{H^s})^{1/2}`.
    pub fn hs_norm(&self, s: u32) -> f64 {
        (vector_hs_norm(&self.first, s).powi(2)
            + vector_hs_norm(&self.second, s).powi(2)
            + hs_norm(&self.theta, s).powi(2))
        .sqrt()
    }

    /// Component-wise L^2 pairing.
    pub fn inner(&self, other: &Fields) -> f64 {
        self.first.inner(&other.first) + self.second.inner(&other.second) + self.theta.inner(&other.theta)
    }

    /// Exact solution operator of the linear part over `h`: `e^{-mu h}` on
    /// the first field, `e^{-nu |xi|^2 h}` on the second, identity on theta.
    pub fn propagate_linear(&self, h: f64, mu: f64, nu: f64) -> Self {
        let damp = (-mu * h).exp();
        let heat = |x1: f64, x2: f64| (-nu * (x1 * x1 + x2 * x2) * h).exp();
        Self {
            first: self.first.scaled(damp),
            second: self.second.map(|c| c.apply_real_multiplier(heat)),
            theta: self.theta.clone(),
        }
    }
}

/// State `(u, v, theta)` of the full system at time `t`.
#[derive(Clone, Debug)]
pub struct TCMState {
    pub u: VectorField,
    pub v: VectorField,
    pub theta: SpectralField,
    pub t: f64,
    pub mu: f64,
    pub nu: f64,
}

impl TCMState {
    /// State with `mu = nu = 1`.
    pub fn new(u: VectorField, v: VectorField, theta: SpectralField, t: f64) -> Result<Self> {
        Self::with_coefficients(u, v, theta, t, 1.0, 1.0)
    }

    pub fn with_coefficients(
        u: VectorField,
        v: VectorField,
        theta: SpectralField,
        t: f64,
        mu: f64,
        nu: f64,
    ) -> Result<Self> {
        let fields = Fields::new(u, v, theta)?;
        if !(mu >= 0.0 && nu >= 0.0 && mu.is_finite() && nu.is_finite()) {
            return Err(TcmError::InvalidInput(format!("mu = {mu}, nu = {nu} must be finite and >= 0")));
        }
        Ok(Self::from_fields(fields, t, mu, nu))
    }

    pub fn zeros(grid: &Grid, t: f64) -> Self {
        Self::from_fields(Fields::zeros(grid), t, 1.0, 1.0)
    }

    pub fn from_fields(fields: Fields, t: f64, mu: f64, nu: f64) -> Self {
        Self {
            u: fields.first,
            v: fields.second,
            theta: fields.theta,
            t,
            mu,
            nu,
        }
    }

    pub fn fields(&self) -> Fields {
        Fields {
            first: self.u.clone(),
            second: self.v.clone(),
            theta: self.theta.clone(),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.theta.grid()
    }

    /// Finiteness and the divergence constraint on `u`.
    pub fn check(&self) -> Result<()> {
        if !(self.u.is_finite() && self.v.is_finite() && self.theta.is_finite()) {
            return Err(TcmError::NonFinite(format!("state at t = {}", self.t)));
        }
        let div = self.u.relative_divergence();
        if div > STATE_DIVERGENCE_TOLERANCE {
            return Err(TcmError::NotDivergenceFree(div));
        }
        Ok(())
    }
}

/// Perturbation `(w, c, theta) = (u - U, v - V, theta)` at time `t`.
#[derive(Clone, Debug)]
pub struct PerturbationState {
    pub w: VectorField,
    pub c: VectorField,
    pub theta: SpectralField,
    pub t: f64,
}

impl PerturbationState {
    pub fn new(w: VectorField, c: VectorField, theta: SpectralField, t: f64) -> Result<Self> {
        Ok(Self::from_fields(Fields::new(w, c, theta)?, t))
    }

    pub fn zeros(grid: &Grid, t: f64) -> Self {
        Self::from_fields(Fields::zeros(grid), t)
    }

    pub fn from_fields(fields: Fields, t: f64) -> Self {
        Self {
            w: fields.first,
            c: fields.second,
            theta: fields.theta,
            t,
        }
    }

    pub fn fields(&self) -> Fields {
        Fields {
            first: self.w.clone(),
            second: self.c.clone(),
            theta: self.theta.clone(),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.theta.grid()
    }
}

/// Which terms the stepper treats explicitly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// All quadratic terms, the `theta`-`v` coupling and (for the
    /// perturbation) the forcing.
    #[default]
    Nonlinear,
    /// Only damping and diffusion: every explicit term is dropped, so the
    /// stepper reproduces the linear flow `e^{-mu t}`, `e^{nu t Lap}`.
    Linearized,
}

fn grid_values(fields: &[&SpectralField]) -> Vec<Array2<f64>> {
    inverse_many(fields).into_iter().map(RealField::into_values).collect()
}

fn to_spectral(grid: &Grid, values: Vec<Array2<f64>>) -> Vec<SpectralField> {
    let real: Vec<RealField> = values
        .into_iter()
        .map(|v| RealField::from_values_unchecked(grid, v))
        .collect();
    forward_many(&real).into_iter().map(|f| f.dealias()).collect()
}

/// `a1 b1 + a2 b2` pointwise.
fn dot(a1: &Array2<f64>, b1: &Array2<f64>, a2: &Array2<f64>, b2: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(a1.raw_dim());
    Zip::from(&mut out)
        .and(a1)
        .and(b1)
        .and(a2)
        .and(b2)
        .for_each(|o, &a, &b, &c, &d| *o = a * b + c * d);
    out
}

/// Grid values of a vector field and its gradient: `[f1, f2, d1 f1, d2 f1, d1 f2, d2 f2]`.
fn with_gradient(v: &VectorField) -> [SpectralField; 6] {
    [
        v.first().clone(),
        v.second().clone(),
        v.first().d1(),
        v.first().d2(),
        v.second().d1(),
        v.second().d2(),
    ]
}

/// Unprojected momentum nonlinearity `N = u.grad u + div(v (x) v)`, together
/// with `u.grad v + v.grad u` and `u.grad theta`, all dealiased.
fn quadratic_terms(fields: &Fields) -> (VectorField, VectorField, SpectralField) {
    let grid = fields.grid();
    let u = with_gradient(&fields.first);
    let v = with_gradient(&fields.second);
    let th = [fields.theta.d1(), fields.theta.d2()];
    let refs: Vec<&SpectralField> = u.iter().chain(v.iter()).chain(th.iter()).collect();
    let r = grid_values(&refs);
    let (u1, u2, u11, u12, u21, u22) = (&r[0], &r[1], &r[2], &r[3], &r[4], &r[5]);
    let (v1, v2, v11, v12, v21, v22) = (&r[6], &r[7], &r[8], &r[9], &r[10], &r[11]);
    let (t1, t2) = (&r[12], &r[13]);
    let div_v = v11 + v22;
    // div(v (x) v)_i = v.grad v_i + v_i div v.
    let nu1 = dot(u1, u11, u2, u12) + dot(v1, v11, v2, v12) + v1 * &div_v;
    let nu2 = dot(u1, u21, u2, u22) + dot(v1, v21, v2, v22) + v2 * &div_v;
    let nv1 = dot(u1, v11, u2, v12) + dot(v1, u11, v2, u12);
    let nv2 = dot(u1, v21, u2, v22) + dot(v1, u21, v2, u22);
    let nt = dot(u1, t1, u2, t2);
    let mut s = to_spectral(grid, vec![nu1, nu2, nv1, nv2, nt]).into_iter();
    let mut next = || s.next().expect("five products");
    let n_u = VectorField::new(next(), next()).expect("same grid");
    let n_v = VectorField::new(next(), next()).expect("same grid");
    (n_u, n_v, next())
}

/// `N = u.grad u + div(v (x) v)` before projection.
pub fn momentum_nonlinearity(state: &TCMState) -> VectorField {
    quadratic_terms(&state.fields()).0
}

/// Explicit part of the full right-hand side (everything except `-mu u`
/// and `nu Lap v`).
pub fn explicit_full(fields: &Fields) -> Fields {
    let (n_u, n_v, n_t) = quadratic_terms(fields);
    let grad_theta = VectorField::gradient(&fields.theta);
    Fields {
        first: -&n_u.leray_project(),
        second: -&(&n_v + &grad_theta),
        theta: -&(&n_t + &fields.second.divergence()),
    }
}

/// The same explicit part assembled from divergence forms:
/// `u.grad u = div(u (x) u)`, `v.grad u_i = d_j(v_j u_i) - u_i div v`,
/// `u.grad v = div(u (x) v)`, `u.grad theta = div(u theta)`; valid for
/// divergence-free `u`.
pub fn explicit_full_conservative(fields: &Fields) -> Fields {
    let grid = fields.grid();
    let (u, v, th) = (&fields.first, &fields.second, &fields.theta);
    let r = grid_values(&[u.first(), u.second(), v.first(), v.second(), th, &v.divergence()]);
    let (u1, u2, v1, v2, t, dv) = (&r[0], &r[1], &r[2], &r[3], &r[4], &r[5]);
    let p = to_spectral(
        grid,
        vec![
            u1 * u1,
            u1 * u2,
            u2 * u2,
            v1 * v1,
            v1 * v2,
            v2 * v2,
            u1 * v1,
            u1 * v2,
            u2 * v1,
            u2 * v2,
            u1 * t,
            u2 * t,
            u1 * dv,
            u2 * dv,
        ],
    );
    let div_pair = |a: &SpectralField, b: &SpectralField| &a.d1() + &b.d2();
    // (u (x) v)_{ji} = u_j v_i, (v (x) u)_{ji} = v_j u_i.
    let n_u1 = &div_pair(&p[0], &p[1]) + &div_pair(&p[3], &p[4]);
    let n_u2 = &div_pair(&p[1], &p[2]) + &div_pair(&p[4], &p[5]);
    let n_v1 = &(&div_pair(&p[6], &p[8]) + &div_pair(&p[6], &p[7])) - &p[12];
    let n_v2 = &(&div_pair(&p[7], &p[9]) + &div_pair(&p[8], &p[9])) - &p[13];
    let n_t = div_pair(&p[10], &p[11]);
    let n_u = VectorField::new(n_u1, n_u2).expect("same grid");
    let n_v = VectorField::new(n_v1, n_v2).expect("same grid");
    let grad_theta = VectorField::gradient(th);
    Fields {
        first: -&n_u.leray_project(),
        second: -&(&n_v + &grad_theta),
        theta: -&(&n_t + &v.divergence()),
    }
}

/// `(-mu u, nu Lap v, 0)`.
pub fn linear_part(fields: &Fields, mu: f64, nu: f64) -> Fields {
    Fields {
        first: fields.first.scaled(-mu),
        second: fields.second.map(|c| c.laplacian().scaled(nu)),
        theta: SpectralField::zeros(fields.grid()),
    }
}

/// Full tendency of the tropical climate model at `state`.
pub fn rhs_full(state: &TCMState) -> Result<Tendency> {
    let fields = state.fields();
    let mut out = explicit_full(&fields);
    out.axpy(1.0, &linear_part(&fields, state.mu, state.nu));
    if !out.is_finite() {
        return Err(TcmError::NonFinite(format!("full tendency at t = {}", state.t)));
    }
    Ok(out)
}

/// Pressure with zero mean: `-Lap p = div N`, `N = u.grad u + div(v (x) v)`.
/// With this sign `N + grad p = P N`, so `du/dt = -N - grad p - mu u`.
pub fn compute_pressure(state: &TCMState) -> SpectralField {
    let n = momentum_nonlinearity(state);
    let div = n.divergence();
    div.apply_real_multiplier(|x1, x2| {
        let k2 = x1 * x1 + x2 * x2;
        if k2 == 0.0 {
            0.0
        } else {
            1.0 / k2
        }
    })
}

fn check_times(t: f64, flow: &LinearFlow, forcing: &ForcingTriple) -> Result<()> {
    if !times_match(t, flow.t) {
        return Err(TcmError::TimeMismatch { state: t, flow: flow.t });
    }
    if !times_match(t, forcing.t) {
        return Err(TcmError::TimeMismatch { state: t, flow: forcing.t });
    }
    Ok(())
}

/// Explicit part of the perturbation right-hand side (everything except
/// `-mu w` and `nu Lap c`), with `V = (m, m)` taken from the flow.
pub fn explicit_perturbation(fields: &Fields, flow: &LinearFlow, forcing: &ForcingTriple) -> Fields {
    let grid = fields.grid();
    let w = with_gradient(&fields.first);
    let c = with_gradient(&fields.second);
    let uu = with_gradient(&flow.big_u);
    let m = [flow.m.clone(), flow.m.d1(), flow.m.d2()];
    let th = [fields.theta.d1(), fields.theta.d2()];
    let refs: Vec<&SpectralField> = w
        .iter()
        .chain(c.iter())
        .chain(uu.iter())
        .chain(m.iter())
        .chain(th.iter())
        .collect();
    let r = grid_values(&refs);
    let (w1, w2, w11, w12, w21, w22) = (&r[0], &r[1], &r[2], &r[3], &r[4], &r[5]);
    let (c1, c2, c11, c12, c21, c22) = (&r[6], &r[7], &r[8], &r[9], &r[10], &r[11]);
    let (b1, b2, b11, b12, b21, b22) = (&r[12], &r[13], &r[14], &r[15], &r[16], &r[17]);
    let (mm, m1, m2) = (&r[18], &r[19], &r[20]);
    let (t1, t2) = (&r[21], &r[22]);

    let div_c = c11 + c22;
    let div_bv = m1 + m2;
    // V = (m, m): c.grad V_i and w.grad V_i do not depend on i.
    let c_grad_v = dot(c1, m1, c2, m2);
    let w_grad_v = dot(w1, m1, w2, m2);
    let m_div_c = mm * &div_c;

    // Bracket of the w-equation, sign flipped.
    let mut nw1 = dot(w1, w11, w2, w12) + dot(b1, w11, b2, w12) + dot(c1, c11, c2, c12) + c1 * &div_c;
    nw1 = nw1 + &c_grad_v + &(c1 * &div_bv) + &(mm * &(c11 + c12)) + &m_div_c + &dot(w1, b11, w2, b12);
    let mut nw2 = dot(w1, w21, w2, w22) + dot(b1, w21, b2, w22) + dot(c1, c21, c2, c22) + c2 * &div_c;
    nw2 = nw2 + &c_grad_v + &(c2 * &div_bv) + &(mm * &(c21 + c22)) + &m_div_c + &dot(w1, b21, w2, b22);

    // c-equation quadratic and cross terms, sign flipped.
    let mut nc1 = dot(w1, c11, w2, c12) + dot(b1, c11, b2, c12) + dot(c1, w11, c2, w12);
    nc1 = nc1 + &(mm * &(w11 + w12)) + &dot(c1, b11, c2, b12) + &w_grad_v;
    let mut nc2 = dot(w1, c21, w2, c22) + dot(b1, c21, b2, c22) + dot(c1, w21, c2, w22);
    nc2 = nc2 + &(mm * &(w21 + w22)) + &dot(c1, b21, c2, b22) + &w_grad_v;

    let nt = dot(w1, t1, w2, t2) + dot(b1, t1, b2, t2);

    let mut s = to_spectral(grid, vec![nw1, nw2, nc1, nc2, nt]).into_iter();
    let mut next = || s.next().expect("five products");
    let n_w = VectorField::new(next(), next()).expect("same grid");
    let n_c = VectorField::new(next(), next()).expect("same grid");
    let n_t = next();

    let grad_theta = VectorField::gradient(&fields.theta);
    Fields {
        first: (&forcing.f - &n_w).leray_project(),
        second: &(&forcing.g - &n_c) - &grad_theta,
        theta: &(&forcing.h - &n_t) - &fields.second.divergence(),
    }
}

/// Tendency of the perturbation `(w, c, theta)`; `flow` and `forcing` must be
/// evaluated at `p.t`.
pub fn rhs_perturbation(p: &PerturbationState, flow: &LinearFlow, forcing: &ForcingTriple) -> Result<Tendency> {
    check_times(p.t, flow, forcing)?;
    let fields = p.fields();
    let mut out = explicit_perturbation(&fields, flow, forcing);
    out.axpy(1.0, &linear_part(&fields, flow.mu, flow.nu));
    if !out.is_finite() {
        return Err(TcmError::NonFinite(format!("perturbation tendency at t = {}", p.t)));
    }
    Ok(out)
}

/// `(u, v, theta) = (U + w, V + c, theta)`, with the flow's `mu`, `nu`.
pub fn recompose(p: &PerturbationState, flow: &LinearFlow) -> Result<TCMState> {
    if !times_match(p.t, flow.t) {
        return Err(TcmError::TimeMismatch { state: p.t, flow: flow.t });
    }
    if p.grid() != flow.grid() {
        return Err(TcmError::GridMismatch);
    }
    Ok(TCMState {
        u: &flow.big_u + &p.w,
        v: &flow.big_v + &p.c,
        theta: p.theta.clone(),
        t: p.t,
        mu: flow.mu,
        nu: flow.nu,
    })
}

/// `(w, c, theta) = (u - U, v - V, theta)`.
pub fn decompose(state: &TCMState, flow: &LinearFlow) -> Result<PerturbationState> {
    if !times_match(state.t, flow.t) {
        return Err(TcmError::TimeMismatch { state: state.t, flow: flow.t });
    }
    if state.grid() != flow.grid() {
        return Err(TcmError::GridMismatch);
    }
    Ok(PerturbationState {
        w: &state.u - &flow.big_u,
        c: &state.v - &flow.big_v,
        theta: state.theta.clone(),
        t: state.t,
    })
}

/// `1/2 ||(u, v, theta)||^2_{L^2}`.
pub fn l2_energy(fields: &Fields) -> f64 {
    0.5 * fields.inner(fields)
}

/// `mu ||u||^2_{L^2} + nu ||grad v||^2_{L^2}`.
pub fn dissipation(fields: &Fields, mu: f64, nu: f64) -> f64 {
    let u2 = l2_norm(fields.first.first()).powi(2) + l2_norm(fields.first.second()).powi(2);
    let gv2 = homogeneous_hs_norm(fields.second.first(), 1).powi(2)
        + homogeneous_hs_norm(fields.second.second(), 1).powi(2);
    mu * u2 + nu * gv2
}

/// `<du, u> + <dv, v> + <dtheta, theta>`.
pub fn energy_pairing(tendency: &Tendency, fields: &Fields) -> f64 {
    tendency.inner(fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::{build_remark_data, random_band_limited, ConeSpec, LinearData};
    use crate::linear::{evolve_linear, evolve_linear_with, forcing_factored};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn small_grid() -> Grid {
        Grid::new(32, 2.0 * PI).unwrap()
    }

    fn random_fields(grid: &Grid, seed: u64, radius: f64) -> Fields {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || random_band_limited(grid, radius, &mut rng);
        let u = VectorField::new(draw(), draw()).unwrap().leray_project();
        let v = VectorField::new(draw(), draw()).unwrap();
        Fields::new(u, v, draw()).unwrap()
    }

    fn remark_setup() -> (LinearData, Grid) {
        let eps = 0.25;
        let side = 4.0 * PI / eps;
        let grid = Grid::new(64, side).unwrap();
        let data = build_scaled(&grid, eps);
        (data, grid)
    }

    fn build_scaled(grid: &Grid, eps: f64) -> LinearData {
        build_remark_data(&ConeSpec::new(eps).unwrap(), grid).unwrap()
    }

    fn rel(a: &Fields, b: &Fields) -> f64 {
        a.difference(b).hs_norm(3) / b.hs_norm(3).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn zero_and_constant_states() {
        let grid = small_grid();
        let zero = TCMState::zeros(&grid, 0.0);
        assert!(rhs_full(&zero).unwrap().is_zero());
        let theta = RealField::from_fn(&grid, |_, _| 3.0).forward();
        let state = TCMState::new(VectorField::zeros(&grid), VectorField::zeros(&grid), theta, 0.0).unwrap();
        let d = rhs_full(&state).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn shear_flow_only_damps() {
        let grid = small_grid();
        let u1 = RealField::from_fn(&grid, |_, y| y.sin()).forward();
        let u = VectorField::new(u1, SpectralField::zeros(&grid)).unwrap();
        let state = TCMState::new(u.clone(), VectorField::zeros(&grid), SpectralField::zeros(&grid), 0.0).unwrap();
        let d = rhs_full(&state).unwrap();
        let expected = Fields::new(u.scaled(-1.0), VectorField::zeros(&grid), SpectralField::zeros(&grid)).unwrap();
        assert!(d.difference(&expected).hs_norm(0) < 1e-14);
        assert!(compute_pressure(&state).max_abs_coeff() < 1e-15);
    }

    #[test]
    fn pressure_completes_projection() {
        let grid = small_grid();
        let f = random_fields(&grid, 7, 8.0);
        let state = TCMState::from_fields(f, 0.0, 1.0, 1.0);
        let n = momentum_nonlinearity(&state);
        let p = compute_pressure(&state);
        assert_eq!(p.coeff(0, 0), num_complex::Complex64::new(0.0, 0.0));
        let lhs = &n + &VectorField::gradient(&p);
        let err = vector_hs_norm(&(&lhs - &n.leray_project()), 0);
        assert!(err <= 1e-10 * vector_hs_norm(&n, 0), "err {err}");
        // Adding grad p back to the projected tendency gives -N - mu u.
        let d = rhs_full(&state).unwrap();
        let unprojected = &(&d.first + &VectorField::gradient(&p)) + &state.u.scaled(state.mu);
        assert!(vector_hs_norm(&(&unprojected + &n), 0) <= 1e-10 * vector_hs_norm(&n, 0));
    }

    /// `int f g` by the trapezoid rule on the grid; exact for the products of
    /// band-limited fields that appear here.
    fn quadrature(a: &SpectralField, b: &SpectralField) -> f64 {
        let h = a.grid().spacing();
        let (ra, rb) = (a.inverse(), b.inverse());
        h * h * ra.values().iter().zip(rb.values()).map(|(x, y)| x * y).sum::<f64>()
    }

    #[test]
    fn energy_law_against_direct_summation() {
        let grid = small_grid();
        for seed in 0..3 {
            let f = random_fields(&grid, seed, 6.0);
            let state = TCMState::from_fields(f.clone(), 0.0, 0.7, 1.3);
            let d = rhs_full(&state).unwrap();
            let mut pairing = quadrature(&d.theta, &f.theta);
            for i in 0..2 {
                pairing += quadrature(&d.first.components()[i], &f.first.components()[i]);
                pairing += quadrature(&d.second.components()[i], &f.second.components()[i]);
            }
            let mut diss = 0.0;
            for i in 0..2 {
                let ui = &f.first.components()[i];
                let vi = &f.second.components()[i];
                diss += 0.7 * quadrature(ui, ui);
                diss += 1.3 * (quadrature(&vi.d1(), &vi.d1()) + quadrature(&vi.d2(), &vi.d2()));
            }
            assert!((pairing + diss).abs() <= 1e-8 * diss, "pairing {pairing} diss {diss}");
            assert!((energy_pairing(&d, &f) + dissipation(&f, 0.7, 1.3)).abs() <= 1e-8 * diss);
        }
    }

    #[test]
    fn conservative_forms_agree() {
        let grid = small_grid();
        let f = random_fields(&grid, 11, 8.0);
        let a = explicit_full(&f);
        let b = explicit_full_conservative(&f);
        assert!(rel(&a, &b) < 1e-12, "{}", rel(&a, &b));
    }

    #[test]
    fn two_path_consistency() {
        let (data, grid) = remark_setup();
        let t = 0.3;
        for (mu, nu) in [(1.0, 1.0), (0.5, 2.0)] {
            let flow = evolve_linear_with(&data, t, mu, nu).unwrap();
            let forcing = forcing_factored(&flow);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut draw = || random_band_limited(&grid, 2.0, &mut rng).scaled(1e-3);
            let w = VectorField::new(draw(), draw()).unwrap().leray_project();
            let c = VectorField::new(draw(), draw()).unwrap();
            let p = PerturbationState::new(w, c, draw(), t).unwrap();
            let dp = rhs_perturbation(&p, &flow, &forcing).unwrap();
            assert!(dp.first.relative_divergence() <= 1e-10);
            let mut via_pert = dp;
            via_pert.first.add_scaled(1.0, &flow.du_dt());
            via_pert.second.add_scaled(1.0, &flow.dv_dt());
            let full = rhs_full(&recompose(&p, &flow).unwrap()).unwrap();
            assert!(rel(&via_pert, &full) <= 1e-8, "rel {}", rel(&via_pert, &full));
        }
    }

    #[test]
    fn zero_perturbation_sees_only_forcing() {
        let (data, grid) = remark_setup();
        let flow = evolve_linear(&data, 0.5).unwrap();
        let forcing = forcing_factored(&flow);
        let p = PerturbationState::zeros(&grid, 0.5);
        let d = rhs_perturbation(&p, &flow, &forcing).unwrap();
        let expected = Fields::new(forcing.f.leray_project(), forcing.g.clone(), forcing.h.clone()).unwrap();
        assert!(rel(&d, &expected) < 1e-14);

        let zero = ForcingTriple::zero(&grid, 0.5);
        let dz = rhs_perturbation(&p, &flow, &zero).unwrap();
        // Paired transforms leak roundoff from the flow into the zero fields.
        assert!(dz.hs_norm(3) <= 1e-14 * expected.hs_norm(3));
        let late = PerturbationState::zeros(&grid, 0.6);
        assert!(matches!(rhs_perturbation(&late, &flow, &forcing), Err(TcmError::TimeMismatch { .. })));
    }

    #[test]
    fn diagonal_data_is_an_exact_solution() {
        let grid = Grid::new(16, 2.0 * PI).unwrap();
        let a = RealField::from_fn(&grid, |x, y| (x - y).cos()).forward();
        let data = LinearData::new(a.clone(), a, ConeSpec::new(0.1).unwrap()).unwrap();
        let flow = evolve_linear(&data, 0.2).unwrap();
        let forcing = forcing_factored(&flow);
        let d = rhs_perturbation(&PerturbationState::zeros(&grid, 0.2), &flow, &forcing).unwrap();
        assert!(d.hs_norm(3) < 1e-12);
    }

    #[test]
    fn recompose_round_trip() {
        let (data, grid) = remark_setup();
        let flow = evolve_linear(&data, 1.0).unwrap();
        let zero = PerturbationState::zeros(&grid, 1.0);
        let s = recompose(&zero, &flow).unwrap();
        assert_eq!(s.u.first().coeffs(), flow.big_u.first().coeffs());
        assert_eq!(s.v.second().coeffs(), flow.big_v.second().coeffs());
        assert!(s.theta.is_zero());

        let f = random_fields(&grid, 3, 1.5);
        let p = PerturbationState::from_fields(f, 1.0);
        let back = decompose(&recompose(&p, &flow).unwrap(), &flow).unwrap();
        assert!(rel(&back.fields(), &p.fields()) < 1e-15);

        let empty = LinearData::zero(&grid, data.cone);
        let flow0 = evolve_linear(&empty, 1.0).unwrap();
        let same = recompose(&p, &flow0).unwrap();
        assert_eq!(same.u.first().coeffs(), p.w.first().coeffs());
        assert!(matches!(
            recompose(&PerturbationState::zeros(&grid, 2.0), &flow),
            Err(TcmError::TimeMismatch { .. })
        ));
    }

    #[test]
    fn linear_propagator_matches_multipliers() {
        let grid = small_grid();
        let f = random_fields(&grid, 1, 4.0);
        let g = f.propagate_linear(0.5, 1.0, 1.0);
        assert!(vector_hs_norm(&(&g.first - &f.first.scaled((-0.5f64).exp())), 0) < 1e-15);
        assert_eq!(g.theta.coeffs(), f.theta.coeffs());
    }
}
