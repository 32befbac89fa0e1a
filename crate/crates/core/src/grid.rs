//! Periodic collocation grid, Fourier-series transforms and spectral operators.
//!
//! Fields live on the torus `[0, S)^2` sampled at `n x n` points. Spectral
//! coefficients follow the series convention
//!
//! ```text
//! f(x) = sum_k c_k exp(i xi_k . x),    xi_k = 2 pi k / S,   -n/2 <= k_i < n/2
//! ```
//!
//! so that `max |f| <= sum |c_k|` holds with constant one. Arrays are indexed
//! `[i1, i2]`, with `i1` running along `x1` and `i2` along `x2`; coefficient
//! arrays use FFT ordering (mode `k` stored at index `k mod n`).
//!
//! Nyquist modes (`|k_i| = n/2`) are zeroed in every constructed field so that
//! derivative multipliers stay Hermitian.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, TcmError};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

struct GridInner {
    n: usize,
    side: f64,
    modes: Vec<i64>,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    backward: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on `[0, side)^2` with `n_points` samples per axis.
///
/// Cheap to clone: the wavenumber table and FFT plans are shared.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_points", &self.n())
            .field("side", &self.side())
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.n() == other.n() && self.side().to_bits() == other.side().to_bits())
    }
}

/// Build a grid; `n_points` must be even and at least 8, `side` positive.
pub fn make_grid(n_points: usize, side: f64) -> Result<Grid> {
    Grid::new(n_points, side)
}

impl Grid {
    pub fn new(n_points: usize, side: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_multiple_of(2) {
            return Err(TcmError::InvalidGrid(format!(
                "n_points = {n_points} must be even and >= 8"
            )));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(TcmError::InvalidGrid(format!("side = {side} must be positive")));
        }
        let half = (n_points / 2) as i64;
        let modes: Vec<i64> = (0..n_points as i64)
            .map(|i| if i < half { i } else { i - n_points as i64 })
            .collect();
        let dxi = 2.0 * PI / side;
        let wavenumbers = modes.iter().map(|&k| dxi * k as f64).collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let backward = planner.plan_fft_inverse(n_points);
        Ok(Self {
            inner: Arc::new(GridInner {
                n: n_points,
                side,
                modes,
                wavenumbers,
                forward,
                backward,
            }),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    #[inline]
    pub fn side(&self) -> f64 {
        self.inner.side
    }

    /// Physical distance between neighbouring collocation points.
    pub fn spacing(&self) -> f64 {
        self.side() / self.n() as f64
    }

    /// Distance between neighbouring lattice wavenumbers, `2 pi / S`.
    pub fn lattice_spacing(&self) -> f64 {
        2.0 * PI / self.side()
    }

    /// Signed integer mode stored at array index `i`.
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        self.inner.modes[i]
    }

    /// Wavenumber `xi = 2 pi k / S` stored at array index `i`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> f64 {
        self.inner.wavenumbers[i]
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n() / 2
    }

    /// Array index holding signed mode `k`, if it is representable.
    pub fn index_of_mode(&self, k: i64) -> Option<usize> {
        let half = (self.n() / 2) as i64;
        if k >= -half && k < half {
            Some(k.rem_euclid(self.n() as i64) as usize)
        } else {
            None
        }
    }

    /// Collocation coordinate `x_j = j S / n`.
    pub fn point(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    /// Largest integer mode kept by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n() / 3) as i64
    }

    /// Largest wavenumber magnitude per axis kept by the 2/3 rule.
    pub fn dealias_wavenumber(&self) -> f64 {
        self.dealias_cutoff() as f64 * self.lattice_spacing()
    }

    #[inline]
    fn keeps_after_dealias(&self, i: usize) -> bool {
        3 * self.mode(i).unsigned_abs() as usize <= self.n()
    }

    /// Unnormalized in-place 2D FFT over a row-major `n x n` buffer.
    fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n();
        let plan = if inverse {
            &self.inner.backward
        } else {
            &self.inner.forward
        };
        let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (ib..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                let start = if ib == jb { i + 1 } else { jb };
                for j in start..(jb + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Multi-index `alpha = (alpha_1, alpha_2)` for `D^alpha = d1^alpha_1 d2^alpha_2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub first: u32,
    pub second: u32,
}

impl MultiIndex {
    pub const fn new(first: u32, second: u32) -> Self {
        Self { first, second }
    }

    pub const fn order(&self) -> u32 {
        self.first + self.second
    }

    /// All multi-indices with `|alpha| = order`.
    pub fn of_order(order: u32) -> impl Iterator<Item = MultiIndex> {
        (0..=order).map(move |j| MultiIndex::new(j, order - j))
    }

    /// All multi-indices with `|alpha| <= order`, sorted by order.
    pub fn up_to(order: u32) -> impl Iterator<Item = MultiIndex> {
        (0..=order).flat_map(MultiIndex::of_order)
    }

    /// Symbol `(i xi_1)^alpha_1 (i xi_2)^alpha_2`.
    pub fn symbol(&self, xi1: f64, xi2: f64) -> Complex64 {
        let magnitude = xi1.powi(self.first as i32) * xi2.powi(self.second as i32);
        let phase = match self.order() % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        phase * magnitude
    }
}

/// Real-valued field sampled on the collocation points.
#[derive(Clone, Debug)]
pub struct RealField {
    grid: Grid,
    values: Array2<f64>,
}

impl RealField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: Array2::zeros((grid.n(), grid.n())),
        }
    }

    /// Sample `f(x1, x2)` on the grid.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| {
            f(grid.point(i), grid.point(j))
        });
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_values(grid: &Grid, values: Array2<f64>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != grid.n() || cols != grid.n() {
            return Err(TcmError::ShapeMismatch {
                expected: grid.n(),
                rows,
                cols,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TcmError::NonFinite("real field".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Wrap values without the finiteness check, so that a diverging
    /// computation can carry NaN/Inf to the caller's own check.
    ///
    /// # Panics
    /// If `values` is not `n x n`.
    pub fn from_values_unchecked(grid: &Grid, values: Array2<f64>) -> Self {
        assert_eq!(values.dim(), (grid.n(), grid.n()), "real field shape");
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Grid maximum of `|f|`.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn forward(&self) -> SpectralField {
        forward(self)
    }
}

/// Fourier-series coefficients of a field on a [`Grid`].
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Array2<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: Array2::from_elem((grid.n(), grid.n()), ZERO),
        }
    }

    /// Wrap a coefficient array (FFT ordering); Nyquist rows are cleared.
    pub fn from_coeffs(grid: &Grid, coeffs: Array2<Complex64>) -> Result<Self> {
        let (rows, cols) = coeffs.dim();
        if rows != grid.n() || cols != grid.n() {
            return Err(TcmError::ShapeMismatch {
                expected: grid.n(),
                rows,
                cols,
            });
        }
        let mut field = Self {
            grid: grid.clone(),
            coeffs,
        };
        field.clear_nyquist();
        Ok(field)
    }

    /// Coefficients from a function of the signed integer modes `(k1, k2)`.
    pub fn from_modes(grid: &Grid, f: impl Fn(i64, i64) -> Complex64) -> Self {
        let coeffs = Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| {
            if grid.is_nyquist(i) || grid.is_nyquist(j) {
                ZERO
            } else {
                f(grid.mode(i), grid.mode(j))
            }
        });
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    /// Coefficients from a function of the wavenumbers `(xi1, xi2)`.
    pub fn from_wavenumbers(grid: &Grid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let coeffs = Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| {
            if grid.is_nyquist(i) || grid.is_nyquist(j) {
                ZERO
            } else {
                f(grid.wavenumber(i), grid.wavenumber(j))
            }
        });
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    /// Mutable access to the raw coefficients. Callers keep Nyquist rows zero.
    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Array2<Complex64> {
        self.coeffs
    }

    /// Coefficient of mode `(k1, k2)`; zero when the mode is not on the lattice.
    pub fn coeff(&self, k1: i64, k2: i64) -> Complex64 {
        match (self.grid.index_of_mode(k1), self.grid.index_of_mode(k2)) {
            (Some(i), Some(j)) => self.coeffs[[i, j]],
            _ => ZERO,
        }
    }

    pub fn set_coeff(&mut self, k1: i64, k2: i64, value: Complex64) -> Result<()> {
        match (self.grid.index_of_mode(k1), self.grid.index_of_mode(k2)) {
            (Some(i), Some(j)) if !self.grid.is_nyquist(i) && !self.grid.is_nyquist(j) => {
                self.coeffs[[i, j]] = value;
                Ok(())
            }
            _ => Err(TcmError::InvalidInput(format!(
                "mode ({k1}, {k2}) is not a representable non-Nyquist mode"
            ))),
        }
    }

    fn clear_nyquist(&mut self) {
        let h = self.grid.n() / 2;
        self.coeffs.row_mut(h).fill(ZERO);
        self.coeffs.column_mut(h).fill(ZERO);
    }

    /// Multiply every mode by `symbol(xi1, xi2)`.
    pub fn apply_multiplier(&self, symbol: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut out = self.clone();
        out.apply_multiplier_in_place(symbol);
        out
    }

    pub fn apply_multiplier_in_place(&mut self, symbol: impl Fn(f64, f64) -> Complex64) {
        let grid = &self.grid;
        for ((i, j), c) in self.coeffs.indexed_iter_mut() {
            *c *= symbol(grid.wavenumber(i), grid.wavenumber(j));
        }
        self.clear_nyquist();
    }

    /// Multiply every mode by a real symbol.
    pub fn apply_real_multiplier(&self, symbol: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = self.clone();
        let grid = &out.grid;
        for ((i, j), c) in out.coeffs.indexed_iter_mut() {
            *c *= symbol(grid.wavenumber(i), grid.wavenumber(j));
        }
        out.clear_nyquist();
        out
    }

    /// `D^alpha f`, multiplier `(i xi)^alpha`.
    pub fn derivative(&self, alpha: MultiIndex) -> Self {
        if alpha.order() == 0 {
            return self.clone();
        }
        self.apply_multiplier(|x1, x2| alpha.symbol(x1, x2))
    }

    pub fn d1(&self) -> Self {
        self.derivative(MultiIndex::new(1, 0))
    }

    pub fn d2(&self) -> Self {
        self.derivative(MultiIndex::new(0, 1))
    }

    /// `(d1 + d2) f`, the derivative across the diagonal strip.
    pub fn diagonal_derivative(&self) -> Self {
        self.apply_multiplier(|x1, x2| Complex64::new(0.0, x1 + x2))
    }

    pub fn laplacian(&self) -> Self {
        self.apply_real_multiplier(|x1, x2| -(x1 * x1 + x2 * x2))
    }

    /// 2/3-rule truncation: zero every mode with `max(|k1|, |k2|) > n/3`.
    pub fn dealias(&self) -> Self {
        let mut out = self.clone();
        out.dealias_in_place();
        out
    }

    pub fn dealias_in_place(&mut self) {
        let grid = self.grid.clone();
        for ((i, j), c) in self.coeffs.indexed_iter_mut() {
            if !(grid.keeps_after_dealias(i) && grid.keeps_after_dealias(j)) {
                *c = ZERO;
            }
        }
        self.clear_nyquist();
    }

    pub fn inverse(&self) -> RealField {
        inverse(self)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self.coeffs.mapv(|c| c * factor),
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &SpectralField) {
        debug_assert_eq!(self.grid, other.grid);
        Zip::from(&mut self.coeffs)
            .and(&other.coeffs)
            .for_each(|a, &b| *a += b * factor);
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()))
    }

    /// L2 inner product `<f, g>` of the real functions represented by both fields.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let area = self.grid.side() * self.grid.side();
        let sum: f64 = self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum();
        area * sum
    }

    pub fn same_grid(&self, other: &SpectralField) -> bool {
        self.grid == other.grid
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        self.add_scaled(1.0, rhs);
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, rhs: &SpectralField) {
        self.add_scaled(-1.0, rhs);
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

/// Forward transform of a real field; Nyquist modes are dropped.
pub fn forward(field: &RealField) -> SpectralField {
    let grid = field.grid();
    let n = grid.n();
    let mut data: Vec<Complex64> = field
        .values
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    grid.fft2(&mut data, false);
    let norm = 1.0 / (n * n) as f64;
    data.iter_mut().for_each(|c| *c *= norm);
    let coeffs = Array2::from_shape_vec((n, n), data).expect("square buffer");
    let mut out = SpectralField {
        grid: grid.clone(),
        coeffs,
    };
    out.clear_nyquist();
    out
}

/// Inverse transform, keeping the real part.
pub fn inverse(field: &SpectralField) -> RealField {
    let grid = field.grid();
    let n = grid.n();
    let mut data: Vec<Complex64> = field.coeffs.iter().copied().collect();
    grid.fft2(&mut data, true);
    let values = Array2::from_shape_vec((n, n), data.into_iter().map(|c| c.re).collect())
        .expect("square buffer");
    RealField {
        grid: grid.clone(),
        values,
    }
}

/// Imaginary part left over by the inverse transform; zero for Hermitian spectra.
pub fn inverse_imaginary_residual(field: &SpectralField) -> f64 {
    let grid = field.grid();
    let mut data: Vec<Complex64> = field.coeffs.iter().copied().collect();
    grid.fft2(&mut data, true);
    data.iter().fold(0.0_f64, |m, c| m.max(c.im.abs()))
}

/// Inverse transforms of many Hermitian spectra, two per complex FFT.
pub fn inverse_many(fields: &[&SpectralField]) -> Vec<RealField> {
    let mut out = Vec::with_capacity(fields.len());
    for pair in fields.chunks(2) {
        match pair {
            [a, b] => {
                debug_assert_eq!(a.grid, b.grid);
                let grid = a.grid();
                let n = grid.n();
                let mut data: Vec<Complex64> = a
                    .coeffs
                    .iter()
                    .zip(b.coeffs.iter())
                    .map(|(&x, &y)| x + Complex64::i() * y)
                    .collect();
                grid.fft2(&mut data, true);
                let re = Array2::from_shape_vec((n, n), data.iter().map(|c| c.re).collect())
                    .expect("square buffer");
                let im = Array2::from_shape_vec((n, n), data.iter().map(|c| c.im).collect())
                    .expect("square buffer");
                out.push(RealField {
                    grid: grid.clone(),
                    values: re,
                });
                out.push(RealField {
                    grid: grid.clone(),
                    values: im,
                });
            }
            [a] => out.push(inverse(a)),
            _ => unreachable!(),
        }
    }
    out
}

/// Forward transforms of many real fields, two per complex FFT.
pub fn forward_many(fields: &[RealField]) -> Vec<SpectralField> {
    let mut out = Vec::with_capacity(fields.len());
    for pair in fields.chunks(2) {
        match pair {
            [a, b] => {
                debug_assert_eq!(a.grid, b.grid);
                let grid = a.grid();
                let n = grid.n();
                let mut data: Vec<Complex64> = a
                    .values
                    .iter()
                    .zip(b.values.iter())
                    .map(|(&x, &y)| Complex64::new(x, y))
                    .collect();
                grid.fft2(&mut data, false);
                let norm = 1.0 / (n * n) as f64;
                let mut first = Array2::from_elem((n, n), ZERO);
                let mut second = Array2::from_elem((n, n), ZERO);
                for i in 0..n {
                    let mi = (n - i) % n;
                    for j in 0..n {
                        let mj = (n - j) % n;
                        let z = data[i * n + j];
                        let zc = data[mi * n + mj].conj();
                        first[[i, j]] = (z + zc) * (0.5 * norm);
                        second[[i, j]] = (z - zc) * Complex64::new(0.0, -0.5 * norm);
                    }
                }
                let mut fa = SpectralField {
                    grid: grid.clone(),
                    coeffs: first,
                };
                let mut fb = SpectralField {
                    grid: grid.clone(),
                    coeffs: second,
                };
                fa.clear_nyquist();
                fb.clear_nyquist();
                out.push(fa);
                out.push(fb);
            }
            [a] => out.push(forward(a)),
            _ => unreachable!(),
        }
    }
    out
}

/// Derivative `D^alpha` of a spectral field.
pub fn derivative(field: &SpectralField, alpha: MultiIndex) -> SpectralField {
    field.derivative(alpha)
}

/// 2/3-rule truncation.
pub fn dealias(field: &SpectralField) -> SpectralField {
    field.dealias()
}

/// Two-component vector field, both components on one grid.
#[derive(Clone, Debug)]
pub struct VectorField {
    components: [SpectralField; 2],
}

impl VectorField {
    pub fn new(first: SpectralField, second: SpectralField) -> Result<Self> {
        if !first.same_grid(&second) {
            return Err(TcmError::GridMismatch);
        }
        Ok(Self {
            components: [first, second],
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            components: [SpectralField::zeros(grid), SpectralField::zeros(grid)],
        }
    }

    /// Equal components `(f, f)`.
    pub fn diagonal(f: &SpectralField) -> Self {
        Self {
            components: [f.clone(), f.clone()],
        }
    }

    /// Rotated gradient `(d2 a, -d1 a)`, divergence-free mode by mode.
    pub fn curl_of(stream: &SpectralField) -> Self {
        Self {
            components: [stream.d2(), -&stream.d1()],
        }
    }

    pub fn gradient(f: &SpectralField) -> Self {
        Self {
            components: [f.d1(), f.d2()],
        }
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn first(&self) -> &SpectralField {
        &self.components[0]
    }

    pub fn second(&self) -> &SpectralField {
        &self.components[1]
    }

    pub fn components(&self) -> &[SpectralField; 2] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [SpectralField; 2] {
        &mut self.components
    }

    pub fn into_components(self) -> [SpectralField; 2] {
        self.components
    }

    pub fn divergence(&self) -> SpectralField {
        let mut div = self.components[0].d1();
        div += &self.components[1].d2();
        div
    }

    /// `||div v||_{L2} / ||v||_{L2}`; zero for the zero field.
    pub fn relative_divergence(&self) -> f64 {
        let norm = crate::norms::vector_hs_norm(self, 0);
        if norm == 0.0 {
            return 0.0;
        }
        crate::norms::l2_norm(&self.divergence()) / norm
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        Self {
            components: [f(&self.components[0]), f(&self.components[1])],
        }
    }

    pub fn dealias(&self) -> Self {
        self.map(SpectralField::dealias)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|c| c.scaled(factor))
    }

    pub fn add_scaled(&mut self, factor: f64, other: &VectorField) {
        self.components[0].add_scaled(factor, &other.components[0]);
        self.components[1].add_scaled(factor, &other.components[1]);
    }

    /// Sum of the component-wise L2 inner products.
    pub fn inner(&self, other: &VectorField) -> f64 {
        self.components[0].inner(&other.components[0])
            + self.components[1].inner(&other.components[1])
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(SpectralField::is_finite)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(SpectralField::is_zero)
    }

    pub fn leray_project(&self) -> Self {
        leray_project(self)
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        let mut out = self.clone();
        out.add_scaled(1.0, rhs);
        out
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        let mut out = self.clone();
        out.add_scaled(-1.0, rhs);
        out
    }
}

impl Neg for &VectorField {
    type Output = VectorField;
    fn neg(self) -> VectorField {
        self.scaled(-1.0)
    }
}

/// Mode-wise projection `I - xi xi^T / |xi|^2` onto divergence-free fields.
/// The mean mode is left untouched.
pub fn leray_project(field: &VectorField) -> VectorField {
    let grid = field.grid().clone();
    let n = grid.n();
    let mut out = field.clone();
    let [p, q] = out.components_mut();
    let (a, b) = (p.coeffs_mut(), q.coeffs_mut());
    for i in 0..n {
        let x1 = grid.wavenumber(i);
        for j in 0..n {
            let x2 = grid.wavenumber(j);
            let k2 = x1 * x1 + x2 * x2;
            if k2 == 0.0 {
                continue;
            }
            let (c1, c2) = (a[[i, j]], b[[i, j]]);
            let dot = (c1 * x1 + c2 * x2) / k2;
            a[[i, j]] = c1 - dot * x1;
            b[[i, j]] = c2 - dot * x2;
        }
    }
    out
}
