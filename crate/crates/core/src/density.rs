//! One-point eigenphase densities of the unimodular circular ensembles.
//!
//! Two independent routes are provided:
//!
//! * [`ClosedFormDensity`]: the explicit trigonometric polynomials for
//!   β ∈ {1, 2, 4} (plus the β = 1, N = 2 special case `|sin θ|/2`);
//! * [`FourierDensity`]: the harmonic expansion
//!   `ρ(θ) = (N/2π) Σ_n c_n cos(nNθ)` with `c_n = M_n / C_{β,N}`, where `M_n`
//!   is a Morris integral. This route works for every integer β.
//!
//! Densities use the total-mass convention `∫ρ = N` unless a
//! [`Normalization::PerEigenvalue`] grid is requested.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gamma::{
    double_factorial, ln_cbeta_norm, ln_double_factorial, ln_gamma, morris_evaluate, GammaFactor,
    MorrisParams,
};
use crate::numeric::{periodic_grid, wrap_phase, NeumaierSum, TWO_PI};

/// Which circular ensemble: repulsion exponent β, number of (distinct)
/// eigenphases N and whether det U = 1 is imposed.
///
/// For β = 4, `n` counts Kramers pairs, i.e. the matrix is 2N × 2N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnsembleSpec {
    pub beta: u32,
    pub n: usize,
    pub unimodular: bool,
}

impl EnsembleSpec {
    pub fn new(beta: u32, n: usize, unimodular: bool) -> Result<Self> {
        if beta == 0 {
            return Err(Error::InvalidArgument(
                "beta must be a positive integer".into(),
            ));
        }
        if n == 0 {
            return Err(Error::InvalidArgument(
                "N must be a positive integer".into(),
            ));
        }
        Ok(Self {
            beta,
            n,
            unimodular,
        })
    }

    pub fn unimodular(beta: u32, n: usize) -> Result<Self> {
        Self::new(beta, n, true)
    }

    /// Matrix models (and therefore samplers) exist only for β ∈ {1, 2, 4}.
    pub fn has_matrix_model(&self) -> bool {
        matches!(self.beta, 1 | 2 | 4)
    }

    /// Dimension of the underlying unitary matrix.
    pub fn matrix_dim(&self) -> usize {
        if self.beta == 4 {
            2 * self.n
        } else {
            self.n
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// ∫ρ = N
    #[default]
    Total,
    /// ∫ρ = 1
    PerEigenvalue,
}

/// `ρ_{β,N}(θ) = (N/2π)(1 + a₁ cos Nθ + a₂ cos 2Nθ)`, or `|sin θ|/2` for β=1, N=2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormDensity {
    beta: u32,
    n: usize,
    first: f64,
    second: f64,
    abs_sine: bool,
}

impl ClosedFormDensity {
    pub fn new(beta: u32, n: usize) -> Result<Self> {
        if !matches!(beta, 1 | 2 | 4) {
            return Err(Error::UnsupportedBeta(beta));
        }
        if n == 0 {
            return Err(Error::InvalidArgument(
                "N must be a positive integer".into(),
            ));
        }
        if n == 1 {
            return Err(Error::DegenerateEnsemble { beta });
        }
        let nf = n as f64;
        // -(-1)^N
        let alt = if n.is_multiple_of(2) { -1.0 } else { 1.0 };
        let (first, second, abs_sine) = match beta {
            2 => (alt * 2.0 / nf, 0.0, false),
            1 if n == 2 => (0.0, 0.0, true),
            1 => {
                let ln_amp = 0.5 * PI.ln() + ln_gamma(nf)
                    - (nf - 1.0) * std::f64::consts::LN_2
                    - ln_gamma(nf / 2.0 + 1.5)
                    - ln_gamma(nf / 2.0 + 1.0);
                (alt * ln_amp.exp(), 0.0, false)
            }
            4 => {
                let ratio = match (
                    double_factorial(2 * n as i64),
                    double_factorial(2 * n as i64 - 1),
                ) {
                    (Ok(even), Ok(odd)) => even as f64 / odd as f64,
                    _ => (ln_double_factorial(2 * n as i64)
                        - ln_double_factorial(2 * n as i64 - 1))
                    .exp(),
                };
                (alt * ratio / nf, 2.0 / ((2.0 * nf - 1.0) * nf), false)
            }
            _ => unreachable!(),
        };
        Ok(Self {
            beta,
            n,
            first,
            second,
            abs_sine,
        })
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Amplitudes of `cos Nθ` and `cos 2Nθ` inside the bracket; `None` for the
    /// non-polynomial β=1, N=2 case.
    pub fn amplitudes(&self) -> Option<(f64, f64)> {
        (!self.abs_sine).then_some((self.first, self.second))
    }

    pub fn rho(&self, theta: f64) -> f64 {
        let theta = wrap_phase(theta);
        if self.abs_sine {
            return 0.5 * theta.sin().abs();
        }
        let nf = self.n as f64;
        nf / TWO_PI
            * (1.0 + self.first * (nf * theta).cos() + self.second * (2.0 * nf * theta).cos())
    }
}

pub fn closed_form_density(beta: u32, n: usize, theta: f64) -> Result<f64> {
    Ok(ClosedFormDensity::new(beta, n)?.rho(theta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Every omitted coefficient is provably zero.
    Exact,
    /// Estimated sup-norm bound on the density error from the omitted terms.
    TailBounded(f64),
}

/// Harmonic expansion of a unimodular density in `cos(nNθ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierDensity {
    spec: EnsembleSpec,
    /// `c_0, c_1, …`; `c_{-n} = c_n`.
    coefficients: Vec<f64>,
    truncation: Truncation,
}

impl FourierDensity {
    pub fn spec(&self) -> EnsembleSpec {
        self.spec
    }

    pub fn harmonic_stride(&self) -> usize {
        self.spec.n
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    /// Coefficients for n = 0, 1, …, highest retained harmonic.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, n: i64) -> f64 {
        self.coefficients
            .get(n.unsigned_abs() as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// Sums symmetrically in ±n by ascending |n| with compensation.
    pub fn rho(&self, theta: f64) -> f64 {
        let theta = wrap_phase(theta);
        let nf = self.spec.n as f64;
        let mut sum = NeumaierSum::default();
        sum.add(self.coefficients[0]);
        for (k, &c) in self.coefficients.iter().enumerate().skip(1) {
            let term = c * (k as f64 * nf * theta).cos();
            sum.add(term);
            sum.add(term);
        }
        nf / TWO_PI * sum.total()
    }
}

/// `c_n = M_n / C_{β,N}` for a single harmonic; N = 1 gives 1 for every n.
pub fn fourier_coefficient(beta: u32, n: usize, harmonic: i64) -> Result<f64> {
    let ln_c = ln_cbeta_norm(beta, n)?;
    let m = morris_evaluate(&MorrisParams::for_harmonic(beta, n, harmonic)?)?;
    if m.value.is_zero() {
        return Ok(0.0);
    }
    Ok(f64::from(m.value.sign) * (m.value.log_abs - ln_c).exp())
}

/// Power-law estimate of `(N/2π) · 2 Σ_{m>L} |c_m|` from the last retained
/// coefficients.
fn tail_bound(coefficients: &[f64], n: usize) -> f64 {
    let last = coefficients.len() - 1;
    let c_last = coefficients[last].abs();
    if c_last == 0.0 {
        return 0.0;
    }
    if last < 2 {
        return f64::INFINITY;
    }
    let mid = last / 2;
    let c_mid = coefficients[mid].abs();
    let p = (c_mid / c_last).ln() / (last as f64 / mid as f64).ln();
    if !p.is_finite() || p <= 1.0 {
        return f64::INFINITY;
    }
    // ∫_L^∞ K x^{-p} dx = |c_L| L / (p - 1)
    n as f64 / TWO_PI * 2.0 * c_last * last as f64 / (p - 1.0)
}

enum Stop {
    Tolerance(f64),
    Fixed,
}

fn build_series(beta: u32, n: usize, n_max: usize, stop: Stop) -> Result<FourierDensity> {
    if n == 1 {
        return Err(Error::DegenerateEnsemble { beta });
    }
    let spec = EnsembleSpec::unimodular(beta, n)?;
    let ln_c = ln_cbeta_norm(beta, n)?;
    let mut coefficients = Vec::new();
    let mut small_run = 0;
    for h in 0..=n_max {
        let m = morris_evaluate(&MorrisParams::for_harmonic(beta, n, h as i64)?)?;
        if let Some(pole) = m.pole {
            // λj + b + 1 only decreases with n, so the pole persists for all larger harmonics.
            debug_assert_eq!(pole.factor, GammaFactor::DenB);
            return Ok(FourierDensity {
                spec,
                coefficients,
                truncation: Truncation::Exact,
            });
        }
        let c = f64::from(m.value.sign) * (m.value.log_abs - ln_c).exp();
        coefficients.push(c);
        if let Stop::Tolerance(tol) = stop {
            if h > 0 && c.abs() < tol {
                small_run += 1;
                if small_run == 3 {
                    let bound = tail_bound(&coefficients, n);
                    return Ok(FourierDensity {
                        spec,
                        coefficients,
                        truncation: Truncation::TailBounded(bound),
                    });
                }
            } else {
                small_run = 0;
            }
        }
    }
    let bound = tail_bound(&coefficients, n);
    if let Stop::Tolerance(tol) = stop {
        if bound > 100.0 * tol {
            return Err(Error::TruncationFailure {
                n_max,
                tail_bound: bound,
                tol,
            });
        }
    }
    Ok(FourierDensity {
        spec,
        coefficients,
        truncation: Truncation::TailBounded(bound),
    })
}

/// Adaptive expansion: stops at a provably permanent run of zeros, after three
/// consecutive `|c_n| < tol`, or at `n_max` (failing if the tail estimate then
/// exceeds `100 · tol`).
pub fn fourier_coefficients(beta: u32, n: usize, tol: f64, n_max: usize) -> Result<FourierDensity> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    build_series(beta, n, n_max, Stop::Tolerance(tol))
}

/// Fixed-order expansion through harmonic `n_max` (fewer if the series
/// terminates exactly); never fails on slow convergence.
pub fn fourier_series_truncated(beta: u32, n: usize, n_max: usize) -> Result<FourierDensity> {
    build_series(beta, n, n_max, Stop::Fixed)
}

pub fn fourier_density(fd: &FourierDensity, theta: f64) -> f64 {
    fd.rho(theta)
}

/// `E[Σ_j e^{ikθ_j}]` over the unimodular ensemble: `N c_{k/N}` when N | k,
/// zero otherwise.
pub fn trace_power_expectation(beta: u32, n: usize, k: i64) -> Result<f64> {
    if n == 0 || beta == 0 {
        return Err(Error::InvalidArgument("beta and N must be positive".into()));
    }
    let n_i = n as i64;
    if k % n_i != 0 {
        return Ok(0.0);
    }
    Ok(n as f64 * fourier_coefficient(beta, n, k / n_i)?)
}

/// Any of the densities this crate can evaluate, chosen per ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    /// Unconstrained CβE: rotation invariance makes the density flat.
    Uniform {
        n: usize,
    },
    ClosedForm(ClosedFormDensity),
    Fourier(FourierDensity),
}

/// Convergence target for generic-β series built by [`Density::for_spec`].
pub const GENERIC_BETA_TOL: f64 = 1e-16;
pub const GENERIC_BETA_MAX_HARMONIC: usize = 1 << 20;

impl Density {
    pub fn for_spec(spec: &EnsembleSpec) -> Result<Self> {
        if !spec.unimodular {
            return Ok(Self::Uniform { n: spec.n });
        }
        if spec.n == 1 {
            return Err(Error::DegenerateEnsemble { beta: spec.beta });
        }
        if spec.has_matrix_model() {
            ClosedFormDensity::new(spec.beta, spec.n).map(Self::ClosedForm)
        } else {
            fourier_coefficients(
                spec.beta,
                spec.n,
                GENERIC_BETA_TOL,
                GENERIC_BETA_MAX_HARMONIC,
            )
            .map(Self::Fourier)
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Uniform { n } => *n,
            Self::ClosedForm(c) => c.n(),
            Self::Fourier(f) => f.spec().n,
        }
    }

    pub fn rho(&self, theta: f64) -> f64 {
        match self {
            Self::Uniform { n } => *n as f64 / TWO_PI,
            Self::ClosedForm(c) => c.rho(theta),
            Self::Fourier(f) => f.rho(theta),
        }
    }
}

/// Samples the density on the uniform grid `θ_i = -π + 2π(i+1)/m`.
pub fn density_grid(
    spec: &EnsembleSpec,
    grid_points: usize,
    normalization: Normalization,
) -> Result<Vec<(f64, f64)>> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid_points must be at least 2, got {grid_points}"
        )));
    }
    let density = Density::for_spec(spec)?;
    let scale = match normalization {
        Normalization::Total => 1.0,
        Normalization::PerEigenvalue => 1.0 / spec.n as f64,
    };
    Ok(periodic_grid(grid_points)
        .into_iter()
        .map(|t| (t, density.rho(t) * scale))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::trapezoid_periodic;
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_form_examples() {
        assert_abs_diff_eq!(
            closed_form_density(2, 2, 0.0).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            closed_form_density(1, 2, PI / 2.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            closed_form_density(2, 3, 0.0).unwrap(),
            3.0 / TWO_PI * (5.0 / 3.0),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            closed_form_density(2, 3, 0.0).unwrap(),
            0.795_774_7,
            epsilon = 1e-7
        );
        assert_abs_diff_eq!(
            closed_form_density(4, 2, 0.0).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn closed_form_rejects_degenerate_and_unsupported() {
        assert_eq!(
            closed_form_density(2, 1, 0.3),
            Err(Error::DegenerateEnsemble { beta: 2 })
        );
        assert_eq!(
            closed_form_density(3, 4, 0.3),
            Err(Error::UnsupportedBeta(3))
        );
    }

    #[test]
    fn beta_one_amplitude_is_one_third_at_three() {
        let (a1, a2) = ClosedFormDensity::new(1, 3).unwrap().amplitudes().unwrap();
        assert_abs_diff_eq!(a1, 1.0 / 3.0, epsilon = 1e-14);
        assert_eq!(a2, 0.0);
    }

    #[test]
    fn series_terminates_for_beta_two() {
        let fd = fourier_coefficients(2, 5, 1e-14, 100).unwrap();
        assert_eq!(fd.truncation(), Truncation::Exact);
        assert_eq!(fd.coefficients().len(), 2);
        assert_abs_diff_eq!(fd.coefficient(0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fd.coefficient(-1), 0.2, epsilon = 1e-14);
        assert_eq!(fd.coefficient(2), 0.0);
        assert_eq!(fd.coefficient(-7), 0.0);
    }

    #[test]
    fn series_for_beta_four_n_two() {
        let fd = fourier_coefficients(4, 2, 1e-14, 100).unwrap();
        assert_eq!(fd.truncation(), Truncation::Exact);
        let want = [1.0, -2.0 / 3.0, 1.0 / 6.0];
        assert_eq!(fd.coefficients().len(), 3);
        for (got, want) in fd.coefficients().iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn beta_one_n_two_matches_abs_sine_series() {
        // |sin θ| = 2/π - (4/π) Σ cos(2nθ)/(4n² - 1)
        let fd = fourier_series_truncated(1, 2, 50).unwrap();
        for n in 0..=50 {
            let want = -1.0 / (4.0 * (n * n) as f64 - 1.0);
            assert_abs_diff_eq!(fd.coefficient(n), want, epsilon = 1e-14);
        }
        assert!(matches!(fd.truncation(), Truncation::TailBounded(_)));
    }

    #[test]
    fn beta_one_n_two_resums_to_half_at_quarter_turn() {
        let fd = fourier_series_truncated(1, 2, 5000).unwrap();
        assert_abs_diff_eq!(fourier_density(&fd, PI / 2.0), 0.5, epsilon = 1e-4);
        let Truncation::TailBounded(bound) = fd.truncation() else {
            panic!("expected a tail bound");
        };
        assert!(bound < 1e-4, "tail bound {bound}");
    }

    #[test]
    fn slow_series_fails_adaptive_tolerance() {
        let err = fourier_coefficients(1, 2, 1e-10, 200).unwrap_err();
        assert!(matches!(err, Error::TruncationFailure { n_max: 200, .. }));
    }

    #[test]
    fn adaptive_stops_on_small_coefficients() {
        let fd = fourier_coefficients(3, 2, 1e-8, 100_000).unwrap();
        let Truncation::TailBounded(bound) = fd.truncation() else {
            panic!("expected a tail bound");
        };
        let k = fd.coefficients().len();
        assert!(k > 3 && k < 1000, "kept {k} harmonics");
        assert!(fd.coefficients()[k - 3..].iter().all(|c| c.abs() < 1e-8));
        assert!(bound.is_finite() && bound < 1e-4);
    }

    #[test]
    fn generic_beta_three_matches_quadrature_coefficients() {
        // two-dimensional trapezoid of the Morris integrand divided by C_{3,3}
        let fd = fourier_coefficients(3, 3, 1e-14, 100).unwrap();
        assert_eq!(fd.truncation(), Truncation::Exact);
        let want = [
            1.0,
            0.45,
            0.025_714_285_714_285_7,
            -0.000_476_190_476_190_476,
        ];
        assert_eq!(fd.coefficients().len(), want.len());
        for (got, want) in fd.coefficients().iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }
        // one-dimensional trapezoid with 65536 nodes, divided by C_{3,2}
        let fd = fourier_series_truncated(3, 2, 5).unwrap();
        let want = [
            1.0,
            -0.6,
            0.085_714_285_714_285_7,
            0.009_523_809_523_809_5,
            0.002_597_402_597_4,
            0.000_999_000_999_001,
        ];
        for (got, want) in fd.coefficients().iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn fourier_matches_closed_form_examples() {
        let fd = fourier_coefficients(2, 3, 1e-14, 10).unwrap();
        assert_abs_diff_eq!(
            fourier_density(&fd, PI / 3.0),
            3.0 / TWO_PI / 3.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(fourier_density(&fd, PI / 3.0), 0.159_154_9, epsilon = 1e-7);
        let t = 0.731;
        assert_abs_diff_eq!(fd.rho(t), fd.rho(t + TWO_PI), epsilon = 1e-13);
    }

    #[test]
    fn trace_powers() {
        assert_abs_diff_eq!(
            trace_power_expectation(2, 3, 3).unwrap(),
            1.0,
            epsilon = 1e-13
        );
        assert_eq!(trace_power_expectation(2, 3, 2).unwrap(), 0.0);
        assert_abs_diff_eq!(
            trace_power_expectation(4, 2, 4).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            trace_power_expectation(2, 4, 0).unwrap(),
            4.0,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            trace_power_expectation(1, 1, 5).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn moment_identity_beta_two() {
        for n in 2..=10usize {
            let (a1, _) = ClosedFormDensity::new(2, n).unwrap().amplitudes().unwrap();
            // ∫ρ cos Nθ = (N/2π) a₁ π
            let from_closed_form = n as f64 / TWO_PI * a1 * PI;
            let want = if n % 2 == 0 { -1.0 } else { 1.0 };
            let got = trace_power_expectation(2, n, n as i64).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
            assert_abs_diff_eq!(got, from_closed_form, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_examples() {
        let spec = EnsembleSpec::unimodular(2, 2).unwrap();
        let g = density_grid(&spec, 4, Normalization::Total).unwrap();
        let want = [
            (-PI / 2.0, 2.0 / PI),
            (0.0, 0.0),
            (PI / 2.0, 2.0 / PI),
            (PI, 0.0),
        ];
        for ((t, r), (wt, wr)) in g.iter().zip(want) {
            assert_abs_diff_eq!(*t, wt, epsilon = 1e-15);
            assert_abs_diff_eq!(*r, wr, epsilon = 1e-15);
        }

        let spec = EnsembleSpec::unimodular(2, 3).unwrap();
        let g = density_grid(&spec, 4096, Normalization::Total).unwrap();
        let rho: Vec<f64> = g.iter().map(|p| p.1).collect();
        assert_abs_diff_eq!(trapezoid_periodic(&rho), 3.0, epsilon = 1e-10);
        let g = density_grid(&spec, 4096, Normalization::PerEigenvalue).unwrap();
        let rho: Vec<f64> = g.iter().map(|p| p.1).collect();
        assert_abs_diff_eq!(trapezoid_periodic(&rho), 1.0, epsilon = 1e-10);

        let spec = EnsembleSpec::unimodular(1, 3).unwrap();
        let g = density_grid(&spec, 777, Normalization::Total).unwrap();
        assert!(g.iter().all(|p| p.1 > 0.0));
    }

    #[test]
    fn grid_errors() {
        let spec = EnsembleSpec::unimodular(2, 1).unwrap();
        assert_eq!(
            density_grid(&spec, 16, Normalization::Total),
            Err(Error::DegenerateEnsemble { beta: 2 })
        );
        let spec = EnsembleSpec::unimodular(2, 3).unwrap();
        assert!(density_grid(&spec, 1, Normalization::Total).is_err());
        // without the constraint the density is flat
        let spec = EnsembleSpec::new(2, 1, false).unwrap();
        let g = density_grid(&spec, 8, Normalization::Total).unwrap();
        assert!(g.iter().all(|p| (p.1 - 1.0 / TWO_PI).abs() < 1e-15));
    }

    #[test]
    fn generic_beta_grid_is_normalized() {
        for (beta, n) in [(3, 2), (3, 3), (5, 4), (6, 3)] {
            let spec = EnsembleSpec::unimodular(beta, n).unwrap();
            let g = density_grid(&spec, 4096, Normalization::Total).unwrap();
            let rho: Vec<f64> = g.iter().map(|p| p.1).collect();
            assert_abs_diff_eq!(trapezoid_periodic(&rho), n as f64, epsilon = 1e-10);
            assert!(rho.iter().all(|&r| r >= -1e-12), "beta={beta} N={n}");
        }
    }
}
