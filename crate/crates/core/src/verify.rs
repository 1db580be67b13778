//! Independent checks of the densities: direct quadrature of the constrained
//! joint density, histogram goodness-of-fit and moment z-scores.
//!
//! Eigenphases pooled from one matrix are correlated, so chi-square and KS
//! p-values on pooled phases are approximate. Moment checks use one value per
//! matrix and carry exact standard errors.

use std::f64::consts::PI;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::density::{trace_power_expectation, Density, EnsembleSpec};
use crate::error::{Error, Result};
use crate::numeric::{periodic_grid, NeumaierSum, TWO_PI};
use crate::rng::RngStream;
use crate::sampler::{sample_with_diagnostics, Diagnostics, PhaseVector, SamplerOptions};

/// Statistical tests pass when p exceeds this.
pub const P_VALUE_THRESHOLD: f64 = 1e-3;
/// Moment checks pass when |z| is below this.
pub const Z_THRESHOLD: f64 = 4.0;
pub const MIN_GOF_SAMPLES: u64 = 1000;
pub const DEFAULT_BINS: usize = 64;
pub const DEFAULT_RESOLUTION: usize = 2048;
const SUBPOINTS_PER_BIN: usize = 32;
const MIN_EXPECTED: f64 = 5.0;
const CDF_TABLE_POINTS: usize = 1 << 14;

/// `|Δ_N(θ)|^β = Π_{j<k} |e^{iθ_j} - e^{iθ_k}|^β`, accumulated in log space.
pub fn vandermonde_abs_pow(phases: &[f64], beta: u32) -> f64 {
    let mut log_sum = NeumaierSum::default();
    for (j, a) in phases.iter().enumerate() {
        for b in &phases[j + 1..] {
            let chord = (2.0 * (0.5 * (a - b)).sin()).abs();
            if chord == 0.0 {
                return 0.0;
            }
            log_sum.add(chord.ln());
        }
    }
    (f64::from(beta) * log_sum.total()).exp()
}

/// Direct quadrature of the constrained one-point density for N ∈ {2, 3}.
///
/// The joint weight `|Δ_N|^β` restricted to `θ_N = -(θ_1 + … + θ_{N-1})` is
/// normalized by trapezoid quadrature over the free phases and marginalized
/// onto each eigenphase in turn.
#[derive(Debug, Clone)]
pub struct QuadratureOracle {
    beta: u32,
    n: usize,
    grid: Vec<f64>,
    norm: f64,
}

fn weight(phases: &[f64], beta: u32) -> f64 {
    let mut w = 1.0;
    for (j, a) in phases.iter().enumerate() {
        for b in &phases[j + 1..] {
            w *= (2.0 * (0.5 * (a - b)).sin()).abs();
        }
    }
    w.powi(beta as i32)
}

impl QuadratureOracle {
    pub fn new(beta: u32, n: usize, resolution: usize) -> Result<Self> {
        if beta == 0 {
            return Err(Error::InvalidArgument("beta must be positive".into()));
        }
        if !matches!(n, 2 | 3) {
            return Err(Error::UnsupportedN(n));
        }
        if resolution < 8 {
            return Err(Error::InvalidArgument(format!(
                "resolution {resolution} is too coarse"
            )));
        }
        let grid = periodic_grid(resolution);
        let h = TWO_PI / resolution as f64;
        let norm = match n {
            2 => {
                let s: NeumaierSum = grid.iter().map(|&t| weight(&[t, -t], beta)).collect();
                s.total() * h
            }
            _ => {
                let mut s = NeumaierSum::default();
                for &t1 in &grid {
                    let row: NeumaierSum = grid
                        .iter()
                        .map(|&t2| weight(&[t1, t2, -t1 - t2], beta))
                        .collect();
                    s.add(row.total());
                }
                s.total() * h * h
            }
        };
        Ok(Self {
            beta,
            n,
            grid,
            norm,
        })
    }

    /// Density at θ in the total-mass convention.
    pub fn rho(&self, theta: f64) -> f64 {
        let beta = self.beta;
        match self.n {
            2 => {
                // phase 1 at θ (θ₂ = -θ) plus phase 2 at θ (θ₁ = -θ)
                (weight(&[theta, -theta], beta) + weight(&[-theta, theta], beta)) / self.norm
            }
            _ => {
                let h = TWO_PI / self.grid.len() as f64;
                let marginal = |slot: usize| -> f64 {
                    let s: NeumaierSum = self
                        .grid
                        .iter()
                        .map(|&t| {
                            let rest = -theta - t;
                            let phases = match slot {
                                0 => [theta, t, rest],
                                1 => [t, theta, rest],
                                _ => [t, rest, theta],
                            };
                            weight(&phases, beta)
                        })
                        .collect();
                    s.total() * h / self.norm
                };
                marginal(0) + marginal(1) + marginal(2)
            }
        }
    }
}

pub fn oracle_density_quadrature(
    beta: u32,
    n: usize,
    theta: f64,
    resolution: usize,
) -> Result<f64> {
    Ok(QuadratureOracle::new(beta, n, resolution)?.rho(theta))
}

/// Uniform bins on (-π, π]; bin i is `(-π + i w, -π + (i+1) w]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistogramSpec {
    pub bins: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self { bins: DEFAULT_BINS }
    }
}

impl HistogramSpec {
    pub fn new(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidArgument("bins must be positive".into()));
        }
        Ok(Self { bins })
    }

    pub fn width(&self) -> f64 {
        TWO_PI / self.bins as f64
    }

    pub fn edge(&self, i: usize) -> f64 {
        if i == self.bins {
            PI
        } else {
            -PI + TWO_PI * i as f64 / self.bins as f64
        }
    }

    pub fn bin_of(&self, theta: f64) -> usize {
        let i = ((theta + PI) / self.width()).ceil() as i64 - 1;
        i.clamp(0, self.bins as i64 - 1) as usize
    }
}

pub fn histogram(batch: &[PhaseVector], hs: &HistogramSpec) -> Vec<u64> {
    let mut counts = vec![0u64; hs.bins];
    for pv in batch {
        for &t in &pv.phases {
            counts[hs.bin_of(t)] += 1;
        }
    }
    counts
}

/// Probability mass of each bin under `density` (trapezoid, 32 sub-intervals
/// per bin), normalized to sum to one.
pub fn bin_masses(hs: &HistogramSpec, density: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let masses: Vec<f64> = (0..hs.bins)
        .map(|i| {
            let (lo, hi) = (hs.edge(i), hs.edge(i + 1));
            let h = (hi - lo) / SUBPOINTS_PER_BIN as f64;
            let mut s = NeumaierSum::default();
            for k in 0..=SUBPOINTS_PER_BIN {
                let w = if k == 0 || k == SUBPOINTS_PER_BIN {
                    0.5
                } else {
                    1.0
                };
                s.add(w * density(lo + h * k as f64));
            }
            s.total() * h
        })
        .collect();
    let total: NeumaierSum = masses.iter().copied().collect();
    let total = total.total();
    masses.into_iter().map(|m| m / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareOutcome {
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub sample_count: u64,
    pub bins_used: usize,
}

/// Pearson chi-square of binned counts against a density, merging adjacent
/// bins until every expected count is at least 5.
pub fn chi_square_gof(
    counts: &[u64],
    hs: &HistogramSpec,
    density: &dyn Fn(f64) -> f64,
) -> Result<ChiSquareOutcome> {
    assert_eq!(
        counts.len(),
        hs.bins,
        "counts do not match the histogram spec"
    );
    let total: u64 = counts.iter().sum();
    if total < MIN_GOF_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: total,
            need: MIN_GOF_SAMPLES,
        });
    }
    let expected: Vec<f64> = bin_masses(hs, density)
        .into_iter()
        .map(|m| m * total as f64)
        .collect();

    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&o, &e) in counts.iter().zip(&expected) {
        obs += o as f64;
        exp += e;
        if exp >= MIN_EXPECTED {
            groups.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => groups.push((obs, exp)),
        }
    }
    if groups.len() < 2 {
        return Err(Error::InsufficientSamples {
            got: total,
            need: MIN_GOF_SAMPLES,
        });
    }
    let chi: NeumaierSum = groups.iter().map(|(o, e)| (o - e) * (o - e) / e).collect();
    let chi_square = chi.total();
    let dof = groups.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    Ok(ChiSquareOutcome {
        chi_square,
        dof,
        p_value: dist.sf(chi_square).clamp(0.0, 1.0),
        sample_count: total,
        bins_used: groups.len(),
    })
}

/// Cumulative trapezoid of a density on a fine grid over (-π, π], normalized
/// to one and linearly interpolated.
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    values: Vec<f64>,
    step: f64,
}

impl TabulatedCdf {
    pub fn from_density(density: &dyn Fn(f64) -> f64) -> Self {
        Self::with_points(density, CDF_TABLE_POINTS)
    }

    pub fn with_points(density: &dyn Fn(f64) -> f64, points: usize) -> Self {
        let step = TWO_PI / points as f64;
        let mut values = Vec::with_capacity(points + 1);
        values.push(0.0);
        let mut acc = NeumaierSum::default();
        let mut prev = density(-PI);
        for i in 1..=points {
            let cur = density(-PI + step * i as f64);
            acc.add(0.5 * (prev + cur) * step);
            values.push(acc.total());
            prev = cur;
        }
        let total = *values.last().expect("nonempty");
        for v in &mut values {
            *v /= total;
        }
        Self { values, step }
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        let x = (theta + PI) / self.step;
        if x <= 0.0 {
            return 0.0;
        }
        let i = x.floor() as usize;
        if i >= self.values.len() - 1 {
            return 1.0;
        }
        let f = x - i as f64;
        self.values[i] + f * (self.values[i + 1] - self.values[i])
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // P(K ≤ λ) = √(2π)/λ Σ_k exp(-(2k-1)²π²/(8λ²))
        let mut s = 0.0;
        for k in 1..=8 {
            let m = (2 * k - 1) as f64;
            s += (-m * m * PI * PI / (8.0 * lambda * lambda)).exp();
        }
        return (1.0 - TWO_PI.sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic p-value with the Stephens small-sample correction.
fn ks_p_value(statistic: f64, effective_n: f64) -> f64 {
    let sn = effective_n.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * statistic)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test of sorted phases against a CDF.
pub fn ks_test(sorted_phases: &[f64], cdf: &dyn Fn(f64) -> f64) -> KsOutcome {
    let n = sorted_phases.len();
    assert!(n > 0, "KS test of an empty sample");
    debug_assert!(sorted_phases.windows(2).all(|w| w[0] <= w[1]));
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted_phases.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    KsOutcome {
        statistic: d,
        p_value: ks_p_value(d, nf),
    }
}

/// Two-sample KS test of sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsOutcome {
    assert!(!a.is_empty() && !b.is_empty(), "KS test of an empty sample");
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    KsOutcome {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    }
}

pub fn pooled_sorted(batch: &[PhaseVector]) -> Vec<f64> {
    let mut all: Vec<f64> = batch
        .iter()
        .flat_map(|pv| pv.phases.iter().copied())
        .collect();
    all.sort_by(f64::total_cmp);
    all
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub k: i64,
    pub analytic: f64,
    pub mean: f64,
    pub standard_error: f64,
    pub z_score: f64,
}

impl MomentCheck {
    pub fn passed(&self) -> bool {
        self.z_score.abs() < Z_THRESHOLD
    }
}

/// Mean of `Σ_j cos(kθ_j)` per sample, its standard error and the z-score
/// against `analytic`.
pub fn moment_check(batch: &[PhaseVector], k: i64, analytic: f64) -> MomentCheck {
    assert!(!batch.is_empty(), "moment check of an empty batch");
    let kf = k as f64;
    let xs: Vec<f64> = batch
        .iter()
        .map(|pv| pv.phases.iter().map(|t| (kf * t).cos()).sum())
        .collect();
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<NeumaierSum>().total() / n;
    let var = if xs.len() > 1 {
        xs.iter()
            .map(|x| (x - mean) * (x - mean))
            .collect::<NeumaierSum>()
            .total()
            / (n - 1.0)
    } else {
        0.0
    };
    let standard_error = (var / n).sqrt();
    let diff = mean - analytic;
    let z_score = if standard_error > 0.0 {
        diff / standard_error
    } else if diff.abs() <= 1e-12 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    MomentCheck {
        k,
        analytic,
        mean,
        standard_error,
        z_score,
    }
}

/// Chi-square and KS results against one density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofReport {
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub sample_count: u64,
    pub bins_used: usize,
}

impl GofReport {
    pub fn chi_square_passed(&self) -> bool {
        self.p_value > P_VALUE_THRESHOLD
    }

    pub fn ks_passed(&self) -> bool {
        self.ks_p_value > P_VALUE_THRESHOLD
    }
}

pub fn goodness_of_fit(
    batch: &[PhaseVector],
    hs: &HistogramSpec,
    density: &dyn Fn(f64) -> f64,
) -> Result<GofReport> {
    let chi = chi_square_gof(&histogram(batch, hs), hs, density)?;
    let table = TabulatedCdf::from_density(density);
    let ks = ks_test(&pooled_sorted(batch), &|t| table.cdf(t));
    Ok(GofReport {
        chi_square: chi.chi_square,
        dof: chi.dof,
        p_value: chi.p_value,
        ks_statistic: ks.statistic,
        ks_p_value: ks.p_value,
        sample_count: chi.sample_count,
        bins_used: chi.bins_used,
    })
}

/// The harmonics checked for an ensemble: 1, N and, for β = 4, 2N.
pub fn default_moment_orders(spec: &EnsembleSpec) -> Vec<i64> {
    let n = spec.n as i64;
    let mut ks = vec![1, n];
    if spec.beta == 4 {
        ks.push(2 * n);
    }
    ks.dedup();
    ks
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub spec: EnsembleSpec,
    pub count: usize,
    pub gof: GofReport,
    pub moments: Vec<MomentCheck>,
    pub diagnostics: Diagnostics,
    /// The samples were tested against the flat density on purpose.
    pub expect_uniform: bool,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.gof.chi_square_passed()
            && self.gof.ks_passed()
            && self.moments.iter().all(MomentCheck::passed)
    }
}

/// Sample → histogram → chi-square, KS and moment checks against the exact
/// density (or, with `expect_uniform`, against the flat density).
pub fn run_verification(
    spec: &EnsembleSpec,
    count: usize,
    stream: &RngStream,
    hs: &HistogramSpec,
    opts: &SamplerOptions,
    expect_uniform: bool,
) -> Result<VerificationReport> {
    if !spec.has_matrix_model() {
        return Err(Error::UnsupportedBeta(spec.beta));
    }
    let density = if expect_uniform {
        Density::Uniform { n: spec.n }
    } else {
        Density::for_spec(spec)?
    };
    let (batch, diagnostics) = sample_with_diagnostics(spec, count, stream, opts)?;
    let gof = goodness_of_fit(&batch, hs, &|t| density.rho(t))?;
    let moments = default_moment_orders(spec)
        .into_iter()
        .map(|k| {
            let analytic = if expect_uniform || !spec.unimodular {
                if k == 0 {
                    spec.n as f64
                } else {
                    0.0
                }
            } else {
                trace_power_expectation(spec.beta, spec.n, k)?
            };
            Ok(moment_check(&batch, k, analytic))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport {
        spec: *spec,
        count,
        gof,
        moments,
        diagnostics,
        expect_uniform,
    })
}
