//! WebAssembly bindings for the browser demo in `www/`.

use unicirc::density::{Density, EnsembleSpec};
use unicirc::gamma::{morris_evaluate, MorrisParams};
use unicirc::numeric::periodic_grid;
use unicirc::rng::RngStream;
use unicirc::sampler::{sample_with_diagnostics, SamplerOptions};
use unicirc::verify::{bin_masses, chi_square_gof, histogram, HistogramSpec};
use wasm_bindgen::prelude::*;

/// Keeps a single click responsive in the browser.
pub const MAX_DEMO_SAMPLES: usize = 50_000;

fn js_err(e: unicirc::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// ρ(θ) on the grid `θ_i = -π + 2π(i+1)/points`, total-mass convention.
pub fn density_values(beta: u32, n: usize, points: usize) -> unicirc::Result<Vec<f64>> {
    let density = Density::for_spec(&EnsembleSpec::unimodular(beta, n)?)?;
    Ok(periodic_grid(points)
        .into_iter()
        .map(|t| density.rho(t))
        .collect())
}

#[wasm_bindgen(js_name = densityCurve)]
pub fn density_curve(beta: u32, n: usize, points: usize) -> Result<Vec<f64>, JsError> {
    density_values(beta, n, points).map_err(js_err)
}

#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone, PartialEq)]
pub struct MorrisResult {
    pub value: f64,
    pub log_abs: f64,
    pub sign: i8,
    /// Empty unless the value is an exact zero.
    pub pole: String,
}

pub fn morris_result(n_vars: usize, a: f64, b: f64, lam: f64) -> unicirc::Result<MorrisResult> {
    let mv = morris_evaluate(&MorrisParams::new(n_vars, a, b, lam)?)?;
    let pole = mv
        .pole
        .map(|p| format!("{} = Gamma({}) at j = {}", p.factor, p.argument, p.j))
        .unwrap_or_default();
    Ok(MorrisResult {
        value: mv.to_f64(),
        log_abs: mv.value.log_abs,
        sign: mv.value.sign,
        pole,
    })
}

#[wasm_bindgen]
pub fn morris(n_vars: usize, a: f64, b: f64, lam: f64) -> Result<MorrisResult, JsError> {
    morris_result(n_vars, a, b, lam).map_err(js_err)
}

#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone, PartialEq)]
pub struct SampledHistogram {
    /// Empirical density per bin, scaled to total mass N.
    pub empirical: Vec<f64>,
    /// Exact bin-averaged density, same scale.
    pub expected: Vec<f64>,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn sampled_histogram(
    beta: u32,
    n: usize,
    count: usize,
    seed: u64,
    bins: usize,
) -> unicirc::Result<SampledHistogram> {
    if count > MAX_DEMO_SAMPLES {
        return Err(unicirc::Error::InvalidArgument(format!(
            "the demo draws at most {MAX_DEMO_SAMPLES} samples"
        )));
    }
    let spec = EnsembleSpec::unimodular(beta, n)?;
    let density = Density::for_spec(&spec)?;
    let hs = HistogramSpec::new(bins)?;
    let (batch, _) = sample_with_diagnostics(
        &spec,
        count,
        &RngStream::new(seed, 0),
        &SamplerOptions::default(),
    )?;
    let counts = histogram(&batch, &hs);
    let rho = |t| density.rho(t);
    let gof = chi_square_gof(&counts, &hs, &rho)?;
    let scale = n as f64 / hs.width();
    let total = (count * n) as f64;
    Ok(SampledHistogram {
        empirical: counts.iter().map(|&c| c as f64 / total * scale).collect(),
        expected: bin_masses(&hs, &rho)
            .into_iter()
            .map(|m| m * scale)
            .collect(),
        chi_square: gof.chi_square,
        dof: gof.dof,
        p_value: gof.p_value,
    })
}

#[wasm_bindgen(js_name = sampleHistogram)]
pub fn sample_histogram(
    beta: u32,
    n: usize,
    count: usize,
    seed: u64,
    bins: usize,
) -> Result<SampledHistogram, JsError> {
    sampled_histogram(beta, n, count, seed, bins).map_err(js_err)
}
