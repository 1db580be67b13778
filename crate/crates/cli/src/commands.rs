use std::fmt;

use serde::Serialize;
use unicirc::density::{
    density_grid, trace_power_expectation, Density, EnsembleSpec, Normalization,
};
use unicirc::gamma::{morris_evaluate, MorrisParams};
use unicirc::rng::RngStream;
use unicirc::sampler::{sample_with_diagnostics, Diagnostics, SamplerOptions};
use unicirc::verify::{self, moment_check, run_verification, HistogramSpec};
use unicirc::Error;

use crate::config::RunConfig;
use crate::output::{fmt_real, json_artifact, Csv};
use crate::{
    DensityArgs, EnsembleArgs, Format, MomentsArgs, MorrisArgs, NormalizationArg, OutputArgs,
    SampleArgs, StreamArgs, VerifyArgs,
};

pub const THREADS_ENV: &str = "UNICIRC_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Lib(Error::InvalidArgument(_)) => 1,
            CliError::Lib(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

pub struct Artifact {
    pub bytes: Vec<u8>,
    pub passed: bool,
}

impl Artifact {
    fn ok(bytes: Vec<u8>) -> Self {
        Self {
            bytes,
            passed: true,
        }
    }
}

type CmdResult = Result<Artifact, CliError>;

fn base_config(command: &str, out: &OutputArgs, default: Format) -> (RunConfig, Format) {
    let format = out.format.unwrap_or(default);
    let cfg = RunConfig {
        command: command.to_owned(),
        format: format.name().to_owned(),
        ..RunConfig::default()
    };
    (cfg, format)
}

fn with_ensemble(cfg: &mut RunConfig, e: &EnsembleArgs) -> Result<EnsembleSpec, CliError> {
    cfg.beta = Some(e.beta);
    cfg.n = Some(e.n);
    cfg.unimodular = Some(e.unimodular);
    Ok(EnsembleSpec::new(e.beta, e.n, e.unimodular)?)
}

fn with_stream(cfg: &mut RunConfig, s: &StreamArgs) -> RngStream {
    cfg.seed = Some(s.seed);
    cfg.stream_id = Some(s.stream_id);
    RngStream::new(s.seed, s.stream_id)
}

fn sampler_options() -> Result<SamplerOptions, CliError> {
    let workers = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                return Err(CliError::Usage(format!(
                    "{THREADS_ENV} must be a positive integer, got {v:?}"
                )))
            }
        },
        Err(_) => None,
    };
    Ok(SamplerOptions {
        workers,
        ..SamplerOptions::default()
    })
}

fn report_diagnostics(d: &Diagnostics) {
    eprintln!(
        "matrices={} unitarity={:.3e} symmetry={:.3e} selfduality={:.3e} determinant={:.3e} kramers_gap={:.3e}",
        d.matrices, d.unitarity, d.symmetry, d.selfduality, d.determinant, d.kramers_gap
    );
}

fn density_kind(d: &Density) -> &'static str {
    match d {
        Density::Uniform { .. } => "uniform",
        Density::ClosedForm(_) => "closed_form",
        Density::Fourier(_) => "fourier",
    }
}

#[derive(Serialize)]
struct DensityPoint {
    theta: f64,
    rho: f64,
}

#[derive(Serialize)]
struct DensityBody {
    method: &'static str,
    points: Vec<DensityPoint>,
}

pub fn density(args: &DensityArgs) -> CmdResult {
    let (mut cfg, format) = base_config("density", &args.out, Format::Csv);
    let spec = with_ensemble(&mut cfg, &args.ensemble)?;
    cfg.grid_points = Some(args.grid_points);
    let normalization = match args.normalization {
        NormalizationArg::Total => Normalization::Total,
        NormalizationArg::PerEigenvalue => Normalization::PerEigenvalue,
    };
    cfg.normalization = Some(
        match normalization {
            Normalization::Total => "total",
            Normalization::PerEigenvalue => "per-eigenvalue",
        }
        .to_owned(),
    );
    let method = density_kind(&Density::for_spec(&spec)?);
    let grid = density_grid(&spec, args.grid_points, normalization)?;
    let bytes = match format {
        Format::Csv => {
            let mut csv = Csv::new(&cfg);
            csv.comment(&format!("method={method}"));
            csv.row(["theta", "rho"]);
            for (t, r) in &grid {
                csv.row([fmt_real(*t), fmt_real(*r)]);
            }
            csv.into_bytes()
        }
        Format::Json => {
            let points = grid
                .into_iter()
                .map(|(theta, rho)| DensityPoint { theta, rho })
                .collect();
            json_artifact(&cfg, &DensityBody { method, points })
        }
    };
    Ok(Artifact::ok(bytes))
}

#[derive(Serialize)]
struct SampleBody {
    samples: Vec<Vec<f64>>,
}

pub fn sample(args: &SampleArgs) -> CmdResult {
    let (mut cfg, format) = base_config("sample", &args.out, Format::Csv);
    let spec = with_ensemble(&mut cfg, &args.ensemble)?;
    cfg.count = Some(args.count);
    let stream = with_stream(&mut cfg, &args.stream);
    let (batch, diag) = sample_with_diagnostics(&spec, args.count, &stream, &sampler_options()?)?;
    report_diagnostics(&diag);
    let bytes = match format {
        Format::Csv => {
            let mut csv = Csv::new(&cfg);
            csv.row((1..=spec.n).map(|j| format!("theta_{j}")));
            for pv in &batch {
                csv.row(pv.phases.iter().map(|&t| fmt_real(t)));
            }
            csv.into_bytes()
        }
        Format::Json => {
            let samples = batch.into_iter().map(|pv| pv.phases).collect();
            json_artifact(&cfg, &SampleBody { samples })
        }
    };
    Ok(Artifact::ok(bytes))
}

#[derive(Serialize)]
struct ChiSquareEntry {
    statistic: f64,
    dof: usize,
    bins_used: usize,
    sample_count: u64,
    p_value: f64,
    passed: bool,
}

#[derive(Serialize)]
struct KsEntry {
    statistic: f64,
    p_value: f64,
    passed: bool,
    note: &'static str,
}

#[derive(Serialize)]
struct MomentEntry {
    k: i64,
    analytic: f64,
    mean: f64,
    standard_error: f64,
    z_score: f64,
    passed: bool,
}

#[derive(Serialize)]
struct DiagnosticsEntry {
    matrices: u64,
    unitarity: f64,
    symmetry: f64,
    selfduality: f64,
    determinant: f64,
    kramers_gap: f64,
}

#[derive(Serialize)]
struct VerifyBody {
    passed: bool,
    reference: &'static str,
    p_threshold: f64,
    z_threshold: f64,
    chi_square: ChiSquareEntry,
    ks: KsEntry,
    moments: Vec<MomentEntry>,
    diagnostics: DiagnosticsEntry,
}

const KS_NOTE: &str = "pooled eigenphases of one matrix are dependent; KS p-value is approximate";

pub fn verify(args: &VerifyArgs) -> CmdResult {
    let (mut cfg, format) = base_config("verify", &args.out, Format::Json);
    let spec = with_ensemble(&mut cfg, &args.ensemble)?;
    cfg.count = Some(args.count);
    cfg.bins = Some(args.bins);
    cfg.expect_uniform = Some(args.expect_uniform);
    let stream = with_stream(&mut cfg, &args.stream);
    let hs = HistogramSpec::new(args.bins)?;
    let report = run_verification(
        &spec,
        args.count,
        &stream,
        &hs,
        &sampler_options()?,
        args.expect_uniform,
    )?;
    report_diagnostics(&report.diagnostics);
    let reference = if args.expect_uniform || !spec.unimodular {
        "uniform"
    } else {
        density_kind(&Density::for_spec(&spec)?)
    };
    let g = &report.gof;
    let passed = report.passed();
    let bytes = match format {
        Format::Csv => {
            let mut csv = Csv::new(&cfg);
            csv.comment(&format!("reference={reference}"));
            csv.comment(&format!(
                "chi_square dof={} bins_used={} sample_count={}",
                g.dof, g.bins_used, g.sample_count
            ));
            csv.comment(KS_NOTE);
            csv.row([
                "check",
                "statistic",
                "reference",
                "standard_error",
                "p_value",
                "z_score",
                "passed",
            ]);
            csv.row([
                "chi_square".to_owned(),
                fmt_real(g.chi_square),
                String::new(),
                String::new(),
                fmt_real(g.p_value),
                String::new(),
                g.chi_square_passed().to_string(),
            ]);
            csv.row([
                "ks".to_owned(),
                fmt_real(g.ks_statistic),
                String::new(),
                String::new(),
                fmt_real(g.ks_p_value),
                String::new(),
                g.ks_passed().to_string(),
            ]);
            for m in &report.moments {
                csv.row([
                    format!("moment_k{}", m.k),
                    fmt_real(m.mean),
                    fmt_real(m.analytic),
                    fmt_real(m.standard_error),
                    String::new(),
                    fmt_real(m.z_score),
                    m.passed().to_string(),
                ]);
            }
            csv.into_bytes()
        }
        Format::Json => {
            let d = &report.diagnostics;
            let body = VerifyBody {
                passed,
                reference,
                p_threshold: verify::P_VALUE_THRESHOLD,
                z_threshold: verify::Z_THRESHOLD,
                chi_square: ChiSquareEntry {
                    statistic: g.chi_square,
                    dof: g.dof,
                    bins_used: g.bins_used,
                    sample_count: g.sample_count,
                    p_value: g.p_value,
                    passed: g.chi_square_passed(),
                },
                ks: KsEntry {
                    statistic: g.ks_statistic,
                    p_value: g.ks_p_value,
                    passed: g.ks_passed(),
                    note: KS_NOTE,
                },
                moments: report
                    .moments
                    .iter()
                    .map(|m| MomentEntry {
                        k: m.k,
                        analytic: m.analytic,
                        mean: m.mean,
                        standard_error: m.standard_error,
                        z_score: m.z_score,
                        passed: m.passed(),
                    })
                    .collect(),
                diagnostics: DiagnosticsEntry {
                    matrices: d.matrices,
                    unitarity: d.unitarity,
                    symmetry: d.symmetry,
                    selfduality: d.selfduality,
                    determinant: d.determinant,
                    kramers_gap: d.kramers_gap,
                },
            };
            json_artifact(&cfg, &body)
        }
    };
    Ok(Artifact { bytes, passed })
}

#[derive(Serialize)]
struct PoleEntry {
    j: usize,
    factor: String,
    argument: f64,
}

#[derive(Serialize)]
struct MorrisBody {
    value: f64,
    sign: i8,
    log_abs: f64,
    exact_zero: bool,
    pole: Option<PoleEntry>,
}

pub fn morris(args: &MorrisArgs) -> CmdResult {
    let (mut cfg, format) = base_config("morris", &args.out, Format::Csv);
    cfg.n_vars = Some(args.n_vars);
    cfg.a = Some(args.a);
    cfg.b = Some(args.b);
    cfg.lam = Some(args.lam);
    let params = MorrisParams::new(args.n_vars, args.a, args.b, args.lam)?;
    let mv = morris_evaluate(&params)?;
    let pole = mv.pole.map(|p| PoleEntry {
        j: p.j,
        factor: p.factor.to_string(),
        argument: p.argument,
    });
    if let Some(p) = &pole {
        eprintln!(
            "exact zero: {} has a pole at {} for j={}",
            p.factor, p.argument, p.j
        );
    }
    let body = MorrisBody {
        value: mv.to_f64(),
        sign: mv.value.sign,
        log_abs: mv.value.log_abs,
        exact_zero: mv.pole.is_some(),
        pole,
    };
    let bytes = match format {
        Format::Csv => {
            let mut csv = Csv::new(&cfg);
            csv.row([
                "value",
                "sign",
                "log_abs",
                "exact_zero",
                "pole_j",
                "pole_factor",
                "pole_argument",
            ]);
            let (j, factor, arg) = match &body.pole {
                Some(p) => (p.j.to_string(), p.factor.clone(), fmt_real(p.argument)),
                None => Default::default(),
            };
            csv.row([
                fmt_real(body.value),
                body.sign.to_string(),
                fmt_real(body.log_abs),
                body.exact_zero.to_string(),
                j,
                factor,
                arg,
            ]);
            csv.into_bytes()
        }
        Format::Json => json_artifact(&cfg, &body),
    };
    Ok(Artifact::ok(bytes))
}

#[derive(Serialize)]
struct Empirical {
    mean: f64,
    standard_error: f64,
    z_score: f64,
}

#[derive(Serialize)]
struct MomentsBody {
    k: i64,
    analytic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical: Option<Empirical>,
}

pub fn moments(args: &MomentsArgs) -> CmdResult {
    let (mut cfg, format) = base_config("moments", &args.out, Format::Csv);
    let spec = with_ensemble(&mut cfg, &args.ensemble)?;
    cfg.k = Some(args.k);
    let analytic = if spec.unimodular {
        trace_power_expectation(spec.beta, spec.n, args.k)?
    } else if args.k == 0 {
        spec.n as f64
    } else {
        0.0
    };
    let empirical = match args.count {
        Some(count) => {
            cfg.count = Some(count);
            let stream = with_stream(&mut cfg, &args.stream);
            let (batch, diag) =
                sample_with_diagnostics(&spec, count, &stream, &sampler_options()?)?;
            report_diagnostics(&diag);
            if batch.is_empty() {
                return Err(CliError::Usage("--count must be positive".into()));
            }
            let m = moment_check(&batch, args.k, analytic);
            Some(Empirical {
                mean: m.mean,
                standard_error: m.standard_error,
                z_score: m.z_score,
            })
        }
        None => None,
    };
    let body = MomentsBody {
        k: args.k,
        analytic,
        empirical,
    };
    let bytes = match format {
        Format::Csv => {
            let mut csv = Csv::new(&cfg);
            match &body.empirical {
                Some(e) => {
                    csv.row([
                        "k",
                        "analytic",
                        "empirical_mean",
                        "standard_error",
                        "z_score",
                    ]);
                    csv.row([
                        body.k.to_string(),
                        fmt_real(body.analytic),
                        fmt_real(e.mean),
                        fmt_real(e.standard_error),
                        fmt_real(e.z_score),
                    ]);
                }
                None => {
                    csv.row(["k", "analytic"]);
                    csv.row([body.k.to_string(), fmt_real(body.analytic)]);
                }
            }
            csv.into_bytes()
        }
        Format::Json => json_artifact(&cfg, &body),
    };
    Ok(Artifact::ok(bytes))
}
