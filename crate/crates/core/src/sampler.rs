//! Exact samplers for CUE/COE/CSE eigenphases, with and without det U = 1.
//!
//! Haar unitaries come from the phase-corrected QR of a Ginibre matrix.
//! The orthogonal and symplectic ensembles use `V Vᵀ` and `(J Vᵀ J⁻¹) V`.
//! The unimodular constraint is imposed on the eigenphases by the global
//! rotation `θ_j → θ_j - S/N + 2πk/N` (S = Σθ, k uniform on 0..N), which maps
//! the rotation-invariant CβE measure onto its conditional measure at
//! Σθ ≡ 0 (mod 2π).

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::density::EnsembleSpec;
use crate::error::{Error, Result};
use crate::numeric::{wrap_phase, NeumaierSum, TWO_PI};
use crate::rng::{RngStream, SampleRng};

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvalue moduli must lie within this distance of 1.
pub const DEFAULT_EIG_TOL: f64 = 1e-9;
/// Maximum separation of Kramers partners.
pub const DEFAULT_KRAMERS_TOL: f64 = 1e-7;
/// Samples per RNG shard; fixed so output does not depend on thread count.
pub const SHARD_SIZE: usize = 512;

const SCHUR_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    entries: CMatrix,
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `J = iσ₂ ⊗ I_N = [[0, I], [-I, 0]]`
pub fn symplectic_unit(n: usize) -> CMatrix {
    let one = Complex64::new(1.0, 0.0);
    CMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if j == i + n {
            one
        } else if i == j + n {
            -one
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// `Uᴰ = J Uᵀ J⁻¹`
pub fn dual(u: &CMatrix) -> CMatrix {
    assert!(u.nrows().is_multiple_of(2) && u.is_square());
    let j = symplectic_unit(u.nrows() / 2);
    // J⁻¹ = -J
    -(&j * u.transpose() * &j)
}

impl UnitaryMatrix {
    /// Wraps a matrix without checking unitarity.
    pub fn from_matrix(entries: CMatrix) -> Self {
        assert!(entries.is_square(), "unitary matrices are square");
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_inner(self) -> CMatrix {
        self.entries
    }

    /// `‖U†U - I‖_max`
    pub fn unitarity_residual(&self) -> f64 {
        let g = self.entries.adjoint() * &self.entries;
        max_abs(&(g - CMatrix::identity(self.dim(), self.dim())))
    }

    /// `‖U - Uᵀ‖_max`
    pub fn symmetry_residual(&self) -> f64 {
        max_abs(&(&self.entries - self.entries.transpose()))
    }

    /// `‖U - J Uᵀ J⁻¹‖_max`; infinite for odd dimensions.
    pub fn selfduality_residual(&self) -> f64 {
        if !self.dim().is_multiple_of(2) {
            return f64::INFINITY;
        }
        max_abs(&(&self.entries - dual(&self.entries)))
    }

    pub fn determinant(&self) -> Complex64 {
        self.entries.clone().determinant()
    }
}

/// Eigenphases sorted ascending in (-π, π].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    pub phases: Vec<f64>,
    /// Whether Σθ ≡ 0 (mod 2π) has been imposed.
    pub constrained: bool,
}

impl PhaseVector {
    pub fn new(mut phases: Vec<f64>, constrained: bool) -> Self {
        for p in &mut phases {
            *p = wrap_phase(*p);
        }
        phases.sort_by(f64::total_cmp);
        Self {
            phases,
            constrained,
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Distance of Σθ from the nearest multiple of 2π.
    pub fn sum_defect(&self) -> f64 {
        let s: NeumaierSum = self.phases.iter().copied().collect();
        wrap_phase(s.total()).abs()
    }
}

pub fn ginibre(dim: usize, rng: &mut SampleRng) -> CMatrix {
    assert!(dim >= 1, "dimension must be positive");
    // column-major fill, fixed for reproducibility
    let data: Vec<Complex64> = (0..dim * dim).map(|_| rng.complex_gaussian()).collect();
    CMatrix::from_vec(dim, dim, data)
}

/// Haar-distributed U(dim) via `Q · diag(r_jj / |r_jj|)`.
pub fn haar_unitary(dim: usize, rng: &mut SampleRng) -> Result<UnitaryMatrix> {
    for _attempt in 0..2 {
        let (mut q, r) = ginibre(dim, rng).qr().unpack();
        let r_diag = r.diagonal();
        if r_diag.iter().any(|d| d.norm() == 0.0) {
            continue;
        }
        for (j, d) in r_diag.iter().enumerate() {
            let phase = d / d.norm();
            for z in q.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
        return Ok(UnitaryMatrix { entries: q });
    }
    Err(Error::EigensolverFailure(
        "QR of the Ginibre matrix produced a zero pivot twice".into(),
    ))
}

/// Haar-distributed SU(dim): a Haar U(dim) matrix times a uniformly chosen
/// dim-th root of its inverse determinant.
pub fn haar_special_unitary(dim: usize, rng: &mut SampleRng) -> Result<UnitaryMatrix> {
    let v = haar_unitary(dim, rng)?;
    let arg = v.determinant().arg();
    let k = rng.below(dim as u64) as f64;
    let phase = Complex64::from_polar(1.0, (-arg + TWO_PI * k) / dim as f64);
    Ok(UnitaryMatrix {
        entries: v.entries * phase,
    })
}

/// COE(N): `W = V Vᵀ` with V Haar on U(N).
pub fn symmetric_unitary(n: usize, rng: &mut SampleRng) -> Result<UnitaryMatrix> {
    let v = haar_unitary(n, rng)?.entries;
    let w = &v * v.transpose();
    Ok(UnitaryMatrix { entries: w })
}

/// CSE(N): `W = Vᴰ V` with V Haar on U(2N); the result is 2N × 2N.
pub fn selfdual_unitary(n: usize, rng: &mut SampleRng) -> Result<UnitaryMatrix> {
    let v = haar_unitary(2 * n, rng)?.entries;
    let w = dual(&v) * v;
    Ok(UnitaryMatrix { entries: w })
}

/// Eigenphases from a dense complex Schur decomposition.
pub fn eigenphases(w: &UnitaryMatrix, tol: f64) -> Result<PhaseVector> {
    let schur = Schur::try_new(w.entries.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::EigensolverFailure("Schur iteration did not converge".into()))?;
    let values = schur
        .eigenvalues()
        .ok_or_else(|| Error::EigensolverFailure("Schur form is not triangular".into()))?;
    let mut phases = Vec::with_capacity(values.len());
    for lambda in values.iter() {
        let modulus = lambda.norm();
        if (modulus - 1.0).abs() > tol {
            return Err(Error::NotUnitary { modulus, tol });
        }
        phases.push(lambda.arg());
    }
    Ok(PhaseVector::new(phases, false))
}

/// Collapses Kramers-degenerate pairs; returns the reduced vector and the
/// largest partner gap.
pub fn kramers_reduce_with_gap(pv: &PhaseVector, tol: f64) -> Result<(PhaseVector, f64)> {
    let m = pv.len();
    if !m.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "Kramers reduction needs an even number of phases, got {m}"
        )));
    }
    if m == 0 {
        return Ok((PhaseVector::new(Vec::new(), pv.constrained), 0.0));
    }
    let p = &pv.phases;
    let gap = |i: usize, j: usize| wrap_phase(p[j % m] - p[i]).abs();
    // pairs (0,1),(2,3),… or, across the ±π seam, (1,2),…,(m-1,0)
    let direct = (0..m).step_by(2).map(|i| gap(i, i + 1)).fold(0.0, f64::max);
    let shifted = (1..m).step_by(2).map(|i| gap(i, i + 1)).fold(0.0, f64::max);
    let offset = if shifted < direct { 1 } else { 0 };
    let worst = direct.min(shifted);
    if worst > tol {
        return Err(Error::PairingFailure { gap: worst, tol });
    }
    let reduced = (offset..m)
        .step_by(2)
        .map(|i| {
            let x = p[i];
            x + 0.5 * wrap_phase(p[(i + 1) % m] - x)
        })
        .collect();
    Ok((PhaseVector::new(reduced, pv.constrained), worst))
}

pub fn kramers_reduce(pv: &PhaseVector, tol: f64) -> Result<PhaseVector> {
    kramers_reduce_with_gap(pv, tol).map(|(v, _)| v)
}

/// Rotation onto Σθ ≡ 0 (mod 2π) using the branch `k` of the N-th root.
pub fn unimodular_rotate_with(pv: &PhaseVector, k: u64) -> PhaseVector {
    let n = pv.len();
    if n == 0 {
        return PhaseVector::new(Vec::new(), true);
    }
    let s: NeumaierSum = pv.phases.iter().copied().collect();
    let shift = -wrap_phase(s.total()) / n as f64 + TWO_PI * k as f64 / n as f64;
    PhaseVector::new(pv.phases.iter().map(|t| t + shift).collect(), true)
}

pub fn unimodular_rotate(pv: &PhaseVector, rng: &mut SampleRng) -> PhaseVector {
    let n = pv.len().max(1) as u64;
    unimodular_rotate_with(pv, rng.below(n))
}

/// How the β = 2 unimodular ensemble is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Beta2Path {
    /// Eigenphases of a Haar SU(N) matrix.
    #[default]
    DeterminantCorrection,
    /// CUE eigenphases followed by the global rotation.
    PhaseRotation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerOptions {
    pub beta2_path: Beta2Path,
    pub eig_tol: f64,
    pub kramers_tol: f64,
    /// Worker cap; `None` uses every available core.
    pub workers: Option<usize>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            beta2_path: Beta2Path::default(),
            eig_tol: DEFAULT_EIG_TOL,
            kramers_tol: DEFAULT_KRAMERS_TOL,
            workers: None,
        }
    }
}

/// Worst structural residuals over every matrix drawn for a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub matrices: u64,
    pub unitarity: f64,
    /// β = 1 only.
    pub symmetry: f64,
    /// β = 4 only.
    pub selfduality: f64,
    /// β = 2 with the determinant-corrected path only.
    pub determinant: f64,
    /// β = 4 only.
    pub kramers_gap: f64,
}

impl Diagnostics {
    fn merge(self, o: Self) -> Self {
        Self {
            matrices: self.matrices + o.matrices,
            unitarity: self.unitarity.max(o.unitarity),
            symmetry: self.symmetry.max(o.symmetry),
            selfduality: self.selfduality.max(o.selfduality),
            determinant: self.determinant.max(o.determinant),
            kramers_gap: self.kramers_gap.max(o.kramers_gap),
        }
    }
}

fn draw_one(
    spec: &EnsembleSpec,
    opts: &SamplerOptions,
    rng: &mut SampleRng,
    diag: &mut Diagnostics,
) -> Result<PhaseVector> {
    let n = spec.n;
    diag.matrices += 1;
    let phases = match spec.beta {
        2 => {
            let det_path = spec.unimodular && opts.beta2_path == Beta2Path::DeterminantCorrection;
            let w = if det_path {
                let w = haar_special_unitary(n, rng)?;
                diag.determinant = diag.determinant.max((w.determinant() - 1.0).norm());
                w
            } else {
                haar_unitary(n, rng)?
            };
            diag.unitarity = diag.unitarity.max(w.unitarity_residual());
            let pv = eigenphases(&w, opts.eig_tol)?;
            if det_path {
                // exact in theory; re-wrap the tiny floating-point drift of Σθ
                return Ok(unimodular_rotate_with(&pv, 0));
            }
            pv
        }
        1 => {
            let w = symmetric_unitary(n, rng)?;
            diag.unitarity = diag.unitarity.max(w.unitarity_residual());
            diag.symmetry = diag.symmetry.max(w.symmetry_residual());
            eigenphases(&w, opts.eig_tol)?
        }
        4 => {
            let w = selfdual_unitary(n, rng)?;
            diag.unitarity = diag.unitarity.max(w.unitarity_residual());
            diag.selfduality = diag.selfduality.max(w.selfduality_residual());
            let (pv, gap) =
                kramers_reduce_with_gap(&eigenphases(&w, opts.eig_tol)?, opts.kramers_tol)?;
            diag.kramers_gap = diag.kramers_gap.max(gap);
            pv
        }
        other => return Err(Error::UnsupportedBeta(other)),
    };
    Ok(if spec.unimodular {
        unimodular_rotate(&phases, rng)
    } else {
        phases
    })
}

fn draw_shard(
    spec: &EnsembleSpec,
    opts: &SamplerOptions,
    stream: &RngStream,
    shard: usize,
    count: usize,
) -> Result<(Vec<PhaseVector>, Diagnostics)> {
    let start = shard * SHARD_SIZE;
    let len = SHARD_SIZE.min(count - start);
    let mut rng = stream.shard(shard as u64);
    let mut diag = Diagnostics::default();
    let batch = (0..len)
        .map(|_| draw_one(spec, opts, &mut rng, &mut diag))
        .collect::<Result<Vec<_>>>()?;
    Ok((batch, diag))
}

/// Draws `count` eigenphase vectors plus structural diagnostics.
///
/// Samples are produced in shards of [`SHARD_SIZE`], each from its own
/// generator, and concatenated in shard order.
pub fn sample_with_diagnostics(
    spec: &EnsembleSpec,
    count: usize,
    stream: &RngStream,
    opts: &SamplerOptions,
) -> Result<(Vec<PhaseVector>, Diagnostics)> {
    if !spec.has_matrix_model() {
        return Err(Error::UnsupportedBeta(spec.beta));
    }
    let shards = count.div_ceil(SHARD_SIZE);
    let results = run_shards(shards, opts.workers, |s| {
        draw_shard(spec, opts, stream, s, count)
    });
    let mut batch = Vec::with_capacity(count);
    let mut diag = Diagnostics::default();
    for r in results {
        let (b, d) = r?;
        batch.extend(b);
        diag = diag.merge(d);
    }
    Ok((batch, diag))
}

pub fn sample_eigenphases(
    spec: &EnsembleSpec,
    count: usize,
    stream: &RngStream,
) -> Result<Vec<PhaseVector>> {
    sample_with_diagnostics(spec, count, stream, &SamplerOptions::default()).map(|(b, _)| b)
}

#[cfg(feature = "parallel")]
fn run_shards<T, F>(shards: usize, workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let go = || (0..shards).into_par_iter().map(&f).collect();
    match workers {
        Some(w) => match rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
        {
            Ok(pool) => pool.install(go),
            Err(_) => (0..shards).map(&f).collect(),
        },
        None => go(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_shards<T, F>(shards: usize, _workers: Option<usize>, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..shards).map(f).collect()
}
