use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid Morris parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integer overflow computing {0}")]
    Overflow(String),

    /// The unimodular N = 1 ensemble is the point mass at theta = 0.
    #[error("degenerate ensemble (beta={beta}, N=1): the single eigenphase is an atom at theta = 0 and has no density")]
    DegenerateEnsemble { beta: u32 },

    #[error("unsupported beta {0}: matrix models exist only for beta in {{1, 2, 4}}")]
    UnsupportedBeta(u32),

    #[error("quadrature oracle supports N in {{2, 3}}, got N={0}")]
    UnsupportedN(usize),

    #[error("Fourier series not converged at n_max={n_max}: tail bound {tail_bound:e} exceeds 100 x tol={tol:e}")]
    TruncationFailure {
        n_max: usize,
        tail_bound: f64,
        tol: f64,
    },

    #[error(
        "matrix is not unitary: eigenvalue modulus {modulus} deviates from 1 by more than {tol:e}"
    )]
    NotUnitary { modulus: f64, tol: f64 },

    #[error("eigensolver failed: {0}")]
    EigensolverFailure(String),

    #[error("Kramers pairing failed: partner gap {gap:e} exceeds tol={tol:e}")]
    PairingFailure { gap: f64, tol: f64 },

    #[error("insufficient samples: {got} < {need}")]
    InsufficientSamples { got: u64, need: u64 },
}
