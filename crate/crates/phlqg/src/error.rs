use thiserror::Error;

/// Errors reported by the solvers and model constructors.
#[derive(Debug, Clone, Error)]
#[non_exhaustive]
pub enum Error {
    /// A matrix that must be symmetric positive semidefinite has a
    /// significantly negative eigenvalue.
    #[error("matrix is not positive semidefinite: lambda_min = {lambda_min:e} (tol {tol:e})")]
    NotPsd { lambda_min: f64, tol: f64 },

    /// A matrix that must be symmetric is not.
    #[error("matrix is not symmetric: ||M - M^T|| = {defect:e} (tol {tol:e})")]
    NotSymmetric { defect: f64, tol: f64 },

    /// The QR/Schur iteration did not converge within the sweep cap.
    #[error("Schur iteration did not converge within {max_sweeps} sweeps")]
    SchurFailure { max_sweeps: usize },

    /// Every probed shift of det(sE - A) was rank deficient.
    #[error("matrix pencil is singular (all {probes} probed shifts rank-deficient)")]
    SingularPencil { probes: usize },

    /// A port-Hamiltonian structural invariant failed at assembly.
    #[error("port-Hamiltonian structure violation: {0}")]
    StructureViolation(String),

    /// An equivalence transformation matrix is numerically singular.
    #[error("transformation matrix is singular or too ill-conditioned: {0}")]
    SingularTransformation(String),

    /// No stabilizing Riccati solution could be extracted.
    #[error("no stabilizing solution: {0}")]
    NoStabilizingSolution(String),

    /// The V21 block of the stable deflating subspace is singular.
    #[error("V21 block of the deflating subspace is numerically singular (sigma_min = {sigma_min:e})")]
    SingularV21 { sigma_min: f64 },

    /// The Hamiltonian matrix Q is too ill-conditioned to invert.
    #[error("Q is too ill-conditioned to invert: cond estimate {cond:e} > {limit:e}")]
    IllConditionedQ { cond: f64, limit: f64 },

    /// A certified residual exceeds its tolerance.
    #[error("residual too large: {residual:e} > {tol:e} ({context})")]
    ResidualTooLarge {
        residual: f64,
        tol: f64,
        context: String,
    },

    /// Semidefiniteness and spectral stabilization certificates disagree.
    #[error("inconsistent stabilization certificates: {0}")]
    InconsistentCertificates(String),

    /// A known solution fails the LMI it is guaranteed to satisfy.
    #[error("KYP certificate failure: lambda_min(W(Q11)) = {lambda_min:e} below -{tol:e}")]
    CertificateFailure { lambda_min: f64, tol: f64 },

    /// The regularized KYP ARE has no extractable maximal root.
    #[error("no maximal KYP solution: {0}")]
    NoMaximalSolution(String),

    /// An invariant-subspace basis is too ill-conditioned to trust.
    #[error("ill-conditioned subspace basis: cond estimate {cond:e} > {limit:e}")]
    IllConditioned { cond: f64, limit: f64 },

    /// The truncated pencil (E_r, A_r) is singular.
    #[error("reduced pencil is singular at order {ell}")]
    SingularReducedPencil { ell: usize },

    /// The requested truncation order splits a characteristic-value cluster.
    #[error("characteristic value gap too small at ell = {ell}: sigma_ell = {sigma_ell:e}, sigma_next = {sigma_next:e}")]
    GapTooSmall {
        ell: usize,
        sigma_ell: f64,
        sigma_next: f64,
    },

    /// The Gramian product has a meaningfully negative eigenvalue.
    #[error("negative eigenvalue {value:e} in characteristic-value matrix")]
    NegativeEigenvalue { value: f64 },

    /// The pencil has index larger than one where index <= 1 is required.
    #[error("pencil is not impulse-free (index {index})")]
    NotImpulseFree { index: usize },

    /// The trailing algebraic block is too ill-conditioned to eliminate.
    #[error("trailing algebraic block too ill-conditioned: cond estimate {cond:e}")]
    IllConditionedTrailingBlock { cond: f64 },

    /// A Riccati solution fails its stabilization certificate.
    #[error("solution is not stabilizing: {0}")]
    NotStabilizing(String),

    /// The A22 block of a semi-explicit system is singular.
    #[error("algebraic block A22 is singular (sigma_min = {sigma_min:e})")]
    SingularA22 { sigma_min: f64 },

    /// H-infinity norm requested for a system with unstable dynamics.
    #[error("system is not asymptotically stable: max Re(lambda) = {max_re:e}")]
    UnstableSystem { max_re: f64 },

    /// I + Pf*Pc^T is numerically singular.
    #[error("I + Pf Pc^T is numerically singular (sigma_min = {sigma_min:e})")]
    SingularIPlusPfPc { sigma_min: f64 },

    /// The constraint matrix of a network configuration is rank deficient.
    #[error("constraint matrix N is rank deficient (rank {rank} of {rows} rows)")]
    RankDeficientN { rank: usize, rows: usize },

    /// Dimension mismatch between matrices of one system.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Invalid argument outside of dimension checks.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Failure while reading or writing a system file.
    #[error("system file format error: {0}")]
    FileFormat(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
