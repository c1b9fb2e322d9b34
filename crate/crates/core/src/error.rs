use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid medium: {0}")]
    InvalidMedium(String),

    #[error("singular tridiagonal solve at s = {re}{im:+}i (pivot {pivot:.3e} at row {row}); s is close to a discrete pole")]
    SingularSolve {
        re: f64,
        im: f64,
        pivot: f64,
        row: usize,
    },

    #[error("degenerate discrete spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("Lanczos breakdown at step {0}")]
    Breakdown(usize),

    #[error("nonpositive gamma_hat_1 = {0}")]
    NonpositiveGammaHat(f64),

    #[error("recursion coefficient {name} at step {step} is not real (relative imaginary part {rel:.3e})")]
    NotReal {
        name: &'static str,
        step: usize,
        rel: f64,
    },

    #[error("Lanczos vector {0} lost the conjugate block structure")]
    BlockStructure(usize),

    #[error("ROM leaves the small-loss regime at index {0}")]
    SmallLossRegime(usize),

    #[error("impedance estimate left positive cone at node {0}")]
    ImpedanceNotPositive(usize),

    #[error("band too narrow: {0} tail modes beyond j_start, need at least 5")]
    BandTooNarrow(usize),

    #[error("line search for r0 did not converge")]
    LineSearch,

    #[error("rational fit did not stagnate after {iters} iterations (misfit {misfit:.3e})")]
    FitNotConverged { iters: usize, misfit: f64 },

    #[error("fitted residues have nonpositive sum of real parts")]
    NonpositiveResidueSum,

    #[error("loss system numerically singular with reg = 0; use reg > 0")]
    SingularLossSystem,

    #[error("eigensolver failure: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, Error>;
