use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// One of the two tail probabilities is zero, so the approximated
    /// k-photon state does not exist for that intensity.
    #[error("fidelity undefined for k = {k}: zero tail probability")]
    UndefinedFidelity { k: usize },

    #[error("observed statistics are inconsistent: the yield program is infeasible")]
    InfeasibleStatistics,

    #[error("signal gain is zero")]
    ZeroGain,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Lp(#[from] LpError),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
