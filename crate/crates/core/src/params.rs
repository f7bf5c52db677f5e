use crate::error::{Error, Result};
use crate::photon_stats::{Intensity, PhaseCount};

/// Source-side protocol settings: phase count, the three intensities and the
/// error-correction inefficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    pub m: PhaseCount,
    /// Signal intensity `μ`, also used in code mode.
    pub mu: Intensity,
    /// Weak decoy `ν`.
    pub nu: Intensity,
    /// Vacuum-like decoy `ω`, zero unless set otherwise.
    pub omega: Intensity,
    /// Reconciliation inefficiency `f >= 1`.
    pub f: f64,
}

impl ProtocolParams {
    /// Validates `μ >= ν >= ω` and `f >= 1`.
    ///
    /// Equal intensities are accepted so that degenerate configurations (all
    /// vacuum, for instance) can still be pushed through the channel model;
    /// the intensity search enforces strict ordering on its own.
    pub fn new(m: usize, mu: f64, nu: f64, omega: f64, f: f64) -> Result<Self> {
        let m = PhaseCount::new(m)?;
        let (mu, nu, omega) = (
            Intensity::new(mu)?,
            Intensity::new(nu)?,
            Intensity::new(omega)?,
        );
        if mu < nu || nu < omega {
            return Err(Error::domain(format!(
                "intensities must satisfy mu >= nu >= omega, got {} {} {}",
                mu.value(),
                nu.value(),
                omega.value()
            )));
        }
        if !(f.is_finite() && f >= 1.0) {
            return Err(Error::domain(format!(
                "reconciliation inefficiency must be >= 1, got {f}"
            )));
        }
        Ok(ProtocolParams {
            m,
            mu,
            nu,
            omega,
            f,
        })
    }

    /// Intensities in the fixed order `[μ, ν, ω]` used by every per-intensity
    /// array in the crate.
    pub fn intensities(&self) -> [Intensity; 3] {
        [self.mu, self.nu, self.omega]
    }

    pub fn with_intensities(self, mu: f64, nu: f64) -> Result<Self> {
        Self::new(self.m.get(), mu, nu, self.omega.value(), self.f)
    }

    pub fn with_phase_count(self, m: usize) -> Result<Self> {
        Self::new(
            m,
            self.mu.value(),
            self.nu.value(),
            self.omega.value(),
            self.f,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ProtocolParams::new(4, 0.1, 0.01, 0.0, 1.1).is_ok());
        assert!(ProtocolParams::new(4, 0.0, 0.0, 0.0, 1.1).is_ok());
        assert!(ProtocolParams::new(4, 0.01, 0.1, 0.0, 1.1).is_err());
        assert!(ProtocolParams::new(4, 0.1, 0.01, 0.0, 0.9).is_err());
        assert!(ProtocolParams::new(5, 0.1, 0.01, 0.0, 1.1).is_err());
    }
}
