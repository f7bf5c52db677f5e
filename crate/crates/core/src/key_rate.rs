//! Final key rate and the repeaterless capacity it is compared against.

use crate::channel::{ChannelParams, ObservedStats};
use crate::error::{Error, Result};
use crate::eve_bound::EveBound;
use crate::params::ProtocolParams;

/// Binary Shannon entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!(
            "entropy argument must lie in [0, 1], got {x}"
        )));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (-x).ln_1p() / std::f64::consts::LN_2)
}

/// Secret-key capacity `-log2(1 - η)` of a pure-loss channel with
/// `η = 10^(-loss/10)`. Infinite at 0 dB.
pub fn plob_bound(loss_db: f64) -> f64 {
    let eta = 10f64.powf(-loss_db / 10.0);
    if eta >= 1.0 {
        return f64::INFINITY;
    }
    -(-eta).ln_1p() / std::f64::consts::LN_2
}

/// One evaluated point of a rate-versus-loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub loss_db: f64,
    pub m: usize,
    pub mu: f64,
    pub nu: f64,
    pub q_mu: f64,
    pub e_mu: f64,
    pub i_ae: f64,
    /// Rate clamped at zero.
    pub rate: f64,
    /// Rate before clamping; negative when no key can be extracted.
    pub rate_unclamped: f64,
    pub plob: f64,
}

impl RatePoint {
    /// Sifting factor `2/M`.
    pub fn sifting(&self) -> f64 {
        2.0 / self.m as f64
    }
}

/// `R = (2/M) Q^μ (1 - f H(e^μ) - I_AE^μ)`, clamped at zero.
pub fn secret_key_rate(
    stats: &ObservedStats,
    bound: &EveBound,
    p: &ProtocolParams,
    ch: &ChannelParams,
) -> Result<RatePoint> {
    let unclamped = rate_formula(p.m.get(), stats.q_mu, stats.e_mu, bound.holevo, p.f)?;
    Ok(RatePoint {
        loss_db: ch.loss_db,
        m: p.m.get(),
        mu: p.mu.value(),
        nu: p.nu.value(),
        q_mu: stats.q_mu,
        e_mu: stats.e_mu,
        i_ae: bound.holevo,
        rate: unclamped.max(0.0),
        rate_unclamped: unclamped,
        plob: plob_bound(ch.loss_db),
    })
}

/// The unclamped rate formula on raw quantities.
pub fn rate_formula(m: usize, q_mu: f64, e_mu: f64, i_ae: f64, f: f64) -> Result<f64> {
    Ok(2.0 / m as f64 * q_mu * (1.0 - f * binary_entropy(e_mu)? - i_ae))
}

/// Rate point for a channel with no signal gain: nothing is sifted.
pub(crate) fn zero_gain_point(
    stats: &ObservedStats,
    p: &ProtocolParams,
    ch: &ChannelParams,
) -> RatePoint {
    RatePoint {
        loss_db: ch.loss_db,
        m: p.m.get(),
        mu: p.mu.value(),
        nu: p.nu.value(),
        q_mu: stats.q_mu,
        e_mu: stats.e_mu,
        i_ae: 0.0,
        rate: 0.0,
        rate_unclamped: 0.0,
        plob: plob_bound(ch.loss_db),
    }
}

/// Full pipeline at one operating point: statistics, Holevo bound, rate.
pub fn evaluate_point(p: &ProtocolParams, ch: &ChannelParams) -> Result<RatePoint> {
    let stats = crate::channel::observed_stats(p, ch);
    match crate::eve_bound::max_holevo(&stats, p) {
        Ok(bound) => secret_key_rate(&stats, &bound, p, ch),
        Err(Error::ZeroGain) => Ok(zero_gain_point(&stats, p, ch)),
        Err(e) => Err(e),
    }
}
