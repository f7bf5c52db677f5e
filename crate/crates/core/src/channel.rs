//! Honest-relay channel model.
//!
//! Alice's and Bob's pulses each cross half of the total loss, meet on a
//! balanced beam splitter and are detected by two threshold detectors `L` and
//! `R`. Misalignment reduces the interference visibility from 1 to
//! `1 - 2 e_mis`, so a perfectly constructive pulse leaks a fraction `e_mis`
//! of its photons into the wrong port.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::eve_bound::YieldVector;
use crate::params::ProtocolParams;
use crate::photon_stats::{tail_distribution, Intensity};

/// Physical channel and detector settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Total Alice-Bob loss in dB; each arm carries half of it.
    pub loss_db: f64,
    pub det_eff: f64,
    /// Dark-count probability per pulse per detector.
    pub dark: f64,
    pub misalign: f64,
}

impl ChannelParams {
    pub fn new(loss_db: f64, det_eff: f64, dark: f64, misalign: f64) -> Result<Self> {
        if !(loss_db.is_finite() && loss_db >= 0.0) {
            return Err(Error::domain(format!(
                "loss must be >= 0 dB, got {loss_db}"
            )));
        }
        if !(0.0..=1.0).contains(&det_eff) {
            return Err(Error::domain(format!(
                "detector efficiency must lie in [0, 1], got {det_eff}"
            )));
        }
        if !(0.0..=1.0).contains(&dark) {
            return Err(Error::domain(format!(
                "dark-count probability must lie in [0, 1], got {dark}"
            )));
        }
        if !(0.0..=0.5).contains(&misalign) {
            return Err(Error::domain(format!(
                "misalignment must lie in [0, 0.5], got {misalign}"
            )));
        }
        Ok(ChannelParams {
            loss_db,
            det_eff,
            dark,
            misalign,
        })
    }

    /// Detector efficiency 0.2, dark counts 1e-8, misalignment 1.5%.
    pub fn reference(loss_db: f64) -> Result<Self> {
        Self::new(loss_db, 0.2, 1e-8, 0.015)
    }

    pub fn with_loss(self, loss_db: f64) -> Result<Self> {
        Self::new(loss_db, self.det_eff, self.dark, self.misalign)
    }

    /// Transmittance of one arm, `10^(-loss/20)`.
    pub fn arm_transmittance(&self) -> f64 {
        10f64.powf(-self.loss_db / 20.0)
    }

    /// Per-arm efficiency including the detector.
    pub fn eta(&self) -> f64 {
        self.det_eff * self.arm_transmittance()
    }
}

/// Click probabilities of detectors `L` and `R` for a coherent pair with
/// intensities `ξ_a`, `ξ_b` and relative phase `dphi`.
pub fn click_probs(xi_a: Intensity, xi_b: Intensity, dphi: f64, ch: &ChannelParams) -> (f64, f64) {
    let (a, b) = (xi_a.value(), xi_b.value());
    let eta = ch.eta();
    let interference = 2.0 * (a * b).sqrt() * (1.0 - 2.0 * ch.misalign) * dphi.cos();
    let n_l = (eta * (a + b + interference) / 2.0).max(0.0);
    let n_r = (eta * (a + b - interference) / 2.0).max(0.0);
    let log_no_dark = (-ch.dark).ln_1p();
    (-(log_no_dark - n_l).exp_m1(), -(log_no_dark - n_r).exp_m1())
}

/// Probabilities of the two accepted announcements: only `L` clicks, only
/// `R` clicks. A double click is treated as no click.
pub fn single_clicks(
    xi_a: Intensity,
    xi_b: Intensity,
    dphi: f64,
    ch: &ChannelParams,
) -> (f64, f64) {
    let (pl, pr) = click_probs(xi_a, xi_b, dphi, ch);
    (pl * (1.0 - pr), pr * (1.0 - pl))
}

/// Gains and error rates announced by an honest relay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedStats {
    /// Test-mode gains in the order `[μ, ν, ω]`.
    pub test_gains: [f64; 3],
    pub q_mu: f64,
    pub e_mu: f64,
    pub q_matched: f64,
    pub e_matched: f64,
    pub q_opposite: f64,
    pub e_opposite: f64,
}

impl ObservedStats {
    /// Combines the matched and opposite contributions.
    pub fn from_parts(test_gains: [f64; 3], q_m: f64, e_m: f64, q_o: f64, e_o: f64) -> Self {
        let q_sum = q_m + q_o;
        let e_mu = if q_sum > 0.0 {
            (q_m * e_m + q_o * e_o) / q_sum
        } else {
            0.0
        };
        ObservedStats {
            test_gains,
            q_mu: 0.5 * q_sum,
            e_mu,
            q_matched: q_m,
            e_matched: e_m,
            q_opposite: q_o,
            e_opposite: e_o,
        }
    }
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Analytic statistics of the honest channel.
///
/// Kept code-mode trials have relative phase `0` or `π`; with Bob's flips for
/// an `R` announcement and for opposite trials, the erroneous events are an
/// `R`-only click at phase `0` and an `L`-only click at phase `π` in both
/// trial classes.
pub fn observed_stats(p: &ProtocolParams, ch: &ChannelParams) -> ObservedStats {
    let mu = p.mu;
    let (l0, r0) = single_clicks(mu, mu, 0.0, ch);
    let (lpi, rpi) = single_clicks(mu, mu, PI, ch);

    // Matched: k_a = k_b gives phase 0, k_a != k_b gives phase π.
    let click_m = (l0 + r0) + (lpi + rpi);
    let q_m = 0.5 * click_m;
    let e_m = ratio_or_zero(r0 + lpi, click_m);
    // Opposite: the extra π swaps the two bit cases, and Bob's extra flip
    // swaps which detector signals an error; the statistics coincide.
    let click_o = (lpi + rpi) + (l0 + r0);
    let q_o = 0.5 * click_o;
    let e_o = ratio_or_zero(lpi + r0, click_o);

    let test_gains = p.intensities().map(|xi| {
        let (a0, b0) = single_clicks(xi, xi, 0.0, ch);
        let (api, bpi) = single_clicks(xi, xi, PI, ch);
        0.5 * ((a0 + b0) + (api + bpi))
    });
    ObservedStats::from_parts(test_gains, q_m, e_m, q_o, e_o)
}

/// Probability that exactly one detector clicks when `n` photons arrive in
/// the constructive port mode.
///
/// Each photon is detected with probability `η` and routed to the wrong
/// detector with probability `e_mis`.
pub fn fock_yield(n: usize, ch: &ChannelParams) -> f64 {
    let eta = ch.eta();
    let n = n as f64;
    // Written as (1-d)[(A^n - C^n) + (B^n - C^n) + 2d C^n] with A, B >= C so
    // that no term cancels when the yield is of the order of the dark count.
    let ln_a = (-eta * (1.0 - ch.misalign)).ln_1p();
    let ln_b = (-eta * ch.misalign).ln_1p();
    let ln_c = (-eta).ln_1p();
    let c_n = if n == 0.0 { 1.0 } else { (n * ln_c).exp() };
    if c_n == 0.0 {
        return (1.0 - ch.dark) * ((n * ln_a).exp() + (n * ln_b).exp());
    }
    let gap = |ln_x: f64| c_n * (n * (ln_x - ln_c)).exp_m1();
    (1.0 - ch.dark) * (gap(ln_a) + gap(ln_b) + 2.0 * ch.dark * c_n)
}

/// Yields `Y_k^ξ` the honest channel produces on the approximated k-photon
/// states.
///
/// The honest measurement is diagonal in total photon number, so each yield
/// is the tail-weighted average of the Fock yields `lM + k`. For the vacuum
/// intensity only `k = 0` exists; the other entries carry the plain Fock
/// yield since they never enter a constraint.
pub fn honest_yields(p: &ProtocolParams, ch: &ChannelParams) -> YieldVector {
    let m = p.m.get();
    let mut values = Vec::with_capacity(3 * m);
    for xi in p.intensities() {
        let dist = tail_distribution(xi, p.m);
        let x = 2.0 * xi.value();
        for k in 0..m {
            let pk = dist.get(k);
            if pk == 0.0 {
                values.push(fock_yield(k, ch));
                continue;
            }
            let mut term = (-x).exp();
            for n in 1..=k {
                term *= x / n as f64;
            }
            let mut acc = term * fock_yield(k, ch);
            let mut n = k;
            loop {
                for _ in 0..m {
                    n += 1;
                    term *= x / n as f64;
                }
                acc += term * fock_yield(n, ch);
                if (n as f64) > x && term <= 1e-18 * pk {
                    break;
                }
            }
            values.push((acc / pk).clamp(0.0, 1.0));
        }
    }
    YieldVector::new(p.m, values)
}
