//! Signal and decoy intensity search.
//!
//! The objective contains a linear program, so it is only piecewise smooth.
//! A log-spaced grid over `(μ, ν)` is searched first, then a window around
//! the incumbent is re-gridded with its width divided by four per round.

use rayon::prelude::*;

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::key_rate::{evaluate_point, RatePoint};
use crate::params::ProtocolParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpec {
    pub mu_range: (f64, f64),
    pub nu_range: (f64, f64),
    /// Points per axis in every round.
    pub grid: usize,
    /// Refinement rounds after the coarse grid.
    pub rounds: usize,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec {
            mu_range: (1e-4, 1.0),
            nu_range: (1e-4, 1.0),
            grid: 16,
            rounds: 3,
        }
    }
}

impl SearchSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("mu_range", self.mu_range), ("nu_range", self.nu_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(Error::domain(format!(
                    "{name} must be positive and ordered, got ({lo}, {hi})"
                )));
            }
        }
        if self.grid < 4 {
            return Err(Error::domain(format!(
                "grid must have at least 4 points per axis, got {}",
                self.grid
            )));
        }
        Ok(())
    }
}

/// Result of an intensity search.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedPoint {
    pub mu: f64,
    pub nu: f64,
    pub point: RatePoint,
    /// Unclamped rate of the incumbent after the coarse grid and each round.
    pub round_best: Vec<f64>,
    pub evaluations: usize,
    /// Grid points whose statistics produced an infeasible program.
    pub failures: usize,
}

/// `n` log-spaced points covering `[lo, hi]`; a single point if they coincide.
fn log_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Window of log-width `width` centred on `center`, clipped to `[lo, hi]`.
fn window(center: f64, width: f64, lo: f64, hi: f64) -> (f64, f64) {
    let (l, h) = (lo.ln(), hi.ln());
    let width = width.min(h - l);
    let mut a = center.ln() - width / 2.0;
    let mut b = center.ln() + width / 2.0;
    if a < l {
        b += l - a;
        a = l;
    }
    if b > h {
        a -= b - h;
        b = h;
    }
    let a = if a <= l { lo } else { a.exp().max(lo) };
    let b = if b >= h { hi } else { b.exp().min(hi) };
    (a, b)
}

/// Whether `a` beats `b`: higher unclamped rate, then smaller `μ`, then
/// smaller `ν`.
fn better(a: &RatePoint, b: &RatePoint) -> bool {
    match a.rate_unclamped.total_cmp(&b.rate_unclamped) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => (a.mu, a.nu) < (b.mu, b.nu),
    }
}

/// Evaluates every admissible `(μ, ν)` pair of a grid.
///
/// Returns the best point (if any pair was admissible), the number of
/// evaluations and the number of infeasible points.
pub fn search_grid(
    p: &ProtocolParams,
    ch: &ChannelParams,
    mus: &[f64],
    nus: &[f64],
) -> Result<(Option<RatePoint>, usize, usize)> {
    let omega = p.omega.value();
    let pairs: Vec<(f64, f64)> = mus
        .iter()
        .flat_map(|&mu| nus.iter().map(move |&nu| (mu, nu)))
        .filter(|&(mu, nu)| mu > nu && nu > omega)
        .collect();
    let results: Vec<Result<Option<RatePoint>>> = pairs
        .par_iter()
        .map(|&(mu, nu)| {
            let q = p.with_intensities(mu, nu)?;
            match evaluate_point(&q, ch) {
                Ok(r) => Ok(Some(r)),
                Err(Error::InfeasibleStatistics) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut best: Option<RatePoint> = None;
    let mut failures = 0;
    for r in results {
        match r? {
            Some(pt) => {
                if best.as_ref().is_none_or(|b| better(&pt, b)) {
                    best = Some(pt);
                }
            }
            None => failures += 1,
        }
    }
    Ok((best, pairs.len(), failures))
}

/// Maximizes the key rate over `(μ, ν)` at one channel loss.
///
/// `p` supplies `M`, `ω` and `f`; its `μ` and `ν` are ignored. When no pair
/// yields a positive rate the best pair found is returned with its rate
/// clamped to zero.
pub fn optimize_intensities(
    loss_db: f64,
    p: &ProtocolParams,
    ch: &ChannelParams,
    spec: &SearchSpec,
) -> Result<OptimizedPoint> {
    spec.validate()?;
    let ch = ch.with_loss(loss_db)?;
    let (mu_lo, mu_hi) = spec.mu_range;
    let (nu_lo, nu_hi) = spec.nu_range;

    let mus = log_axis(mu_lo, mu_hi, spec.grid);
    let nus = log_axis(nu_lo, nu_hi, spec.grid);
    let (best, mut evaluations, mut failures) = search_grid(p, &ch, &mus, &nus)?;
    let Some(mut best) = best else {
        if evaluations > 0 && failures == evaluations {
            return Err(Error::InfeasibleStatistics);
        }
        return Err(Error::domain(
            "no admissible intensity pair with mu > nu > omega in the search space",
        ));
    };
    let mut round_best = vec![best.rate_unclamped];

    let mut mu_width = (mu_hi / mu_lo).ln();
    let mut nu_width = (nu_hi / nu_lo).ln();
    for _ in 0..spec.rounds {
        mu_width /= 4.0;
        nu_width /= 4.0;
        let (a, b) = window(best.mu, mu_width, mu_lo, mu_hi);
        let (c, d) = window(best.nu, nu_width, nu_lo, nu_hi);
        let (cand, evals, fails) = search_grid(
            p,
            &ch,
            &log_axis(a, b, spec.grid),
            &log_axis(c, d, spec.grid),
        )?;
        evaluations += evals;
        failures += fails;
        if let Some(c) = cand {
            if better(&c, &best) {
                best = c;
            }
        }
        round_best.push(best.rate_unclamped);
    }

    Ok(OptimizedPoint {
        mu: best.mu,
        nu: best.nu,
        point: best,
        round_best,
        evaluations,
        failures,
    })
}
