//! Trial-by-trial simulation of the protocol with an honest relay.
//!
//! Each trial draws the mode, phases and bits or intensities, samples the two
//! detectors, and applies the announcement and sifting rules literally. The
//! aggregated counts estimate the same quantities as
//! [`observed_stats`](crate::channel::observed_stats), which makes the two a
//! pair of independent checks on each other.
//!
//! Trials are split into fixed-size shards, each driven by its own ChaCha
//! stream derived from the seed, so the result does not depend on how many
//! threads run the shards.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{click_probs, ChannelParams, ObservedStats};
use crate::error::{Error, Result};
use crate::params::ProtocolParams;

const SHARD_SIZE: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Code {
        k_a: bool,
        k_b: bool,
    },
    /// Intensity choices as positions in `[μ, ν, ω]`.
    Test {
        xi_a: usize,
        xi_b: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    L,
    R,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialRecord {
    pub mode: Mode,
    pub x: usize,
    pub y: usize,
    pub outcome: Outcome,
    pub kept: bool,
    /// Bob's final bit differs from Alice's; always false outside code mode.
    pub error: bool,
}

impl TrialRecord {
    /// Header of the trial log, matching [`TrialRecord::log_line`].
    pub const LOG_HEADER: &'static str = "mode,x,y,k_a,k_b,xi_a,xi_b,outcome,kept,error";

    /// One comma-separated record; fields that do not apply to the trial's
    /// mode are left empty.
    pub fn log_line(&self) -> String {
        let (mode, ka, kb, xa, xb) = match self.mode {
            Mode::Code { k_a, k_b } => (
                "code",
                (k_a as u8).to_string(),
                (k_b as u8).to_string(),
                String::new(),
                String::new(),
            ),
            Mode::Test { xi_a, xi_b } => (
                "test",
                String::new(),
                String::new(),
                xi_a.to_string(),
                xi_b.to_string(),
            ),
        };
        let outcome = match self.outcome {
            Outcome::L => "L",
            Outcome::R => "R",
            Outcome::None => "N",
        };
        format!(
            "{mode},{},{},{ka},{kb},{xa},{xb},{outcome},{},{}",
            self.x, self.y, self.kept as u8, self.error as u8
        )
    }
}

/// Runs one trial.
pub fn simulate_trial<R: Rng + ?Sized>(
    rng: &mut R,
    p: &ProtocolParams,
    ch: &ChannelParams,
) -> TrialRecord {
    let m = p.m.get();
    let ints = p.intensities();
    let code = rng.random_bool(0.5);
    let mode = if code {
        Mode::Code {
            k_a: rng.random_bool(0.5),
            k_b: rng.random_bool(0.5),
        }
    } else {
        Mode::Test {
            xi_a: rng.random_range(0..3),
            xi_b: rng.random_range(0..3),
        }
    };
    let x = rng.random_range(0..m);
    let y = rng.random_range(0..m);
    let phase = 2.0 * PI * (x as f64 - y as f64) / m as f64;
    let (xi_a, xi_b, dphi) = match mode {
        Mode::Code { k_a, k_b } => (p.mu, p.mu, PI * (k_a as i32 - k_b as i32) as f64 + phase),
        Mode::Test { xi_a, xi_b } => (ints[xi_a], ints[xi_b], phase),
    };
    let (pl, pr) = click_probs(xi_a, xi_b, dphi, ch);
    let l = rng.random::<f64>() < pl;
    let r = rng.random::<f64>() < pr;
    let outcome = match (l, r) {
        (true, false) => Outcome::L,
        (false, true) => Outcome::R,
        _ => Outcome::None,
    };

    let diff = (x + m - y) % m;
    let matched = diff == 0;
    let opposite = diff == p.m.half();
    let phases_kept = matched || opposite;
    let (kept, error) = match mode {
        Mode::Code { k_a, k_b } => {
            let kept = outcome != Outcome::None && phases_kept;
            let bob = k_b ^ opposite ^ (outcome == Outcome::R);
            (kept, kept && bob != k_a)
        }
        Mode::Test { xi_a, xi_b } => (
            outcome != Outcome::None && phases_kept && xi_a == xi_b,
            false,
        ),
    };
    TrialRecord {
        mode,
        x,
        y,
        outcome,
        kept,
        error,
    }
}

/// Counts for one class of kept trials: trials whose phases qualify,
/// successful announcements among them, and errors among those.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub trials: u64,
    pub clicks: u64,
    pub errors: u64,
}

impl ClassCounts {
    fn merge(&mut self, o: &ClassCounts) {
        self.trials += o.trials;
        self.clicks += o.clicks;
        self.errors += o.errors;
    }
}

/// Binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportion {
    pub value: f64,
    pub std_err: f64,
    pub samples: u64,
}

impl Proportion {
    pub fn new(hits: u64, samples: u64) -> Self {
        if samples == 0 {
            return Proportion {
                value: 0.0,
                std_err: 0.0,
                samples,
            };
        }
        let value = hits as f64 / samples as f64;
        Proportion {
            value,
            std_err: (value * (1.0 - value) / samples as f64).sqrt(),
            samples,
        }
    }

    /// Distance to `expected` in standard errors.
    ///
    /// Uses the larger of the estimate's own error and the binomial error
    /// implied by `expected`, so a run with no hits against a small but
    /// nonzero expectation is not reported as infinitely far away.
    pub fn z_score(&self, expected: f64) -> f64 {
        let diff = (self.value - expected).abs();
        if diff == 0.0 {
            return 0.0;
        }
        let null = if self.samples > 0 {
            (expected * (1.0 - expected) / self.samples as f64).sqrt()
        } else {
            0.0
        };
        let se = self.std_err.max(null);
        if se > 0.0 {
            diff / se
        } else {
            f64::INFINITY
        }
    }
}

/// Aggregated Monte Carlo counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct McEstimate {
    pub trials: u64,
    pub code_trials: u64,
    /// Code-mode trials with a successful announcement.
    pub code_clicks: u64,
    pub code_kept: u64,
    pub matched: ClassCounts,
    pub opposite: ClassCounts,
    /// Same-intensity phase-kept test trials per intensity `[μ, ν, ω]`.
    pub test: [ClassCounts; 3],
    pub kept_total: u64,
}

impl McEstimate {
    fn record(&mut self, t: &TrialRecord, half: usize, m: usize) {
        self.trials += 1;
        self.kept_total += t.kept as u64;
        let diff = (t.x + m - t.y) % m;
        let clicked = t.outcome != Outcome::None;
        match t.mode {
            Mode::Code { .. } => {
                self.code_trials += 1;
                self.code_clicks += clicked as u64;
                self.code_kept += t.kept as u64;
                let class = if diff == 0 {
                    Some(&mut self.matched)
                } else if diff == half {
                    Some(&mut self.opposite)
                } else {
                    None
                };
                if let Some(c) = class {
                    c.trials += 1;
                    c.clicks += clicked as u64;
                    c.errors += t.error as u64;
                }
            }
            Mode::Test { xi_a, xi_b } => {
                if xi_a == xi_b && (diff == 0 || diff == half) {
                    let c = &mut self.test[xi_a];
                    c.trials += 1;
                    c.clicks += clicked as u64;
                }
            }
        }
    }

    fn merge(mut self, o: McEstimate) -> McEstimate {
        self.trials += o.trials;
        self.code_trials += o.code_trials;
        self.code_clicks += o.code_clicks;
        self.code_kept += o.code_kept;
        self.kept_total += o.kept_total;
        self.matched.merge(&o.matched);
        self.opposite.merge(&o.opposite);
        for (a, b) in self.test.iter_mut().zip(o.test.iter()) {
            a.merge(b);
        }
        self
    }

    pub fn q_matched(&self) -> Proportion {
        Proportion::new(self.matched.clicks, self.matched.trials)
    }

    pub fn e_matched(&self) -> Proportion {
        Proportion::new(self.matched.errors, self.matched.clicks)
    }

    pub fn q_opposite(&self) -> Proportion {
        Proportion::new(self.opposite.clicks, self.opposite.trials)
    }

    pub fn e_opposite(&self) -> Proportion {
        Proportion::new(self.opposite.errors, self.opposite.clicks)
    }

    /// Code-mode gain, pooled over matched and opposite trials.
    pub fn q_mu(&self) -> Proportion {
        Proportion::new(
            self.matched.clicks + self.opposite.clicks,
            self.matched.trials + self.opposite.trials,
        )
    }

    pub fn e_mu(&self) -> Proportion {
        Proportion::new(
            self.matched.errors + self.opposite.errors,
            self.matched.clicks + self.opposite.clicks,
        )
    }

    pub fn test_gain(&self, i: usize) -> Proportion {
        Proportion::new(self.test[i].clicks, self.test[i].trials)
    }

    /// Fraction of code-mode announcements that survive phase sifting; tends
    /// to `2/M`.
    pub fn kept_fraction(&self) -> Proportion {
        Proportion::new(self.code_kept, self.code_clicks)
    }

    /// Point estimates in the shape of the analytic statistics.
    pub fn to_observed(&self) -> ObservedStats {
        ObservedStats::from_parts(
            [0, 1, 2].map(|i| self.test_gain(i).value),
            self.q_matched().value,
            self.e_matched().value,
            self.q_opposite().value,
            self.e_opposite().value,
        )
    }

    /// Every field paired with its analytic counterpart, labelled.
    pub fn compare(&self, analytic: &ObservedStats) -> Vec<(&'static str, Proportion, f64)> {
        vec![
            ("q_mu", self.q_mu(), analytic.q_mu),
            ("e_mu", self.e_mu(), analytic.e_mu),
            ("q_matched", self.q_matched(), analytic.q_matched),
            ("e_matched", self.e_matched(), analytic.e_matched),
            ("q_opposite", self.q_opposite(), analytic.q_opposite),
            ("e_opposite", self.e_opposite(), analytic.e_opposite),
            ("q_test_mu", self.test_gain(0), analytic.test_gains[0]),
            ("q_test_nu", self.test_gain(1), analytic.test_gains[1]),
            ("q_test_omega", self.test_gain(2), analytic.test_gains[2]),
        ]
    }
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

fn run_shard(
    p: &ProtocolParams,
    ch: &ChannelParams,
    seed: u64,
    shard: u64,
    count: u64,
    mut sink: impl FnMut(&TrialRecord),
) -> McEstimate {
    let mut rng = shard_rng(seed, shard);
    let mut est = McEstimate::default();
    let (half, m) = (p.m.half(), p.m.get());
    for _ in 0..count {
        let t = simulate_trial(&mut rng, p, ch);
        sink(&t);
        est.record(&t, half, m);
    }
    est
}

fn shard_sizes(n: u64) -> impl Iterator<Item = (u64, u64)> {
    let shards = n.div_ceil(SHARD_SIZE);
    (0..shards).map(move |s| (s, SHARD_SIZE.min(n - s * SHARD_SIZE)))
}

/// Runs `n` trials in parallel; the result depends only on the inputs and
/// `seed`.
pub fn run_trials(p: &ProtocolParams, ch: &ChannelParams, n: u64, seed: u64) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::domain("trial count must be at least 1"));
    }
    let shards: Vec<_> = shard_sizes(n).collect();
    Ok(shards
        .into_par_iter()
        .map(|(s, count)| run_shard(p, ch, seed, s, count, |_| {}))
        .reduce(McEstimate::default, McEstimate::merge))
}

/// Serial variant of [`run_trials`] that also writes every trial to `log`,
/// one [`TrialRecord::log_line`] per line after a header. Produces the same
/// estimate as the parallel run.
pub fn run_trials_logged(
    p: &ProtocolParams,
    ch: &ChannelParams,
    n: u64,
    seed: u64,
    log: &mut impl Write,
) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::domain("trial count must be at least 1"));
    }
    let io_err = |e: io::Error| Error::domain(format!("trial log: {e}"));
    writeln!(log, "{}", TrialRecord::LOG_HEADER).map_err(io_err)?;
    let mut total = McEstimate::default();
    let mut failure = None;
    for (s, count) in shard_sizes(n) {
        let est = run_shard(p, ch, seed, s, count, |t| {
            if failure.is_none() {
                if let Err(e) = writeln!(log, "{}", t.log_line()) {
                    failure = Some(e);
                }
            }
        });
        total = total.merge(est);
    }
    match failure {
        Some(e) => Err(io_err(e)),
        None => Ok(total),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_estimate() {
        let p = ProtocolParams::new(4, 0.1, 0.01, 0.0, 1.1).unwrap();
        let ch = ChannelParams::reference(5.0).unwrap();
        let a = run_trials(&p, &ch, 200_000, 7).unwrap();
        let b = run_trials(&p, &ch, 200_000, 7).unwrap();
        assert_eq!(a, b);
        let c = run_trials(&p, &ch, 200_000, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn darkness_keeps_nothing() {
        let p = ProtocolParams::new(6, 0.0, 0.0, 0.0, 1.1).unwrap();
        let ch = ChannelParams::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let est = run_trials(&p, &ch, 100_000, 1).unwrap();
        assert_eq!(est.kept_total, 0);
        assert_eq!(est.code_clicks, 0);
    }

    #[test]
    fn logged_run_matches_parallel_run() {
        let p = ProtocolParams::new(4, 0.3, 0.05, 0.0, 1.1).unwrap();
        let ch = ChannelParams::reference(3.0).unwrap();
        let n = 3 * SHARD_SIZE / 2;
        let mut buf = Vec::new();
        let logged = run_trials_logged(&p, &ch, n, 11, &mut buf).unwrap();
        assert_eq!(logged, run_trials(&p, &ch, n, 11).unwrap());
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TrialRecord::LOG_HEADER));
        assert_eq!(lines.count() as u64, n);
    }

    #[test]
    fn kept_trials_obey_sifting_rule() {
        let p = ProtocolParams::new(6, 0.5, 0.1, 0.0, 1.1).unwrap();
        let ch = ChannelParams::reference(0.0).unwrap();
        let mut rng = shard_rng(3, 0);
        for _ in 0..50_000 {
            let t = simulate_trial(&mut rng, &p, &ch);
            let diff = (t.x + 6 - t.y) % 6;
            let same_intensity = match t.mode {
                Mode::Test { xi_a, xi_b } => xi_a == xi_b,
                Mode::Code { .. } => true,
            };
            let expect = t.outcome != Outcome::None && (diff == 0 || diff == 3) && same_intensity;
            assert_eq!(t.kept, expect);
            if !matches!(t.mode, Mode::Code { .. }) || !t.kept {
                assert!(!t.error);
            }
        }
    }

    #[test]
    fn z_score_handles_empty_counts() {
        let p = Proportion::new(0, 1000);
        assert_eq!(p.z_score(0.0), 0.0);
        assert!(p.z_score(1e-8) < 0.01);
        assert!(Proportion::new(500, 1000).z_score(0.4) > 6.0);
    }
}
