//! Photon-number statistics of discrete-phase-randomized coherent pairs.
//!
//! Averaging a coherent pair `|√ξ e^{iθ}⟩|√ξ e^{iθ}⟩` over `M` equally spaced
//! phases leaves a mixture of `M` approximated k-photon states. Each one is a
//! superposition of the Fock components `n = lM + k`, weighted by
//!
//! ```text
//! P_M^ξ(k) = Σ_l e^{-2ξ} (2ξ)^{lM+k} / (lM+k)!
//! ```
//!
//! Unlike true Fock states the approximated states depend on `ξ`, so yields at
//! two intensities are only tied together through the overlap of the
//! corresponding states.

use crate::error::{Error, Result};

/// Relative size below which a series term is dropped.
const SERIES_TOL: f64 = 1e-18;

/// Hard cap on series length; the terms decay factorially so this is never
/// reached for intensities of physical interest.
const MAX_SERIES_TERMS: usize = 4096;

/// Mean photon number of one source pulse.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Intensity(f64);

impl Intensity {
    pub const VACUUM: Intensity = Intensity(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::domain(format!(
                "intensity must be finite and nonnegative, got {value}"
            )));
        }
        Ok(Intensity(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_vacuum(self) -> bool {
        self.0 == 0.0
    }
}

/// Number of discrete phases `M`; always even and at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhaseCount(usize);

impl PhaseCount {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(Error::domain(format!(
                "phase count must be an even integer >= 2, got {m}"
            )));
        }
        Ok(PhaseCount(m))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// Phase-index offset that marks an opposite trial.
    #[inline]
    pub fn half(self) -> usize {
        self.0 / 2
    }
}

impl std::fmt::Display for PhaseCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `P_M^ξ(k)` for every `k` in `0..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailDistribution {
    intensity: Intensity,
    m: PhaseCount,
    probs: Vec<f64>,
}

impl TailDistribution {
    pub fn intensity(&self) -> Intensity {
        self.intensity
    }

    pub fn phase_count(&self) -> PhaseCount {
        self.m
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, k: usize) -> f64 {
        self.probs[k]
    }

    /// Weight of the even approximated photon numbers, `Σ_j P(2j)`.
    pub fn even_mass(&self) -> f64 {
        self.probs.iter().step_by(2).sum()
    }
}

/// Sums `e^{-x} x^n / n!` over `n = k, k + M, k + 2M, ...` with `x = 2ξ`.
fn residue_series(x: f64, m: usize, k: usize) -> f64 {
    if x == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let mut term = (-x).exp();
    for n in 1..=k {
        term *= x / n as f64;
    }
    let mut sum = term;
    let mut n = k;
    for _ in 0..MAX_SERIES_TERMS {
        for _ in 0..m {
            n += 1;
            term *= x / n as f64;
        }
        sum += term;
        // Terms only decay once n exceeds x, which always holds after one step
        // for the intensities in use, but the guard keeps large-x calls exact.
        if (n as f64) > x && term <= SERIES_TOL * sum {
            break;
        }
    }
    sum
}

/// Probability `P_M^ξ(k)` of the approximated k-photon state.
pub fn tail_prob(xi: Intensity, m: PhaseCount, k: usize) -> Result<f64> {
    if k >= m.get() {
        return Err(Error::domain(format!(
            "photon index {k} out of range for M = {m}"
        )));
    }
    Ok(residue_series(2.0 * xi.value(), m.get(), k))
}

pub fn tail_distribution(xi: Intensity, m: PhaseCount) -> TailDistribution {
    let probs = (0..m.get())
        .map(|k| residue_series(2.0 * xi.value(), m.get(), k))
        .collect();
    TailDistribution {
        intensity: xi,
        m,
        probs,
    }
}

/// `Σ_l y^{lM+k} / (lM+k)!`, the unnormalized overlap series.
fn overlap_series(y: f64, m: usize, k: usize) -> f64 {
    if y == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let mut term = 1.0;
    for n in 1..=k {
        term *= y / n as f64;
    }
    let mut sum = term;
    let mut n = k;
    for _ in 0..MAX_SERIES_TERMS {
        for _ in 0..m {
            n += 1;
            term *= y / n as f64;
        }
        sum += term;
        if (n as f64) > y && term <= SERIES_TOL * sum {
            break;
        }
    }
    sum
}

/// Overlap `F = |⟨λ_k^{ξ_a}|λ_k^{ξ_b}⟩|` between approximated k-photon states.
///
/// Equal to `e^{-(ξ_a+ξ_b)} / sqrt(P(ξ_a) P(ξ_b)) · Σ_l (2 sqrt(ξ_a ξ_b))^{lM+k} / (lM+k)!`;
/// the exponential prefactors cancel against those inside the tail
/// probabilities, so the ratio is evaluated on the bare series.
pub fn fidelity(xi_a: Intensity, xi_b: Intensity, m: PhaseCount, k: usize) -> Result<f64> {
    if k >= m.get() {
        return Err(Error::domain(format!(
            "photon index {k} out of range for M = {m}"
        )));
    }
    let (a, b) = (xi_a.value(), xi_b.value());
    let saa = overlap_series(2.0 * a, m.get(), k);
    let sbb = overlap_series(2.0 * b, m.get(), k);
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedFidelity { k });
    }
    // Order the operands so the result is bit-identical under a swap.
    let (lo, hi) = if a <= b { (saa, sbb) } else { (sbb, saa) };
    let sab = overlap_series(2.0 * (a * b).sqrt(), m.get(), k);
    Ok((sab / (lo * hi).sqrt()).min(1.0))
}

/// Trace-distance bound `sqrt(1 - F²)` on the yield difference.
pub fn trace_bound(f: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::domain(format!(
            "fidelity must lie in [0, 1], got {f}"
        )));
    }
    Ok(((1.0 - f) * (1.0 + f)).sqrt())
}

/// Amplitudes of the Fock components `lM + k` relative to the `n = k`
/// component, for `l >= 1`, together with the sum of their squares.
fn relative_amplitudes(xi: f64, m: usize, k: usize) -> (Vec<f64>, f64) {
    let mut ratios = Vec::new();
    if xi == 0.0 {
        return (ratios, 0.0);
    }
    let x = 2.0 * xi;
    let mut r = 1.0_f64;
    let mut n = k;
    let mut first = None;
    for _ in 0..MAX_SERIES_TERMS {
        for _ in 0..m {
            n += 1;
            r *= (x / n as f64).sqrt();
        }
        if r == 0.0 {
            break;
        }
        ratios.push(r);
        let head = *first.get_or_insert(r);
        if (n as f64) > x && r <= 1e-20 * head {
            break;
        }
    }
    let norm_sq = ratios.iter().map(|r| r * r).sum();
    (ratios, norm_sq)
}

/// Fidelity and trace-distance bound of a pair of approximated k-photon
/// states, both evaluated without cancellation.
///
/// With `u` and `v` the normalized real amplitude vectors, `1 - F = |u - v|²/2`;
/// the dominant `n = k` component difference is rewritten so that it never
/// subtracts two numbers close to one. Near `F = 1` this resolves
/// `sqrt(1 - F²)` down to the smallest representable values instead of the
/// ~1e-8 floor a direct evaluation hits.
pub fn overlap_pair(
    xi_a: Intensity,
    xi_b: Intensity,
    m: PhaseCount,
    k: usize,
) -> Result<(f64, f64)> {
    if k >= m.get() {
        return Err(Error::domain(format!(
            "photon index {k} out of range for M = {m}"
        )));
    }
    if k > 0 && (xi_a.is_vacuum() || xi_b.is_vacuum()) {
        return Err(Error::UndefinedFidelity { k });
    }
    let (a, b) = if xi_a.value() <= xi_b.value() {
        (xi_a.value(), xi_b.value())
    } else {
        (xi_b.value(), xi_a.value())
    };
    let (ra, sa) = relative_amplitudes(a, m.get(), k);
    let (rb, sb) = relative_amplitudes(b, m.get(), k);
    let na = (1.0 + sa).sqrt();
    let nb = (1.0 + sb).sqrt();
    let head = (sb - sa) / (na + nb) / (na * nb);
    let mut dist_sq = head * head;
    for l in 0..ra.len().max(rb.len()) {
        let ua = ra.get(l).copied().unwrap_or(0.0) / na;
        let vb = rb.get(l).copied().unwrap_or(0.0) / nb;
        dist_sq += (ua - vb) * (ua - vb);
    }
    let one_minus_f = 0.5 * dist_sq;
    let f = 1.0 - one_minus_f;
    let trace = (one_minus_f * (1.0 + f)).sqrt().min(1.0);
    Ok((f, trace))
}

/// Fidelity and trace bound of one `(ξ_a, ξ_b, k)` combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapEntry {
    pub fidelity: f64,
    pub trace_bound: f64,
}

/// Overlaps for every unordered intensity pair and photon index.
///
/// `None` marks combinations where one state does not exist (vacuum with
/// `k > 0`); such pairs carry no yield constraint.
#[derive(Debug, Clone)]
pub struct FidelityTable {
    m: PhaseCount,
    intensities: Vec<Intensity>,
    // Indexed by pair_index(a, b) * M + k for a < b.
    entries: Vec<Option<OverlapEntry>>,
}

impl FidelityTable {
    pub fn new(intensities: &[Intensity], m: PhaseCount) -> Self {
        Self::from_fn(intensities, m, |a, b, k| {
            overlap_pair(a, b, m, k).ok().map(|(f, t)| {
                // The direct series is accurate away from F = 1; keep the
                // cancellation-free value only where it matters.
                let fidelity = fidelity(a, b, m, k).unwrap_or(f);
                OverlapEntry {
                    fidelity,
                    trace_bound: t,
                }
            })
        })
    }

    /// Builds a table from arbitrary per-entry values, e.g. to pin every
    /// fidelity to one.
    pub fn from_fn(
        intensities: &[Intensity],
        m: PhaseCount,
        mut entry: impl FnMut(Intensity, Intensity, usize) -> Option<OverlapEntry>,
    ) -> Self {
        let n = intensities.len();
        let mut entries = Vec::with_capacity(n * (n.saturating_sub(1)) / 2 * m.get());
        for a in 0..n {
            for b in (a + 1)..n {
                for k in 0..m.get() {
                    entries.push(entry(intensities[a], intensities[b], k));
                }
            }
        }
        FidelityTable {
            m,
            intensities: intensities.to_vec(),
            entries,
        }
    }

    pub fn phase_count(&self) -> PhaseCount {
        self.m
    }

    pub fn intensities(&self) -> &[Intensity] {
        &self.intensities
    }

    fn pair_index(&self, a: usize, b: usize) -> usize {
        let n = self.intensities.len();
        // Rows of the strict upper triangle, flattened.
        a * (2 * n - a - 1) / 2 + (b - a - 1)
    }

    /// Entry for intensity indices `a`, `b` (either order) and photon index `k`.
    pub fn get(&self, a: usize, b: usize, k: usize) -> Option<OverlapEntry> {
        assert!(a < self.intensities.len() && b < self.intensities.len() && k < self.m.get());
        if a == b {
            let xi = self.intensities[a];
            return (k == 0 || !xi.is_vacuum()).then_some(OverlapEntry {
                fidelity: 1.0,
                trace_bound: 0.0,
            });
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.entries[self.pair_index(lo, hi) * self.m.get() + k]
    }

    /// Unordered index pairs `(a, b)` with `a < b`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.intensities.len();
        (0..n).flat_map(move |a| ((a + 1)..n).map(move |b| (a, b)))
    }
}
