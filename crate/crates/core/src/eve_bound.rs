//! Upper bound on Eve's Holevo information from the decoy statistics.
//!
//! The unknowns are the yields `Y_k^ξ` of the approximated k-photon states at
//! each intensity. They are tied to the observed test gains by
//! `Q^ξ = Σ_k P_M^ξ(k) Y_k^ξ`, and yields of the same `k` at two intensities
//! can differ by at most the trace distance `sqrt(1 - F²)` of the two states.
//! Eve's information is `H(Σ_{k even} P_M^μ(k) Y_k^μ / Q^μ)`; the extra
//! constraint that the even part is at most `Q^μ / 2` keeps the argument on the
//! increasing branch of `H`, so maximizing the linear even part maximizes the
//! entropy and the whole problem is a linear program.

use crate::channel::ObservedStats;
use crate::error::{Error, Result};
use crate::key_rate::binary_entropy;
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::params::ProtocolParams;
use crate::photon_stats::{tail_distribution, FidelityTable, PhaseCount, TailDistribution};

/// Yields `Y_k^ξ` for the intensities `[μ, ν, ω]` and `k` in `0..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldVector {
    m: PhaseCount,
    values: Vec<f64>,
}

impl YieldVector {
    pub fn new(m: PhaseCount, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len() % m.get(),
            0,
            "yield vector length must be a multiple of M"
        );
        YieldVector { m, values }
    }

    pub fn phase_count(&self) -> PhaseCount {
        self.m
    }

    /// Yield of photon index `k` at the intensity with position `intensity`.
    pub fn get(&self, intensity: usize, k: usize) -> f64 {
        self.values[intensity * self.m.get() + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn num_intensities(&self) -> usize {
        self.values.len() / self.m.get()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EveBound {
    /// Maximum of `Σ_{k even} P_M^μ(k) Y_k^μ`.
    pub lp_value: f64,
    /// `H(lp_value / Q^μ)`.
    pub holevo: f64,
    pub solution: YieldVector,
    pub status: LpStatus,
    pub max_residual: f64,
}

/// Index of variable `Y_k^ξ` for intensity position `i`.
#[inline]
pub fn var_index(m: PhaseCount, i: usize, k: usize) -> usize {
    i * m.get() + k
}

/// Assembles the yield program for the given statistics.
///
/// Row layout: one equality per intensity, then a pair of `≤` rows per
/// intensity pair and photon index with a defined overlap, then the cap on
/// the even part of the signal yields.
pub fn build_lp(
    stats: &ObservedStats,
    dists: &[TailDistribution],
    fids: &FidelityTable,
) -> Result<LinearProgram> {
    let m = fids.phase_count();
    let n_int = fids.intensities().len();
    if dists.len() != n_int || stats.test_gains.len() != n_int {
        return Err(Error::Dimension(format!(
            "{} distributions and {} gains for {} intensities",
            dists.len(),
            stats.test_gains.len(),
            n_int
        )));
    }
    if let Some(d) = dists.iter().find(|d| d.phase_count() != m) {
        return Err(Error::Dimension(format!(
            "distribution over M = {} in a table over M = {m}",
            d.phase_count()
        )));
    }
    if n_int == 0 {
        return Err(Error::Dimension("no intensities".into()));
    }
    let gains = stats.test_gains.iter().chain([&stats.q_mu]);
    if let Some(q) = gains.into_iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(Error::domain(format!("gain {q} outside [0, 1]")));
    }

    let mm = m.get();
    let n = n_int * mm;
    let mut lp = LinearProgram::new(n);
    for j in 0..n {
        lp.set_bounds(j, 0.0, 1.0);
    }

    let mut even_part = vec![0.0; n];
    for k in (0..mm).step_by(2) {
        even_part[var_index(m, 0, k)] = dists[0].get(k);
    }
    lp.set_objective(even_part.clone());

    for (i, dist) in dists.iter().enumerate() {
        let mut row = vec![0.0; n];
        row[var_index(m, i, 0)..var_index(m, i, 0) + mm].copy_from_slice(dist.probs());
        lp.add_eq(row, stats.test_gains[i]);
    }

    for (a, b) in fids.pairs() {
        for k in 0..mm {
            let Some(entry) = fids.get(a, b, k) else {
                continue;
            };
            let mut row = vec![0.0; n];
            row[var_index(m, a, k)] = 1.0;
            row[var_index(m, b, k)] = -1.0;
            let neg = row.iter().map(|v| -v).collect();
            lp.add_le(row, entry.trace_bound);
            lp.add_le(neg, entry.trace_bound);
        }
    }

    lp.add_le(even_part, 0.5 * stats.q_mu);
    Ok(lp)
}

/// Solves the yield program with explicit distributions and overlaps.
pub fn max_holevo_with(
    stats: &ObservedStats,
    dists: &[TailDistribution],
    fids: &FidelityTable,
) -> Result<EveBound> {
    if stats.q_mu <= 0.0 {
        return Err(Error::ZeroGain);
    }
    let lp = build_lp(stats, dists, fids)?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::InfeasibleStatistics),
        // Every variable is boxed, so this only happens on numerical breakdown.
        LpStatus::Unbounded => return Err(Error::domain("yield program reported unbounded")),
    }
    let lp_value = sol.objective.max(0.0);
    // The cap holds to solver tolerance; clip so H stays on its rising branch.
    let ratio = (lp_value / stats.q_mu).min(0.5);
    Ok(EveBound {
        lp_value,
        holevo: binary_entropy(ratio)?,
        solution: YieldVector::new(fids.phase_count(), sol.x),
        status: sol.status,
        max_residual: sol.max_residual,
    })
}

/// Upper bound `I_AE^μ` on Eve's Holevo information.
pub fn max_holevo(stats: &ObservedStats, p: &ProtocolParams) -> Result<EveBound> {
    if stats.q_mu <= 0.0 {
        return Err(Error::ZeroGain);
    }
    let ints = p.intensities();
    let dists: Vec<_> = ints.iter().map(|&xi| tail_distribution(xi, p.m)).collect();
    let fids = FidelityTable::new(&ints, p.m);
    max_holevo_with(stats, &dists, &fids)
}
