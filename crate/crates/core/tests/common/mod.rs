//! Independent oracles shared by the integration tests and the acceptance
//! runner.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tfqkd::lp::{solve_lp, LinearProgram, LpStatus};
use tfqkd::photon_stats::{tail_distribution, Intensity, PhaseCount};
use tfqkd::{ChannelParams, FidelityTable, ObservedStats};

// ---------------------------------------------------------------------------
// Fixed-point arithmetic with 60 decimal digits after the point.

const DIGITS: u32 = 60;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Big(BigInt);

fn scale() -> BigInt {
    BigInt::from(10u32).pow(DIGITS)
}

impl Big {
    pub fn zero() -> Self {
        Big(BigInt::zero())
    }

    pub fn int(n: i64) -> Self {
        Big(BigInt::from(n) * scale())
    }

    /// Exact value of a double, truncated to the working precision.
    pub fn from_f64(x: f64) -> Self {
        let r = BigRational::from_f64(x).expect("finite");
        Big((r * BigRational::from_integer(scale())).to_integer())
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Big(BigInt::from(num) * scale() / BigInt::from(den))
    }

    pub fn to_f64(&self) -> f64 {
        BigRational::new(self.0.clone(), scale()).to_f64().unwrap()
    }

    pub fn add(&self, o: &Big) -> Big {
        Big(&self.0 + &o.0)
    }

    pub fn sub(&self, o: &Big) -> Big {
        Big(&self.0 - &o.0)
    }

    pub fn mul(&self, o: &Big) -> Big {
        Big(&self.0 * &o.0 / scale())
    }

    pub fn div(&self, o: &Big) -> Big {
        Big(&self.0 * scale() / &o.0)
    }

    pub fn div_int(&self, n: u64) -> Big {
        Big(&self.0 / BigInt::from(n))
    }

    pub fn sqrt(&self) -> Big {
        Big((&self.0 * scale()).sqrt())
    }

    pub fn is_negligible(&self) -> bool {
        self.0.abs() < BigInt::from(10u32)
    }

    /// Taylor series; arguments are small in every use here.
    pub fn exp(&self) -> Big {
        let mut sum = Big::int(1);
        let mut term = Big::int(1);
        for n in 1..400u64 {
            term = term.mul(self).div_int(n);
            if term.is_negligible() {
                break;
            }
            sum = sum.add(&term);
        }
        sum
    }

    /// `ln x = 2 atanh((x - 1) / (x + 1))` after scaling `x` into `[1/2, 2]`.
    pub fn ln(&self) -> Big {
        assert!(self.0.is_positive());
        let (one, two) = (Big::int(1), Big::int(2));
        let half = Big::ratio(1, 2);
        let mut x = self.clone();
        let mut shift = 0i64;
        while x < half {
            x = x.add(&x);
            shift -= 1;
        }
        while x > two {
            x = x.div_int(2);
            shift += 1;
        }
        let atanh_series = |x: &Big| {
            let z = x.sub(&one).div(&x.add(&one));
            let z2 = z.mul(&z);
            let mut power = z.clone();
            let mut sum = Big::zero();
            for n in 0..10_000u64 {
                let term = power.div_int(2 * n + 1);
                if term.is_negligible() {
                    break;
                }
                sum = sum.add(&term);
                power = power.mul(&z2);
            }
            sum.add(&sum)
        };
        let ln2 = atanh_series(&two);
        atanh_series(&x).add(&Big(ln2.0 * BigInt::from(shift)))
    }

    pub fn pow(&self, n: u64) -> Big {
        let mut out = Big::int(1);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// `Σ_{l ≤ lmax} x^{lM+k} / (lM+k)!` evaluated term by term.
fn residue_series(x: &Big, m: u64, k: u64, lmax: u64) -> Big {
    let mut sum = Big::zero();
    for l in 0..=lmax {
        let n = l * m + k;
        let term = Big(x.pow(n).0 / factorial(n));
        sum = sum.add(&term);
    }
    sum
}

/// `P_M^ξ(k)` summed to `l = 50`.
pub fn tail_prob_oracle(xi: f64, m: u64, k: u64) -> f64 {
    let two_xi = Big::from_f64(2.0 * xi);
    let weight = Big::zero().sub(&two_xi).exp();
    weight.mul(&residue_series(&two_xi, m, k, 50)).to_f64()
}

/// Fidelity from its unreduced form
/// `e^{-(a+b)} / sqrt(P_a P_b) · Σ (2 sqrt(ab))^n / n!`.
pub fn fidelity_oracle(a: f64, b: f64, m: u64, k: u64) -> f64 {
    let (ba, bb) = (Big::from_f64(a), Big::from_f64(b));
    let p = |x: &Big| {
        let two = x.add(x);
        Big::zero()
            .sub(&two)
            .exp()
            .mul(&residue_series(&two, m, k, 50))
    };
    let cross = ba.mul(&bb).sqrt();
    let cross = cross.add(&cross);
    let prefactor = Big::zero().sub(&ba.add(&bb)).exp();
    let num = prefactor.mul(&residue_series(&cross, m, k, 50));
    num.div(&p(&ba).mul(&p(&bb)).sqrt()).to_f64()
}

pub fn entropy_oracle(x: &Big) -> f64 {
    let one = Big::int(1);
    let ln2 = Big::int(2).ln();
    let y = one.sub(x);
    let h = Big::zero().sub(&x.mul(&x.ln())).sub(&y.mul(&y.ln()));
    h.div(&ln2).to_f64()
}

/// `-log2(1 - η)` for `η = 10^(-loss/10)` with `loss` a multiple of 10 dB.
pub fn plob_oracle(decades: u32) -> f64 {
    let eta = Big(scale() / BigInt::from(10u32).pow(decades));
    let one = Big::int(1);
    Big::zero()
        .sub(&one.sub(&eta).ln())
        .div(&Big::int(2).ln())
        .to_f64()
}

// ---------------------------------------------------------------------------
// Linear programs: random instances and a vertex-enumeration oracle.

/// Dense solve by Gaussian elimination with partial pivoting; `None` if
/// singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let pivot = a[col].clone();
        for r in col + 1..n {
            let f = a[r][col] / pivot[col];
            if f != 0.0 {
                for (x, p) in a[r][col..].iter_mut().zip(&pivot[col..]) {
                    *x -= f * p;
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Maximum of the objective over all basic feasible solutions of a program
/// with finite bounds, or `None` when no vertex is feasible.
pub fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut hyper: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, rhs) in lp.le_constraints() {
        hyper.push((row.to_vec(), rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        hyper.push((e.clone(), lp.lower()[j]));
        hyper.push((e, lp.upper()[j]));
    }
    // Equalities may be rank deficient, so they join the candidate pool and
    // are enforced by the feasibility check instead.
    hyper.extend(lp.eq_constraints().map(|(r, b)| (r.to_vec(), b)));
    let mut best: Option<f64> = None;
    combinations(hyper.len(), n, &mut |pick| {
        let rows: Vec<Vec<f64>> = pick.iter().map(|&i| hyper[i].0.clone()).collect();
        let rhs: Vec<f64> = pick.iter().map(|&i| hyper[i].1).collect();
        let Some(x) = solve_square(rows, rhs) else {
            return;
        };
        if lp.max_residual(&x) > 1e-9 {
            return;
        }
        let v = lp.objective_value(&x);
        if best.is_none_or(|b| v > b) {
            best = Some(v);
        }
    });
    best
}

/// Random program with `n` boxed variables, `n_eq` equalities and `n_le`
/// inequalities. Most instances are feasible by construction around a
/// hidden interior point; `infeasible` shifts one equality out of reach.
pub fn random_program(
    rng: &mut ChaCha8Rng,
    n: usize,
    n_eq: usize,
    n_le: usize,
    infeasible: bool,
) -> LinearProgram {
    let mut lp = LinearProgram::new(n);
    let mut x0 = Vec::with_capacity(n);
    for j in 0..n {
        let lo = if rng.random_bool(0.3) {
            rng.random_range(-2.0..0.0)
        } else {
            0.0
        };
        let hi = lo + rng.random_range(0.5..3.0);
        lp.set_bounds(j, lo, hi);
        x0.push(rng.random_range(lo..hi));
    }
    lp.set_objective((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    let row = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| {
                if rng.random_bool(0.25) {
                    0.0
                } else {
                    rng.random_range(-1.0..1.0)
                }
            })
            .collect()
    };
    for i in 0..n_eq {
        let r = row(rng);
        let mut b: f64 = r.iter().zip(&x0).map(|(a, x)| a * x).sum();
        if infeasible && i == 0 {
            let reach: f64 = r
                .iter()
                .enumerate()
                .map(|(j, a)| a.abs() * (lp.upper()[j] - lp.lower()[j]))
                .sum();
            b += reach + 1.0;
        }
        lp.add_eq(r, b);
    }
    for _ in 0..n_le {
        let r = row(rng);
        let b: f64 =
            r.iter().zip(&x0).map(|(a, x)| a * x).sum::<f64>() + rng.random_range(0.0..0.5);
        lp.add_le(r, b);
    }
    lp
}

/// Checks the simplex against vertex enumeration on `cases` random programs
/// with at most 8 variables. Returns the worst objective gap.
pub fn lp_vertex_suite(cases: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let n = rng.random_range(2..=8usize);
        let n_eq = rng.random_range(0..=2usize.min(n - 1));
        let n_le = if n >= 7 {
            rng.random_range(1..=3)
        } else {
            rng.random_range(1..=8)
        };
        let infeasible = n_eq > 0 && rng.random_bool(0.1);
        let lp = random_program(&mut rng, n, n_eq, n_le, infeasible);
        let sol = solve_lp(&lp).map_err(|e| format!("case {case}: {e}"))?;
        match (vertex_oracle(&lp), sol.status) {
            (None, LpStatus::Infeasible) => {}
            (Some(v), LpStatus::Optimal) => {
                let gap = (v - sol.objective).abs();
                if gap > 1e-8 {
                    return Err(format!(
                        "case {case} (n={n}): simplex {} vs oracle {v}",
                        sol.objective
                    ));
                }
                if sol.max_residual > 1e-8 {
                    return Err(format!("case {case}: residual {}", sol.max_residual));
                }
                worst = worst.max(gap);
            }
            (oracle, status) => {
                return Err(format!(
                    "case {case}: oracle {oracle:?}, simplex {status:?}"
                ))
            }
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Brute-force search over the yield program at M = 4.

pub struct BruteForce {
    pub lp_value: f64,
    pub grid_value: f64,
    /// Objective change across one grid cell.
    pub cell_variation: f64,
    /// Feasible grid points that improved on the incumbent when visited.
    pub feasible_points: u64,
}

/// Random statistics from an honest channel at high transmittance so that
/// the 21-point grid resolves the feasible region.
pub fn random_instance(rng: &mut ChaCha8Rng) -> ([Intensity; 3], ObservedStats) {
    let mu = rng.random_range(0.3..0.8);
    let nu = rng.random_range(0.05..0.2);
    let ints = [
        Intensity::new(mu).unwrap(),
        Intensity::new(nu).unwrap(),
        Intensity::VACUUM,
    ];
    let ch = ChannelParams::new(
        rng.random_range(0.0..3.0),
        rng.random_range(0.5..1.0),
        rng.random_range(0.0..0.05),
        rng.random_range(0.0..0.1),
    )
    .unwrap();
    let p = tfqkd::ProtocolParams::new(4, mu, nu, 0.0, 1.1).unwrap();
    (ints, tfqkd::channel::observed_stats(&p, &ch))
}

/// Exhaustive search at M = 4 with ω = 0.
///
/// The vacuum yields at `k > 0` carry no weight, and the equality for ω fixes
/// `Y_0^ω`. `Y_0^μ` and `Y_0^ν` are eliminated through their equalities; the
/// remaining six yields range over a 21-point grid.
pub fn brute_force_m4(ints: [Intensity; 3], stats: &ObservedStats) -> BruteForce {
    let m = PhaseCount::new(4).unwrap();
    let dists: Vec<_> = ints.iter().map(|&x| tail_distribution(x, m)).collect();
    let fids = FidelityTable::new(&ints, m);
    let lp_value = tfqkd::eve_bound::max_holevo_with(stats, &dists, &fids)
        .unwrap()
        .lp_value;

    let pm = dists[0].probs();
    let pn = dists[1].probs();
    let y_omega = stats.test_gains[2] / dists[2].get(0);
    let t = |a: usize, b: usize, k: usize| fids.get(a, b, k).map_or(1.0, |e| e.trace_bound);
    let t_mn: Vec<f64> = (0..4).map(|k| t(0, 1, k)).collect();
    let (t_mo, t_no) = (t(0, 2, 0), t(1, 2, 0));
    let cap = 0.5 * stats.q_mu;

    const N: usize = 21;
    let h = 1.0 / (N - 1) as f64;
    let axis: Vec<f64> = (0..N).map(|i| i as f64 * h).collect();
    let mut best = f64::NEG_INFINITY;
    let mut count = 0u64;
    let tol = 1e-12;
    let mut ym = [0.0; 4];
    let mut yn = [0.0; 4];
    for &m1 in &axis {
        for &m2 in &axis {
            for &m3 in &axis {
                ym[1..].copy_from_slice(&[m1, m2, m3]);
                ym[0] = (stats.test_gains[0] - pm[1] * m1 - pm[2] * m2 - pm[3] * m3) / pm[0];
                if !(-tol..=1.0 + tol).contains(&ym[0]) || (ym[0] - y_omega).abs() > t_mo + tol {
                    continue;
                }
                let obj = pm[0] * ym[0] + pm[2] * ym[2];
                if obj > cap + tol || obj <= best {
                    continue;
                }
                for &n1 in &axis {
                    if (m1 - n1).abs() > t_mn[1] + tol {
                        continue;
                    }
                    for &n2 in &axis {
                        if (m2 - n2).abs() > t_mn[2] + tol {
                            continue;
                        }
                        for &n3 in &axis {
                            if (m3 - n3).abs() > t_mn[3] + tol {
                                continue;
                            }
                            yn[1..].copy_from_slice(&[n1, n2, n3]);
                            yn[0] = (stats.test_gains[1] - pn[1] * n1 - pn[2] * n2 - pn[3] * n3)
                                / pn[0];
                            if !(-tol..=1.0 + tol).contains(&yn[0]) {
                                continue;
                            }
                            if (ym[0] - yn[0]).abs() > t_mn[0] + tol
                                || (yn[0] - y_omega).abs() > t_no + tol
                            {
                                continue;
                            }
                            count += 1;
                            best = best.max(obj);
                        }
                    }
                }
            }
        }
    }
    // With Y_0^μ eliminated the objective is Q^μ - P(1) Y_1 - P(3) Y_3.
    BruteForce {
        lp_value,
        grid_value: best,
        cell_variation: h * (pm[1] + pm[3]),
        feasible_points: count,
    }
}
