//! Dense bounded-variable primal simplex.
//!
//! Sized for the yield programs in this crate: a few dozen variables and
//! under a hundred rows. Every variable carries its own box, so the simplex
//! moves nonbasic variables between their bounds instead of adding a row per
//! bound. Feasibility comes from a phase-one program over artificial
//! variables; Dantzig pricing is used until a run of degenerate pivots
//! switches the solver to Bland's rule.

use nalgebra::{DMatrix, DVector};

/// Smallest tableau entry accepted as a pivot.
pub const PIVOT_TOL: f64 = 1e-10;
/// Largest constraint violation accepted as feasible.
pub const FEAS_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 10_000;

const OPT_TOL: f64 = 1e-13;
const DEGENERATE_STEP: f64 = 1e-13;
const DEGENERATE_RUN: usize = 50;
const REFACTOR_EVERY: usize = 64;
/// Bound violations below this are attributed to roundoff and clamped away.
const BOUND_SNAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex did not terminate within {0} iterations")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// `maximize c·x` subject to equality rows, `≤` rows and per-variable boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    eq_rows: Vec<Vec<f64>>,
    eq_rhs: Vec<f64>,
    le_rows: Vec<Vec<f64>>,
    le_rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    /// A program over `n` variables with zero objective and boxes `[0, +inf)`.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            n,
            objective: vec![0.0; n],
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            le_rows: Vec::new(),
            le_rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn set_objective(&mut self, c: Vec<f64>) -> &mut Self {
        self.objective = c;
        self
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> &mut Self {
        self.lower[j] = lo;
        self.upper[j] = hi;
        self
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
        self
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_le(row.into_iter().map(|a| -a).collect(), -rhs)
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rows.len()
    }

    pub fn num_le(&self) -> usize {
        self.le_rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn eq_constraints(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.eq_rows
            .iter()
            .map(Vec::as_slice)
            .zip(self.eq_rhs.iter().copied())
    }

    pub fn le_constraints(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.le_rows
            .iter()
            .map(Vec::as_slice)
            .zip(self.le_rhs.iter().copied())
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let bad = |msg: String| Err(LpError::Malformed(msg));
        if self.objective.len() != self.n {
            return bad(format!(
                "objective has {} entries, expected {}",
                self.objective.len(),
                self.n
            ));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return bad("objective has a non-finite coefficient".into());
        }
        for (i, (row, rhs)) in self
            .eq_constraints()
            .chain(self.le_constraints())
            .enumerate()
        {
            if row.len() != self.n {
                return bad(format!(
                    "row {i} has {} entries, expected {}",
                    row.len(),
                    self.n
                ));
            }
            if !rhs.is_finite() || row.iter().any(|a| !a.is_finite()) {
                return bad(format!("row {i} has a non-finite entry"));
            }
        }
        for j in 0..self.n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan()
                || hi.is_nan()
                || lo > hi
                || lo == f64::INFINITY
                || hi == f64::NEG_INFINITY
            {
                return bad(format!("variable {j} has invalid bounds [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        let eq = self.eq_constraints().map(|(r, b)| (dot(r) - b).abs());
        let le = self.le_constraints().map(|(r, b)| (dot(r) - b).max(0.0));
        let bounds = (0..self.n).map(|j| (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0));
        eq.chain(le).chain(bounds).fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_residual: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic with both bounds infinite, parked at zero.
    Free,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

struct Simplex {
    rows: usize,
    cols: usize,
    /// Scaled constraint matrix `[A | slacks | artificials]`, row-major.
    a: Vec<f64>,
    b: Vec<f64>,
    /// Current `B^{-1} A`, row-major.
    t: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    slot: Vec<Slot>,
    basis: Vec<usize>,
    first_artificial: usize,
    iterations: usize,
    degenerate_run: usize,
}

impl Simplex {
    fn setup(lp: &LinearProgram) -> Self {
        let n = lp.n;
        let n_le = lp.le_rows.len();
        let rows = lp.eq_rows.len() + n_le;
        let first_artificial = n + n_le;
        let cols = first_artificial + rows;

        let mut a = vec![0.0; rows * cols];
        let mut b = vec![0.0; rows];
        for (i, (row, rhs)) in lp.eq_constraints().chain(lp.le_constraints()).enumerate() {
            let scale = row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let scale = if scale > 0.0 { 1.0 / scale } else { 1.0 };
            for (j, v) in row.iter().enumerate() {
                a[i * cols + j] = v * scale;
            }
            b[i] = rhs * scale;
            if i >= lp.eq_rows.len() {
                let s = n + (i - lp.eq_rows.len());
                a[i * cols + s] = 1.0;
            }
        }

        let mut lo = Vec::with_capacity(cols);
        let mut hi = Vec::with_capacity(cols);
        lo.extend_from_slice(&lp.lower);
        hi.extend_from_slice(&lp.upper);
        lo.extend(std::iter::repeat_n(0.0, n_le + rows));
        hi.extend(std::iter::repeat_n(f64::INFINITY, n_le + rows));

        let mut x = vec![0.0; cols];
        let mut slot = vec![Slot::Lower; cols];
        for j in 0..n {
            if lo[j].is_finite() {
                x[j] = lo[j];
            } else if hi[j].is_finite() {
                x[j] = hi[j];
                slot[j] = Slot::Upper;
            } else {
                slot[j] = Slot::Free;
            }
        }

        let mut basis = vec![0; rows];
        for i in 0..rows {
            let r = b[i] - (0..n).map(|j| a[i * cols + j] * x[j]).sum::<f64>();
            let art = first_artificial + i;
            let slack = (i >= lp.eq_rows.len()).then(|| n + (i - lp.eq_rows.len()));
            match slack {
                Some(s) if r >= 0.0 => {
                    basis[i] = s;
                    x[s] = r;
                    slot[s] = Slot::Basic(i);
                    hi[art] = 0.0;
                }
                _ => {
                    let sign = if r >= 0.0 { 1.0 } else { -1.0 };
                    a[i * cols + art] = sign;
                    basis[i] = art;
                    x[art] = r.abs();
                    slot[art] = Slot::Basic(i);
                }
            }
        }

        // The starting basis is diagonal with entries +-1.
        let mut t = a.clone();
        for i in 0..rows {
            let d = a[i * cols + basis[i]];
            if d != 1.0 {
                t[i * cols..(i + 1) * cols].iter_mut().for_each(|v| *v /= d);
            }
        }

        Simplex {
            rows,
            cols,
            a,
            b,
            t,
            lo,
            hi,
            x,
            slot,
            basis,
            first_artificial,
            iterations: 0,
            degenerate_run: 0,
        }
    }

    #[inline]
    fn t(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        let mut d = cost[j];
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                d -= cb * self.t(i, j);
            }
        }
        d
    }

    /// Entering column and its direction of motion, if any improves `cost`.
    fn price(&self, cost: &[f64]) -> Option<(usize, f64)> {
        let bland = self.degenerate_run >= DEGENERATE_RUN;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols {
            if self.lo[j] == self.hi[j] {
                continue;
            }
            let dir = match self.slot[j] {
                Slot::Basic(_) => continue,
                Slot::Lower => {
                    let d = self.reduced_cost(cost, j);
                    if d < -OPT_TOL {
                        Some((1.0, -d))
                    } else {
                        None
                    }
                }
                Slot::Upper => {
                    let d = self.reduced_cost(cost, j);
                    if d > OPT_TOL {
                        Some((-1.0, d))
                    } else {
                        None
                    }
                }
                Slot::Free => {
                    let d = self.reduced_cost(cost, j);
                    if d.abs() > OPT_TOL {
                        Some((-d.signum(), d.abs()))
                    } else {
                        None
                    }
                }
            };
            if let Some((dir, gain)) = dir {
                if bland {
                    return Some((j, dir));
                }
                if best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((j, dir, gain));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.t(r, j);
        for v in &mut self.t[r * cols..(r + 1) * cols] {
            *v /= p;
        }
        let (head, rest) = self.t.split_at_mut(r * cols);
        let (pivot_row, tail) = rest.split_at_mut(cols);
        for row in head
            .chunks_exact_mut(cols)
            .chain(tail.chunks_exact_mut(cols))
        {
            let f = row[j];
            if f != 0.0 {
                for (v, pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pr;
                }
                row[j] = 0.0;
            }
        }
        let leaving = self.basis[r];
        self.basis[r] = j;
        self.slot[j] = Slot::Basic(r);
        self.slot[leaving] = if self.x[leaving] <= self.lo[leaving] {
            Slot::Lower
        } else if self.x[leaving] >= self.hi[leaving] {
            Slot::Upper
        } else if self.lo[leaving].is_infinite() && self.hi[leaving].is_infinite() {
            Slot::Free
        } else if (self.x[leaving] - self.lo[leaving]).abs()
            <= (self.hi[leaving] - self.x[leaving]).abs()
        {
            self.x[leaving] = self.lo[leaving];
            Slot::Lower
        } else {
            self.x[leaving] = self.hi[leaving];
            Slot::Upper
        };
    }

    fn iterate(&mut self, cost: &[f64]) -> Result<Step, LpError> {
        let Some((j, dir)) = self.price(cost) else {
            return Ok(Step::Optimal);
        };
        let bland = self.degenerate_run >= DEGENERATE_RUN;

        let mut step = if self.lo[j].is_finite() && self.hi[j].is_finite() {
            self.hi[j] - self.lo[j]
        } else {
            f64::INFINITY
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let alpha = self.t(i, j);
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let var = self.basis[i];
            let rate = -alpha * dir;
            let room = if rate < 0.0 {
                (self.x[var] - self.lo[var]) / -rate
            } else {
                (self.hi[var] - self.x[var]) / rate
            };
            if room.is_nan() || room == f64::INFINITY {
                continue;
            }
            let room = room.max(0.0);
            let better = match leave {
                None => room < step,
                Some((r, _)) => {
                    let tie = (room - step).abs() <= 1e-12 * (1.0 + step);
                    if tie {
                        if bland {
                            var < self.basis[r]
                        } else {
                            alpha.abs() > self.t(r, j).abs()
                        }
                    } else {
                        room < step
                    }
                }
            };
            if better {
                step = room;
                leave = Some((i, room));
            }
        }

        if step == f64::INFINITY {
            return Ok(Step::Unbounded);
        }
        self.iterations += 1;
        if step <= DEGENERATE_STEP {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }

        let delta = dir * step;
        self.x[j] += delta;
        for i in 0..self.rows {
            let alpha = self.t(i, j);
            if alpha != 0.0 {
                let var = self.basis[i];
                self.x[var] -= alpha * delta;
            }
        }
        match leave {
            Some((r, _)) => {
                let var = self.basis[r];
                // Snap the leaving variable onto the bound it reached.
                let rate = -self.t(r, j) * dir;
                self.x[var] = if rate < 0.0 {
                    self.lo[var]
                } else {
                    self.hi[var]
                };
                self.pivot(r, j);
            }
            None => {
                self.slot[j] = if dir > 0.0 { Slot::Upper } else { Slot::Lower };
                self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
            }
        }
        if self.iterations.is_multiple_of(REFACTOR_EVERY) {
            self.refactor();
        }
        Ok(Step::Moved)
    }

    /// Recomputes `B^{-1} A` and the basic values from the original rows.
    fn refactor(&mut self) {
        let (m, cols) = (self.rows, self.cols);
        if m == 0 {
            return;
        }
        let basis_mat = DMatrix::from_fn(m, m, |i, k| self.a[i * cols + self.basis[k]]);
        let lu = basis_mat.lu();
        let a_mat = DMatrix::from_row_slice(m, cols, &self.a);
        let Some(t) = lu.solve(&a_mat) else {
            return;
        };
        let mut rhs = DVector::from_column_slice(&self.b);
        for j in 0..cols {
            if !matches!(self.slot[j], Slot::Basic(_)) && self.x[j] != 0.0 {
                for i in 0..m {
                    rhs[i] -= self.a[i * cols + j] * self.x[j];
                }
            }
        }
        let Some(xb) = lu.solve(&rhs) else {
            return;
        };
        if t.iter().chain(xb.iter()).any(|v| !v.is_finite()) {
            return;
        }
        for i in 0..m {
            for j in 0..cols {
                self.t[i * cols + j] = t[(i, j)];
            }
            for (r, &var) in self.basis.iter().enumerate() {
                self.t[i * cols + var] = if r == i { 1.0 } else { 0.0 };
            }
            self.x[self.basis[i]] = xb[i];
        }
        for i in 0..m {
            let var = self.basis[i];
            self.x[var] = self.x[var].clamp(self.lo[var], self.hi[var]);
        }
    }

    fn run(&mut self, cost: &[f64]) -> Result<Step, LpError> {
        loop {
            if self.iterations >= MAX_ITERATIONS {
                return Err(LpError::IterationLimit(MAX_ITERATIONS));
            }
            match self.iterate(cost)? {
                Step::Moved => continue,
                Step::Unbounded => return Ok(Step::Unbounded),
                Step::Optimal => {
                    // Confirm optimality on a freshly factored tableau.
                    self.refactor();
                    if self.price(cost).is_none() {
                        return Ok(Step::Optimal);
                    }
                }
            }
        }
    }

    fn artificial_sum(&self) -> f64 {
        self.x[self.first_artificial..].iter().sum()
    }

    /// Pivots zero-valued artificials out of the basis where possible and
    /// fixes every artificial at zero.
    fn retire_artificials(&mut self) {
        for r in 0..self.rows {
            let var = self.basis[r];
            if var < self.first_artificial {
                continue;
            }
            let entering = (0..self.first_artificial)
                .filter(|&j| !matches!(self.slot[j], Slot::Basic(_)))
                .max_by(|&p, &q| self.t(r, p).abs().total_cmp(&self.t(r, q).abs()));
            if let Some(j) = entering {
                if self.t(r, j).abs() > PIVOT_TOL {
                    self.x[var] = 0.0;
                    self.pivot(r, j);
                }
            }
        }
        for j in self.first_artificial..self.cols {
            self.hi[j] = 0.0;
            if !matches!(self.slot[j], Slot::Basic(_)) {
                self.x[j] = 0.0;
                self.slot[j] = Slot::Lower;
            }
        }
        self.refactor();
    }
}

/// Maximizes `c·x` over the program's feasible set.
///
/// Infeasible and unbounded programs are reported through
/// [`LpSolution::status`]; only malformed input and failure to terminate are
/// errors.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut s = Simplex::setup(lp);

    if s.artificial_sum() > 0.0 {
        let mut phase1 = vec![0.0; s.cols];
        phase1[s.first_artificial..]
            .iter_mut()
            .for_each(|c| *c = 1.0);
        s.run(&phase1)?;
        if s.artificial_sum() > FEAS_TOL {
            return Ok(finish(lp, &s, LpStatus::Infeasible));
        }
    }
    s.retire_artificials();
    s.degenerate_run = 0;

    let mut phase2 = vec![0.0; s.cols];
    for (c, v) in phase2.iter_mut().zip(&lp.objective) {
        *c = -v;
    }
    let status = match s.run(&phase2)? {
        Step::Unbounded => LpStatus::Unbounded,
        _ => LpStatus::Optimal,
    };
    Ok(finish(lp, &s, status))
}

fn finish(lp: &LinearProgram, s: &Simplex, status: LpStatus) -> LpSolution {
    let x: Vec<f64> = (0..lp.n)
        .map(|j| {
            let v = s.x[j];
            if v < lp.lower[j] && v >= lp.lower[j] - BOUND_SNAP {
                lp.lower[j]
            } else if v > lp.upper[j] && v <= lp.upper[j] + BOUND_SNAP {
                lp.upper[j]
            } else {
                v
            }
        })
        .collect();
    LpSolution {
        status,
        objective: lp.objective_value(&x),
        max_residual: lp.max_residual(&x),
        x,
        iterations: s.iterations,
    }
}
