//! A dense two-phase simplex solver.
//!
//! Problem sizes in this crate stay below a few hundred variables, so the
//! tableau is kept dense and pivoting is Dantzig's rule with a switch to
//! Bland's rule after a fixed number of iterations, which rules out cycling.

use thiserror::Error;

use crate::linalg::dot;

/// Numerical slack thresholds threaded through every module.
///
/// `eps_feas` bounds how far a reported LP solution may violate a constraint;
/// `eps_eq` is the coarser slack used when comparing probabilities, channel
/// matrices and other derived values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    eps_feas: f64,
    eps_eq: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("tolerances must satisfy 0 < eps_feas <= eps_eq < 1 (got feas={feas}, eq={eq})")]
pub struct ToleranceError {
    pub feas: f64,
    pub eq: f64,
}

impl Tolerances {
    pub fn new(eps_feas: f64, eps_eq: f64) -> Result<Self, ToleranceError> {
        if !(eps_feas > 0.0 && eps_feas <= eps_eq && eps_eq < 1.0) {
            return Err(ToleranceError {
                feas: eps_feas,
                eq: eps_eq,
            });
        }
        Ok(Tolerances { eps_feas, eps_eq })
    }

    pub fn eps_feas(&self) -> f64 {
        self.eps_feas
    }

    pub fn eps_eq(&self) -> f64 {
        self.eps_eq
    }

    /// Replace the comparison slack, keeping the invariant intact.
    pub fn with_eps_eq(&self, eps_eq: f64) -> Result<Self, ToleranceError> {
        Tolerances::new(self.eps_feas.min(eps_eq), eps_eq)
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_feas: 1e-9,
            eps_eq: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Bound interval for one variable; `None` means unbounded on that side.
pub type Bounds = (Option<f64>, Option<f64>);

/// A linear program over free variables:
/// optimize `objective . x` subject to `eq_lhs x = eq_rhs`,
/// `ineq_lhs x <= ineq_rhs` and optional per-variable bounds.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub ineq: Vec<(Vec<f64>, f64)>,
    /// Empty means every variable is free.
    pub bounds: Vec<Bounds>,
}

impl LpProblem {
    pub fn maximize(objective: Vec<f64>) -> Self {
        LpProblem {
            sense: Sense::Maximize,
            objective,
            eq: Vec::new(),
            ineq: Vec::new(),
            bounds: Vec::new(),
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        LpProblem {
            sense: Sense::Minimize,
            ..LpProblem::maximize(objective)
        }
    }

    /// Zero objective; used for pure feasibility questions.
    pub fn feasibility(num_vars: usize) -> Self {
        LpProblem::maximize(vec![0.0; num_vars])
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq.push((row, rhs));
    }

    /// Adds `row . x <= rhs`.
    pub fn push_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq.push((row, rhs));
    }

    /// Adds `row . x >= rhs`.
    pub fn push_ge(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq.push((row.iter().map(|v| -v).collect(), -rhs));
    }

    /// Constrains every variable to `x >= 0`.
    pub fn nonnegative(mut self) -> Self {
        self.bounds = vec![(Some(0.0), None); self.num_vars()];
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<Bounds>) -> Self {
        self.bounds = bounds;
        self
    }

    fn check_shape(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for (row, _) in self.eq.iter().chain(self.ineq.iter()) {
            if row.len() != n {
                return Err(LpError::Shape {
                    expected: n,
                    got: row.len(),
                });
            }
        }
        if !self.bounds.is_empty() && self.bounds.len() != n {
            return Err(LpError::Shape {
                expected: n,
                got: self.bounds.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }

    /// The optimal point, when one exists.
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Optimal { point, .. } => Some(point),
            _ => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LpError {
    #[error("constraint row width {got} does not match objective width {expected}")]
    Shape { expected: usize, got: usize },
    #[error("simplex exceeded {0} pivots even under Bland's rule")]
    IterationLimit(usize),
    #[error("solution violates a constraint by {violation:e} (allowed {allowed:e})")]
    Tolerance { violation: f64, allowed: f64 },
}

/// Solve a linear program.
pub fn lp_solve(problem: &LpProblem, tol: &Tolerances) -> Result<LpOutcome, LpError> {
    problem.check_shape()?;
    let std = StandardForm::build(problem)?;
    let std = match std {
        Some(s) => s,
        None => return Ok(LpOutcome::Infeasible), // crossed bounds
    };
    let outcome = std.solve(problem, tol)?;
    if let LpOutcome::Optimal { ref point, .. } = outcome {
        let violation = constraint_violation(problem, point);
        let allowed = tol.eps_feas * residual_scale(problem, point);
        if violation > allowed {
            return Err(LpError::Tolerance { violation, allowed });
        }
    }
    Ok(outcome)
}

/// Worst constraint violation of a candidate point, in absolute terms.
pub fn constraint_violation(problem: &LpProblem, x: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (row, rhs) in &problem.eq {
        worst = worst.max((dot(row, x) - rhs).abs());
    }
    for (row, rhs) in &problem.ineq {
        worst = worst.max(dot(row, x) - rhs);
    }
    for (j, (lo, hi)) in problem.bounds.iter().enumerate() {
        if let Some(lo) = lo {
            worst = worst.max(lo - x[j]);
        }
        if let Some(hi) = hi {
            worst = worst.max(x[j] - hi);
        }
    }
    worst
}

fn residual_scale(problem: &LpProblem, x: &[f64]) -> f64 {
    let mut scale = 1.0f64;
    for (row, rhs) in problem.eq.iter().chain(problem.ineq.iter()) {
        let mass: f64 = row.iter().zip(x).map(|(a, b)| (a * b).abs()).sum();
        scale = scale.max(mass + rhs.abs());
    }
    scale
}

/// How an original variable maps into the nonnegative standard-form variables.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = plus - minus
    Free { plus: usize, minus: usize },
    /// x = lo + shifted
    ShiftLo { var: usize, lo: f64 },
    /// x = hi - shifted
    ShiftHi { var: usize, hi: f64 },
}

struct StandardForm {
    var_map: Vec<VarMap>,
    num_std: usize,
    rows: Vec<(Vec<f64>, f64, bool)>, // (coeffs over std vars, rhs, is_equality)
}

impl StandardForm {
    /// Returns `None` when a variable's bounds are crossed (trivially infeasible).
    fn build(problem: &LpProblem) -> Result<Option<Self>, LpError> {
        let n = problem.num_vars();
        let bounds: Vec<Bounds> = if problem.bounds.is_empty() {
            vec![(None, None); n]
        } else {
            problem.bounds.clone()
        };
        let mut var_map = Vec::with_capacity(n);
        let mut num_std = 0usize;
        let mut upper_rows: Vec<(usize, f64)> = Vec::new();
        for &(lo, hi) in &bounds {
            match (lo, hi) {
                (None, None) => {
                    var_map.push(VarMap::Free {
                        plus: num_std,
                        minus: num_std + 1,
                    });
                    num_std += 2;
                }
                (Some(lo), None) => {
                    var_map.push(VarMap::ShiftLo { var: num_std, lo });
                    num_std += 1;
                }
                (None, Some(hi)) => {
                    var_map.push(VarMap::ShiftHi { var: num_std, hi });
                    num_std += 1;
                }
                (Some(lo), Some(hi)) => {
                    if lo > hi {
                        return Ok(None);
                    }
                    var_map.push(VarMap::ShiftLo { var: num_std, lo });
                    upper_rows.push((num_std, hi - lo));
                    num_std += 1;
                }
            }
        }

        let mut rows = Vec::new();
        let convert_row = |row: &[f64], rhs: f64, is_eq: bool| {
            let mut coeffs = vec![0.0; num_std];
            let mut r = rhs;
            for (j, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                match var_map[j] {
                    VarMap::Free { plus, minus } => {
                        coeffs[plus] += a;
                        coeffs[minus] -= a;
                    }
                    VarMap::ShiftLo { var, lo } => {
                        coeffs[var] += a;
                        r -= a * lo;
                    }
                    VarMap::ShiftHi { var, hi } => {
                        coeffs[var] -= a;
                        r -= a * hi;
                    }
                }
            }
            (coeffs, r, is_eq)
        };
        for (row, rhs) in &problem.eq {
            rows.push(convert_row(row, *rhs, true));
        }
        for (row, rhs) in &problem.ineq {
            rows.push(convert_row(row, *rhs, false));
        }
        for (var, ub) in upper_rows {
            let mut coeffs = vec![0.0; num_std];
            coeffs[var] = 1.0;
            rows.push((coeffs, ub, false));
        }
        Ok(Some(StandardForm {
            var_map,
            num_std,
            rows,
        }))
    }

    fn std_objective(&self, problem: &LpProblem) -> Vec<f64> {
        // Internally we always maximize.
        let sign = match problem.sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        let mut c = vec![0.0; self.num_std];
        for (j, &a) in problem.objective.iter().enumerate() {
            let a = sign * a;
            if a == 0.0 {
                continue;
            }
            match self.var_map[j] {
                VarMap::Free { plus, minus } => {
                    c[plus] += a;
                    c[minus] -= a;
                }
                VarMap::ShiftLo { var, .. } => c[var] += a,
                VarMap::ShiftHi { var, .. } => c[var] -= a,
            }
        }
        c
    }

    fn recover_point(&self, std_x: &[f64]) -> Vec<f64> {
        self.var_map
            .iter()
            .map(|m| match *m {
                VarMap::Free { plus, minus } => std_x[plus] - std_x[minus],
                VarMap::ShiftLo { var, lo } => lo + std_x[var],
                VarMap::ShiftHi { var, hi } => hi - std_x[var],
            })
            .collect()
    }

    fn solve(&self, problem: &LpProblem, tol: &Tolerances) -> Result<LpOutcome, LpError> {
        let mut tableau = Tableau::new(self);
        match tableau.run(&self.std_objective(problem), tol)? {
            TableauStatus::Infeasible => Ok(LpOutcome::Infeasible),
            TableauStatus::Unbounded => Ok(LpOutcome::Unbounded),
            TableauStatus::Optimal(std_x) => {
                let point = self.recover_point(&std_x);
                let value = dot(&problem.objective, &point);
                Ok(LpOutcome::Optimal { value, point })
            }
        }
    }
}

enum TableauStatus {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// rows m constraints + 1 objective; columns: structural vars, slacks,
    /// artificials, rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    m: usize,
    num_struct: usize,
    art_offset: usize,
    total: usize,
}

const PIVOT_TOL: f64 = 1e-10;

impl Tableau {
    fn new(std: &StandardForm) -> Self {
        let m = std.rows.len();
        let n = std.num_std;
        // One slack per inequality row; artificials assigned after rhs signs
        // are normalized.
        let slack_count = std.rows.iter().filter(|r| !r.2).count();
        let mut normalized: Vec<(Vec<f64>, f64, bool)> = Vec::with_capacity(m);
        for (coeffs, rhs, is_eq) in &std.rows {
            normalized.push((coeffs.clone(), *rhs, *is_eq));
        }
        // Attach slacks before flipping signs so "<=" keeps +1 slack.
        let slack_offset = n;
        let art_offset = n + slack_count;
        let mut slack_idx = 0usize;
        let mut art_count = 0usize;
        let mut meta: Vec<(Option<usize>, bool)> = Vec::with_capacity(m); // (slack col, needs flip)
        for (coeffs, rhs, is_eq) in &mut normalized {
            let slack_col = if *is_eq {
                None
            } else {
                let c = slack_offset + slack_idx;
                slack_idx += 1;
                Some(c)
            };
            let flip = *rhs < 0.0;
            if flip {
                *rhs = -*rhs;
                for v in coeffs.iter_mut() {
                    *v = -*v;
                }
            }
            // A flipped inequality has slack coefficient -1, so it needs an
            // artificial; equalities always do.
            if *is_eq || flip {
                art_count += 1;
            }
            meta.push((slack_col, flip));
        }
        let total = art_offset + art_count;
        let mut t = vec![vec![0.0; total + 1]; m + 1];
        let mut basis = vec![0usize; m];
        let mut art_idx = 0usize;
        for (row, ((coeffs, rhs, is_eq), (slack_col, flip))) in
            normalized.iter().zip(meta.iter()).enumerate()
        {
            for (j, &v) in coeffs.iter().enumerate() {
                t[row][j] = v;
            }
            t[row][total] = *rhs;
            if let Some(c) = slack_col {
                t[row][*c] = if *flip { -1.0 } else { 1.0 };
            }
            if *is_eq || *flip {
                let c = art_offset + art_idx;
                art_idx += 1;
                t[row][c] = 1.0;
                basis[row] = c;
            } else {
                basis[row] = slack_col.expect("non-flipped inequality has a slack");
            }
        }
        Tableau {
            t,
            basis,
            m,
            num_struct: n,
            art_offset,
            total,
        }
    }

    fn run(&mut self, objective: &[f64], tol: &Tolerances) -> Result<TableauStatus, LpError> {
        let m = self.m;
        let total = self.total;
        // Phase 1: maximize -sum(artificials).
        if self.art_offset < total {
            for col in self.art_offset..total {
                self.t[m][col] = -1.0;
            }
            for row in 0..m {
                if self.basis[row] >= self.art_offset {
                    for col in 0..=total {
                        let v = self.t[row][col];
                        self.t[m][col] += v;
                    }
                }
            }
            match self.iterate(self.total, tol)? {
                TableauIter::Optimal => {}
                TableauIter::Unbounded => return Ok(TableauStatus::Infeasible),
            }
            let phase1 = self.t[m][total];
            let rhs_mass: f64 = (0..m).map(|r| self.t[r][total].abs()).sum();
            if phase1.abs() > tol.eps_feas * (1.0 + rhs_mass) * 10.0 {
                return Ok(TableauStatus::Infeasible);
            }
            // Drive remaining artificials out of the basis where possible.
            for row in 0..m {
                if self.basis[row] < self.art_offset {
                    continue;
                }
                if let Some(col) = (0..self.art_offset).find(|&c| self.t[row][c].abs() > PIVOT_TOL)
                {
                    self.pivot(row, col);
                }
                // If no pivot exists the row is redundant; the artificial stays
                // basic at level ~0 and is barred from re-entering below.
            }
        }
        // Phase 2.
        for col in 0..=total {
            self.t[m][col] = 0.0;
        }
        for (j, &c) in objective.iter().enumerate() {
            self.t[m][j] = c;
        }
        for row in 0..m {
            let b = self.basis[row];
            let f = self.t[m][b];
            if f.abs() > 0.0 {
                for col in 0..=total {
                    let v = self.t[row][col];
                    self.t[m][col] -= f * v;
                }
            }
        }
        match self.iterate(self.art_offset, tol)? {
            TableauIter::Optimal => {}
            TableauIter::Unbounded => return Ok(TableauStatus::Unbounded),
        }
        let mut x = vec![0.0; self.num_struct];
        for row in 0..m {
            let b = self.basis[row];
            if b < self.num_struct {
                x[b] = self.t[row][total];
            }
        }
        Ok(TableauStatus::Optimal(x))
    }

    /// Simplex iterations over columns `0..allowed`, Dantzig first, Bland after
    /// a grace budget. In the internal convention the objective row holds
    /// *negated* reduced costs, so a positive entry improves the objective.
    fn iterate(&mut self, allowed: usize, _tol: &Tolerances) -> Result<TableauIter, LpError> {
        let m = self.m;
        let total = self.total;
        let grace = 20 * (m + self.num_struct + 8);
        let limit = 400 * (m + self.num_struct + 8) + 20_000;
        let mut pivots = 0usize;
        loop {
            if pivots > limit {
                return Err(LpError::IterationLimit(limit));
            }
            let bland = pivots > grace;
            let mut entering: Option<usize> = None;
            let mut best = PIVOT_TOL;
            for col in 0..allowed {
                let c = self.t[m][col];
                if c > best {
                    entering = Some(col);
                    if bland {
                        break;
                    }
                    best = c;
                }
            }
            let Some(entering) = entering else {
                return Ok(TableauIter::Optimal);
            };
            let mut leaving: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for row in 0..m {
                let a = self.t[row][entering];
                if a > PIVOT_TOL {
                    let ratio = self.t[row][total] / a;
                    let better = ratio < best_ratio - 1e-12
                        || (ratio < best_ratio + 1e-12
                            && leaving.map_or(true, |l| self.basis[row] < self.basis[l]));
                    if better {
                        best_ratio = ratio;
                        leaving = Some(row);
                    }
                }
            }
            let Some(leaving) = leaving else {
                return Ok(TableauIter::Unbounded);
            };
            self.pivot(leaving, entering);
            pivots += 1;
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let total = self.total;
        let pv = self.t[row][col];
        for j in 0..=total {
            self.t[row][j] /= pv;
        }
        for r in 0..=self.m {
            if r == row {
                continue;
            }
            let f = self.t[r][col];
            if f.abs() <= 0.0 {
                continue;
            }
            for j in 0..=total {
                let v = self.t[row][j];
                self.t[r][j] -= f * v;
            }
        }
        self.basis[row] = col;
    }
}

enum TableauIter {
    Optimal,
    Unbounded,
}
