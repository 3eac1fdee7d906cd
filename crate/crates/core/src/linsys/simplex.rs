//! Dense two-phase primal simplex: Dantzig pricing, with Bland's rule during degenerate stalls.

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
/// Consecutive degenerate pivots after which pricing switches to Bland's rule.
const STALL_LIMIT: usize = 50;

/// Row relation of a linear constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

/// `minimize objective·x subject to rows, x ≥ 0`.
#[derive(Clone, Debug, Default)]
pub struct Lp {
    pub n: usize,
    pub rows: Vec<(Vec<f64>, Rel, f64)>,
    pub objective: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl Lp {
    pub fn new(n: usize) -> Lp {
        Lp { n, rows: Vec::new(), objective: vec![0.0; n] }
    }

    pub fn add(&mut self, coef: Vec<f64>, rel: Rel, rhs: f64) {
        debug_assert_eq!(coef.len(), self.n);
        self.rows.push((coef, rel, rhs));
    }
}

struct Tableau {
    /// m constraint rows followed by the objective row; the last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Rewrites the objective row as reduced costs of `cost` with respect to the current basis.
    fn price(&mut self, cost: &[f64]) {
        let m = self.m();
        let mut obj = vec![0.0; self.width + 1];
        obj[..cost.len()].copy_from_slice(cost);
        for i in 0..m {
            let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(&self.t[i]) {
                    *o -= cb * v;
                }
            }
        }
        self.t[m] = obj;
    }

    /// Entering column: most negative reduced cost, or the first negative one under Bland's rule.
    fn entering(&self, allowed: usize, bland: bool) -> Option<usize> {
        let obj = &self.t[self.m()];
        if bland {
            return (0..allowed).find(|&j| obj[j] < -PIVOT_TOL);
        }
        let mut best: Option<usize> = None;
        for j in 0..allowed {
            if obj[j] < -PIVOT_TOL && best.is_none_or(|b| obj[j] < obj[b]) {
                best = Some(j);
            }
        }
        best
    }

    /// Runs pivots over the allowed columns; returns false on unboundedness. Bland's rule takes
    /// over after a run of degenerate pivots, which rules out cycling.
    fn optimize(&mut self, allowed: usize, iters: &mut usize, max_iter: usize) -> Option<bool> {
        let m = self.m();
        let mut stall = 0;
        loop {
            let Some(c) = self.entering(allowed, stall >= STALL_LIMIT) else {
                return Some(true);
            };
            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            for i in 0..m {
                let a = self.t[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.t[i][self.width] / a;
                    let better = ratio < best - 1e-12
                        || (ratio <= best + 1e-12 && leave.is_some_and(|l| self.basis[i] < self.basis[l]));
                    if leave.is_none() || better {
                        best = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Some(false);
            };
            stall = if best <= 1e-12 { stall + 1 } else { 0 };
            self.pivot(r, c);
            *iters += 1;
            if *iters >= max_iter {
                return None;
            }
        }
    }
}

/// Solves the LP; `max_iter` caps the total number of pivots over both phases.
pub fn solve(lp: &Lp, max_iter: usize) -> LpOutcome {
    let n = lp.n;
    let m = lp.rows.len();
    let n_slack = lp.rows.iter().filter(|r| r.1 != Rel::Eq).count();
    let n_art = lp.rows.iter().filter(|r| r.1 != Rel::Le || r.2 < 0.0).count();
    let width = n + n_slack + n_art;
    let mut t = Vec::with_capacity(m + 1);
    let mut basis = Vec::with_capacity(m);
    let (mut s, mut a) = (n, n + n_slack);
    for (coef, rel, rhs) in &lp.rows {
        let mut row = vec![0.0; width + 1];
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in coef.iter().enumerate() {
            row[j] = sign * v;
        }
        row[width] = sign * rhs;
        // After the sign flip a Le row behaves as Ge and vice versa.
        let rel = match (rel, sign < 0.0) {
            (Rel::Le, true) => Rel::Ge,
            (Rel::Ge, true) => Rel::Le,
            (r, _) => *r,
        };
        match rel {
            Rel::Le => {
                row[s] = 1.0;
                basis.push(s);
                s += 1;
            }
            Rel::Ge => {
                row[s] = -1.0;
                s += 1;
                row[a] = 1.0;
                basis.push(a);
                a += 1;
            }
            Rel::Eq => {
                row[a] = 1.0;
                basis.push(a);
                a += 1;
            }
        }
        t.push(row);
    }
    t.push(vec![0.0; width + 1]);
    let art_start = n + n_slack;
    let mut tab = Tableau { t, basis, width: a };
    // Unused artificial columns (from Le rows that did not need one) are trimmed away.
    for row in tab.t.iter_mut() {
        let rhs = row[width];
        row.truncate(a);
        row.push(rhs);
    }
    let mut iters = 0;

    let mut phase1 = vec![0.0; a];
    for c in phase1.iter_mut().skip(art_start) {
        *c = 1.0;
    }
    tab.price(&phase1);
    match tab.optimize(a, &mut iters, max_iter) {
        None => return LpOutcome::IterationLimit,
        Some(_) => {}
    }
    if -tab.t[m][a] > FEAS_TOL {
        return LpOutcome::Infeasible;
    }
    // Drive remaining artificial variables out of the basis; rows where that fails are redundant.
    let mut i = 0;
    while i < tab.m() {
        if tab.basis[i] >= art_start {
            if let Some(c) = (0..art_start).find(|&j| tab.t[i][j].abs() > PIVOT_TOL) {
                tab.pivot(i, c);
            } else {
                tab.t.remove(i);
                tab.basis.remove(i);
                continue;
            }
        }
        i += 1;
    }
    let mut cost = vec![0.0; a];
    cost[..n].copy_from_slice(&lp.objective);
    tab.price(&cost);
    match tab.optimize(art_start, &mut iters, max_iter) {
        None => LpOutcome::IterationLimit,
        Some(false) => LpOutcome::Unbounded,
        Some(true) => {
            let mut x = vec![0.0; n];
            for (i, &b) in tab.basis.iter().enumerate() {
                if b < n {
                    x[b] = tab.t[i][a].max(0.0);
                }
            }
            let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            LpOutcome::Optimal { x, value }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_maximization() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6 has optimum 2.8 at (1.6, 1.2).
        let mut lp = Lp::new(2);
        lp.objective = vec![-1.0, -1.0];
        lp.add(vec![1.0, 2.0], Rel::Le, 4.0);
        lp.add(vec![3.0, 1.0], Rel::Le, 6.0);
        let LpOutcome::Optimal { x, value } = solve(&lp, 1000) else { panic!() };
        assert!((value + 2.8).abs() < 1e-9);
        assert!((x[0] - 1.6).abs() < 1e-9 && (x[1] - 1.2).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = Lp::new(1);
        lp.add(vec![1.0], Rel::Ge, 2.0);
        lp.add(vec![1.0], Rel::Le, 1.0);
        assert_eq!(solve(&lp, 1000), LpOutcome::Infeasible);
    }

    #[test]
    fn handles_redundant_equalities() {
        let mut lp = Lp::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.add(vec![1.0, 1.0], Rel::Eq, 1.0);
        lp.add(vec![2.0, 2.0], Rel::Eq, 2.0);
        let LpOutcome::Optimal { x, value } = solve(&lp, 1000) else { panic!() };
        assert!(value.abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
