//! Dense primal simplex in dictionary form, with a Dantzig pricing default
//! that switches to Bland's rule after a degenerate stall (Bland alone is
//! also available and guarantees termination). Two-phase: infeasible starts
//! go through the auxiliary-variable phase.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// `maximize . x` subject to the rows, with `x >= 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub maximize: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct LinearProgramSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// Largest constraint violation of `x` against the original rows.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pricing {
    /// Most-positive reduced cost, falling back to Bland permanently after a
    /// degenerate stall.
    DantzigThenBland,
    Bland,
}

#[derive(Clone, Copy, Debug)]
pub struct LpOptions {
    pub pricing: Pricing,
    pub max_iterations: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { pricing: Pricing::DantzigThenBland, max_iterations: 1_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpError {
    IterationLimit,
    BadShape(String),
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::IterationLimit => write!(f, "simplex iteration cap exceeded"),
            LpError::BadShape(s) => write!(f, "{s}"),
        }
    }
}

impl std::error::Error for LpError {}

const ENTER_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

pub fn lp_solve(lp: &LinearProgram) -> Result<LinearProgramSolution, LpError> {
    lp_solve_with(lp, LpOptions::default())
}

pub fn lp_solve_with(lp: &LinearProgram, opts: LpOptions) -> Result<LinearProgramSolution, LpError> {
    let n = lp.maximize.len();
    // normalize to <= rows; equalities become two rows
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(lp.rows.len());
    for (coeffs, sense, rhs) in &lp.rows {
        if coeffs.len() != n {
            return Err(LpError::BadShape(format!(
                "row has {} coefficients, expected {n}",
                coeffs.len()
            )));
        }
        match sense {
            Sense::Le => rows.push((coeffs.clone(), *rhs)),
            Sense::Ge => rows.push((coeffs.iter().map(|c| -c).collect(), -rhs)),
            Sense::Eq => {
                rows.push((coeffs.clone(), *rhs));
                rows.push((coeffs.iter().map(|c| -c).collect(), -rhs));
            }
        }
    }
    let mut dict = Dictionary::new(&lp.maximize, &rows);
    let mut iterations = 0usize;
    let feasible = dict.make_feasible(opts, &mut iterations)?;
    if !feasible {
        return Ok(LinearProgramSolution {
            status: LpStatus::Infeasible,
            objective: f64::NAN,
            x: vec![0.0; n],
            residual: f64::NAN,
            iterations,
        });
    }
    let status = dict.optimize(opts, &mut iterations)?;
    let x = dict.extract(n);
    let mut residual = 0.0f64;
    for (coeffs, rhs) in &rows {
        let lhs: f64 = coeffs.iter().zip(&x).map(|(c, v)| c * v).sum();
        residual = residual.max(lhs - rhs);
    }
    for &v in &x {
        residual = residual.max(-v);
    }
    let objective: f64 = lp.maximize.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LinearProgramSolution {
        status: match status {
            InnerStatus::Optimal => LpStatus::Optimal,
            InnerStatus::Unbounded => LpStatus::Unbounded,
        },
        objective,
        x,
        residual,
        iterations,
    })
}

enum InnerStatus {
    Optimal,
    Unbounded,
}

/// Dictionary `x_B = b - A x_N`, objective `z = z0 + c . x_N`. Variable ids:
/// structurals `0..n`, slacks `n..n+m`, the phase-1 auxiliary is `n+m`.
struct Dictionary {
    n_structural: usize,
    cols: usize,
    a: Vec<f64>, // rows x cols, row-major
    b: Vec<f64>,
    c: Vec<f64>,
    z0: f64,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
}

impl Dictionary {
    fn new(objective: &[f64], rows: &[(Vec<f64>, f64)]) -> Self {
        let n = objective.len();
        let m = rows.len();
        let mut a = vec![0.0; m * n];
        let mut b = vec![0.0; m];
        for (i, (coeffs, rhs)) in rows.iter().enumerate() {
            a[i * n..(i + 1) * n].copy_from_slice(coeffs);
            b[i] = *rhs;
        }
        Dictionary {
            n_structural: n,
            cols: n,
            a,
            b,
            c: objective.to_vec(),
            z0: 0.0,
            basic: (n..n + m).collect(),
            nonbasic: (0..n).collect(),
        }
    }

    fn rows(&self) -> usize {
        self.b.len()
    }

    fn pivot(&mut self, r: usize, k: usize) {
        let m = self.rows();
        let n = self.cols;
        let piv = self.a[r * n + k];
        let inv = 1.0 / piv;
        // pivot row
        for j in 0..n {
            self.a[r * n + j] *= inv;
        }
        self.a[r * n + k] = inv;
        self.b[r] *= inv;
        let br = self.b[r];
        // other rows
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = self.a[i * n + k];
            if f == 0.0 {
                continue;
            }
            let (head, tail) = self.a.split_at_mut(r.max(i) * n);
            let (row_i, row_r) = if i < r {
                (&mut head[i * n..i * n + n], &tail[..n])
            } else {
                (&mut tail[..n], &head[r * n..r * n + n])
            };
            for j in 0..n {
                row_i[j] -= f * row_r[j];
            }
            row_i[k] = -f * inv;
            self.b[i] -= f * br;
        }
        // objective
        let f = self.c[k];
        if f != 0.0 {
            for j in 0..n {
                self.c[j] -= f * self.a[r * n + j];
            }
            self.c[k] = -f * inv;
            self.z0 += f * br;
        }
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[k]);
    }

    /// Ratio test: leaving row for entering column `k`, Bland ties.
    fn leaving(&self, k: usize) -> Option<usize> {
        let n = self.cols;
        let mut best: Option<(f64, usize, usize)> = None; // (ratio, label, row)
        for i in 0..self.rows() {
            let aik = self.a[i * n + k];
            if aik > PIVOT_TOL {
                let ratio = self.b[i].max(0.0) / aik;
                let cand = (ratio, self.basic[i], i);
                best = match best {
                    None => Some(cand),
                    Some(cur) => {
                        if ratio < cur.0 - 1e-12
                            || ((ratio - cur.0).abs() <= 1e-12 && cand.1 < cur.1)
                        {
                            Some(cand)
                        } else {
                            Some(cur)
                        }
                    }
                };
            }
        }
        best.map(|(_, _, row)| row)
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let mut pick: Option<(f64, usize, usize)> = None; // (cost, label, col)
        for k in 0..self.cols {
            let ck = self.c[k];
            if ck > ENTER_TOL {
                let label = self.nonbasic[k];
                pick = match pick {
                    None => Some((ck, label, k)),
                    Some(cur) => {
                        let better = if bland {
                            label < cur.1
                        } else {
                            ck > cur.0 || (ck == cur.0 && label < cur.1)
                        };
                        if better {
                            Some((ck, label, k))
                        } else {
                            Some(cur)
                        }
                    }
                };
            }
        }
        pick.map(|(_, _, k)| k)
    }

    fn optimize(&mut self, opts: LpOptions, iterations: &mut usize) -> Result<InnerStatus, LpError> {
        let mut bland = matches!(opts.pricing, Pricing::Bland);
        let stall_limit = 100 + 2 * (self.rows() + self.cols);
        let mut stall = 0usize;
        loop {
            let Some(k) = self.entering(bland) else {
                return Ok(InnerStatus::Optimal);
            };
            let Some(r) = self.leaving(k) else {
                return Ok(InnerStatus::Unbounded);
            };
            let before = self.z0;
            self.pivot(r, k);
            *iterations += 1;
            if *iterations > opts.max_iterations {
                return Err(LpError::IterationLimit);
            }
            if self.z0 <= before + 1e-15 * (1.0 + before.abs()) {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            } else {
                stall = 0;
            }
        }
    }

    /// Phase 1 with the auxiliary variable; returns false when infeasible.
    fn make_feasible(&mut self, opts: LpOptions, iterations: &mut usize) -> Result<bool, LpError> {
        let worst = self
            .b
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i);
        let Some(r0) = worst else { return Ok(true) };
        if self.b[r0] >= -FEAS_TOL {
            return Ok(true);
        }
        // install the auxiliary column (coefficient -1 in every row) and
        // temporarily swap the objective for -x0
        let aux_label = self.n_structural + self.rows();
        let n = self.cols;
        let m = self.rows();
        let mut a2 = vec![0.0; m * (n + 1)];
        for i in 0..m {
            a2[i * (n + 1)..i * (n + 1) + n].copy_from_slice(&self.a[i * n..i * n + n]);
            a2[i * (n + 1) + n] = -1.0;
        }
        self.a = a2;
        self.cols = n + 1;
        self.nonbasic.push(aux_label);
        let saved_c = std::mem::replace(&mut self.c, vec![0.0; n + 1]);
        let saved_z0 = self.z0;
        self.c[n] = -1.0;
        self.z0 = 0.0;
        self.pivot(r0, n);
        *iterations += 1;

        // phase-1 simplex; prefer driving the auxiliary out on ratio ties
        let mut bland = matches!(opts.pricing, Pricing::Bland);
        let stall_limit = 100 + 2 * (self.rows() + self.cols);
        let mut stall = 0usize;
        loop {
            if let Some(row) = self.basic.iter().position(|&l| l == aux_label) {
                if self.b[row] <= FEAS_TOL {
                    // auxiliary is basic at zero: pivot it out on any usable
                    // column, or drop the row outright when it is all zeros
                    // (a redundant constraint)
                    let col = (0..self.cols)
                        .find(|&j| self.a[row * self.cols + j].abs() > PIVOT_TOL);
                    match col {
                        Some(j) => {
                            self.pivot(row, j);
                            *iterations += 1;
                        }
                        None => {
                            let n2 = self.cols;
                            self.a.drain(row * n2..(row + 1) * n2);
                            self.b.remove(row);
                            self.basic.remove(row);
                        }
                    }
                }
            }
            if !self.basic.contains(&aux_label) {
                break;
            }
            let Some(k) = self.entering(bland) else { break };
            // ratio test that prefers kicking the auxiliary out
            let Some(mut r) = self.leaving(k) else {
                break; // phase-1 objective is bounded by 0, cannot be unbounded
            };
            if let Some(aux_row) = self.basic.iter().position(|&l| l == aux_label) {
                let ark = self.a[aux_row * self.cols + k];
                if ark > PIVOT_TOL {
                    let aux_ratio = self.b[aux_row].max(0.0) / ark;
                    let chosen_ratio =
                        self.b[r].max(0.0) / self.a[r * self.cols + k];
                    if aux_ratio <= chosen_ratio + 1e-12 {
                        r = aux_row;
                    }
                }
            }
            let before = self.z0;
            self.pivot(r, k);
            *iterations += 1;
            if *iterations > opts.max_iterations {
                return Err(LpError::IterationLimit);
            }
            if self.z0 <= before + 1e-15 * (1.0 + before.abs()) {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            } else {
                stall = 0;
            }
        }
        let feasible = self.z0 >= -1e-7 && !self.basic.contains(&aux_label);
        if !feasible {
            return Ok(false);
        }
        // drop the auxiliary column (unless its row was removed as redundant)
        // and restore the real objective
        if let Some(k) = self.nonbasic.iter().position(|&l| l == aux_label) {
            let n2 = self.cols;
            let m = self.rows();
            let mut a2 = vec![0.0; m * (n2 - 1)];
            for i in 0..m {
                let mut jj = 0;
                for j in 0..n2 {
                    if j == k {
                        continue;
                    }
                    a2[i * (n2 - 1) + jj] = self.a[i * n2 + j];
                    jj += 1;
                }
            }
            self.a = a2;
            self.nonbasic.remove(k);
            self.cols = n2 - 1;
        }
        self.c = vec![0.0; self.cols];
        self.z0 = saved_z0;
        // re-express the saved objective in the current dictionary
        for (var, &coeff) in saved_c.iter().enumerate().take(self.n_structural) {
            if coeff == 0.0 {
                continue;
            }
            if let Some(col) = self.nonbasic.iter().position(|&l| l == var) {
                self.c[col] += coeff;
            } else if let Some(row) = self.basic.iter().position(|&l| l == var) {
                self.z0 += coeff * self.b[row];
                for j in 0..self.cols {
                    self.c[j] -= coeff * self.a[row * self.cols + j];
                }
            }
        }
        Ok(true)
    }

    fn extract(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (i, &label) in self.basic.iter().enumerate() {
            if label < n {
                x[label] = self.b[i].max(0.0);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le(coeffs: &[f64], rhs: f64) -> (Vec<f64>, Sense, f64) {
        (coeffs.to_vec(), Sense::Le, rhs)
    }

    #[test]
    fn single_variable_box() {
        let lp = LinearProgram { maximize: vec![1.0], rows: vec![le(&[1.0], 3.0)] };
        let s = lp_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!(s.residual <= 1e-7);
    }

    #[test]
    fn unbounded_detected() {
        let lp = LinearProgram { maximize: vec![1.0, 0.0], rows: vec![le(&[-1.0, 1.0], 1.0)] };
        assert_eq!(lp_solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_detected() {
        let lp = LinearProgram {
            maximize: vec![1.0],
            rows: vec![le(&[1.0], 1.0), (vec![1.0], Sense::Ge, 2.0)],
        };
        assert_eq!(lp_solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn cycling_prone_instance_terminates_under_bland() {
        // the classic 3-constraint degenerate instance that cycles under
        // naive most-negative pricing with fixed tie-breaks
        let lp = LinearProgram {
            maximize: vec![0.75, -150.0, 0.02, -6.0],
            rows: vec![
                le(&[0.25, -60.0, -0.04, 9.0], 0.0),
                le(&[0.5, -90.0, -0.02, 3.0], 0.0),
                le(&[0.0, 0.0, 1.0, 0.0], 1.0),
            ],
        };
        for pricing in [Pricing::Bland, Pricing::DantzigThenBland] {
            let s = lp_solve_with(&lp, LpOptions { pricing, max_iterations: 100_000 }).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.objective - 0.05).abs() < 1e-9, "{pricing:?}: {}", s.objective);
        }
    }

    #[test]
    fn transport_toy_matches_enumeration() {
        // ship from supplies (3, 2) to demands (2, 3) at unit costs
        // [[1, 3], [4, 2]]; minimum cost is 9
        let lp = LinearProgram {
            maximize: vec![-1.0, -3.0, -4.0, -2.0],
            rows: vec![
                (vec![1.0, 1.0, 0.0, 0.0], Sense::Eq, 3.0),
                (vec![0.0, 0.0, 1.0, 1.0], Sense::Eq, 2.0),
                (vec![1.0, 0.0, 1.0, 0.0], Sense::Eq, 2.0),
                (vec![0.0, 1.0, 0.0, 1.0], Sense::Eq, 3.0),
            ],
        };
        let s = lp_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 9.0).abs() < 1e-9);
        assert!(s.residual <= 1e-7);
    }

    #[test]
    fn negative_rhs_goes_through_phase_one() {
        // x + y >= 2, x <= 3, y <= 3, maximize x - y: optimum x = 3, y = 0
        let lp = LinearProgram {
            maximize: vec![1.0, -1.0],
            rows: vec![
                (vec![1.0, 1.0], Sense::Ge, 2.0),
                le(&[1.0, 0.0], 3.0),
                le(&[0.0, 1.0], 3.0),
            ],
        };
        let s = lp_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-9);
        assert!(s.residual <= 1e-7);
    }

    #[test]
    fn objective_matches_recomputed_primal() {
        let lp = LinearProgram {
            maximize: vec![2.0, 3.0, 1.0],
            rows: vec![le(&[1.0, 1.0, 1.0], 10.0), le(&[1.0, 2.0, 0.0], 8.0), le(&[0.0, 1.0, 3.0], 9.0)],
        };
        let s = lp_solve(&lp).unwrap();
        let direct: f64 = lp.maximize.iter().zip(&s.x).map(|(c, v)| c * v).sum();
        assert!((direct - s.objective).abs() <= 1e-8 * (1.0 + direct.abs()));
    }
}
