//! Dense convex quadratic programming.
//!
//! Solves
//!
//! ```text
//! min ½ zᵀ W z + hᵀ z   s.t.   G z ≤ g,   E z = e
//! ```
//!
//! with the Goldfarb–Idnani dual active-set method. Starting from the
//! unconstrained minimiser, the most violated constraint is added at each
//! outer iteration; the objective never decreases, and the method terminates
//! either at the optimum or with a certificate that no feasible point exists.
//! The factorisation `W = L Lᵀ` is computed once and the active set is
//! handled with Givens updates of `J = L⁻ᵀ Q` and the triangular factor `R`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("W is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("W is not positive semidefinite even after regularization")]
    NotConvex,
    #[error("non-finite problem data in {0}")]
    NonFinite(&'static str),
}

/// `min ½ zᵀ W z + hᵀ z  s.t.  G z ≤ g, E z = e`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub w: DMatrix<f64>,
    pub h: DVector<f64>,
    pub g_mat: DMatrix<f64>,
    pub g_vec: DVector<f64>,
    pub e_mat: DMatrix<f64>,
    pub e_vec: DVector<f64>,
}

impl QpProblem {
    /// Unconstrained problem.
    pub fn new(w: DMatrix<f64>, h: DVector<f64>) -> Self {
        let n = h.len();
        Self {
            w,
            h,
            g_mat: DMatrix::zeros(0, n),
            g_vec: DVector::zeros(0),
            e_mat: DMatrix::zeros(0, n),
            e_vec: DVector::zeros(0),
        }
    }

    pub fn with_inequalities(mut self, g_mat: DMatrix<f64>, g_vec: DVector<f64>) -> Self {
        self.g_mat = g_mat;
        self.g_vec = g_vec;
        self
    }

    pub fn with_equalities(mut self, e_mat: DMatrix<f64>, e_vec: DVector<f64>) -> Self {
        self.e_mat = e_mat;
        self.e_vec = e_vec;
        self
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.w * z)) + self.h.dot(z)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.dim();
        let check = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(QpError::Dimension {
                    what,
                    expected,
                    got,
                })
            }
        };
        check("W rows", n, self.w.nrows())?;
        check("W columns", n, self.w.ncols())?;
        check("G columns", n, self.g_mat.ncols())?;
        check("g length", self.g_mat.nrows(), self.g_vec.len())?;
        check("E columns", n, self.e_mat.ncols())?;
        check("e length", self.e_mat.nrows(), self.e_vec.len())?;
        for (name, finite) in [
            ("W", self.w.iter().all(|v| v.is_finite())),
            ("h", self.h.iter().all(|v| v.is_finite())),
            ("G", self.g_mat.iter().all(|v| v.is_finite())),
            ("g", self.g_vec.iter().all(|v| v.is_finite())),
            ("E", self.e_mat.iter().all(|v| v.is_finite())),
            ("e", self.e_vec.iter().all(|v| v.is_finite())),
        ] {
            if !finite {
                return Err(QpError::NonFinite(name));
            }
        }
        let asym = (&self.w - self.w.transpose()).amax();
        let scale = self.w.amax().max(1.0);
        if asym > 1e-10 * scale {
            return Err(QpError::NotSymmetric(asym));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Lagrange multipliers with the sign convention
/// `W z + h + Gᵀ λ + Eᵀ ν = 0`, `λ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub ineq: DVector<f64>,
    pub eq: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub status: QpStatus,
    pub objective: f64,
    pub kkt_residual: f64,
    pub multipliers: Multipliers,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

/// Max of the stationarity norm, the primal violation and the
/// complementarity violation (including negative inequality multipliers).
pub fn kkt_residual(p: &QpProblem, z: &DVector<f64>, mult: &Multipliers) -> f64 {
    let mut grad = &p.w * z + &p.h;
    if p.g_mat.nrows() > 0 {
        grad += p.g_mat.tr_mul(&mult.ineq);
    }
    if p.e_mat.nrows() > 0 {
        grad += p.e_mat.tr_mul(&mult.eq);
    }
    let stationarity = grad.amax();
    let mut primal: f64 = 0.0;
    let mut comp: f64 = 0.0;
    if p.g_mat.nrows() > 0 {
        let slack = &p.g_vec - &p.g_mat * z;
        for (s, l) in slack.iter().zip(mult.ineq.iter()) {
            primal = primal.max(-s);
            comp = comp.max((s * l).abs()).max(-l);
        }
    }
    if p.e_mat.nrows() > 0 {
        primal = primal.max((&p.e_mat * z - &p.e_vec).amax());
    }
    stationarity.max(primal).max(comp)
}

/// Solve `p` with the dual active-set method.
pub fn solve(p: &QpProblem, settings: &QpSettings) -> Result<QpSolution, QpError> {
    p.validate()?;
    let n = p.dim();
    let l = factor_regularized(&p.w)?;
    let mut solver = GoldfarbIdnani::new(p, &l, settings);
    let status = solver.run();
    let (z, mult, iterations) = (solver.x.clone(), solver.multipliers(), solver.iterations);
    let kkt = kkt_residual(p, &z, &mult);
    if status == QpStatus::Optimal && kkt > settings.tol * residual_scale(p) {
        log::debug!("QP optimal with loose KKT residual {kkt:.3e} (n = {n})");
    }
    Ok(QpSolution {
        objective: p.objective(&z),
        z,
        status,
        kkt_residual: kkt,
        multipliers: mult,
        iterations,
    })
}

/// Scale used to judge residuals of badly scaled problems.
fn residual_scale(p: &QpProblem) -> f64 {
    1.0_f64
        .max(p.w.amax())
        .max(p.h.amax())
        .max(if p.g_vec.is_empty() { 0.0 } else { p.g_vec.amax() })
}

/// Cholesky factor of `W`, adding `1e-9·I` (and growing it) when `W` is
/// only semidefinite.
fn factor_regularized(w: &DMatrix<f64>) -> Result<DMatrix<f64>, QpError> {
    if let Some(c) = w.clone().cholesky() {
        return Ok(c.l());
    }
    let scale = w.diagonal().amax().max(1.0);
    let mut eps = 1e-9;
    while eps <= 1e-3 * scale {
        let shifted = w + DMatrix::identity(w.nrows(), w.ncols()) * eps;
        if let Some(c) = shifted.cholesky() {
            log::debug!("QP Hessian regularized by {eps:.1e}·I");
            return Ok(c.l());
        }
        eps *= 10.0;
    }
    Err(QpError::NotConvex)
}

/// Working state of the dual active-set iteration. Constraints are held in
/// the form `nᵢᵀ x ≥ bᵢ` with unit-norm rows; equalities first.
struct GoldfarbIdnani {
    n: usize,
    n_eq: usize,
    /// Constraint normals as columns (equalities, then inequalities).
    normals: DMatrix<f64>,
    rhs: DVector<f64>,
    row_norms: DVector<f64>,
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    r_norm: f64,
    x: DVector<f64>,
    objective: f64,
    /// Constraint indices of the active set and their multipliers.
    active: Vec<usize>,
    u: Vec<f64>,
    is_active: Vec<bool>,
    tol: f64,
    max_iter: usize,
    iterations: usize,
}

impl GoldfarbIdnani {
    fn new(p: &QpProblem, l: &DMatrix<f64>, settings: &QpSettings) -> Self {
        let n = p.dim();
        let n_eq = p.e_mat.nrows();
        let m = n_eq + p.g_mat.nrows();
        let mut normals = DMatrix::zeros(n, m);
        let mut rhs = DVector::zeros(m);
        let mut row_norms = DVector::from_element(m, 1.0);
        for i in 0..n_eq {
            let row = p.e_mat.row(i).transpose();
            let norm = row.norm();
            let s = if norm > 0.0 { norm } else { 1.0 };
            normals.set_column(i, &(row / s));
            rhs[i] = p.e_vec[i] / s;
            row_norms[i] = s;
        }
        for i in 0..p.g_mat.nrows() {
            // G z ≤ g  ⇔  −G z ≥ −g
            let row = -p.g_mat.row(i).transpose();
            let norm = row.norm();
            let s = if norm > 0.0 { norm } else { 1.0 };
            normals.set_column(n_eq + i, &(row / s));
            rhs[n_eq + i] = -p.g_vec[i] / s;
            row_norms[n_eq + i] = s;
        }
        let l_inv_t = l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("Cholesky factor has a positive diagonal")
            .transpose();
        // Unconstrained minimiser x = −W⁻¹ h = −J Jᵀ h.
        let x = -(&l_inv_t * l_inv_t.tr_mul(&p.h));
        let objective = 0.5 * p.h.dot(&x);
        Self {
            n,
            n_eq,
            normals,
            rhs,
            row_norms,
            j: l_inv_t,
            r: DMatrix::zeros(n, n),
            r_norm: 1.0,
            x,
            objective,
            active: Vec::with_capacity(n),
            u: Vec::with_capacity(n + 1),
            is_active: vec![false; m],
            tol: settings.tol,
            max_iter: settings.max_iter,
            iterations: 0,
        }
    }

    fn m(&self) -> usize {
        self.normals.ncols()
    }

    fn slack(&self, i: usize) -> f64 {
        self.normals.column(i).dot(&self.x) - self.rhs[i]
    }

    /// `d = Jᵀ nₚ`, the primal step `z` and the dual step `r`.
    fn directions(&self, ip: usize) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let np = self.normals.column(ip);
        let d = self.j.tr_mul(&np);
        let iq = self.active.len();
        let mut z = DVector::zeros(self.n);
        for col in iq..self.n {
            z.axpy(d[col], &self.j.column(col), 1.0);
        }
        let mut r = DVector::zeros(iq);
        for i in (0..iq).rev() {
            let mut sum = d[i];
            for k in i + 1..iq {
                sum -= self.r[(i, k)] * r[k];
            }
            r[i] = sum / self.r[(i, i)];
        }
        (d, z, r)
    }

    /// Append the constraint whose transformed normal is `d`.
    fn add_constraint(&mut self, mut d: DVector<f64>) -> bool {
        let iq = self.active.len();
        if iq >= self.n {
            // Full active set: `d` is a combination of the active normals.
            return false;
        }
        for col in (iq + 1..self.n).rev() {
            let (cc, ss) = (d[col - 1], d[col]);
            let h = cc.hypot(ss);
            if h < f64::EPSILON {
                continue;
            }
            d[col] = 0.0;
            let (mut c, mut s) = (cc / h, ss / h);
            if c < 0.0 {
                c = -c;
                s = -s;
                d[col - 1] = -h;
            } else {
                d[col - 1] = h;
            }
            rotate_columns(&mut self.j, col - 1, c, s);
        }
        for i in 0..=iq {
            self.r[(i, iq)] = d[i];
        }
        if d[iq].abs() <= f64::EPSILON * self.r_norm {
            for i in 0..=iq {
                self.r[(i, iq)] = 0.0;
            }
            return false;
        }
        self.r_norm = self.r_norm.max(d[iq].abs());
        true
    }

    /// Remove active constraint at position `pos` (the pending multiplier at
    /// `u[active.len()]`, if any, shifts down with the rest).
    fn drop_constraint(&mut self, pos: usize) {
        let iq = self.active.len();
        self.is_active[self.active[pos]] = false;
        self.active.remove(pos);
        self.u.remove(pos);
        for col in pos..iq - 1 {
            for row in 0..self.n {
                self.r[(row, col)] = self.r[(row, col + 1)];
            }
        }
        for row in 0..self.n {
            self.r[(row, iq - 1)] = 0.0;
        }
        let iq = iq - 1;
        for k in pos..iq {
            let (cc, ss) = (self.r[(k, k)], self.r[(k + 1, k)]);
            let h = cc.hypot(ss);
            if h < f64::EPSILON {
                continue;
            }
            let (mut c, mut s) = (cc / h, ss / h);
            self.r[(k + 1, k)] = 0.0;
            if c < 0.0 {
                self.r[(k, k)] = -h;
                c = -c;
                s = -s;
            } else {
                self.r[(k, k)] = h;
            }
            let xny = s / (1.0 + c);
            for col in k + 1..iq {
                let (t1, t2) = (self.r[(k, col)], self.r[(k + 1, col)]);
                let top = t1 * c + t2 * s;
                self.r[(k, col)] = top;
                self.r[(k + 1, col)] = xny * (t1 + top) - t2;
            }
            rotate_columns(&mut self.j, k, c, s);
        }
    }

    fn run(&mut self) -> QpStatus {
        for i in 0..self.n_eq {
            if let Err(status) = self.add_equality(i) {
                return status;
            }
        }
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iter {
                return QpStatus::MaxIterations;
            }
            // Most violated inequality.
            let mut worst = None;
            let mut worst_slack = -self.tol * 0.1;
            for i in self.n_eq..self.m() {
                if self.is_active[i] {
                    continue;
                }
                let s = self.slack(i);
                if s < worst_slack {
                    worst_slack = s;
                    worst = Some(i);
                }
            }
            let Some(ip) = worst else {
                return QpStatus::Optimal;
            };
            if let Err(status) = self.add_inequality(ip) {
                return status;
            }
        }
    }

    fn add_equality(&mut self, i: usize) -> Result<(), QpStatus> {
        let (d, z, r) = self.directions(i);
        let np = self.normals.column(i).clone_owned();
        let zn = z.dot(&np);
        let t = if z.dot(&z) > f64::EPSILON {
            -self.slack(i) / zn
        } else {
            0.0
        };
        self.x.axpy(t, &z, 1.0);
        for (uk, rk) in self.u.iter_mut().zip(r.iter()) {
            *uk -= t * rk;
        }
        self.u.push(t);
        self.objective += 0.5 * t * t * zn;
        if !self.add_constraint(d) {
            self.u.pop();
            // Linearly dependent on earlier equalities: harmless if consistent.
            if self.slack(i).abs() > self.tol.sqrt() {
                log::debug!("QP equality {i} is inconsistent with the others");
                return Err(QpStatus::Infeasible);
            }
            return Ok(());
        }
        self.active.push(i);
        self.is_active[i] = true;
        Ok(())
    }

    fn add_inequality(&mut self, ip: usize) -> Result<(), QpStatus> {
        let np = self.normals.column(ip).clone_owned();
        self.u.push(0.0);
        loop {
            let (d, z, r) = self.directions(ip);
            let iq = self.active.len();
            // Partial step: first active inequality multiplier hitting zero.
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for k in 0..iq {
                if self.active[k] < self.n_eq || r[k] <= 0.0 {
                    continue;
                }
                let ratio = self.u[k] / r[k];
                if ratio < t1 {
                    t1 = ratio;
                    drop = Some(k);
                }
            }
            let zn = z.dot(&np);
            let t2 = if z.dot(&z) > f64::EPSILON * f64::EPSILON && zn > 0.0 {
                (-self.slack(ip) / zn).max(0.0)
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                self.u.pop();
                return Err(QpStatus::Infeasible);
            }
            if !t2.is_finite() {
                // Dual step only.
                for k in 0..iq {
                    self.u[k] -= t * r[k];
                }
                self.u[iq] += t;
                self.drop_constraint(drop.expect("finite partial step has a blocking constraint"));
                continue;
            }
            let previous = self.objective;
            self.x.axpy(t, &z, 1.0);
            self.objective += t * zn * (0.5 * t + self.u[iq]);
            debug_assert!(
                self.objective >= previous - 1e-9 * previous.abs().max(1.0),
                "dual active-set objective decreased: {previous} -> {}",
                self.objective
            );
            for k in 0..iq {
                self.u[k] -= t * r[k];
            }
            self.u[iq] += t;
            if t2 <= t1 {
                if self.add_constraint(d) {
                    self.active.push(ip);
                    self.is_active[ip] = true;
                } else {
                    // Numerically dependent: the full step satisfied it anyway.
                    self.u.pop();
                }
                return Ok(());
            }
            self.drop_constraint(drop.expect("partial step has a blocking constraint"));
        }
    }

    fn multipliers(&self) -> Multipliers {
        let m_eq = self.n_eq;
        let m_in = self.m() - m_eq;
        let mut eq = DVector::zeros(m_eq);
        let mut ineq = DVector::zeros(m_in);
        for (&idx, &u) in self.active.iter().zip(self.u.iter()) {
            let scaled = u / self.row_norms[idx];
            if idx < m_eq {
                eq[idx] = -scaled;
            } else {
                ineq[idx - m_eq] = scaled;
            }
        }
        Multipliers { ineq, eq }
    }
}

/// Apply the Givens rotation `(c, s)` to columns `k`, `k + 1` of `j`, in
/// the reflected form used by the active-set updates.
fn rotate_columns(j: &mut DMatrix<f64>, k: usize, c: f64, s: f64) {
    let xny = s / (1.0 + c);
    let n = j.nrows();
    for row in 0..n {
        let (t1, t2) = (j[(row, k)], j[(row, k + 1)]);
        let first = t1 * c + t2 * s;
        j[(row, k)] = first;
        j[(row, k + 1)] = xny * (t1 + first) - t2;
    }
}
