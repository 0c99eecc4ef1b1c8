//! ADMM for maximize ⟨C, X⟩ s.t. 𝒜(X) = b, X ⪰ 0.
//!
//! A presolve step removes the two constraint shapes that leave the feasible
//! set without interior points, which plain ADMM handles poorly:
//!
//! * a rank-one constraint ⟨vvᵀ, X⟩ = (Σ|vᵢ|)² whose support has a pinned
//!   unit diagonal forces `X_ij = sign(v_i v_j)` on the support, so the
//!   support collapses to a single signed node;
//! * a rank-one constraint ⟨vvᵀ, X⟩ = 0 is equivalent to `X v = 0` on the
//!   PSD cone, so it is moved into the cone (PSD matrices on `v`'s complement).
//!
//! Both reductions are exact; the solution is lifted back to the original
//! dimension.

use serde::{Deserialize, Serialize};

use super::program::{Constraint, PackedMatrix, SdpProgram, Variant};
use crate::error::{Error, Result};
use crate::linalg::{psd_project, SymMatrix};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Initial penalty; `None` selects 1/√dim.
    pub rho: Option<f64>,
    /// Relative primal and dual residual tolerance.
    pub tol_primal: f64,
    /// Constraint residual tolerance, relative to 1 + ‖b‖.
    pub tol_constraint: f64,
    pub max_iter: usize,
    pub adaptive_rho: bool,
    pub rho_ratio: f64,
    pub rho_scale: f64,
    /// Over-relaxation factor in (0, 2).
    pub relaxation: f64,
    /// Rescale the cost to ‖C‖_F = √dim before iterating.
    pub normalize_cost: bool,
    /// Anderson acceleration history length; 0 disables it.
    pub anderson_memory: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: None,
            tol_primal: 1e-5,
            tol_constraint: 1e-6,
            max_iter: 20_000,
            adaptive_rho: true,
            rho_ratio: 10.0,
            rho_scale: 2.0,
            relaxation: 1.0,
            normalize_cost: true,
            anderson_memory: 10,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_primal > 0.0 && self.tol_constraint > 0.0) {
            return Err(Error::param("tolerances must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be >= 1"));
        }
        if let Some(r) = self.rho {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::param(format!("rho must be positive, got {r}")));
            }
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::param("relaxation must be in (0, 2)"));
        }
        if !(self.rho_ratio > 1.0 && self.rho_scale > 1.0) {
            return Err(Error::param("rho_ratio and rho_scale must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    IterCap,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution<T> {
    pub variant: Variant,
    pub n: usize,
    /// The PSD iterate, in the program's original dimension.
    pub matrix: SymMatrix<T>,
    pub objective: T,
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    /// ‖𝒜(X) − b‖ of `matrix` against the original constraints.
    pub constraint_residual: T,
    pub status: SolveStatus,
    /// Matrix dimension after presolve.
    pub reduced_dim: usize,
}

impl<T: Scalar> SdpSolution<T> {
    /// The Z block (drops the leading row and column of lifted programs).
    pub fn z_block(&self) -> SymMatrix<T> {
        let off = self.variant.z_offset();
        if off == 0 {
            return self.matrix.clone();
        }
        let idx: Vec<usize> = (off..self.matrix.n()).collect();
        self.matrix.principal(&idx)
    }

    pub fn to_dump(&self) -> SolutionDump {
        SolutionDump {
            variant: self.variant,
            n: self.n,
            matrix: PackedMatrix::pack(&self.matrix),
            objective: self.objective.to_f64_lossy(),
            iterations: self.iterations,
            primal_residual: self.primal_residual.to_f64_lossy(),
            dual_residual: self.dual_residual.to_f64_lossy(),
            constraint_residual: self.constraint_residual.to_f64_lossy(),
            status: self.status,
            reduced_dim: self.reduced_dim,
        }
    }

    pub fn from_dump(d: &SolutionDump) -> Result<Self> {
        Ok(Self {
            variant: d.variant,
            n: d.n,
            matrix: d.matrix.unpack()?,
            objective: T::lit(d.objective),
            iterations: d.iterations,
            primal_residual: T::lit(d.primal_residual),
            dual_residual: T::lit(d.dual_residual),
            constraint_residual: T::lit(d.constraint_residual),
            status: d.status,
            reduced_dim: d.reduced_dim,
        })
    }
}

/// JSON interchange form of a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionDump {
    pub variant: Variant,
    pub n: usize,
    pub matrix: PackedMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub constraint_residual: f64,
    pub status: SolveStatus,
    pub reduced_dim: usize,
}

/// Program after facial reduction.
struct Reduced<T> {
    dim: usize,
    /// Original index → (reduced index, sign).
    map: Vec<(usize, T)>,
    cost: SymMatrix<T>,
    constraints: Vec<(Constraint<T>, T)>,
    /// Orthonormal directions the solution must annihilate.
    kernel: Vec<Vec<T>>,
}

fn is_tight<T: Scalar>(v: &[T], b: T, pinned: &[bool]) -> bool {
    let l1: T = v.iter().map(|x| x.abs()).sum();
    let support = v.iter().filter(|x| **x != T::zero()).count();
    support >= 2
        && b > T::zero()
        && (b - l1 * l1).abs() <= T::lit(1e-12) * b.max(T::one())
        && v.iter().zip(pinned).all(|(x, &p)| *x == T::zero() || p)
}

fn presolve<T: Scalar>(p: &SdpProgram<T>) -> Reduced<T> {
    let d0 = p.dim();
    let mut map: Vec<(usize, T)> = (0..d0).map(|i| (i, T::one())).collect();
    let mut dim = d0;
    let mut cost = p.cost.clone();
    let mut cons = p.constraints.clone();

    loop {
        let mut pinned = vec![false; dim];
        for (c, b) in &cons {
            if let Constraint::Entry(i) = c {
                if *b == T::one() {
                    pinned[*i] = true;
                }
            }
        }
        let Some(k) = cons.iter().position(|(c, b)| matches!(c, Constraint::Rank1(v) if is_tight(v, *b, &pinned))) else {
            break;
        };
        let (Constraint::Rank1(v), _) = cons.remove(k) else { unreachable!() };
        let rep = v.iter().position(|x| *x != T::zero()).unwrap();
        let sgn = |x: T| if x < T::zero() { -T::one() } else { T::one() };
        // Step map: current index → (new index, sign).
        let mut step = vec![(0usize, T::one()); dim];
        let mut next = 0;
        for (i, s) in step.iter_mut().enumerate() {
            if v[i] != T::zero() && i != rep {
                continue;
            }
            *s = (next, T::one());
            next += 1;
        }
        let rep_new = step[rep].0;
        for i in 0..dim {
            if v[i] != T::zero() && i != rep {
                step[i] = (rep_new, sgn(v[i]) * sgn(v[rep]));
            }
        }
        let new_dim = next;
        let mut c2 = SymMatrix::zeros(new_dim);
        for i in 0..dim {
            let (a, si) = step[i];
            for j in 0..dim {
                let (b, sj) = step[j];
                c2[(a, b)] += si * sj * cost.get(i, j);
            }
        }
        cost = c2;
        let mut seen = vec![false; new_dim];
        let mut out = Vec::with_capacity(cons.len());
        for (c, b) in cons.drain(..) {
            match c {
                Constraint::Entry(i) => {
                    let a = step[i].0;
                    if !seen[a] {
                        seen[a] = true;
                        out.push((Constraint::Entry(a), b));
                    }
                }
                Constraint::Rank1(w) => {
                    let mut w2 = vec![T::zero(); new_dim];
                    for i in 0..dim {
                        w2[step[i].0] += step[i].1 * w[i];
                    }
                    out.push((Constraint::Rank1(w2), b));
                }
            }
        }
        cons = out;
        for m in map.iter_mut() {
            let (a, s) = step[m.0];
            *m = (a, m.1 * s);
        }
        dim = new_dim;
    }

    // Zero right-hand sides on rank-one terms become kernel directions.
    let mut kernel: Vec<Vec<T>> = Vec::new();
    let mut rest = Vec::with_capacity(cons.len());
    for (c, b) in cons {
        match c {
            Constraint::Rank1(mut v) if b == T::zero() => {
                for q in &kernel {
                    let d: T = q.iter().zip(&v).map(|(&a, &b)| a * b).sum();
                    for (x, &qi) in v.iter_mut().zip(q) {
                        *x -= d * qi;
                    }
                }
                let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
                if norm > T::lit(1e-12) {
                    v.iter_mut().for_each(|x| *x /= norm);
                    kernel.push(v);
                }
            }
            c => rest.push((c, b)),
        }
    }
    Reduced {
        dim,
        map,
        cost,
        constraints: rest,
        kernel,
    }
}

fn lift<T: Scalar>(red: &Reduced<T>, x: &SymMatrix<T>) -> SymMatrix<T> {
    let d0 = red.map.len();
    SymMatrix::from_fn(d0, |i, j| {
        let (a, si) = red.map[i];
        let (b, sj) = red.map[j];
        si * sj * x.get(a, b)
    })
}

/// Lower Cholesky factor, row-major m×m.
fn cholesky<T: Scalar>(g: &SymMatrix<T>) -> Result<Vec<T>> {
    let m = g.n();
    let mut l = vec![T::zero(); m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return Err(Error::SingularConstraints(f64::INFINITY));
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    Ok(l)
}

fn chol_solve<T: Scalar>(l: &[T], m: usize, rhs: &mut [T]) {
    for i in 0..m {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * m + k] * rhs[k];
        }
        rhs[i] = s / l[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = rhs[i];
        for k in (i + 1)..m {
            s -= l[k * m + i] * rhs[k];
        }
        rhs[i] = s / l[i * m + i];
    }
}

/// M ↦ P M P with P the projector onto the complement of `kernel`.
fn project_out<T: Scalar>(m: &mut SymMatrix<T>, kernel: &[Vec<T>]) {
    for q in kernel {
        let w = m.matvec(q);
        let alpha: T = w.iter().zip(q).map(|(&a, &b)| a * b).sum();
        let n = m.n();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += -q[i] * w[j] - w[i] * q[j] + alpha * q[i] * q[j];
            }
        }
    }
}

fn frob_diff<T: Scalar>(a: &SymMatrix<T>, b: &SymMatrix<T>) -> T {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// Inner product with four independent accumulators.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: T = ca.remainder().iter().zip(cb.remainder()).map(|(&x, &y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Type-II Anderson acceleration of the fixed-point map w ↦ F(w) on the
/// stacked (S, U) state.
struct Anderson<T> {
    memory: usize,
    len: usize,
    prev_w: Option<Vec<T>>,
    prev_g: Option<Vec<T>>,
    dw: Vec<Vec<T>>,
    dg: Vec<Vec<T>>,
    /// Pairwise inner products of `dg`, updated incrementally.
    dots: Vec<Vec<T>>,
}

impl<T: Scalar> Anderson<T> {
    fn new(memory: usize, len: usize) -> Self {
        Self {
            memory,
            len,
            prev_w: None,
            prev_g: None,
            dw: Vec::new(),
            dg: Vec::new(),
            dots: Vec::new(),
        }
    }

    fn enabled(&self) -> bool {
        self.memory > 0
    }

    fn reset(&mut self) {
        self.prev_w = None;
        self.prev_g = None;
        self.dw.clear();
        self.dg.clear();
        self.dots.clear();
    }

    /// Lower triangles of both matrices; the map is symmetric so this loses
    /// nothing and halves the history.
    fn stack(a: &SymMatrix<T>, b: &SymMatrix<T>) -> Vec<T> {
        let n = a.n();
        let mut v = Vec::with_capacity(n * (n + 1));
        for m in [a, b] {
            for i in 0..n {
                v.extend_from_slice(&m.row(i)[..=i]);
            }
        }
        v
    }

    fn unstack(n: usize, v: &[T]) -> SymMatrix<T> {
        let mut m = SymMatrix::zeros(n);
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] = v[k];
                m[(j, i)] = v[k];
                k += 1;
            }
        }
        m
    }

    /// Extrapolated next point, or `None` while the history is empty or the
    /// least-squares system is unusable.
    fn step(
        &mut self,
        s: &SymMatrix<T>,
        u: &SymMatrix<T>,
        fs: &SymMatrix<T>,
        fu: &SymMatrix<T>,
    ) -> Option<(SymMatrix<T>, SymMatrix<T>)> {
        let w = Self::stack(s, u);
        let fw = Self::stack(fs, fu);
        let g: Vec<T> = fw.iter().zip(&w).map(|(&a, &b)| a - b).collect();
        debug_assert_eq!(w.len(), self.len);
        if let (Some(pw), Some(pg)) = (self.prev_w.take(), self.prev_g.take()) {
            if self.dw.len() == self.memory {
                self.dw.remove(0);
                self.dg.remove(0);
                self.dots.remove(0);
                self.dots.iter_mut().for_each(|row| {
                    row.remove(0);
                });
            }
            let new_dg: Vec<T> = g.iter().zip(&pg).map(|(&a, &b)| a - b).collect();
            let mut row: Vec<T> = self.dg.iter().map(|o| dot(o, &new_dg)).collect();
            row.push(dot(&new_dg, &new_dg));
            for (r, &v) in self.dots.iter_mut().zip(&row) {
                r.push(v);
            }
            self.dots.push(row);
            self.dw.push(w.iter().zip(&pw).map(|(&a, &b)| a - b).collect());
            self.dg.push(new_dg);
        }
        self.prev_w = Some(w.clone());
        self.prev_g = Some(g.clone());
        let k = self.dg.len();
        if k == 0 {
            return None;
        }
        let mut gram = SymMatrix::from_fn(k, |i, j| self.dots[i][j]);
        let tr = gram.trace();
        if !(tr > T::zero()) {
            return None;
        }
        for i in 0..k {
            gram[(i, i)] += T::lit(1e-10) * tr;
        }
        let l = cholesky(&gram).ok()?;
        let mut gamma: Vec<T> = self.dg.iter().map(|dgi| dot(dgi, &g)).collect();
        chol_solve(&l, k, &mut gamma);
        // w⁺ = F(w) − Σ γ_i (Δw_i + Δg_i)
        let mut next = fw;
        for ((dwi, dgi), &gi) in self.dw.iter().zip(&self.dg).zip(&gamma) {
            for ((v, &a), &b) in next.iter_mut().zip(dwi).zip(dgi) {
                *v -= gi * (a + b);
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let n = s.n();
        let half = next.len() / 2;
        Some((Self::unstack(n, &next[..half]), Self::unstack(n, &next[half..])))
    }
}

/// Iterations after which a constraint residual above `INFEASIBLE_LEVEL`
/// is declared a stall.
const STALL_ITER: usize = 2000;
const INFEASIBLE_LEVEL: f64 = 1e-3;

pub fn solve<T: Scalar>(program: &SdpProgram<T>, opts: &SolverOptions) -> Result<SdpSolution<T>> {
    opts.validate()?;
    program.validate()?;
    let red = presolve(program);
    let d = red.dim;
    let m = red.constraints.len();
    let gram = SymMatrix::from_fn(m, |i, j| red.constraints[i].0.inner(&red.constraints[j].0));
    let chol = cholesky(&gram)?;
    let b: Vec<T> = red.constraints.iter().map(|(_, b)| *b).collect();
    let b_scale = T::one() + b.iter().map(|&x| x * x).sum::<T>().sqrt();

    let sqrt_d = T::from_usize_lossy(d).sqrt();
    let cnorm = red.cost.frob_norm();
    let c_scale = if opts.normalize_cost && cnorm > T::zero() { sqrt_d / cnorm } else { T::one() };
    let cost = red.cost.scaled(c_scale);
    let cost_norm = cost.frob_norm();
    let mut rho = opts.rho.map(T::lit).unwrap_or(T::one() / sqrt_d);
    let alpha = T::lit(opts.relaxation);
    let tol_p = T::lit(opts.tol_primal);
    let tol_c = T::lit(opts.tol_constraint);

    let affine = |y: &mut SymMatrix<T>| {
        let mut r: Vec<T> = red.constraints.iter().zip(&b).map(|((c, _), &bk)| c.apply(y) - bk).collect();
        chol_solve(&chol, m, &mut r);
        for ((c, _), &rk) in red.constraints.iter().zip(&r) {
            c.add_scaled_to(-rk, y);
        }
    };
    let cons_res = |x: &SymMatrix<T>| -> T {
        red.constraints
            .iter()
            .zip(&b)
            .map(|((c, _), &bk)| {
                let r = c.apply(x) - bk;
                r * r
            })
            .sum::<T>()
            .sqrt()
            / b_scale
    };

    let mut s = SymMatrix::<T>::zeros(d);
    let mut u = SymMatrix::<T>::zeros(d);
    let mut best: Option<(T, SymMatrix<T>, T, T, T, usize)> = None;
    let mut status = SolveStatus::IterCap;
    let mut iterations = 0;
    let mut accel = Anderson::new(opts.anderson_memory, d * (d + 1));
    // Plain image F(w) of the last accepted point and its residual norm,
    // kept to fall back on when an extrapolated point does worse.
    let mut fallback: Option<(SymMatrix<T>, SymMatrix<T>, T)> = None;
    let mut extrapolated = false;

    for it in 1..=opts.max_iter {
        iterations = it;
        // X ← Π_affine(S − U + C/ρ)
        let mut x = s.sub(&u);
        x.axpy(T::one() / rho, &cost);
        affine(&mut x);
        // Over-relaxed point.
        let mut xh = x.scaled(alpha);
        xh.axpy(T::one() - alpha, &s);
        // S ← Π_cone(X̂ + U)
        let mut v = xh.add(&u);
        project_out(&mut v, &red.kernel);
        let s_new = psd_project(&v)?;
        // U ← U + X̂ − S
        let mut u_new = u.add(&xh);
        u_new.axpy(-T::one(), &s_new);

        let scale = T::one() + x.frob_norm().max(s_new.frob_norm());
        let r_p = frob_diff(&x, &s_new) / scale;
        let r_d = rho * frob_diff(&s_new, &s) / (T::one() + cost_norm);
        let r_c = cons_res(&s_new);

        let combined = r_p.max(r_c);
        if best.as_ref().map_or(true, |bst| combined < bst.0) {
            best = Some((combined, s_new.clone(), r_p, r_d, r_c, it));
        }
        if r_p <= tol_p && r_d <= tol_p && r_c <= tol_c {
            status = SolveStatus::Converged;
            best = Some((combined, s_new, r_p, r_d, r_c, it));
            break;
        }
        if it >= STALL_ITER && best.as_ref().unwrap().4 > T::lit(INFEASIBLE_LEVEL) {
            status = SolveStatus::Infeasible;
            break;
        }

        let gnorm = (frob_diff(&s_new, &s).powi(2) + frob_diff(&u_new, &u).powi(2)).sqrt();
        if extrapolated {
            if let Some((fs, fu, fnorm)) = fallback.take() {
                if !(gnorm <= fnorm) {
                    // Reject the extrapolation and resume from the plain image.
                    accel.reset();
                    s = fs;
                    u = fu;
                    extrapolated = false;
                    continue;
                }
            }
        }

        let mut rho_changed = false;
        if opts.adaptive_rho && it % 10 == 0 {
            let ratio = T::lit(opts.rho_ratio);
            let f = T::lit(opts.rho_scale);
            if r_p > ratio * r_d {
                rho = rho * f;
                u_new = u_new.scaled(T::one() / f);
                rho_changed = true;
            } else if r_d > ratio * r_p {
                rho = rho / f;
                u_new = u_new.scaled(f);
                rho_changed = true;
            }
        }
        if rho_changed || !accel.enabled() {
            accel.reset();
            s = s_new;
            u = u_new;
            extrapolated = false;
            continue;
        }
        match accel.step(&s, &u, &s_new, &u_new) {
            Some((sa, ua)) => {
                fallback = Some((s_new, u_new, gnorm));
                s = sa;
                u = ua;
                extrapolated = true;
            }
            None => {
                s = s_new;
                u = u_new;
                extrapolated = false;
            }
        }
    }
    let (_, s_best, r_p, r_d, _, _) = best.expect("at least one iteration");
    if status == SolveStatus::IterCap && cons_res(&s_best) > T::lit(INFEASIBLE_LEVEL) {
        status = SolveStatus::Infeasible;
    }
    let matrix = lift(&red, &s_best);
    let constraint_residual = program.constraint_residual(&matrix);
    Ok(SdpSolution {
        variant: program.variant,
        n: program.n,
        objective: program.objective(&matrix),
        matrix,
        iterations,
        primal_residual: r_p,
        dual_residual: r_d,
        constraint_residual,
        status,
        reduced_dim: d,
    })
}
