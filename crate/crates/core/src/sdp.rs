//! Small dense semidefinite programs.
//!
//! Problems are posed over a block-diagonal Hermitian variable `X ⪰ 0` with
//! real affine constraints `Tr[A_k X] = b_k`. The affine set is parametrized
//! explicitly (particular solution plus null-space basis) and the remaining
//! linear matrix inequality is handled by a primal log-barrier method with
//! damped Newton steps.
//!
//! Feasibility maximizes `t` subject to `X(z) - t·1 ⪰ 0`: a positive optimum
//! gives an interior point, an optimum bounded away from zero below is
//! evidence that the PSD cone and the affine set do not meet (every point of
//! the affine set is at Frobenius distance at least `-t*` from the cone).

use nalgebra::{DMatrix, DVector};

use crate::channel::DensityMatrix;
use crate::error::{Error, Result};
use crate::matrix::{
    cholesky, cholesky_inverse, eig_hermitian, psd_inv_sqrt, psd_project, ComplexMatrix, HermitianOperator,
    C64, ZERO,
};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 50_000;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    Optimal,
    Undecided,
}

#[derive(Clone, Debug)]
pub struct SdpResult {
    pub status: SdpStatus,
    pub solution: Option<HermitianOperator>,
    /// Per-block view of `solution`.
    pub blocks: Vec<HermitianOperator>,
    /// Constraint residual at the returned solution, or the certified lower
    /// bound on the cone–affine distance when infeasible.
    pub residual: f64,
    pub gap: Option<f64>,
    pub iterations: usize,
}

impl SdpResult {
    fn without_solution(status: SdpStatus, residual: f64, gap: Option<f64>, iterations: usize) -> Self {
        Self { status, solution: None, blocks: Vec::new(), residual, gap, iterations }
    }
}

/// One real linear constraint in Hermitian-basis coordinates.
#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
}

/// Affine feasibility / optimization problem over a block-diagonal PSD variable.
#[derive(Clone, Debug)]
pub struct AffinePsdProblem {
    blocks: Vec<usize>,
    /// Offset of each block in the full matrix.
    offsets: Vec<usize>,
    /// Offset of each block in the coordinate vector.
    coord_offsets: Vec<usize>,
    rows: Vec<Row>,
    objective: Option<Vec<f64>>,
}

impl AffinePsdProblem {
    pub fn new(variable_dim: usize) -> Self {
        Self::block_diagonal(&[variable_dim])
    }

    pub fn block_diagonal(blocks: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut coord_offsets = Vec::with_capacity(blocks.len());
        let (mut o, mut c) = (0, 0);
        for &n in blocks {
            offsets.push(o);
            coord_offsets.push(c);
            o += n;
            c += n * n;
        }
        Self { blocks: blocks.to_vec(), offsets, coord_offsets, rows: Vec::new(), objective: None }
    }

    pub fn variable_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_coords(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Offset of block `b` within the full variable.
    pub fn block_offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    /// `Tr[A X] = b` for Hermitian `A` of the full variable dimension.
    pub fn add_trace_constraint(&mut self, a: &HermitianOperator, b: f64) -> Result<()> {
        let n = self.variable_dim();
        if a.dim() != n {
            return Err(Error::MalformedProblem(format!("constraint of dimension {} on a {n}-dim variable", a.dim())));
        }
        let m = a.matrix();
        let mut terms = Vec::new();
        for p in 0..n {
            for q in 0..n {
                if m[(q, p)] != ZERO {
                    terms.push((p, q, m[(q, p)]));
                }
            }
        }
        self.push_real_row(&terms, b)
    }

    /// `Σ c · X[p, q] = value` for complex coefficients; adds real and imaginary rows.
    pub fn add_complex_constraint(&mut self, terms: &[(usize, usize, C64)], value: C64) -> Result<()> {
        self.push_real_row(terms, value.re)?;
        let rotated: Vec<(usize, usize, C64)> = terms.iter().map(|&(p, q, c)| (p, q, c * C64::new(0.0, -1.0))).collect();
        self.push_real_row(&rotated, value.im)
    }

    /// Constrains `Re Σ c · X[p, q] = value`.
    pub fn add_real_part_constraint(&mut self, terms: &[(usize, usize, C64)], value: f64) -> Result<()> {
        self.push_real_row(terms, value)
    }

    pub fn set_objective(&mut self, c: &HermitianOperator) -> Result<()> {
        let n = self.variable_dim();
        if c.dim() != n {
            return Err(Error::MalformedProblem("objective dimension".into()));
        }
        let mut coeffs = vec![0.0; self.num_coords()];
        for p in 0..n {
            for q in 0..n {
                for (k, v) in self.entry_coeffs(p, q, c.matrix()[(q, p)]) {
                    coeffs[k] += v;
                }
            }
        }
        self.objective = Some(coeffs);
        Ok(())
    }

    pub fn has_objective(&self) -> bool {
        self.objective.is_some()
    }

    fn push_real_row(&mut self, terms: &[(usize, usize, C64)], rhs: f64) -> Result<()> {
        let n = self.variable_dim();
        if !rhs.is_finite() {
            return Err(Error::MalformedProblem("non-finite right-hand side".into()));
        }
        let mut dense: Vec<(usize, f64)> = Vec::new();
        for &(p, q, c) in terms {
            if p >= n || q >= n {
                return Err(Error::MalformedProblem(format!("entry ({p}, {q}) outside a {n}-dim variable")));
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::MalformedProblem("non-finite coefficient".into()));
            }
            dense.extend(self.entry_coeffs(p, q, c));
        }
        dense.sort_by_key(|&(k, _)| k);
        let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(dense.len());
        for (k, v) in dense {
            match coeffs.last_mut() {
                Some((lk, lv)) if *lk == k => *lv += v,
                _ => coeffs.push((k, v)),
            }
        }
        coeffs.retain(|&(_, v)| v != 0.0);
        self.rows.push(Row { coeffs, rhs });
        Ok(())
    }

    fn locate(&self, p: usize) -> (usize, usize) {
        let b = match self.offsets.binary_search(&p) {
            Ok(b) => b,
            Err(b) => b - 1,
        };
        (b, p - self.offsets[b])
    }

    fn pair_index(n: usize, k: usize, l: usize) -> usize {
        debug_assert!(k < l);
        k * n - k * (k + 1) / 2 + (l - k - 1)
    }

    /// `Re(c · X[p, q])` as a combination of coordinates.
    fn entry_coeffs(&self, p: usize, q: usize, c: C64) -> Vec<(usize, f64)> {
        let (bp, kp) = self.locate(p);
        let (bq, kq) = self.locate(q);
        if bp != bq {
            return Vec::new();
        }
        let n = self.blocks[bp];
        let base = self.coord_offsets[bp];
        if kp == kq {
            return vec![(base + kp, c.re)];
        }
        let (k, l, sign) = if kp < kq { (kp, kq, -1.0) } else { (kq, kp, 1.0) };
        let idx = base + n + 2 * Self::pair_index(n, k, l);
        vec![(idx, c.re * SQRT_HALF), (idx + 1, sign * c.im * SQRT_HALF)]
    }

    /// Coordinates of block `b` as a Hermitian matrix.
    fn block_from_coords(&self, b: usize, y: &[f64]) -> ComplexMatrix {
        let n = self.blocks[b];
        let base = self.coord_offsets[b];
        let mut m = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = C64::new(y[base + k], 0.0);
        }
        for k in 0..n {
            for l in k + 1..n {
                let idx = base + n + 2 * Self::pair_index(n, k, l);
                let z = C64::new(y[idx], y[idx + 1]) * SQRT_HALF;
                m[(k, l)] = z;
                m[(l, k)] = z.conj();
            }
        }
        m
    }

    /// Hermitian-basis coordinates of a block-diagonal matrix given per block.
    fn coords_from_blocks(&self, blocks: &[ComplexMatrix]) -> Vec<f64> {
        let mut y = vec![0.0; self.num_coords()];
        for (b, m) in blocks.iter().enumerate() {
            let n = self.blocks[b];
            let base = self.coord_offsets[b];
            for k in 0..n {
                y[base + k] = m[(k, k)].re;
            }
            for k in 0..n {
                for l in k + 1..n {
                    let idx = base + n + 2 * Self::pair_index(n, k, l);
                    let z = (m[(k, l)] + m[(l, k)].conj()) * 0.5;
                    y[idx] = z.re / SQRT_HALF;
                    y[idx + 1] = z.im / SQRT_HALF;
                }
            }
        }
        y
    }

    fn assemble(&self, blocks: &[ComplexMatrix]) -> HermitianOperator {
        let n = self.variable_dim();
        let mut full = ComplexMatrix::zeros(n, n);
        for (b, m) in blocks.iter().enumerate() {
            let o = self.offsets[b];
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    full[(o + r, o + c)] = m[(r, c)];
                }
            }
        }
        HermitianOperator::from_hermitian_part(&full)
    }

    /// Largest absolute constraint violation at the given coordinates.
    fn constraint_residual(&self, y: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|row| (row.coeffs.iter().map(|&(k, v)| v * y[k]).sum::<f64>() - row.rhs).abs())
            .fold(0.0, f64::max)
    }

    /// Independent recheck of a candidate solution: minimum eigenvalue and
    /// maximal constraint violation.
    pub fn check_solution(&self, x: &HermitianOperator) -> Result<(f64, f64)> {
        let blocks: Vec<ComplexMatrix> =
            (0..self.blocks.len()).map(|b| x.matrix().submatrix(self.offsets[b], self.offsets[b], self.blocks[b], self.blocks[b])).collect();
        let y = self.coords_from_blocks(&blocks);
        Ok((x.min_eigenvalue()?, self.constraint_residual(&y)))
    }
}

/// Coefficient matrix of one variable in one LMI block.
#[derive(Clone, Debug)]
enum Coef {
    Sparse(Vec<(usize, usize, C64)>),
    Dense(ComplexMatrix),
}

impl Coef {
    /// `Re Tr[W · self]`.
    fn trace_with(&self, w: &ComplexMatrix) -> f64 {
        match self {
            Coef::Sparse(entries) => entries.iter().map(|&(p, q, c)| (c * w[(q, p)]).re).sum(),
            Coef::Dense(m) => w.trace_product(m).re,
        }
    }

    /// `S^{-1} · self · S^{-1}`.
    fn sandwich(&self, sinv: &ComplexMatrix) -> ComplexMatrix {
        match self {
            Coef::Sparse(entries) => {
                let n = sinv.rows();
                let mut w = ComplexMatrix::zeros(n, n);
                for &(p, q, c) in entries {
                    for r in 0..n {
                        let a = sinv[(r, p)] * c;
                        if a == ZERO {
                            continue;
                        }
                        for s in 0..n {
                            w[(r, s)] += a * sinv[(q, s)];
                        }
                    }
                }
                w
            }
            Coef::Dense(m) => sinv.matmul(m).matmul(sinv),
        }
    }

    fn add_scaled_into(&self, target: &mut ComplexMatrix, s: f64) {
        match self {
            Coef::Sparse(entries) => {
                for &(p, q, c) in entries {
                    target[(p, q)] += c * s;
                }
            }
            Coef::Dense(m) => {
                for (t, v) in target.as_mut_slice().iter_mut().zip(m.as_slice()) {
                    *t += v * s;
                }
            }
        }
    }
}

/// `F(z) = constant + Σ_j z_j coef_j ⪰ 0`.
#[derive(Clone, Debug)]
struct LmiBlock {
    constant: ComplexMatrix,
    terms: Vec<(usize, Coef)>,
}

impl LmiBlock {
    fn eval(&self, z: &[f64]) -> ComplexMatrix {
        let mut m = self.constant.clone();
        for (j, c) in &self.terms {
            if z[*j] != 0.0 {
                c.add_scaled_into(&mut m, z[*j]);
            }
        }
        m
    }
}

/// Minimize `cost · z` subject to every block being positive definite.
struct LmiProgram {
    num_vars: usize,
    blocks: Vec<LmiBlock>,
    cost: Vec<f64>,
}

struct BarrierState {
    z: Vec<f64>,
    eta: f64,
    gap: f64,
    iterations: usize,
    converged: bool,
    /// `S_b^{-1}` at the final iterate.
    inverses: Vec<ComplexMatrix>,
}

struct BarrierOptions {
    gap_tol: f64,
    max_iter: usize,
}

impl LmiProgram {
    fn barrier_parameter(&self) -> f64 {
        self.blocks.iter().map(|b| b.constant.rows() as f64).sum()
    }

    /// Inverses and total `ln det`; `None` if some block is not positive definite.
    fn factor(&self, z: &[f64]) -> Option<(Vec<ComplexMatrix>, f64)> {
        let mut inverses = Vec::with_capacity(self.blocks.len());
        let mut logdet = 0.0;
        for b in &self.blocks {
            let s = b.eval(z);
            let l = cholesky(&s)?;
            let (inv, ld) = cholesky_inverse(&l);
            inverses.push(inv);
            logdet += ld;
        }
        Some((inverses, logdet))
    }

    fn potential(&self, z: &[f64], eta: f64) -> Option<(f64, Vec<ComplexMatrix>)> {
        let (inv, logdet) = self.factor(z)?;
        let lin: f64 = self.cost.iter().zip(z).map(|(c, x)| c * x).sum();
        Some((eta * lin - logdet, inv))
    }

    fn newton_system(&self, inverses: &[ComplexMatrix], eta: f64) -> (DMatrix<f64>, DVector<f64>) {
        let m = self.num_vars;
        let mut h = DMatrix::<f64>::zeros(m, m);
        let mut g = DVector::<f64>::from_iterator(m, self.cost.iter().map(|c| eta * c));
        for (b, sinv) in self.blocks.iter().zip(inverses) {
            let sandwiches: Vec<ComplexMatrix> = b.terms.iter().map(|(_, c)| c.sandwich(sinv)).collect();
            for (ti, (i, ci)) in b.terms.iter().enumerate() {
                g[*i] -= ci.trace_with(sinv);
                for (j, cj) in b.terms.iter().skip(ti) {
                    let v = cj.trace_with(&sandwiches[ti]);
                    h[(*i, *j)] += v;
                    if i != j {
                        h[(*j, *i)] += v;
                    }
                }
            }
        }
        (h, g)
    }

    fn solve_newton(h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
        let rhs = -g;
        if let Some(ch) = h.clone().cholesky() {
            let dz = ch.solve(&rhs);
            if dz.iter().all(|v| v.is_finite()) {
                return Some(dz);
            }
        }
        let scale = h.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        let reg = &h + DMatrix::<f64>::identity(h.nrows(), h.ncols()) * (1e-12 * scale);
        if let Some(ch) = reg.cholesky() {
            let dz = ch.solve(&rhs);
            if dz.iter().all(|v| v.is_finite()) {
                return Some(dz);
            }
        }
        let svd = h.svd(true, true);
        svd.solve(&rhs, 1e-14 * scale).ok().filter(|dz| dz.iter().all(|v| v.is_finite()))
    }

    /// Path-following barrier method from a strictly feasible `z0`. `stop`
    /// is consulted after every Newton step and may end the run early.
    fn minimize(&self, z0: Vec<f64>, opts: &BarrierOptions, stop: &dyn Fn(&[f64]) -> bool) -> Result<BarrierState> {
        const MU: f64 = 8.0;
        const MAX_CENTERING: usize = 80;
        let nu = self.barrier_parameter();
        let mut z = z0;
        let mut eta = 1.0;
        let mut iterations = 0;
        let (_, mut inverses) =
            self.potential(&z, eta).ok_or_else(|| Error::Internal("barrier start is not strictly feasible".into()))?;

        if self.num_vars == 0 {
            return Ok(BarrierState { z, eta, gap: 0.0, iterations, converged: true, inverses });
        }

        loop {
            // Centering at the current eta.
            for _ in 0..MAX_CENTERING {
                if iterations >= opts.max_iter {
                    return Ok(BarrierState { z, eta, gap: nu / eta, iterations, converged: false, inverses });
                }
                iterations += 1;
                let (h, g) = self.newton_system(&inverses, eta);
                let Some(dz) = Self::solve_newton(h, &g) else {
                    return Ok(BarrierState { z, eta, gap: nu / eta, iterations, converged: false, inverses });
                };
                let decrement = -g.dot(&dz);
                if !(decrement > 1e-12) {
                    break;
                }
                let phi0 = self.potential(&z, eta).map(|p| p.0).unwrap_or(f64::INFINITY);
                let mut alpha = 1.0;
                let mut accepted = None;
                while alpha > 1e-12 {
                    let trial: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, d)| a + alpha * d).collect();
                    if let Some((phi, inv)) = self.potential(&trial, eta) {
                        if phi <= phi0 - 0.25 * alpha * decrement {
                            accepted = Some((trial, inv));
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                let Some((trial, inv)) = accepted else { break };
                z = trial;
                inverses = inv;
                if stop(&z) {
                    return Ok(BarrierState { z, eta, gap: nu / eta, iterations, converged: true, inverses });
                }
                if decrement < 1e-9 {
                    break;
                }
            }
            if nu / eta <= opts.gap_tol {
                return Ok(BarrierState { z, eta, gap: nu / eta, iterations, converged: true, inverses });
            }
            eta *= MU;
        }
    }
}

/// Null-space parametrization `y = y0 + N z` of the constraint set.
struct AffineParam {
    y0: Vec<f64>,
    basis: Vec<Vec<f64>>,
    residual: f64,
}

fn parametrize(problem: &AffinePsdProblem) -> AffineParam {
    let m = problem.num_coords();
    let k = problem.rows.len();
    if k == 0 {
        let basis = (0..m).map(|j| (0..m).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        return AffineParam { y0: vec![0.0; m], basis, residual: 0.0 };
    }
    let rows = k.max(m);
    let mut a = faer::Mat::<f64>::zeros(rows, m);
    let mut b = vec![0.0; rows];
    for (r, row) in problem.rows.iter().enumerate() {
        for &(c, v) in &row.coeffs {
            a[(r, c)] += v;
        }
        b[r] = row.rhs;
    }
    // nalgebra's SVD loses accuracy on some of these matrices.
    let Ok(svd) = a.thin_svd() else {
        return AffineParam { y0: vec![0.0; m], basis: Vec::new(), residual: f64::INFINITY };
    };
    let (u, v) = (svd.U(), svd.V());
    let sv = svd.S().column_vector();
    let smax = (0..m).fold(0.0f64, |x, i| x.max(sv[i]));
    let thr = 1e-9 * smax.max(1e-300);
    let mut y0 = vec![0.0; m];
    let mut basis = Vec::new();
    for i in 0..m {
        if sv[i] > thr {
            let coef = (0..rows).map(|r| u[(r, i)] * b[r]).sum::<f64>() / sv[i];
            for (c, y) in y0.iter_mut().enumerate() {
                *y += coef * v[(c, i)];
            }
        } else {
            basis.push((0..m).map(|c| v[(c, i)]).collect());
        }
    }
    let residual = problem.constraint_residual(&y0);
    AffineParam { y0, basis, residual }
}

/// Decides whether `{X ⪰ 0 : Tr[A_k X] = b_k}` is nonempty.
pub fn solve_feasibility(problem: &AffinePsdProblem, tol: f64, max_iter: usize) -> Result<SdpResult> {
    if problem.has_objective() {
        return Err(Error::MalformedProblem("feasibility problems take no objective".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::MalformedProblem("tolerance must be positive".into()));
    }
    let outcome = phase_one(problem, tol, max_iter)?;
    Ok(outcome.result)
}

struct PhaseOne {
    result: SdpResult,
    param: Option<AffineParam>,
    /// Strictly feasible null-space coordinates, when found.
    interior: Option<Vec<f64>>,
}

fn phase_one(problem: &AffinePsdProblem, tol: f64, max_iter: usize) -> Result<PhaseOne> {
    let param = parametrize(problem);
    if param.residual > 10.0 * tol {
        let result = SdpResult::without_solution(SdpStatus::Infeasible, param.residual, None, 0);
        return Ok(PhaseOne { result, param: None, interior: None });
    }
    if param.residual > tol {
        let result = SdpResult::without_solution(SdpStatus::Undecided, param.residual, None, 0);
        return Ok(PhaseOne { result, param: None, interior: None });
    }
    let nb = problem.blocks.len();
    let base_blocks: Vec<ComplexMatrix> = (0..nb).map(|b| problem.block_from_coords(b, &param.y0)).collect();

    if param.basis.is_empty() {
        // The affine set is a single point.
        let mut neg2 = 0.0;
        let mut min_eig = f64::INFINITY;
        for m in &base_blocks {
            let vals = HermitianOperator::from_hermitian_part(m).eigvalsh()?;
            min_eig = min_eig.min(vals.first().copied().unwrap_or(0.0));
            neg2 += vals.iter().filter(|&&v| v < 0.0).map(|v| v * v).sum::<f64>();
        }
        let dist = neg2.sqrt();
        let result = if min_eig >= -tol {
            finish_feasible(problem, &base_blocks, 0, None)?
        } else if dist > 10.0 * tol {
            SdpResult::without_solution(SdpStatus::Infeasible, dist, None, 0)
        } else {
            SdpResult::without_solution(SdpStatus::Undecided, dist, None, 0)
        };
        let interior = (min_eig > 0.0).then(Vec::new);
        return Ok(PhaseOne { result, param: Some(param), interior });
    }

    // Variables: null-space coordinates z (p of them) and t (last).
    let p = param.basis.len();
    let t_idx = p;
    let mut lmi_blocks = Vec::with_capacity(nb + 1);
    let mut trace_terms = Vec::new();
    let mut trace0 = 0.0;
    for (b, base) in base_blocks.iter().enumerate() {
        let n = problem.blocks[b];
        let mut terms = Vec::with_capacity(p + 1);
        for (j, v) in param.basis.iter().enumerate() {
            let m = problem.block_from_coords(b, v);
            if m.max_abs() > 1e-15 {
                let tr = m.trace().re;
                if tr != 0.0 {
                    trace_terms.push((j, tr));
                }
                terms.push((j, Coef::Dense(m)));
            }
        }
        terms.push((t_idx, Coef::Sparse((0..n).map(|k| (k, k, C64::new(-1.0, 0.0))).collect())));
        trace0 += base.trace().re;
        lmi_blocks.push(LmiBlock { constant: base.clone(), terms });
    }
    // Trace bound keeps the barrier problem bounded.
    let total_dim = problem.variable_dim() as f64;
    let bound = 2.0 * trace0.abs() + 10.0 * total_dim + 1.0;
    let mut merged: Vec<(usize, f64)> = Vec::new();
    for (j, v) in trace_terms {
        match merged.iter_mut().find(|(k, _)| *k == j) {
            Some((_, acc)) => *acc += v,
            None => merged.push((j, v)),
        }
    }
    lmi_blocks.push(LmiBlock {
        constant: ComplexMatrix::from_diag(&[bound - trace0]),
        terms: merged.into_iter().map(|(j, v)| (j, Coef::Sparse(vec![(0, 0, C64::new(-v, 0.0))]))).collect(),
    });

    let mut min_eig = f64::INFINITY;
    for m in &base_blocks {
        min_eig = min_eig.min(HermitianOperator::from_hermitian_part(m).min_eigenvalue()?);
    }
    if min_eig > 0.0 {
        let result = finish_feasible(problem, &base_blocks, 0, None)?;
        let interior = Some(vec![0.0; p]);
        return Ok(PhaseOne { result, param: Some(param), interior });
    }
    let mut z0 = vec![0.0; p + 1];
    z0[t_idx] = min_eig - 1.0;
    let mut cost = vec![0.0; p + 1];
    cost[t_idx] = -1.0;
    let program = LmiProgram { num_vars: p + 1, blocks: lmi_blocks, cost };
    let opts = BarrierOptions { gap_tol: 0.1 * tol, max_iter };
    let state = program.minimize(z0, &opts, &|z: &[f64]| z[t_idx] > 0.0)?;

    let t = state.z[t_idx];
    let blocks_at = |z: &[f64]| -> Vec<ComplexMatrix> {
        (0..nb)
            .map(|b| {
                let mut m = base_blocks[b].clone();
                for (j, coef) in &program.blocks[b].terms {
                    if *j != t_idx {
                        coef.add_scaled_into(&mut m, z[*j]);
                    }
                }
                m
            })
            .collect()
    };
    let result = if t >= -tol {
        finish_feasible(problem, &blocks_at(&state.z), state.iterations, Some(state.gap))?
    } else if state.converged && t + state.gap < -10.0 * tol {
        SdpResult::without_solution(SdpStatus::Infeasible, -(t + state.gap), Some(state.gap), state.iterations)
    } else {
        SdpResult::without_solution(SdpStatus::Undecided, -t, Some(state.gap), state.iterations)
    };
    let interior = (t > 0.0).then(|| state.z[..p].to_vec());
    Ok(PhaseOne { result, param: Some(param), interior })
}

fn finish_feasible(problem: &AffinePsdProblem, blocks: &[ComplexMatrix], iterations: usize, gap: Option<f64>) -> Result<SdpResult> {
    let projected: Vec<HermitianOperator> = blocks
        .iter()
        .map(|m| psd_project(&HermitianOperator::from_hermitian_part(m)))
        .collect::<Result<_>>()?;
    let mats: Vec<ComplexMatrix> = projected.iter().map(|h| h.matrix().clone()).collect();
    let residual = problem.constraint_residual(&problem.coords_from_blocks(&mats));
    Ok(SdpResult {
        status: SdpStatus::Feasible,
        solution: Some(problem.assemble(&mats)),
        blocks: projected,
        residual,
        gap,
        iterations,
    })
}

/// Minimizes `Tr[C X]` over the feasible set. Requires a strictly feasible
/// point; problems whose feasible set has empty interior come back undecided.
pub fn solve_minimize(problem: &AffinePsdProblem, tol: f64, max_iter: usize) -> Result<SdpResult> {
    let cost_coords = problem.objective.clone().ok_or_else(|| Error::MalformedProblem("no objective".into()))?;
    let mut stripped = problem.clone();
    stripped.objective = None;
    let one = phase_one(&stripped, tol, max_iter)?;
    if one.result.status == SdpStatus::Infeasible {
        return Ok(one.result);
    }
    let (Some(param), Some(z_int)) = (one.param, one.interior) else {
        return Ok(SdpResult::without_solution(SdpStatus::Undecided, one.result.residual, None, one.result.iterations));
    };
    let nb = problem.blocks.len();
    let p = param.basis.len();
    let base_blocks: Vec<ComplexMatrix> = (0..nb).map(|b| problem.block_from_coords(b, &param.y0)).collect();
    let mut blocks = Vec::with_capacity(nb);
    for (b, base) in base_blocks.iter().enumerate() {
        let terms = param
            .basis
            .iter()
            .enumerate()
            .map(|(j, v)| (j, Coef::Dense(problem.block_from_coords(b, v))))
            .collect();
        blocks.push(LmiBlock { constant: base.clone(), terms });
    }
    let cost: Vec<f64> = param.basis.iter().map(|v| v.iter().zip(&cost_coords).map(|(a, c)| a * c).sum()).collect();
    let program = LmiProgram { num_vars: p, blocks, cost };
    let opts = BarrierOptions { gap_tol: 0.1 * tol, max_iter };
    let state = program.minimize(z_int, &opts, &|_| false)?;
    let mut result = finish_feasible(
        problem,
        &program.blocks.iter().map(|b| b.eval(&state.z)).collect::<Vec<_>>(),
        state.iterations + one.result.iterations,
        Some(state.gap),
    )?;
    result.status = if state.converged { SdpStatus::Optimal } else { SdpStatus::Undecided };
    Ok(result)
}

/// Outcome of [`solve_min_trace_dominating`].
#[derive(Clone, Debug)]
pub struct MinTraceResult {
    /// `K` and diagnostics; `status` is `Optimal` when the gap is certified.
    pub sdp: SdpResult,
    /// `Tr K`, an upper bound on the guessing probability.
    pub value: f64,
    /// Success probability of the recovered POVM, a lower bound.
    pub primal_value: f64,
    pub povm: Vec<HermitianOperator>,
}

/// `min Tr K` subject to `K ⪰ p(x) ρ_x` for every `x`, with a primal POVM
/// recovered from the barrier's dual variables `M_x = (K - p_x ρ_x)^{-1} / η`.
pub fn solve_min_trace_dominating(states: &[(f64, DensityMatrix)], tol: f64, max_iter: usize) -> Result<MinTraceResult> {
    let first = states.first().ok_or_else(|| Error::MalformedProblem("empty ensemble".into()))?;
    let n = first.1.dim();
    if states.iter().any(|(_, r)| r.dim() != n) {
        return Err(Error::DimensionMismatch("ensemble states differ in dimension".into()));
    }
    if states.iter().any(|(w, _)| !(*w > 0.0)) {
        return Err(Error::MalformedProblem("weights must be positive".into()));
    }
    let weighted: Vec<ComplexMatrix> = states.iter().map(|(w, r)| r.matrix().matrix().scale_real(*w)).collect();

    if states.len() == 1 {
        let k = HermitianOperator::from_hermitian_part(&weighted[0]);
        let value = k.trace();
        return Ok(MinTraceResult {
            sdp: SdpResult {
                status: SdpStatus::Optimal,
                solution: Some(k.clone()),
                blocks: vec![k],
                residual: 0.0,
                gap: Some(0.0),
                iterations: 0,
            },
            value,
            primal_value: value,
            povm: vec![HermitianOperator::identity(n)],
        });
    }

    let shape = AffinePsdProblem::new(n);
    let m = n * n;
    let basis_coef = |j: usize| -> Coef {
        if j < n {
            return Coef::Sparse(vec![(j, j, C64::new(1.0, 0.0))]);
        }
        let pair = (j - n) / 2;
        let imag = (j - n) % 2 == 1;
        let (mut k, mut rest) = (0, pair);
        while rest >= n - k - 1 {
            rest -= n - k - 1;
            k += 1;
        }
        let l = k + 1 + rest;
        if imag {
            Coef::Sparse(vec![(k, l, C64::new(0.0, SQRT_HALF)), (l, k, C64::new(0.0, -SQRT_HALF))])
        } else {
            Coef::Sparse(vec![(k, l, C64::new(SQRT_HALF, 0.0)), (l, k, C64::new(SQRT_HALF, 0.0))])
        }
    };
    let blocks: Vec<LmiBlock> =
        weighted.iter().map(|w| LmiBlock { constant: -w, terms: (0..m).map(|j| (j, basis_coef(j))).collect() }).collect();
    let mut cost = vec![0.0; m];
    cost[..n].iter_mut().for_each(|c| *c = 1.0);
    let program = LmiProgram { num_vars: m, blocks, cost };

    let mut top: f64 = 0.0;
    for w in &weighted {
        top = top.max(HermitianOperator::from_hermitian_part(w).eigvalsh()?.last().copied().unwrap_or(0.0));
    }
    let mut z0 = vec![0.0; m];
    z0[..n].iter_mut().for_each(|c| *c = top + 1.0);
    let opts = BarrierOptions { gap_tol: 0.1 * tol, max_iter };
    let state = program.minimize(z0, &opts, &|_| false)?;

    let k = shape.block_from_coords(0, &state.z);
    let value = k.trace().re;
    // Dual variables of the barrier problem, renormalized into an exact POVM.
    let raw: Vec<ComplexMatrix> = state.inverses.iter().map(|s| s.scale_real(1.0 / state.eta)).collect();
    let mut total = ComplexMatrix::zeros(n, n);
    for r in &raw {
        total += r;
    }
    let fix = psd_inv_sqrt(&HermitianOperator::from_hermitian_part(&total), 1e-300)?;
    let povm: Vec<HermitianOperator> =
        raw.iter().map(|r| HermitianOperator::from_hermitian_part(&r.conjugate_by(fix.matrix()))).collect();
    let primal_value: f64 = povm.iter().zip(&weighted).map(|(p, w)| p.matrix().trace_product(w).re).sum();
    let gap = value - primal_value;
    let kh = HermitianOperator::from_hermitian_part(&k);
    let residual = weighted
        .iter()
        .map(|w| HermitianOperator::from_hermitian_part(&(&k - w)).min_eigenvalue().map(|v| (-v).max(0.0)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let status = if state.converged && gap.abs() <= tol { SdpStatus::Optimal } else { SdpStatus::Undecided };
    Ok(MinTraceResult {
        sdp: SdpResult {
            status,
            solution: Some(kh.clone()),
            blocks: vec![kh],
            residual,
            gap: Some(gap),
            iterations: state.iterations,
        },
        value,
        primal_value,
        povm,
    })
}

/// Smallest eigenvalue of each diagonal block of `x` for a problem shape.
pub fn block_min_eigenvalues(problem: &AffinePsdProblem, x: &HermitianOperator) -> Result<Vec<f64>> {
    (0..problem.blocks.len())
        .map(|b| {
            let (o, n) = (problem.offsets[b], problem.blocks[b]);
            let sub = HermitianOperator::from_hermitian_part(&x.matrix().submatrix(o, o, n, n));
            Ok(eig_hermitian(&sub)?.0.first().copied().unwrap_or(0.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ONE;

    #[test]
    fn unit_trace_is_feasible() {
        let mut p = AffinePsdProblem::new(2);
        p.add_trace_constraint(&HermitianOperator::identity(2), 1.0).unwrap();
        let r = solve_feasibility(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.status, SdpStatus::Feasible);
        let x = r.solution.unwrap();
        let (min, res) = p.check_solution(&x).unwrap();
        assert!(min >= -1e-12 && res <= 1e-9, "{min} {res}");
        assert!((x.trace() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_trace_is_infeasible() {
        let mut p = AffinePsdProblem::new(2);
        p.add_trace_constraint(&HermitianOperator::identity(2), -1.0).unwrap();
        let r = solve_feasibility(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.status, SdpStatus::Infeasible);
        assert!(r.solution.is_none());
        assert!(r.residual > 0.4, "{}", r.residual);
    }

    #[test]
    fn pinned_non_psd_matrix_is_infeasible() {
        let mut j = ComplexMatrix::from_diag(&[1.0, 0.0, 0.0, 1.0]);
        j[(0, 3)] = C64::new(1.6, 0.0);
        j[(3, 0)] = C64::new(1.6, 0.0);
        let mut p = AffinePsdProblem::new(4);
        for r in 0..4 {
            for c in 0..4 {
                p.add_complex_constraint(&[(r, c, ONE)], j[(r, c)]).unwrap();
            }
        }
        let r = solve_feasibility(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.status, SdpStatus::Infeasible);
        assert!(r.residual >= 0.6 - 1e-9);
    }

    #[test]
    fn boundary_point_is_found() {
        // X[0,0] = 1, X[0,1] = 1, X[1,1] = 1 forces the rank-one matrix [[1,1],[1,1]];
        // with a free third block dimension the feasible set has empty interior.
        let mut p = AffinePsdProblem::new(3);
        p.add_complex_constraint(&[(0, 0, ONE)], ONE).unwrap();
        p.add_complex_constraint(&[(1, 1, ONE)], ONE).unwrap();
        p.add_complex_constraint(&[(0, 1, ONE)], ONE).unwrap();
        let r = solve_feasibility(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.status, SdpStatus::Feasible);
        let (min, res) = p.check_solution(r.solution.as_ref().unwrap()).unwrap();
        assert!(min >= -1e-12 && res <= 1e-7, "{min} {res}");
    }

    #[test]
    fn block_structure_is_respected() {
        let mut p = AffinePsdProblem::block_diagonal(&[1, 2]);
        // Block 0 scalar = 0.5; trace of block 1 = 2.
        p.add_complex_constraint(&[(0, 0, ONE)], C64::new(0.5, 0.0)).unwrap();
        p.add_complex_constraint(&[(1, 1, ONE), (2, 2, ONE)], C64::new(2.0, 0.0)).unwrap();
        let r = solve_feasibility(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.status, SdpStatus::Feasible);
        assert_eq!(r.blocks.len(), 2);
        assert!((r.blocks[0].trace() - 0.5).abs() < 1e-9);
        assert!((r.blocks[1].trace() - 2.0).abs() < 1e-9);
        let x = r.solution.unwrap();
        assert_eq!(x.matrix()[(0, 1)], ZERO);
    }

    #[test]
    fn minimize_simple_objective() {
        // min X[0,0] subject to Tr X = 1 on 2x2 -> 0.
        let mut p = AffinePsdProblem::new(2);
        p.add_trace_constraint(&HermitianOperator::identity(2), 1.0).unwrap();
        p.set_objective(&HermitianOperator::from_diag(&[1.0, 0.0])).unwrap();
        assert!(solve_feasibility(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).is_err());
        let r = solve_minimize(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.status, SdpStatus::Optimal);
        assert!(r.solution.unwrap().matrix()[(0, 0)].re < 1e-6);
    }

    #[test]
    fn min_trace_examples() {
        let rho = DensityMatrix::basis(2, 0);
        let r = solve_min_trace_dominating(&[(1.0, rho.clone())], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.value, 1.0);

        let r = solve_min_trace_dominating(&[(0.5, rho.clone()), (0.5, DensityMatrix::basis(2, 1))], DEFAULT_TOL, DEFAULT_MAX_ITER)
            .unwrap();
        assert_eq!(r.sdp.status, SdpStatus::Optimal);
        assert!((r.value - 1.0).abs() < 1e-7);

        let s = SQRT_HALF;
        let plus = DensityMatrix::pure(&[C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap();
        let r = solve_min_trace_dominating(&[(0.5, rho), (0.5, plus)], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.sdp.status, SdpStatus::Optimal);
        assert!((r.value - (0.5 + 2f64.sqrt() / 4.0)).abs() < 1e-7, "{}", r.value);
        assert!(r.primal_value <= r.value + 1e-12);
        let mut sum = ComplexMatrix::zeros(2, 2);
        for e in &r.povm {
            assert!(e.min_eigenvalue().unwrap() >= -1e-12);
            sum += e.matrix();
        }
        assert!(sum.distance(&ComplexMatrix::identity(2)) < 1e-10);
    }

    #[test]
    fn coordinate_roundtrip() {
        let p = AffinePsdProblem::block_diagonal(&[3, 2]);
        let a = ComplexMatrix::from_fn(3, 3, |r, c| C64::new((r + c) as f64, r as f64 - c as f64));
        let b = ComplexMatrix::from_fn(2, 2, |r, c| C64::new((r * c) as f64 + 1.0, 0.0));
        let y = p.coords_from_blocks(&[a.clone(), b.clone()]);
        assert!(p.block_from_coords(0, &y).distance(&a) < 1e-14);
        assert!(p.block_from_coords(1, &y).distance(&b) < 1e-14);
    }

    #[test]
    fn malformed_constraints_rejected() {
        let mut p = AffinePsdProblem::new(2);
        assert!(p.add_trace_constraint(&HermitianOperator::identity(3), 1.0).is_err());
        assert!(p.add_complex_constraint(&[(2, 0, ONE)], ONE).is_err());
        assert!(p.add_complex_constraint(&[(0, 0, ONE)], C64::new(f64::NAN, 0.0)).is_err());
    }
}
