//! Step propagators `N^{k} = C^{k} ∘ N^{k-1}`, non-divisibility certificates and
//! backflow witnesses.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    classical_part, compose, embed_stochastic, tensor_with_identity, validate_cptp, DensityMatrix, QuantumChannel,
    StochasticMatrix,
};
use crate::discrimination::{bell_basis, helstrom_operators, pguess, Ensemble};
use crate::error::{Error, Result};
use crate::lp::{certificate_values, feasible_point, LpOutcome};
use crate::mapping::DynamicalMapping;
use crate::matrix::{
    eig_hermitian, kron, partial_trace, psd_inv_sqrt, singular_values, ComplexMatrix, Keep, HermitianOperator, C64, ONE,
    ZERO,
};
use crate::random::{complex_gaussian, seeded};
use crate::sdp::{solve_feasibility, AffinePsdProblem, SdpStatus, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Route A applies below this transfer-matrix condition number.
pub const COND_LIMIT: f64 = 1e10;
/// Recomposition tolerance for returned propagators (Choi Frobenius norm).
pub const RECOMPOSE_TOL: f64 = 1e-6;
/// Candidate Choi negativity accepted as rounding noise on route A.
pub const EXACT_ACCEPT: f64 = 1e-8;
/// Candidate Choi negativity that certifies a non-divisible step on route A.
pub const EXACT_REJECT: f64 = 1e-7;
/// Smallest guessing-probability increase reported as a witness.
pub const WITNESS_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    DivisibleStep,
    NotDivisibleStep,
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Divisible,
    NotDivisible,
    Undecided,
}

/// Which method to use for a step propagator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Exact inverse when the earlier channel is well conditioned, SDP otherwise.
    #[default]
    Auto,
    Exact,
    Sdp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteUsed {
    Exact,
    Sdp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorCertificate {
    pub status: StepStatus,
    pub propagator: Option<QuantumChannel>,
    /// Most negative eigenvalue magnitude of the exact candidate's Choi matrix.
    pub negativity: Option<f64>,
    /// Recomposition residual when a propagator is returned; otherwise the
    /// solver's infeasibility measure.
    pub residual: f64,
    pub route: RouteUsed,
    pub condition_number: Option<f64>,
}

fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn from_nalgebra(m: &DMatrix<C64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

/// 2-norm condition number of a square complex matrix.
pub fn condition_number(m: &ComplexMatrix) -> f64 {
    let Ok(sv) = singular_values(m) else { return f64::INFINITY };
    let max = sv.first().copied().unwrap_or(0.0);
    let min = sv.last().copied().unwrap_or(0.0);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Unique linear map `L` with `L ∘ N_i = N_j` for invertible `N_i`, as a
/// (possibly non-CP) channel object.
pub fn exact_candidate(n_i: &QuantumChannel, n_j: &QuantumChannel) -> Result<QuantumChannel> {
    let ti = to_nalgebra(&n_i.transfer_matrix());
    let inv = ti.try_inverse().ok_or_else(|| Error::InvalidChannel("transfer matrix is singular".into()))?;
    let l = from_nalgebra(&(to_nalgebra(&n_j.transfer_matrix()) * inv));
    QuantumChannel::from_transfer_matrix(n_i.dim_out(), n_j.dim_out(), &l)
}

fn check_pair(n_i: &QuantumChannel, n_j: &QuantumChannel) -> Result<()> {
    if n_i.dim_in() != n_j.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "channels have input dimensions {} and {}",
            n_i.dim_in(),
            n_j.dim_in()
        )));
    }
    Ok(())
}

pub fn find_step_propagator(n_i: &QuantumChannel, n_j: &QuantumChannel) -> Result<PropagatorCertificate> {
    find_step_propagator_with(n_i, n_j, Route::Auto, DEFAULT_TOL)
}

/// Searches for a CPTP `L` with `L ∘ N_i = N_j`.
pub fn find_step_propagator_with(
    n_i: &QuantumChannel,
    n_j: &QuantumChannel,
    route: Route,
    tol: f64,
) -> Result<PropagatorCertificate> {
    check_pair(n_i, n_j)?;
    let square = n_i.dim_in() == n_i.dim_out();
    let cond = if square { condition_number(&n_i.transfer_matrix()) } else { f64::INFINITY };
    match route {
        Route::Exact => {
            if cond >= COND_LIMIT {
                return Err(Error::InvalidChannel(format!(
                    "exact route needs an invertible earlier channel (condition number {cond:.3e})"
                )));
            }
            exact_route(n_i, n_j, cond)
        }
        Route::Auto if cond < COND_LIMIT => exact_route(n_i, n_j, cond),
        _ => {
            let mut cert = sdp_route(n_i, n_j, tol)?;
            cert.condition_number = cond.is_finite().then_some(cond);
            if cond < COND_LIMIT {
                cert.negativity = Some(negativity(&exact_candidate(n_i, n_j)?)?);
            }
            Ok(cert)
        }
    }
}

fn negativity(candidate: &QuantumChannel) -> Result<f64> {
    Ok((-candidate.choi().min_eigenvalue()?).max(0.0))
}

fn exact_route(n_i: &QuantumChannel, n_j: &QuantumChannel, cond: f64) -> Result<PropagatorCertificate> {
    let candidate = exact_candidate(n_i, n_j)?;
    let report = validate_cptp(&candidate)?;
    let neg = report.cp_residual;
    let residual = compose(&candidate, n_i)?.choi_distance(n_j);
    let status = if neg <= EXACT_ACCEPT && report.tp_residual <= EXACT_ACCEPT {
        StepStatus::DivisibleStep
    } else if neg > EXACT_REJECT || report.tp_residual > EXACT_REJECT {
        StepStatus::NotDivisibleStep
    } else {
        StepStatus::Undecided
    };
    let propagator = (status == StepStatus::DivisibleStep).then_some(candidate);
    Ok(PropagatorCertificate {
        status,
        propagator,
        negativity: Some(neg),
        residual,
        route: RouteUsed::Exact,
        condition_number: Some(cond),
    })
}

/// Feasibility of `J_L ⪰ 0`, `Tr_out J_L = 1`, `Choi(L ∘ N_i) = Choi(N_j)`.
fn sdp_route(n_i: &QuantumChannel, n_j: &QuantumChannel, tol: f64) -> Result<PropagatorCertificate> {
    let din = n_i.dim_in();
    let m = n_i.dim_out();
    let dout = n_j.dim_out();
    let mut problem = AffinePsdProblem::new(m * dout);
    // Trace preservation.
    for a in 0..m {
        for b in a..m {
            let terms: Vec<(usize, usize, C64)> = (0..dout).map(|r| (a * dout + r, b * dout + r, ONE)).collect();
            let target = if a == b { ONE } else { ZERO };
            if a == b {
                problem.add_real_part_constraint(&terms, target.re)?;
            } else {
                problem.add_complex_constraint(&terms, target)?;
            }
        }
    }
    // Σ_{kl} N_i(|a><b|)_{kl} J_L[(k,r),(l,s)] = J_j[(a,r),(b,s)] for (a,r) <= (b,s).
    let images: Vec<ComplexMatrix> = (0..din * din).map(|ab| n_i.image_of_unit(ab / din, ab % din)).collect();
    let jj = n_j.choi().matrix();
    for row in 0..din * dout {
        for col in row..din * dout {
            let (a, r) = (row / dout, row % dout);
            let (b, s) = (col / dout, col % dout);
            let img = &images[a * din + b];
            let mut terms = Vec::new();
            for k in 0..m {
                for l in 0..m {
                    let c = img[(k, l)];
                    if c != ZERO {
                        terms.push((k * dout + r, l * dout + s, c));
                    }
                }
            }
            let value = jj[(row, col)];
            if row == col {
                problem.add_real_part_constraint(&terms, value.re)?;
            } else {
                problem.add_complex_constraint(&terms, value)?;
            }
        }
    }
    let result = solve_feasibility(&problem, tol, DEFAULT_MAX_ITER)?;
    match result.status {
        SdpStatus::Feasible | SdpStatus::Optimal => {
            let choi = result.solution.expect("feasible result carries a solution");
            let candidate = restore_trace_preservation(&QuantumChannel::from_choi(m, dout, choi)?)?;
            let residual = compose(&candidate, n_i)?.choi_distance(n_j);
            let ok = residual <= RECOMPOSE_TOL && validate_cptp(&candidate)?.tp_residual <= RECOMPOSE_TOL;
            Ok(PropagatorCertificate {
                status: if ok { StepStatus::DivisibleStep } else { StepStatus::Undecided },
                propagator: ok.then_some(candidate),
                negativity: None,
                residual,
                route: RouteUsed::Sdp,
                condition_number: None,
            })
        }
        SdpStatus::Infeasible => Ok(PropagatorCertificate {
            status: StepStatus::NotDivisibleStep,
            propagator: None,
            negativity: None,
            residual: result.residual,
            route: RouteUsed::Sdp,
            condition_number: None,
        }),
        SdpStatus::Undecided => Ok(PropagatorCertificate {
            status: StepStatus::Undecided,
            propagator: None,
            negativity: None,
            residual: result.residual,
            route: RouteUsed::Sdp,
            condition_number: None,
        }),
    }
}

/// `(S^{-1/2} ⊗ 1) J (S^{-1/2} ⊗ 1)` with `S = Tr_out J`: removes the solver's
/// small trace-preservation error while keeping `J ⪰ 0`.
fn restore_trace_preservation(n: &QuantumChannel) -> Result<QuantumChannel> {
    let (din, dout) = (n.dim_in(), n.dim_out());
    let s = HermitianOperator::from_hermitian_part(&partial_trace(n.choi().matrix(), [din, dout], Keep::First)?);
    if s.min_eigenvalue()? < 0.5 {
        return Ok(n.clone());
    }
    let a = kron(psd_inv_sqrt(&s, 0.0)?.matrix(), &ComplexMatrix::identity(dout));
    QuantumChannel::from_choi(din, dout, HermitianOperator::from_hermitian_part(&n.choi().matrix().conjugate_by(&a)))
}

/// Step certificates of a whole mapping.
#[derive(Clone, Debug)]
pub struct DivisibilityReport {
    /// `steps[k - 1]` certifies `N^{k-1} -> N^k`.
    pub steps: Vec<PropagatorCertificate>,
    pub verdict: Verdict,
}

impl DivisibilityReport {
    /// `L(j, i) = C^j ∘ ... ∘ C^{i+1}`; requires every step in between to be divisible.
    pub fn composite(&self, i: usize, j: usize, system_dim: usize) -> Result<QuantumChannel> {
        if i > j || j > self.steps.len() {
            return Err(Error::InvalidParameter(format!("composite ({j}, {i}) outside 0..={}", self.steps.len())));
        }
        let mut acc = QuantumChannel::identity(system_dim);
        for k in i + 1..=j {
            let c = self.steps[k - 1].propagator.as_ref().ok_or_else(|| {
                Error::InvalidParameter(format!("step {k} has no propagator"))
            })?;
            acc = compose(c, &acc)?;
        }
        Ok(acc)
    }
}

pub fn overall_verdict(steps: &[PropagatorCertificate]) -> Verdict {
    if steps.iter().any(|c| c.status == StepStatus::NotDivisibleStep) {
        Verdict::NotDivisible
    } else if steps.iter().all(|c| c.status == StepStatus::DivisibleStep) {
        Verdict::Divisible
    } else {
        Verdict::Undecided
    }
}

pub fn check_divisible(mapping: &DynamicalMapping) -> Result<DivisibilityReport> {
    check_divisible_with(mapping, Route::Auto, DEFAULT_TOL)
}

pub fn check_divisible_with(mapping: &DynamicalMapping, route: Route, tol: f64) -> Result<DivisibilityReport> {
    let steps = mapping
        .channels()
        .windows(2)
        .map(|w| find_step_propagator_with(&w[0], &w[1], route, tol))
        .collect::<Result<Vec<_>>>()?;
    let verdict = overall_verdict(&steps);
    Ok(DivisibilityReport { steps, verdict })
}

/// Classical step: column-stochastic `T` with `T P_i = P_j`, or a Farkas certificate.
#[derive(Clone, Debug, PartialEq)]
pub enum ClassicalStep {
    Divisible { t: StochasticMatrix, residual: f64 },
    /// `y` over the constraint rows (column sums first, then `(r, c)` of `T P_i = P_j`)
    /// with `yᵀA ≤ max_lhs` and `yᵀb = rhs > 0`.
    NotDivisible { certificate: Vec<f64>, max_lhs: f64, rhs: f64 },
}

pub fn classical_step_propagator(p_i: &StochasticMatrix, p_j: &StochasticMatrix) -> Result<ClassicalStep> {
    let d = p_i.dim();
    if p_j.dim() != d {
        return Err(Error::DimensionMismatch("stochastic matrices differ in dimension".into()));
    }
    // Unknown t(r|s) at index r * d + s.
    let mut a = Vec::with_capacity(d + d * d);
    let mut b = Vec::with_capacity(d + d * d);
    for s in 0..d {
        let mut row = vec![0.0; d * d];
        for r in 0..d {
            row[r * d + s] = 1.0;
        }
        a.push(row);
        b.push(1.0);
    }
    for r in 0..d {
        for c in 0..d {
            let mut row = vec![0.0; d * d];
            for s in 0..d {
                row[r * d + s] = p_i.get(s, c);
            }
            a.push(row);
            b.push(p_j.get(r, c));
        }
    }
    match feasible_point(&a, &b) {
        LpOutcome::Feasible(x) => {
            let t = StochasticMatrix::new(d, x)
                .map_err(|_| Error::Internal("simplex returned a non-stochastic point".into()))?;
            let residual = t.matmul(p_i).max_abs_diff(p_j);
            Ok(ClassicalStep::Divisible { t, residual })
        }
        LpOutcome::Infeasible(y) => {
            let (max_lhs, rhs) = certificate_values(&a, &b, &y);
            if !(max_lhs <= 1e-9 && rhs > 1e-9) {
                return Err(Error::Internal(format!(
                    "Farkas certificate failed its check (max lhs {max_lhs:.3e}, rhs {rhs:.3e})"
                )));
            }
            Ok(ClassicalStep::NotDivisible { certificate: y, max_lhs, rhs })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessMode {
    Entangled,
    Separable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessOptions {
    pub mode: WitnessMode,
    /// Number of ensemble evaluations in the local search.
    pub budget: usize,
    pub seed: u64,
    /// Number of equiprobable states, 2 to 4.
    pub ensemble_size: usize,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        Self { mode: WitnessMode::Entangled, budget: 2000, seed: 0, ensemble_size: 2 }
    }
}

#[derive(Clone, Debug)]
pub struct WitnessReport {
    /// The step `k` compares `N^{k-1}` with `N^k`.
    pub step: usize,
    /// Ensemble on `ancilla ⊗ system`.
    pub ensemble: Ensemble,
    pub pguess_before: f64,
    pub pguess_after: f64,
    pub delta: f64,
    pub mode: WitnessMode,
    pub seed: u64,
    pub evaluations: usize,
}

/// Pure-state ensemble candidate: state vectors on `ancilla ⊗ system`, or
/// `(ancilla, system)` factors in separable mode.
#[derive(Clone, Debug)]
enum Candidate {
    Joint(Vec<Vec<C64>>),
    Product(Vec<(Vec<C64>, Vec<C64>)>),
}

fn normalize(v: &mut [C64]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
}

fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

impl Candidate {
    fn vectors(&self) -> Vec<Vec<C64>> {
        match self {
            Candidate::Joint(v) => v.clone(),
            Candidate::Product(v) => v.iter().map(|(a, s)| kron_vec(a, s)).collect(),
        }
    }

    fn perturbed<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Candidate {
        let jitter = |v: &[C64], rng: &mut R| {
            let mut w: Vec<C64> = v.iter().map(|z| z + complex_gaussian(rng) * sigma).collect();
            normalize(&mut w);
            w
        };
        match self {
            Candidate::Joint(vs) => Candidate::Joint(vs.iter().map(|v| jitter(v, rng)).collect()),
            Candidate::Product(vs) => Candidate::Product(vs.iter().map(|(a, s)| (jitter(a, rng), jitter(s, rng))).collect()),
        }
    }
}

struct WitnessEvaluator {
    before: QuantumChannel,
    after: QuantumChannel,
}

impl WitnessEvaluator {
    fn pguess_of(&self, n: &QuantumChannel, vectors: &[Vec<C64>]) -> Result<f64> {
        let outs: Vec<ComplexMatrix> =
            vectors.iter().map(|v| n.apply_operator(&ComplexMatrix::outer(v))).collect::<Result<_>>()?;
        if outs.len() == 2 {
            return helstrom_operators(0.5, &outs[0], &outs[1]);
        }
        let p = 1.0 / outs.len() as f64;
        let states = outs
            .into_iter()
            .map(|m| Ok((p, DensityMatrix::new(HermitianOperator::from_hermitian_part(&m))?)))
            .collect::<Result<Vec<_>>>()?;
        pguess(&Ensemble::new(states)?)
    }

    fn evaluate(&self, c: &Candidate) -> Result<(f64, f64)> {
        let v = c.vectors();
        Ok((self.pguess_of(&self.before, &v)?, self.pguess_of(&self.after, &v)?))
    }
}

fn basis_vector(d: usize, k: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d];
    v[k] = ONE;
    v
}

fn fourier_vector(d: usize, k: usize) -> Vec<C64> {
    let s = 1.0 / (d as f64).sqrt();
    (0..d).map(|j| C64::from_polar(s, 2.0 * std::f64::consts::PI * ((j * k) % d) as f64 / d as f64)).collect()
}

/// Candidate pairs that tend to expose backflow: generalized Bell pairs,
/// eigenvector pairs of the exact candidate's Choi matrix, product basis pairs.
fn seed_candidates(before: &QuantumChannel, after: &QuantumChannel, mode: WitnessMode, size: usize) -> Result<Vec<Candidate>> {
    let d = before.dim_in();
    let mut seeds = Vec::new();
    let pick = |pool: &[Vec<C64>], seeds: &mut Vec<Candidate>| {
        for i in 0..pool.len() {
            for j in i + 1..pool.len() {
                let mut set = vec![pool[i].clone(), pool[j].clone()];
                let mut k = 0;
                while set.len() < size && k < pool.len() {
                    if k != i && k != j {
                        set.push(pool[k].clone());
                    }
                    k += 1;
                }
                seeds.push(Candidate::Joint(set));
            }
        }
    };
    match mode {
        WitnessMode::Entangled => {
            let bell = bell_basis(d);
            let pool: Vec<Vec<C64>> = (0..d * d).map(|c| bell.column(c)).collect();
            pick(&pool, &mut seeds);
            if d == before.dim_out() && condition_number(&before.transfer_matrix()) < COND_LIMIT {
                let candidate = exact_candidate(before, after)?;
                let (values, vectors) = eig_hermitian(candidate.choi())?;
                if values.first().copied().unwrap_or(0.0) < 0.0 {
                    // Negative direction first, paired with every other eigenvector.
                    let v_min = vectors.column(0);
                    for k in (1..d * d).rev() {
                        let mut set = vec![v_min.clone(), vectors.column(k)];
                        let mut extra = 1;
                        while set.len() < size && extra < d * d {
                            if extra != k {
                                set.push(vectors.column(extra));
                            }
                            extra += 1;
                        }
                        seeds.push(Candidate::Joint(set));
                    }
                }
            }
            let basis: Vec<Vec<C64>> = (0..d * d).map(|k| basis_vector(d * d, k)).collect();
            pick(&basis, &mut seeds);
        }
        WitnessMode::Separable => {
            let mut pool: Vec<Vec<C64>> = (0..d).map(|k| basis_vector(d, k)).collect();
            pool.extend((0..d).map(|k| fourier_vector(d, k)));
            let anc = basis_vector(d, 0);
            for i in 0..pool.len() {
                for j in i + 1..pool.len() {
                    let mut set = vec![(anc.clone(), pool[i].clone()), (anc.clone(), pool[j].clone())];
                    let mut k = 0;
                    while set.len() < size && k < pool.len() {
                        if k != i && k != j {
                            set.push((anc.clone(), pool[k].clone()));
                        }
                        k += 1;
                    }
                    seeds.push(Candidate::Product(set));
                }
            }
        }
    }
    Ok(seeds)
}

/// Seeded local search for an ensemble whose guessing probability increases
/// from `N^{step-1}` to `N^step`. `None` means no witness was found within
/// the budget, which is not a proof of divisibility.
pub fn witness_search(mapping: &DynamicalMapping, step: usize, opts: &WitnessOptions) -> Result<Option<WitnessReport>> {
    if step == 0 || step > mapping.steps() {
        return Err(Error::InvalidParameter(format!("step {step} outside 1..={}", mapping.steps())));
    }
    if !(2..=4).contains(&opts.ensemble_size) {
        return Err(Error::InvalidParameter("witness ensembles have 2 to 4 states".into()));
    }
    let d = mapping.system_dim();
    let (b, a) = (mapping.channel(step - 1), mapping.channel(step));
    let eval = WitnessEvaluator { before: tensor_with_identity(b, d)?, after: tensor_with_identity(a, d)? };
    let seeds = seed_candidates(b, a, opts.mode, opts.ensemble_size)?;

    let mut evaluations = 0;
    let mut scored: Vec<(f64, f64, f64, Candidate)> = Vec::new();
    for s in seeds {
        let (pb, pa) = eval.evaluate(&s)?;
        evaluations += 1;
        scored.push((pa - pb, pb, pa, s));
    }
    scored.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut rng = seeded(opts.seed);
    let starts = scored.len().min(4);
    let mut best = scored.first().cloned();
    let remaining = opts.budget.saturating_sub(evaluations);
    let per_start = remaining.checked_div(starts).unwrap_or(0);
    for (delta0, pb0, pa0, start) in scored.into_iter().take(starts) {
        let (mut cur, mut cur_delta, mut cur_pb, mut cur_pa) = (start, delta0, pb0, pa0);
        let mut sigma = 0.1;
        for _ in 0..per_start {
            let trial = cur.perturbed(sigma, &mut rng);
            let (pb, pa) = eval.evaluate(&trial)?;
            evaluations += 1;
            if pa - pb > cur_delta {
                cur = trial;
                cur_delta = pa - pb;
                cur_pb = pb;
                cur_pa = pa;
                sigma = (sigma * 1.5).min(0.5);
            } else {
                sigma = (sigma * 0.9).max(1e-4);
            }
        }
        if best.as_ref().is_none_or(|b| cur_delta > b.0) {
            best = Some((cur_delta, cur_pb, cur_pa, cur));
        }
    }

    let Some((delta, pb, pa, cand)) = best else { return Ok(None) };
    if delta <= WITNESS_THRESHOLD {
        return Ok(None);
    }
    let states = cand.vectors().iter().map(|v| DensityMatrix::pure(v)).collect::<Result<Vec<_>>>()?;
    let ensemble = Ensemble::uniform(states)?;
    Ok(Some(WitnessReport {
        step,
        ensemble,
        pguess_before: pb,
        pguess_after: pa,
        delta,
        mode: opts.mode,
        seed: opts.seed,
        evaluations,
    }))
}

#[derive(Clone, Debug)]
pub struct ReversibilityReport {
    pub reversible: bool,
    pub forward: Vec<PropagatorCertificate>,
    pub backward: Vec<PropagatorCertificate>,
    /// Whether each `N^i` has Choi rank one.
    pub unitary: Vec<bool>,
}

/// Reversible when every step has CPTP propagators in both directions.
pub fn detect_reversible(mapping: &DynamicalMapping) -> Result<ReversibilityReport> {
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    for w in mapping.channels().windows(2) {
        forward.push(find_step_propagator(&w[0], &w[1])?);
        backward.push(find_step_propagator(&w[1], &w[0])?);
    }
    let reversible = forward.iter().chain(&backward).all(|c| c.status == StepStatus::DivisibleStep);
    let unitary = mapping.channels().iter().map(|n| Ok(n.kraus_rank()? == 1)).collect::<Result<_>>()?;
    Ok(ReversibilityReport { reversible, forward, backward, unitary })
}

/// Classical view of a mapping whose later channels all have diagonal Choi
/// matrices. `N^0 = id` is read as the identity stochastic matrix.
pub fn classical_chain_of(mapping: &DynamicalMapping) -> Option<Vec<StochasticMatrix>> {
    let mut chain = vec![StochasticMatrix::identity(mapping.system_dim())];
    for n in &mapping.channels()[1..] {
        chain.push(classical_part(n)?);
    }
    Some(chain)
}

/// Divisibility of an embedded classical chain through the LP route.
pub fn check_classical(chain: &[StochasticMatrix]) -> Result<Vec<ClassicalStep>> {
    chain.windows(2).map(|w| classical_step_propagator(&w[0], &w[1])).collect()
}

/// The quantum embedding of a classical step propagator.
pub fn embedded_propagator(step: &ClassicalStep) -> Option<QuantumChannel> {
    match step {
        ClassicalStep::Divisible { t, .. } => Some(embed_stochastic(t)),
        ClassicalStep::NotDivisible { .. } => None,
    }
}
