//! Quantum channels in Choi form.
//!
//! Convention: `J(N) = Σ_ij |i><j| ⊗ N(|i><j|)` with the input factor first
//! and the unnormalized `Ω = Σ_ij |ii><jj|`. Entry `J[(i, r), (j, s)]` is
//! `<r| N(|i><j|) |s>`, stored at row `i * dim_out + r`, column `j * dim_out + s`.

use crate::error::{Error, Result};
use crate::matrix::{eig_hermitian, ComplexMatrix, HermitianOperator, Keep, C64, ONE, ZERO};

/// Tolerance for the CP and TP residual checks (relative to the Choi norm).
pub const CPTP_TOL: f64 = 1e-9;
/// Eigenvalue cutoff used to decide Kraus rank.
pub const KRAUS_CUTOFF: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumChannel {
    dim_in: usize,
    dim_out: usize,
    choi: HermitianOperator,
}

impl QuantumChannel {
    /// Wraps a Choi matrix after a shape check. The map is not required to be
    /// CPTP; candidate propagators pass through here before validation.
    pub fn from_choi(dim_in: usize, dim_out: usize, choi: HermitianOperator) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::InvalidChannel("dimensions must be positive".into()));
        }
        if choi.dim() != dim_in * dim_out {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix of dimension {} for a {dim_in} -> {dim_out} channel",
                choi.dim()
            )));
        }
        Ok(Self { dim_in, dim_out, choi })
    }

    /// Like [`QuantumChannel::from_choi`] but rejects maps that fail [`validate_cptp`].
    pub fn from_choi_checked(dim_in: usize, dim_out: usize, choi: HermitianOperator) -> Result<Self> {
        let n = Self::from_choi(dim_in, dim_out, choi)?;
        let report = validate_cptp(&n)?;
        if !report.ok {
            return Err(Error::InvalidChannel(format!(
                "cp residual {:.3e}, tp residual {:.3e}",
                report.cp_residual, report.tp_residual
            )));
        }
        Ok(n)
    }

    pub fn identity(d: usize) -> Self {
        let choi = ComplexMatrix::from_fn(d * d, d * d, |r, c| {
            let (i, rr) = (r / d, r % d);
            let (j, s) = (c / d, c % d);
            if i == rr && j == s { ONE } else { ZERO }
        });
        Self { dim_in: d, dim_out: d, choi: HermitianOperator::from_hermitian_part(&choi) }
    }

    /// `ρ -> U ρ U^dagger`.
    pub fn unitary(u: &ComplexMatrix) -> Result<Self> {
        choi_from_kraus(std::slice::from_ref(u))
    }

    /// Qubit dephasing that multiplies coherences by `gamma`.
    pub fn dephasing(gamma: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("dephasing factor {gamma} outside [-1, 1]")));
        }
        Ok(Self::dephasing_unchecked(gamma))
    }

    /// The linear map scaling qubit coherences by any real factor; CP only for `|gamma| <= 1`.
    pub fn dephasing_unchecked(gamma: f64) -> Self {
        let mut j = ComplexMatrix::from_diag(&[1.0, 0.0, 0.0, 1.0]);
        j[(0, 3)] = C64::new(gamma, 0.0);
        j[(3, 0)] = C64::new(gamma, 0.0);
        Self { dim_in: 2, dim_out: 2, choi: HermitianOperator::from_hermitian_part(&j) }
    }

    /// Qubit amplitude damping with survival probability `eta` of the excited state.
    pub fn amplitude_damping(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("survival probability {eta} outside [0, 1]")));
        }
        let k0 = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, eta.sqrt()]]);
        let k1 = ComplexMatrix::from_real_rows(&[&[0.0, (1.0 - eta).sqrt()], &[0.0, 0.0]]);
        choi_from_kraus(&[k0, k1])
    }

    /// `D^eps(ρ) = eps ρ + (1 - eps) Tr[ρ] 1/d`.
    pub fn depolarizing(d: usize, eps: f64) -> Result<Self> {
        let lower = -1.0 / (d as f64 * d as f64 - 1.0);
        if !(lower..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!("depolarizing parameter {eps} outside [{lower}, 1]")));
        }
        let id = Self::identity(d);
        let choi = ComplexMatrix::from_fn(d * d, d * d, |r, c| {
            let mixed = if r == c { (1.0 - eps) / d as f64 } else { 0.0 };
            id.choi.matrix()[(r, c)] * eps + C64::new(mixed, 0.0)
        });
        Ok(Self { dim_in: d, dim_out: d, choi: HermitianOperator::from_hermitian_part(&choi) })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn choi(&self) -> &HermitianOperator {
        &self.choi
    }

    /// `N(|i><j|)`.
    pub fn image_of_unit(&self, i: usize, j: usize) -> ComplexMatrix {
        let d = self.dim_out;
        let j_ = self.choi.matrix();
        ComplexMatrix::from_fn(d, d, |r, s| j_[(i * d + r, j * d + s)])
    }

    /// Applies the linear map to an arbitrary (not necessarily Hermitian) operator.
    pub fn apply_operator(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if !x.is_square() || x.rows() != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} operator into a channel with input dimension {}",
                x.rows(),
                x.cols(),
                self.dim_in
            )));
        }
        let (din, dout) = (self.dim_in, self.dim_out);
        let j = self.choi.matrix();
        let mut out = ComplexMatrix::zeros(dout, dout);
        for i in 0..din {
            for k in 0..din {
                let a = x[(i, k)];
                if a == ZERO {
                    continue;
                }
                for r in 0..dout {
                    for s in 0..dout {
                        out[(r, s)] += a * j[(i * dout + r, k * dout + s)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Heisenberg-picture action: `Tr[N(ρ) Y] = Tr[ρ N^dagger(Y)]`.
    pub fn adjoint_apply(&self, y: &ComplexMatrix) -> Result<ComplexMatrix> {
        if !y.is_square() || y.rows() != self.dim_out {
            return Err(Error::DimensionMismatch("adjoint map applied to operator of wrong size".into()));
        }
        let (din, dout) = (self.dim_in, self.dim_out);
        let j = self.choi.matrix();
        // N^dagger(Y)_{ji} = Tr[N(|i><j|) Y] = Σ_rs J[(i,r),(j,s)] Y_{sr}
        Ok(ComplexMatrix::from_fn(din, din, |jj, ii| {
            let mut acc = ZERO;
            for r in 0..dout {
                for s in 0..dout {
                    acc += j[(ii * dout + r, jj * dout + s)] * y[(s, r)];
                }
            }
            acc
        }))
    }

    /// The `dim_out^2 x dim_in^2` matrix acting on row-major `vec(ρ)`.
    pub fn transfer_matrix(&self) -> ComplexMatrix {
        let (din, dout) = (self.dim_in, self.dim_out);
        let j = self.choi.matrix();
        ComplexMatrix::from_fn(dout * dout, din * din, |row, col| {
            let (r, s) = (row / dout, row % dout);
            let (i, k) = (col / din, col % din);
            j[(i * dout + r, k * dout + s)]
        })
    }

    /// Inverse of [`QuantumChannel::transfer_matrix`]. The result is
    /// symmetrized, so `t` must describe a Hermiticity-preserving map.
    pub fn from_transfer_matrix(din: usize, dout: usize, t: &ComplexMatrix) -> Result<Self> {
        if t.rows() != dout * dout || t.cols() != din * din {
            return Err(Error::DimensionMismatch("transfer matrix shape".into()));
        }
        let choi = ComplexMatrix::from_fn(din * dout, din * dout, |row, col| {
            let (i, r) = (row / dout, row % dout);
            let (k, s) = (col / dout, col % dout);
            t[(r * dout + s, i * din + k)]
        });
        Self::from_choi(din, dout, HermitianOperator::from_hermitian_part(&choi))
    }

    /// Kraus operators from the spectral decomposition of the Choi matrix,
    /// dropping eigenvalues below [`KRAUS_CUTOFF`] (relative to the largest).
    pub fn kraus(&self) -> Result<Vec<ComplexMatrix>> {
        let (values, vectors) = eig_hermitian(&self.choi)?;
        let top = values.last().copied().unwrap_or(0.0).max(0.0);
        let (din, dout) = (self.dim_in, self.dim_out);
        Ok(values
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, &l)| l > KRAUS_CUTOFF * top.max(1.0))
            .map(|(k, &l)| {
                let s = l.sqrt();
                ComplexMatrix::from_fn(dout, din, |r, i| vectors[(i * dout + r, k)] * s)
            })
            .collect())
    }

    /// Number of Choi eigenvalues above the Kraus cutoff.
    pub fn kraus_rank(&self) -> Result<usize> {
        Ok(self.kraus()?.len())
    }

    pub fn choi_distance(&self, other: &Self) -> f64 {
        self.choi.matrix().distance(other.choi.matrix())
    }
}

/// `J = Σ_k |K_k>> <<K_k|`, validating `Σ K^dagger K = 1`.
pub fn choi_from_kraus(kraus: &[ComplexMatrix]) -> Result<QuantumChannel> {
    let first = kraus.first().ok_or_else(|| Error::InvalidChannel("empty Kraus list".into()))?;
    let (dout, din) = (first.rows(), first.cols());
    if kraus.iter().any(|k| k.rows() != dout || k.cols() != din) {
        return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
    }
    let mut completeness = ComplexMatrix::zeros(din, din);
    let mut choi = ComplexMatrix::zeros(din * dout, din * dout);
    for k in kraus {
        completeness += &k.adjoint().matmul(k);
        let v: Vec<C64> = (0..din * dout).map(|idx| k[(idx % dout, idx / dout)]).collect();
        choi += &ComplexMatrix::outer(&v);
    }
    let residual = completeness.distance(&ComplexMatrix::identity(din));
    if residual > CPTP_TOL * (din as f64).sqrt().max(1.0) {
        return Err(Error::InvalidChannel(format!("Kraus completeness residual {residual:.3e}")));
    }
    QuantumChannel::from_choi(din, dout, HermitianOperator::from_hermitian_part(&choi))
}

/// Output of [`apply`]: a density matrix when the input was one and the map is CPTP.
pub fn apply(n: &QuantumChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let out = n.apply_operator(rho.matrix().matrix())?;
    DensityMatrix::new(HermitianOperator::from_hermitian_part(&out))
}

/// Choi matrix of `later ∘ earlier`.
pub fn compose(later: &QuantumChannel, earlier: &QuantumChannel) -> Result<QuantumChannel> {
    if earlier.dim_out != later.dim_in {
        return Err(Error::DimensionMismatch(format!(
            "cannot compose {} -> {} after {} -> {}",
            later.dim_in, later.dim_out, earlier.dim_in, earlier.dim_out
        )));
    }
    let t = later.transfer_matrix().matmul(&earlier.transfer_matrix());
    QuantumChannel::from_transfer_matrix(earlier.dim_in, later.dim_out, &t)
}

/// `id_anc ⊗ N` with the ancilla as the first tensor factor of both input and output.
pub fn tensor_with_identity(n: &QuantumChannel, anc_dim: usize) -> Result<QuantumChannel> {
    if anc_dim == 0 {
        return Err(Error::InvalidParameter("ancilla dimension must be positive".into()));
    }
    if anc_dim == 1 {
        return Ok(n.clone());
    }
    let (din, dout, a) = (n.dim_in, n.dim_out, anc_dim);
    let (big_in, big_out) = (a * din, a * dout);
    let j = n.choi.matrix();
    let mut choi = ComplexMatrix::zeros(big_in * big_out, big_in * big_out);
    for alpha in 0..a {
        for beta in 0..a {
            for i in 0..din {
                for k in 0..din {
                    for r in 0..dout {
                        for s in 0..dout {
                            let row = (alpha * din + i) * big_out + alpha * dout + r;
                            let col = (beta * din + k) * big_out + beta * dout + s;
                            choi[(row, col)] = j[(i * dout + r, k * dout + s)];
                        }
                    }
                }
            }
        }
    }
    QuantumChannel::from_choi(big_in, big_out, HermitianOperator::from_hermitian_part(&choi))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CptpReport {
    /// Magnitude of the most negative Choi eigenvalue (0 when PSD).
    pub cp_residual: f64,
    /// `||Tr_out J - 1||_F`.
    pub tp_residual: f64,
    pub ok: bool,
}

pub fn validate_cptp(n: &QuantumChannel) -> Result<CptpReport> {
    let min = n.choi.min_eigenvalue()?;
    let cp_residual = (-min).max(0.0);
    let tr_out = crate::matrix::partial_trace(n.choi.matrix(), [n.dim_in, n.dim_out], Keep::First)?;
    let tp_residual = tr_out.distance(&ComplexMatrix::identity(n.dim_in));
    let scale = n.choi.matrix().frobenius_norm().max(1.0);
    let ok = cp_residual <= CPTP_TOL * scale && tp_residual <= CPTP_TOL * scale;
    Ok(CptpReport { cp_residual, tp_residual, ok })
}

/// Rank of the channel as a linear map on operators; `is_complete` when the
/// image spans the whole output operator space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MapRank {
    pub rank: usize,
    pub is_complete: bool,
}

pub fn linear_map_rank(n: &QuantumChannel) -> Result<MapRank> {
    let t = n.transfer_matrix();
    if !t.is_finite() {
        return Err(Error::NonFinite);
    }
    let sv = crate::matrix::singular_values(&t)?;
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| top > 0.0 && s > 1e-10 * top).count();
    Ok(MapRank { rank, is_complete: rank == n.dim_out * n.dim_out })
}

/// A normalized density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: HermitianOperator,
}

/// Trace tolerance for [`DensityMatrix`].
pub const TRACE_TOL: f64 = 1e-10;

impl DensityMatrix {
    pub fn new(matrix: HermitianOperator) -> Result<Self> {
        let tr = matrix.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = matrix.min_eigenvalue()?;
        if min < -CPTP_TOL * matrix.matrix().frobenius_norm().max(1.0) {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { matrix })
    }

    /// Normalizes a nonzero vector and returns its projector.
    pub fn pure(v: &[C64]) -> Result<Self> {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let u: Vec<C64> = v.iter().map(|z| z / norm).collect();
        Ok(Self { matrix: HermitianOperator::projector(&u) })
    }

    /// Computational basis state `|k>` in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Self {
        let mut v = vec![ZERO; d];
        v[k] = ONE;
        Self { matrix: HermitianOperator::projector(&v) }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { matrix: HermitianOperator::identity(d).scale(1.0 / d as f64) }
    }

    /// Normalized maximally entangled state `(1/sqrt d) Σ_k |kk>`.
    pub fn max_entangled(d: usize) -> Self {
        let mut v = vec![ZERO; d * d];
        for k in 0..d {
            v[k * d + k] = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        }
        Self { matrix: HermitianOperator::projector(&v) }
    }

    pub fn product(a: &DensityMatrix, b: &DensityMatrix) -> Self {
        Self { matrix: HermitianOperator::from_hermitian_part(&crate::matrix::kron(a.matrix.matrix(), b.matrix.matrix())) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &HermitianOperator {
        &self.matrix
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    elements: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOperator>) -> Result<Self> {
        let first = elements.first().ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let d = first.dim();
        if elements.iter().any(|e| e.dim() != d) {
            return Err(Error::InvalidPovm("elements differ in dimension".into()));
        }
        let mut sum = ComplexMatrix::zeros(d, d);
        for e in &elements {
            let min = e.min_eigenvalue()?;
            if min < -CPTP_TOL * e.matrix().frobenius_norm().max(1.0) {
                return Err(Error::InvalidPovm(format!("element with eigenvalue {min:.3e}")));
            }
            sum += e.matrix();
        }
        let residual = sum.distance(&ComplexMatrix::identity(d));
        if residual > CPTP_TOL * (d as f64).sqrt() {
            return Err(Error::InvalidPovm(format!("completeness residual {residual:.3e}")));
        }
        Ok(Self { elements })
    }

    /// Rank-one projectors onto the computational basis.
    pub fn computational(d: usize) -> Self {
        Self { elements: (0..d).map(|k| DensityMatrix::basis(d, k).matrix).collect() }
    }

    /// Projective measurement in the basis given by the columns of `u`.
    pub fn from_basis(u: &ComplexMatrix) -> Result<Self> {
        Self::new((0..u.cols()).map(|k| HermitianOperator::projector(&u.column(k))).collect())
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    /// Outcome probabilities `Tr[ρ P^y]`.
    pub fn probabilities(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.elements.iter().map(|e| rho.trace_product(e.matrix()).re).collect()
    }
}

/// Measure-and-prepare channel `C(ρ) = Σ_y |y><y| Tr[ρ P^y]` onto a fresh
/// output space indexed by the POVM outcomes.
pub fn qc_channel(povm: &Povm) -> Result<QuantumChannel> {
    let (din, dout) = (povm.dim(), povm.len());
    let mut choi = ComplexMatrix::zeros(din * dout, din * dout);
    for (y, p) in povm.elements().iter().enumerate() {
        for i in 0..din {
            for j in 0..din {
                choi[(i * dout + y, j * dout + y)] = p.matrix()[(j, i)];
            }
        }
    }
    QuantumChannel::from_choi(din, dout, HermitianOperator::from_hermitian_part(&choi))
}

/// A column-stochastic matrix: entry `(r, s)` is `t(r|s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    dim: usize,
    entries: Vec<f64>,
}

/// Tolerance on column sums and nonnegativity.
pub const STOCHASTIC_TOL: f64 = 1e-12;

impl StochasticMatrix {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::InvalidStochastic(format!("{} entries for dimension {dim}", entries.len())));
        }
        if entries.iter().any(|x| !x.is_finite() || *x < -STOCHASTIC_TOL) {
            return Err(Error::InvalidStochastic("negative or non-finite entry".into()));
        }
        for s in 0..dim {
            let col: f64 = (0..dim).map(|r| entries[r * dim + s]).sum();
            if (col - 1.0).abs() > STOCHASTIC_TOL * dim as f64 {
                return Err(Error::InvalidStochastic(format!("column {s} sums to {col}")));
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        Self::new(dim, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    /// Binary symmetric channel with flip probability `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("flip probability {p} outside [0, 1]")));
        }
        Ok(Self { dim: 2, entries: vec![1.0 - p, p, p, 1.0 - p] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, s: usize) -> f64 {
        self.entries[r * self.dim + s]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|c| c.to_vec()).collect()
    }

    /// `self · other` (apply `other` first).
    pub fn matmul(&self, other: &Self) -> Self {
        let d = self.dim;
        let entries = (0..d * d)
            .map(|idx| {
                let (r, c) = (idx / d, idx % d);
                (0..d).map(|k| self.get(r, k) * other.get(k, c)).sum()
            })
            .collect();
        Self { dim: d, entries }
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|r| (0..self.dim).map(|s| self.get(r, s) * p[s]).sum()).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `ρ -> Σ_{r,s} t(r|s) <s|ρ|s> |r><r|`.
pub fn embed_stochastic(t: &StochasticMatrix) -> QuantumChannel {
    let d = t.dim();
    let diag: Vec<f64> = (0..d * d).map(|idx| t.get(idx % d, idx / d)).collect();
    QuantumChannel { dim_in: d, dim_out: d, choi: HermitianOperator::from_diag(&diag) }
}

/// Recovers `t(r|s)` from a channel whose Choi matrix is diagonal.
pub fn classical_part(n: &QuantumChannel) -> Option<StochasticMatrix> {
    if n.dim_in != n.dim_out {
        return None;
    }
    let d = n.dim_in;
    let j = n.choi.matrix();
    let scale = j.frobenius_norm().max(1.0);
    for r in 0..d * d {
        for c in 0..d * d {
            if r != c && j[(r, c)].norm() > CPTP_TOL * scale {
                return None;
            }
        }
    }
    let entries = (0..d * d).map(|idx| j[((idx % d) * d + idx / d, (idx % d) * d + idx / d)].re.max(0.0)).collect();
    StochasticMatrix::new(d, entries).ok()
}
