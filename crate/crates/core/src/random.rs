//! Seeded samplers for states, channels, POVMs and ensembles.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::channel::{choi_from_kraus, DensityMatrix, Povm, QuantumChannel};
use crate::discrimination::Ensemble;
use crate::error::Result;
use crate::matrix::{psd_inv_sqrt, ComplexMatrix, HermitianOperator, C64};

/// The generator used throughout: reproducible from a `u64` seed.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Standard complex Gaussian (unit variance).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Haar-random isometry (`cols <= rows`), via Gram–Schmidt on Gaussian columns.
pub fn haar_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    assert!(cols <= rows, "isometry needs cols <= rows");
    loop {
        let g = ginibre(rows, cols, rng);
        let mut q: Vec<Vec<C64>> = Vec::with_capacity(cols);
        let mut degenerate = false;
        for c in 0..cols {
            let mut v = g.column(c);
            // Two passes keep the columns orthogonal to machine precision.
            for _ in 0..2 {
                for u in &q {
                    let proj: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (x, a) in v.iter_mut().zip(u) {
                        *x -= proj * a;
                    }
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-8 {
                degenerate = true;
                break;
            }
            v.iter_mut().for_each(|z| *z /= norm);
            q.push(v);
        }
        if !degenerate {
            return ComplexMatrix::from_fn(rows, cols, |r, c| q[c][r]);
        }
    }
}

pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    haar_isometry(d, d, rng)
}

pub fn random_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let v: Vec<C64> = (0..d).map(|_| complex_gaussian(rng)).collect();
    DensityMatrix::pure(&v).expect("Gaussian vector is nonzero")
}

/// Hilbert–Schmidt random state `G G^dagger / Tr`, full rank almost surely.
pub fn random_full_rank_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(d, d, rng);
    let m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    DensityMatrix::new(HermitianOperator::from_hermitian_part(&m.scale_real(1.0 / tr))).expect("Gram matrix is a state")
}

/// Pure or full-rank with equal odds.
pub fn random_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    if rng.random_bool(0.5) {
        random_pure_state(d, rng)
    } else {
        random_full_rank_state(d, rng)
    }
}

/// Uniform (flat Dirichlet) point of the probability simplex.
pub fn random_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Random ensemble of `size` states with Dirichlet-uniform priors.
pub fn random_ensemble<R: Rng + ?Sized>(d: usize, size: usize, rng: &mut R) -> Ensemble {
    let probs = random_simplex(size, rng);
    let states = probs.into_iter().map(|p| (p, random_state(d, rng))).collect();
    Ensemble::new(states).expect("sampled ensemble is valid")
}

/// Random CPTP map with the given Kraus rank, from a Haar isometry
/// `V = Σ_k |k> ⊗ K_k` truncated to `din` columns.
pub fn random_channel_with_rank<R: Rng + ?Sized>(din: usize, dout: usize, rank: usize, rng: &mut R) -> Result<QuantumChannel> {
    let rank = rank.max(din.div_ceil(dout));
    let v = haar_isometry(dout * rank, din, rng);
    let kraus: Vec<ComplexMatrix> = (0..rank).map(|k| v.submatrix(k * dout, 0, dout, din)).collect();
    choi_from_kraus(&kraus)
}

/// Random channel on dimension `d` with Kraus rank uniform in `1..=d²`.
pub fn random_channel<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<QuantumChannel> {
    let rank = rng.random_range(1..=d * d);
    random_channel_with_rank(d, d, rank, rng)
}

/// Random POVM with `outcomes` elements, `S^{-1/2} w_k σ_k S^{-1/2}` for random states σ_k.
pub fn random_povm<R: Rng + ?Sized>(d: usize, outcomes: usize, rng: &mut R) -> Result<Povm> {
    let w = random_simplex(outcomes, rng);
    // Fewer outcomes than dimensions need full-rank parts for an invertible sum.
    let parts: Vec<ComplexMatrix> = w
        .iter()
        .map(|&x| {
            let s = if outcomes < d { random_full_rank_state(d, rng) } else { random_state(d, rng) };
            s.matrix().matrix().scale_real(x)
        })
        .collect();
    let mut total = ComplexMatrix::zeros(d, d);
    for p in &parts {
        total += p;
    }
    let fix = psd_inv_sqrt(&HermitianOperator::from_hermitian_part(&total), 1e-300)?;
    let mut elements: Vec<HermitianOperator> =
        parts.iter().map(|p| HermitianOperator::from_hermitian_part(&p.conjugate_by(fix.matrix()))).collect();
    // Absorb the rounding error of the normalization into the last element.
    let mut sum = ComplexMatrix::zeros(d, d);
    for e in &elements[..outcomes - 1] {
        sum += e.matrix();
    }
    let last = &ComplexMatrix::identity(d) - &sum;
    elements[outcomes - 1] = HermitianOperator::from_hermitian_part(&last);
    Povm::new(elements)
}

/// Ensemble whose average state is `1/d`: `p_x = Tr E_x / d`, `ρ_x = E_x / Tr E_x`
/// for a random POVM `{E_x}`.
pub fn random_uniform_average_ensemble<R: Rng + ?Sized>(d: usize, size: usize, rng: &mut R) -> Result<Ensemble> {
    let povm = random_povm(d, size, rng)?;
    uniform_average_ensemble(&povm)
}

pub fn uniform_average_ensemble(povm: &Povm) -> Result<Ensemble> {
    let d = povm.dim() as f64;
    let mut states = Vec::with_capacity(povm.len());
    for e in povm.elements() {
        let tr = e.trace();
        if tr <= 1e-14 {
            continue;
        }
        states.push((tr / d, DensityMatrix::new(e.scale(1.0 / tr))?));
    }
    Ensemble::new(states)
}

/// Random pure state vector (normalized).
pub fn random_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<C64> {
    let mut v: Vec<C64> = (0..d).map(|_| complex_gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = C64::new(1.0, 0.0);
        return v;
    }
    v.iter_mut().for_each(|z| *z /= norm);
    v
}
