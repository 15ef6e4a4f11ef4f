//! Davies-Lindblad generator in the instantaneous eigenbasis, its dense
//! superoperator, the Markov transition matrix over clusters and the Gibbs
//! fixed point.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bath::{self, BathModel, DenseChannel, LindbladOperatorSet};
use crate::linalg::{self, CMatrix};
use crate::model::HamiltonianSource;
use crate::parallel::Execution;
use crate::spectral::{self, SpectralData};
use crate::{Error, Result};

/// Largest Hilbert dimension for which a dense superoperator is built (n ≤ 5).
pub const MAX_SUPEROPERATOR_DIM: usize = 32;

/// Matrix elements of `F̃` below this fraction of its largest entry are dropped.
const ENTRY_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GeneratorOptions {
    /// Reserved; a Lamb-shift term is not implemented.
    pub lamb_shift: bool,
}

#[derive(Debug, Clone)]
struct Bucket {
    rate: f64,
    /// `(i, k, F̃_ik)` with `E_k - E_i` in this bucket.
    entries: Vec<(usize, usize, Complex64)>,
}

#[derive(Debug, Clone)]
struct ChannelBlocks {
    f_tilde: CMatrix,
    buckets: Vec<Bucket>,
}

/// `L(t)[ρ] = -i[H, ρ] + D[ρ]` at one instant, applied matrix-free.
#[derive(Debug, Clone)]
pub struct DaviesGenerator {
    spec: SpectralData,
    channels: Vec<ChannelBlocks>,
    weights: Vec<f64>,
    /// `Σ_{α,ω} γ F̃(ω)† F̃(ω)` in the eigenbasis.
    k_tilde: CMatrix,
    dissipative: bool,
}

impl DaviesGenerator {
    pub fn new(h: &CMatrix, t: f64, bath: &BathModel, channels: &[DenseChannel]) -> Result<Self> {
        Self::with_options(h, t, bath, channels, GeneratorOptions::default())
    }

    pub fn with_options(
        h: &CMatrix,
        t: f64,
        bath: &BathModel,
        channels: &[DenseChannel],
        options: GeneratorOptions,
    ) -> Result<Self> {
        if options.lamb_shift {
            return Err(Error::Model("the Lamb-shift term is not implemented".into()));
        }
        let spec = spectral::eigendecompose_default(h, t)?;
        Self::from_spectral(spec, bath, channels)
    }

    pub fn from_spectral(spec: SpectralData, bath: &BathModel, channels: &[DenseChannel]) -> Result<Self> {
        let dim = spec.dim();
        let v = &spec.eigenvectors;
        let rates: Vec<f64> = spec.bohr_frequencies.iter().map(|&w| bath::gamma(bath, w)).collect();
        let dissipative = bath.kappa() > 0.0 && channels.iter().any(|c| c.weight > 0.0);
        let mut blocks = Vec::with_capacity(channels.len());
        let mut k_tilde = linalg::zeros(dim);
        for (alpha, ch) in channels.iter().enumerate() {
            if ch.operator.nrows() != dim {
                return Err(Error::Dimension(format!(
                    "channel {alpha} has dimension {}, Hamiltonian has {dim}",
                    ch.operator.nrows()
                )));
            }
            let f_tilde = v.adjoint() * &ch.operator * v;
            let cutoff = ENTRY_CUTOFF * linalg::max_abs(&f_tilde).max(1.0);
            let mut buckets: Vec<Bucket> = rates
                .iter()
                .map(|&r| Bucket {
                    rate: ch.weight * r,
                    entries: Vec::new(),
                })
                .collect();
            for i in 0..dim {
                for k in 0..dim {
                    let f = f_tilde[(i, k)];
                    if f.norm() > cutoff {
                        let w = spec.bohr_index(spec.cluster_of[i], spec.cluster_of[k]);
                        buckets[w].entries.push((i, k, f));
                    }
                }
            }
            buckets.retain(|b| !b.entries.is_empty() && b.rate != 0.0);
            for b in &buckets {
                // Entries are row-ordered, so equal-row runs are contiguous.
                let mut start = 0;
                while start < b.entries.len() {
                    let row = b.entries[start].0;
                    let mut end = start;
                    while end < b.entries.len() && b.entries[end].0 == row {
                        end += 1;
                    }
                    for &(_, k, f) in &b.entries[start..end] {
                        for &(_, l, g) in &b.entries[start..end] {
                            k_tilde[(k, l)] += f.conj() * g * b.rate;
                        }
                    }
                    start = end;
                }
            }
            blocks.push(ChannelBlocks { f_tilde, buckets });
        }
        Ok(Self {
            spec,
            channels: blocks,
            weights: channels.iter().map(|c| c.weight).collect(),
            k_tilde,
            dissipative,
        })
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Channel operator `F_α` in the eigenbasis.
    pub fn channel_eigenbasis(&self, alpha: usize) -> &CMatrix {
        &self.channels[alpha].f_tilde
    }

    pub fn channel_weight(&self, alpha: usize) -> f64 {
        self.weights[alpha]
    }

    /// Largest rate attached to any nonzero jump block.
    pub fn max_rate(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|c| c.buckets.iter().map(|b| b.rate))
            .fold(0.0, f64::max)
    }

    pub fn to_eigenbasis(&self, rho: &CMatrix) -> CMatrix {
        let v = &self.spec.eigenvectors;
        v.adjoint() * rho * v
    }

    pub fn from_eigenbasis(&self, m: &CMatrix) -> CMatrix {
        let v = &self.spec.eigenvectors;
        v * m * v.adjoint()
    }

    /// Dissipator acting on an eigenbasis matrix.
    pub fn dissipator_eigen(&self, rho: &CMatrix) -> CMatrix {
        let dim = self.dim();
        let mut out = linalg::zeros(dim);
        if !self.dissipative {
            return out;
        }
        for ch in &self.channels {
            for b in &ch.buckets {
                for &(i, k, f) in &b.entries {
                    let fr = f * b.rate;
                    for &(j, l, g) in &b.entries {
                        out[(i, j)] += fr * rho[(k, l)] * g.conj();
                    }
                }
            }
        }
        let half = Complex64::new(0.5, 0.0);
        out -= (&self.k_tilde * rho + rho * &self.k_tilde) * half;
        out
    }

    /// Full generator acting on an eigenbasis matrix.
    pub fn apply_eigen(&self, rho: &CMatrix) -> CMatrix {
        let mut out = self.dissipator_eigen(rho);
        let e = &self.spec.eigenvalues;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                out[(i, j)] += Complex64::new(0.0, -(e[i] - e[j])) * rho[(i, j)];
            }
        }
        out
    }

    pub fn dissipator(&self, rho: &CMatrix) -> CMatrix {
        self.from_eigenbasis(&self.dissipator_eigen(&self.to_eigenbasis(rho)))
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        self.from_eigenbasis(&self.apply_eigen(&self.to_eigenbasis(rho)))
    }

    /// Dense superoperator on column-vectorized matrices (`vec index = i + D j`).
    pub fn superoperator(&self, exec: Execution) -> Result<CMatrix> {
        let dim = self.dim();
        if dim > MAX_SUPEROPERATOR_DIM {
            return Err(Error::Resource(format!(
                "dense superoperator needs dimension <= {MAX_SUPEROPERATOR_DIM}, got {dim}"
            )));
        }
        let d2 = dim * dim;
        let columns = exec.map_range(d2, |c| {
            let mut e = linalg::zeros(dim);
            e[(c % dim, c / dim)] = linalg::ONE;
            linalg::vectorize(&self.apply(&e))
        });
        let mut out = CMatrix::zeros(d2, d2);
        for (c, col) in columns.into_iter().enumerate() {
            out.set_column(c, &nalgebra::DVector::from_vec(col));
        }
        Ok(out)
    }
}

/// One instant of the master equation with its dense superoperator.
#[derive(Debug, Clone)]
pub struct GeneratorSnapshot {
    pub t: f64,
    pub hamiltonian: CMatrix,
    pub dissipator_ops: LindbladOperatorSet,
    pub superoperator: CMatrix,
}

pub fn generator_matrix(source: &dyn HamiltonianSource, bath: &BathModel, t: f64, exec: Execution) -> Result<GeneratorSnapshot> {
    let dim = source.dim();
    if dim > MAX_SUPEROPERATOR_DIM {
        return Err(Error::Resource(format!(
            "dense superoperator needs dimension <= {MAX_SUPEROPERATOR_DIM}, got {dim}"
        )));
    }
    let (h, _) = source.evaluate(t)?;
    let channels = bath::dense_channels(bath)?;
    let gen = DaviesGenerator::new(&h, t, bath, &channels)?;
    let ops = bath::lindblad_operators(bath, &channels, gen.spectral())?;
    let superoperator = gen.superoperator(exec)?;
    Ok(GeneratorSnapshot {
        t,
        hamiltonian: h,
        dissipator_ops: ops,
        superoperator,
    })
}

/// Direct `Σ γ [F ρ F† - ½{F†F, ρ}]` over an explicit operator set.
pub fn dissipator_apply(ops: &LindbladOperatorSet, rho: &CMatrix) -> Result<CMatrix> {
    if rho.nrows() != ops.dim || rho.ncols() != ops.dim {
        return Err(Error::Dimension(format!(
            "rho is {}x{}, operators act on dimension {}",
            rho.nrows(),
            rho.ncols(),
            ops.dim
        )));
    }
    linalg::ensure_hermitian(rho, 1e-8, "rho")?;
    let tr = linalg::trace(rho).re;
    if (tr - 1.0).abs() > 1e-8 {
        return Err(Error::Validation(format!("rho has trace {tr}, expected 1")));
    }
    let mut out = linalg::zeros(ops.dim);
    for op in &ops.ops {
        if op.rate == 0.0 {
            continue;
        }
        let f = &op.operator;
        let fd = f.adjoint();
        let ff = &fd * f;
        let term = f * rho * &fd - (&ff * rho + rho * &ff) * Complex64::new(0.5, 0.0);
        out += term * Complex64::new(op.rate, 0.0);
    }
    Ok(out)
}

/// Null vector of the superoperator normalized to a density matrix.
///
/// Returns the state and the second-smallest singular value; a value near 0
/// signals a non-unique stationary state.
pub fn stationary_state(superoperator: &CMatrix, dim: usize) -> Result<(CMatrix, f64)> {
    if superoperator.nrows() != dim * dim || superoperator.ncols() != dim * dim {
        return Err(Error::Dimension("superoperator does not match the Hilbert dimension".into()));
    }
    let svd = superoperator.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Model("SVD did not converge".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let null: Vec<Complex64> = v_t.row(order[0]).iter().map(|z| z.conj()).collect();
    let mut rho = linalg::unvectorize(&null, dim);
    let tr = linalg::trace(&rho);
    if tr.norm() < 1e-12 {
        return Err(Error::Model("stationary vector is traceless".into()));
    }
    rho /= tr;
    let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let second = order.get(1).map(|&k| sv[k]).unwrap_or(f64::INFINITY);
    Ok((rho, second))
}

/// `e^{-βH} / Z`.
pub fn gibbs_state(h: &CMatrix, beta: f64) -> Result<CMatrix> {
    linalg::ensure_hermitian(h, 1e-10, "Hamiltonian")?;
    let e0 = linalg::min_eigenvalue(h);
    let unnorm = linalg::hermitian_function(h, |e| (-beta * (e - e0)).exp());
    let z = linalg::trace(&unnorm);
    Ok(unnorm / z)
}

/// Classical rate matrix over spectral clusters.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    /// `w[(l', l)]`: rate from cluster `l` into cluster `l'`.
    pub w: DMatrix<f64>,
    pub energies: Vec<f64>,
}

impl TransitionMatrix {
    /// `dp_l/dt = Σ_{l'} W_{l l'} p_{l'} - W_{l' l} p_l`.
    pub fn population_flow(&self, p: &[f64]) -> Vec<f64> {
        let n = self.energies.len();
        (0..n)
            .map(|l| {
                (0..n)
                    .filter(|&lp| lp != l)
                    .map(|lp| self.w[(l, lp)] * p[lp] - self.w[(lp, l)] * p[l])
                    .sum()
            })
            .collect()
    }
}

/// `W_{l'l} = Σ_α w_α γ(ε_l - ε_{l'}) Tr[Π_l F_α† Π_{l'} F_α]`.
pub fn markov_w(spec: &SpectralData, channels: &[DenseChannel], bath: &BathModel) -> Result<TransitionMatrix> {
    let n = spec.n_clusters();
    let v = &spec.eigenvectors;
    let mut w = DMatrix::<f64>::zeros(n, n);
    for (alpha, ch) in channels.iter().enumerate() {
        if ch.operator.nrows() != spec.dim() {
            return Err(Error::Dimension(format!("channel {alpha} does not match the Hamiltonian dimension")));
        }
        let f = v.adjoint() * &ch.operator * v;
        let mut overlap = DMatrix::<f64>::zeros(n, n);
        for i in 0..spec.dim() {
            for k in 0..spec.dim() {
                // Tr[Π_l F† Π_{l'} F] collects |F̃_{ki}|² with i ∈ l, k ∈ l'.
                overlap[(spec.cluster_of[k], spec.cluster_of[i])] += f[(k, i)].norm_sqr();
            }
        }
        for lp in 0..n {
            for l in 0..n {
                let omega = spec.clusters[l].energy - spec.clusters[lp].energy;
                w[(lp, l)] += ch.weight * bath::gamma(bath, omega) * overlap[(lp, l)];
            }
        }
    }
    Ok(TransitionMatrix {
        w,
        energies: spec.clusters.iter().map(|c| c.energy).collect(),
    })
}

/// Largest relative violation of `W_{l'l} = e^{-β(ε_{l'} - ε_l)} W_{ll'}` over `ε_{l'} > ε_l`.
pub fn check_detailed_balance(w: &TransitionMatrix, beta: f64) -> f64 {
    let n = w.energies.len();
    let mut worst = 0.0f64;
    for lp in 0..n {
        for l in 0..n {
            let de = w.energies[lp] - w.energies[l];
            if de <= 0.0 {
                continue;
            }
            let up = w.w[(lp, l)];
            let down = w.w[(l, lp)];
            let denom = up.max(down).max(1e-14);
            worst = worst.max((up - (-beta * de).exp() * down).abs() / denom);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::StabilizerCode;
    use crate::linalg::{kron, max_abs, real_diag, trace_distance};
    use crate::model::{EncodedModel, FrozenHamiltonian, LogicalProblem, Schedule};
    use crate::pauli::PauliTerm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn desk(eta: f64) -> EncodedModel {
        EncodedModel::new(
            StabilizerCode::preset("422").unwrap(),
            LogicalProblem::default_desk(),
            Schedule::new(1, 10.0).unwrap(),
            eta,
        )
        .unwrap()
    }

    fn desk_bath(beta: f64, kappa: f64) -> BathModel {
        BathModel::x_and_z_all_qubits(4, beta, 8.0, kappa).unwrap()
    }

    fn random_density(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let r = &a * a.adjoint();
        let tr = linalg::trace(&r);
        r / tr
    }

    fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// Kronecker-product superoperator built from an explicit operator set.
    fn kron_superoperator(h: &CMatrix, ops: &LindbladOperatorSet) -> CMatrix {
        let d = h.nrows();
        let id = linalg::identity(d);
        let mut l = (kron(&id, h) - kron(&h.transpose(), &id)) * Complex64::new(0.0, -1.0);
        for op in &ops.ops {
            let f = &op.operator;
            let ff = f.adjoint() * f;
            let term = kron(&f.map(|z| z.conj()), f)
                - (kron(&id, &ff) + kron(&ff.transpose(), &id)) * Complex64::new(0.5, 0.0);
            l += term * Complex64::new(op.rate, 0.0);
        }
        l
    }

    #[test]
    fn zero_rates_give_zero_dissipator() {
        let model = desk(2.0);
        let (h, _) = model.evaluate(5.0).unwrap();
        let b = desk_bath(1.0, 0.0);
        let ch = bath::dense_channels(&b).unwrap();
        let gen = DaviesGenerator::new(&h, 5.0, &b, &ch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(16, &mut rng);
        assert_eq!(max_abs(&gen.dissipator(&rho)), 0.0);
        let ops = bath::lindblad_operators(&b, &ch, gen.spectral()).unwrap();
        assert_eq!(max_abs(&dissipator_apply(&ops, &rho).unwrap()), 0.0);
    }

    #[test]
    fn single_qubit_relaxation_rate() {
        let h = real_diag(&[1.0, -1.0]);
        let b = BathModel::new(1.0, 8.0, 0.1, vec!["X".parse().unwrap()]).unwrap();
        let ch = bath::dense_channels(&b).unwrap();
        let gen = DaviesGenerator::new(&h, 0.0, &b, &ch).unwrap();
        let excited = real_diag(&[1.0, 0.0]);
        let d = gen.dissipator(&excited);
        assert!((d[(1, 1)].re - bath::gamma(&b, 2.0)).abs() < 1e-14);
        assert!((d[(0, 0)].re + bath::gamma(&b, 2.0)).abs() < 1e-14);
        let ops = bath::lindblad_operators(&b, &ch, gen.spectral()).unwrap();
        assert!(max_abs(&(dissipator_apply(&ops, &excited).unwrap() - d)) < 1e-14);
    }

    #[test]
    fn fast_generator_matches_operator_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (t, eta, beta) in [(0.0, 2.0, 1.0), (2.5, 1.0, 0.5), (5.0, 4.0, 2.0), (10.0, 0.0, 1.0)] {
            let model = desk(eta);
            let (h, _) = model.evaluate(t).unwrap();
            let b = desk_bath(beta, 0.05);
            let ch = bath::dense_channels(&b).unwrap();
            let gen = DaviesGenerator::new(&h, t, &b, &ch).unwrap();
            let ops = bath::lindblad_operators(&b, &ch, gen.spectral()).unwrap();
            for _ in 0..3 {
                let rho = random_density(16, &mut rng);
                let fast = gen.apply(&rho);
                let slow = dissipator_apply(&ops, &rho).unwrap() - linalg::commutator(&h, &rho) * linalg::I;
                assert!(max_abs(&(fast - slow)) < 1e-12);
            }
        }
    }

    #[test]
    fn superoperator_matches_kronecker_oracle() {
        let model = desk(2.0);
        let b = desk_bath(1.0, 0.05);
        let snap = generator_matrix(&model, &b, 3.0, Execution::default()).unwrap();
        let oracle = kron_superoperator(&snap.hamiltonian, &snap.dissipator_ops);
        assert!(max_abs(&(oracle - &snap.superoperator)) < 1e-12);
        let seq = generator_matrix(&model, &b, 3.0, Execution::Sequential).unwrap();
        assert_eq!(seq.superoperator, snap.superoperator);
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = desk(3.0);
        let b = desk_bath(1.0, 0.1);
        let ch = bath::dense_channels(&b).unwrap();
        for t in [0.0, 1.0, 7.0] {
            let (h, _) = model.evaluate(t).unwrap();
            let gen = DaviesGenerator::new(&h, t, &b, &ch).unwrap();
            for _ in 0..5 {
                let x = random_hermitian(16, &mut rng);
                let y = gen.apply(&x);
                assert!(linalg::trace(&y).norm() < 1e-10);
                assert!(linalg::hermiticity_defect(&y) < 1e-10);
            }
        }
    }

    #[test]
    fn closed_system_superoperator_is_anti_hermitian() {
        // L† = -L forces a purely imaginary spectrum.
        let b = desk_bath(1.0, 0.0);
        let snap = generator_matrix(&desk(2.0), &b, 4.0, Execution::default()).unwrap();
        let l = &snap.superoperator;
        assert!(max_abs(&(l + l.adjoint())) < 1e-12);
    }

    #[test]
    fn two_level_superoperator_spectrum() {
        let h = real_diag(&[1.0, -1.0]);
        let b = BathModel::new(1.0, 8.0, 0.2, vec!["X".parse().unwrap()]).unwrap();
        let frozen = FrozenHamiltonian::new(h, 1.0).unwrap();
        let snap = generator_matrix(&frozen, &b, 0.0, Execution::Sequential).unwrap();
        let big_gamma = bath::gamma(&b, 2.0) + bath::gamma(&b, -2.0);
        let mut eig: Vec<Complex64> = snap.superoperator.clone().schur().eigenvalues().unwrap().iter().copied().collect();
        eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let expected = [
            Complex64::new(-big_gamma, 0.0),
            Complex64::new(-big_gamma / 2.0, -2.0),
            Complex64::new(-big_gamma / 2.0, 2.0),
            Complex64::new(0.0, 0.0),
        ];
        for (z, e) in eig.iter().zip(expected) {
            assert!((z - e).norm() < 1e-12, "{z} vs {e}");
        }
    }

    #[test]
    fn dissipative_spectrum_in_left_half_plane() {
        let snap = generator_matrix(&desk(2.0), &desk_bath(1.0, 0.1), 6.0, Execution::default()).unwrap();
        let eig = snap.superoperator.clone().schur().eigenvalues().unwrap();
        let near_zero = eig.iter().filter(|z| z.norm() < 1e-9).count();
        assert!(near_zero >= 1);
        for z in eig.iter() {
            assert!(z.re <= 1e-9);
        }
    }

    #[test]
    fn gibbs_state_is_fixed_point() {
        for (eta, beta) in [(0.0, 1.0), (2.0, 0.5), (4.0, 2.0)] {
            let model = desk(eta);
            let (h, _) = model.evaluate(5.0).unwrap();
            let b = desk_bath(beta, 0.1);
            let ch = bath::dense_channels(&b).unwrap();
            let gen = DaviesGenerator::new(&h, 5.0, &b, &ch).unwrap();
            let g = gibbs_state(&h, beta).unwrap();
            let ops = bath::lindblad_operators(&b, &ch, gen.spectral()).unwrap();
            assert!(max_abs(&dissipator_apply(&ops, &g).unwrap()) < 1e-9);
            assert!(max_abs(&gen.apply(&g)) < 1e-9);
        }
    }

    #[test]
    fn stationary_state_is_gibbs() {
        let model = desk(2.0);
        let frozen = model.frozen_at(5.0, 1.0).unwrap();
        let b = desk_bath(1.0, 0.1);
        let snap = generator_matrix(&frozen, &b, 0.0, Execution::default()).unwrap();
        let (rho, second) = stationary_state(&snap.superoperator, 16).unwrap();
        assert!(second > 1e-8);
        let g = gibbs_state(frozen.hamiltonian(), 1.0).unwrap();
        assert!(trace_distance(&rho, &g) < 1e-8);
    }

    #[test]
    fn unitary_part_does_not_move_ground_population() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = desk(2.0);
        for t in [1.0, 5.0, 9.0] {
            let (h, _) = model.evaluate(t).unwrap();
            let spec = spectral::eigendecompose_default(&h, t).unwrap();
            let rho = random_density(16, &mut rng);
            let flow = linalg::trace(&(&spec.ground_projector * linalg::commutator(&h, &rho)));
            assert!(flow.norm() < 1e-12);
        }
    }

    #[test]
    fn two_level_transition_matrix() {
        let h = real_diag(&[1.0, -1.0]);
        let b = BathModel::new(1.0, 8.0, 0.1, vec!["X".parse().unwrap()]).unwrap();
        let ch = bath::dense_channels(&b).unwrap();
        let spec = spectral::eigendecompose(&h, 1e-8).unwrap();
        let w = markov_w(&spec, &ch, &b).unwrap();
        // Cluster 0 is the ground state at -1.
        assert!((w.w[(0, 1)] / w.w[(1, 0)] - 2f64.exp()).abs() < 1e-12);
        assert!(check_detailed_balance(&w, 1.0) < 1e-12);
        let quiet = b.with_kappa(0.0).unwrap();
        let w0 = markov_w(&spec, &ch, &quiet).unwrap();
        assert!(w0.w.iter().all(|x| *x == 0.0));
        assert_eq!(check_detailed_balance(&w0, 1.0), 0.0);
    }

    #[test]
    fn encoded_transition_matrix_balance_and_positivity() {
        let model = desk(2.0);
        let (h, _) = model.evaluate(5.0).unwrap();
        let b = desk_bath(1.0, 0.1);
        let ch = bath::dense_channels(&b).unwrap();
        let spec = spectral::eigendecompose_default(&h, 5.0).unwrap();
        let w = markov_w(&spec, &ch, &b).unwrap();
        assert!(w.w.iter().all(|x| *x >= -1e-14));
        assert!(check_detailed_balance(&w, 1.0) < 1e-9);
    }

    #[test]
    fn ground_flow_matches_transition_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let terms: Vec<PauliTerm> = ["XI", "IX", "ZZ", "ZI", "IZ", "XZ"].iter().map(|s| s.parse().unwrap()).collect();
        let mut h = linalg::zeros(4);
        for t in &terms {
            h += t.to_dense().unwrap() * Complex64::new(rng.random_range(-1.0..1.0), 0.0);
        }
        let b = BathModel::x_and_z_all_qubits(2, 0.8, 8.0, 0.1).unwrap();
        let ch = bath::dense_channels(&b).unwrap();
        let gen = DaviesGenerator::new(&h, 0.0, &b, &ch).unwrap();
        let spec = gen.spectral().clone();
        assert_eq!(spec.n_clusters(), 4);
        let w = markov_w(&spec, &ch, &b).unwrap();
        let p: Vec<f64> = vec![0.4, 0.3, 0.2, 0.1];
        let rho = gen.from_eigenbasis(&real_diag(&p));
        let d = gen.apply(&rho);
        let flow = w.population_flow(&p);
        for (l, cl) in spec.clusters.iter().enumerate() {
            let direct = linalg::trace(&(&cl.projector * &d)).re;
            assert!((direct - flow[l]).abs() < 1e-12);
        }
    }

    #[test]
    fn superoperator_cap() {
        let frozen = FrozenHamiltonian::new(linalg::identity(64), 1.0).unwrap();
        let b = BathModel::x_and_z_all_qubits(6, 1.0, 8.0, 0.1).unwrap();
        assert!(matches!(generator_matrix(&frozen, &b, 0.0, Execution::Sequential), Err(Error::Resource(_))));
    }

    #[test]
    fn lamb_shift_flag_is_reserved() {
        let b = BathModel::x_and_z_all_qubits(1, 1.0, 8.0, 0.1).unwrap();
        let ch = bath::dense_channels(&b).unwrap();
        let opts = GeneratorOptions { lamb_shift: true };
        assert!(DaviesGenerator::with_options(&real_diag(&[0.0, 1.0]), 0.0, &b, &ch, opts).is_err());
    }
}
