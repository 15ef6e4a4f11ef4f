//! Thermal bath rates obeying the KMS condition and the Bohr-resolved
//! Lindblad operators `F_α(ω)` built from them.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::linalg::{self, CMatrix};
use crate::pauli::{Pauli, PauliSum, PauliTerm};
use crate::spectral::SpectralData;
use crate::{Error, Result};

/// Largest coupling-operator weight accepted by [`BathModel::new`].
pub const MAX_LOCALITY: usize = 2;

/// Spectral profile shared by every channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateProfile {
    /// `2πκ ω e^{-|ω|/ω_c} / (1 - e^{-βω})`.
    #[default]
    Ohmic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathModel {
    beta: f64,
    omega_c: f64,
    kappa: f64,
    profile: RateProfile,
    couplings: Vec<PauliTerm>,
    /// Channel correlation matrix `M`; the rate matrix is `M γ(ω)`.
    correlation: Option<DMatrix<f64>>,
}

/// One diagonal channel: `weight · γ(ω)` with operator `F_α`.
#[derive(Debug, Clone)]
pub struct RateChannel {
    pub weight: f64,
    pub operator: PauliSum,
}

impl BathModel {
    pub fn new(beta: f64, omega_c: f64, kappa: f64, couplings: Vec<PauliTerm>) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be finite and > 0, got {beta}")));
        }
        if !(omega_c > 0.0) || !omega_c.is_finite() {
            return Err(Error::Domain(format!("omega_c must be finite and > 0, got {omega_c}")));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        if let Some(first) = couplings.first() {
            for a in &couplings {
                if a.n_qubits() != first.n_qubits() {
                    return Err(Error::Dimension("coupling operators act on different qubit counts".into()));
                }
                if !a.is_hermitian() {
                    return Err(Error::Validation(format!("coupling {a} is not Hermitian")));
                }
                if a.weight() > MAX_LOCALITY {
                    return Err(Error::Validation(format!(
                        "coupling {a} has weight {} > {MAX_LOCALITY}",
                        a.weight()
                    )));
                }
            }
        }
        Ok(Self {
            beta,
            omega_c,
            kappa,
            profile: RateProfile::Ohmic,
            couplings,
            correlation: None,
        })
    }

    /// Independent single-qubit `X` and `Z` couplings on every qubit.
    pub fn x_and_z_all_qubits(n_qubits: usize, beta: f64, omega_c: f64, kappa: f64) -> Result<Self> {
        let mut couplings = Vec::with_capacity(2 * n_qubits);
        for q in 0..n_qubits {
            couplings.push(PauliTerm::single(n_qubits, q, Pauli::X)?);
            couplings.push(PauliTerm::single(n_qubits, q, Pauli::Z)?);
        }
        Self::new(beta, omega_c, kappa, couplings)
    }

    /// Named coupling preset.
    pub fn preset(name: &str, n_qubits: usize, beta: f64, omega_c: f64, kappa: f64) -> Result<Self> {
        match name {
            "x_and_z_all_qubits" => Self::x_and_z_all_qubits(n_qubits, beta, omega_c, kappa),
            _ => Err(Error::Validation(format!("unknown coupling preset {name:?}"))),
        }
    }

    /// Attach a real symmetric channel correlation matrix.
    pub fn with_correlation(mut self, m: DMatrix<f64>) -> Result<Self> {
        let c = self.couplings.len();
        if m.nrows() != c || m.ncols() != c {
            return Err(Error::Dimension(format!(
                "correlation matrix is {}x{}, expected {c}x{c}",
                m.nrows(),
                m.ncols()
            )));
        }
        for i in 0..c {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Validation(format!("correlation matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        self.correlation = Some(m);
        Ok(self)
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        let mut out = Self::new(self.beta, self.omega_c, kappa, self.couplings.clone())?;
        out.correlation = self.correlation.clone();
        Ok(out)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn profile(&self) -> RateProfile {
        self.profile
    }

    pub fn couplings(&self) -> &[PauliTerm] {
        &self.couplings
    }

    pub fn n_qubits(&self) -> Option<usize> {
        self.couplings.first().map(|a| a.n_qubits())
    }
}

/// Ohmic rate `γ(ω)`; `γ(0) = 2πκ/β`.
pub fn gamma(bath: &BathModel, omega: f64) -> f64 {
    let RateProfile::Ohmic = bath.profile;
    let scale = 2.0 * std::f64::consts::PI * bath.kappa;
    if scale == 0.0 {
        return 0.0;
    }
    if omega == 0.0 {
        return scale / bath.beta;
    }
    let w = omega.abs();
    let x = bath.beta * w;
    // w / (1 - e^{-x}) for the emission side, times e^{-x} for absorption.
    let bose = w / -(-x).exp_m1();
    let thermal = if omega > 0.0 { bose } else { bose * (-x).exp() };
    scale * thermal * (-w / bath.omega_c).exp()
}

/// Diagonalize the channel correlation matrix into independent channels.
///
/// Without a correlation matrix every coupling is its own channel with unit weight.
pub fn diagonalize_rate_matrix(bath: &BathModel) -> Result<Vec<RateChannel>> {
    let n = bath.n_qubits().unwrap_or(0);
    let Some(m) = &bath.correlation else {
        return bath
            .couplings
            .iter()
            .map(|a| {
                Ok(RateChannel {
                    weight: 1.0,
                    operator: PauliSum::single(1.0, *a)?,
                })
            })
            .collect();
    };
    let eig = SymmetricEigen::new(m.clone());
    let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = Vec::new();
    for k in order {
        let lambda = eig.eigenvalues[k];
        if lambda < -1e-12 * scale {
            return Err(Error::Model(format!("rate matrix is indefinite (eigenvalue {lambda:e})")));
        }
        let terms = bath
            .couplings
            .iter()
            .enumerate()
            .map(|(a, p)| (eig.eigenvectors[(a, k)], *p));
        out.push(RateChannel {
            weight: lambda.max(0.0),
            operator: PauliSum::from_terms(n, terms)?,
        });
    }
    Ok(out)
}

/// A channel operator with its dense form.
#[derive(Debug, Clone)]
pub struct DenseChannel {
    pub weight: f64,
    pub operator: CMatrix,
}

/// Dense channel operators ready for spectral resolution.
pub fn dense_channels(bath: &BathModel) -> Result<Vec<DenseChannel>> {
    diagonalize_rate_matrix(bath)?
        .into_iter()
        .map(|c| {
            Ok(DenseChannel {
                weight: c.weight,
                operator: c.operator.to_dense()?,
            })
        })
        .collect()
}

/// `F_α(ω)` for one channel and one Bohr frequency.
#[derive(Debug, Clone)]
pub struct LindbladOperator {
    pub channel: usize,
    pub omega: f64,
    pub operator: CMatrix,
    /// `weight_α · γ(ω)`.
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct LindbladOperatorSet {
    pub dim: usize,
    pub n_channels: usize,
    pub ops: Vec<LindbladOperator>,
}

impl LindbladOperatorSet {
    /// `F_α(ω)`, or zero if that block vanishes.
    pub fn get(&self, channel: usize, omega: f64, tol: f64) -> CMatrix {
        self.ops
            .iter()
            .find(|o| o.channel == channel && (o.omega - omega).abs() <= tol)
            .map(|o| o.operator.clone())
            .unwrap_or_else(|| linalg::zeros(self.dim))
    }

    /// `Σ_ω F_α(ω)`.
    pub fn resummed(&self, channel: usize) -> CMatrix {
        let mut out = linalg::zeros(self.dim);
        for o in self.ops.iter().filter(|o| o.channel == channel) {
            out += &o.operator;
        }
        out
    }
}

/// Entries below this fraction of the channel norm are treated as zero.
const BLOCK_CUTOFF: f64 = 1e-14;

/// Resolve every channel operator into Bohr-frequency blocks of `spec`.
pub fn lindblad_operators(bath: &BathModel, channels: &[DenseChannel], spec: &SpectralData) -> Result<LindbladOperatorSet> {
    let dim = spec.dim();
    let v = &spec.eigenvectors;
    let n_freq = spec.bohr_frequencies.len();
    let mut ops = Vec::new();
    for (alpha, ch) in channels.iter().enumerate() {
        if ch.operator.nrows() != dim {
            return Err(Error::Dimension(format!(
                "channel {alpha} has dimension {}, Hamiltonian has {dim}",
                ch.operator.nrows()
            )));
        }
        let f_tilde = v.adjoint() * &ch.operator * v;
        let cutoff = BLOCK_CUTOFF * linalg::max_abs(&f_tilde).max(1.0);
        let mut blocks = vec![linalg::zeros(dim); n_freq];
        let mut used = vec![false; n_freq];
        for k in 0..dim {
            for i in 0..dim {
                let f = f_tilde[(i, k)];
                if f.norm() <= cutoff {
                    continue;
                }
                let w = spec.bohr_index(spec.cluster_of[i], spec.cluster_of[k]);
                blocks[w][(i, k)] = f;
                used[w] = true;
            }
        }
        for (w, block) in blocks.into_iter().enumerate() {
            if !used[w] {
                continue;
            }
            let omega = spec.bohr_frequencies[w];
            ops.push(LindbladOperator {
                channel: alpha,
                omega,
                operator: v * block * v.adjoint(),
                rate: ch.weight * gamma(bath, omega),
            });
        }
    }
    Ok(LindbladOperatorSet {
        dim,
        n_channels: channels.len(),
        ops,
    })
}
