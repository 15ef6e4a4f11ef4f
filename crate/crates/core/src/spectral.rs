//! Time-local spectral data: clustered eigenprojectors, Bohr frequencies,
//! ground-state gap and the reduced resolvent.

use std::ops::Range;

use num_complex::Complex64;

use crate::linalg::{self, CMatrix};
use crate::model::HamiltonianSource;
use crate::parallel::Execution;
use crate::{Error, Result};

/// Relative clustering tolerance applied to the spectral width.
pub const DEFAULT_RELATIVE_DEGENERACY: f64 = 1e-8;

/// Gaps below this are treated as level crossings.
pub const CROSSING_GAP: f64 = 1e-12;

/// One (possibly degenerate) eigenspace.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub energy: f64,
    pub projector: CMatrix,
    pub multiplicity: usize,
    /// Indices into the sorted eigenvector columns belonging to this cluster.
    pub members: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub t: f64,
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `eigenvalues`.
    pub eigenvectors: CMatrix,
    pub clusters: Vec<Cluster>,
    /// Cluster index of every eigenvector column.
    pub cluster_of: Vec<usize>,
    pub bohr_frequencies: Vec<f64>,
    /// `bohr_index[a * L + b]` locates `E_b - E_a` in `bohr_frequencies`.
    bohr_index: Vec<usize>,
    pub ground_projector: CMatrix,
    /// First excited cluster energy minus ground energy; `+∞` for one cluster.
    pub gap: f64,
    pub delta_deg: f64,
    pub delta_omega: f64,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn ground_energy(&self) -> f64 {
        self.clusters[0].energy
    }

    /// Index into [`Self::bohr_frequencies`] of `E_b - E_a`.
    pub fn bohr_index(&self, a: usize, b: usize) -> usize {
        self.bohr_index[a * self.clusters.len() + b]
    }

    /// `Σ_l ε_l Π_l` rebuilt from the clusters.
    pub fn reconstruct(&self) -> CMatrix {
        let mut out = linalg::zeros(self.dim());
        for c in &self.clusters {
            out += &c.projector * Complex64::new(c.energy, 0.0);
        }
        out
    }
}

/// Default clustering tolerance `1e-8 · (ε_max - ε_min)`, floored for flat spectra.
pub fn default_delta(eigenvalues: &[f64]) -> f64 {
    let (lo, hi) = (eigenvalues.first().copied().unwrap_or(0.0), eigenvalues.last().copied().unwrap_or(0.0));
    let width = hi - lo;
    let scale = lo.abs().max(hi.abs()).max(1.0);
    (DEFAULT_RELATIVE_DEGENERACY * width).max(1e-13 * scale)
}

/// Diagonalize a Hermitian `h` and merge adjacent eigenvalues closer than `delta_deg`.
pub fn eigendecompose(h: &CMatrix, delta_deg: f64) -> Result<SpectralData> {
    eigendecompose_at(h, delta_deg, delta_deg, 0.0)
}

/// [`eigendecompose`] with the default relative tolerances.
pub fn eigendecompose_default(h: &CMatrix, t: f64) -> Result<SpectralData> {
    linalg::ensure_hermitian(h, 1e-10 * linalg::max_abs(h).max(1.0), "Hamiltonian")?;
    let (values, vectors) = linalg::eigh(h);
    let delta = default_delta(&values);
    assemble(t, values, vectors, delta, delta)
}

pub fn eigendecompose_at(h: &CMatrix, delta_deg: f64, delta_omega: f64, t: f64) -> Result<SpectralData> {
    if !(delta_deg > 0.0) {
        return Err(Error::Domain(format!("delta_deg must be > 0, got {delta_deg}")));
    }
    linalg::ensure_hermitian(h, 1e-10 * linalg::max_abs(h).max(1.0), "Hamiltonian")?;
    let (values, vectors) = linalg::eigh(h);
    assemble(t, values, vectors, delta_deg, delta_omega)
}

fn assemble(t: f64, values: Vec<f64>, vectors: CMatrix, delta_deg: f64, delta_omega: f64) -> Result<SpectralData> {
    let dim = values.len();
    let mut ranges: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    for i in 1..=dim {
        if i == dim || values[i] - values[i - 1] > delta_deg {
            ranges.push(start..i);
            start = i;
        }
    }
    let mut cluster_of = vec![0; dim];
    let clusters: Vec<Cluster> = ranges
        .into_iter()
        .enumerate()
        .map(|(c, members)| {
            let block = vectors.columns(members.start, members.len());
            let projector = &block * block.adjoint();
            let energy = values[members.clone()].iter().sum::<f64>() / members.len() as f64;
            for i in members.clone() {
                cluster_of[i] = c;
            }
            Cluster {
                energy,
                projector,
                multiplicity: members.len(),
                members,
            }
        })
        .collect();
    let energies: Vec<f64> = clusters.iter().map(|c| c.energy).collect();
    let (bohr_frequencies, bohr_index) = bin_bohr(&energies, delta_omega);
    let gap = if clusters.len() > 1 {
        clusters[1].energy - clusters[0].energy
    } else {
        f64::INFINITY
    };
    let ground_projector = clusters[0].projector.clone();
    Ok(SpectralData {
        t,
        eigenvalues: values,
        eigenvectors: vectors,
        clusters,
        cluster_of,
        bohr_frequencies,
        bohr_index,
        ground_projector,
        gap,
        delta_deg,
        delta_omega,
    })
}

/// Deduplicate all pairwise differences `E_b - E_a` with tolerance `delta`.
///
/// Positive differences are binned greedily in sorted order and mirrored, so
/// the result is exactly closed under negation and contains 0.
fn bin_bohr(energies: &[f64], delta: f64) -> (Vec<f64>, Vec<usize>) {
    let l = energies.len();
    let mut positive: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..l {
        for b in a + 1..l {
            positive.push((energies[b] - energies[a], a, b));
        }
    }
    positive.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut groups: Vec<Vec<(f64, usize, usize)>> = Vec::new();
    for item in positive {
        match groups.last_mut() {
            Some(g) if item.0 - g[0].0 <= delta => g.push(item),
            _ => groups.push(vec![item]),
        }
    }
    let reps: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().map(|x| x.0).sum::<f64>() / g.len() as f64)
        .collect();
    let n_pos = reps.len();
    let mut freqs: Vec<f64> = reps.iter().rev().map(|w| -w).collect();
    freqs.push(0.0);
    freqs.extend(reps.iter().copied());
    let zero = n_pos;
    let mut index = vec![zero; l * l];
    for (g, members) in groups.iter().enumerate() {
        for &(_, a, b) in members {
            index[a * l + b] = zero + 1 + g;
            index[b * l + a] = zero - 1 - g;
        }
    }
    (freqs, index)
}

/// Distinct Bohr frequencies of `spec` binned with tolerance `delta_omega`.
pub fn bohr_frequencies(spec: &SpectralData, delta_omega: f64) -> Vec<f64> {
    let energies: Vec<f64> = spec.clusters.iter().map(|c| c.energy).collect();
    bin_bohr(&energies, delta_omega).0
}

/// `S = Σ_{l>0} Π_l / (ε_l - ε_0)`.
pub fn reduced_resolvent(spec: &SpectralData) -> Result<CMatrix> {
    if spec.gap <= CROSSING_GAP {
        return Err(Error::DegenerateGap(format!("gap {:e} at t = {}", spec.gap, spec.t)));
    }
    let e0 = spec.ground_energy();
    let mut s = linalg::zeros(spec.dim());
    for c in &spec.clusters[1..] {
        s += &c.projector * Complex64::new(1.0 / (c.energy - e0), 0.0);
    }
    Ok(s)
}

/// `Π̇_0 = -S Ḣ Π_0 - Π_0 Ḣ S`.
pub fn ground_projector_derivative(spec: &SpectralData, h_dot: &CMatrix) -> Result<CMatrix> {
    let s = reduced_resolvent(spec)?;
    let p0 = &spec.ground_projector;
    let left = -(&s * h_dot * p0);
    Ok(&left + left.adjoint())
}

fn gap_at(source: &dyn HamiltonianSource, t: f64) -> Result<f64> {
    let (h, _) = source.evaluate(t)?;
    Ok(eigendecompose_default(&h, t)?.gap)
}

/// Minimum ground-state gap over a uniform grid of `points` times on
/// `[0, t_final]`, refined by golden-section search around the coarse minimum.
pub fn minimum_gap(source: &dyn HamiltonianSource, points: usize, exec: Execution) -> Result<(f64, f64)> {
    if points < 101 {
        return Err(Error::Domain(format!("minimum_gap needs >= 101 grid points, got {points}")));
    }
    let t_f = source.t_final();
    let times: Vec<f64> = (0..points).map(|i| t_f * i as f64 / (points - 1) as f64).collect();
    let gaps = exec.try_map(&times, |&t| gap_at(source, t))?;
    for (&t, &g) in times.iter().zip(&gaps) {
        if g < CROSSING_GAP {
            return Err(Error::LevelCrossing { t, gap: g });
        }
    }
    let mut best = 0;
    for (i, g) in gaps.iter().enumerate() {
        if *g < gaps[best] {
            best = i;
        }
    }
    if t_f == 0.0 || gaps.iter().all(|g| *g == gaps[0]) {
        return Ok((gaps[best], times[best]));
    }
    let lo = times[best.saturating_sub(1)];
    let hi = times[(best + 1).min(points - 1)];
    let (t_star, g_star) = golden_section(|t| gap_at(source, t), lo, hi, 1e-4)?;
    if g_star < gaps[best] {
        if g_star < CROSSING_GAP {
            return Err(Error::LevelCrossing { t: t_star, gap: g_star });
        }
        Ok((g_star, t_star))
    } else {
        Ok((gaps[best], times[best]))
    }
}

fn golden_section(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, rel: f64) -> Result<(f64, f64)> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let scale = a.abs().max(b.abs()).max(1e-300);
    while (b - a) > rel * scale {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}
