//! Integration of the adiabatic master equation and the ground-population
//! rate bookkeeping along a trajectory.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bath::{self, BathModel, DenseChannel};
use crate::davies::DaviesGenerator;
use crate::linalg::{self, CMatrix};
use crate::model::HamiltonianSource;
use crate::spectral;
use crate::{Error, Result};

/// Snapshots with a smaller eigenvalue abort the run.
pub const POSITIVITY_ABORT: f64 = -1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Embedded Dormand-Prince 5(4) pair with adaptive steps.
    Dopri5,
    /// Classical fourth-order Runge-Kutta with a fixed number of steps per output interval.
    Rk4 { steps_per_output: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorParams {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub output_points: usize,
    pub max_steps: usize,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        Self {
            method: Method::Dopri5,
            rtol: 1e-8,
            atol: 1e-10,
            output_points: 201,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(Error::Domain(format!(
                "tolerances must be > 0 (rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        if self.output_points < 2 {
            return Err(Error::Domain(format!("output_points must be >= 2, got {}", self.output_points)));
        }
        if let Method::Rk4 { steps_per_output: 0 } = self.method {
            return Err(Error::Domain("steps_per_output must be >= 1".into()));
        }
        Ok(())
    }
}

/// Ground-population rate `R = diag + Q` at one instant.
#[derive(Debug, Clone)]
pub struct RateDecomposition {
    pub r: f64,
    pub diag: f64,
    pub q: f64,
    /// `m[α][(a, b)] = Tr[ρ Π_a F_α† Π_b F_α Π_a]` over clusters.
    pub m: Vec<DMatrix<f64>>,
}

/// Per-snapshot quantities consumed by the bound analysis.
#[derive(Debug, Clone)]
pub struct SnapshotDiagnostics {
    pub gap: f64,
    pub hdot_norm: f64,
    /// `ε_l - ε_0` per cluster (0 for the ground cluster).
    pub excitation_energies: Vec<f64>,
    /// Clusters not contained in the codespace (all excited clusters without a code).
    pub outside_codespace: Vec<bool>,
    /// `m_α^{0,l}` per channel and cluster.
    pub m_up: Vec<Vec<f64>>,
    /// `m_α^{l,0}` per channel and cluster.
    pub m_down: Vec<Vec<f64>>,
    /// Smallest `m_α^{a,b}` over all channels and cluster pairs.
    pub m_min: f64,
    /// `Σ_α ‖F_α‖²`.
    pub sum_f_norms: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    pub rho_snapshots: Vec<CMatrix>,
    pub p_perp: Vec<f64>,
    pub rate_total: Vec<f64>,
    pub rate_diag: Vec<f64>,
    pub rate_offdiag: Vec<f64>,
    pub coherence_norm: Vec<f64>,
    pub codespace_leakage: Vec<f64>,
    pub trace_error: Vec<f64>,
    pub min_eig: Vec<f64>,
    pub diagnostics: Vec<SnapshotDiagnostics>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl TrajectoryResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `Tr(Π_0 ρ)` per snapshot.
    pub fn ground_population(&self) -> Vec<f64> {
        self.p_perp
            .iter()
            .zip(&self.rho_snapshots)
            .map(|(p, rho)| linalg::trace(rho).re - p)
            .collect()
    }
}

/// `m_α^{a,b}` for every channel and cluster pair, in the generator's eigenbasis.
fn m_matrices(generator: &DaviesGenerator, rho_tilde: &CMatrix) -> Vec<DMatrix<f64>> {
    let spec = generator.spectral();
    let n = spec.n_clusters();
    let dim = spec.dim();
    (0..generator.n_channels())
        .map(|alpha| {
            let f = generator.channel_eigenbasis(alpha);
            let mut m = DMatrix::<f64>::zeros(n, n);
            for (a, ca) in spec.clusters.iter().enumerate() {
                let cols = ca.members.clone();
                let fa = f.columns(cols.start, cols.len());
                let block = rho_tilde.view((cols.start, cols.start), (cols.len(), cols.len()));
                let x = &fa * block;
                for i in 0..dim {
                    let g: Complex64 = (0..cols.len()).map(|l| x[(i, l)] * fa[(i, l)].conj()).sum();
                    m[(a, spec.cluster_of[i])] += g.re;
                }
            }
            m
        })
        .collect()
}

fn decompose(generator: &DaviesGenerator, bath: &BathModel, h_dot: &CMatrix, rho: &CMatrix) -> Result<RateDecomposition> {
    let spec = generator.spectral();
    let rho_tilde = generator.to_eigenbasis(rho);
    let m = m_matrices(generator, &rho_tilde);
    let mut diag = 0.0;
    if bath.kappa() > 0.0 {
        for (alpha, ma) in m.iter().enumerate() {
            let w = generator.channel_weight(alpha);
            for l in 1..spec.n_clusters() {
                let down = spec.bohr_frequencies[spec.bohr_index(0, l)];
                let up = spec.bohr_frequencies[spec.bohr_index(l, 0)];
                diag += w * (bath::gamma(bath, down) * ma[(l, 0)] - bath::gamma(bath, up) * ma[(0, l)]);
            }
        }
    }
    let q = if spec.n_clusters() > 1 && linalg::max_abs(h_dot) > 0.0 {
        let s = spectral::reduced_resolvent(spec)?;
        -2.0 * linalg::trace(&(s * h_dot * &spec.ground_projector * rho)).re
    } else {
        0.0
    };
    Ok(RateDecomposition { r: diag + q, diag, q, m })
}

/// `R(t) = ∂_t Tr(Π_0 ρ)` split into its dissipative and coherent parts.
pub fn rate_decomposition(rho: &CMatrix, source: &dyn HamiltonianSource, bath: &BathModel, t: f64) -> Result<RateDecomposition> {
    let (h, h_dot) = source.evaluate(t)?;
    let channels = bath::dense_channels(bath)?;
    let generator = DaviesGenerator::new(&h, t, bath, &channels)?;
    decompose(&generator, bath, &h_dot, rho)
}

struct Rhs<'a> {
    source: &'a dyn HamiltonianSource,
    bath: &'a BathModel,
    channels: &'a [DenseChannel],
}

impl Rhs<'_> {
    fn generator(&self, t: f64) -> Result<(DaviesGenerator, CMatrix)> {
        let (h, h_dot) = self.source.evaluate(t)?;
        Ok((DaviesGenerator::new(&h, t, self.bath, self.channels)?, h_dot))
    }

    fn eval(&self, t: f64, rho: &CMatrix) -> Result<CMatrix> {
        Ok(self.generator(t)?.0.apply(rho))
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn combine(y: &CMatrix, h: f64, coeffs: &[f64], ks: &[CMatrix]) -> CMatrix {
    let mut out = y.clone();
    for (c, k) in coeffs.iter().zip(ks) {
        if *c != 0.0 {
            out += k * Complex64::new(h * c, 0.0);
        }
    }
    out
}

/// Hairer's scaled RMS error norm.
fn error_norm(err: &CMatrix, y0: &CMatrix, y1: &CMatrix, rtol: f64, atol: f64) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter())
        .zip(y1.iter())
        .map(|((e, a), b)| {
            let sc = atol + rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

struct Stepper<'a> {
    rhs: Rhs<'a>,
    params: IntegratorParams,
    h: f64,
    k_first: Option<CMatrix>,
    accepted: usize,
    rejected: usize,
    h_min: f64,
}

impl Stepper<'_> {
    fn stiffness(&self, t: f64, step: f64) -> Error {
        let (min_gap, max_rate) = match self.rhs.generator(t) {
            Ok((g, _)) => (g.spectral().gap, g.max_rate()),
            Err(_) => (f64::NAN, f64::NAN),
        };
        Error::Stiffness {
            t,
            step,
            min_gap,
            max_rate,
        }
    }

    /// Advance `y` from `t0` to exactly `t1`.
    fn advance(&mut self, y: &mut CMatrix, t0: f64, t1: f64) -> Result<()> {
        match self.params.method {
            Method::Rk4 { steps_per_output } => {
                let h = (t1 - t0) / steps_per_output as f64;
                for i in 0..steps_per_output {
                    let t = t0 + h * i as f64;
                    let k1 = self.rhs.eval(t, y)?;
                    let k2 = self.rhs.eval(t + h / 2.0, &combine(y, h, &[0.5], &[k1.clone()]))?;
                    let k3 = self.rhs.eval(t + h / 2.0, &combine(y, h, &[0.5], &[k2.clone()]))?;
                    let k4 = self.rhs.eval(t + h, &combine(y, h, &[1.0], &[k3.clone()]))?;
                    *y = combine(y, h, &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0], &[k1, k2, k3, k4]);
                    self.accepted += 1;
                }
                Ok(())
            }
            Method::Dopri5 => self.advance_adaptive(y, t0, t1),
        }
    }

    fn advance_adaptive(&mut self, y: &mut CMatrix, t0: f64, t1: f64) -> Result<()> {
        let mut t = t0;
        while t < t1 {
            if self.accepted + self.rejected >= self.params.max_steps {
                return Err(Error::IntegrationQuality(format!("step budget of {} exhausted at t = {t}", self.params.max_steps)));
            }
            let remaining = t1 - t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let k1 = match self.k_first.take() {
                Some(k) => k,
                None => self.rhs.eval(t, y)?,
            };
            let mut ks: Vec<CMatrix> = Vec::with_capacity(7);
            ks.push(k1);
            for s in 1..7 {
                let stage = combine(y, h, &A[s][..s], &ks);
                ks.push(self.rhs.eval(t + C[s] * h, &stage)?);
            }
            let y5 = combine(y, h, &B5, &ks);
            let diff: Vec<f64> = B5.iter().zip(B4).map(|(a, b)| a - b).collect();
            let err = combine(&linalg::zeros(y.nrows()), h, &diff, &ks);
            let e = error_norm(&err, y, &y5, self.params.rtol, self.params.atol);
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            if e <= 1.0 {
                t = if last { t1 } else { t + h };
                *y = y5;
                self.k_first = ks.pop();
                self.accepted += 1;
                // A step shortened to land on an output time keeps the previous proposal.
                if h >= self.h {
                    self.h = h * factor;
                }
            } else {
                self.k_first = Some(ks.swap_remove(0));
                self.rejected += 1;
                self.h = h * factor.min(1.0);
                if self.h < self.h_min {
                    return Err(self.stiffness(t, self.h));
                }
            }
        }
        Ok(())
    }
}

/// Uniform output grid on `[0, t_f]`; a single point when `t_f = 0`.
pub fn output_grid(t_f: f64, points: usize) -> Vec<f64> {
    if t_f == 0.0 {
        return vec![0.0];
    }
    (0..points)
        .map(|i| if i + 1 == points { t_f } else { t_f * i as f64 / (points - 1) as f64 })
        .collect()
}

fn default_initial_state(source: &dyn HamiltonianSource) -> Result<CMatrix> {
    let (h, _) = source.evaluate(0.0)?;
    let spec = spectral::eigendecompose_default(&h, 0.0)?;
    let p0 = spec.ground_projector.clone();
    let tr = linalg::trace(&p0);
    Ok(p0 / tr)
}

fn check_initial_state(source: &dyn HamiltonianSource, rho0: &CMatrix) -> Result<()> {
    let dim = source.dim();
    if rho0.nrows() != dim || rho0.ncols() != dim {
        return Err(Error::Dimension(format!("rho0 is {}x{}, expected {dim}x{dim}", rho0.nrows(), rho0.ncols())));
    }
    linalg::ensure_hermitian(rho0, 1e-10, "rho0")?;
    let tr = linalg::trace(rho0).re;
    if (tr - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!("rho0 has trace {tr}")));
    }
    if linalg::min_eigenvalue(rho0) < -1e-10 {
        return Err(Error::Validation("rho0 is not positive semidefinite".into()));
    }
    let (h, _) = source.evaluate(0.0)?;
    let spec = spectral::eigendecompose_default(&h, 0.0)?;
    let p0 = &spec.ground_projector;
    let outside = linalg::trace_norm(&(rho0 - p0 * rho0 * p0));
    if outside >= 1e-10 {
        return Err(Error::Validation(format!("rho0 is not supported on the initial ground space (defect {outside:e})")));
    }
    Ok(())
}

struct Recorder<'a> {
    bath: &'a BathModel,
    codespace: Option<&'a CMatrix>,
    sum_f_norms: f64,
    out: TrajectoryResult,
}

impl Recorder<'_> {
    fn record(&mut self, t: f64, rho: &CMatrix, generator: &DaviesGenerator, h_dot: &CMatrix) -> Result<()> {
        let spec = generator.spectral();
        let dec = decompose(generator, self.bath, h_dot, rho)?;
        let min_eig = linalg::min_eigenvalue(rho);
        if min_eig < POSITIVITY_ABORT {
            return Err(Error::IntegrationQuality(format!(
                "density matrix eigenvalue {min_eig:e} at t = {t} violates positivity"
            )));
        }
        let tr = linalg::trace(rho).re;
        let p0 = &spec.ground_projector;
        let ground = linalg::trace(&(p0 * rho)).re;
        let q0 = linalg::identity(spec.dim()) - p0;
        let coherence = linalg::trace_norm(&(p0 * rho * &q0));
        let leakage = match self.codespace {
            Some(pc) => 1.0 - linalg::trace(&(pc * rho * pc)).re,
            None => 0.0,
        };
        let e0 = spec.ground_energy();
        let outside: Vec<bool> = spec
            .clusters
            .iter()
            .enumerate()
            .map(|(l, c)| match self.codespace {
                _ if l == 0 => false,
                Some(pc) => linalg::trace(&(pc * &c.projector)).re < c.multiplicity as f64 - 1e-6,
                None => true,
            })
            .collect();
        let diag = SnapshotDiagnostics {
            gap: spec.gap,
            hdot_norm: linalg::operator_norm(h_dot),
            excitation_energies: spec.clusters.iter().map(|c| c.energy - e0).collect(),
            outside_codespace: outside,
            m_up: dec.m.iter().map(|m| m.row(0).iter().copied().collect()).collect(),
            m_down: dec.m.iter().map(|m| m.column(0).iter().copied().collect()).collect(),
            m_min: dec.m.iter().flat_map(|m| m.iter().copied()).fold(f64::INFINITY, f64::min),
            sum_f_norms: self.sum_f_norms,
        };
        let o = &mut self.out;
        o.times.push(t);
        o.rho_snapshots.push(rho.clone());
        o.p_perp.push(tr - ground);
        o.rate_total.push(dec.r);
        o.rate_diag.push(dec.diag);
        o.rate_offdiag.push(dec.q);
        o.coherence_norm.push(coherence);
        o.codespace_leakage.push(leakage);
        o.trace_error.push((tr - 1.0).abs());
        o.min_eig.push(min_eig);
        o.diagnostics.push(diag);
        Ok(())
    }
}

/// Integrate `ρ̇ = L(t)[ρ]` over `[0, t_f]` and record every output-grid snapshot.
///
/// `rho0` defaults to the normalized initial ground projector.
pub fn evolve(
    source: &dyn HamiltonianSource,
    bath: &BathModel,
    rho0: Option<&CMatrix>,
    params: &IntegratorParams,
) -> Result<TrajectoryResult> {
    params.validate()?;
    let channels = bath::dense_channels(bath)?;
    let mut rho = match rho0 {
        Some(r) => {
            check_initial_state(source, r)?;
            r.clone()
        }
        None => default_initial_state(source)?,
    };
    let t_f = source.t_final();
    let grid = output_grid(t_f, params.output_points);
    let sum_f_norms = channels
        .iter()
        .map(|c| linalg::operator_norm(&c.operator).powi(2))
        .sum();
    let mut recorder = Recorder {
        bath,
        codespace: source.codespace_projector(),
        sum_f_norms,
        out: TrajectoryResult {
            times: Vec::new(),
            rho_snapshots: Vec::new(),
            p_perp: Vec::new(),
            rate_total: Vec::new(),
            rate_diag: Vec::new(),
            rate_offdiag: Vec::new(),
            coherence_norm: Vec::new(),
            codespace_leakage: Vec::new(),
            trace_error: Vec::new(),
            min_eig: Vec::new(),
            diagnostics: Vec::new(),
            accepted_steps: 0,
            rejected_steps: 0,
        },
    };
    let mut stepper = Stepper {
        rhs: Rhs {
            source,
            bath,
            channels: &channels,
        },
        params: *params,
        h: if grid.len() > 1 { (grid[1] - grid[0]).min(0.05) } else { 0.0 },
        k_first: None,
        accepted: 0,
        rejected: 0,
        h_min: 1e-12 * t_f.max(1.0),
    };
    let (gen0, hdot0) = stepper.rhs.generator(0.0)?;
    recorder.record(0.0, &rho, &gen0, &hdot0)?;
    for w in grid.windows(2) {
        stepper.advance(&mut rho, w[0], w[1])?;
        let (g, hd) = stepper.rhs.generator(w[1])?;
        recorder.record(w[1], &rho, &g, &hd)?;
    }
    recorder.out.accepted_steps = stepper.accepted;
    recorder.out.rejected_steps = stepper.rejected;
    Ok(recorder.out)
}
