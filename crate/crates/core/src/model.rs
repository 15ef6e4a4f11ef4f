//! Annealing schedules and the encoded Hamiltonian `H(t) = η_p H_p + H̄_S(t)`.

use num_complex::Complex64;

use crate::codes::{self, StabilizerCode};
use crate::linalg::{self, CMatrix};
use crate::pauli::PauliSum;
use crate::{Error, Result};

/// Interpolation schedule whose ramp has `v` vanishing derivatives at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    v: u32,
    t_f: f64,
}

impl Schedule {
    /// `t_f = 0` is accepted and describes a run with no evolution.
    pub fn new(v: u32, t_f: f64) -> Result<Self> {
        if !(t_f >= 0.0) || !t_f.is_finite() {
            return Err(Error::Domain(format!("t_f must be finite and >= 0, got {t_f}")));
        }
        if v > 20 {
            return Err(Error::Domain(format!("v = {v} is beyond the supported range")));
        }
        Ok(Self { v, t_f })
    }

    pub fn v(&self) -> u32 {
        self.v
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    /// Dimensionless time `s = t / t_f`, validating `t ∈ [0, t_f]`.
    pub fn s_of(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * self.t_f.max(1.0);
        if !(t >= -slack && t <= self.t_f + slack) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", self.t_f)));
        }
        if self.t_f == 0.0 {
            return Ok(0.0);
        }
        Ok((t / self.t_f).clamp(0.0, 1.0))
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn check_s(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("s = {s} outside [0, 1]")));
    }
    Ok(())
}

/// Regularized incomplete beta ramp `I_s(v+1, v+1)`.
pub fn ramp(schedule: &Schedule, s: f64) -> Result<f64> {
    check_s(s)?;
    let v = schedule.v;
    let m = 2 * v + 1;
    Ok((v + 1..=m)
        .map(|j| binomial(m, j) * s.powi(j as i32) * (1.0 - s).powi((m - j) as i32))
        .sum())
}

/// `d ramp / ds = s^v (1-s)^v / B(v+1, v+1)`.
pub fn ramp_derivative(schedule: &Schedule, s: f64) -> Result<f64> {
    check_s(s)?;
    let v = schedule.v;
    // 1 / B(v+1, v+1) = (2v+1)! / (v!)^2 = (2v+1) * C(2v, v)
    let norm = f64::from(2 * v + 1) * binomial(2 * v, v);
    Ok(norm * (s * (1.0 - s)).powi(v as i32))
}

/// Endpoint values of the encoded problem coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalProblem {
    pub k: usize,
    pub h_x_init: Vec<f64>,
    pub h_x_final: Vec<f64>,
    pub h_z_init: Vec<f64>,
    pub h_z_final: Vec<f64>,
    pub j_x_init: Vec<Vec<f64>>,
    pub j_x_final: Vec<Vec<f64>>,
    pub j_z_init: Vec<Vec<f64>>,
    pub j_z_final: Vec<Vec<f64>>,
}

impl LogicalProblem {
    pub fn zero(k: usize) -> Self {
        Self {
            k,
            h_x_init: vec![0.0; k],
            h_x_final: vec![0.0; k],
            h_z_init: vec![0.0; k],
            h_z_final: vec![0.0; k],
            j_x_init: vec![vec![0.0; k]; k],
            j_x_final: vec![vec![0.0; k]; k],
            j_z_init: vec![vec![0.0; k]; k],
            j_z_final: vec![vec![0.0; k]; k],
        }
    }

    /// Two logical qubits annealed from `-X̄₁ - X̄₂` to `-Z̄₁Z̄₂ - 0.5 Z̄₁`.
    pub fn default_desk() -> Self {
        let mut p = Self::zero(2);
        p.h_x_init = vec![-1.0, -1.0];
        p.h_z_final = vec![-0.5, 0.0];
        p.j_z_final[0][1] = -1.0;
        p.j_z_final[1][0] = -1.0;
        p
    }

    pub fn validate(&self) -> Result<()> {
        let vecs = [
            ("h_x_init", &self.h_x_init),
            ("h_x_final", &self.h_x_final),
            ("h_z_init", &self.h_z_init),
            ("h_z_final", &self.h_z_final),
        ];
        for (name, v) in vecs {
            if v.len() != self.k {
                return Err(Error::Dimension(format!("{name} has length {}, expected {}", v.len(), self.k)));
            }
        }
        let tables = [
            ("j_x_init", &self.j_x_init),
            ("j_x_final", &self.j_x_final),
            ("j_z_init", &self.j_z_init),
            ("j_z_final", &self.j_z_final),
        ];
        for (name, t) in tables {
            if t.len() != self.k || t.iter().any(|row| row.len() != self.k) {
                return Err(Error::Dimension(format!("{name} must be {k}x{k}", k = self.k)));
            }
            for i in 0..self.k {
                if t[i][i] != 0.0 {
                    return Err(Error::Validation(format!("{name} has a nonzero diagonal entry at {i}")));
                }
                for j in 0..i {
                    if t[i][j] != t[j][i] {
                        return Err(Error::Validation(format!("{name} is not symmetric at ({i}, {j})")));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_code(&self, code: &StabilizerCode) -> Result<()> {
        self.validate()?;
        if self.k != code.k() {
            return Err(Error::Dimension(format!(
                "problem has k = {} but the code encodes {}",
                self.k,
                code.k()
            )));
        }
        Ok(())
    }

    /// Every logical term as `(init, final, Pauli sum of the term)`.
    fn terms(&self, code: &StabilizerCode) -> Result<Vec<(f64, f64, PauliSum)>> {
        self.check_code(code)?;
        let (lx, lz) = (code.logical_x(), code.logical_z());
        let mut out = Vec::new();
        for i in 0..self.k {
            out.push((self.h_x_init[i], self.h_x_final[i], PauliSum::single(1.0, lx[i])?));
            out.push((self.h_z_init[i], self.h_z_final[i], PauliSum::single(1.0, lz[i])?));
        }
        for i in 0..self.k {
            for j in i + 1..self.k {
                let (sx, px) = codes::logical_product(&lx[i], &lx[j])?;
                let (sz, pz) = codes::logical_product(&lz[i], &lz[j])?;
                out.push((self.j_x_init[i][j], self.j_x_final[i][j], PauliSum::single(sx, px)?));
                out.push((self.j_z_init[i][j], self.j_z_final[i][j], PauliSum::single(sz, pz)?));
            }
        }
        Ok(out)
    }
}

/// `H̄_S(t)` with every coefficient interpolated along `ramp(t / t_f)`.
pub fn system_hamiltonian(
    problem: &LogicalProblem,
    code: &StabilizerCode,
    schedule: &Schedule,
    t: f64,
) -> Result<PauliSum> {
    let r = ramp(schedule, schedule.s_of(t)?)?;
    let mut sum = PauliSum::zero(code.n())?;
    for (c0, c1, term) in problem.terms(code)? {
        let c = c0 + r * (c1 - c0);
        if c != 0.0 {
            sum = sum.add(&term.scaled(c))?;
        }
    }
    Ok(sum)
}

/// `(H(t), Ḣ(t))` as dense matrices, `Ḣ` assembled from the ramp derivative.
pub fn total_hamiltonian(
    problem: &LogicalProblem,
    code: &StabilizerCode,
    schedule: &Schedule,
    eta_p: f64,
    t: f64,
) -> Result<(CMatrix, CMatrix)> {
    let s = schedule.s_of(t)?;
    let (hp, _) = codes::penalty_hamiltonian(code)?;
    let h = hp.to_dense()? * Complex64::new(eta_p, 0.0)
        + system_hamiltonian(problem, code, schedule, t)?.to_dense()?;
    let mut delta = PauliSum::zero(code.n())?;
    for (c0, c1, term) in problem.terms(code)? {
        delta = delta.add(&term.scaled(c1 - c0))?;
    }
    let rate = if schedule.t_f() > 0.0 {
        ramp_derivative(schedule, s)? / schedule.t_f()
    } else {
        0.0
    };
    let h_dot = delta.to_dense()? * Complex64::new(rate, 0.0);
    Ok((h, h_dot))
}

/// A time-dependent Hamiltonian on `[0, t_final]` with its exact derivative.
pub trait HamiltonianSource: Sync {
    fn dim(&self) -> usize;

    fn t_final(&self) -> f64;

    /// `(H(t), Ḣ(t))`.
    fn evaluate(&self, t: f64) -> Result<(CMatrix, CMatrix)>;

    /// Codespace projector, when the Hamiltonian comes from a code.
    fn codespace_projector(&self) -> Option<&CMatrix> {
        None
    }

    /// Energy-penalty parameters `(η_p, g)` for encoded models.
    fn penalty(&self) -> Option<(f64, f64)> {
        None
    }
}

/// A constant Hamiltonian held for `t_final`.
#[derive(Debug, Clone)]
pub struct FrozenHamiltonian {
    h: CMatrix,
    t_final: f64,
    codespace: Option<CMatrix>,
}

impl FrozenHamiltonian {
    pub fn new(h: CMatrix, t_final: f64) -> Result<Self> {
        linalg::ensure_hermitian(&h, 1e-10, "Hamiltonian")?;
        Ok(Self {
            h,
            t_final,
            codespace: None,
        })
    }

    pub fn with_codespace(mut self, projector: CMatrix) -> Self {
        self.codespace = Some(projector);
        self
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.h
    }
}

impl HamiltonianSource for FrozenHamiltonian {
    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn t_final(&self) -> f64 {
        self.t_final
    }

    fn evaluate(&self, _t: f64) -> Result<(CMatrix, CMatrix)> {
        Ok((self.h.clone(), linalg::zeros(self.h.nrows())))
    }

    fn codespace_projector(&self) -> Option<&CMatrix> {
        self.codespace.as_ref()
    }
}

/// The encoded annealing model with dense pieces cached:
/// `H(t) = η_p H_p + A + ramp(s) B`, `Ḣ(t) = ramp'(s) / t_f · B`.
#[derive(Debug, Clone)]
pub struct EncodedModel {
    code: StabilizerCode,
    problem: LogicalProblem,
    schedule: Schedule,
    eta_p: f64,
    penalty_dense: CMatrix,
    initial_dense: CMatrix,
    delta_dense: CMatrix,
    codespace: CMatrix,
}

impl EncodedModel {
    pub fn new(code: StabilizerCode, problem: LogicalProblem, schedule: Schedule, eta_p: f64) -> Result<Self> {
        if !(eta_p >= 0.0) || !eta_p.is_finite() {
            return Err(Error::Domain(format!("eta_p must be finite and >= 0, got {eta_p}")));
        }
        let (hp, _) = codes::penalty_hamiltonian(&code)?;
        let dim = code.dim();
        let mut initial = linalg::zeros(dim);
        let mut delta = linalg::zeros(dim);
        for (c0, c1, term) in problem.terms(&code)? {
            let dense = term.to_dense()?;
            initial += &dense * Complex64::new(c0, 0.0);
            delta += &dense * Complex64::new(c1 - c0, 0.0);
        }
        let codespace = codes::codespace_projector(&code)?;
        Ok(Self {
            penalty_dense: hp.to_dense()?,
            code,
            problem,
            schedule,
            eta_p,
            initial_dense: initial,
            delta_dense: delta,
            codespace,
        })
    }

    pub fn code(&self) -> &StabilizerCode {
        &self.code
    }

    pub fn problem(&self) -> &LogicalProblem {
        &self.problem
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn eta_p(&self) -> f64 {
        self.eta_p
    }

    pub fn penalty_dense(&self) -> &CMatrix {
        &self.penalty_dense
    }

    /// Dense `H̄_S(t)`.
    pub fn system_dense(&self, t: f64) -> Result<CMatrix> {
        let r = ramp(&self.schedule, self.schedule.s_of(t)?)?;
        Ok(&self.initial_dense + &self.delta_dense * Complex64::new(r, 0.0))
    }

    /// A copy of this model with a different penalty strength.
    pub fn with_eta(&self, eta_p: f64) -> Result<Self> {
        if !(eta_p >= 0.0) {
            return Err(Error::Domain(format!("eta_p must be >= 0, got {eta_p}")));
        }
        let mut out = self.clone();
        out.eta_p = eta_p;
        Ok(out)
    }

    /// The model frozen at time `t` (held for `t_final`).
    pub fn frozen_at(&self, t: f64, t_final: f64) -> Result<FrozenHamiltonian> {
        let (h, _) = self.evaluate(t)?;
        Ok(FrozenHamiltonian::new(h, t_final)?.with_codespace(self.codespace.clone()))
    }
}

impl HamiltonianSource for EncodedModel {
    fn dim(&self) -> usize {
        self.code.dim()
    }

    fn t_final(&self) -> f64 {
        self.schedule.t_f()
    }

    fn evaluate(&self, t: f64) -> Result<(CMatrix, CMatrix)> {
        let s = self.schedule.s_of(t)?;
        let r = ramp(&self.schedule, s)?;
        let h = &self.penalty_dense * Complex64::new(self.eta_p, 0.0)
            + &self.initial_dense
            + &self.delta_dense * Complex64::new(r, 0.0);
        let rate = if self.schedule.t_f() > 0.0 {
            ramp_derivative(&self.schedule, s)? / self.schedule.t_f()
        } else {
            0.0
        };
        Ok((h, &self.delta_dense * Complex64::new(rate, 0.0)))
    }

    fn codespace_projector(&self) -> Option<&CMatrix> {
        Some(&self.codespace)
    }

    fn penalty(&self) -> Option<(f64, f64)> {
        Some((self.eta_p, codes::penalty_gap(&self.code)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, max_abs};
    use crate::pauli::PauliTerm;

    fn desk(eta_p: f64, v: u32, t_f: f64) -> EncodedModel {
        EncodedModel::new(
            StabilizerCode::preset("422").unwrap(),
            LogicalProblem::default_desk(),
            Schedule::new(v, t_f).unwrap(),
            eta_p,
        )
        .unwrap()
    }

    #[test]
    fn linear_ramp_for_v0() {
        let s = Schedule::new(0, 1.0).unwrap();
        assert_eq!(ramp(&s, 0.5).unwrap(), 0.5);
        assert_eq!(ramp_derivative(&s, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn ramp_boundaries() {
        for v in 0..6 {
            let s = Schedule::new(v, 1.0).unwrap();
            assert!(ramp(&s, 0.0).unwrap().abs() < 1e-15);
            assert!((ramp(&s, 1.0).unwrap() - 1.0).abs() < 1e-13);
        }
        let s = Schedule::new(1, 1.0).unwrap();
        assert!(matches!(ramp(&s, 1.5), Err(Error::Domain(_))));
        assert!(matches!(ramp(&s, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn v1_ramp_midpoint_and_slope() {
        let s = Schedule::new(1, 1.0).unwrap();
        assert!((ramp(&s, 0.5).unwrap() - 0.5).abs() < 1e-15);
        let d = ramp_derivative(&s, 0.5).unwrap();
        assert!((d - 1.5).abs() < 1e-15);
        let h = 1e-5;
        let fd = (ramp(&s, 0.5 + h).unwrap() - ramp(&s, 0.5 - h).unwrap()) / (2.0 * h);
        assert!((fd - d).abs() < 1e-8);
    }

    #[test]
    fn ramp_derivative_matches_finite_differences() {
        for v in 0..5 {
            let s = Schedule::new(v, 1.0).unwrap();
            for k in 1..20 {
                let x = k as f64 / 20.0;
                let h = 1e-6;
                let fd = (ramp(&s, x + h).unwrap() - ramp(&s, x - h).unwrap()) / (2.0 * h);
                assert!((fd - ramp_derivative(&s, x).unwrap()).abs() < 1e-7, "v={v} s={x}");
            }
        }
    }

    #[test]
    fn ramp_endpoint_derivatives_vanish_to_order_v() {
        // j-th forward differences at the endpoints shrink like h^(v+1-j).
        fn forward_difference(f: &dyn Fn(f64) -> f64, x: f64, h: f64, order: u32) -> f64 {
            (0..=order)
                .map(|i| {
                    let sign = if (order - i) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial(order, i) * f(x + f64::from(i) * h)
                })
                .sum::<f64>()
                / h.powi(order as i32)
        }
        for v in 1..4u32 {
            let s = Schedule::new(v, 1.0).unwrap();
            let at_start = |x: f64| ramp(&s, x).unwrap();
            let at_end = |x: f64| 1.0 - ramp(&s, 1.0 - x).unwrap();
            for order in 1..=v {
                let expected = 10f64.powi((v + 1 - order) as i32);
                for g in [&at_start as &dyn Fn(f64) -> f64, &at_end] {
                    let coarse = forward_difference(g, 0.0, 1e-2, order);
                    let fine = forward_difference(g, 0.0, 1e-3, order);
                    let ratio = coarse / fine;
                    assert!((ratio / expected - 1.0).abs() < 0.1, "v={v} j={order} ratio={ratio}");
                }
            }
            assert!(ramp_derivative(&s, 0.0).unwrap().abs() < 1e-6);
            assert!(ramp_derivative(&s, 1.0).unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn ramp_is_monotone() {
        for v in 0..5 {
            let s = Schedule::new(v, 1.0).unwrap();
            let mut prev = 0.0;
            for k in 0..=200 {
                let r = ramp(&s, k as f64 / 200.0).unwrap();
                assert!(r >= prev - 1e-15);
                prev = r;
            }
        }
    }

    #[test]
    fn zero_problem_gives_empty_sum() {
        let code = StabilizerCode::preset("422").unwrap();
        let sched = Schedule::new(1, 10.0).unwrap();
        let h = system_hamiltonian(&LogicalProblem::zero(2), &code, &sched, 3.0).unwrap();
        assert!(h.is_empty());
    }

    #[test]
    fn constant_single_field() {
        let code = StabilizerCode::preset("422").unwrap();
        let sched = Schedule::new(1, 10.0).unwrap();
        let mut p = LogicalProblem::zero(2);
        p.h_x_init[0] = 1.0;
        p.h_x_final[0] = 1.0;
        for t in [0.0, 2.5, 10.0] {
            let h = system_hamiltonian(&p, &code, &sched, t).unwrap();
            assert_eq!(h.terms(), &[(1.0, "XXII".parse::<PauliTerm>().unwrap())]);
        }
        assert!(matches!(system_hamiltonian(&p, &code, &sched, 11.0), Err(Error::Domain(_))));
    }

    #[test]
    fn penalty_commutes_with_encoded_hamiltonian() {
        let model = desk(1.0, 1, 10.0);
        let hp = model.penalty_dense().clone();
        for k in 0..20 {
            let t = 10.0 * (k as f64 + 0.37) / 20.0;
            let hs = model.system_dense(t).unwrap();
            assert!(max_abs(&commutator(&hp, &hs)) < 1e-12);
        }
    }

    #[test]
    fn eta_zero_is_bare_system() {
        let code = StabilizerCode::preset("422").unwrap();
        let p = LogicalProblem::default_desk();
        let sched = Schedule::new(1, 10.0).unwrap();
        let (h, _) = total_hamiltonian(&p, &code, &sched, 0.0, 4.0).unwrap();
        let hs = system_hamiltonian(&p, &code, &sched, 4.0).unwrap().to_dense().unwrap();
        assert!(max_abs(&(h - hs)) < 1e-15);
    }

    #[test]
    fn constant_coefficients_have_zero_derivative() {
        let code = StabilizerCode::preset("422").unwrap();
        let mut p = LogicalProblem::zero(2);
        p.h_z_init = vec![0.3, -0.2];
        p.h_z_final = vec![0.3, -0.2];
        let sched = Schedule::new(2, 10.0).unwrap();
        let (_, hdot) = total_hamiltonian(&p, &code, &sched, 2.0, 5.0).unwrap();
        assert_eq!(max_abs(&hdot), 0.0);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let code = StabilizerCode::preset("422").unwrap();
        let p = LogicalProblem::default_desk();
        for v in [0, 1, 2] {
            let t_f = 20.0;
            let sched = Schedule::new(v, t_f).unwrap();
            let delta = 1e-5 * t_f;
            for t in [3.0, 9.5, 15.0] {
                let (_, hdot) = total_hamiltonian(&p, &code, &sched, 2.0, t).unwrap();
                let (hp, _) = total_hamiltonian(&p, &code, &sched, 2.0, t + delta).unwrap();
                let (hm, _) = total_hamiltonian(&p, &code, &sched, 2.0, t - delta).unwrap();
                let fd = (hp - hm) / Complex64::new(2.0 * delta, 0.0);
                assert!(max_abs(&(fd - hdot)) < 1e-6);
            }
        }
    }

    #[test]
    fn cached_model_matches_direct_assembly() {
        let model = desk(3.0, 2, 25.0);
        for t in [0.0, 7.0, 25.0] {
            let (h1, d1) = model.evaluate(t).unwrap();
            let (h2, d2) = total_hamiltonian(model.problem(), model.code(), model.schedule(), 3.0, t).unwrap();
            assert!(max_abs(&(h1 - h2)) < 1e-13);
            assert!(max_abs(&(d1 - d2)) < 1e-13);
        }
    }

    #[test]
    fn problem_validation() {
        let mut p = LogicalProblem::default_desk();
        p.j_z_final[0][0] = 1.0;
        assert!(p.validate().is_err());
        let mut p = LogicalProblem::default_desk();
        p.j_z_final[1][0] = 0.0;
        assert!(p.validate().is_err());
        let code = StabilizerCode::preset("z1").unwrap();
        assert!(EncodedModel::new(code, LogicalProblem::default_desk(), Schedule::new(1, 1.0).unwrap(), 1.0).is_err());
    }
}
