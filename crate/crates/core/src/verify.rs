//! Invariant battery behind the `verify` subcommand.

use crate::bath;
use crate::codes::{self, StabilizerCode};
use crate::config::RunConfig;
use crate::davies::{self, generator_matrix};
use crate::error::Result;
use crate::linalg;
use crate::model::{EncodedModel, HamiltonianSource, Schedule};
use crate::parallel::Execution;
use crate::pauli::{self, PauliTerm};
use crate::propagate::{evolve, IntegratorParams, TrajectoryResult};
use crate::spectral;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub violation: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.violation <= self.tolerance
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

/// Worst `|γ(-ω)/γ(ω) - e^{-βω}|` over `omegas` and the frequency where it occurs.
pub fn kms_violation(rate: &dyn Fn(f64) -> f64, beta: f64, omegas: &[f64]) -> (f64, f64) {
    let mut worst = (0.0, 0.0);
    for &w in omegas {
        let v = (rate(-w) / rate(w) - (-beta * w).exp()).abs();
        if v > worst.0 {
            worst = (v, w);
        }
    }
    worst
}

/// Interior mismatch between a centered difference of `Tr(Π_0 ρ)` and the recorded rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateIdentity {
    /// Largest `|FD - R| / max(1e-4 |R|, 1e-8)`; at most 1 when the identity holds.
    pub worst_ratio: f64,
    pub max_abs_error: f64,
    pub failures: usize,
    pub checked: usize,
}

/// Finite-difference stencil on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// `(g[i+1] - g[i-1]) / 2h`.
    Centered2,
    /// `(-g[i+2] + 8 g[i+1] - 8 g[i-1] + g[i-2]) / 12h`.
    Centered4,
}

pub fn rate_identity(traj: &TrajectoryResult, stencil: Stencil) -> RateIdentity {
    let g = traj.ground_population();
    let t = &traj.times;
    let reach = match stencil {
        Stencil::Centered2 => 1,
        Stencil::Centered4 => 2,
    };
    let mut out = RateIdentity {
        worst_ratio: 0.0,
        max_abs_error: 0.0,
        failures: 0,
        checked: 0,
    };
    for i in reach..traj.len().saturating_sub(reach) {
        let fd = match stencil {
            Stencil::Centered2 => (g[i + 1] - g[i - 1]) / (t[i + 1] - t[i - 1]),
            Stencil::Centered4 => {
                (-g[i + 2] + 8.0 * g[i + 1] - 8.0 * g[i - 1] + g[i - 2]) / (3.0 * (t[i + 2] - t[i - 2]))
            }
        };
        let r = traj.rate_total[i];
        let err = (fd - r).abs();
        let ratio = err / (1e-4 * r.abs()).max(1e-8);
        out.worst_ratio = out.worst_ratio.max(ratio);
        out.max_abs_error = out.max_abs_error.max(err);
        out.checked += 1;
        if ratio > 1.0 {
            out.failures += 1;
        }
    }
    out
}

fn pauli_algebra(n: usize) -> Result<f64> {
    let all = PauliTerm::enumerate_up_to_weight(n, n)?;
    let dense: Vec<_> = all.iter().map(|p| p.to_dense()).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for (a, da) in all.iter().zip(&dense) {
        for (b, db) in all.iter().zip(&dense) {
            let prod = pauli::multiply(a, b)?.to_dense()?;
            worst = worst.max(linalg::max_abs(&(prod - da * db)));
            let comm = linalg::max_abs(&linalg::commutator(da, db));
            let predicted = if pauli::commutes(a, b)? { 0.0 } else { 2.0 };
            worst = worst.max((comm - predicted).abs());
        }
    }
    Ok(worst)
}

fn detection(code: &StabilizerCode) -> Result<(f64, f64)> {
    let weight1 = codes::verify_detection(code, 1)?.worst_below_weight(2);
    let weight2 = codes::verify_detection(code, 2)?.worst_below_weight(3);
    Ok((weight1, weight2))
}

/// Run every check on the instance described by `cfg`.
///
/// A zero `kappa` is replaced by `1e-2`, since the thermal checks need a bath.
pub fn run_checks(cfg: &RunConfig, rate: Option<&dyn Fn(f64) -> f64>) -> Result<VerifyReport> {
    let model = cfg.model()?;
    let kappa = if cfg.kappa > 0.0 { cfg.kappa } else { 1e-2 };
    let bath = cfg.bath()?.with_kappa(kappa)?;
    let mut checks = Vec::new();

    checks.push(Check {
        name: "pauli algebra (2 qubits, exhaustive)",
        violation: pauli_algebra(2)?,
        tolerance: 1e-14,
    });

    let (w1, w2) = detection(model.code())?;
    checks.push(Check {
        name: "weight-1 errors detected",
        violation: w1,
        tolerance: 1e-12,
    });
    let d = model.code().d();
    if d == 2 {
        checks.push(Check {
            name: "some weight-2 error undetected",
            violation: if w2 > 1e-12 { 0.0 } else { 1.0 },
            tolerance: 0.0,
        });
    }

    let native = |w: f64| bath::gamma(&bath, w);
    let rate = rate.unwrap_or(&native);
    let omegas: Vec<f64> = (1..=40).map(|k| 0.25 * k as f64).collect();
    let (kms, _) = kms_violation(rate, bath.beta(), &omegas);
    checks.push(Check {
        name: "KMS ratio",
        violation: kms,
        tolerance: 1e-12,
    });

    let t_mid = 0.5 * model.t_final();
    let (h, _) = model.evaluate(t_mid)?;
    let spec = spectral::eigendecompose_default(&h, t_mid)?;
    let w = davies::markov_w(&spec, &bath::dense_channels(&bath)?, &bath)?;
    checks.push(Check {
        name: "detailed balance",
        violation: davies::check_detailed_balance(&w, bath.beta()),
        tolerance: 1e-9,
    });
    checks.push(Check {
        name: "W entries non-negative",
        violation: w.w.iter().fold(0.0f64, |a, &x| a.max(-x)),
        tolerance: 1e-14,
    });

    let frozen = model.frozen_at(t_mid, 1.0)?;
    let snap = generator_matrix(&frozen, &bath, 0.0, Execution::default())?;
    let (rho_ss, _) = davies::stationary_state(&snap.superoperator, frozen.dim())?;
    let gibbs = davies::gibbs_state(frozen.hamiltonian(), bath.beta())?;
    checks.push(Check {
        name: "Gibbs state is stationary",
        violation: linalg::trace_distance(&rho_ss, &gibbs),
        tolerance: 1e-8,
    });

    let short = EncodedModel::new(
        model.code().clone(),
        model.problem().clone(),
        Schedule::new(model.schedule().v(), 5.0)?,
        model.eta_p(),
    )?;
    let params = IntegratorParams {
        rtol: 1e-10,
        atol: 1e-12,
        output_points: 501,
        ..Default::default()
    };
    let traj = evolve(&short, &bath, None, &params)?;
    checks.push(Check {
        name: "rate identity (t_f = 5)",
        violation: rate_identity(&traj, Stencil::Centered4).worst_ratio,
        tolerance: 1.0,
    });

    Ok(VerifyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::BathModel;

    #[test]
    fn pristine_build_passes() {
        let report = run_checks(&RunConfig::default(), None).unwrap();
        for c in &report.checks {
            assert!(c.passed(), "{c:?}");
        }
        assert_eq!(report.checks.len(), 8);
    }

    #[test]
    fn kms_sign_flip_is_caught() {
        let bath = BathModel::x_and_z_all_qubits(4, 1.0, 8.0, 1e-3).unwrap();
        let flipped = |w: f64| bath::gamma(&bath, -w);
        let w = 1.5;
        let (v, at) = kms_violation(&flipped, 1.0, &[w]);
        assert_eq!(at, w);
        let expected = w.exp() - (-w).exp();
        assert!((v - expected).abs() < 1e-12 * expected, "{v} vs {expected}");

        let cfg = RunConfig::default();
        let report = run_checks(&cfg, Some(&flipped)).unwrap();
        let kms = report.checks.iter().find(|c| c.name == "KMS ratio").unwrap();
        assert!(!kms.passed());
        assert!(!report.all_passed());
    }

    #[test]
    fn oversize_config_fails_before_checks() {
        let cfg = RunConfig::from_toml_str("[code]\npad = 5").unwrap();
        assert!(matches!(run_checks(&cfg, None), Err(crate::Error::Resource(_))));
    }
}
