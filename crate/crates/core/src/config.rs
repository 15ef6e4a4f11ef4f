//! TOML run configuration.
//!
//! ```toml
//! [code]
//! preset = "422"
//! pad = 0
//!
//! [problem]
//! preset = "default"
//!
//! [schedule]
//! t_f = 50.0
//! v = 1
//!
//! [penalty]
//! eta_p = 2.0
//!
//! [bath]
//! beta = 1.0
//! omega_c = 8.0
//! kappa = 1e-3
//! coupling = "x_and_z_all_qubits"
//!
//! [integrator]
//! method = "dopri5"
//! rtol = 1e-8
//! atol = 1e-10
//! output_points = 201
//!
//! [output]
//! dir = "out"
//! prefix = "run"
//! ```
//!
//! Every section and key is optional; missing keys take the defaults above.
//! Unknown keys are rejected so typos surface as errors.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::bath::BathModel;
use crate::codes::StabilizerCode;
use crate::error::{Error, Result};
use crate::model::{EncodedModel, LogicalProblem, Schedule};
use crate::pauli::DEFAULT_MAX_DENSE_QUBITS;
use crate::propagate::{IntegratorParams, Method};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub code_preset: String,
    pub pad: usize,
    pub problem: LogicalProblem,
    pub eta_p: f64,
    pub beta: f64,
    pub omega_c: f64,
    pub kappa: f64,
    pub coupling: String,
    pub t_f: f64,
    pub v: u32,
    pub integrator: IntegratorParams,
    pub output_dir: PathBuf,
    pub prefix: String,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            code_preset: "422".into(),
            pad: 0,
            problem: LogicalProblem::default_desk(),
            eta_p: 2.0,
            beta: 1.0,
            omega_c: 8.0,
            kappa: 1e-3,
            coupling: "x_and_z_all_qubits".into(),
            t_f: 50.0,
            v: 1,
            integrator: IntegratorParams::default(),
            output_dir: PathBuf::from("."),
            prefix: "run".into(),
            seed: 0,
        }
    }
}

/// Keys of one section, consumed as they are read.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    seen: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str) -> Result<Self> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(Error::config(name, "expected a table")),
        };
        Ok(Self {
            name,
            table,
            seen: Vec::new(),
        })
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{}", self.name, k)
    }

    fn raw(&mut self, k: &'static str) -> Option<&'a Value> {
        self.seen.push(k);
        self.table.and_then(|t| t.get(k))
    }

    fn f64(&mut self, k: &'static str, default: f64) -> Result<f64> {
        match self.raw(k) {
            None => Ok(default),
            Some(Value::Float(x)) => Ok(*x),
            Some(Value::Integer(i)) => Ok(*i as f64),
            Some(other) => Err(Error::config(self.key(k), format!("expected a number, got {}", other.type_str()))),
        }
    }

    fn uint(&mut self, k: &'static str, default: u64) -> Result<u64> {
        match self.raw(k) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(other) => Err(Error::config(self.key(k), format!("expected a non-negative integer, got {other}"))),
        }
    }

    fn string(&mut self, k: &'static str, default: &str) -> Result<String> {
        match self.raw(k) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(Error::config(self.key(k), format!("expected a string, got {}", other.type_str()))),
        }
    }

    fn vector(&mut self, k: &'static str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.raw(k) else {
            return Ok(None);
        };
        let key = self.key(k);
        let arr = v.as_array().ok_or_else(|| Error::config(&key, "expected an array of numbers"))?;
        arr.iter()
            .map(|x| match x {
                Value::Float(f) => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(Error::config(&key, "expected an array of numbers")),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn matrix(&mut self, k: &'static str) -> Result<Option<Vec<Vec<f64>>>> {
        let Some(v) = self.raw(k) else {
            return Ok(None);
        };
        let key = self.key(k);
        let rows = v.as_array().ok_or_else(|| Error::config(&key, "expected an array of arrays"))?;
        rows.iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| Error::config(&key, "expected an array of arrays"))?
                    .iter()
                    .map(|x| match x {
                        Value::Float(f) => Ok(*f),
                        Value::Integer(i) => Ok(*i as f64),
                        _ => Err(Error::config(&key, "expected numbers")),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn finish(self) -> Result<()> {
        if let Some(t) = self.table {
            if let Some(k) = t.keys().find(|k| !self.seen.contains(&k.as_str())) {
                return Err(Error::config(format!("{}.{}", self.name, k), "unknown key"));
            }
        }
        Ok(())
    }
}

const SECTIONS: [&str; 7] = ["code", "problem", "schedule", "penalty", "bath", "integrator", "output"];

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            Error::config("<document>", msg)
        })?;
        if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(Error::config(k.as_str(), "unknown section"));
        }
        let d = RunConfig::default();

        let mut s = Section::new(&root, "code")?;
        let code_preset = s.string("preset", &d.code_preset)?;
        let pad = s.uint("pad", 0)? as usize;
        s.finish()?;

        let code = StabilizerCode::preset(&code_preset).map_err(|e| Error::config("code.preset", e.to_string()))?;
        let mut s = Section::new(&root, "problem")?;
        let preset = s.string("preset", "default")?;
        let mut problem = match preset.as_str() {
            "default" => LogicalProblem::default_desk(),
            "zero" => LogicalProblem::zero(code.k()),
            other => return Err(Error::config("problem.preset", format!("unknown problem preset {other:?}"))),
        };
        if let Some(v) = s.vector("h_x_init")? {
            problem.h_x_init = v;
        }
        if let Some(v) = s.vector("h_x_final")? {
            problem.h_x_final = v;
        }
        if let Some(v) = s.vector("h_z_init")? {
            problem.h_z_init = v;
        }
        if let Some(v) = s.vector("h_z_final")? {
            problem.h_z_final = v;
        }
        if let Some(m) = s.matrix("j_x_init")? {
            problem.j_x_init = m;
        }
        if let Some(m) = s.matrix("j_x_final")? {
            problem.j_x_final = m;
        }
        if let Some(m) = s.matrix("j_z_init")? {
            problem.j_z_init = m;
        }
        if let Some(m) = s.matrix("j_z_final")? {
            problem.j_z_final = m;
        }
        s.finish()?;

        let mut s = Section::new(&root, "schedule")?;
        let t_f = s.f64("t_f", d.t_f)?;
        let v = s.uint("v", d.v as u64)?;
        s.finish()?;

        let mut s = Section::new(&root, "penalty")?;
        let eta_p = s.f64("eta_p", d.eta_p)?;
        s.finish()?;

        let mut s = Section::new(&root, "bath")?;
        let beta = s.f64("beta", d.beta)?;
        let omega_c = s.f64("omega_c", d.omega_c)?;
        let kappa = s.f64("kappa", d.kappa)?;
        let coupling = s.string("coupling", &d.coupling)?;
        s.finish()?;

        let mut s = Section::new(&root, "integrator")?;
        let method = s.string("method", "dopri5")?;
        let steps = s.uint("steps_per_output", 20)? as usize;
        let method = match method.as_str() {
            "dopri5" => Method::Dopri5,
            "rk4" => Method::Rk4 { steps_per_output: steps },
            other => return Err(Error::config("integrator.method", format!("expected \"dopri5\" or \"rk4\", got {other:?}"))),
        };
        let integrator = IntegratorParams {
            method,
            rtol: s.f64("rtol", d.integrator.rtol)?,
            atol: s.f64("atol", d.integrator.atol)?,
            output_points: s.uint("output_points", d.integrator.output_points as u64)? as usize,
            max_steps: s.uint("max_steps", d.integrator.max_steps as u64)? as usize,
        };
        s.finish()?;

        let mut s = Section::new(&root, "output")?;
        let output_dir = PathBuf::from(s.string("dir", ".")?);
        let prefix = s.string("prefix", &d.prefix)?;
        let seed = s.uint("seed", 0)?;
        s.finish()?;

        let cfg = RunConfig {
            code_preset,
            pad,
            problem,
            eta_p,
            beta,
            omega_c,
            kappa,
            coupling,
            t_f,
            v: u32::try_from(v).map_err(|_| Error::config("schedule.v", "too large"))?,
            integrator,
            output_dir,
            prefix,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Range checks; each failure names its key.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bath.beta", self.beta),
            ("bath.omega_c", self.omega_c),
            ("integrator.rtol", self.integrator.rtol),
            ("integrator.atol", self.integrator.atol),
        ];
        for (key, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::config(key, format!("must be positive and finite, got {x}")));
            }
        }
        let non_negative = [("bath.kappa", self.kappa), ("schedule.t_f", self.t_f), ("penalty.eta_p", self.eta_p)];
        for (key, x) in non_negative {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::config(key, format!("must be non-negative and finite, got {x}")));
            }
        }
        if self.integrator.output_points < 2 {
            return Err(Error::config("integrator.output_points", "must be at least 2"));
        }
        if let Method::Rk4 { steps_per_output: 0 } = self.integrator.method {
            return Err(Error::config("integrator.steps_per_output", "must be at least 1"));
        }
        if self.integrator.max_steps == 0 {
            return Err(Error::config("integrator.max_steps", "must be at least 1"));
        }
        let code = StabilizerCode::preset(&self.code_preset).map_err(|e| Error::config("code.preset", e.to_string()))?;
        if code.k() != self.problem.k {
            return Err(Error::config(
                "problem",
                format!("problem has {} logical qubits, code {:?} encodes {}", self.problem.k, self.code_preset, code.k()),
            ));
        }
        self.problem.validate().map_err(|e| Error::config("problem", e.to_string()))?;
        if self.coupling != "x_and_z_all_qubits" {
            return Err(Error::config("bath.coupling", format!("unknown coupling preset {:?}", self.coupling)));
        }
        Ok(())
    }

    /// Physical qubits after padding.
    pub fn n_qubits(&self) -> Result<usize> {
        Ok(self.code()?.n())
    }

    /// Fail with a resource error when the dense Hamiltonian would exceed the cap.
    pub fn check_resources(&self) -> Result<()> {
        let n = StabilizerCode::preset(&self.code_preset)?.n() + self.pad;
        if n > DEFAULT_MAX_DENSE_QUBITS {
            return Err(Error::Resource(format!(
                "{n} physical qubits exceed the dense limit of {DEFAULT_MAX_DENSE_QUBITS}"
            )));
        }
        Ok(())
    }

    pub fn code(&self) -> Result<StabilizerCode> {
        self.check_resources()?;
        let code = StabilizerCode::preset(&self.code_preset)?;
        if self.pad > 0 {
            code.padded(self.pad)
        } else {
            Ok(code)
        }
    }

    pub fn model(&self) -> Result<EncodedModel> {
        EncodedModel::new(self.code()?, self.problem.clone(), Schedule::new(self.v, self.t_f)?, self.eta_p)
    }

    pub fn bath(&self) -> Result<BathModel> {
        BathModel::preset(&self.coupling, self.n_qubits()?, self.beta, self.omega_c, self.kappa)
    }

    /// Set one axis value by name, as the sweep driver does.
    pub fn with_axis(&self, axis: &str, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match axis {
            "eta_p" => out.eta_p = value,
            "t_f" => out.t_f = value,
            "v" => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::config("schedule.v", format!("sweep value {value} is not a non-negative integer")));
                }
                out.v = value as u32;
            }
            other => return Err(Error::config("--axis", format!("expected eta_p, t_f or v, got {other:?}"))),
        }
        out.validate()?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn full_document_round_trip() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [code]
            preset = "422"
            [schedule]
            t_f = 25
            v = 2
            [penalty]
            eta_p = 3.5
            [bath]
            beta = 2.0
            kappa = 0
            [integrator]
            method = "rk4"
            steps_per_output = 7
            output_points = 11
            [output]
            dir = "out"
            prefix = "x"
            seed = 9
            "#,
        )
        .unwrap();
        assert_eq!(cfg.t_f, 25.0);
        assert_eq!(cfg.v, 2);
        assert_eq!(cfg.eta_p, 3.5);
        assert_eq!(cfg.kappa, 0.0);
        assert_eq!(cfg.integrator.method, Method::Rk4 { steps_per_output: 7 });
        assert_eq!(cfg.integrator.output_points, 11);
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
        assert_eq!(cfg.seed, 9);
    }

    fn key_of(text: &str) -> String {
        match RunConfig::from_toml_str(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of("[bath]\nbeta = -1.0"), "bath.beta");
        assert_eq!(key_of("[bath]\nkappa = -1e-3"), "bath.kappa");
        assert_eq!(key_of("[bath]\nbeta = \"hot\""), "bath.beta");
        assert_eq!(key_of("[bath]\ntemperature = 1.0"), "bath.temperature");
        assert_eq!(key_of("[code]\npreset = \"713\""), "code.preset");
        assert_eq!(key_of("[schedule]\nv = -1"), "schedule.v");
        assert_eq!(key_of("[integrator]\nmethod = \"euler\""), "integrator.method");
        assert_eq!(key_of("[extras]\nx = 1"), "extras");
        assert_eq!(key_of("[problem]\nh_x_init = [1.0]"), "problem");
        assert_eq!(key_of("[bath\n"), "<document>");
    }

    #[test]
    fn padding_beyond_dense_cap_is_a_resource_error() {
        let cfg = RunConfig::from_toml_str("[code]\npad = 6").unwrap();
        assert!(matches!(cfg.model(), Err(Error::Resource(_))));
        let ok = RunConfig::from_toml_str("[code]\npad = 1").unwrap();
        assert_eq!(ok.n_qubits().unwrap(), 5);
    }

    #[test]
    fn axis_override() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.with_axis("eta_p", 4.0).unwrap().eta_p, 4.0);
        assert_eq!(cfg.with_axis("v", 2.0).unwrap().v, 2);
        assert!(cfg.with_axis("v", 1.5).is_err());
        assert!(cfg.with_axis("beta", 1.0).is_err());
        assert!(cfg.with_axis("t_f", -1.0).is_err());
    }
}
