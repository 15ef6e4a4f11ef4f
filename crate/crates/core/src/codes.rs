//! Stabilizer subspace codes and their penalty Hamiltonians.

use num_complex::Complex64;

use crate::linalg::{self, CMatrix};
use crate::pauli::{commutes, multiply, PauliSum, PauliTerm, DEFAULT_MAX_DENSE_QUBITS};
use crate::{Error, Result};

/// An `[[n, k, d]]` stabilizer code with a fixed choice of logical operators.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizerCode {
    n: usize,
    k: usize,
    d: usize,
    generators: Vec<PauliTerm>,
    logical_x: Vec<PauliTerm>,
    logical_z: Vec<PauliTerm>,
}

/// One eigenvalue level `xi_m = -(n-k) + 2m` of the penalty Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyLevel {
    pub m: usize,
    pub xi: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpectrum {
    pub levels: Vec<PenaltyLevel>,
}

/// Outcome of the exhaustive error-detection check.
#[derive(Debug, Clone)]
pub struct DetectionReport {
    pub max_weight: usize,
    pub checked: usize,
    /// Errors `A` with `‖P_C A P_C‖ > 1e-12`, together with that norm.
    pub violations: Vec<(PauliTerm, f64)>,
}

impl DetectionReport {
    /// Violations excluding the identity, which is never detectable.
    pub fn nontrivial_violations(&self) -> impl Iterator<Item = &(PauliTerm, f64)> {
        self.violations.iter().filter(|(p, _)| !p.is_identity())
    }

    pub fn all_nontrivial_detected(&self) -> bool {
        self.nontrivial_violations().next().is_none()
    }

    /// Largest `‖P_C A P_C‖` among non-identity errors of weight `< limit`.
    pub fn worst_below_weight(&self, limit: usize) -> f64 {
        self.nontrivial_violations()
            .filter(|(p, _)| p.weight() < limit)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }
}

const DETECTION_TOL: f64 = 1e-12;

/// GF(2) row reduction over symplectic vectors; returns the rank.
fn gf2_rank(mut rows: Vec<u128>) -> usize {
    let mut rank = 0;
    for bit in 0..128 {
        let pivot = 1u128 << bit;
        if let Some(pos) = rows[rank..].iter().position(|r| r & pivot != 0) {
            rows.swap(rank, rank + pos);
            let p = rows[rank];
            for (i, r) in rows.iter_mut().enumerate() {
                if i != rank && *r & pivot != 0 {
                    *r ^= p;
                }
            }
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
    }
    rank
}

fn symplectic_vector(p: &PauliTerm) -> u128 {
    p.x_bits() as u128 | ((p.z_bits() as u128) << 64)
}

fn in_span(v: &PauliTerm, basis: &[PauliTerm]) -> bool {
    let mut rows: Vec<u128> = basis.iter().map(symplectic_vector).collect();
    let r0 = gf2_rank(rows.clone());
    rows.push(symplectic_vector(v));
    gf2_rank(rows) == r0
}

impl StabilizerCode {
    /// Named presets: `"422"` (the `[[4,2,2]]` code) and `"z1"` (one qubit
    /// stabilized by `Z`).
    pub fn preset(name: &str) -> Result<Self> {
        let parse = |v: &[&str]| -> Result<Vec<PauliTerm>> { v.iter().map(|s| s.parse()).collect() };
        match name {
            "422" => Self::new(
                parse(&["XXXX", "ZZZZ"])?,
                parse(&["XXII", "XIXI"])?,
                parse(&["ZIZI", "ZZII"])?,
                Some(2),
            ),
            "z1" => Self::new(parse(&["Z"])?, vec![], vec![], Some(1)),
            other => Err(Error::Construction(format!("unknown code preset {other:?}"))),
        }
    }

    /// Validate and assemble a code. When `distance` is `None` it is found by
    /// exhaustive search (feasible for small `n`).
    pub fn new(
        generators: Vec<PauliTerm>,
        logical_x: Vec<PauliTerm>,
        logical_z: Vec<PauliTerm>,
        distance: Option<usize>,
    ) -> Result<Self> {
        let n = generators
            .first()
            .or(logical_x.first())
            .map(|p| p.n_qubits())
            .ok_or_else(|| Error::Construction("code needs at least one generator".into()))?;
        let all = generators.iter().chain(&logical_x).chain(&logical_z);
        for p in all.clone() {
            if p.n_qubits() != n {
                return Err(Error::Construction(format!("{p} is not on {n} qubits")));
            }
            if !p.is_hermitian() {
                return Err(Error::Construction(format!("{p} is not Hermitian")));
            }
            if p.is_identity() {
                return Err(Error::Construction(format!("{p} is the identity")));
            }
        }
        if generators.len() > n {
            return Err(Error::Construction(format!(
                "{} generators on {n} qubits",
                generators.len()
            )));
        }
        let k = n - generators.len();
        if logical_x.len() != k || logical_z.len() != k {
            return Err(Error::Construction(format!(
                "expected {k} logical X and {k} logical Z operators, got {} and {}",
                logical_x.len(),
                logical_z.len()
            )));
        }
        for (i, a) in generators.iter().enumerate() {
            for b in &generators[i + 1..] {
                if !commutes(a, b)? {
                    return Err(Error::Construction(format!("generators {a} and {b} anticommute")));
                }
            }
        }
        if gf2_rank(generators.iter().map(symplectic_vector).collect()) != generators.len() {
            return Err(Error::Construction("generators are not independent".into()));
        }
        // Independence also keeps -I out of the stabilizer group.
        for l in logical_x.iter().chain(&logical_z) {
            for s in &generators {
                if !commutes(l, s)? {
                    return Err(Error::Construction(format!(
                        "logical {l} anticommutes with generator {s}"
                    )));
                }
            }
            if in_span(l, &generators) {
                return Err(Error::Construction(format!(
                    "logical {l} is a product of generators"
                )));
            }
        }
        for i in 0..k {
            for j in 0..k {
                let xz = commutes(&logical_x[i], &logical_z[j])?;
                if (i == j) == xz {
                    let rel = if i == j { "anticommute" } else { "commute" };
                    return Err(Error::Construction(format!(
                        "logicals {} and {} must {rel}",
                        logical_x[i], logical_z[j]
                    )));
                }
                if i < j {
                    if !commutes(&logical_x[i], &logical_x[j])? {
                        return Err(Error::Construction(format!(
                            "logicals {} and {} must commute",
                            logical_x[i], logical_x[j]
                        )));
                    }
                    if !commutes(&logical_z[i], &logical_z[j])? {
                        return Err(Error::Construction(format!(
                            "logicals {} and {} must commute",
                            logical_z[i], logical_z[j]
                        )));
                    }
                }
            }
        }
        let mut code = Self {
            n,
            k,
            d: 0,
            generators,
            logical_x,
            logical_z,
        };
        code.d = match distance {
            Some(d) => d,
            None => code.brute_force_distance()?,
        };
        Ok(code)
    }

    /// Minimum weight of a Pauli commuting with every generator but outside
    /// the stabilizer group; for `k = 0`, the minimum nontrivial stabilizer weight.
    fn brute_force_distance(&self) -> Result<usize> {
        if self.n > 10 {
            return Err(Error::Resource(format!(
                "distance search over {} qubits; pass the distance explicitly",
                self.n
            )));
        }
        for w in 1..=self.n {
            for p in PauliTerm::enumerate_up_to_weight(self.n, w)? {
                if p.weight() != w {
                    continue;
                }
                let central = self.generators.iter().all(|s| commutes(&p, s).unwrap_or(false));
                if !central {
                    continue;
                }
                let stabilizer = in_span(&p, &self.generators);
                if (self.k == 0 && stabilizer) || (self.k > 0 && !stabilizer) {
                    return Ok(w);
                }
            }
        }
        Ok(self.n)
    }

    /// Append `extra` qubits, each stabilized by its own `Z` generator.
    pub fn padded(&self, extra: usize) -> Result<Self> {
        let n = self.n + extra;
        let mut generators: Vec<PauliTerm> = self
            .generators
            .iter()
            .map(|g| g.padded(extra))
            .collect::<Result<_>>()?;
        for q in self.n..n {
            generators.push(PauliTerm::single(n, q, crate::pauli::Pauli::Z)?);
        }
        let pad = |v: &[PauliTerm]| -> Result<Vec<PauliTerm>> { v.iter().map(|p| p.padded(extra)).collect() };
        Self::new(
            generators,
            pad(&self.logical_x)?,
            pad(&self.logical_z)?,
            Some(self.d),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn generators(&self) -> &[PauliTerm] {
        &self.generators
    }

    pub fn logical_x(&self) -> &[PauliTerm] {
        &self.logical_x
    }

    pub fn logical_z(&self) -> &[PauliTerm] {
        &self.logical_z
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `H_p = -Σ_i S_i` together with its closed-form spectrum.
pub fn penalty_hamiltonian(code: &StabilizerCode) -> Result<(PauliSum, PenaltySpectrum)> {
    let hp = PauliSum::from_terms(code.n, code.generators.iter().map(|s| (-1.0, *s)))?;
    let r = code.n - code.k;
    let levels = (0..=r)
        .map(|m| PenaltyLevel {
            m,
            xi: -(r as f64) + 2.0 * m as f64,
            multiplicity: binomial(r, m) << code.k,
        })
        .collect();
    Ok((hp, PenaltySpectrum { levels }))
}

/// Dense `P_C = Π_i (I + S_i) / 2`.
pub fn codespace_projector(code: &StabilizerCode) -> Result<CMatrix> {
    if code.n > DEFAULT_MAX_DENSE_QUBITS {
        return Err(Error::Resource(format!(
            "codespace projector on {} qubits exceeds cap of {DEFAULT_MAX_DENSE_QUBITS}",
            code.n
        )));
    }
    let dim = code.dim();
    let half = Complex64::new(0.5, 0.0);
    let mut proj = linalg::identity(dim);
    for s in &code.generators {
        let factor = (linalg::identity(dim) + s.to_dense()?) * half;
        proj = proj * factor;
    }
    Ok(proj)
}

/// Enumerate every Pauli of weight `<= max_weight` (identity included) and
/// report those with `‖P_C A P_C‖ > 1e-12`.
pub fn verify_detection(code: &StabilizerCode, max_weight: usize) -> Result<DetectionReport> {
    let pc = codespace_projector(code)?;
    let candidates = PauliTerm::enumerate_up_to_weight(code.n, max_weight)?;
    let mut violations = Vec::new();
    for a in &candidates {
        let sandwiched = &pc * a.to_dense()? * &pc;
        let norm = linalg::operator_norm(&sandwiched);
        if norm > DETECTION_TOL {
            violations.push((*a, norm));
        }
    }
    Ok(DetectionReport {
        max_weight,
        checked: candidates.len(),
        violations,
    })
}

/// Gap `xi_1 - xi_0` of the stabilizer-sum penalty (2 whenever a generator exists).
pub fn penalty_gap(code: &StabilizerCode) -> f64 {
    if code.generators.is_empty() {
        f64::INFINITY
    } else {
        2.0
    }
}

/// Product of two logical operators as a phase-free term and a sign.
pub(crate) fn logical_product(a: &PauliTerm, b: &PauliTerm) -> Result<(f64, PauliTerm)> {
    let prod = multiply(a, b)?;
    match prod.phase() {
        crate::pauli::Phase::PlusOne => Ok((1.0, prod)),
        crate::pauli::Phase::MinusOne => Ok((-1.0, prod.unsigned())),
        _ => Err(Error::Construction(format!(
            "product of {a} and {b} is not Hermitian"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn terms(v: &[&str]) -> Vec<PauliTerm> {
        v.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn preset_422_is_valid() {
        let code = StabilizerCode::preset("422").unwrap();
        assert_eq!((code.n(), code.k(), code.d()), (4, 2, 2));
        for l in code.logical_x().iter().chain(code.logical_z()) {
            for s in code.generators() {
                assert!(commutes(l, s).unwrap());
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(commutes(&code.logical_x()[i], &code.logical_z()[j]).unwrap(), i != j);
            }
        }
    }

    #[test]
    fn computed_distance_matches_preset() {
        let code = StabilizerCode::preset("422").unwrap();
        let computed = StabilizerCode::new(
            code.generators().to_vec(),
            code.logical_x().to_vec(),
            code.logical_z().to_vec(),
            None,
        )
        .unwrap();
        assert_eq!(computed.d(), 2);
    }

    #[test]
    fn stabilizer_state_has_no_logicals() {
        let code = StabilizerCode::new(terms(&["XX", "ZZ"]), vec![], vec![], None).unwrap();
        assert_eq!(code.k(), 0);
        assert!(code.logical_x().is_empty());
    }

    #[test]
    fn anticommuting_generators_are_rejected() {
        let err = StabilizerCode::new(terms(&["ZZ", "XI"]), vec![], vec![], None).unwrap_err();
        match err {
            Error::Construction(msg) => assert!(msg.contains("ZZ") && msg.contains("XI"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_logicals_are_rejected() {
        // Logical equal to a generator.
        assert!(StabilizerCode::new(terms(&["XXXX", "ZZZZ"]), terms(&["XXXX", "XIXI"]), terms(&["ZIZI", "ZZII"]), Some(2)).is_err());
        // Logical anticommuting with a generator.
        assert!(StabilizerCode::new(terms(&["XXXX", "ZZZZ"]), terms(&["XIII", "XIXI"]), terms(&["ZIZI", "ZZII"]), Some(2)).is_err());
        // Wrong pairing.
        assert!(StabilizerCode::new(terms(&["XXXX", "ZZZZ"]), terms(&["XXII", "XIXI"]), terms(&["ZZII", "ZIZI"]), Some(2)).is_err());
        assert!(StabilizerCode::preset("513").is_err());
    }

    #[test]
    fn penalty_spectrum_422() {
        let code = StabilizerCode::preset("422").unwrap();
        let (hp, spec) = penalty_hamiltonian(&code).unwrap();
        let expected = [(0, -2.0, 4), (1, 0.0, 8), (2, 2.0, 4)];
        for (level, (m, xi, r)) in spec.levels.iter().zip(expected) {
            assert_eq!((level.m, level.xi, level.multiplicity), (m, xi, r));
        }
        let evals = linalg::eigvalsh(&hp.to_dense().unwrap());
        for level in &spec.levels {
            let count = evals.iter().filter(|e| (*e - level.xi).abs() < 1e-10).count();
            assert_eq!(count, level.multiplicity);
        }
    }

    #[test]
    fn penalty_spectrum_single_z() {
        let code = StabilizerCode::preset("z1").unwrap();
        let (_, spec) = penalty_hamiltonian(&code).unwrap();
        assert_eq!(spec.levels.len(), 2);
        assert_eq!((spec.levels[0].xi, spec.levels[0].multiplicity), (-1.0, 1));
        assert_eq!((spec.levels[1].xi, spec.levels[1].multiplicity), (1.0, 1));
        assert_eq!(penalty_gap(&code), 2.0);
    }

    #[test]
    fn codespace_projector_properties() {
        let code = StabilizerCode::preset("422").unwrap();
        let pc = codespace_projector(&code).unwrap();
        assert!(max_abs(&(&pc * &pc - &pc)) < 1e-12);
        assert!((linalg::trace(&pc).re - 4.0).abs() < 1e-12);
        let (hp, _) = penalty_hamiltonian(&code).unwrap();
        let hp = hp.to_dense().unwrap();
        assert!(max_abs(&(&pc * &hp + &pc * Complex64::new(2.0, 0.0))) < 1e-12);
    }

    #[test]
    fn weight_one_errors_are_detected() {
        let code = StabilizerCode::preset("422").unwrap();
        let report = verify_detection(&code, 1).unwrap();
        assert_eq!(report.checked, 13);
        assert!(report.all_nontrivial_detected());
        // The identity is the documented trivial violation.
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].0.is_identity());
        assert!((report.violations[0].1 - 1.0).abs() < 1e-12);
        // Equivalent anticommutation statement.
        for p in PauliTerm::enumerate_up_to_weight(4, 1).unwrap().iter().skip(1) {
            assert!(code.generators().iter().any(|s| !commutes(p, s).unwrap()));
        }
    }

    #[test]
    fn weight_two_errors_include_logicals() {
        let code = StabilizerCode::preset("422").unwrap();
        let report = verify_detection(&code, 2).unwrap();
        assert!(!report.all_nontrivial_detected());
        let xxii: PauliTerm = "XXII".parse().unwrap();
        let hit = report.violations.iter().find(|(p, _)| *p == xxii).unwrap();
        assert!((hit.1 - 1.0).abs() < 1e-12);
        assert!(report.worst_below_weight(2) < 1e-12);
    }

    #[test]
    fn dense_gap_is_two() {
        let code = StabilizerCode::preset("422").unwrap();
        let (hp, _) = penalty_hamiltonian(&code).unwrap();
        let evals = linalg::eigvalsh(&hp.to_dense().unwrap());
        let next = evals.iter().find(|e| **e > evals[0] + 1e-9).unwrap();
        assert!((next - evals[0] - penalty_gap(&code)).abs() < 1e-10);
    }

    #[test]
    fn penalty_spectrum_matches_dense_for_padded_codes() {
        let base = StabilizerCode::preset("422").unwrap();
        for extra in 0..=2 {
            let code = base.padded(extra).unwrap();
            assert_eq!(code.n(), 4 + extra);
            let (hp, spec) = penalty_hamiltonian(&code).unwrap();
            let total: usize = spec.levels.iter().map(|l| l.multiplicity).sum();
            assert_eq!(total, code.dim());
            let evals = linalg::eigvalsh(&hp.to_dense().unwrap());
            for level in &spec.levels {
                let count = evals.iter().filter(|e| (*e - level.xi).abs() < 1e-9).count();
                assert_eq!(count, level.multiplicity);
            }
        }
    }
}
