//! Symplectic n-qubit Pauli algebra.
//!
//! A [`PauliTerm`] stores one bit pair `(x_j, z_j)` per qubit together with a
//! quarter phase. The bit pair `(1, 1)` denotes `Y` itself (not `XZ`), so the
//! operator represented is `i^phase * P_0 ⊗ P_1 ⊗ ... ⊗ P_{n-1}` with qubit 0
//! the leftmost tensor factor (most significant bit of a dense index).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::linalg::{self, CMatrix};
use crate::{Error, Result};

/// Largest register the symplectic representation supports.
pub const MAX_SYMBOLIC_QUBITS: usize = 64;

/// Default cap on dense matrix assembly (2^8 = 256-dimensional matrices).
pub const DEFAULT_MAX_DENSE_QUBITS: usize = 8;

/// A power of `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Phase {
    #[default]
    PlusOne,
    PlusI,
    MinusOne,
    MinusI,
}

impl Phase {
    pub fn from_exponent(k: i64) -> Self {
        match k.rem_euclid(4) {
            0 => Phase::PlusOne,
            1 => Phase::PlusI,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn exponent(self) -> i64 {
        match self {
            Phase::PlusOne => 0,
            Phase::PlusI => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    pub fn value(self) -> Complex64 {
        match self {
            Phase::PlusOne => Complex64::new(1.0, 0.0),
            Phase::PlusI => Complex64::new(0.0, 1.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, Phase::PlusOne | Phase::MinusOne)
    }

    pub fn mul(self, other: Phase) -> Phase {
        Phase::from_exponent(self.exponent() + other.exponent())
    }
}

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// An n-qubit Pauli string with a phase in `{±1, ±i}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliTerm {
    n_qubits: usize,
    x: u64,
    z: u64,
    phase: Phase,
}

fn check_width(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_SYMBOLIC_QUBITS {
        return Err(Error::Dimension(format!(
            "n_qubits must be in 1..={MAX_SYMBOLIC_QUBITS}, got {n_qubits}"
        )));
    }
    Ok(())
}

fn mask(n_qubits: usize) -> u64 {
    if n_qubits == 64 {
        u64::MAX
    } else {
        (1u64 << n_qubits) - 1
    }
}

impl PauliTerm {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        check_width(n_qubits)?;
        Ok(Self {
            n_qubits,
            x: 0,
            z: 0,
            phase: Phase::PlusOne,
        })
    }

    /// Build from bit masks where bit `j` refers to qubit `j`.
    pub fn from_bits(n_qubits: usize, x: u64, z: u64, phase: Phase) -> Result<Self> {
        check_width(n_qubits)?;
        let m = mask(n_qubits);
        if x & !m != 0 || z & !m != 0 {
            return Err(Error::Dimension(format!(
                "bit masks exceed {n_qubits} qubits"
            )));
        }
        Ok(Self {
            n_qubits,
            x,
            z,
            phase,
        })
    }

    pub fn from_letters(letters: &[Pauli]) -> Result<Self> {
        check_width(letters.len())?;
        let (mut x, mut z) = (0u64, 0u64);
        for (j, p) in letters.iter().enumerate() {
            let (xb, zb) = p.bits();
            x |= (xb as u64) << j;
            z |= (zb as u64) << j;
        }
        Self::from_bits(letters.len(), x, z, Phase::PlusOne)
    }

    /// Single-qubit letter `p` on `qubit`, identity elsewhere.
    pub fn single(n_qubits: usize, qubit: usize, p: Pauli) -> Result<Self> {
        check_width(n_qubits)?;
        if qubit >= n_qubits {
            return Err(Error::Dimension(format!(
                "qubit {qubit} out of range for {n_qubits} qubits"
            )));
        }
        let mut letters = vec![Pauli::I; n_qubits];
        letters[qubit] = p;
        Self::from_letters(&letters)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn letter(&self, qubit: usize) -> Pauli {
        Pauli::from_bits((self.x >> qubit) & 1 == 1, (self.z >> qubit) & 1 == 1)
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Hermitian iff the phase is real.
    pub fn is_hermitian(&self) -> bool {
        self.phase.is_real()
    }

    /// Same string with phase +1.
    pub fn unsigned(&self) -> Self {
        self.with_phase(Phase::PlusOne)
    }

    /// Symplectic inner product parity.
    fn symplectic(&self, other: &Self) -> u32 {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones() & 1
    }

    /// Adjoint: `(i^k P)† = i^{-k} P` for Hermitian letters.
    pub fn adjoint(&self) -> Self {
        self.with_phase(Phase::from_exponent(-self.phase.exponent()))
    }

    /// Extend with identity on `extra` trailing qubits.
    pub fn padded(&self, extra: usize) -> Result<Self> {
        Self::from_bits(self.n_qubits + extra, self.x, self.z, self.phase)
    }

    /// Dense `2^n × 2^n` matrix with the default qubit cap.
    pub fn to_dense(&self) -> Result<CMatrix> {
        self.to_dense_capped(DEFAULT_MAX_DENSE_QUBITS)
    }

    pub fn to_dense_capped(&self, max_qubits: usize) -> Result<CMatrix> {
        dense_cap(self.n_qubits, max_qubits)?;
        let mut out = linalg::zeros(1 << self.n_qubits);
        self.accumulate_dense(Complex64::new(1.0, 0.0), &mut out);
        Ok(out)
    }

    /// `out += coef * self` as a dense matrix (signed permutation structure).
    fn accumulate_dense(&self, coef: Complex64, out: &mut CMatrix) {
        let n = self.n_qubits;
        // Re-index so qubit 0 is the most significant bit of the dense index.
        let to_index = |bits: u64| -> usize {
            (0..n).fold(0usize, |acc, j| acc | ((((bits >> j) & 1) as usize) << (n - 1 - j)))
        };
        let xm = to_index(self.x);
        let zm = to_index(self.z);
        let y_count = (self.x & self.z).count_ones() as i64;
        let base = coef * Phase::from_exponent(self.phase.exponent() + y_count).value();
        for col in 0..(1usize << n) {
            let row = col ^ xm;
            let sign = if (col & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            out[(row, col)] += base * sign;
        }
    }

    /// All unsigned Pauli strings on `n_qubits` with weight `<= max_weight`,
    /// identity first, ordered by weight.
    pub fn enumerate_up_to_weight(n_qubits: usize, max_weight: usize) -> Result<Vec<Self>> {
        check_width(n_qubits)?;
        if n_qubits > 16 {
            return Err(Error::Resource(format!(
                "exhaustive enumeration over {n_qubits} qubits"
            )));
        }
        let mut out = Vec::new();
        for x in 0..(1u64 << n_qubits) {
            for z in 0..(1u64 << n_qubits) {
                if ((x | z).count_ones() as usize) <= max_weight {
                    out.push(Self::from_bits(n_qubits, x, z, Phase::PlusOne)?);
                }
            }
        }
        out.sort_by_key(|p| (p.weight(), p.to_string()));
        Ok(out)
    }
}

fn dense_cap(n_qubits: usize, max_qubits: usize) -> Result<()> {
    if n_qubits > max_qubits {
        return Err(Error::Resource(format!(
            "dense assembly of {n_qubits} qubits exceeds cap of {max_qubits}"
        )));
    }
    Ok(())
}

fn same_width(a: &PauliTerm, b: &PauliTerm) -> Result<()> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::Dimension(format!(
            "Pauli terms on {} and {} qubits",
            a.n_qubits, b.n_qubits
        )));
    }
    Ok(())
}

/// Product `a · b` with exact phase tracking.
pub fn multiply(a: &PauliTerm, b: &PauliTerm) -> Result<PauliTerm> {
    same_width(a, b)?;
    let mut exponent = a.phase.exponent() + b.phase.exponent();
    for j in 0..a.n_qubits {
        let (x1, z1) = ((a.x >> j) & 1, (a.z >> j) & 1);
        let (x2, z2) = ((b.x >> j) & 1, (b.z >> j) & 1);
        let (x2, z2) = (x2 as i64, z2 as i64);
        exponent += match (x1, z1) {
            (0, 0) => 0,
            (1, 1) => z2 - x2,
            (1, 0) => z2 * (2 * x2 - 1),
            _ => x2 * (1 - 2 * z2),
        };
    }
    Ok(PauliTerm {
        n_qubits: a.n_qubits,
        x: a.x ^ b.x,
        z: a.z ^ b.z,
        phase: Phase::from_exponent(exponent),
    })
}

/// True iff the symplectic inner product of `a` and `b` is even.
pub fn commutes(a: &PauliTerm, b: &PauliTerm) -> Result<bool> {
    same_width(a, b)?;
    Ok(a.symplectic(b) == 0)
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            Phase::PlusOne => "",
            Phase::MinusOne => "-",
            Phase::PlusI => "i",
            Phase::MinusI => "-i",
        };
        f.write_str(prefix)?;
        for j in 0..self.n_qubits {
            write!(f, "{}", self.letter(j).symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliTerm {
    type Err = Error;

    /// Parses strings such as `"XXII"`, `"-ZZ"`, `"+iXY"` or `"-iZ"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (Phase::MinusI, rest)
        } else if let Some(rest) = s.strip_prefix("+i") {
            (Phase::PlusI, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (Phase::PlusI, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (Phase::MinusOne, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (Phase::PlusOne, rest)
        } else {
            (Phase::PlusOne, s)
        };
        let letters = body
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Parse(format!("invalid Pauli letter {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::Parse(format!("empty Pauli string {s:?}")));
        }
        Ok(PauliTerm::from_letters(&letters)?.with_phase(phase))
    }
}

/// A real-weighted sum of Pauli strings, Hermitian by construction.
///
/// Terms are kept phase-free (phase +1) with signs folded into the
/// coefficients; duplicate strings are merged and exact zeros dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliTerm)>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_width(n_qubits)?;
        Ok(Self {
            n_qubits,
            terms: Vec::new(),
        })
    }

    pub fn from_terms(n_qubits: usize, terms: impl IntoIterator<Item = (f64, PauliTerm)>) -> Result<Self> {
        let mut sum = Self::zero(n_qubits)?;
        for (c, t) in terms {
            sum.push(c, t)?;
        }
        sum.normalize();
        Ok(sum)
    }

    pub fn single(coef: f64, term: PauliTerm) -> Result<Self> {
        Self::from_terms(term.n_qubits, [(coef, term)])
    }

    /// Parse a list of `"coef * STRING"` entries (a bare `"STRING"` means coefficient 1).
    pub fn parse(entries: &[impl AsRef<str>]) -> Result<Self> {
        let mut parsed = Vec::with_capacity(entries.len());
        for entry in entries {
            let entry = entry.as_ref();
            let (coef, term) = match entry.split_once('*') {
                Some((c, t)) => {
                    let c: f64 = c
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("invalid coefficient in {entry:?}")))?;
                    (c, t.parse::<PauliTerm>()?)
                }
                None => (1.0, entry.parse::<PauliTerm>()?),
            };
            parsed.push((coef, term));
        }
        let n = parsed
            .first()
            .map(|(_, t)| t.n_qubits())
            .ok_or_else(|| Error::Parse("empty Pauli sum".into()))?;
        Self::from_terms(n, parsed)
    }

    fn push(&mut self, coef: f64, term: PauliTerm) -> Result<()> {
        if term.n_qubits != self.n_qubits {
            return Err(Error::Dimension(format!(
                "term on {} qubits added to sum on {}",
                term.n_qubits, self.n_qubits
            )));
        }
        if coef == 0.0 {
            return Ok(());
        }
        let sign = match term.phase {
            Phase::PlusOne => 1.0,
            Phase::MinusOne => -1.0,
            _ => {
                return Err(Error::Validation(format!(
                    "imaginary phase on {term} in a Hermitian sum"
                )))
            }
        };
        self.terms.push((sign * coef, term.unsigned()));
        Ok(())
    }

    fn normalize(&mut self) {
        let mut merged: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for (c, t) in &self.terms {
            *merged.entry((t.x, t.z)).or_insert(0.0) += c;
        }
        let n = self.n_qubits;
        self.terms = merged
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|((x, z), c)| {
                (
                    c,
                    PauliTerm {
                        n_qubits: n,
                        x,
                        z,
                        phase: Phase::PlusOne,
                    },
                )
            })
            .collect();
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliTerm)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for (c, _) in &mut out.terms {
            *c *= factor;
        }
        out.normalize();
        out
    }

    pub fn add(&self, other: &PauliSum) -> Result<Self> {
        let mut out = self.clone();
        for &(c, t) in &other.terms {
            out.push(c, t)?;
        }
        out.normalize();
        Ok(out)
    }

    /// Sum of absolute coefficients, an upper bound on the operator norm.
    pub fn coefficient_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        self.to_dense_capped(DEFAULT_MAX_DENSE_QUBITS)
    }

    pub fn to_dense_capped(&self, max_qubits: usize) -> Result<CMatrix> {
        dense_cap(self.n_qubits, max_qubits)?;
        let mut out = linalg::zeros(1 << self.n_qubits);
        for (c, t) in &self.terms {
            t.accumulate_dense(Complex64::new(*c, 0.0), &mut out);
        }
        Ok(out)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (c, t)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c} * {t}")?;
        }
        Ok(())
    }
}

/// Free-standing dense conversion used at the boundary to the spectral code.
pub fn to_dense(op: &PauliSum) -> Result<CMatrix> {
    op.to_dense()
}
