//! Dense complex linear algebra for one- and two-qubit registers.
//!
//! States are amplitude vectors over the computational basis and operators are
//! row-major square matrices. Basis index `k` lists qubit 0 as its most significant
//! bit, so the two-qubit basis order is `|00⟩, |01⟩, |10⟩, |11⟩`.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{domain, Result};

/// A single complex amplitude or matrix entry.
pub type Amplitude = Complex64;

/// Tolerance for quantities derived through arithmetic (norms, products, phases).
pub const DERIVED_TOL: f64 = 1e-9;

/// Tolerance for matrices written down directly from exact or `1/√2` entries.
pub const CONSTRUCTED_TOL: f64 = 1e-12;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn qubits_for_dim(dim: usize) -> Result<usize> {
    match dim {
        2 => Ok(1),
        4 => Ok(2),
        _ => domain(format!("dimension {dim} is not supported (expected 2 or 4)")),
    }
}

fn check_finite(values: &[Complex64], what: &str) -> Result<()> {
    if values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        domain(format!("{what} has a non-finite entry"))
    }
}

/// Index of the largest-modulus entry. Ties resolve to the lowest index.
fn pivot(values: &[Complex64]) -> usize {
    let mut best = 0;
    for (k, z) in values.iter().enumerate() {
        if z.norm_sqr() > values[best].norm_sqr() {
            best = k;
        }
    }
    best
}

/// Finds a unit-modulus `c` with `a = c·b` entrywise within `tol`.
///
/// `c` is read off at the largest-modulus entry of `b`, normalized, and then checked
/// against every entry.
pub fn proportionality_phase(a: &[Complex64], b: &[Complex64], tol: f64) -> Option<Complex64> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let j = pivot(b);
    if b[j].norm() <= tol {
        return None;
    }
    let raw = a[j] / b[j];
    if (raw.norm() - 1.0).abs() > tol {
        return None;
    }
    let c = raw / raw.norm();
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - c * y).norm() <= tol)
        .then_some(c)
}

/// Normalized amplitude vector of a one- or two-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Builds a state from its amplitudes. The length must be 2 or 4 and the squared
    /// norm must be 1 within [`DERIVED_TOL`].
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let num_qubits = qubits_for_dim(amplitudes.len())?;
        check_finite(&amplitudes, "state")?;
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if (norm - 1.0).abs() > DERIVED_TOL {
            return domain(format!("state is not normalized (squared norm {norm})"));
        }
        Ok(Self { num_qubits, amplitudes })
    }

    /// Computational basis state `|index⟩` on `num_qubits` qubits.
    pub fn basis(index: usize, num_qubits: usize) -> Result<Self> {
        if !(1..=2).contains(&num_qubits) {
            return domain(format!("{num_qubits} qubits is not supported (expected 1 or 2)"));
        }
        let dim = 1 << num_qubits;
        if index >= dim {
            return domain(format!("basis index {index} out of range for {num_qubits} qubit(s)"));
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Ok(Self { num_qubits, amplitudes })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// The same state multiplied by the unit-modulus scalar `phase`.
    pub fn with_phase(&self, phase: Complex64) -> Result<Self> {
        Self::new(self.amplitudes.iter().map(|z| z * phase).collect())
    }

    /// Born-rule probabilities `|amplitude[k]|²`.
    pub fn outcome_distribution(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return domain("fidelity between states of different dimension");
        }
        let overlap: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(overlap.norm_sqr())
    }

    /// The basis index `k` if this state equals `|k⟩` up to a global phase within `tol`.
    pub fn basis_index(&self, tol: f64) -> Option<usize> {
        let k = pivot(&self.amplitudes);
        let basis = Self::basis(k, self.num_qubits).ok()?;
        equal_up_to_global_phase(self, &basis, tol)
            .unwrap_or(false)
            .then_some(k)
    }

    /// Full projective measurement in the computational basis.
    ///
    /// Draws one uniform `f64` from `rng` and returns the outcome together with the
    /// collapsed basis state.
    pub fn measure<R: Rng + ?Sized>(&self, rng: &mut R) -> (Outcome, StateVector) {
        let probabilities = self.outcome_distribution();
        let index = sample_index(&probabilities, rng.random::<f64>());
        let collapsed = Self::basis(index, self.num_qubits).expect("sampled index is in range");
        (Outcome::new(index, self.num_qubits), collapsed)
    }

    /// Measures a single qubit of the register.
    ///
    /// The outcome follows the marginal Born probability and the returned state is the
    /// renormalized conditional state. For one-qubit registers this is the full
    /// measurement.
    pub fn measure_qubit<R: Rng + ?Sized>(&self, qubit: usize, rng: &mut R) -> Result<(bool, StateVector)> {
        if qubit >= self.num_qubits {
            return domain(format!("qubit {qubit} out of range for {} qubit(s)", self.num_qubits));
        }
        let shift = self.num_qubits - 1 - qubit;
        let p_one: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(k, _)| (k >> shift) & 1 == 1)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        let u = rng.random::<f64>();
        let bit = if p_one <= 0.0 {
            false
        } else if p_one >= 1.0 {
            true
        } else {
            u < p_one
        };
        let p_kept = if bit { p_one } else { 1.0 - p_one };
        let scale = 1.0 / p_kept.sqrt();
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(k, z)| if ((k >> shift) & 1 == 1) == bit { z * scale } else { ZERO })
            .collect();
        Ok((bit, Self::new(amplitudes)?))
    }
}

/// Inverse-CDF sample. Falls back to the last index with nonzero probability when
/// rounding leaves the cumulative sum short of `u`.
pub(crate) fn sample_index(probabilities: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_nonzero = 0;
    for (k, &p) in probabilities.iter().enumerate() {
        if p > 0.0 {
            last_nonzero = k;
            cumulative += p;
            if u < cumulative {
                return k;
            }
        }
    }
    last_nonzero
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .amplitudes
            .iter()
            .map(|z| format!("{:.4}{:+.4}i", z.re, z.im))
            .collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// `|k⟩` for the basis state `|index⟩` on `num_qubits` qubits.
pub fn basis_state(index: usize, num_qubits: usize) -> Result<StateVector> {
    StateVector::basis(index, num_qubits)
}

/// True iff `a = c·b` for some unit-modulus `c`, entrywise within `tol`.
pub fn equal_up_to_global_phase(a: &StateVector, b: &StateVector, tol: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return domain(format!(
            "cannot compare states of dimension {} and {}",
            a.dim(),
            b.dim()
        ));
    }
    Ok(proportionality_phase(&a.amplitudes, &b.amplitudes, tol).is_some())
}

/// A computational-basis measurement result.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Outcome {
    pub index: usize,
    /// Binary expansion of `index`, qubit 0 first.
    pub bits: Vec<bool>,
}

impl Outcome {
    pub fn new(index: usize, num_qubits: usize) -> Self {
        Self { index, bits: index_bits(index, num_qubits) }
    }
}

/// Binary expansion of `index` with `num_qubits` digits, most significant first.
pub fn index_bits(index: usize, num_qubits: usize) -> Vec<bool> {
    (0..num_qubits)
        .map(|q| (index >> (num_qubits - 1 - q)) & 1 == 1)
        .collect()
}

/// Square unitary matrix on one or two qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    dim: usize,
    entries: Vec<Complex64>,
    label: String,
}

impl UnitaryOperator {
    /// Builds an operator from row-major entries and checks `U†U = I` within
    /// [`DERIVED_TOL`].
    pub fn new(label: impl Into<String>, dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        let label = label.into();
        qubits_for_dim(dim)?;
        if entries.len() != dim * dim {
            return domain(format!(
                "operator {label} has {} entries, expected {}",
                entries.len(),
                dim * dim
            ));
        }
        check_finite(&entries, "operator")?;
        let op = Self { dim, entries, label };
        let defect = op.unitarity_defect();
        if defect > DERIVED_TOL {
            return domain(format!(
                "operator {} is not unitary (max |U†U - I| entry {defect:e})",
                op.label
            ));
        }
        Ok(op)
    }

    /// Operator from real rows scaled by `scale`.
    pub fn from_real_rows(label: impl Into<String>, scale: f64, rows: &[&[f64]]) -> Result<Self> {
        let entries = rows
            .iter()
            .flat_map(|row| row.iter().map(|&x| Complex64::new(x * scale, 0.0)))
            .collect();
        Self::new(label, rows.len(), entries)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut entries = vec![ZERO; dim * dim];
        for k in 0..dim {
            entries[k * dim + k] = ONE;
        }
        Self::new(if dim == 2 { "I" } else { "I4" }, dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_qubits(&self) -> usize {
        if self.dim == 2 {
            1
        } else {
            2
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.entries[row * self.dim..(row + 1) * self.dim]
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// The operator multiplied by a unit-modulus scalar.
    pub fn scaled(&self, phase: Complex64) -> Result<Self> {
        Self::new(
            self.label.clone(),
            self.dim,
            self.entries.iter().map(|z| z * phase).collect(),
        )
    }

    /// Largest entrywise deviation of `U†U` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.entries[k * n + i].conj() * self.entries[k * n + j];
                }
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((acc - target).norm());
            }
        }
        worst
    }

    /// Largest entrywise distance to `other`.
    pub fn max_distance(&self, other: &UnitaryOperator) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Matrix-vector product `U·ψ`.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if self.dim != psi.dim() {
            return domain(format!(
                "operator {} of dimension {} applied to a state of dimension {}",
                self.label,
                self.dim,
                psi.dim()
            ));
        }
        let n = self.dim;
        let amplitudes = (0..n)
            .map(|i| (0..n).map(|k| self.entries[i * n + k] * psi.amplitudes[k]).sum())
            .collect();
        StateVector::new(amplitudes)
    }

    /// Matrix product `self·other`.
    pub fn compose(&self, other: &UnitaryOperator) -> Result<UnitaryOperator> {
        if self.dim != other.dim {
            return domain(format!(
                "cannot compose {} (dim {}) with {} (dim {})",
                self.label, self.dim, other.label, other.dim
            ));
        }
        Self::new(
            format!("{}·{}", self.label, other.label),
            self.dim,
            matmul(&self.entries, &other.entries, self.dim),
        )
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> UnitaryOperator {
        let n = self.dim;
        let mut entries = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j].conj();
            }
        }
        Self { dim: n, entries, label: format!("{}†", self.label) }
    }

    /// Kronecker product `self ⊗ other`; both factors must be single-qubit.
    pub fn tensor(&self, other: &UnitaryOperator) -> Result<UnitaryOperator> {
        if self.dim != 2 || other.dim != 2 {
            return domain("tensor products are only supported for two single-qubit operators");
        }
        let mut entries = vec![ZERO; 16];
        for (r1, c1, r2, c2) in kron_indices() {
            entries[(2 * r1 + r2) * 4 + (2 * c1 + c2)] = self.entry(r1, c1) * other.entry(r2, c2);
        }
        Self::new(format!("{}⊗{}", self.label, other.label), 4, entries)
    }

    /// Whether this operator is `c·I` for a unit-modulus `c`.
    pub fn is_identity_up_to_phase(&self, tol: f64) -> bool {
        let identity = Self::identity(self.dim).expect("dims 2 and 4 are supported");
        proportionality_phase(&self.entries, &identity.entries, tol).is_some()
    }
}

fn kron_indices() -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..16).map(|k| ((k >> 3) & 1, (k >> 2) & 1, (k >> 1) & 1, k & 1))
}

pub(crate) fn matmul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == ZERO {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

impl fmt::Display for UnitaryOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}:", self.label)?;
        for r in 0..self.dim {
            let parts: Vec<String> = self
                .row(r)
                .iter()
                .map(|z| format!("{:+.4}{:+.4}i", z.re, z.im))
                .collect();
            writeln!(f, "  [{}]", parts.join(" "))?;
        }
        Ok(())
    }
}
