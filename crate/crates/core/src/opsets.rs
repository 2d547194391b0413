//! Operator families shared by Alice and Bob, and checks of the algebra the exchange
//! relies on.
//!
//! Five families are available by name through [`family_by_name`]:
//!
//! | name              | dim | members                          |
//! |-------------------|-----|----------------------------------|
//! | `pauli`           | 2   | `I`, `X`, `Y`, `Z`               |
//! | `hadamard`        | 2   | `K` (identity), `L` (Hadamard)   |
//! | `controlled-pair` | 4   | `I4`, `UA`, `UB`, `UAUB`         |
//! | `dft`             | 4   | `I4`, `F`, `F2`, `F3`            |
//! | `quaternion`      | 4   | `Qi`, `Qj`, `Qk`, `Q1`           |
//!
//! `controlled-pair` and `dft` are closed under products by adding the products of
//! their generators. `F2 = F·F` is the index-negation permutation, not the identity.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{domain, Error, Result};
use crate::qcore::{proportionality_phase, StateVector, UnitaryOperator, ONE, ZERO};
use crate::rng::stream_rng;

/// Canonical family names, in catalog order.
pub const CATALOG: [&str; 5] = ["pauli", "hadamard", "controlled-pair", "dft", "quaternion"];

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Named finite set of same-dimension unitaries.
///
/// Construction checks only that the set is nonempty and dimensionally consistent.
/// Phase-commutation and closure are checked by [`verify_family`], which also reports
/// on ad hoc sets that fail them.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFamily {
    name: String,
    dim: usize,
    members: Vec<UnitaryOperator>,
}

impl OperatorFamily {
    pub fn new(name: impl Into<String>, members: Vec<UnitaryOperator>) -> Result<Self> {
        let name = name.into();
        let Some(first) = members.first() else {
            return domain(format!("family {name} has no members"));
        };
        let dim = first.dim();
        if let Some(odd) = members.iter().find(|m| m.dim() != dim) {
            return domain(format!(
                "family {name} mixes dimension {dim} with {} ({})",
                odd.dim(),
                odd.label()
            ));
        }
        Ok(Self { name, dim, members })
    }

    pub fn name(&self) -> &str {
        &self.name
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

    pub fn members(&self) -> &[UnitaryOperator] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, label: &str) -> Option<&UnitaryOperator> {
        self.members.iter().find(|m| m.label() == label)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.label()).collect()
    }

    /// A uniformly chosen member index.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.members.len())
    }
}

/// Single-qubit Pauli labels, in decomposition scan order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn label(self) -> &'static str {
        match self {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        }
    }

    pub fn matrix(self) -> UnitaryOperator {
        let entries = match self {
            Pauli::I => vec![ONE, ZERO, ZERO, ONE],
            Pauli::X => vec![ZERO, ONE, ONE, ZERO],
            Pauli::Y => vec![ZERO, -I, I, ZERO],
            Pauli::Z => vec![ONE, ZERO, ZERO, -ONE],
        };
        UnitaryOperator::new(self.label(), 2, entries).expect("Pauli matrices are unitary")
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn real4(label: &str, scale: f64, rows: [[f64; 4]; 4]) -> UnitaryOperator {
    let rows: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    UnitaryOperator::from_real_rows(label, scale, &rows).expect("catalog matrices are unitary")
}

fn build(name: &str, members: Vec<UnitaryOperator>) -> OperatorFamily {
    OperatorFamily::new(name, members).expect("catalog families are consistent")
}

/// `{I, X, Y, Z}`.
pub fn pauli_family() -> OperatorFamily {
    build("pauli", Pauli::ALL.iter().map(|p| p.matrix()).collect())
}

/// `{K, L}`: do nothing, or apply the Hadamard transform.
pub fn hadamard_family() -> OperatorFamily {
    let k = UnitaryOperator::from_real_rows("K", 1.0, &[&[1.0, 0.0], &[0.0, 1.0]]).expect("unitary");
    let l = UnitaryOperator::from_real_rows("L", FRAC_1_SQRT_2, &[&[1.0, 1.0], &[1.0, -1.0]])
        .expect("unitary");
    build("hadamard", vec![k, l])
}

/// The two controlled bit-flip permutations and the products that close them.
///
/// `UA` flips qubit 1 when qubit 0 is set, `UB` flips it when qubit 0 is clear, and
/// their product is `I⊗X`.
pub fn controlled_pair_family() -> OperatorFamily {
    let ua = real4(
        "UA",
        1.0,
        [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 1.0, 0.0]],
    );
    let ub = real4(
        "UB",
        1.0,
        [[0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
    );
    let uaub = ua.compose(&ub).expect("same dimension").with_label("UAUB");
    let identity = UnitaryOperator::identity(4).expect("dim 4");
    build("controlled-pair", vec![identity, ua, ub, uaub])
}

/// The four-point discrete Fourier transform `F[j][k] = iʲᵏ / 2` and its powers.
pub fn dft_family() -> OperatorFamily {
    let powers = [ONE, I, -ONE, -I];
    let mut entries = vec![ZERO; 16];
    for j in 0..4 {
        for k in 0..4 {
            entries[j * 4 + k] = powers[(j * k) % 4] * 0.5;
        }
    }
    let f = UnitaryOperator::new("F", 4, entries).expect("DFT is unitary");
    let f2 = f.compose(&f).expect("same dimension").with_label("F2");
    let f3 = f2.compose(&f).expect("same dimension").with_label("F3");
    let identity = UnitaryOperator::identity(4).expect("dim 4");
    build("dft", vec![identity, f, f2, f3])
}

/// The quaternion units as real 4×4 matrices, in the order `Qi, Qj, Qk, Q1`.
pub fn quaternion_family() -> OperatorFamily {
    let qi = real4(
        "Qi",
        1.0,
        [[0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, -1.0, 0.0]],
    );
    let qj = real4(
        "Qj",
        1.0,
        [[0.0, 0.0, 0.0, -1.0], [0.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]],
    );
    let qk = real4(
        "Qk",
        1.0,
        [[0.0, 0.0, -1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0], [0.0, -1.0, 0.0, 0.0]],
    );
    let q1 = UnitaryOperator::identity(4).expect("dim 4").with_label("Q1");
    build("quaternion", vec![qi, qj, qk, q1])
}

/// Looks up a catalog family by its canonical name.
pub fn family_by_name(name: &str) -> Result<OperatorFamily> {
    match name {
        "pauli" => Ok(pauli_family()),
        "hadamard" => Ok(hadamard_family()),
        "controlled-pair" => Ok(controlled_pair_family()),
        "dft" => Ok(dft_family()),
        "quaternion" => Ok(quaternion_family()),
        other => Err(Error::Config(format!(
            "unknown family '{other}' (expected one of {})",
            CATALOG.join(", ")
        ))),
    }
}

/// All catalog families, in catalog order.
pub fn catalog() -> Vec<OperatorFamily> {
    CATALOG.iter().map(|n| family_by_name(n).expect("catalog name")).collect()
}

/// Finds a catalog operator of dimension `dim` by label.
pub fn operator_by_label(dim: usize, label: &str) -> Option<UnitaryOperator> {
    catalog()
        .into_iter()
        .filter(|f| f.dim() == dim)
        .find_map(|f| f.member(label).cloned())
}

/// The scalar `c` with `U·V = c·(V·U)` within `tol`, or `None` when the products are
/// not proportional.
pub fn commutation_phase(u: &UnitaryOperator, v: &UnitaryOperator, tol: f64) -> Result<Option<Complex64>> {
    if u.dim() != v.dim() {
        return domain(format!(
            "cannot commute {} (dim {}) with {} (dim {})",
            u.label(),
            u.dim(),
            v.label(),
            v.dim()
        ));
    }
    let uv = u.compose(v)?;
    let vu = v.compose(u)?;
    Ok(proportionality_phase(uv.entries(), vu.entries(), tol))
}

/// Evidence that a product of two members is another member up to phase:
/// `left·right = phase · members[member]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureWitness {
    pub member: usize,
    pub phase: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCheck {
    pub left: usize,
    pub right: usize,
    pub commutation_phase: Option<Complex64>,
    pub closure: Option<ClosureWitness>,
}

impl PairCheck {
    pub fn passed(&self) -> bool {
        self.commutation_phase.is_some() && self.closure.is_some()
    }
}

/// Result of [`verify_family`]: one entry per ordered member pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyReport {
    pub family: String,
    pub dim: usize,
    pub labels: Vec<String>,
    pub pairs: Vec<PairCheck>,
    /// First member equal to the identity up to phase.
    pub identity_member: Option<usize>,
    pub passed: bool,
}

impl FamilyReport {
    pub fn pair(&self, left: usize, right: usize) -> Option<&PairCheck> {
        self.pairs.iter().find(|p| p.left == left && p.right == right)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PairCheck> {
        self.pairs.iter().filter(|p| !p.passed())
    }
}

/// Formats a unit scalar as `+1`, `-1`, `+i`, `-i`, or its polar form.
pub fn format_phase(c: Complex64) -> String {
    const NAMED: [(f64, f64, &str); 4] = [(1.0, 0.0, "+1"), (-1.0, 0.0, "-1"), (0.0, 1.0, "+i"), (0.0, -1.0, "-i")];
    NAMED
        .iter()
        .find(|(re, im, _)| (c - Complex64::new(*re, *im)).norm() < 1e-9)
        .map(|(_, _, s)| s.to_string())
        .unwrap_or_else(|| format!("exp({:.6}i)", c.arg()))
}

impl fmt::Display for FamilyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} (dim {}, {} members): {}",
            self.family,
            self.dim,
            self.labels.len(),
            if self.passed { "PASS" } else { "FAIL" }
        )?;
        match self.identity_member {
            Some(k) => writeln!(f, "  identity: {}", self.labels[k])?,
            None => writeln!(f, "  identity: missing")?,
        }
        for pair in &self.pairs {
            let commute = pair.commutation_phase.map_or("none".to_string(), format_phase);
            let closure = pair.closure.map_or("none".to_string(), |w| {
                format!("{} {}", format_phase(w.phase), self.labels[w.member])
            });
            writeln!(
                f,
                "  {} {}: commutation {commute}, product {closure}",
                self.labels[pair.left], self.labels[pair.right]
            )?;
        }
        Ok(())
    }
}

/// Checks phase-commutation and phase-closure for every ordered pair of members and
/// that the identity is present up to phase. Failures are reported, not raised.
pub fn verify_family(family: &OperatorFamily, tol: f64) -> FamilyReport {
    let members = family.members();
    let mut pairs = Vec::with_capacity(members.len() * members.len());
    for (i, u) in members.iter().enumerate() {
        for (j, v) in members.iter().enumerate() {
            let commutation = commutation_phase(u, v, tol).ok().flatten();
            let closure = u.compose(v).ok().and_then(|product| {
                members.iter().enumerate().find_map(|(k, w)| {
                    proportionality_phase(product.entries(), w.entries(), tol)
                        .map(|phase| ClosureWitness { member: k, phase })
                })
            });
            pairs.push(PairCheck { left: i, right: j, commutation_phase: commutation, closure });
        }
    }
    let identity_member = members.iter().position(|m| m.is_identity_up_to_phase(tol));
    let passed = identity_member.is_some() && pairs.iter().all(PairCheck::passed);
    FamilyReport {
        family: family.name().to_string(),
        dim: family.dim(),
        labels: family.labels().into_iter().map(String::from).collect(),
        pairs,
        identity_member,
        passed,
    }
}

fn check_input(family: &OperatorFamily, input: &StateVector) -> Result<()> {
    if family.dim() != input.dim() {
        return domain(format!(
            "family {} has dimension {} but the input state has dimension {}",
            family.name(),
            family.dim(),
            input.dim()
        ));
    }
    Ok(())
}

/// Outcome distribution after applying a uniformly chosen member to `input`.
pub fn aggregate_outcome_distribution(family: &OperatorFamily, input: &StateVector) -> Result<Vec<f64>> {
    check_input(family, input)?;
    let mut total = vec![0.0; family.dim()];
    for u in family.members() {
        for (acc, p) in total.iter_mut().zip(u.apply(input)?.outcome_distribution()) {
            *acc += p;
        }
    }
    let n = family.len() as f64;
    Ok(total.into_iter().map(|p| p / n).collect())
}

/// Whether the aggregate outcome distribution on `input` is uniform within `tol`.
pub fn is_equiprobable(family: &OperatorFamily, input: &StateVector, tol: f64) -> Result<bool> {
    let uniform = 1.0 / family.dim() as f64;
    Ok(aggregate_outcome_distribution(family, input)?
        .iter()
        .all(|p| (p - uniform).abs() <= tol))
}

/// Fraction of members that take the basis state `input` to a superposition, i.e. a
/// state with at least two amplitudes larger than `tol` in modulus.
pub fn superposition_probability(family: &OperatorFamily, input: &StateVector, tol: f64) -> Result<f64> {
    check_input(family, input)?;
    if input.basis_index(tol).is_none() {
        return domain("superposition probability needs a computational basis input");
    }
    let mut spread = 0usize;
    for u in family.members() {
        let image = u.apply(input)?;
        if image.amplitudes().iter().filter(|z| z.norm() > tol).count() >= 2 {
            spread += 1;
        }
    }
    Ok(spread as f64 / family.len() as f64)
}

/// Whether every member maps every basis state to a basis state up to phase.
pub fn is_basis_transparent(family: &OperatorFamily, tol: f64) -> bool {
    family.members().iter().all(|u| {
        (0..family.dim()).all(|k| {
            StateVector::basis(k, family.num_qubits())
                .and_then(|s| u.apply(&s))
                .map(|image| image.basis_index(tol).is_some())
                .unwrap_or(false)
        })
    })
}

/// Empirical outcome frequencies when a uniformly drawn member is applied once to
/// `input` and the result is measured, over `samples` independent draws.
pub fn sample_single_application(
    family: &OperatorFamily,
    input: &StateVector,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_input(family, input)?;
    if samples == 0 {
        return domain("at least one sample is required");
    }
    let images = family
        .members()
        .iter()
        .map(|u| u.apply(input))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = stream_rng(seed, 0);
    let mut counts = vec![0usize; family.dim()];
    for _ in 0..samples {
        let image = &images[family.draw(&mut rng)];
        counts[image.measure(&mut rng).0.index] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / samples as f64).collect())
}

/// `U = phase · (left ⊗ right)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDecomposition {
    pub left: Pauli,
    pub right: Pauli,
    pub phase: Complex64,
}

impl PhaseDecomposition {
    pub fn reconstruct(&self) -> UnitaryOperator {
        self.left
            .matrix()
            .tensor(&self.right.matrix())
            .and_then(|p| p.scaled(self.phase))
            .expect("Pauli tensor products are unitary")
    }
}

/// Candidate phases for [`pauli_tensor_decompose`], in scan order.
pub const DECOMPOSITION_PHASES: [Complex64; 4] = [ONE, Complex64::new(-1.0, 0.0), I, Complex64::new(0.0, -1.0)];

/// Writes a two-qubit operator as a phase times a tensor product of Pauli matrices.
///
/// Scans left factor `I, X, Y, Z`, then right factor in the same order, then phases
/// `1, -1, i, -i`, and returns the first candidate matching within `1e-9`. Returns
/// `None` for operators that are not of this form, including any non-4×4 input.
pub fn pauli_tensor_decompose(u: &UnitaryOperator) -> Option<PhaseDecomposition> {
    if u.dim() != 4 {
        return None;
    }
    for left in Pauli::ALL {
        for right in Pauli::ALL {
            let product = left.matrix().tensor(&right.matrix()).expect("single-qubit factors");
            for phase in DECOMPOSITION_PHASES {
                let matches = u
                    .entries()
                    .iter()
                    .zip(product.entries())
                    .all(|(a, b)| (a - phase * b).norm() <= crate::qcore::DERIVED_TOL);
                if matches {
                    return Some(PhaseDecomposition { left, right, phase });
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{basis_state, CONSTRUCTED_TOL, DERIVED_TOL};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < DERIVED_TOL
    }

    fn row(u: &UnitaryOperator, r: usize) -> Vec<f64> {
        u.row(r).iter().map(|z| z.re).collect()
    }

    #[test]
    fn pauli_entries() {
        let family = pauli_family();
        assert_eq!(family.labels(), vec!["I", "X", "Y", "Z"]);
        assert_eq!(family.member("Y").unwrap().entry(0, 1), c(0.0, -1.0));
        assert_eq!(family.member("Z").unwrap().entry(1, 1), c(-1.0, 0.0));
    }

    #[test]
    fn hadamard_entries_and_involution() {
        let family = hadamard_family();
        let l = family.member("L").unwrap();
        assert!((l.entry(1, 1) - c(-FRAC_1_SQRT_2, 0.0)).norm() < CONSTRUCTED_TOL);
        let ll = l.compose(l).unwrap();
        assert!(ll.max_distance(family.member("K").unwrap()) < CONSTRUCTED_TOL);
    }

    #[test]
    fn controlled_pair_rows_and_products() {
        let family = controlled_pair_family();
        let ua = family.member("UA").unwrap();
        let ub = family.member("UB").unwrap();
        assert_eq!(row(ua, 2), vec![0.0, 0.0, 0.0, 1.0]);
        assert!(close(commutation_phase(ua, ub, DERIVED_TOL).unwrap().unwrap(), ONE));
        let image = ua.compose(ub).unwrap().apply(&basis_state(1, 2).unwrap()).unwrap();
        assert_eq!(image, basis_state(0, 2).unwrap());
        // UA on |10⟩ flips the second qubit.
        assert_eq!(ua.apply(&basis_state(2, 2).unwrap()).unwrap(), basis_state(3, 2).unwrap());
    }

    #[test]
    fn dft_entries() {
        let family = dft_family();
        let f = family.member("F").unwrap();
        assert_eq!(f.entry(1, 1), c(0.0, 0.5));
        assert_eq!(f.entry(3, 3), c(0.0, 0.5));
        assert!(f.unitarity_defect() < CONSTRUCTED_TOL);
        assert_eq!(f.entry(1, 3), c(0.0, -0.5));
    }

    #[test]
    fn dft_square_is_a_permutation_not_identity() {
        let family = dft_family();
        let f = family.member("F").unwrap();
        let f2 = f.compose(f).unwrap();
        assert!(!f2.is_identity_up_to_phase(DERIVED_TOL));
        // |1⟩ ↔ |3⟩, |0⟩ and |2⟩ fixed.
        for (from, to) in [(0, 0), (1, 3), (2, 2), (3, 1)] {
            let image = f2.apply(&basis_state(from, 2).unwrap()).unwrap();
            assert_eq!(image.basis_index(DERIVED_TOL), Some(to));
        }
        // {I, F} alone is not closed, which is why the catalog adds F² and F³.
        let pair = OperatorFamily::new("dft-pair", family.members()[..2].to_vec()).unwrap();
        assert!(!verify_family(&pair, DERIVED_TOL).passed);
        let f4 = f2.compose(&f2).unwrap();
        assert!(f4.is_identity_up_to_phase(CONSTRUCTED_TOL));
    }

    #[test]
    fn quaternion_rows() {
        let family = quaternion_family();
        assert_eq!(family.labels(), vec!["Qi", "Qj", "Qk", "Q1"]);
        assert_eq!(row(family.member("Qi").unwrap(), 1), vec![-1.0, 0.0, 0.0, 0.0]);
        assert_eq!(row(family.member("Qj").unwrap(), 3), vec![1.0, 0.0, 0.0, 0.0]);
        let identity = UnitaryOperator::identity(4).unwrap();
        assert!(family.member("Q1").unwrap().max_distance(&identity) == 0.0);
    }

    #[test]
    fn commutation_phases() {
        let p = pauli_family();
        let get = |l: &str| p.member(l).unwrap().clone();
        assert!(close(commutation_phase(&get("I"), &get("X"), DERIVED_TOL).unwrap().unwrap(), ONE));
        assert!(close(commutation_phase(&get("X"), &get("Z"), DERIVED_TOL).unwrap().unwrap(), -ONE));
        let q = quaternion_family();
        let phase = commutation_phase(q.member("Qi").unwrap(), q.member("Qj").unwrap(), DERIVED_TOL).unwrap();
        assert!(close(phase.unwrap(), -ONE));
        assert!(commutation_phase(&get("X"), q.member("Qi").unwrap(), DERIVED_TOL).is_err());
    }

    #[test]
    fn catalog_families_verify() {
        for family in catalog() {
            let report = verify_family(&family, DERIVED_TOL);
            assert!(report.passed, "{report}");
            assert_eq!(report.pairs.len(), family.len() * family.len());
        }
    }

    #[test]
    fn pauli_phases_and_closure_witnesses() {
        let family = pauli_family();
        let report = verify_family(&family, DERIVED_TOL);
        for pair in &report.pairs {
            let phase = pair.commutation_phase.unwrap();
            assert!(close(phase, ONE) || close(phase, -ONE));
        }
        // XY = iZ, YZ = iX, ZX = iY.
        let get = |l: &str| family.member(l).unwrap().clone();
        for (a, b, prod) in [("X", "Y", "Z"), ("Y", "Z", "X"), ("Z", "X", "Y")] {
            let lhs = get(a).compose(&get(b)).unwrap();
            let rhs = get(prod).scaled(I).unwrap();
            assert!(lhs.max_distance(&rhs) < CONSTRUCTED_TOL, "{a}{b}");
        }
    }

    #[test]
    fn quaternion_anticommutation_and_cycle() {
        let family = quaternion_family();
        let report = verify_family(&family, DERIVED_TOL);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(close(report.pair(i, j).unwrap().commutation_phase.unwrap(), -ONE));
                }
            }
        }
        for (a, b, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            let witness = report.pair(a, b).unwrap().closure.unwrap();
            assert_eq!(witness.member, k);
            assert!(DECOMPOSITION_PHASES.iter().any(|&p| close(p, witness.phase)));
        }
    }

    #[test]
    fn ad_hoc_non_commuting_family_fails() {
        let x = pauli_family().member("X").unwrap().clone();
        let l = hadamard_family().member("L").unwrap().clone();
        let family = OperatorFamily::new("x-and-l", vec![x.clone(), l.clone()]).unwrap();
        assert_eq!(commutation_phase(&x, &l, DERIVED_TOL).unwrap(), None);
        let report = verify_family(&family, DERIVED_TOL);
        assert!(!report.passed);
        assert_eq!(report.pair(0, 1).unwrap().commutation_phase, None);
        assert_eq!(report.identity_member, None);
    }

    #[test]
    fn family_construction_errors() {
        assert!(OperatorFamily::new("empty", vec![]).is_err());
        let mixed = vec![UnitaryOperator::identity(2).unwrap(), UnitaryOperator::identity(4).unwrap()];
        assert!(OperatorFamily::new("mixed", mixed).is_err());
        assert!(matches!(family_by_name("rotation"), Err(Error::Config(_))));
    }

    #[test]
    fn aggregate_distributions() {
        let zero = basis_state(0, 1).unwrap();
        let p = aggregate_outcome_distribution(&pauli_family(), &zero).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        let h = aggregate_outcome_distribution(&hadamard_family(), &zero).unwrap();
        assert!((h[0] - 0.75).abs() < CONSTRUCTED_TOL && (h[1] - 0.25).abs() < CONSTRUCTED_TOL);
        let d = aggregate_outcome_distribution(&dft_family(), &basis_state(0, 2).unwrap()).unwrap();
        for (got, want) in d.iter().zip([0.625, 0.125, 0.125, 0.125]) {
            assert!((got - want).abs() < CONSTRUCTED_TOL);
        }
        assert!(is_equiprobable(&pauli_family(), &zero, DERIVED_TOL).unwrap());
        assert!(!is_equiprobable(&hadamard_family(), &zero, DERIVED_TOL).unwrap());
        assert!(aggregate_outcome_distribution(&dft_family(), &zero).is_err());
    }

    #[test]
    fn superposition_probabilities() {
        let zero = basis_state(0, 1).unwrap();
        assert_eq!(superposition_probability(&hadamard_family(), &zero, DERIVED_TOL).unwrap(), 0.5);
        assert_eq!(superposition_probability(&pauli_family(), &zero, DERIVED_TOL).unwrap(), 0.0);
        let zero2 = basis_state(0, 2).unwrap();
        assert_eq!(superposition_probability(&dft_family(), &zero2, DERIVED_TOL).unwrap(), 0.5);
        let plus = hadamard_family().member("L").unwrap().apply(&zero).unwrap();
        assert!(superposition_probability(&pauli_family(), &plus, DERIVED_TOL).is_err());
    }

    #[test]
    fn basis_transparency() {
        assert!(is_basis_transparent(&pauli_family(), DERIVED_TOL));
        assert!(is_basis_transparent(&controlled_pair_family(), DERIVED_TOL));
        assert!(is_basis_transparent(&quaternion_family(), DERIVED_TOL));
        assert!(!is_basis_transparent(&hadamard_family(), DERIVED_TOL));
        assert!(!is_basis_transparent(&dft_family(), DERIVED_TOL));
    }

    #[test]
    fn decompositions() {
        let q = quaternion_family();
        let q1 = pauli_tensor_decompose(q.member("Q1").unwrap()).unwrap();
        assert_eq!((q1.left, q1.right, q1.phase), (Pauli::I, Pauli::I, ONE));
        let qi = pauli_tensor_decompose(q.member("Qi").unwrap()).unwrap();
        assert_eq!((qi.left, qi.right, qi.phase), (Pauli::I, Pauli::Y, I));
        let qj = pauli_tensor_decompose(q.member("Qj").unwrap()).unwrap();
        assert_eq!((qj.left, qj.right, qj.phase), (Pauli::Y, Pauli::X, -I));
        let qk = pauli_tensor_decompose(q.member("Qk").unwrap()).unwrap();
        assert_eq!((qk.left, qk.right, qk.phase), (Pauli::Y, Pauli::Z, -I));
        let ua = controlled_pair_family().member("UA").unwrap().clone();
        assert_eq!(pauli_tensor_decompose(&ua), None);
        assert_eq!(pauli_tensor_decompose(&Pauli::X.matrix()), None);
    }

    #[test]
    fn tensor_of_identity_and_y_times_i_is_qi() {
        let iy = Pauli::I.matrix().tensor(&Pauli::Y.matrix()).unwrap().scaled(I).unwrap();
        assert!(iy.max_distance(quaternion_family().member("Qi").unwrap()) < CONSTRUCTED_TOL);
    }

    #[test]
    fn operator_lookup() {
        assert_eq!(operator_by_label(2, "L").unwrap().label(), "L");
        assert_eq!(operator_by_label(4, "Qk").unwrap().label(), "Qk");
        assert!(operator_by_label(2, "Qk").is_none());
    }

    #[test]
    fn phase_formatting() {
        assert_eq!(format_phase(ONE), "+1");
        assert_eq!(format_phase(-I), "-i");
        assert!(format_phase(Complex64::from_polar(1.0, 0.3)).starts_with("exp("));
    }
}
