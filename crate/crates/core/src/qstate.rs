//! Complex matrix core and two-qubit polarization states.
//!
//! Two-qubit operators use the basis order `HH, HV, VH, VV` throughout the
//! crate: qubit 1 is the most significant index.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hermiticity/trace tolerance for freshly constructed states.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Hermiticity/trace tolerance for states produced by chained products.
pub const COMPOSED_TOL: f64 = 1e-9;
/// Eigenvalues below this are treated as a genuine loss of positivity.
pub const EIGEN_FLOOR: f64 = -1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixRepr", try_from = "MatrixRepr")]
pub struct CMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

/// `{"dim": n, "re": [...], "im": [...]}` wire form.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl From<CMatrix> for MatrixRepr {
    fn from(m: CMatrix) -> Self {
        MatrixRepr {
            dim: m.dim,
            re: m.entries.iter().map(|z| z.re).collect(),
            im: m.entries.iter().map(|z| z.im).collect(),
        }
    }
}

impl TryFrom<MatrixRepr> for CMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        if r.re.len() != r.im.len() {
            return Err(Error::InvalidData("re/im arrays differ in length".into()));
        }
        let entries = r.re.iter().zip(&r.im).map(|(&re, &im)| Complex64::new(re, im)).collect();
        CMatrix::from_entries(r.dim, entries)
    }
}

impl CMatrix {
    pub fn from_entries(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::Domain(format!("expected {} entries for dim {dim}, got {}", dim * dim, entries.len())));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(CMatrix { dim, entries })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        CMatrix { dim, entries }
    }

    pub fn zeros(dim: usize) -> Self {
        CMatrix { dim, entries: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i].into() } else { ZERO })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.entries[i * self.dim + j] = z;
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        CMatrix { dim: self.dim, entries: self.entries.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        CMatrix { dim: self.dim, entries: self.entries.iter().map(|z| z * s).collect() }
    }

    /// `Re Tr(self · other)`, without forming the product.
    pub fn trace_product_re(&self, other: &CMatrix) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                acc += (self.get(i, k) * other.get(k, i)).re;
            }
        }
        acc
    }

    /// Largest elementwise deviation from hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5)
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    /// Eigendecomposition of a Hermitian matrix. Eigenvalues ascend; column
    /// `k` of the returned matrix is the eigenvector for eigenvalue `k`.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, CMatrix) {
        let eig = self.hermitian_part().to_nalgebra().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = Self::from_fn(self.dim, |i, j| eig.eigenvectors[(i, order[j])]);
        (values, vectors)
    }

    /// Applies `f` to the eigenvalues of a Hermitian matrix.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let (values, vecs) = self.hermitian_eigen();
        let n = self.dim;
        let mapped: Vec<f64> = values.iter().map(|&v| f(v)).collect();
        Self::from_fn(n, |i, j| (0..n).map(|k| vecs.get(i, k) * vecs.get(j, k).conj() * mapped[k]).sum())
    }

    /// Principal square root of a positive-semidefinite Hermitian matrix.
    ///
    /// Eigenvalues below `1e-14·λ_max` are roundoff of exact zeros and map
    /// to zero; anything below [`EIGEN_FLOOR`] is a domain error.
    pub fn sqrt_psd(&self) -> Result<CMatrix> {
        let (values, _) = self.hermitian_eigen();
        if let Some(&min) = values.first() {
            if min < EIGEN_FLOOR {
                return Err(Error::Domain(format!("matrix is not positive semidefinite (eigenvalue {min:e})")));
            }
        }
        let cut = 1e-14 * values.last().copied().unwrap_or(0.0).max(0.0);
        Ok(self.hermitian_map(|v| if v > cut { v.sqrt() } else { 0.0 }))
    }

    /// Singular values, in no particular order.
    pub fn singular_values(&self) -> Vec<f64> {
        self.to_nalgebra().singular_values().iter().copied().collect()
    }

    /// Cholesky factor `L` (lower triangular) with `self = L L†`.
    pub fn cholesky(&self) -> Option<CMatrix> {
        self.hermitian_part().to_nalgebra().cholesky().map(|c| Self::from_nalgebra(&c.l()))
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        let n = self.dim;
        CMatrix::from_fn(n, |i, j| (0..n).map(|k| self.get(i, k) * rhs.get(k, j)).sum())
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        let entries = self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect();
        CMatrix { dim: self.dim, entries }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        let entries = self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect();
        CMatrix { dim: self.dim, entries }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (na, nb) = (a.dim, b.dim);
    CMatrix::from_fn(na * nb, |i, j| a.get(i / nb, j / nb) * b.get(i % nb, j % nb))
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amps: Vec<Complex64>,
}

impl Ket {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Domain("ket must have at least one amplitude".into()));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::Domain(format!("ket is not normalized (norm {norm})")));
        }
        Ok(Ket { amps })
    }

    /// Normalizes `amps` before construction.
    pub fn normalized(amps: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Domain("cannot normalize a zero vector".into()));
        }
        Ok(Ket { amps: amps.into_iter().map(|a| a / norm).collect() })
    }

    fn raw(amps: Vec<Complex64>) -> Self {
        Ket { amps }
    }

    pub fn h() -> Self {
        Self::raw(vec![ONE, ZERO])
    }

    pub fn v() -> Self {
        Self::raw(vec![ZERO, ONE])
    }

    /// `(H + V)/√2`
    pub fn plus() -> Self {
        Self::raw(vec![FRAC_1_SQRT_2.into(), FRAC_1_SQRT_2.into()])
    }

    /// `(H − V)/√2`
    pub fn minus() -> Self {
        Self::raw(vec![FRAC_1_SQRT_2.into(), (-FRAC_1_SQRT_2).into()])
    }

    /// `(H + iV)/√2`
    pub fn r() -> Self {
        Self::raw(vec![FRAC_1_SQRT_2.into(), Complex64::new(0.0, FRAC_1_SQRT_2)])
    }

    /// `(H − iV)/√2`
    pub fn l() -> Self {
        Self::raw(vec![FRAC_1_SQRT_2.into(), Complex64::new(0.0, -FRAC_1_SQRT_2)])
    }

    /// Linear polarization at `angle` radians from horizontal.
    pub fn linear(angle: f64) -> Self {
        Self::raw(vec![angle.cos().into(), angle.sin().into()])
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        let amps = self.amps.iter().flat_map(|a| other.amps.iter().map(move |b| a * b)).collect();
        Ket { amps }
    }

    /// `|ψ⟩⟨ψ|`
    pub fn projector(&self) -> CMatrix {
        CMatrix::from_fn(self.dim(), |i, j| self.amps[i] * self.amps[j].conj())
    }

    /// `⟨ψ|M|ψ⟩`, real part.
    pub fn expectation(&self, m: &CMatrix) -> f64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.amps[i].conj() * m.get(i, j) * self.amps[j];
            }
        }
        acc.re
    }
}

/// Validated two-qubit density matrix (dim 4).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CMatrix", into = "CMatrix")]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl TryFrom<CMatrix> for DensityMatrix {
    type Error = Error;

    fn try_from(m: CMatrix) -> Result<Self> {
        DensityMatrix::with_tolerance(m, COMPOSED_TOL)
    }
}

impl From<DensityMatrix> for CMatrix {
    fn from(rho: DensityMatrix) -> Self {
        rho.mat
    }
}

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        Self::with_tolerance(mat, CONSTRUCTION_TOL)
    }

    /// Validates with a caller-chosen hermiticity/trace tolerance.
    pub fn with_tolerance(mat: CMatrix, tol: f64) -> Result<Self> {
        if mat.dim != 4 {
            return Err(Error::Domain(format!("density matrix must be 4x4, got dim {}", mat.dim)));
        }
        let herm = mat.hermiticity_error();
        if herm > tol {
            return Err(Error::Domain(format!("matrix is not Hermitian (deviation {herm:e})")));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::Domain(format!("trace is {tr}, expected 1")));
        }
        let (values, _) = mat.hermitian_eigen();
        if values[0] < EIGEN_FLOOR {
            return Err(Error::Domain(format!("matrix is not positive semidefinite (eigenvalue {:e})", values[0])));
        }
        Ok(DensityMatrix { mat })
    }

    /// Builds a state from a Hermitian, PSD but unnormalized matrix.
    pub fn normalize(mat: CMatrix) -> Result<Self> {
        let tr = mat.trace().re;
        if !(tr > 0.0) {
            return Err(Error::Domain("cannot normalize a matrix with nonpositive trace".into()));
        }
        Self::with_tolerance(mat.hermitian_part().scale_real(1.0 / tr), COMPOSED_TOL)
    }

    pub fn pure(ket: &Ket) -> Result<Self> {
        Self::new(ket.projector())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.mat.get(i, j)
    }

    /// Convex combination `λ·self + (1−λ)·other`.
    pub fn mix(&self, other: &DensityMatrix, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("mixing weight {lambda} outside [0, 1]")));
        }
        let m = &self.mat.scale_real(lambda) + &other.mat.scale_real(1.0 - lambda);
        Self::with_tolerance(m, COMPOSED_TOL)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.mat.hermitian_eigen().0
    }
}

/// `(|HH⟩ + |VV⟩)/√2`
pub fn phi_plus_ket() -> Ket {
    let s = Complex64::from(FRAC_1_SQRT_2);
    Ket::raw(vec![s, ZERO, ZERO, s])
}

/// `(|HV⟩ + |VH⟩)/√2`
pub fn psi_plus_ket() -> Ket {
    let s = Complex64::from(FRAC_1_SQRT_2);
    Ket::raw(vec![ZERO, s, s, ZERO])
}

pub fn bell_phi_plus() -> DensityMatrix {
    DensityMatrix { mat: phi_plus_ket().projector() }
}

pub fn bell_psi_plus() -> DensityMatrix {
    DensityMatrix { mat: psi_plus_ket().projector() }
}

/// `I/4`
pub fn maximally_mixed() -> DensityMatrix {
    DensityMatrix { mat: CMatrix::identity(4).scale_real(0.25) }
}

/// `p·|φ+⟩⟨φ+| + (1−p)·I/4`
pub fn werner(p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("Werner weight {p} outside [0, 1]")));
    }
    let m = &bell_phi_plus().mat.scale_real(p) + &CMatrix::identity(4).scale_real((1.0 - p) / 4.0);
    DensityMatrix::new(m)
}

/// Uhlmann fidelity `(Tr √(√a b √a))²` on raw matrices.
///
/// Both arguments must be positive semidefinite up to [`EIGEN_FLOOR`].
pub fn uhlmann_fidelity(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::Domain(format!("dimension mismatch: {} vs {}", a.dim, b.dim)));
    }
    // Tr√(√a b √a) is the trace norm of √a √b; summing singular values
    // avoids square roots of roundoff-level eigenvalues.
    let product = &a.sqrt_psd()? * &b.sqrt_psd()?;
    let root_trace: f64 = product.singular_values().iter().sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// Uhlmann fidelity between two valid states.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    uhlmann_fidelity(&a.mat, &b.mat).expect("validated density matrices are PSD")
}

/// Which qubit to trace out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Traces out `subsystem`, returning the 2×2 marginal of the other qubit.
pub fn partial_trace(rho: &DensityMatrix, subsystem: Subsystem) -> CMatrix {
    let m = &rho.mat;
    CMatrix::from_fn(2, |i, j| match subsystem {
        Subsystem::First => (0..2).map(|k| m.get(2 * k + i, 2 * k + j)).sum(),
        Subsystem::Second => (0..2).map(|k| m.get(2 * i + k, 2 * j + k)).sum(),
    })
}

/// `Tr(ρ²)`
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.mat.trace_product_re(&rho.mat)
}

/// Random state `G G† / Tr(G G†)` with `G` a 4×`rank` complex Ginibre matrix.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, rank: usize) -> DensityMatrix {
    let rank = rank.clamp(1, 4);
    let g: Vec<Complex64> =
        (0..4 * rank).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let m = CMatrix::from_fn(4, |i, j| (0..rank).map(|k| g[i * rank + k] * g[j * rank + k].conj()).sum());
    DensityMatrix::normalize(m).expect("Ginibre products are PSD")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_state_entries() {
        let rho = bell_phi_plus();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if [0, 3].contains(&i) && [0, 3].contains(&j) { 0.5 } else { 0.0 };
                assert!((rho.get(i, j) - Complex64::from(expect)).norm() < 1e-15);
            }
        }
        assert!((purity(&rho) - 1.0).abs() < 1e-12);
        assert!((fidelity(&rho, &rho) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn werner_limits() {
        assert!(werner(1.0).unwrap().matrix().max_abs_diff(bell_phi_plus().matrix()) < 1e-15);
        assert!(werner(0.0).unwrap().matrix().max_abs_diff(maximally_mixed().matrix()) < 1e-15);
        assert!((purity(&werner(0.0).unwrap()) - 0.25).abs() < 1e-15);
        assert!(matches!(werner(1.2), Err(Error::Domain(_))));
        assert!(matches!(werner(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn tensor_and_partial_trace() {
        let i2 = CMatrix::identity(2);
        assert_eq!(tensor(&i2, &i2), CMatrix::identity(4));
        let half = CMatrix::identity(2).scale_real(0.5);
        for s in [Subsystem::First, Subsystem::Second] {
            assert!(partial_trace(&bell_phi_plus(), s).max_abs_diff(&half) < 1e-15);
        }
        // product state H ⊗ plus
        let prod = DensityMatrix::pure(&Ket::h().tensor(&Ket::plus())).unwrap();
        assert!(partial_trace(&prod, Subsystem::First).max_abs_diff(&Ket::plus().projector()) < 1e-15);
        assert!(partial_trace(&prod, Subsystem::Second).max_abs_diff(&Ket::h().projector()) < 1e-15);
    }

    #[test]
    fn constructor_rejects_bad_matrices() {
        assert!(CMatrix::from_entries(2, vec![ONE; 3]).is_err());
        assert!(CMatrix::from_entries(2, vec![ONE, ZERO, ZERO, Complex64::new(f64::NAN, 0.0)]).is_err());
        let not_unit = CMatrix::identity(4);
        assert!(DensityMatrix::new(not_unit).is_err());
        let negative = CMatrix::diagonal(&[1.2, -0.2, 0.0, 0.0]);
        assert!(DensityMatrix::new(negative).is_err());
        let mut skew = CMatrix::identity(4).scale_real(0.25);
        skew.set(0, 1, Complex64::new(0.0, 0.1));
        assert!(DensityMatrix::new(skew).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(2).scale_real(0.5)).is_err());
    }

    #[test]
    fn fidelity_rejects_non_psd() {
        let bad = CMatrix::diagonal(&[1.1, -0.1, 0.0, 0.0]);
        let good = maximally_mixed().matrix().clone();
        assert!(matches!(uhlmann_fidelity(&bad, &good), Err(Error::Domain(_))));
        assert!(matches!(uhlmann_fidelity(&good, &bad), Err(Error::Domain(_))));
        assert!(uhlmann_fidelity(&good, &CMatrix::identity(2)).is_err());
    }

    #[test]
    fn basis_kets_are_normalized() {
        for k in [Ket::h(), Ket::v(), Ket::plus(), Ket::minus(), Ket::r(), Ket::l(), Ket::linear(0.3)] {
            assert!(Ket::new(k.amps().to_vec()).is_ok());
        }
        assert!(Ket::new(vec![ONE, ONE]).is_err());
    }

    #[test]
    fn json_wire_format() {
        let json = serde_json::to_value(bell_phi_plus()).unwrap();
        assert_eq!(json["dim"], 4);
        assert_eq!(json["re"].as_array().unwrap().len(), 16);
        assert!((json["re"][3].as_f64().unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(json["im"][5], 0.0);
        let back: DensityMatrix = serde_json::from_value(json).unwrap();
        assert_eq!(back.matrix().max_abs_diff(bell_phi_plus().matrix()), 0.0);
        let bad = serde_json::json!({"dim": 4, "re": vec![1.0; 16], "im": vec![0.0; 16]});
        assert!(serde_json::from_value::<DensityMatrix>(bad).is_err());
    }
}
