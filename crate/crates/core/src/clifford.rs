//! Complex Clifford modules, gradings and the graded splitting of the total
//! spinor space into a vertical and a horizontal factor.
//!
//! Conventions used throughout the crate:
//!
//! * generators are skew-adjoint, `c(v)^2 = -|v|^2`;
//! * Dirac-type operators are `D = Σ_j c(e_j) ∇_{e_j}` (no factor `i`), which
//!   is symmetric because `c(e_j)` and `∇_{e_j}` are both skew and commute in
//!   the principal part;
//! * the gamma matrices are built recursively from Pauli matrices:
//!   `n = 2`: `c_1 = iσ₁`, `c_2 = iσ₂`, `γ = σ₃`, and
//!   `n → n + 2`: `c_k ↦ c_k ⊗ 1`, new generators `γ ⊗ iσ₁`, `γ ⊗ iσ₂`,
//!   grading `γ ⊗ σ₃`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub type Mat = DMatrix<Complex64>;

const MAX_DIM: usize = 8;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli_x() -> Mat {
    Mat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> Mat {
    Mat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> Mat {
    Mat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn scale(m: &Mat, s: Complex64) -> Mat {
    m.map(|z| z * s)
}

/// Largest absolute entry.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Irreducible complex representation of `Cl(n)` for even `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordModule {
    pub dim: usize,
    pub rank: usize,
    pub generators: Vec<Mat>,
    pub grading: Mat,
}

pub fn build_clifford_module(n: usize) -> Result<CliffordModule> {
    if n == 0 || n % 2 == 1 || n > MAX_DIM {
        return Err(Error::InvalidDimension(format!(
            "Clifford module dimension must be even and in 2..={MAX_DIM}, got {n}"
        )));
    }
    let i = c(0., 1.);
    let mut generators = vec![scale(&pauli_x(), i), scale(&pauli_y(), i)];
    let mut grading = pauli_z();
    let mut dim = 2;
    while dim < n {
        let rank = grading.nrows();
        let mut next: Vec<Mat> = generators
            .iter()
            .map(|g| g.kronecker(&identity(2)))
            .collect();
        next.push(grading.kronecker(&scale(&pauli_x(), i)));
        next.push(grading.kronecker(&scale(&pauli_y(), i)));
        grading = grading.kronecker(&pauli_z());
        generators = next;
        dim += 2;
        debug_assert_eq!(grading.nrows(), 2 * rank);
    }
    Ok(CliffordModule {
        dim,
        rank: grading.nrows(),
        generators,
        grading,
    })
}

impl CliffordModule {
    /// Largest deviation from `c_i c_j + c_j c_i = -2 δ_ij`.
    pub fn relation_defect(&self) -> f64 {
        relation_defect(&self.generators)
    }

    pub fn skew_defect(&self) -> f64 {
        self.generators
            .iter()
            .map(|g| max_abs(&(g.adjoint() + g)))
            .fold(0.0, f64::max)
    }

    /// Deviation of the grading from being a self-adjoint involution that
    /// anticommutes with every generator.
    pub fn grading_defect(&self) -> f64 {
        grading_defect(&self.grading, &self.generators)
    }
}

pub fn relation_defect(gens: &[Mat]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, ga) in gens.iter().enumerate() {
        for (b, gb) in gens.iter().enumerate() {
            let mut m = ga * gb + gb * ga;
            if a == b {
                m += identity(ga.nrows()) * c(2., 0.);
            }
            worst = worst.max(max_abs(&m));
        }
    }
    worst
}

pub fn grading_defect(grading: &Mat, gens: &[Mat]) -> f64 {
    let n = grading.nrows();
    let mut worst = max_abs(&(grading * grading - identity(n)));
    worst = worst.max(max_abs(&(grading.adjoint() - grading)));
    for g in gens {
        worst = worst.max(max_abs(&(grading * g + g * grading)));
    }
    worst
}

/// `c(v) = Σ v_i c_i`. On orthonormal frame components the musical
/// isomorphism is the identity, so a covector and its dual vector share
/// components.
pub fn clifford_action(module: &CliffordModule, covector: &[Complex64]) -> Result<Mat> {
    combine(&module.generators, covector)
}

pub fn combine(gens: &[Mat], coeffs: &[Complex64]) -> Result<Mat> {
    if gens.len() != coeffs.len() {
        return Err(Error::LengthMismatch {
            expected: gens.len(),
            got: coeffs.len(),
        });
    }
    let n = gens.first().map_or(0, |g| g.nrows());
    let mut out = Mat::zeros(n, n);
    for (g, v) in gens.iter().zip(coeffs) {
        out += g * *v;
    }
    Ok(out)
}

/// Concrete realization of `E_M ≅ E_V ⊗ E_H` on the total spinor space.
///
/// Even/even case (`dim_fiber`, `dim_base` even), with `F` the fiber module and
/// `B` the base module:
///
/// | operator               | matrix          |
/// |------------------------|-----------------|
/// | `c_V(e)`               | `c_F(e) ⊗ 1`    |
/// | `1 ⊗ c_B(f)`           | `1 ⊗ c_B(f)`    |
/// | `c_H(f)`               | `γ_F ⊗ c_B(f)`  |
/// | `γ_X ⊗ 1`              | `γ_F ⊗ 1`       |
/// | `γ`                    | `γ_F ⊗ γ_B`     |
/// | `Γ`                    | `(γ_X⊗1)(1+γ)/2 + (1-γ)/2` |
///
/// Circle fiber over an interval (`(1, 1)`): the vertical factor is doubled to
/// rank 2 so it can carry a grading, the base factor has rank 1:
///
/// | operator      | matrix |
/// |---------------|--------|
/// | `c_V(e)`      | `iσ₁`  |
/// | `1 ⊗ c_B(f)`  | `i`    |
/// | `c_H(f)`      | `iσ₃`  |
/// | `γ_X ⊗ 1`     | `σ₃`   |
/// | `γ`           | `σ₂`   |
/// | `Γ`           | `1`    |
///
/// The Dirac operator of the total space is assembled with the
/// `Γ`-conjugated generators `Γ c_V Γ`, `Γ c_H Γ` (`c_F ⊗ γ_B` and `1 ⊗ c_B`
/// in the even case), so that `Γ (D_V ×_∇ D_B) Γ` and `D_M` use the same
/// Clifford multiplication.
#[derive(Debug, Clone)]
pub struct SpinorFactorization {
    pub dim_fiber: usize,
    pub dim_base: usize,
    pub fiber_rank: usize,
    pub base_rank: usize,
    pub total_rank: usize,
    pub fiber_module: Option<CliffordModule>,
    pub base_module: Option<CliffordModule>,
    /// `c_V(e_j) = c_F(e_j) ⊗ 1`.
    pub vertical: Vec<Mat>,
    /// `1 ⊗ c_B(f_α)`.
    pub base_lift: Vec<Mat>,
    /// `c_H(f_α) = (γ_X ⊗ 1)(1 ⊗ c_B(f_α))`.
    pub horizontal: Vec<Mat>,
    pub vertical_grading: Mat,
    pub total_grading: Mat,
    pub big_gamma: Mat,
    /// `D_M` generators, vertical then horizontal.
    pub total_vertical: Vec<Mat>,
    pub total_horizontal: Vec<Mat>,
}

pub fn factorize_spinors(dim_fiber: usize, dim_base: usize) -> Result<SpinorFactorization> {
    if dim_fiber == 1 && dim_base == 1 {
        return Ok(circle_over_interval());
    }
    if dim_fiber % 2 == 1 || dim_base % 2 == 1 || dim_fiber == 0 || dim_base == 0 {
        return Err(Error::InvalidDimension(format!(
            "unsupported fiber/base dimensions ({dim_fiber}, {dim_base})"
        )));
    }
    if dim_fiber + dim_base > MAX_DIM {
        return Err(Error::InvalidDimension(format!(
            "total dimension {} exceeds {MAX_DIM}",
            dim_fiber + dim_base
        )));
    }
    let f = build_clifford_module(dim_fiber)?;
    let b = build_clifford_module(dim_base)?;
    let (rf, rb) = (f.rank, b.rank);
    let vertical: Vec<Mat> = f
        .generators
        .iter()
        .map(|g| g.kronecker(&identity(rb)))
        .collect();
    let base_lift: Vec<Mat> = b
        .generators
        .iter()
        .map(|g| identity(rf).kronecker(g))
        .collect();
    let vertical_grading = f.grading.kronecker(&identity(rb));
    let horizontal: Vec<Mat> = base_lift.iter().map(|m| &vertical_grading * m).collect();
    let total_grading = f.grading.kronecker(&b.grading);
    let n = rf * rb;
    let half = c(0.5, 0.);
    let plus = (identity(n) + &total_grading) * half;
    let minus = (identity(n) - &total_grading) * half;
    let big_gamma = &vertical_grading * plus + minus;
    let conj = |m: &Mat| &big_gamma * m * &big_gamma;
    let total_vertical = vertical.iter().map(conj).collect();
    let total_horizontal = horizontal.iter().map(conj).collect();
    Ok(SpinorFactorization {
        dim_fiber,
        dim_base,
        fiber_rank: rf,
        base_rank: rb,
        total_rank: n,
        fiber_module: Some(f),
        base_module: Some(b),
        vertical,
        base_lift,
        horizontal,
        vertical_grading,
        total_grading,
        big_gamma,
        total_vertical,
        total_horizontal,
    })
}

fn circle_over_interval() -> SpinorFactorization {
    let i = c(0., 1.);
    let vertical = vec![scale(&pauli_x(), i)];
    let base_lift = vec![scale(&identity(2), i)];
    let vertical_grading = pauli_z();
    let horizontal = vec![&vertical_grading * &base_lift[0]];
    SpinorFactorization {
        dim_fiber: 1,
        dim_base: 1,
        fiber_rank: 2,
        base_rank: 1,
        total_rank: 2,
        fiber_module: None,
        base_module: None,
        total_vertical: vertical.clone(),
        total_horizontal: horizontal.clone(),
        vertical,
        base_lift,
        horizontal,
        vertical_grading,
        total_grading: pauli_y(),
        big_gamma: identity(2),
    }
}

impl SpinorFactorization {
    /// Clifford generators of the base factor alone (rank `base_rank`).
    pub fn base_generators(&self) -> Vec<Mat> {
        match &self.base_module {
            Some(b) => b.generators.clone(),
            None => vec![scale(&identity(1), c(0., 1.))],
        }
    }

    /// All embedded generators `c_V(e_j)`, `c_H(f_α)` in the unconjugated picture.
    pub fn embedded(&self) -> Vec<Mat> {
        self.vertical
            .iter()
            .chain(self.horizontal.iter())
            .cloned()
            .collect()
    }

    pub fn total_generators(&self) -> Vec<Mat> {
        self.total_vertical
            .iter()
            .chain(self.total_horizontal.iter())
            .cloned()
            .collect()
    }

    /// Largest graded anticommutator `c_V(e) c_H(f) + c_H(f) c_V(e)`.
    pub fn cross_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for v in &self.vertical {
            for h in &self.horizontal {
                worst = worst.max(max_abs(&(v * h + h * v)));
            }
        }
        worst
    }
}

#[derive(Serialize)]
struct ExactModule {
    dim: usize,
    rank: usize,
    generators: Vec<Vec<Vec<[i64; 2]>>>,
    grading: Vec<Vec<[i64; 2]>>,
}

fn exact_entries(m: &Mat) -> Vec<Vec<[i64; 2]>> {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|col| {
                    let z = m[(r, col)];
                    [z.re.round() as i64, z.im.round() as i64]
                })
                .collect()
        })
        .collect()
}

impl Serialize for CliffordModule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ExactModule {
            dim: self.dim,
            rank: self.rank,
            generators: self.generators.iter().map(exact_entries).collect(),
            grading: exact_entries(&self.grading),
        }
        .serialize(s)
    }
}
