//! Eigenvalues of symmetric lattice operators: dense Hermitian
//! decomposition, Lanczos for the smallest magnitudes, power iteration for
//! norms, and the bounded transform.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clifford::{max_abs, Mat};
use crate::error::{Error, Result};
use crate::lattice::{dense_export, DiscreteOperator, SectionLattice, C, ZERO};

pub const LANCZOS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Iterative,
    Dense,
}

pub struct DenseSpectrum {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the same order.
    pub vectors: Mat,
}

pub fn hermitian_defect(m: &Mat) -> f64 {
    max_abs(&(m - m.adjoint())) / max_abs(m).max(1.0)
}

/// Dense eigendecomposition of a Hermitian matrix.
pub fn dense_eigen(m: &Mat) -> Result<DenseSpectrum> {
    let d = hermitian_defect(m);
    if d > 1e-8 {
        return Err(Error::NotSymmetric(d));
    }
    let herm = (m + m.adjoint()) * C::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Mat::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(DenseSpectrum { values, vectors })
}

/// Eigenvalues of a Hermitian matrix only, ascending.
pub fn eigenvalues(m: &Mat) -> Result<Vec<f64>> {
    let d = hermitian_defect(m);
    if d > 1e-8 {
        return Err(Error::NotSymmetric(d));
    }
    let herm = (m + m.adjoint()) * C::new(0.5, 0.0);
    let mut v: Vec<f64> = herm.symmetric_eigenvalues().iter().cloned().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `F_D = D (1 + D²)^{-1/2}` by functional calculus.
pub fn bounded_transform(s: &DenseSpectrum) -> Mat {
    let f: Vec<C> = s.values.iter().map(|&l| C::new(l / (1.0 + l * l).sqrt(), 0.0)).collect();
    let scaled = Mat::from_fn(s.vectors.nrows(), s.vectors.ncols(), |r, c| s.vectors[(r, c)] * f[c]);
    scaled * s.vectors.adjoint()
}

pub fn spectral_norm(m: &Mat) -> f64 {
    m.clone().singular_values().max()
}

/// Result of an iterative eigen-solve.
#[derive(Debug, Clone)]
pub struct IterativeSpectrum {
    /// The `k` eigenvalues of smallest magnitude, ascending.
    pub values: Vec<f64>,
    pub krylov_dim: usize,
    pub max_residual: f64,
}

/// Smallest-magnitude eigenvalues of a symmetric operator. Lanczos with
/// full reorthogonalization on `D²` finds one converged low eigenvector per
/// run; it is locked and the next run works in the orthogonal complement, so
/// multiplicities are resolved. Rayleigh-Ritz of `D` on the locked space
/// recovers the signs.
pub fn lanczos_smallest(op: &dyn DiscreteOperator, k: usize, seed: u64) -> Result<IterativeSpectrum> {
    let lat = op.domain().clone();
    let n = lat.len();
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut locked: Vec<(f64, Vec<C>)> = Vec::new();
    let (mut krylov_dim, mut max_residual) = (0, 0.0f64);
    while locked.len() < n {
        let locked_vecs: Vec<&Vec<C>> = locked.iter().map(|(_, v)| v).collect();
        let (theta, v, m, res) = lowest_pair(op, &lat, &locked_vecs, &mut rng)?;
        krylov_dim = krylov_dim.max(m);
        if locked.len() >= k {
            let kth = locked[k - 1].0;
            if theta > kth + LANCZOS_TOL * kth.abs().max(1.0) || locked.len() >= k + 8 {
                break;
            }
        }
        max_residual = max_residual.max(res);
        locked.push((theta, v));
        locked.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let images: Vec<Vec<C>> = locked.iter().map(|(_, v)| op.apply(v)).collect();
    let t = locked.len();
    let proj = Mat::from_fn(t, t, |i, j| lat.inner(&locked[i].1, &images[j]));
    let mut vals = eigenvalues(&((&proj + proj.adjoint()) * C::new(0.5, 0.0)))?;
    vals.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    vals.truncate(k);
    vals.sort_by(f64::total_cmp);
    Ok(IterativeSpectrum {
        values: vals,
        krylov_dim,
        max_residual,
    })
}

/// Lowest eigenpair of `D²` on the complement of `locked`.
fn lowest_pair(
    op: &dyn DiscreteOperator,
    lat: &SectionLattice,
    locked: &[&Vec<C>],
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<C>, usize, f64)> {
    let n = lat.len();
    let free = n - locked.len();
    let kmax = free.min(600);
    let orth = |w: &mut Vec<C>, basis: &[Vec<C>]| {
        for _ in 0..2 {
            for b in locked.iter().map(|v| v.as_slice()).chain(basis.iter().map(|v| v.as_slice())) {
                let c = lat.inner(b, w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= bi * c;
                }
            }
        }
    };
    let mut q: Vec<C> = (0..n).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    orth(&mut q, &[]);
    normalize(lat, &mut q);
    let mut basis: Vec<Vec<C>> = vec![q];
    let (mut alpha, mut beta) = (Vec::<f64>::new(), Vec::<f64>::new());
    loop {
        let j = basis.len() - 1;
        let mut w = op.apply(&op.apply(&basis[j]));
        alpha.push(lat.inner(&basis[j], &w).re);
        orth(&mut w, &basis);
        let bnorm = lat.norm(&w);
        let m = basis.len();
        let (theta, s) = tridiagonal_eigen(&alpha, &beta);
        let res = (bnorm * s[(m - 1, 0)]).abs() / theta[0].abs().max(1.0);
        if res < LANCZOS_TOL || bnorm < 1e-12 || m >= free {
            let mut v = vec![ZERO; n];
            for (j, b) in basis.iter().enumerate() {
                let c = s[(j, 0)];
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi += bi * c;
                }
            }
            normalize(lat, &mut v);
            return Ok((theta[0], v, m, res));
        }
        if m >= kmax {
            return Err(Error::NoConvergence(format!("lanczos: residual {res:e} after {m} vectors")));
        }
        beta.push(bnorm);
        for wi in w.iter_mut() {
            *wi /= bnorm;
        }
        basis.push(w);
    }
}

fn normalize(lat: &SectionLattice, v: &mut [C]) -> f64 {
    let n = lat.norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Eigenvalues of the `k` smallest magnitudes, by either method.
pub fn spectral_tools(
    op: &dyn DiscreteOperator,
    k: usize,
    mode: Mode,
    dense_threshold: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    match mode {
        Mode::Iterative => Ok(lanczos_smallest(op, k, seed)?.values),
        Mode::Dense => {
            let m = dense_export(op, dense_threshold)?;
            let mut v = eigenvalues(&m)?;
            v.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
            v.truncate(k);
            v.sort_by(f64::total_cmp);
            Ok(v)
        }
    }
}

/// Power iteration for `sup ‖A P x‖ / ‖P x‖`, `P` an orthogonal projector
/// given as a closure. Returns the estimate and the iteration count.
pub fn power_norm(
    domain: &SectionLattice,
    apply: impl Fn(&[C]) -> Vec<C>,
    apply_adjoint: impl Fn(&[C]) -> Vec<C>,
    project: impl Fn(&mut [C]),
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<C> = (0..domain.len())
        .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    project(&mut x);
    if normalize(domain, &mut x) == 0.0 {
        return (0.0, 0);
    }
    let mut est = 0.0;
    for it in 1..=max_iter {
        let mut y = apply_adjoint(&apply(&x));
        project(&mut y);
        let lambda = domain.inner(&x, &y).re.max(0.0);
        let new = lambda.sqrt();
        if normalize(domain, &mut y) == 0.0 {
            return (0.0, it);
        }
        x = y;
        if (new - est).abs() <= tol * new.max(1e-300) {
            return (new, it);
        }
        est = new;
    }
    (est, max_iter)
}

/// Generalized Hermitian eigenproblem `A v = λ B v` with `B` positive
/// definite, by Cholesky reduction. Ascending eigenvalues.
pub fn generalized_eigenvalues(a: &Mat, b: &Mat) -> Result<Vec<f64>> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Precondition("right-hand form is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Precondition("singular Cholesky factor".into()))?;
    let reduced = &linv * a * linv.adjoint();
    eigenvalues(&((&reduced + reduced.adjoint()) * C::new(0.5, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{model_geometry, ModelName};
    use crate::operators::Setup;
    use nalgebra::DVector;

    #[test]
    fn dense_eigen_of_pauli() {
        let s = dense_eigen(&crate::clifford::pauli_y()).unwrap();
        assert!((s.values[0] + 1.0).abs() < 1e-14 && (s.values[1] - 1.0).abs() < 1e-14);
        let f = bounded_transform(&s);
        assert!((spectral_norm(&f) - 0.5f64.sqrt()).abs() < 1e-14);
        assert!(matches!(dense_eigen(&crate::clifford::scale(&crate::clifford::pauli_y(), C::new(0.0, 1.0))), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn lanczos_agrees_with_dense_on_torus_base() {
        let s = Setup::new(model_geometry(ModelName::Torus4, &[8]).unwrap()).unwrap();
        let db = s.dirac_base();
        let dense = spectral_tools(&db, 10, Mode::Dense, 20000, 1).unwrap();
        let iter = spectral_tools(&db, 10, Mode::Iterative, 20000, 1).unwrap();
        for (a, b) in dense.iter().zip(&iter) {
            assert!((a - b).abs() < 1e-8, "{dense:?} {iter:?}");
        }
    }

    #[test]
    fn generalized_identity() {
        let a = Mat::from_diagonal(&DVector::from_vec(vec![C::new(2.0, 0.0), C::new(6.0, 0.0)]));
        let b = Mat::from_diagonal(&DVector::from_vec(vec![C::new(1.0, 0.0), C::new(2.0, 0.0)]));
        let v = generalized_eigenvalues(&a, &b).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
    }
}
