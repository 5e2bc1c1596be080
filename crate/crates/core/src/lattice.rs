//! Spinor sections on a product grid and matrix-free operators acting on them.
//!
//! A section of rank `r` is a flat `Vec<Complex64>` of length `npts * r`,
//! components interleaved per point. Inner products carry the geometry's
//! weight and the grid cell volume.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::clifford::Mat;
use crate::error::{Error, Result};
use crate::geometry::{compute_tensors, Field, FrameGeometry, GeometricTensors, PointField};

pub type C = Complex64;
pub const ZERO: C = C::new(0.0, 0.0);

pub type MatField = PointField<Mat>;

#[derive(Debug)]
pub struct SectionLattice {
    pub geometry: Arc<FrameGeometry>,
    pub tensors: Arc<GeometricTensors>,
    pub rank: usize,
    measure: Vec<f64>,
    sqrt_w: Option<Vec<f64>>,
}

impl SectionLattice {
    pub fn new(geometry: Arc<FrameGeometry>, rank: usize) -> Arc<Self> {
        let tensors = Arc::new(compute_tensors(&geometry));
        Self::with_tensors(geometry, tensors, rank)
    }

    pub fn with_tensors(geometry: Arc<FrameGeometry>, tensors: Arc<GeometricTensors>, rank: usize) -> Arc<Self> {
        let h = geometry.grid.cell_volume();
        let n = geometry.grid.len();
        let measure = (0..n).map(|p| geometry.weight.at(p) * h).collect();
        let sqrt_w = match &geometry.weight {
            Field::Const(_) => None,
            Field::Sampled(w) => Some(w.iter().map(|x| x.sqrt()).collect()),
        };
        Arc::new(SectionLattice {
            geometry,
            tensors,
            rank,
            measure,
            sqrt_w,
        })
    }

    /// Same grid and geometry, different spinor rank.
    pub fn with_rank(&self, rank: usize) -> Arc<Self> {
        Arc::new(SectionLattice {
            geometry: self.geometry.clone(),
            tensors: self.tensors.clone(),
            rank,
            measure: self.measure.clone(),
            sqrt_w: self.sqrt_w.clone(),
        })
    }

    pub fn npts(&self) -> usize {
        self.measure.len()
    }

    pub fn len(&self) -> usize {
        self.npts() * self.rank
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn measure(&self, p: usize) -> f64 {
        self.measure[p]
    }

    pub fn zeros(&self) -> Vec<C> {
        vec![ZERO; self.len()]
    }

    /// `⟨a, b⟩ = Σ_x w(x) a(x)† b(x) Π h`, summed in point order.
    pub fn inner(&self, a: &[C], b: &[C]) -> C {
        let r = self.rank;
        let mut acc = ZERO;
        for (p, m) in self.measure.iter().enumerate() {
            let mut s = ZERO;
            for c in 0..r {
                s += a[p * r + c].conj() * b[p * r + c];
            }
            acc += s * *m;
        }
        acc
    }

    pub fn norm(&self, a: &[C]) -> f64 {
        self.inner(a, a).re.max(0.0).sqrt()
    }

    pub fn check_len(&self, a: &[C]) -> Result<()> {
        if a.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: a.len(),
            });
        }
        Ok(())
    }

    /// Pointwise `Σ_c |a_c|²`.
    pub fn pointwise_norm_sq(&self, a: &[C]) -> Vec<f64> {
        a.chunks(self.rank).map(|v| v.iter().map(|z| z.norm_sqr()).sum()).collect()
    }

    /// Skew-adjoint lattice version of `e_a + ½ div(e_a)`:
    /// `w^{-1/2} · ½ Σ_μ (a^μ ∂_μ + ∂_μ a^μ) · w^{1/2}`.
    pub fn skew_derivative(&self, a: usize, u: &[C]) -> Vec<C> {
        let g = &self.geometry;
        let r = self.rank;
        let v: Vec<C> = match &self.sqrt_w {
            None => u.to_vec(),
            Some(s) => u.par_iter().enumerate().map(|(i, z)| z * s[i / r]).collect(),
        };
        let mut acc = vec![ZERO; u.len()];
        let mut tmp = vec![ZERO; u.len()];
        for (axis, coeff) in &g.frames[a].components {
            match coeff {
                Field::Const(c) => {
                    g.grid.derivative(*axis, &v, r, &mut tmp);
                    acc.par_iter_mut().zip(&tmp).for_each(|(o, d)| *o += d * c);
                }
                Field::Sampled(f) => {
                    g.grid.derivative(*axis, &v, r, &mut tmp);
                    acc.par_iter_mut()
                        .zip(&tmp)
                        .enumerate()
                        .for_each(|(i, (o, d))| *o += d * (0.5 * f[i / r]));
                    let fv: Vec<C> = v.par_iter().enumerate().map(|(i, z)| z * f[i / r]).collect();
                    g.grid.derivative(*axis, &fv, r, &mut tmp);
                    acc.par_iter_mut().zip(&tmp).for_each(|(o, d)| *o += d * 0.5);
                }
            }
        }
        if let Some(s) = &self.sqrt_w {
            acc.par_iter_mut().enumerate().for_each(|(i, z)| *z /= s[i / r]);
        }
        acc
    }

    /// Exact `e_a + ½ div(e_a)` applied to a smooth section given by its
    /// values and coordinate gradients (`grad[axis][p * r + c]`).
    pub fn smooth_derivative(&self, a: usize, value: &[C], grad: &[Vec<C>]) -> Vec<C> {
        let g = &self.geometry;
        let r = self.rank;
        (0..value.len())
            .into_par_iter()
            .map(|i| {
                let p = i / r;
                let mut s = value[i] * (0.5 * self.tensors.points.at(p).divergence[a]);
                for (axis, coeff) in &g.frames[a].components {
                    s += grad[*axis][i] * coeff.at(p);
                }
                s
            })
            .collect()
    }

    /// Fiber integral of a pointwise function, one value per base point.
    pub fn fiber_integrate(&self, f: &[f64]) -> Vec<f64> {
        let nf = self.geometry.fiber_len();
        let hb = self.geometry.base_cell();
        f.chunks(nf)
            .enumerate()
            .map(|(b, chunk)| {
                chunk
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x * self.measure[b * nf + i] / hb)
                    .sum()
            })
            .collect()
    }

    /// Restriction to the fiber over base point `b`.
    pub fn restrict_to_fiber(&self, b: usize, u: &[C]) -> Result<Vec<C>> {
        let nb = self.geometry.base_len();
        if b >= nb {
            return Err(Error::InvalidIndex { index: b, limit: nb });
        }
        let len = self.geometry.fiber_len() * self.rank;
        Ok(u[b * len..(b + 1) * len].to_vec())
    }

    /// Fiber inner product at base point `b`, matching `fiber_integrate` of `u†v`.
    pub fn fiber_inner(&self, b: usize, u: &[C], v: &[C]) -> C {
        let nf = self.geometry.fiber_len();
        let hb = self.geometry.base_cell();
        let r = self.rank;
        let mut acc = ZERO;
        for i in 0..nf {
            let mut s = ZERO;
            for c in 0..r {
                s += u[i * r + c].conj() * v[i * r + c];
            }
            acc += s * (self.measure[b * nf + i] / hb);
        }
        acc
    }

    /// Little-endian dump: `u32` axis count, `u32` per-axis sizes, `u32`
    /// rank, then `(re, im)` `f64` pairs in row-major grid order.
    pub fn write_section(&self, u: &[C], mut w: impl Write) -> Result<()> {
        self.check_len(u)?;
        let axes = &self.geometry.grid.axes;
        w.write_all(&(axes.len() as u32).to_le_bytes())?;
        for a in axes {
            w.write_all(&(a.n as u32).to_le_bytes())?;
        }
        w.write_all(&(self.rank as u32).to_le_bytes())?;
        for z in u {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_section(&self, bytes: &[u8]) -> Result<Vec<C>> {
        let mut words = bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap()));
        let bad = |m: &str| Error::Precondition(format!("section file: {m}"));
        let naxes = words.next().ok_or_else(|| bad("empty"))? as usize;
        let axes = &self.geometry.grid.axes;
        if naxes != axes.len() {
            return Err(bad("axis count differs"));
        }
        for a in axes {
            if words.next() != Some(a.n as u32) {
                return Err(bad("grid size differs"));
            }
        }
        if words.next() != Some(self.rank as u32) {
            return Err(bad("rank differs"));
        }
        let header = 4 * (naxes + 2);
        let body = &bytes[header..];
        if body.len() != self.len() * 16 {
            return Err(Error::LengthMismatch {
                expected: self.len() * 16,
                got: body.len(),
            });
        }
        Ok(body
            .chunks_exact(16)
            .map(|c| {
                C::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect())
    }
}

/// `out[p] (+)= M(p) u[p]` for a pointwise matrix field.
pub fn apply_field(field: &MatField, u: &[C], rin: usize, out: &mut [C], accumulate: bool) {
    let rout = match field {
        PointField::Uniform(m) => m.nrows(),
        PointField::PerPoint(v) => v.first().map_or(0, |m| m.nrows()),
    };
    out.par_chunks_mut(rout).enumerate().for_each(|(p, o)| {
        let m = field.at(p);
        let x = &u[p * rin..(p + 1) * rin];
        for (i, oi) in o.iter_mut().enumerate() {
            let mut s = ZERO;
            for (j, xj) in x.iter().enumerate() {
                s += m[(i, j)] * xj;
            }
            if accumulate {
                *oi += s;
            } else {
                *oi = s;
            }
        }
    });
}

pub fn adjoint_field(field: &MatField) -> MatField {
    field.map(|m| m.adjoint())
}

pub fn add_fields(a: &MatField, b: &MatField, npts: usize) -> MatField {
    match (a, b) {
        (PointField::Uniform(x), PointField::Uniform(y)) => PointField::Uniform(x + y),
        _ => PointField::PerPoint((0..npts).map(|p| a.at(p) + b.at(p)).collect()),
    }
}

pub trait DiscreteOperator: Send + Sync {
    fn domain(&self) -> &Arc<SectionLattice>;
    fn codomain(&self) -> &Arc<SectionLattice>;
    fn apply(&self, u: &[C]) -> Vec<C>;
    /// Adjoint with respect to the weighted inner products of domain and codomain.
    fn adjoint(&self, v: &[C]) -> Vec<C>;
}

pub type OpRef = Arc<dyn DiscreteOperator>;

/// `Σ_a M_a L_a + Z` with `L_a` the skew frame derivative.
pub struct FirstOrderOperator {
    pub lattice: Arc<SectionLattice>,
    pub terms: Vec<(usize, MatField)>,
    pub zero: Option<MatField>,
}

impl FirstOrderOperator {
    /// Exact continuum action on a smooth section, used as a reference for
    /// consistency and convergence checks.
    pub fn apply_smooth(&self, value: &[C], grad: &[Vec<C>]) -> Vec<C> {
        let r = self.lattice.rank;
        let mut out = vec![ZERO; value.len()];
        for (a, m) in &self.terms {
            let d = self.lattice.smooth_derivative(*a, value, grad);
            apply_field(m, &d, r, &mut out, true);
        }
        if let Some(z) = &self.zero {
            apply_field(z, value, r, &mut out, true);
        }
        out
    }
}

impl DiscreteOperator for FirstOrderOperator {
    fn domain(&self) -> &Arc<SectionLattice> {
        &self.lattice
    }

    fn codomain(&self) -> &Arc<SectionLattice> {
        &self.lattice
    }

    fn apply(&self, u: &[C]) -> Vec<C> {
        let r = self.lattice.rank;
        let mut out = vec![ZERO; u.len()];
        for (a, m) in &self.terms {
            let d = self.lattice.skew_derivative(*a, u);
            apply_field(m, &d, r, &mut out, true);
        }
        if let Some(z) = &self.zero {
            apply_field(z, u, r, &mut out, true);
        }
        out
    }

    fn adjoint(&self, v: &[C]) -> Vec<C> {
        let r = self.lattice.rank;
        let mut out = vec![ZERO; v.len()];
        let mut tmp = vec![ZERO; v.len()];
        for (a, m) in &self.terms {
            apply_field(&adjoint_field(m), v, r, &mut tmp, false);
            let d = self.lattice.skew_derivative(*a, &tmp);
            out.par_iter_mut().zip(&d).for_each(|(o, x)| *o -= x);
        }
        if let Some(z) = &self.zero {
            apply_field(&adjoint_field(z), v, r, &mut out, true);
        }
        out
    }
}

/// Pointwise endomorphism field.
pub struct Pointwise {
    pub lattice: Arc<SectionLattice>,
    pub field: MatField,
}

impl DiscreteOperator for Pointwise {
    fn domain(&self) -> &Arc<SectionLattice> {
        &self.lattice
    }

    fn codomain(&self) -> &Arc<SectionLattice> {
        &self.lattice
    }

    fn apply(&self, u: &[C]) -> Vec<C> {
        let mut out = vec![ZERO; u.len()];
        apply_field(&self.field, u, self.lattice.rank, &mut out, false);
        out
    }

    fn adjoint(&self, v: &[C]) -> Vec<C> {
        let mut out = vec![ZERO; v.len()];
        apply_field(&adjoint_field(&self.field), v, self.lattice.rank, &mut out, false);
        out
    }
}

/// Linear combination `Σ s_i A_i` of operators with common domain and codomain.
pub struct Sum {
    pub parts: Vec<(C, OpRef)>,
}

impl DiscreteOperator for Sum {
    fn domain(&self) -> &Arc<SectionLattice> {
        self.parts[0].1.domain()
    }

    fn codomain(&self) -> &Arc<SectionLattice> {
        self.parts[0].1.codomain()
    }

    fn apply(&self, u: &[C]) -> Vec<C> {
        let mut out = vec![ZERO; self.codomain().len()];
        for (s, op) in &self.parts {
            let y = op.apply(u);
            out.par_iter_mut().zip(&y).for_each(|(o, x)| *o += x * s);
        }
        out
    }

    fn adjoint(&self, v: &[C]) -> Vec<C> {
        let mut out = vec![ZERO; self.domain().len()];
        for (s, op) in &self.parts {
            let y = op.adjoint(v);
            let sc = s.conj();
            out.par_iter_mut().zip(&y).for_each(|(o, x)| *o += x * sc);
        }
        out
    }
}

/// `outer ∘ inner`.
pub struct Compose {
    pub outer: OpRef,
    pub inner: OpRef,
}

impl DiscreteOperator for Compose {
    fn domain(&self) -> &Arc<SectionLattice> {
        self.inner.domain()
    }

    fn codomain(&self) -> &Arc<SectionLattice> {
        self.outer.codomain()
    }

    fn apply(&self, u: &[C]) -> Vec<C> {
        self.outer.apply(&self.inner.apply(u))
    }

    fn adjoint(&self, v: &[C]) -> Vec<C> {
        self.inner.adjoint(&self.outer.adjoint(v))
    }
}

pub fn sum(parts: Vec<(f64, OpRef)>) -> OpRef {
    Arc::new(Sum {
        parts: parts.into_iter().map(|(s, op)| (C::new(s, 0.0), op)).collect(),
    })
}

pub fn compose(outer: OpRef, inner: OpRef) -> OpRef {
    Arc::new(Compose { outer, inner })
}

pub fn commutator(a: OpRef, b: OpRef) -> OpRef {
    sum(vec![(1.0, compose(a.clone(), b.clone())), (-1.0, compose(b, a))])
}

pub fn anticommutator(a: OpRef, b: OpRef) -> OpRef {
    sum(vec![(1.0, compose(a.clone(), b.clone())), (1.0, compose(b, a))])
}

pub fn pointwise(lattice: &Arc<SectionLattice>, field: MatField) -> OpRef {
    Arc::new(Pointwise {
        lattice: lattice.clone(),
        field,
    })
}

/// `r ↦ Σ_k ξ_k ⊗ (B_k r)`: base sections to total sections, with `ξ_k`
/// vertical spinor fields on the total space and `B_k` constant base
/// endomorphisms. With a single term and `B = 1` this is the lift `ξ ⊗ r`;
/// the adjoint contracts the vertical index and integrates over fibers.
pub struct FiberMultiplier {
    pub base: Arc<SectionLattice>,
    pub total: Arc<SectionLattice>,
    pub fiber_rank: usize,
    pub terms: Vec<(Vec<C>, Mat)>,
}

pub fn fiber_lift(base: &Arc<SectionLattice>, total: &Arc<SectionLattice>, xi: Vec<C>, fiber_rank: usize) -> FiberMultiplier {
    FiberMultiplier {
        base: base.clone(),
        total: total.clone(),
        fiber_rank,
        terms: vec![(xi, crate::clifford::identity(base.rank))],
    }
}

impl DiscreteOperator for FiberMultiplier {
    fn domain(&self) -> &Arc<SectionLattice> {
        &self.base
    }

    fn codomain(&self) -> &Arc<SectionLattice> {
        &self.total
    }

    fn apply(&self, r: &[C]) -> Vec<C> {
        let (rf, rb) = (self.fiber_rank, self.base.rank);
        let nf = self.total.geometry.fiber_len();
        let mut out = vec![ZERO; self.total.len()];
        out.par_chunks_mut(rf * rb).enumerate().for_each(|(p, o)| {
            let b = p / nf;
            let rv = &r[b * rb..(b + 1) * rb];
            for (xi, m) in &self.terms {
                for j in 0..rb {
                    let mut br = ZERO;
                    for (l, x) in rv.iter().enumerate() {
                        br += m[(j, l)] * x;
                    }
                    for i in 0..rf {
                        o[i * rb + j] += xi[p * rf + i] * br;
                    }
                }
            }
        });
        out
    }

    fn adjoint(&self, v: &[C]) -> Vec<C> {
        let (rf, rb) = (self.fiber_rank, self.base.rank);
        let nf = self.total.geometry.fiber_len();
        let nb = self.base.npts();
        let mut out = vec![ZERO; nb * rb];
        out.par_chunks_mut(rb).enumerate().for_each(|(b, o)| {
            let mb = self.base.measure(b);
            for (xi, m) in &self.terms {
                let mut acc = vec![ZERO; rb];
                for f in 0..nf {
                    let p = b * nf + f;
                    let w = self.total.measure(p) / mb;
                    for i in 0..rf {
                        let x = xi[p * rf + i].conj() * w;
                        for j in 0..rb {
                            acc[j] += x * v[p * rf * rb + i * rb + j];
                        }
                    }
                }
                for (l, ol) in o.iter_mut().enumerate() {
                    for (j, a) in acc.iter().enumerate() {
                        *ol += m[(j, l)].conj() * a;
                    }
                }
            }
        });
        out
    }
}

/// Matrix of `op` in orthonormal bases of the weighted domain and codomain
/// inner products, so symmetric operators export as Hermitian matrices.
pub fn dense_export(op: &dyn DiscreteOperator, threshold: usize) -> Result<Mat> {
    let (dom, cod) = (op.domain(), op.codomain());
    let (n, m) = (dom.len(), cod.len());
    if n.max(m) > threshold {
        return Err(Error::DenseThreshold {
            dim: n.max(m),
            threshold,
        });
    }
    let cols: Vec<Vec<C>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![ZERO; n];
            e[j] = C::new(1.0 / dom.measure(j / dom.rank).sqrt(), 0.0);
            op.apply(&e)
        })
        .collect();
    let mut out = Mat::zeros(m, n);
    for (j, col) in cols.iter().enumerate() {
        for i in 0..m {
            out[(i, j)] = col[i] * cod.measure(i / cod.rank).sqrt();
        }
    }
    Ok(out)
}

/// Compression `V† W A V` of `op` onto the span of columns `basis`, each
/// given as a section; `W` is the lattice measure.
pub fn compress(op: &dyn DiscreteOperator, basis: &[Vec<C>]) -> Mat {
    let lat = op.codomain();
    let images: Vec<Vec<C>> = basis.par_iter().map(|v| op.apply(v)).collect();
    let k = basis.len();
    let mut out = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            out[(i, j)] = lat.inner(&basis[i], &images[j]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{model_geometry, ModelName};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn skew_derivative_is_skew_on_all_models() {
        for (m, n) in [(ModelName::Torus4, 6), (ModelName::KodairaThurston, 6), (ModelName::PuncturedSphere, 16)] {
            let g = Arc::new(model_geometry(m, &[n]).unwrap());
            let lat = SectionLattice::new(g.clone(), 2);
            let (u, v) = (random(lat.len(), 1), random(lat.len(), 2));
            for a in 0..g.dim_total {
                let lhs = lat.inner(&lat.skew_derivative(a, &u), &v);
                let rhs = lat.inner(&u, &lat.skew_derivative(a, &v));
                assert!((lhs + rhs).norm() < 1e-11 * lat.norm(&u) * lat.norm(&v) * n as f64, "{m} {a}");
            }
        }
    }

    #[test]
    fn first_order_adjoint_consistency() {
        let g = Arc::new(model_geometry(ModelName::PuncturedSphere, &[12, 8]).unwrap());
        let lat = SectionLattice::new(g.clone(), 2);
        let m0 = Mat::from_fn(2, 2, |i, j| C::new((i + 2 * j) as f64, i as f64 - 0.5));
        let per = (0..lat.npts()).map(|p| &m0 * C::new(1.0 + p as f64 * 0.01, 0.0)).collect();
        let op = FirstOrderOperator {
            lattice: lat.clone(),
            terms: vec![(0, PointField::PerPoint(per)), (1, PointField::Uniform(m0.clone()))],
            zero: Some(PointField::Uniform(m0.transpose())),
        };
        let (u, v) = (random(lat.len(), 3), random(lat.len(), 4));
        let lhs = lat.inner(&op.apply(&u), &v);
        let rhs = lat.inner(&u, &op.adjoint(&v));
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn sphere_fiber_integral_of_one() {
        let g = Arc::new(model_geometry(ModelName::PuncturedSphere, &[16]).unwrap());
        let lat = SectionLattice::new(g.clone(), 1);
        let rho = lat.fiber_integrate(&vec![1.0; lat.npts()]);
        for (b, val) in rho.iter().enumerate() {
            let th = g.grid.axes[0].coord(b);
            assert!((val - 2.0 * std::f64::consts::PI * th.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn fiber_lift_adjoint() {
        let g = Arc::new(model_geometry(ModelName::PuncturedSphere, &[8]).unwrap());
        let total = SectionLattice::new(g.clone(), 2);
        let base = SectionLattice::new(Arc::new((**g.base_geometry.as_ref().unwrap()).clone()), 1);
        let mut lift = fiber_lift(&base, &total, random(total.len(), 5), 2);
        lift.terms.push((random(total.len(), 9), Mat::from_element(1, 1, C::new(0.3, -1.2))));
        let (r, v) = (random(base.len(), 6), random(total.len(), 7));
        let lhs = total.inner(&lift.apply(&r), &v);
        let rhs = base.inner(&r, &lift.adjoint(&v));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn section_binary_roundtrip() {
        let g = Arc::new(model_geometry(ModelName::Torus4, &[4]).unwrap());
        let lat = SectionLattice::new(g, 4);
        let u = random(lat.len(), 8);
        let mut buf = Vec::new();
        lat.write_section(&u, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 * 6 + 16 * lat.len());
        assert_eq!(&buf[..8], &[4, 0, 0, 0, 4, 0, 0, 0]);
        assert_eq!(lat.read_section(&buf).unwrap(), u);
        assert!(lat.read_section(&buf[..buf.len() - 16]).is_err());
    }
}
