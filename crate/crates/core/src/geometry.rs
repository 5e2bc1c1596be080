//! Orthonormal-frame descriptions of model Riemannian submersions and the
//! tensors derived from their structure constants.
//!
//! A geometry is a product grid, a global orthonormal frame written in
//! coordinates (`e_a = Σ_μ a_a^μ ∂_μ`), the structure constants
//! `[e_i, e_j] = Σ_k C^k_{ij} e_k`, and the density `w` of the Riemannian
//! volume against coordinate volume. Base axes come first in the grid, so
//! the flat index of a point is `base_index * fiber_len + fiber_index`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clifford::{Mat, SpinorFactorization};
use crate::error::{Error, Result};
use crate::grid::{Axis, Gluing, Grid, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Torus4,
    KodairaThurston,
    PuncturedSphere,
}

impl ModelName {
    pub const ALL: [ModelName; 3] = [
        ModelName::Torus4,
        ModelName::KodairaThurston,
        ModelName::PuncturedSphere,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Torus4 => "torus4",
            ModelName::KodairaThurston => "kodaira_thurston",
            ModelName::PuncturedSphere => "punctured_sphere",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ModelName::Torus4 => "flat T^4 -> T^2, all structure constants zero",
            ModelName::KodairaThurston => {
                "nilmanifold T^2-bundle over T^2, [e1,e2] = e3, twisted x-gluing"
            }
            ModelName::PuncturedSphere => {
                "S^2 minus poles -> (0, pi), circle fibers, weight sin(theta)"
            }
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownGeometry(s.to_string()))
    }
}

/// Scalar field on the grid, constant-folded for homogeneous models.
#[derive(Debug, Clone)]
pub enum Field {
    Const(f64),
    Sampled(Arc<Vec<f64>>),
}

impl Field {
    pub fn at(&self, p: usize) -> f64 {
        match self {
            Field::Const(c) => *c,
            Field::Sampled(v) => v[p],
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Field::Const(_))
    }

    fn sample(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Field {
        Field::Sampled(Arc::new((0..grid.len()).map(|p| f(&grid.coords(p))).collect()))
    }
}

/// Frame vector in coordinates: `Σ (axis, coefficient) ∂_axis`.
#[derive(Debug, Clone)]
pub struct FrameVector {
    pub components: Vec<(usize, Field)>,
}

impl FrameVector {
    fn coordinate(axis: usize) -> Self {
        FrameVector {
            components: vec![(axis, Field::Const(1.0))],
        }
    }
}

/// Nonzero structure constants `C^k_{ij}`, stored for both orders of `(i, j)`.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    pub dim: usize,
    pub entries: Vec<(usize, usize, usize, Field)>,
}

impl StructureConstants {
    fn zero(dim: usize) -> Self {
        StructureConstants {
            dim,
            entries: Vec::new(),
        }
    }

    fn push_antisymmetric(&mut self, k: usize, i: usize, j: usize, value: Field) {
        let neg = match &value {
            Field::Const(c) => Field::Const(-c),
            Field::Sampled(v) => Field::Sampled(Arc::new(v.iter().map(|x| -x).collect())),
        };
        self.entries.push((k, i, j, value));
        self.entries.push((k, j, i, neg));
    }

    pub fn is_uniform(&self) -> bool {
        self.entries.iter().all(|e| e.3.is_const())
    }

    /// Dense `C[k][i][j]` at a grid point, flattened as `(k * d + i) * d + j`.
    pub fn at(&self, p: usize) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d * d];
        for (k, i, j, f) in &self.entries {
            out[(k * d + i) * d + j] += f.at(p);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FrameGeometry {
    pub name: String,
    pub model: Option<ModelName>,
    pub dim_total: usize,
    pub dim_base: usize,
    pub dim_fiber: usize,
    pub vertical_indices: Vec<usize>,
    pub horizontal_indices: Vec<usize>,
    pub grid: Grid,
    pub base_axes: Vec<usize>,
    pub fiber_axes: Vec<usize>,
    pub frames: Vec<FrameVector>,
    pub structure: StructureConstants,
    pub weight: Field,
    pub base_geometry: Option<Box<FrameGeometry>>,
}

impl FrameGeometry {
    pub fn fiber_len(&self) -> usize {
        self.fiber_axes.iter().map(|&a| self.grid.axes[a].n).product()
    }

    pub fn base_len(&self) -> usize {
        self.base_axes.iter().map(|&a| self.grid.axes[a].n).product()
    }

    pub fn base_point(&self, p: usize) -> usize {
        p / self.fiber_len()
    }

    pub fn fiber_cell(&self) -> f64 {
        self.fiber_axes.iter().map(|&a| self.grid.axes[a].spacing()).product()
    }

    pub fn base_cell(&self) -> f64 {
        self.base_axes.iter().map(|&a| self.grid.axes[a].spacing()).product()
    }

    pub fn is_vertical(&self, a: usize) -> bool {
        self.vertical_indices.contains(&a)
    }

    /// Largest `|C^k_{αj}|` with `α` horizontal, `j` vertical and `k`
    /// horizontal; zero for a Riemannian submersion with these frames.
    pub fn submersion_defect(&self) -> f64 {
        let d = self.dim_total;
        let mut worst: f64 = 0.0;
        for p in self.sample_points() {
            let c = self.structure.at(p);
            for &al in &self.horizontal_indices {
                for &j in &self.vertical_indices {
                    for &k in &self.horizontal_indices {
                        worst = worst.max(c[(k * d + al) * d + j].abs());
                    }
                }
            }
        }
        worst
    }

    pub fn antisymmetry_defect(&self) -> f64 {
        let d = self.dim_total;
        let mut worst: f64 = 0.0;
        for p in self.sample_points() {
            let c = self.structure.at(p);
            for k in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        worst = worst.max((c[(k * d + i) * d + j] + c[(k * d + j) * d + i]).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn min_weight(&self) -> f64 {
        (0..self.grid.len()).map(|p| self.weight.at(p)).fold(f64::INFINITY, f64::min)
    }

    /// Riemannian volume by the lattice quadrature.
    pub fn volume(&self) -> f64 {
        let h = self.grid.cell_volume();
        (0..self.grid.len()).map(|p| self.weight.at(p) * h).sum()
    }

    /// All points, or a single representative when nothing varies.
    fn sample_points(&self) -> Vec<usize> {
        if self.structure.is_uniform() {
            vec![0]
        } else {
            (0..self.grid.len()).collect()
        }
    }

    /// Plain frame derivative `e_a f` of a real field.
    pub fn frame_derivative(&self, a: usize, field: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        for (axis, coeff) in &self.frames[a].components {
            let d = self.grid.derivative_real(*axis, field);
            for (p, o) in out.iter_mut().enumerate() {
                *o += coeff.at(p) * d[p];
            }
        }
        out
    }
}

fn parse_resolution(resolution: &[usize], naxes: usize) -> Result<Vec<usize>> {
    let res = match resolution.len() {
        1 => vec![resolution[0]; naxes],
        n if n == naxes => resolution.to_vec(),
        n => {
            return Err(Error::InvalidResolution(format!(
                "expected 1 or {naxes} resolutions, got {n}"
            )))
        }
    };
    if let Some(bad) = res.iter().find(|&&n| n < 4) {
        return Err(Error::InvalidResolution(format!(
            "every axis needs at least 4 points, got {bad}"
        )));
    }
    Ok(res)
}

fn periodic(name: &str, n: usize, length: f64) -> Axis {
    Axis::new(name, n, length, Gluing::Periodic, Scheme::Spectral)
}

pub fn model_geometry(model: ModelName, resolution: &[usize]) -> Result<FrameGeometry> {
    match model {
        ModelName::Torus4 => torus4(resolution),
        ModelName::KodairaThurston => kodaira_thurston(resolution),
        ModelName::PuncturedSphere => punctured_sphere(resolution),
    }
}

pub fn model_by_name(name: &str, resolution: &[usize]) -> Result<FrameGeometry> {
    model_geometry(name.parse()?, resolution)
}

fn flat_base(name: &str, axes: Vec<Axis>) -> FrameGeometry {
    let dim = axes.len();
    let grid = Grid::new(axes);
    FrameGeometry {
        name: name.to_string(),
        model: None,
        dim_total: dim,
        dim_base: dim,
        dim_fiber: 0,
        vertical_indices: vec![],
        horizontal_indices: (0..dim).collect(),
        base_axes: (0..dim).collect(),
        fiber_axes: vec![],
        frames: (0..dim).map(FrameVector::coordinate).collect(),
        structure: StructureConstants::zero(dim),
        weight: Field::Const(1.0),
        grid,
        base_geometry: None,
    }
}

fn torus4(resolution: &[usize]) -> Result<FrameGeometry> {
    let n = parse_resolution(resolution, 4)?;
    let axes = vec![
        periodic("x", n[0], 1.0),
        periodic("y", n[1], 1.0),
        periodic("z", n[2], 1.0),
        periodic("w", n[3], 1.0),
    ];
    let base = flat_base("torus2", axes[..2].to_vec());
    Ok(FrameGeometry {
        name: ModelName::Torus4.to_string(),
        model: Some(ModelName::Torus4),
        dim_total: 4,
        dim_base: 2,
        dim_fiber: 2,
        vertical_indices: vec![2, 3],
        horizontal_indices: vec![0, 1],
        grid: Grid::new(axes),
        base_axes: vec![0, 1],
        fiber_axes: vec![2, 3],
        frames: (0..4).map(FrameVector::coordinate).collect(),
        structure: StructureConstants::zero(4),
        weight: Field::Const(1.0),
        base_geometry: Some(Box::new(base)),
    })
}

/// Heisenberg nilmanifold times a circle, with left-invariant frame
/// `e1 = ∂x`, `e2 = ∂y + x ∂z`, `e3 = ∂z`, `e4 = ∂w`. The lattice
/// identification `(x, y, z) ~ (x + 1, y, z + y)` becomes the twisted gluing
/// of the x axis.
fn kodaira_thurston(resolution: &[usize]) -> Result<FrameGeometry> {
    let n = parse_resolution(resolution, 4)?;
    if n[1] != n[2] {
        return Err(Error::InvalidResolution(format!(
            "kodaira_thurston needs equal y and z resolution for the twisted gluing, got {} and {}",
            n[1], n[2]
        )));
    }
    let axes = vec![
        Axis::new("x", n[0], 1.0, Gluing::Twisted { target: 2, coupling: 1 }, Scheme::Stencil4),
        periodic("y", n[1], 1.0),
        periodic("z", n[2], 1.0),
        periodic("w", n[3], 1.0),
    ];
    let base = flat_base(
        "torus2",
        vec![
            Axis::new("x", n[0], 1.0, Gluing::Periodic, Scheme::Stencil4),
            periodic("y", n[1], 1.0),
        ],
    );
    let grid = Grid::new(axes);
    let x = Field::sample(&grid, |c| c[0]);
    let frames = vec![
        FrameVector::coordinate(0),
        FrameVector {
            components: vec![(1, Field::Const(1.0)), (2, x)],
        },
        FrameVector::coordinate(2),
        FrameVector::coordinate(3),
    ];
    let mut structure = StructureConstants::zero(4);
    structure.push_antisymmetric(2, 0, 1, Field::Const(1.0));
    Ok(FrameGeometry {
        name: ModelName::KodairaThurston.to_string(),
        model: Some(ModelName::KodairaThurston),
        dim_total: 4,
        dim_base: 2,
        dim_fiber: 2,
        vertical_indices: vec![2, 3],
        horizontal_indices: vec![0, 1],
        grid,
        base_axes: vec![0, 1],
        fiber_axes: vec![2, 3],
        frames,
        structure,
        weight: Field::Const(1.0),
        base_geometry: Some(Box::new(base)),
    })
}

/// Round sphere without its poles, fibered over `(0, π)` by latitude
/// circles. Frame `e_θ = ∂θ` (horizontal), `e_φ = (1/sin θ) ∂φ` (vertical),
/// so `[e_θ, e_φ] = -cot θ e_φ`.
fn punctured_sphere(resolution: &[usize]) -> Result<FrameGeometry> {
    let n = parse_resolution(resolution, 2)?;
    let axes = vec![
        Axis::new("theta", n[0], PI, Gluing::Open, Scheme::Stencil4),
        periodic("phi", n[1], 2.0 * PI),
    ];
    let base = flat_base(
        "interval",
        vec![Axis::new("theta", n[0], PI, Gluing::Open, Scheme::Stencil4)],
    );
    let grid = Grid::new(axes);
    let inv_sin = Field::sample(&grid, |c| 1.0 / c[0].sin());
    let cot = Field::sample(&grid, |c| c[0].cos() / c[0].sin());
    let frames = vec![
        FrameVector::coordinate(0),
        FrameVector {
            components: vec![(1, inv_sin)],
        },
    ];
    let mut structure = StructureConstants::zero(2);
    let neg_cot = match cot {
        Field::Sampled(v) => Field::Sampled(Arc::new(v.iter().map(|x| -x).collect())),
        Field::Const(c) => Field::Const(-c),
    };
    structure.push_antisymmetric(1, 0, 1, neg_cot);
    let weight = Field::sample(&grid, |c| c[0].sin());
    Ok(FrameGeometry {
        name: ModelName::PuncturedSphere.to_string(),
        model: Some(ModelName::PuncturedSphere),
        dim_total: 2,
        dim_base: 1,
        dim_fiber: 1,
        vertical_indices: vec![1],
        horizontal_indices: vec![0],
        grid,
        base_axes: vec![0],
        fiber_axes: vec![1],
        frames,
        structure,
        weight,
        base_geometry: Some(Box::new(base)),
    })
}

/// Either one value for every point or one per grid point.
#[derive(Debug, Clone)]
pub enum PointField<T> {
    Uniform(T),
    PerPoint(Vec<T>),
}

impl<T> PointField<T> {
    pub fn at(&self, p: usize) -> &T {
        match self {
            PointField::Uniform(t) => t,
            PointField::PerPoint(v) => &v[p],
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, PointField::Uniform(_))
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> PointField<U> {
        match self {
            PointField::Uniform(t) => PointField::Uniform(f(t)),
            PointField::PerPoint(v) => PointField::PerPoint(v.iter().map(f).collect()),
        }
    }
}

/// Frame components of the Levi-Civita connection and of `S`, `k`, `Ω` at
/// one point. Vertical and horizontal slots are positions in
/// `vertical_indices` / `horizontal_indices`.
#[derive(Debug, Clone, Serialize)]
pub struct PointTensors {
    /// `ω[a][b][c] = ⟨∇_{e_a} e_b, e_c⟩`, flattened.
    pub omega: Vec<f64>,
    /// `S[j][k][α]`, flattened.
    pub s: Vec<f64>,
    /// `k[α]`.
    pub k: Vec<f64>,
    /// `Ω[α][β][j]`, flattened.
    pub curvature: Vec<f64>,
    /// `div(e_a)`.
    pub divergence: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GeometricTensors {
    pub dim: usize,
    pub dim_fiber: usize,
    pub dim_base: usize,
    pub points: PointField<PointTensors>,
}

impl GeometricTensors {
    pub fn s(&self, p: usize, j: usize, k: usize, al: usize) -> f64 {
        let v = self.dim_fiber;
        self.points.at(p).s[(j * v + k) * self.dim_base + al]
    }

    pub fn k(&self, p: usize, al: usize) -> f64 {
        self.points.at(p).k[al]
    }

    pub fn curvature(&self, p: usize, al: usize, be: usize, j: usize) -> f64 {
        let h = self.dim_base;
        self.points.at(p).curvature[(al * h + be) * self.dim_fiber + j]
    }

    pub fn omega(&self, p: usize, a: usize, b: usize, c: usize) -> f64 {
        let d = self.dim;
        self.points.at(p).omega[(a * d + b) * d + c]
    }

    pub fn has_curvature(&self) -> bool {
        let check = |t: &PointTensors| t.curvature.iter().any(|x| x.abs() > 1e-14);
        match &self.points {
            PointField::Uniform(t) => check(t),
            PointField::PerPoint(v) => v.iter().any(check),
        }
    }

    /// Largest violation of the pointwise symmetries `S_{jkα} = S_{kjα}`,
    /// `Ω_{αβ;j} = -Ω_{βα;j}` and `k_α = Σ_j S_{jjα}`.
    pub fn invariant_defect(&self) -> f64 {
        let (v, h) = (self.dim_fiber, self.dim_base);
        let one = |t: &PointTensors| {
            let mut worst: f64 = 0.0;
            for al in 0..h {
                let mut tr = 0.0;
                for j in 0..v {
                    tr += t.s[(j * v + j) * h + al];
                    for k in 0..v {
                        worst = worst
                            .max((t.s[(j * v + k) * h + al] - t.s[(k * v + j) * h + al]).abs());
                    }
                }
                worst = worst.max((tr - t.k[al]).abs());
                for be in 0..h {
                    for j in 0..v {
                        worst = worst.max(
                            (t.curvature[(al * h + be) * v + j] + t.curvature[(be * h + al) * v + j])
                                .abs(),
                        );
                    }
                }
            }
            worst
        };
        match &self.points {
            PointField::Uniform(t) => one(t),
            PointField::PerPoint(ts) => ts.iter().map(one).fold(0.0, f64::max),
        }
    }
}

fn point_tensors(g: &FrameGeometry, p: usize) -> PointTensors {
    let d = g.dim_total;
    let c = g.structure.at(p);
    let br = |i: usize, j: usize, k: usize| c[(k * d + i) * d + j];
    let mut omega = vec![0.0; d * d * d];
    // Koszul formula for an orthonormal frame.
    for a in 0..d {
        for b in 0..d {
            for cc in 0..d {
                omega[(a * d + b) * d + cc] =
                    0.5 * (br(a, b, cc) - br(b, cc, a) + br(cc, a, b));
            }
        }
    }
    let (vi, hi) = (&g.vertical_indices, &g.horizontal_indices);
    let (nv, nh) = (vi.len(), hi.len());
    let mut s = vec![0.0; nv * nv * nh];
    for (j, &ej) in vi.iter().enumerate() {
        for (k, &ek) in vi.iter().enumerate() {
            for (al, &fa) in hi.iter().enumerate() {
                // orthonormal frame: the Z⟨X,Y⟩ term vanishes
                s[(j * nv + k) * nh + al] = -0.5 * (br(fa, ej, ek) + br(fa, ek, ej));
            }
        }
    }
    let k = (0..nh)
        .map(|al| (0..nv).map(|j| s[(j * nv + j) * nh + al]).sum())
        .collect();
    let mut curvature = vec![0.0; nh * nh * nv];
    for (al, &fa) in hi.iter().enumerate() {
        for (be, &fb) in hi.iter().enumerate() {
            for (j, &ej) in vi.iter().enumerate() {
                curvature[(al * nh + be) * nv + j] = br(fa, fb, ej);
            }
        }
    }
    let divergence = (0..d)
        .map(|a| (0..d).map(|b| omega[(b * d + a) * d + b]).sum())
        .collect();
    PointTensors {
        omega,
        s,
        k,
        curvature,
        divergence,
    }
}

/// `S`, `k`, `Ω` and the Levi-Civita frame coefficients, pointwise.
pub fn compute_tensors(g: &FrameGeometry) -> GeometricTensors {
    let points = if g.structure.is_uniform() {
        PointField::Uniform(point_tensors(g, 0))
    } else {
        PointField::PerPoint((0..g.grid.len()).map(|p| point_tensors(g, p)).collect())
    };
    GeometricTensors {
        dim: g.dim_total,
        dim_fiber: g.dim_fiber,
        dim_base: g.dim_base,
        points,
    }
}

pub fn second_fundamental_form(g: &FrameGeometry) -> Result<GeometricTensors> {
    if g.dim_fiber == 0 {
        return Err(Error::Precondition("geometry has no fiber directions".into()));
    }
    Ok(compute_tensors(g))
}

/// `k_α` at every point.
pub fn mean_curvature(t: &GeometricTensors) -> PointField<Vec<f64>> {
    t.points.map(|pt| pt.k.clone())
}

/// `Ω_{αβ;j}` at every point.
pub fn curvature_form(t: &GeometricTensors) -> PointField<Vec<f64>> {
    t.points.map(|pt| pt.curvature.clone())
}

/// Spinor connection coefficients as endomorphism fields.
#[derive(Debug, Clone)]
pub struct SpinConnection {
    /// `A_a = ¼ Σ_{b,c} ω_{bc}(e_a) c_M(e_b) c_M(e_c)` for every frame index `a`.
    pub total: PointField<Vec<Mat>>,
    /// Same sum restricted to vertical `b, c`, for every frame index `a`.
    pub vertical: PointField<Vec<Mat>>,
    /// Same sum restricted to horizontal `b, c`, for horizontal `a` only.
    pub base: PointField<Vec<Mat>>,
    /// `Ω^{E_V}(e_j, (f_α)_H)`, indexed `[j * dim_base + α]`.
    pub vertical_curvature: PointField<Vec<Mat>>,
}

fn quadratic(
    t: &PointTensors,
    d: usize,
    a: usize,
    idx: &[usize],
    gens: &[Mat],
    rank: usize,
) -> Mat {
    let mut m = Mat::zeros(rank, rank);
    for &b in idx {
        for &c in idx {
            let w = t.omega[(a * d + b) * d + c];
            if w != 0.0 {
                m += &gens[b] * &gens[c] * Complex64::new(0.25 * w, 0.0);
            }
        }
    }
    m
}

/// Generators for every frame index, in `D_M` convention.
pub fn frame_generators(g: &FrameGeometry, fact: &SpinorFactorization) -> Vec<Mat> {
    let mut gens = vec![Mat::zeros(fact.total_rank, fact.total_rank); g.dim_total];
    for (j, &ej) in g.vertical_indices.iter().enumerate() {
        gens[ej] = fact.total_vertical[j].clone();
    }
    for (al, &fa) in g.horizontal_indices.iter().enumerate() {
        gens[fa] = fact.total_horizontal[al].clone();
    }
    gens
}

pub fn check_ranks(g: &FrameGeometry, fact: &SpinorFactorization) -> Result<()> {
    if fact.dim_fiber != g.dim_fiber || fact.dim_base != g.dim_base {
        return Err(Error::InvalidDimension(format!(
            "factorization ({}, {}) does not match geometry ({}, {})",
            fact.dim_fiber, fact.dim_base, g.dim_fiber, g.dim_base
        )));
    }
    Ok(())
}

pub fn spin_connection_coeffs(
    g: &FrameGeometry,
    t: &GeometricTensors,
    fact: &SpinorFactorization,
) -> Result<SpinConnection> {
    check_ranks(g, fact)?;
    let d = g.dim_total;
    let r = fact.total_rank;
    let gens = frame_generators(g, fact);
    let (vi, hi) = (g.vertical_indices.clone(), g.horizontal_indices.clone());
    let all: Vec<usize> = (0..d).collect();
    let total = t.points.map(|pt| (0..d).map(|a| quadratic(pt, d, a, &all, &gens, r)).collect());
    let vertical =
        t.points.map(|pt| (0..d).map(|a| quadratic(pt, d, a, &vi, &gens, r)).collect::<Vec<_>>());
    let base = t.points.map(|pt| hi.iter().map(|&a| quadratic(pt, d, a, &hi, &gens, r)).collect());

    // Ω^{E_V}(e_j, X_α) = e_j(A^V_α) - X_α(A^V_j) + [A^V_j, A^V_α] - Σ_c C^c_{jα} A^V_c
    let npts = g.grid.len();
    let derivative_of = |a: usize, entry: &dyn Fn(usize) -> Complex64| -> Vec<Complex64> {
        let re: Vec<f64> = (0..npts).map(|p| entry(p).re).collect();
        let im: Vec<f64> = (0..npts).map(|p| entry(p).im).collect();
        let dre = g.frame_derivative(a, &re);
        let dim_ = g.frame_derivative(a, &im);
        dre.into_iter().zip(dim_).map(|(x, y)| Complex64::new(x, y)).collect()
    };
    let curvature_at = |p: usize, j: usize, al: usize, dj: &Mat, da: &Mat| -> Mat {
        let av = vertical.at(p);
        let (ej, fa) = (vi[j], hi[al]);
        let c = g.structure.at(p);
        let mut m = dj - da + &av[ej] * &av[fa] - &av[fa] * &av[ej];
        for &cc in &vi {
            let coeff = c[(cc * d + ej) * d + fa];
            if coeff != 0.0 {
                m -= &av[cc] * Complex64::new(coeff, 0.0);
            }
        }
        m
    };
    let vertical_curvature = match &vertical {
        PointField::Uniform(_) => {
            let zero = Mat::zeros(r, r);
            let list = (0..vi.len())
                .flat_map(|j| (0..hi.len()).map(move |al| (j, al)))
                .map(|(j, al)| curvature_at(0, j, al, &zero, &zero))
                .collect();
            PointField::Uniform(list)
        }
        PointField::PerPoint(_) => {
            // derivatives of the sampled coefficient fields, entry by entry
            let mut per_point = vec![Vec::new(); npts];
            for j in 0..vi.len() {
                for al in 0..hi.len() {
                    let mut dj = vec![Mat::zeros(r, r); npts];
                    let mut da = vec![Mat::zeros(r, r); npts];
                    for row in 0..r {
                        for col in 0..r {
                            let a_al = derivative_of(vi[j], &|p| vertical.at(p)[hi[al]][(row, col)]);
                            let a_j = derivative_of(hi[al], &|p| vertical.at(p)[vi[j]][(row, col)]);
                            for p in 0..npts {
                                dj[p][(row, col)] = a_al[p];
                                da[p][(row, col)] = a_j[p];
                            }
                        }
                    }
                    for p in 0..npts {
                        per_point[p].push(curvature_at(p, j, al, &dj[p], &da[p]));
                    }
                }
            }
            PointField::PerPoint(per_point)
        }
    };
    Ok(SpinConnection {
        total,
        vertical,
        base,
        vertical_curvature,
    })
}

/// One CSV/JSON row per grid point: coordinates followed by `S`, `k`, `Ω`.
#[derive(Debug, Clone, Serialize)]
pub struct TensorTable {
    pub geometry: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn tensor_table(g: &FrameGeometry, t: &GeometricTensors) -> TensorTable {
    let (nv, nh) = (g.dim_fiber, g.dim_base);
    let mut columns = vec!["point".to_string()];
    columns.extend(g.grid.axes.iter().map(|a| a.name.clone()));
    let (vi, hi) = (&g.vertical_indices, &g.horizontal_indices);
    for j in 0..nv {
        for k in 0..nv {
            for al in 0..nh {
                columns.push(format!("S_{}_{}_{}", vi[j] + 1, vi[k] + 1, hi[al] + 1));
            }
        }
    }
    for al in 0..nh {
        columns.push(format!("k_{}", hi[al] + 1));
    }
    for al in 0..nh {
        for be in 0..nh {
            for j in 0..nv {
                columns.push(format!("Omega_{}_{}_{}", hi[al] + 1, hi[be] + 1, vi[j] + 1));
            }
        }
    }
    let rows = (0..g.grid.len())
        .map(|p| {
            let pt = t.points.at(p);
            let mut row = vec![p as f64];
            row.extend(g.grid.coords(p));
            row.extend(&pt.s);
            row.extend(&pt.k);
            row.extend(&pt.curvature);
            row
        })
        .collect();
    TensorTable {
        geometry: g.name.clone(),
        columns,
        rows,
    }
}

impl TensorTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, v)| if i == 0 { format!("{}", *v as usize) } else { format!("{v:.17e}") })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{factorize_spinors, max_abs};

    #[test]
    fn torus_is_flat() {
        let g = model_geometry(ModelName::Torus4, &[8]).unwrap();
        assert!(g.structure.entries.is_empty());
        let t = compute_tensors(&g);
        let pt = t.points.at(0);
        assert!(pt.omega.iter().chain(&pt.s).chain(&pt.k).chain(&pt.curvature).all(|&x| x == 0.0));
        let fact = factorize_spinors(2, 2).unwrap();
        let sc = spin_connection_coeffs(&g, &t, &fact).unwrap();
        assert!(sc.total.at(0).iter().all(|m| max_abs(m) == 0.0));
        assert!(sc.vertical_curvature.at(0).iter().all(|m| max_abs(m) == 0.0));
    }

    #[test]
    fn kodaira_thurston_bracket_table() {
        let g = model_geometry(ModelName::KodairaThurston, &[8]).unwrap();
        let c = g.structure.at(17);
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    let expect = match (k, i, j) {
                        (2, 0, 1) => 1.0,
                        (2, 1, 0) => -1.0,
                        _ => 0.0,
                    };
                    assert_eq!(c[(k * 4 + i) * 4 + j], expect);
                }
            }
        }
        let t = compute_tensors(&g);
        assert!(t.points.at(0).s.iter().all(|&x| x == 0.0));
        assert_eq!(t.curvature(0, 0, 1, 0), 1.0);
        assert_eq!(t.curvature(0, 1, 0, 0), -1.0);
        assert_eq!(t.curvature(0, 0, 1, 1), 0.0);
        // Levi-Civita components are ±½ multiples of the single bracket.
        for x in &t.points.at(0).omega {
            assert!(*x == 0.0 || x.abs() == 0.5);
        }
        assert_eq!(t.omega(0, 0, 1, 2), 0.5);
        assert_eq!(t.omega(0, 0, 2, 1), -0.5);
    }

    #[test]
    fn kodaira_thurston_rejects_twist_mismatch() {
        assert!(model_geometry(ModelName::KodairaThurston, &[8, 8, 16, 8]).is_err());
        assert!(model_geometry(ModelName::KodairaThurston, &[8, 16, 16, 8]).is_ok());
        assert!(model_geometry(ModelName::Torus4, &[3]).is_err());
        assert!("moebius".parse::<ModelName>().is_err());
    }

    #[test]
    fn sphere_tensors() {
        let n = 64;
        let g = model_geometry(ModelName::PuncturedSphere, &[n]).unwrap();
        // equator sits between the two middle latitude rows
        let h = PI / n as f64;
        assert!((g.weight.at(0) - (h / 2.0).sin()).abs() < 1e-15);
        let t = compute_tensors(&g);
        for p in (0..g.grid.len()).step_by(37) {
            let th = g.grid.coords(p)[0];
            let cot = th.cos() / th.sin();
            assert!((t.s(p, 0, 0, 0) - cot).abs() < 1e-12);
            assert!((t.k(p, 0) - cot).abs() < 1e-12);
            assert!((t.omega(p, 1, 0, 1) - cot).abs() < 1e-12);
            assert!((t.points.at(p).divergence[0] - cot).abs() < 1e-12);
            assert_eq!(t.points.at(p).divergence[1], 0.0);
        }
        assert!(!t.has_curvature());
        assert!(t.invariant_defect() < 1e-13);
    }

    #[test]
    fn sphere_weight_at_equator_and_area() {
        let g = model_geometry(ModelName::PuncturedSphere, &[65, 64]).unwrap();
        let p = g.grid.index(&[32, 0]);
        assert!((g.weight.at(p) - 1.0).abs() < 1e-15);
        for n in [16, 32, 64] {
            let g = model_geometry(ModelName::PuncturedSphere, &[n]).unwrap();
            let rel = (g.volume() - 4.0 * PI).abs() / (4.0 * PI);
            assert!(rel <= 1.0 / n as f64, "n={n} rel={rel}");
        }
    }

    #[test]
    fn models_are_submersions() {
        for m in ModelName::ALL {
            let g = model_geometry(m, &[8]).unwrap();
            assert_eq!(g.submersion_defect(), 0.0);
            assert_eq!(g.antisymmetry_defect(), 0.0);
            assert!(g.min_weight() > 0.0);
            assert!(compute_tensors(&g).invariant_defect() < 1e-13);
        }
    }

    #[test]
    fn tensor_csv_has_header_and_cot_column() {
        let g = model_geometry(ModelName::PuncturedSphere, &[8]).unwrap();
        let t = compute_tensors(&g);
        let table = tensor_table(&g, &t);
        let csv = table.to_csv();
        let header = csv.lines().next().unwrap();
        assert_eq!(header, "point,theta,phi,S_2_2_1,k_1,Omega_1_1_2");
        let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert!((row[4] - row[1].cos() / row[1].sin()).abs() < 1e-12);
    }
}
