//! Smooth test sections with closed-form coordinate gradients, and
//! band-limiting on periodic axes.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::clifford::Mat;
use crate::geometry::{FrameGeometry, ModelName};
use crate::grid::{Gluing, Grid};
use crate::lattice::{FirstOrderOperator, C, ZERO};

/// Section known in closed form. `grad` is laid out `[axis * rank + c]`.
pub trait SmoothSection: Send + Sync {
    fn rank(&self) -> usize;
    fn eval(&self, x: &[f64], value: &mut [C], grad: &mut [C]);
}

/// Samples of a smooth section on the grid.
pub fn sample(s: &dyn SmoothSection, grid: &Grid) -> Vec<C> {
    let r = s.rank();
    let nd = grid.ndim();
    let mut out = vec![ZERO; grid.len() * r];
    out.par_chunks_mut(r).enumerate().for_each(|(p, o)| {
        let mut grad = vec![ZERO; nd * r];
        s.eval(&grid.coords(p), o, &mut grad);
    });
    out
}

/// Continuum action of `op` on `s`, evaluated pointwise with exact
/// derivatives: `Σ_a M_a (e_a + ½ div e_a) s + Z s`.
pub fn apply_smooth(op: &FirstOrderOperator, s: &dyn SmoothSection) -> Vec<C> {
    let lat = &op.lattice;
    let g = &lat.geometry;
    let r = lat.rank;
    let nd = g.grid.ndim();
    let mut out = vec![ZERO; lat.len()];
    out.par_chunks_mut(r).enumerate().for_each(|(p, o)| {
        let mut value = vec![ZERO; r];
        let mut grad = vec![ZERO; nd * r];
        s.eval(&g.grid.coords(p), &mut value, &mut grad);
        let div = &lat.tensors.points.at(p).divergence;
        let mut d = vec![ZERO; r];
        for (a, m) in &op.terms {
            for c in 0..r {
                d[c] = value[c] * (0.5 * div[*a]);
            }
            for (axis, coeff) in &g.frames[*a].components {
                let k = coeff.at(p);
                for c in 0..r {
                    d[c] += grad[axis * r + c] * k;
                }
            }
            matvec_add(m.at(p), &d, o);
        }
        if let Some(z) = &op.zero {
            matvec_add(z.at(p), &value, o);
        }
    });
    out
}

/// Exact frame derivative `e_a s` (without the divergence term).
pub fn frame_derivative_smooth(g: &FrameGeometry, a: usize, s: &dyn SmoothSection) -> Vec<C> {
    let r = s.rank();
    let nd = g.grid.ndim();
    let mut out = vec![ZERO; g.grid.len() * r];
    out.par_chunks_mut(r).enumerate().for_each(|(p, o)| {
        let mut value = vec![ZERO; r];
        let mut grad = vec![ZERO; nd * r];
        s.eval(&g.grid.coords(p), &mut value, &mut grad);
        for (axis, coeff) in &g.frames[a].components {
            let k = coeff.at(p);
            for c in 0..r {
                o[c] += grad[axis * r + c] * k;
            }
        }
    });
    out
}

fn matvec_add(m: &Mat, x: &[C], out: &mut [C]) {
    for (i, o) in out.iter_mut().enumerate() {
        for (j, xj) in x.iter().enumerate() {
            *o += m[(i, j)] * xj;
        }
    }
}

/// `amp · exp(2πi Σ_μ k_μ x_μ / L_μ)`.
#[derive(Debug, Clone)]
pub struct PlaneWave {
    pub modes: Vec<i64>,
    pub lengths: Vec<f64>,
    pub amplitude: Vec<C>,
}

impl SmoothSection for PlaneWave {
    fn rank(&self) -> usize {
        self.amplitude.len()
    }

    fn eval(&self, x: &[f64], value: &mut [C], grad: &mut [C]) {
        let r = self.rank();
        let freq: Vec<f64> = self
            .modes
            .iter()
            .zip(&self.lengths)
            .map(|(&k, l)| 2.0 * PI * k as f64 / l)
            .collect();
        let phase: f64 = freq.iter().zip(x).map(|(f, xi)| f * xi).sum();
        let e = C::from_polar(1.0, phase);
        for c in 0..r {
            let v = self.amplitude[c] * e;
            value[c] += v;
            for (mu, f) in freq.iter().enumerate() {
                grad[mu * r + c] += v * C::new(0.0, *f);
            }
        }
    }
}

/// Section of the nilmanifold bundle with nonzero z-frequency:
/// `amp · Σ_m g(x - x0 + m) e^{2πi n m y} e^{2πi (n z + l w)}` with a Gaussian
/// profile `g`. Invariant under `(x, y, z) ↦ (x + 1, y, z + y)`.
#[derive(Debug, Clone)]
pub struct ThetaMode {
    pub n: i64,
    pub l: i64,
    pub x0: f64,
    pub sigma: f64,
    pub amplitude: Vec<C>,
}

impl ThetaMode {
    const TERMS: i64 = 4;
}

impl SmoothSection for ThetaMode {
    fn rank(&self) -> usize {
        self.amplitude.len()
    }

    fn eval(&self, x: &[f64], value: &mut [C], grad: &mut [C]) {
        let r = self.rank();
        let n = self.n as f64;
        let s2 = self.sigma * self.sigma;
        let (mut h, mut hx, mut hy) = (ZERO, ZERO, ZERO);
        for m in -Self::TERMS..=Self::TERMS {
            let t = x[0] - self.x0 + m as f64;
            let gv = (-t * t / (2.0 * s2)).exp();
            let e = C::from_polar(gv, 2.0 * PI * n * m as f64 * x[1]);
            h += e;
            hx += e * (-t / s2);
            hy += e * C::new(0.0, 2.0 * PI * n * m as f64);
        }
        let fz = 2.0 * PI * n;
        let fw = 2.0 * PI * self.l as f64;
        let e = C::from_polar(1.0, fz * x[2] + fw * x[3]);
        for c in 0..r {
            let a = self.amplitude[c] * e;
            value[c] += a * h;
            grad[c] += a * hx;
            grad[r + c] += a * hy;
            grad[2 * r + c] += a * h * C::new(0.0, fz);
            grad[3 * r + c] += a * h * C::new(0.0, fw);
        }
    }
}

/// `amp · exp(-α / sin²θ) cos^p θ e^{imφ}`, flat to all orders at the poles.
#[derive(Debug, Clone)]
pub struct SphereBump {
    pub alpha: f64,
    pub power: i32,
    pub m: i64,
    pub amplitude: Vec<C>,
}

impl SmoothSection for SphereBump {
    fn rank(&self) -> usize {
        self.amplitude.len()
    }

    fn eval(&self, x: &[f64], value: &mut [C], grad: &mut [C]) {
        let r = self.rank();
        let (s, c) = (x[0].sin(), x[0].cos());
        let e = (-self.alpha / (s * s)).exp();
        let de = e * 2.0 * self.alpha * c / (s * s * s);
        let p = self.power;
        let pv = c.powi(p);
        let dp = if p == 0 { 0.0 } else { -(p as f64) * c.powi(p - 1) * s };
        let phase = C::from_polar(1.0, self.m as f64 * x[1]);
        for k in 0..r {
            let a = self.amplitude[k] * phase;
            value[k] += a * (e * pv);
            grad[k] += a * (de * pv + e * dp);
            grad[r + k] += a * (e * pv) * C::new(0.0, self.m as f64);
        }
    }
}

/// Pointwise sum of sections of equal rank.
pub struct Combination {
    pub rank: usize,
    pub parts: Vec<Box<dyn SmoothSection>>,
}

impl SmoothSection for Combination {
    fn rank(&self) -> usize {
        self.rank
    }

    fn eval(&self, x: &[f64], value: &mut [C], grad: &mut [C]) {
        for part in &self.parts {
            part.eval(x, value, grad);
        }
    }
}

/// Tensor product `ξ ⊗ v` with `v` a constant vector.
pub struct TensorConst<'a> {
    pub xi: &'a dyn SmoothSection,
    pub v: Vec<C>,
}

impl SmoothSection for TensorConst<'_> {
    fn rank(&self) -> usize {
        self.xi.rank() * self.v.len()
    }

    fn eval(&self, x: &[f64], value: &mut [C], grad: &mut [C]) {
        let rf = self.xi.rank();
        let rb = self.v.len();
        let nd = grad.len() / (rf * rb);
        let mut xv = vec![ZERO; rf];
        let mut xg = vec![ZERO; nd * rf];
        self.xi.eval(x, &mut xv, &mut xg);
        for i in 0..rf {
            for j in 0..rb {
                value[i * rb + j] += xv[i] * self.v[j];
                for mu in 0..nd {
                    grad[mu * rf * rb + i * rb + j] += xg[mu * rf + i] * self.v[j];
                }
            }
        }
    }
}

/// Constant section.
pub struct Constant(pub Vec<C>);

impl SmoothSection for Constant {
    fn rank(&self) -> usize {
        self.0.len()
    }

    fn eval(&self, _x: &[f64], value: &mut [C], _grad: &mut [C]) {
        for (v, a) in value.iter_mut().zip(&self.0) {
            *v += a;
        }
    }
}

pub fn random_amplitude(rng: &mut impl Rng, rank: usize) -> Vec<C> {
    (0..rank)
        .map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// Applies a projector (or any matrix) to an amplitude vector.
pub fn project_amplitude(p: &Mat, amp: &[C]) -> Vec<C> {
    (0..p.nrows())
        .map(|i| (0..amp.len()).map(|j| p[(i, j)] * amp[j]).sum())
        .collect()
}

fn random_mode(rng: &mut impl Rng, kmax: i64) -> i64 {
    rng.random_range(-kmax..=kmax)
}

/// Random smooth band-limited section for a model: plane waves with modes
/// up to `N/4` on periodic axes, theta modes carrying z-frequency on the
/// nilmanifold, and pole-flat bumps on the sphere. `amp_map` post-processes
/// every amplitude (e.g. a grading projector).
pub fn random_section(
    g: &FrameGeometry,
    rank: usize,
    terms: usize,
    rng: &mut impl Rng,
    amp_map: Option<&Mat>,
) -> Combination {
    let axes = &g.grid.axes;
    let amp = |rng: &mut _| {
        let a = random_amplitude(rng, rank);
        match amp_map {
            Some(m) => project_amplitude(m, &a),
            None => a,
        }
    };
    let kmax: Vec<i64> = axes.iter().map(|a| (a.n / 4) as i64).collect();
    let lengths: Vec<f64> = axes.iter().map(|a| a.length).collect();
    let mut parts: Vec<Box<dyn SmoothSection>> = Vec::new();
    match g.model {
        Some(ModelName::PuncturedSphere) => {
            for t in 0..terms {
                parts.push(Box::new(SphereBump {
                    alpha: 0.5 + 0.25 * (t % 3) as f64,
                    power: (t % 3) as i32,
                    m: random_mode(rng, kmax[1].min(3)),
                    amplitude: amp(rng),
                }));
            }
        }
        Some(ModelName::KodairaThurston) => {
            for t in 0..terms {
                if t % 2 == 0 {
                    let mut modes: Vec<i64> = kmax.iter().map(|&k| random_mode(rng, k)).collect();
                    modes[2] = 0;
                    parts.push(Box::new(PlaneWave {
                        modes,
                        lengths: lengths.clone(),
                        amplitude: amp(rng),
                    }));
                } else {
                    parts.push(Box::new(ThetaMode {
                        n: if rng.random_bool(0.5) { 1 } else { -1 },
                        l: random_mode(rng, kmax[3]),
                        x0: rng.random_range(0.0..1.0),
                        sigma: 0.35,
                        amplitude: amp(rng),
                    }));
                }
            }
        }
        _ => {
            for _ in 0..terms {
                let modes = axes
                    .iter()
                    .zip(&kmax)
                    .map(|(a, &k)| if a.gluing == Gluing::Periodic { random_mode(rng, k) } else { 0 })
                    .collect();
                parts.push(Box::new(PlaneWave {
                    modes,
                    lengths: lengths.clone(),
                    amplitude: amp(rng),
                }));
            }
        }
    }
    Combination { rank, parts }
}

/// Zeroes every Fourier mode with `|k| > kmax` along each periodic axis.
pub fn band_limit(grid: &Grid, data: &mut [C], ncomp: usize, kmax: usize) {
    let mut planner = FftPlanner::<f64>::new();
    for (axis, ax) in grid.axes.iter().enumerate() {
        if ax.gluing != Gluing::Periodic {
            continue;
        }
        let n = ax.n;
        let stride = grid.stride(axis) * ncomp;
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let starts: Vec<usize> = (0..data.len()).filter(|&off| (off / stride) % n == 0).collect();
        let lines: Vec<Vec<C>> = starts
            .par_iter()
            .map(|&s| {
                let mut buf: Vec<C> = (0..n).map(|i| data[s + i * stride]).collect();
                fwd.process(&mut buf);
                for (q, b) in buf.iter_mut().enumerate() {
                    let k = q.min(n - q);
                    if k > kmax {
                        *b = ZERO;
                    } else {
                        *b /= n as f64;
                    }
                }
                inv.process(&mut buf);
                buf
            })
            .collect();
        for (s, line) in starts.iter().zip(lines) {
            for (i, v) in line.into_iter().enumerate() {
                data[s + i * stride] = v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::model_geometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn complex(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn finite_difference_check(s: &dyn SmoothSection, x: &[f64]) {
        let r = s.rank();
        let nd = x.len();
        let mut v0 = vec![ZERO; r];
        let mut g0 = vec![ZERO; nd * r];
        s.eval(x, &mut v0, &mut g0);
        let h = 1e-6;
        for mu in 0..nd {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[mu] += h;
            xm[mu] -= h;
            let (mut vp, mut vm) = (vec![ZERO; r], vec![ZERO; r]);
            let mut scratch = vec![ZERO; nd * r];
            s.eval(&xp, &mut vp, &mut scratch);
            s.eval(&xm, &mut vm, &mut scratch);
            for c in 0..r {
                let fd = (vp[c] - vm[c]) / (2.0 * h);
                assert!((fd - g0[mu * r + c]).norm() < 1e-6 * (1.0 + fd.norm()), "axis {mu}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let amp = vec![complex(1.0, 0.5), complex(-0.3, 0.2)];
        finite_difference_check(
            &ThetaMode { n: 1, l: 2, x0: 0.3, sigma: 0.35, amplitude: amp.clone() },
            &[0.41, 0.27, 0.66, 0.12],
        );
        finite_difference_check(
            &SphereBump { alpha: 0.1, power: 2, m: 3, amplitude: amp.clone() },
            &[0.9, 1.7],
        );
        finite_difference_check(
            &PlaneWave { modes: vec![1, -2], lengths: vec![1.0, 2.0], amplitude: amp },
            &[0.2, 0.9],
        );
    }

    #[test]
    fn theta_mode_respects_twisted_identification() {
        let s = ThetaMode { n: -1, l: 1, x0: 0.7, sigma: 0.35, amplitude: vec![complex(1.0, 0.0)] };
        let (mut a, mut b) = ([ZERO], [ZERO]);
        let mut g = [ZERO; 4];
        let (x, y, z, w) = (0.13, 0.42, 0.77, 0.31);
        s.eval(&[x, y, z, w], &mut a, &mut g);
        s.eval(&[x + 1.0, y, z + y, w], &mut b, &mut g);
        assert!((a[0] - b[0]).norm() < 1e-12);
    }

    #[test]
    fn band_limit_keeps_low_modes_and_kills_high() {
        let g = model_geometry(ModelName::Torus4, &[8]).unwrap();
        let low = PlaneWave { modes: vec![1, -2, 0, 1], lengths: vec![1.0; 4], amplitude: vec![complex(1.0, 0.0)] };
        let high = PlaneWave { modes: vec![3, 0, 0, 0], lengths: vec![1.0; 4], amplitude: vec![complex(1.0, 0.0)] };
        let mut u = sample(&low, &g.grid);
        let keep = u.clone();
        band_limit(&g.grid, &mut u, 1, 2);
        assert!(u.iter().zip(&keep).all(|(a, b)| (a - b).norm() < 1e-12));
        let mut v = sample(&high, &g.grid);
        band_limit(&g.grid, &mut v, 1, 2);
        assert!(v.iter().all(|a| a.norm() < 1e-12));
    }

    #[test]
    fn random_sections_are_deterministic() {
        let g = model_geometry(ModelName::KodairaThurston, &[8]).unwrap();
        let a = sample(&random_section(&g, 2, 4, &mut ChaCha8Rng::seed_from_u64(9), None), &g.grid);
        let b = sample(&random_section(&g, 2, 4, &mut ChaCha8Rng::seed_from_u64(9), None), &g.grid);
        assert_eq!(a, b);
    }
}
