//! Product grids with per-axis gluing, and the one-dimensional skew
//! derivative kernels (Fourier-spectral or fourth-order centered stencil)
//! every lattice operator is built from.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Gluing {
    Periodic,
    /// Crossing the upper end of this axis shifts `target` by minus the
    /// index on `coupling` (and the lower end by plus it). Requires equal
    /// resolution on `target` and `coupling`.
    Twisted { target: usize, coupling: usize },
    /// Sections vanish beyond both ends.
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    Spectral,
    Stencil4,
}

#[derive(Debug, Clone, Serialize)]
pub struct Axis {
    pub name: String,
    pub n: usize,
    pub length: f64,
    pub origin: f64,
    pub gluing: Gluing,
    pub scheme: Scheme,
}

impl Axis {
    pub fn new(name: &str, n: usize, length: f64, gluing: Gluing, scheme: Scheme) -> Self {
        let origin = match gluing {
            Gluing::Open => 0.5 * length / n as f64,
            _ => 0.0,
        };
        Axis {
            name: name.to_string(),
            n,
            length,
            origin,
            gluing,
            scheme,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing()
    }
}

#[derive(Debug)]
pub struct Grid {
    pub axes: Vec<Axis>,
    strides: Vec<usize>,
    npts: usize,
    neighbors: Vec<OnceLock<Arc<Vec<[u32; 4]>>>>,
}

impl Clone for Grid {
    fn clone(&self) -> Self {
        Grid::new(self.axes.clone())
    }
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Self {
        let mut strides = vec![1; axes.len()];
        for a in (0..axes.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].n;
        }
        let npts = axes.iter().map(|a| a.n).product();
        let neighbors = (0..axes.len()).map(|_| OnceLock::new()).collect();
        Grid {
            axes,
            strides,
            npts,
            neighbors,
        }
    }

    pub fn len(&self) -> usize {
        self.npts
    }

    pub fn is_empty(&self) -> bool {
        self.npts == 0
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Product of all spacings, the lattice volume element.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    pub fn multi_index(&self, p: usize) -> Vec<usize> {
        self.axes
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| (p / s) % a.n)
            .collect()
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        self.multi_index(p)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.coord(i))
            .collect()
    }

    /// Grid point reached from `p` by `offset` steps along `axis`, following
    /// the gluing; `None` when the step leaves an open axis.
    pub fn neighbor(&self, p: usize, axis: usize, offset: isize) -> Option<usize> {
        let mut idx = self.multi_index(p);
        let n = self.axes[axis].n as isize;
        let mut m = idx[axis] as isize + offset;
        let mut crossed = 0isize;
        if m >= n {
            m -= n;
            crossed = 1;
        } else if m < 0 {
            m += n;
            crossed = -1;
        }
        match self.axes[axis].gluing {
            Gluing::Open if crossed != 0 => return None,
            Gluing::Twisted { target, coupling } if crossed != 0 => {
                let nt = self.axes[target].n as isize;
                let shift = idx[coupling] as isize;
                idx[target] = (idx[target] as isize - crossed * shift).rem_euclid(nt) as usize;
            }
            _ => {}
        }
        idx[axis] = m as usize;
        Some(self.index(&idx))
    }

    fn neighbor_table(&self, axis: usize) -> Arc<Vec<[u32; 4]>> {
        self.neighbors[axis]
            .get_or_init(|| {
                let table = (0..self.npts)
                    .map(|p| {
                        let mut row = [NONE; 4];
                        for (slot, off) in [-2isize, -1, 1, 2].iter().enumerate() {
                            if let Some(q) = self.neighbor(p, axis, *off) {
                                row[slot] = q as u32;
                            }
                        }
                        row
                    })
                    .collect();
                Arc::new(table)
            })
            .clone()
    }

    /// `out = ∂/∂(coordinate of axis)` applied componentwise to `data`
    /// (`ncomp` interleaved components per point). The discrete operator is
    /// antisymmetric with respect to the unweighted sum.
    pub fn derivative(&self, axis: usize, data: &[Complex64], ncomp: usize, out: &mut [Complex64]) {
        assert_eq!(data.len(), self.npts * ncomp);
        assert_eq!(out.len(), data.len());
        match self.axes[axis].scheme {
            Scheme::Spectral => self.spectral_derivative(axis, data, ncomp, out),
            Scheme::Stencil4 => self.stencil_derivative(axis, data, ncomp, out),
        }
    }

    fn stencil_derivative(&self, axis: usize, data: &[Complex64], ncomp: usize, out: &mut [Complex64]) {
        let table = self.neighbor_table(axis);
        let h = self.axes[axis].spacing();
        let w = [1.0 / (12.0 * h), -8.0 / (12.0 * h), 8.0 / (12.0 * h), -1.0 / (12.0 * h)];
        out.par_chunks_mut(ncomp).enumerate().for_each(|(p, o)| {
            o.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for (slot, &q) in table[p].iter().enumerate() {
                if q == NONE {
                    continue;
                }
                let q = q as usize;
                for c in 0..ncomp {
                    o[c] += data[q * ncomp + c] * w[slot];
                }
            }
        });
    }

    fn spectral_derivative(&self, axis: usize, data: &[Complex64], ncomp: usize, out: &mut [Complex64]) {
        let ax = &self.axes[axis];
        assert_eq!(
            ax.gluing,
            Gluing::Periodic,
            "spectral differentiation needs a periodic axis"
        );
        let n = ax.n;
        let stride = self.strides[axis] * ncomp;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scale = 2.0 * PI / ax.length / n as f64;
        let symbol: Vec<Complex64> = (0..n)
            .map(|q| {
                let k = if q < n.div_ceil(2) { q as f64 } else { q as f64 - n as f64 };
                Complex64::new(0.0, k * scale)
            })
            .collect();
        // Lines are identified by their starting offset (axis index 0).
        let starts: Vec<usize> = (0..self.npts * ncomp)
            .filter(|&off| (off / stride) % n == 0)
            .collect();
        let lines: Vec<Vec<Complex64>> = starts
            .par_iter()
            .map(|&s| {
                let mut buf: Vec<Complex64> = (0..n).map(|i| data[s + i * stride]).collect();
                fwd.process(&mut buf);
                for (b, m) in buf.iter_mut().zip(&symbol) {
                    *b *= m;
                }
                inv.process(&mut buf);
                buf
            })
            .collect();
        for (s, line) in starts.iter().zip(lines) {
            for (i, v) in line.into_iter().enumerate() {
                out[s + i * stride] = v;
            }
        }
    }

    /// Derivative of a real scalar field along `axis`.
    pub fn derivative_real(&self, axis: usize, field: &[f64]) -> Vec<f64> {
        let data: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
        self.derivative(axis, &data, 1, &mut out);
        out.into_iter().map(|z| z.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_matrix(grid: &Grid, axis: usize) -> Vec<Vec<f64>> {
        let n = grid.len();
        (0..n)
            .map(|j| {
                let mut e = vec![Complex64::new(0.0, 0.0); n];
                e[j] = Complex64::new(1.0, 0.0);
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                grid.derivative(axis, &e, 1, &mut out);
                out.iter().map(|z| z.re).collect()
            })
            .collect()
    }

    #[test]
    fn twisted_gluing_is_a_bijection() {
        let grid = Grid::new(vec![
            Axis::new("x", 5, 1.0, Gluing::Twisted { target: 2, coupling: 1 }, Scheme::Stencil4),
            Axis::new("y", 4, 1.0, Gluing::Periodic, Scheme::Spectral),
            Axis::new("z", 4, 1.0, Gluing::Periodic, Scheme::Spectral),
        ]);
        for off in [-2isize, -1, 1, 2] {
            let mut hit = vec![false; grid.len()];
            for p in 0..grid.len() {
                let q = grid.neighbor(p, 0, off).unwrap();
                assert!(!hit[q]);
                hit[q] = true;
                assert_eq!(grid.neighbor(q, 0, -off), Some(p));
            }
        }
    }

    #[test]
    fn stencil_matrix_is_antisymmetric_with_twist() {
        let grid = Grid::new(vec![
            Axis::new("x", 5, 1.0, Gluing::Twisted { target: 1, coupling: 2 }, Scheme::Stencil4),
            Axis::new("z", 3, 1.0, Gluing::Periodic, Scheme::Spectral),
            Axis::new("y", 3, 1.0, Gluing::Periodic, Scheme::Spectral),
        ]);
        let m = dense_matrix(&grid, 0);
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                assert!((m[i][j] + m[j][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn open_axis_truncates() {
        let grid = Grid::new(vec![Axis::new("t", 6, 1.0, Gluing::Open, Scheme::Stencil4)]);
        assert_eq!(grid.neighbor(0, 0, -1), None);
        assert_eq!(grid.neighbor(5, 0, 2), None);
        let m = dense_matrix(&grid, 0);
        for i in 0..6 {
            for j in 0..6 {
                assert!((m[i][j] + m[j][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_plane_wave_eigenvalue() {
        let n = 8;
        let grid = Grid::new(vec![Axis::new("x", n, 1.0, Gluing::Periodic, Scheme::Spectral)]);
        for k in -4i32..4 {
            let data: Vec<Complex64> = (0..n)
                .map(|i| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * i as f64 / n as f64))
                .collect();
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            grid.derivative(0, &data, 1, &mut out);
            let lambda = Complex64::new(0.0, 2.0 * PI * k as f64);
            for (o, d) in out.iter().zip(&data) {
                assert!((o - lambda * d).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn stencil_fourth_order() {
        let err = |n: usize| {
            let grid = Grid::new(vec![Axis::new("x", n, 1.0, Gluing::Periodic, Scheme::Stencil4)]);
            let f: Vec<f64> = (0..n).map(|i| (2.0 * PI * grid.axes[0].coord(i)).sin()).collect();
            let d = grid.derivative_real(0, &f);
            (0..n)
                .map(|i| (d[i] - 2.0 * PI * (2.0 * PI * grid.axes[0].coord(i)).cos()).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(16) / err(32)).log2();
        assert!(order > 3.9, "order {order}");
    }
}
