//! Numerical checks of the factorization, the commutator estimate and the
//! Kucerovsky conditions. Every check returns a [`VerificationReport`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{model_geometry, ModelName};
use crate::grid::Grid;
use crate::lattice::{C, ZERO};
use crate::sections::SmoothSection;
use crate::operators::Setup;
use crate::report::VerificationReport;

mod closure;
mod identities;
mod kucerovsky;
mod products;
mod spectrum;

pub use closure::{cutoff, cutoff_derivative, smooth_step, smooth_step_derivative};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Clifford,
    Consistency,
    Symmetry,
    HalfKControl,
    Ellipticity,
    MetricConnection,
    Factorization,
    Commutator,
    Connection,
    Positivity,
    Garding,
    Closure,
    Spectral,
}

impl CheckName {
    pub const ALL: [CheckName; 13] = [
        CheckName::Clifford,
        CheckName::Consistency,
        CheckName::Symmetry,
        CheckName::HalfKControl,
        CheckName::Ellipticity,
        CheckName::MetricConnection,
        CheckName::Factorization,
        CheckName::Commutator,
        CheckName::Connection,
        CheckName::Positivity,
        CheckName::Garding,
        CheckName::Closure,
        CheckName::Spectral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Clifford => "clifford",
            CheckName::Consistency => "consistency",
            CheckName::Symmetry => "symmetry",
            CheckName::HalfKControl => "half_k_control",
            CheckName::Ellipticity => "ellipticity",
            CheckName::MetricConnection => "metric_connection",
            CheckName::Factorization => "factorization",
            CheckName::Commutator => "commutator",
            CheckName::Connection => "connection",
            CheckName::Positivity => "positivity",
            CheckName::Garding => "garding",
            CheckName::Closure => "closure",
            CheckName::Spectral => "spectral",
        }
    }

    /// The identity or estimate under test.
    pub fn anchor(self) -> &'static str {
        match self {
            CheckName::Clifford => "c(v)c(w) + c(w)c(v) = -2⟨v,w⟩, c(v)† = -c(v), γc(v) = -c(v)γ",
            CheckName::Consistency => "L_a → e_a + ½ div(e_a) with L_a† = -L_a",
            CheckName::Symmetry => "⟨Dξ, η⟩ = ⟨ξ, Dη⟩ for D_M, D_V, 1 ⊗_∇ D_B, D_B",
            CheckName::HalfKControl => "1 ⊗_∇ D_B without ½k fails symmetry when k ≠ 0",
            CheckName::Ellipticity => "σ(D_V)(v) = c_V(v) invertible for v ≠ 0 vertical",
            CheckName::MetricConnection => "f_α ρ(⟨ξ,η⟩) = ρ(⟨∇^X_α ξ,η⟩ + ⟨ξ,∇^X_α η⟩)",
            CheckName::Factorization => "Γ(D_V ×_∇ D_B)Γ = (D_M)₀ − (i/8) c(Ω)",
            CheckName::Commutator => {
                "[D_V ⊗ 1, 1 ⊗_∇ D_B] = Σ S_{kjα} c_V(e_j)c̃(f_α)∇_{e_k} + Σ c_V(e_j)c̃(f_α)(Ω^{E_V}_{jα} + ½ e_j(k_α))"
            }
            CheckName::Connection => "‖T(ξ⊗r) − ξ⊗D_B r‖ ≤ C‖r‖ for ξ in a dense even subspace",
            CheckName::Positivity => "χ(D_V T + T D_V)χ ≥ −κ χ²",
            CheckName::Garding => "‖ψ‖ + ‖D_V ψ‖ ≥ √C (‖ψ‖ + Σ_r ‖∂_r ψ‖) on each fiber",
            CheckName::Closure => "‖D(ψ_n s)‖ ≤ ‖s‖_∞‖dψ_n‖ + ‖Ds‖ with ‖dψ_n‖ bounded in codimension 2",
            CheckName::Spectral => "spec(D) and F_D = D(1 + D²)^{-1/2} with ‖F_D‖ ≤ 1",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            CheckName::Clifford => "Clifford relations, skewness and grading of the generators, including the factorized pairs",
            CheckName::Consistency => "lattice skew derivatives against exact frame derivatives of smooth sections",
            CheckName::Symmetry => "formal self-adjointness of every assembled operator in the weighted inner product",
            CheckName::HalfKControl => "negative control: the lift without the mean-curvature term is not symmetric",
            CheckName::Ellipticity => "principal symbol of the vertical operator on random unit vertical covectors",
            CheckName::MetricConnection => "product rule of the fiber-integrated metric connection, with exact derivatives",
            CheckName::Factorization => "conjugated tensor sum against the total Dirac operator and the curvature term, with a coefficient scan",
            CheckName::Commutator => "commutator of the vertical operator and the horizontal lift against its closed form",
            CheckName::Connection => "connection condition: norm of the lifted defect on band-limited base inputs, lattice and analytic",
            CheckName::Positivity => "lowest eigenvalue of the cut-off anticommutator, by fiber-translation sectors",
            CheckName::Garding => "fiberwise Garding constant from dense generalized eigenproblems and Fourier modes",
            CheckName::Closure => "cutoff sequence near a pole: bounded gradients, bounded images, shrinking gap",
            CheckName::Spectral => "dense and Lanczos spectra against Fourier eigenvalues, bounded transform, Weyl bound",
        }
    }

    /// Geometry used when the caller does not name one.
    pub fn default_geometry(self) -> ModelName {
        match self {
            CheckName::HalfKControl | CheckName::Commutator | CheckName::Closure | CheckName::MetricConnection => {
                ModelName::PuncturedSphere
            }
            CheckName::Spectral => ModelName::Torus4,
            _ => ModelName::KodairaThurston,
        }
    }

    /// Whether the check can run on a geometry.
    pub fn supports(self, model: ModelName) -> bool {
        match self {
            CheckName::HalfKControl | CheckName::Closure => model == ModelName::PuncturedSphere,
            _ => true,
        }
    }

    /// Largest per-axis resolution the check accepts on a model.
    pub fn resolution_cap(self, model: ModelName) -> usize {
        let sphere = model == ModelName::PuncturedSphere;
        match self {
            CheckName::Positivity if sphere => 32,
            CheckName::Positivity => 6,
            CheckName::Connection if sphere => 256,
            CheckName::Connection | CheckName::Garding if !sphere => 16,
            _ => max_resolution(model),
        }
    }

    pub fn default_tolerance(self) -> f64 {
        match self {
            CheckName::Clifford => 1e-13,
            CheckName::Connection => 1e-2,
            CheckName::Spectral => 1e-8,
            _ => 1e-10,
        }
    }

    pub fn describe(self) -> String {
        format!(
            "{}\n  identity: {}\n  {}\n  default geometry: {}\n  default tolerance: {:e}\n",
            self.as_str(),
            self.anchor(),
            self.summary(),
            self.default_geometry(),
            self.default_tolerance()
        )
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == s || c.as_str().replace('_', "-") == s)
            .ok_or_else(|| Error::UnknownCheck(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub geometry: Option<ModelName>,
    /// Empty: the check's default ladder.
    pub resolutions: Vec<usize>,
    pub seed: u64,
    pub tolerance: Option<f64>,
    pub coefficient: f64,
    pub scan: bool,
    pub dense_threshold: usize,
    /// Random sections per resolution.
    pub samples: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            geometry: None,
            resolutions: Vec::new(),
            seed: 42,
            tolerance: None,
            coefficient: 0.125,
            scan: false,
            dense_threshold: 4096,
            samples: 20,
        }
    }
}

impl CheckConfig {
    pub fn geometry_for(&self, check: CheckName) -> ModelName {
        self.geometry.unwrap_or_else(|| check.default_geometry())
    }

    pub fn tolerance_for(&self, check: CheckName) -> f64 {
        self.tolerance.unwrap_or_else(|| check.default_tolerance())
    }

    pub fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(salt))
    }

    /// Resolution ladder: the explicit list or the check's default.
    pub fn ladder(&self, model: ModelName, default: &[usize]) -> Result<Vec<usize>> {
        let cap = max_resolution(model);
        let out = if self.resolutions.is_empty() {
            default.to_vec()
        } else {
            self.resolutions.clone()
        };
        if let Some(&bad) = out.iter().find(|&&n| n < 4 || n > cap) {
            return Err(Error::InvalidResolution(format!(
                "{model} accepts resolutions between 4 and {cap}, got {bad}"
            )));
        }
        Ok(out)
    }

    /// The single resolution for checks that do not fit an order.
    pub fn single(&self, default: usize) -> usize {
        self.resolutions.first().copied().unwrap_or(default)
    }
}

/// Largest resolution per axis accepted for a model.
pub fn max_resolution(model: ModelName) -> usize {
    match model {
        ModelName::PuncturedSphere => 512,
        _ => 32,
    }
}

pub fn setup(model: ModelName, n: usize) -> Result<Setup> {
    Setup::new(model_geometry(model, &[n])?)
}

/// Rejects geometry and resolution choices a check cannot honour, before
/// any computation.
pub fn validate(check: CheckName, cfg: &CheckConfig) -> Result<()> {
    let model = cfg.geometry_for(check);
    if !check.supports(model) {
        return Err(Error::Config(format!("{check} does not run on {model}")));
    }
    let cap = check.resolution_cap(model);
    if let Some(&bad) = cfg.resolutions.iter().find(|&&n| n < 4 || n > cap) {
        return Err(Error::InvalidResolution(format!(
            "{check} on {model} accepts resolutions between 4 and {cap}, got {bad}"
        )));
    }
    Ok(())
}

pub fn run_check(check: CheckName, cfg: &CheckConfig) -> Result<VerificationReport> {
    validate(check, cfg)?;
    let mut resolved = cfg.clone();
    resolved.geometry = Some(cfg.geometry_for(check));
    resolved.tolerance = Some(cfg.tolerance_for(check));
    let report = match check {
        CheckName::Clifford => identities::clifford(cfg)?,
        CheckName::Consistency => identities::consistency(cfg)?,
        CheckName::Symmetry => identities::symmetry(cfg)?,
        CheckName::HalfKControl => identities::half_k_control(cfg)?,
        CheckName::Ellipticity => identities::ellipticity(cfg)?,
        CheckName::MetricConnection => identities::metric_connection(cfg)?,
        CheckName::Factorization => products::factorization(cfg)?,
        CheckName::Commutator => products::commutator_check(cfg)?,
        CheckName::Connection => kucerovsky::connection(cfg)?,
        CheckName::Positivity => kucerovsky::positivity(cfg)?,
        CheckName::Garding => kucerovsky::garding(cfg)?,
        CheckName::Closure => closure::closure(cfg)?,
        CheckName::Spectral => spectrum::spectral(cfg)?,
    };
    let mut report = report;
    report.detail("config", &resolved);
    Ok(report.finish())
}

/// The configuration a check runs with inside a suite: overrides it cannot
/// honour are dropped in favour of its defaults.
pub fn suite_config(check: CheckName, cfg: &CheckConfig) -> (CheckConfig, bool) {
    let mut out = cfg.clone();
    let mut fallback = false;
    if let Some(m) = cfg.geometry {
        if !check.supports(m) {
            out.geometry = None;
            out.resolutions.clear();
            fallback = true;
        }
    }
    let model = out.geometry_for(check);
    let (cap, model_cap) = (check.resolution_cap(model), max_resolution(model));
    if out.resolutions.iter().any(|&n| n > cap && n <= model_cap) {
        out.resolutions.clear();
        fallback = true;
    }
    (out, fallback)
}

/// Every check in order, each under [`suite_config`].
pub fn run_all(cfg: &CheckConfig) -> Vec<(CheckName, Result<VerificationReport>)> {
    CheckName::ALL
        .iter()
        .map(|&c| {
            let (local, fallback) = suite_config(c, cfg);
            let rep = run_check(c, &local).map(|mut r| {
                if fallback {
                    r.detail("suite_fallback", true);
                }
                r
            });
            (c, rep)
        })
        .collect()
}

/// Values and coordinate gradients (`grad[axis][p * r + c]`) of a smooth section.
fn eval_section(s: &dyn SmoothSection, grid: &Grid) -> (Vec<C>, Vec<Vec<C>>) {
    let r = s.rank();
    let nd = grid.ndim();
    let n = grid.len();
    let mut value = vec![ZERO; n * r];
    let mut grad = vec![vec![ZERO; n * r]; nd];
    let mut g = vec![ZERO; nd * r];
    for p in 0..n {
        g.iter_mut().for_each(|z| *z = ZERO);
        s.eval(&grid.coords(p), &mut value[p * r..(p + 1) * r], &mut g);
        for (axis, ga) in grad.iter_mut().enumerate() {
            ga[p * r..(p + 1) * r].copy_from_slice(&g[axis * r..(axis + 1) * r]);
        }
    }
    (value, grad)
}

fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<C> {
    (0..n).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn diff(a: &[C], b: &[C]) -> Vec<C> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn axpy(s: f64, x: &[C], y: &[C]) -> Vec<C> {
    x.iter().zip(y).map(|(a, b)| a * s + b).collect()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max)
}

/// Converged to `tol` everywhere, or convergent with order at least `min_order`.
fn converges(report: &mut VerificationReport, tol: f64, min_order: f64) -> bool {
    let exact = report.residuals.iter().all(|&r| r <= tol);
    report.detail("exact", exact);
    let decreasing = report.residuals.windows(2).all(|w| w[1] < w[0]);
    exact || (decreasing && report.order.is_some_and(|o| o >= min_order))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for c in CheckName::ALL {
            assert_eq!(c.as_str().parse::<CheckName>().unwrap(), c);
        }
        assert!("half-k-control".parse::<CheckName>().is_ok());
        assert!(matches!("nope".parse::<CheckName>(), Err(Error::UnknownCheck(_))));
        assert!(CheckName::Factorization.describe().contains("(D_M)₀ − (i/8) c(Ω)"));
    }

    #[test]
    fn ladder_rules() {
        let mut cfg = CheckConfig::default();
        let kt = ModelName::KodairaThurston;
        assert_eq!(cfg.ladder(kt, &[8, 16]).unwrap(), vec![8, 16]);
        cfg.resolutions = vec![8];
        assert_eq!(cfg.ladder(kt, &[16]).unwrap(), vec![8]);
        cfg.resolutions = vec![64];
        assert!(cfg.ladder(kt, &[]).is_err());
        cfg.resolutions = vec![8];
        assert!(validate(CheckName::Positivity, &cfg).is_err());
        let (local, fell_back) = suite_config(CheckName::Positivity, &cfg);
        assert!(fell_back && local.resolutions.is_empty());
        cfg.geometry = Some(ModelName::Torus4);
        assert!(validate(CheckName::Closure, &cfg).is_err());
        let (local, fell_back) = suite_config(CheckName::Closure, &cfg);
        assert!(fell_back && local.geometry.is_none());
        assert!(!suite_config(CheckName::Symmetry, &cfg).1);
    }
}
