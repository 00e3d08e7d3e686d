//! Sketch decoders and their building blocks.
//!
//! Both decoders greedily grow a support of centers by maximizing the
//! correlation function of the current residual, project the sketch onto the
//! non-negative span of the selected atoms and update the residual:
//!
//! * [`clompr`] adds one center per iteration for `T = 2k` iterations, hard
//!   thresholds back to `k` as soon as the support exceeds `k`, and jointly
//!   fine-tunes centers and weights after every projection.
//! * [`proposed_decoder`] first collects `T` candidates with a configurable
//!   local-maximum search (grid or sketched mean shift), optionally fitting
//!   Gaussian components, and only then keeps the `k` heaviest.

mod clompr;
mod covariance;
mod finetune;
mod nnls;
mod proposed;
mod search;
mod threshold;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::sketch::{l2_norm, sketch_dirac, sketch_gaussian_unchecked, FrequencyMatrix, Sketch};

pub use clompr::clompr;
pub use covariance::{estimate_sigma, V_FLOOR};
pub use finetune::{joint_finetune, FinetuneReport, FINETUNE_GRAD_TOL, FINETUNE_MAX_ITERS};
pub use nnls::{nnls, nnls_weights, stack_atoms};
pub use proposed::proposed_decoder;
pub use search::{
    get_local_maximum, get_local_maximum_grid, get_local_maximum_meanshift, gradient_ascent,
    run_trajectory, LocalMaximum, StopReason, Trajectory, DEFAULT_GRID_CAP,
};
pub use threshold::hard_threshold;

/// Axis-aligned domain `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawBox> for BoxDomain {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        Self::new(raw.lower, raw.upper)
    }
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidParameter("box dimension must be >= 1".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidParameter(format!(
                    "box axis {i}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Euclidean projection, which for a box is a componentwise clamp.
    pub fn project(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((v, l), u)| *l <= *v && *v <= *u)
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) * rng.random::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Dirac,
    Gaussian,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::Dirac => "dirac",
            Model::Gaussian => "gaussian",
        })
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirac" => Ok(Model::Dirac),
            "gaussian" => Ok(Model::Gaussian),
            other => Err(Error::InvalidParameter(format!(
                "unknown model {other:?} (expected dirac or gaussian)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Dirac,
    Gaussian,
}

/// One atom of a fitted mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub kind: ComponentKind,
    pub center: Vec<f64>,
    /// Strictly positive definite for Gaussians, `None` for Diracs.
    pub covariance: Option<DMatrix<f64>>,
}

impl Component {
    pub fn dirac(center: Vec<f64>) -> Self {
        Self {
            kind: ComponentKind::Dirac,
            center,
            covariance: None,
        }
    }

    /// A Gaussian component, or a Dirac when `cov` is the all-zero matrix.
    pub fn from_estimate(center: Vec<f64>, cov: DMatrix<f64>) -> Self {
        if cov.iter().all(|v| *v == 0.0) {
            Self::dirac(center)
        } else {
            Self {
                kind: ComponentKind::Gaussian,
                center,
                covariance: Some(cov),
            }
        }
    }

    /// `A pi` for this component.
    pub fn sketch(&self, freqs: &FrequencyMatrix) -> Result<Vec<Complex64>> {
        check_dim(freqs.dim(), self.center.len())?;
        match &self.covariance {
            Some(cov) if self.kind == ComponentKind::Gaussian => {
                Ok(sketch_gaussian_unchecked(&self.center, cov, freqs))
            }
            _ => sketch_dirac(&self.center, freqs),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ComponentRepr {
    kind: ComponentKind,
    center: Vec<f64>,
    covariance: Option<Vec<f64>>,
}

impl Serialize for Component {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        // row-major; the matrix is symmetric so the order is only a convention
        let covariance = self
            .covariance
            .as_ref()
            .map(|c| linalg::to_rows(c).concat());
        ComponentRepr {
            kind: self.kind,
            center: self.center.clone(),
            covariance,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Component {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = ComponentRepr::deserialize(de)?;
        let d = repr.center.len();
        let covariance = match repr.covariance {
            Some(v) if v.len() == d * d => Some(DMatrix::from_row_slice(d, d, &v)),
            Some(v) => {
                return Err(serde::de::Error::custom(format!(
                    "covariance has {} entries, expected {}",
                    v.len(),
                    d * d
                )))
            }
            None => None,
        };
        Ok(Component {
            kind: repr.kind,
            center: repr.center,
            covariance,
        })
    }
}

/// Parameters of an iterative ascent search (sketched mean shift or plain
/// gradient ascent). `None` fields are resolved from the bandwidth and domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentParams {
    /// Mean shift: `eta` in `c <- c + eta / |f(c)| * grad f(c)`, default
    /// `sigma^2 / 2`. Plain ascent: the step is `eta / |r|`.
    #[serde(default)]
    pub eta: Option<f64>,
    pub restarts: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop when an update moves less than this; default `1e-6 * diam`.
    #[serde(default)]
    pub tol: Option<f64>,
}

fn default_max_iters() -> usize {
    300
}

impl AscentParams {
    pub fn with_restarts(restarts: usize) -> Self {
        Self {
            eta: None,
            restarts,
            max_iters: default_max_iters(),
            tol: None,
        }
    }

    fn resolve(&self, sigma: f64, domain: &BoxDomain) -> Self {
        Self {
            eta: Some(self.eta.unwrap_or(0.5 * sigma * sigma)),
            restarts: self.restarts,
            max_iters: self.max_iters,
            tol: Some(self.tol.unwrap_or(1e-6 * domain.diameter())),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts L must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if let Some(eta) = self.eta {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::InvalidParameter(format!("eta must be > 0, got {eta}")));
            }
        }
        if let Some(tol) = self.tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::InvalidParameter(format!("tol must be > 0, got {tol}")));
            }
        }
        Ok(())
    }
}

/// How `GetLocalMaximum` is carried out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SearchStrategy {
    Grid {
        points_per_axis: usize,
        #[serde(default = "default_grid_cap")]
        max_nodes: usize,
    },
    MeanShift(AscentParams),
    GradientAscent(AscentParams),
}

fn default_grid_cap() -> usize {
    DEFAULT_GRID_CAP
}

impl SearchStrategy {
    pub fn grid(points_per_axis: usize) -> Self {
        SearchStrategy::Grid {
            points_per_axis,
            max_nodes: DEFAULT_GRID_CAP,
        }
    }

    pub fn mean_shift(restarts: usize) -> Self {
        SearchStrategy::MeanShift(AscentParams::with_restarts(restarts))
    }

    pub fn gradient_ascent(restarts: usize) -> Self {
        SearchStrategy::GradientAscent(AscentParams::with_restarts(restarts))
    }

    pub fn name(&self) -> &'static str {
        match self {
            SearchStrategy::Grid { .. } => "grid",
            SearchStrategy::MeanShift(_) => "mean-shift",
            SearchStrategy::GradientAscent(_) => "gradient-ascent",
        }
    }

    /// Number of random starts, or 0 for the grid.
    pub fn restarts(&self) -> usize {
        match self {
            SearchStrategy::Grid { .. } => 0,
            SearchStrategy::MeanShift(p) | SearchStrategy::GradientAscent(p) => p.restarts,
        }
    }

    /// Fills in bandwidth- and domain-dependent defaults.
    pub fn resolve(&self, sigma: f64, domain: &BoxDomain) -> Self {
        match self {
            SearchStrategy::Grid { .. } => self.clone(),
            SearchStrategy::MeanShift(p) => SearchStrategy::MeanShift(p.resolve(sigma, domain)),
            SearchStrategy::GradientAscent(p) => SearchStrategy::GradientAscent(p.resolve(sigma, domain)),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SearchStrategy::Grid { points_per_axis, .. } if *points_per_axis < 2 => Err(
                Error::InvalidParameter("grid needs at least 2 points per axis".into()),
            ),
            SearchStrategy::Grid { .. } => Ok(()),
            SearchStrategy::MeanShift(p) | SearchStrategy::GradientAscent(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub k: usize,
    /// Number of greedy iterations (atoms), `T >= k`.
    pub t: usize,
    pub model: Model,
    pub search: SearchStrategy,
    pub seed: u64,
    /// Joint fine-tuning of centers and weights (CL-OMPR only).
    #[serde(default = "default_true")]
    pub finetune: bool,
}

fn default_true() -> bool {
    true
}

impl DecoderConfig {
    /// CL-OMPR as usually run: `T = 2k`, one plain-gradient-ascent start per
    /// iteration, fine-tuning on.
    pub fn clompr_preset(k: usize, seed: u64) -> Self {
        Self {
            k,
            t: 2 * k,
            model: Model::Dirac,
            search: SearchStrategy::gradient_ascent(1),
            seed,
            finetune: true,
        }
    }

    /// The proposed decoder with sketched mean shift over `restarts` starts.
    pub fn proposed_meanshift(k: usize, t: usize, model: Model, restarts: usize, seed: u64) -> Self {
        Self {
            k,
            t,
            model,
            search: SearchStrategy::mean_shift(restarts),
            seed,
            finetune: false,
        }
    }

    pub fn proposed_grid(k: usize, t: usize, model: Model, points_per_axis: usize, seed: u64) -> Self {
        Self {
            k,
            t,
            model,
            search: SearchStrategy::grid(points_per_axis),
            seed,
            finetune: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if self.t < self.k {
            return Err(Error::InvalidParameter(format!(
                "number of atoms T must satisfy T >= k (got T = {}, k = {})",
                self.t, self.k
            )));
        }
        self.search.validate()
    }
}

/// Diagnostics for one greedy iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub center: Vec<f64>,
    /// Correlation of the residual at the selected center.
    pub f_value: f64,
    /// Index of the winning restart, when the search uses restarts.
    pub winner: Option<usize>,
    pub search_iters: usize,
    pub kind: ComponentKind,
    pub support_size: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderResult {
    pub components: Vec<Component>,
    pub weights: Vec<f64>,
    /// `|z - sum_i alpha_i A pi_i|` for the returned mixture.
    pub residual_norm: f64,
    /// Search parameters after defaults were filled in.
    pub search: SearchStrategy,
    pub trace: Vec<IterationTrace>,
}

impl DecoderResult {
    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.components.iter().map(|c| c.center.clone()).collect()
    }
}

/// `z - sum_i alpha_i A pi_i`.
pub fn residual_update(
    z: &[Complex64],
    components: &[Component],
    weights: &[f64],
    freqs: &FrequencyMatrix,
) -> Result<Vec<Complex64>> {
    check_dim(freqs.m(), z.len())?;
    check_dim(components.len(), weights.len())?;
    let mut r = z.to_vec();
    for (comp, &w) in components.iter().zip(weights) {
        let atom = comp.sketch(freqs)?;
        for (ri, ai) in r.iter_mut().zip(&atom) {
            *ri -= ai * w;
        }
    }
    Ok(r)
}

pub(crate) fn residual_from_atoms(z: &[Complex64], atoms: &[Vec<Complex64>], weights: &[f64]) -> Vec<Complex64> {
    let mut r = z.to_vec();
    for (atom, &w) in atoms.iter().zip(weights) {
        for (ri, ai) in r.iter_mut().zip(atom) {
            *ri -= ai * w;
        }
    }
    r
}

pub(crate) fn check_inputs(z: &Sketch, freqs: &FrequencyMatrix, cfg: &DecoderConfig, domain: &BoxDomain) -> Result<()> {
    if z.freq_id != freqs.id() {
        return Err(Error::FrequencyMismatch(z.freq_id.clone(), freqs.id().to_string()));
    }
    check_dim(freqs.m(), z.values.len())?;
    check_dim(freqs.dim(), domain.dim())?;
    cfg.validate()
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    l2_norm(v)
}
