//! Parameter sweeps over sketch size, bandwidth, restarts, decoders and models.
//!
//! One job is a `(m, sigma, seed)` triple: its frequencies and sketch are built
//! once and every decoder configuration of the sweep is run on it. The row
//! seed is used both for the frequency draw and for the decoder's restarts,
//! so any row can be reproduced with `sketch` + `decode`.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{lloyd_report, mse, Centroids, LloydReport, DEFAULT_LLOYD_ITERS, DEFAULT_N_INIT};
use crate::data::Dataset;
use crate::datagen::{gen_gmm, make_ring_spec, make_separated_spec, GmmSpec};
use crate::decoders::{clompr, proposed_decoder, BoxDomain, DecoderConfig, DecoderResult, Model, SearchStrategy};
use crate::error::{Error, Result};
use crate::io;
use crate::sketch::{sample_frequencies, sketch_dataset, FrequencyMatrix, Sketch};

/// Environment variable bounding the sweep worker pool.
pub const THREADS_ENV: &str = "CSKIT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    Clompr,
    ProposedGrid,
    ProposedMeanshift,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Clompr => "clompr",
            DecoderKind::ProposedGrid => "proposed-grid",
            DecoderKind::ProposedMeanshift => "proposed-meanshift",
        }
    }
}

impl std::fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clompr" => Ok(DecoderKind::Clompr),
            "proposed-grid" => Ok(DecoderKind::ProposedGrid),
            "proposed-meanshift" => Ok(DecoderKind::ProposedMeanshift),
            other => Err(Error::InvalidParameter(format!(
                "unknown decoder {other:?} (expected clompr, proposed-grid or proposed-meanshift)"
            ))),
        }
    }
}

/// Runs the decoder matching `cfg`: CL-OMPR for [`DecoderKind::Clompr`], the
/// proposed decoder otherwise.
pub fn decode(
    kind: DecoderKind,
    z: &Sketch,
    freqs: &FrequencyMatrix,
    cfg: &DecoderConfig,
    domain: &BoxDomain,
) -> Result<DecoderResult> {
    match kind {
        DecoderKind::Clompr => clompr(z, freqs, cfg, domain),
        DecoderKind::ProposedGrid | DecoderKind::ProposedMeanshift => proposed_decoder(z, freqs, cfg, domain),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecSource {
    Separated { k: usize, d: usize, seed: u64 },
    Ring { k: usize, d: usize, std: f64, spacing: f64 },
    Inline(GmmSpec),
    File(PathBuf),
}

impl SpecSource {
    pub fn build(&self) -> Result<GmmSpec> {
        match self {
            SpecSource::Separated { k, d, seed } => make_separated_spec(*k, *d, *seed),
            SpecSource::Ring { k, d, std, spacing } => make_ring_spec(*k, *d, *std, *spacing),
            SpecSource::Inline(spec) => {
                spec.validate()?;
                Ok(spec.clone())
            }
            SpecSource::File(path) => GmmSpec::load(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Generate { spec: SpecSource, n: usize, seed: u64 },
    File(PathBuf),
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Generate { spec, n, seed } => Ok(gen_gmm(&spec.build()?, *n, *seed)?.0),
            DatasetSource::File(path) => io::load_dataset(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LloydSettings {
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_lloyd_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_init() -> usize {
    DEFAULT_N_INIT
}

fn default_lloyd_iters() -> usize {
    DEFAULT_LLOYD_ITERS
}

impl Default for LloydSettings {
    fn default() -> Self {
        Self {
            n_init: DEFAULT_N_INIT,
            max_iters: DEFAULT_LLOYD_ITERS,
            seed: 0,
        }
    }
}

/// Search used by CL-OMPR rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClomprSearch {
    /// One plain gradient-ascent start per iteration; the `restarts` list is
    /// not swept.
    #[default]
    GradientAscent,
    /// Sketched mean shift with every value of the `restarts` list.
    MeanShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub k: usize,
    /// Number of greedy iterations; defaults to `2k`.
    #[serde(default)]
    pub t: Option<usize>,
    pub m: Vec<usize>,
    pub sigma: Vec<f64>,
    /// Mean-shift restart counts `L`.
    #[serde(default = "default_restarts")]
    pub restarts: Vec<usize>,
    pub decoders: Vec<DecoderKind>,
    #[serde(default = "default_models")]
    pub models: Vec<Model>,
    /// Sketch seeds, one repetition each.
    pub seeds: Vec<u64>,
    #[serde(default = "default_grid_points")]
    pub grid_points_per_axis: usize,
    #[serde(default)]
    pub clompr_search: ClomprSearch,
    /// Search domain; defaults to `[-1, 1]^d`.
    #[serde(default)]
    pub domain: Option<BoxDomain>,
    #[serde(default)]
    pub lloyd: LloydSettings,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_restarts() -> Vec<usize> {
    vec![100]
}

fn default_models() -> Vec<Model> {
    vec![Model::Dirac]
}

fn default_grid_points() -> usize {
    101
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn t(&self) -> usize {
        self.t.unwrap_or(2 * self.k)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str, len: usize| -> Result<()> {
            if len == 0 {
                Err(Error::InvalidParameter(format!("sweep list `{name}` must be nonempty")))
            } else {
                Ok(())
            }
        };
        empty("m", self.m.len())?;
        empty("sigma", self.sigma.len())?;
        empty("restarts", self.restarts.len())?;
        empty("decoders", self.decoders.len())?;
        empty("models", self.models.len())?;
        empty("seeds", self.seeds.len())?;
        if self.m.contains(&0) {
            return Err(Error::InvalidParameter("sketch sizes m must be >= 1".into()));
        }
        if self.sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidParameter("bandwidths sigma must be > 0".into()));
        }
        if self.restarts.contains(&0) {
            return Err(Error::InvalidParameter("restarts L must be >= 1".into()));
        }
        if self.lloyd.n_init == 0 || self.lloyd.max_iters == 0 {
            return Err(Error::InvalidParameter("lloyd n_init and max_iters must be >= 1".into()));
        }
        for job in self.decoder_jobs() {
            job.config(0).validate()?;
        }
        Ok(())
    }

    /// Decoder configurations run on every sketch, in a fixed order.
    pub fn decoder_jobs(&self) -> Vec<DecoderJob> {
        let (k, t) = (self.k, self.t());
        let mut jobs = Vec::new();
        for &decoder in &self.decoders {
            for &model in &self.models {
                match decoder {
                    // CL-OMPR fits Diracs only
                    DecoderKind::Clompr if model != Model::Dirac => {}
                    DecoderKind::Clompr => match self.clompr_search {
                        ClomprSearch::GradientAscent => jobs.push(DecoderJob {
                            decoder,
                            model,
                            k,
                            t,
                            search: SearchStrategy::gradient_ascent(1),
                        }),
                        ClomprSearch::MeanShift => jobs.extend(self.restarts.iter().map(|&l| DecoderJob {
                            decoder,
                            model,
                            k,
                            t,
                            search: SearchStrategy::mean_shift(l),
                        })),
                    },
                    DecoderKind::ProposedGrid => jobs.push(DecoderJob {
                        decoder,
                        model,
                        k,
                        t,
                        search: SearchStrategy::grid(self.grid_points_per_axis),
                    }),
                    DecoderKind::ProposedMeanshift => jobs.extend(self.restarts.iter().map(|&l| DecoderJob {
                        decoder,
                        model,
                        k,
                        t,
                        search: SearchStrategy::mean_shift(l),
                    })),
                }
            }
        }
        jobs
    }
}

/// One decoder configuration of a sweep, without its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderJob {
    pub decoder: DecoderKind,
    pub model: Model,
    pub k: usize,
    pub t: usize,
    pub search: SearchStrategy,
}

impl DecoderJob {
    pub fn config(&self, seed: u64) -> DecoderConfig {
        DecoderConfig {
            k: self.k,
            t: self.t,
            model: self.model,
            search: self.search.clone(),
            seed,
            finetune: self.decoder == DecoderKind::Clompr,
        }
    }
}

/// One line of the sweep CSV. Metric fields are empty when `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub decoder: DecoderKind,
    pub model: Model,
    pub search: String,
    pub m: usize,
    pub sigma: f64,
    #[serde(rename = "L")]
    pub restarts: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub k: usize,
    pub seed: u64,
    pub mse: Option<f64>,
    pub rse: Option<f64>,
    pub residual_norm: Option<f64>,
    pub runtime_ms: f64,
    pub error: String,
}

/// Deterministic output order: decoder, model, search, m, sigma, L, seed.
fn cmp_rows(a: &SweepRow, b: &SweepRow) -> std::cmp::Ordering {
    a.decoder
        .cmp(&b.decoder)
        .then(a.model.cmp(&b.model))
        .then(a.search.cmp(&b.search))
        .then(a.m.cmp(&b.m))
        .then(a.sigma.total_cmp(&b.sigma))
        .then(a.restarts.cmp(&b.restarts))
        .then(a.seed.cmp(&b.seed))
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub lloyd: LloydReport,
}

/// Worker count from `CSKIT_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidParameter(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs every job of the sweep on `data`. Row failures are recorded in the
/// `error` column; only configuration and Lloyd failures abort the sweep.
pub fn run_sweep(cfg: &ExperimentConfig, data: &Dataset, threads: Option<usize>) -> Result<SweepOutput> {
    cfg.validate()?;
    let domain = match &cfg.domain {
        Some(b) => b.clone(),
        None => BoxDomain::cube(data.dim(), -1.0, 1.0)?,
    };
    if domain.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: domain.dim(),
        });
    }
    let lloyd = lloyd_report(data, cfg.k, cfg.lloyd.n_init, cfg.lloyd.seed, cfg.lloyd.max_iters)?;
    let reference_mse = lloyd.mse;
    let jobs = cfg.decoder_jobs();
    let mut triples = Vec::new();
    for &m in &cfg.m {
        for &sigma in &cfg.sigma {
            for &seed in &cfg.seeds {
                triples.push((m, sigma, seed));
            }
        }
    }

    let rows = Mutex::new(Vec::with_capacity(triples.len() * jobs.len()));
    let work = || {
        triples.par_iter().for_each(|&(m, sigma, seed)| {
            let done = run_triple(data, &domain, &jobs, m, sigma, seed, reference_mse);
            rows.lock().expect("row sink poisoned").extend(done);
        })
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?
            .install(work),
        None => work(),
    }
    let mut rows = rows.into_inner().expect("row sink poisoned");
    rows.sort_by(cmp_rows);
    Ok(SweepOutput { rows, lloyd })
}

fn run_triple(
    data: &Dataset,
    domain: &BoxDomain,
    jobs: &[DecoderJob],
    m: usize,
    sigma: f64,
    seed: u64,
    reference_mse: f64,
) -> Vec<SweepRow> {
    let sketched = sample_frequencies(data.dim(), m, sigma, seed)
        .and_then(|freqs| sketch_dataset(data, &freqs).map(|z| (freqs, z)));
    jobs.iter()
        .map(|job| {
            let mut row = SweepRow {
                decoder: job.decoder,
                model: job.model,
                search: job.search.name().to_string(),
                m,
                sigma,
                restarts: job.search.restarts(),
                t: job.t,
                k: job.k,
                seed,
                mse: None,
                rse: None,
                residual_norm: None,
                runtime_ms: 0.0,
                error: String::new(),
            };
            let (freqs, z) = match &sketched {
                Ok(v) => v,
                Err(e) => {
                    row.error = e.to_string();
                    return row;
                }
            };
            let start = Instant::now();
            let decoded = decode(job.decoder, z, freqs, &job.config(seed), domain);
            row.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let scored = decoded.and_then(|res| {
                let c = Centroids::new(res.centers())?;
                let e = mse(&c, data)?;
                Ok((e, res.residual_norm))
            });
            match scored {
                Ok((e, r)) => {
                    row.mse = Some(e);
                    row.rse = Some(e / reference_mse);
                    row.residual_norm = Some(r);
                }
                Err(e) => row.error = e.to_string(),
            }
            row
        })
        .collect()
}

pub fn write_rows<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::InvalidParameter(format!("cannot write sweep row: {e}")))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: PathBuf::from("<sweep output>"),
        source: e,
    })
}

pub fn save_rows(rows: &[SweepRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    write_rows(rows, std::io::BufWriter::new(file))
}

pub fn load_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| Error::Format {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Decoder output file: the fitted mixture plus everything needed to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub decoder: DecoderKind,
    pub seed: u64,
    pub freq_id: String,
    pub m: usize,
    pub sigma: f64,
    pub domain: BoxDomain,
    /// The configuration as given; the resolved search is in `search`.
    pub config: DecoderConfig,
    #[serde(flatten)]
    pub result: DecoderResult,
}

impl DecodeReport {
    pub fn new(
        decoder: DecoderKind,
        cfg: &DecoderConfig,
        freqs: &FrequencyMatrix,
        domain: &BoxDomain,
        result: DecoderResult,
    ) -> Self {
        Self {
            decoder,
            seed: cfg.seed,
            freq_id: freqs.id().to_string(),
            m: freqs.m(),
            sigma: freqs.sigma(),
            domain: domain.clone(),
            config: cfg.clone(),
            result,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSource::Generate {
                spec: SpecSource::Separated { k: 2, d: 2, seed: 1 },
                n: 300,
                seed: 2,
            },
            k: 2,
            t: None,
            m: vec![50],
            sigma: vec![0.2],
            restarts: vec![5],
            decoders: vec![DecoderKind::ProposedMeanshift],
            models: vec![Model::Dirac],
            seeds: vec![7],
            grid_points_per_axis: 21,
            clompr_search: ClomprSearch::GradientAscent,
            domain: None,
            lloyd: LloydSettings::default(),
            output: None,
        }
    }

    #[test]
    fn one_by_one_sweep() {
        let cfg = small_config();
        let data = cfg.dataset.load().unwrap();
        let out = run_sweep(&cfg, &data, Some(1)).unwrap();
        assert_eq!(out.rows.len(), 1);
        let row = &out.rows[0];
        assert!(row.error.is_empty(), "{}", row.error);
        assert_eq!(row.t, 4);
        assert_eq!(row.restarts, 5);
        let mut buf = Vec::new();
        write_rows(&out.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(
            "decoder,model,search,m,sigma,L,T,k,seed,mse,rse,residual_norm,runtime_ms,error"
        ));
    }

    #[test]
    fn failing_rows_are_recorded() {
        let mut cfg = small_config();
        cfg.decoders = vec![DecoderKind::ProposedGrid];
        cfg.grid_points_per_axis = 20_000;
        let data = cfg.dataset.load().unwrap();
        let out = run_sweep(&cfg, &data, None).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!(out.rows[0].error.contains("mean-shift"));
        assert!(out.rows[0].mse.is_none());
    }

    #[test]
    fn empty_lists_are_rejected() {
        let mut cfg = small_config();
        cfg.sigma.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.t = Some(1);
        assert!(cfg.validate().unwrap_err().to_string().contains("T >= k"));
    }

    #[test]
    fn clompr_skips_gaussian_model() {
        let mut cfg = small_config();
        cfg.decoders = vec![DecoderKind::Clompr, DecoderKind::ProposedMeanshift];
        cfg.models = vec![Model::Dirac, Model::Gaussian];
        cfg.restarts = vec![1, 10];
        let jobs = cfg.decoder_jobs();
        assert_eq!(jobs.len(), 1 + 4);
        assert!(jobs.iter().all(|j| j.decoder != DecoderKind::Clompr || j.model == Model::Dirac));
    }
}
