use num_complex::Complex64;

use super::{
    check_inputs, estimate_sigma, get_local_maximum, hard_threshold, nnls_weights, norm, residual_from_atoms,
    BoxDomain, Component, DecoderConfig, DecoderResult, IterationTrace, Model,
};
use crate::correlation::CorrelationFn;
use crate::error::Result;
use crate::sketch::{FrequencyMatrix, Sketch};

/// Greedy decoder that collects `cfg.t` candidates before thresholding.
///
/// Every iteration maximizes the residual correlation with `cfg.search`, adds
/// a Dirac (or, for the Gaussian model, a Gaussian whose covariance is
/// estimated from the full-sketch correlation), re-projects the sketch onto
/// all candidates with non-negative weights and updates the residual. The `k`
/// heaviest candidates are returned; there is no joint refinement.
pub fn proposed_decoder(
    z: &Sketch,
    freqs: &FrequencyMatrix,
    cfg: &DecoderConfig,
    domain: &BoxDomain,
) -> Result<DecoderResult> {
    check_inputs(z, freqs, cfg, domain)?;
    let search = cfg.search.resolve(freqs.sigma(), domain);
    let zv = &z.values;
    let full = CorrelationFn::new(zv, freqs)?;
    let mut r = zv.clone();
    let mut components: Vec<Component> = Vec::with_capacity(cfg.t);
    let mut atoms: Vec<Vec<Complex64>> = Vec::with_capacity(cfg.t);
    let mut alpha: Vec<f64> = Vec::new();
    let mut trace = Vec::with_capacity(cfg.t);

    for i in 0..cfg.t {
        let f = CorrelationFn::new(&r, freqs)?;
        let found = get_local_maximum(&f, domain, &search, cfg.seed, i as u64)?;
        let comp = match cfg.model {
            Model::Dirac => Component::dirac(found.point.clone()),
            Model::Gaussian => {
                let cov = estimate_sigma(&full, &found.point, freqs.sigma());
                Component::from_estimate(found.point.clone(), cov)
            }
        };
        atoms.push(comp.sketch(freqs)?);
        let kind = comp.kind;
        components.push(comp);
        alpha = nnls_weights(zv, &atoms);
        r = residual_from_atoms(zv, &atoms, &alpha);
        trace.push(IterationTrace {
            iteration: i,
            center: found.point,
            f_value: found.value,
            winner: found.winner,
            search_iters: found.work,
            kind,
            support_size: components.len(),
            residual_norm: norm(&r),
        });
    }

    let (components, weights, idx) = if components.len() > cfg.k {
        hard_threshold(&components, &alpha, cfg.k)?
    } else {
        let idx = (0..components.len()).collect();
        (components, alpha, idx)
    };
    let kept: Vec<Vec<Complex64>> = idx.iter().map(|&i| atoms[i].clone()).collect();
    let residual_norm = norm(&residual_from_atoms(zv, &kept, &weights));
    Ok(DecoderResult {
        components,
        weights,
        residual_norm,
        search,
        trace,
    })
}
