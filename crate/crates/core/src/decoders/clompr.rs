use num_complex::Complex64;

use super::{
    check_inputs, get_local_maximum, hard_threshold, joint_finetune, nnls_weights, norm, residual_from_atoms,
    BoxDomain, Component, ComponentKind, DecoderConfig, DecoderResult, IterationTrace, Model,
};
use crate::correlation::CorrelationFn;
use crate::error::{Error, Result};
use crate::sketch::{sketch_dirac, FrequencyMatrix, Sketch};

/// CL-OMPR: orthogonal matching pursuit with replacement over Dirac atoms.
///
/// Each of the `cfg.t` iterations selects a maximizer of the residual
/// correlation, grows the support, thresholds back to `k` atoms (ranking by
/// the weights of the normalized atoms) once the support exceeds `k`, projects
/// the sketch onto the support and, if `cfg.finetune`, refines centers and
/// weights jointly.
pub fn clompr(z: &Sketch, freqs: &FrequencyMatrix, cfg: &DecoderConfig, domain: &BoxDomain) -> Result<DecoderResult> {
    check_inputs(z, freqs, cfg, domain)?;
    if cfg.model != Model::Dirac {
        return Err(Error::InvalidParameter("CL-OMPR fits Dirac mixtures only (model = dirac)".into()));
    }
    let search = cfg.search.resolve(freqs.sigma(), domain);
    let zv = &z.values;
    let mut r = zv.clone();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(cfg.k + 1);
    let mut atoms: Vec<Vec<Complex64>> = Vec::with_capacity(cfg.k + 1);
    let mut alpha: Vec<f64> = Vec::new();
    let mut trace = Vec::with_capacity(cfg.t);

    for t in 0..cfg.t {
        let f = CorrelationFn::new(&r, freqs)?;
        let found = get_local_maximum(&f, domain, &search, cfg.seed, t as u64)?;
        atoms.push(sketch_dirac(&found.point, freqs)?);
        centers.push(found.point.clone());

        if centers.len() > cfg.k {
            let normalized: Vec<Vec<Complex64>> = atoms
                .iter()
                .map(|a| {
                    let n = norm(a);
                    a.iter().map(|v| v / n).collect()
                })
                .collect();
            let beta = nnls_weights(zv, &normalized);
            let (kept, _, idx) = hard_threshold(&centers, &beta, cfg.k)?;
            centers = kept;
            atoms = idx.iter().map(|&i| atoms[i].clone()).collect();
        }

        alpha = nnls_weights(zv, &atoms);
        if cfg.finetune {
            let tuned = joint_finetune(zv, &centers, &alpha, freqs, domain)?;
            centers = tuned.centers;
            alpha = tuned.weights;
            atoms = centers
                .iter()
                .map(|c| sketch_dirac(c, freqs))
                .collect::<Result<_>>()?;
        }
        r = residual_from_atoms(zv, &atoms, &alpha);
        trace.push(IterationTrace {
            iteration: t,
            center: found.point,
            f_value: found.value,
            winner: found.winner,
            search_iters: found.work,
            kind: ComponentKind::Dirac,
            support_size: centers.len(),
            residual_norm: norm(&r),
        });
    }

    let components: Vec<Component> = centers.into_iter().map(Component::dirac).collect();
    let residual_norm = norm(&residual_from_atoms(zv, &atoms, &alpha));
    Ok(DecoderResult {
        components,
        weights: alpha,
        residual_norm,
        search,
        trace,
    })
}
