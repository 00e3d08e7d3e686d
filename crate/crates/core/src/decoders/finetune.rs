//! Joint refinement of Dirac centers and weights.
//!
//! Minimizes `F(C, a) = |z - sum_i a_i Phi(c_i)|^2` over centers in the box and
//! non-negative weights with a projected limited-memory BFGS iteration and an
//! Armijo backtracking search along the projected path.

use std::collections::VecDeque;

use num_complex::Complex64;

use super::BoxDomain;
use crate::data::dot;
use crate::trig;
use crate::error::{check_dim, Result};
use crate::sketch::{feature_map, FrequencyMatrix};

pub const FINETUNE_MAX_ITERS: usize = 200;
pub const FINETUNE_GRAD_TOL: f64 = 1e-8;
const MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneReport {
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Squared residual norm before and after.
    pub objective_before: f64,
    pub objective_after: f64,
    pub iterations: usize,
}

struct Problem<'a> {
    z: &'a [Complex64],
    freqs: &'a FrequencyMatrix,
    k: usize,
    d: usize,
}

impl Problem<'_> {
    /// Parameters are `[c_1 .. c_k, a_1 .. a_k]`.
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (k, d) = (self.k, self.d);
        let m = self.freqs.m();
        let scale = 1.0 / (m as f64).sqrt();
        let mut atoms = vec![Complex64::new(0.0, 0.0); k * m];
        let mut r = self.z.to_vec();
        for i in 0..k {
            let c = &x[i * d..(i + 1) * d];
            let a = x[k * d + i];
            for (j, w) in self.freqs.rows().enumerate() {
                let (s, co) = trig::sin_cos(dot(w, c));
                let atom = Complex64::new(scale * co, scale * s);
                atoms[i * m + j] = atom;
                r[j] -= atom * a;
            }
        }
        let obj: f64 = r.iter().map(|v| v.norm_sqr()).sum();
        let mut grad = vec![0.0; x.len()];
        for i in 0..k {
            let a = x[k * d + i];
            let mut ga = 0.0;
            let gc = &mut grad[i * d..(i + 1) * d];
            for (j, w) in self.freqs.rows().enumerate() {
                let prod = r[j] * atoms[i * m + j].conj();
                ga += prod.re;
                let t = -2.0 * a * prod.im;
                for (g, wp) in gc.iter_mut().zip(w) {
                    *g += t * wp;
                }
            }
            grad[k * d + i] = -2.0 * ga;
        }
        (obj, grad)
    }
}

struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    fn project(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        x.iter()
            .zip(g)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|((xi, gi), (l, u))| ((xi - gi).clamp(*l, *u) - xi).abs())
            .fold(0.0, f64::max)
    }

    fn free_mask(&self, x: &[f64], g: &[f64]) -> Vec<bool> {
        x.iter()
            .zip(g)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|((xi, gi), (l, u))| !((*xi <= *l && *gi > 0.0) || (*xi >= *u && *gi < 0.0)))
            .collect()
    }
}

fn masked(v: &[f64], mask: &[bool]) -> Vec<f64> {
    v.iter().zip(mask).map(|(x, &f)| if f { *x } else { 0.0 }).collect()
}

/// Two-loop recursion applied to `g` restricted to the free variables.
fn lbfgs_direction(g: &[f64], mask: &[bool], memory: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut q = masked(g, mask);
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y) in memory.iter().rev() {
        let (s, y) = (masked(s, mask), masked(y, mask));
        let sy = dot(&s, &y);
        if sy <= 0.0 {
            alphas.push(0.0);
            continue;
        }
        let a = dot(&s, &q) / sy;
        q.iter_mut().zip(&y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y)) = memory.back() {
        let (s, y) = (masked(s, mask), masked(y, mask));
        let yy = dot(&y, &y);
        let sy = dot(&s, &y);
        if yy > 0.0 && sy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y), a) in memory.iter().zip(alphas.iter().rev()) {
        let (s, y) = (masked(s, mask), masked(y, mask));
        let sy = dot(&s, &y);
        if sy <= 0.0 {
            continue;
        }
        let b = dot(&y, &q) / sy;
        q.iter_mut().zip(&s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    masked(&q, mask).iter().map(|v| -v).collect()
}

/// Refines `(centers, weights)` by descending `|z - sum a_i Phi(c_i)|^2`.
/// Never returns a worse objective than the (projected) input.
pub fn joint_finetune(
    z: &[Complex64],
    centers: &[Vec<f64>],
    weights: &[f64],
    freqs: &FrequencyMatrix,
    domain: &BoxDomain,
) -> Result<FinetuneReport> {
    check_dim(freqs.m(), z.len())?;
    check_dim(centers.len(), weights.len())?;
    check_dim(freqs.dim(), domain.dim())?;
    for c in centers {
        feature_map(c, freqs)?;
    }
    let (k, d) = (centers.len(), freqs.dim());
    let problem = Problem { z, freqs, k, d };
    let mut lower = Vec::with_capacity(k * (d + 1));
    let mut upper = Vec::with_capacity(k * (d + 1));
    let mut x = Vec::with_capacity(k * (d + 1));
    for c in centers {
        lower.extend_from_slice(domain.lower());
        upper.extend_from_slice(domain.upper());
        x.extend_from_slice(c);
    }
    lower.extend(std::iter::repeat_n(0.0, k));
    upper.extend(std::iter::repeat_n(f64::INFINITY, k));
    x.extend_from_slice(weights);
    let bounds = Bounds { lower, upper };
    bounds.project(&mut x);

    let (mut fx, mut g) = problem.eval(&x);
    let objective_before = fx;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    let mut iterations = 0;

    while iterations < FINETUNE_MAX_ITERS {
        if bounds.projected_gradient_norm(&x, &g) <= FINETUNE_GRAD_TOL {
            break;
        }
        let mask = bounds.free_mask(&x, &g);
        let mut dir = lbfgs_direction(&g, &mask, &memory);
        if dot(&dir, &g) >= 0.0 {
            memory.clear();
            dir = masked(&g, &mask).iter().map(|v| -v).collect();
        }
        let mut t = if memory.is_empty() {
            1.0 / dir.iter().map(|v| v.abs()).fold(1.0, f64::max)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut xt: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            bounds.project(&mut xt);
            let (ft, gt) = problem.eval(&xt);
            let decrease: f64 = g.iter().zip(xt.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if ft <= fx && ft <= fx + ARMIJO * decrease.min(0.0) {
                accepted = Some((xt, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else { break };
        iterations += 1;
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y));
        }
        let improvement = fx - ft;
        x = xt;
        fx = ft;
        g = gt;
        if improvement <= f64::EPSILON * fx.max(f64::MIN_POSITIVE) && improvement == 0.0 {
            break;
        }
    }

    Ok(FinetuneReport {
        centers: x[..k * d].chunks(d).map(<[f64]>::to_vec).collect(),
        weights: x[k * d..].to_vec(),
        objective_before,
        objective_after: fx,
        iterations,
    })
}
