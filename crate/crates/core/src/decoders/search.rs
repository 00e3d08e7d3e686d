//! `GetLocalMaximum`: grid scan, sketched mean shift and plain gradient ascent.

use rayon::prelude::*;

use super::{AscentParams, BoxDomain, SearchStrategy};
use crate::correlation::SmoothField;
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_GRID_CAP: usize = 10_000_000;

/// Trajectories stop once `|f| < F_FLOOR_REL * scale` (degenerate reweighting).
const F_FLOOR_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMaximum {
    pub point: Vec<f64>,
    pub value: f64,
    /// Winning restart index, `None` for the grid.
    pub winner: Option<usize>,
    /// Total ascent iterations (or grid nodes) evaluated.
    pub work: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIters,
    /// `|f|` fell below the floor; the trajectory halts where it is.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub point: Vec<f64>,
    pub value: f64,
    pub iters: usize,
    pub stop: StopReason,
}

/// Iterates `c <- P(c + step(c) * grad f(c))` from `start`.
///
/// With `reweight` the step is `eta / |f(c)|` (sketched mean shift), otherwise
/// the constant `eta`. When a proposed update moves less than `tol` the
/// current point is returned as converged.
pub fn run_trajectory<F: SmoothField + ?Sized>(
    f: &F,
    domain: &BoxDomain,
    start: Vec<f64>,
    eta: f64,
    reweight: bool,
    max_iters: usize,
    tol: f64,
) -> Trajectory {
    let floor = F_FLOOR_REL * f.scale();
    let mut c = start;
    let mut next = c.clone();
    let mut stop = StopReason::MaxIters;
    let mut iters = 0;
    let mut last_value = None;
    while iters < max_iters {
        let (v, g) = f.value_and_gradient(&c);
        if reweight && (v.abs() < floor || v == 0.0 || !v.is_finite()) {
            stop = StopReason::Degenerate;
            last_value = Some(v);
            break;
        }
        let step = if reweight { eta / v.abs() } else { eta };
        for ((n, ci), gi) in next.iter_mut().zip(&c).zip(&g) {
            *n = ci + step * gi;
        }
        domain.project(&mut next);
        iters += 1;
        let moved = next
            .iter()
            .zip(&c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if moved <= tol {
            stop = StopReason::Converged;
            last_value = Some(v);
            break;
        }
        std::mem::swap(&mut c, &mut next);
    }
    let value = last_value.unwrap_or_else(|| f.value(&c));
    Trajectory {
        point: c,
        value,
        iters,
        stop,
    }
}

/// Best grid node of `points_per_axis^d` nodes spanning the box (endpoints
/// included). Ties go to the lowest lexicographic node index.
pub fn get_local_maximum_grid<F: SmoothField + Sync + ?Sized>(
    f: &F,
    domain: &BoxDomain,
    points_per_axis: usize,
    max_nodes: usize,
) -> Result<LocalMaximum> {
    if points_per_axis < 2 {
        return Err(Error::InvalidParameter("grid needs at least 2 points per axis".into()));
    }
    let d = domain.dim();
    let nodes = (points_per_axis as f64).powi(d as i32);
    if nodes > max_nodes as f64 {
        return Err(Error::GridTooLarge { nodes, cap: max_nodes });
    }
    let total = points_per_axis.pow(d as u32);
    let node = |mut idx: usize| -> Vec<f64> {
        let mut x = vec![0.0; d];
        for axis in (0..d).rev() {
            let i = idx % points_per_axis;
            idx /= points_per_axis;
            let (l, u) = (domain.lower()[axis], domain.upper()[axis]);
            x[axis] = if i + 1 == points_per_axis {
                u
            } else {
                l + (u - l) * i as f64 / (points_per_axis - 1) as f64
            };
        }
        x
    };
    let (best_idx, best_val) = (0..total)
        .into_par_iter()
        .map(|idx| (idx, f.value(&node(idx))))
        .reduce(
            || (usize::MAX, f64::NEG_INFINITY),
            |a, b| if better(b.1, b.0, a.1, a.0) { b } else { a },
        );
    Ok(LocalMaximum {
        point: node(best_idx),
        value: best_val,
        winner: None,
        work: total,
    })
}

/// `(value, index)` ordering: larger value wins, ties go to the lower index.
/// NaN never wins.
fn better(v: f64, i: usize, best_v: f64, best_i: usize) -> bool {
    v > best_v || (v == best_v && i < best_i) || (best_v.is_nan() && !v.is_nan())
}

fn best_of_restarts<F: SmoothField + Sync + ?Sized>(
    f: &F,
    domain: &BoxDomain,
    params: &AscentParams,
    reweight: bool,
    eta: f64,
    seed: u64,
    call: u64,
) -> LocalMaximum {
    let tol = params.tol.unwrap_or(1e-6 * domain.diameter());
    let runs: Vec<Trajectory> = (0..params.restarts)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng::substream(seed, call, j as u64);
            let start = domain.sample_uniform(&mut rng);
            run_trajectory(f, domain, start, eta, reweight, params.max_iters, tol)
        })
        .collect();
    let work = runs.iter().map(|t| t.iters).sum();
    let mut best = 0;
    for (j, t) in runs.iter().enumerate().skip(1) {
        if better(t.value, j, runs[best].value, best) {
            best = j;
        }
    }
    let t = &runs[best];
    LocalMaximum {
        point: t.point.clone(),
        value: t.value,
        winner: Some(best),
        work,
    }
}

/// Sketched mean shift from `L` uniform starts; returns the terminal point
/// with the largest `f`, ties broken by restart index.
///
/// Restart `j` draws its start from the stream `(seed, call, j)`, so the
/// result does not depend on how restarts are scheduled across threads.
/// `params.eta` must be resolved (see [`SearchStrategy::resolve`]).
pub fn get_local_maximum_meanshift<F: SmoothField + Sync + ?Sized>(
    f: &F,
    domain: &BoxDomain,
    params: &AscentParams,
    seed: u64,
    call: u64,
) -> Result<LocalMaximum> {
    params.validate()?;
    let eta = params
        .eta
        .ok_or_else(|| Error::InvalidParameter("mean-shift step eta not resolved".into()))?;
    Ok(best_of_restarts(f, domain, params, true, eta, seed, call))
}

/// Plain projected gradient ascent with step `eta / scale(f)`.
pub fn gradient_ascent<F: SmoothField + Sync + ?Sized>(
    f: &F,
    domain: &BoxDomain,
    params: &AscentParams,
    seed: u64,
    call: u64,
) -> Result<LocalMaximum> {
    params.validate()?;
    let eta = params
        .eta
        .ok_or_else(|| Error::InvalidParameter("gradient-ascent step not resolved".into()))?;
    let scale = f.scale();
    let step = if scale > 0.0 { eta / scale } else { eta };
    Ok(best_of_restarts(f, domain, params, false, step, seed, call))
}

/// Dispatches on a resolved [`SearchStrategy`].
pub fn get_local_maximum<F: SmoothField + Sync + ?Sized>(
    f: &F,
    domain: &BoxDomain,
    search: &SearchStrategy,
    seed: u64,
    call: u64,
) -> Result<LocalMaximum> {
    match search {
        SearchStrategy::Grid {
            points_per_axis,
            max_nodes,
        } => get_local_maximum_grid(f, domain, *points_per_axis, *max_nodes),
        SearchStrategy::MeanShift(p) => get_local_maximum_meanshift(f, domain, p, seed, call),
        SearchStrategy::GradientAscent(p) => gradient_ascent(f, domain, p, seed, call),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::CorrelationFn;
    use crate::sketch::{feature_map, sample_frequencies, FrequencyMatrix};
    use num_complex::Complex64;

    #[test]
    fn grid_finds_atom_on_node() {
        let freqs = sample_frequencies(2, 200, 0.2, 3).unwrap();
        let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        // 11 points per axis: nodes at multiples of 0.2
        let c = [0.4, -0.6];
        let r = feature_map(&c, &freqs).unwrap();
        let f = CorrelationFn::new(&r, &freqs).unwrap();
        let best = get_local_maximum_grid(&f, &domain, 11, DEFAULT_GRID_CAP).unwrap();
        assert!((best.point[0] - 0.4).abs() < 1e-12 && (best.point[1] + 0.6).abs() < 1e-12);
        assert!((best.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_tie_goes_to_first_node() {
        let freqs = sample_frequencies(2, 8, 0.2, 3).unwrap();
        let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let f = CorrelationFn::new(&[Complex64::new(0.0, 0.0); 8], &freqs).unwrap();
        let best = get_local_maximum_grid(&f, &domain, 5, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(best.point, vec![-1.0, -1.0]);
    }

    #[test]
    fn grid_cap() {
        let freqs = sample_frequencies(8, 8, 0.2, 3).unwrap();
        let domain = BoxDomain::cube(8, -1.0, 1.0).unwrap();
        let f = CorrelationFn::new(&[Complex64::new(0.0, 0.0); 8], &freqs).unwrap();
        let err = get_local_maximum_grid(&f, &domain, 10, DEFAULT_GRID_CAP).unwrap_err();
        assert!(err.to_string().contains("mean-shift"));
        assert!(get_local_maximum_grid(&f, &domain, 1, DEFAULT_GRID_CAP).is_err());
    }

    #[test]
    fn stationary_start_stays() {
        let freqs = sample_frequencies(2, 100, 0.2, 1).unwrap();
        let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let c = vec![0.1, 0.2];
        let f = CorrelationFn::new(&feature_map(&c, &freqs).unwrap(), &freqs).unwrap();
        let t = run_trajectory(&f, &domain, c.clone(), 0.02, true, 300, 1e-9);
        assert_eq!(t.stop, StopReason::Converged);
        assert_eq!(t.iters, 1);
        assert!(t.point.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn steps_leaving_the_box_are_clamped() {
        // one frequency along x: f(x) = cos(pi (x - 0.9)) peaks at 0.9; starting
        // at 0.5 with a huge step overshoots past the upper bound 0.6.
        let freqs = FrequencyMatrix::from_parts(1, 2, 1.0, 0, vec![std::f64::consts::PI, 0.0]).unwrap();
        let r = feature_map(&[0.9, 0.0], &freqs).unwrap();
        let f = CorrelationFn::new(&r, &freqs).unwrap();
        let domain = BoxDomain::new(vec![-1.0, -1.0], vec![0.6, 1.0]).unwrap();
        let t = run_trajectory(&f, &domain, vec![0.5, 0.3], 10.0, true, 1, 1e-12);
        assert_eq!(t.point, vec![0.6, 0.3]);
    }

    #[test]
    fn degenerate_residual_halts() {
        let freqs = sample_frequencies(2, 8, 0.2, 3).unwrap();
        let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let f = CorrelationFn::new(&[Complex64::new(0.0, 0.0); 8], &freqs).unwrap();
        let t = run_trajectory(&f, &domain, vec![0.3, 0.3], 0.1, true, 50, 1e-9);
        assert_eq!(t.stop, StopReason::Degenerate);
        assert_eq!(t.point, vec![0.3, 0.3]);
    }

    #[test]
    fn restarts_are_deterministic() {
        let freqs = sample_frequencies(2, 300, 0.1, 9).unwrap();
        let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let mut r = feature_map(&[0.3, 0.3], &freqs).unwrap();
        let other = feature_map(&[-0.5, 0.1], &freqs).unwrap();
        r.iter_mut().zip(&other).for_each(|(a, b)| *a = *a * 0.5 + b * 0.5);
        let f = CorrelationFn::new(&r, &freqs).unwrap();
        let p = SearchStrategy::mean_shift(20).resolve(0.1, &domain);
        let a = get_local_maximum(&f, &domain, &p, 5, 0).unwrap();
        let b = get_local_maximum(&f, &domain, &p, 5, 0).unwrap();
        assert_eq!(a, b);
    }
}
