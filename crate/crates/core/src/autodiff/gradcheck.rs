//! Finite-difference verification of tape gradients.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, ParamId, ParameterSet, Real, Var};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub h: f64,
    /// Maximum tolerated relative error.
    pub tol: f64,
    /// Fraction of all coordinates to sample.
    pub fraction: f64,
    /// Lower bound on the number of sampled coordinates.
    pub min_coords: usize,
    /// Lower bound on the sampled coordinates of each parameter tensor
    /// (capped at the tensor's size).
    pub min_per_param: usize,
    /// Relative errors are taken against `max(|analytic|, |numeric|, abs_floor)`,
    /// so gradients at the finite-difference noise level do not dominate.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            h: 1e-5,
            tol: 1e-4,
            fraction: 0.05,
            min_coords: 20,
            min_per_param: 0,
            abs_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub failures: Vec<CoordinateMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares tape gradients of `loss` with central differences on a random
/// sample of parameter coordinates.
///
/// `loss` must build the same deterministic scalar every time it is called
/// with the same parameter values.
pub fn grad_check<T, F>(
    params: &mut ParameterSet<T>,
    mut loss: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    T: Real,
    F: FnMut(&ParameterSet<T>, &mut Graph<T>) -> Result<Var>,
{
    params.zero_grad();
    let mut graph = Graph::new();
    let l = loss(params, &mut graph)?;
    graph.backward(l)?;
    graph.accumulate_param_grads(params)?;

    // flat coordinate -> (param, offset)
    let mut offsets: Vec<(ParamId, usize)> = Vec::new();
    let mut total = 0;
    for id in params.ids() {
        offsets.push((id, total));
        total += params.get(id).len();
    }
    let wanted = ((total as f64 * opts.fraction).ceil() as usize)
        .max(opts.min_coords)
        .min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut coords: Vec<usize> = index::sample(&mut rng, total, wanted).into_vec();
    coords.sort_unstable();
    if opts.min_per_param > 0 {
        let mut extra = Vec::new();
        for &(id, start) in &offsets {
            let len = params.get(id).len();
            let end = start + len;
            let have = coords.partition_point(|&c| c < end) - coords.partition_point(|&c| c < start);
            let need = opts.min_per_param.min(len).saturating_sub(have);
            if need == 0 {
                continue;
            }
            let mut order = index::sample(&mut rng, len, len).into_vec();
            order.retain(|&i| coords.binary_search(&(start + i)).is_err());
            extra.extend(order.into_iter().take(need).map(|i| start + i));
        }
        coords.extend(extra);
        coords.sort_unstable();
    }

    let mut eval = |params: &ParameterSet<T>| -> Result<f64> {
        let mut g = Graph::inference();
        let l = loss(params, &mut g)?;
        Ok(g.value(l).values()[0].to_f64_lossy())
    };

    let h = T::from_f64_lossy(opts.h);
    let mut report = GradCheckReport {
        checked: coords.len(),
        max_rel_error: 0.0,
        failures: Vec::new(),
    };
    for flat in coords {
        let slot = offsets.partition_point(|&(_, start)| start <= flat) - 1;
        let (id, start) = offsets[slot];
        let i = flat - start;
        let analytic = params.get(id).grad().map_or(0.0, |g| g[i].to_f64_lossy());
        let orig = params.get(id).values()[i];
        params.get_mut(id).values_mut()[i] = orig + h;
        let up = eval(params)?;
        params.get_mut(id).values_mut()[i] = orig - h;
        let down = eval(params)?;
        params.get_mut(id).values_mut()[i] = orig;
        let step = (orig + h).to_f64_lossy() - (orig - h).to_f64_lossy();
        let numeric = (up - down) / step;
        let denom = analytic.abs().max(numeric.abs()).max(opts.abs_floor);
        let rel_error = (analytic - numeric).abs() / denom;
        report.max_rel_error = report.max_rel_error.max(rel_error);
        if rel_error >= opts.tol || !rel_error.is_finite() {
            report.failures.push(CoordinateMismatch {
                param: params.name(id).to_string(),
                index: i,
                analytic,
                numeric,
                rel_error,
            });
        }
    }
    params.zero_grad();
    Ok(report)
}
