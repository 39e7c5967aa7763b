//! Derivative-free Nelder–Mead simplex minimization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop once the objective values across the simplex differ by at most
    /// this and the vertices lie within `x_tol` of the best one.
    pub spread_tol: f64,
    pub x_tol: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Relative size of the initial simplex edges.
    pub initial_relative: f64,
    /// Edge length used for coordinates that start at zero.
    pub initial_absolute: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evals: 20_000,
            spread_tol: 1e-12,
            x_tol: 1e-6,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_relative: 0.05,
            initial_absolute: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// Whether the spread criterion (rather than the budget) ended the search.
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Counted<F> {
    fn call(&mut self, x: &[f64]) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(x)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective { value: v, point: x.to_vec() });
        }
        Ok(v)
    }
}

/// Minimizes a fallible objective; errors from the objective propagate.
pub fn nelder_mead_try<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidParameters("empty starting point".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameters("starting point must be finite".into()));
    }
    if opts.max_evals < n + 1 {
        return Err(Error::InvalidParameters(format!("max_evals {} < dimension + 1", opts.max_evals)));
    }
    let mut obj = Counted { f, evals: 0 };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), obj.call(x0)?));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] = if x[i] != 0.0 { x[i] * (1.0 + opts.initial_relative) } else { opts.initial_absolute };
        let fx = obj.call(&x)?;
        simplex.push((x, fx));
    }
    let combine = |a: &[f64], b: &[f64], coef: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(ai, bi)| ai + coef * (ai - bi)).collect()
    };
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[n].1);
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if hi - lo <= opts.spread_tol && diameter <= opts.x_tol {
            converged = true;
            break;
        }
        if obj.evals >= opts.max_evals {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        let xr = combine(&centroid, &worst, opts.reflection);
        let fr = obj.call(&xr)?;
        if fr < lo {
            let xe = combine(&centroid, &worst, opts.reflection * opts.expansion);
            let fe = obj.call(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc, accept) = if fr < hi {
            let xc = combine(&centroid, &worst, opts.reflection * opts.contraction);
            let fc = obj.call(&xc)?;
            (xc, fc, fc <= fr)
        } else {
            let xc = combine(&centroid, &worst, -opts.contraction);
            let fc = obj.call(&xc)?;
            (xc, fc, fc < hi)
        };
        if accept {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + opts.shrink * (v - b)).collect();
            let fx = obj.call(&x)?;
            *vertex = (x, fx);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Ok(Minimum { x, f, evaluations: obj.evals, converged })
}

/// Minimizes `f` from `x0`; non-finite objective values abort the search.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    nelder_mead_try(|x| Ok(f(x)), x0, opts)
}
