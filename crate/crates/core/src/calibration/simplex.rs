//! Bounded Nelder-Mead search.

use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexOptions {
    pub budget: usize,
    /// Stop once every vertex lies within this distance (per axis) of the best.
    pub x_tol: f64,
    /// ... and the objective spread across vertices is below this.
    pub f_tol: f64,
    /// Initial offset along each axis.
    pub step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            budget: 200,
            x_tol: 1e-3,
            f_tol: 1e-8,
            step: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// Best objective after each completed iteration.
    pub history: Vec<f64>,
    pub converged: bool,
}

struct Counter<'a, F> {
    f: &'a F,
    lower: &'a [f64],
    upper: &'a [f64],
    used: usize,
    budget: usize,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Counter<'_, F> {
    fn clip(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(self.lower).zip(self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Evaluates all points concurrently, or none when the budget would overflow.
    fn batch(&mut self, xs: &[Vec<f64>]) -> Option<Vec<f64>> {
        if self.used + xs.len() > self.budget {
            return None;
        }
        self.used += xs.len();
        let f = self.f;
        Some(xs.par_iter().map(|x| f(x)).collect())
    }

    fn one(&mut self, x: &[f64]) -> Option<f64> {
        self.batch(&[x.to_vec()]).map(|v| v[0])
    }
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Minimizes `f` inside the box `[lower, upper]`, starting from `x0` with the
/// simplex `x0 + step * e_i` (reflected inward at an upper bound).
pub fn nelder_mead<F>(f: &F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let mut c = Counter {
        f,
        lower,
        upper,
        used: 0,
        budget: opts.budget,
    };
    let mut start = x0.to_vec();
    c.clip(&mut start);
    let mut pts = vec![start.clone()];
    for i in 0..n {
        let mut p = start.clone();
        p[i] += opts.step;
        if p[i] > upper[i] {
            p[i] = start[i] - opts.step;
        }
        c.clip(&mut p);
        pts.push(p);
    }
    let Some(vals) = c.batch(&pts) else {
        return SimplexResult {
            x: start,
            f: f64::INFINITY,
            evaluations: 0,
            history: Vec::new(),
            converged: false,
        };
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = pts.into_iter().zip(vals).collect();
    let mut history = Vec::new();
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        let best = &simplex[0];
        let size = simplex
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&best.0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if size < opts.x_tol && simplex[n].1 - best.1 < opts.f_tol {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let mut xr = combine(&centroid, &worst.0, -1.0);
        c.clip(&mut xr);
        let Some(fr) = c.one(&xr) else { break };
        if fr < simplex[0].1 {
            let mut xe = combine(&centroid, &worst.0, -2.0);
            c.clip(&mut xe);
            let Some(fe) = c.one(&xe) else {
                simplex[n] = (xr, fr);
                break;
            };
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, outside) = if fr < worst.1 {
            (combine(&centroid, &xr, 0.5), true)
        } else {
            (combine(&centroid, &worst.0, 0.5), false)
        };
        let Some(fc) = c.one(&xc) else { break };
        if (outside && fc <= fr) || (!outside && fc < worst.1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        let shrunk: Vec<Vec<f64>> = simplex[1..]
            .iter()
            .map(|(x, _)| combine(&x_best, x, 0.5))
            .collect();
        let Some(vals) = c.batch(&shrunk) else { break };
        for (slot, (x, v)) in simplex[1..].iter_mut().zip(shrunk.into_iter().zip(vals)) {
            *slot = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    if history.last() != Some(&simplex[0].1) {
        history.push(simplex[0].1);
    }
    let (x, f) = simplex.swap_remove(0);
    SimplexResult {
        x,
        f,
        evaluations: c.used,
        history,
        converged,
    }
}
