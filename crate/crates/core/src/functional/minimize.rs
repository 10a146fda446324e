//! Bound-constrained projected Newton for the grid energies.

use crate::error::{Error, Result};
use crate::linalg::{pcg, CgSettings, SparseSym};
use crate::space::EllipticOperator;

/// Smooth objective on a box. `value` returns `+inf` outside the domain.
pub(crate) trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], g: &mut [f64]);
    /// A positive definite model Hessian at `x`.
    fn hessian(&self, x: &[f64]) -> SparseSym;
}

#[derive(Clone, Debug)]
pub(crate) struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn free(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn pin(&mut self, pinned: &[bool]) {
        for (k, &p) in pinned.iter().enumerate() {
            if p {
                self.lower[k] = 0.0;
                self.upper[k] = 0.0;
            }
        }
    }

    fn clamp(&self, k: usize, v: f64) -> f64 {
        v.max(self.lower[k]).min(self.upper[k])
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub residual: f64,
}

/// Projected L2-gradient residual `max_k |x_k - P(x_k - g_k / w_k)|`.
fn projected_residual(x: &[f64], g: &[f64], w: &[f64], bounds: &Bounds) -> f64 {
    (0..x.len())
        .map(|k| (x[k] - bounds.clamp(k, x[k] - g[k] / w[k])).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn projected_newton(
    obj: &impl Objective,
    x0: &[f64],
    bounds: &Bounds,
    weights: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Minimum> {
    let n = x0.len();
    let mut x: Vec<f64> = (0..n).map(|k| bounds.clamp(k, x0[k])).collect();
    let mut f = obj.value(&x);
    if !f.is_finite() {
        return Err(Error::Domain("minimization started outside the domain".into()));
    }
    let mut g = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        obj.gradient(&x, &mut g);
        residual = projected_residual(&x, &g, weights, bounds);
        if residual <= tol {
            return Ok(Minimum { x, value: f, residual });
        }
        let eps = residual.min(1e-6);
        let active: Vec<bool> = (0..n)
            .map(|k| {
                let gl = g[k] / weights[k];
                bounds.lower[k] == bounds.upper[k]
                    || (x[k] <= bounds.lower[k] + eps && gl > 0.0)
                    || (x[k] >= bounds.upper[k] - eps && gl < 0.0)
            })
            .collect();
        let hess = obj.hessian(&x);
        let mut d = vec![0.0; n];
        for k in 0..n {
            if active[k] && bounds.lower[k] != bounds.upper[k] {
                d[k] = -g[k] / hess.diag[k];
            }
        }
        let free: Vec<bool> = active.iter().map(|a| !a).collect();
        let (reduced, map) = hess.restrict(&free);
        if !map.is_empty() {
            let rhs: Vec<f64> = map.iter().map(|&k| -g[k]).collect();
            let mut sol = vec![0.0; map.len()];
            let settings = CgSettings {
                rel_tol: 1e-12,
                max_iter: 20 * map.len() + 20,
            };
            let ok = pcg(|a, b| reduced.matvec(a, b), &reduced.diag, &rhs, &mut sol, settings, None, false);
            if ok.is_err() {
                sol = rhs.iter().zip(&reduced.diag).map(|(r, d)| r / d).collect();
            }
            for (i, &k) in map.iter().enumerate() {
                d[k] = sol[i];
            }
        }

        // The full Newton correction is below the resolution of `x`.
        let x_inf = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let step_inf = (0..n).fold(0.0_f64, |m, k| m.max((bounds.clamp(k, x[k] + d[k]) - x[k]).abs()));
        if step_inf <= 8.0 * f64::EPSILON * (1.0 + x_inf) {
            return Ok(Minimum { x, value: f, residual });
        }

        let scale = 1e-13 * (1.0 + f.abs());
        let mut accepted = false;
        let mut alpha = 1.0;
        while alpha > 1e-14 {
            for k in 0..n {
                y[k] = bounds.clamp(k, x[k] + alpha * d[k]);
            }
            let fy = obj.value(&y);
            let predicted: f64 = (0..n).map(|k| g[k] * (y[k] - x[k])).sum();
            if fy.is_finite()
                && (fy <= f + 1e-4 * predicted || (alpha == 1.0 && predicted.abs() <= scale && fy <= f + scale))
            {
                accepted = true;
                f = fy;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Scaled projected-gradient fallback.
            let mut alpha = 1.0;
            while alpha > 1e-20 {
                for k in 0..n {
                    y[k] = bounds.clamp(k, x[k] - alpha * g[k] / hess.diag[k]);
                }
                let fy = obj.value(&y);
                let predicted: f64 = (0..n).map(|k| g[k] * (y[k] - x[k])).sum();
                if fy.is_finite() && fy <= f + 1e-4 * predicted && predicted < 0.0 {
                    accepted = true;
                    f = fy;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if !accepted {
            // Stalled at rounding level: accept if close to the target.
            if residual <= 1e3 * tol {
                return Ok(Minimum { x, value: f, residual });
            }
            return Err(Error::NonConvergence {
                what: "projected Newton line search",
                iterations: 0,
                residual,
            });
        }
        std::mem::swap(&mut x, &mut y);
    }
    obj.gradient(&x, &mut g);
    residual = residual.min(projected_residual(&x, &g, weights, bounds));
    if residual <= tol {
        return Ok(Minimum { x, value: f, residual });
    }
    Err(Error::NonConvergence {
        what: "projected Newton",
        iterations: max_iter,
        residual,
    })
}

/// Node-local potential `l(k, v) -> (value, first, second derivative)`.
pub(crate) type LocalFn<'a> = dyn Fn(usize, f64) -> (f64, f64, f64) + 'a;

/// Edge-wise p-power energy `sum_e vol_e / p |(x_b - x_a) / h|^p`.
#[derive(Clone, Debug)]
pub(crate) struct PowerEdges {
    pub edges: Vec<(usize, usize, f64)>,
    pub p: f64,
    pub h: f64,
}

impl PowerEdges {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|&(a, b, vol)| vol / self.p * ((x[b] - x[a]) / self.h).abs().powf(self.p))
            .sum()
    }
}

/// `1/2 x^T S x + power edges + sum_k w_k l(k, x_k) + coef/2 sum_k w_k (x_k - a_k)^2`.
pub(crate) struct GridObjective<'a> {
    pub weights: &'a [f64],
    pub stiffness: Option<(&'a EllipticOperator, SparseSym)>,
    pub power: Option<&'a PowerEdges>,
    pub local: &'a LocalFn<'a>,
    pub anchor: Option<(&'a [f64], f64)>,
    /// Lower bound on the node-local curvature used in the model Hessian,
    /// relative to the weights.
    pub curvature_floor: f64,
}

impl Objective for GridObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for (k, &v) in x.iter().enumerate() {
            let (l, _, _) = (self.local)(k, v);
            if !l.is_finite() {
                return f64::INFINITY;
            }
            total += self.weights[k] * l;
        }
        if let Some((op, _)) = &self.stiffness {
            total += 0.5 * op.energy_form(x, x);
        }
        if let Some(pe) = self.power {
            total += pe.value(x);
        }
        if let Some((a, coef)) = self.anchor {
            total += 0.5
                * coef
                * x.iter()
                    .zip(a)
                    .zip(self.weights)
                    .map(|((v, a), w)| w * (v - a) * (v - a))
                    .sum::<f64>();
        }
        total
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        if let Some((op, _)) = &self.stiffness {
            op.stiffness_apply(x, g);
        } else {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for (k, &v) in x.iter().enumerate() {
            let (_, d1, _) = (self.local)(k, v);
            g[k] += self.weights[k] * d1;
        }
        if let Some(pe) = self.power {
            for &(a, b, vol) in &pe.edges {
                let s = (x[b] - x[a]) / pe.h;
                let flux = vol * s.abs().powf(pe.p - 2.0) * s / pe.h;
                g[b] += flux;
                g[a] -= flux;
            }
        }
        if let Some((a, coef)) = self.anchor {
            for k in 0..x.len() {
                g[k] += coef * self.weights[k] * (x[k] - a[k]);
            }
        }
    }

    fn hessian(&self, x: &[f64]) -> SparseSym {
        let mut h = match &self.stiffness {
            Some((_, s)) => s.clone(),
            None => SparseSym::zeros(x.len()),
        };
        let coef = self.anchor.map_or(0.0, |(_, c)| c);
        for (k, &v) in x.iter().enumerate() {
            let (_, _, d2) = (self.local)(k, v);
            let local = (coef + d2).max(self.curvature_floor);
            h.diag[k] += self.weights[k] * local;
        }
        if let Some(pe) = self.power {
            for &(a, b, vol) in &pe.edges {
                let s = (x[b] - x[a]) / pe.h;
                let c = vol * (pe.p - 1.0) * s.abs().powf(pe.p - 2.0) / (pe.h * pe.h);
                h.diag[a] += c;
                h.diag[b] += c;
                h.off.push((a, b, -c));
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{BoundaryCondition, Grid};

    #[test]
    fn solves_box_constrained_quadratic() {
        // min 1/2 x^T S x + coef/2 |x - a|^2 with x >= 0, S the Neumann Laplacian.
        let grid = Grid::vertex_1d(9, 1.0).unwrap();
        let op = EllipticOperator::laplacian(grid, BoundaryCondition::Neumann).unwrap();
        let w = grid.weights();
        let anchor: Vec<f64> = (0..9).map(|k| if k < 4 { -1.0 } else { 1.0 }).collect();
        let local = |_k: usize, _v: f64| (0.0, 0.0, 0.0);
        let obj = GridObjective {
            weights: &w,
            stiffness: Some((&op, op.stiffness())),
            power: None,
            local: &local,
            anchor: Some((&anchor, 50.0)),
            curvature_floor: 0.0,
        };
        let mut bounds = Bounds::free(9);
        bounds.lower = vec![0.0; 9];
        let m = projected_newton(&obj, &vec![0.5; 9], &bounds, &w, 1e-11, 100).unwrap();
        assert!(m.x.iter().all(|v| *v >= 0.0));
        assert!(m.residual <= 1e-11);
        // KKT: inactive nodes have zero gradient, active nodes non-negative gradient.
        let mut g = vec![0.0; 9];
        obj.gradient(&m.x, &mut g);
        for k in 0..9 {
            if m.x[k] > 0.0 {
                assert!((g[k] / w[k]).abs() < 1e-9);
            } else {
                assert!(g[k] >= -1e-12);
            }
        }
    }

    #[test]
    fn infeasible_start_is_a_domain_error() {
        let w = vec![1.0; 2];
        let local = |_k: usize, v: f64| if v.abs() < 1.0 { (0.0, 0.0, 0.0) } else { (f64::INFINITY, 0.0, 0.0) };
        let obj = GridObjective {
            weights: &w,
            stiffness: None,
            power: None,
            local: &local,
            anchor: None,
            curvature_floor: 1.0,
        };
        let err = projected_newton(&obj, &[2.0, 0.0], &Bounds::free(2), &w, 1e-10, 10).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
