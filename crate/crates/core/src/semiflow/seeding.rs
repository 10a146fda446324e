//! Deterministic low-discrepancy sampling of balls in the state space.

use crate::functional::{Ambient, FunctionalSpec, Variant};
use crate::space::{Grid, GridKind};
use std::f64::consts::PI;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    acc
}

/// Halton point `index` in `[0, 1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton sampling supports up to {} dimensions", PRIMES.len());
    PRIMES[..dim].iter().map(|&b| radical_inverse(index, b)).collect()
}

/// Orthonormal (in the weighted L2 product) mode family used to embed
/// coefficient vectors as grid functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeFamily {
    /// `sin(j pi x / L)`, zero on the boundary.
    Sine,
    /// `cos(j pi x / L)` including the constant.
    Cosine,
}

/// Mode family matching the boundary behaviour of `phi`'s states.
pub fn mode_family(phi: &FunctionalSpec) -> ModeFamily {
    match phi.variant() {
        Variant::DcExample1(_) | Variant::DcExample2(_) | Variant::DcExample3(_) => ModeFamily::Sine,
        _ => ModeFamily::Cosine,
    }
}

/// Axis mode indices ordered by total degree, then lexicographically.
fn mode_indices(dim: usize, count: usize, family: ModeFamily) -> Vec<[usize; 2]> {
    let first = match family {
        ModeFamily::Sine => 1,
        ModeFamily::Cosine => 0,
    };
    let mut out = Vec::new();
    let mut total = 0;
    while out.len() < count {
        if dim == 1 {
            out.push([first + total, 0]);
        } else {
            for i in 0..=total {
                out.push([first + i, first + total - i]);
            }
        }
        total += 1;
    }
    out.truncate(count);
    out
}

/// Grid modes normalized to unit weighted L2 norm.
pub fn modes(grid: &Grid, count: usize, family: ModeFamily) -> Vec<Vec<f64>> {
    let w = grid.weights();
    let length = grid.length();
    let pinned = |k: usize| grid.kind() == GridKind::Vertex && grid.is_boundary(k);
    mode_indices(grid.dim(), count, family)
        .into_iter()
        .map(|[i, j]| {
            let axis = |m: usize, x: f64| match family {
                ModeFamily::Sine => (m as f64 * PI * x / length).sin(),
                ModeFamily::Cosine => (m as f64 * PI * x / length).cos(),
            };
            let mut v: Vec<f64> = (0..grid.node_count())
                .map(|k| {
                    if family == ModeFamily::Sine && pinned(k) {
                        return 0.0;
                    }
                    let c = grid.coordinates(k);
                    if grid.dim() == 1 {
                        axis(i, c[0])
                    } else {
                        axis(i, c[0]) * axis(j, c[1])
                    }
                })
                .collect();
            let norm = v.iter().zip(&w).map(|(x, wk)| wk * x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            v
        })
        .collect()
}

/// `count` points of the ball of `radius` around `center`: for Euclidean
/// ambients Halton points of the cube kept inside the ball, for grids
/// `center + radius sum_j c_j e_j` with Halton coefficients `c` in the unit
/// ball and `e_j` the first `modes` orthonormal modes. In one dimension
/// index 1 of the sequence maps to the center.
pub fn ball_points(phi: &FunctionalSpec, center: &[f64], radius: f64, count: usize, modes_per_field: usize) -> Vec<Vec<f64>> {
    let (basis, dim) = match phi.ambient() {
        Ambient::Euclidean { dim } => (None, *dim),
        Ambient::L2(g) => (Some(modes(g, modes_per_field, mode_family(phi))), modes_per_field),
        Ambient::Dual(a) => (Some(modes(a.grid(), modes_per_field, mode_family(phi))), modes_per_field),
    };
    let mut out = Vec::with_capacity(count);
    let mut index = 1u64;
    // Cube-to-ball rejection keeps at least 1/4 of the points in two
    // dimensions; the cap only guards against pathological requests.
    let cap = 1000 * (count as u64 + 1) * (1 << dim.min(16)) as u64;
    while out.len() < count && index < cap {
        let h = halton(index, dim);
        index += 1;
        let c: Vec<f64> = h.iter().map(|x| 2.0 * x - 1.0).collect();
        if c.iter().map(|x| x * x).sum::<f64>() > 1.0 {
            continue;
        }
        let point = match &basis {
            None => center.iter().zip(&c).map(|(z, x)| z + radius * x).collect(),
            Some(b) => {
                let mut p = center.to_vec();
                for (cj, ej) in c.iter().zip(b) {
                    for (pk, ek) in p.iter_mut().zip(ej) {
                        *pk += radius * cj * ek;
                    }
                }
                p
            }
        };
        out.push(point);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_der_corput_values() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn modes_are_orthonormal() {
        for family in [ModeFamily::Sine, ModeFamily::Cosine] {
            let g = Grid::new(2, 17, 1.0, GridKind::Vertex).unwrap();
            let m = modes(&g, 5, family);
            let w = g.weights();
            for a in 0..5 {
                for b in 0..5 {
                    let ip: f64 = (0..w.len()).map(|k| w[k] * m[a][k] * m[b][k]).sum();
                    let expected = if a == b { 1.0 } else { 0.0 };
                    assert!((ip - expected).abs() < 1e-10, "{family:?} {a} {b} {ip}");
                }
            }
        }
    }

    #[test]
    fn scalar_ball_starts_at_center() {
        let dw = FunctionalSpec::double_well();
        let pts = ball_points(&dw, &[0.0], 2.0, 5, 0);
        assert_eq!(pts[0], vec![0.0]);
        assert!(pts.iter().all(|p| p[0].abs() <= 2.0));
    }
}
