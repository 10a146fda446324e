//! Scalar and separable energies: the two toy potentials and the
//! convex-plus-smooth family acting componentwise on `R^dim`.

use crate::error::{Error, Result};

/// One-dimensional toy energies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarToy {
    /// `min{(x - 1)^2, (x + 1)^2}`; not semiconvex at 0.
    MinQuadratics,
    /// `(x^2 - 1)^2 / 4`.
    DoubleWell,
}

impl ScalarToy {
    pub fn value(self, x: f64) -> f64 {
        match self {
            ScalarToy::MinQuadratics => ((x - 1.0) * (x - 1.0)).min((x + 1.0) * (x + 1.0)),
            ScalarToy::DoubleWell => {
                let s = x * x - 1.0;
                0.25 * s * s
            }
        }
    }

    /// Classical derivative; `None` where it does not exist.
    pub fn derivative(self, x: f64) -> Option<f64> {
        match self {
            ScalarToy::MinQuadratics if x == 0.0 => None,
            ScalarToy::MinQuadratics => Some(2.0 * (x - x.signum())),
            ScalarToy::DoubleWell => Some(x * x * x - x),
        }
    }

    pub(crate) fn semiconvexity(self) -> f64 {
        match self {
            ScalarToy::MinQuadratics => f64::INFINITY,
            ScalarToy::DoubleWell => 0.5,
        }
    }

    pub(crate) fn prox(self, u: f64, tau: f64) -> f64 {
        match self {
            ScalarToy::MinQuadratics => {
                // Each branch is a parabola; enumerate both vertices in
                // ascending order and keep the strictly better one.
                let objective = |v: f64| self.value(v) + (v - u) * (v - u) / (2.0 * tau);
                let lo = (u - 2.0 * tau) / (1.0 + 2.0 * tau);
                let hi = (u + 2.0 * tau) / (1.0 + 2.0 * tau);
                let (jl, jh) = (objective(lo), objective(hi));
                if jh < jl - 1e-12 {
                    hi
                } else {
                    lo
                }
            }
            ScalarToy::DoubleWell => double_well_prox(u, tau),
        }
    }

    /// All minimizers of the proximal subproblem that tie within `1e-12`,
    /// in ascending order.
    pub(crate) fn prox_branches(self, u: f64, tau: f64) -> Vec<f64> {
        match self {
            ScalarToy::MinQuadratics => {
                let objective = |v: f64| self.value(v) + (v - u) * (v - u) / (2.0 * tau);
                let lo = (u - 2.0 * tau) / (1.0 + 2.0 * tau);
                let hi = (u + 2.0 * tau) / (1.0 + 2.0 * tau);
                if (objective(hi) - objective(lo)).abs() <= 1e-12 {
                    vec![lo, hi]
                } else {
                    vec![self.prox(u, tau)]
                }
            }
            ScalarToy::DoubleWell => vec![double_well_prox(u, tau)],
        }
    }
}

/// Root of `(v - u) + tau (v^3 - v) = 0`, monotone in `v` for `tau < 1`.
fn double_well_prox(u: f64, tau: f64) -> f64 {
    let g = |v: f64| (v - u) + tau * (v * v * v - v);
    let dg = |v: f64| 1.0 + tau * (3.0 * v * v - 1.0);
    if g(u) == 0.0 {
        return u;
    }
    // Bracket: the root lies between u and u / (1 - tau) (or the sign of u).
    let b = if u.abs() < 1.0 { u.signum() } else { u };
    let (mut lo, mut hi) = if u < b { (u, b) } else { (b, u) };
    if g(lo) > 0.0 || g(hi) < 0.0 {
        let r = 1.0 + u.abs();
        lo = -r;
        hi = r;
    }
    safeguarded_newton(g, dg, lo, hi, u)
}

/// Newton iteration kept inside a shrinking bracket of an increasing
/// function; runs to the floating-point resolution.
pub(crate) fn safeguarded_newton(
    g: impl Fn(f64) -> f64,
    dg: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    start: f64,
) -> f64 {
    let mut x = start.clamp(lo, hi);
    for _ in 0..200 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dg(x);
        let newton = x - gx / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
        x = next;
    }
    // Pick the best endpoint candidate at floating-point resolution.
    [x, lo, hi]
        .into_iter()
        .min_by(|a, b| g(*a).abs().total_cmp(&g(*b).abs()))
        .unwrap()
}

/// Convex, lower semicontinuous part acting on each component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConvexPart {
    /// `coeff * x^2`, `coeff >= 0`.
    Quadratic { coeff: f64 },
    /// `weight * |x|`, `weight >= 0`.
    AbsValue { weight: f64 },
    /// Indicator of `[lower, upper]`.
    Box { lower: f64, upper: f64 },
}

/// `C^1` part acting on each component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SmoothPart {
    Zero,
    /// `slope * x`.
    Linear { slope: f64 },
    /// `amplitude * cos(frequency * x)`.
    Cosine { amplitude: f64, frequency: f64 },
}

impl ConvexPart {
    pub(crate) fn validate(&self) -> Result<()> {
        let ok = match *self {
            ConvexPart::Quadratic { coeff } => coeff >= 0.0 && coeff.is_finite(),
            ConvexPart::AbsValue { weight } => weight >= 0.0 && weight.is_finite(),
            ConvexPart::Box { lower, upper } => lower <= upper && !lower.is_nan() && !upper.is_nan(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("convex part {self:?} is not convex and proper")))
        }
    }

    pub(crate) fn value(&self, x: f64) -> f64 {
        match *self {
            ConvexPart::Quadratic { coeff } => coeff * x * x,
            ConvexPart::AbsValue { weight } => weight * x.abs(),
            ConvexPart::Box { lower, upper } => {
                if x >= lower && x <= upper {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Second derivative lower bound.
    fn curvature(&self) -> f64 {
        match *self {
            ConvexPart::Quadratic { coeff } => 2.0 * coeff,
            _ => 0.0,
        }
    }
}

impl SmoothPart {
    pub(crate) fn validate(&self) -> Result<()> {
        let ok = match *self {
            SmoothPart::Zero => true,
            SmoothPart::Linear { slope } => slope.is_finite(),
            SmoothPart::Cosine {
                amplitude,
                frequency,
            } => amplitude.is_finite() && frequency.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("smooth part {self:?} has non-finite parameters")))
        }
    }

    pub(crate) fn value(&self, x: f64) -> f64 {
        match *self {
            SmoothPart::Zero => 0.0,
            SmoothPart::Linear { slope } => slope * x,
            SmoothPart::Cosine {
                amplitude,
                frequency,
            } => amplitude * (frequency * x).cos(),
        }
    }

    pub(crate) fn derivative(&self, x: f64) -> f64 {
        match *self {
            SmoothPart::Zero => 0.0,
            SmoothPart::Linear { slope } => slope,
            SmoothPart::Cosine {
                amplitude,
                frequency,
            } => -amplitude * frequency * (frequency * x).sin(),
        }
    }

    fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            SmoothPart::Cosine {
                amplitude,
                frequency,
            } => -amplitude * frequency * frequency * (frequency * x).cos(),
            _ => 0.0,
        }
    }

    /// Upper bound on the negative curvature.
    fn concavity(&self) -> f64 {
        match *self {
            SmoothPart::Cosine {
                amplitude,
                frequency,
            } => amplitude.abs() * frequency * frequency,
            _ => 0.0,
        }
    }
}

/// Semiconvexity constant `kappa` with `convex + smooth + kappa x^2` convex.
pub(crate) fn convex_plus_smooth_kappa(c: &ConvexPart, s: &SmoothPart) -> f64 {
    (0.5 * (s.concavity() - c.curvature())).max(0.0)
}

/// Componentwise proximal point of `c + s` with step `tau`; the subproblem
/// is strictly convex whenever `tau` respects the semiconvexity bound.
pub(crate) fn convex_plus_smooth_prox(c: &ConvexPart, s: &SmoothPart, u: f64, tau: f64) -> f64 {
    if let SmoothPart::Zero | SmoothPart::Linear { .. } = s {
        let z = u - tau * s.derivative(0.0);
        return match *c {
            ConvexPart::Quadratic { coeff } => z / (1.0 + 2.0 * coeff * tau),
            ConvexPart::AbsValue { weight } => z.signum() * (z.abs() - tau * weight).max(0.0),
            ConvexPart::Box { lower, upper } => z.clamp(lower, upper),
        };
    }
    // Smooth part of the subproblem derivative; the convex part is added
    // through its one-sided derivatives.
    let smooth = |v: f64| s.derivative(v) + (v - u) / tau;
    let smooth_d = |v: f64| s.second_derivative(v) + 1.0 / tau;
    match *c {
        ConvexPart::Quadratic { coeff } => {
            let g = |v: f64| smooth(v) + 2.0 * coeff * v;
            let dg = |v: f64| smooth_d(v) + 2.0 * coeff;
            let (lo, hi) = bracket(&g, u);
            safeguarded_newton(g, dg, lo, hi, u)
        }
        ConvexPart::AbsValue { weight } => {
            let at_zero = smooth(0.0);
            if at_zero - weight <= 0.0 && at_zero + weight >= 0.0 {
                return 0.0;
            }
            if at_zero + weight < 0.0 {
                let g = |v: f64| smooth(v) + weight;
                let (lo, hi) = bracket(&g, u.max(0.0));
                safeguarded_newton(g, smooth_d, lo.max(0.0), hi, u.max(0.0))
            } else {
                let g = |v: f64| smooth(v) - weight;
                let (lo, hi) = bracket(&g, u.min(0.0));
                safeguarded_newton(g, smooth_d, lo, hi.min(0.0), u.min(0.0))
            }
        }
        ConvexPart::Box { lower, upper } => {
            if smooth(lower) >= 0.0 {
                return lower;
            }
            if smooth(upper) <= 0.0 {
                return upper;
            }
            let (lo, hi) = bracket(&smooth, u.clamp(lower, upper));
            safeguarded_newton(smooth, smooth_d, lo.max(lower), hi.min(upper), u)
        }
    }
}

/// Bracket `[lo, hi]` with `g(lo) <= 0 <= g(hi)` for an increasing `g`.
fn bracket(g: &impl Fn(f64) -> f64, center: f64) -> (f64, f64) {
    let mut step = 1.0_f64.max(center.abs());
    let (mut lo, mut hi) = (center, center);
    while g(lo) > 0.0 {
        lo -= step;
        step *= 2.0;
    }
    step = 1.0_f64.max(center.abs());
    while g(hi) < 0.0 {
        hi += step;
        step *= 2.0;
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_well_prox_fixed_points_are_exact() {
        for u in [-1.0, 0.0, 1.0] {
            assert_eq!(double_well_prox(u, 0.3), u);
        }
    }

    #[test]
    fn min_quadratics_tie_picks_lower_branch() {
        assert_eq!(ScalarToy::MinQuadratics.prox(0.0, 0.5), -0.5);
        assert_eq!(ScalarToy::MinQuadratics.prox(0.1, 0.5), 0.55);
    }

    #[test]
    fn soft_threshold_and_box() {
        let abs = ConvexPart::AbsValue { weight: 1.0 };
        assert_eq!(convex_plus_smooth_prox(&abs, &SmoothPart::Zero, 0.3, 0.5), 0.0);
        assert_eq!(convex_plus_smooth_prox(&abs, &SmoothPart::Zero, 2.0, 0.5), 1.5);
        let b = ConvexPart::Box {
            lower: -1.0,
            upper: 0.5,
        };
        assert_eq!(convex_plus_smooth_prox(&b, &SmoothPart::Linear { slope: -4.0 }, 0.0, 1.0), 0.5);
    }

    #[test]
    fn cosine_prox_satisfies_optimality() {
        let s = SmoothPart::Cosine {
            amplitude: 0.5,
            frequency: 2.0,
        };
        let c = ConvexPart::Quadratic { coeff: 0.25 };
        let tau = 0.2;
        for u in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let v = convex_plus_smooth_prox(&c, &s, u, tau);
            let r = s.derivative(v) + 0.5 * v + (v - u) / tau;
            assert!(r.abs() < 1e-12, "u={u} residual {r}");
        }
    }
}
