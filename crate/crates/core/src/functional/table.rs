use crate::error::{Error, Result};

/// Non-decreasing piecewise-linear function given by knots, extended
/// linearly beyond the first and last knot. Its primitive is normalized by
/// `F(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneTable {
    knots: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
    offset: f64,
}

impl MonotoneTable {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidParameter(
                "a function table needs at least two knots".into(),
            ));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidParameter(
                    "table abscissae must be strictly increasing".into(),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidParameter(
                    "table values must be non-decreasing".into(),
                ));
            }
        }
        if knots.iter().any(|(s, f)| !s.is_finite() || !f.is_finite()) {
            return Err(Error::InvalidParameter("table entries must be finite".into()));
        }
        let mut cumulative = vec![0.0];
        for w in knots.windows(2) {
            let (s0, f0) = w[0];
            let (s1, f1) = w[1];
            let last = *cumulative.last().unwrap();
            cumulative.push(last + 0.5 * (f0 + f1) * (s1 - s0));
        }
        let mut table = Self {
            knots,
            cumulative,
            offset: 0.0,
        };
        table.offset = table.raw_primitive(0.0);
        Ok(table)
    }

    /// Linear function `f(s) = slope * s`.
    pub fn linear(slope: f64) -> Result<Self> {
        Self::new(vec![(-1.0, -slope), (1.0, slope)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    fn segment(&self, s: f64) -> usize {
        let m = self.knots.len();
        match self.knots.partition_point(|k| k.0 <= s) {
            0 => 0,
            i if i >= m - 1 => m - 2,
            i => i - 1,
        }
    }

    fn seg_slope(&self, k: usize) -> f64 {
        let (s0, f0) = self.knots[k];
        let (s1, f1) = self.knots[k + 1];
        (f1 - f0) / (s1 - s0)
    }

    pub fn value(&self, s: f64) -> f64 {
        let k = self.segment(s);
        let (s0, f0) = self.knots[k];
        f0 + self.seg_slope(k) * (s - s0)
    }

    /// Slope of the segment containing `s` (right derivative at knots).
    pub fn slope(&self, s: f64) -> f64 {
        self.seg_slope(self.segment(s))
    }

    fn raw_primitive(&self, s: f64) -> f64 {
        let k = self.segment(s);
        let (s0, f0) = self.knots[k];
        let d = s - s0;
        self.cumulative[k] + f0 * d + 0.5 * self.seg_slope(k) * d * d
    }

    /// `F(s) = \int_0^s f`.
    pub fn primitive(&self, s: f64) -> f64 {
        self.raw_primitive(s) - self.offset
    }

    pub fn max_slope(&self) -> f64 {
        (0..self.knots.len() - 1)
            .map(|k| self.seg_slope(k))
            .fold(0.0, f64::max)
    }

    /// Constants `(k1, k2)` with `|f(s)| <= k1 + k2 |s|`.
    pub fn growth_constants(&self) -> (f64, f64) {
        (self.value(0.0).abs(), self.max_slope())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_and_extrapolates() {
        let t = MonotoneTable::new(vec![(-1.0, -2.0), (0.0, 0.0), (2.0, 1.0)]).unwrap();
        assert_eq!(t.value(-0.5), -1.0);
        assert_eq!(t.value(1.0), 0.5);
        assert_eq!(t.value(4.0), 2.0);
        assert_eq!(t.value(-2.0), -4.0);
        assert_eq!(t.max_slope(), 2.0);
    }

    #[test]
    fn primitive_matches_quadrature() {
        let t = MonotoneTable::new(vec![(-1.0, -2.0), (0.5, 0.0), (2.0, 1.0)]).unwrap();
        for &s in &[-3.0, -0.7, 0.0, 0.3, 1.9, 5.0] {
            let m = 20000;
            let h = s / m as f64;
            let mut acc = 0.0;
            for i in 0..m {
                let a = i as f64 * h;
                acc += 0.5 * (t.value(a) + t.value(a + h)) * h;
            }
            assert!((t.primitive(s) - acc).abs() < 1e-6, "s={s}");
        }
        assert_eq!(t.primitive(0.0), 0.0);
    }

    #[test]
    fn rejects_decreasing_tables() {
        assert!(MonotoneTable::new(vec![(0.0, 1.0), (1.0, 0.0)]).is_err());
        assert!(MonotoneTable::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(MonotoneTable::new(vec![(0.0, 1.0)]).is_err());
    }
}
