//! Natural cubic spline and monthly stock interpolation.

use std::collections::BTreeMap;

use crate::scalar::Scalar;
use crate::time::{MonthRange, YearMonth};

use super::types::{CountryCode, MigrantStockRecord, Sex, ANCHOR_YEARS};

/// Interpolating cubic spline with zero second derivative at both ends.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    /// Second derivatives at the knots.
    m: Vec<T>,
}

impl<T: Scalar> NaturalCubicSpline<T> {
    /// Knots must be strictly increasing; at least two are required.
    pub fn new(xs: &[T], ys: &[T]) -> Option<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || xs.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        let mut m = vec![T::zero(); n];
        if n > 2 {
            // Thomas algorithm on the interior equations.
            let k = n - 2;
            let mut diag = vec![T::zero(); k];
            let mut upper = vec![T::zero(); k];
            let mut rhs = vec![T::zero(); k];
            let two = T::lit(2.0);
            let six = T::lit(6.0);
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[i - 1] = two * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = six * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] = diag[i] - w * upper[i - 1];
                rhs[i] = rhs[i] - w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Some(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    pub fn eval(&self, x: T) -> T {
        let n = self.xs.len();
        let seg = match self.xs.iter().rposition(|&k| k <= x) {
            None => 0,
            Some(i) if i >= n - 1 => n - 2,
            Some(i) => i,
        };
        if x == self.xs[seg] {
            return self.ys[seg];
        }
        let (x0, x1) = (self.xs[seg], self.xs[seg + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let six = T::lit(6.0);
        a * self.ys[seg]
            + b * self.ys[seg + 1]
            + ((a * a * a - a) * self.m[seg] + (b * b * b - b) * self.m[seg + 1]) * h * h / six
    }
}

/// Key of a monthly stock series.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StockKey {
    pub origin: CountryCode,
    pub destination: CountryCode,
    pub sex: Sex,
}

/// Evaluates the natural spline through the three anchors (January 2010, 2015, 2020)
/// at every month of `window`, clamping negative excursions to zero.
pub fn interpolate_series(anchors: [f64; 3], window: &MonthRange) -> Vec<f64> {
    let origin = YearMonth::new(ANCHOR_YEARS[0], 1).expect("valid month");
    let xs: Vec<f64> = ANCHOR_YEARS
        .iter()
        .map(|&y| YearMonth::new(y, 1).expect("valid month").months_since(origin) as f64)
        .collect();
    let spline = NaturalCubicSpline::new(&xs, &anchors).expect("anchor knots increasing");
    window
        .iter()
        .map(|m| spline.eval(m.months_since(origin) as f64).max(0.0))
        .collect()
}

/// Monthly stock series per (origin, destination, sex). Anchor completeness is
/// guaranteed by load-time validation; incomplete keys are skipped here.
pub fn interpolate_stocks_monthly(
    anchors: &[MigrantStockRecord],
    window: &MonthRange,
) -> BTreeMap<StockKey, Vec<f64>> {
    let mut grouped: BTreeMap<StockKey, [Option<f64>; 3]> = BTreeMap::new();
    for rec in anchors {
        let Some(slot) = ANCHOR_YEARS.iter().position(|&y| y == rec.anchor_year) else {
            continue;
        };
        let key = StockKey {
            origin: rec.origin.clone(),
            destination: rec.destination.clone(),
            sex: rec.sex,
        };
        grouped.entry(key).or_default()[slot] = Some(rec.count);
    }
    grouped
        .into_iter()
        .filter_map(|(key, vals)| match vals {
            [Some(a), Some(b), Some(c)] => Some((key, interpolate_series([a, b, c], window))),
            _ => None,
        })
        .collect()
}
