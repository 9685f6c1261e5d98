//! Individual remittance decision: covariates, disaster kernel, score and logistic link.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::DisasterEvent;
use crate::scalar::Scalar;
use crate::time::YearMonth;

/// Number of months (onset month included) a disaster affects the score.
pub const DISASTER_WINDOW: i32 = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BehaviorError {
    #[error("GDP per capita must be strictly positive (got destination {dest}, origin {origin})")]
    NonPositiveGdp { dest: f64, origin: f64 },
    #[error("parameter {name} is invalid: {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

/// The nine behavioural parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorParams<T> {
    pub alpha: T,
    /// Surplus coefficient.
    pub beta0: T,
    /// Family coefficient.
    pub beta1: T,
    /// GDP-differential coefficient.
    pub beta2: T,
    /// Origin income-level coefficient.
    pub beta3: T,
    pub height: T,
    pub shape: T,
    /// Phase of the disaster kernel, in months.
    pub shift: T,
    /// Fraction of monthly income remitted by a sender.
    pub rho: T,
}

impl<T: Scalar> BehaviorParams<T> {
    pub const NAMES: [&'static str; 9] = [
        "alpha", "beta0", "beta1", "beta2", "beta3", "height", "shape", "shift", "rho",
    ];

    /// Reference calibration of the model on the 2010-2019 panel.
    pub fn reference() -> Self {
        Self::from_array([0.02, 1.08, -4.65, 2.83, -3.67, 0.15, 0.19, -0.98, 0.18].map(T::lit))
    }

    /// Default optimizer starting point.
    pub fn initial() -> Self {
        Self::from_array([0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.1, 0.0, 0.1].map(T::lit))
    }

    pub fn to_array(&self) -> [T; 9] {
        [
            self.alpha,
            self.beta0,
            self.beta1,
            self.beta2,
            self.beta3,
            self.height,
            self.shape,
            self.shift,
            self.rho,
        ]
    }

    pub fn from_array(a: [T; 9]) -> Self {
        Self {
            alpha: a[0],
            beta0: a[1],
            beta1: a[2],
            beta2: a[3],
            beta3: a[4],
            height: a[5],
            shape: a[6],
            shift: a[7],
            rho: a[8],
        }
    }

    pub fn validate(&self) -> Result<(), BehaviorError> {
        for (name, v) in Self::NAMES.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(BehaviorError::InvalidParam {
                    name,
                    value: v.to_f64_lossy(),
                });
            }
        }
        if !(self.rho > T::zero() && self.rho < T::one()) {
            return Err(BehaviorError::InvalidParam {
                name: "rho",
                value: self.rho.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// The same kernel written with `shape >= 0` and `shift` in (-6, 6]. The
    /// sinusoid repeats every twelve months and changes sign over six, so
    /// `(shape, shift)`, `(-shape, shift + 6)` and `(shape, shift + 12)` coincide.
    pub fn canonical(&self) -> Self {
        let mut p = *self;
        let (six, twelve) = (T::lit(6.0), T::lit(12.0));
        if p.shape < T::zero() {
            p.shape = -p.shape;
            p.shift = p.shift + six;
        }
        p.shift = p.shift - twelve * ((p.shift - six) / twelve).ceil();
        p
    }

    pub fn cast<U: Scalar>(&self) -> BehaviorParams<U> {
        BehaviorParams::from_array(self.to_array().map(|v| U::lit(v.to_f64_lossy())))
    }
}

/// Inputs to the score of one cohort in one month.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CovariateVector<T> {
    pub surplus: T,
    pub family: T,
    pub delta_gdp: T,
    pub gdp_norm: T,
    pub disaster_score: T,
}

/// Relative GDP-per-capita difference between destination and origin, normalised by
/// the poorer of the two. Antisymmetric under swapping the arguments.
pub fn delta_gdp<T: Scalar>(gdp_dest: T, gdp_origin: T) -> Result<T, BehaviorError> {
    if !(gdp_dest > T::zero() && gdp_origin > T::zero()) {
        return Err(BehaviorError::NonPositiveGdp {
            dest: gdp_dest.to_f64_lossy(),
            origin: gdp_origin.to_f64_lossy(),
        });
    }
    Ok(if gdp_dest > gdp_origin {
        (gdp_dest - gdp_origin) / gdp_origin
    } else {
        -(gdp_origin - gdp_dest) / gdp_dest
    })
}

/// [`delta_gdp`] optionally clamped to [-1, 1].
pub fn delta_gdp_with<T: Scalar>(gdp_dest: T, gdp_origin: T, clamp: bool) -> Result<T, BehaviorError> {
    let d = delta_gdp(gdp_dest, gdp_origin)?;
    Ok(if clamp { d.max(-T::one()).min(T::one()) } else { d })
}

/// Static min-max normaliser for origin GDP per capita.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdpNormalizer<T> {
    pub min: T,
    pub max: T,
}

impl<T: Scalar> GdpNormalizer<T> {
    /// Fits over every value supplied; `None` for an empty input.
    pub fn fit<I: IntoIterator<Item = T>>(values: I) -> Option<Self> {
        let mut it = values.into_iter();
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if min == max {
            log::warn!("all origin GDP values are identical ({min}); normalised GDP is 0 everywhere");
        }
        Some(Self { min, max })
    }

    pub fn is_degenerate(&self) -> bool {
        self.min == self.max
    }

    pub fn normalize(&self, x: T) -> T {
        if self.is_degenerate() {
            return T::zero();
        }
        ((x - self.min) / (self.max - self.min)).max(T::zero()).min(T::one())
    }
}

/// Share of the population affected, capped at one.
pub fn disaster_magnitude<T: Scalar>(affected: T, population: T) -> T {
    let ratio = affected / population;
    if ratio > T::one() {
        log::warn!("affected ({affected}) exceeds population ({population}); magnitude clamped to 1");
        T::one()
    } else {
        ratio
    }
}

/// Score increment of a unit-magnitude disaster `offset` months after onset.
pub fn kernel<T: Scalar>(offset: i32, params: &BehaviorParams<T>) -> T {
    if !(0..DISASTER_WINDOW).contains(&offset) {
        return T::zero();
    }
    let phase = T::PI() / T::lit(6.0) * (T::lit(f64::from(offset)) + params.shift);
    params.height + params.shape * phase.sin()
}

/// One disaster seen from a given month: months since onset and magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisasterShock<T> {
    pub offset: i32,
    pub magnitude: T,
}

/// Joint impact of overlapping shocks.
pub fn score_from_shocks<T, I>(shocks: I, params: &BehaviorParams<T>) -> T
where
    T: Scalar,
    I: IntoIterator<Item = DisasterShock<T>>,
{
    shocks
        .into_iter()
        .fold(T::zero(), |acc, s| acc + s.magnitude * kernel(s.offset, params))
}

/// Disaster score of one origin country in `month`, with magnitudes taken
/// relative to `population`.
pub fn disaster_score<T: Scalar>(
    events: &[DisasterEvent],
    month: YearMonth,
    population: T,
    params: &BehaviorParams<T>,
) -> T {
    score_from_shocks(
        events.iter().map(|e| DisasterShock {
            offset: month.months_since(e.onset_month),
            magnitude: disaster_magnitude(T::lit(e.affected), population),
        }),
        params,
    )
}

/// Linear score, or negative infinity (never remits) when surplus is not positive.
pub fn theta<T: Scalar>(cov: &CovariateVector<T>, params: &BehaviorParams<T>) -> T {
    if cov.surplus > T::zero() {
        params.alpha
            + params.beta0 * cov.surplus
            + params.beta1 * cov.family
            + params.beta2 * cov.delta_gdp
            + params.beta3 * cov.gdp_norm
            + cov.disaster_score
    } else {
        T::neg_infinity()
    }
}

/// Logistic link; negative infinity maps to exactly zero.
pub fn probability<T: Scalar>(theta: T) -> T {
    if theta == T::neg_infinity() {
        T::zero()
    } else if theta >= T::zero() {
        T::one() / (T::one() + (-theta).exp())
    } else {
        let e = theta.exp();
        e / (T::one() + e)
    }
}

/// Derivative of the logistic link with respect to the score.
pub fn probability_slope<T: Scalar>(theta: T) -> T {
    let p = probability(theta);
    p * (T::one() - p)
}

/// Probability increase produced by a score shock `delta`. Maximal over `theta`
/// at `theta = -delta / 2`.
pub fn activation_capacity<T: Scalar>(theta: T, delta: T) -> T {
    probability(theta + delta) - probability(theta)
}

/// One step of a sorted probability profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint<T> {
    /// Cumulative population fraction at the right edge of this step.
    pub cum_population_fraction: T,
    pub probability: T,
}

/// Sorts `(probability, count)` pairs by descending probability and attaches the
/// cumulative population share. Zero-count entries are dropped.
pub fn probability_profile<T: Scalar>(cohorts: &[(T, T)]) -> Vec<ProfilePoint<T>> {
    let mut pts: Vec<(T, T)> = cohorts
        .iter()
        .copied()
        .filter(|&(_, c)| c > T::zero())
        .collect();
    let total = pts.iter().fold(T::zero(), |acc, &(_, c)| acc + c);
    if total <= T::zero() {
        return Vec::new();
    }
    pts.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = T::zero();
    pts.into_iter()
        .map(|(p, c)| {
            cum = cum + c;
            ProfilePoint {
                cum_population_fraction: cum / total,
                probability: p,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type P = BehaviorParams<f64>;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn delta_gdp_examples() {
        assert_eq!(delta_gdp(30000.0, 30000.0).unwrap(), 0.0);
        assert_eq!(delta_gdp(50000.0, 10000.0).unwrap(), 4.0);
        assert_eq!(delta_gdp(10000.0, 50000.0).unwrap(), -4.0);
        assert_eq!(delta_gdp_with(50000.0, 10000.0, true).unwrap(), 1.0);
        assert!(delta_gdp(0.0, 10.0).is_err());
        assert!(delta_gdp(10.0, -1.0).is_err());
    }

    #[test]
    fn gdp_norm_endpoints_and_midpoint() {
        let n = GdpNormalizer::fit([2000.0, 5000.0, 8000.0]).unwrap();
        assert_eq!(n.normalize(2000.0), 0.0);
        assert_eq!(n.normalize(8000.0), 1.0);
        assert_eq!(n.normalize(5000.0), 0.5);
        let flat = GdpNormalizer::fit([3.0, 3.0]).unwrap();
        assert!(flat.is_degenerate());
        assert_eq!(flat.normalize(3.0), 0.0);
        assert!(GdpNormalizer::<f64>::fit([]).is_none());
    }

    #[test]
    fn kernel_examples_with_reference_params() {
        let p = P::reference();
        // m (height + shape sin(pi/6 (k + shift))) evaluated independently.
        let oracle = |k: f64| 0.10 * (0.15 + 0.19 * (std::f64::consts::PI / 6.0 * (k - 0.98)).sin());
        let peak = 0.1 * kernel(4, &p);
        assert!(close(peak, oracle(4.0), 1e-15));
        assert!(close(peak, 0.0340, 5e-5));
        let tail = 0.1 * kernel(10, &p);
        assert!(close(tail, -0.0040, 5e-6));
        assert_eq!(kernel(12, &p), 0.0);
        assert_eq!(kernel(-1, &p), 0.0);
    }

    #[test]
    fn kernel_shape_matches_reported_dynamics() {
        let p = P::reference();
        let values: Vec<f64> = (0..12).map(|k| kernel(k, &p)).collect();
        assert!(values[..9].iter().all(|&v| v > 0.0));
        assert!(values[9..].iter().all(|&v| v < 0.0));
        let argmax = (0..12)
            .max_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap())
            .unwrap();
        assert!((3..=5).contains(&argmax));
    }

    #[test]
    fn disaster_score_sums_events_in_window() {
        let p = P::reference();
        let ev = |id: &str, onset: &str, affected: f64| DisasterEvent {
            event_id: id.into(),
            country: crate::dataio::CountryCode::parse("HTI").unwrap(),
            onset_month: onset.parse().unwrap(),
            hazard: crate::dataio::Hazard::Flood,
            affected,
        };
        let month: YearMonth = "2012-05".parse().unwrap();
        assert_eq!(disaster_score(&[], month, 1000.0, &p), 0.0);
        let a = ev("a", "2012-01", 100.0);
        let b = ev("b", "2012-03", 50.0);
        let far = ev("c", "2010-01", 900.0);
        let sa = disaster_score(std::slice::from_ref(&a), month, 1000.0, &p);
        let sb = disaster_score(std::slice::from_ref(&b), month, 1000.0, &p);
        let both = disaster_score(&[a, b, far], month, 1000.0, &p);
        assert!(close(both, sa + sb, 1e-15));
        assert!(close(sa, 0.1 * kernel(4, &p), 1e-15));
        // Magnitude capped at one.
        let huge = ev("h", "2012-05", 5000.0);
        assert!(close(disaster_score(&[huge], month, 1000.0, &p), kernel(0, &p), 1e-15));
    }

    #[test]
    fn theta_and_probability_fixture() {
        let p = P::reference();
        let cov = CovariateVector {
            surplus: 1.2,
            family: 0.3,
            delta_gdp: 0.8,
            gdp_norm: 0.1,
            disaster_score: 0.0,
        };
        let oracle = 0.02 + 1.08 * 1.2 - 4.65 * 0.3 + 2.83 * 0.8 - 3.67 * 0.1;
        let t = theta(&cov, &p);
        assert!(close(t, oracle, 1e-12));
        assert!(close(t, 1.818, 1e-3));
        let prob = probability(t);
        assert!(close(prob, 1.0 / (1.0 + (-oracle).exp()), 1e-15));
        assert!(close(prob, 0.860, 1e-3));

        let zero = CovariateVector {
            surplus: 1e-300,
            ..CovariateVector::default()
        };
        assert!(close(theta(&zero, &p), 0.02 + 1.08e-300, 1e-15));
    }

    #[test]
    fn surplus_gate_gives_exact_zero() {
        let p = P::reference();
        let cov = CovariateVector {
            surplus: 0.0,
            family: 0.0,
            delta_gdp: 10.0,
            gdp_norm: 0.0,
            disaster_score: 1e6,
        };
        assert_eq!(theta(&cov, &p), f64::NEG_INFINITY);
        assert_eq!(probability(theta(&cov, &p)), 0.0);
        assert_eq!(probability(0.0), 0.5);
    }

    #[test]
    fn activation_examples() {
        for t in [-5.0, 0.0, 3.0] {
            assert_eq!(activation_capacity(t, 0.0), 0.0);
        }
        assert!(activation_capacity(8.0, 0.5) < 0.005);
        for delta in [0.1, 0.34, 1.0] {
            let grid: Vec<f64> = (0..=2000).map(|i| -10.0 + i as f64 * 0.01).collect();
            let best = grid
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    activation_capacity(a, delta)
                        .partial_cmp(&activation_capacity(b, delta))
                        .unwrap()
                })
                .unwrap();
            assert!((best + delta / 2.0).abs() <= 0.01, "delta={delta} best={best}");
        }
    }

    #[test]
    fn profile_examples() {
        let single = probability_profile(&[(0.7, 10.0)]);
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].probability, 0.7);
        assert_eq!(single[0].cum_population_fraction, 1.0);

        let two = probability_profile(&[(0.1, 5.0), (0.9, 5.0)]);
        assert_eq!(two[0].probability, 0.9);
        assert_eq!(two[0].cum_population_fraction, 0.5);
        assert_eq!(two[1].probability, 0.1);
        assert!(probability_profile::<f64>(&[]).is_empty());
        assert!(probability_profile(&[(0.3, 0.0)]).is_empty());
    }

    #[test]
    fn profile_matches_brute_force_sort() {
        let cohorts: Vec<(f64, f64)> = (0..50)
            .map(|i| (((i * 37) % 50) as f64 / 50.0, 1.0 + (i % 7) as f64))
            .collect();
        let prof = probability_profile(&cohorts);
        let mut sorted = cohorts.clone();
        sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let total: f64 = sorted.iter().map(|c| c.1).sum();
        let mut cum = 0.0;
        for (pt, c) in prof.iter().zip(&sorted) {
            cum += c.1;
            assert_eq!(pt.probability, c.0);
            assert!(close(pt.cum_population_fraction, cum / total, 1e-12));
        }
    }

    #[test]
    fn generic_over_f32() {
        let p = BehaviorParams::<f32>::reference();
        let cov = CovariateVector {
            surplus: 1.2f32,
            family: 0.3,
            delta_gdp: 0.8,
            gdp_norm: 0.1,
            disaster_score: 0.0,
        };
        assert!((probability(theta(&cov, &p)) - 0.860).abs() < 1e-3);
        assert_eq!(p.cast::<f64>().beta1, -4.650000095367432);
    }

    #[test]
    fn params_validation() {
        assert!(P::reference().validate().is_ok());
        let mut bad = P::reference();
        bad.rho = 1.0;
        assert!(bad.validate().is_err());
        bad.rho = 0.5;
        bad.shift = f64::NAN;
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn canonical_form_keeps_the_kernel(shape in -1.0f64..1.0, shift in -30.0f64..30.0) {
            let p = P { shape, shift, ..P::reference() };
            let c = p.canonical();
            prop_assert!(c.shape >= 0.0);
            prop_assert!(c.shift > -6.0 && c.shift <= 6.0);
            for k in 0..12 {
                prop_assert!((kernel(k, &p) - kernel(k, &c)).abs() < 1e-9);
            }
        }

        #[test]
        fn delta_gdp_antisymmetric(a in 1.0f64..1e6, b in 1.0f64..1e6) {
            let d1 = delta_gdp(a, b).unwrap();
            let d2 = delta_gdp(b, a).unwrap();
            prop_assert!((d1 + d2).abs() <= 1e-12 * d1.abs().max(1.0));
        }

        #[test]
        fn logistic_slope_matches_central_difference(t in -10.0f64..10.0) {
            let h = 1e-5;
            let fd = (probability(t + h) - probability(t - h)) / (2.0 * h);
            prop_assert!((fd - probability_slope(t)).abs() < 1e-6);
        }

        #[test]
        fn probability_monotone_in_covariates(
            surplus in 0.05f64..3.0, family in 0.0f64..1.0,
            dg in -2.0f64..2.0, g in 0.0f64..1.0,
        ) {
            let p = P::reference();
            let base = CovariateVector { surplus, family, delta_gdp: dg, gdp_norm: g, disaster_score: 0.0 };
            let pr = |c: CovariateVector<f64>| probability(theta(&c, &p));
            let h = 1e-4;
            let p0 = pr(base);
            let up_surplus = pr(CovariateVector { surplus: surplus + h, ..base });
            let up_delta = pr(CovariateVector { delta_gdp: dg + h, ..base });
            let up_family = pr(CovariateVector { family: family + h, ..base });
            let up_gdp = pr(CovariateVector { gdp_norm: g + h, ..base });
            prop_assert!(up_surplus > p0);
            prop_assert!(up_delta > p0);
            prop_assert!(up_family < p0);
            prop_assert!(up_gdp < p0);
        }

        #[test]
        fn surplus_gate_holds_for_any_disaster(score in -1e3f64..1e9, s in -5.0f64..=0.0) {
            let cov = CovariateVector { surplus: s, family: 0.0, delta_gdp: 1.0, gdp_norm: 0.0, disaster_score: score };
            prop_assert_eq!(probability(theta(&cov, &P::reference())), 0.0);
        }

        #[test]
        fn activation_peak_at_minus_half_delta(delta in 0.01f64..3.0, off in 0.05f64..3.0) {
            let peak = activation_capacity(-delta / 2.0, delta);
            prop_assert!(peak >= activation_capacity(-delta / 2.0 + off, delta));
            prop_assert!(peak >= activation_capacity(-delta / 2.0 - off, delta));
        }

        #[test]
        fn probability_strictly_increasing(a in -20.0f64..20.0, d in 1e-3f64..5.0) {
            prop_assert!(probability(a + d) > probability(a));
        }
    }
}
