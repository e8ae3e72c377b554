//! Preference priors `P(o)` over observation slots.

use crate::error::{Error, Result};
use crate::model::{discrete_code, Observation};
use crate::scalar::Real;

/// Floor applied to every component log-density during planning.
pub const LOG_DENSITY_FLOOR: f64 = -1e3;

/// Floor used when exporting values for plotting (lane exits shown at -100).
pub const DISPLAY_FLOOR: f64 = -100.0;

#[derive(Debug, Clone, PartialEq)]
pub enum PreferenceForm<T> {
    Gaussian {
        mean: T,
        sd: T,
    },
    /// Triangular density with mode `center` on `[lower, upper]`.
    Triangular {
        center: T,
        lower: T,
        upper: T,
    },
    /// Log-probability per discrete code; codes not listed get the floor.
    Categorical {
        table: Vec<(i64, T)>,
    },
    /// Gaze prior given as `log P(on-road)`; code 1 is on-road, 0 off-road.
    Bernoulli {
        log_p_on: T,
    },
}

/// `log(1 - exp(log_p_on))`, the complementary log-probability of a
/// Bernoulli given in log space. `-inf` when `log_p_on >= 0`.
pub fn bernoulli_log_complement<T: Real>(log_p_on: T) -> T {
    if log_p_on >= T::zero() {
        T::neg_infinity()
    } else {
        (-(log_p_on.exp())).ln_1p()
    }
}

impl<T: Real> PreferenceForm<T> {
    /// Raw log-density; may be `-inf`.
    pub fn raw_log_density(&self, x: T) -> T {
        match self {
            PreferenceForm::Gaussian { mean, sd } => {
                let z = (x - *mean) / *sd;
                -T::lit(0.5) * (T::TAU()).ln() - sd.ln() - T::lit(0.5) * z * z
            }
            PreferenceForm::Triangular { center, lower, upper } => {
                let width = *upper - *lower;
                let density = if x <= *lower || x >= *upper {
                    T::zero()
                } else if x <= *center {
                    T::lit(2.0) * (x - *lower) / (width * (*center - *lower))
                } else {
                    T::lit(2.0) * (*upper - x) / (width * (*upper - *center))
                };
                density.ln()
            }
            PreferenceForm::Categorical { table } => {
                let code = discrete_code(x);
                table.iter().find(|(c, _)| *c == code).map(|&(_, lp)| lp).unwrap_or(T::neg_infinity())
            }
            PreferenceForm::Bernoulli { log_p_on } => {
                let on = log_p_on.min(T::zero());
                match discrete_code(x) {
                    1 => on,
                    0 => bernoulli_log_complement(on),
                    _ => T::neg_infinity(),
                }
            }
        }
    }

    pub fn log_density(&self, x: T, floor: T) -> T {
        let v = self.raw_log_density(x);
        if v.is_nan() || v < floor {
            floor
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceComponent<T> {
    pub name: String,
    pub slot: usize,
    pub form: PreferenceForm<T>,
}

/// Set of independent prior log-densities over observation slots.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceModel<T> {
    pub slots: usize,
    pub components: Vec<PreferenceComponent<T>>,
}

impl<T: Real> PreferenceModel<T> {
    pub fn new(slots: usize) -> Self {
        PreferenceModel { slots, components: Vec::new() }
    }

    pub fn with(mut self, name: &str, slot: usize, form: PreferenceForm<T>) -> Self {
        assert!(slot < self.slots, "preference slot {slot} outside schema");
        self.components.push(PreferenceComponent { name: name.to_string(), slot, form });
        self
    }

    pub fn component(&self, name: &str) -> Option<&PreferenceComponent<T>> {
        self.components.iter().find(|c| c.name == name)
    }

    /// Sum of component log-densities over non-null slots, each floored at
    /// [`LOG_DENSITY_FLOOR`].
    pub fn log_density(&self, obs: &Observation<T>) -> Result<T> {
        self.log_density_with_floor(obs, T::lit(LOG_DENSITY_FLOOR))
    }

    pub fn log_density_with_floor(&self, obs: &Observation<T>, floor: T) -> Result<T> {
        if obs.len() != self.slots {
            return Err(Error::SchemaMismatch { expected: self.slots, got: obs.len() });
        }
        Ok(self.sum_unchecked(obs, floor))
    }

    pub(crate) fn sum_unchecked(&self, obs: &Observation<T>, floor: T) -> T {
        self.components
            .iter()
            .filter_map(|c| obs.slots[c.slot].map(|x| c.form.log_density(x, floor)))
            .fold(T::zero(), |a, b| a + b)
    }

    /// Model restricted to the components whose names satisfy `keep`.
    pub fn subset(&self, keep: impl Fn(&str) -> bool) -> Self {
        PreferenceModel {
            slots: self.slots,
            components: self.components.iter().filter(|c| keep(&c.name)).cloned().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn obs(slots: &[Option<f64>]) -> Observation<f64> {
        Observation::new(slots.to_vec())
    }

    #[test]
    fn gaussian_at_mean() {
        let p = PreferenceModel::new(2).with("speed", 0, PreferenceForm::Gaussian { mean: 10.0, sd: 1.0 });
        let v = p.log_density(&obs(&[Some(10.0), None])).unwrap();
        assert_abs_diff_eq!(v, -0.918_938_533_204_672_7, epsilon = 1e-12);
    }

    #[test]
    fn triangular_peak() {
        let p = PreferenceModel::new(1).with(
            "lane",
            0,
            PreferenceForm::Triangular { center: 0.0, lower: -1.5, upper: 1.5 },
        );
        let v = p.log_density(&obs(&[Some(0.0)])).unwrap();
        assert_abs_diff_eq!(v, (2.0f64 / 3.0).ln(), epsilon = 1e-12);
        assert_eq!(p.log_density(&obs(&[Some(1.5)])).unwrap(), LOG_DENSITY_FLOOR);
        assert_eq!(p.log_density(&obs(&[Some(-7.0)])).unwrap(), LOG_DENSITY_FLOOR);
        // halfway down the right flank the density halves
        let half = p.log_density(&obs(&[Some(0.75)])).unwrap();
        assert_abs_diff_eq!(half, (1.0f64 / 3.0).ln(), epsilon = 1e-12);
    }

    #[test]
    fn all_null_is_zero_and_schema_checked() {
        let p = PreferenceModel::new(2).with("speed", 0, PreferenceForm::Gaussian { mean: 10.0, sd: 1.0 });
        assert_eq!(p.log_density(&obs(&[None, None])).unwrap(), 0.0);
        assert!(p.log_density(&obs(&[None])).is_err());
    }

    #[test]
    fn categorical_absolute_preference() {
        let p = PreferenceModel::new(1).with(
            "conflict",
            0,
            PreferenceForm::Categorical { table: vec![(0, 0.0), (1, LOG_DENSITY_FLOOR)] },
        );
        assert_eq!(p.log_density(&obs(&[Some(0.0)])).unwrap(), 0.0);
        assert_eq!(p.log_density(&obs(&[Some(1.0)])).unwrap(), -1000.0);
        assert_eq!(p.log_density_with_floor(&obs(&[Some(1.0)]), DISPLAY_FLOOR).unwrap(), -100.0);
    }

    #[test]
    fn bernoulli_baseline_floors_off_road() {
        let form = PreferenceForm::Bernoulli { log_p_on: 0.0 };
        assert_eq!(form.log_density(0.0, LOG_DENSITY_FLOOR), LOG_DENSITY_FLOOR);
        assert_eq!(form.log_density(1.0, LOG_DENSITY_FLOOR), 0.0);
        let vts = PreferenceForm::Bernoulli { log_p_on: -7.0 };
        assert_abs_diff_eq!(vts.log_density(1.0, -1e3), -7.0);
        assert_abs_diff_eq!(vts.log_density(0.0, -1e3), (1.0 - (-7.0f64).exp()).ln(), epsilon = 1e-15);
    }

    #[test]
    fn gaussian_argmax_is_mean() {
        let form = PreferenceForm::Gaussian { mean: 2.5, sd: 0.3 };
        let best = (0..=1000)
            .map(|i| i as f64 * 0.005)
            .max_by(|a, b| form.raw_log_density(*a).total_cmp(&form.raw_log_density(*b)))
            .unwrap();
        assert_abs_diff_eq!(best, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn works_in_f32() {
        let form = PreferenceForm::<f32>::Gaussian { mean: 10.0, sd: 1.0 };
        assert!((form.log_density(10.0, -1e3) + 0.918_938_5).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn bernoulli_normalized(lp in -20.0f64..-1e-6) {
            let off = bernoulli_log_complement(lp);
            prop_assert!((lp.exp() + off.exp() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn additive_over_components(v in 5.0f64..15.0, y in -2.0f64..2.0, c in 0i64..2) {
            let full = PreferenceModel::new(3)
                .with("speed", 0, PreferenceForm::Gaussian { mean: 10.0, sd: 1.0 })
                .with("lane", 1, PreferenceForm::Triangular { center: 0.0, lower: -1.5, upper: 1.5 })
                .with("conflict", 2, PreferenceForm::Categorical { table: vec![(0, 0.0), (1, -1e3)] });
            let o = obs(&[Some(v), Some(y), Some(c as f64)]);
            let a = full.subset(|n| n == "speed").log_density(&o).unwrap();
            let b = full.subset(|n| n != "speed").log_density(&o).unwrap();
            let all = full.log_density(&o).unwrap();
            prop_assert!((a + b - all).abs() < 1e-9);
            prop_assert!(all.is_finite());
        }
    }
}
