//! Entropy estimators for the posterior predictive distribution of
//! observations: plug-in Shannon entropy for the discrete part, a
//! leave-one-out Gaussian KDE for continuous slots.

use crate::model::{discrete_code, Observation, Schema, SlotKind};
use crate::scalar::Real;

/// Kernel contributions beyond this many bandwidths are below `e^-32`.
const KERNEL_CUTOFF: f64 = 8.0;

/// Sample standard deviation (n - 1).
pub fn sample_sd<T: Real>(values: &[T]) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let nf = T::from_usize_lossy(n);
    let mean = values.iter().copied().sum::<T>() / nf;
    let ss: T = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (ss / (nf - T::one())).sqrt()
}

fn quantile_sorted<T: Real>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Silverman's rule of thumb `0.9 · min(σ, IQR/1.34) · n^(-1/5)` on sorted
/// data, falling back to σ when the interquartile range is zero.
pub fn silverman_bandwidth<T: Real>(sorted: &[T]) -> T {
    let n = sorted.len();
    if n < 2 {
        return T::zero();
    }
    let sd = sample_sd(sorted);
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > T::zero() { sd.min(iqr / T::lit(1.34)) } else { sd };
    T::lit(0.9) * spread * T::from_usize_lossy(n).powf(T::lit(-0.2))
}

/// Differential entropy estimate: mean negative log of the leave-one-out
/// Gaussian kernel density at each sample. The bandwidth is Silverman's
/// rule, floored at `min_bandwidth`.
pub fn kde_entropy<T: Real>(values: &[T], min_bandwidth: T) -> T {
    let n = values.len();
    assert!(n >= 2, "kde entropy needs at least two samples");
    let mut xs = values.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let h = silverman_bandwidth(&xs).max(min_bandwidth);
    let norm = T::from_usize_lossy(n - 1) * h * T::TAU().sqrt();
    if xs[0] == xs[n - 1] {
        return norm.ln() - T::from_usize_lossy(n - 1).ln();
    }

    let cut = T::lit(KERNEL_CUTOFF) * h;
    let half = T::lit(0.5);
    let mut dens = vec![T::zero(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = xs[j] - xs[i];
            if d > cut {
                break;
            }
            let z = d / h;
            let k = (-half * z * z).exp();
            dens[i] = dens[i] + k;
            dens[j] = dens[j] + k;
        }
    }
    let mut total = T::zero();
    for i in 0..n {
        let log_k = if dens[i] > T::zero() {
            dens[i].ln()
        } else {
            // isolated sample: the nearest neighbour dominates the sum
            let left = if i > 0 { xs[i] - xs[i - 1] } else { T::infinity() };
            let right = if i + 1 < n { xs[i + 1] - xs[i] } else { T::infinity() };
            let z = left.min(right) / h;
            -half * z * z
        };
        total = total + norm.ln() - log_k;
    }
    total / T::from_usize_lossy(n)
}

/// Plug-in Shannon entropy (nats) of the empirical distribution of `keys`.
pub fn discrete_entropy<T: Real, K: Ord>(mut keys: Vec<K>) -> T {
    let n = keys.len();
    if n == 0 {
        return T::zero();
    }
    keys.sort();
    let nf = T::from_usize_lossy(n);
    let mut h = T::zero();
    let mut run = 1usize;
    for i in 1..=n {
        if i < n && keys[i] == keys[i - 1] {
            run += 1;
        } else {
            let p = T::from_usize_lossy(run) / nf;
            h = h - p * p.ln();
            run = 1;
        }
    }
    h
}

/// Entropy of a continuous slot measured at resolution `r`:
/// `max(0, Ĥ - ln r)`, the entropy of the observation quantized to bins of
/// width `r`. The KDE bandwidth floor is the bandwidth whose kernel has
/// exactly entropy `ln r`, so a point mass scores 0.
pub fn resolved_entropy<T: Real>(values: &[T], resolution: T) -> T {
    if values.len() < 2 {
        return T::zero();
    }
    let h_min = resolution / (T::TAU() * T::E()).sqrt();
    (kde_entropy(values, h_min) - resolution.ln()).max(T::zero())
}

/// Entropy of one time step of predicted observations.
///
/// Factorized as the Shannon entropy of the joint discrete part (discrete
/// codes plus the null pattern of every slot) plus, for each continuous
/// slot, the fraction of rows observing it times its resolved KDE entropy
/// over those rows.
pub fn predictive_entropy<T: Real>(rows: &[Observation<T>], schema: &Schema) -> T {
    let n = rows.len();
    if n < 2 {
        return T::zero();
    }
    let keys: Vec<Vec<i64>> = rows
        .iter()
        .map(|o| {
            schema
                .slots
                .iter()
                .enumerate()
                .map(|(i, spec)| match (o.slots[i], &spec.kind) {
                    (None, _) => i64::MIN,
                    (Some(v), SlotKind::Discrete { .. }) => discrete_code(v),
                    (Some(_), SlotKind::Continuous) => 0,
                })
                .collect()
        })
        .collect();
    let mut h = discrete_entropy::<T, _>(keys);

    let nf = T::from_usize_lossy(n);
    let mut buf = Vec::with_capacity(n);
    for (i, spec) in schema.slots.iter().enumerate() {
        if spec.is_discrete() {
            continue;
        }
        buf.clear();
        buf.extend(rows.iter().filter_map(|o| o.slots[i]));
        if buf.len() < 2 {
            continue;
        }
        let frac = T::from_usize_lossy(buf.len()) / nf;
        h = h + frac * resolved_entropy(&buf, T::lit(spec.resolution));
    }
    h
}
