use crate::model::TrapezoidPdf;
use crate::{Error, Result};

/// Minimum number of in-support samples for a trapezoid fit.
pub const MIN_FIT_SAMPLES: usize = 100;

const PRESCAN: usize = 200;
const FIT_TOL: f64 = 1e-4;

/// Log-likelihood of the elbow for a fixed sample, evaluated in
/// `O(log n)` from sorted samples and suffix sums of `ln(t_max - x)`.
struct Likelihood {
    t_min: f64,
    t_max: f64,
    sorted: Vec<f64>,
    /// `suffix[j] = sum_{m >= j} ln(t_max - sorted[m])`.
    suffix: Vec<f64>,
}

impl Likelihood {
    fn new(samples: &[f64], t_min: f64, t_max: f64) -> Result<Self> {
        if !(t_min < t_max) {
            return Err(Error::Domain("need t_min < t_max".into()));
        }
        let mut sorted: Vec<f64> = samples
            .iter()
            .copied()
            .filter(|x| *x >= t_min && *x < t_max)
            .collect();
        if sorted.len() < MIN_FIT_SAMPLES {
            return Err(Error::InsufficientData {
                needed: MIN_FIT_SAMPLES,
                got: sorted.len(),
            });
        }
        sorted.sort_by(f64::total_cmp);
        let mut suffix = vec![0.0; sorted.len() + 1];
        for j in (0..sorted.len()).rev() {
            suffix[j] = suffix[j + 1] + (t_max - sorted[j]).ln();
        }
        Ok(Likelihood {
            t_min,
            t_max,
            sorted,
            suffix,
        })
    }

    fn eval(&self, t_hat: f64) -> f64 {
        let n = self.sorted.len() as f64;
        let h = 2.0 / (self.t_max + t_hat - 2.0 * self.t_min);
        let w = self.t_max - t_hat;
        let first_above = self.sorted.partition_point(|x| *x <= t_hat);
        let above = (self.sorted.len() - first_above) as f64;
        if above == 0.0 {
            return n * h.ln();
        }
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        n * h.ln() + self.suffix[first_above] - above * w.ln()
    }
}

/// Log-likelihood of `t_hat` for the in-support part of `samples`.
pub fn trapezoid_log_likelihood(samples: &[f64], t_min: f64, t_max: f64, t_hat: f64) -> Result<f64> {
    Ok(Likelihood::new(samples, t_min, t_max)?.eval(t_hat))
}

/// Maximum-likelihood elbow of a trapezoid on `[t_min, t_max]`. A coarse
/// scan brackets the maximum, golden-section search refines it to 1e-4.
/// Only samples inside the support are used.
pub fn fit_trapezoid(samples: &[f64], t_min: f64, t_max: f64) -> Result<f64> {
    let ll = Likelihood::new(samples, t_min, t_max)?;
    let step = (t_max - t_min) / PRESCAN as f64;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for g in 0..=PRESCAN {
        let v = ll.eval(t_min + g as f64 * step);
        if v > best.0 {
            best = (v, g);
        }
    }
    let mut lo = t_min + best.1.saturating_sub(1) as f64 * step;
    let mut hi = (t_min + (best.1 + 1) as f64 * step).min(t_max);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = ll.eval(x1);
    let mut f2 = ll.eval(x2);
    while hi - lo > FIT_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = ll.eval(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = ll.eval(x1);
        }
    }
    // The endpoints of the bracket are candidates too, e.g. a uniform sample
    // whose optimum sits on t_max.
    let mid = 0.5 * (lo + hi);
    let mut out = (ll.eval(mid), mid);
    for cand in [t_min + best.1 as f64 * step, lo, hi] {
        let v = ll.eval(cand);
        if v > out.0 {
            out = (v, cand);
        }
    }
    Ok(out.1)
}

/// Kolmogorov-Smirnov distance between the empirical distribution of the
/// in-support samples and `pdf`.
pub fn ks_distance(samples: &[f64], pdf: &TrapezoidPdf) -> Result<f64> {
    let mut x: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|v| *v >= pdf.t_min() && *v <= pdf.t_max())
        .collect();
    if x.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (j, v) in x.iter().enumerate() {
        let f = pdf.cdf(*v);
        d = d.max((j + 1) as f64 / n - f).max(f - j as f64 / n);
    }
    Ok(d)
}

/// Least-squares line of the fitted elbow on the signal level.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct RegressionFit {
    pub alpha0: f64,
    pub alpha1: f64,
    pub r_squared: f64,
    /// Residual standard error, the spread of the noise term.
    pub residual_se: f64,
    pub n: usize,
}

pub fn regress_t_hat_on_y(pairs: &[(f64, f64)]) -> Result<RegressionFit> {
    if pairs.len() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: pairs.len(),
        });
    }
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if ys.len() < 3 {
        return Err(Error::Degenerate(format!(
            "regression needs at least 3 distinct y values, got {}",
            ys.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let alpha1 = sxy / sxx;
    let alpha0 = my - alpha1 * mx;
    let sse: f64 = pairs.iter().map(|p| (p.1 - alpha0 - alpha1 * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RegressionFit {
        alpha0,
        alpha1,
        r_squared,
        residual_se: (sse / (n - 2.0)).sqrt(),
        n: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_samples_fit_near_t_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>() * 10.0).collect();
        let t = fit_trapezoid(&x, 0.0, 10.0).unwrap();
        assert!(t > 9.5, "{t}");
    }

    #[test]
    fn fit_beats_random_probes() {
        let pdf = TrapezoidPdf::new(0.0, 10.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..5_000).map(|_| pdf.sample(&mut rng)).collect();
        let t = fit_trapezoid(&x, 0.0, 10.0).unwrap();
        let best = trapezoid_log_likelihood(&x, 0.0, 10.0, t).unwrap();
        for _ in 0..50 {
            let probe = rng.random::<f64>() * 10.0;
            assert!(best >= trapezoid_log_likelihood(&x, 0.0, 10.0, probe).unwrap());
        }
    }

    #[test]
    fn too_few_samples() {
        let x = vec![1.0; 99];
        assert!(matches!(
            fit_trapezoid(&x, 0.0, 10.0),
            Err(Error::InsufficientData { needed: 100, got: 99 })
        ));
    }

    #[test]
    fn exact_line_is_recovered() {
        let pairs: Vec<(f64, f64)> = (0..12).map(|j| {
            let y = -1.0 + j as f64 * 0.2;
            (y, 7.0 - 2.0 * y)
        }).collect();
        let f = regress_t_hat_on_y(&pairs).unwrap();
        assert!((f.alpha0 - 7.0).abs() < 1e-12);
        assert!((f.alpha1 + 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);

        let flat: Vec<(f64, f64)> = (0..12).map(|j| (0.5, j as f64)).collect();
        assert!(matches!(regress_t_hat_on_y(&flat), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ks_of_exact_sample_is_small() {
        let pdf = TrapezoidPdf::new(0.0, 10.0, 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..20_000).map(|_| pdf.sample(&mut rng)).collect();
        assert!(ks_distance(&x, &pdf).unwrap() < 0.015);
        let other = TrapezoidPdf::new(0.0, 10.0, 1.0).unwrap();
        assert!(ks_distance(&x, &other).unwrap() > 0.1);
    }
}
