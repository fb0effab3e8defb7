use rand::Rng;

use crate::{Error, Result};

/// Single-parameter preference density over idle-zone temperatures: flat at
/// height `h` up to the elbow `t_hat`, then linear down to zero at `t_max`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TrapezoidPdf {
    t_min: f64,
    t_max: f64,
    t_hat: f64,
    h: f64,
}

impl TrapezoidPdf {
    pub fn new(t_min: f64, t_max: f64, t_hat: f64) -> Result<Self> {
        if !(t_min < t_max) || !t_min.is_finite() || !t_max.is_finite() {
            return Err(Error::Domain(format!("need t_min < t_max, got [{t_min}, {t_max}]")));
        }
        if !(t_min..=t_max).contains(&t_hat) {
            return Err(Error::Domain(format!(
                "elbow {t_hat} outside [{t_min}, {t_max}]"
            )));
        }
        Ok(TrapezoidPdf {
            t_min,
            t_max,
            t_hat,
            h: 2.0 / (t_max + t_hat - 2.0 * t_min),
        })
    }

    pub fn uniform(t_min: f64, t_max: f64) -> Result<Self> {
        Self::new(t_min, t_max, t_max)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }
    pub fn t_max(&self) -> f64 {
        self.t_max
    }
    pub fn t_hat(&self) -> f64 {
        self.t_hat
    }
    pub fn height(&self) -> f64 {
        self.h
    }

    fn check(&self, t: f64) -> Result<()> {
        if (self.t_min..=self.t_max).contains(&t) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "temperature {t} outside [{}, {}]",
                self.t_min, self.t_max
            )))
        }
    }

    pub fn density(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.density_unchecked(t))
    }

    pub(crate) fn density_unchecked(&self, t: f64) -> f64 {
        if t <= self.t_hat {
            self.h
        } else {
            self.h * (self.t_max - t) / (self.t_max - self.t_hat)
        }
    }

    /// Fraction of idle zones at or above `u`.
    pub fn survival(&self, u: f64) -> Result<f64> {
        self.check(u)?;
        Ok(self.tail(u).0)
    }

    /// Cumulative distribution, defined on the whole real line.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.t_min {
            0.0
        } else if x >= self.t_max {
            1.0
        } else {
            1.0 - self.tail(x).0
        }
    }

    /// `(P[T >= u], E[(T - t_min) 1{T >= u}])` for `u` clamped into the
    /// support. Multiplying the second value by `b` gives the expected
    /// utility of the zones that accept threshold `u`.
    pub fn tail(&self, u: f64) -> (f64, f64) {
        let (a, c, m, h) = (self.t_min, self.t_hat, self.t_max, self.h);
        let u = u.clamp(a, m);
        let w = m - c;
        let slope_part = |v: f64| {
            if w <= 0.0 {
                return (0.0, 0.0);
            }
            let l = m - v;
            let mass = h * l * l / (2.0 * w);
            // Substituting s = m - T gives int_0^l ((m - a) - s) s ds.
            let moment = h / w * ((m - a) * l * l / 2.0 - l * l * l / 3.0);
            (mass, moment)
        };
        if u <= c {
            let (sm, sx) = slope_part(c);
            let flat_mass = h * (c - u);
            let flat_moment = h * ((c - a) * (c - a) - (u - a) * (u - a)) / 2.0;
            (flat_mass + sm, flat_moment + sx)
        } else {
            slope_part(u)
        }
    }

    /// `E[T - t_min]`.
    pub fn mean_excess(&self) -> f64 {
        self.tail(self.t_min).1
    }

    /// Log density, `-inf` outside the support or on the zero at `t_max`.
    pub fn log_density(&self, t: f64) -> f64 {
        if !(self.t_min..=self.t_max).contains(&t) {
            return f64::NEG_INFINITY;
        }
        self.density_unchecked(t).ln()
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let q: f64 = rng.random();
        let f_elbow = self.h * (self.t_hat - self.t_min);
        if q <= f_elbow {
            self.t_min + q / self.h
        } else {
            let w = self.t_max - self.t_hat;
            self.t_max - (2.0 * w * (1.0 - q) / self.h).sqrt()
        }
    }
}
