use crate::model::{Direction, ModelParams, State};
use crate::{Error, Result};

pub const N_FEATURES: usize = 12;

/// Order of the six per-direction features.
pub const FEATURE_NAMES: [&str; 6] = ["i^2", "i", "y^2", "y", "i*y", "1"];

/// Affine map of the active count onto `[-1, 1]`:
/// `i' = 2 (i - i_lo) / (i_hi - i_lo) - 1`. The signal level already lives
/// in `[-1, 1]` and is used as is.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FeatureScaling {
    pub i_lo: f64,
    pub i_hi: f64,
}

impl FeatureScaling {
    pub fn for_params(params: &ModelParams) -> Self {
        FeatureScaling {
            i_lo: f64::from(params.n1()),
            i_hi: f64::from(params.n2()),
        }
    }

    #[inline]
    pub fn rescale(&self, i: f64) -> f64 {
        if self.i_hi > self.i_lo {
            2.0 * (i - self.i_lo) / (self.i_hi - self.i_lo) - 1.0
        } else {
            0.0
        }
    }

    /// `(a, c)` with `i' = a i + c`.
    pub fn affine(&self) -> (f64, f64) {
        if self.i_hi > self.i_lo {
            let a = 2.0 / (self.i_hi - self.i_lo);
            (a, -1.0 - a * self.i_lo)
        } else {
            (0.0, 0.0)
        }
    }
}

/// Features of already rescaled coordinates. The block of the inactive
/// direction is zero; the up block comes first.
#[inline]
pub fn features_scaled(i: f64, y: f64, dir: Direction) -> [f64; N_FEATURES] {
    let mut phi = [0.0; N_FEATURES];
    let off = match dir {
        Direction::Up => 0,
        Direction::Down => 6,
    };
    phi[off] = i * i;
    phi[off + 1] = i;
    phi[off + 2] = y * y;
    phi[off + 3] = y;
    phi[off + 4] = i * y;
    phi[off + 5] = 1.0;
    phi
}

pub fn feature_vector(params: &ModelParams, s: &State) -> [f64; N_FEATURES] {
    let sc = FeatureScaling::for_params(params);
    features_scaled(sc.rescale(f64::from(s.i)), params.y_of(s.k), s.dir)
}

/// The twelve parameters of the quadratic value approximation, in the
/// rescaled basis, plus the scaling that defines that basis.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct WeightVector {
    pub r: [f64; N_FEATURES],
    pub scaling: FeatureScaling,
}

impl WeightVector {
    pub fn zeros(scaling: FeatureScaling) -> Self {
        WeightVector {
            r: [0.0; N_FEATURES],
            scaling,
        }
    }

    pub fn new(r: [f64; N_FEATURES], scaling: FeatureScaling) -> Result<Self> {
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("weights must be finite".into()));
        }
        Ok(WeightVector { r, scaling })
    }

    /// Approximate cost-to-go at raw coordinates `(i, y, D)`.
    #[inline]
    pub fn value_at(&self, i: f64, y: f64, dir: Direction) -> f64 {
        let phi = features_scaled(self.scaling.rescale(i), y, dir);
        phi.iter().zip(&self.r).map(|(a, b)| a * b).sum()
    }

    pub fn value(&self, params: &ModelParams, s: &State) -> f64 {
        self.value_at(f64::from(s.i), params.y_of(s.k), s.dir)
    }

    /// The same function written in raw `(i, y)`: coefficients of
    /// `(i^2, i, y^2, y, i*y, 1)` per block, up block first.
    pub fn to_raw(&self) -> [f64; N_FEATURES] {
        let (a, c) = self.scaling.affine();
        let mut out = [0.0; N_FEATURES];
        for off in [0, 6] {
            let r = &self.r[off..off + 6];
            out[off] = r[0] * a * a;
            out[off + 1] = 2.0 * r[0] * a * c + r[1] * a;
            out[off + 2] = r[2];
            out[off + 3] = r[3] + r[4] * c;
            out[off + 4] = r[4] * a;
            out[off + 5] = r[0] * c * c + r[1] * c + r[5];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamSpec;
    use approx::assert_relative_eq;

    #[test]
    fn example_vectors() {
        let up = features_scaled(0.3, 0.2, Direction::Up);
        assert!(up[6..].iter().all(|&v| v == 0.0));
        let dn = features_scaled(0.5, -1.0, Direction::Down);
        assert!(dn[..6].iter().all(|&v| v == 0.0));
        assert_eq!(&dn[6..], &[0.25, 0.5, 1.0, -1.0, -0.5, 1.0]);
    }

    #[test]
    fn constant_feature_in_one_block() {
        let p = ParamSpec::reference().build().unwrap();
        for s in p.grid().states() {
            let phi = feature_vector(&p, &s);
            assert_eq!(phi[5] + phi[11], 1.0);
            assert_eq!(phi[5] * phi[11], 0.0);
            assert!(phi[1].abs() <= 1.0 && phi[7].abs() <= 1.0);
        }
    }

    #[test]
    fn raw_coefficients_reproduce_values() {
        let sc = FeatureScaling { i_lo: 10.0, i_hi: 90.0 };
        let w = WeightVector::new(
            [1.5, -0.3, 0.7, 2.0, -1.1, 4.0, 0.2, 0.9, -0.4, 1.3, 0.6, -2.0],
            sc,
        )
        .unwrap();
        let raw = w.to_raw();
        for (i, y, dir) in [(10.0, -1.0, Direction::Up), (37.0, 0.3, Direction::Down), (90.0, 1.0, Direction::Up)] {
            let off = if dir == Direction::Up { 0 } else { 6 };
            let r = &raw[off..off + 6];
            let direct = r[0] * i * i + r[1] * i + r[2] * y * y + r[3] * y + r[4] * i * y + r[5];
            assert_relative_eq!(direct, w.value_at(i, y, dir), epsilon = 1e-9);
        }
    }
}
