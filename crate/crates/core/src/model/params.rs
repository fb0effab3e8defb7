use sha2::{Digest, Sha256};

use super::{Grid, TrapezoidPdf};
use crate::{Error, Result};

/// Signal update interval to uniformized period ratio used when `tau_y` is
/// not given explicitly.
pub const DEFAULT_TAU_RATIO: f64 = 10.0;

/// Primary problem constants, as supplied by a user or a config file.
///
/// Derived quantities (`kappa`, `dt`, `alpha`, the signal jump
/// probabilities) are not part of this struct; they only exist on a
/// validated [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    /// Number of appliances.
    pub n: u32,
    /// Lower bound on the active count.
    pub n1: u32,
    /// Upper bound on the active count.
    pub n2: u32,
    /// Contracted consumption level.
    pub n_bar: f64,
    /// Maximum reserve.
    pub r: f64,
    /// Tracking penalty coefficient.
    pub k: f64,
    /// Rate at which an idle appliance looks at the price.
    pub lambda: f64,
    /// Cooling cycle completion rate.
    pub mu: f64,
    /// Utility slope, price per degree.
    pub b: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Intercept of the elbow temperature regression on `y`.
    pub alpha0: f64,
    /// Slope of the elbow temperature regression on `y`, negative.
    pub alpha1: f64,
    /// Signal step. `1 / delta_y` must be an integer.
    pub delta_y: f64,
    /// Signal update interval. `None` picks `tau_y = 10 dt`.
    pub tau_y: Option<f64>,
    /// Continuous discount rate.
    pub r_disc: f64,
}

impl Default for ParamSpec {
    fn default() -> Self {
        let (t_min, t_max) = (0.0, 10.0);
        ParamSpec {
            n: 100,
            n1: 0,
            n2: 100,
            n_bar: 50.0,
            r: 10.0,
            k: 100.0,
            lambda: 2.0,
            mu: 0.5,
            b: 1.0,
            t_min,
            t_max,
            alpha0: 0.5 * (t_min + t_max),
            alpha1: -0.2 * (t_max - t_min),
            delta_y: 0.1,
            tau_y: None,
            r_disc: 10.0,
        }
    }
}

impl ParamSpec {
    /// The 100-appliance building used throughout the examples and tests.
    pub fn reference() -> Self {
        Self::default()
    }

    /// The reference building resized to `n` appliances with `levels`
    /// signal steps on each side of zero: `n_bar = n / 2`, `R = n / 10`,
    /// `delta_y = 1 / levels`. `scaled(100, 10)` is the reference.
    pub fn scaled(n: u32, levels: u32) -> Self {
        ParamSpec {
            n,
            n1: 0,
            n2: n,
            n_bar: f64::from(n) / 2.0,
            r: f64::from(n) / 10.0,
            delta_y: 1.0 / f64::from(levels),
            ..Self::default()
        }
    }

    pub fn build(self) -> Result<ModelParams> {
        ModelParams::new(self)
    }
}

/// Validated parameters plus the uniformization quantities derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    spec: ParamSpec,
    tau_y: f64,
    k_max: i32,
    kappa: f64,
    dt: f64,
    alpha: f64,
    gamma: f64,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

impl ModelParams {
    pub fn new(spec: ParamSpec) -> Result<Self> {
        let reals = [
            ("n_bar", spec.n_bar),
            ("r", spec.r),
            ("k", spec.k),
            ("lambda", spec.lambda),
            ("mu", spec.mu),
            ("b", spec.b),
            ("t_min", spec.t_min),
            ("t_max", spec.t_max),
            ("alpha0", spec.alpha0),
            ("alpha1", spec.alpha1),
            ("delta_y", spec.delta_y),
            ("r_disc", spec.r_disc),
        ];
        for (name, v) in reals {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        if spec.n == 0 {
            return Err(invalid("n >= 1"));
        }
        if !(spec.n1 <= spec.n2 && spec.n2 <= spec.n) {
            return Err(invalid("0 <= n1 <= n2 <= n"));
        }
        if spec.r <= 0.0 {
            return Err(invalid("r > 0"));
        }
        if spec.k < 0.0 {
            return Err(invalid("k >= 0"));
        }
        if spec.lambda < 0.0 || spec.mu < 0.0 || spec.lambda.max(spec.mu) <= 0.0 {
            return Err(invalid("lambda >= 0, mu >= 0 and max(lambda, mu) > 0"));
        }
        if spec.b < 0.0 {
            return Err(invalid("b >= 0"));
        }
        if spec.t_min >= spec.t_max {
            return Err(invalid("t_min < t_max"));
        }
        if spec.alpha1 >= 0.0 {
            return Err(invalid("alpha1 < 0"));
        }
        if spec.r_disc <= 0.0 {
            return Err(invalid("r_disc > 0"));
        }
        if !(spec.delta_y > 0.0 && spec.delta_y <= 1.0) {
            return Err(invalid("0 < delta_y <= 1"));
        }
        let levels = 1.0 / spec.delta_y;
        if (levels - levels.round()).abs() > 1e-9 * levels {
            return Err(invalid("1 / delta_y must be an integer"));
        }
        let k_max = levels.round() as i32;
        if f64::from(spec.n1) > spec.n_bar - spec.r + 1e-9 {
            return Err(invalid("n1 <= n_bar - r"));
        }
        if spec.n_bar + spec.r > f64::from(spec.n2) + 1e-9 {
            return Err(invalid("n_bar + r <= n2"));
        }

        let rate = spec.lambda.max(spec.mu);
        let n = f64::from(spec.n);
        let tau_y = match spec.tau_y {
            Some(t) if t.is_finite() && t > 0.0 => t,
            Some(_) => return Err(invalid("tau_y > 0")),
            None => (DEFAULT_TAU_RATIO - 1.0) / (n * rate),
        };
        let dt = tau_y / (n * rate * tau_y + 1.0);
        let gamma = dt / tau_y;
        let alpha = 1.0 / (1.0 + spec.r_disc * dt);
        let kappa = spec.k / (spec.r * spec.r);

        let p = ModelParams {
            spec,
            tau_y,
            k_max,
            kappa,
            dt,
            alpha,
            gamma,
        };
        // Worst-case exit mass is attained at one of the ends of the i range.
        for i in [p.spec.n1, p.spec.n2] {
            let up = if i < p.spec.n2 {
                f64::from(p.spec.n - i) * p.lambda_dt()
            } else {
                0.0
            };
            let down = if i > p.spec.n1 {
                f64::from(i) * p.mu_dt()
            } else {
                0.0
            };
            if up + down + gamma > 1.0 + 1e-12 {
                return Err(invalid(format!(
                    "uniformization infeasible at i = {i}: exit probability {} > 1",
                    up + down + gamma
                )));
            }
        }
        Ok(p)
    }

    pub fn spec(&self) -> &ParamSpec {
        &self.spec
    }

    pub fn n(&self) -> u32 {
        self.spec.n
    }
    pub fn n1(&self) -> u32 {
        self.spec.n1
    }
    pub fn n2(&self) -> u32 {
        self.spec.n2
    }
    pub fn n_bar(&self) -> f64 {
        self.spec.n_bar
    }
    pub fn reserve(&self) -> f64 {
        self.spec.r
    }
    pub fn penalty(&self) -> f64 {
        self.spec.k
    }
    pub fn lambda(&self) -> f64 {
        self.spec.lambda
    }
    pub fn mu(&self) -> f64 {
        self.spec.mu
    }
    pub fn b(&self) -> f64 {
        self.spec.b
    }
    pub fn t_min(&self) -> f64 {
        self.spec.t_min
    }
    pub fn t_max(&self) -> f64 {
        self.spec.t_max
    }
    pub fn alpha0(&self) -> f64 {
        self.spec.alpha0
    }
    pub fn alpha1(&self) -> f64 {
        self.spec.alpha1
    }
    pub fn delta_y(&self) -> f64 {
        self.spec.delta_y
    }
    pub fn r_disc(&self) -> f64 {
        self.spec.r_disc
    }
    pub fn tau_y(&self) -> f64 {
        self.tau_y
    }

    /// `K / R^2`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    /// Uniformized period.
    pub fn dt(&self) -> f64 {
        self.dt
    }
    /// Per-period discount factor.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    /// Total per-period probability of a signal move, `dt / tau_y`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn gamma1_u(&self) -> f64 {
        0.8 * self.gamma
    }
    pub fn gamma2_u(&self) -> f64 {
        0.2 * self.gamma
    }
    pub fn gamma1_d(&self) -> f64 {
        0.2 * self.gamma
    }
    pub fn gamma2_d(&self) -> f64 {
        0.8 * self.gamma
    }
    pub fn lambda_dt(&self) -> f64 {
        self.spec.lambda * self.dt
    }
    pub fn mu_dt(&self) -> f64 {
        self.spec.mu * self.dt
    }
    pub fn kappa_dt(&self) -> f64 {
        self.kappa * self.dt
    }

    /// Number of signal steps on each side of zero.
    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    /// Signal level of grid index `k`, snapped so that printing is clean.
    pub fn y_of(&self, k: i32) -> f64 {
        f64::from(k) / f64::from(self.k_max)
    }

    pub fn grid(&self) -> Grid {
        Grid {
            n1: self.spec.n1,
            n2: self.spec.n2,
            k_max: self.k_max,
        }
    }

    /// Elbow temperature for signal level `y`, clamped to the comfort band.
    pub fn t_hat_of_y(&self, y: f64) -> f64 {
        (self.spec.alpha0 + self.spec.alpha1 * y).clamp(self.spec.t_min, self.spec.t_max)
    }

    /// Preference density at signal level `y`.
    pub fn pdf_at(&self, y: f64) -> TrapezoidPdf {
        TrapezoidPdf::new(self.spec.t_min, self.spec.t_max, self.t_hat_of_y(y))
            .expect("clamped elbow is always inside the support")
    }

    /// Short content hash of the primary parameters. Artifacts carry it so
    /// that consumers can refuse files produced under different constants.
    pub fn params_hash(&self) -> String {
        let s = &self.spec;
        let text = format!(
            "n={}\nn1={}\nn2={}\nn_bar={:?}\nr={:?}\nk={:?}\nlambda={:?}\nmu={:?}\nb={:?}\n\
             t_min={:?}\nt_max={:?}\nalpha0={:?}\nalpha1={:?}\ndelta_y={:?}\ntau_y={:?}\nr_disc={:?}\n",
            s.n,
            s.n1,
            s.n2,
            s.n_bar,
            s.r,
            s.k,
            s.lambda,
            s.mu,
            s.b,
            s.t_min,
            s.t_max,
            s.alpha0,
            s.alpha1,
            s.delta_y,
            self.tau_y,
            s.r_disc
        );
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
