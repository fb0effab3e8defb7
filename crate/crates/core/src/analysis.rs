//! Second-difference bounds on the value function and numerical checks of
//! the monotone structure of value functions and policies.

use std::fmt::Write as _;

use crate::model::{Direction, Grid, ModelParams, State, DEFAULT_TAU_RATIO};
use crate::policy::PolicyTable;
use crate::solvers::ValueTable;
use crate::{Error, Result};

/// Bounds on first-difference increments of the value function, with all
/// rates per uniformized period.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BoundsReport {
    /// Lower bound on `Delta(i+1) - Delta(i)`.
    pub eps_l: f64,
    /// Upper bound on `Delta(i+1) - Delta(i)`.
    pub eps_u: f64,
    /// Upper bound on `Delta(i, y) - Delta(i+1, y + dy)`.
    pub eps_bar_u: f64,
    /// `lambda dt (N - N1)`.
    pub upsilon: f64,
}

fn bounds_from(kappa_dt: f64, alpha: f64, lam_dt: f64, mu_dt: f64, upsilon: f64) -> Result<BoundsReport> {
    let rates = lam_dt + mu_dt;
    let den_l = 1.0 - alpha * (1.0 - 2.0 * rates - upsilon);
    let den_u = 1.0 - alpha * (1.0 - 2.0 * rates);
    let den_bar = 1.0 - alpha * (1.0 - rates);
    if !(den_l > 0.0 && den_u > 0.0 && den_bar > 0.0) {
        return Err(Error::Regime(format!(
            "bound denominators must be positive (got {den_l}, {den_u}, {den_bar})"
        )));
    }
    let eps_u = 2.0 * kappa_dt / den_u;
    Ok(BoundsReport {
        eps_l: 2.0 * kappa_dt / den_l,
        eps_u,
        eps_bar_u: alpha * rates / den_bar * eps_u,
        upsilon,
    })
}

pub fn epsilon_bounds(params: &ModelParams) -> Result<BoundsReport> {
    let upsilon = params.lambda_dt() * f64::from(params.n() - params.n1());
    bounds_from(params.kappa_dt(), params.alpha(), params.lambda_dt(), params.mu_dt(), upsilon)
}

/// One row of the large-building scaling table.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct AsymptoticRow {
    pub n: u32,
    /// `(2K / (qN)^2) / (r + 2(lambda + mu))`.
    pub eps_u: f64,
    /// `eps_u / (r + lambda + mu)`.
    pub eps_bar_u: f64,
    /// The per-period bounds of [`epsilon_bounds`] at the same building size.
    /// Numerator and denominators both scale with `dt`, so these approach the
    /// closed forms as `dt` shrinks.
    pub general: BoundsReport,
}

/// Closed-form limits next to the general bounds for buildings of size `n`
/// with reserve `R = q n` (`N1 = 0`, `tau_y = 10 dt`).
pub fn asymptotic_epsilon(k: f64, q: f64, r_disc: f64, lambda: f64, mu: f64, n_list: &[u32]) -> Result<Vec<AsymptoticRow>> {
    if !(q > 0.0) {
        return Err(Error::Domain("q must be positive".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::Domain("building size must be at least 1".into()));
            }
            let nf = f64::from(n);
            let reserve = q * nf;
            let kappa = k / (reserve * reserve);
            let eps_u = (2.0 * kappa) / (r_disc + 2.0 * (lambda + mu));
            let rate = lambda.max(mu);
            let tau = (DEFAULT_TAU_RATIO - 1.0) / (nf * rate);
            let dt = tau / (nf * rate * tau + 1.0);
            let alpha = 1.0 / (1.0 + r_disc * dt);
            let g = bounds_from(kappa * dt, alpha, lambda * dt, mu * dt, lambda * dt * nf)?;
            Ok(AsymptoticRow {
                n,
                eps_u,
                eps_bar_u: eps_u / (r_disc + lambda + mu),
                general: g,
            })
        })
        .collect()
}

/// Smallest or largest observed value of a checked quantity.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Extreme {
    pub value: f64,
    pub state: Option<State>,
}

/// Result of checking `lower <= q(s) <= upper` over a family of states.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub lower: f64,
    pub upper: f64,
    pub checked: usize,
    pub violations: usize,
    pub min: Extreme,
    pub max: Extreme,
}

impl PropertyCheck {
    fn new(name: &'static str, lower: f64, upper: f64) -> Self {
        PropertyCheck {
            name,
            lower,
            upper,
            checked: 0,
            violations: 0,
            min: Extreme {
                value: f64::INFINITY,
                state: None,
            },
            max: Extreme {
                value: f64::NEG_INFINITY,
                state: None,
            },
        }
    }

    fn observe(&mut self, q: f64, s: State) {
        self.checked += 1;
        if !(q >= self.lower && q <= self.upper) {
            self.violations += 1;
        }
        if q < self.min.value {
            self.min = Extreme { value: q, state: Some(s) };
        }
        if q > self.max.value {
            self.max = Extreme { value: q, state: Some(s) };
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// `min - lower`; negative when the lower bound is violated.
    pub fn lower_margin(&self) -> f64 {
        self.min.value - self.lower
    }

    /// `upper - max`; negative when the upper bound is violated.
    pub fn upper_margin(&self) -> f64 {
        self.upper - self.max.value
    }

    /// State with the smallest margin.
    pub fn worst_state(&self) -> Option<State> {
        if self.lower_margin() <= self.upper_margin() {
            self.min.state
        } else {
            self.max.state
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub bounds: Option<BoundsReport>,
    pub slack: f64,
    pub checks: Vec<PropertyCheck>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(PropertyCheck::passed)
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Failing checks with their worst state.
    pub fn failures(&self) -> Vec<(&'static str, Option<State>)> {
        self.checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| (c.name, c.worst_state()))
            .collect()
    }
}

/// Flat key-value text for a set of reports that share one parameter hash.
pub fn render_report(params_hash: &str, reports: &[&VerificationReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "params_hash = \"{params_hash}\"");
    let passed = reports.iter().all(|r| r.passed());
    let _ = writeln!(out, "status = \"{}\"", if passed { "pass" } else { "fail" });
    if let Some(b) = reports.iter().find_map(|r| r.bounds) {
        let _ = writeln!(out, "eps_l = {:e}", b.eps_l);
        let _ = writeln!(out, "eps_u = {:e}", b.eps_u);
        let _ = writeln!(out, "eps_bar_u = {:e}", b.eps_bar_u);
        let _ = writeln!(out, "upsilon = {:e}", b.upsilon);
    }
    for r in reports {
        for c in &r.checks {
            let _ = writeln!(out, "\n[{}]", c.name);
            let _ = writeln!(out, "status = \"{}\"", if c.passed() { "pass" } else { "fail" });
            let _ = writeln!(out, "slack = {:e}", r.slack);
            let _ = writeln!(out, "lower_bound = {:e}", c.lower);
            let _ = writeln!(out, "upper_bound = {:e}", c.upper);
            let _ = writeln!(out, "checked = {}", c.checked);
            let _ = writeln!(out, "violations = {}", c.violations);
            let _ = writeln!(out, "min = {:e}", c.min.value);
            let _ = writeln!(out, "max = {:e}", c.max.value);
            let _ = writeln!(out, "lower_margin = {:e}", c.lower_margin());
            let _ = writeln!(out, "upper_margin = {:e}", c.upper_margin());
            if let Some(s) = c.worst_state() {
                let _ = writeln!(out, "worst_state = \"{s}\"");
            }
        }
    }
    out
}

fn refuse_unconverged(meta: &crate::solvers::TableMeta) -> Result<()> {
    if meta.converged() {
        Ok(())
    } else {
        Err(Error::Refused(format!(
            "{} table did not converge (final change {:e} vs tolerance {:e})",
            meta.solver, meta.final_change, meta.tol
        )))
    }
}

fn at(grid: &Grid, v: &[f64], i: u32, k: i32, dir: Direction) -> f64 {
    v[grid.index(&State::new(i, k, dir))]
}

/// Checks the three difference properties of a converged value table:
///
/// * `Delta(i+1, y) - Delta(i, y)` in `[eps_l, eps_u]`
/// * `Delta(i, y) - Delta(i+1, y + dy)` in `[0, eps_bar_u]`
/// * `Delta(i, y) - Delta(i, y + dy)` in `[eps_l, eps_u + eps_bar_u]`
///
/// with `Delta(i, y) = J(i, y) - J(i-1, y)` at fixed direction, each widened
/// by ten times the producing solver's tolerance.
pub fn verify_value_monotonicity(j: &ValueTable, bounds: &BoundsReport) -> Result<VerificationReport> {
    refuse_unconverged(&j.meta)?;
    let slack = 10.0 * j.meta.tol;
    let g = j.grid();
    let v = j.values();
    let delta = |i: u32, k: i32, d: Direction| at(&g, v, i, k, d) - at(&g, v, i - 1, k, d);

    let mut second = PropertyCheck::new("second_difference_i", bounds.eps_l - slack, bounds.eps_u + slack);
    let mut fixed_e = PropertyCheck::new("fixed_e_difference", -slack, bounds.eps_bar_u + slack);
    let mut fixed_i = PropertyCheck::new(
        "fixed_i_difference",
        bounds.eps_l - slack,
        bounds.eps_u + bounds.eps_bar_u + slack,
    );
    for d in Direction::BOTH {
        for k in -g.k_max..=g.k_max {
            for i in g.n1 + 1..=g.n2 {
                let s = State::new(i, k, d);
                if i < g.n2 {
                    second.observe(delta(i + 1, k, d) - delta(i, k, d), s);
                    if k < g.k_max {
                        fixed_e.observe(delta(i, k, d) - delta(i + 1, k + 1, d), s);
                    }
                }
                if k < g.k_max {
                    fixed_i.observe(delta(i, k, d) - delta(i, k + 1, d), s);
                }
            }
        }
    }
    Ok(VerificationReport {
        bounds: Some(*bounds),
        slack,
        checks: vec![second, fixed_e, fixed_i],
    })
}

/// Checks that thresholds do not decrease in `i`, do not increase along a
/// fixed tracking error, and do not increase in `y`.
pub fn verify_policy_monotonicity(p: &PolicyTable) -> Result<VerificationReport> {
    refuse_unconverged(&p.meta)?;
    let slack = p.meta.resolution + 1e-12;
    let g = p.grid();
    let u = p.values();
    let mut in_i = PropertyCheck::new("policy_nondecreasing_in_i", -slack, f64::INFINITY);
    let mut fixed_e = PropertyCheck::new("policy_fixed_e", -slack, f64::INFINITY);
    let mut in_y = PropertyCheck::new("policy_nonincreasing_in_y", -slack, f64::INFINITY);
    for d in Direction::BOTH {
        for k in -g.k_max..=g.k_max {
            for i in g.n1..=g.n2 {
                let s = State::new(i, k, d);
                let here = at(&g, u, i, k, d);
                if i < g.n2 {
                    in_i.observe(at(&g, u, i + 1, k, d) - here, s);
                    if k < g.k_max {
                        fixed_e.observe(here - at(&g, u, i + 1, k + 1, d), s);
                    }
                }
                if k < g.k_max {
                    in_y.observe(here - at(&g, u, i, k + 1, d), s);
                }
            }
        }
    }
    Ok(VerificationReport {
        bounds: None,
        slack,
        checks: vec![in_i, fixed_e, in_y],
    })
}

/// Where the policy sits relative to the comfort band.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Band {
    Low,
    Interior,
    High,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub low: usize,
    pub interior: usize,
    pub high: usize,
    /// Whether every `(y, D)` line visits the bands in the order low,
    /// interior, high as `i` grows.
    pub ordered: bool,
}

/// Splits the grid into saturated-low, interior and saturated-high states.
pub fn policy_partition(params: &ModelParams, p: &PolicyTable) -> Partition {
    let band = |u: f64| {
        if u <= params.t_min() {
            Band::Low
        } else if u >= params.t_max() {
            Band::High
        } else {
            Band::Interior
        }
    };
    let g = p.grid();
    let mut out = Partition {
        low: 0,
        interior: 0,
        high: 0,
        ordered: true,
    };
    for d in Direction::BOTH {
        for k in -g.k_max..=g.k_max {
            let mut last = Band::Low;
            for i in g.n1..=g.n2 {
                let b = band(at(&g, p.values(), i, k, d));
                match b {
                    Band::Low => out.low += 1,
                    Band::Interior => out.interior += 1,
                    Band::High => out.high += 1,
                }
                if b < last {
                    out.ordered = false;
                }
                last = b;
            }
        }
    }
    out
}

/// `max |u(i+1, y, D) - u(i, y, D)|` over the grid.
pub fn max_policy_slope(p: &PolicyTable) -> f64 {
    let g = p.grid();
    let mut worst: f64 = 0.0;
    for d in Direction::BOTH {
        for k in -g.k_max..=g.k_max {
            for i in g.n1..g.n2 {
                let step = at(&g, p.values(), i + 1, k, d) - at(&g, p.values(), i, k, d);
                worst = worst.max(step.abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamSpec;
    use crate::solvers::TableMeta;
    use approx::assert_relative_eq;

    #[test]
    fn formula_example() {
        let b = bounds_from(1.0, 0.9, 0.03, 0.02, 0.0).unwrap();
        assert_relative_eq!(b.eps_u, 2.0 / 0.19, epsilon = 1e-12);
        assert_relative_eq!(b.eps_l, b.eps_u, epsilon = 1e-12);
        let b = bounds_from(1.0, 0.9, 0.03, 0.02, 0.1).unwrap();
        assert!(b.eps_l < b.eps_u);
        let z = bounds_from(0.0, 0.9, 0.03, 0.02, 0.1).unwrap();
        assert_eq!((z.eps_l, z.eps_u, z.eps_bar_u), (0.0, 0.0, 0.0));
        assert!(bounds_from(1.0, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn reference_bounds_are_ordered() {
        let p = ParamSpec::reference().build().unwrap();
        let b = epsilon_bounds(&p).unwrap();
        assert!(0.0 < b.eps_l && b.eps_l < b.eps_u && b.eps_bar_u > 0.0);
        assert_relative_eq!(b.upsilon, 100.0 * p.lambda_dt(), epsilon = 1e-15);
    }

    #[test]
    fn detector_names_the_state() {
        let p = ParamSpec {
            n: 20,
            n2: 20,
            n_bar: 10.0,
            r: 5.0,
            delta_y: 0.2,
            ..ParamSpec::default()
        }
        .build()
        .unwrap();
        let b = epsilon_bounds(&p).unwrap();
        let g = p.grid();
        let c = 0.5 * (b.eps_l + b.eps_u);
        // Quadratic in i with curvature inside the band, linear in y.
        let mut j: Vec<f64> = g
            .states()
            .map(|s| {
                let i = f64::from(s.i);
                0.5 * c * i * i - 0.3 * i * p.y_of(s.k)
            })
            .collect();
        let mut meta = TableMeta::synthetic(p.params_hash());
        meta.tol = 1e-9;
        meta.final_change = 1e-10;
        let base = ValueTable::new(g, j.clone(), meta.clone()).unwrap();
        let rep = verify_value_monotonicity(&base, &b).unwrap();
        assert!(rep.check("second_difference_i").unwrap().passed());

        let target = State::new(7, 1, Direction::Up);
        j[g.index(&target)] -= 10.0 * b.eps_u;
        let bad = ValueTable::new(g, j, meta).unwrap();
        let rep = verify_value_monotonicity(&bad, &b).unwrap();
        let c = rep.check("second_difference_i").unwrap();
        assert!(!c.passed());
        assert_eq!(c.max.state, Some(target));
    }

    #[test]
    fn unconverged_tables_are_refused() {
        let p = ParamSpec::reference().build().unwrap();
        let mut meta = TableMeta::synthetic("");
        meta.tol = 1e-6;
        meta.final_change = 1e-3;
        let t = ValueTable::zeros(p.grid(), meta.clone());
        assert!(matches!(
            verify_value_monotonicity(&t, &epsilon_bounds(&p).unwrap()),
            Err(Error::Refused(_))
        ));
        let pol = PolicyTable::constant(p.grid(), 1.0, meta);
        assert!(verify_policy_monotonicity(&pol).is_err());
    }

    #[test]
    fn constant_policy_passes() {
        let p = ParamSpec::reference().build().unwrap();
        let pol = PolicyTable::constant(p.grid(), 4.0, TableMeta::synthetic(""));
        assert!(verify_policy_monotonicity(&pol).unwrap().passed());
        assert_eq!(max_policy_slope(&pol), 0.0);
        let part = policy_partition(&p, &pol);
        assert_eq!(part.interior, p.grid().len());
        assert!(part.ordered);
    }

    #[test]
    fn asymptotic_rows() {
        let rows = asymptotic_epsilon(100.0, 0.1, 10.0, 2.0, 0.5, &[100, 200, 10_000]).unwrap();
        assert!((rows[1].eps_u / rows[0].eps_u - 0.25).abs() <= 4.0 * f64::EPSILON);
        assert!(rows[2].eps_u < rows[1].eps_u);
        let gap = (rows[2].general.eps_u - rows[2].eps_u).abs() / rows[2].eps_u;
        assert!(gap < 0.01, "{gap}");
    }
}
