//! Problem constants, state space and the uniformized transition kernel.
//!
//! All rates are stored per uniformized period: `lambda_dt = lambda * dt`
//! and so on, so every quantity returned here is a probability or a cost
//! per period.

mod params;
mod state;
mod trapezoid;

pub use params::{ModelParams, ParamSpec, DEFAULT_TAU_RATIO};
pub use state::{Direction, Grid, State};
pub use trapezoid::TrapezoidPdf;

use crate::{Error, Result};

pub fn trapezoid_density(pdf: &TrapezoidPdf, t: f64) -> Result<f64> {
    pdf.density(t)
}

pub fn survival(pdf: &TrapezoidPdf, u: f64) -> Result<f64> {
    pdf.survival(u)
}

fn check_threshold(pdf: &TrapezoidPdf, u: f64) -> Result<()> {
    if (pdf.t_min()..=pdf.t_max()).contains(&u) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "threshold {u} outside [{}, {}]",
            pdf.t_min(),
            pdf.t_max()
        )))
    }
}

fn check_count(params: &ModelParams, i: u32) -> Result<()> {
    if i < params.n1() || i > params.n2() {
        return Err(Error::Domain(format!(
            "active count {i} outside [{}, {}]",
            params.n1(),
            params.n2()
        )));
    }
    Ok(())
}

/// Expected utility collected in one period from idle zones that accept
/// threshold `u`: `(N - i) lambda dt * b * E[(T - t_min) 1{T >= u}]`.
pub fn expected_utility_rate(params: &ModelParams, pdf: &TrapezoidPdf, i: u32, u: f64) -> Result<f64> {
    check_count(params, i)?;
    check_threshold(pdf, u)?;
    Ok(idle_rate(params, i) * params.b() * pdf.tail(u).1)
}

/// Probability that one idle appliance connects in the next period.
pub fn arrival_rate(params: &ModelParams, pdf: &TrapezoidPdf, i: u32, u: f64) -> Result<f64> {
    check_count(params, i)?;
    check_threshold(pdf, u)?;
    Ok(idle_rate(params, i) * pdf.tail(u).0)
}

pub fn departure_rate(params: &ModelParams, i: u32) -> Result<f64> {
    check_count(params, i)?;
    Ok(f64::from(i) * params.mu_dt())
}

/// `(N - i) lambda dt`, the probability that some idle zone looks at the
/// price in the next period.
pub(crate) fn idle_rate(params: &ModelParams, i: u32) -> f64 {
    f64::from(params.n().saturating_sub(i)) * params.lambda_dt()
}

/// `i - n_bar - y R`.
pub fn tracking_error(params: &ModelParams, s: &State) -> f64 {
    f64::from(s.i) - params.n_bar() - params.y_of(s.k) * params.reserve()
}

/// `kappa dt e^2`.
pub fn tracking_penalty(params: &ModelParams, s: &State) -> f64 {
    let e = tracking_error(params, s);
    params.kappa_dt() * e * e
}

pub fn t_hat_of_y(params: &ModelParams, y: f64) -> f64 {
    params.t_hat_of_y(y)
}

/// Period cost under threshold `u`: tracking penalty minus the expected
/// utility of zones that connect. Arrivals are blocked at `i = n2`, so no
/// utility is collected there either.
pub fn period_cost(params: &ModelParams, s: &State, u: f64) -> Result<f64> {
    let pdf = params.pdf_at(params.y_of(s.k));
    let utility = if s.i < params.n2() {
        expected_utility_rate(params, &pdf, s.i, u)?
    } else {
        check_threshold(&pdf, u)?;
        0.0
    };
    Ok(tracking_penalty(params, s) - utility)
}

/// Successor distribution of one state under one threshold. Moves with zero
/// probability are omitted; the self-loop absorbs the remainder.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionList {
    from: State,
    moves: [(State, f64); 4],
    len: usize,
    stay: f64,
}

impl TransitionList {
    pub fn from_state(&self) -> State {
        self.from
    }

    pub fn moves(&self) -> &[(State, f64)] {
        &self.moves[..self.len]
    }

    pub fn stay(&self) -> f64 {
        self.stay
    }

    /// All entries, self-loop last.
    pub fn iter(&self) -> impl Iterator<Item = (State, f64)> + '_ {
        self.moves().iter().copied().chain(std::iter::once((self.from, self.stay)))
    }

    pub fn total(&self) -> f64 {
        self.moves().iter().map(|m| m.1).sum::<f64>() + self.stay
    }

    fn push(&mut self, s: State, p: f64) {
        if p > 0.0 {
            self.moves[self.len] = (s, p);
            self.len += 1;
        }
    }
}

/// Signal jump probabilities `(up, down)` out of level `k`, after reflection
/// at the ends of the grid. At `k = k_max` the up mass turns into a down move
/// and symmetrically at `-k_max`.
pub(crate) fn signal_moves(params: &ModelParams, k: i32, dir: Direction) -> (f64, f64) {
    let (up, down) = match dir {
        Direction::Up => (params.gamma1_u(), params.gamma2_u()),
        Direction::Down => (params.gamma1_d(), params.gamma2_d()),
    };
    if k >= params.k_max() {
        (0.0, up + down)
    } else if k <= -params.k_max() {
        (up + down, 0.0)
    } else {
        (up, down)
    }
}

pub fn transitions(params: &ModelParams, s: &State, u: f64) -> Result<TransitionList> {
    params.grid().try_index(s)?;
    let pdf = params.pdf_at(params.y_of(s.k));
    check_threshold(&pdf, u)?;
    let a = if s.i < params.n2() {
        idle_rate(params, s.i) * pdf.tail(u).0
    } else {
        0.0
    };
    let d = if s.i > params.n1() {
        f64::from(s.i) * params.mu_dt()
    } else {
        0.0
    };
    let (up, down) = signal_moves(params, s.k, s.dir);
    let mut list = TransitionList {
        from: *s,
        moves: [(*s, 0.0); 4],
        len: 0,
        stay: 0.0,
    };
    list.push(State::new(s.i + 1, s.k, s.dir), a);
    if s.i > 0 {
        list.push(State::new(s.i - 1, s.k, s.dir), d);
    }
    list.push(State::new(s.i, s.k + 1, Direction::Up), up);
    list.push(State::new(s.i, s.k - 1, Direction::Down), down);
    // Validation allows the exit mass to exceed one by rounding only.
    list.stay = (1.0 - (a + d + up + down)).max(0.0);
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> ModelParams {
        ParamSpec::reference().build().unwrap()
    }

    /// lambda = mu = 2 and tau_y = 1 / (N lambda) give lambda dt = mu dt = 0.005.
    fn half_rate() -> ModelParams {
        ParamSpec {
            mu: 2.0,
            tau_y: Some(0.005),
            ..ParamSpec::default()
        }
        .build()
        .unwrap()
    }

    #[test]
    fn rate_examples() {
        let p = half_rate();
        assert_relative_eq!(p.lambda_dt(), 0.005, epsilon = 1e-15);
        let pdf = p.pdf_at(0.0);
        assert_relative_eq!(arrival_rate(&p, &pdf, 50, 0.0).unwrap(), 0.25, epsilon = 1e-12);
        assert_relative_eq!(departure_rate(&p, 50).unwrap(), 0.25, epsilon = 1e-12);
        assert_eq!(departure_rate(&p, 0).unwrap(), 0.0);
        assert_relative_eq!(
            departure_rate(&p, 40).unwrap(),
            2.0 * departure_rate(&p, 20).unwrap(),
            epsilon = 1e-15
        );
        assert_eq!(arrival_rate(&p, &pdf, 100, 0.0).unwrap(), 0.0);
        assert_eq!(arrival_rate(&p, &pdf, 10, 10.0).unwrap(), 0.0);
        assert!(arrival_rate(&p, &pdf, 101, 0.0).is_err());
    }

    #[test]
    fn penalty_is_even_and_zero_on_target() {
        let p = reference();
        let on = State::new(53, 3, Direction::Up);
        assert_eq!(tracking_error(&p, &on), 0.0);
        assert_eq!(tracking_penalty(&p, &on), 0.0);
        let plus = State::new(55, 3, Direction::Up);
        let minus = State::new(51, 3, Direction::Up);
        assert_eq!(tracking_penalty(&p, &plus), tracking_penalty(&p, &minus));
        // kappa dt = 0.0045 here, so e = 2 costs 4 * kappa dt.
        assert_relative_eq!(tracking_penalty(&p, &plus), 4.0 * p.kappa_dt(), epsilon = 1e-15);
    }

    #[test]
    fn kernel_shape() {
        let p = reference();
        let s = State::new(50, 0, Direction::Up);
        let t = transitions(&p, &s, 3.0).unwrap();
        assert_relative_eq!(t.total(), 1.0, epsilon = 1e-12);
        let up = t.moves().iter().find(|m| m.0.k == 1).unwrap();
        assert_relative_eq!(up.1, 0.8 * p.dt() / p.tau_y(), epsilon = 1e-15);
        assert_eq!(up.0.dir, Direction::Up);

        let top = transitions(&p, &State::new(100, 0, Direction::Up), 0.0).unwrap();
        assert!(top.moves().iter().all(|m| m.0.i <= 100));

        let edge = transitions(&p, &State::new(50, 10, Direction::Up), 0.0).unwrap();
        let down: Vec<_> = edge.moves().iter().filter(|m| m.0.k == 9).collect();
        assert_eq!(down.len(), 1);
        assert_relative_eq!(down[0].1, p.gamma(), epsilon = 1e-15);
        assert_eq!(down[0].0.dir, Direction::Down);
        assert!(edge.moves().iter().all(|m| m.0.k <= 10));

        assert!(transitions(&p, &State::new(50, 11, Direction::Up), 0.0).is_err());
        assert!(transitions(&p, &s, 10.5).is_err());
    }

    #[test]
    fn bottom_boundary_blocks_departures() {
        let p = ParamSpec {
            n1: 20,
            n2: 80,
            ..ParamSpec::default()
        }
        .build()
        .unwrap();
        let t = transitions(&p, &State::new(20, -3, Direction::Down), 5.0).unwrap();
        assert!(t.moves().iter().all(|m| m.0.i >= 20));
        let t = transitions(&p, &State::new(80, -3, Direction::Down), 0.0).unwrap();
        assert!(t.moves().iter().all(|m| m.0.i <= 80));
        assert_relative_eq!(t.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn no_utility_where_arrivals_are_blocked() {
        let p = ParamSpec {
            n2: 90,
            ..ParamSpec::default()
        }
        .build()
        .unwrap();
        let s = State::new(90, 0, Direction::Up);
        assert_relative_eq!(period_cost(&p, &s, 0.0).unwrap(), tracking_penalty(&p, &s));
    }
}
