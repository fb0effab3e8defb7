//! Flattened transition kernel shared by the sweeps and the simulators.
//!
//! Everything that does not depend on the threshold is precomputed per state;
//! the threshold enters only through `(P[T >= u], E[(T - t_min) 1{T >= u}])`
//! of the preference density at the state's signal level.

use crate::model::{self, Direction, ModelParams, State, TrapezoidPdf};

#[derive(Clone, Copy, Debug)]
pub(crate) struct Node {
    /// Index of `i + 1`, or of the state itself when arrivals are blocked.
    pub up_i: u32,
    /// Index of `i - 1`, or of the state itself when departures are blocked.
    pub dn_i: u32,
    pub up_y: u32,
    pub dn_y: u32,
    /// Index of the neighbour used for the first difference that drives the
    /// price: `i + 1` below the top, `i - 1` at the top.
    pub diff: u32,
    pub level: u32,
    pub penalty: f64,
    /// `(N - i) lambda dt`, zero where arrivals are blocked.
    pub idle: f64,
    pub dep: f64,
    pub p_up: f64,
    pub p_dn: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Kernel {
    pub nodes: Vec<Node>,
    pub pdfs: Vec<TrapezoidPdf>,
    pub alpha: f64,
    pub b: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Kernel {
    pub fn new(params: &ModelParams) -> Self {
        let grid = params.grid();
        let k_max = params.k_max();
        let pdfs = (-k_max..=k_max).map(|k| params.pdf_at(params.y_of(k))).collect();
        let nodes = grid
            .states()
            .enumerate()
            .map(|(idx, s)| {
                let here = idx as u32;
                let at = |t: State| grid.index(&t) as u32;
                let top = s.i == params.n2();
                let bottom = s.i == params.n1();
                let (p_up, p_dn) = model::signal_moves(params, s.k, s.dir);
                Node {
                    up_i: if top { here } else { here + 1 },
                    dn_i: if bottom { here } else { here - 1 },
                    up_y: if p_up > 0.0 {
                        at(State::new(s.i, s.k + 1, Direction::Up))
                    } else {
                        here
                    },
                    dn_y: if p_dn > 0.0 {
                        at(State::new(s.i, s.k - 1, Direction::Down))
                    } else {
                        here
                    },
                    diff: match (top, bottom) {
                        (false, _) => here + 1,
                        (true, false) => here - 1,
                        (true, true) => here,
                    },
                    level: (s.k + k_max) as u32,
                    penalty: model::tracking_penalty(params, &s),
                    idle: if top { 0.0 } else { model::idle_rate(params, s.i) },
                    dep: if bottom { 0.0 } else { f64::from(s.i) * params.mu_dt() },
                    p_up,
                    p_dn,
                }
            })
            .collect();
        Kernel {
            nodes,
            pdfs,
            alpha: params.alpha(),
            b: params.b(),
            t_min: params.t_min(),
            t_max: params.t_max(),
        }
    }

    /// First difference `J(i+1) - J(i)` at `idx`, one-sided at the top.
    #[inline]
    pub fn delta(&self, j: &[f64], idx: usize) -> f64 {
        let n = &self.nodes[idx];
        let other = n.diff as usize;
        if other > idx {
            j[other] - j[idx]
        } else {
            j[idx] - j[other]
        }
    }

    #[inline]
    pub fn threshold(&self, delta: f64) -> f64 {
        crate::policy::threshold_for(self.alpha * delta, self.b, self.t_min, self.t_max)
    }

    /// One-period cost and the arrival probability for a given tail pair.
    #[inline]
    pub fn cost_and_arrival(&self, idx: usize, tail: (f64, f64)) -> (f64, f64) {
        let n = &self.nodes[idx];
        (n.penalty - n.idle * self.b * tail.1, n.idle * tail.0)
    }

    /// Bellman backup at a fixed threshold described by its tail pair.
    #[inline]
    pub fn backup(&self, j: &[f64], idx: usize, tail: (f64, f64)) -> f64 {
        let n = &self.nodes[idx];
        let (cost, a) = self.cost_and_arrival(idx, tail);
        let stay = 1.0 - a - n.dep - n.p_up - n.p_dn;
        cost + self.alpha
            * (a * j[n.up_i as usize]
                + n.dep * j[n.dn_i as usize]
                + n.p_up * j[n.up_y as usize]
                + n.p_dn * j[n.dn_y as usize]
                + stay * j[idx])
    }

    #[inline]
    pub fn tail(&self, idx: usize, u: f64) -> (f64, f64) {
        self.pdfs[self.nodes[idx].level as usize].tail(u)
    }

    /// Draws the successor of `idx` with one uniform variate.
    #[inline]
    pub fn step(&self, idx: usize, arrival: f64, x: f64) -> usize {
        let n = &self.nodes[idx];
        let mut acc = arrival;
        if x < acc {
            return n.up_i as usize;
        }
        acc += n.dep;
        if x < acc {
            return n.dn_i as usize;
        }
        acc += n.p_up;
        if x < acc {
            return n.up_y as usize;
        }
        acc += n.p_dn;
        if x < acc {
            return n.dn_y as usize;
        }
        idx
    }
}
