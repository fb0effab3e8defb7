use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fit::{fit_trapezoid, ks_distance};
use super::signal::SignalPoint;
use crate::model::{Direction, ModelParams, State, TrapezoidPdf};
use crate::policy::PolicyTable;
use crate::{Error, Result};

/// First-order thermal model of one zone: an idle zone relaxes towards
/// `t_out` with time constant `tc_heat`, an active one cools at `c_rate`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ThermalParams {
    pub t_out: f64,
    pub tc_heat: f64,
    pub c_rate: f64,
    pub dt_sim: f64,
    /// Active zones may undershoot `t_min` by at most this much.
    pub margin: f64,
}

impl ThermalParams {
    /// Constants tied to the rates of the model: an active zone cools across
    /// the comfort band in half a mean cycle `1 / mu`, and an idle zone warms
    /// across it in the mean idle time at the contracted level,
    /// `(N - n_bar) / (n_bar mu)`. Ambient sits ten bands above `t_min`.
    pub fn calibrated(params: &ModelParams) -> Self {
        let band = params.t_max() - params.t_min();
        let t_out = params.t_min() + 10.0 * band;
        let n_bar = params.n_bar().max(1.0);
        let idle_time = (f64::from(params.n()) - n_bar).max(1.0) / (n_bar * params.mu().max(1e-12));
        let tc_heat = idle_time / ((t_out - params.t_min()) / (t_out - params.t_max())).ln();
        ThermalParams {
            t_out,
            tc_heat,
            c_rate: 2.0 * params.mu() * band,
            dt_sim: params.tau_y(),
            margin: 0.0,
        }
    }

    /// Temperature after `cool` time units of cooling and `idle` of warming,
    /// in the order implied by the zone's mode at the end of the step.
    fn advance(&self, t: f64, cool: f64, idle: f64, floor: f64, active_now: bool) -> f64 {
        let chill = |t: f64, d: f64| (t - self.c_rate * d).max(floor);
        let warm = |t: f64, d: f64| {
            if d > 0.0 {
                (self.t_out - (self.t_out - t) * (-d / self.tc_heat).exp()).min(self.t_out)
            } else {
                t
            }
        };
        if active_now {
            chill(warm(t, idle), cool)
        } else {
            warm(chill(t, cool), idle)
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let ok = self.t_out > params.t_max()
            && self.tc_heat > 0.0
            && self.c_rate >= 0.0
            && self.dt_sim > 0.0
            && self.margin >= 0.0
            && [self.t_out, self.tc_heat, self.c_rate, self.dt_sim, self.margin]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(
                "thermal: need t_out > t_max, tc_heat > 0, c_rate >= 0, dt_sim > 0, margin >= 0".into(),
            ))
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SimOptions {
    /// Record idle-zone temperatures every this many steps (0 disables).
    pub snapshot_every: usize,
    /// Steps skipped before snapshots are recorded.
    pub burn_in: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        // The signal moves every step, so its level alternates parity; an odd
        // stride samples both.
        SimOptions {
            snapshot_every: 25,
            burn_in: 2000,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub k: i32,
    pub dir: Direction,
    pub i: u32,
    pub e: f64,
    pub u: f64,
}

/// Idle-zone temperatures at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub k: i32,
    pub dir: Direction,
    pub idle: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<Snapshot>,
    /// Sum of `b (T - t_min)` over all connections.
    pub utility: f64,
    pub connections: usize,
    pub seed: u64,
}

/// Elbow fitted to the pooled idle temperatures of one group of snapshots.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GroupFit {
    pub y: f64,
    pub t_hat: f64,
    pub samples: usize,
    /// Kolmogorov-Smirnov distance of the group to its fitted density.
    pub ks: f64,
}

fn group_fit(params: &ModelParams, y: f64, x: &[f64]) -> Option<GroupFit> {
    let t_hat = fit_trapezoid(x, params.t_min(), params.t_max()).ok()?;
    let pdf = TrapezoidPdf::new(params.t_min(), params.t_max(), t_hat).ok()?;
    Some(GroupFit {
        y,
        t_hat,
        samples: x.len(),
        ks: ks_distance(x, &pdf).ok()?,
    })
}

impl SimTrace {
    /// All recorded idle temperatures.
    pub fn idle_samples(&self) -> Vec<f64> {
        self.snapshots.iter().flat_map(|s| s.idle.iter().copied()).collect()
    }

    /// Tracking error root mean square over the recorded steps after `skip`.
    pub fn rms_error(&self, skip: usize) -> f64 {
        let rows = &self.rows[skip.min(self.rows.len())..];
        (rows.iter().map(|r| r.e * r.e).sum::<f64>() / rows.len().max(1) as f64).sqrt()
    }

    /// One elbow per signal level with enough in-support samples.
    pub fn level_fits(&self, params: &ModelParams) -> Vec<GroupFit> {
        let mut out = Vec::new();
        for k in -params.k_max()..=params.k_max() {
            let x: Vec<f64> = self
                .snapshots
                .iter()
                .filter(|s| s.k == k)
                .flat_map(|s| s.idle.iter().copied())
                .collect();
            out.extend(group_fit(params, params.y_of(k), &x));
        }
        out
    }

    /// Snapshots sorted by signal level and cut into `groups` equal parts;
    /// one fit per part, in increasing order of mean `y`.
    pub fn quantile_fits(&self, params: &ModelParams, groups: usize) -> Vec<GroupFit> {
        let mut order: Vec<&Snapshot> = self.snapshots.iter().collect();
        order.sort_by_key(|s| s.k);
        let n = order.len();
        (0..groups)
            .filter_map(|g| {
                let part = &order[g * n / groups..(g + 1) * n / groups];
                let x: Vec<f64> = part.iter().flat_map(|s| s.idle.iter().copied()).collect();
                let y = part.iter().map(|s| params.y_of(s.k)).sum::<f64>() / part.len().max(1) as f64;
                group_fit(params, y, &x)
            })
            .collect()
    }
}

/// Zone-level Monte Carlo. One simulation step per `dt_sim`; the signal
/// advances every `tau_y`. Each step every active zone finishes its cycle
/// with probability `1 - exp(-mu dt_sim)` and every idle zone looks at the
/// threshold with probability `1 - exp(-lambda dt_sim)`, connecting when
/// its temperature is at least the threshold of the current state.
pub fn simulate_building(
    params: &ModelParams,
    thermal: &ThermalParams,
    policy: &PolicyTable,
    signal: &[SignalPoint],
    seed: u64,
    opts: &SimOptions,
) -> Result<SimTrace> {
    thermal.validate(params)?;
    if signal.is_empty() {
        return Err(Error::Domain("empty signal".into()));
    }
    if policy.grid() != params.grid() {
        return Err(Error::Domain("policy grid does not match the model".into()));
    }
    let n = params.n() as usize;
    let sub = ((params.tau_y() / thermal.dt_sim).round() as usize).max(1);
    let h = thermal.dt_sim;
    let p_done = 1.0 - (-params.mu() * h).exp();
    let p_look = 1.0 - (-params.lambda() * h).exp();
    let floor = params.t_min() - thermal.margin;
    let b = params.b();
    let (n1, n2) = (params.n1(), params.n2());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let active_start = params.n_bar().round().clamp(f64::from(params.n1()), f64::from(params.n2())) as usize;
    let mut active: Vec<bool> = (0..n).map(|z| z < active_start).collect();
    let mut temp: Vec<f64> = (0..n)
        .map(|_| params.t_min() + rng.random::<f64>() * (params.t_max() - params.t_min()))
        .collect();
    let mut count = active_start as u32;

    let total = signal.len() * sub;
    let mut trace = SimTrace {
        rows: Vec::with_capacity(total),
        snapshots: Vec::new(),
        utility: 0.0,
        connections: 0,
        seed,
    };
    for step in 0..total {
        let sig = signal[step / sub];
        let state = State::new(count, sig.k, sig.dir);
        let idx = policy.grid().try_index(&state).map_err(|_| {
            Error::Domain(format!("simulated state {state} is not covered by the policy"))
        })?;
        let u = policy.at(idx);
        for z in 0..n {
            let x: f64 = rng.random();
            // A zone that switches does so part way through the step: the
            // exponential clock that fired is inverted from the same
            // uniform, and the zone runs in each mode for its share of `h`.
            let mut cool = if active[z] { h } else { 0.0 };
            if active[z] {
                if x < p_done && count > n1 {
                    active[z] = false;
                    count -= 1;
                    cool = (-(1.0 - x).ln() / params.mu()).min(h);
                }
            } else if x < p_look && temp[z] >= u && count < n2 {
                active[z] = true;
                count += 1;
                trace.connections += 1;
                trace.utility += b * (temp[z] - params.t_min());
                cool = h - (-(1.0 - x).ln() / params.lambda()).min(h);
            }
            temp[z] = thermal.advance(temp[z], cool, h - cool, floor, active[z]);
        }
        let t = (step + 1) as f64 * h;
        let y = params.y_of(sig.k);
        trace.rows.push(TraceRow {
            t,
            k: sig.k,
            dir: sig.dir,
            i: count,
            e: f64::from(count) - params.n_bar() - y * params.reserve(),
            u,
        });
        if opts.snapshot_every > 0 && step >= opts.burn_in && (step - opts.burn_in).is_multiple_of(opts.snapshot_every) {
            trace.snapshots.push(Snapshot {
                t,
                k: sig.k,
                dir: sig.dir,
                idle: (0..n).filter(|&z| !active[z]).map(|z| temp[z]).collect(),
            });
        }
    }
    Ok(trace)
}
