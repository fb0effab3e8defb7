use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Direction, ModelParams};
use crate::{Error, Result};

/// Probability that the signal keeps moving in its current direction.
pub const PERSISTENCE: f64 = 0.8;

/// One signal sample: level index `k` (`y = k delta_y`) and the direction
/// of the move that led to it.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SignalPoint {
    pub k: i32,
    pub dir: Direction,
}

/// Markov walk on the signal grid that keeps its direction with probability
/// 0.8 and is reflected at `y = +-1`. Starts at `y = 0` with a random
/// direction.
pub fn generate_rsr_signal(params: &ModelParams, steps: usize, seed: u64) -> Result<Vec<SignalPoint>> {
    if steps == 0 {
        return Err(Error::Domain("signal needs at least one step".into()));
    }
    let k_max = params.k_max();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = SignalPoint {
        k: 0,
        dir: if rng.random::<bool>() {
            Direction::Up
        } else {
            Direction::Down
        },
    };
    let mut out = Vec::with_capacity(steps);
    out.push(p);
    for _ in 1..steps {
        let keep = rng.random::<f64>() < PERSISTENCE;
        let up = (p.dir == Direction::Up) == keep;
        // The ends reflect regardless of the draw.
        let k = if p.k <= -k_max || (up && p.k < k_max) {
            p.k + 1
        } else {
            p.k - 1
        };
        p = SignalPoint {
            dir: if k > p.k { Direction::Up } else { Direction::Down },
            k,
        };
        out.push(p);
    }
    Ok(out)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SignalStats {
    /// Share of moves out of interior levels that kept the direction.
    pub persistence: f64,
    pub mean_y: f64,
    pub interior_moves: usize,
}

pub fn signal_stats(params: &ModelParams, signal: &[SignalPoint]) -> SignalStats {
    let k_max = params.k_max();
    let mut kept = 0usize;
    let mut moves = 0usize;
    for w in signal.windows(2) {
        if w[0].k.abs() < k_max {
            moves += 1;
            if w[1].dir == w[0].dir {
                kept += 1;
            }
        }
    }
    let mean_y = signal.iter().map(|p| params.y_of(p.k)).sum::<f64>() / signal.len().max(1) as f64;
    SignalStats {
        persistence: kept as f64 / moves.max(1) as f64,
        mean_y,
        interior_moves: moves,
    }
}
