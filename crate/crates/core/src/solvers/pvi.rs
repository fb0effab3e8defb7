//! Projected value iteration from simulated transitions.

use nalgebra::{SMatrix, SVector};

use super::features::{feature_vector, N_FEATURES};
use crate::model::{ModelParams, State};
use crate::{Error, Result};

pub type Mat12 = SMatrix<f64, N_FEATURES, N_FEATURES>;
pub type Vec12 = SVector<f64, N_FEATURES>;

const HALF: usize = N_FEATURES / 2;
type Mat6 = SMatrix<f64, HALF, HALF>;
type Vec6 = SVector<f64, HALF>;

/// A feature vector stored as its only non-zero direction block.
#[derive(Copy, Clone, Debug)]
pub(crate) struct Block {
    pub off: usize,
    pub f: [f64; HALF],
}

impl Block {
    #[cfg(test)]
    pub fn from_dense(phi: &[f64; N_FEATURES]) -> Self {
        let off = if phi[HALF..].iter().any(|v| *v != 0.0) { HALF } else { 0 };
        let mut f = [0.0; HALF];
        f.copy_from_slice(&phi[off..off + HALF]);
        Block { off, f }
    }
}

/// Ridge added to the feature second-moment matrix before inversion.
pub const MOMENT_RIDGE: f64 = 1e-8;

/// `r - gamma G (C r - d)`.
pub fn pvi_step(c: &Mat12, d: &Vec12, g: &Mat12, r: &Vec12, gamma_step: f64) -> Vec12 {
    r - g * (c * r - d) * gamma_step
}

/// Running sums behind the sample averages `C_k`, `d_k` and the moment
/// matrix whose inverse is `G_k`.
#[derive(Clone, Debug)]
pub struct Estimates {
    alpha: f64,
    count: usize,
    sum_c: Mat12,
    sum_d: Vec12,
    sum_m: Mat12,
    /// Some pushed feature vector had both direction blocks non-zero.
    mixed: bool,
    /// Inverses of the per-direction blocks of the moment sum, kept by
    /// [`Estimates::push_block`].
    inv: Option<[BlockInverse; 2]>,
}

/// `(S + ridge I)^-1` for one 6x6 diagonal block `S` of the moment sum,
/// updated by Sherman-Morrison and recomputed from scratch at pushes 1, 2,
/// 4, ..., and every `REFRESH` pushes after that.
#[derive(Clone, Debug)]
struct BlockInverse {
    p: Mat6,
    pushes: usize,
}

const REFRESH: usize = 1024;

impl BlockInverse {
    fn new() -> Self {
        BlockInverse {
            p: Mat6::identity() / MOMENT_RIDGE,
            pushes: 0,
        }
    }

    fn update(&mut self, f: &[f64; HALF], sum: &Mat12, off: usize) {
        self.pushes += 1;
        let n = self.pushes;
        if n.is_power_of_two() && n <= REFRESH || n.is_multiple_of(REFRESH) {
            let m = Mat6::from_fn(|a, b| sum[(off + a, off + b)]) + Mat6::identity() * MOMENT_RIDGE;
            if let Some(inv) = m.cholesky().map(|ch| ch.inverse()) {
                self.p = inv;
                return;
            }
        }
        let v = Vec6::from_column_slice(f);
        let pv = self.p * v;
        let denom = 1.0 + v.dot(&pv);
        self.p.ger(-1.0 / denom, &pv, &pv, 1.0);
    }
}

impl Estimates {
    pub fn new(alpha: f64) -> Self {
        Estimates {
            alpha,
            count: 0,
            sum_c: Mat12::zeros(),
            sum_d: Vec12::zeros(),
            sum_m: Mat12::zeros(),
            mixed: false,
            inv: None,
        }
    }

    /// Adds one transition `phi -> phi_next` with period cost `cost`.
    pub fn push(&mut self, phi: &Vec12, phi_next: &Vec12, cost: f64) {
        let diff = phi - phi_next * self.alpha;
        self.sum_c.ger(1.0, phi, &diff, 1.0);
        self.sum_m.ger(1.0, phi, phi, 1.0);
        self.sum_d.axpy(cost, phi, 1.0);
        self.mixed |= phi.rows(0, HALF).iter().any(|v| *v != 0.0) && phi.rows(HALF, HALF).iter().any(|v| *v != 0.0);
        self.inv = None;
        self.count += 1;
    }

    /// [`Estimates::push`] for block-sparse features.
    pub(crate) fn push_block(&mut self, a: &Block, b: &Block, cost: f64) {
        for p in 0..HALF {
            let row = a.off + p;
            let ap = a.f[p];
            for q in 0..HALF {
                let m = ap * a.f[q];
                self.sum_m[(row, a.off + q)] += m;
                self.sum_c[(row, a.off + q)] += m;
                self.sum_c[(row, b.off + q)] -= self.alpha * ap * b.f[q];
            }
            self.sum_d[row] += cost * ap;
        }
        if self.count == 0 {
            self.inv = Some([BlockInverse::new(), BlockInverse::new()]);
        }
        if let Some(inv) = &mut self.inv {
            inv[a.off / HALF].update(&a.f, &self.sum_m, a.off);
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    fn scale(&self) -> f64 {
        1.0 / self.count.max(1) as f64
    }

    pub fn c(&self) -> Mat12 {
        self.sum_c * self.scale()
    }

    pub fn d(&self) -> Vec12 {
        self.sum_d * self.scale()
    }

    pub fn moments(&self) -> Mat12 {
        self.sum_m * self.scale()
    }

    /// Inverse of the ridge-regularized moment matrix.
    pub fn g(&self) -> Mat12 {
        let m = self.moments() + Mat12::identity() * MOMENT_RIDGE;
        match m.cholesky() {
            Some(ch) => ch.inverse(),
            None => m.try_inverse().unwrap_or_else(|| Mat12::identity() / MOMENT_RIDGE),
        }
    }

    /// One projected value iteration step from `r` with the current averages.
    ///
    /// Same as `pvi_step(C, d, G, r, 1)`, but never forms `G`. After
    /// [`Estimates::push_block`] only, the ridge sits on the moment sum
    /// instead of the average, i.e. it shrinks as `1e-8 / k`.
    pub fn step(&self, r: &Vec12) -> Vec12 {
        let mut resid = [0.0; N_FEATURES];
        for (col, rj) in self.sum_c.as_slice().chunks_exact(N_FEATURES).zip(r.iter()) {
            for (acc, c) in resid.iter_mut().zip(col) {
                *acc += c * rj;
            }
        }
        for (acc, d) in resid.iter_mut().zip(self.sum_d.iter()) {
            *acc -= d;
        }
        if let Some(inv) = &self.inv {
            // The moment sum is block diagonal, so each block solves alone;
            // the 1 / k of the averages cancels.
            let mut out = *r;
            for (b, blk) in inv.iter().enumerate() {
                let off = b * HALF;
                let x = blk.p * Vec6::from_column_slice(&resid[off..off + HALF]);
                for a in 0..HALF {
                    out[off + a] -= x[a];
                }
            }
            return out;
        }
        let s = self.scale();
        let m = self.sum_m * s + Mat12::identity() * MOMENT_RIDGE;
        match m.cholesky() {
            Some(ch) => r - ch.solve(&(Vec12::from(resid) * s)),
            None => pvi_step(&self.c(), &self.d(), &self.g(), r, 1.0),
        }
    }

    /// Direct solve of `C r = d`.
    pub fn batch_solution(&self) -> Result<Vec12> {
        self.c()
            .lu()
            .solve(&self.d())
            .ok_or_else(|| Error::Degenerate("sample matrix C is singular".into()))
    }
}

/// One observed transition.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Step {
    pub from: State,
    pub u: f64,
    pub cost: f64,
    pub to: State,
}

/// Sample averages over a trajectory generated under one fixed policy.
pub fn accumulate_estimates(params: &ModelParams, trajectory: &[Step], min_len: usize) -> Result<Estimates> {
    let needed = min_len.max(1);
    if trajectory.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: trajectory.len(),
        });
    }
    let mut est = Estimates::new(params.alpha());
    for st in trajectory {
        let phi = Vec12::from(feature_vector(params, &st.from));
        let next = Vec12::from(feature_vector(params, &st.to));
        est.push(&phi, &next, st.cost);
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Direction, ParamSpec};
    use approx::assert_relative_eq;

    #[test]
    fn step_examples() {
        let r = Vec12::from_fn(|i, _| i as f64 - 3.0);
        let out = pvi_step(&Mat12::identity(), &Vec12::zeros(), &Mat12::identity(), &r, 1.0);
        assert_eq!(out, Vec12::zeros());

        let c = Mat12::from_fn(|i, j| if i == j { 2.0 } else { 0.1 / (1.0 + (i + j) as f64) });
        let d = c * r;
        let fixed = pvi_step(&c, &d, &Mat12::identity(), &r, 1.0);
        assert_relative_eq!((fixed - r).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_transition_estimates() {
        let mut est = Estimates::new(0.95);
        let mut e = Vec12::zeros();
        e[4] = 1.0;
        est.push(&e, &Vec12::zeros(), 2.5);
        let c = est.c();
        assert_eq!(c[(4, 4)], 1.0);
        assert_eq!(c.iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(est.d()[4], 2.5);
    }

    #[test]
    fn undiscounted_c_is_moment_matrix() {
        let p = ParamSpec::reference().build().unwrap();
        let mut est = Estimates::new(0.0);
        let len = p.grid().len();
        for n in 0..400 {
            let s = p.grid().state((n * 53) % len);
            let phi = Vec12::from(feature_vector(&p, &s));
            let other = p.grid().state((n * 7919) % len);
            est.push(&phi, &Vec12::from(feature_vector(&p, &other)), 1.0);
        }
        assert_eq!(est.c(), est.moments());
        let prod = est.g() * est.c();
        assert_relative_eq!((prod - Mat12::identity()).abs().max(), 0.0, epsilon = 1e-4);
    }

    #[test]
    fn block_push_and_step_match_dense() {
        let p = ParamSpec::reference().build().unwrap();
        let len = p.grid().len();
        let mut dense = Estimates::new(0.9);
        let mut sparse = Estimates::new(0.9);
        for n in 0..300 {
            let a = feature_vector(&p, &p.grid().state((n * 53) % len));
            let b = feature_vector(&p, &p.grid().state((n * 31 + 7) % len));
            let cost = (n as f64).sin();
            dense.push(&Vec12::from(a), &Vec12::from(b), cost);
            sparse.push_block(&Block::from_dense(&a), &Block::from_dense(&b), cost);
        }
        assert_relative_eq!((dense.c() - sparse.c()).abs().max(), 0.0, epsilon = 1e-12);
        assert_relative_eq!((dense.d() - sparse.d()).abs().max(), 0.0, epsilon = 1e-12);
        let r = Vec12::from_fn(|i, _| 0.5 - i as f64 * 0.1);
        let full = pvi_step(&dense.c(), &dense.d(), &dense.g(), &r, 1.0);
        assert_relative_eq!((dense.step(&r) - full).norm(), 0.0, epsilon = 1e-6 * full.norm());
    }

    #[test]
    fn short_trajectory_is_refused() {
        let p = ParamSpec::reference().build().unwrap();
        let s = crate::model::State::new(50, 0, Direction::Up);
        let tr = vec![Step { from: s, u: 0.0, cost: 0.0, to: s }; 3];
        assert!(matches!(
            accumulate_estimates(&p, &tr, 10),
            Err(Error::InsufficientData { needed: 10, got: 3 })
        ));
        assert!(accumulate_estimates(&p, &tr, 3).is_ok());
    }
}
