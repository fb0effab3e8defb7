//! Shared helpers for the integration tests: an adaptive Simpson rule used as
//! an independent oracle for the closed-form integrals, and small models.

#![allow(dead_code)]

use regdp_core::{ModelParams, ParamSpec};

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// `int_a^b f` to absolute tolerance `tol`. Pass the kinks of `f` in
/// `breaks` so each piece is smooth.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|x| *x > a && *x < b));
    pts.push(b);
    pts.windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                return 0.0;
            }
            let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(&f, lo, hi, fa, fm, fb, whole, tol, 40)
        })
        .sum()
}

pub fn reference() -> ModelParams {
    ParamSpec::reference().build().unwrap()
}

/// 20 appliances, 11 signal levels: 924 states.
pub fn small() -> ModelParams {
    ParamSpec {
        n: 20,
        n2: 20,
        n_bar: 10.0,
        r: 5.0,
        delta_y: 0.2,
        ..ParamSpec::default()
    }
    .build()
    .unwrap()
}
