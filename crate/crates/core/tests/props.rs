//! Property tests over random models, densities and price problems.

mod common;

use common::integrate;
use proptest::prelude::*;
use regdp_core::model::{expected_utility_rate, survival, transitions};
use regdp_core::policy::{objective_f, optimal_price_threshold, phi};
use regdp_core::{Direction, ModelParams, ParamSpec, State, TrapezoidPdf};

fn pdf_strategy() -> impl Strategy<Value = TrapezoidPdf> {
    (-5.0..5.0f64, 0.5..20.0f64, 0.0..=1.0f64)
        .prop_map(|(lo, width, frac)| TrapezoidPdf::new(lo, lo + width, lo + frac * width).unwrap())
}

/// Valid models small enough to enumerate: the reserve fits inside
/// `[n1, n2]` and uniformization stays feasible by construction.
fn model_strategy() -> impl Strategy<Value = ModelParams> {
    (4u32..40, 0.1..4.0f64, 0.1..4.0f64, 1u32..6, 0.0..1.0f64, 0.01..20.0f64).prop_filter_map(
        "reserve must fit",
        |(n, lambda, mu, levels, rfrac, r_disc)| {
            let n_bar = f64::from(n) / 2.0;
            let r = (rfrac * n_bar).max(0.5);
            ParamSpec {
                n,
                n2: n,
                n_bar,
                r,
                lambda,
                mu,
                delta_y: 1.0 / f64::from(levels),
                r_disc,
                ..ParamSpec::default()
            }
            .build()
            .ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn transitions_are_distributions(p in model_strategy(), frac in 0.0..=1.0f64, pick in any::<prop::sample::Index>()) {
        let g = p.grid();
        let s = g.state(pick.index(g.len()));
        let u = p.t_min() + frac * (p.t_max() - p.t_min());
        let t = transitions(&p, &s, u).unwrap();
        for (to, prob) in t.iter() {
            prop_assert!((0.0..=1.0).contains(&prob), "{prob}");
            prop_assert!(g.contains(&to));
        }
        prop_assert!((t.total() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn survival_is_nonincreasing(pdf in pdf_strategy()) {
        let (lo, hi) = (pdf.t_min(), pdf.t_max());
        let mut last = f64::INFINITY;
        for n in 0..1000 {
            let u = lo + (hi - lo) * f64::from(n) / 999.0;
            let s = survival(&pdf, u.min(hi)).unwrap();
            prop_assert!(s <= last + 1e-15);
            last = s;
        }
        prop_assert!((survival(&pdf, lo).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!(survival(&pdf, hi).unwrap().abs() < 1e-12);
    }

    #[test]
    fn utility_matches_quadrature(frac_hat in 0.0..=1.0f64, frac_u in 0.0..=1.0f64, i in 0u32..100) {
        let p = common::reference();
        let pdf = TrapezoidPdf::new(p.t_min(), p.t_max(), p.t_min() + frac_hat * (p.t_max() - p.t_min())).unwrap();
        let u = p.t_min() + frac_u * (p.t_max() - p.t_min());
        let got = expected_utility_rate(&p, &pdf, i, u).unwrap();
        let tail = integrate(
            |t| (t - p.t_min()) * pdf.density(t).unwrap(),
            u,
            p.t_max(),
            &[pdf.t_hat()],
            1e-14,
        );
        let want = f64::from(p.n() - i) * p.lambda_dt() * p.b() * tail;
        prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1e-300), "{got} vs {want}");
    }

    /// On the sloped part of the density the curvature of the utility in `u`
    /// is proportional to `-(t_min + t_max - 2u)`. With the elbow at `t_min`
    /// the whole band is sloped, so the sign flips once, at mid band.
    #[test]
    fn utility_curvature_flips_at_mid_band(lo in -5.0..5.0f64, width in 1.0..20.0f64, i in 0u32..100) {
        let p = common::reference();
        let pdf = TrapezoidPdf::new(lo, lo + width, lo).unwrap();
        let f = |u: f64| expected_utility_rate(&p, &pdf, i, u).unwrap();
        let h = width / 400.0;
        let mut flips = vec![];
        let mut last = 0.0;
        for n in 1..400 {
            let u = lo + h * f64::from(n) + 0.37 * h;
            if u + h > lo + width {
                break;
            }
            let sign = (f(u + h) - 2.0 * f(u) + f(u - h)).signum();
            if last != 0.0 && sign != last {
                flips.push(u);
            }
            last = sign;
        }
        prop_assert_eq!(flips.len(), 1, "{:?}", flips);
        prop_assert!((flips[0] - (lo + 0.5 * width)).abs() <= 2.0 * h);
    }

    #[test]
    fn uniform_utility_has_the_closed_form(lo in -5.0..5.0f64, width in 0.5..20.0f64, frac_u in 0.0..=1.0f64) {
        let pdf = TrapezoidPdf::new(lo, lo + width, lo + width).unwrap();
        let u = lo + frac_u * width;
        // Uniform density: E[(T - lo) 1{T >= u}] = ((hi - lo)^2 - (u - lo)^2) / (2 (hi - lo)).
        let want = (width * width - (u - lo) * (u - lo)) / (2.0 * width);
        prop_assert!((pdf.tail(u).1 - want).abs() <= 1e-10 * want.max(1.0));
    }

    #[test]
    fn brute_force_argmax_matches_closed_form(frac_hat in 0.0..1.0f64, delta in -5.0..25.0f64) {
        let p = common::reference();
        let pdf = p.pdf_at(2.0 * frac_hat - 1.0);
        check_argmax(&p, &pdf, delta, 20_000)?;
    }

    #[test]
    fn phi_is_nonincreasing(a in -10.0..30.0f64, b in -10.0..30.0f64, y in -1.0..=1.0f64) {
        let p = common::reference();
        let pdf = p.pdf_at(y);
        let (d1, d2) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(phi(&p, &pdf, d1) >= phi(&p, &pdf, d2) - 1e-12);
    }

    #[test]
    fn phi_differences_are_sandwiched(a in -10.0..30.0f64, b in -10.0..30.0f64, y in -1.0..=1.0f64) {
        prop_assume!(a != b);
        let p = common::reference();
        let pdf = p.pdf_at(y);
        let (d1, d2) = if a < b { (a, b) } else { (b, a) };
        let prob = |d: f64| pdf.survival(optimal_price_threshold(&p, d)).unwrap();
        let gap = phi(&p, &pdf, d2) - phi(&p, &pdf, d1);
        let upper = -p.alpha() * prob(d2) * (d2 - d1);
        let lower = -p.alpha() * prob(d1) * (d2 - d1);
        prop_assert!(gap <= upper + 1e-10, "{gap} > {upper}");
        prop_assert!(gap >= lower - 1e-10, "{gap} < {lower}");
    }

    #[test]
    fn threshold_is_monotone_and_piecewise_linear(a in -10.0..30.0f64, b in -10.0..30.0f64) {
        let p = common::reference();
        let (d1, d2) = if a <= b { (a, b) } else { (b, a) };
        let (u1, u2) = (optimal_price_threshold(&p, d1), optimal_price_threshold(&p, d2));
        prop_assert!(u1 <= u2);
        let interior = |u: f64| u > p.t_min() && u < p.t_max();
        if interior(u1) && interior(u2) && d2 > d1 {
            let slope = (u2 - u1) / (d2 - d1);
            prop_assert!((slope - p.alpha() / p.b()).abs() < 1e-9);
        }
    }

    #[test]
    fn large_utility_slope_gives_the_lowest_price(delta in 0.01..100.0f64) {
        let p = ParamSpec { b: 1e12, ..ParamSpec::reference() }.build().unwrap();
        prop_assert!(optimal_price_threshold(&p, delta) - p.t_min() < 1e-9);
    }

    #[test]
    fn grid_index_round_trips(p in model_strategy(), pick in any::<prop::sample::Index>()) {
        let g = p.grid();
        let idx = pick.index(g.len());
        prop_assert_eq!(g.index(&g.state(idx)), idx);
    }
}

/// The grid argmax of `objective_f` lies within one grid step of the
/// closed-form threshold. Near-flat objectives are compared by value.
fn check_argmax(p: &ModelParams, pdf: &TrapezoidPdf, delta: f64, points: usize) -> Result<(), TestCaseError> {
    let (lo, hi) = (p.t_min(), p.t_max());
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (f64::NEG_INFINITY, lo);
    for n in 0..points {
        let u = (lo + step * n as f64).min(hi);
        let v = objective_f(p, pdf, u, delta).unwrap();
        if v > best.0 {
            best = (v, u);
        }
    }
    let u_star = optimal_price_threshold(p, delta);
    let at_star = objective_f(p, pdf, u_star, delta).unwrap();
    prop_assert!(at_star >= best.0 - 1e-12, "closed form below grid max");
    if (best.1 - u_star).abs() > step + 1e-12 {
        // Only allowed where the objective is flat, i.e. no idle mass left.
        prop_assert!((at_star - best.0).abs() < 1e-12, "u* {u_star} vs grid {}", best.1);
    }
    Ok(())
}

#[test]
fn reflected_signal_moves_stay_on_the_grid() {
    let p = common::small();
    for dir in Direction::BOTH {
        for k in [-p.k_max(), p.k_max()] {
            let t = transitions(&p, &State::new(10, k, dir), p.t_min()).unwrap();
            assert!(t.moves().iter().all(|m| m.0.k.abs() <= p.k_max()));
        }
    }
}
