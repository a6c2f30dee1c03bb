use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use bkcalc_core::bk::{level_sum, level_sum_on, make_bk_functional, quad_variation, qv_level, stopping_times};
use bkcalc_core::functional::{
    check_causality, combine, constant, jump_indicator, linear, running_integral, state_1d, terminal_value, time,
    Combine,
};
use bkcalc_core::bk::{doleans_dade, levy_area, make_qv_functional};
use bkcalc_core::{BkConfig, CadlagPath, CausalFunctional, Partition};

fn grid_strategy(max_knots: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..0.3, 0..max_knots).prop_map(|gaps| {
        let mut t = vec![0.0];
        for g in gaps {
            t.push(t[t.len() - 1] + g);
        }
        t
    })
}

/// Step paths with 1..=40 knots, values in [-3, 3] and a horizon past the last knot.
fn path_strategy(dim: usize) -> impl Strategy<Value = CadlagPath> {
    (grid_strategy(40), 0.0f64..0.5).prop_flat_map(move |(times, extra)| {
        let n = times.len();
        prop::collection::vec(-3.0f64..3.0, n * dim).prop_map(move |values| {
            let horizon = times[times.len() - 1] + extra;
            CadlagPath::new(Partition::new(times.clone()).unwrap(), values, dim)
                .unwrap()
                .with_horizon(horizon)
                .unwrap()
        })
    })
}

fn path_and_time(dim: usize) -> impl Strategy<Value = (CadlagPath, f64)> {
    path_strategy(dim).prop_flat_map(|p| {
        let h = p.horizon();
        (Just(p), 0.0..=h)
    })
}

fn probe_times(path: &CadlagPath) -> Vec<f64> {
    let h = path.horizon();
    let mut t: Vec<f64> = (0..=16).map(|k| h * k as f64 / 16.0).collect();
    t.extend(path.times());
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn builtins(cfg: &BkConfig) -> Vec<CausalFunctional> {
    let square = state_1d(|_, x| x * x, |_, _| 0.0, |_, x| 2.0 * x, |_, _| 2.0);
    vec![
        time(),
        constant(1.5),
        jump_indicator(),
        running_integral(|t, x| t * x[0] + x[1].sin()),
        square.clone(),
        combine(Combine::Product, vec![square.clone(), time()]).unwrap(),
        make_bk_functional(square, 1, cfg).unwrap(),
        make_qv_functional(0, 1, cfg).unwrap(),
        doleans_dade(cfg).unwrap(),
        levy_area(cfg).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn zero_bump_is_stop((path, t) in path_and_time(2)) {
        prop_assert_eq!(path.bump(t, &[0.0, 0.0]).unwrap(), path.stop(t).unwrap());
    }

    #[test]
    fn stop_is_idempotent_and_composes((path, t) in path_and_time(2), s in 0.0f64..1.0) {
        let once = path.stop(t).unwrap();
        prop_assert_eq!(&once.stop(t).unwrap(), &once);
        let s = s * path.horizon();
        prop_assert_eq!(once.stop(s).unwrap(), path.stop(s.min(t)).unwrap());
    }

    #[test]
    fn stop_preserves_the_past((path, t) in path_and_time(1)) {
        let stopped = path.stop(t).unwrap();
        for &s in path.times().iter().filter(|&&s| s <= t) {
            prop_assert_eq!(stopped.eval(s).unwrap(), path.eval(s).unwrap());
        }
        prop_assert_eq!(stopped.eval(path.horizon()).unwrap(), path.eval(t).unwrap());
    }

    #[test]
    fn bump_moves_only_the_future((path, t) in path_and_time(1), r in -2.0f64..2.0) {
        let bumped = path.bump(t, &[r]).unwrap();
        prop_assert_eq!(bumped.eval(t).unwrap()[0], path.eval(t).unwrap()[0] + r);
        prop_assert_eq!(bumped.eval(path.horizon()).unwrap()[0], path.eval(t).unwrap()[0] + r);
        prop_assert_eq!(bumped.left_limit(t).unwrap(), path.left_limit(t).unwrap());
    }

    #[test]
    fn builtins_are_causal(path in path_strategy(2)) {
        let times = probe_times(&path);
        for f in builtins(&BkConfig::default().with_max_level(8)) {
            prop_assert!(check_causality(&f, &path, &times).unwrap(), "{}", f.label());
        }
    }

    #[test]
    fn sup_distance_is_a_metric(a in path_strategy(1), b in path_strategy(1)) {
        let until = a.horizon().min(b.horizon());
        prop_assert_eq!(a.sup_distance(&a, until).unwrap(), 0.0);
        prop_assert_eq!(a.sup_distance(&b, until).unwrap(), b.sup_distance(&a, until).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn anticipating_functional_is_caught(path in path_strategy(1)) {
        // a path that moves after time 0 is enough to expose ω(T)
        let moves = path.values().iter().any(|&v| v != path.values()[0]);
        let times = probe_times(&path);
        prop_assert_eq!(check_causality(&terminal_value(0), &path, &times).unwrap(), !moves);
    }

    #[test]
    fn constant_integrand_is_exact(x in path_strategy(1), c in -4.0f64..4.0, level in 0u32..16) {
        let z = CadlagPath::constant(vec![c], x.horizon()).unwrap();
        let integral = level_sum(&z, &x, level).unwrap();
        for &t in x.times() {
            prop_assert_eq!(integral.eval(t).unwrap()[0], c * x.eval(t).unwrap()[0]);
        }
    }

    #[test]
    fn level_sum_is_linear_in_the_integrator(
        triple in path_strategy(3), a in -2.0f64..2.0, b in -2.0f64..2.0, level in 0u32..12,
    ) {
        let (z, x, y) = (triple.coordinate(0).unwrap(), triple.coordinate(1).unwrap(), triple.coordinate(2).unwrap());
        let mixed: Vec<f64> = x.values().iter().zip(y.values()).map(|(p, q)| a * p + b * q).collect();
        let xy = CadlagPath::scalar(x.grid().clone(), mixed).unwrap().with_horizon(x.horizon()).unwrap();
        let (ix, iy, ixy) = (
            level_sum(&z, &x, level).unwrap(),
            level_sum(&z, &y, level).unwrap(),
            level_sum(&z, &xy, level).unwrap(),
        );
        for t in probe_times(&x) {
            let expect = a * ix.eval(t).unwrap()[0] + b * iy.eval(t).unwrap()[0];
            assert_abs_diff_eq!(ixy.eval(t).unwrap()[0], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn level_sum_is_linear_in_the_integrand_on_a_fixed_grid(
        triple in path_strategy(3), a in -2.0f64..2.0, level in 0u32..12,
    ) {
        let (z1, z2, x) = (triple.coordinate(0).unwrap(), triple.coordinate(1).unwrap(), triple.coordinate(2).unwrap());
        let grid = stopping_times(&z1, level, z1.horizon()).unwrap();
        let sum: Vec<f64> = z1.values().iter().zip(z2.values()).map(|(p, q)| p + a * q).collect();
        let zs = CadlagPath::scalar(z1.grid().clone(), sum).unwrap().with_horizon(z1.horizon()).unwrap();
        let i1 = level_sum_on(&grid, &z1, &x).unwrap();
        let i2 = level_sum_on(&grid, &z2, &x).unwrap();
        let is = level_sum_on(&grid, &zs, &x).unwrap();
        for t in probe_times(&z1) {
            let expect = i1.eval(t).unwrap()[0] + a * i2.eval(t).unwrap()[0];
            assert_abs_diff_eq!(is.eval(t).unwrap()[0], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn quadratic_variation_is_symmetric(path in path_strategy(2), level in 0u32..12) {
        prop_assert_eq!(qv_level(&path, 0, 1, level).unwrap(), qv_level(&path, 1, 0, level).unwrap());
        let cfg = BkConfig::default().with_max_level(level.max(1));
        prop_assert_eq!(
            quad_variation(&path, 0, 1, &cfg).unwrap().path,
            quad_variation(&path, 1, 0, &cfg).unwrap().path
        );
    }

    #[test]
    fn piecewise_const_agrees_on_the_partition(path in path_strategy(2), level in 0u32..8) {
        let pi = Partition::dyadic(path.horizon(), level).unwrap();
        let approx = path.piecewise_const(&pi).unwrap();
        for &t in pi.times() {
            prop_assert_eq!(approx.eval(t).unwrap(), path.eval(t).unwrap());
        }
    }

    #[test]
    fn linear_combination_trajectories_add_up(path in path_strategy(2), w in -3.0f64..3.0) {
        let f = running_integral(|_, x| x[0] * x[1]);
        let g = state_1d(|t, x| t * x, |_, x| x, |t, _| t, |_, _| 0.0);
        let h = linear(vec![1.0, w], vec![f.clone(), g.clone()]).unwrap();
        let times = probe_times(&path);
        let (a, b, c) = (
            f.trajectory(&path, &times).unwrap(),
            g.trajectory(&path, &times).unwrap(),
            h.trajectory(&path, &times).unwrap(),
        );
        for k in 0..times.len() {
            assert_abs_diff_eq!(c[k], a[k] + w * b[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn pointwise_and_batched_evaluation_agree(path in path_strategy(2)) {
        let times = probe_times(&path);
        for f in builtins(&BkConfig::default().with_max_level(8)) {
            let batched = f.trajectory(&path, &times).unwrap();
            for (k, &t) in times.iter().enumerate() {
                prop_assert_eq!(batched[k], f.eval(t, &path).unwrap(), "{} at {}", f.label(), t);
            }
        }
    }
}
