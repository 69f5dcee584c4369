mod common;

use common::*;
use rkhs_logrank::{
    kaplan_meier, nelson_aalen, prepare, weighted_logrank, z_statistic, KernelSpec, RiskTable, Scope, SurvivalDataset, WeightFunction,
};

fn kernels() -> Vec<KernelSpec> {
    let mut v: Vec<KernelSpec> = KernelSpec::PRESET_NAMES.iter().map(|n| KernelSpec::preset(n).unwrap()).collect();
    v.push("npearson(5,x)".parse().unwrap());
    v.push("sek(median)".parse().unwrap());
    v
}

#[test]
fn z_matches_naive_definition() {
    let mut r = rng(1);
    for _ in 0..60 {
        let rows = random_rows(&mut r, 40, 0.5);
        let Ok(ds) = SurvivalDataset::validate_and_sort(&rows) else {
            continue;
        };
        let rt = RiskTable::build(&ds);
        let nv = naive(&rows);
        for spec in kernels() {
            let pk = prepare(&spec, &ds, &rt).unwrap();
            let z = z_statistic(&ds, &rt, &pk).z;
            let expected = naive_z(&nv, |u, v| pk.eval(u, v));
            let magnitude = nv.scale * nv.scale * abs_quadratic(&nv, |u, v| pk.eval(u, v));
            assert!(
                (z - expected).abs() <= 1e-10 * z.abs().max(expected.abs()).max(1e-4 * magnitude),
                "{spec}: {z} vs {expected}"
            );
        }
    }
}

#[test]
fn left_limits_match_naive_kaplan_meier() {
    let mut r = rng(2);
    for _ in 0..40 {
        let rows = random_rows(&mut r, 30, 0.6);
        let Ok(ds) = SurvivalDataset::validate_and_sort(&rows) else {
            continue;
        };
        let rt = RiskTable::build(&ds);
        let nv = naive(&rows);
        let km = kaplan_meier(&ds, Scope::Pooled);
        for (k, &orig) in ds.original_index().iter().enumerate() {
            assert!((rt.f_left[k] - nv.f_left[orig]).abs() < 1e-14);
            let t = ds.observations()[k].time;
            assert!((1.0 - km.eval_left(t) - nv.f_left[orig]).abs() < 1e-14);
        }
    }
}

#[test]
fn nelson_aalen_matches_increments() {
    let ds = SurvivalDataset::from_groups(
        &[(1.0, true), (2.0, false), (2.0, true), (4.0, true)],
        &[(1.0, true), (3.0, true), (5.0, false)],
    )
    .unwrap();
    let na = nelson_aalen(&ds, Scope::Pooled);
    // at-risk 7, 5, 3, 2 at the event times 1, 2, 3, 4
    let expected = [
        2.0 / 7.0,
        2.0 / 7.0 + 1.0 / 5.0,
        2.0 / 7.0 + 1.0 / 5.0 + 1.0 / 3.0,
        2.0 / 7.0 + 1.0 / 5.0 + 1.0 / 3.0 + 1.0 / 2.0,
    ];
    for (t, e) in [1.0, 2.0, 3.0, 4.0].iter().zip(expected) {
        assert!((na.eval(*t) - e).abs() < 1e-14, "{t}");
    }
    assert_eq!(na.eval(0.5), 0.0);
    let km = kaplan_meier(&ds, Scope::Pooled);
    assert!((km.eval(2.0) - (5.0 / 7.0) * (4.0 / 5.0)).abs() < 1e-14);
}

#[test]
fn weighted_logrank_matches_naive() {
    let mut r = rng(3);
    for _ in 0..40 {
        let rows = random_rows(&mut r, 40, 0.4);
        let Ok(ds) = SurvivalDataset::validate_and_sort(&rows) else {
            continue;
        };
        let rt = RiskTable::build(&ds);
        let nv = naive(&rows);
        for w in [
            WeightFunction::Constant1,
            WeightFunction::CenteredLinear,
            WeightFunction::BetaShape { p: 1.0, q: 2.0 },
        ] {
            let res = weighted_logrank(&ds, &rt, &w);
            let lrt = naive_lrt(&nv, |u| w.eval(u));
            let var: f64 = nv.scale
                * rows
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| o.event)
                    .map(|(i, _)| w.eval(nv.f_left[i]).powi(2) * nv.l_over_y[i])
                    .sum::<f64>();
            assert!((res.statistic - lrt).abs() <= 1e-12 * lrt.abs().max(1e-3));
            assert!((res.variance_estimate - var).abs() <= 1e-12 * var.max(1e-12));
            if var > 0.0 {
                let std = (1.0 / nv.scale).sqrt() * lrt / var.sqrt();
                assert!((res.standardized - std).abs() <= 1e-10 * std.abs().max(1.0));
            }
        }
    }
}
