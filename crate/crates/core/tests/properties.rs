use proptest::prelude::*;

use calboot::calibrate::{ra_run, CandidateDraw, RaConfig};
use calboot::contour::{Association, Observed};
use calboot::inference::joint_region_thresholds;
use calboot::mathkit::rng::RngStream;
use calboot::models::{Dataset, GaussianMean};
use calboot::refine::{dr_select, TieBreak};

fn pool(us: &[u32]) -> Vec<CandidateDraw> {
    us.iter()
        .enumerate()
        .map(|(i, &u)| CandidateDraw {
            theta_star: vec![i as f64],
            m_used: 1,
            t_value: -(i as f64),
            u_value: f64::from(u) / 100.0,
            loss_at_data: i as f64,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dr_only_selects_pool_members(us in prop::collection::vec(0u32..=100, 1..80), seed in 0u64..1000, b in 1usize..400) {
        let p = pool(&us);
        let a = dr_select(&p, b, TieBreak::Random, &RngStream::new(seed)).unwrap();
        let again = dr_select(&p, b, TieBreak::Random, &RngStream::new(seed)).unwrap();
        prop_assert_eq!(&a, &again);
        prop_assert_eq!(a.draws.len(), b);
        for (d, &i) in a.draws.iter().zip(&a.pool_indices) {
            prop_assert_eq!(d, &p[i]);
        }
    }

    #[test]
    fn joint_thresholds_are_nested(values in prop::collection::vec(-50.0f64..50.0, 5..200), cut in 1usize..9) {
        let rows: Vec<Vec<f64>> = values.iter().map(|v| vec![*v]).collect();
        let thetas: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let lo = cut as f64 / 10.0;
        let q = joint_region_thresholds(&thetas, |t: &[f64]| t[0] * t[0], &[lo / 2.0, lo, (lo + 1.0) / 2.0]).unwrap();
        prop_assert!(q[0] >= q[1] && q[1] >= q[2]);
    }

    #[test]
    fn ra_trace_respects_clip_bounds(seed in 0u64..500, lower in 2usize..20, span in 1usize..200, d in 0.1f64..30.0) {
        let y: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let model = GaussianMean::new(1.0).unwrap();
        let obs = Observed::fit(&model, Dataset::scalar(y, "prop")).unwrap();
        let mut c = RaConfig::for_data(20, 1, 0.1);
        c.m_lower = lower;
        c.m_upper = lower + span;
        c.m_init = (lower + span / 2) as f64;
        c.step_constant = d * 20.0;
        c.max_iter = 40;
        c.inner_reps = 9;
        let out = ra_run(&model, &obs, Association::Joint, &c, &RngStream::new(seed)).unwrap();
        prop_assert!(out.trace.records.iter().all(|r| (c.m_lower..=c.m_upper).contains(&r.m_int)));
        prop_assert!(out.pool.iter().zip(&out.trace.records).all(|(d, r)| d.m_used == r.m_int));
        prop_assert!(out.m_alpha >= c.m_lower && out.m_alpha <= c.m_upper);
    }
}
