use atlab_core::bounds;
use atlab_core::numcore::{self, SeededRng};
use atlab_core::PerturbationSet;
use proptest::prelude::*;

fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
    (1usize..8).prop_flat_map(|d| prop::collection::vec(-10.0..10.0f64, d))
}

proptest! {
    #[test]
    fn projection_is_feasible_and_idempotent(g in vec_strategy(), eps in 0.01..3.0f64, linf in any::<bool>()) {
        let set = if linf {
            PerturbationSet::linf(eps, g.len()).unwrap()
        } else {
            PerturbationSet::l2(eps, g.len()).unwrap()
        };
        let p = set.project(&g).unwrap();
        prop_assert!(set.contains(&p, 1e-12));
        let pp = set.project(&p).unwrap();
        prop_assert!(numcore::norm_inf(&numcore::sub(&p, &pp)) <= 1e-12);
    }

    #[test]
    fn extreme_point_lies_on_the_boundary(g in vec_strategy(), eps in 0.01..3.0f64) {
        prop_assume!(numcore::norm2(&g) > 1e-9);
        let set = PerturbationSet::l2(eps, g.len()).unwrap();
        let e = set.project_extreme(&g).unwrap();
        prop_assert!((numcore::norm2(&e) - eps).abs() <= 1e-12 * (1.0 + eps));
        prop_assert!(numcore::dot(&e, &g) > 0.0);
    }

    #[test]
    fn ascent_step_stays_in_the_ball(g in vec_strategy(), eps in 0.01..3.0f64, step in 0.0..2.0f64, seed in any::<u64>()) {
        let set = PerturbationSet::l2(eps, g.len()).unwrap();
        let delta = set.sample(&mut SeededRng::new(seed, 0));
        let next = set.ascent_step(&delta, &g, step).unwrap();
        prop_assert!(set.contains(&next, 1e-12));
    }

    #[test]
    fn free_growth_factor_dominates_vanilla(
        beta in 0.01..5.0f64,
        c in 0.01..2.0f64,
        m in 1usize..10,
        attack_lr in 0.0..1.0f64,
        eps in 0.0..1.0f64,
        psi in 0.1..50.0f64,
    ) {
        let v = bounds::lambda_vanilla(beta, c).unwrap();
        let f = bounds::lambda_free(beta, c, m, attack_lr, eps, psi).unwrap();
        let fast = bounds::lambda_fast(beta, c, attack_lr, eps, psi).unwrap();
        prop_assert!(f >= v * (1.0 - 1e-12));
        prop_assert!(fast >= v * (1.0 - 1e-12));
    }
}
