use matchwelfare::generators::{random_unit_range, QuasiCombinatorialClass};
use matchwelfare::mechanism::{by_name, evaluate, EvalMode, Mechanism, RandomPriority};
use matchwelfare::model::{social_welfare, Matching, ValuationProfile};
use matchwelfare::transforms::quasicombinatorial_reduce;
use matchwelfare::{optimal_matching, optimal_welfare, tolerance};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn profile(n: usize, seed: u64) -> ValuationProfile {
    random_unit_range(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mechanisms_stay_below_the_optimum(n in 1usize..=6, seed in any::<u64>()) {
        let p = profile(n, seed);
        let opt = optimal_welfare(&p);
        for name in ["rp", "uniform", "sd", "opt"] {
            let mech = by_name(name).unwrap();
            let d = mech.distribution(&p).unwrap();
            prop_assert!(d.is_doubly_stochastic(tolerance::prob(n)), "{name}");
            let w = mech.exact(&p).unwrap().expected_welfare;
            prop_assert!(w <= opt + tolerance::prob(n), "{name}: {w} > {opt}");
        }
        prop_assert!((by_name("opt").unwrap().exact(&p).unwrap().expected_welfare - opt).abs() < 1e-12);
    }

    #[test]
    fn optimum_beats_random_matchings(n in 1usize..=9, seed in any::<u64>()) {
        let p = profile(n, seed);
        let best = optimal_matching(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..20 {
            let mut a: Vec<usize> = (0..n).collect();
            a.shuffle(&mut rng);
            let w = social_welfare(&p, &Matching::new(a).unwrap()).unwrap();
            prop_assert!(w <= best.welfare + 1e-12);
        }
    }

    #[test]
    fn optimum_ignores_renaming(n in 1usize..=7, seed in any::<u64>()) {
        let p = profile(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let w = optimal_welfare(&p);
        prop_assert!((optimal_welfare(&p.permute_agents(&perm)) - w).abs() < 1e-12);
        prop_assert!((optimal_welfare(&p.permute_items(&perm)) - w).abs() < 1e-12);
    }

    #[test]
    fn hybrid_is_a_lottery_at_three(seed in any::<u64>()) {
        let p = profile(3, seed);
        let hm = by_name("hm").unwrap();
        let d = hm.distribution(&p).unwrap();
        prop_assert!(d.is_doubly_stochastic(tolerance::prob(3)));
        let total: f64 = hm.lottery(&p).unwrap().iter().map(|(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn monte_carlo_brackets_exact_welfare() {
    for seed in 0..5 {
        let p = profile(6, seed);
        let exact = evaluate(&RandomPriority, &p, EvalMode::Exact).unwrap().expected_welfare;
        let mc = evaluate(&RandomPriority, &p, EvalMode::MonteCarlo { samples: 200_000, seed }).unwrap();
        assert!((mc.expected_welfare - exact).abs() <= mc.method.ci_radius());
    }
}

#[test]
fn reduction_lands_in_the_class_without_raising_the_ratio() {
    let eps = 1e-3;
    let class = QuasiCombinatorialClass::new(eps).unwrap();
    for seed in 0..10 {
        let p = profile(4, 100 + seed);
        let r = quasicombinatorial_reduce(&p, eps, &RandomPriority).unwrap();
        assert!(class.contains(&r.profile));
        assert!(r.ratios.windows(2).all(|w| w[1] <= w[0] + tolerance::REDUCE));
        let final_ratio = RandomPriority.exact(&r.profile).unwrap().expected_welfare
            / social_welfare(&r.profile, &r.reference).unwrap();
        assert!((final_ratio - r.ratios.last().unwrap()).abs() < 1e-12);
    }
}
