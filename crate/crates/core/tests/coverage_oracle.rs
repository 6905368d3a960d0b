mod oracle;

use dnncov::coverage::diff;
use dnncov::nn::Activation;
use dnncov::profiler::profile;
use dnncov::rng::SplitMix64;
use dnncov::{ActivationTrace, CoverageConfig, CoverageState, Model, NeuronProfile};
use oracle::{brute_force, random_inputs, random_model};
use proptest::prelude::*;

struct Case {
    model: Model,
    profile: NeuronProfile,
    config: CoverageConfig,
    suite: Vec<ActivationTrace>,
}

fn random_case(seed: u64, max_suite: usize) -> Case {
    let mut rng = SplitMix64::new(seed);
    let input = 2 + rng.below(4);
    let depth = 2 + rng.below(2);
    let widths: Vec<usize> = (0..depth).map(|_| 4 + rng.below(13)).collect();
    let acts: Vec<Activation> = (0..depth)
        .map(|i| if i + 1 == depth { Activation::Identity } else { oracle::random_activation(&mut rng) })
        .collect();
    let model = random_model(&mut rng, input, &widths, &acts);
    let train_n = 20 + rng.below(80);
    let train = random_inputs(&mut rng, train_n, input, 0.0, 1.0);
    let profile = profile(&model, &train).unwrap();
    let config = CoverageConfig {
        k_sections: 1 + rng.below(40) as u32,
        top_k: 1 + rng.below(*widths.iter().min().unwrap()) as u32,
        nc_threshold: rng.uniform(0.0, 1.0),
    };
    let n = 1 + rng.below(max_suite);
    let suite_data = random_inputs(&mut rng, n, input, -0.5, 1.5);
    let mut suite: Vec<ActivationTrace> =
        (0..n).map(|i| model.capture(i.to_string(), suite_data.input(i)).unwrap()).collect();
    // Some exact duplicates so pattern dedup is exercised.
    for i in 0..n / 10 {
        suite.push(suite[i].clone());
    }
    Case { model, profile, config, suite }
}

fn fold(case: &Case, traces: &[ActivationTrace]) -> CoverageState {
    let mut s = CoverageState::new(&case.model, &case.profile, case.config).unwrap();
    for t in traces {
        s.update(t).unwrap();
    }
    s
}

#[test]
fn engine_matches_brute_force() {
    for seed in 0..60 {
        let case = random_case(seed, 300);
        let report = fold(&case, &case.suite).report();
        let o = brute_force(&case.profile, &case.config, &case.suite);
        let c = report.counts;
        assert_eq!(
            (
                c.sections_covered,
                c.upper_corner_neurons,
                c.lower_corner_neurons,
                c.topk_neurons,
                c.nc_neurons,
                report.tknp
            ),
            (o.sections_covered, o.upper, o.lower, o.topk, o.nc, o.tknp),
            "seed {seed}"
        );
        let [kmnc, nbc, snac, tknc, nc] = o.ratios(case.config.k_sections);
        assert_eq!(
            [report.kmnc, report.nbc, report.snac, report.tknc, report.nc].map(f64::to_bits),
            [kmnc, nbc, snac, tknc, nc].map(f64::to_bits)
        );
    }
}

#[test]
fn training_suite_has_no_corner_coverage() {
    let mut rng = SplitMix64::new(99);
    for _ in 0..20 {
        let model =
            random_model(&mut rng, 3, &[8, 6, 3], &[Activation::Relu, Activation::Sigmoid, Activation::Identity]);
        let train = random_inputs(&mut rng, 50, 3, 0.0, 1.0);
        let p = profile(&model, &train).unwrap();
        let mut s =
            CoverageState::new(&model, &p, CoverageConfig { k_sections: 10, top_k: 2, nc_threshold: 0.5 }).unwrap();
        for i in 0..train.len() {
            s.update(&model.capture("", train.input(i)).unwrap()).unwrap();
        }
        let r = s.report();
        assert_eq!((r.nbc, r.snac), (0.0, 0.0));
        assert!(r.kmnc > 0.0);
    }
}

#[test]
fn binding_checks() {
    let a = random_case(1, 10);
    let b = random_case(2, 10);
    assert!(CoverageState::new(&a.model, &b.profile, a.config).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn merge_identity_and_commutativity(seed in 0u64..10_000, split in 0.0f64..1.0) {
        let case = random_case(seed, 40);
        let cut = (case.suite.len() as f64 * split) as usize;
        let a = fold(&case, &case.suite[..cut]);
        let b = fold(&case, &case.suite[cut..]);
        let empty = fold(&case, &[]);
        prop_assert_eq!(&CoverageState::merge(&a, &empty).unwrap(), &a);
        prop_assert_eq!(&CoverageState::merge(&empty, &a).unwrap(), &a);
        prop_assert_eq!(CoverageState::merge(&a, &b).unwrap(), CoverageState::merge(&b, &a).unwrap());
        // Union homomorphism.
        prop_assert_eq!(CoverageState::merge(&a, &b).unwrap(), fold(&case, &case.suite));
    }

    #[test]
    fn merge_is_associative(seed in 0u64..10_000) {
        let case = random_case(seed, 30);
        let n = case.suite.len();
        let (x, y) = (n / 3, 2 * n / 3);
        let a = fold(&case, &case.suite[..x]);
        let b = fold(&case, &case.suite[x..y]);
        let c = fold(&case, &case.suite[y..]);
        let left = CoverageState::merge(&CoverageState::merge(&a, &b).unwrap(), &c).unwrap();
        let right = CoverageState::merge(&a, &CoverageState::merge(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn superset_suites_never_lose_coverage(seed in 0u64..10_000, split in 0.0f64..1.0) {
        let case = random_case(seed, 40);
        let cut = (case.suite.len() as f64 * split) as usize;
        let base = fold(&case, &case.suite[..cut]).report();
        let full = fold(&case, &case.suite).report();
        let d = diff(&base, &full).unwrap();
        for (name, v) in d.criteria() {
            prop_assert!(v >= 0.0, "{} decreased by {}", name, v);
        }
        prop_assert_eq!(diff(&full, &full).unwrap().criteria().map(|c| c.1), [0.0; 6]);
    }
}
