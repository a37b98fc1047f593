use proptest::prelude::*;

use hookplace::classifier::{cross_validate, training_set, SvmParams};
use hookplace::corpus::{parse_corpus, print_corpus};
use hookplace::pipeline::{run_stages, Inputs, Options};
use hookplace::policy::{check_policy, PolicyDecision};
use hookplace::simulate::{simulate, SimEnv};
use hookplace::uppt::{Context, Uppt};
use hookplace::verify::fuzz_scenarios;
use hookplace::{defaults, synth};

fn sample(i: usize) -> Uppt {
    defaults::sample_uppts().swap_remove(i).1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthetic_corpus_survives_print_and_parse(seed in any::<u64>(), n in 20usize..120) {
        let s = synth::generate_synthetic_corpus(seed, n, 0.0);
        let docs: Vec<(String, String)> = print_corpus(&s.corpus).into_iter().map(|d| (d.name, d.text)).collect();
        let back = parse_corpus(&docs).unwrap();
        prop_assert!(back.same_structure(&s.corpus));
    }

    #[test]
    fn matching_row_bounds_the_decision(u_i in 0usize..6, row in 0usize..16) {
        let u = sample(u_i);
        let r = &u.rows()[row % u.rows().len()];
        let ctx = r.context.witness();
        let d = check_policy(&u, r.resource, &ctx);
        prop_assert!(d >= PolicyDecision::from(r.control));
    }

    #[test]
    fn decision_is_the_max_over_matching_rows(u_i in 0usize..6, row in 0usize..16, other in 0usize..16) {
        let u = sample(u_i);
        let ctx: Context = u.rows()[row % u.rows().len()].context.witness();
        let r = u.rows()[other % u.rows().len()].resource;
        let want = u
            .rows()
            .iter()
            .filter(|x| x.resource == r && x.context.matches(&ctx))
            .map(|x| PolicyDecision::from(x.control))
            .max()
            .unwrap_or(PolicyDecision::Allow);
        prop_assert_eq!(check_policy(&u, r, &ctx), want);
    }

    #[test]
    fn simulation_is_deterministic(u_i in 0usize..6, seed in any::<u64>()) {
        let inp = Inputs::sample(sample(u_i));
        let opt = Options { seed: 1, fuzz: 0, adversarial: false, ..Options::default() };
        let a = run_stages(&inp, &opt).unwrap();
        let env = SimEnv { aomap: &a.aomap, oal: &inp.oal, seed };
        for s in fuzz_scenarios(&a.instrumented, &inp.uppt, 5, seed) {
            let t1 = simulate(&a.instrumented, &inp.uppt, &s, &env).unwrap();
            let t2 = simulate(&a.instrumented, &inp.uppt, &s, &env).unwrap();
            prop_assert_eq!(t1, t2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn cross_validation_is_deterministic(seed in any::<u64>()) {
        let s = synth::generate_synthetic_corpus(seed, 60, 0.05);
        let data = training_set(&s.corpus, &s.labels, &defaults::lexicon()).unwrap();
        let params = SvmParams { seed, ..SvmParams::defaults_for(data[0].0.len()) };
        let a = cross_validate(&data, 5, &params, seed).unwrap();
        let b = cross_validate(&data, 5, &params, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
