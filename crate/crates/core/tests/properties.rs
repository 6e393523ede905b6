use bqp::bmc::{sample_biased_bmc, sample_bmc_from, sample_spine, SamplerCaps};
use bqp::io::{format_measure, parse_measure};
use bqp::model::reference::{model_a, model_c};
use bqp::verify::encoding::to_forest;
use bqp::verify::{decode, encode_forest};
use bqp::{Colour, Measure, StateSet};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CAPS: SamplerCaps = SamplerCaps {
    max_generations: 2_000,
    max_population: 50_000,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_forests_are_valid(seed in any::<u64>(), x in 0usize..3, kind in 0u8..3) {
        let a = model_a();
        let set = StateSet::new(3, [0]).unwrap();
        let ht = a.h_transform(&set).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = match kind {
            0 => sample_bmc_from(&a, x, &mut rng, CAPS),
            1 => sample_biased_bmc(&a, &ht, x, &mut rng, CAPS),
            _ => sample_bmc_from(&model_c(), 0, &mut rng, CAPS),
        };
        prop_assert!(f.validate_tree().is_valid());
        if kind == 1 {
            let blues: Vec<_> = f.individuals().iter().filter(|i| i.colour == Colour::Blue).collect();
            prop_assert!(!blues.is_empty());
            prop_assert_eq!(blues.last().unwrap().location, 0);
            prop_assert_eq!(blues.iter().filter(|i| set.contains(i.location)).count(), 1);
        }
    }

    #[test]
    fn spine_ends_in_b_and_stays_off_it_before(seed in any::<u64>(), x in 0usize..3) {
        let a = model_a();
        let set = StateSet::new(3, [0]).unwrap();
        let ht = a.h_transform(&set).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = sample_spine(&ht, x, &mut rng, CAPS);
        let st = &s.states;
        prop_assert_eq!(st[0], x);
        prop_assert_eq!(*st.last().unwrap(), 0);
        prop_assert!(st[..st.len() - 1].iter().all(|&y| y != 0));
    }

    #[test]
    fn encoding_round_trip(seed in any::<u64>(), x in 0usize..3) {
        let a = model_a();
        let ht = a.h_transform(&StateSet::new(3, [0]).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = sample_biased_bmc(&a, &ht, x, &mut rng, CAPS);
        let key = encode_forest(&f);
        let back = to_forest(&decode(&key).unwrap());
        prop_assert_eq!(back.len(), f.len());
        prop_assert_eq!(encode_forest(&back), key);
    }

    #[test]
    fn measure_text_round_trip(values in prop::collection::vec(0.0f64..1e6, 3)) {
        let a = model_a();
        let m = Measure::new(values).unwrap();
        let back = parse_measure(&format_measure(&m, &a), &a).unwrap();
        for (p, q) in m.values().iter().zip(back.values()) {
            prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }
}
