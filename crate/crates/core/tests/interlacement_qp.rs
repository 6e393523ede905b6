use bqp::bmc::SamplerCaps;
use bqp::model::reference::{model_a, model_a_single_child};
use bqp::potential::{green_row, KuznetsovSampler};
use bqp::replicas::Workers;
use bqp::verify::interlacement_qp_test;
use bqp::{Measure, StateSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CAPS: SamplerCaps = SamplerCaps {
    max_generations: 10_000,
    max_population: 1_000_000,
};

fn set(n: usize, xs: &[usize]) -> StateSet {
    StateSet::new(n, xs.iter().copied()).unwrap()
}

#[test]
fn zero_intensity_is_vacuous() {
    let a = model_a();
    let b = set(3, &[0]);
    let r = interlacement_qp_test(
        &a,
        &b,
        &b,
        &green_row(&a, 0).unwrap(),
        0.0,
        100,
        1,
        Workers::default(),
        CAPS,
    )
    .unwrap();
    assert!(r.passed);
    assert!(r.notes.contains("u = 0"));
}

#[test]
fn green_row_interlacement_progeny_occupation() {
    let a = model_a();
    let b = set(3, &[0]);
    let nu = green_row(&a, 0).unwrap();
    let r =
        interlacement_qp_test(&a, &b, &b, &nu, 1.0, 100_000, 7, Workers::default(), CAPS).unwrap();
    assert!(r.passed, "{r:?}");
    let wide = interlacement_qp_test(
        &a,
        &b,
        &set(3, &[0, 1]),
        &nu,
        1.0,
        50_000,
        8,
        Workers::default(),
        CAPS,
    )
    .unwrap();
    assert!(wide.passed, "{wide:?}");
}

#[test]
fn single_child_model_passes() {
    let m = model_a_single_child();
    let b = set(3, &[0]);
    let nu = Measure::new(m.green().unwrap().row_sum().iter().copied().collect()).unwrap();
    let r =
        interlacement_qp_test(&m, &b, &b, &nu, 0.5, 50_000, 9, Workers::default(), CAPS).unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn sampling_region_must_contain_b() {
    let a = model_a();
    let nu = green_row(&a, 0).unwrap();
    assert!(interlacement_qp_test(
        &a,
        &set(3, &[0, 1]),
        &set(3, &[0]),
        &nu,
        1.0,
        10,
        1,
        Workers::default(),
        CAPS
    )
    .is_err());
}

#[test]
fn green_row_of_b_state_has_no_backward_part() {
    let a = model_a();
    let b = set(3, &[0]);
    let k = KuznetsovSampler::new(&green_row(&a, 0).unwrap(), &a, &b, &b).unwrap();
    assert!(!k.has_invariant_part());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2_000 {
        let p = k.sample(&mut rng, CAPS);
        assert!(p.backward.is_empty());
        assert_eq!(p.anchor, 0);
        assert!(p.born);
    }
}
