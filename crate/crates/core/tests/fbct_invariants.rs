//! Structural FBCT properties on random functions, engine agreement, the APN
//! cross-check, EA invariance of the canonical reduction and determinism.

mod common;

use std::sync::Arc;

use common::{fbct_violations, field, fields_up_to, random_function, random_permutation};
use fbct_core::experiments::{verify_theorem, ExperimentOptions, Theorem};
use fbct_core::export::write_fbct_csv;
use fbct_core::fbct::{
    differential_uniformity, fbct_table, is_apn_via_fbct, spectrum, FbctOptions, PerturbedFbct,
    Scope,
};
use fbct_core::functions::canonical_form;
use fbct_core::pool::run_with_workers;
use fbct_core::{inverse_function, reduce_to_canonical, swapped_inverse, Field, Transposition};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn any_field(max: u32) -> impl Strategy<Value = Arc<Field>> {
    prop::sample::select(fields_up_to(max)).prop_map(|s| field(&s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_functions_satisfy_invariants(k in any_field(512), seed in any::<u64>(), perm in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = if perm { random_permutation(&k, &mut rng) } else { random_function(&k, &mut rng) };
        let m = fbct_table(&f, &FbctOptions::collision()).unwrap();
        let bad = fbct_violations(&m);
        prop_assert!(bad.is_empty(), "{}: {:?}", k, &bad[..bad.len().min(5)]);
    }

    #[test]
    fn engines_agree(k in any_field(64), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_function(&k, &mut rng);
        let reference = fbct_table(&f, &FbctOptions::unreduced()).unwrap();
        prop_assert_eq!(&fbct_table(&f, &FbctOptions::default()).unwrap(), &reference);
        prop_assert_eq!(&fbct_table(&f, &FbctOptions::collision()).unwrap(), &reference);
        let a = rng.gen_range(0..k.order());
        let b = rng.gen_range(0..k.order());
        prop_assert_eq!(fbct_core::nabla(&f, a, b), reference.get(a, b));
    }

    #[test]
    fn perturbation_engine_tracks_swaps(k in any_field(256), seed in any::<u64>()) {
        prop_assume!(k.order() >= 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_permutation(&k, &mut rng);
        let engine = PerturbedFbct::new(&base).unwrap();
        let alpha = rng.gen_range(0..k.order());
        let beta = (alpha + rng.gen_range(1..k.order())) % k.order();
        let f = base.apply_output_swap(Transposition::new(alpha, beta).unwrap()).unwrap();
        let m = fbct_table(&f, &FbctOptions::collision()).unwrap();
        let expected = fbct_core::second_order_uniformity(&m).map_or(0, |u| u.value);
        prop_assert_eq!(engine.uniformity(&f).unwrap(), expected);
        let a = rng.gen_range(0..k.order());
        prop_assert_eq!(engine.row(&f, a).unwrap(), m.row(a).to_vec());
    }

    #[test]
    fn apn_iff_all_zero_fbct(n in 2u32..=7, seed in any::<u64>()) {
        let k = field(&format!("2^{n}"));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_permutation(&k, &mut rng);
        let m = fbct_table(&f, &FbctOptions::collision()).unwrap();
        let du = differential_uniformity(&f, &FbctOptions::default()).unwrap();
        prop_assert_eq!(is_apn_via_fbct(&m), du == 2);
    }
}

#[test]
fn inverse_apn_exactly_for_odd_n() {
    for n in 3..=8 {
        let k = field(&format!("2^{n}"));
        let f = inverse_function(&k);
        let m = fbct_table(&f, &FbctOptions::collision()).unwrap();
        assert_eq!(is_apn_via_fbct(&m), n % 2 == 1, "2^{n}");
        assert_eq!(
            differential_uniformity(&f, &FbctOptions::default()).unwrap(),
            if n % 2 == 1 { 2 } else { 4 }
        );
    }
}

fn spectrum_of(k: &Arc<Field>, t: Transposition) -> fbct_core::Spectrum {
    let f = swapped_inverse(k, t).unwrap();
    spectrum(&fbct_table(&f, &FbctOptions::collision()).unwrap(), Scope::All)
}

#[test]
fn canonical_reduction_preserves_spectrum_exhaustively() {
    for s in ["2^3", "2^4", "2^5", "3", "5", "7", "11", "3^2", "5^2", "29", "3^3"] {
        let k = field(s);
        let canon: Vec<_> = k.elements().map(|g| (g != 1).then(|| spectrum_of(&k, Transposition::new(1, g).unwrap()))).collect();
        for alpha in k.nonzero() {
            for beta in k.elements().filter(|&b| b != alpha) {
                let t = Transposition::new(alpha, beta).unwrap();
                let (c, _) = reduce_to_canonical(&k, t).unwrap();
                let expected = canon[c.beta() as usize].as_ref().unwrap();
                assert_eq!(&spectrum_of(&k, t), expected, "{s} ({alpha},{beta})");
            }
        }
        let (c, _) = canonical_form(&k, Transposition::new(0, 2 % k.order()).unwrap()).unwrap();
        assert_eq!(c.beta(), 0);
    }
}

#[test]
fn canonical_reduction_preserves_spectrum_sampled() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for s in ["2^6", "2^7", "2^8", "3^4", "3^5", "5^3", "7^2", "251"] {
        let k = field(s);
        for _ in 0..12 {
            let alpha = rng.gen_range(1..k.order());
            let beta = (alpha + rng.gen_range(1..k.order())) % k.order();
            let t = Transposition::new(alpha, beta).unwrap();
            let (c, _) = reduce_to_canonical(&k, t).unwrap();
            assert_eq!(spectrum_of(&k, t), spectrum_of(&k, c), "{s} ({alpha},{beta})");
        }
    }
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let k = field("2^7");
    let f = swapped_inverse(&k, Transposition::new(1, 5).unwrap()).unwrap();
    let render = |workers: usize| {
        run_with_workers(Some(workers), || {
            let mut out = Vec::new();
            for opts in [FbctOptions::default(), FbctOptions::collision()] {
                write_fbct_csv(&fbct_table(&f, &opts).unwrap(), &mut out, false).unwrap();
            }
            out
        })
        .unwrap()
    };
    let one = render(1);
    for w in [4, 8] {
        assert!(render(w) == one, "workers = {w}");
    }
    let report = |workers: usize| {
        let opts = ExperimentOptions { workers: Some(workers), ..Default::default() };
        verify_theorem(Theorem::Inv1gEven, &field("2^5"), None, &opts).unwrap().canonical_json()
    };
    let one = report(1);
    for w in [4, 8] {
        assert_eq!(report(w), one, "workers = {w}");
    }
}
