//! Property suite: text-form round-trips, structural invariants of the
//! reduced operators, reflection involutions and the equivalence of the two
//! backends on random instances.

use proptest::prelude::*;

use qpartial_core::reduced::{
    apply_sequence, initial_reduced_state, reduced_global, reduced_local,
};
use qpartial_core::statevector::{crosscheck, run_sequence, StateVector};
use qpartial_core::{OperatorSequence, SearchParams, Step};

/// A random instance: scopes, steps and a target that fit together.
fn instance() -> impl Strategy<Value = (u32, u32, Vec<Step>, u64)> {
    (2u32..=10)
        .prop_flat_map(|n| (Just(n), 1u32..n))
        .prop_flat_map(|(n, m)| {
            (
                Just(n),
                Just(m),
                proptest::collection::vec(any::<bool>(), 0..=20),
                0u64..1u64 << n,
            )
        })
        .prop_map(|(n, m, bits, target)| {
            let steps = bits
                .into_iter()
                .map(|b| if b { Step::Local } else { Step::Global })
                .collect();
            (n, m, steps, target)
        })
}

proptest! {
    #[test]
    fn tuple_form_round_trips((n, m, steps, _) in instance()) {
        let seq = OperatorSequence::new(n, m, steps).unwrap();
        let reparsed = OperatorSequence::parse_tuple(&seq.tuple_form()).unwrap();
        prop_assert_eq!(&reparsed, &seq);
        prop_assert_eq!(reparsed.tuple_form(), seq.tuple_form());
    }

    #[test]
    fn step_string_round_trips((n, m, steps, _) in instance()) {
        let seq = OperatorSequence::new(n, m, steps).unwrap();
        let reparsed = OperatorSequence::parse_steps(&seq.step_string(), n, m).unwrap();
        prop_assert_eq!(reparsed, seq);
    }

    #[test]
    fn backends_agree((n, m, steps, target) in instance()) {
        let seq = OperatorSequence::new(n, m, steps).unwrap();
        let params = SearchParams::new(n, m, target).unwrap();
        let deviation = crosscheck(&params, &seq).unwrap();
        prop_assert!(deviation <= 1e-10, "deviation {deviation}");
    }

    #[test]
    fn reduced_model_preserves_norm((n, m, steps, _) in instance()) {
        let seq = OperatorSequence::new(n, m, steps).unwrap();
        let out = apply_sequence(&seq, initial_reduced_state(n, m).unwrap()).unwrap();
        prop_assert!((out.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn reduced_operators_are_orthogonal_with_fixed_determinants(
        (n, m, _, _) in instance()
    ) {
        let global = reduced_global(n, m).unwrap();
        let local = reduced_local(m).unwrap();
        prop_assert!(global.orthogonality_defect() <= 1e-12);
        prop_assert!(local.orthogonality_defect() <= 1e-12);
        prop_assert!((global.determinant() + 1.0).abs() <= 1e-12);
        prop_assert!((local.determinant() - 1.0).abs() <= 1e-12);
        // The local step fixes the |u> axis exactly.
        let axis = local.apply(qpartial_core::reduced::ReducedState::new(0.0, 0.0, 1.0));
        prop_assert_eq!((axis.a_t, axis.a_ntt, axis.a_u), (0.0, 0.0, 1.0));
    }

    #[test]
    fn reflections_are_involutions((n, m, steps, target) in instance()) {
        let seq = OperatorSequence::new(n, m, steps).unwrap();
        let params = SearchParams::new(n, m, target).unwrap();
        let state = run_sequence(&params, &seq).unwrap();

        let mut twice = state.clone();
        twice.apply_oracle(target).unwrap();
        twice.apply_oracle(target).unwrap();
        for (a, b) in twice.amplitudes().iter().zip(state.amplitudes()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        twice.apply_diffusion(m).unwrap();
        twice.apply_diffusion(m).unwrap();
        for (a, b) in twice.amplitudes().iter().zip(state.amplitudes()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn local_diffusion_keeps_block_mass((n, m, steps, target) in instance()) {
        prop_assume!(m < n);
        let seq = OperatorSequence::new(n, m, steps).unwrap();
        let params = SearchParams::new(n, m, target).unwrap();
        let mut state = run_sequence(&params, &seq).unwrap();
        let before = state.measure_prefix(n - m).unwrap();
        state.apply_diffusion(m).unwrap();
        let after = state.measure_prefix(n - m).unwrap();
        for (b, a) in before.probabilities().iter().zip(after.probabilities()) {
            prop_assert!((b - a).abs() <= 1e-12);
        }
    }

    #[test]
    fn state_vector_stays_normalized((n, m, steps, target) in instance()) {
        let seq = OperatorSequence::new(n, m, steps).unwrap();
        let params = SearchParams::new(n, m, target).unwrap();
        let state = run_sequence(&params, &seq).unwrap();
        prop_assert!((state.norm_sqr() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn dump_round_trips((n, m, steps, target) in instance()) {
        let seq = OperatorSequence::new(n, m, steps).unwrap();
        let params = SearchParams::new(n, m, target).unwrap();
        let state = run_sequence(&params, &seq).unwrap();
        let mut buffer = Vec::new();
        state.write_to(&mut buffer).unwrap();
        let loaded = StateVector::read_from(&mut buffer.as_slice()).unwrap();
        prop_assert_eq!(loaded, state);
    }
}
