use std::sync::OnceLock;

use kusuoka_core::exact::{int, to_f64, vec3_sum, Rational, Vec3};
use kusuoka_core::harmonic::{energy_ratio, renormalization_constant, HarmonicStructure, RenormMethod};
use kusuoka_core::measures::{energy_cell_vector, energy_orthobasis, kusuoka_cylinder, EnergyCoordinates};
use kusuoka_core::mixing::{g_function_estimate, transfer_operator_matrix};
use kusuoka_core::selfsim::{m_matrices, weights_q, MMatrixFamily};
use kusuoka_core::topology::{build_level_graph, gasket_params, vertex_census};
use kusuoka_core::Word;
use nalgebra::Matrix2;
use proptest::prelude::*;

fn hs(k: u32) -> &'static HarmonicStructure {
    static CACHE: OnceLock<Vec<HarmonicStructure>> = OnceLock::new();
    &CACHE.get_or_init(|| {
        (2..=4)
            .map(|k| HarmonicStructure::new(&gasket_params(k).unwrap()).unwrap())
            .collect()
    })[(k - 2) as usize]
}

fn ec(k: u32) -> &'static EnergyCoordinates {
    static CACHE: OnceLock<Vec<EnergyCoordinates>> = OnceLock::new();
    &CACHE.get_or_init(|| (2..=4).map(|k| energy_orthobasis(hs(k)).unwrap()).collect())[(k - 2) as usize]
}

fn mm(k: u32) -> &'static MMatrixFamily {
    static CACHE: OnceLock<Vec<MMatrixFamily>> = OnceLock::new();
    &CACHE.get_or_init(|| (2..=4).map(|k| m_matrices(hs(k))).collect())[(k - 2) as usize]
}

fn d(k: u32) -> usize {
    (k * (k + 1) / 2) as usize
}

fn small_rational() -> impl Strategy<Value = Rational> {
    (-50i64..=50, 1i64..=20).prop_map(|(n, m)| Rational::new(n.into(), m.into()))
}

fn word_for(k: u32, max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0..d(k), 0..=max_len).prop_map(Word::new)
}

fn k_and_word(max_len: usize) -> impl Strategy<Value = (u32, Word)> {
    (2u32..=4).prop_flat_map(move |k| (Just(k), word_for(k, max_len)))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn word_concat_is_associative(a in word_for(3, 6), b in word_for(3, 6), c in word_for(3, 6)) {
        prop_assert_eq!(a.concat(&b).concat(&c), a.concat(&b.concat(&c)));
        prop_assert_eq!(a.concat(&Word::empty()), a.clone());
        prop_assert_eq!(Word::parse(&a.format(6), 6).unwrap(), a);
    }

    #[test]
    fn restriction_rows_are_stochastic((k, w) in k_and_word(4)) {
        let b = hs(k).restriction(&w).unwrap();
        for i in 0..3 {
            let row: Rational = (0..3).map(|j| b.get(i, j).clone()).sum();
            prop_assert_eq!(row, int(1));
        }
    }

    #[test]
    fn energy_ratio_does_not_depend_on_boundary(k in 2u32..=4, h in prop::array::uniform3(small_rational())) {
        prop_assume!(!(h[0] == h[1] && h[1] == h[2]));
        let p = gasket_params(k).unwrap();
        let r = renormalization_constant(&p, RenormMethod::EnergyRatio).unwrap();
        prop_assert_eq!(energy_ratio(&p, &h).unwrap(), r);
    }

    #[test]
    fn cell_measures_are_additive((k, w) in k_and_word(3)) {
        let h = hs(k);
        let parent = energy_cell_vector(h, &w).unwrap();
        let mut sum = [int(0), int(0), int(0)];
        for s in 0..d(k) {
            let child = energy_cell_vector(h, &w.append(s)).unwrap();
            for j in 0..3 {
                sum[j] += &child.nu[j];
            }
        }
        prop_assert_eq!(sum, parent.nu.clone());
        prop_assert!((kusuoka_cylinder(ec(k), &w).unwrap() - to_f64(&parent.prob)).abs() < 1e-10);
    }

    #[test]
    fn q_weights_sum_to_one(k in 2u32..=4, a in 1i64..=40, b in 0i64..=40, c in 0i64..=40) {
        let total = a + b + c;
        let rn: Vec3 = [Rational::new(a.into(), total.into()), Rational::new(b.into(), total.into()), Rational::new(c.into(), total.into())];
        prop_assert_eq!(vec3_sum(&rn), int(1));
        let q = weights_q(mm(k), &rn).unwrap();
        prop_assert_eq!(q.iter().cloned().sum::<Rational>(), int(1));
    }

    #[test]
    fn g_estimates_form_probability_vectors((k, x) in k_and_word(20)) {
        let e = ec(k);
        let g: Vec<Vec<f64>> = (0..d(k)).map(|s| g_function_estimate(e, s, &x).unwrap()).collect();
        for n in 0..=x.len() {
            let total: f64 = g.iter().map(|gs| gs[n]).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(g.iter().all(|gs| gs[n] >= -1e-15));
        }
    }

    #[test]
    fn transfer_operator_preserves_trace(k in 2u32..=4, a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0) {
        let op = transfer_operator_matrix(ec(k)).unwrap();
        let m = Matrix2::new(a, b, b, c);
        prop_assert!((op.apply(&m).trace() - m.trace()).abs() < 1e-12);
        prop_assert!((op.apply(&Matrix2::identity()) - Matrix2::identity()).norm() < 1e-12);
    }

    #[test]
    fn census_matches_construction(k in 2u32..=6, m in 0usize..=3) {
        let p = gasket_params(k).unwrap();
        let g = build_level_graph(&p, m).unwrap();
        prop_assert_eq!(vertex_census(&p, m), g.vertex_count().into());
        prop_assert!(g.is_connected());
    }
}
