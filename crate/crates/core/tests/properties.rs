use ndarray::{Array2, ArrayD, IxDyn};
use proptest::prelude::*;
use topopeps_core::group::{FiniteGroup, Representation};
use topopeps_core::la;
use topopeps_core::mps::{self, MpsTensor};
use topopeps_core::peps::{double_model_tensor, random_twirled_tensor, Leg};
use topopeps_core::tensor::{
    containment_residual, contract, span_basis, subspace_intersection, Index, LabeledTensor, SubspaceBasis,
};

const GROUPS: [&str; 5] = ["Z2", "Z3", "Z4", "S3", "D4"];

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

fn matrix_tensor(m: &Array2<topopeps_core::C64>, row: &str, col: &str) -> LabeledTensor {
    LabeledTensor::new(
        vec![Index::ket(row, m.nrows()), Index::bra(col, m.ncols())],
        ArrayD::from_shape_vec(IxDyn(&[m.nrows(), m.ncols()]), m.iter().cloned().collect()).unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn contraction_is_associative(seed in any::<u64>(), n in 1usize..5, m in 1usize..5, k in 1usize..5, p in 1usize..5) {
        let mut r = la::rng(seed);
        let a = la::gaussian_matrix(&mut r, n, m);
        let b = la::gaussian_matrix(&mut r, m, k);
        let c = la::gaussian_matrix(&mut r, k, p);
        let ta = matrix_tensor(&a, "i", "j");
        let tb = matrix_tensor(&b, "j2", "k");
        let tc = matrix_tensor(&c, "k2", "l");
        let left = contract(&contract(&ta, &tb, &[("j", "j2")]).unwrap(), &tc, &[("k", "k2")]).unwrap();
        let right = contract(&ta, &contract(&tb, &tc, &[("k", "k2")]).unwrap(), &[("j", "j2")]).unwrap();
        let lm = left.matricize(&["i"], &["l"]).unwrap();
        let rm = right.matricize(&["i"], &["l"]).unwrap();
        let direct = a.dot(&b).dot(&c);
        let scale = la::fro(&direct).max(1.0);
        prop_assert!(la::max_abs_diff(&lm, &rm) <= 1e-12 * scale);
        prop_assert!(la::max_abs_diff(&lm, &direct) <= 1e-12 * scale);
    }

    #[test]
    fn intersection_holds_a_shared_subspace(seed in any::<u64>(), n in 4usize..12, shared in 1usize..3, extra_a in 0usize..3, extra_b in 0usize..3) {
        prop_assume!(shared + extra_a + extra_b <= n);
        let mut r = la::rng(seed);
        let s = la::gaussian_matrix(&mut r, n, shared);
        let ea = la::gaussian_matrix(&mut r, n, extra_a);
        let eb = la::gaussian_matrix(&mut r, n, extra_b);
        let a = span_basis(&ndarray::concatenate![ndarray::Axis(1), s, ea], 1e-10).unwrap();
        let b = span_basis(&ndarray::concatenate![ndarray::Axis(1), s, eb], 1e-10).unwrap();
        let i = subspace_intersection(&a, &b, 1e-8).unwrap();
        prop_assert_eq!(i.dim(), shared);
        prop_assert!(containment_residual(&i, &a).unwrap() <= 1e-9);
        prop_assert!(containment_residual(&i, &b).unwrap() <= 1e-9);
        let s_basis = span_basis(&s, 1e-10).unwrap();
        prop_assert!(containment_residual(&s_basis, &i).unwrap() <= 1e-9);
        prop_assert!(i.gram_defect() <= 1e-12);
    }

    #[test]
    fn span_contains_its_generators(seed in any::<u64>(), n in 2usize..10, k in 1usize..6) {
        let mut r = la::rng(seed);
        let v = la::gaussian_matrix(&mut r, n, k);
        let b: SubspaceBasis = span_basis(&v, 1e-10).unwrap();
        prop_assert_eq!(b.dim(), k.min(n));
        prop_assert!(b.residual_of(&v) <= 1e-12);
    }

    #[test]
    fn delta_identities(gi in 0usize..GROUPS.len(), semiregular in any::<bool>()) {
        let g = FiniteGroup::builtin(GROUPS[gi]).unwrap();
        let table = g.character_table().unwrap();
        let rep = if semiregular {
            Representation::minimal_semiregular(&g).unwrap()
        } else {
            Representation::regular(&g)
        };
        prop_assert!(rep.is_semiregular(&table));
        prop_assert!(rep.delta_reconstruction_defect(&table).unwrap() <= 1e-12);
        prop_assert!(rep.delta_orthogonality_defect(&table).unwrap() <= 1e-12);
    }

    #[test]
    fn pair_class_counts_agree(n in 1usize..13, gi in 0usize..GROUPS.len()) {
        let cyclic = FiniteGroup::builtin(&format!("Z{n}")).unwrap();
        prop_assert_eq!(cyclic.commuting_pair_classes().count(), n * n);
        prop_assert_eq!(cyclic.pair_class_count_by_centralizers(), n * n);
        let g = FiniteGroup::builtin(GROUPS[gi]).unwrap();
        prop_assert_eq!(g.commuting_pair_classes().count(), g.pair_class_count_by_centralizers());
    }

    #[test]
    fn virtual_moves_are_local_identities(gi in 0usize..3, x in 0usize..6, mask in 0u8..16) {
        let g = FiniteGroup::builtin(["Z2", "Z3", "S3"][gi]).unwrap();
        let rep = Representation::regular(&g);
        let k = double_model_tensor(&g).unwrap();
        let x = x % g.order();
        let subset: Vec<Leg> = Leg::ALL
            .iter()
            .enumerate()
            .filter(|(b, _)| mask & (1 << b) != 0)
            .map(|(_, l)| *l)
            .collect();
        prop_assert!(k.local_move_defect(&rep, x, &subset) <= 1e-12);
    }

    #[test]
    fn twirled_tensors_are_invariant(seed in any::<u64>(), gi in 0usize..2) {
        let g = FiniteGroup::builtin(["Z2", "Z3"][gi]).unwrap();
        let rep = Representation::regular(&g);
        let mut r = la::rng(seed);
        let a = random_twirled_tensor(&rep, 3, &mut r);
        prop_assert!(a.invariance_defect(&rep) <= 1e-12);
        let m = MpsTensor::random_twirled(&rep, 2, &mut r);
        prop_assert!(m.invariance_defect(&rep) <= 1e-12);
    }

    #[test]
    fn concatenation_keeps_g_injectivity(seed in any::<u64>(), gi in 0usize..2) {
        let g = FiniteGroup::builtin(["Z2", "Z3"][gi]).unwrap();
        let rep = Representation::regular(&g);
        let d = mps::commutant_dim(&rep) + 1;
        let mut r = la::rng(seed);
        let a = MpsTensor::random_twirled(&rep, d, &mut r);
        let b = MpsTensor::random_twirled(&rep, d, &mut r);
        prop_assert!(a.is_g_injective(&rep).unwrap());
        let ab = mps::chain(&[&a, &b], mps::DEFAULT_STATE_CAP).unwrap();
        prop_assert!(ab.is_g_injective(&rep).unwrap());
        let ir = mps::intersection_property_1d(&a, &b, &a).unwrap();
        prop_assert_eq!(ir.intersection_dim, ir.merged_dim);
        prop_assert!(ir.residual <= 1e-9);
    }
}
