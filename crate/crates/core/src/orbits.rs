//! Decision procedures for intersection, containment and equality of orbits.

use crate::ambient::OrbitType;

/// `R^{H1}_{K1} ∩ R^{H2}_{K2} ≠ ∅` iff `H1 ∩ K2 = H2 ∩ K1`.
pub fn compatible(o1: &OrbitType, o2: &OrbitType) -> bool {
    o1.h().intersection(o2.k()) == o2.h().intersection(o1.k())
}

/// `(H1 ∪ H2, K1 ∪ K2)` when compatible, `None` for an empty intersection.
pub fn intersect(o1: &OrbitType, o2: &OrbitType) -> Option<OrbitType> {
    if !compatible(o1, o2) {
        return None;
    }
    Some(OrbitType::new(o1.h().union(o2.h()), o1.k().union(o2.k())).expect("K1 ∪ K2 ⊆ H1 ∪ H2"))
}

/// `R^{H1}_{K1} ⊆ R^{H2}_{K2}` iff `H1 ⊇ H2`, `K1 ⊇ K2` and `H2 ∩ K1 = K2`.
pub fn is_suborbit(o1: &OrbitType, o2: &OrbitType) -> bool {
    o2.h().is_subset(o1.h()) && o2.k().is_subset(o1.k()) && o2.h().intersection(o1.k()) == *o2.k()
}

pub fn orbits_equal(o1: &OrbitType, o2: &OrbitType) -> bool {
    o1 == o2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{constructive_witness, CopyHandle};
    use crate::finset::{FinSet, Vertex};
    use proptest::prelude::*;

    fn o(h: &[u64], k: &[u64]) -> OrbitType {
        OrbitType::of(h, k)
    }

    #[test]
    fn examples() {
        assert!(compatible(&o(&[0], &[0]), &o(&[1], &[])));
        assert!(!compatible(&o(&[0, 1], &[0]), &o(&[0], &[])));
        assert_eq!(intersect(&o(&[0], &[0]), &o(&[1], &[])), Some(o(&[0, 1], &[0])));
        assert_eq!(intersect(&o(&[3], &[3]), &OrbitType::whole()), Some(o(&[3], &[3])));
        assert_eq!(intersect(&o(&[0, 1], &[0]), &o(&[0], &[])), None);
        assert!(is_suborbit(&o(&[0, 1], &[0]), &o(&[0], &[0])));
        assert!(!is_suborbit(&o(&[0], &[0]), &o(&[0, 1], &[0])));
        assert!(orbits_equal(&o(&[0, 1], &[1]), &o(&[1, 0], &[1])));
        assert!(!orbits_equal(&o(&[0], &[]), &o(&[1], &[])));
    }

    #[test]
    fn incompatible_pair_has_no_common_member() {
        let (a, b) = (o(&[0, 1], &[0]), o(&[0], &[]));
        assert!((0..=10_000).map(Vertex).all(|v| !(a.admits(v) && b.admits(v))));
    }

    fn small_orbit() -> impl Strategy<Value = OrbitType> {
        (0u64..32, 0u64..32).prop_map(|(hm, km)| {
            let h = FinSet::of(&[0, 1, 2, 3, 4]).subset_from_mask(hm);
            let k = h.subset_from_mask(km);
            OrbitType::new(h, k).unwrap()
        })
    }

    proptest! {
        #[test]
        fn suborbit_is_a_preorder(a in small_orbit(), b in small_orbit(), c in small_orbit()) {
            prop_assert!(is_suborbit(&a, &a));
            if is_suborbit(&a, &b) && is_suborbit(&b, &a) {
                prop_assert!(orbits_equal(&a, &b));
            }
            if is_suborbit(&a, &b) && is_suborbit(&b, &c) {
                prop_assert!(is_suborbit(&a, &c));
            }
        }

        #[test]
        fn intersection_witness_is_in_both(a in small_orbit(), b in small_orbit()) {
            match intersect(&a, &b) {
                Some(i) => {
                    let w = constructive_witness(&i, Vertex(0)).unwrap();
                    prop_assert!(a.admits(w) && b.admits(w));
                    prop_assert!(is_suborbit(&i, &a) && is_suborbit(&i, &b));
                }
                None => {
                    let amb = CopyHandle::ambient();
                    prop_assert!((0..=64).map(Vertex).all(|v| !(a.admits(v) && b.admits(v) && amb.contains(v))));
                }
            }
        }
    }
}
