use std::sync::Arc;

use proptest::prelude::*;

use ealab_core::gradedlie::{check_jacobi_grading, GradedLie};
use ealab_core::realizations::{quantum_torus, sl_torus, QuantumMatrix};
use ealab_core::registry::{catalog, find_suite, parse_spec, Context};
use ealab_core::rootsys::{reflect, root_string, RootSystem, RootSystemId};

fn systems() -> Vec<RootSystem> {
    RootSystemId::catalog(3).into_iter().map(RootSystem::new).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflections_are_involutions(k in 0usize..64, i in 0usize..64, j in 0usize..64) {
        let all = systems();
        let s = &all[k % all.len()];
        let nz: Vec<_> = s.nonzero().cloned().collect();
        let a = &nz[i % nz.len()];
        let b = &s.roots[j % s.roots.len()];
        let r = reflect(b, a);
        prop_assert!(s.contains(&r));
        prop_assert_eq!(&reflect(&r, a), b);
    }

    #[test]
    fn strings_are_unbroken(k in 0usize..64, i in 0usize..64, j in 0usize..64) {
        let all = systems();
        let s = &all[k % all.len()];
        let nz: Vec<_> = s.nonzero().cloned().collect();
        let a = &nz[i % nz.len()];
        let b = &s.roots[j % s.roots.len()];
        let (d, u) = root_string(s, b, a).unwrap();
        for t in -(d as i64)..=(u as i64) {
            let v: Vec<i64> = b.iter().zip(a).map(|(x, y)| x + t * y).collect();
            prop_assert!(s.contains(&v));
        }
    }
}

#[test]
fn spec_round_trip_builds_the_same_algebra() {
    let spec = parse_spec(r#"{"L": {"sl-torus": {"size": 3, "torus": {"laurent": {"n": 1}}}}}"#).unwrap();
    let inst = spec.build().unwrap();
    let l: Arc<dyn GradedLie> = Arc::new(sl_torus(3, &quantum_torus(&QuantumMatrix::laurent(1)).unwrap()).unwrap());
    assert_eq!(inst.l.meta().n, l.meta().n);
    assert!(check_jacobi_grading(inst.l.as_ref(), 1).pass());
}

#[test]
fn every_example_passes_cheap_suites() {
    for ex in catalog() {
        let mut ctx = Context::new(ex.build().unwrap(), 1);
        for name in ["form", "cocycle"] {
            let r = find_suite(name).unwrap().run(&mut ctx);
            assert!(r.pass, "{} {name}: {:?}", ex.name(), r.error);
        }
    }
}
