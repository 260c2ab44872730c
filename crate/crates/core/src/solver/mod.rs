//! Normalizing solver for path conditions, plus canonical forms for lasso comparison.

mod canon;
pub mod oracle;
mod pathcond;
mod sat;
mod term;

pub use canon::{canonicalize, CanonInput, CanonicalForm, TerminationCondition};
pub use oracle::{oracle_sat, OracleResult};
pub(crate) use pathcond::bounds_atoms;
pub use pathcond::{AppKey, AppOp, Bounds, LinForm, PathCondition};
pub use term::{Atom, LinTerm, Rel, SymValue};

/// Serialize maps with structured keys as sequences of pairs.
pub(crate) mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K: Serialize, V: Serialize, S: Serializer>(
        map: &BTreeMap<K, V>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        let v: Vec<(K, V)> = Vec::deserialize(d)?;
        Ok(v.into_iter().collect())
    }
}

#[cfg(test)]
mod props {
    use proptest::prelude::*;

    use super::*;

    fn term() -> impl Strategy<Value = LinTerm> {
        (prop::collection::vec((0u32..3, -3i64..=3), 0..3), -3i64..=3).prop_map(|(cs, k)| {
            LinTerm::from_parts(cs.into_iter().map(|(v, c)| (SymValue(v), c)), k).unwrap()
        })
    }

    fn atom() -> impl Strategy<Value = Atom> {
        (
            term(),
            prop_oneof![Just(Rel::Eq), Just(Rel::Ne), Just(Rel::Lt), Just(Rel::Le)],
            term(),
        )
            .prop_map(|(l, r, h)| Atom::new(l, r, h))
    }

    fn build(atoms: &[Atom]) -> Option<PathCondition> {
        let mut pc = PathCondition::new();
        for a in atoms {
            if !pc.assume(a) {
                return None;
            }
        }
        Some(pc)
    }

    proptest! {
        #[test]
        fn never_unsat_when_oracle_finds_model(atoms in prop::collection::vec(atom(), 1..5)) {
            if let OracleResult::Sat(_) = oracle_sat(&atoms, 4) {
                let pc = build(&atoms);
                prop_assert!(pc.as_ref().is_some_and(|p| p.is_sat()));
            }
        }

        #[test]
        fn models_satisfy_the_input(atoms in prop::collection::vec(atom(), 1..5)) {
            if let Some(m) = build(&atoms).and_then(|p| p.model()) {
                for a in &atoms {
                    prop_assert_eq!(a.holds(&|v| m.get(&v).copied().unwrap_or(0)), Some(true), "{}", a);
                }
            }
        }

        #[test]
        fn permutations_agree(mut atoms in prop::collection::vec(atom(), 1..5), seed in 0usize..24) {
            let first = build(&atoms).is_some();
            let n = atoms.len();
            atoms.rotate_left(seed % n);
            atoms.swap(0, seed % n);
            prop_assert_eq!(first, build(&atoms).is_some());
        }

        #[test]
        fn asserting_an_entailed_atom_is_identity(atoms in prop::collection::vec(atom(), 1..4), extra in atom()) {
            if let Some(pc) = build(&atoms) {
                if pc.entails(&extra) {
                    prop_assert_eq!(pc.assert_atom(&extra), Some(pc.clone()));
                }
                for a in &atoms {
                    prop_assert_eq!(pc.assert_atom(a), Some(pc.clone()));
                }
            }
        }

        #[test]
        fn entailment_matches_oracle(atoms in prop::collection::vec(atom(), 1..4), goal in atom()) {
            if let Some(pc) = build(&atoms) {
                if pc.entails(&goal) {
                    let mut cex = atoms.clone();
                    cex.push(goal.negate());
                    prop_assert!(matches!(oracle_sat(&cex, 4), OracleResult::UnsatWithin(_)));
                }
            }
        }

        #[test]
        fn canonical_form_ignores_monotone_renaming(
            atoms in prop::collection::vec(atom(), 1..4),
            roots in prop::collection::vec(term(), 1..3),
            shift in 1u32..50,
            stride in 1u32..4,
        ) {
            let rn = |v: SymValue| SymValue(v.0 * stride + shift);
            let renamed: Vec<Atom> = atoms.iter().map(|a| a.map_terms(|t| t.rename(&rn))).collect();
            let (Some(p1), Some(p2)) = (build(&atoms), build(&renamed)) else {
                return Ok(());
            };
            let roots2: Vec<LinTerm> = roots.iter().map(|t| t.rename(&rn)).collect();
            let tcs1: Vec<TerminationCondition> = atoms.iter().map(|a| TerminationCondition { guard: a.clone(), head: 0, line: 1, polarity: true }).collect();
            let tcs2: Vec<TerminationCondition> = renamed.iter().map(|a| TerminationCondition { guard: a.clone(), head: 0, line: 1, polarity: true }).collect();
            let c1 = canonicalize(&CanonInput { roots: &roots, cells: &[], pc: &p1, tcs: &tcs1 });
            let c2 = canonicalize(&CanonInput { roots: &roots2, cells: &[], pc: &p2, tcs: &tcs2 });
            prop_assert_eq!(&c1, &c2);
            // Feeding the canonical form back in reproduces it.
            let p3 = build(&c1.atoms).expect("canonical atoms are satisfiable");
            let tcs3: Vec<TerminationCondition> = c1.tcs.iter().map(|(a, h, p)| TerminationCondition { guard: a.clone(), head: *h, line: 1, polarity: *p }).collect();
            let c3 = canonicalize(&CanonInput { roots: &c1.roots, cells: &[], pc: &p3, tcs: &tcs3 });
            prop_assert_eq!(c1, c3);
        }
    }
}
