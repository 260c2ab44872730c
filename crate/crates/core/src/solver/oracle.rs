//! Brute-force satisfiability by enumeration, used as a testing oracle.

use std::collections::BTreeMap;

use super::term::{Atom, SymValue};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleResult {
    Sat(BTreeMap<SymValue, i64>),
    UnsatWithin(i64),
}

/// Enumerate `[-bound, bound]^n` over the variables of `atoms` (at most 6).
pub fn oracle_sat(atoms: &[Atom], bound: i64) -> OracleResult {
    let mut vars: Vec<SymValue> = atoms.iter().flat_map(|a| a.vars()).collect();
    vars.sort();
    vars.dedup();
    assert!(vars.len() <= 6, "oracle limited to 6 variables");
    let width = (2 * bound + 1) as u64;
    let total = width.pow(vars.len() as u32);
    for idx in 0..total {
        let mut rest = idx;
        let mut m = BTreeMap::new();
        for v in &vars {
            m.insert(*v, (rest % width) as i64 - bound);
            rest /= width;
        }
        let get = |x: SymValue| m.get(&x).copied().unwrap_or(0);
        if atoms.iter().all(|a| a.holds(&get) == Some(true)) {
            return OracleResult::Sat(m);
        }
    }
    OracleResult::UnsatWithin(bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::LinTerm;

    fn x(n: u32) -> LinTerm {
        LinTerm::var(SymValue(n))
    }

    #[test]
    fn finds_models_by_enumeration() {
        let sum = x(0).checked_add(&x(1)).unwrap();
        let atoms = [Atom::eq(sum, 3), Atom::lt(x(0), x(1))];
        match oracle_sat(&atoms, 4) {
            OracleResult::Sat(m) => {
                let (a, b) = (m[&SymValue(0)], m[&SymValue(1)]);
                assert_eq!(a + b, 3);
                assert!(a < b);
            }
            r => panic!("expected a model, got {r:?}"),
        }
    }

    #[test]
    fn reports_unsat_within_bound() {
        assert_eq!(
            oracle_sat(&[Atom::lt(x(0), x(0))], 3),
            OracleResult::UnsatWithin(3)
        );
        assert_eq!(
            oracle_sat(&[Atom::gt(x(0), 100)], 4),
            OracleResult::UnsatWithin(4)
        );
    }
}
