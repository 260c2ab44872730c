use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::pathcond::{bounds_atoms, AppKey, LinForm, PathCondition};
use super::term::{Atom, LinTerm, SymValue};

/// A loop guard as it was evaluated, before any normalization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TerminationCondition {
    pub guard: Atom,
    pub head: usize,
    pub line: u32,
    /// Branch that stays in the loop.
    pub polarity: bool,
}

/// What a loop-head snapshot is made of.
pub struct CanonInput<'a> {
    /// Values of the control-relevant variables, in a fixed order.
    pub roots: &'a [LinTerm],
    /// Heap cells reachable from the roots, as (address, content).
    pub cells: &'a [(SymValue, LinTerm)],
    pub pc: &'a PathCondition,
    pub tcs: &'a [TerminationCondition],
}

/// Alpha-renamed projection of a state; equality means the projections coincide.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalForm {
    pub roots: Vec<LinTerm>,
    pub cells: Vec<(SymValue, LinTerm)>,
    pub atoms: Vec<Atom>,
    pub apps: Vec<(AppKey, LinTerm)>,
    pub tcs: Vec<(Atom, usize, bool)>,
}

struct Namer {
    names: BTreeMap<SymValue, SymValue>,
}

impl Namer {
    fn visit_term(&mut self, t: &LinTerm) {
        let mut fresh: Vec<(i64, SymValue)> = t
            .coeffs()
            .iter()
            .filter(|(v, _)| !self.names.contains_key(v))
            .map(|(v, c)| (*c, *v))
            .collect();
        fresh.sort();
        for (_, v) in fresh {
            self.name(v);
        }
    }

    fn name(&mut self, v: SymValue) -> SymValue {
        let n = SymValue(self.names.len() as u32);
        *self.names.entry(v).or_insert(n)
    }

    fn get(&self, v: SymValue) -> SymValue {
        self.names.get(&v).copied().unwrap_or(SymValue(u32::MAX))
    }

    fn term(&self, t: &LinTerm) -> LinTerm {
        t.rename(&|v| self.get(v))
    }

    fn atom(&self, a: &Atom) -> Atom {
        a.map_terms(|t| self.term(t))
    }
}

fn app_vars(k: &AppKey, r: &LinTerm) -> BTreeSet<SymValue> {
    let mut s = BTreeSet::new();
    for a in &k.args {
        a.collect_vars(&mut s);
    }
    r.collect_vars(&mut s);
    s
}

/// Project onto the part of the state connected to the roots, cells and
/// guards, then rename values to `v0, v1, ...` in first-occurrence order.
pub fn canonicalize(input: &CanonInput<'_>) -> CanonicalForm {
    let pc = input.pc;
    let roots: Vec<LinTerm> = input.roots.iter().map(|t| pc.resolve(t)).collect();
    let cells: Vec<(LinTerm, LinTerm)> = input
        .cells
        .iter()
        .map(|(a, c)| (pc.resolve_var(*a), pc.resolve(c)))
        .collect();
    let tcs: Vec<(&TerminationCondition, Atom)> = input
        .tcs
        .iter()
        .map(|tc| (tc, pc.resolve_atom(&tc.guard)))
        .collect();

    let mut support = BTreeSet::new();
    for t in &roots {
        t.collect_vars(&mut support);
    }
    for (a, c) in &cells {
        a.collect_vars(&mut support);
        c.collect_vars(&mut support);
    }

    let forms: Vec<(&LinForm, _)> = pc.forms().iter().collect();
    let apps: Vec<(AppKey, LinTerm)> = pc.apps().collect();
    let closure = |support: &mut BTreeSet<SymValue>| {
        let mut used_forms = vec![false; forms.len()];
        let mut used_apps = vec![false; apps.len()];
        loop {
            let mut changed = false;
            for (i, (f, _)) in forms.iter().enumerate() {
                if !used_forms[i] && f.coeffs().iter().any(|(v, _)| support.contains(v)) {
                    used_forms[i] = true;
                    support.extend(f.coeffs().iter().map(|(v, _)| *v));
                    changed = true;
                }
            }
            for (i, (k, r)) in apps.iter().enumerate() {
                let vs = app_vars(k, r);
                if !used_apps[i] && vs.iter().any(|v| support.contains(v)) {
                    used_apps[i] = true;
                    support.extend(vs);
                    changed = true;
                }
            }
            if !changed {
                return (used_forms, used_apps);
            }
        }
    };
    // Every guard stays, including those on values the loop no longer holds:
    // they record what the path needed and keep the lasso honest.
    let live_tcs: Vec<&(&TerminationCondition, Atom)> = tcs.iter().collect();
    for (_, a) in &live_tcs {
        support.extend(a.vars());
    }
    let (used_forms, used_apps) = closure(&mut support);

    let mut namer = Namer {
        names: BTreeMap::new(),
    };
    for t in &roots {
        namer.visit_term(t);
    }
    for (a, c) in &cells {
        namer.visit_term(a);
        namer.visit_term(c);
    }
    let mut tc_order: Vec<&&(&TerminationCondition, Atom)> = live_tcs.iter().collect();
    tc_order.sort_by_key(|(tc, a)| (tc.head, tc.polarity, namer.atom(a)));
    for (_, a) in &tc_order {
        namer.visit_term(&a.lhs);
        namer.visit_term(&a.rhs);
    }

    let kept_forms: Vec<_> = forms
        .iter()
        .zip(&used_forms)
        .filter(|(_, u)| **u)
        .map(|(f, _)| *f)
        .collect();
    let kept_apps: Vec<_> = apps
        .iter()
        .zip(&used_apps)
        .filter(|(_, u)| **u)
        .map(|(a, _)| a)
        .collect();
    // Name the remaining support variables, smallest partially-renamed constraint first.
    loop {
        let mut best: Option<(LinTerm, &LinForm)> = None;
        for (f, _) in &kept_forms {
            if f.coeffs().iter().all(|(v, _)| namer.names.contains_key(v)) {
                continue;
            }
            let key = namer.term(&f.to_term());
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, f));
            }
        }
        match best {
            Some((_, f)) => namer.visit_term(&f.to_term()),
            None => break,
        }
    }
    for (k, r) in &kept_apps {
        for a in &k.args {
            namer.visit_term(a);
        }
        namer.visit_term(r);
    }

    let mut atoms = Vec::new();
    for (f, b) in &kept_forms {
        let (nf, flipped) = f.rename(&|v| namer.get(v));
        let nb = if flipped { b.negated() } else { (*b).clone() };
        atoms.extend(bounds_atoms(&nf, &nb));
    }
    atoms.sort();
    let atoms = drop_entailed(atoms);
    let mut out_apps: Vec<(AppKey, LinTerm)> = kept_apps
        .iter()
        .map(|(k, r)| {
            (
                AppKey {
                    op: k.op.clone(),
                    args: k.args.iter().map(|a| namer.term(a)).collect(),
                },
                namer.term(r),
            )
        })
        .collect();
    out_apps.sort();
    let mut out_cells: Vec<(SymValue, LinTerm)> = cells
        .iter()
        .filter_map(|(a, c)| Some((namer.term(a).as_var()?, namer.term(c))))
        .collect();
    out_cells.sort();
    out_cells.dedup();
    let mut out_tcs: Vec<(Atom, usize, bool)> = live_tcs
        .iter()
        .map(|(tc, a)| (namer.atom(a), tc.head, tc.polarity))
        .collect();
    out_tcs.sort();
    out_tcs.dedup();
    CanonicalForm {
        roots: roots.iter().map(|t| namer.term(t)).collect(),
        cells: out_cells,
        atoms,
        apps: out_apps,
        tcs: out_tcs,
    }
}

/// Remove atoms implied by the others, scanning in order. How much redundancy a
/// path condition keeps depends on the order it saw its constraints.
fn drop_entailed(mut atoms: Vec<Atom>) -> Vec<Atom> {
    let mut i = 0;
    while i < atoms.len() && atoms.len() > 1 {
        let mut rest = PathCondition::new();
        let sat = atoms
            .iter()
            .enumerate()
            .all(|(j, a)| j == i || rest.assume(a));
        if sat && rest.entails(&atoms[i]) {
            atoms.remove(i);
        } else {
            i += 1;
        }
    }
    atoms
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: u32) -> LinTerm {
        LinTerm::var(SymValue(n))
    }

    #[test]
    fn implied_disequalities_are_dropped() {
        let two_x_y = v(0).checked_scale(2).unwrap().checked_add(&v(1)).unwrap();
        let atoms = vec![
            Atom::le(v(0), -1),
            Atom::lt(v(1), v(0)),
            Atom::ne(two_x_y, 0),
            Atom::ne(v(0), v(1)),
        ];
        assert_eq!(drop_entailed(atoms.clone()), atoms[..2].to_vec());
    }

    fn tc(guard: Atom) -> TerminationCondition {
        TerminationCondition {
            guard,
            head: 1,
            line: 3,
            polarity: true,
        }
    }

    fn canon(roots: &[LinTerm], pc: &PathCondition, tcs: &[TerminationCondition]) -> CanonicalForm {
        canonicalize(&CanonInput {
            roots,
            cells: &[],
            pc,
            tcs,
        })
    }

    #[test]
    fn unconnected_constraints_are_projected_out() {
        // optim: i = 0 stays, p grows; p is not a root.
        let pc = PathCondition::new()
            .assert_atom(&Atom::gt(v(1), 5))
            .unwrap();
        let guard = tc(Atom::lt(0, 20));
        let a = canon(&[LinTerm::constant(0)], &pc, std::slice::from_ref(&guard));
        let b = canon(
            &[LinTerm::constant(0)],
            &PathCondition::new(),
            &[guard.clone(), guard.clone()],
        );
        assert_eq!(a, b);
        assert!(a.atoms.is_empty());
        assert_eq!(a.tcs.len(), 1);
    }

    #[test]
    fn repeated_guards_on_renamed_values_deduplicate() {
        let pc = PathCondition::new()
            .assert_atom(&Atom::lt(v(3), 20))
            .unwrap();
        let one = canon(&[v(3)], &pc, &[tc(Atom::lt(v(3), 20))]);
        let two = canon(
            &[v(3)],
            &pc,
            &[tc(Atom::lt(v(3), 20)), tc(Atom::lt(v(3), 20))],
        );
        assert_eq!(one, two);
        assert_eq!(one.roots, vec![v(0)]);
        assert_eq!(one.atoms, vec![Atom::le(v(0), 19)]);
    }

    #[test]
    fn guards_on_overwritten_values_are_kept() {
        let pc = PathCondition::new()
            .assert_atom(&Atom::ne(v(0), 0))
            .unwrap();
        let before = canon(&[v(0)], &PathCondition::new(), &[]);
        let after = canon(&[v(7)], &pc, &[tc(Atom::ne(v(0), 0))]);
        assert_ne!(before, after);
        assert_eq!(after.tcs.len(), 1);
        assert_eq!(after.atoms.len(), 1);
    }

    #[test]
    fn distinct_offsets_are_distinguished() {
        let pc = PathCondition::new();
        assert_ne!(
            canon(&[v(0)], &pc, &[]),
            canon(&[v(0).add_const(1).unwrap()], &pc, &[])
        );
        assert_ne!(
            canon(&[LinTerm::constant(0)], &pc, &[]),
            canon(&[LinTerm::constant(1)], &pc, &[])
        );
    }

    #[test]
    fn eliminated_values_resolve_before_renaming() {
        let pc = PathCondition::new()
            .assert_atom(&Atom::eq(v(5), v(2)))
            .unwrap();
        let a = canon(&[v(5)], &pc, &[]);
        let b = canon(&[v(9)], &PathCondition::new(), &[]);
        assert_eq!(a, b);
    }

    #[test]
    fn heap_fragment_is_part_of_the_form() {
        let pc = PathCondition::new();
        let f1 = canonicalize(&CanonInput {
            roots: &[v(4)],
            cells: &[(SymValue(4), v(6))],
            pc: &pc,
            tcs: &[],
        });
        let f2 = canonicalize(&CanonInput {
            roots: &[v(4)],
            cells: &[(SymValue(4), v(6).add_const(1).unwrap())],
            pc: &pc,
            tcs: &[],
        });
        assert_ne!(f1, f2);
        assert_eq!(f1.cells, vec![(SymValue(0), v(1))]);
    }
}
