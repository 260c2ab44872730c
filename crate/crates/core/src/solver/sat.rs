//! Satisfiability of a conjunction of bounded linear forms over the integers.
//!
//! Unsat answers come only from sound reasoning (interval propagation,
//! exhaustive search over a finite box, Fourier-Motzkin with integer
//! tightening). Anything inconclusive is reported as `Unknown`.

use std::collections::{BTreeMap, BTreeSet};

use super::pathcond::{Bounds, LinForm};
use super::term::SymValue;

pub(crate) enum Outcome {
    Sat(BTreeMap<SymValue, i64>),
    Unsat,
    Unknown,
}

const PROPAGATION_ROUNDS: usize = 32;
const EXHAUSTIVE_BOX: i128 = 200_000;
const EXHAUSTIVE_NODES: usize = 2_000_000;
const HEURISTIC_NODES: usize = 20_000;
const WINDOW: i128 = 24;
const FM_LIMIT: usize = 400;

struct Row {
    coeffs: Vec<(usize, i128)>,
    lo: Option<i128>,
    hi: Option<i128>,
    excluded: Vec<i128>,
}

pub(crate) fn solve(rows: &[(&LinForm, &Bounds)]) -> Outcome {
    let mut index: BTreeMap<SymValue, usize> = BTreeMap::new();
    for (f, _) in rows {
        for (v, _) in f.coeffs() {
            let n = index.len();
            index.entry(*v).or_insert(n);
        }
    }
    let vars: Vec<SymValue> = {
        let mut vs = vec![SymValue(0); index.len()];
        for (v, i) in &index {
            vs[*i] = *v;
        }
        vs
    };
    let rows: Vec<Row> = rows
        .iter()
        .map(|(f, b)| Row {
            coeffs: f
                .coeffs()
                .iter()
                .map(|(v, c)| (index[v], *c as i128))
                .collect(),
            lo: b.lo.map(i128::from),
            hi: b.hi.map(i128::from),
            excluded: b.excluded.iter().map(|e| *e as i128).collect(),
        })
        .collect();
    let n = vars.len();
    if n == 0 {
        return Outcome::Sat(BTreeMap::new());
    }

    let Some(domains) = propagate(&rows, n) else {
        return Outcome::Unsat;
    };

    let bounded = domains.iter().all(|(l, h)| l.is_some() && h.is_some());
    if bounded {
        let mut size: i128 = 1;
        for (l, h) in &domains {
            size = size.saturating_mul(h.unwrap() - l.unwrap() + 1);
        }
        if size <= EXHAUSTIVE_BOX {
            let cand: Vec<(i128, i128)> = domains
                .iter()
                .map(|(l, h)| (l.unwrap(), h.unwrap()))
                .collect();
            match search(&rows, &cand, EXHAUSTIVE_NODES) {
                Search::Found(m) => return Outcome::Sat(to_model(&vars, &m)),
                Search::Exhausted => return Outcome::Unsat,
                Search::Budget => {}
            }
        }
    }

    let cand: Vec<(i128, i128)> = domains
        .iter()
        .map(|(l, h)| {
            let pivot = pivot(*l, *h);
            let lo = l.unwrap_or(pivot - WINDOW).max(pivot - WINDOW);
            let hi = h.unwrap_or(pivot + WINDOW).min(pivot + WINDOW);
            (lo, hi)
        })
        .collect();
    if let Search::Found(m) = search(&rows, &cand, HEURISTIC_NODES) {
        return Outcome::Sat(to_model(&vars, &m));
    }

    if fourier_motzkin(&rows, n) {
        Outcome::Unsat
    } else {
        Outcome::Unknown
    }
}

fn to_model(vars: &[SymValue], values: &[i128]) -> BTreeMap<SymValue, i64> {
    vars.iter()
        .zip(values)
        .map(|(v, x)| (*v, (*x).clamp(i64::MIN as i128, i64::MAX as i128) as i64))
        .collect()
}

fn pivot(lo: Option<i128>, hi: Option<i128>) -> i128 {
    let mut p = 0;
    if let Some(l) = lo {
        p = p.max(l);
    }
    if let Some(h) = hi {
        p = p.min(h);
    }
    p
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if a % b != 0 && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    let q = a / b;
    if a % b != 0 && ((a < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}

type Domain = (Option<i128>, Option<i128>);

// Values stay inside i64 so that intermediate sums fit in i128.
const LIMIT: i128 = 1 << 80;

fn propagate(rows: &[Row], n: usize) -> Option<Vec<Domain>> {
    let mut dom: Vec<Domain> = vec![(None, None); n];
    for _ in 0..PROPAGATION_ROUNDS {
        let mut changed = false;
        for r in rows {
            for (j, &(xj, aj)) in r.coeffs.iter().enumerate() {
                // Range of the row without term j.
                let mut min_rest: Option<i128> = Some(0);
                let mut max_rest: Option<i128> = Some(0);
                for (i, &(xi, ai)) in r.coeffs.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let (l, h) = dom[xi];
                    let (tmin, tmax) = if ai > 0 {
                        (l.map(|l| ai * l), h.map(|h| ai * h))
                    } else {
                        (h.map(|h| ai * h), l.map(|l| ai * l))
                    };
                    min_rest = min_rest.zip(tmin).map(|(a, b)| a + b);
                    max_rest = max_rest.zip(tmax).map(|(a, b)| a + b);
                }
                // lo <= aj*xj + rest <= hi
                let t_hi = r.hi.zip(min_rest).map(|(h, m)| h - m);
                let t_lo = r.lo.zip(max_rest).map(|(l, m)| l - m);
                let (new_lo, new_hi) = if aj > 0 {
                    (
                        t_lo.map(|t| div_ceil(t, aj)),
                        t_hi.map(|t| div_floor(t, aj)),
                    )
                } else {
                    (
                        t_hi.map(|t| div_ceil(t, aj)),
                        t_lo.map(|t| div_floor(t, aj)),
                    )
                };
                let d = &mut dom[xj];
                if let Some(l) = new_lo.filter(|l| l.abs() < LIMIT) {
                    if d.0.is_none_or(|cur| l > cur) {
                        d.0 = Some(l);
                        changed = true;
                    }
                }
                if let Some(h) = new_hi.filter(|h| h.abs() < LIMIT) {
                    if d.1.is_none_or(|cur| h < cur) {
                        d.1 = Some(h);
                        changed = true;
                    }
                }
                if let (Some(l), Some(h)) = *d {
                    if l > h {
                        return None;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    Some(dom)
}

enum Search {
    Found(Vec<i128>),
    Exhausted,
    Budget,
}

fn search(rows: &[Row], cand: &[(i128, i128)], budget: usize) -> Search {
    let n = cand.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (cand[i].1 - cand[i].0, i));
    let mut occurs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ri, r) in rows.iter().enumerate() {
        for (x, _) in &r.coeffs {
            occurs[*x].push(ri);
        }
    }
    let mut assigned: Vec<Option<i128>> = vec![None; n];
    let mut nodes = 0usize;
    match dfs(
        rows,
        cand,
        &order,
        &occurs,
        0,
        &mut assigned,
        &mut nodes,
        budget,
    ) {
        Some(true) => Search::Found(assigned.into_iter().map(|v| v.unwrap_or(0)).collect()),
        Some(false) => Search::Exhausted,
        None => Search::Budget,
    }
}

fn row_possible(r: &Row, cand: &[(i128, i128)], assigned: &[Option<i128>]) -> bool {
    let (mut min, mut max) = (0i128, 0i128);
    let mut complete = true;
    for (x, a) in &r.coeffs {
        match assigned[*x] {
            Some(v) => {
                min += a * v;
                max += a * v;
            }
            None => {
                complete = false;
                let (l, h) = cand[*x];
                if *a > 0 {
                    min += a * l;
                    max += a * h;
                } else {
                    min += a * h;
                    max += a * l;
                }
            }
        }
    }
    if r.lo.is_some_and(|lo| max < lo) || r.hi.is_some_and(|hi| min > hi) {
        return false;
    }
    if complete && r.excluded.contains(&min) {
        return false;
    }
    true
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    rows: &[Row],
    cand: &[(i128, i128)],
    order: &[usize],
    occurs: &[Vec<usize>],
    depth: usize,
    assigned: &mut Vec<Option<i128>>,
    nodes: &mut usize,
    budget: usize,
) -> Option<bool> {
    if depth == order.len() {
        return Some(true);
    }
    let x = order[depth];
    let (lo, hi) = cand[x];
    let p = 0i128.clamp(lo, hi);
    // p, p+1, p-1, p+2, p-2, ...
    let mut d = 0i128;
    while p + d <= hi || p - d >= lo {
        let mut vals = Vec::with_capacity(2);
        if p + d <= hi {
            vals.push(p + d);
        }
        if d > 0 && p - d >= lo {
            vals.push(p - d);
        }
        for v in vals {
            *nodes += 1;
            if *nodes > budget {
                assigned[x] = None;
                return None;
            }
            assigned[x] = Some(v);
            if occurs[x]
                .iter()
                .all(|&ri| row_possible(&rows[ri], cand, assigned))
            {
                match dfs(
                    rows,
                    cand,
                    order,
                    occurs,
                    depth + 1,
                    assigned,
                    nodes,
                    budget,
                ) {
                    Some(true) => return Some(true),
                    Some(false) => {}
                    None => {
                        assigned[x] = None;
                        return None;
                    }
                }
            }
        }
        d += 1;
    }
    assigned[x] = None;
    Some(false)
}

/// True when a contradiction is derived.
fn fourier_motzkin(rows: &[Row], n: usize) -> bool {
    // Σ a·x <= b
    let mut cons: BTreeMap<Vec<i128>, i128> = BTreeMap::new();
    let push = |cons: &mut BTreeMap<Vec<i128>, i128>, a: Vec<i128>, b: i128| -> bool {
        let g = a.iter().fold(0i128, |g, x| gcd128(g, *x));
        if g == 0 {
            return b < 0;
        }
        let a: Vec<i128> = a.iter().map(|x| x / g).collect();
        let b = div_floor(b, g);
        let e = cons.entry(a).or_insert(b);
        *e = (*e).min(b);
        false
    };
    for r in rows {
        let mut a = vec![0i128; n];
        for (x, c) in &r.coeffs {
            a[*x] = *c;
        }
        if let Some(h) = r.hi {
            if push(&mut cons, a.clone(), h) {
                return true;
            }
        }
        if let Some(l) = r.lo {
            if push(&mut cons, a.iter().map(|x| -x).collect(), -l) {
                return true;
            }
        }
    }
    let mut remaining: BTreeSet<usize> = (0..n).collect();
    while !remaining.is_empty() {
        let Some(&x) = remaining.iter().min_by_key(|&&x| {
            let pos = cons.keys().filter(|a| a[x] > 0).count();
            let neg = cons.keys().filter(|a| a[x] < 0).count();
            pos * neg
        }) else {
            break;
        };
        remaining.remove(&x);
        let mut next: BTreeMap<Vec<i128>, i128> = BTreeMap::new();
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (a, b) in &cons {
            match a[x].signum() {
                0 => {
                    next.insert(a.clone(), *b);
                }
                1 => pos.push((a.clone(), *b)),
                _ => neg.push((a.clone(), *b)),
            }
        }
        for (pa, pb) in &pos {
            for (na, nb) in &neg {
                let (mp, mn) = (-na[x], pa[x]);
                let a: Vec<i128> = pa.iter().zip(na).map(|(p, q)| p * mp + q * mn).collect();
                let b = pb * mp + nb * mn;
                if a.iter().any(|c| c.abs() > LIMIT) || b.abs() > LIMIT {
                    return false;
                }
                if push(&mut next, a, b) {
                    return true;
                }
            }
        }
        if next.len() > FM_LIMIT {
            return false;
        }
        cons = next;
    }
    cons.iter()
        .any(|(a, b)| a.iter().all(|c| *c == 0) && *b < 0)
}

fn gcd128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
