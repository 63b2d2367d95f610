#![allow(dead_code)]

use std::sync::Arc;

use fbct_core::{Elem, Field, FunctionTable};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn field(s: &str) -> Arc<Field> {
    Arc::new(Field::parse(s).unwrap())
}

/// Every field of order at most `max`, as `p^n` strings, smallest first.
pub fn fields_up_to(max: u32) -> Vec<String> {
    let mut out = Vec::new();
    for p in 2..=max {
        if !fbct_core::field::is_prime(p) {
            continue;
        }
        let (mut q, mut n) = (p, 1);
        while q <= max {
            out.push((q, format!("{p}^{n}")));
            q = q.saturating_mul(p);
            n += 1;
        }
    }
    out.sort();
    out.into_iter().map(|(_, s)| s).collect()
}

pub fn random_permutation(k: &Arc<Field>, rng: &mut impl Rng) -> FunctionTable {
    let mut table: Vec<Elem> = k.elements().collect();
    table.shuffle(rng);
    FunctionTable::new(Arc::clone(k), table).unwrap()
}

pub fn random_function(k: &Arc<Field>, rng: &mut impl Rng) -> FunctionTable {
    let q = k.order();
    let table = (0..q).map(|_| rng.gen_range(0..q)).collect();
    FunctionTable::new(Arc::clone(k), table).unwrap()
}

/// Violations of the structural FBCT properties in `m`, as readable strings.
pub fn fbct_violations(m: &fbct_core::FbctMatrix) -> Vec<String> {
    let k = m.field();
    let q = k.order();
    let mut bad = Vec::new();
    for (a, b, v) in m.entries() {
        if v > q {
            bad.push(format!("({a},{b}) = {v} exceeds {q}"));
        }
        if m.get(b, a) != v {
            bad.push(format!("({a},{b}) = {v} but ({b},{a}) = {}", m.get(b, a)));
        }
        if m.is_trivial(a, b) && v != q {
            bad.push(format!("trivial ({a},{b}) = {v}"));
        }
        if k.is_binary() {
            if !m.is_trivial(a, b) && v % 4 != 0 {
                bad.push(format!("({a},{b}) = {v} not divisible by 4"));
            }
            if m.get(a, a ^ b) != v {
                bad.push(format!("({a},{b}) = {v} but ({a},{}) = {}", a ^ b, m.get(a, a ^ b)));
            }
        } else {
            let (na, nb) = (k.neg(a), k.neg(b));
            for (x, y) in [(na, b), (a, nb), (na, nb)] {
                if m.get(x, y) != v {
                    bad.push(format!("({a},{b}) = {v} but ({x},{y}) = {}", m.get(x, y)));
                }
            }
        }
    }
    bad
}
