//! Brute-force FBCT, second-order zero differential spectra and DDTs.
//!
//! `∇_f(a, b)` counts the `x` with `f(x+a+b) − f(x+a) − f(x+b) + f(x) = 0`.
//! Three engines compute it:
//!
//! * the direct engine evaluates that equation for every `x` (four lookups per
//!   `x`) and is the reference oracle;
//! * the collision engine rewrites a row as `∇_f(a, b) = #{x : D(x+b) = D(x)}`
//!   with `D(x) = f(x+a) − f(x)` and counts colliding pairs per value of `D`;
//! * [`PerturbedFbct`] precomputes a base function once and then answers the
//!   uniformity of functions that differ from it on a handful of points.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Elem, Field};
use crate::functions::FunctionTable;

/// Default limit on `log2` of the brute-force cost `(p^n)^3`.
pub const DEFAULT_BUDGET_LOG2: u32 = 36;
/// Largest field order [`PerturbedFbct`] accepts (its tables hold `u16` counts).
pub const PERTURBED_MAX_ORDER: u32 = 1 << 12;

pub(crate) trait GroupOps: Sync {
    fn add(&self, x: Elem, y: Elem) -> Elem;
    fn sub(&self, x: Elem, y: Elem) -> Elem;
}

pub(crate) struct Xor;

impl GroupOps for Xor {
    #[inline(always)]
    fn add(&self, x: Elem, y: Elem) -> Elem {
        x ^ y
    }
    #[inline(always)]
    fn sub(&self, x: Elem, y: Elem) -> Elem {
        x ^ y
    }
}

pub(crate) struct PrimeMod {
    p: u32,
}

impl GroupOps for PrimeMod {
    #[inline(always)]
    fn add(&self, x: Elem, y: Elem) -> Elem {
        let s = x + y;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }
    #[inline(always)]
    fn sub(&self, x: Elem, y: Elem) -> Elem {
        if x >= y {
            x - y
        } else {
            x + self.p - y
        }
    }
}

pub(crate) struct AddTable<'a> {
    table: &'a [u16],
    q: usize,
    field: &'a Field,
}

impl GroupOps for AddTable<'_> {
    #[inline(always)]
    fn add(&self, x: Elem, y: Elem) -> Elem {
        self.table[x as usize * self.q + y as usize] as Elem
    }
    #[inline(always)]
    fn sub(&self, x: Elem, y: Elem) -> Elem {
        self.add(x, self.field.neg(y))
    }
}

pub(crate) struct SlowField<'a>(&'a Field);

impl GroupOps for SlowField<'_> {
    fn add(&self, x: Elem, y: Elem) -> Elem {
        self.0.add(x, y)
    }
    fn sub(&self, x: Elem, y: Elem) -> Elem {
        self.0.sub(x, y)
    }
}

/// Binds `$g` to the cheapest additive-group implementation for the field and
/// evaluates `$body` with it, so generic kernels get monomorphized per case.
macro_rules! with_group {
    ($field:expr, |$g:ident| $body:expr) => {{
        let field: &Field = $field;
        if field.is_binary() {
            let $g = &Xor;
            $body
        } else if field.n() == 1 {
            let $g = &PrimeMod { p: field.p() };
            $body
        } else if let Some(table) = field.add_table() {
            let $g = &AddTable {
                table,
                q: field.size(),
                field,
            };
            $body
        } else {
            let $g = &SlowField(field);
            $body
        }
    }};
}

/// Whether `∇_f(a, b)` is forced to `p^n`: `ab(a+b) = 0` for `p = 2`, `ab = 0` otherwise.
pub fn is_trivial_pair(field: &Field, a: Elem, b: Elem) -> bool {
    a == 0 || b == 0 || (field.is_binary() && a == b)
}

/// Which `(a, b)` pairs a spectrum counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Only pairs whose entry is not forced to `p^n`.
    #[default]
    Nontrivial,
    All,
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nontrivial" | "nontrivial-pairs" => Ok(Scope::Nontrivial),
            "all" | "all-pairs" => Ok(Scope::All),
            _ => Err(Error::Parse(format!(
                "unknown scope `{s}` (expected `nontrivial` or `all`)"
            ))),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Nontrivial => "nontrivial",
            Scope::All => "all",
        })
    }
}

/// Histogram `value → number of (a, b) pairs` over the pairs selected by `scope`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spectrum {
    pub scope: Scope,
    pub counts: BTreeMap<u32, u64>,
}

impl Spectrum {
    pub fn new(scope: Scope) -> Self {
        Spectrum {
            scope,
            counts: BTreeMap::new(),
        }
    }

    pub fn from_counts(scope: Scope, counts: impl IntoIterator<Item = (u32, u64)>) -> Self {
        let mut s = Spectrum::new(scope);
        for (v, k) in counts {
            s.add(v, k);
        }
        s
    }

    /// Adds `k` pairs at value `v`; zero counts are never stored.
    pub fn add(&mut self, v: u32, k: u64) {
        if k > 0 {
            *self.counts.entry(v).or_insert(0) += k;
        }
    }

    pub fn merge(&mut self, other: &Spectrum) {
        for (&v, &k) in &other.counts {
            self.add(v, k);
        }
    }

    pub fn count(&self, v: u32) -> u64 {
        self.counts.get(&v).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn max_value(&self) -> Option<u32> {
        self.counts.keys().next_back().copied()
    }

    /// Number of pairs a complete spectrum of `field` sums to under `scope`.
    pub fn expected_total(field: &Field, scope: Scope) -> u64 {
        let q = field.order() as u64;
        match scope {
            Scope::All => q * q,
            Scope::Nontrivial if field.is_binary() => (q - 1) * (q - 2),
            Scope::Nontrivial => (q - 1) * (q - 1),
        }
    }

    /// Number of trivial pairs: `3·2^n − 2` for `p = 2`, `2·p^n − 1` otherwise.
    pub fn trivial_pair_count(field: &Field) -> u64 {
        let q = field.order() as u64;
        if field.is_binary() {
            3 * q - 2
        } else {
            2 * q - 1
        }
    }

    /// The value counts as a JSON object keyed by value.
    pub fn counts_json(&self) -> String {
        serde_json::to_string(&self.counts).expect("map of integers serializes")
    }
}

/// The maximum entry over nontrivial pairs and the lexicographically first
/// pair attaining it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Uniformity {
    pub value: u32,
    pub a: Elem,
    pub b: Elem,
}

impl Uniformity {
    fn better(self, other: Uniformity) -> Uniformity {
        match self.value.cmp(&other.value) {
            std::cmp::Ordering::Greater => self,
            std::cmp::Ordering::Less => other,
            std::cmp::Ordering::Equal => {
                if (self.a, self.b) <= (other.a, other.b) {
                    self
                } else {
                    other
                }
            }
        }
    }

    fn merge(x: Option<Uniformity>, y: Option<Uniformity>) -> Option<Uniformity> {
        match (x, y) {
            (Some(x), Some(y)) => Some(x.better(y)),
            (x, None) => x,
            (None, y) => y,
        }
    }
}

/// The full `p^n × p^n` FBCT.
#[derive(Clone, Debug)]
pub struct FbctMatrix {
    field: Arc<Field>,
    values: Vec<u32>,
}

impl PartialEq for FbctMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.field.spec() == other.field.spec() && self.values == other.values
    }
}

impl Eq for FbctMatrix {}

impl FbctMatrix {
    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn size(&self) -> usize {
        self.field.size()
    }

    /// Value of every trivial entry, `p^n`.
    pub fn trivial_value(&self) -> u32 {
        self.field.order()
    }

    #[inline]
    pub fn get(&self, a: Elem, b: Elem) -> u32 {
        self.values[a as usize * self.size() + b as usize]
    }

    pub fn row(&self, a: Elem) -> &[u32] {
        let q = self.size();
        &self.values[a as usize * q..(a as usize + 1) * q]
    }

    /// Row-major entries.
    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn is_trivial(&self, a: Elem, b: Elem) -> bool {
        is_trivial_pair(&self.field, a, b)
    }

    /// Iterates `(a, b, value)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (Elem, Elem, u32)> + '_ {
        let q = self.size();
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| ((i / q) as Elem, (i % q) as Elem, v))
    }
}

/// Second-order zero differential uniformity: the maximum over `a, b ≠ 0`
/// (and `a ≠ b` when `p = 2`). `None` when there are no such pairs.
pub fn second_order_uniformity(m: &FbctMatrix) -> Option<Uniformity> {
    m.entries()
        .filter(|&(a, b, _)| !m.is_trivial(a, b))
        .fold(None, |best, (a, b, value)| {
            Uniformity::merge(best, Some(Uniformity { value, a, b }))
        })
}

pub fn spectrum(m: &FbctMatrix, scope: Scope) -> Spectrum {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for (a, b, v) in m.entries() {
        if scope == Scope::All || !m.is_trivial(a, b) {
            *counts.entry(v).or_insert(0) += 1;
        }
    }
    Spectrum::from_counts(scope, counts)
}

/// True iff every nontrivial entry is zero (APN for `p = 2`, PN for odd `p`).
pub fn is_apn_via_fbct(m: &FbctMatrix) -> bool {
    m.entries().all(|(a, b, v)| v == 0 || m.is_trivial(a, b))
}

/// Engine used for full tables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Literal four-lookup evaluation per `x`.
    #[default]
    Direct,
    /// Row-wise collision counting on the derivative `x ↦ f(x+a) − f(x)`.
    Collision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FbctOptions {
    pub engine: Engine,
    /// Direct engine only: compute one representative per symmetry orbit and
    /// fill trivial lines without counting.
    pub orbit_reduction: bool,
    /// Skip the budget check.
    pub force: bool,
    pub budget_log2: u32,
}

impl Default for FbctOptions {
    fn default() -> Self {
        FbctOptions {
            engine: Engine::Direct,
            orbit_reduction: true,
            force: false,
            budget_log2: DEFAULT_BUDGET_LOG2,
        }
    }
}

impl FbctOptions {
    pub fn collision() -> Self {
        FbctOptions {
            engine: Engine::Collision,
            ..Self::default()
        }
    }

    pub fn unreduced() -> Self {
        FbctOptions {
            orbit_reduction: false,
            ..Self::default()
        }
    }

    pub fn forced(mut self) -> Self {
        self.force = true;
        self
    }
}

/// Refuses a computation of roughly `2^log2_cost` steps above the budget unless forced.
pub fn check_budget(what: &str, log2_cost: f64, opts: &FbctOptions) -> Result<()> {
    if opts.force || log2_cost <= opts.budget_log2 as f64 {
        Ok(())
    } else {
        Err(Error::BudgetExceeded {
            what: what.to_string(),
            log2_cost,
            limit_log2: opts.budget_log2,
        })
    }
}

fn cube_cost(field: &Field) -> f64 {
    3.0 * (field.order() as f64).log2()
}

#[inline(always)]
fn count_direct<G: GroupOps>(g: &G, f: &[Elem], a: Elem, b: Elem) -> u32 {
    let ab = g.add(a, b);
    let mut count = 0u32;
    for x in 0..f.len() as Elem {
        let lhs = g.add(f[g.add(x, ab) as usize], f[x as usize]);
        let rhs = g.add(f[g.add(x, a) as usize], f[g.add(x, b) as usize]);
        count += (lhs == rhs) as u32;
    }
    count
}

/// `∇_f(a, b)` by direct evaluation over all `x`. No budget applies.
pub fn nabla(f: &FunctionTable, a: Elem, b: Elem) -> u32 {
    let field = f.field().as_ref();
    with_group!(field, |g| count_direct(g, f.table(), a, b))
}

/// Scratch buffers for one collision row.
struct RowScratch {
    diff: Vec<Elem>,
    start: Vec<u32>,
    order: Vec<Elem>,
}

impl RowScratch {
    fn new(q: usize) -> Self {
        RowScratch {
            diff: vec![0; q],
            start: vec![0; q + 1],
            order: vec![0; q],
        }
    }

    /// Buckets the inputs by `D(x) = f(x+a) − f(x)`; afterwards
    /// `order[start[v]..start[v+1]]` lists the `x` with `D(x) = v` in increasing order.
    fn bucket<G: GroupOps>(&mut self, g: &G, f: &[Elem], a: Elem) {
        let q = f.len();
        self.start.iter_mut().for_each(|s| *s = 0);
        for x in 0..q {
            let d = g.sub(f[g.add(x as Elem, a) as usize], f[x]);
            self.diff[x] = d;
            self.start[d as usize + 1] += 1;
        }
        for v in 0..q {
            self.start[v + 1] += self.start[v];
        }
        let mut next = self.start.clone();
        for x in 0..q {
            let d = self.diff[x] as usize;
            self.order[next[d] as usize] = x as Elem;
            next[d] += 1;
        }
    }
}

/// Fills `out[b] = ∇_f(a, b)` for all `b` by collision counting.
fn collision_row<G: GroupOps>(g: &G, f: &[Elem], a: Elem, s: &mut RowScratch, out: &mut [u32]) {
    out.iter_mut().for_each(|v| *v = 0);
    s.bucket(g, f, a);
    let q = f.len();
    for v in 0..q {
        let bucket = &s.order[s.start[v] as usize..s.start[v + 1] as usize];
        for &x in bucket {
            for &y in bucket {
                out[g.sub(y, x) as usize] += 1;
            }
        }
    }
}

/// The canonical representative of the symmetry orbit of `(a, b)`, both nonzero.
fn orbit_canonical<G: GroupOps>(g: &G, binary: bool, a: Elem, b: Elem) -> (Elem, Elem) {
    if binary {
        let c = a ^ b;
        let mut t = [a, b, c];
        t.sort_unstable();
        (t[0], t[1])
    } else {
        let (na, nb) = (g.sub(0, a), g.sub(0, b));
        [
            (a, b),
            (na, b),
            (a, nb),
            (na, nb),
            (b, a),
            (nb, a),
            (b, na),
            (nb, na),
        ]
        .into_iter()
        .min()
        .unwrap()
    }
}

fn orbit_members<G: GroupOps>(g: &G, binary: bool, a: Elem, b: Elem) -> Vec<(Elem, Elem)> {
    if binary {
        let c = a ^ b;
        vec![(a, b), (b, a), (a, c), (c, a), (b, c), (c, b)]
    } else {
        let (na, nb) = (g.sub(0, a), g.sub(0, b));
        vec![
            (a, b),
            (na, b),
            (a, nb),
            (na, nb),
            (b, a),
            (nb, a),
            (b, na),
            (nb, na),
        ]
    }
}

fn direct_reduced<G: GroupOps>(g: &G, field: &Field, f: &[Elem]) -> Vec<u32> {
    let q = f.len();
    let binary = field.is_binary();
    let rows: Vec<Vec<(Elem, u32)>> = (1..q as Elem)
        .into_par_iter()
        .map(|a| {
            (1..q as Elem)
                .filter(|&b| !is_trivial_pair(field, a, b))
                .filter(|&b| orbit_canonical(g, binary, a, b) == (a, b))
                .map(|b| (b, count_direct(g, f, a, b)))
                .collect()
        })
        .collect();
    let mut values = vec![0u32; q * q];
    for (i, row) in rows.into_iter().enumerate() {
        let a = i as Elem + 1;
        for (b, v) in row {
            for (x, y) in orbit_members(g, binary, a, b) {
                values[x as usize * q + y as usize] = v;
            }
        }
    }
    let trivial = q as u32;
    for a in 0..q {
        for b in 0..q {
            if is_trivial_pair(field, a as Elem, b as Elem) {
                values[a * q + b] = trivial;
            }
        }
    }
    values
}

fn direct_full<G: GroupOps>(g: &G, f: &[Elem]) -> Vec<u32> {
    let q = f.len();
    let mut values = vec![0u32; q * q];
    values.par_chunks_mut(q).enumerate().for_each(|(a, row)| {
        for (b, slot) in row.iter_mut().enumerate() {
            *slot = count_direct(g, f, a as Elem, b as Elem);
        }
    });
    values
}

fn collision_full<G: GroupOps>(g: &G, f: &[Elem]) -> Vec<u32> {
    let q = f.len();
    let mut values = vec![0u32; q * q];
    values.par_chunks_mut(q).enumerate().for_each_init(
        || RowScratch::new(q),
        |scratch, (a, row)| collision_row(g, f, a as Elem, scratch, row),
    );
    values
}

/// The full FBCT of `f`, refusing fields with `(p^n)^3` above the budget unless forced.
pub fn fbct_table(f: &FunctionTable, opts: &FbctOptions) -> Result<FbctMatrix> {
    let field = f.field();
    check_budget("full FBCT", cube_cost(field), opts)?;
    let table = f.table();
    let values = with_group!(field.as_ref(), |g| match (opts.engine, opts.orbit_reduction) {
        (Engine::Direct, true) => direct_reduced(g, field, table),
        (Engine::Direct, false) => direct_full(g, table),
        (Engine::Collision, _) => collision_full(g, table),
    });
    Ok(FbctMatrix {
        field: Arc::clone(field),
        values,
    })
}

/// Row summary used by the streaming computations.
struct RowSummary {
    spectrum: BTreeMap<u32, u64>,
    best: Option<Uniformity>,
}

fn summarize_rows(f: &FunctionTable, scope: Scope) -> Vec<RowSummary> {
    let field = f.field().as_ref();
    let table = f.table();
    let q = table.len();
    with_group!(field, |g| {
        (0..q as Elem)
            .into_par_iter()
            .map_init(
                || (RowScratch::new(q), vec![0u32; q]),
                |(scratch, row), a| {
                    let mut spectrum = BTreeMap::new();
                    let mut best: Option<Uniformity> = None;
                    if a == 0 {
                        if scope == Scope::All {
                            spectrum.insert(q as u32, q as u64);
                        }
                        return RowSummary { spectrum, best };
                    }
                    collision_row(g, table, a, scratch, row);
                    for (b, &value) in row.iter().enumerate() {
                        let b = b as Elem;
                        let trivial = is_trivial_pair(field, a, b);
                        if scope == Scope::All || !trivial {
                            *spectrum.entry(value).or_insert(0) += 1;
                        }
                        if !trivial && best.map_or(true, |u| value > u.value) {
                            best = Some(Uniformity { value, a, b });
                        }
                    }
                    RowSummary { spectrum, best }
                },
            )
            .collect()
    })
}

/// Spectrum of `f` without materializing the matrix (collision engine, budgeted).
pub fn fbct_spectrum(f: &FunctionTable, scope: Scope, opts: &FbctOptions) -> Result<Spectrum> {
    check_budget("FBCT spectrum", cube_cost(f.field()), opts)?;
    let mut s = Spectrum::new(scope);
    for row in summarize_rows(f, scope) {
        for (v, k) in row.spectrum {
            s.add(v, k);
        }
    }
    Ok(s)
}

/// Second-order zero differential uniformity of `f` without materializing the matrix.
pub fn fbct_uniformity(f: &FunctionTable, opts: &FbctOptions) -> Result<Option<Uniformity>> {
    check_budget("FBCT uniformity", cube_cost(f.field()), opts)?;
    Ok(summarize_rows(f, Scope::Nontrivial)
        .into_iter()
        .fold(None, |acc, r| Uniformity::merge(acc, r.best)))
}

/// One row `∇_f(a, ·)` by collision counting.
pub fn fbct_row(f: &FunctionTable, a: Elem) -> Vec<u32> {
    let field = f.field().as_ref();
    let q = field.size();
    let mut out = vec![0u32; q];
    let mut scratch = RowScratch::new(q);
    with_group!(field, |g| collision_row(g, f.table(), a, &mut scratch, &mut out));
    out
}

/// The difference distribution table `Δ_f(a, b) = #{x : f(x+a) − f(x) = b}`.
#[derive(Clone, Debug)]
pub struct DdtMatrix {
    field: Arc<Field>,
    values: Vec<u32>,
}

impl PartialEq for DdtMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.field.spec() == other.field.spec() && self.values == other.values
    }
}

impl Eq for DdtMatrix {}

impl DdtMatrix {
    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn get(&self, a: Elem, b: Elem) -> u32 {
        self.values[a as usize * self.field.size() + b as usize]
    }

    pub fn row(&self, a: Elem) -> &[u32] {
        let q = self.field.size();
        &self.values[a as usize * q..(a as usize + 1) * q]
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// Differential uniformity: the maximum over `a ≠ 0` and all `b`.
    pub fn uniformity(&self) -> u32 {
        let q = self.field.size();
        self.values[q..].iter().copied().max().unwrap_or(0)
    }
}

/// The DDT of `f`; its cost is `(p^n)^2`, checked against the same budget.
pub fn ddt_table(f: &FunctionTable, opts: &FbctOptions) -> Result<DdtMatrix> {
    let field = f.field();
    check_budget("DDT", 2.0 * (field.order() as f64).log2(), opts)?;
    let q = field.size();
    let table = f.table();
    let mut values = vec![0u32; q * q];
    with_group!(field.as_ref(), |g| {
        values.par_chunks_mut(q).enumerate().for_each(|(a, row)| {
            for x in 0..q {
                let d = g.sub(table[g.add(x as Elem, a as Elem) as usize], table[x]);
                row[d as usize] += 1;
            }
        })
    });
    Ok(DdtMatrix {
        field: Arc::clone(field),
        values,
    })
}

pub fn differential_uniformity(f: &FunctionTable, opts: &FbctOptions) -> Result<u32> {
    Ok(ddt_table(f, opts)?.uniformity())
}

/// FBCT data for a fixed base function, reused across functions that differ
/// from it on a few inputs.
///
/// If `f` and the base `g` agree outside a set `P`, then in row `a` the
/// derivative `D(x) = f(x+a) − f(x)` changes only on `C = P ∪ (P − a)`. The
/// row of `f` is the base row minus the colliding pairs that touch `C` under
/// `g`, plus those that touch `C` under `f`, so each row costs about
/// `|C| · (bucket size)` instead of `p^n`.
pub struct PerturbedFbct {
    field: Arc<Field>,
    base: Vec<Elem>,
    q: usize,
    /// Base FBCT, row-major.
    rows: Vec<u16>,
    /// Per row `a`: inputs sorted by base derivative value.
    order: Vec<u16>,
    /// Per row `a`: `q + 1` bucket boundaries into `order`.
    offsets: Vec<u16>,
    /// Per row `a`: `(value, multiplicity)` over nontrivial `b`, largest value first.
    hist: Vec<Vec<(u16, u32)>>,
}

struct PerturbScratch {
    delta: Vec<i32>,
    stamp: Vec<u32>,
    touched: Vec<Elem>,
    round: u32,
}

impl PerturbedFbct {
    pub fn new(base: &FunctionTable) -> Result<Self> {
        let field = Arc::clone(base.field());
        if field.order() > PERTURBED_MAX_ORDER {
            return Err(Error::Unsupported(format!(
                "perturbation engine supports fields up to {PERTURBED_MAX_ORDER} elements, {field} has {}",
                field.order()
            )));
        }
        let q = field.size();
        let g_table = base.table();
        let mut rows = vec![0u16; q * q];
        let mut order = vec![0u16; q * q];
        let mut offsets = vec![0u16; q * (q + 1)];
        let fld = field.as_ref();
        let hist: Vec<Vec<(u16, u32)>> = with_group!(fld, |g| {
            rows.par_chunks_mut(q)
                .zip(order.par_chunks_mut(q))
                .zip(offsets.par_chunks_mut(q + 1))
                .enumerate()
                .map_init(
                    || (RowScratch::new(q), vec![0u32; q]),
                    |(scratch, counts), (a, ((row, ord), off))| {
                        let a = a as Elem;
                        if a == 0 {
                            row.iter_mut().for_each(|v| *v = q as u16);
                            return Vec::new();
                        }
                        collision_row(g, g_table, a, scratch, counts);
                        for (slot, &c) in row.iter_mut().zip(counts.iter()) {
                            *slot = c as u16;
                        }
                        for (slot, &x) in ord.iter_mut().zip(&scratch.order) {
                            *slot = x as u16;
                        }
                        for (slot, &s) in off.iter_mut().zip(&scratch.start) {
                            *slot = s as u16;
                        }
                        let mut h: BTreeMap<u16, u32> = BTreeMap::new();
                        for (b, &v) in row.iter().enumerate() {
                            if !is_trivial_pair(fld, a, b as Elem) {
                                *h.entry(v).or_insert(0) += 1;
                            }
                        }
                        h.into_iter().rev().collect()
                    },
                )
                .collect()
        });
        Ok(PerturbedFbct {
            field,
            base: g_table.to_vec(),
            q,
            rows,
            order,
            offsets,
            hist,
        })
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    fn check_compatible(&self, f: &FunctionTable) -> Result<Vec<Elem>> {
        if f.field().spec() != self.field.spec() {
            return Err(Error::InvalidTable(format!(
                "function is over {}, base is over {}",
                f.field(),
                self.field
            )));
        }
        Ok(f
            .table()
            .iter()
            .zip(&self.base)
            .enumerate()
            .filter(|(_, (x, y))| x != y)
            .map(|(x, _)| x as Elem)
            .collect())
    }

    fn bucket(&self, a: Elem, v: Elem) -> &[u16] {
        let off = &self.offsets[a as usize * (self.q + 1)..];
        let row = &self.order[a as usize * self.q..];
        &row[off[v as usize] as usize..off[v as usize + 1] as usize]
    }

    /// Accumulates the change of row `a` from base to `f` into `s`.
    fn row_delta<G: GroupOps>(
        &self,
        g: &G,
        f: &[Elem],
        perturbed: &[Elem],
        a: Elem,
        s: &mut PerturbScratch,
    ) {
        s.round += 1;
        s.touched.clear();
        let base = &self.base;
        let mut changed: Vec<Elem> = Vec::with_capacity(2 * perturbed.len());
        for &c in perturbed {
            for x in [c, g.sub(c, a)] {
                if !changed.contains(&x) {
                    changed.push(x);
                }
            }
        }
        let d_base = |x: Elem| g.sub(base[g.add(x, a) as usize], base[x as usize]);
        let d_new = |x: Elem| g.sub(f[g.add(x, a) as usize], f[x as usize]);
        let new_vals: Vec<Elem> = changed.iter().map(|&c| d_new(c)).collect();

        let bump = |b: Elem, by: i32, s: &mut PerturbScratch| {
            let i = b as usize;
            if s.stamp[i] != s.round {
                s.stamp[i] = s.round;
                s.delta[i] = 0;
                s.touched.push(b);
            }
            s.delta[i] += by;
        };

        for &c in &changed {
            for &y in self.bucket(a, d_base(c)) {
                let y = y as Elem;
                bump(g.sub(y, c), -1, s);
                if !changed.contains(&y) {
                    bump(g.sub(c, y), -1, s);
                }
            }
        }
        for (i, &c) in changed.iter().enumerate() {
            let v = new_vals[i];
            for &y in self.bucket(a, v) {
                let y = y as Elem;
                if !changed.contains(&y) {
                    bump(g.sub(y, c), 1, s);
                    bump(g.sub(c, y), 1, s);
                }
            }
            for (j, &y) in changed.iter().enumerate() {
                if new_vals[j] == v {
                    bump(g.sub(y, c), 1, s);
                }
            }
        }
    }

    fn row_max(&self, a: Elem, s: &PerturbScratch) -> u32 {
        let q = self.q;
        let base_row = &self.rows[a as usize * q..(a as usize + 1) * q];
        let mut best = 0u32;
        let mut touched_valid: Vec<u16> = Vec::with_capacity(s.touched.len());
        for &b in &s.touched {
            if is_trivial_pair(&self.field, a, b) {
                continue;
            }
            let v = base_row[b as usize] as i32 + s.delta[b as usize];
            debug_assert!(v >= 0);
            best = best.max(v as u32);
            touched_valid.push(base_row[b as usize]);
        }
        for &(v, mult) in &self.hist[a as usize] {
            if (v as u32) <= best {
                break;
            }
            let hit = touched_valid.iter().filter(|&&t| t == v).count() as u32;
            if mult > hit {
                best = v as u32;
                break;
            }
        }
        best
    }

    fn scratch(&self) -> PerturbScratch {
        PerturbScratch {
            delta: vec![0; self.q],
            stamp: vec![0; self.q],
            touched: Vec::new(),
            round: 0,
        }
    }

    /// Second-order zero differential uniformity of `f`.
    pub fn uniformity(&self, f: &FunctionTable) -> Result<u32> {
        let perturbed = self.check_compatible(f)?;
        let table = f.table();
        let field = self.field.as_ref();
        let q = self.q as Elem;
        Ok(with_group!(field, |g| {
            (1..q)
                .into_par_iter()
                .map_init(
                    || self.scratch(),
                    |s, a| {
                        self.row_delta(g, table, &perturbed, a, s);
                        self.row_max(a, s)
                    },
                )
                .max()
                .unwrap_or(0)
        }))
    }

    /// Full row `∇_f(a, ·)`, for cross-checking against the other engines.
    pub fn row(&self, f: &FunctionTable, a: Elem) -> Result<Vec<u32>> {
        let perturbed = self.check_compatible(f)?;
        let q = self.q;
        let mut out: Vec<u32> = self.rows[a as usize * q..(a as usize + 1) * q]
            .iter()
            .map(|&v| v as u32)
            .collect();
        if a == 0 {
            return Ok(out);
        }
        let mut s = self.scratch();
        let field = self.field.as_ref();
        with_group!(field, |g| self.row_delta(g, f.table(), &perturbed, a, &mut s));
        for &b in &s.touched {
            out[b as usize] = (out[b as usize] as i32 + s.delta[b as usize]) as u32;
        }
        Ok(out)
    }
}
