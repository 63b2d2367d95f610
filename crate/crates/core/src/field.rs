//! Exact arithmetic in `F_{p^n}`.
//!
//! An element is stored as its integer code `Σ c_i·p^i`, where `c_0 + c_1·x + …`
//! is its polynomial representative modulo the field's monic irreducible
//! modulus. For `p = 2` the code is simply the coefficient bit vector, so
//! addition is XOR. Codes in `[0, p)` are exactly the prime subfield.
//!
//! Fields up to [`TABLE_LIMIT`] elements carry log/exp/inverse tables; larger
//! ones (up to [`MAX_ORDER`]) fall back to polynomial arithmetic.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Integer code of a field element, always `< p^n`.
pub type Elem = u32;

/// Largest supported field order.
pub const MAX_ORDER: u64 = 1 << 26;
/// Fields up to this order get log/exp/inverse tables.
pub const TABLE_LIMIT: u32 = 1 << 22;
/// Odd-characteristic fields up to this order get a full addition table on demand.
pub const ADD_TABLE_LIMIT: u32 = 1 << 12;

const MAX_DEGREE: usize = 26;

/// A parsed field description: `p^n[:c_0,c_1,…,c_n]`.
///
/// `modulus` lists coefficients low-to-high and must be monic. `None` selects
/// the built-in default modulus.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    pub p: u32,
    pub n: u32,
    pub modulus: Option<Vec<u32>>,
}

impl FieldSpec {
    pub fn new(p: u32, n: u32) -> Self {
        FieldSpec { p, n, modulus: None }
    }

    pub fn with_modulus(p: u32, n: u32, modulus: Vec<u32>) -> Self {
        FieldSpec {
            p,
            n,
            modulus: Some(modulus),
        }
    }

    /// `p^n`, or `None` on overflow.
    pub fn order(&self) -> Option<u64> {
        (self.p as u64).checked_pow(self.n)
    }
}

impl FromStr for FieldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |why: &str| Error::InvalidField(format!("`{s}`: {why}"));
        let (size, modulus) = match s.split_once(':') {
            Some((size, m)) => (size, Some(m)),
            None => (s, None),
        };
        let (p, n) = match size.split_once('^') {
            Some((p, n)) => (p.trim(), n.trim()),
            None => (size.trim(), "1"),
        };
        let p: u32 = p.parse().map_err(|_| bad("characteristic is not an integer"))?;
        let n: u32 = n.parse().map_err(|_| bad("degree is not an integer"))?;
        let modulus = match modulus {
            None => None,
            Some(m) => Some(
                m.split(',')
                    .map(|c| c.trim().parse::<u32>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("modulus coefficients must be integers"))?,
            ),
        };
        Ok(FieldSpec { p, n, modulus })
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n == 1 {
            write!(f, "{}", self.p)?;
        } else {
            write!(f, "{}^{}", self.p, self.n)?;
        }
        if let Some(m) = &self.modulus {
            let coeffs: Vec<String> = m.iter().map(|c| c.to_string()).collect();
            write!(f, ":{}", coeffs.join(","))?;
        }
        Ok(())
    }
}

/// Polynomial arithmetic modulo a fixed monic polynomial, without tables.
#[derive(Clone, Debug)]
struct PolyMod {
    p: u32,
    n: usize,
    order: u32,
    modulus: Vec<u32>,
    /// Binary fields: the modulus as a bit mask, including the leading term.
    bits: u32,
    pow_p: Vec<u32>,
}

impl PolyMod {
    fn new(p: u32, modulus: Vec<u32>) -> Self {
        let n = modulus.len() - 1;
        let mut pow_p = Vec::with_capacity(n + 1);
        let mut acc = 1u32;
        for _ in 0..n {
            pow_p.push(acc);
            acc = acc.wrapping_mul(p);
        }
        let order = acc;
        let bits = if p == 2 {
            modulus
                .iter()
                .enumerate()
                .fold(0u32, |m, (i, &c)| m | (c << i))
        } else {
            0
        };
        PolyMod {
            p,
            n,
            order,
            modulus,
            bits,
            pow_p,
        }
    }

    fn digits(&self, mut x: u32) -> [u32; MAX_DEGREE] {
        let mut d = [0u32; MAX_DEGREE];
        for slot in d.iter_mut().take(self.n) {
            *slot = x % self.p;
            x /= self.p;
        }
        d
    }

    fn encode(&self, d: &[u32]) -> u32 {
        d.iter()
            .take(self.n)
            .zip(&self.pow_p)
            .map(|(&c, &w)| c * w)
            .sum()
    }

    fn add(&self, x: u32, y: u32) -> u32 {
        if self.p == 2 {
            return x ^ y;
        }
        if self.n == 1 {
            let s = x + y;
            return if s >= self.p { s - self.p } else { s };
        }
        let (mut x, mut y) = (x, y);
        let mut r = 0;
        for &w in &self.pow_p {
            let s = x % self.p + y % self.p;
            r += if s >= self.p { s - self.p } else { s } * w;
            x /= self.p;
            y /= self.p;
        }
        r
    }

    fn neg(&self, x: u32) -> u32 {
        if self.p == 2 {
            return x;
        }
        let mut x = x;
        let mut r = 0;
        for &w in &self.pow_p {
            let c = x % self.p;
            if c != 0 {
                r += (self.p - c) * w;
            }
            x /= self.p;
        }
        r
    }

    fn mul(&self, x: u32, y: u32) -> u32 {
        if self.p == 2 {
            let (mut a, mut b, mut r) = (x, y, 0u32);
            let top = 1u32 << self.n;
            while b != 0 {
                if b & 1 == 1 {
                    r ^= a;
                }
                b >>= 1;
                a <<= 1;
                if a & top != 0 {
                    a ^= self.bits;
                }
            }
            return r;
        }
        if self.n == 1 {
            return ((x as u64 * y as u64) % self.p as u64) as u32;
        }
        let p = self.p as u64;
        let (a, b) = (self.digits(x), self.digits(y));
        let mut prod = [0u64; 2 * MAX_DEGREE];
        for i in 0..self.n {
            if a[i] == 0 {
                continue;
            }
            for j in 0..self.n {
                prod[i + j] = (prod[i + j] + a[i] as u64 * b[j] as u64) % p;
            }
        }
        for k in (self.n..2 * self.n - 1).rev() {
            let c = prod[k];
            if c == 0 {
                continue;
            }
            let minus_c = p - c;
            for i in 0..self.n {
                let t = &mut prod[k - self.n + i];
                *t = (*t + minus_c * self.modulus[i] as u64) % p;
            }
            prod[k] = 0;
        }
        let mut d = [0u32; MAX_DEGREE];
        for i in 0..self.n {
            d[i] = prod[i] as u32;
        }
        self.encode(&d)
    }

    /// Multiplication by the polynomial `x` (code `p`), i.e. a shift and one reduction step.
    fn mul_by_x(&self, v: u32) -> u32 {
        if self.p == 2 {
            let s = v << 1;
            return if s & (1 << self.n) != 0 { s ^ self.bits } else { s };
        }
        let d = self.digits(v);
        let top = d[self.n - 1];
        let mut out = [0u32; MAX_DEGREE];
        out[1..self.n].copy_from_slice(&d[..self.n - 1]);
        if top != 0 {
            let minus = self.p - top;
            for i in 0..self.n {
                out[i] = ((out[i] as u64 + minus as u64 * self.modulus[i] as u64) % self.p as u64)
                    as u32;
            }
        }
        self.encode(&out)
    }

    fn pow(&self, x: u32, mut e: u64) -> u32 {
        let mut base = x;
        let mut acc = 1u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }
}

/// Trial-division primality test.
pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= p as u64 {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn prime_factors(mut m: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= m {
        if m % d == 0 {
            out.push(d);
            while m % d == 0 {
                m /= d;
            }
        }
        d += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

/// Remainder of `f` modulo the monic polynomial `g`, coefficients low-to-high.
fn poly_rem(f: &[u32], g: &[u32], p: u32) -> Vec<u32> {
    let mut r: Vec<u64> = f.iter().map(|&c| c as u64).collect();
    let dg = g.len() - 1;
    let p = p as u64;
    while r.len() > dg {
        let lead = r.pop().unwrap() % p;
        if lead == 0 {
            continue;
        }
        let base = r.len() - dg;
        for i in 0..dg {
            r[base + i] = (r[base + i] + (p - lead) * g[i] as u64) % p;
        }
    }
    r.into_iter().map(|c| c as u32).collect()
}

/// Exhaustive trial division by every monic polynomial of degree `1..=n/2`.
fn is_irreducible(p: u32, modulus: &[u32]) -> bool {
    let n = modulus.len() - 1;
    if n <= 1 {
        return n == 1;
    }
    for d in 1..=n / 2 {
        let count = (p as u64).pow(d as u32);
        let mut g = vec![0u32; d + 1];
        g[d] = 1;
        for mut k in 0..count {
            for c in g.iter_mut().take(d) {
                *c = (k % p as u64) as u32;
                k /= p as u64;
            }
            if poly_rem(modulus, &g, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn has_full_order(arith: &PolyMod, g: u32, factors: &[u64]) -> bool {
    if g == 0 {
        return false;
    }
    let m = arith.order as u64 - 1;
    factors.iter().all(|&q| arith.pow(g, m / q) != 1)
}

/// The first modulus, in order of the integer code of its lower coefficients,
/// that is irreducible and has a primitive root `x`. For `n = 1` this picks
/// `x - g` with `g` the smallest primitive root.
pub fn default_modulus(p: u32, n: u32) -> Result<Vec<u32>> {
    let spec = FieldSpec::new(p, n);
    validate_size(&spec)?;
    let order = spec.order().unwrap();
    let factors = prime_factors(order - 1);
    let n = n as usize;
    if n == 1 {
        let arith = PolyMod::new(p, vec![0, 1]);
        for c0 in 0..p {
            let root = (p - c0) % p;
            if has_full_order(&arith, root, &factors) {
                return Ok(vec![c0, 1]);
            }
        }
        unreachable!("every prime field has a primitive root");
    }
    for k in 1..(order as u32) {
        let mut m = vec![0u32; n + 1];
        let mut t = k;
        for c in m.iter_mut().take(n) {
            *c = t % p;
            t /= p;
        }
        m[n] = 1;
        if m[0] == 0 || !is_irreducible(p, &m) {
            continue;
        }
        let arith = PolyMod::new(p, m.clone());
        if has_full_order(&arith, p, &factors) {
            return Ok(m);
        }
    }
    unreachable!("primitive polynomials exist in every degree")
}

fn validate_size(spec: &FieldSpec) -> Result<()> {
    if !is_prime(spec.p) {
        return Err(Error::InvalidField(format!(
            "characteristic {} is not prime",
            spec.p
        )));
    }
    if spec.n == 0 {
        return Err(Error::InvalidField("degree must be at least 1".into()));
    }
    match spec.order() {
        Some(q) if q <= MAX_ORDER => Ok(()),
        _ => Err(Error::InvalidField(format!(
            "{spec}: order exceeds the supported maximum 2^26"
        ))),
    }
}

/// Log/exp tables for a fixed generator plus full inverse and negation tables.
#[derive(Clone, Debug)]
pub struct FieldTables {
    log: Vec<u32>,
    /// Doubled so that `exp[log x + log y]` never needs a reduction.
    exp: Vec<u32>,
    inv: Vec<u32>,
    neg: Vec<u32>,
}

impl FieldTables {
    pub fn log(&self) -> &[u32] {
        &self.log
    }

    pub fn exp(&self) -> &[u32] {
        &self.exp
    }

    pub fn inv(&self) -> &[u32] {
        &self.inv
    }
}

/// A finite field `F_{p^n}` with a pinned representation.
///
/// Immutable after construction; share it behind an `Arc`.
#[derive(Debug)]
pub struct Field {
    spec: FieldSpec,
    arith: PolyMod,
    generator: Elem,
    tables: Option<FieldTables>,
    add_table: OnceLock<Option<Vec<u16>>>,
    /// `Tr(x^i)` for each basis monomial; the trace is linear in the digits.
    trace_basis: Vec<u32>,
    /// Binary fields: bit `i` set iff `Tr(x^i) = 1`.
    trace_mask: u32,
}

impl Field {
    pub fn new(spec: &FieldSpec) -> Result<Field> {
        validate_size(spec)?;
        let (p, n) = (spec.p, spec.n as usize);
        let modulus = match &spec.modulus {
            Some(m) => {
                if m.len() != n + 1 {
                    return Err(Error::InvalidField(format!(
                        "{spec}: modulus needs {} coefficients, got {}",
                        n + 1,
                        m.len()
                    )));
                }
                if m.iter().any(|&c| c >= p) {
                    return Err(Error::InvalidField(format!(
                        "{spec}: modulus coefficients must lie in [0, {p})"
                    )));
                }
                if m[n] != 1 {
                    return Err(Error::InvalidField(format!("{spec}: modulus must be monic")));
                }
                if !is_irreducible(p, m) {
                    return Err(Error::InvalidField(format!(
                        "{spec}: modulus is reducible over F_{p}"
                    )));
                }
                m.clone()
            }
            None => default_modulus(p, spec.n)?,
        };
        let arith = PolyMod::new(p, modulus.clone());
        let order = arith.order;
        let factors = prime_factors(order as u64 - 1);
        let x_code = if n == 1 { (p - modulus[0]) % p } else { p };
        let generator = if has_full_order(&arith, x_code, &factors) {
            x_code
        } else {
            (1..order)
                .find(|&g| has_full_order(&arith, g, &factors))
                .expect("multiplicative group is cyclic")
        };

        let tables = (order <= TABLE_LIMIT).then(|| {
            let m = (order - 1) as usize;
            let mut exp = vec![0u32; 2 * m.max(1)];
            let mut log = vec![0u32; order as usize];
            let mut v = 1u32;
            for i in 0..m {
                exp[i] = v;
                log[v as usize] = i as u32;
                v = if generator == p && n > 1 {
                    arith.mul_by_x(v)
                } else {
                    arith.mul(v, generator)
                };
            }
            for i in m..exp.len() {
                exp[i] = exp[i - m];
            }
            let mut inv = vec![0u32; order as usize];
            for x in 1..order as usize {
                inv[x] = exp[(m - log[x] as usize) % m];
            }
            let neg = if p == 2 {
                Vec::new()
            } else {
                (0..order).map(|x| arith.neg(x)).collect()
            };
            FieldTables { log, exp, inv, neg }
        });

        let mut field = Field {
            spec: FieldSpec::with_modulus(p, spec.n, modulus),
            arith,
            generator,
            tables,
            add_table: OnceLock::new(),
            trace_basis: Vec::new(),
            trace_mask: 0,
        };
        field.trace_basis = (0..n)
            .map(|i| field.trace_by_definition(field.arith.pow_p[i]))
            .collect();
        if p == 2 {
            field.trace_mask = field
                .trace_basis
                .iter()
                .enumerate()
                .fold(0, |m, (i, &t)| m | (t << i));
        }
        Ok(field)
    }

    /// Shorthand for `Field::new(&s.parse()?)`.
    pub fn parse(s: &str) -> Result<Field> {
        Field::new(&s.parse()?)
    }

    pub fn p(&self) -> u32 {
        self.spec.p
    }

    pub fn n(&self) -> u32 {
        self.spec.n
    }

    /// Number of elements, `p^n`.
    pub fn order(&self) -> u32 {
        self.arith.order
    }

    pub fn size(&self) -> usize {
        self.arith.order as usize
    }

    pub fn is_binary(&self) -> bool {
        self.spec.p == 2
    }

    /// Coefficients of the modulus, low-to-high, monic.
    pub fn modulus(&self) -> &[u32] {
        &self.arith.modulus
    }

    /// The field description, including the modulus in use.
    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    /// Generator used for the log/exp tables.
    pub fn generator(&self) -> Elem {
        self.generator
    }

    pub fn tables(&self) -> Option<&FieldTables> {
        self.tables.as_ref()
    }

    pub fn elements(&self) -> std::ops::Range<Elem> {
        0..self.arith.order
    }

    pub fn nonzero(&self) -> std::ops::Range<Elem> {
        1..self.arith.order
    }

    pub fn contains(&self, x: u64) -> bool {
        x < self.arith.order as u64
    }

    pub fn check(&self, x: u64) -> Result<Elem> {
        if self.contains(x) {
            Ok(x as Elem)
        } else {
            Err(Error::InvalidElement {
                code: x,
                order: self.order(),
            })
        }
    }

    /// The image of an integer in the prime subfield.
    pub fn from_int(&self, k: i64) -> Elem {
        k.rem_euclid(self.spec.p as i64) as Elem
    }

    /// True iff `x` lies in the prime subfield `F_p`.
    pub fn in_prime_field(&self, x: Elem) -> bool {
        x < self.spec.p
    }

    #[inline]
    pub fn add(&self, x: Elem, y: Elem) -> Elem {
        self.arith.add(x, y)
    }

    #[inline]
    pub fn neg(&self, x: Elem) -> Elem {
        if self.spec.p == 2 {
            return x;
        }
        match &self.tables {
            Some(t) => t.neg[x as usize],
            None => self.arith.neg(x),
        }
    }

    #[inline]
    pub fn sub(&self, x: Elem, y: Elem) -> Elem {
        self.add(x, self.neg(y))
    }

    #[inline]
    pub fn mul(&self, x: Elem, y: Elem) -> Elem {
        match &self.tables {
            Some(t) => {
                if x == 0 || y == 0 {
                    0
                } else {
                    t.exp[(t.log[x as usize] + t.log[y as usize]) as usize]
                }
            }
            None => self.arith.mul(x, y),
        }
    }

    /// Multiplication by polynomial reduction only, bypassing tables.
    pub fn mul_reference(&self, x: Elem, y: Elem) -> Elem {
        self.arith.mul(x, y)
    }

    pub fn square(&self, x: Elem) -> Elem {
        self.mul(x, x)
    }

    pub fn cube(&self, x: Elem) -> Elem {
        self.mul(self.mul(x, x), x)
    }

    /// `x^(p^n - 2)`: the multiplicative inverse for `x ≠ 0`, and `0` at `0`.
    #[inline]
    pub fn inv(&self, x: Elem) -> Elem {
        match &self.tables {
            Some(t) => t.inv[x as usize],
            None => self.arith.pow(x, self.arith.order as u64 - 2),
        }
    }

    /// `x · inv(y)`, so division by zero yields zero.
    pub fn div(&self, x: Elem, y: Elem) -> Elem {
        self.mul(x, self.inv(y))
    }

    /// `x^e` with `0^0 = 1`.
    pub fn pow(&self, x: Elem, e: u64) -> Elem {
        match &self.tables {
            Some(t) => {
                if x == 0 {
                    return (e == 0) as Elem;
                }
                let m = (self.arith.order - 1) as u64;
                let k = (t.log[x as usize] as u64 * (e % m)) % m;
                t.exp[k as usize]
            }
            None => self.arith.pow(x, e),
        }
    }

    pub fn frobenius(&self, x: Elem) -> Elem {
        self.pow(x, self.spec.p as u64)
    }

    /// Absolute trace as a code in `[0, p)`.
    pub fn trace(&self, x: Elem) -> Elem {
        if self.spec.p == 2 {
            return (x & self.trace_mask).count_ones() & 1;
        }
        let p = self.spec.p as u64;
        let mut x = x;
        let mut acc = 0u64;
        for &t in &self.trace_basis {
            acc += (x % self.spec.p) as u64 * t as u64;
            x /= self.spec.p;
        }
        (acc % p) as Elem
    }

    /// `Σ_{i<n} x^{p^i}` evaluated literally.
    pub fn trace_by_definition(&self, x: Elem) -> Elem {
        let mut acc = 0;
        let mut y = x;
        for _ in 0..self.spec.n {
            acc = self.add(acc, y);
            y = self.arith.pow(y, self.spec.p as u64);
        }
        acc
    }

    /// True iff `x^{p^d} = x`, i.e. `x` lies in the subfield of order `p^gcd(d, n)`.
    pub fn in_subfield(&self, x: Elem, d: u32) -> bool {
        let mut y = x;
        for _ in 0..d {
            y = self.frobenius(y);
        }
        y == x
    }

    /// Quadratic-residue test for odd characteristic.
    pub fn is_square(&self, x: Elem) -> Result<bool> {
        if self.spec.p == 2 {
            return Err(Error::Unsupported(
                "is_square needs odd characteristic (every element of F_2^n is a square)".into(),
            ));
        }
        Ok(x == 0 || self.pow(x, (self.order() as u64 - 1) / 2) == 1)
    }

    pub fn is_cube(&self, x: Elem) -> bool {
        let m = self.order() as u64 - 1;
        if m % 3 != 0 || x == 0 {
            return true;
        }
        self.pow(x, m / 3) == 1
    }

    fn require_binary(&self, what: &str) -> Result<()> {
        if self.spec.p == 2 {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("{what} needs characteristic 2")))
        }
    }

    /// Number of roots of `a·x² + b·x + c` in `F_{2^n}`, via the trace criterion.
    pub fn solve_quadratic_count_gf2n(&self, a: Elem, b: Elem, c: Elem) -> Result<u8> {
        self.require_binary("solve_quadratic_count_gf2n")?;
        if a == 0 {
            return Err(Error::Unsupported("leading coefficient must be nonzero".into()));
        }
        if b == 0 {
            return Ok(1);
        }
        let t = self.div(self.mul(a, c), self.square(b));
        Ok(if self.trace(t) == 0 { 2 } else { 0 })
    }

    /// The roots of `a·x² + b·x + c` in `F_{2^n}`, sorted by code.
    pub fn quadratic_roots_gf2n(&self, a: Elem, b: Elem, c: Elem) -> Result<Vec<Elem>> {
        self.require_binary("quadratic_roots_gf2n")?;
        if a == 0 {
            return Err(Error::Unsupported("leading coefficient must be nonzero".into()));
        }
        if b == 0 {
            return Ok(vec![self.sqrt_gf2n(self.div(c, a))]);
        }
        let theta = self.div(self.mul(a, c), self.square(b));
        let Some(y) = self.artin_schreier_root(theta) else {
            return Ok(Vec::new());
        };
        let scale = self.div(b, a);
        let mut roots = vec![self.mul(scale, y), self.mul(scale, y ^ 1)];
        roots.sort_unstable();
        Ok(roots)
    }

    /// Square root in characteristic 2: `x^{2^{n-1}}`.
    pub fn sqrt_gf2n(&self, x: Elem) -> Elem {
        self.pow(x, 1u64 << (self.spec.n - 1))
    }

    /// A root `y` of `y² + y = θ` (the other is `y + 1`), or `None` when `Tr(θ) = 1`.
    /// Half-trace for odd `n`, a linear solve over the `F_2` basis otherwise.
    pub fn artin_schreier_root(&self, theta: Elem) -> Option<Elem> {
        debug_assert!(self.is_binary());
        if self.trace(theta) != 0 {
            return None;
        }
        if self.spec.n % 2 == 1 {
            Some(self.half_trace(theta))
        } else {
            self.artin_schreier_root_linear(theta)
        }
    }

    /// `Σ_{i=0}^{(n-1)/2} θ^{4^i}`; solves `y² + y = θ` when `n` is odd and `Tr(θ) = 0`.
    pub fn half_trace(&self, theta: Elem) -> Elem {
        let mut acc = 0;
        let mut t = theta;
        for _ in 0..=(self.spec.n - 1) / 2 {
            acc ^= t;
            t = self.square(self.square(t));
        }
        acc
    }

    /// Solves `y² + y = θ` by elimination on the `F_2`-linear map `y ↦ y² + y`.
    pub fn artin_schreier_root_linear(&self, theta: Elem) -> Option<Elem> {
        debug_assert!(self.is_binary());
        let n = self.spec.n as usize;
        // (image, preimage) pairs kept reduced by leading bit.
        let mut basis: Vec<(u32, u32)> = Vec::with_capacity(n);
        for i in 0..n {
            let e = 1u32 << i;
            let mut img = self.square(e) ^ e;
            let mut pre = e;
            for &(bi, bp) in &basis {
                if img ^ bi < img {
                    img ^= bi;
                    pre ^= bp;
                }
            }
            if img != 0 {
                basis.push((img, pre));
                basis.sort_unstable_by(|x, y| y.0.cmp(&x.0));
            }
        }
        let (mut t, mut y) = (theta, 0u32);
        for &(bi, bp) in &basis {
            if t ^ bi < t {
                t ^= bi;
                y ^= bp;
            }
        }
        (t == 0).then_some(y)
    }

    /// Full `p^n × p^n` addition table, built on first use for odd fields up to
    /// [`ADD_TABLE_LIMIT`] elements. Row `a` is the translation `x ↦ x + a`.
    pub fn add_table(&self) -> Option<&[u16]> {
        self.add_table
            .get_or_init(|| {
                let q = self.order();
                (self.spec.p != 2 && q <= ADD_TABLE_LIMIT).then(|| {
                    let mut t = Vec::with_capacity((q * q) as usize);
                    for x in 0..q {
                        t.extend((0..q).map(|y| self.arith.add(x, y) as u16));
                    }
                    t
                })
            })
            .as_deref()
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.spec.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Field {
        Field::parse(s).unwrap()
    }

    #[test]
    fn spec_parsing() {
        let s: FieldSpec = "2^3:1,1,0,1".parse().unwrap();
        assert_eq!(s, FieldSpec::with_modulus(2, 3, vec![1, 1, 0, 1]));
        assert_eq!(s.to_string(), "2^3:1,1,0,1");
        let s: FieldSpec = "29".parse().unwrap();
        assert_eq!((s.p, s.n, s.modulus), (29, 1, None));
        assert_eq!("2^8".parse::<FieldSpec>().unwrap().to_string(), "2^8");
        assert!("2^x".parse::<FieldSpec>().is_err());
        assert!("q".parse::<FieldSpec>().is_err());
        assert!("2^3:1,a".parse::<FieldSpec>().is_err());
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(Field::parse("4^2").is_err());
        assert!(Field::parse("2^0").is_err());
        assert!(Field::parse("2^27").is_err());
        // x^3 + 1 = (x + 1)(x^2 + x + 1)
        assert!(Field::parse("2^3:1,0,0,1").is_err());
        assert!(Field::parse("2^3:1,1,0,0").is_err());
        assert!(Field::parse("2^3:1,1,1").is_err());
        assert!(Field::parse("3^2:1,0,3").is_err());
    }

    #[test]
    fn default_moduli() {
        assert_eq!(f("2^3").modulus(), &[1, 1, 0, 1]);
        assert_eq!(f("2^4").modulus(), &[1, 1, 0, 0, 1]);
        assert_eq!(f("2^8").modulus(), &[1, 0, 1, 1, 1, 0, 0, 0, 1]);
        // -1 is not primitive mod 29 but -2 = 27 is, so the modulus is x + 2.
        assert_eq!(f("29").modulus(), &[2, 1]);
        assert_eq!(f("29").generator(), 27);
    }

    #[test]
    fn add_examples() {
        assert_eq!(f("2^3").add(0b011, 0b101), 0b110);
        assert_eq!(f("3").add(2, 2), 1);
        let k = f("5^3");
        for x in k.elements() {
            assert_eq!(k.add(x, 0), x);
            assert_eq!(k.add(x, k.neg(x)), 0);
        }
    }

    #[test]
    fn mul_examples() {
        let k = f("2^3");
        let g = 0b010;
        assert_eq!(k.mul(k.mul(g, g), g), 0b011);
        assert_eq!(k.pow(g, 7), 1);
        for x in k.nonzero() {
            assert_eq!(k.mul(x, 1), x);
            assert_eq!(k.mul(x, k.inv(x)), 1);
            assert_eq!(k.pow(x, 7), 1);
            assert_eq!(k.pow(x, 1), x);
        }
        assert_eq!(k.pow(0, 0), 1);
        assert_eq!(k.pow(0, 3), 0);
    }

    #[test]
    fn inverse_examples() {
        for s in ["2^5", "3^3", "29", "7^2"] {
            let k = f(s);
            assert_eq!(k.inv(0), 0);
            assert_eq!(k.inv(1), 1);
        }
        assert_eq!(f("29").inv(2), 15);
    }

    #[test]
    fn trace_examples() {
        let k = f("2^3");
        let g = 0b010;
        assert_eq!(k.trace(0), 0);
        assert_eq!(k.trace(g), 0);
        assert_eq!(k.trace(k.inv(g)), 1);
        for x in k.elements() {
            assert_eq!(k.trace(k.square(x)), k.trace(x));
        }
    }

    #[test]
    fn square_and_cube_examples() {
        assert!(f("3").is_square(0).unwrap());
        assert!(!f("3").is_square(2).unwrap());
        let k9 = f("3^2");
        assert!(k9.is_square(k9.neg(1)).unwrap());
        assert!(f("2^4").is_square(1).is_err());

        let k4 = f("2^2");
        assert!(k4.is_cube(1));
        assert!(!k4.is_cube(2));
        assert!(!k4.is_cube(3));
        let k8 = f("2^3");
        assert!(k8.nonzero().all(|x| k8.is_cube(x)));
    }

    #[test]
    fn quadratic_count_examples() {
        let k1 = f("2");
        assert_eq!(k1.solve_quadratic_count_gf2n(1, 1, 1).unwrap(), 0);
        let k2 = f("2^2");
        assert_eq!(k2.solve_quadratic_count_gf2n(1, 1, 1).unwrap(), 2);
        assert_eq!(k2.quadratic_roots_gf2n(1, 1, 1).unwrap(), vec![2, 3]);
        for c in k2.elements() {
            assert_eq!(k2.solve_quadratic_count_gf2n(1, 0, c).unwrap(), 1);
        }
        assert!(k2.solve_quadratic_count_gf2n(0, 1, 1).is_err());
        assert!(f("3").solve_quadratic_count_gf2n(1, 1, 1).is_err());
    }

    #[test]
    fn tableless_arithmetic_matches_tables() {
        // 2^23 is above TABLE_LIMIT, so this field uses polynomial arithmetic.
        let big = f("2^23");
        assert!(big.tables().is_none());
        let x = 0x1234_5;
        assert_eq!(big.mul(x, big.inv(x)), 1);
        assert_eq!(big.pow(x, (1 << 23) - 1), 1);
        let small = f("2^8");
        for x in small.elements() {
            for y in small.elements().step_by(7) {
                assert_eq!(small.mul(x, y), small.mul_reference(x, y));
            }
        }
    }

    #[test]
    fn user_modulus_without_primitive_x() {
        // x^4 + x^3 + x^2 + x + 1 is irreducible but x has order 5.
        let k = f("2^4:1,1,1,1,1");
        assert_ne!(k.generator(), 2);
        for x in k.nonzero() {
            assert_eq!(k.mul(x, k.inv(x)), 1);
        }
    }
}
