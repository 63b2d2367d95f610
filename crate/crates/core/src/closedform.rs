//! Closed-form values of `∇_f(a, b)` and spectra for the inverse function and
//! the swapped inverses `Inv ∘ (0, 1)` and `Inv ∘ (1, γ)`.
//!
//! Each evaluator returns the value together with a label naming the case
//! that produced it. Cases are tested in a fixed order (trivial, then the
//! 8-valued cases, then the 4-valued cases, then 0), so exactly one label is
//! reported even when several conditions hold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbct::{Scope, Spectrum};
use crate::field::{Elem, Field};

/// What a closed form says about an entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Prediction {
    Exact(u32),
    /// Only an upper bound is known; the oracle decides the exact value.
    AtMost(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedFormCase {
    pub prediction: Prediction,
    pub label: &'static str,
}

impl ClosedFormCase {
    fn exact(value: u32, label: &'static str) -> Self {
        ClosedFormCase {
            prediction: Prediction::Exact(value),
            label,
        }
    }

    fn at_most(bound: u32, label: &'static str) -> Self {
        ClosedFormCase {
            prediction: Prediction::AtMost(bound),
            label,
        }
    }

    /// The exact value, if the case pins one down.
    pub fn value(&self) -> Option<u32> {
        match self.prediction {
            Prediction::Exact(v) => Some(v),
            Prediction::AtMost(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.prediction, Prediction::Exact(_))
    }

    /// Whether an observed value is consistent with the prediction.
    pub fn admits(&self, actual: u32) -> bool {
        match self.prediction {
            Prediction::Exact(v) => v == actual,
            Prediction::AtMost(v) => actual <= v,
        }
    }
}

fn require_binary(field: &Field, what: &str) -> Result<()> {
    if field.is_binary() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("{what} needs characteristic 2, got {field}")))
    }
}

fn require_odd(field: &Field, what: &str) -> Result<()> {
    if field.is_binary() {
        Err(Error::Unsupported(format!("{what} needs odd characteristic, got {field}")))
    } else {
        Ok(())
    }
}

fn check_elems(field: &Field, xs: &[Elem]) -> Result<()> {
    for &x in xs {
        field.check(x as u64)?;
    }
    Ok(())
}

fn check_gamma(field: &Field, gamma: Elem) -> Result<()> {
    check_elems(field, &[gamma])?;
    if gamma <= 1 {
        return Err(Error::Unsupported(format!(
            "gamma must lie outside {{0, 1}}, got {gamma}"
        )));
    }
    Ok(())
}

/// `x² + x + 1 = 0`, i.e. `x ∈ F_4 \ F_2` (characteristic 2).
fn in_f4_minus_f2(field: &Field, x: Elem) -> bool {
    field.square(x) ^ x == 1
}

fn in_f4_star(field: &Field, x: Elem) -> bool {
    x != 0 && field.in_subfield(x, 2)
}

fn in_f8(field: &Field, x: Elem) -> bool {
    field.in_subfield(x, 3)
}

fn in_f8_minus_f2(field: &Field, x: Elem) -> bool {
    x > 1 && in_f8(field, x)
}

/// `x ∈ C_n`: a nonzero cube other than 1.
fn in_nontrivial_cubes(field: &Field, x: Elem) -> bool {
    x > 1 && field.is_cube(x)
}

/// `∇_Inv(a, b)` for `p = 2`.
pub fn nabla_inv_even(field: &Field, a: Elem, b: Elem) -> Result<ClosedFormCase> {
    require_binary(field, "nabla_inv_even")?;
    check_elems(field, &[a, b])?;
    if a == 0 || b == 0 || a == b {
        return Ok(ClosedFormCase::exact(field.order(), "trivial"));
    }
    if in_f4_minus_f2(field, field.div(a, b)) {
        return Ok(ClosedFormCase::exact(4, "ratio-in-f4"));
    }
    Ok(ClosedFormCase::exact(0, "otherwise"))
}

/// `∇_Inv(a, b)` for odd `p`.
pub fn nabla_inv_odd(field: &Field, a: Elem, b: Elem) -> Result<ClosedFormCase> {
    require_odd(field, "nabla_inv_odd")?;
    check_elems(field, &[a, b])?;
    if a == 0 || b == 0 {
        return Ok(ClosedFormCase::exact(field.order(), "trivial"));
    }
    let (a2, b2) = (field.square(a), field.square(b));
    if field.p() == 3 {
        return Ok(if a2 == b2 {
            ClosedFormCase::exact(3, "p3-equal-squares")
        } else {
            ClosedFormCase::exact(1, "p3-otherwise")
        });
    }
    if (field.order() - 1) % 3 == 0 {
        let s = field.add(field.add(field.square(a2), field.mul(a2, b2)), field.square(b2));
        return Ok(if s == 0 {
            ClosedFormCase::exact(3, "cube-root-ratio")
        } else {
            ClosedFormCase::exact(1, "cube-root-otherwise")
        });
    }
    Ok(ClosedFormCase::exact(1, "otherwise"))
}

/// `∇_f(a, b)` for `f = Inv ∘ (0, 1)`, `p = 2`.
pub fn nabla_inv01_even(field: &Field, a: Elem, b: Elem) -> Result<ClosedFormCase> {
    require_binary(field, "nabla_inv01_even")?;
    check_elems(field, &[a, b])?;
    if a == 0 || b == 0 || a == b {
        return Ok(ClosedFormCase::exact(field.order(), "trivial"));
    }
    let root_of_x3_x_1 = |x: Elem| field.cube(x) ^ x ^ 1 == 0;
    if root_of_x3_x_1(a) && root_of_x3_x_1(b) {
        return Ok(ClosedFormCase::exact(8, "f8-roots"));
    }
    if in_f4_star(field, a) && in_f4_star(field, b) {
        return Ok(ClosedFormCase::exact(4, "f4-pair"));
    }
    let ab = field.mul(a, b);
    let q = field.square(a) ^ field.square(b) ^ ab;
    if q == 1 || q == field.mul(ab, a ^ b) {
        return Ok(ClosedFormCase::exact(4, "quadratic-relation"));
    }
    Ok(ClosedFormCase::exact(0, "otherwise"))
}

/// Nontrivial spectrum of `Inv ∘ (0, 1)` over `F_{2^n}`, `n ≥ 3`.
pub fn spectrum_inv01_even(field: &Field) -> Result<Spectrum> {
    require_binary(field, "spectrum_inv01_even")?;
    let n = field.n();
    if n < 3 {
        return Err(Error::Unsupported("spectrum_inv01_even needs n >= 3".into()));
    }
    let q = field.order() as i64;
    let omega8: i64 = if n % 3 == 0 { 6 } else { 0 };
    let omega4 = 2 * q
        - match (n % 2 == 0, n % 3 == 0) {
            (true, true) => 14,
            (true, false) => 2,
            (false, true) => 16,
            (false, false) => 4,
        };
    let total = (q - 1) * (q - 2);
    Ok(Spectrum::from_counts(
        Scope::Nontrivial,
        [
            (0, (total - omega4 - omega8) as u64),
            (4, omega4 as u64),
            (8, omega8 as u64),
        ],
    ))
}

/// Second-order zero differential uniformity of `Inv ∘ (0, 1)` over `F_{2^n}`, `n ≥ 3`.
pub fn uniformity_inv01_even(field: &Field) -> Result<u32> {
    require_binary(field, "uniformity_inv01_even")?;
    Ok(if field.n() % 3 == 0 { 8 } else { 4 })
}

/// Pairs `(|a|, |b|)` at which `Inv ∘ (0, 1)` reaches 4, closed under sign
/// changes and transposition when matched.
const INV01_EXCEPTIONAL: &[(u32, Elem, Elem)] = &[(29, 2, 12), (37, 2, 6)];

/// Whether `(a, b)` is one of the exceptional pairs where `Inv ∘ (0, 1)` takes the value 4.
pub fn is_inv01_exceptional(field: &Field, a: Elem, b: Elem) -> bool {
    let matches = |x: Elem, target: Elem| x == target || x == field.neg(target);
    INV01_EXCEPTIONAL.iter().any(|&(p, u, v)| {
        field.p() == p
            && ((matches(a, u) && matches(b, v)) || (matches(a, v) && matches(b, u)))
    })
}

/// `∇_f(a, b)` for `f = Inv ∘ (0, 1)`, odd `p`. Exact on the exceptional
/// pairs, on `a, b ∈ {±1}` and on `a = ±b`; an upper bound of 3 elsewhere.
pub fn nabla_inv01_odd(field: &Field, a: Elem, b: Elem) -> Result<ClosedFormCase> {
    require_odd(field, "nabla_inv01_odd")?;
    check_elems(field, &[a, b])?;
    if a == 0 || b == 0 {
        return Ok(ClosedFormCase::exact(field.order(), "trivial"));
    }
    if is_inv01_exceptional(field, a, b) {
        return Ok(ClosedFormCase::exact(4, "exceptional"));
    }
    let p = field.p();
    let minus_one = field.neg(1);
    let unit = |x: Elem| x == 1 || x == minus_one;
    if unit(a) && unit(b) {
        let v = match p {
            3 => 3,
            5 => 1,
            _ => 0,
        };
        return Ok(ClosedFormCase::exact(v, "units"));
    }
    if a == b || a == field.neg(b) {
        let doubled = [(7, 2), (7, 5), (11, 4), (11, 7)];
        if doubled.contains(&(p, a)) {
            return Ok(ClosedFormCase::exact(2, "opposite-special"));
        }
        if p != 3 {
            let third = field.inv(3);
            let three_halves = field.div(3, 2);
            let special = [third, field.neg(third), three_halves, field.neg(three_halves)];
            if special.contains(&a) {
                return Ok(ClosedFormCase::exact(1, "opposite-third"));
            }
        }
        return Ok(ClosedFormCase::exact(0, "opposite-otherwise"));
    }
    Ok(ClosedFormCase::at_most(3, "bounded"))
}

/// Every clause of the `Inv ∘ (1, γ)` case split, in precedence order.
pub const INV1G_CLAUSES: &[&str] = &[
    "trivial",
    "8:one-coset",
    "8:gamma-coset",
    "8:cube-root-ratio",
    "4:f4-gamma",
    "4:one-coset",
    "4:gamma-coset",
    "4:g-value",
    "4:cube-root-ratio",
    "otherwise",
];

/// Everything about `γ` that the `Inv ∘ (1, γ)` case split needs, computed
/// once per `γ` (characteristic 2).
#[derive(Clone, Debug)]
pub struct GammaClassification<'a> {
    field: &'a Field,
    gamma: Elem,
    /// `γ + 1`
    g1: Elem,
    /// `γ²(γ + 1) = γ³ + γ²`
    g8: Elem,
    sets: [Vec<Elem>; 6],
}

impl<'a> GammaClassification<'a> {
    pub fn new(field: &'a Field, gamma: Elem) -> Result<Self> {
        require_binary(field, "gamma classification")?;
        check_gamma(field, gamma)?;
        let k = field;
        let g1 = gamma ^ 1;
        let g1_cubed = k.cube(g1);
        let roots = |a: Elem, b: Elem, c: Elem, keep: &dyn Fn(Elem) -> bool| -> Result<Vec<Elem>> {
            Ok(k.quadratic_roots_gf2n(a, b, c)?.into_iter().filter(|&x| keep(x)).collect())
        };
        let small = |x: Elem| in_f8_minus_f2(k, x);
        let large = |x: Elem| !in_f8(k, x);
        let gamma_small = in_f8(k, gamma);
        let shifted = |x: Elem| x > 1 && !(gamma_small && in_f8(k, x));
        let sets = [
            roots(1, 1, gamma, &small)?,
            roots(1, gamma, gamma, &small)?,
            roots(1, 1, gamma, &large)?,
            roots(1, 1, k.div(g1_cubed, gamma), &shifted)?,
            roots(1, gamma, gamma, &large)?,
            roots(1, gamma, g1_cubed, &shifted)?,
        ];
        Ok(GammaClassification {
            field,
            gamma,
            g1,
            g8: k.mul(k.square(gamma), g1),
            sets,
        })
    }

    pub fn gamma(&self) -> Elem {
        self.gamma
    }

    /// `S_{γ,i}` for `i ∈ 1..=6`, sorted by code.
    ///
    /// Sets 4 and 6 drop roots in `F_8` only when `γ ∈ F_8`. For `γ ∉ F_8`
    /// those roots still give entries of 4 (first seen at `n = 6`), so they stay.
    pub fn s(&self, i: usize) -> &[Elem] {
        assert!((1..=6).contains(&i), "element sets are numbered 1 to 6");
        &self.sets[i - 1]
    }

    /// `G_{γ,a,b} = ab(a+b) + (a² + ab + b²)(γ + 1)`.
    pub fn g_value(&self, a: Elem, b: Elem) -> Elem {
        let k = self.field;
        let ab = k.mul(a, b);
        k.mul(ab, a ^ b) ^ k.mul(k.square(a) ^ ab ^ k.square(b), self.g1)
    }

    pub fn in_s7(&self, a: Elem, b: Elem) -> bool {
        a != 0 && b != 0 && self.g_value(a, b) == self.g1
    }

    pub fn in_s8(&self, a: Elem, b: Elem) -> bool {
        a != 0 && b != 0 && self.g_value(a, b) == self.g8
    }

    /// `(a, b) ∈ S_{γ,7} ∪ S_{γ,8}`.
    pub fn in_s7_or_s8(&self, a: Elem, b: Elem) -> bool {
        self.in_s7(a, b) || self.in_s8(a, b)
    }

    /// Shared right-hand side `Tr(γ / (a(a + γ + 1)))` of both remark conditions.
    fn remark_rhs(&self, a: Elem) -> Option<(Elem, Elem)> {
        let k = self.field;
        if a == 0 || a == self.g1 {
            return None;
        }
        let shifted = a ^ self.g1;
        Some((shifted, k.trace(k.div(self.gamma, k.mul(a, shifted)))))
    }

    /// `a ∈ S_{γ,9}`: `Tr(γ/(a+γ+1)) = Tr(γ/(a(a+γ+1)))`, `a ∉ {0, γ+1}`.
    pub fn in_s9(&self, a: Elem) -> bool {
        self.remark_rhs(a)
            .is_some_and(|(s, t)| self.field.trace(self.field.div(self.gamma, s)) == t)
    }

    /// `a ∈ S_{γ,10}`: `Tr(1/(a+γ+1)) = Tr(γ/(a(a+γ+1)))`, `a ∉ {0, γ+1}`.
    pub fn in_s10(&self, a: Elem) -> bool {
        self.remark_rhs(a)
            .is_some_and(|(s, t)| self.field.trace(self.field.inv(s)) == t)
    }

    /// `#(S_{γ,9} ∩ S_{γ,10})` by enumeration.
    pub fn remark_intersection_count(&self) -> u64 {
        self.field
            .nonzero()
            .filter(|&a| self.in_s9(a) && self.in_s10(a))
            .count() as u64
    }

    pub fn trace_class(&self) -> (Elem, Elem) {
        gamma_trace_class(self.field, self.gamma)
    }

    /// Whether `point ∈ {a, b, a+b}` and the other two members lie in `set`.
    fn coset_in(&self, a: Elem, b: Elem, point: Elem, set: &dyn Fn(Elem) -> bool) -> bool {
        if a == point {
            set(b)
        } else if b == point {
            set(a)
        } else if a ^ b == point {
            set(a) && set(b)
        } else {
            false
        }
    }

    /// Every clause whose condition holds at `(a, b)`, in precedence order.
    pub fn matching_clauses(&self, a: Elem, b: Elem) -> Vec<&'static str> {
        let k = self.field;
        if a == 0 || b == 0 || a == b {
            return vec!["trivial"];
        }
        let mut out = Vec::new();
        let member = |i: usize| move |x: Elem| self.sets[i].contains(&x);
        let either = |i: usize, j: usize| move |x: Elem| self.sets[i].contains(&x) || self.sets[j].contains(&x);
        let disjoint = ![a, b, a ^ b].iter().any(|&x| x == 1 || x == self.gamma);
        let ratio = k.div(b, a);
        let ratio_in_f4_minus_f2 = in_f4_minus_f2(k, ratio);
        let ratio_in_f4 = ratio_in_f4_minus_f2 || ratio <= 1;
        let g78 = self.in_s7_or_s8(a, b);

        if self.coset_in(a, b, 1, &member(0)) {
            out.push("8:one-coset");
        }
        if self.coset_in(a, b, self.gamma, &member(1)) {
            out.push("8:gamma-coset");
        }
        let a3 = k.cube(a);
        if ratio_in_f4_minus_f2 && (a3 == self.g1 || a3 == self.g8) && disjoint {
            out.push("8:cube-root-ratio");
        }
        if in_f4_minus_f2(k, self.gamma) && in_f4_star(k, a) && in_f4_star(k, b) {
            out.push("4:f4-gamma");
        }
        if self.coset_in(a, b, 1, &either(2, 3)) {
            out.push("4:one-coset");
        }
        if self.coset_in(a, b, self.gamma, &either(4, 5)) {
            out.push("4:gamma-coset");
        }
        if !ratio_in_f4 && g78 && disjoint {
            out.push("4:g-value");
        }
        if ratio_in_f4_minus_f2 && !g78 && disjoint {
            out.push("4:cube-root-ratio");
        }
        if out.is_empty() {
            out.push("otherwise");
        }
        out
    }

    /// `∇_f(a, b)` for `f = Inv ∘ (1, γ)`.
    pub fn nabla(&self, a: Elem, b: Elem) -> ClosedFormCase {
        let label = self.matching_clauses(a, b)[0];
        let value = match label {
            "trivial" => self.field.order(),
            "otherwise" => 0,
            l if l.starts_with('8') => 8,
            _ => 4,
        };
        ClosedFormCase::exact(value, label)
    }
}

/// `(Tr(γ), Tr(1/γ))`.
pub fn gamma_trace_class(field: &Field, gamma: Elem) -> (Elem, Elem) {
    (field.trace(gamma), field.trace(field.inv(gamma)))
}

/// `∇_f(a, b)` for `f = Inv ∘ (1, γ)`, `p = 2`. Builds the classification of
/// `γ` on every call; use [`GammaClassification::nabla`] for repeated queries.
pub fn nabla_inv1g_even(field: &Field, gamma: Elem, a: Elem, b: Elem) -> Result<ClosedFormCase> {
    check_elems(field, &[a, b])?;
    Ok(GammaClassification::new(field, gamma)?.nabla(a, b))
}

/// Closed-form spectrum data for `Inv ∘ (1, γ)` over `F_{2^n}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inv1gSpectrum {
    pub omega8: u64,
    /// `None` where no closed form is available; the oracle has to supply it.
    pub omega4: Option<u64>,
    pub omega0: Option<u64>,
    /// The `ω_4` count relies on the conjectured size of `S_{γ,9} ∩ S_{γ,10}`.
    pub assumes_remark_conjecture: bool,
}

impl Inv1gSpectrum {
    pub fn to_spectrum(&self) -> Option<Spectrum> {
        Some(Spectrum::from_counts(
            Scope::Nontrivial,
            [(0, self.omega0?), (4, self.omega4?), (8, self.omega8)],
        ))
    }
}

/// Spectrum of `Inv ∘ (1, γ)`. `ω_8` is exact for every `n`; `ω_4` and `ω_0`
/// are given for odd `n` only, and only when `assume_remark_conjecture` is set.
pub fn spectrum_inv1g_even(
    field: &Field,
    gamma: Elem,
    assume_remark_conjecture: bool,
) -> Result<Inv1gSpectrum> {
    require_binary(field, "spectrum_inv1g_even")?;
    check_gamma(field, gamma)?;
    let n = field.n();
    let q = field.order() as i64;
    let small = in_f8_minus_f2(field, gamma);
    let omega8: i64 = if n % 2 == 1 {
        if n % 3 == 0 && small {
            6
        } else {
            0
        }
    } else if n % 6 == 0 && small {
        12
    } else if !in_f8(field, gamma) {
        let g1 = gamma ^ 1;
        let g8 = field.mul(field.square(gamma), g1);
        6 * [g1, g8].iter().filter(|&&x| in_nontrivial_cubes(field, x)).count() as i64
    } else {
        0
    };
    let total = (q - 1) * (q - 2);
    let omega4 = (n % 2 == 1 && assume_remark_conjecture).then(|| {
        if n % 3 == 0 && small {
            2 * q - 16
        } else {
            2 * q
                + match gamma_trace_class(field, gamma) {
                    (0, 0) => 2,
                    (1, 1) => -10,
                    _ => -4,
                }
        }
    });
    Ok(Inv1gSpectrum {
        omega8: omega8 as u64,
        omega4: omega4.map(|w| w as u64),
        omega0: omega4.map(|w| (total - w - omega8) as u64),
        assumes_remark_conjecture: omega4.is_some(),
    })
}

/// Second-order zero differential uniformity of `Inv ∘ (1, γ)` over `F_{2^n}`, `n ≥ 3`.
pub fn uniformity_inv1g_even(field: &Field, gamma: Elem) -> Result<u32> {
    require_binary(field, "uniformity_inv1g_even")?;
    check_gamma(field, gamma)?;
    let n = field.n();
    let g1 = gamma ^ 1;
    let g8 = field.mul(field.square(gamma), g1);
    let cube_hit = n % 2 == 0 && (in_nontrivial_cubes(field, g1) || in_nontrivial_cubes(field, g8));
    let small = n % 3 == 0 && in_f8_minus_f2(field, gamma);
    Ok(if cube_hit || small { 8 } else { 4 })
}

fn require_p3(field: &Field, gamma: Elem, what: &str) -> Result<()> {
    if field.p() != 3 {
        return Err(Error::Unsupported(format!("{what} needs p = 3, got {field}")));
    }
    check_gamma(field, gamma)
}

/// `x ∈ Q_n`: a square outside the prime field `F_3`.
fn in_q(field: &Field, x: Elem) -> bool {
    x >= 3 && field.is_square(x).unwrap_or(false)
}

/// `γ² − γ = 1` or `γ² + γ = 1`.
fn p3_exceptional_gamma(field: &Field, gamma: Elem) -> (bool, bool) {
    let g2 = field.square(gamma);
    (field.sub(g2, gamma) == 1, field.add(g2, gamma) == 1)
}

/// `∇_f(a, a)` for `f = Inv ∘ (1, γ)` over `F_{3^n}`, `a ≠ 0`.
pub fn nabla_inv1g_p3_diagonal(field: &Field, gamma: Elem, a: Elem) -> Result<ClosedFormCase> {
    require_p3(field, gamma, "nabla_inv1g_p3_diagonal")?;
    check_elems(field, &[a])?;
    if a == 0 {
        return Ok(ClosedFormCase::exact(field.order(), "trivial"));
    }
    let (minus_case, plus_case) = p3_exceptional_gamma(field, gamma);
    // γ = -1 makes {±1} and {±γ} coincide and every x in F_3 a solution.
    if gamma == field.neg(1) && (a == 1 || a == gamma) {
        return Ok(ClosedFormCase::exact(3, "unit-minus-one"));
    }
    if a == 1 || a == field.neg(1) {
        return Ok(if minus_case {
            ClosedFormCase::exact(3, "unit-special")
        } else {
            ClosedFormCase::exact(0, "unit")
        });
    }
    if a == gamma || a == field.neg(gamma) {
        return Ok(if plus_case {
            ClosedFormCase::exact(3, "gamma-special")
        } else {
            ClosedFormCase::exact(0, "gamma")
        });
    }
    let minus_one = field.neg(1);
    let a2 = field.square(a);
    if field.n() % 2 == 0 && gamma == minus_one && a2 == minus_one {
        return Ok(ClosedFormCase::exact(9, "minus-one"));
    }
    let targets = [field.sub(1, gamma), field.mul(gamma, field.sub(gamma, 1))];
    // a ∉ {±1, ±γ} already keeps a² away from 1 and γ², so a target that
    // collides with one of them when γ² ± γ = 1 never reaches this point.
    if targets.contains(&a2) && in_q(field, a2) {
        return Ok(ClosedFormCase::exact(6, "square-target"));
    }
    Ok(ClosedFormCase::exact(3, "otherwise"))
}

/// Conjectured `∇_f` of `Inv ∘ (1, γ)` over `F_{3^n}`, `n ≥ 2`: one of 3, 6, 9.
pub fn p3_conjecture(field: &Field, gamma: Elem) -> Result<ClosedFormCase> {
    require_p3(field, gamma, "p3_conjecture")?;
    if field.n() % 2 == 0 && gamma == field.neg(1) {
        return Ok(ClosedFormCase::exact(9, "minus-one"));
    }
    let (minus_case, plus_case) = p3_exceptional_gamma(field, gamma);
    let targets = [field.sub(1, gamma), field.mul(gamma, field.sub(gamma, 1))];
    if targets.iter().any(|&t| in_q(field, t)) && !minus_case && !plus_case {
        return Ok(ClosedFormCase::exact(6, "square-target"));
    }
    Ok(ClosedFormCase::exact(3, "otherwise"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Field {
        Field::parse(s).unwrap()
    }

    #[test]
    fn inv_even_examples() {
        let k = f("2^4");
        assert_eq!(nabla_inv_even(&k, 5, 5).unwrap().value(), Some(16));
        let w = 0b0110;
        for a in k.nonzero() {
            assert_eq!(nabla_inv_even(&k, a, k.mul(a, w)).unwrap().value(), Some(4));
        }
        let k5 = f("2^5");
        for a in k5.nonzero() {
            for b in k5.nonzero().filter(|&b| b != a) {
                assert_eq!(nabla_inv_even(&k5, a, b).unwrap().value(), Some(0));
            }
        }
        assert!(nabla_inv_even(&f("3"), 1, 1).is_err());
    }

    #[test]
    fn inv_odd_examples() {
        assert_eq!(nabla_inv_odd(&f("3"), 1, 1).unwrap().value(), Some(3));
        let k7 = f("7");
        let threes: Vec<Elem> = (1..7)
            .filter(|&b| nabla_inv_odd(&k7, 1, b).unwrap().value() == Some(3))
            .collect();
        assert_eq!(threes, vec![2, 3, 4, 5]);
        assert_eq!(nabla_inv_odd(&f("5"), 2, 3).unwrap().value(), Some(1));
    }

    #[test]
    fn inv01_even_examples() {
        let k = f("2^3:1,1,0,1");
        // x, x^2, x^4 = x^2 + x are the roots of x^3 + x + 1.
        let case = nabla_inv01_even(&k, 2, 4).unwrap();
        assert_eq!((case.value(), case.label), (Some(8), "f8-roots"));
        let k4 = f("2^4");
        let w = 0b0110;
        let case = nabla_inv01_even(&k4, 1, w).unwrap();
        assert_eq!((case.value(), case.label), (Some(4), "f4-pair"));
    }

    #[test]
    fn inv01_spectrum_examples() {
        let s = spectrum_inv01_even(&f("2^6")).unwrap();
        assert_eq!((s.count(8), s.count(4), s.count(0)), (6, 114, 3786));
        let s = spectrum_inv01_even(&f("2^5")).unwrap();
        assert_eq!((s.count(8), s.count(4), s.count(0)), (0, 60, 870));
        let s = spectrum_inv01_even(&f("2^4")).unwrap();
        assert_eq!((s.count(8), s.count(4), s.count(0)), (0, 30, 180));
        for n in 3..=12 {
            let k = f(&format!("2^{n}"));
            let s = spectrum_inv01_even(&k).unwrap();
            assert_eq!(s.total(), Spectrum::expected_total(&k, Scope::Nontrivial));
        }
    }

    #[test]
    fn inv01_odd_examples() {
        assert_eq!(nabla_inv01_odd(&f("29"), 2, 12).unwrap().value(), Some(4));
        assert_eq!(nabla_inv01_odd(&f("29"), 27, 17).unwrap().value(), Some(4));
        assert_eq!(nabla_inv01_odd(&f("37"), 6, 2).unwrap().value(), Some(4));
        assert_eq!(nabla_inv01_odd(&f("5"), 1, 1).unwrap().value(), Some(1));
        assert_eq!(nabla_inv01_odd(&f("3"), 1, 1).unwrap().value(), Some(3));
        let bounded = nabla_inv01_odd(&f("31"), 5, 9).unwrap();
        assert_eq!(bounded.prediction, Prediction::AtMost(3));
        assert!(bounded.admits(2) && !bounded.admits(4));
        let count = |p: &str| {
            let k = f(p);
            let mut c = 0;
            for a in k.nonzero() {
                for b in k.nonzero() {
                    c += (nabla_inv01_odd(&k, a, b).unwrap().value() == Some(4)) as u32;
                }
            }
            c
        };
        assert_eq!((count("29"), count("37"), count("31")), (8, 8, 0));
    }

    #[test]
    fn gamma_sets() {
        let k = f("2^3:1,1,0,1");
        let g = 2;
        let gamma = k.mul(g, g ^ 1);
        let c = GammaClassification::new(&k, gamma).unwrap();
        assert!(c.s(1).contains(&g));
        for a in k.nonzero() {
            assert_eq!(c.g_value(a, a), k.mul(k.square(a), gamma ^ 1));
        }
        let k5 = f("2^5");
        for gamma in 2..32 {
            let c = GammaClassification::new(&k5, gamma).unwrap();
            if k5.trace(gamma) == 1 {
                assert!(c.s(3).is_empty());
            } else {
                assert_eq!(c.s(3).len(), 2);
            }
            for i in 1..=6 {
                assert!(c.s(i).len() <= 2);
            }
        }
        assert!(GammaClassification::new(&k5, 1).is_err());
        assert!(GammaClassification::new(&f("3^2"), 2).is_err());
    }

    #[test]
    fn inv1g_examples() {
        let k = f("2^3");
        for gamma in 2..8 {
            let c = GammaClassification::new(&k, gamma).unwrap();
            for &b in c.s(1) {
                assert_eq!(c.nabla(1, b).value(), Some(8));
            }
        }
        let k4 = f("2^4");
        let w = 0b0110;
        let c = GammaClassification::new(&k4, w).unwrap();
        let case = c.nabla(w, w ^ 1);
        assert_eq!(case.value(), Some(4));
        assert_eq!(case.label, "4:f4-gamma");
    }

    #[test]
    fn inv1g_spectrum_examples() {
        let k3 = f("2^3");
        let s = spectrum_inv1g_even(&k3, 2, true).unwrap();
        assert_eq!((s.omega8, s.omega4, s.omega0), (6, Some(0), Some(36)));
        let k5 = f("2^5");
        for gamma in 2..32 {
            let s = spectrum_inv1g_even(&k5, gamma, true).unwrap();
            let want = match gamma_trace_class(&k5, gamma) {
                (0, 0) => 66,
                (1, 1) => 54,
                _ => 60,
            };
            assert_eq!(s.omega4, Some(want));
            assert_eq!(s.to_spectrum().unwrap().total(), 31 * 30);
            assert_eq!(spectrum_inv1g_even(&k5, gamma, false).unwrap().omega4, None);
        }
        let k4 = f("2^4");
        for gamma in 2..16 {
            let s = spectrum_inv1g_even(&k4, gamma, true).unwrap();
            assert_eq!(s.omega4, None);
            let g1 = gamma ^ 1;
            let g8 = k4.mul(k4.square(gamma), g1);
            if !k4.is_cube(g1) && !k4.is_cube(g8) {
                assert_eq!(s.omega8, 0);
            }
        }
    }

    #[test]
    fn p3_examples() {
        let k = f("3^2");
        let minus_one = k.neg(1);
        let a = k.nonzero().find(|&a| k.square(a) == minus_one).unwrap();
        let case = nabla_inv1g_p3_diagonal(&k, minus_one, a).unwrap();
        assert_eq!(case.value(), Some(9));
        let gamma = k.nonzero().find(|&g| g > 1 && k.sub(k.square(g), g) == 1).unwrap();
        assert_eq!(nabla_inv1g_p3_diagonal(&k, gamma, 1).unwrap().value(), Some(3));
        assert_eq!(p3_conjecture(&k, minus_one).unwrap().value(), Some(9));
        assert!(p3_conjecture(&f("5"), 2).is_err());
    }
}
