//! Functions `F_{p^n} → F_{p^n}` as lookup tables: the inverse map, swapped
//! inverses and user-supplied S-boxes.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Elem, Field, FieldSpec};

/// The transposition of two distinct field elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Transposition {
    alpha: Elem,
    beta: Elem,
}

impl Transposition {
    pub fn new(alpha: Elem, beta: Elem) -> Result<Self> {
        if alpha == beta {
            return Err(Error::DegenerateTransposition(alpha));
        }
        Ok(Transposition { alpha, beta })
    }

    pub fn alpha(&self) -> Elem {
        self.alpha
    }

    pub fn beta(&self) -> Elem {
        self.beta
    }

    /// The same transposition with the two points exchanged.
    pub fn flipped(&self) -> Self {
        Transposition {
            alpha: self.beta,
            beta: self.alpha,
        }
    }

    pub fn apply(&self, x: Elem) -> Elem {
        if x == self.alpha {
            self.beta
        } else if x == self.beta {
            self.alpha
        } else {
            x
        }
    }
}

/// A function on a finite field stored as its full value table.
#[derive(Clone, Debug)]
pub struct FunctionTable {
    field: Arc<Field>,
    table: Vec<Elem>,
    permutation: bool,
}

impl FunctionTable {
    /// Validates length and range and records whether the table is a bijection.
    pub fn new(field: Arc<Field>, table: Vec<Elem>) -> Result<Self> {
        let q = field.size();
        if table.len() != q {
            return Err(Error::InvalidTable(format!(
                "expected {q} entries for {field}, got {}",
                table.len()
            )));
        }
        if let Some((x, &y)) = table.iter().enumerate().find(|(_, &y)| y as usize >= q) {
            return Err(Error::InvalidTable(format!(
                "entry {y} at input {x} is outside {field} (order {q})"
            )));
        }
        let mut seen = vec![false; q];
        let mut permutation = true;
        for &y in &table {
            if std::mem::replace(&mut seen[y as usize], true) {
                permutation = false;
                break;
            }
        }
        Ok(FunctionTable {
            field,
            table,
            permutation,
        })
    }

    pub fn from_fn(field: Arc<Field>, f: impl Fn(Elem) -> Elem) -> Self {
        let table = field.elements().map(f).collect();
        FunctionTable::new(field, table).expect("generated entries must be field elements")
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn table(&self) -> &[Elem] {
        &self.table
    }

    #[inline]
    pub fn eval(&self, x: Elem) -> Elem {
        self.table[x as usize]
    }

    pub fn is_permutation(&self) -> bool {
        self.permutation
    }

    /// Exchanges the images at the two inputs of `t`, i.e. returns `self ∘ t`.
    pub fn apply_output_swap(&self, t: Transposition) -> Result<Self> {
        let q = self.field.order();
        for x in [t.alpha, t.beta] {
            self.field.check(x as u64)?;
        }
        let mut table = self.table.clone();
        table.swap(t.alpha as usize, t.beta as usize);
        debug_assert_eq!(table.len(), q as usize);
        Ok(FunctionTable {
            field: Arc::clone(&self.field),
            table,
            permutation: self.permutation,
        })
    }

    /// Inputs at which `self` and `other` disagree.
    pub fn differences(&self, other: &FunctionTable) -> Vec<Elem> {
        self.table
            .iter()
            .zip(&other.table)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(x, _)| x as Elem)
            .collect()
    }

    /// Parses the text S-box format: a `# field: p^n[:modulus]` header line
    /// followed by `p^n` whitespace-separated codes. Further `#` lines are comments.
    pub fn parse_sbox(text: &str) -> Result<Self> {
        let mut spec: Option<FieldSpec> = None;
        let mut values = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(rest) = comment.trim().strip_prefix("field:") {
                    if spec.is_some() {
                        return Err(Error::Parse("duplicate `# field:` header".into()));
                    }
                    spec = Some(rest.trim().parse()?);
                }
                continue;
            }
            if spec.is_none() && !line.is_empty() {
                return Err(Error::Parse(
                    "S-box file must start with a `# field: p^n` header".into(),
                ));
            }
            for tok in line.split_whitespace() {
                let v: u64 = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("`{tok}` is not an integer code")))?;
                values.push(v);
            }
        }
        let spec = spec.ok_or_else(|| Error::Parse("missing `# field: p^n` header".into()))?;
        let field = Arc::new(Field::new(&spec)?);
        let q = field.order() as u64;
        let table = values
            .into_iter()
            .enumerate()
            .map(|(x, v)| {
                if v < q {
                    Ok(v as Elem)
                } else {
                    Err(Error::InvalidTable(format!(
                        "entry {v} at input {x} is outside {spec} (order {q})"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        FunctionTable::new(field, table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        FunctionTable::parse_sbox(&std::fs::read_to_string(path)?)
    }

    /// Renders the table in the format accepted by [`FunctionTable::parse_sbox`],
    /// sixteen codes per line.
    pub fn to_sbox_string(&self) -> String {
        let mut out = format!("# field: {}\n", self.field.spec());
        for chunk in self.table.chunks(16) {
            let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

/// `x ↦ x^{p^n-2}`, with `0 ↦ 0`.
pub fn inverse_function(field: &Arc<Field>) -> FunctionTable {
    let table = match field.tables() {
        Some(t) => t.inv().to_vec(),
        None => field.elements().map(|x| field.inv(x)).collect(),
    };
    FunctionTable {
        field: Arc::clone(field),
        table,
        permutation: true,
    }
}

pub fn identity_function(field: &Arc<Field>) -> FunctionTable {
    FunctionTable {
        field: Arc::clone(field),
        table: field.elements().collect(),
        permutation: true,
    }
}

/// `Inv ∘ (α, β)`: the inverse map with the images at `α` and `β` exchanged.
pub fn swapped_inverse(field: &Arc<Field>, t: Transposition) -> Result<FunctionTable> {
    inverse_function(field).apply_output_swap(t)
}

/// Maps `(α, β)` with `α ≠ 0` to `(1, β/α)`, returning the scaling `α`.
///
/// With `F = Inv ∘ (α, β)` and `G = Inv ∘ (1, β/α)` one has `F(x) = α⁻¹·G(x/α)`,
/// so `∇_F(a, b) = ∇_G(a/α, b/α)`.
pub fn reduce_to_canonical(field: &Field, t: Transposition) -> Result<(Transposition, Elem)> {
    if t.alpha == 0 {
        return Err(Error::Unsupported(
            "reduce_to_canonical needs alpha != 0; use canonical_form for (0, beta)".into(),
        ));
    }
    let beta = field.div(t.beta, t.alpha);
    Ok((Transposition::new(1, beta)?, t.alpha))
}

/// Like [`reduce_to_canonical`] but also accepts `(0, β)`, which is first
/// rewritten as `(β, 0)` and therefore lands on `(1, 0)`.
pub fn canonical_form(field: &Field, t: Transposition) -> Result<(Transposition, Elem)> {
    if t.alpha == 0 {
        reduce_to_canonical(field, t.flipped())
    } else {
        reduce_to_canonical(field, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(s: &str) -> Arc<Field> {
        Arc::new(Field::parse(s).unwrap())
    }

    #[test]
    fn inverse_examples() {
        let k = field("2^3");
        let inv = inverse_function(&k);
        assert_eq!((inv.eval(0), inv.eval(1)), (0, 1));
        assert!(inv.is_permutation());
        for x in k.elements() {
            assert_eq!(inv.eval(inv.eval(x)), x);
        }
        assert_eq!(inverse_function(&field("29")).eval(2), 15);
    }

    #[test]
    fn swapped_inverse_examples() {
        let k = field("2^4");
        let f = swapped_inverse(&k, Transposition::new(0, 1).unwrap()).unwrap();
        assert_eq!((f.eval(0), f.eval(1)), (1, 0));
        for x in 2..16 {
            assert_eq!(f.eval(x), k.inv(x));
        }
        let g = 7;
        let f = swapped_inverse(&k, Transposition::new(1, g).unwrap()).unwrap();
        assert_eq!((f.eval(1), f.eval(g)), (k.inv(g), 1));
        assert!(f.is_permutation());
        assert_eq!(f.differences(&inverse_function(&k)), vec![1, g]);
    }

    #[test]
    fn degenerate_transposition_rejected() {
        assert!(matches!(
            Transposition::new(3, 3),
            Err(Error::DegenerateTransposition(3))
        ));
    }

    #[test]
    fn canonical_reduction_examples() {
        let k = field("2^4");
        let g = 2;
        let (t, s) = reduce_to_canonical(&k, Transposition::new(g, 1).unwrap()).unwrap();
        assert_eq!((t.alpha(), t.beta(), s), (1, k.inv(g), g));
        let (t, s) = reduce_to_canonical(&k, Transposition::new(1, g).unwrap()).unwrap();
        assert_eq!((t.alpha(), t.beta(), s), (1, g, 1));
        let g2 = k.mul(g, g);
        let (t, _) = reduce_to_canonical(&k, Transposition::new(g, g2).unwrap()).unwrap();
        assert_eq!((t.alpha(), t.beta()), (1, g));

        let zero = Transposition::new(0, 5).unwrap();
        assert!(reduce_to_canonical(&k, zero).is_err());
        let (t, s) = canonical_form(&k, zero).unwrap();
        assert_eq!((t.alpha(), t.beta(), s), (1, 0, 5));
    }

    #[test]
    fn table_validation() {
        let k = field("2^2");
        let id = FunctionTable::new(Arc::clone(&k), vec![0, 1, 2, 3]).unwrap();
        assert!(id.is_permutation());
        let zero = FunctionTable::new(Arc::clone(&k), vec![0; 4]).unwrap();
        assert!(!zero.is_permutation());
        assert!(FunctionTable::new(Arc::clone(&k), vec![0, 1, 2, 4]).is_err());
        assert!(FunctionTable::new(k, vec![0, 1, 2]).is_err());
    }

    #[test]
    fn sbox_round_trip() {
        let k = field("2^3:1,1,0,1");
        let f = swapped_inverse(&k, Transposition::new(0, 1).unwrap()).unwrap();
        let text = f.to_sbox_string();
        assert!(text.starts_with("# field: 2^3:1,1,0,1\n"));
        let g = FunctionTable::parse_sbox(&text).unwrap();
        assert_eq!(g.table(), f.table());
        assert_eq!(g.field().modulus(), k.modulus());

        assert!(FunctionTable::parse_sbox("0 1 2 3").is_err());
        assert!(FunctionTable::parse_sbox("# field: 2^2\n0 1 2").is_err());
        assert!(FunctionTable::parse_sbox("# field: 2^2\n0 1 2 4").is_err());
        assert!(FunctionTable::parse_sbox("# field: 2^2\n# a comment\n3 2\n1 0\n").is_ok());
    }
}
