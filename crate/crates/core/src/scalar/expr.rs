use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Interned symbol name. Cheap to clone, ordered by name.
pub type Symbol = Arc<str>;

pub fn sym(name: &str) -> Symbol {
    Arc::from(name)
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Opaque factor of a monomial.
///
/// `Recip(p)` stands for `1/p` where `p` is a canonical polynomial with more than
/// one term whose first coefficient is one; it only ever carries positive exponents.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Sym(Symbol),
    Exp(ScalarExpr),
    Sin(ScalarExpr),
    Cos(ScalarExpr),
    Recip(ScalarExpr),
}

impl Atom {
    pub fn is_transcendental(&self) -> bool {
        matches!(self, Atom::Exp(_) | Atom::Sin(_) | Atom::Cos(_))
    }
}

/// Product of atoms with non-zero integer exponents, sorted by atom.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<(Atom, i32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(Atom, i32)] {
        &self.0
    }

    fn atom(atom: Atom, exp: i32) -> Self {
        if exp == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(atom, exp)])
        }
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        if self.0.is_empty() {
            return other.clone();
        }
        if other.0.is_empty() {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, ea) = &self.0[i];
            let (b, eb) = &other.0[j];
            match a.cmp(b) {
                std::cmp::Ordering::Less => {
                    out.push((a.clone(), *ea));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((b.clone(), *eb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let e = ea + eb;
                    if e != 0 {
                        out.push((a.clone(), e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// Same monomial with the exponent of factor `idx` shifted by `delta`.
    fn shift(&self, idx: usize, delta: i32) -> Monomial {
        let mut out = self.0.clone();
        out[idx].1 += delta;
        if out[idx].1 == 0 {
            out.remove(idx);
        }
        Monomial(out)
    }

    fn has_recip(&self) -> bool {
        self.0.iter().any(|(a, _)| matches!(a, Atom::Recip(_)))
    }
}

/// Exact symbolic scalar, held in canonical form: a sum of rational multiples of
/// distinct monomials over atoms. Structural equality is equality of canonical
/// forms, so two expressions that agree as polynomials in their atoms compare equal.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScalarExpr {
    terms: Arc<BTreeMap<Monomial, BigRational>>,
}

impl ScalarExpr {
    pub fn zero() -> Self {
        ScalarExpr::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Self::term(Monomial::one(), c)
    }

    pub fn int(n: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Self::constant(rational(num, den))
    }

    pub fn symbol(name: &str) -> Self {
        Self::from_symbol(sym(name))
    }

    pub fn from_symbol(s: Symbol) -> Self {
        Self::term(Monomial::atom(Atom::Sym(s), 1), BigRational::one())
    }

    fn term(m: Monomial, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        ScalarExpr { terms: Arc::new(terms) }
    }

    fn from_map(terms: BTreeMap<Monomial, BigRational>) -> Self {
        ScalarExpr { terms: Arc::new(terms) }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().map(|c| c.is_one()).unwrap_or(false)
    }

    /// The rational value if the expression is a constant.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<Symbol> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next().unwrap();
        match m.factors() {
            [(Atom::Sym(s), 1)] if c.is_one() => Some(s.clone()),
            _ => None,
        }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self::from_map(self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect())
    }

    pub fn exp(arg: ScalarExpr) -> Self {
        if arg.is_zero() {
            return Self::one();
        }
        Self::term(Monomial::atom(Atom::Exp(arg), 1), BigRational::one())
    }

    pub fn sin(arg: ScalarExpr) -> Self {
        if arg.is_zero() {
            return Self::zero();
        }
        Self::term(Monomial::atom(Atom::Sin(arg), 1), BigRational::one())
    }

    pub fn cos(arg: ScalarExpr) -> Self {
        if arg.is_zero() {
            return Self::one();
        }
        Self::term(Monomial::atom(Atom::Cos(arg), 1), BigRational::one())
    }

    /// Integer power. Negative powers of a single term invert it; negative powers of
    /// a sum become a reciprocal atom after pulling out the leading coefficient.
    ///
    /// Panics on a negative power of zero.
    pub fn pow(&self, k: i32) -> Self {
        if k == 0 {
            return Self::one();
        }
        if k > 0 {
            let mut base = self.clone();
            let mut acc = Self::one();
            let mut e = k as u32;
            while e > 0 {
                if e & 1 == 1 {
                    acc = &acc * &base;
                }
                e >>= 1;
                if e > 0 {
                    base = &base * &base;
                }
            }
            return acc;
        }
        assert!(!self.is_zero(), "negative power of zero");
        let e = -k;
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            let inv_c = c.recip().pow(e);
            let mut acc = Self::constant(inv_c);
            for (atom, ex) in m.factors() {
                let f = match atom {
                    Atom::Recip(p) => p.pow(ex * e),
                    _ => Self::term(Monomial::atom(atom.clone(), -ex * e), BigRational::one()),
                };
                acc = &acc * &f;
            }
            return acc;
        }
        let lead = self.terms.values().next().unwrap().clone();
        let monic = self.scale(&lead.recip());
        Self::term(Monomial::atom(Atom::Recip(monic), e), lead.recip().pow(e))
    }

    /// Exact symbolic derivative.
    pub fn differentiate(&self, s: &str) -> Self {
        let mut out: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (m, c) in self.terms.iter() {
            for (idx, (atom, e)) in m.factors().iter().enumerate() {
                let e = *e;
                let (inner, mono, factor) = match atom {
                    Atom::Sym(x) => {
                        if &**x != s {
                            continue;
                        }
                        (Self::one(), m.shift(idx, -1), BigRational::from_integer(e.into()))
                    }
                    Atom::Exp(u) => {
                        let du = u.differentiate(s);
                        if du.is_zero() {
                            continue;
                        }
                        let ex = Self::exp(u.clone());
                        (&ex * &du, m.shift(idx, -1), BigRational::from_integer(e.into()))
                    }
                    Atom::Sin(u) => {
                        let du = u.differentiate(s);
                        if du.is_zero() {
                            continue;
                        }
                        (&Self::cos(u.clone()) * &du, m.shift(idx, -1), BigRational::from_integer(e.into()))
                    }
                    Atom::Cos(u) => {
                        let du = u.differentiate(s);
                        if du.is_zero() {
                            continue;
                        }
                        (&Self::sin(u.clone()) * &du, m.shift(idx, -1), BigRational::from_integer((-e).into()))
                    }
                    Atom::Recip(p) => {
                        // d(p^-e) = -e p^-(e+1) dp
                        let dp = p.differentiate(s);
                        if dp.is_zero() {
                            continue;
                        }
                        (dp, m.shift(idx, 1), BigRational::from_integer((-e).into()))
                    }
                };
                let coef = c * &factor;
                let piece = &Self::term(mono, coef) * &inner;
                add_into(&mut out, &piece);
            }
        }
        Self::from_map(out)
    }

    /// Replace symbols by expressions.
    pub fn substitute(&self, map: &BTreeMap<Symbol, ScalarExpr>) -> Self {
        if map.is_empty() {
            return self.clone();
        }
        let mut out: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (m, c) in self.terms.iter() {
            let mut acc = Self::constant(c.clone());
            for (atom, e) in m.factors() {
                let f = match atom {
                    Atom::Sym(s) => match map.get(s) {
                        Some(v) => v.pow(*e),
                        None => Self::term(Monomial::atom(atom.clone(), *e), BigRational::one()),
                    },
                    Atom::Exp(u) => Self::exp(u.substitute(map)).pow(*e),
                    Atom::Sin(u) => Self::sin(u.substitute(map)).pow(*e),
                    Atom::Cos(u) => Self::cos(u.substitute(map)).pow(*e),
                    Atom::Recip(p) => p.substitute(map).pow(-*e),
                };
                acc = &acc * &f;
            }
            add_into(&mut out, &acc);
        }
        Self::from_map(out)
    }

    /// Re-canonicalize. Values are kept canonical by every constructor, so this only
    /// matters for expressions assembled from raw parts; it is idempotent.
    pub fn normalize(&self) -> Self {
        let mut out = BTreeMap::new();
        for (m, c) in self.terms.iter() {
            add_into(&mut out, &Self::term(m.clone(), c.clone()));
        }
        Self::from_map(out)
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        for m in self.terms.keys() {
            for (atom, _) in m.factors() {
                match atom {
                    Atom::Sym(s) => {
                        out.insert(s.clone());
                    }
                    Atom::Exp(u) | Atom::Sin(u) | Atom::Cos(u) | Atom::Recip(u) => u.collect_symbols(out),
                }
            }
        }
    }

    pub fn has_transcendental(&self) -> bool {
        self.terms.keys().any(|m| {
            m.factors().iter().any(|(a, _)| match a {
                Atom::Recip(p) => p.has_transcendental(),
                other => other.is_transcendental(),
            })
        })
    }

    pub fn has_reciprocal(&self) -> bool {
        self.terms.keys().any(|m| m.has_recip())
    }

    /// Total degree in the given symbols, if the expression is polynomial in them
    /// (no symbol from the set appears inside a transcendental or reciprocal atom).
    pub fn polynomial_degree_in(&self, vars: &BTreeSet<Symbol>) -> Option<u32> {
        let mut deg = 0u32;
        for m in self.terms.keys() {
            let mut d = 0u32;
            for (atom, e) in m.factors() {
                match atom {
                    Atom::Sym(s) if vars.contains(s) => {
                        if *e < 0 {
                            return None;
                        }
                        d += *e as u32;
                    }
                    Atom::Sym(_) => {}
                    Atom::Exp(u) | Atom::Sin(u) | Atom::Cos(u) | Atom::Recip(u) => {
                        if u.free_symbols().iter().any(|s| vars.contains(s)) {
                            return None;
                        }
                    }
                }
            }
            deg = deg.max(d);
        }
        Some(deg)
    }
}

fn add_into(out: &mut BTreeMap<Monomial, BigRational>, e: &ScalarExpr) {
    for (m, c) in e.terms.iter() {
        match out.get_mut(m) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    out.remove(m);
                }
            }
            None => {
                out.insert(m.clone(), c.clone());
            }
        }
    }
}

impl<'a> Add<&'a ScalarExpr> for &'a ScalarExpr {
    type Output = ScalarExpr;
    fn add(self, rhs: &ScalarExpr) -> ScalarExpr {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let (big, small) = if self.terms.len() >= rhs.terms.len() { (self, rhs) } else { (rhs, self) };
        let mut out = (*big.terms).clone();
        add_into(&mut out, small);
        ScalarExpr::from_map(out)
    }
}

impl<'a> Sub<&'a ScalarExpr> for &'a ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: &ScalarExpr) -> ScalarExpr {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a ScalarExpr> for &'a ScalarExpr {
    type Output = ScalarExpr;
    fn mul(self, rhs: &ScalarExpr) -> ScalarExpr {
        if self.is_zero() || rhs.is_zero() {
            return ScalarExpr::zero();
        }
        if let Some(c) = self.as_constant() {
            return rhs.scale(&c);
        }
        if let Some(c) = rhs.as_constant() {
            return self.scale(&c);
        }
        let mut out: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (ma, ca) in self.terms.iter() {
            for (mb, cb) in rhs.terms.iter() {
                let m = ma.mul(mb);
                let c = ca * cb;
                match out.get_mut(&m) {
                    Some(v) => {
                        *v += &c;
                        if v.is_zero() {
                            out.remove(&m);
                        }
                    }
                    None => {
                        out.insert(m, c);
                    }
                }
            }
        }
        ScalarExpr::from_map(out)
    }
}

impl Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        ScalarExpr::from_map(self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr<ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $f(self, rhs: ScalarExpr) -> ScalarExpr {
                (&self).$f(&rhs)
            }
        }
        impl<'a> $tr<&'a ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $f(self, rhs: &ScalarExpr) -> ScalarExpr {
                (&self).$f(rhs)
            }
        }
        impl<'a> $tr<ScalarExpr> for &'a ScalarExpr {
            type Output = ScalarExpr;
            fn $f(self, rhs: ScalarExpr) -> ScalarExpr {
                self.$f(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        -&self
    }
}

impl AddAssign<&ScalarExpr> for ScalarExpr {
    fn add_assign(&mut self, rhs: &ScalarExpr) {
        if rhs.is_zero() {
            return;
        }
        let map = Arc::make_mut(&mut self.terms);
        add_into(map, rhs);
    }
}

impl Zero for ScalarExpr {
    fn zero() -> Self {
        ScalarExpr::zero()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl One for ScalarExpr {
    fn one() -> Self {
        ScalarExpr::one()
    }
}

impl From<i64> for ScalarExpr {
    fn from(n: i64) -> Self {
        ScalarExpr::int(n)
    }
}

impl From<BigRational> for ScalarExpr {
    fn from(q: BigRational) -> Self {
        ScalarExpr::constant(q)
    }
}

impl std::iter::Sum for ScalarExpr {
    fn sum<I: Iterator<Item = ScalarExpr>>(iter: I) -> Self {
        let mut out = BTreeMap::new();
        for e in iter {
            add_into(&mut out, &e);
        }
        ScalarExpr::from_map(out)
    }
}

pub(crate) fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn fmt_atom(atom: &Atom, e: i32, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let base = match atom {
        Atom::Sym(s) => s.to_string(),
        Atom::Exp(u) => format!("exp({u})"),
        Atom::Sin(u) => format!("sin({u})"),
        Atom::Cos(u) => format!("cos({u})"),
        Atom::Recip(p) => return write!(f, "({p})^(-{e})"),
    };
    match e {
        1 => write!(f, "{base}"),
        e if e < 0 => write!(f, "{base}^({e})"),
        e => write!(f, "{base}^{e}"),
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            if m.is_one() {
                write!(f, "{}", fmt_rational(&mag))?;
                continue;
            }
            if !mag.is_one() {
                write!(f, "{}*", fmt_rational(&mag))?;
            }
            for (j, (atom, e)) in m.factors().iter().enumerate() {
                if j > 0 {
                    write!(f, "*")?;
                }
                fmt_atom(atom, *e, f)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarExpr({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> ScalarExpr {
        ScalarExpr::symbol("x")
    }
    fn y() -> ScalarExpr {
        ScalarExpr::symbol("y")
    }

    #[test]
    fn like_terms_merge() {
        assert_eq!(x() + x(), x().scale(&rational(2, 1)));
    }

    #[test]
    fn binomial_identity_cancels() {
        let lhs = (x() + y()).pow(2) - x().pow(2) - (x() * y()).scale(&rational(2, 1)) - y().pow(2);
        assert!(lhs.is_zero());
    }

    #[test]
    fn power_rule() {
        let e = x().pow(2) * y();
        assert_eq!(e.differentiate("x"), (x() * y()).scale(&rational(2, 1)));
    }

    #[test]
    fn chain_rule_exp() {
        let t = ScalarExpr::symbol("t");
        let e = ScalarExpr::exp(&t * &x());
        assert_eq!(e.differentiate("x"), &t * &e);
    }

    #[test]
    fn reciprocal_of_sum() {
        let p = x().pow(2) + y().pow(2);
        let r = p.scale(&rational(3, 1)).pow(-1);
        // (3p)^-1 has coefficient 1/3 on the monic reciprocal atom
        assert_eq!(r.num_terms(), 1);
        let d = r.differentiate("x");
        // d/dx 1/(3p) = -2x/(3 p^2)
        let expect = (x().scale(&rational(-2, 3))) * p.pow(-2);
        assert_eq!(d, expect);
    }

    #[test]
    fn monomial_inverse() {
        let e = (x() * y().pow(2)).scale(&rational(2, 1));
        assert_eq!(&e * &e.pow(-1), ScalarExpr::one());
    }

    #[test]
    fn transcendental_zero_arguments_fold() {
        assert_eq!(ScalarExpr::exp(ScalarExpr::zero()), ScalarExpr::one());
        assert!(ScalarExpr::sin(ScalarExpr::zero()).is_zero());
    }

    #[test]
    fn substitution() {
        let mut map = BTreeMap::new();
        map.insert(sym("x"), y() + ScalarExpr::one());
        let e = x().pow(2);
        assert_eq!(e.substitute(&map), y().pow(2) + y().scale(&rational(2, 1)) + ScalarExpr::one());
    }
}
