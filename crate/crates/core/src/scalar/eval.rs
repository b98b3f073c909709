use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::expr::{sym, Atom, ScalarExpr, Symbol};
use crate::error::{Error, Result};

/// A bound value: exact rational or double.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Rational(#[serde(with = "rational_str")] BigRational),
    Float(f64),
}

impl Number {
    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Rational(q) => q.to_f64().unwrap_or(f64::NAN),
            Number::Float(x) => *x,
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Number::Rational(q) => Some(q),
            Number::Float(_) => None,
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Rational(q) => write!(f, "{}", super::expr::fmt_rational(q)),
            Number::Float(x) => write!(f, "{x}"),
        }
    }
}

pub(crate) mod rational_str {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::super::expr::fmt_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(d)?;
        super::super::parse::parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

/// Map from symbol to value. Every free symbol of an evaluated expression must be bound.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Binding {
    values: BTreeMap<Symbol, Number>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_rational(mut self, name: &str, q: BigRational) -> Self {
        self.values.insert(sym(name), Number::Rational(q));
        self
    }

    pub fn with_f64(mut self, name: &str, x: f64) -> Self {
        self.values.insert(sym(name), Number::Float(x));
        self
    }

    pub fn set(&mut self, name: &str, v: Number) {
        self.values.insert(sym(name), v);
    }

    pub fn set_symbol(&mut self, s: Symbol, v: Number) {
        self.values.insert(s, v);
    }

    pub fn get(&self, name: &str) -> Option<&Number> {
        self.values.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &Number)> {
        self.values.iter()
    }

    pub fn merged(&self, other: &Binding) -> Binding {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.values.insert(k.clone(), v.clone());
        }
        out
    }

    /// Substitution map for the rational entries, used to specialize expressions exactly.
    pub fn rational_substitution(&self) -> BTreeMap<Symbol, ScalarExpr> {
        self.values
            .iter()
            .filter_map(|(k, v)| v.as_rational().map(|q| (k.clone(), ScalarExpr::constant(q.clone()))))
            .collect()
    }
}

impl ScalarExpr {
    /// Evaluate; takes the exact path when every needed binding is rational and no
    /// transcendental atom survives.
    pub fn evaluate(&self, b: &Binding) -> Result<Number> {
        match self.evaluate_exact(b) {
            Ok(q) => Ok(Number::Rational(q)),
            Err(Error::NotExact(_)) => self.evaluate_f64(b).map(Number::Float),
            Err(e) => Err(e),
        }
    }

    pub fn evaluate_exact(&self, b: &Binding) -> Result<BigRational> {
        let mut acc = BigRational::zero();
        for (m, c) in self.terms() {
            let mut t = c.clone();
            for (atom, e) in m.factors() {
                let base = match atom {
                    Atom::Sym(s) => match b.values.get(s) {
                        Some(Number::Rational(q)) => q.clone(),
                        Some(Number::Float(_)) => return Err(Error::NotExact(format!("symbol {s} bound to a float"))),
                        None => return Err(Error::UnboundSymbol(s.to_string())),
                    },
                    Atom::Recip(p) => {
                        let v = p.evaluate_exact(b)?;
                        if v.is_zero() {
                            return Err(Error::NotExact("division by zero".into()));
                        }
                        v.recip()
                    }
                    other => {
                        // still report unbound symbols before giving up on exactness
                        if let Atom::Exp(u) | Atom::Sin(u) | Atom::Cos(u) = other {
                            for s in u.free_symbols() {
                                if b.values.get(&s).is_none() {
                                    return Err(Error::UnboundSymbol(s.to_string()));
                                }
                            }
                        }
                        return Err(Error::NotExact("transcendental atom".into()));
                    }
                };
                if base.is_zero() && *e < 0 {
                    return Err(Error::NotExact("division by zero".into()));
                }
                t *= pow_rational(&base, *e);
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn evaluate_f64(&self, b: &Binding) -> Result<f64> {
        let mut acc = 0.0;
        for (m, c) in self.terms() {
            let mut t = c.to_f64().unwrap_or(f64::NAN);
            for (atom, e) in m.factors() {
                let base = match atom {
                    Atom::Sym(s) => b.values.get(s).ok_or_else(|| Error::UnboundSymbol(s.to_string()))?.to_f64(),
                    Atom::Exp(u) => u.evaluate_f64(b)?.exp(),
                    Atom::Sin(u) => u.evaluate_f64(b)?.sin(),
                    Atom::Cos(u) => u.evaluate_f64(b)?.cos(),
                    Atom::Recip(p) => 1.0 / p.evaluate_f64(b)?,
                };
                t *= base.powi(*e);
            }
            acc += t;
        }
        Ok(acc)
    }
}

pub(crate) fn pow_rational(q: &BigRational, e: i32) -> BigRational {
    if e >= 0 {
        num_traits::pow(q.clone(), e as usize)
    } else {
        num_traits::pow(q.recip(), (-e) as usize)
    }
}

/// Expression with symbols resolved to slots, for repeated double-precision evaluation
/// (quadrature nodes, Newton iterations, sample sweeps).
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    terms: Vec<(f64, Vec<(CAtom, i32)>)>,
}

#[derive(Clone, Debug)]
enum CAtom {
    Var(usize),
    Exp(CompiledExpr),
    Sin(CompiledExpr),
    Cos(CompiledExpr),
    Recip(CompiledExpr),
}

impl CompiledExpr {
    /// Compile against an ordered slot list; `fixed` supplies values for symbols that
    /// are not slots (Lie parameters and the like).
    pub fn new(e: &ScalarExpr, slots: &[Symbol], fixed: &Binding) -> Result<Self> {
        let e = e.substitute(&fixed_substitution(fixed, slots));
        Self::build(&e, slots)
    }

    fn build(e: &ScalarExpr, slots: &[Symbol]) -> Result<Self> {
        let mut terms = Vec::with_capacity(e.num_terms());
        for (m, c) in e.terms() {
            let mut factors = Vec::new();
            for (atom, ex) in m.factors() {
                let ca = match atom {
                    Atom::Sym(s) => CAtom::Var(
                        slots
                            .iter()
                            .position(|x| x == s)
                            .ok_or_else(|| Error::UnboundSymbol(s.to_string()))?,
                    ),
                    Atom::Exp(u) => CAtom::Exp(Self::build(u, slots)?),
                    Atom::Sin(u) => CAtom::Sin(Self::build(u, slots)?),
                    Atom::Cos(u) => CAtom::Cos(Self::build(u, slots)?),
                    Atom::Recip(p) => CAtom::Recip(Self::build(p, slots)?),
                };
                factors.push((ca, *ex));
            }
            terms.push((c.to_f64().unwrap_or(f64::NAN), factors));
        }
        Ok(CompiledExpr { terms })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, factors) in &self.terms {
            let mut t = *c;
            for (a, e) in factors {
                let base = match a {
                    CAtom::Var(i) => x[*i],
                    CAtom::Exp(u) => u.eval(x).exp(),
                    CAtom::Sin(u) => u.eval(x).sin(),
                    CAtom::Cos(u) => u.eval(x).cos(),
                    CAtom::Recip(p) => 1.0 / p.eval(x),
                };
                t *= if *e == 1 { base } else { base.powi(*e) };
            }
            acc += t;
        }
        acc
    }
}

fn fixed_substitution(fixed: &Binding, slots: &[Symbol]) -> BTreeMap<Symbol, ScalarExpr> {
    fixed
        .iter()
        .filter(|(k, _)| !slots.contains(k))
        .map(|(k, v)| {
            let e = match v {
                Number::Rational(q) => ScalarExpr::constant(q.clone()),
                Number::Float(x) => ScalarExpr::constant(BigRational::from_float(*x).unwrap_or_else(BigRational::one)),
            };
            (k.clone(), e)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::expr::rational;

    #[test]
    fn polynomial_exact() {
        let e = ScalarExpr::symbol("x").pow(2) + ScalarExpr::one();
        let b = Binding::new().with_rational("x", rational(2, 1));
        assert_eq!(e.evaluate(&b).unwrap(), Number::Rational(rational(5, 1)));
    }

    #[test]
    fn exp_zero_is_one() {
        let e = ScalarExpr::exp(ScalarExpr::zero());
        assert_eq!(e.evaluate(&Binding::new()).unwrap(), Number::Rational(rational(1, 1)));
    }

    #[test]
    fn unbound_symbol_errors() {
        let e = ScalarExpr::symbol("q");
        assert_eq!(e.evaluate(&Binding::new()), Err(Error::UnboundSymbol("q".into())));
        let t = ScalarExpr::exp(ScalarExpr::symbol("q"));
        assert_eq!(t.evaluate(&Binding::new()), Err(Error::UnboundSymbol("q".into())));
    }

    #[test]
    fn transcendental_falls_back_to_float() {
        let e = ScalarExpr::exp(ScalarExpr::symbol("x"));
        let b = Binding::new().with_rational("x", rational(1, 1));
        match e.evaluate(&b).unwrap() {
            Number::Float(v) => assert!((v - std::f64::consts::E).abs() < 1e-15),
            other => panic!("expected float, got {other:?}"),
        }
    }

    #[test]
    fn compiled_matches_direct() {
        let x = ScalarExpr::symbol("x");
        let t = ScalarExpr::symbol("t");
        let e = ScalarExpr::exp(&t * &x) * (x.pow(2) + ScalarExpr::int(3)).pow(-1);
        let c = CompiledExpr::new(&e, &[sym("x")], &Binding::new().with_f64("t", 0.5)).unwrap();
        let direct = e.evaluate_f64(&Binding::new().with_f64("t", 0.5).with_f64("x", 1.25)).unwrap();
        assert!((c.eval(&[1.25]) - direct).abs() < 1e-14);
    }
}
