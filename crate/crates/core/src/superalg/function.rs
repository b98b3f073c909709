use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::Signed;

use crate::error::{Error, Result};
use crate::scalar::{parse_ast, Ast, Binding, ScalarExpr, Symbol};

/// Coordinate names of an (m,n) chart: m even coordinates and n odd generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperChart {
    even: Vec<Symbol>,
    odd: Vec<String>,
}

pub const MAX_ODD: usize = 64;

impl SuperChart {
    /// Chart with odd generators named `th1..thN`.
    pub fn new(even: &[&str], n: usize) -> Arc<Self> {
        let odd = (1..=n).map(|a| format!("th{a}")).collect();
        Self::with_odd_names(even.iter().map(|s| Symbol::from(*s)).collect(), odd)
    }

    pub fn with_odd_names(even: Vec<Symbol>, odd: Vec<String>) -> Arc<Self> {
        assert!(odd.len() <= MAX_ODD, "at most {MAX_ODD} odd generators");
        Arc::new(SuperChart { even, odd })
    }

    pub fn m(&self) -> usize {
        self.even.len()
    }

    pub fn n(&self) -> usize {
        self.odd.len()
    }

    pub fn even(&self) -> &[Symbol] {
        &self.even
    }

    pub fn odd_names(&self) -> &[String] {
        &self.odd
    }

    pub fn even_index(&self, name: &str) -> Option<usize> {
        self.even.iter().position(|s| &**s == name)
    }

    pub fn odd_index(&self, name: &str) -> Option<usize> {
        if let Some(i) = self.odd.iter().position(|s| s == name) {
            return Some(i);
        }
        let k: usize = name.strip_prefix("th")?.parse().ok()?;
        (1..=self.n()).contains(&k).then(|| k - 1)
    }
}

/// Bitmask of odd generators; bit A set means θ^(A+1) is present. Bits are kept in
/// increasing order, so a mask is a strictly increasing multi-index.
pub type OddMask = u64;

/// Sign of reordering θ^I θ^J into increasing order (I, J disjoint).
pub fn koszul_sign(i: OddMask, j: OddMask) -> bool {
    let mut swaps = 0u32;
    let mut rest = j;
    while rest != 0 {
        let b = rest.trailing_zeros();
        swaps += (i >> b >> 1).count_ones();
        rest &= rest - 1;
    }
    swaps % 2 == 1
}

/// Element of the exterior algebra on n odd generators with [`ScalarExpr`] coefficients,
/// stored sparsely as its superfield expansion.
#[derive(Clone, PartialEq)]
pub struct SuperFunction {
    chart: Arc<SuperChart>,
    terms: BTreeMap<OddMask, ScalarExpr>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_mask(mask: OddMask) -> Parity {
        if mask.count_ones() % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn is_odd(self) -> bool {
        self == Parity::Odd
    }

    pub fn add(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

impl SuperFunction {
    pub fn zero(chart: &Arc<SuperChart>) -> Self {
        SuperFunction { chart: chart.clone(), terms: BTreeMap::new() }
    }

    pub fn scalar(chart: &Arc<SuperChart>, e: ScalarExpr) -> Self {
        Self::monomial(chart, 0, e)
    }

    /// The generator θ^(a+1) (zero-based index).
    pub fn generator(chart: &Arc<SuperChart>, a: usize) -> Result<Self> {
        if a >= chart.n() {
            return Err(Error::IndexOutOfRange { index: a, len: chart.n() });
        }
        Ok(Self::monomial(chart, 1 << a, ScalarExpr::one()))
    }

    /// Even coordinate x^(i+1) as a superfunction.
    pub fn coordinate(chart: &Arc<SuperChart>, i: usize) -> Result<Self> {
        let s = chart.even.get(i).ok_or(Error::IndexOutOfRange { index: i, len: chart.m() })?;
        Ok(Self::scalar(chart, ScalarExpr::from_symbol(s.clone())))
    }

    pub fn monomial(chart: &Arc<SuperChart>, mask: OddMask, e: ScalarExpr) -> Self {
        let mut terms = BTreeMap::new();
        if !e.is_zero() {
            terms.insert(mask, e);
        }
        SuperFunction { chart: chart.clone(), terms }
    }

    pub fn from_terms(chart: &Arc<SuperChart>, terms: impl IntoIterator<Item = (OddMask, ScalarExpr)>) -> Self {
        let mut f = Self::zero(chart);
        for (m, e) in terms {
            f.add_term(m, &e);
        }
        f
    }

    pub fn chart(&self) -> &Arc<SuperChart> {
        &self.chart
    }

    pub fn terms(&self) -> impl Iterator<Item = (OddMask, &ScalarExpr)> {
        self.terms.iter().map(|(m, e)| (*m, e))
    }

    pub fn coefficient(&self, mask: OddMask) -> ScalarExpr {
        self.terms.get(&mask).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    fn add_term(&mut self, mask: OddMask, e: &ScalarExpr) {
        if e.is_zero() {
            return;
        }
        match self.terms.get_mut(&mask) {
            Some(v) => {
                *v += e;
                if v.is_zero() {
                    self.terms.remove(&mask);
                }
            }
            None => {
                self.terms.insert(mask, e.clone());
            }
        }
    }

    fn check_chart(&self, other: &SuperFunction) -> Result<()> {
        if Arc::ptr_eq(&self.chart, &other.chart) || self.chart == other.chart {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "({},{}) vs ({},{})",
                self.chart.m(),
                self.chart.n(),
                other.chart.m(),
                other.chart.n()
            )))
        }
    }

    /// Body f₀: the grade-0 coefficient.
    pub fn body(&self) -> ScalarExpr {
        self.coefficient(0)
    }

    /// Grade-k piece f_[k] of the superfield expansion.
    pub fn component(&self, k: u32) -> SuperFunction {
        SuperFunction {
            chart: self.chart.clone(),
            terms: self.terms.iter().filter(|(m, _)| m.count_ones() == k).map(|(m, e)| (*m, e.clone())).collect(),
        }
    }

    /// Coefficient of θ¹…θⁿ.
    pub fn top_component(&self) -> ScalarExpr {
        let n = self.chart.n();
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        self.coefficient(full)
    }

    pub fn grades(&self) -> impl Iterator<Item = u32> + '_ {
        self.terms.keys().map(|m| m.count_ones())
    }

    /// Z₂ parity if homogeneous; zero counts as both, reported as even.
    pub fn parity(&self) -> Option<Parity> {
        let mut p = None;
        for m in self.terms.keys() {
            let q = Parity::of_mask(*m);
            match p {
                None => p = Some(q),
                Some(prev) if prev != q => return None,
                _ => {}
            }
        }
        Some(p.unwrap_or(Parity::Even))
    }

    pub fn is_homogeneous_of(&self, parity: Parity) -> bool {
        self.terms.keys().all(|m| Parity::of_mask(*m) == parity)
    }

    /// Graded-commutative product.
    pub fn wedge(&self, other: &SuperFunction) -> Result<SuperFunction> {
        self.check_chart(other)?;
        let mut out = SuperFunction::zero(&self.chart);
        for (ma, ea) in &self.terms {
            for (mb, eb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let prod = ea * eb;
                let prod = if koszul_sign(*ma, *mb) { -prod } else { prod };
                out.add_term(ma | mb, &prod);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, e: &ScalarExpr) -> SuperFunction {
        self.map_coefficients(|c| c * e)
    }

    pub fn map_coefficients(&self, mut f: impl FnMut(&ScalarExpr) -> ScalarExpr) -> SuperFunction {
        SuperFunction {
            chart: self.chart.clone(),
            terms: self
                .terms
                .iter()
                .filter_map(|(m, e)| {
                    let v = f(e);
                    (!v.is_zero()).then_some((*m, v))
                })
                .collect(),
        }
    }

    /// Left graded derivative ∂/∂θ^(a+1).
    pub fn odd_partial(&self, a: usize) -> Result<SuperFunction> {
        if a >= self.chart.n() {
            return Err(Error::IndexOutOfRange { index: a, len: self.chart.n() });
        }
        let bit = 1u64 << a;
        let below = bit - 1;
        let mut out = SuperFunction::zero(&self.chart);
        for (m, e) in &self.terms {
            if m & bit == 0 {
                continue;
            }
            let neg = (m & below).count_ones() % 2 == 1;
            out.add_term(m & !bit, &if neg { -e } else { e.clone() });
        }
        Ok(out)
    }

    /// ∂/∂x^(i+1), coefficient-wise.
    pub fn even_partial(&self, i: usize) -> Result<SuperFunction> {
        let s = self.chart.even.get(i).ok_or(Error::IndexOutOfRange { index: i, len: self.chart.m() })?.clone();
        Ok(self.map_coefficients(|c| c.differentiate(&s)))
    }

    /// Inverse of an even superfunction with nowhere-vanishing body, via the nilpotent
    /// geometric series f₀⁻¹ Σ_j (−ν/f₀)^j, ν = f − f₀. The body is checked non-zero at
    /// every sample binding.
    pub fn invert_even(&self, samples: &[Binding]) -> Result<SuperFunction> {
        if !self.is_homogeneous_of(Parity::Even) {
            return Err(Error::NotEven);
        }
        let body = self.body();
        for (idx, b) in samples.iter().enumerate() {
            let v = body.evaluate_f64(b)?;
            if v == 0.0 || !v.is_finite() {
                return Err(Error::ZeroBody(idx));
            }
        }
        if body.is_zero() {
            return Err(Error::ZeroBody(0));
        }
        let inv_body = body.pow(-1);
        let mut nu = self.clone();
        nu.terms.remove(&0);
        let step = nu.scale(&-&inv_body);
        let one = SuperFunction::scalar(&self.chart, ScalarExpr::one());
        let mut sum = one.clone();
        let mut power = one;
        for _ in 0..(self.chart.n() / 2) {
            power = power.wedge(&step)?;
            if power.is_zero() {
                break;
            }
            sum = &sum + &power;
        }
        Ok(sum.scale(&inv_body))
    }

    pub fn substitute(&self, map: &BTreeMap<Symbol, ScalarExpr>) -> SuperFunction {
        self.map_coefficients(|c| c.substitute(map))
    }

    pub fn parse(chart: &Arc<SuperChart>, text: &str) -> Result<SuperFunction> {
        Self::from_ast(chart, &parse_ast(text)?)
    }

    fn from_ast(chart: &Arc<SuperChart>, ast: &Ast) -> Result<SuperFunction> {
        let bad = |msg: &str| Error::Parse { pos: 0, msg: msg.to_string() };
        Ok(match ast {
            Ast::Ident(name) => match chart.odd_index(name) {
                Some(a) => Self::generator(chart, a)?,
                None => Self::scalar(chart, ScalarExpr::symbol(name)),
            },
            Ast::Num(_) | Ast::Call(..) => {
                if mentions_odd(chart, ast) {
                    return Err(bad("odd generator inside a function call"));
                }
                Self::scalar(chart, ScalarExpr::from_ast(ast)?)
            }
            Ast::Add(a, b) => &Self::from_ast(chart, a)? + &Self::from_ast(chart, b)?,
            Ast::Sub(a, b) => &Self::from_ast(chart, a)? - &Self::from_ast(chart, b)?,
            Ast::Mul(a, b) => Self::from_ast(chart, a)?.wedge(&Self::from_ast(chart, b)?)?,
            Ast::Neg(a) => -&Self::from_ast(chart, a)?,
            Ast::Div(a, b) => {
                if mentions_odd(chart, b) {
                    return Err(bad("division by an odd expression"));
                }
                Self::from_ast(chart, a)?.scale(&ScalarExpr::from_ast(b)?.pow(-1))
            }
            Ast::Pow(a, k) => {
                if mentions_odd(chart, a) {
                    if *k < 0 {
                        return Err(bad("negative power of a superfunction"));
                    }
                    let base = Self::from_ast(chart, a)?;
                    let mut acc = Self::scalar(chart, ScalarExpr::one());
                    for _ in 0..*k {
                        acc = acc.wedge(&base)?;
                    }
                    acc
                } else {
                    Self::scalar(chart, ScalarExpr::from_ast(ast)?)
                }
            }
        })
    }
}

fn mentions_odd(chart: &SuperChart, ast: &Ast) -> bool {
    match ast {
        Ast::Num(_) => false,
        Ast::Ident(n) => chart.odd_index(n).is_some(),
        Ast::Add(a, b) | Ast::Sub(a, b) | Ast::Mul(a, b) | Ast::Div(a, b) => mentions_odd(chart, a) || mentions_odd(chart, b),
        Ast::Neg(a) | Ast::Pow(a, _) | Ast::Call(_, a) => mentions_odd(chart, a),
    }
}

impl<'a> Add<&'a SuperFunction> for &'a SuperFunction {
    type Output = SuperFunction;
    fn add(self, rhs: &SuperFunction) -> SuperFunction {
        self.check_chart(rhs).expect("adding superfunctions on different charts");
        let mut out = self.clone();
        for (m, e) in &rhs.terms {
            out.add_term(*m, e);
        }
        out
    }
}

impl<'a> Sub<&'a SuperFunction> for &'a SuperFunction {
    type Output = SuperFunction;
    fn sub(self, rhs: &SuperFunction) -> SuperFunction {
        self + &(-rhs)
    }
}

impl Neg for &SuperFunction {
    type Output = SuperFunction;
    fn neg(self) -> SuperFunction {
        self.map_coefficients(|c| -c)
    }
}

impl<'a> Mul<&'a SuperFunction> for &'a SuperFunction {
    type Output = SuperFunction;
    fn mul(self, rhs: &SuperFunction) -> SuperFunction {
        self.wedge(rhs).expect("multiplying superfunctions on different charts")
    }
}

impl fmt::Display for SuperFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, e)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let simple = e.as_constant().map(|c| !c.is_negative()).unwrap_or(false)
                || e.as_symbol().is_some();
            if *m == 0 {
                write!(f, "({e})")?;
                continue;
            }
            let mut gens = Vec::new();
            let mut rest = *m;
            while rest != 0 {
                let b = rest.trailing_zeros() as usize;
                gens.push(self.chart.odd[b].clone());
                rest &= rest - 1;
            }
            if e.is_one() {
                write!(f, "{}", gens.join("*"))?;
            } else if simple {
                write!(f, "{e}*{}", gens.join("*"))?;
            } else {
                write!(f, "({e})*{}", gens.join("*"))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for SuperFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SuperFunction[{},{}]({self})", self.chart.m(), self.chart.n())
    }
}
