//! Grassmann algebra with f64 coefficients, used for pointwise numerical checks.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::scalar::{Binding, CompiledExpr, Symbol};
use crate::superalg::{koszul_sign, OddMask, SuperFunction};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NumGrassmann {
    pub terms: BTreeMap<OddMask, f64>,
}

impl NumGrassmann {
    pub fn scalar(c: f64) -> Self {
        let mut g = NumGrassmann::default();
        g.add_term(0, c);
        g
    }

    pub fn add_term(&mut self, mask: OddMask, c: f64) {
        if c != 0.0 {
            let e = self.terms.entry(mask).or_insert(0.0);
            *e += c;
            if *e == 0.0 {
                self.terms.remove(&mask);
            }
        }
    }

    pub fn add(&self, other: &NumGrassmann) -> NumGrassmann {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, *c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> NumGrassmann {
        NumGrassmann { terms: self.terms.iter().map(|(m, c)| (*m, c * s)).collect() }
    }

    pub fn mul(&self, other: &NumGrassmann) -> NumGrassmann {
        let mut out = NumGrassmann::default();
        for (ma, a) in &self.terms {
            for (mb, b) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let p = a * b;
                out.add_term(ma | mb, if koszul_sign(*ma, *mb) { -p } else { p });
            }
        }
        out
    }

    /// Left derivative ∂/∂θ^(a+1).
    pub fn odd_partial(&self, a: usize) -> NumGrassmann {
        let bit = 1u64 << a;
        let mut out = NumGrassmann::default();
        for (m, c) in &self.terms {
            if m & bit != 0 {
                let neg = (m & (bit - 1)).count_ones() % 2 == 1;
                out.add_term(m & !bit, if neg { -c } else { *c });
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &NumGrassmann) -> f64 {
        self.add(&other.scale(-1.0)).terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }
}

/// A superfunction with each coefficient compiled against the even coordinates.
pub struct CompiledSuperFunction {
    terms: Vec<(OddMask, CompiledExpr)>,
}

impl CompiledSuperFunction {
    pub fn new(f: &SuperFunction, fixed: &Binding) -> Result<Self> {
        let slots: Vec<Symbol> = f.chart().even().to_vec();
        let terms = f.terms().map(|(m, e)| Ok((m, CompiledExpr::new(e, &slots, fixed)?))).collect::<Result<_>>()?;
        Ok(CompiledSuperFunction { terms })
    }

    pub fn eval(&self, x: &[f64]) -> NumGrassmann {
        let mut g = NumGrassmann::default();
        for (m, c) in &self.terms {
            g.add_term(*m, c.eval(x));
        }
        g
    }

    /// Value of F(x, θ M): each θ^A is replaced by the row combination Σ_B θ^B M[B][A].
    pub fn eval_pulled(&self, x: &[f64], theta_map: &[Vec<f64>]) -> NumGrassmann {
        let n = theta_map.len();
        let images: Vec<NumGrassmann> = (0..n)
            .map(|a| {
                let mut g = NumGrassmann::default();
                for (b, row) in theta_map.iter().enumerate() {
                    g.add_term(1u64 << b, row[a]);
                }
                g
            })
            .collect();
        let mut out = NumGrassmann::default();
        for (m, c) in &self.terms {
            let v = c.eval(x);
            if v == 0.0 {
                continue;
            }
            let mut prod = NumGrassmann::scalar(v);
            let mut rest = *m;
            while rest != 0 {
                let a = rest.trailing_zeros() as usize;
                prod = prod.mul(&images[a]);
                rest &= rest - 1;
            }
            out = out.add(&prod);
        }
        out
    }
}
