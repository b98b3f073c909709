use std::fmt;
use std::sync::Arc;

use super::function::{Parity, SuperChart, SuperFunction};
use crate::error::{Error, Result};
use crate::scalar::ScalarExpr;

/// Graded derivation a^i ∂/∂x^i + b^A ∂/∂θ^A with coefficients on the left.
#[derive(Clone, PartialEq)]
pub struct SuperVectorField {
    chart: Arc<SuperChart>,
    parity: Parity,
    even: Vec<SuperFunction>,
    odd: Vec<SuperFunction>,
}

impl SuperVectorField {
    pub fn zero(chart: &Arc<SuperChart>, parity: Parity) -> Self {
        SuperVectorField {
            chart: chart.clone(),
            parity,
            even: vec![SuperFunction::zero(chart); chart.m()],
            odd: vec![SuperFunction::zero(chart); chart.n()],
        }
    }

    pub fn from_components(
        chart: &Arc<SuperChart>,
        parity: Parity,
        even: Vec<SuperFunction>,
        odd: Vec<SuperFunction>,
    ) -> Result<Self> {
        if even.len() != chart.m() || odd.len() != chart.n() {
            return Err(Error::DimensionMismatch(format!(
                "field needs {} even and {} odd components, got {} and {}",
                chart.m(),
                chart.n(),
                even.len(),
                odd.len()
            )));
        }
        Ok(SuperVectorField { chart: chart.clone(), parity, even, odd })
    }

    /// Constant coordinate derivation ∂/∂x^(i+1).
    pub fn d_even(chart: &Arc<SuperChart>, i: usize) -> Self {
        let mut f = Self::zero(chart, Parity::Even);
        f.even[i] = SuperFunction::scalar(chart, ScalarExpr::one());
        f
    }

    /// Constant odd derivation ∂/∂θ^(a+1).
    pub fn d_odd(chart: &Arc<SuperChart>, a: usize) -> Self {
        let mut f = Self::zero(chart, Parity::Odd);
        f.odd[a] = SuperFunction::scalar(chart, ScalarExpr::one());
        f
    }

    pub fn chart(&self) -> &Arc<SuperChart> {
        &self.chart
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Coefficient of ∂/∂x^(i+1), i.e. X(x^i).
    pub fn even_component(&self, i: usize) -> &SuperFunction {
        &self.even[i]
    }

    /// Coefficient of ∂/∂θ^(a+1), i.e. X(θ^a).
    pub fn odd_component(&self, a: usize) -> &SuperFunction {
        &self.odd[a]
    }

    pub fn set_even(&mut self, i: usize, f: SuperFunction) {
        self.even[i] = f;
    }

    pub fn set_odd(&mut self, a: usize, f: SuperFunction) {
        self.odd[a] = f;
    }

    pub fn even_components(&self) -> &[SuperFunction] {
        &self.even
    }

    pub fn odd_components(&self) -> &[SuperFunction] {
        &self.odd
    }

    pub fn is_zero(&self) -> bool {
        self.even.iter().chain(self.odd.iter()).all(SuperFunction::is_zero)
    }

    /// Each a^i has the field's parity and each b^A the opposite one.
    pub fn parity_consistent(&self) -> bool {
        let flipped = self.parity.add(Parity::Odd);
        self.even.iter().all(|a| a.is_homogeneous_of(self.parity)) && self.odd.iter().all(|b| b.is_homogeneous_of(flipped))
    }

    fn check_chart(&self, chart: &Arc<SuperChart>) -> Result<()> {
        if Arc::ptr_eq(&self.chart, chart) || *self.chart == **chart {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("vector field and superfunction live on different charts".into()))
        }
    }

    pub fn apply(&self, f: &SuperFunction) -> Result<SuperFunction> {
        self.check_chart(f.chart())?;
        let mut out = SuperFunction::zero(&self.chart);
        for (i, a) in self.even.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let d = f.even_partial(i)?;
            if !d.is_zero() {
                out = &out + &a.wedge(&d)?;
            }
        }
        for (k, b) in self.odd.iter().enumerate() {
            if b.is_zero() {
                continue;
            }
            let d = f.odd_partial(k)?;
            if !d.is_zero() {
                out = &out + &b.wedge(&d)?;
            }
        }
        Ok(out)
    }

    /// [X,Y] = X∘Y − (−1)^{|X||Y|} Y∘X, assembled from its action on coordinates.
    pub fn graded_commutator(&self, other: &SuperVectorField) -> Result<SuperVectorField> {
        self.check_chart(&other.chart)?;
        let both_odd = self.parity.is_odd() && other.parity.is_odd();
        let combine = |x_of_y: SuperFunction, y_of_x: SuperFunction| {
            if both_odd {
                &x_of_y + &y_of_x
            } else {
                &x_of_y - &y_of_x
            }
        };
        let mut out = SuperVectorField::zero(&self.chart, self.parity.add(other.parity));
        for i in 0..self.chart.m() {
            out.even[i] = combine(self.apply(&other.even[i])?, other.apply(&self.even[i])?);
        }
        for a in 0..self.chart.n() {
            out.odd[a] = combine(self.apply(&other.odd[a])?, other.apply(&self.odd[a])?);
        }
        Ok(out)
    }

    pub fn scale(&self, e: &ScalarExpr) -> SuperVectorField {
        SuperVectorField {
            chart: self.chart.clone(),
            parity: self.parity,
            even: self.even.iter().map(|c| c.scale(e)).collect(),
            odd: self.odd.iter().map(|c| c.scale(e)).collect(),
        }
    }

    /// Componentwise difference; parities must agree.
    pub fn sub(&self, other: &SuperVectorField) -> Result<SuperVectorField> {
        self.check_chart(&other.chart)?;
        if self.parity != other.parity {
            return Err(Error::DimensionMismatch("subtracting fields of different parity".into()));
        }
        Ok(SuperVectorField {
            chart: self.chart.clone(),
            parity: self.parity,
            even: self.even.iter().zip(&other.even).map(|(a, b)| a - b).collect(),
            odd: self.odd.iter().zip(&other.odd).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &SuperVectorField) -> Result<SuperVectorField> {
        self.sub(&other.scale(&ScalarExpr::int(-1)))
    }

    pub fn map_components(&self, mut f: impl FnMut(&SuperFunction) -> SuperFunction) -> SuperVectorField {
        SuperVectorField {
            chart: self.chart.clone(),
            parity: self.parity,
            even: self.even.iter().map(&mut f).collect(),
            odd: self.odd.iter().map(&mut f).collect(),
        }
    }

    /// Names of the coordinates whose components are non-zero, for residual reports.
    pub fn nonzero_components(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, a) in self.even.iter().enumerate() {
            if !a.is_zero() {
                out.push(format!("d/d{}: {}", self.chart.even()[i], a));
            }
        }
        for (k, b) in self.odd.iter().enumerate() {
            if !b.is_zero() {
                out.push(format!("d/d{}: {}", self.chart.odd_names()[k], b));
            }
        }
        out
    }
}

impl fmt::Debug for SuperVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SuperVectorField[{:?}]{{{}}}", self.parity, self.nonzero_components().join("; "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> Arc<SuperChart> {
        SuperChart::new(&["x", "y"], 2)
    }

    #[test]
    fn odd_derivation_on_product() {
        let c = chart();
        let x = SuperVectorField::d_odd(&c, 0);
        let f = SuperFunction::parse(&c, "th1*th2").unwrap();
        assert_eq!(x.apply(&f).unwrap(), SuperFunction::parse(&c, "th2").unwrap());
    }

    #[test]
    fn euler_field() {
        let c = chart();
        let mut x = SuperVectorField::zero(&c, Parity::Even);
        x.set_even(0, SuperFunction::parse(&c, "x").unwrap());
        let f = SuperFunction::parse(&c, "x^2").unwrap();
        assert_eq!(x.apply(&f).unwrap(), SuperFunction::parse(&c, "2*x^2").unwrap());
    }

    #[test]
    fn constant_odd_derivations_anticommute() {
        let c = chart();
        let d = SuperVectorField::d_odd(&c, 0);
        assert!(d.graded_commutator(&d).unwrap().is_zero());
    }

    #[test]
    fn euler_against_translation() {
        let c = chart();
        let mut x = SuperVectorField::zero(&c, Parity::Even);
        x.set_even(0, SuperFunction::parse(&c, "x").unwrap());
        let dx = SuperVectorField::d_even(&c, 0);
        let br = x.graded_commutator(&dx).unwrap();
        assert_eq!(br, dx.scale(&ScalarExpr::int(-1)));
    }

    #[test]
    fn parity_check() {
        let c = chart();
        let mut q = SuperVectorField::zero(&c, Parity::Odd);
        q.set_even(0, SuperFunction::parse(&c, "th1").unwrap());
        q.set_odd(0, SuperFunction::parse(&c, "x").unwrap());
        assert!(q.parity_consistent());
        q.set_odd(1, SuperFunction::parse(&c, "th2").unwrap());
        assert!(!q.parity_consistent());
    }
}
