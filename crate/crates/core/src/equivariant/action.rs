use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::FMatrix;
use crate::scalar::{Binding, ScalarExpr, Symbol};
use crate::superalg::{Parity, SuperChart, SuperFunction, SuperVectorField};

/// Infinitesimal action of a Lie algebra with `dim_g` generators on a chart: base
/// components T_α^i(x) and a linear fiber action U_{αB}^A(x).
#[derive(Clone, Debug)]
pub struct ActionSpec {
    pub chart: Arc<SuperChart>,
    /// `base[α][i]` = T_α^i.
    pub base: Vec<Vec<ScalarExpr>>,
    /// `fiber[α][B][A]` = U_{αB}^A.
    pub fiber: Vec<Vec<Vec<ScalarExpr>>>,
}

impl ActionSpec {
    pub fn new(chart: &Arc<SuperChart>, base: Vec<Vec<ScalarExpr>>, fiber: Vec<Vec<Vec<ScalarExpr>>>) -> Result<Self> {
        let spec = ActionSpec { chart: chart.clone(), base, fiber };
        spec.check_shapes()?;
        Ok(spec)
    }

    /// Action lifted to the cotangent bundle, U_{αB}^A = ∂T_α^A/∂x^B.
    pub fn tautological(chart: &Arc<SuperChart>, base: Vec<Vec<ScalarExpr>>) -> Result<Self> {
        if chart.n() != chart.m() {
            return Err(Error::NotTautological { m: chart.m(), n: chart.n() });
        }
        let fiber = base
            .iter()
            .map(|t| {
                (0..chart.n())
                    .map(|b| (0..chart.n()).map(|a| t[a].differentiate(&chart.even()[b])).collect())
                    .collect()
            })
            .collect();
        Self::new(chart, base, fiber)
    }

    pub fn dim_g(&self) -> usize {
        self.base.len()
    }

    fn check_shapes(&self) -> Result<()> {
        let (m, n) = (self.chart.m(), self.chart.n());
        if self.fiber.len() != self.base.len() {
            return Err(Error::ShapeMismatch(format!("{} base generators vs {} fiber generators", self.base.len(), self.fiber.len())));
        }
        for (alpha, t) in self.base.iter().enumerate() {
            if t.len() != m {
                return Err(Error::ShapeMismatch(format!("T[{alpha}] has {} entries, chart has m = {m}", t.len())));
            }
        }
        for (alpha, u) in self.fiber.iter().enumerate() {
            if u.len() != n || u.iter().any(|row| row.len() != n) {
                return Err(Error::ShapeMismatch(format!("U[{alpha}] must be {n}x{n}")));
            }
        }
        Ok(())
    }

    fn check_xi(&self, xi: &[ScalarExpr]) -> Result<()> {
        if xi.len() != self.dim_g() {
            return Err(Error::ShapeMismatch(format!("xi has {} components, algebra has {}", xi.len(), self.dim_g())));
        }
        Ok(())
    }

    /// Components V^i = ξ^α T_α^i of ξ*.
    pub fn base_components(&self, xi: &[ScalarExpr]) -> Result<Vec<ScalarExpr>> {
        self.check_xi(xi)?;
        Ok((0..self.chart.m()).map(|i| xi.iter().zip(&self.base).map(|(x, t)| x * &t[i]).sum()).collect())
    }

    /// Fiber matrix ξ^α U_{αB}^A, indexed `[B][A]`.
    pub fn fiber_matrix(&self, xi: &[ScalarExpr]) -> Result<Vec<Vec<ScalarExpr>>> {
        self.check_xi(xi)?;
        let n = self.chart.n();
        Ok((0..n)
            .map(|b| (0..n).map(|a| xi.iter().zip(&self.fiber).map(|(x, u)| x * &u[b][a]).sum()).collect())
            .collect())
    }

    /// ξ* = ξ^α T_α^i ∂/∂x^i, an even field with no θ-components.
    pub fn fundamental_field(&self, xi: &[ScalarExpr]) -> Result<SuperVectorField> {
        let v = self.base_components(xi)?;
        let mut f = SuperVectorField::zero(&self.chart, Parity::Even);
        for (i, c) in v.into_iter().enumerate() {
            f.set_even(i, SuperFunction::scalar(&self.chart, c));
        }
        Ok(f)
    }

    /// ξ̂* = ξ^α T_α^i ∂/∂x^i + ξ^α θ^B U_{αB}^A ∂/∂θ^A.
    pub fn lifted_field(&self, xi: &[ScalarExpr]) -> Result<SuperVectorField> {
        let mut f = self.fundamental_field(xi)?;
        let u = self.fiber_matrix(xi)?;
        let n = self.chart.n();
        for a in 0..n {
            let comp = SuperFunction::from_terms(&self.chart, (0..n).map(|b| (1u64 << b, u[b][a].clone())));
            f.set_odd(a, comp);
        }
        Ok(f)
    }

    /// Sampled closure check: at each point, every bracket [ξ*_α, ξ*_β] should be a
    /// constant combination of the generators. Returns the worst least-squares residual.
    pub fn closure_residual(&self, samples: &[Binding]) -> Result<f64> {
        let g = self.dim_g();
        let m = self.chart.m();
        let gens: Vec<SuperVectorField> = (0..g)
            .map(|a| {
                let xi: Vec<ScalarExpr> = (0..g).map(|b| ScalarExpr::int((a == b) as i64)).collect();
                self.fundamental_field(&xi)
            })
            .collect::<Result<_>>()?;
        let mut worst: f64 = 0.0;
        for a in 0..g {
            for b in a + 1..g {
                let br = gens[a].graded_commutator(&gens[b])?;
                // stack equations over all samples: sum_c k_c T_c^i(p) = br^i(p)
                let mut rows: Vec<Vec<f64>> = Vec::new();
                let mut rhs: Vec<f64> = Vec::new();
                for p in samples {
                    for i in 0..m {
                        rows.push((0..g).map(|c| self.base[c][i].evaluate_f64(p)).collect::<Result<_>>()?);
                        rhs.push(br.even_component(i).body().evaluate_f64(p)?);
                    }
                }
                let ata = FMatrix::from_fn(g, g, |r, c| rows.iter().map(|row| row[r] * row[c]).sum());
                let atb: Vec<f64> = (0..g).map(|r| rows.iter().zip(&rhs).map(|(row, y)| row[r] * y).sum()).collect();
                let k = ata.solve(&atb).unwrap_or_else(|_| vec![0.0; g]);
                for (row, y) in rows.iter().zip(&rhs) {
                    let fit: f64 = row.iter().zip(&k).map(|(a, b)| a * b).sum();
                    worst = worst.max((fit - y).abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Lie parameters as symbols, the usual ξ for symbolic checks.
pub fn symbolic_xi(params: &[Symbol]) -> Vec<ScalarExpr> {
    params.iter().map(|s| ScalarExpr::from_symbol(s.clone())).collect()
}
