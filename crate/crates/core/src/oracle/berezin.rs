use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::equivariant::MetricData;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{Binding, CompiledExpr, ScalarExpr};
use crate::superalg::{SuperChart, SuperFunction};

use super::quadrature::{integrate, QuadResult, QuadratureOptions};

/// One coordinate patch: a parameter box, its metric and an orientation sign.
#[derive(Clone, Debug)]
pub struct OracleChart {
    pub metric: MetricData,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub orientation: i8,
    /// Measure-zero set left out of the box (poles, a seam), for the record.
    pub excluded: String,
}

impl OracleChart {
    pub fn new(metric: MetricData, lower: Vec<f64>, upper: Vec<f64>, orientation: i8) -> Result<Self> {
        let m = metric.chart.m();
        if lower.len() != m || upper.len() != m {
            return Err(Error::ShapeMismatch(format!("chart box needs {m} bounds per side")));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(b > a)) {
            return Err(Error::ShapeMismatch("chart box is degenerate".into()));
        }
        if orientation != 1 && orientation != -1 {
            return Err(Error::ShapeMismatch(format!("orientation must be ±1, got {orientation}")));
        }
        Ok(OracleChart { metric, lower, upper, orientation, excluded: String::new() })
    }

    pub fn excluding(mut self, what: &str) -> Self {
        self.excluded = what.to_string();
        self
    }

    pub fn chart(&self) -> &Arc<SuperChart> {
        &self.metric.chart
    }
}

#[derive(Clone, Debug)]
pub struct ChartedManifold {
    pub m: usize,
    pub charts: Vec<OracleChart>,
}

impl ChartedManifold {
    pub fn new(charts: Vec<OracleChart>) -> Result<Self> {
        let m = charts.first().map(|c| c.chart().m()).ok_or_else(|| Error::ShapeMismatch("manifold needs a chart".into()))?;
        if charts.iter().any(|c| c.chart().m() != m) {
            return Err(Error::ShapeMismatch("charts disagree on the dimension".into()));
        }
        Ok(ChartedManifold { m, charts })
    }

    pub fn single(chart: OracleChart) -> Self {
        ChartedManifold { m: chart.chart().m(), charts: vec![chart] }
    }
}

/// Local density det^{1/2}(h) / det^{1/2}(H) of the canonical section Θ.
#[derive(Clone, Debug)]
pub struct BerezinianSection {
    pub h: Matrix<ScalarExpr>,
    pub big_h: Matrix<ScalarExpr>,
    det_h: ScalarExpr,
    det_big_h: ScalarExpr,
}

impl BerezinianSection {
    /// H = σᵀ h σ.
    pub fn new(h: &MetricData, sigma: &Matrix<ScalarExpr>) -> Result<Self> {
        if sigma.rows() != h.h.rows() {
            return Err(Error::ShapeMismatch(format!("sigma has {} rows, metric is {}x{}", sigma.rows(), h.h.rows(), h.h.rows())));
        }
        let big_h = sigma.transpose().matmul(&h.h)?.matmul(sigma)?;
        Ok(Self::from_metrics(h.h.clone(), big_h)?)
    }

    pub fn tautological(h: &MetricData) -> Self {
        Self::from_metrics(h.h.clone(), h.h.clone()).expect("square metric")
    }

    pub fn from_metrics(h: Matrix<ScalarExpr>, big_h: Matrix<ScalarExpr>) -> Result<Self> {
        let det_h = h.det_expansion()?;
        let det_big_h = big_h.det_expansion()?;
        Ok(BerezinianSection { h, big_h, det_h, det_big_h })
    }

    /// Whether the density is identically 1 (the tautological case H = h).
    pub fn is_unit(&self) -> bool {
        self.det_h == self.det_big_h
    }

    pub fn det_h(&self) -> &ScalarExpr {
        &self.det_h
    }

    pub fn det_big_h(&self) -> &ScalarExpr {
        &self.det_big_h
    }

    pub fn density(&self, at: &Binding) -> Result<f64> {
        let (a, b) = (self.det_h.evaluate_f64(at)?, self.det_big_h.evaluate_f64(at)?);
        if !(a > 0.0) {
            return Err(Error::NotPositiveDefinite(0));
        }
        if !(b > 0.0) {
            return Err(Error::NotPositiveDefinite(1));
        }
        Ok((a / b).sqrt())
    }

    pub(crate) fn compile(&self, chart: &SuperChart, params: &Binding) -> Result<CompiledDensity> {
        if self.is_unit() {
            return Ok(CompiledDensity::Unit);
        }
        Ok(CompiledDensity::Ratio(
            CompiledExpr::new(&self.det_h, chart.even(), params)?,
            CompiledExpr::new(&self.det_big_h, chart.even(), params)?,
        ))
    }
}

pub(crate) enum CompiledDensity {
    Unit,
    Ratio(CompiledExpr, CompiledExpr),
}

impl CompiledDensity {
    /// None when either determinant is not positive.
    pub(crate) fn eval(&self, x: &[f64]) -> Option<f64> {
        match self {
            CompiledDensity::Unit => Some(1.0),
            CompiledDensity::Ratio(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                (a > 0.0 && b > 0.0).then(|| (a / b).sqrt())
            }
        }
    }
}

/// ∫ f over a chart box, with the chart's even coordinates as integration variables
/// and `params` fixing everything else.
pub fn quadrature(f: &ScalarExpr, chart: &OracleChart, params: &Binding, opts: &QuadratureOptions) -> Result<QuadResult> {
    let c = CompiledExpr::new(f, chart.chart().even(), params)?;
    integrate(&|x: &[f64]| c.eval(x), &chart.lower, &chart.upper, opts)
}

/// Berezin integral of F against Θ: the top θ-coefficient times the density,
/// integrated chart by chart. `sections[k]` and `fs[k]` belong to `manifold.charts[k]`.
pub fn global_berezin(
    manifold: &ChartedManifold,
    sections: &[BerezinianSection],
    fs: &[SuperFunction],
    params: &Binding,
    opts: &QuadratureOptions,
) -> Result<QuadResult> {
    let k = manifold.charts.len();
    if sections.len() != k || fs.len() != k {
        return Err(Error::ShapeMismatch(format!("{k} charts, {} sections, {} integrands", sections.len(), fs.len())));
    }
    let mut total = QuadResult { value: 0.0, error: 0.0, cells: 0 };
    for (idx, ((chart, section), f)) in manifold.charts.iter().zip(sections).zip(fs).enumerate() {
        if f.chart().m() != chart.chart().m() || f.chart().even() != chart.chart().even() {
            return Err(Error::ShapeMismatch(format!("integrand {idx} is not on chart {idx}")));
        }
        let top = f.top_component();
        if top.is_zero() {
            continue;
        }
        let top = CompiledExpr::new(&top, chart.chart().even(), params)?;
        let density = section.compile(chart.chart(), params)?;
        let bad = AtomicBool::new(false);
        let r = integrate(
            &|x: &[f64]| match density.eval(x) {
                Some(d) => top.eval(x) * d,
                None => {
                    bad.store(true, Ordering::Relaxed);
                    0.0
                }
            },
            &chart.lower,
            &chart.upper,
            opts,
        )?;
        if bad.load(Ordering::Relaxed) {
            return Err(Error::NotPositiveDefinite(idx));
        }
        total.value += chart.orientation as f64 * r.value;
        total.error += r.error;
        total.cells += r.cells;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivariant::tautological_chart;
    use crate::localization::{super_localize, LocalizationSetup};
    use std::f64::consts::{E, PI};

    fn e(s: &str) -> ScalarExpr {
        ScalarExpr::parse(s).unwrap()
    }

    fn sphere_chart() -> OracleChart {
        let chart = tautological_chart(&["theta", "ph"]);
        let h = MetricData::new(&chart, Matrix::diagonal(&[ScalarExpr::one(), e("sin(theta)^2")])).unwrap();
        OracleChart::new(h, vec![0.0, 0.0], vec![PI, 2.0 * PI], 1).unwrap().excluding("poles and the seam ph = 0")
    }

    #[test]
    fn zero_top_component_vanishes() {
        let c = sphere_chart();
        let f = SuperFunction::parse(c.chart(), "exp(cos(theta)) + sin(ph)*th1").unwrap();
        let s = BerezinianSection::tautological(&c.metric);
        let r = global_berezin(&ChartedManifold::single(c), &[s], &[f], &Binding::new(), &QuadratureOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn volume_form_gives_area() {
        // τ(sin ϑ dϑ∧dφ) = sin(ϑ) θ¹θ²
        let c = sphere_chart();
        let s = BerezinianSection::tautological(&c.metric);
        assert!(s.is_unit());
        let f = SuperFunction::parse(c.chart(), "sin(theta)*th1*th2").unwrap();
        let r = global_berezin(&ChartedManifold::single(c), &[s], &[f], &Binding::new(), &QuadratureOptions::default()).unwrap();
        assert!((r.value - 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn round_sphere_area_by_quadrature() {
        let c = sphere_chart();
        let sqrt_det = e("sin(theta)");
        let r = quadrature(&sqrt_det, &c, &Binding::new(), &QuadratureOptions::default()).unwrap();
        assert!((r.value - 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn non_tautological_density() {
        // σ = diag(2, 1) on a flat box: H = diag(4, 1), density 1/2
        let chart = tautological_chart(&["x", "y"]);
        let h = MetricData::euclidean(&chart);
        let sigma = Matrix::diagonal(&[ScalarExpr::int(2), ScalarExpr::one()]);
        let s = BerezinianSection::new(&h, &sigma).unwrap();
        assert!(!s.is_unit());
        assert!((s.density(&Binding::new()).unwrap() - 0.5).abs() < 1e-15);
        let c = OracleChart::new(h, vec![0.0, 0.0], vec![1.0, 1.0], 1).unwrap();
        let f = SuperFunction::parse(&chart, "exp(x+y)*th1*th2").unwrap();
        let r = global_berezin(&ChartedManifold::single(c), &[s], &[f], &Binding::new(), &QuadratureOptions::default()).unwrap();
        assert!((r.value - 0.5 * (E - 1.0).powi(2)).abs() < 1e-10);
    }

    #[test]
    fn linear_in_f() {
        let c = sphere_chart();
        let s = BerezinianSection::tautological(&c.metric);
        let m = ChartedManifold::single(c.clone());
        let f = SuperFunction::parse(c.chart(), "cos(theta)^2*sin(theta)*th1*th2").unwrap();
        let g = SuperFunction::parse(c.chart(), "sin(ph)^2*sin(theta)*th1*th2 + th1").unwrap();
        let fg = SuperFunction::parse(c.chart(), "(cos(theta)^2 + 3*sin(ph)^2)*sin(theta)*th1*th2 + 3*th1").unwrap();
        let opts = QuadratureOptions::default();
        let b = Binding::new();
        let a = global_berezin(&m, &[s.clone()], &[f], &b, &opts).unwrap().value;
        let bb = global_berezin(&m, &[s.clone()], &[g], &b, &opts).unwrap().value;
        let ab = global_berezin(&m, &[s], &[fg], &b, &opts).unwrap().value;
        assert!((ab - (a + 3.0 * bb)).abs() < 1e-9);
    }

    #[test]
    fn degenerate_metric_is_reported() {
        let chart = tautological_chart(&["x", "y"]);
        let h = MetricData::new(&chart, Matrix::diagonal(&[ScalarExpr::one(), e("x")])).unwrap();
        let s = BerezinianSection::new(&h, &Matrix::diagonal(&[ScalarExpr::int(2), ScalarExpr::one()])).unwrap();
        let c = OracleChart::new(h, vec![-1.0, 0.0], vec![1.0, 1.0], 1).unwrap();
        let f = SuperFunction::parse(&chart, "th1*th2").unwrap();
        let r = global_berezin(&ChartedManifold::single(c), &[s], &[f], &Binding::new(), &QuadratureOptions::default());
        assert!(matches!(r, Err(Error::NotPositiveDefinite(0))));
    }

    /// Height function on the round sphere: oracle in spherical angles against
    /// localization in the two stereographic charts.
    #[test]
    fn duistermaat_heckman_cross_check() {
        let c = sphere_chart();
        let s = BerezinianSection::tautological(&c.metric);
        // F = e^{−tZ}(1 + ω) with Z = cos ϑ and ω = sin ϑ dϑ∧dφ
        let f = SuperFunction::parse(c.chart(), "exp(-t*cos(theta)) + exp(-t*cos(theta))*sin(theta)*th1*th2").unwrap();
        let params = Binding::new().with_f64("t", 1.0);
        let oracle = global_berezin(&ChartedManifold::single(c), &[s], &[f], &params, &QuadratureOptions::default()).unwrap().value;
        let exact = 2.0 * PI * (E - 1.0 / E);
        assert!((oracle - exact).abs() / exact < 1e-10);

        let chart = tautological_chart(&["x", "y"]);
        let spec = crate::equivariant::ActionSpec::tautological(&chart, vec![vec![e("-y"), e("x")]]).unwrap();
        let xi = vec![e("t")];
        let q = crate::equivariant::tautological_q(&spec, &xi).unwrap();
        let samples = vec![Binding::new().with_f64("x", 0.3).with_f64("y", -0.7).with_f64("t", 1.0)];
        let conf = "4*(1+x^2+y^2)^(-2)";
        let metric = MetricData::new(&chart, Matrix::diagonal(&[e(conf), e(conf)])).unwrap();
        let mut total = 0.0;
        // North chart: Z = (1 − r²)/(1 + r²); south: Z = −(1 − r²)/(1 + r²), reversed orientation.
        for (sign, orientation) in [("", 1), ("-", -1)] {
            let z = format!("{sign}(1-x^2-y^2)*(1+x^2+y^2)^(-1)");
            let w = format!("{orientation}*{conf}");
            let text = format!("exp(-t*{z}) + exp(-t*{z})*{w}*th1*th2");
            let f = SuperFunction::parse(&chart, &text).unwrap();
            let params = Binding::new().with_f64("t", 1.0);
            let points = vec![Binding::new().with_rational("x", crate::scalar::rational(0, 1)).with_rational("y", crate::scalar::rational(0, 1))];
            let setup = LocalizationSetup {
                spec: &spec,
                xi: &xi,
                params: &params,
                metric: &metric,
                points: &points,
                orientation: orientation as i8,
                samples: &samples,
            };
            total += super_localize(&f, &q, &setup).unwrap().total;
        }
        assert!((total - oracle).abs() / oracle < 1e-6, "localized {total}, oracle {oracle}");
    }
}
