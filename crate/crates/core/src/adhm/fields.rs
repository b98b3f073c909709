use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;

use super::complex::{commutator, is_anti_hermitian, mul, scale, CExpr, CMatrix};
use crate::equivariant::ActionSpec;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{sym, ScalarExpr, Symbol};
use crate::superalg::{Parity, SuperChart, SuperFunction, SuperVectorField};

/// One matrix-valued field, flattened to real coordinates. Hermitian blocks use the
/// real diagonal and the upper triangle; general blocks use every entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub even: &'static str,
    pub odd: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub hermitian: bool,
}

impl Block {
    fn names(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        for a in 0..self.rows {
            for b in 0..self.cols {
                if self.hermitian {
                    if a == b {
                        out.push(format!("{prefix}_{}{}", a + 1, b + 1));
                    } else if a < b {
                        out.push(format!("{prefix}_{}{}r", a + 1, b + 1));
                        out.push(format!("{prefix}_{}{}i", a + 1, b + 1));
                    }
                } else {
                    out.push(format!("{prefix}_{}{}r", a + 1, b + 1));
                    out.push(format!("{prefix}_{}{}i", a + 1, b + 1));
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        if self.hermitian {
            self.rows * self.rows
        } else {
            2 * self.rows * self.cols
        }
    }

    /// The block as a complex matrix of coordinate symbols with the given prefix.
    fn matrix(&self, prefix: &str) -> CMatrix {
        let s = |a: usize, b: usize, part: &str| ScalarExpr::symbol(&format!("{prefix}_{}{}{part}", a + 1, b + 1));
        Matrix::from_fn(self.rows, self.cols, |a, b| {
            if !self.hermitian {
                CExpr::new(s(a, b, "r"), s(a, b, "i"))
            } else if a == b {
                CExpr::real(s(a, a, ""))
            } else if a < b {
                CExpr::new(s(a, b, "r"), s(a, b, "i"))
            } else {
                CExpr::new(s(b, a, "r"), -&s(b, a, "i"))
            }
        })
    }

    /// Real components of a matrix in this block's coordinate order.
    fn flatten(&self, w: &CMatrix) -> Vec<ScalarExpr> {
        let mut out = Vec::new();
        for a in 0..self.rows {
            for b in 0..self.cols {
                if self.hermitian {
                    if a == b {
                        out.push(w[(a, a)].re.clone());
                    } else if a < b {
                        out.push(w[(a, b)].re.clone());
                        out.push(w[(a, b)].im.clone());
                    }
                } else {
                    out.push(w[(a, b)].re.clone());
                    out.push(w[(a, b)].im.clone());
                }
            }
        }
        out
    }
}

/// Flattened ADHM supermanifold chart. The matter sector is (B₁, B₂, I, J) with
/// partners (M₁, M₂, μ_I, μ_J); the full chart appends (H_ℝ, H_ℂ, φ̄) with partners
/// (χ_ℝ, χ_ℂ, η). Even coordinate i is paired with odd generator i.
#[derive(Clone, Debug)]
pub struct AdhmChart {
    pub k: usize,
    pub n: usize,
    pub full: bool,
    pub blocks: Vec<Block>,
    pub chart: Arc<SuperChart>,
}

impl AdhmChart {
    pub fn new(k: usize, n: usize, full: bool) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(Error::ShapeMismatch("k and N must be positive".into()));
        }
        let mut blocks = vec![
            Block { even: "b1", odd: "m1", rows: k, cols: k, hermitian: false },
            Block { even: "b2", odd: "m2", rows: k, cols: k, hermitian: false },
            Block { even: "i", odd: "mi", rows: k, cols: n, hermitian: false },
            Block { even: "j", odd: "mj", rows: n, cols: k, hermitian: false },
        ];
        if full {
            blocks.extend([
                Block { even: "hr", odd: "xr", rows: k, cols: k, hermitian: true },
                Block { even: "hc", odd: "xc", rows: k, cols: k, hermitian: false },
                Block { even: "pb", odd: "eta", rows: k, cols: k, hermitian: false },
            ]);
        }
        let even: Vec<Symbol> = blocks.iter().flat_map(|b| b.names(b.even)).map(|s| sym(&s)).collect();
        let odd: Vec<String> = blocks.iter().flat_map(|b| b.names(b.odd)).collect();
        if odd.len() > crate::superalg::MAX_ODD {
            return Err(Error::ShapeMismatch(format!("{} odd generators exceed the Grassmann kernel limit", odd.len())));
        }
        Ok(AdhmChart { k, n, full, blocks, chart: SuperChart::with_odd_names(even, odd) })
    }

    pub fn matter_dim(&self) -> usize {
        self.blocks[..4].iter().map(Block::dim).sum()
    }

    fn block(&self, name: &str) -> &Block {
        self.blocks.iter().find(|b| b.even == name).expect("known block")
    }

    /// A block as a matrix of even coordinates.
    pub fn even_matrix(&self, name: &str) -> CMatrix {
        let b = self.block(name);
        b.matrix(b.even)
    }

    /// A block's odd partner, with placeholder scalar symbols named after the generators.
    fn odd_matrix(&self, name: &str) -> CMatrix {
        let b = self.block(name);
        b.matrix(b.odd)
    }

    fn flatten_all(&self, parts: &BTreeMap<&str, CMatrix>) -> Vec<ScalarExpr> {
        self.blocks.iter().flat_map(|b| b.flatten(&parts[b.even])).collect()
    }

    /// Turn an expression linear in the odd placeholder symbols into a superfunction.
    fn odd_linear(&self, e: &ScalarExpr) -> Result<SuperFunction> {
        let chart = &self.chart;
        let zero: BTreeMap<Symbol, ScalarExpr> = chart.odd_names().iter().map(|s| (sym(s), ScalarExpr::zero())).collect();
        let mut terms = vec![(0u64, e.substitute(&zero))];
        for (a, name) in chart.odd_names().iter().enumerate() {
            let c = e.differentiate(name);
            if c.free_symbols().iter().any(|s| chart.odd_index(s).is_some()) {
                return Err(Error::NotLinearInTheta(name.clone()));
            }
            terms.push((1u64 << a, c));
        }
        Ok(SuperFunction::from_terms(chart, terms))
    }
}

/// Lie algebra element (φ, a, ε₁, ε₂) of u(k) ⊕ su(N) ⊕ t². T² enters with weight
/// iε_ℓ so that ε_ℓ real generates e^{iε_ℓ}.
#[derive(Clone, Debug, PartialEq)]
pub struct LieParams {
    pub phi: CMatrix,
    pub a: CMatrix,
    pub eps1: ScalarExpr,
    pub eps2: ScalarExpr,
    /// Free Lie-parameter symbols, in a fixed order.
    pub symbols: Vec<Symbol>,
}

impl LieParams {
    pub fn new(phi: CMatrix, a: CMatrix, eps1: ScalarExpr, eps2: ScalarExpr, symbols: Vec<Symbol>) -> Result<Self> {
        if !is_anti_hermitian(&phi) || !is_anti_hermitian(&a) {
            return Err(Error::ShapeMismatch("φ and a must be anti-hermitian".into()));
        }
        let tr = (0..a.rows()).fold(CExpr::zero(), |acc, r| &acc + &a[(r, r)]);
        if !tr.is_zero() {
            return Err(Error::ShapeMismatch("a must be traceless".into()));
        }
        Ok(LieParams { phi, a, eps1, eps2, symbols })
    }

    /// Cartan symbols: φ = i·diag(p1..pk), a = i·diag(a1..a_{N−1}, −Σa), ε₁ = e1, ε₂ = e2.
    pub fn cartan_symbols(k: usize, n: usize) -> Self {
        let p: Vec<ScalarExpr> = (1..=k).map(|j| ScalarExpr::symbol(&format!("p{j}"))).collect();
        let mut a: Vec<ScalarExpr> = (1..n).map(|r| ScalarExpr::symbol(&format!("a{r}"))).collect();
        a.push(-a.iter().cloned().sum::<ScalarExpr>());
        let mut symbols: Vec<Symbol> = (1..=k).map(|j| sym(&format!("p{j}"))).collect();
        symbols.extend((1..n).map(|r| sym(&format!("a{r}"))));
        symbols.extend([sym("e1"), sym("e2")]);
        Self::cartan(&p, &a, ScalarExpr::symbol("e1"), ScalarExpr::symbol("e2"), symbols)
    }

    /// Numeric Cartan values; `a` lists N−1 entries and the last is fixed by tracelessness.
    pub fn cartan_values(p: &[BigRational], a: &[BigRational], eps1: BigRational, eps2: BigRational) -> Self {
        let p: Vec<ScalarExpr> = p.iter().cloned().map(ScalarExpr::constant).collect();
        let mut a: Vec<ScalarExpr> = a.iter().cloned().map(ScalarExpr::constant).collect();
        a.push(-a.iter().cloned().sum::<ScalarExpr>());
        Self::cartan(&p, &a, ScalarExpr::constant(eps1), ScalarExpr::constant(eps2), Vec::new())
    }

    fn cartan(p: &[ScalarExpr], a: &[ScalarExpr], eps1: ScalarExpr, eps2: ScalarExpr, symbols: Vec<Symbol>) -> Self {
        let diag = |d: &[ScalarExpr]| Matrix::from_fn(d.len(), d.len(), |i, j| if i == j { CExpr::imag(d[i].clone()) } else { CExpr::zero() });
        LieParams { phi: diag(p), a: diag(a), eps1, eps2, symbols }
    }

    /// Generic anti-hermitian φ and traceless anti-hermitian a, one real symbol per
    /// Lie algebra direction: k² + (N² − 1) + 2 parameters.
    pub fn generic_symbols(k: usize, n: usize) -> Self {
        let mut symbols = Vec::new();
        let mut anti = |prefix: &str, d: usize, traceless: bool| {
            let mut m = Matrix::from_fn(d, d, |_, _| CExpr::zero());
            let mut diag_sum = ScalarExpr::zero();
            for i in 0..d {
                if traceless && i == d - 1 {
                    m[(i, i)] = CExpr::imag(-&diag_sum);
                } else {
                    let s = format!("{prefix}{}{}", i + 1, i + 1);
                    symbols.push(sym(&s));
                    diag_sum += &ScalarExpr::symbol(&s);
                    m[(i, i)] = CExpr::imag(ScalarExpr::symbol(&s));
                }
                for j in i + 1..d {
                    let (u, v) = (format!("{prefix}{}{}u", i + 1, j + 1), format!("{prefix}{}{}v", i + 1, j + 1));
                    symbols.push(sym(&u));
                    symbols.push(sym(&v));
                    let z = CExpr::new(ScalarExpr::symbol(&u), ScalarExpr::symbol(&v));
                    m[(j, i)] = -&z.conj();
                    m[(i, j)] = z;
                }
            }
            m
        };
        let phi = anti("f", k, false);
        let a = anti("g", n, true);
        symbols.extend([sym("e1"), sym("e2")]);
        LieParams { phi, a, eps1: ScalarExpr::symbol("e1"), eps2: ScalarExpr::symbol("e2"), symbols }
    }

    fn weight(&self, e: &ScalarExpr) -> CExpr {
        CExpr::imag(e.clone())
    }

    pub fn eps(&self) -> ScalarExpr {
        &self.eps1 + &self.eps2
    }
}

/// Infinitesimal action on one set of fields (either the coordinates or their odd
/// partners, which transform identically).
fn act(ch: &AdhmChart, p: &LieParams, fields: &dyn Fn(&str) -> CMatrix) -> BTreeMap<&'static str, CMatrix> {
    let mut out = BTreeMap::new();
    let (phi, a) = (&p.phi, &p.a);
    let (w1, w2, w) = (p.weight(&p.eps1), p.weight(&p.eps2), p.weight(&p.eps()));
    let (b1, b2, i, j) = (fields("b1"), fields("b2"), fields("i"), fields("j"));
    out.insert("b1", commutator(phi, &b1).add_matrix(&scale(&b1, &w1)));
    out.insert("b2", commutator(phi, &b2).add_matrix(&scale(&b2, &w2)));
    out.insert("i", mul(phi, &i).sub_matrix(&mul(&i, a)));
    out.insert("j", mul(a, &j).sub_matrix(&mul(&j, phi)).add_matrix(&scale(&j, &w)));
    if ch.full {
        let (hr, hc, pb) = (fields("hr"), fields("hc"), fields("pb"));
        out.insert("hr", commutator(phi, &hr));
        out.insert("hc", commutator(phi, &hc).add_matrix(&scale(&hc, &w)));
        out.insert("pb", commutator(phi, &pb));
    }
    out
}

/// ξ*: ([φ,B_ℓ] + iε_ℓB_ℓ)∂_{B_ℓ} + (φI − Ia)∂_I + (−Jφ + aJ + iεJ)∂_J, plus
/// [φ,H_ℝ]∂_{H_ℝ} + ([φ,H_ℂ] + iεH_ℂ)∂_{H_ℂ} + [φ,φ̄]∂_{φ̄} on the full chart.
pub fn adhm_base_components(ch: &AdhmChart, p: &LieParams) -> Vec<ScalarExpr> {
    ch.flatten_all(&act(ch, p, &|name| ch.even_matrix(name)))
}

/// The even field ξ* with zero odd components.
pub fn adhm_fundamental_field(ch: &AdhmChart, p: &LieParams) -> Result<SuperVectorField> {
    let chart = &ch.chart;
    let even = adhm_base_components(ch, p).into_iter().map(|e| SuperFunction::scalar(chart, e)).collect();
    SuperVectorField::from_components(chart, Parity::Even, even, vec![SuperFunction::zero(chart); chart.n()])
}

/// ξ̂*: ξ* with every odd partner rotated the same way as its boson.
pub fn adhm_lifted_field(ch: &AdhmChart, p: &LieParams) -> Result<SuperVectorField> {
    let chart = &ch.chart;
    let even = adhm_base_components(ch, p).into_iter().map(|e| SuperFunction::scalar(chart, e)).collect();
    let odd = ch.flatten_all(&act(ch, p, &|name| ch.odd_matrix(name))).iter().map(|e| ch.odd_linear(e)).collect::<Result<_>>()?;
    SuperVectorField::from_components(chart, Parity::Even, even, odd)
}

/// Action spec with one generator per free Lie symbol (T_α = ∂ξ*/∂ξ^α), for use with
/// `verify_brst` and the localization engine. Requires symbolic parameters.
pub fn adhm_action_spec(ch: &AdhmChart, p: &LieParams) -> Result<(ActionSpec, Vec<ScalarExpr>)> {
    if p.symbols.is_empty() {
        return Err(Error::ShapeMismatch("action spec needs symbolic Lie parameters".into()));
    }
    let v = adhm_base_components(ch, p);
    let base = p.symbols.iter().map(|s| v.iter().map(|e| e.differentiate(s)).collect()).collect();
    let xi = p.symbols.iter().map(|s| ScalarExpr::from_symbol(s.clone())).collect();
    Ok((ActionSpec::tautological(&ch.chart, base)?, xi))
}

/// Q_ξ of the unconstrained theory: μ_I∂_I + μ_J∂_J + M_ℓ∂_{B_ℓ} + (φI − Ia)∂_{μ_I}
/// + (−Jφ + aJ + εJ)∂_{μ_J} + ([φ,B_ℓ] + ε_ℓB_ℓ)∂_{M_ℓ}.
pub fn adhm_q_unconstrained(ch: &AdhmChart, p: &LieParams) -> Result<SuperVectorField> {
    if ch.full {
        return Err(Error::ShapeMismatch("unconstrained Q lives on the matter chart".into()));
    }
    let chart = &ch.chart;
    let even = (0..chart.m()).map(|i| SuperFunction::generator(chart, i)).collect::<Result<_>>()?;
    let odd = adhm_base_components(ch, p).into_iter().map(|e| SuperFunction::scalar(chart, e)).collect();
    SuperVectorField::from_components(chart, Parity::Odd, even, odd)
}

/// Q_ξ with the multiplier sector: matter as in the unconstrained case, then
/// [φ,χ_ℝ]∂_{H_ℝ} + ([φ,χ_ℂ] + εχ_ℂ)∂_{H_ℂ} + η∂_{φ̄} + H_ℝ∂_{χ_ℝ} + H_ℂ∂_{χ_ℂ} + [φ,φ̄]∂_η.
pub fn adhm_q_full(ch: &AdhmChart, p: &LieParams) -> Result<SuperVectorField> {
    if !ch.full {
        return Err(Error::ShapeMismatch("full Q needs the chart with multipliers".into()));
    }
    let chart = &ch.chart;
    let base = adhm_base_components(ch, p);
    let odd_rot = act(ch, p, &|name| ch.odd_matrix(name));
    let mut even = Vec::with_capacity(chart.m());
    let mut odd = Vec::with_capacity(chart.n());
    let mut idx = 0;
    for b in &ch.blocks {
        let d = b.dim();
        match b.even {
            "hr" | "hc" => {
                for e in b.flatten(&odd_rot[b.even]) {
                    even.push(ch.odd_linear(&e)?);
                }
                for i in idx..idx + d {
                    odd.push(SuperFunction::coordinate(chart, i)?);
                }
            }
            "pb" => {
                for i in idx..idx + d {
                    even.push(SuperFunction::generator(chart, i)?);
                }
                for e in &base[idx..idx + d] {
                    odd.push(SuperFunction::scalar(chart, e.clone()));
                }
            }
            _ => {
                for i in idx..idx + d {
                    even.push(SuperFunction::generator(chart, i)?);
                    odd.push(SuperFunction::scalar(chart, base[i].clone()));
                }
            }
        }
        idx += d;
    }
    SuperVectorField::from_components(chart, Parity::Odd, even, odd)
}

/// ½[Q,Q] − ξ̂*, as a list of non-vanishing components (empty when the square holds).
pub fn square_defect(q: &SuperVectorField, lifted: &SuperVectorField) -> Result<Vec<String>> {
    let half = q.graded_commutator(q)?.scale(&ScalarExpr::ratio(1, 2));
    Ok(half.sub(lifted)?.nonzero_components())
}

/// Numeric version of `square_defect` for parameters with many terms: largest
/// coefficient of ½[Q,Q] − ξ̂* at the given point.
pub fn square_residual(q: &SuperVectorField, lifted: &SuperVectorField, at: &crate::scalar::Binding) -> Result<f64> {
    let half = q.graded_commutator(q)?.scale(&ScalarExpr::ratio(1, 2));
    let diff = half.sub(lifted)?;
    let mut worst = 0.0f64;
    for f in diff.even_components().iter().chain(diff.odd_components()) {
        for (_, c) in f.terms() {
            worst = worst.max(c.evaluate_f64(at)?.abs());
        }
    }
    Ok(worst)
}
