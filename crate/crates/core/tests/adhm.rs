//! ADHM structure checked against independent computations: the torus flow of ξ*
//! integrated numerically, finite differences of the constraints, exact invariance
//! of the constraint norms.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use superloc::adhm::{
    adhm_base_components, adhm_constraint_functions, adhm_multiplier_sector, constraint_complex, constraint_real, fermionic_constraints,
    group_act, multiplier_completion, rank_bookkeeping, ADHMData, AdhmChart, CExpr, CMatrix, GroupElement, LieParams,
};
use superloc::linalg::Matrix;
use superloc::scalar::{Binding, ScalarExpr};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn c(re: (i64, i64), im: (i64, i64)) -> CExpr {
    CExpr::rational(q(re.0, re.1), q(im.0, im.1))
}

fn blocks(d: &ADHMData) -> [(&'static str, &CMatrix); 4] {
    [("b1", &d.b1), ("b2", &d.b2), ("i", &d.i), ("j", &d.j)]
}

/// Coordinate name → value for the matter sector of `d`.
fn coordinates(d: &ADHMData) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (name, m) in blocks(d) {
        for r in 0..m.rows() {
            for col in 0..m.cols() {
                let (re, im) = m[(r, col)].evaluate_f64(&Binding::new()).unwrap();
                out.insert(format!("{name}_{}{}r", r + 1, col + 1), re);
                out.insert(format!("{name}_{}{}i", r + 1, col + 1), im);
            }
        }
    }
    out
}

fn binding(names: &[String], x: &[f64]) -> Binding {
    names.iter().zip(x).fold(Binding::new(), |b, (n, v)| b.with_f64(n, *v))
}

fn rk4(field: &[ScalarExpr], names: &[String], x0: Vec<f64>, time: f64, steps: usize) -> Vec<f64> {
    let eval = |x: &[f64]| -> Vec<f64> {
        let b = binding(names, x);
        field.iter().map(|e| e.evaluate_f64(&b).unwrap()).collect()
    };
    let axpy = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    let h = time / steps as f64;
    let mut x = x0;
    for _ in 0..steps {
        let k1 = eval(&x);
        let k2 = eval(&axpy(&x, &k1, h / 2.0));
        let k3 = eval(&axpy(&x, &k2, h / 2.0));
        let k4 = eval(&axpy(&x, &k3, h));
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

/// Flowing ξ* for time s = atan2(4, 3) lands on the group element with e^{is} = (3 + 4i)/5.
/// With φ = i diag(1, 2), a = i diag(1, −1), ε = (1, 2): U = diag(t, t²), V = diag(t, t̄),
/// t₁ = t, t₂ = t².
#[test]
fn torus_flow_matches_group_action() {
    let (k, n) = (2, 2);
    let ch = AdhmChart::new(k, n, false).unwrap();
    let p = LieParams::cartan_values(&[q(1, 1), q(2, 1)], &[q(1, 1)], q(1, 1), q(2, 1));
    let field = adhm_base_components(&ch, &p);
    let names: Vec<String> = ch.chart.even().iter().map(|s| s.to_string()).collect();

    let t = c((3, 5), (4, 5));
    let t2 = &t * &t;
    let diag = |a: CExpr, b: CExpr| Matrix::from_fn(2, 2, |i, j| if i != j { CExpr::zero() } else if i == 0 { a.clone() } else { b.clone() });
    let g = GroupElement { u: diag(t.clone(), t2.clone()), v: diag(t.clone(), t.conj()), t1: t.clone(), t2: t2.clone() };
    let wrong_way = GroupElement { u: diag(t.conj(), t2.conj()), v: diag(t.conj(), t.clone()), t1: t.conj(), t2: t2.conj() };

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = 4f64.atan2(3.0);
    for _ in 0..3 {
        let d = ADHMData::random(k, n, &mut rng);
        let start = coordinates(&d);
        let flowed = rk4(&field, &names, names.iter().map(|x| start[x]).collect(), s, 400);
        let err = |target: &ADHMData| {
            let exact = coordinates(target);
            names.iter().zip(&flowed).map(|(x, v)| (exact[x] - v).abs()).fold(0.0, f64::max)
        };
        let forward = err(&group_act(&g, &d).unwrap());
        assert!(forward < 1e-9, "flow differs from the group action by {forward:e}");
        assert!(err(&group_act(&wrong_way, &d).unwrap()) > 1e-2);
    }
}

/// The θ^k coefficient of W_a against central differences of V_a.
#[test]
fn fermionic_constraints_linearize_the_constraints() {
    for (k, n) in [(1, 2), (2, 2)] {
        let ch = AdhmChart::new(k, n, false).unwrap();
        let v = adhm_constraint_functions(&ch);
        let w = fermionic_constraints(&v, &ch.chart).unwrap();
        let names: Vec<String> = ch.chart.even().iter().map(|s| s.to_string()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let d = ADHMData::random(k, n, &mut rng);
        let start = coordinates(&d);
        let x0: Vec<f64> = names.iter().map(|x| start[x]).collect();
        let h = 1e-6;
        for (va, wa) in v.iter().zip(&w) {
            for idx in 0..names.len() {
                let mut plus = x0.clone();
                let mut minus = x0.clone();
                plus[idx] += h;
                minus[idx] -= h;
                let fd = (va.evaluate_f64(&binding(&names, &plus)).unwrap() - va.evaluate_f64(&binding(&names, &minus)).unwrap()) / (2.0 * h);
                let exact = wa.coefficient(1u64 << idx).evaluate_f64(&binding(&names, &x0)).unwrap();
                assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "k={k} N={n} {}: fd {fd} vs {exact}", names[idx]);
            }
            assert!(wa.body().is_zero());
            assert!(wa.terms().all(|(mask, _)| mask.count_ones() == 1));
        }
    }
}

#[test]
fn constraint_norms_are_invariant() {
    for (k, n) in [(1, 2), (2, 2), (2, 3)] {
        let mut rng = ChaCha8Rng::seed_from_u64(50 + k as u64 * 10 + n as u64);
        for _ in 0..50 {
            let d = ADHMData::random(k, n, &mut rng);
            let g = GroupElement::random(k, n, &mut rng);
            g.validate().unwrap();
            let out = group_act(&g, &d).unwrap();
            let fro = |m: &CMatrix| m.to_rows().iter().flatten().map(CExpr::norm_sq).sum::<ScalarExpr>();
            assert_eq!(fro(&constraint_real(&out)), fro(&constraint_real(&d)));
            assert_eq!(fro(&constraint_complex(&out)), fro(&constraint_complex(&d)));
        }
    }
}

/// A single real multiplier on the k = 1 chart has T̃ = [φ, H_ℝ] = 0, so N vanishes.
#[test]
fn abelian_toy_multiplier_is_not_invertible() {
    let ch = AdhmChart::new(1, 2, true).unwrap();
    let p = LieParams::cartan_symbols(1, 2);
    let mut sector = adhm_multiplier_sector(&ch, &p).unwrap();
    sector.constraints.truncate(1);
    sector.multipliers.truncate(1);
    sector.multiplier_field.truncate(1);
    let (nm, report) = multiplier_completion(&sector, &[Binding::new().with_f64("p1", 0.7)]).unwrap();
    assert!(nm[(0, 0)].is_zero());
    assert!(!report.invertible);
    assert_eq!(report.min_abs_det, 0.0);
}

#[test]
fn odd_rank_counts() {
    for k in 1..=4u64 {
        for n in 1..=4u64 {
            assert_eq!(rank_bookkeeping(k, n, 1).unwrap(), 2 * k * n);
            assert_eq!(rank_bookkeeping(k, n, 2).unwrap(), 4 * k * n);
            assert_eq!(rank_bookkeeping(k, n, 4).unwrap(), 8 * k * n);
        }
    }
    // matter coordinates minus 3k² real constraints minus k² gauge directions
    for (k, n) in [(1usize, 1usize), (1, 2), (2, 1), (2, 2)] {
        let ch = AdhmChart::new(k, n, false).unwrap();
        let moduli = ch.matter_dim() - 4 * k * k;
        assert_eq!(moduli as u64, rank_bookkeeping(k as u64, n as u64, 2).unwrap());
        assert_eq!(moduli, ADHMData::zero(k, n).moduli_dimension());
    }
    assert!(rank_bookkeeping(1, 1, 3).is_err());
    assert!(rank_bookkeeping(0, 2, 2).is_err());
}
