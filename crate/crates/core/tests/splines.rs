use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttiga_core::splines::{
    circle_basis, circle_controls, eval_curve, h_refine_uniform, insert_knot, Basis1D, KnotVector,
};

/// Textbook recursion, written independently of the library.
fn cox_de_boor(u: &[f64], i: usize, p: usize, x: f64, last: f64) -> f64 {
    if p == 0 {
        let inside = u[i] <= x && x < u[i + 1];
        // the right end belongs to the last nonempty span
        let at_end = x == last && u[i + 1] == last && u[i] < u[i + 1];
        return if inside || at_end { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    if u[i + p] > u[i] {
        v += (x - u[i]) / (u[i + p] - u[i]) * cox_de_boor(u, i, p - 1, x, last);
    }
    if u[i + p + 1] > u[i + 1] {
        v += (u[i + p + 1] - x) / (u[i + p + 1] - u[i + 1]) * cox_de_boor(u, i + 1, p - 1, x, last);
    }
    v
}

/// Random open knot vector with interior multiplicities up to `p`.
fn random_knots(p: usize, rng: &mut ChaCha8Rng) -> KnotVector {
    let interior = rng.gen_range(0..6);
    let mut k = vec![0.0; p + 1];
    let mut inner: Vec<f64> = (0..interior).map(|_| (rng.gen_range(1..20) as f64) / 20.0).collect();
    inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for x in inner {
        let m = k.iter().filter(|&&y| y == x).count();
        if m < p {
            k.push(x);
        }
    }
    k.extend(std::iter::repeat(1.0).take(p + 1));
    KnotVector::new(k, p).unwrap()
}

fn random_basis(rng: &mut ChaCha8Rng, rational: bool) -> Basis1D {
    let p = rng.gen_range(1..=4);
    let kv = random_knots(p, rng);
    if rational {
        let n = kv.len();
        Basis1D::nurbs(kv, (0..n).map(|_| rng.gen_range(0.2..3.0)).collect()).unwrap()
    } else {
        Basis1D::bspline(kv)
    }
}

#[test]
fn partition_of_unity_and_zero_derivative_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut samples = 0;
    for case in 0..100 {
        let b = random_basis(&mut rng, case % 2 == 1);
        for _ in 0..100 {
            let x = rng.gen_range(0.0..=1.0);
            let e = b.eval(x).unwrap();
            assert!((e.values.iter().sum::<f64>() - 1.0).abs() <= 1e-13);
            assert!(e.derivs.iter().sum::<f64>().abs() <= 1e-11 * (1.0 + e.derivs.iter().map(|d| d.abs()).sum::<f64>()));
            assert!(e.values.iter().all(|&v| v >= -1e-15));
            samples += 1;
        }
    }
    assert_eq!(samples, 10_000);
}

#[test]
fn bspline_values_match_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..60 {
        let b = random_basis(&mut rng, false);
        let u = b.knot_vector.knots().to_vec();
        let p = b.degree();
        for s in 0..=200 {
            let x = s as f64 / 200.0;
            let e = b.eval(x).unwrap();
            for i in 0..b.len() {
                let got = if i >= e.first_index() && i < e.first_index() + p + 1 { e.values[i - e.first_index()] } else { 0.0 };
                assert!((got - cox_de_boor(&u, i, p, x, 1.0)).abs() <= 1e-13, "p={p} i={i} x={x}");
            }
        }
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..60 {
        let b = random_basis(&mut rng, case % 2 == 0);
        let breaks = b.knot_vector.breakpoints();
        for _ in 0..50 {
            let x: f64 = rng.gen_range(0.01..0.99);
            let h = 1e-6;
            // keep the stencil inside one span
            if breaks.iter().any(|&k| (k - x).abs() < 2.0 * h) {
                continue;
            }
            let e = b.eval(x).unwrap();
            let ep = b.eval(x + h).unwrap();
            let em = b.eval(x - h).unwrap();
            assert_eq!(ep.span, em.span);
            for k in 0..e.values.len() {
                let fd = (ep.values[k] - em.values[k]) / (2.0 * h);
                assert!((fd - e.derivs[k]).abs() <= 1e-5 * (1.0 + e.derivs[k].abs()), "{fd} vs {}", e.derivs[k]);
            }
        }
    }
}

#[test]
fn circle_has_unit_radius() {
    let b = circle_basis();
    let c = circle_controls();
    for s in 0..=1000 {
        let p = eval_curve(&b, &c, s as f64 / 1000.0).unwrap();
        assert!((p[0].hypot(p[1]) - 1.0).abs() <= 1e-14);
    }
}

#[test]
fn circle_basis_at_eighth_turn() {
    // middle of the first quarter: Bernstein (1/4, 1/2, 1/4) weighted by (1, 1/√2, 1)
    let e = circle_basis().eval(0.125).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let w = 0.5 + 0.5 * h;
    let want = [0.25 / w, 0.5 * h / w, 0.25 / w];
    assert_eq!(e.first_index(), 0);
    for (g, w) in e.values.iter().zip(want) {
        assert!((g - w).abs() <= 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knot_insertion_preserves_curve(seed in any::<u64>(), xi in 0.001f64..0.999) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_basis(&mut rng, seed % 2 == 0);
        let ctrl: Vec<Vec<f64>> = (0..b.len()).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        if b.knot_vector.multiplicity(xi) >= b.degree() {
            return Ok(());
        }
        let (b2, c2) = insert_knot(&b, &ctrl, xi).unwrap();
        prop_assert_eq!(b2.len(), b.len() + 1);
        for s in 0..=50 {
            let x = s as f64 / 50.0;
            let p = eval_curve(&b, &ctrl, x).unwrap();
            let q = eval_curve(&b2, &c2, x).unwrap();
            for k in 0..3 {
                prop_assert!((p[k] - q[k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn uniform_refinement_preserves_curve(seed in any::<u64>(), levels in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_basis(&mut rng, true);
        let ctrl: Vec<Vec<f64>> = (0..b.len()).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let (b2, c2) = h_refine_uniform(&b, &ctrl, levels).unwrap();
        let spans = b.knot_vector.breakpoints().len() - 1;
        prop_assert_eq!(b2.knot_vector.breakpoints().len() - 1, spans << levels);
        for s in 0..=40 {
            let x = s as f64 / 40.0;
            let p = eval_curve(&b, &ctrl, x).unwrap();
            let q = eval_curve(&b2, &c2, x).unwrap();
            prop_assert!((p[0] - q[0]).abs() <= 1e-12 && (p[1] - q[1]).abs() <= 1e-12);
        }
    }
}
