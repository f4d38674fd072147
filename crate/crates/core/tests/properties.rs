use std::sync::Arc;

use proptest::prelude::*;
use sisgraphon::dynamics::{rhs, LinearFlow, Modes, SisModel};
use sisgraphon::si::SiClosedForm;
use sisgraphon::usic::{align, AlignOptions};
use sisgraphon::{
    build_annealed, kernel_distance, leading_eigenpair, Correlation, EpidemicParams, Field,
    IntegratorConfig, Kernel, Method, Partition,
};

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    })
}

/// Symmetric positive block kernel on `n` cells of random size.
fn block_kernel(max_cells: usize) -> impl Strategy<Value = Kernel> {
    (1..=max_cells)
        .prop_flat_map(|n| (weights(n), prop::collection::vec(0.01f64..3.0, n * n)))
        .prop_map(|(w, raw)| {
            let n = w.len();
            let mut v = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    v[i * n + j] = 0.5 * (raw[i * n + j] + raw[j * n + i]);
                }
            }
            Kernel::discrete_block(Arc::new(Partition::from_weights(&w).unwrap()), v).unwrap()
        })
}

fn field_on(k: &Kernel, values: &[f64]) -> Field {
    Field::new(k.partition().clone(), values[..k.cells()].to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_is_linear(k in block_kernel(8), f in prop::collection::vec(-1.0f64..1.0, 8),
                          g in prop::collection::vec(-1.0f64..1.0, 8), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (f, g) = (field_on(&k, &f), field_on(&k, &g));
        let lhs = k.apply(&f.lin_comb(a, &g, b).unwrap()).unwrap();
        let rhs = k.apply(&f).unwrap().lin_comb(a, &k.apply(&g).unwrap(), b).unwrap();
        let scale = lhs.norm().max(rhs.norm()).max(1e-300);
        prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn operator_is_self_adjoint(k in block_kernel(8), f in prop::collection::vec(-1.0f64..1.0, 8),
                                g in prop::collection::vec(-1.0f64..1.0, 8)) {
        let (f, g) = (field_on(&k, &f), field_on(&k, &g));
        let a = k.apply(&f).unwrap().dot(&g).unwrap();
        let b = f.dot(&k.apply(&g).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn leading_eigenpair_residual_and_rayleigh(k in block_kernel(6)) {
        let tol = 1e-11;
        let s = leading_eigenpair(&k, tol, 100_000).unwrap();
        let wphi = k.apply(&s.phi1).unwrap();
        prop_assert!(wphi.distance(&s.phi1.scaled(s.lambda1)).unwrap() <= tol);
        let rayleigh = wphi.dot(&s.phi1).unwrap() / s.phi1.dot(&s.phi1).unwrap();
        prop_assert!((rayleigh - s.lambda1).abs() <= tol * s.lambda1.max(1.0));
    }

    #[test]
    fn annealed_kernel_matches_imfa_recursion(
        n in 1usize..=6,
        raw in prop::collection::vec(0.05f64..2.0, 36),
        p in prop::collection::vec(0.05f64..1.0, 6),
        z in prop::collection::vec(0.0f64..1.0, 6),
        beta in 0.1f64..3.0,
        gamma in 0.0f64..2.0,
    ) {
        // joint edge weights e_ij symmetric; k_i p_i = Σ_j e_ij
        let ps: f64 = p[..n].iter().sum();
        let probs: Vec<f64> = p[..n].iter().map(|x| x / ps).collect();
        let e = |i: usize, j: usize| 0.5 * (raw[i * 6 + j] + raw[j * 6 + i]);
        let row: Vec<f64> = (0..n).map(|i| (0..n).map(|j| e(i, j)).sum()).collect();
        let degrees: Vec<f64> = (0..n).map(|i| row[i] / probs[i]).collect();
        let mut cond = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                cond[i * n + j] = e(i, j) / row[i];
            }
        }
        let k = build_annealed(&degrees, &probs, Correlation::Conditional(cond.clone())).unwrap();
        let params = EpidemicParams::new(beta, gamma).unwrap();
        let zf = field_on(&k, &z);
        let got = rhs(&k, &params, &zf).unwrap();
        for i in 0..n {
            let theta: f64 = (0..n).map(|j| cond[i * n + j] * z[j]).sum();
            let want = beta * (1.0 - z[i]) * degrees[i] * theta - gamma * z[i];
            prop_assert!((got.values()[i] - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn kernel_distance_matches_brute_force(a in block_kernel(4), b in block_kernel(4)) {
        // midpoint rule on a fine 2-D grid, exact up to cells cut by edges
        let m = 1000;
        let mut s = 0.0;
        let cell = |k: &Kernel, x: f64| k.partition().locate(x);
        let xs: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        for &x in &xs {
            for &y in &xs {
                let d = a.entry(cell(&a, x), cell(&a, y)) - b.entry(cell(&b, x), cell(&b, y));
                s += d * d;
            }
        }
        let brute = (s / (m * m) as f64).sqrt();
        let exact = kernel_distance(&a, &b).unwrap();
        prop_assert!((brute - exact).abs() <= 0.05 * exact.max(0.1), "{brute} vs {exact}");
    }

    #[test]
    fn two_block_linear_flow_matches_matrix_exponential(
        w in 0.1f64..0.9, w11 in 0.1f64..3.0, w12 in 0.1f64..3.0, w22 in 0.1f64..3.0,
        beta in 0.2f64..2.0, gamma in 0.0f64..1.5, u0 in prop::collection::vec(0.0f64..0.1, 2), t in 0.0f64..3.0,
    ) {
        let part = Arc::new(Partition::from_weights(&[w, 1.0 - w]).unwrap());
        let k = Kernel::discrete_block(part.clone(), vec![w11, w12, w12, w22]).unwrap();
        let model = SisModel::new(k, EpidemicParams::new(beta, gamma).unwrap()).unwrap();
        let u0f = Field::new(part, u0.clone()).unwrap();
        let flow: LinearFlow = model.linear_flow(&u0f, Modes::Complete).unwrap();
        let a = [
            [beta * w11 * w - gamma, beta * w12 * (1.0 - w)],
            [beta * w12 * w, beta * w22 * (1.0 - w) - gamma],
        ];
        let e = expm(a, t);
        let got = flow.at(t);
        for i in 0..2 {
            let want = e[i][0] * u0[0] + e[i][1] * u0[1];
            prop_assert!((got.values()[i] - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn alignment_is_shift_covariant(u0 in 1e-4f64..1e-2, s in 0.0f64..3.0) {
        let model = SisModel::new(Kernel::constant(1.0).unwrap(), EpidemicParams::new(1.0, 0.2).unwrap()).unwrap();
        let cfg = IntegratorConfig::default();
        let a = model.integrate(&Field::constant(model.partition().clone(), u0), 0.0, 30.0, &[], &cfg).unwrap();
        let b = a.clone().shifted(s);
        let spacing = model.sample_spacing();
        let r = align(&a, &b, 0.2, &AlignOptions::forward(5.0)).unwrap();
        let (ta, tb) = (r.t1 + a.t_start(), r.t2 + b.t_start());
        prop_assert!((tb - ta - s).abs() <= 2.0 * spacing);
        prop_assert!(r.sup_distance <= 1e-9);
        let same = align(&a, &a, 0.2, &AlignOptions::forward(5.0)).unwrap();
        prop_assert_eq!(same.t1, same.t2);
        prop_assert_eq!(same.sup_distance, 0.0);
    }

    #[test]
    fn si_reanchoring_is_a_translation(s in -6.0f64..6.0) {
        let model = SisModel::new(Kernel::power_law(1.0, 0.3, 200).unwrap(), EpidemicParams::si(1.0).unwrap()).unwrap();
        let cf = SiClosedForm::new(&model).unwrap();
        let grid: Vec<f64> = (0..=40).map(|k| -8.0 + 0.4 * k as f64).collect();
        let base = cf.omega_solve(&grid).unwrap();
        let moved = cf.clone().with_anchor(s, cf.omega_at(s).unwrap()).unwrap();
        let again = moved.omega_solve(&grid).unwrap();
        for (x, y) in base.iter().zip(&again) {
            prop_assert!((x - y).abs() <= 1e-9 * x.max(1.0));
        }
    }

    #[test]
    fn si_generating_bounds(omega in 1e-6f64..50.0, d in 1e-3f64..1.0) {
        let model = SisModel::new(Kernel::power_law(1.0, 0.4, 400).unwrap(), EpidemicParams::si(1.0).unwrap()).unwrap();
        let cf = SiClosedForm::new(&model).unwrap();
        let (f, g) = (cf.f(omega).unwrap(), cf.f(omega + d).unwrap());
        prop_assert!(0.0 < f && f < g && g <= cf.phi_bar());
        prop_assert!(cf.u_bar(omega).unwrap() < cf.u_bar(omega + d).unwrap());
        let chi = cf.chi_for_omega(omega).unwrap();
        prop_assert!(chi <= cf.phi_bar() * cf.phi_bar() / 4.0 * (1.0 + 1e-12));
    }
}

/// `exp(tA)` by scaling and squaring of a Taylor series.
fn expm(a: [[f64; 2]; 2], t: f64) -> [[f64; 2]; 2] {
    let norm = a.iter().flatten().map(|x| x.abs()).sum::<f64>() * t;
    let squarings = norm.max(1.0).log2().ceil() as i32 + 4;
    let h = t / 2f64.powi(squarings);
    let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
            }
        }
        r
    };
    let ha = [[a[0][0] * h, a[0][1] * h], [a[1][0] * h, a[1][1] * h]];
    let mut term = [[1.0, 0.0], [0.0, 1.0]];
    let mut sum = term;
    for k in 1..30 {
        term = mul(term, ha);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mul(sum, sum);
    }
    sum
}

/// Global error against the logistic and the number of accepted steps.
fn logistic_run(method: Method, tol: f64) -> (f64, usize) {
    let model = SisModel::new(
        Kernel::constant(1.0).unwrap(),
        EpidemicParams::si(1.0).unwrap(),
    )
    .unwrap();
    let cfg = IntegratorConfig::default()
        .with_tolerances(tol, tol * 1e-2)
        .with_method(method);
    let u0 = 1e-3;
    // coarse samples so the step size is set by the tolerance alone
    let times: Vec<f64> = (0..=4).map(|k| 5.0 * k as f64).collect();
    let traj = model
        .integrate(
            &Field::constant(model.partition().clone(), u0),
            0.0,
            20.0,
            &times,
            &cfg,
        )
        .unwrap();
    let err = traj
        .times()
        .iter()
        .zip(traj.prevalence())
        .map(|(&t, &p)| (p - u0 / (u0 + (1.0 - u0) * (-t).exp())).abs())
        .fold(0.0, f64::max);
    (err, traj.stats().accepted)
}

#[test]
fn convergence_order_at_least_four() {
    for method in [Method::DormandPrince, Method::Extrapolation] {
        let mut prev: Option<(f64, usize)> = None;
        let mut tol = 1e-5;
        for _ in 0..4 {
            let (err, steps) = logistic_run(method, tol);
            if let Some((e0, n0)) = prev {
                assert!(
                    err < e0,
                    "{method:?}: error did not shrink ({e0:e} -> {err:e})"
                );
                let order = (e0 / err).ln() / (steps as f64 / n0 as f64).ln();
                assert!(
                    order >= 3.6,
                    "{method:?}: observed order {order:.2} at tol {tol:e}"
                );
            }
            prev = Some((err, steps));
            // four halvings per stage
            tol /= 16.0;
        }
    }
}

#[test]
fn kernel_perturbation_is_lipschitz() {
    let base = Kernel::constant(1.0).unwrap();
    let cfg = IntegratorConfig::default().with_tolerances(1e-11, 1e-13);
    let times: Vec<f64> = (0..=100).map(|k| 0.1 * k as f64).collect();
    let run = |k: &Kernel| {
        let m = SisModel::new(k.clone(), EpidemicParams::new(1.0, 0.3).unwrap()).unwrap();
        m.integrate(
            &Field::constant(m.partition().clone(), 0.01),
            0.0,
            10.0,
            &times,
            &cfg,
        )
        .unwrap()
    };
    let u = run(&base);
    let sup = |d: f64| {
        let k = Kernel::constant(1.0 + d).unwrap();
        let v = run(&k);
        let dist = kernel_distance(&base, &k).unwrap();
        let s = u
            .states()
            .iter()
            .zip(v.states())
            .map(|(a, b)| a.distance(b).unwrap())
            .fold(0.0, f64::max);
        (dist, s)
    };
    let (d1, s1) = sup(0.02);
    let (d2, s2) = sup(0.01);
    assert!((d2 / d1 - 0.5).abs() < 1e-12);
    let ratio = s2 / s1;
    assert!((0.4..=0.6).contains(&ratio), "sup distance ratio {ratio}");
}
