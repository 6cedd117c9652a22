mod common;

use confinv_core::catalog::{conformally_flat, flat, hyperbolic_ball, perturbed_flat, perturbed_in, sphere_stereographic, TrigPolynomial};
use confinv_core::curvature::{bach, christoffel, cotton, riemann, schouten, weyl};
use confinv_core::expr::ExpressionTree as E;
use confinv_core::tensor::{kulkarni_nomizu, spd_inverse};
use confinv_core::{CurvatureBundle, Error, JetSpace, MetricJet, PointTensor};

fn rel(a: &PointTensor, b: &PointTensor) -> f64 {
    a.max_diff(b).unwrap() / a.max_norm().max(b.max_norm()).max(1e-300)
}

#[test]
fn flat_metric_has_no_curvature() {
    for n in 3..=8 {
        let m = flat(n, &vec![0.2; n]).unwrap();
        let b = CurvatureBundle::compute(&m).unwrap();
        assert_eq!(b.christoffel.max_norm(), 0.0);
        for t in [&b.riemann, &b.ricci, &b.schouten, &b.weyl] {
            assert!(t.max_norm() <= 1e-12);
        }
        assert!(b.cotton.unwrap().max_norm() <= 1e-12);
        if n >= 4 {
            assert!(b.bach.unwrap().max_norm() <= 1e-12);
        }
        assert_eq!(b.scalar, 0.0);
    }
}

#[test]
fn conformally_flat_christoffel_closed_form() {
    let mut rng = common::rng(31);
    for n in [3, 5, 7] {
        let w = common::random_factor(&mut rng, n);
        let x = common::random_point(&mut rng, n, 0.8);
        let gamma = christoffel(&conformally_flat(n, &x, &w).unwrap()).unwrap();
        let dw: Vec<f64> = (0..n)
            .map(|a| confinv_core::jet_of_expression(&w, &x, 1).unwrap().derivative(a).unwrap().value())
            .collect();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                    let expect = d(k, i) * dw[j] + d(k, j) * dw[i] - d(i, j) * dw[k];
                    assert!((gamma.value(k, i, j) - expect).abs() <= 1e-12);
                    assert_eq!(gamma.value(k, i, j), gamma.value(k, j, i));
                }
            }
        }
    }
}

#[test]
fn polar_type_metric() {
    // diag(1, x₀²) at x₀ = 2
    let m = MetricJet::from_expressions(2, &[2.0, 0.3], 4, |i, j| match (i, j) {
        (0, 0) => E::constant(1.0),
        (1, 1) => E::coord(0).pow(2.0),
        _ => E::constant(0.0),
    })
    .unwrap();
    let g = christoffel(&m).unwrap();
    assert!((g.value(0, 1, 1) + 2.0).abs() < 1e-14);
    assert!((g.value(1, 0, 1) - 0.5).abs() < 1e-14);
    assert!((g.value(1, 1, 0) - 0.5).abs() < 1e-14);
    assert!(g.value(0, 0, 0).abs() < 1e-14);
}

#[test]
fn constant_curvature_closed_forms() {
    let mut rng = common::rng(32);
    for n in [5, 6, 7] {
        for _ in 0..5 {
            let x = common::random_point(&mut rng, n, 0.3);
            for (m, sign) in [(sphere_stereographic(n, &x).unwrap(), 1.0), (hyperbolic_ball(n, &x).unwrap(), -1.0)] {
                let b = CurvatureBundle::compute(&m).unwrap();
                let gg = kulkarni_nomizu(&b.metric, &b.metric).unwrap().scaled(0.5 * sign);
                assert!(rel(&b.riemann, &gg) <= 1e-9);
                assert!(rel(&b.schouten, &b.metric.scaled(0.5 * sign)) <= 1e-9);
                let nf = n as f64;
                assert!((b.scalar - sign * nf * (nf - 1.0)).abs() <= 1e-9 * nf * nf);
                assert!((b.j - sign * nf / 2.0).abs() <= 1e-9 * nf);
                let scale = b.riemann.max_norm();
                assert!(b.weyl.max_norm() <= 1e-9 * scale);
                assert!(b.cotton.as_ref().unwrap().max_norm() <= 1e-9 * scale);
                assert!(b.bach.as_ref().unwrap().max_norm() <= 1e-9 * scale);
            }
        }
    }
}

#[test]
fn hyperbolic_chart_boundary() {
    assert!(matches!(hyperbolic_ball(4, &[1.0, 0.0, 0.0, 0.0]), Err(Error::Domain(_))));
}

#[test]
fn type_invariants_on_random_metrics() {
    let mut rng = common::rng(33);
    for n in [4, 5, 6, 7] {
        for _ in 0..5 {
            let x = common::random_point(&mut rng, n, 1.0);
            let terms = common::random_terms(&mut rng, n, 6);
            let b = CurvatureBundle::compute(&perturbed_flat(n, &x, &terms).unwrap()).unwrap();
            let gi = &b.metric_inv;
            let rm = b.riemann.max_norm();
            b.riemann.validate(1e-10).unwrap();
            b.weyl.validate(1e-10).unwrap();
            b.schouten.validate(1e-10).unwrap();
            b.bach.as_ref().unwrap().validate(1e-9).unwrap();
            // Ric is the trace of Rm; J is the trace of P
            let mut tr_p = 0.0;
            for i in 0..n {
                for j in 0..n {
                    tr_p += gi.at(i, j) * b.schouten.at(i, j);
                    let ric: f64 = (0..n)
                        .flat_map(|a| (0..n).map(move |c| (a, c)))
                        .map(|(a, c)| gi.at(a, c) * b.riemann.get(&[a, i, c, j]))
                        .sum();
                    assert!((ric - b.ricci.at(i, j)).abs() <= 1e-11 * rm);
                }
            }
            assert!((tr_p - b.j).abs() <= 1e-11 * b.j.abs().max(1.0));
            assert!((b.j - b.scalar / (2.0 * (n as f64 - 1.0))).abs() <= 1e-14 * b.scalar.abs().max(1.0));
            // W totally trace-free
            for (s1, s2) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
                for p in 0..n {
                    for q in 0..n {
                        let mut s = 0.0;
                        for a in 0..n {
                            for c in 0..n {
                                let mut idx = [0usize; 4];
                                idx[s1] = a;
                                idx[s2] = c;
                                let free: Vec<usize> = (0..4).filter(|s| *s != s1 && *s != s2).collect();
                                idx[free[0]] = p;
                                idx[free[1]] = q;
                                s += gi.at(a, c) * b.weyl.get(&idx);
                            }
                        }
                        assert!(s.abs() <= 1e-9 * rm);
                    }
                }
            }
            // Cotton: antisymmetric in the last two slots and trace-free
            let c = b.cotton.as_ref().unwrap();
            let cn = c.max_norm();
            for i in 0..n {
                let (mut t1, mut t2) = (0.0, 0.0);
                for a in 0..n {
                    for d in 0..n {
                        t1 += gi.at(a, d) * c.get(&[a, d, i]);
                        t2 += gi.at(a, d) * c.get(&[a, i, d]);
                    }
                    for k in 0..n {
                        assert!((c.get(&[i, a, k]) + c.get(&[i, k, a])).abs() <= 1e-10 * cn);
                    }
                }
                assert!(t1.abs() <= 1e-10 * cn && t2.abs() <= 1e-10 * cn);
            }
        }
    }
}

#[test]
fn conformally_flat_metrics_have_no_weyl_or_bach() {
    let mut rng = common::rng(34);
    for n in [4, 5, 6, 7] {
        for _ in 0..4 {
            let w = common::random_factor(&mut rng, n);
            let x = common::random_point(&mut rng, n, 1.0);
            let b = CurvatureBundle::compute(&conformally_flat(n, &x, &w).unwrap()).unwrap();
            assert!(b.weyl.max_norm() <= 1e-9 * b.riemann.max_norm());
            assert!(b.bach.as_ref().unwrap().max_norm() <= 1e-8);
        }
    }
}

#[test]
fn sphere_times_line_space_weyl() {
    // S³ × R³ with the stereographic chart on the first block
    let n = 6;
    let sphere_factor = E::sum(vec![E::constant(1.0), E::radius_squared(3)]).pow(-2.0).scaled(4.0);
    let build = |x: &[f64]| {
        MetricJet::from_expressions(n, x, 4, |i, j| {
            if i != j {
                E::constant(0.0)
            } else if i < 3 {
                sphere_factor.clone()
            } else {
                E::constant(1.0)
            }
        })
        .unwrap()
    };
    let w = weyl(&build(&[0.0; 6])).unwrap();
    // orthonormal values 0.3, −0.2 and 0.3 on the three block types, g₀₀ = 4 at the origin
    assert!((w.get(&[0, 1, 0, 1]) - 4.8).abs() < 1e-12);
    assert!((w.get(&[0, 3, 0, 3]) + 0.8).abs() < 1e-12);
    assert!((w.get(&[3, 4, 3, 4]) - 0.3).abs() < 1e-12);
    assert!((w.max_norm() - 4.8).abs() < 1e-12);
    let x = [0.3, -0.2, 0.5, 1.0, 2.0, -1.0];
    let m = build(&x);
    let w = weyl(&m).unwrap();
    let g00 = m.values().at(0, 0);
    assert!((w.get(&[0, 1, 0, 1]) / (g00 * g00) - 0.3).abs() < 1e-12);
    assert!(w.max_norm() > 0.1);
}

#[test]
fn contracted_bianchi_for_schouten() {
    let mut rng = common::rng(35);
    for k in 0..50 {
        let n = 3 + k % 5;
        let x = common::random_point(&mut rng, n, 1.0);
        let terms = common::random_terms(&mut rng, n, 6);
        let b = CurvatureBundle::compute(&perturbed_flat(n, &x, &terms).unwrap()).unwrap();
        let dp = b.schouten_grad.as_ref().unwrap();
        let gi = &b.metric_inv;
        let scale = dp.max_norm().max(1e-300);
        for i in 0..n {
            let (mut div, mut grad) = (0.0, 0.0);
            for a in 0..n {
                for c in 0..n {
                    for j in 0..n {
                        div += gi.at(i, a) * gi.at(j, c) * dp.get(&[a, c, j]);
                        grad += gi.at(i, a) * gi.at(c, j) * dp.get(&[c, j, a]);
                    }
                }
            }
            assert!((div - grad).abs() <= 1e-9 * scale, "n={n}: {div} vs {grad}");
        }
    }
}

#[test]
fn weyl_divergence_is_a_multiple_of_cotton() {
    let mut rng = common::rng(36);
    for n in [4, 5, 6, 7] {
        let x = common::random_point(&mut rng, n, 1.0);
        let terms = common::random_terms(&mut rng, n, 6);
        let b = CurvatureBundle::compute(&perturbed_flat(n, &x, &terms).unwrap()).unwrap();
        let d = b.weyl_divergence.as_ref().unwrap();
        let c = b.cotton.as_ref().unwrap();
        let scale = d.max_norm();
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    let expect = (n as f64 - 3.0) * c.get(&[i, j, k]);
                    assert!((d.get(&[i, k, j]) - expect).abs() <= 1e-10 * scale);
                }
            }
        }
    }
}

fn christoffel_by_differences(n: usize, terms: &[confinv_core::catalog::MetricTerm], y: &[f64], h: f64) -> Vec<f64> {
    let g = |p: &[f64]| common::metric_values(n, terms, p);
    let dg: Vec<Vec<f64>> = (0..n).map(|a| common::fd_first(&g, y, a, h)).collect();
    let ginv = spd_inverse(&g(y), n).unwrap();
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                out[(k * n + i) * n + j] = 0.5
                    * (0..n)
                        .map(|l| ginv[k * n + l] * (dg[i][j * n + l] + dg[j][i * n + l] - dg[l][i * n + j]))
                        .sum::<f64>();
            }
        }
    }
    out
}

#[test]
fn riemann_matches_finite_difference_christoffel() {
    let mut rng = common::rng(37);
    for trial in 0..20 {
        let n = 3 + trial % 4;
        let x = common::random_point(&mut rng, n, 1.0);
        let terms = common::random_terms_with(&mut rng, n, 6, 2);
        let h = 0.01;
        let gam = christoffel_by_differences(n, &terms, &x, h);
        let f = |p: &[f64]| christoffel_by_differences(n, &terms, p, h);
        let dgam: Vec<Vec<f64>> = (0..n).map(|a| common::fd_first(&f, &x, a, h)).collect();
        let g = common::metric_values(n, &terms, &x);
        let gi = |k: usize, i: usize, j: usize| gam[(k * n + i) * n + j];
        let dgi = |a: usize, k: usize, i: usize, j: usize| dgam[a][(k * n + i) * n + j];
        let direct = riemann(&perturbed_flat(n, &x, &terms).unwrap()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut r = 0.0;
                        for m in 0..n {
                            let mut up = dgi(i, m, j, l) - dgi(j, m, i, l);
                            for p in 0..n {
                                up += gi(m, i, p) * gi(p, j, l) - gi(m, j, p) * gi(p, i, l);
                            }
                            r += g[k * n + m] * up;
                        }
                        worst = worst.max((r - direct.get(&[i, j, k, l])).abs());
                    }
                }
            }
        }
        assert!(worst <= 1e-7 * direct.max_norm(), "trial {trial}: {worst:e}");
    }
}

/// `B` from a rank-6 `∇∇W` assembled out of finite differences of pointwise
/// `W` and `Γ`, then contracted with the defining formula.
fn bach_by_differences(n: usize, terms: &[confinv_core::catalog::MetricTerm], x: &[f64]) -> PointTensor {
    let space = JetSpace::new(n, 2).unwrap();
    let bundle_at = |p: &[f64]| {
        CurvatureBundle::compute(&perturbed_in(&space, n, p, terms, &TrigPolynomial::zero(), 2).unwrap()).unwrap()
    };
    let wf = |p: &[f64]| bundle_at(p).weyl.components().to_vec();
    let gf = |p: &[f64]| bundle_at(p).christoffel.components().to_vec();
    let h = 0.015;
    let b0 = bundle_at(x);
    let w0 = b0.weyl.components().to_vec();
    let g0 = b0.christoffel.components().to_vec();
    let dw: Vec<Vec<f64>> = (0..n).map(|a| common::fd_first(&wf, x, a, h)).collect();
    let dg: Vec<Vec<f64>> = (0..n).map(|a| common::fd_first(&gf, x, a, h)).collect();
    let mut ddw = vec![Vec::new(); n * n];
    for a in 0..n {
        for b in a..n {
            let v = common::fd_second(&wf, x, a, b, h);
            ddw[b * n + a] = v.clone();
            ddw[a * n + b] = v;
        }
    }
    let n4 = n * n * n * n;
    let i4 = |s: [usize; 4]| ((s[0] * n + s[1]) * n + s[2]) * n + s[3];
    let gam = |k: usize, i: usize, j: usize| g0[(k * n + i) * n + j];
    // T[b][s] = ∇_b W_s and dT[a][b][s] = ∂_a ∇_b W_s
    let mut t = vec![0.0; n * n4];
    let mut dt = vec![0.0; n * n * n4];
    for b in 0..n {
        for flat in 0..n4 {
            let s = [flat / (n * n * n), (flat / (n * n)) % n, (flat / n) % n, flat % n];
            let mut v = dw[b][flat];
            for slot in 0..4 {
                for p in 0..n {
                    let mut sp = s;
                    sp[slot] = p;
                    v -= gam(p, b, s[slot]) * w0[i4(sp)];
                }
            }
            t[b * n4 + flat] = v;
            for a in 0..n {
                let mut dv = ddw[a * n + b][flat];
                for slot in 0..4 {
                    for p in 0..n {
                        let mut sp = s;
                        sp[slot] = p;
                        dv -= dg[a][(p * n + b) * n + s[slot]] * w0[i4(sp)] + gam(p, b, s[slot]) * dw[a][i4(sp)];
                    }
                }
                dt[(a * n + b) * n4 + flat] = dv;
            }
        }
    }
    let nabla2 = |a: usize, b: usize, s: [usize; 4]| {
        let mut v = dt[(a * n + b) * n4 + i4(s)];
        for p in 0..n {
            v -= gam(p, a, b) * t[p * n4 + i4(s)];
        }
        for slot in 0..4 {
            for p in 0..n {
                let mut sp = s;
                sp[slot] = p;
                v -= gam(p, a, s[slot]) * t[b * n4 + i4(sp)];
            }
        }
        v
    };
    let gi = &b0.metric_inv;
    let ric_up = b0.ricci_up();
    let nf = n as f64;
    PointTensor::covariant2(n, |i, j| {
        let mut s = 0.0;
        let mut rw = 0.0;
        for k in 0..n {
            for l in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let c = gi.at(k, a) * gi.at(l, b);
                        if c != 0.0 {
                            s += c * nabla2(a, b, [l, i, k, j]);
                        }
                    }
                }
                rw += ric_up.at(k, l) * w0[i4([l, i, k, j])];
            }
        }
        s / (nf - 3.0) + rw / (nf - 2.0)
    })
}

#[test]
fn bach_matches_nested_finite_differences() {
    let mut rng = common::rng(38);
    for n in [5, 6] {
        let x = common::random_point(&mut rng, n, 1.0);
        let terms = common::random_terms_with(&mut rng, n, 6, 1);
        let direct = bach(&perturbed_flat(n, &x, &terms).unwrap()).unwrap();
        let oracle = bach_by_differences(n, &terms, &x);
        assert!(direct.max_norm() > 1e-3);
        assert!(rel(&direct, &oracle) <= 1e-7, "n={n}: {:e}", rel(&direct, &oracle));
    }
}

#[test]
fn dimension_and_order_errors() {
    let m2 = MetricJet::from_expressions(2, &[0.0, 0.0], 4, |i, j| E::constant(if i == j { 1.0 } else { 0.0 })).unwrap();
    assert!(matches!(schouten(&m2), Err(Error::Dimension { .. })));
    let m3 = flat(3, &[0.0; 3]).unwrap();
    assert!(matches!(bach(&m3), Err(Error::Dimension { .. })));
    let low = MetricJet::from_expressions(4, &[0.0; 4], 2, |i, j| E::constant(if i == j { 1.0 } else { 0.0 })).unwrap();
    assert!(matches!(cotton(&low), Err(Error::Order { .. })));
    assert!(matches!(bach(&low), Err(Error::Order { .. })));
    let bad = MetricJet::from_expressions(3, &[0.0; 3], 2, |i, j| E::constant(if i == j { -1.0 } else { 0.0 }));
    assert!(matches!(bad, Err(Error::SingularMetric { .. })));
}
