use proptest::prelude::*;

use cdp_core::attack::{otsu_threshold, p_error};
use cdp_core::authmetrics::{hamming_score, jaccard_score, pearson};
use cdp_core::classify::{train_one_class, train_two_class, KKT_TOL};
use cdp_core::evalreport::{kde, roc};
use cdp_core::patterns::{generate_template, BinaryTemplate};
use cdp_core::printchan::{apply_dot_gain, pad, register, simulate_print_scan, translate, upsample, ChannelParams};

fn template(side: usize) -> impl Strategy<Value = BinaryTemplate> {
    (0.2f64..0.8, any::<u64>()).prop_map(move |(d, s)| generate_template(side, side, d, s).unwrap())
}

fn points(n: std::ops::Range<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), n)
}

fn mann_whitney(o: &[f64], f: &[f64]) -> f64 {
    let mut s = 0.0;
    for a in o {
        for b in f {
            s += if a < b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    s / (o.len() * f.len()) as f64
}

fn brute_otsu(h: &[u64; 256]) -> Option<u8> {
    let mut best: Option<(u8, u128, u128)> = None;
    for t in 1..256 {
        let (w0, s0) = h[..t].iter().enumerate().fold((0u128, 0u128), |(w, s), (i, &c)| {
            (w + c as u128, s + (i as u128) * c as u128)
        });
        let (w1, s1) = h[t..].iter().enumerate().fold((0u128, 0u128), |(w, s), (i, &c)| {
            (w + c as u128, s + ((i + t) as u128) * c as u128)
        });
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let a = (s0 * w1).abs_diff(s1 * w0);
        let (num, den) = (a * a, w0 * w1);
        if best.is_none_or(|(_, bn, bd)| num * bd > bn * den) {
            best = Some((t as u8, num, den));
        }
    }
    best.map(|b| b.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn p_error_is_a_normalized_distance(a in template(16), b in template(16)) {
        prop_assert_eq!(p_error(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(p_error(&a, &b).unwrap(), p_error(&b, &a).unwrap());
        prop_assert_eq!(p_error(&a, &a.complement()).unwrap(), 100.0);
        let pe = p_error(&a, &b).unwrap();
        prop_assert!((0.0..=100.0).contains(&pe));
    }

    #[test]
    fn binary_scores_are_symmetric(a in template(16), b in template(16)) {
        let h = hamming_score(&a, &b).unwrap();
        prop_assert_eq!(h, hamming_score(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert_eq!(hamming_score(&a, &a).unwrap(), 0.0);
        let j = jaccard_score(&a, &b).unwrap();
        prop_assert_eq!(j, jaccard_score(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(jaccard_score(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn pearson_is_affine_invariant(
        xy in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3..60),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
        negate: bool,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let s = if negate { -scale } else { scale };
        let y2: Vec<f64> = y.iter().map(|v| s * v + shift).collect();
        if let (Some(r), Some(r2)) = (pearson(&x, &y), pearson(&x, &y2)) {
            prop_assert!((r2 - s.signum() * r).abs() < 1e-9, "{} vs {}", r, r2);
        }
    }

    #[test]
    fn auc_equals_mann_whitney(
        o in prop::collection::vec(0u8..32, 1..80),
        f in prop::collection::vec(0u8..32, 1..80),
    ) {
        let o: Vec<f64> = o.into_iter().map(|v| v as f64 / 32.0).collect();
        let f: Vec<f64> = f.into_iter().map(|v| v as f64 / 32.0).collect();
        let r = roc(&o, &f, false).unwrap();
        prop_assert!((r.auc - mann_whitney(&o, &f)).abs() < 1e-12);
        prop_assert_eq!(r.points.first(), Some(&(0.0, 0.0)));
        prop_assert_eq!(r.points.last(), Some(&(1.0, 1.0)));
        // flipping the orientation mirrors the curve
        let flipped = roc(&o, &f, true).unwrap();
        prop_assert!((flipped.auc + r.auc - 1.0).abs() < 1e-12);
        let back: Vec<f64> = o.iter().map(|v| 1.0 - v).collect();
        let back_f: Vec<f64> = f.iter().map(|v| 1.0 - v).collect();
        prop_assert!((roc(&back, &back_f, true).unwrap().auc - r.auc).abs() < 1e-12);
    }

    #[test]
    fn kde_integrates_to_one(scores in prop::collection::vec(-2.0f64..2.0, 2..200)) {
        prop_assume!(scores.iter().any(|v| (v - scores[0]).abs() > 1e-3));
        let d = kde(&scores, None).unwrap();
        prop_assert!(d.density.iter().all(|v| *v >= 0.0));
        prop_assert!((d.integral() - 1.0).abs() < 0.01, "integral {}", d.integral());
    }

    #[test]
    fn otsu_matches_brute_force(h in prop::collection::vec(0u64..500, 256)) {
        let h: [u64; 256] = h.try_into().unwrap();
        let want = brute_otsu(&h).or_else(|| h.iter().position(|&c| c > 0).map(|i| i as u8));
        prop_assert_eq!(otsu_threshold(&h).map(|t| t.threshold), want);
    }

    #[test]
    fn sparse_otsu_matches_brute_force(bins in prop::collection::vec((0usize..256, 1u64..1000), 1..6)) {
        let mut h = [0u64; 256];
        for (b, c) in bins {
            h[b] += c;
        }
        let want = brute_otsu(&h).or_else(|| h.iter().position(|&c| c > 0).map(|i| i as u8));
        prop_assert_eq!(otsu_threshold(&h).map(|t| t.threshold), want);
    }

    #[test]
    fn register_undoes_translation(t in template(16), dy in -4isize..=4, dx in -4isize..=4) {
        let reference = upsample(&t, 2);
        let probe = translate(&pad(&reference, 4, 0.5), dy, dx);
        let r = register(&probe, &t, 4).unwrap();
        prop_assert_eq!(r.shift, (dy, dx));
        prop_assert_eq!(r.image.pixels(), reference.pixels());
    }

    #[test]
    fn dot_gain_darkens_monotonically(t in template(16), a in -0.45f64..0.45, b in -0.45f64..0.45) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let up = upsample(&t, 4);
        let (light, dark) = (apply_dot_gain(&up, lo), apply_dot_gain(&up, hi));
        for (l, d) in light.pixels().iter().zip(dark.pixels()) {
            prop_assert!(d <= l);
        }
    }

    #[test]
    fn sensor_noise_grows_with_its_scale(t in template(16), seed: u64, a in 0.01f64..0.5, b in 0.01f64..0.5) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let base = ChannelParams { ink_noise_std: 0.0, dot_gain_jitter: 0.0, seed, ..ChannelParams::p55().with_pps(2) };
        let clean = simulate_print_scan(&t, &ChannelParams { noise_std: 0.0, ..base }).unwrap();
        let x_lo = simulate_print_scan(&t, &ChannelParams { noise_std: lo, ..base }).unwrap();
        let x_hi = simulate_print_scan(&t, &ChannelParams { noise_std: hi, ..base }).unwrap();
        for ((c, l), h) in clean.pixels().iter().zip(x_lo.pixels()).zip(x_hi.pixels()) {
            prop_assert!((h - c).abs() >= (l - c).abs() - 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn one_class_respects_nu_bounds(x in points(20..80, 3), nu in 0.05f64..0.9) {
        let m = train_one_class(&x, nu, 0.3).unwrap();
        let n = x.len() as f64;
        let outliers = x.iter().filter(|v| m.decision(v) < -10.0 * KKT_TOL).count() as f64 / n;
        let sv = m.support_vectors.len() as f64 / n;
        prop_assert!(outliers <= nu + 1e-9, "outliers {} > nu {}", outliers, nu);
        prop_assert!(sv >= nu - 1e-9, "sv fraction {} < nu {}", sv, nu);
    }

    #[test]
    fn one_class_ignores_feature_scaling(
        x in points(20..60, 3),
        scale in prop::collection::vec(0.01f64..100.0, 3),
        shift in prop::collection::vec(-50.0f64..50.0, 3),
    ) {
        let y: Vec<Vec<f64>> = x
            .iter()
            .map(|v| v.iter().zip(&scale).zip(&shift).map(|((a, s), b)| a * s + b).collect())
            .collect();
        let (mx, my) = (train_one_class(&x, 0.2, 0.3).unwrap(), train_one_class(&y, 0.2, 0.3).unwrap());
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((mx.decision(a) - my.decision(b)).abs() < 1e-6);
        }
    }

    #[test]
    fn two_class_satisfies_kkt(pos in points(10..40, 2), neg in points(10..40, 2), c in 0.1f64..10.0) {
        let neg: Vec<Vec<f64>> = neg.into_iter().map(|v| vec![v[0] + 1.0, v[1]]).collect();
        let m = train_two_class(&pos, &neg, c, 0.5).unwrap();
        // support vectors are stored in training order, positives first
        let mut sv = m.support_vectors.iter().zip(&m.coef).peekable();
        let mut balance = 0.0;
        for (x, y) in pos.iter().map(|v| (v, 1.0)).chain(neg.iter().map(|v| (v, -1.0))) {
            let z = m.standardization.apply(x);
            let alpha = match sv.peek() {
                Some((s, &coef)) if **s == z => {
                    sv.next();
                    coef * y
                }
                _ => 0.0,
            };
            prop_assert!(alpha >= 0.0 && alpha <= c + 1e-12);
            balance += alpha * y;
            let margin = y * m.decision_standardized(&z);
            let tol = 1e-6 * (1.0 + c);
            if alpha <= 0.0 {
                prop_assert!(margin >= 1.0 - tol, "free point margin {}", margin);
            } else if alpha >= c {
                prop_assert!(margin <= 1.0 + tol, "bound point margin {}", margin);
            } else {
                prop_assert!((margin - 1.0).abs() <= tol, "support margin {}", margin);
            }
        }
        prop_assert!(sv.next().is_none());
        prop_assert!(balance.abs() < 1e-9);
    }
}
