//! Property tests for the invariants each module promises. Every oracle
//! here is a deliberately naive re-implementation.

use gfvrefine::diff::{maxpool_backward, maxpool_points, Activation, Mlp};
use gfvrefine::geometry::{
    chamfer_l2, crop_seed_proximity, crop_spherical, farthest_point_sample, fscore, knn, normalize_unit_sphere,
    NearestIndex, PointCloud,
};
use gfvrefine::harness::{decode_pcf, encode_pcf, encode_xyz, parse_xyz};
use gfvrefine::refiner::refinement_reward;
use gfvrefine::selector::{decide, select, build_feature_bank, quality_score, Choice, PointNnConfig};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn d2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn brute_nn(p: &[f64; 3], set: &[[f64; 3]]) -> f64 {
    set.iter().map(|q| d2(p, q)).fold(f64::INFINITY, f64::min)
}

fn brute_chamfer(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let ab = a.iter().map(|p| brute_nn(p, b)).sum::<f64>() / a.len() as f64;
    let ba = b.iter().map(|p| brute_nn(p, a)).sum::<f64>() / b.len() as f64;
    ab + ba
}

fn brute_fps(pts: &[[f64; 3]], m: usize, start: usize) -> Vec<usize> {
    let mut chosen = vec![start];
    while chosen.len() < m {
        let mut best = (usize::MAX, -1.0);
        for i in 0..pts.len() {
            if chosen.contains(&i) {
                continue;
            }
            let dmin = chosen.iter().map(|&c| d2(&pts[i], &pts[c])).fold(f64::INFINITY, f64::min);
            if dmin > best.1 {
                best = (i, dmin);
            }
        }
        chosen.push(best.0);
    }
    chosen
}

fn coord() -> impl Strategy<Value = f64> {
    -2.0f64..2.0
}

fn points(min: usize, max: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec([coord(), coord(), coord()], min..=max)
}

/// Points on a coarse lattice, so that exact ties and duplicates occur.
fn lattice_points(min: usize, max: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec([0i32..4, 0i32..4, 0i32..4], min..=max)
        .prop_map(|v| v.into_iter().map(|p| p.map(|c| c as f64 * 0.5)).collect())
}

fn cloud(p: Vec<[f64; 3]>) -> PointCloud<f64> {
    PointCloud::new(p).unwrap()
}

fn permuted<T: Clone>(v: &[T], seed: u64) -> Vec<T> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    let mut s = seed | 1;
    for i in (1..idx.len()).rev() {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        idx.swap(i, (s % (i as u64 + 1)) as usize);
    }
    idx.into_iter().map(|i| v[i].clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chamfer_symmetric_zero_on_self_and_order_free(a in points(1, 80), b in points(1, 80), seed in any::<u64>()) {
        let (ca, cb) = (cloud(a.clone()), cloud(b.clone()));
        prop_assert_eq!(chamfer_l2(&ca, &cb), chamfer_l2(&cb, &ca));
        prop_assert_eq!(chamfer_l2(&ca, &ca), 0.0);
        let pa = cloud(permuted(&a, seed));
        let x = chamfer_l2(&ca, &cb);
        prop_assert!((chamfer_l2(&pa, &cb) - x).abs() <= 1e-12 * x.max(1.0));
    }

    #[test]
    fn accelerated_metrics_match_brute_force(a in points(1, 256), b in points(2, 256), frac in 0.001f64..0.5) {
        let (ca, cb) = (cloud(a.clone()), cloud(b.clone()));
        let oracle = brute_chamfer(&a, &b);
        prop_assert!((chamfer_l2(&ca, &cb) - oracle).abs() <= 1e-9 * oracle.max(1e-300));
        let tree = NearestIndex::new(b.clone());
        for p in &a {
            prop_assert_eq!(tree.nearest(p).1, brute_nn(p, &b));
        }
        if cb.bounding_box_diagonal() > 0.0 {
            let rep = fscore(&ca, &cb, frac).unwrap();
            let tau2 = rep.tau * rep.tau;
            let prec = a.iter().filter(|p| brute_nn(p, &b) <= tau2).count() as f64 / a.len() as f64;
            let rec = b.iter().filter(|p| brute_nn(p, &a) <= tau2).count() as f64 / b.len() as f64;
            prop_assert!((rep.precision - prec).abs() <= 1e-12);
            prop_assert!((rep.recall - rec).abs() <= 1e-12);
        }
    }

    #[test]
    fn fscore_monotone_in_tau(a in points(1, 60), b in points(2, 60), f1 in 0.001f64..0.5, f2 in 0.001f64..0.5) {
        let (ca, cb) = (cloud(a), cloud(b));
        prop_assume!(cb.bounding_box_diagonal() > 0.0);
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let (rl, rh) = (fscore(&ca, &cb, lo).unwrap(), fscore(&ca, &cb, hi).unwrap());
        prop_assert!(rl.fscore <= rh.fscore + 1e-15);
        let h = if rh.precision + rh.recall == 0.0 { 0.0 } else { 2.0 * rh.precision * rh.recall / (rh.precision + rh.recall) };
        prop_assert!((rh.fscore - h).abs() <= 1e-12);
    }

    #[test]
    fn fps_matches_greedy_oracle(p in lattice_points(1, 64), m_frac in 0.0f64..1.0, s_frac in 0.0f64..1.0) {
        let n = p.len();
        let m = 1 + ((n - 1) as f64 * m_frac) as usize;
        let start = ((n as f64 * s_frac) as usize).min(n - 1);
        let got = farthest_point_sample(&cloud(p.clone()), m, start).unwrap();
        prop_assert_eq!(got, brute_fps(&p, m, start));
    }

    #[test]
    fn knn_matches_sorted_scan(p in lattice_points(1, 100), q in [coord(), coord(), coord()], k_frac in 0.0f64..1.0) {
        let k = 1 + ((p.len() - 1) as f64 * k_frac) as usize;
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&i, &j| d2(&p[i], &q).total_cmp(&d2(&p[j], &q)).then(i.cmp(&j)));
        order.truncate(k);
        prop_assert_eq!(knn(&cloud(p), q, k).unwrap(), order);
    }

    #[test]
    fn crops_are_subsets_with_floor_counts(p in lattice_points(2, 300), ratio in 0.01f64..0.99, seed in any::<u64>()) {
        let src = cloud(p.clone());
        let k = (ratio * p.len() as f64).floor() as usize;
        for res in [crop_spherical(&src, ratio, seed).unwrap(), crop_seed_proximity(&src, ratio, seed).unwrap()] {
            prop_assert_eq!(res.removed_indices.len(), k);
            prop_assert_eq!(res.partial.len() + k, p.len());
            prop_assert!(res.removed_indices.windows(2).all(|w| w[0] < w[1]));
            let kept: Vec<[f64; 3]> = (0..p.len()).filter(|i| res.removed_indices.binary_search(i).is_err()).map(|i| p[i]).collect();
            prop_assert_eq!(res.partial.points(), &kept[..]);
        }
    }

    #[test]
    fn normalization_inverts(p in points(1, 100), shift in coord(), scale in 0.1f64..50.0) {
        let src = cloud(p.iter().map(|q| q.map(|c| c * scale + shift)).collect());
        let (unit, norm) = normalize_unit_sphere(&src);
        prop_assert!(unit.points().iter().all(|q| d2(q, &[0.0; 3]).sqrt() <= 1.0 + 1e-12));
        let back = norm.invert(&unit);
        for (a, b) in back.points().iter().zip(src.points()) {
            for j in 0..3 {
                prop_assert!((a[j] - b[j]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn maxpool_routes_all_gradient(rows in 1usize..20, cols in 1usize..8, seed in any::<u64>(), g in prop::collection::vec(-3.0f64..3.0, 8)) {
        let f = Array2::from_shape_fn((rows, cols), |(i, j)| (((i * 31 + j * 17) as u64 ^ seed) % 7) as f64);
        let (pooled, arg) = maxpool_points(f.view()).unwrap();
        let up = Array1::from_iter(g.into_iter().take(cols).chain(std::iter::repeat(1.0)).take(cols));
        let back = maxpool_backward(&arg, rows, up.view()).unwrap();
        for j in 0..cols {
            prop_assert_eq!(pooled[j], f.column(j).fold(f64::NEG_INFINITY, |m, &v| m.max(v)));
            prop_assert_eq!(arg[j], f.column(j).iter().position(|&v| v == pooled[j]).unwrap());
            prop_assert_eq!(back.column(j).sum(), up[j]);
            prop_assert_eq!(back.column(j).iter().filter(|&&v| v != 0.0).count() <= 1, true);
        }
    }

    #[test]
    fn reward_identity(base in points(1, 40), refined in points(1, 40), gt in points(1, 40),
                       action in prop::collection::vec(-1.0f64..1.0, 128), lambda in 0.0f64..0.1) {
        let (b, r, g) = (cloud(base), cloud(refined), cloud(gt));
        let reward = refinement_reward(&b, &r, &g, &action, lambda);
        let norm2: f64 = action.iter().map(|a| a * a).sum();
        let residual = reward + chamfer_l2(&r, &g) + lambda * norm2 - chamfer_l2(&b, &g);
        prop_assert!(residual.abs() <= 1e-9);
    }

    #[test]
    fn soft_update_is_exact_blend(seed in any::<u64>(), tau in 0.001f64..1.0) {
        let acts = [Activation::Relu, Activation::None];
        let online = Mlp::<f64>::random(&[3, 5, 2], &acts, seed).unwrap();
        let mut target = Mlp::<f64>::random(&[3, 5, 2], &acts, seed.wrapping_add(1)).unwrap();
        let old = target.params_flat();
        target.soft_update_from(&online, tau).unwrap();
        for ((n, o), t) in target.params_flat().iter().zip(online.params_flat()).zip(old) {
            prop_assert!((n - (tau * o + (1.0 - tau) * t)).abs() <= 1e-12);
        }
    }

    #[test]
    fn dual_selection_never_degrades(qb in 0.0f64..1.0, qr in 0.0f64..1.0, cb in 0.0f64..5.0, cr in 0.0f64..5.0) {
        let chosen = decide(qb, qr, Some((cb, cr)));
        let cd = if chosen == Choice::Refined { cr } else { cb };
        prop_assert!(cd <= cb.min(cr));
        prop_assert_eq!(decide(qb, qr, None) == Choice::Refined, qr > qb);
    }

    #[test]
    fn pcf_and_xyz_round_trip(p in prop::collection::vec([any::<f32>(), any::<f32>(), any::<f32>()], 1..50)) {
        prop_assume!(p.iter().flatten().all(|v| v.is_finite()));
        let c = PointCloud::new(p).unwrap();
        let back: PointCloud<f32> = decode_pcf(&encode_pcf(&c), "p").unwrap();
        prop_assert!(back.points().iter().flatten().zip(c.points().iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let back: PointCloud<f32> = parse_xyz(&encode_xyz(&c), "x").unwrap();
        prop_assert!(back.points().iter().flatten().zip(c.points().iter().flatten()).all(|(a, b)| a == b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn quality_in_unit_interval_and_order_free(a in points(40, 120), b in points(40, 120), gt in points(40, 80), seed in any::<u64>()) {
        let cfg = PointNnConfig { stage_sizes: vec![32, 8], ..Default::default() };
        let bank = build_feature_bank(&[cloud(b.clone()), cloud(gt.clone())], "c", &cfg).unwrap();
        let q = quality_score(&cloud(a.clone()), &bank, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        let qp = quality_score(&cloud(permuted(&a, seed)), &bank, &cfg).unwrap();
        prop_assert!((q - qp).abs() <= 1e-6);

        let (ca, cb, cg) = (cloud(a), cloud(b), cloud(gt));
        let rec = select("s", &ca, &cb, &bank, Some(&cg), &cfg).unwrap();
        prop_assert!(rec.is_consistent());
        let chosen = if rec.chosen == Choice::Refined { &cb } else { &ca };
        prop_assert!(chamfer_l2(chosen, &cg) <= chamfer_l2(&ca, &cg).min(chamfer_l2(&cb, &cg)));
        prop_assert_eq!(&rec, &select("s", &ca, &cb, &bank, Some(&cg), &cfg).unwrap());
    }
}
