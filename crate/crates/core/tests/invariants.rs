use adaffect::data::{binarize_ratings, min_max_normalize, AffectLabel, Attribute, BinarizeReference, RatingMatrix};
use adaffect::eeg::{bandpass_filter, pca_fit, unvectorize, vectorize, EegEpoch, CHANNELS};
use adaffect::eval::{f1_score, fuse_posteriors, tune_fusion, west_fuse, FusionConfig};
use adaffect::learners::Posterior;
use adaffect::media::{sample_keyframes, Frame, FrameSequence, TemporalWindow};
use adaffect::schedule::{ga_optimize, schedule_fitness, AdSchedule, AdScore, Anchor, GaConfig, RelevanceWeights, SceneRecord, ScheduleProblem};
use ndarray::Array2;
use proptest::prelude::*;

fn labels(bits: &[bool]) -> Vec<AffectLabel> {
    bits.iter().map(|&b| if b { AffectLabel::High } else { AffectLabel::Low }).collect()
}

fn problem(scenes: &[(f64, f64)], ads: &[(f64, f64)], k: usize) -> ScheduleProblem {
    ScheduleProblem::new(
        scenes.iter().enumerate().map(|(i, &(asl, val))| SceneRecord { id: format!("s{i}"), asl, val }).collect(),
        ads.iter().enumerate().map(|(i, &(asl, val))| AdScore { id: format!("a{i}"), asl, val }).collect(),
        k,
        RelevanceWeights::default(),
        Anchor::Preceding,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_preserves_order(x in prop::collection::vec(-1e3f64..1e3, 2..30)) {
        prop_assume!(x.iter().any(|v| *v != x[0]));
        let y = min_max_normalize(&x).unwrap();
        for i in 0..x.len() {
            prop_assert!((0.0..=1.0).contains(&y[i]));
            for j in 0..x.len() {
                prop_assert_eq!(x[i] < x[j], y[i] < y[j]);
            }
        }
    }

    #[test]
    fn binarization_flips_with_sign(raw in prop::collection::vec(prop::collection::vec(-2i32..=2, 5), 2..5)) {
        let rows: Vec<Vec<Option<f64>>> = raw.iter().map(|r| r.iter().map(|&v| Some(v as f64)).collect()).collect();
        let neg: Vec<Vec<Option<f64>>> = rows.iter().map(|r| r.iter().map(|v| v.map(|v| -v)).collect()).collect();
        let a = binarize_ratings(&RatingMatrix::from_rows(&rows, (-2.0, 2.0), Attribute::Valence).unwrap(), BinarizeReference::GroupMean).unwrap();
        let b = binarize_ratings(&RatingMatrix::from_rows(&neg, (-2.0, 2.0), Attribute::Valence).unwrap(), BinarizeReference::GroupMean).unwrap();
        let mean = raw.iter().flatten().map(|&v| v as f64).sum::<f64>() / (raw.len() * 5) as f64;
        for ((r, i), l) in a.indexed_iter() {
            if raw[r][i] as f64 != mean {
                prop_assert_eq!(b[[r, i]], l.map(AffectLabel::flip));
            }
        }
    }

    #[test]
    fn f1_invariant_to_joint_permutation(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..40), seed in any::<u64>()) {
        let pred = labels(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        let truth = labels(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by_key(|&i| (i as u64).wrapping_mul(seed | 1).rotate_left(17));
        let p2: Vec<_> = order.iter().map(|&i| pred[i]).collect();
        let t2: Vec<_> = order.iter().map(|&i| truth[i]).collect();
        prop_assert_eq!(f1_score(&pred, &truth, AffectLabel::High).unwrap(), f1_score(&p2, &t2, AffectLabel::High).unwrap());
    }

    #[test]
    fn fusion_weights_form_convex_combination(
        h1 in 0.0f64..=1.0, h2 in 0.0f64..=1.0,
        f1 in 0.01f64..=1.0, f2 in 0.01f64..=1.0,
        a1 in 0.0f64..=1.0, a2 in 0.01f64..=1.0,
    ) {
        let p1 = [Posterior::from_high(h1)];
        let p2 = [Posterior::from_high(h2)];
        let s = fuse_posteriors(&[&p1, &p2], &[f1, f2], &[a1, a2]).unwrap()[0];
        let t1 = a1 * f1 / (a1 * f1 + a2 * f2);
        let expected = a1 * t1 * h1 + a2 * (1.0 - t1) * h2;
        prop_assert!((s.high - expected).abs() < 1e-12);
        prop_assert!((s.high + s.low - (a1 * t1 + a2 * (1.0 - t1))).abs() < 1e-12);
    }

    #[test]
    fn equal_posteriors_fuse_to_the_same_label(h in prop::collection::vec(0.0f64..=1.0, 1..20), a1 in 0.0f64..=1.0, a2 in 0.01f64..=1.0) {
        let p: Vec<Posterior> = h.iter().map(|&v| Posterior::from_high(v)).collect();
        let (fused, _) = west_fuse(&p, &p, 0.7, 0.4, [a1, a2]).unwrap();
        for (l, q) in fused.iter().zip(&p) {
            if (q.high - q.low).abs() > 1e-9 {
                prop_assert_eq!(*l, q.label());
            }
        }
    }

    #[test]
    fn tuned_fusion_never_below_either_modality(
        items in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, any::<bool>()), 4..30),
        f1 in 0.0f64..=1.0, f2 in 0.0f64..=1.0,
    ) {
        let p1: Vec<Posterior> = items.iter().map(|t| Posterior::from_high(t.0)).collect();
        let p2: Vec<Posterior> = items.iter().map(|t| Posterior::from_high(t.1)).collect();
        let truth = labels(&items.iter().map(|t| t.2).collect::<Vec<_>>());
        let single = |p: &[Posterior]| f1_score(&p.iter().map(Posterior::label).collect::<Vec<_>>(), &truth, AffectLabel::High).unwrap();
        let cfg = FusionConfig { grid_step: 0.1, ..FusionConfig::default() };
        let t = tune_fusion(&p1, &p2, &truth, [f1, f2], &cfg).unwrap();
        prop_assert!(t.f1 >= single(&p1).max(single(&p2)) - 1e-12);
    }

    #[test]
    fn fitness_ignores_ad_ids(scores in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 9), perm_seed in any::<u64>()) {
        let scenes = &scores[..5];
        let ads = &scores[5..];
        let p = problem(scenes, ads, 3);
        let s = AdSchedule { slots: vec![Some(2), None, Some(0), Some(3)] };
        let base = schedule_fitness(&p, &s).unwrap();
        let mut renamed = p.ads().to_vec();
        for (i, a) in renamed.iter_mut().enumerate() {
            a.id = format!("x{}", (i as u64 ^ perm_seed) % 1000);
        }
        let q = ScheduleProblem::new(p.scenes().to_vec(), renamed, 3, RelevanceWeights::default(), Anchor::Preceding).unwrap();
        prop_assert_eq!(schedule_fitness(&q, &s).unwrap(), base);
    }

    #[test]
    fn ga_stays_feasible_and_monotone(scores in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 13), seed in any::<u64>()) {
        let p = problem(&scores[..8], &scores[8..], 4);
        let cfg = GaConfig { population: 20, generations: 15, seed, ..GaConfig::default() };
        let r = ga_optimize(&p, &cfg).unwrap();
        prop_assert!(r.schedule.is_feasible(&p));
        prop_assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(r.fitness <= p.upper_bound() + 1e-12);
        prop_assert_eq!(r.fitness, schedule_fitness(&p, &r.schedule).unwrap());
    }

    #[test]
    fn vectorize_roundtrip(samples in 1usize..50, seed in any::<u32>()) {
        let data = Array2::from_shape_fn((CHANNELS, samples), |(c, t)| ((c * 31 + t * 7) as f64 + seed as f64).sin());
        let e = EegEpoch::new(data.clone(), "s", true, None).unwrap();
        let v = vectorize(&e, TemporalWindow::All);
        prop_assert_eq!(v.len(), CHANNELS * samples);
        prop_assert_eq!(unvectorize(&v, CHANNELS).unwrap(), data);
    }

    #[test]
    fn keyframes_increase_within_range(frames in 1usize..300, fps in 1.0f64..60.0, period in 0.5f64..5.0) {
        let seq = FrameSequence::new(vec![Frame::filled(2, 2, [0.5, 0.5, 0.5]); frames], fps).unwrap();
        let k = sample_keyframes(&seq, period);
        prop_assert_eq!(k.first().copied(), Some(0));
        prop_assert!(k.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(k.iter().all(|&i| i < frames));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn bandpass_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, f1 in 1.0f64..40.0, f2 in 1.0f64..40.0) {
        let wave = |f: f64, phase: f64| Array2::from_shape_fn((CHANNELS, 256), |(c, t)| (2.0 * std::f64::consts::PI * f * t as f64 / 128.0 + phase + c as f64).sin());
        let x = wave(f1, 0.0);
        let y = wave(f2, 1.0);
        let mix = &x * a + &y * b;
        let fx = bandpass_filter(&EegEpoch::new(x, "x", true, None).unwrap(), 0.1, 45.0).unwrap();
        let fy = bandpass_filter(&EegEpoch::new(y, "y", true, None).unwrap(), 0.1, 45.0).unwrap();
        let fm = bandpass_filter(&EegEpoch::new(mix, "m", true, None).unwrap(), 0.1, 45.0).unwrap();
        let expected = fx.data() * a + fy.data() * b;
        let err = (fm.data() - &expected).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(err < 1e-9, "max deviation {err}");
    }

    #[test]
    fn pca_projection_is_decorrelated(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows = Array2::from_shape_fn((40, 12), |(_, j)| rng.random_range(-1.0..1.0) * (1.0 + j as f64));
        let m = pca_fit(rows.view(), 0.95).unwrap();
        let z = m.apply(rows.view()).unwrap();
        let cov = z.t().dot(&z) / (rows.nrows() - 1) as f64;
        let total_in: f64 = {
            let centred = &rows - &rows.mean_axis(ndarray::Axis(0)).unwrap();
            centred.iter().map(|v| v * v).sum::<f64>() / (rows.nrows() - 1) as f64
        };
        for i in 0..cov.nrows() {
            for j in 0..cov.ncols() {
                if i != j {
                    prop_assert!(cov[[i, j]].abs() < 1e-8 * total_in);
                }
            }
        }
        prop_assert!(cov.diag().sum() <= total_in * (1.0 + 1e-12));
        prop_assert!(m.explained_variance.windows(2).into_iter().all(|w| w[0] >= w[1]));
    }
}
