use std::path::Path;

use phonecal::calib::CalibrationTransform;
use phonecal::io::{self, MatrixKind, RawMatrix};
use phonecal::likelihood::{
    frame_log_likelihoods, posterior_from_loglik, reduce_pdf_posteriors, FramePosteriorMatrix,
};
use phonecal::metrics::{eer, pairwise_eer, StressFilter, TargetRow};
use phonecal::pooling::{pool_logdur_mean, pool_mean, pool_sum};
use phonecal::{h_mc, LogLikVector, PdfMap, PhoneSet, PhoneTrial, PoolingMethod, PriorVector};
use proptest::prelude::*;

fn prob_vector(n: impl Into<prop::collection::SizeRange>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..1.0, n).prop_map(|w| {
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    })
}

fn llk_rows(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-30.0f64..30.0, n), 1..12)
}

fn trials_strategy() -> impl Strategy<Value = (usize, Vec<PhoneTrial>)> {
    (2usize..6).prop_flat_map(|n| {
        let trial =
            (0..n, prop::collection::vec(-20.0f64..20.0, n)).prop_map(|(f, llk)| PhoneTrial {
                true_phone: f,
                llk: LogLikVector::new(llk).unwrap(),
                duration: 1,
                stress: None,
            });
        (Just(n), prop::collection::vec(trial, 1..40))
    })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #[test]
    fn posterior_ignores_a_common_shift(
        llk in prop::collection::vec(-50.0f64..50.0, 2..20),
        c in -700.0f64..700.0,
    ) {
        let prior = PriorVector::flat(llk.len());
        let base = posterior_from_loglik(&LogLikVector::new(llk.clone()).unwrap(), &prior).unwrap();
        let shifted: Vec<f64> = llk.iter().map(|x| x + c).collect();
        let moved = posterior_from_loglik(&LogLikVector::new(shifted).unwrap(), &prior).unwrap();
        prop_assert!(close(&base, &moved, 1e-12), "{base:?} vs {moved:?}");
        prop_assert!((moved.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_round_trips_to_posterior(
        (post, prior) in (2usize..20).prop_flat_map(|n| (prob_vector(n), prob_vector(n))),
    ) {
        let prior = PriorVector::new(prior).unwrap();
        let llk = frame_log_likelihoods(&post, &prior, 1e-10).unwrap();
        let back = posterior_from_loglik(&llk, &prior).unwrap();
        prop_assert!(close(&post, &back, 1e-10), "{post:?} vs {back:?}");
    }

    #[test]
    fn pooling_identities(rows in llk_rows(4), c in -10.0f64..10.0) {
        let n = rows.len() as f64;
        let sum = pool_sum(&rows).unwrap();
        let mean = pool_mean(&rows).unwrap();
        let logdur = pool_logdur_mean(&rows).unwrap();
        let scaled: Vec<f64> = mean.as_slice().iter().map(|m| m * n).collect();
        prop_assert!(close(sum.as_slice(), &scaled, 1e-9));
        let scaled: Vec<f64> = mean.as_slice().iter().map(|m| m * n.ln()).collect();
        prop_assert!(close(logdur.as_slice(), &scaled, 1e-12));

        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x + c).collect()).collect();
        for method in PoolingMethod::ALL {
            let a = method.pool(&rows).unwrap();
            let b = method.pool(&shifted).unwrap();
            let gain = method.shift_gain(rows.len());
            let expected: Vec<f64> = a.as_slice().iter().map(|x| x + gain * c).collect();
            prop_assert!(close(b.as_slice(), &expected, 1e-9), "{method}");
        }

        let mut reversed = rows.clone();
        reversed.reverse();
        for method in PoolingMethod::ALL {
            let a = method.pool(&rows).unwrap();
            let b = method.pool(&reversed).unwrap();
            prop_assert!(close(a.as_slice(), b.as_slice(), 1e-9), "{method}");
        }
    }

    #[test]
    fn cross_entropy_ignores_per_trial_shifts(
        (n, trials) in trials_strategy(),
        shifts in prop::collection::vec(-100.0f64..100.0, 40),
    ) {
        let prior = PriorVector::flat(n);
        let base = h_mc(&trials, &prior, None).unwrap().h_mc;
        let moved: Vec<PhoneTrial> = trials
            .iter()
            .zip(&shifts)
            .map(|(t, c)| PhoneTrial {
                llk: LogLikVector::new(t.llk.as_slice().iter().map(|x| x + c).collect()).unwrap(),
                ..t.clone()
            })
            .collect();
        let after = h_mc(&moved, &prior, None).unwrap().h_mc;
        prop_assert!((base - after).abs() < 1e-10, "{base} vs {after}");
    }

    #[test]
    fn cross_entropy_ignores_a_common_offset_shift(
        (n, trials) in trials_strategy(),
        alpha in 0.05f64..3.0,
        beta in prop::collection::vec(-3.0f64..3.0, 6),
        c in -50.0f64..50.0,
    ) {
        let prior = PriorVector::flat(n);
        let beta = beta[..n].to_vec();
        let t1 = CalibrationTransform::new(alpha, beta.clone()).unwrap();
        let t2 = CalibrationTransform::new(alpha, beta.iter().map(|b| b + c).collect()).unwrap();
        let a = h_mc(&trials, &prior, Some(&t1)).unwrap().h_mc;
        let b = h_mc(&trials, &prior, Some(&t2)).unwrap().h_mc;
        prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn pairwise_eer_is_symmetric((n, trials) in trials_strategy(), a in 0usize..6, b in 0usize..6) {
        let (a, b) = (a % n, b % n);
        prop_assume!(a != b);
        let ab = pairwise_eer(&trials, &TargetRow::new(a, StressFilter::Any), b);
        let ba = pairwise_eer(&trials, &TargetRow::new(b, StressFilter::Any), a);
        prop_assert!((ab.eer - ba.eer).abs() < 1e-12, "{} vs {}", ab.eer, ba.eer);
        prop_assert!((0.0..=0.5).contains(&ab.eer));
    }

    #[test]
    fn eer_ignores_monotone_affine_maps(
        target in prop::collection::vec(-20i32..20, 1..25),
        nontarget in prop::collection::vec(-20i32..20, 1..25),
        scale in 1i32..5,
        offset in -100i32..100,
    ) {
        let map = |xs: &[i32]| xs.iter().map(|&x| f64::from(scale * x + offset)).collect::<Vec<_>>();
        let raw = |xs: &[i32]| xs.iter().map(|&x| f64::from(x)).collect::<Vec<_>>();
        let e = eer(&raw(&target), &raw(&nontarget));
        prop_assert_eq!(e, eer(&map(&target), &map(&nontarget)));
        // swapping roles and reversing the score order
        let neg = |xs: &[i32]| xs.iter().map(|&x| -f64::from(x)).collect::<Vec<_>>();
        prop_assert!((e - eer(&neg(&nontarget), &neg(&target))).abs() < 1e-12);
    }

    #[test]
    fn reduction_conserves_row_mass(
        rows in (3usize..12).prop_flat_map(|d| prop::collection::vec(prob_vector(d), 1..8)),
        assignment in prop::collection::vec(0usize..3, 12),
    ) {
        let dims = rows[0].len();
        let phones = PhoneSet::new(["a", "b", "c"]).unwrap();
        let mut map: Vec<usize> = assignment[..dims].to_vec();
        map[..3].copy_from_slice(&[0, 1, 2]);
        let map = PdfMap::new(map, &phones).unwrap();
        let frame = FramePosteriorMatrix::new("u", rows.len(), dims, rows.concat()).unwrap();
        let reduced = reduce_pdf_posteriors(&frame, &map, &phones).unwrap();
        for (orig, red) in frame.rows().zip(reduced.rows()) {
            let want: f64 = orig.iter().sum();
            prop_assert!((red.iter().sum::<f64>() - want).abs() < 1e-12);
            for (f, mass) in red.iter().enumerate() {
                let direct: f64 = (0..dims).filter(|&i| map.phone_of(i) == f).map(|i| orig[i]).sum();
                prop_assert!((mass - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matrix_formats_round_trip_bit_exactly(
        (rows, cols, data) in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            (Just(r), Just(c), prop::collection::vec(prop::num::f32::NORMAL | prop::num::f32::ZERO, r * c))
        }),
    ) {
        let m = RawMatrix { kind: MatrixKind::LogLikelihoods, rows, cols, data };
        let bits = |r: &RawMatrix| r.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();

        let mut bin = Vec::new();
        io::write_binary_matrix(&m, &mut bin).unwrap();
        let back = io::read_binary_matrix(bin.as_slice(), Path::new("mem")).unwrap();
        prop_assert_eq!((back.rows, back.cols, back.kind), (rows, cols, m.kind));
        prop_assert_eq!(bits(&back), bits(&m));

        let mut csv = Vec::new();
        io::write_csv_matrix(&m, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let back = io::read_csv_matrix(&text, MatrixKind::LogLikelihoods, Path::new("mem")).unwrap();
        prop_assert_eq!((back.rows, back.cols), (rows, cols));
        prop_assert_eq!(bits(&back), bits(&m));
    }
}
