use modgap::gaploss::{clip_loss, clip_loss_grad_mats, clip_loss_mats, gap_vector, shift_embeddings, PairedBatch};
use modgap::{Mat, Rng};
use proptest::prelude::*;

fn unit_rows(n: usize, d: usize, rng: &mut Rng) -> Mat {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| rng.unit_vector(d)).collect();
    Mat::from_rows(&rows).unwrap()
}

fn batch(n: usize, d: usize, seed: u64) -> PairedBatch {
    let mut rng = Rng::new(seed);
    let x = unit_rows(n, d, &mut rng);
    let y = unit_rows(n, d, &mut rng);
    PairedBatch::from_mats(x, y).unwrap()
}

fn permute(m: &Mat, perm: &[usize]) -> Mat {
    let rows: Vec<&[f64]> = perm.iter().map(|&i| m.row(i)).collect();
    Mat::from_rows(&rows).unwrap()
}

fn max_fd_error(x: &Mat, y: &Mat, tau: f64) -> (f64, f64) {
    let h = 1e-5;
    let (gx, gy) = clip_loss_grad_mats(x, y, tau).unwrap();
    let (mut diff, mut scale): (f64, f64) = (0.0, 0.0);
    for (which, g) in [(0, &gx), (1, &gy)] {
        for k in 0..x.as_slice().len() {
            let at = |delta: f64| {
                let (mut a, mut b) = (x.clone(), y.clone());
                if which == 0 {
                    a.as_mut_slice()[k] += delta;
                } else {
                    b.as_mut_slice()[k] += delta;
                }
                clip_loss_mats(&a, &b, tau).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            diff = diff.max((fd - g.as_slice()[k]).abs());
            scale = scale.max(g.as_slice()[k].abs());
        }
    }
    (diff, scale)
}

#[test]
fn gradient_matches_central_differences_on_grid() {
    let mut seed = 0;
    for n in [2, 8] {
        for d in [4, 64] {
            for tau in [0.01, 1.0] {
                seed += 1;
                let b = batch(n, d, seed);
                let (diff, scale) = max_fd_error(b.images().vectors(), b.texts().vectors(), tau);
                assert!(diff <= 1e-5 * scale.max(1.0), "N={n} d={d} tau={tau}: {diff} vs {scale}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_central_differences(n in 1usize..6, d in 2usize..10, tau in 0.05f64..2.0, seed in any::<u64>()) {
        let b = batch(n, d, seed);
        let (diff, scale) = max_fd_error(b.images().vectors(), b.texts().vectors(), tau);
        prop_assert!(diff <= 1e-5 * scale.max(1.0));
    }

    #[test]
    fn loss_is_nonnegative_and_finite(n in 1usize..10, d in 2usize..16, tau in 0.005f64..5.0, seed in any::<u64>()) {
        let l = clip_loss(&batch(n, d, seed), tau).unwrap();
        prop_assert!(l.is_finite() && l >= 0.0);
    }

    #[test]
    fn loss_ignores_pair_order(n in 2usize..9, d in 2usize..8, tau in 0.01f64..2.0, seed in any::<u64>()) {
        let b = batch(n, d, seed);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = Rng::new(seed ^ 1);
        for i in (1..n).rev() {
            perm.swap(i, rng.below(i as u64 + 1) as usize);
        }
        let (x, y) = (b.images().vectors(), b.texts().vectors());
        let a = clip_loss_mats(x, y, tau).unwrap();
        let p = clip_loss_mats(&permute(x, &perm), &permute(y, &perm), tau).unwrap();
        prop_assert!((a - p).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn loss_is_symmetric_in_modalities(n in 1usize..9, d in 2usize..8, tau in 0.01f64..2.0, seed in any::<u64>()) {
        let b = batch(n, d, seed);
        let (x, y) = (b.images().vectors(), b.texts().vectors());
        let a = clip_loss_mats(x, y, tau).unwrap();
        let s = clip_loss_mats(y, x, tau).unwrap();
        prop_assert!((a - s).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn shifted_batches_stay_on_the_sphere(n in 1usize..8, d in 2usize..8, lambda in -1.0f64..1.5, seed in any::<u64>()) {
        let b = batch(n, d, seed);
        let delta = gap_vector(&b).unwrap().delta;
        let moved = shift_embeddings(&b, lambda, &delta);
        // a shift can land exactly on the origin only in degenerate cases
        if let Ok(moved) = moved {
            prop_assert!(moved.images().is_unit_norm() && moved.texts().is_unit_norm());
        }
    }
}

#[test]
fn zero_shift_is_exact() {
    let b = batch(5, 6, 9);
    let delta = gap_vector(&b).unwrap().delta;
    let same = shift_embeddings(&b, 0.0, &delta).unwrap();
    assert_eq!(same.images().vectors(), b.images().vectors());
    assert_eq!(same.texts().vectors(), b.texts().vectors());
}
