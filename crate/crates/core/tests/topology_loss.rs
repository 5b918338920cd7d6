//! Gap weighting of the closing cascade and the topological loss terms on
//! hand-built configurations.

use vesseltopo::loss::{error_map, loss, LossKind, LossParams, WeightSchedule};
use vesseltopo::{skeletonize, BinaryMask, Grid, Pixel, ProbMap};

const ROW: usize = 4;

/// A one-pixel-wide horizontal vessel on row 4 of a 30x9 image, with the
/// given column ranges removed from the prediction.
fn broken_line(gaps: &[std::ops::Range<usize>]) -> (BinaryMask, BinaryMask) {
    let truth = BinaryMask::from_fn(30, 9, |p| p.row == ROW && (2..28).contains(&p.col)).unwrap();
    let mut pred = truth.clone();
    for gap in gaps {
        for col in gap.clone() {
            pred.set(Pixel::new(ROW, col), false);
        }
    }
    (pred, truth)
}

fn gap_total(e: &vesseltopo::RealGrid, gap: std::ops::Range<usize>) -> f64 {
    gap.map(|c| e.get(Pixel::new(ROW, c))).sum()
}

#[test]
fn short_and_long_gaps_carry_equal_total_error() {
    let (pred, truth) = broken_line(&[8..9, 16..20]);
    let schedule = WeightSchedule::new(2).unwrap();
    let e = error_map(&ProbMap::from(&pred), &skeletonize(&truth), &schedule).unwrap();
    // The 1-pixel gap is closed from radius 1 on, eps1 + eps2 = 4 on its
    // pixel; the 4-pixel gap only at radius 2, eps2 = 1 on each pixel.
    assert_eq!(e.get(Pixel::new(ROW, 8)), 4.0);
    for c in 16..20 {
        assert_eq!(e.get(Pixel::new(ROW, c)), 1.0);
    }
    assert_eq!(gap_total(&e, 8..9), 4.0);
    assert_eq!(gap_total(&e, 16..20), 4.0);
    assert_eq!(e.sum(), 8.0);

    let params = LossParams {
        r_max: 2,
        ..LossParams::default()
    };
    let tsens = loss(LossKind::Tsens, &ProbMap::from(&pred), &truth, &params, false).unwrap();
    let skeleton_len = skeletonize(&truth).count() as f64;
    assert_eq!(skeleton_len, 26.0);
    assert_eq!(tsens.value, 8.0 / skeleton_len);
}

#[test]
fn three_pixel_gap_is_weighted_per_pixel() {
    // Radius 2 closes gaps of 3 and 4 pixels alike, so a 3-pixel gap totals 3.
    let (pred, truth) = broken_line(&[12..15]);
    let schedule = WeightSchedule::new(2).unwrap();
    let e = error_map(&ProbMap::from(&pred), &skeletonize(&truth), &schedule).unwrap();
    assert_eq!(gap_total(&e, 12..15), 3.0);
}

#[test]
fn gaps_wider_than_the_cascade_are_ignored() {
    let (pred, truth) = broken_line(&[10..15]);
    let schedule = WeightSchedule::new(2).unwrap();
    let e = error_map(&ProbMap::from(&pred), &skeletonize(&truth), &schedule).unwrap();
    assert_eq!(e.sum(), 0.0);
}

#[test]
fn single_gap_with_three_radii_totals_first_weight() {
    let (pred, truth) = broken_line(&[14..15]);
    let schedule = WeightSchedule::new(3).unwrap();
    let e = error_map(&ProbMap::from(&pred), &skeletonize(&truth), &schedule).unwrap();
    let telescoped: f64 = (1..=3).map(|r| schedule.eps(r)).sum();
    assert_eq!(e.get(Pixel::new(ROW, 14)), telescoped);
    assert_eq!(telescoped, schedule.w(1));
}

fn two_separate_vessels() -> BinaryMask {
    BinaryMask::from_fn(20, 11, |p| (p.row == 3 || p.row == 6) && (2..18).contains(&p.col)).unwrap()
}

#[test]
fn spurious_bridge_is_a_precision_error_only() {
    let truth = two_separate_vessels();
    let mut pred = truth.clone();
    for row in 3..=6 {
        pred.set(Pixel::new(row, 10), true);
    }
    let p = ProbMap::from(&pred);
    let params = LossParams {
        r_max: 3,
        ..LossParams::default()
    };
    let tsens = loss(LossKind::Tsens, &p, &truth, &params, false).unwrap();
    let tprec = loss(LossKind::Tprec, &p, &truth, &params, false).unwrap();
    assert_eq!(tsens.value, 0.0);
    assert!(tprec.value > 0.0, "tprec = {}", tprec.value);
}

#[test]
fn topo_balance_endpoints() {
    let truth = two_separate_vessels();
    let mut pred = truth.clone();
    for row in 3..=6 {
        pred.set(Pixel::new(row, 10), true);
    }
    pred.set(Pixel::new(3, 5), false);
    let p = ProbMap::from(&pred);
    let with = |alpha2| {
        let params = LossParams {
            alpha2,
            r_max: 3,
            ..LossParams::default()
        };
        loss(LossKind::Topo, &p, &truth, &params, false).unwrap().value
    };
    let params = LossParams {
        r_max: 3,
        ..LossParams::default()
    };
    let tsens = loss(LossKind::Tsens, &p, &truth, &params, false).unwrap().value;
    let tprec = loss(LossKind::Tprec, &p, &truth, &params, false).unwrap().value;
    assert!(tsens > 0.0 && tprec > 0.0);
    assert_eq!(with(1.0), tsens);
    assert_eq!(with(0.0), tprec);
    assert!((with(0.5) - (tsens + tprec) / 2.0).abs() <= 1e-15);
}

#[test]
fn identical_masks_have_zero_loss() {
    let y = BinaryMask::from_fn(16, 16, |p| {
        p.col == 7 || (p.row == 8 && p.col > 7) || (p.row + 2 == p.col && p.row < 8)
    })
    .unwrap();
    let p = ProbMap::from(&y);
    for r_max in [1, 3, 10] {
        let params = LossParams {
            r_max,
            ..LossParams::default()
        };
        for kind in LossKind::ALL {
            let v = loss(kind, &p, &y, &params, false).unwrap();
            assert_eq!(v.value, 0.0, "{kind} with r_max {r_max}");
        }
    }
}

#[test]
fn losses_are_non_negative() {
    let y = two_separate_vessels();
    let mut s = 7u64;
    let values = (0..y.len())
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();
    let p = ProbMap::new(20, 11, values).unwrap();
    for kind in LossKind::ALL {
        let v = loss(kind, &p, &y, &LossParams::default(), false).unwrap();
        assert!(v.value >= 0.0, "{kind}: {}", v.value);
    }
}
