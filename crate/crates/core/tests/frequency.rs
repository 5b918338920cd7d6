//! Visit-frequency maps against pair-by-pair path enumeration.

use vesseltopo::pathfind::{build_cost_field, min_cost_path, visit_frequency_map, FrequencyMode, PathStrategy};
use vesseltopo::{connected_components, BinaryMask, Grid, Pixel, RealGrid};

/// A Y on a 20x20 grid: two arms from the top corners meet at (9, 9) and a
/// long trunk runs down to row 19. `thickness` widens every stroke.
fn y_shape(thickness: isize) -> BinaryMask {
    BinaryMask::from_fn(20, 20, |p| {
        let (r, c) = (p.row as isize, p.col as isize);
        let near = |dr: isize, dc: isize| dr.abs().max(dc.abs()) <= thickness / 2;
        let on_trunk = r >= 9 && near(0, c - 9);
        let on_left = r <= 9 && r >= 2 && near(0, c - r);
        let on_right = r <= 9 && r >= 2 && near(0, c - (18 - r));
        on_trunk || on_left || on_right
    })
    .unwrap()
}

/// Adds one visit per pixel of the canonical path of every unordered
/// same-component pair, calling the public single-pair search.
fn enumerate(mask: &BinaryMask, strategy: PathStrategy) -> RealGrid {
    let field = build_cost_field(mask, strategy);
    let admissible = field.admissible();
    let labels = connected_components(&admissible);
    let pixels: Vec<Pixel> = admissible.foreground().collect();
    let mut counts = RealGrid::zeros(mask.width(), mask.height()).unwrap();
    let w = mask.width();
    for (i, &a) in pixels.iter().enumerate() {
        for &b in &pixels[i + 1..] {
            if labels.label(a) != labels.label(b) {
                continue;
            }
            let path = min_cost_path(&field, a, b).unwrap();
            for q in path.pixels() {
                counts.values_mut()[q.row * w + q.col] += 1.0;
            }
        }
    }
    counts
}

fn region_max(counts: &RealGrid, keep: impl Fn(Pixel) -> bool) -> f64 {
    let w = counts.width();
    counts
        .values()
        .iter()
        .enumerate()
        .filter(|&(k, _)| keep(Pixel::new(k / w, k % w)))
        .map(|(_, &v)| v)
        .fold(0.0, f64::max)
}

fn check_trunk_dominance(mask: &BinaryMask, strategy: PathStrategy) {
    let exact = visit_frequency_map(mask, strategy, FrequencyMode::Exact).unwrap();
    assert_eq!(exact, enumerate(mask, strategy), "{strategy:?}");
    // Everything strictly below the junction is trunk, strictly above is arms.
    let trunk = region_max(&exact, |p| p.row > 10);
    let arms = region_max(&exact, |p| p.row < 8);
    assert!(trunk > arms, "{strategy:?}: trunk {trunk} vs arms {arms}");
    // Trunk centreline pixels away from the bottom end outrank every pixel
    // near the arm tips.
    let tip = region_max(&exact, |p| p.row <= 3);
    let trunk_min = exact
        .values()
        .iter()
        .enumerate()
        .filter(|&(k, _)| k / 20 > 10 && k / 20 < 15 && k % 20 == 9)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    assert!(trunk_min > tip, "{strategy:?}: trunk floor {trunk_min} vs tips {tip}");
}

#[test]
fn trunk_dominates_on_a_thin_y() {
    check_trunk_dominance(&y_shape(1), PathStrategy::CenterlineGraph);
    check_trunk_dominance(&y_shape(1), PathStrategy::weighted());
}

#[test]
fn trunk_dominates_on_a_thick_y() {
    check_trunk_dominance(&y_shape(3), PathStrategy::CenterlineGraph);
    check_trunk_dominance(&y_shape(3), PathStrategy::weighted());
}

#[test]
fn sampled_counts_sum_to_path_lengths() {
    let mask = y_shape(1);
    let mode = FrequencyMode::Sampled { samples: 300, seed: 9 };
    let a = visit_frequency_map(&mask, PathStrategy::CenterlineGraph, mode).unwrap();
    let b = visit_frequency_map(&mask, PathStrategy::CenterlineGraph, mode).unwrap();
    assert_eq!(a, b);
    // Every sampled path has at least two pixels.
    assert!(a.sum() >= 600.0);
    let admissible = build_cost_field(&mask, PathStrategy::CenterlineGraph).admissible();
    for row in 0..20 {
        for col in 0..20 {
            let p = Pixel::new(row, col);
            if !admissible.get(p) {
                assert_eq!(a.get(p), 0.0);
            }
        }
    }
}
