//! Dijkstra against exhaustive simple-path search on small grids.
//!
//! With unit node costs a path costs `a + b*sqrt(2)` for `a` cardinal and
//! `b` diagonal steps. The search below keeps `(a, b)` as integers and
//! compares costs exactly, so the check involves no rounding at all.

use std::cmp::Ordering;

use proptest::prelude::*;
use vesseltopo::pathfind::{min_cost_path, CostField};
use vesseltopo::{connected_components, BinaryMask, Grid, Pixel};

/// Exact comparison of `a1 + b1*sqrt(2)` with `a2 + b2*sqrt(2)`.
fn cmp_cost((a1, b1): (i64, i64), (a2, b2): (i64, i64)) -> Ordering {
    // Compare x = a1 - a2 with y*sqrt(2), y = b2 - b1.
    let (x, y) = (a1 - a2, b2 - b1);
    let sign = |v: i64| v.cmp(&0);
    match (sign(x), sign(y)) {
        (Ordering::Equal, s) => s.reverse(),
        (s, Ordering::Equal) => s,
        (Ordering::Greater, Ordering::Less) => Ordering::Greater,
        (Ordering::Less, Ordering::Greater) => Ordering::Less,
        // Same sign: compare squares, x^2 vs 2y^2, flipped when negative.
        (s, _) => {
            let c = (x * x).cmp(&(2 * y * y));
            if s == Ordering::Greater {
                c
            } else {
                c.reverse()
            }
        }
    }
}

fn add(c: (i64, i64), d: (i64, i64)) -> (i64, i64) {
    (c.0 + d.0, c.1 + d.1)
}

/// Cheapest possible remaining cost, ignoring obstacles.
fn octile(p: Pixel, q: Pixel) -> (i64, i64) {
    let dr = (p.row as i64 - q.row as i64).abs();
    let dc = (p.col as i64 - q.col as i64).abs();
    (dr.max(dc) - dr.min(dc), dr.min(dc))
}

/// Minimum over all simple paths from `from` to `to`, by depth-first
/// enumeration pruned only with the obstacle-free lower bound.
fn enumerate_best(mask: &BinaryMask, from: Pixel, to: Pixel) -> Option<(i64, i64)> {
    fn dfs(
        mask: &BinaryMask,
        at: Pixel,
        to: Pixel,
        cost: (i64, i64),
        visited: &mut Vec<bool>,
        best: &mut Option<(i64, i64)>,
    ) {
        if let Some(b) = *best {
            if cmp_cost(add(cost, octile(at, to)), b) != Ordering::Less {
                return;
            }
        }
        if at == to {
            *best = Some(cost);
            return;
        }
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (r, c) = (at.row as i64 + dr, at.col as i64 + dc);
                if r < 0 || c < 0 || r >= mask.height() as i64 || c >= mask.width() as i64 {
                    continue;
                }
                let q = Pixel::new(r as usize, c as usize);
                let k = mask.index_of(q);
                if !mask.get(q) || visited[k] {
                    continue;
                }
                visited[k] = true;
                let step = if dr != 0 && dc != 0 { (0, 1) } else { (1, 0) };
                dfs(mask, q, to, add(cost, step), visited, best);
                visited[k] = false;
            }
        }
    }
    let mut visited = vec![false; mask.len()];
    visited[mask.index_of(from)] = true;
    let mut best = None;
    dfs(mask, from, to, (0, 0), &mut visited, &mut best);
    best
}

fn step_counts(pixels: &[Pixel]) -> (i64, i64) {
    pixels.windows(2).fold((0, 0), |acc, w| {
        let diagonal = w[0].row != w[1].row && w[0].col != w[1].col;
        add(acc, if diagonal { (0, 1) } else { (1, 0) })
    })
}

fn random_mask(w: usize, h: usize, seed: u64, density: u64) -> BinaryMask {
    let mut s = seed | 1;
    BinaryMask::from_fn(w, h, |_| {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        s % 10 < density
    })
    .unwrap()
}

fn check_all_pairs(mask: &BinaryMask) -> Result<(), TestCaseError> {
    let field = CostField::uniform(mask);
    let labels = connected_components(mask);
    let fg: Vec<Pixel> = mask.foreground().collect();
    for (k, &a) in fg.iter().enumerate() {
        for &b in &fg[k + 1..] {
            let result = min_cost_path(&field, a, b);
            if labels.label(a) != labels.label(b) {
                prop_assert!(result.is_err());
                continue;
            }
            let path = result.unwrap();
            let best = enumerate_best(mask, a, b).unwrap();
            prop_assert_eq!(step_counts(path.pixels()), best, "{:?} -> {:?}", a, b);
            let exact = best.0 as f64 + best.1 as f64 * std::f64::consts::SQRT_2;
            prop_assert!((path.total_cost() - exact).abs() <= 1e-12 * exact);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dijkstra_matches_exhaustive_search(
        w in 2usize..=6,
        h in 2usize..=6,
        seed in any::<u64>(),
        density in 4u64..=8,
    ) {
        check_all_pairs(&random_mask(w, h, seed, density))?;
    }
}

#[test]
fn l_corridor_matches_exhaustive_search() {
    let m = BinaryMask::from_ascii(
        "#....
         #....
         #....
         #####",
    )
    .unwrap();
    check_all_pairs(&m).unwrap();
    let path = min_cost_path(&CostField::uniform(&m), Pixel::new(0, 0), Pixel::new(3, 4)).unwrap();
    assert_eq!(step_counts(path.pixels()), (5, 1));
}

#[test]
fn full_grid_matches_exhaustive_search() {
    check_all_pairs(&BinaryMask::from_fn(5, 5, |_| true).unwrap()).unwrap();
}

#[test]
fn exact_cost_comparison() {
    assert_eq!(cmp_cost((2, 0), (0, 1)), Ordering::Greater);
    assert_eq!(cmp_cost((1, 0), (0, 1)), Ordering::Less);
    assert_eq!(cmp_cost((3, 1), (3, 1)), Ordering::Equal);
    assert_eq!(cmp_cost((0, 2), (3, 0)), Ordering::Less);
}
