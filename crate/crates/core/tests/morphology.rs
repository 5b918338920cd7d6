//! Closing cascade against a one-shot square closing, and the algebraic laws
//! of closing on random binary masks.

use proptest::prelude::*;
use vesseltopo::{closing, dilate1, erode1, BinaryMask, Grid, Pixel, ProbMap};

fn mask_from_bits(w: usize, h: usize, bits: &[bool]) -> ProbMap {
    ProbMap::from(&BinaryMask::new(w, h, bits.to_vec()).unwrap())
}

/// Direct (2r+1)x(2r+1) square closing: zero outside the image while
/// dilating, one outside while eroding.
fn square_closing(m: &ProbMap, r: usize) -> ProbMap {
    let (w, h) = (m.width(), m.height());
    let r = r as isize;
    let window = |src: &[f64], pad: f64, take_max: bool| -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for row in 0..h as isize {
            for col in 0..w as isize {
                let mut acc = if take_max { f64::NEG_INFINITY } else { f64::INFINITY };
                for dr in -r..=r {
                    for dc in -r..=r {
                        let (rr, cc) = (row + dr, col + dc);
                        let v = if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                            pad
                        } else {
                            src[rr as usize * w + cc as usize]
                        };
                        acc = if take_max { acc.max(v) } else { acc.min(v) };
                    }
                }
                out[row as usize * w + col as usize] = acc;
            }
        }
        out
    };
    let dilated = window(m.values(), 0.0, true);
    ProbMap::new(w, h, window(&dilated, 1.0, false)).unwrap()
}

fn at_most(a: &ProbMap, b: &ProbMap) -> bool {
    a.values().iter().zip(b.values()).all(|(x, y)| x <= y)
}

fn bits(density: u32) -> impl Strategy<Value = Vec<bool>> {
    proptest::collection::vec((0u32..100).prop_map(move |x| x < density), 16 * 16)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cascade_equals_square_closing(bits in (5u32..60).prop_flat_map(bits)) {
        let m = mask_from_bits(16, 16, &bits);
        for r in 1..=3 {
            prop_assert_eq!(closing(&m, r).unwrap(), square_closing(&m, r), "radius {}", r);
        }
    }

    #[test]
    fn closing_laws(bits in (5u32..60).prop_flat_map(bits)) {
        let m = mask_from_bits(16, 16, &bits);
        let mut previous = m.clone();
        for r in 1..=4 {
            let c = closing(&m, r).unwrap();
            prop_assert!(at_most(&m, &c), "not extensive at radius {}", r);
            prop_assert_eq!(&closing(&c, r).unwrap(), &c, "not idempotent at radius {}", r);
            prop_assert!(at_most(&previous, &c), "radius {} does not contain radius {}", r, r - 1);
            previous = c;
        }
    }

    #[test]
    fn dilation_and_erosion_are_dual_inside(bits in (5u32..60).prop_flat_map(bits)) {
        // Complementing swaps the sliding max and min; the padding values
        // swap with it.
        let m = mask_from_bits(16, 16, &bits);
        let inv = ProbMap::new(16, 16, m.values().iter().map(|v| 1.0 - v).collect()).unwrap();
        let d = dilate1(&m);
        let e = erode1(&inv);
        for row in 0..16 {
            for col in 0..16 {
                let p = Pixel::new(row, col);
                prop_assert_eq!(d.get(p), 1.0 - e.get(p));
            }
        }
    }
}
