//! Zhang–Suen iterative thinning.
//!
//! Each iteration runs the two classic sub-passes: candidates are marked in
//! parallel against the current image and then removed together. Plain
//! parallel removal can erase a 2x2 block or cut a two-pixel-thick diagonal,
//! so every sub-pass is checked: if removing the marked set would change the
//! number of 8-connected pieces inside any source component, the marks are
//! removed one at a time instead, re-testing each against the updated image.
//! A pixel passing the test has a single run of foreground neighbors and a
//! 4-adjacent background neighbor, so removing it alone never alters the
//! topology. On shapes where the classic rule is already safe the output is
//! identical to textbook Zhang–Suen.
//!
//! Pixels outside the image are background.

use crate::components::connected_components;
use crate::mask::{BinaryMask, Grid};

/// The eight neighbors `P2..P9`, clockwise from north.
fn ring(img: &[bool], w: usize, h: usize, r: usize, c: usize) -> [bool; 8] {
    let at = |dr: isize, dc: isize| -> bool {
        let (rr, cc) = (r as isize + dr, c as isize + dc);
        rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w && img[rr as usize * w + cc as usize]
    };
    [
        at(-1, 0),
        at(-1, 1),
        at(0, 1),
        at(1, 1),
        at(1, 0),
        at(1, -1),
        at(0, -1),
        at(-1, -1),
    ]
}

/// Zhang–Suen deletion test for sub-pass `first` (true) or second.
fn removable(n: &[bool; 8], first: bool) -> bool {
    let b = n.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let transitions = (0..8).filter(|&k| !n[k] && n[(k + 1) % 8]).count();
    if transitions != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = *n;
    if first {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

/// Number of 8-connected pieces of `img` inside each component of `source`.
fn pieces_per_component(source: &[u32], count: u32, img: &BinaryMask) -> Vec<u32> {
    let labels = connected_components(img);
    let mut seen = vec![false; labels.component_count() as usize + 1];
    let mut pieces = vec![0u32; count as usize + 1];
    for (i, &l) in labels.labels().iter().enumerate() {
        if l > 0 && !seen[l as usize] {
            seen[l as usize] = true;
            pieces[source[i] as usize] += 1;
        }
    }
    pieces
}

/// Thins `mask` to a one-pixel-wide skeleton (wider only at junctions).
/// The result is a subset of the input and has the same number of
/// 8-connected components.
pub fn skeletonize(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    let source = connected_components(mask);
    let expected = vec![1u32; source.component_count() as usize];
    let mut img = mask.data().to_vec();
    let mut marked = Vec::new();

    loop {
        let mut changed = false;
        for first in [true, false] {
            marked.clear();
            for r in 0..h {
                for c in 0..w {
                    let i = r * w + c;
                    if img[i] && removable(&ring(&img, w, h, r, c), first) {
                        marked.push(i);
                    }
                }
            }
            if marked.is_empty() {
                continue;
            }
            changed = true;

            let mut trial = img.clone();
            for &i in &marked {
                trial[i] = false;
            }
            let trial_mask = BinaryMask::new(w, h, trial).expect("dims unchanged");
            let pieces =
                pieces_per_component(source.labels(), source.component_count(), &trial_mask);
            if pieces[1..] == expected[..] {
                img = trial_mask.data().to_vec();
            } else {
                for &i in &marked {
                    if removable(&ring(&img, w, h, i / w, i % w), first) {
                        img[i] = false;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    BinaryMask::new(w, h, img).expect("dims unchanged")
}
