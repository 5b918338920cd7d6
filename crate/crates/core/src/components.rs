//! 8-connected component labeling with a two-pass union-find.

use crate::mask::{BinaryMask, Grid, LabeledMask};

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make_set(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            // path halving
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Labels 8-connected foreground components. Labels start at 1 and are
/// assigned in the raster order in which each component is first met.
pub fn connected_components(mask: &BinaryMask) -> LabeledMask {
    let (w, h) = mask.dims();
    let data = mask.data();
    const NONE: u32 = u32::MAX;
    let mut provisional = vec![NONE; w * h];
    let mut sets = DisjointSet::new();

    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !data[i] {
                continue;
            }
            // Already-visited neighbors: W, NW, N, NE.
            let mut current = NONE;
            let mut visit = |j: usize, current: &mut u32| {
                let l = provisional[j];
                if l != NONE {
                    if *current == NONE {
                        *current = l;
                    } else {
                        sets.union(*current, l);
                    }
                }
            };
            if c > 0 {
                visit(i - 1, &mut current);
            }
            if r > 0 {
                if c > 0 {
                    visit(i - w - 1, &mut current);
                }
                visit(i - w, &mut current);
                if c + 1 < w {
                    visit(i - w + 1, &mut current);
                }
            }
            if current == NONE {
                current = sets.make_set();
            }
            provisional[i] = current;
        }
    }

    let mut final_label = vec![0u32; sets.parent.len()];
    let mut count = 0u32;
    let mut labels = vec![0u32; w * h];
    for (i, &p) in provisional.iter().enumerate() {
        if p == NONE {
            continue;
        }
        let root = sets.find(p) as usize;
        if final_label[root] == 0 {
            count += 1;
            final_label[root] = count;
        }
        labels[i] = final_label[root];
    }
    LabeledMask::from_parts(w, h, labels, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Pixel;
    use proptest::prelude::*;

    #[test]
    fn diagonal_touch_is_one_component() {
        let m = BinaryMask::from_ascii("#.\n.#").unwrap();
        assert_eq!(connected_components(&m).component_count(), 1);
    }

    #[test]
    fn separated_pixels_are_two_components() {
        let m = BinaryMask::from_ascii("#.#").unwrap();
        let l = connected_components(&m);
        assert_eq!(l.component_count(), 2);
        assert_eq!(l.labels(), &[1, 0, 2]);
    }

    #[test]
    fn empty_mask_has_no_components() {
        let m = BinaryMask::empty(4, 3).unwrap();
        let l = connected_components(&m);
        assert_eq!(l.component_count(), 0);
        assert!(l.labels().iter().all(|&v| v == 0));
    }

    #[test]
    fn u_shape_merges_late() {
        // The two arms get different provisional labels and merge on the last row.
        let m = BinaryMask::from_ascii(
            "#...#
             #...#
             #####",
        )
        .unwrap();
        let l = connected_components(&m);
        assert_eq!(l.component_count(), 1);
        assert_eq!(l.component_sizes(), vec![9]);
    }

    #[test]
    fn labels_follow_raster_discovery() {
        let m = BinaryMask::from_ascii(
            "...#
             #...
             #..#",
        )
        .unwrap();
        let l = connected_components(&m);
        assert_eq!(l.label(Pixel::new(0, 3)), 1);
        assert_eq!(l.label(Pixel::new(1, 0)), 2);
        assert_eq!(l.label(Pixel::new(2, 3)), 3);
    }

    /// Flood fill oracle: partition of foreground pixels into 8-connected sets.
    fn flood_partition(m: &BinaryMask) -> Vec<Vec<usize>> {
        let mut seen = vec![false; m.len()];
        let mut parts = Vec::new();
        for start in 0..m.len() {
            if !m.data()[start] || seen[start] {
                continue;
            }
            let mut part = vec![];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                part.push(i);
                let p = m.pixel_at(i);
                for (dr, dc) in crate::mask::NEIGHBORS_8 {
                    if let Some(q) = m.offset(p, dr, dc) {
                        let j = m.index_of(q);
                        if m.data()[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
            part.sort_unstable();
            parts.push(part);
        }
        parts.sort();
        parts
    }

    fn label_partition(l: &LabeledMask) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); l.component_count() as usize];
        for (i, &v) in l.labels().iter().enumerate() {
            if v > 0 {
                parts[v as usize - 1].push(i);
            }
        }
        parts.sort();
        parts
    }

    proptest! {
        #[test]
        fn matches_flood_fill(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            let mut state = seed | 1;
            let m = BinaryMask::from_fn(w, h, |_| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                state % 5 < 2
            }).unwrap();
            let l = connected_components(&m);
            prop_assert_eq!(label_partition(&l), flood_partition(&m));
            // every label 1..=count occurs
            let sizes = l.component_sizes();
            prop_assert!(sizes.iter().all(|&s| s > 0));
        }
    }
}
