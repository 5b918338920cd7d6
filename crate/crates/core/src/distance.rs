//! Exact Euclidean distance transform (Meijster, Roerdink & Hesselink),
//! computed in integer arithmetic on squared distances.

use crate::mask::{BinaryMask, DistanceField, Grid};

/// Squared distance from every pixel to the nearest background pixel.
/// The image is surrounded by an implicit one-pixel background frame.
pub fn squared_distance_transform(mask: &BinaryMask) -> Vec<u64> {
    let (w, h) = mask.dims();
    // Padded geometry: one background pixel on every side.
    let (pw, ph) = (w + 2, h + 2);
    let inside = |x: usize, y: usize| -> bool {
        x >= 1 && y >= 1 && x <= w && y <= h && mask.data()[(y - 1) * w + (x - 1)]
    };
    let infinity = (pw + ph) as i64;

    // Phase 1: vertical distance to background along every column.
    let mut g = vec![0i64; pw * ph];
    for x in 0..pw {
        g[x] = if inside(x, 0) { infinity } else { 0 };
        for y in 1..ph {
            g[y * pw + x] = if inside(x, y) {
                g[(y - 1) * pw + x] + 1
            } else {
                0
            };
        }
        for y in (0..ph - 1).rev() {
            let below = g[(y + 1) * pw + x];
            if below < g[y * pw + x] {
                g[y * pw + x] = below + 1;
            }
        }
    }

    // Phase 2: lower envelope of parabolas along every row.
    let mut out = vec![0u64; w * h];
    let mut s = vec![0i64; pw];
    let mut t = vec![0i64; pw];
    for y in 1..=h {
        let row = &g[y * pw..(y + 1) * pw];
        let f = |x: i64, i: i64| (x - i) * (x - i) + row[i as usize] * row[i as usize];
        let sep = |i: i64, u: i64| {
            (u * u - i * i + row[u as usize] * row[u as usize] - row[i as usize] * row[i as usize])
                .div_euclid(2 * (u - i))
        };
        let n = pw as i64;
        let mut q = 0usize;
        s[0] = 0;
        t[0] = 0;
        for u in 1..n {
            while f(t[q], s[q]) > f(t[q], u) {
                if q == 0 {
                    break;
                }
                q -= 1;
            }
            if q == 0 && f(t[0], s[0]) > f(t[0], u) {
                s[0] = u;
            } else {
                let wsep = 1 + sep(s[q], u);
                if wsep < n {
                    q += 1;
                    s[q] = u;
                    t[q] = wsep;
                }
            }
        }
        for u in (0..n).rev() {
            let x = u as usize;
            if (1..=w).contains(&x) {
                out[(y - 1) * w + (x - 1)] = f(u, s[q]) as u64;
            }
            if u == t[q] && q > 0 {
                q -= 1;
            }
        }
    }
    out
}

/// Euclidean distance to the nearest background pixel; pixels beyond the
/// image border count as background.
pub fn distance_transform(mask: &BinaryMask) -> DistanceField {
    let values = squared_distance_transform(mask)
        .into_iter()
        .map(|d| (d as f64).sqrt())
        .collect();
    DistanceField::from_parts(mask.width(), mask.height(), values)
}
