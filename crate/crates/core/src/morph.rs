//! Flat 3x3 morphology on soft maps.
//!
//! Dilation is a sliding maximum with out-of-image values treated as 0,
//! erosion a sliding minimum with out-of-image values treated as 1. On
//! {0, 1} inputs both are exact binary morphology with a 3x3 square
//! structuring element, and `r` repeated dilations followed by `r` repeated
//! erosions equal a closing with the (2r+1)x(2r+1) square.
//!
//! Ties are resolved in favour of the first extremal window position in
//! raster order (padding positions included); gradients flow only to the
//! selected pixel.

use crate::error::{Error, Result};
use crate::mask::{Grid, ProbMap};

/// Soft maps are probability maps: values in [0, 1].
pub type SoftMap = ProbMap;

/// Window position that selected a padding value.
pub(crate) const PADDING: u32 = u32::MAX;

/// Sliding 3x3 extremum. Returns the values and, per output pixel, the
/// index of the selected input pixel (or [`PADDING`]).
pub(crate) fn extremum3(
    src: &[f64],
    w: usize,
    h: usize,
    pad: f64,
    take_max: bool,
) -> (Vec<f64>, Vec<u32>) {
    let mut out = vec![0.0; w * h];
    let mut arg = vec![PADDING; w * h];
    for r in 0..h {
        for c in 0..w {
            let mut best = f64::NAN;
            let mut best_at = PADDING;
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    let (v, at) = if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        (pad, PADDING)
                    } else {
                        let k = rr as usize * w + cc as usize;
                        (src[k], k as u32)
                    };
                    let better = if take_max { v > best } else { v < best };
                    if best.is_nan() || better {
                        best = v;
                        best_at = at;
                    }
                }
            }
            out[r * w + c] = best;
            arg[r * w + c] = best_at;
        }
    }
    (out, arg)
}

pub(crate) fn dilate_values(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    extremum3(src, w, h, 0.0, true).0
}

pub(crate) fn erode_values(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    extremum3(src, w, h, 1.0, false).0
}

/// `r` dilations followed by `r` erosions.
pub(crate) fn closing_values(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut v = src.to_vec();
    for _ in 0..r {
        v = dilate_values(&v, w, h);
    }
    for _ in 0..r {
        v = erode_values(&v, w, h);
    }
    v
}

fn wrap(m: &SoftMap, values: Vec<f64>) -> SoftMap {
    ProbMap::new(m.width(), m.height(), values).expect("morphology keeps values in [0, 1]")
}

/// 3x3 sliding maximum, zero outside the image.
pub fn dilate1(m: &SoftMap) -> SoftMap {
    wrap(m, dilate_values(m.values(), m.width(), m.height()))
}

/// 3x3 sliding minimum, one outside the image.
pub fn erode1(m: &SoftMap) -> SoftMap {
    wrap(m, erode_values(m.values(), m.width(), m.height()))
}

fn check_radius(name: &'static str, r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::InvalidParameter {
            name,
            reason: "must be at least 1".into(),
        });
    }
    Ok(())
}

/// Closing with the (2r+1)x(2r+1) square, as `r` dilations then `r` erosions.
pub fn closing(m: &SoftMap, r: usize) -> Result<SoftMap> {
    check_radius("radius", r)?;
    Ok(wrap(m, closing_values(m.values(), m.width(), m.height(), r)))
}

/// Iterative soft thinning: accumulates `relu(x - open(x))` over successive
/// erosions of the input, `iters` erosions in total.
pub fn soft_skeleton(m: &SoftMap, iters: usize) -> Result<SoftMap> {
    check_radius("iters", iters)?;
    let mut tape = crate::tape::Tape::new(m.width(), m.height());
    let p = tape.leaf(m.values().to_vec());
    let s = soft_skeleton_on(&mut tape, p, iters);
    Ok(wrap(m, tape.value(s).to_vec()))
}

pub(crate) fn soft_skeleton_on(
    tape: &mut crate::tape::Tape,
    input: crate::tape::Var,
    iters: usize,
) -> crate::tape::Var {
    let open = |tape: &mut crate::tape::Tape, x| {
        let e = tape.erode(x);
        tape.dilate(e)
    };
    let o = open(tape, input);
    let d = tape.sub(input, o);
    let mut skel = tape.relu(d);
    let mut img = input;
    for _ in 0..iters {
        img = tape.erode(img);
        let o = open(tape, img);
        let d = tape.sub(img, o);
        let delta = tape.relu(d);
        let overlap = tape.mul(skel, delta);
        let fresh = tape.sub(delta, overlap);
        let fresh = tape.relu(fresh);
        skel = tape.add(skel, fresh);
    }
    skel
}
