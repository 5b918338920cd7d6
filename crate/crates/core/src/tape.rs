//! Reverse-mode differentiation over whole-grid operations.
//!
//! Each node holds a full grid of values. Max/min nodes remember which
//! input pixel they selected and relu nodes which inputs were positive;
//! together those choices form the routing signature of an evaluation, the
//! piecewise-linear region the gradient is valid in.

use crate::morph::{extremum3, PADDING};

pub(crate) type Var = usize;

enum Op {
    Leaf,
    Extremum(Var, Vec<u32>),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Relu(Var),
}

pub(crate) struct Tape {
    w: usize,
    h: usize,
    values: Vec<Vec<f64>>,
    ops: Vec<Op>,
}

impl Tape {
    pub fn new(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            values: Vec::new(),
            ops: Vec::new(),
        }
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.values.push(value);
        self.ops.push(op);
        self.values.len() - 1
    }

    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        debug_assert_eq!(value.len(), self.w * self.h);
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.values[v]
    }

    pub fn dilate(&mut self, a: Var) -> Var {
        let (out, arg) = extremum3(&self.values[a], self.w, self.h, 0.0, true);
        self.push(out, Op::Extremum(a, arg))
    }

    pub fn erode(&mut self, a: Var) -> Var {
        let (out, arg) = extremum3(&self.values[a], self.w, self.h, 1.0, false);
        self.push(out, Op::Extremum(a, arg))
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let out = self.values[a]
            .iter()
            .zip(&self.values[b])
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.values[a].iter().map(|&x| x.max(0.0)).collect();
        self.push(out, Op::Relu(a))
    }

    /// Gradient with respect to every node, given `d loss / d node` seeds.
    /// Returns the gradient of node `wrt`.
    pub fn backward(&self, seeds: Vec<(Var, Vec<f64>)>, wrt: Var) -> Vec<f64> {
        let n = self.w * self.h;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.values.len()];
        fn acc(slot: &mut Option<Vec<f64>>, n: usize) -> &mut Vec<f64> {
            slot.get_or_insert_with(|| vec![0.0; n])
        }
        for (v, g) in seeds {
            let slot = acc(&mut grads[v], n);
            for (s, x) in slot.iter_mut().zip(g) {
                *s += x;
            }
        }
        for v in (0..self.values.len()).rev() {
            let Some(g) = grads[v].take() else { continue };
            match &self.ops[v] {
                Op::Leaf => {
                    grads[v] = Some(g);
                    continue;
                }
                Op::Extremum(a, arg) => {
                    let ga = acc(&mut grads[*a], n);
                    for (i, &k) in arg.iter().enumerate() {
                        if k != PADDING {
                            ga[k as usize] += g[i];
                        }
                    }
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(self.ops[v], Op::Sub(..)) { -1.0 } else { 1.0 };
                    for (i, &x) in g.iter().enumerate() {
                        acc(&mut grads[*a], n)[i] += x;
                        acc(&mut grads[*b], n)[i] += sign * x;
                    }
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.values[*a], &self.values[*b]);
                    for (i, &x) in g.iter().enumerate() {
                        acc(&mut grads[*a], n)[i] += x * vb[i];
                        acc(&mut grads[*b], n)[i] += x * va[i];
                    }
                }
                Op::Relu(a) => {
                    let va = &self.values[*a];
                    let ga = acc(&mut grads[*a], n);
                    for (i, &x) in g.iter().enumerate() {
                        if va[i] > 0.0 {
                            ga[i] += x;
                        }
                    }
                }
            }
        }
        grads[wrt].take().unwrap_or_else(|| vec![0.0; n])
    }

    /// Selected positions of every max/min node and the active flags of
    /// every relu node, in node order.
    pub fn signature(&self) -> Vec<u32> {
        let mut sig = Vec::new();
        for op in &self.ops {
            match op {
                Op::Extremum(_, arg) => sig.extend_from_slice(arg),
                Op::Relu(a) => sig.extend(self.values[*a].iter().map(|&x| (x > 0.0) as u32)),
                _ => {}
            }
        }
        sig
    }
}
