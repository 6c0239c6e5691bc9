//! Reverse-mode differentiation over dense matrix values.
//!
//! Every forward primitive pushes a node holding its value and the inputs it
//! needs; [`Tape::backward`] walks the nodes in reverse and accumulates
//! adjoints. Sparse operands are stored by pattern so gradients of sparse
//! parameters stay restricted to their stored positions.

use std::rc::Rc;

use crate::error::{dims, Error, Result};
use crate::graph::{CsrMatrix, Pattern};
use crate::linalg::DenseMatrix;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Off-diagonal entries of `S` and its diagonal, as needed by the Jacobi shift.
#[derive(Debug, Clone)]
pub struct JacobiData {
    pub pattern: Rc<Pattern>,
    /// Row of every stored position.
    pub rows: Vec<usize>,
    /// Value of `S` at every stored position.
    pub values: Vec<f64>,
    pub diag: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Op {
    Param(usize),
    Const,
    MatMul(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Spmm(Rc<CsrMatrix>, Var),
    PatternMul {
        pattern: Rc<Pattern>,
        values: Var,
        x: Var,
    },
    JacobiValues {
        data: Rc<JacobiData>,
        gamma: Var,
    },
    ExpandColumns(Var, usize),
    ReduceGroups(Var, usize),
    ScaleColumns(Var, Var),
    Hadamard(Var, Var),
    BlockMatMul {
        x: Var,
        w: Var,
        blocks: Rc<Vec<usize>>,
    },
    Relu(Var),
    LeakyRelu(Var, f64),
    EdgeScores {
        pattern: Rc<Pattern>,
        h: Var,
        e: Var,
        slope: f64,
    },
    PatternSoftmax {
        pattern: Rc<Pattern>,
        a: Var,
    },
    Flatten(Var),
    AddRowBias(Var, Var),
    MeanRows(Var),
    CrossEntropy {
        logits: Var,
        label: usize,
    },
    SmoothL1 {
        pred: Var,
        target: Rc<DenseMatrix>,
        mask: Option<Rc<Vec<bool>>>,
        delta: f64,
    },
    HalfSquaredNorm(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: DenseMatrix,
    op: Op,
}

/// Gradients keyed by parameter index.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub grads: Vec<Option<DenseMatrix>>,
}

impl Gradients {
    pub fn get(&self, param: usize) -> Option<&DenseMatrix> {
        self.grads.get(param).and_then(Option::as_ref)
    }
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: DenseMatrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Leaf bound to parameter `index` of a store.
    pub fn param(&mut self, index: usize, value: DenseMatrix) -> Var {
        self.push(value, Op::Param(index))
    }

    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.push(value, Op::Const)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    /// Sum of a non-empty list, left to right.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let (&first, rest) = terms
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("sum of no terms".into()))?;
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    pub fn scale(&mut self, a: Var, alpha: f64) -> Var {
        let v = self.value(a).scale(alpha);
        self.push(v, Op::Scale(a, alpha))
    }

    /// `S X` with a fixed sparse `S`.
    pub fn spmm(&mut self, s: &Rc<CsrMatrix>, x: Var) -> Result<Var> {
        let v = s.spmm(self.value(x))?;
        Ok(self.push(v, Op::Spmm(Rc::clone(s), x)))
    }

    /// Column-wise sparse products: column `c` of the output is `Φ_c x_c`,
    /// where `Φ_c` carries column `c` of `values` on `pattern`. A single
    /// value column is shared by every column of `x`.
    pub fn pattern_mul(&mut self, pattern: &Rc<Pattern>, values: Var, x: Var) -> Result<Var> {
        let vals = self.value(values);
        let xv = self.value(x);
        if vals.rows() != pattern.nnz() || xv.rows() != pattern.n_cols() {
            return Err(dims(format!(
                "pattern product with {} stored entries, {} values, operand {}x{}",
                pattern.nnz(),
                vals.rows(),
                xv.rows(),
                xv.cols()
            )));
        }
        let shared = vals.cols() == 1;
        if !shared && vals.cols() != xv.cols() {
            return Err(dims(format!(
                "{} value columns for {} signal columns",
                vals.cols(),
                xv.cols()
            )));
        }
        let c = xv.cols();
        let mut out = DenseMatrix::zeros(pattern.n_rows(), c);
        let vs = vals.as_slice();
        let vc = vals.cols();
        for i in 0..pattern.n_rows() {
            for p in pattern.row_range(i) {
                let j = pattern.col_idx()[p];
                let xr = xv.row(j);
                let orow = &mut out.as_mut_slice()[i * c..(i + 1) * c];
                if shared {
                    let w = vs[p];
                    for (o, &xj) in orow.iter_mut().zip(xr) {
                        *o += w * xj;
                    }
                } else {
                    let wr = &vs[p * vc..(p + 1) * vc];
                    for ((o, &xj), &w) in orow.iter_mut().zip(xr).zip(wr) {
                        *o += w * xj;
                    }
                }
            }
        }
        Ok(self.push(
            out,
            Op::PatternMul {
                pattern: Rc::clone(pattern),
                values,
                x,
            },
        ))
    }

    /// Values of `R(γ_c)` on the off-diagonal pattern, one column per `γ_c`.
    pub fn jacobi_values(&mut self, data: &Rc<JacobiData>, gamma: Var) -> Result<Var> {
        let g = self.value(gamma);
        if g.rows() != 1 {
            return Err(dims("gamma must be a row vector"));
        }
        let c = g.cols();
        let mut out = DenseMatrix::zeros(data.values.len(), c);
        for (p, (&i, &s)) in data.rows.iter().zip(&data.values).enumerate() {
            for (col, &gc) in g.as_slice().iter().enumerate() {
                let gap = data.diag[i] - gc;
                if gap.abs() <= crate::filters::SINGULARITY_EPS {
                    return Err(Error::SingularDiagonal { node: i, gap });
                }
                out.as_mut_slice()[p * c + col] = -s / gap;
            }
        }
        Ok(self.push(
            out,
            Op::JacobiValues {
                data: Rc::clone(data),
                gamma,
            },
        ))
    }

    /// Column `f * reps + r` of the output is column `f` of `x`.
    pub fn expand_columns(&mut self, x: Var, reps: usize) -> Var {
        let xv = self.value(x);
        let out = DenseMatrix::from_fn(xv.rows(), xv.cols() * reps, |i, c| xv[(i, c / reps)]);
        self.push(out, Op::ExpandColumns(x, reps))
    }

    /// Column `g` of the output sums columns `g, g + width, g + 2 width, ...`.
    pub fn reduce_groups(&mut self, x: Var, width: usize) -> Result<Var> {
        let xv = self.value(x);
        if width == 0 || !xv.cols().is_multiple_of(width) {
            return Err(dims(format!("{} columns in groups of {width}", xv.cols())));
        }
        let mut out = DenseMatrix::zeros(xv.rows(), width);
        for i in 0..xv.rows() {
            let src = xv.row(i);
            let dst = out.row_mut(i);
            for (c, &v) in src.iter().enumerate() {
                dst[c % width] += v;
            }
        }
        Ok(self.push(out, Op::ReduceGroups(x, width)))
    }

    /// Column `c` of `x` times `w[0, c]`.
    pub fn scale_columns(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        if wv.rows() != 1 || wv.cols() != xv.cols() {
            return Err(dims("column scales must be a matching row vector"));
        }
        let out = DenseMatrix::from_fn(xv.rows(), xv.cols(), |i, c| xv[(i, c)] * wv[(0, c)]);
        Ok(self.push(out, Op::ScaleColumns(x, w)))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(dims("elementwise product of different shapes"));
        }
        let data = av
            .as_slice()
            .iter()
            .zip(bv.as_slice())
            .map(|(x, y)| x * y)
            .collect();
        let out = DenseMatrix::from_vec(av.rows(), av.cols(), data)?;
        Ok(self.push(out, Op::Hadamard(a, b)))
    }

    /// Row `i` of the output is `x_i W_{blocks[i]}`, where `w` stacks the
    /// per-block `F_in x F_out` matrices vertically.
    pub fn block_matmul(&mut self, x: Var, w: Var, blocks: &Rc<Vec<usize>>) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        let fin = xv.cols();
        let nb = blocks.iter().max().map_or(0, |m| m + 1);
        if xv.rows() != blocks.len() || wv.rows() < nb * fin {
            return Err(dims("block weights do not match the partition"));
        }
        let fout = wv.cols();
        let mut out = DenseMatrix::zeros(xv.rows(), fout);
        for (i, &b) in blocks.iter().enumerate() {
            let xr = xv.row(i);
            let orow = &mut out.as_mut_slice()[i * fout..(i + 1) * fout];
            for (f, &xf) in xr.iter().enumerate() {
                for (o, &wv) in orow.iter_mut().zip(wv.row(b * fin + f)) {
                    *o += xf * wv;
                }
            }
        }
        Ok(self.push(
            out,
            Op::BlockMatMul {
                x,
                w,
                blocks: Rc::clone(blocks),
            },
        ))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(super::relu);
        self.push(v, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let v = self.value(a).map(|x| super::leaky_relu(x, slope));
        self.push(v, Op::LeakyRelu(a, slope))
    }

    /// Attention scores on every position of `pattern` from projected
    /// features `h` (`N x F`) and score vector `e` (`2F x 1`).
    pub fn edge_scores(
        &mut self,
        pattern: &Rc<Pattern>,
        h: Var,
        e: Var,
        slope: f64,
    ) -> Result<Var> {
        let ev = self.value(e);
        let scores = crate::attention::scores_from_projection(
            self.value(h),
            ev.as_slice(),
            slope,
            pattern,
        )?;
        let out = DenseMatrix::from_vec(scores.len(), 1, scores)?;
        Ok(self.push(
            out,
            Op::EdgeScores {
                pattern: Rc::clone(pattern),
                h,
                e,
                slope,
            },
        ))
    }

    pub fn pattern_softmax(&mut self, pattern: &Rc<Pattern>, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.cols() != 1 || av.rows() != pattern.nnz() {
            return Err(dims("softmax values must be one column per stored entry"));
        }
        let vals = crate::attention::softmax_on_pattern(av.as_slice(), pattern);
        let out = DenseMatrix::from_vec(vals.len(), 1, vals)?;
        Ok(self.push(
            out,
            Op::PatternSoftmax {
                pattern: Rc::clone(pattern),
                a,
            },
        ))
    }

    /// Row-major flattening into `1 x (rows * cols)`.
    pub fn flatten(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let out = DenseMatrix::from_vec(1, av.rows() * av.cols(), av.as_slice().to_vec())
            .expect("sizes match");
        self.push(out, Op::Flatten(a))
    }

    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(bias));
        if bv.rows() != 1 || bv.cols() != av.cols() {
            return Err(dims("bias must be a row vector matching the columns"));
        }
        let out = DenseMatrix::from_fn(av.rows(), av.cols(), |i, j| av[(i, j)] + bv[(0, j)]);
        Ok(self.push(out, Op::AddRowBias(a, bias)))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let n = av.rows().max(1) as f64;
        let out = DenseMatrix::from_fn(1, av.cols(), |_, j| {
            (0..av.rows()).map(|i| av[(i, j)]).sum::<f64>() / n
        });
        self.push(out, Op::MeanRows(a))
    }

    /// Cross-entropy of `1 x C` logits against `label`.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rows() != 1 {
            return Err(dims("cross-entropy expects a single row of logits"));
        }
        let loss = super::cross_entropy(lv.as_slice(), label)?;
        Ok(self.push(
            DenseMatrix::from_vec(1, 1, vec![loss])?,
            Op::CrossEntropy { logits, label },
        ))
    }

    /// Smooth-ℓ1 loss summed over the entries selected by `mask`
    /// (all entries when `mask` is `None`).
    pub fn smooth_l1(
        &mut self,
        pred: Var,
        target: Rc<DenseMatrix>,
        mask: Option<Rc<Vec<bool>>>,
        delta: f64,
    ) -> Result<Var> {
        let pv = self.value(pred);
        if pv.shape() != target.shape() {
            return Err(dims("prediction and target shapes differ"));
        }
        if let Some(m) = &mask {
            if m.len() != pv.as_slice().len() {
                return Err(dims("mask length differs from the prediction size"));
            }
        }
        let loss = pv
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .enumerate()
            .filter(|(k, _)| mask.as_ref().is_none_or(|m| m[*k]))
            .map(|(_, (p, t))| super::smooth_l1_scalar(p - t, delta))
            .sum();
        Ok(self.push(
            DenseMatrix::from_vec(1, 1, vec![loss])?,
            Op::SmoothL1 {
                pred,
                target,
                mask,
                delta,
            },
        ))
    }

    /// `0.5 ‖a‖_F²`.
    pub fn half_squared_norm(&mut self, a: Var) -> Var {
        let n = self.value(a).frobenius_norm();
        self.push(
            DenseMatrix::from_vec(1, 1, vec![0.5 * n * n]).expect("1x1"),
            Op::HalfSquaredNorm(a),
        )
    }

    /// Reverse sweep from the scalar node `root` (seed 1). Returns the
    /// gradient of every parameter leaf, indexed by parameter id; `n_params`
    /// sizes the result.
    pub fn backward(&self, root: Var, n_params: usize) -> Result<Gradients> {
        if root.0 >= self.nodes.len() {
            return Err(Error::MissingTape(root.0));
        }
        let rv = &self.nodes[root.0].value;
        let seed = DenseMatrix::from_fn(rv.rows(), rv.cols(), |_, _| 1.0);
        self.backward_with(root, seed, n_params)
    }

    /// Reverse sweep seeded with an explicit adjoint for `root`.
    pub fn backward_with(
        &self,
        root: Var,
        seed: DenseMatrix,
        n_params: usize,
    ) -> Result<Gradients> {
        if root.0 >= self.nodes.len() {
            return Err(Error::MissingTape(root.0));
        }
        if seed.shape() != self.nodes[root.0].value.shape() {
            return Err(Error::ShapeMismatch("seed differs from root shape".into()));
        }
        let mut adj: Vec<Option<DenseMatrix>> = vec![None; root.0 + 1];
        adj[root.0] = Some(seed);
        let mut grads: Vec<Option<DenseMatrix>> = vec![None; n_params];
        for idx in (0..=root.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Param(p) => {
                    if *p >= n_params {
                        return Err(Error::MissingTape(*p));
                    }
                    accumulate(&mut grads[*p], g);
                }
                Op::Const => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(*b).transpose())?;
                    let gb = self.value(*a).transpose().matmul(&g)?;
                    accumulate(&mut adj[a.0], ga);
                    accumulate(&mut adj[b.0], gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj[a.0], g.clone());
                    accumulate(&mut adj[b.0], g);
                }
                Op::Scale(a, alpha) => accumulate(&mut adj[a.0], g.scale(*alpha)),
                Op::Spmm(s, x) => accumulate(&mut adj[x.0], s.spmm_transpose(&g)?),
                Op::PatternMul { pattern, values, x } => {
                    let (gv, gx) =
                        pattern_mul_backward(pattern, self.value(*values), self.value(*x), &g);
                    accumulate(&mut adj[values.0], gv);
                    accumulate(&mut adj[x.0], gx);
                }
                Op::JacobiValues { data, gamma } => {
                    let gv = self.value(*gamma);
                    let c = gv.cols();
                    let mut gg = DenseMatrix::zeros(1, c);
                    for (p, (&i, &s)) in data.rows.iter().zip(&data.values).enumerate() {
                        for col in 0..c {
                            let gap = data.diag[i] - gv[(0, col)];
                            gg.as_mut_slice()[col] += g[(p, col)] * (-s / (gap * gap));
                        }
                    }
                    accumulate(&mut adj[gamma.0], gg);
                }
                Op::ExpandColumns(x, reps) => {
                    let xv = self.value(*x);
                    let mut gx = DenseMatrix::zeros(xv.rows(), xv.cols());
                    for i in 0..g.rows() {
                        for (c, &v) in g.row(i).iter().enumerate() {
                            gx.as_mut_slice()[i * xv.cols() + c / reps] += v;
                        }
                    }
                    accumulate(&mut adj[x.0], gx);
                }
                Op::ReduceGroups(x, width) => {
                    let xv = self.value(*x);
                    let gx = DenseMatrix::from_fn(xv.rows(), xv.cols(), |i, c| g[(i, c % width)]);
                    accumulate(&mut adj[x.0], gx);
                }
                Op::ScaleColumns(x, w) => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let gx = DenseMatrix::from_fn(xv.rows(), xv.cols(), |i, c| {
                        g[(i, c)] * wv[(0, c)]
                    });
                    let gw = DenseMatrix::from_fn(1, xv.cols(), |_, c| {
                        (0..xv.rows()).map(|i| g[(i, c)] * xv[(i, c)]).sum()
                    });
                    accumulate(&mut adj[x.0], gx);
                    accumulate(&mut adj[w.0], gw);
                }
                Op::Hadamard(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = DenseMatrix::from_fn(g.rows(), g.cols(), |i, j| g[(i, j)] * bv[(i, j)]);
                    let gb = DenseMatrix::from_fn(g.rows(), g.cols(), |i, j| g[(i, j)] * av[(i, j)]);
                    accumulate(&mut adj[a.0], ga);
                    accumulate(&mut adj[b.0], gb);
                }
                Op::BlockMatMul { x, w, blocks } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let fin = xv.cols();
                    let mut gx = DenseMatrix::zeros(xv.rows(), fin);
                    let mut gw = DenseMatrix::zeros(wv.rows(), wv.cols());
                    for (i, &b) in blocks.iter().enumerate() {
                        let gr = g.row(i);
                        for f in 0..fin {
                            let wr = wv.row(b * fin + f);
                            gx.as_mut_slice()[i * fin + f] =
                                gr.iter().zip(wr).map(|(a, b)| a * b).sum();
                            let xf = xv[(i, f)];
                            for (o, &gv) in gw.row_mut(b * fin + f).iter_mut().zip(gr) {
                                *o += xf * gv;
                            }
                        }
                    }
                    accumulate(&mut adj[x.0], gx);
                    accumulate(&mut adj[w.0], gw);
                }
                Op::Relu(a) => {
                    let av = self.value(*a);
                    let ga = DenseMatrix::from_fn(g.rows(), g.cols(), |i, j| {
                        if av[(i, j)] > 0.0 {
                            g[(i, j)]
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut adj[a.0], ga);
                }
                Op::LeakyRelu(a, slope) => {
                    let av = self.value(*a);
                    let ga = DenseMatrix::from_fn(g.rows(), g.cols(), |i, j| {
                        if av[(i, j)] > 0.0 {
                            g[(i, j)]
                        } else {
                            slope * g[(i, j)]
                        }
                    });
                    accumulate(&mut adj[a.0], ga);
                }
                Op::EdgeScores {
                    pattern,
                    h,
                    e,
                    slope,
                } => {
                    let (hv, ev) = (self.value(*h), self.value(*e));
                    let f = hv.cols();
                    let (own, nbr) = ev.as_slice().split_at(f);
                    let dot = |w: &[f64], i: usize| -> f64 {
                        hv.row(i).iter().zip(w).map(|(a, b)| a * b).sum()
                    };
                    let own_part: Vec<f64> = (0..hv.rows()).map(|i| dot(own, i)).collect();
                    let nbr_part: Vec<f64> = (0..hv.rows()).map(|i| dot(nbr, i)).collect();
                    let mut gh = DenseMatrix::zeros(hv.rows(), f);
                    let mut ge = DenseMatrix::zeros(2 * f, 1);
                    for (p, (i, j)) in pattern.positions().enumerate() {
                        let z = own_part[i] + nbr_part[j];
                        let dz = g[(p, 0)] * if z > 0.0 { 1.0 } else { *slope };
                        if dz == 0.0 {
                            continue;
                        }
                        for k in 0..f {
                            ge.as_mut_slice()[k] += dz * hv[(i, k)];
                            ge.as_mut_slice()[f + k] += dz * hv[(j, k)];
                            gh.as_mut_slice()[i * f + k] += dz * own[k];
                            gh.as_mut_slice()[j * f + k] += dz * nbr[k];
                        }
                    }
                    accumulate(&mut adj[h.0], gh);
                    accumulate(&mut adj[e.0], ge);
                }
                Op::PatternSoftmax { pattern, a } => {
                    let y = &node.value;
                    let mut ga = DenseMatrix::zeros(y.rows(), 1);
                    for i in 0..pattern.n_rows() {
                        let r = pattern.row_range(i);
                        let inner: f64 = r.clone().map(|p| y[(p, 0)] * g[(p, 0)]).sum();
                        for p in r {
                            ga.as_mut_slice()[p] = y[(p, 0)] * (g[(p, 0)] - inner);
                        }
                    }
                    accumulate(&mut adj[a.0], ga);
                }
                Op::Flatten(a) => {
                    let av = self.value(*a);
                    let ga = DenseMatrix::from_vec(av.rows(), av.cols(), g.into_vec())?;
                    accumulate(&mut adj[a.0], ga);
                }
                Op::AddRowBias(a, b) => {
                    let gb = DenseMatrix::from_fn(1, g.cols(), |_, j| {
                        (0..g.rows()).map(|i| g[(i, j)]).sum()
                    });
                    accumulate(&mut adj[b.0], gb);
                    accumulate(&mut adj[a.0], g);
                }
                Op::MeanRows(a) => {
                    let av = self.value(*a);
                    let n = av.rows().max(1) as f64;
                    let ga = DenseMatrix::from_fn(av.rows(), av.cols(), |_, j| g[(0, j)] / n);
                    accumulate(&mut adj[a.0], ga);
                }
                Op::CrossEntropy { logits, label } => {
                    let lv = self.value(*logits);
                    let p = super::softmax_row(lv.as_slice());
                    let scale = g[(0, 0)];
                    let data = p
                        .iter()
                        .enumerate()
                        .map(|(c, &pc)| scale * (pc - if c == *label { 1.0 } else { 0.0 }))
                        .collect();
                    accumulate(&mut adj[logits.0], DenseMatrix::from_vec(1, lv.cols(), data)?);
                }
                Op::SmoothL1 {
                    pred,
                    target,
                    mask,
                    delta,
                } => {
                    let pv = self.value(*pred);
                    let scale = g[(0, 0)];
                    let data = pv
                        .as_slice()
                        .iter()
                        .zip(target.as_slice())
                        .enumerate()
                        .map(|(k, (p, t))| {
                            if mask.as_ref().is_none_or(|m| m[k]) {
                                let r = p - t;
                                scale * if r.abs() < *delta { r / delta } else { r.signum() }
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    accumulate(&mut adj[pred.0], DenseMatrix::from_vec(pv.rows(), pv.cols(), data)?);
                }
                Op::HalfSquaredNorm(a) => {
                    let s = g[(0, 0)];
                    accumulate(&mut adj[a.0], self.value(*a).scale(s));
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(slot: &mut Option<DenseMatrix>, g: DenseMatrix) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn pattern_mul_backward(
    pattern: &Pattern,
    values: &DenseMatrix,
    x: &DenseMatrix,
    g: &DenseMatrix,
) -> (DenseMatrix, DenseMatrix) {
    let c = x.cols();
    let shared = values.cols() == 1;
    let mut gv = DenseMatrix::zeros(values.rows(), values.cols());
    let mut gx = DenseMatrix::zeros(x.rows(), c);
    for i in 0..pattern.n_rows() {
        let gr = g.row(i);
        for p in pattern.row_range(i) {
            let j = pattern.col_idx()[p];
            let xr = x.row(j);
            if shared {
                let w = values[(p, 0)];
                gv.as_mut_slice()[p] += gr.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
                for (o, &gi) in gx.row_mut(j).iter_mut().zip(gr) {
                    *o += w * gi;
                }
            } else {
                for k in 0..c {
                    gv.as_mut_slice()[p * c + k] += gr[k] * xr[k];
                    gx.as_mut_slice()[j * c + k] += values[(p, k)] * gr[k];
                }
            }
        }
    }
    (gv, gx)
}
