//! Layer specifications, parameter allocation, and the forward pass.
//!
//! Multi-feature layers are banks of scalar filters, one per input/output
//! feature pair. Banks that carry per-pair sparse values (edge varying,
//! hybrid, ARMA) work on an expanded signal whose column `f * W + r` is a
//! copy of input feature `f`, and collapse back to output features with a
//! grouped column sum.

use std::rc::Rc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::{ParamClass, ParamStore};
use super::tape::{Gradients, JacobiData, Tape, Var};
use crate::attention::{softmax_weights, DEFAULT_LEAKY_SLOPE};
use crate::error::{Error, Result};
use crate::filters::{FilterKind, SINGULARITY_EPS};
use crate::graph::{CsrMatrix, Pattern, SupportMask};
use crate::linalg::DenseMatrix;
use crate::rng::Rng;

/// Everything a forward pass needs from the shift operator, computed once.
#[derive(Debug, Clone)]
pub struct GraphContext {
    shift: Rc<CsrMatrix>,
    support: Rc<Pattern>,
    diagonal: Rc<Pattern>,
    jacobi: Rc<JacobiData>,
    softmax_weights: DenseMatrix,
    hash: String,
}

impl GraphContext {
    pub fn new(shift: CsrMatrix) -> Result<Self> {
        if !shift.is_square() {
            return Err(Error::DimensionMismatch("shift must be square".into()));
        }
        let n = shift.n_rows();
        let support = Rc::new(SupportMask::from_shift(&shift).into_pattern());
        let off = Rc::new(shift.pattern().filter(|i, j| i != j));
        let jacobi = Rc::new(JacobiData {
            rows: off.row_of_positions(),
            values: off.positions().map(|(i, j)| shift.get(i, j)).collect(),
            diag: shift.diagonal(),
            pattern: off,
        });
        let w = softmax_weights(&shift);
        let softmax_weights = DenseMatrix::from_vec(w.len(), 1, w)?;
        let hash = shift_hash(&shift);
        Ok(Self {
            shift: Rc::new(shift),
            support,
            diagonal: Rc::new(Pattern::diagonal(n)),
            jacobi,
            softmax_weights,
            hash,
        })
    }

    pub fn shift(&self) -> &CsrMatrix {
        &self.shift
    }

    pub fn n(&self) -> usize {
        self.shift.n_rows()
    }

    /// Pattern of `I + S`.
    pub fn support(&self) -> &Pattern {
        &self.support
    }

    /// Hex SHA-256 of the shift's canonical byte encoding.
    pub fn hash(&self) -> &str {
        &self.hash
    }
}

pub(crate) fn shift_hash(s: &CsrMatrix) -> String {
    let digest = Sha256::digest(s.to_le_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    Relu,
    LeakyRelu,
    Identity,
}

/// Filter family of one layer together with its structural hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterSpec {
    Polynomial {
        order: usize,
    },
    EdgeVarying {
        order: usize,
    },
    BlockVarying {
        order: usize,
        block_of_node: Vec<usize>,
    },
    Hybrid {
        order: usize,
        important: Vec<usize>,
    },
    ArmaJacobi {
        poles: usize,
        jacobi_order: usize,
        direct_order: usize,
    },
    Gat {
        #[serde(default)]
        tied: bool,
        #[serde(default)]
        weighted_softmax: bool,
    },
    Gcat {
        order: usize,
        #[serde(default)]
        tied: bool,
        #[serde(default)]
        weighted_softmax: bool,
    },
    EdgeVaryingGat {
        order: usize,
        #[serde(default)]
        tied: bool,
        #[serde(default)]
        weighted_softmax: bool,
        /// Use `Φ^(0) = I` instead of an attention-generated `Φ^(0)`.
        #[serde(default)]
        identity_phi0: bool,
    },
    HybridGcat {
        order: usize,
        #[serde(default)]
        tied: bool,
        #[serde(default)]
        weighted_softmax: bool,
    },
}

impl FilterSpec {
    /// Counting descriptor of this filter on a graph with `n` nodes and
    /// `m` off-diagonal edges in `S`.
    pub fn kind(&self, shift: &CsrMatrix) -> FilterKind {
        match self {
            FilterSpec::Polynomial { order } => FilterKind::Polynomial { order: *order },
            FilterSpec::EdgeVarying { order } => FilterKind::EdgeVarying {
                order: *order,
                edges: shift.off_diagonal_nnz(),
                nodes: shift.n_rows(),
            },
            FilterSpec::BlockVarying {
                order,
                block_of_node,
            } => FilterKind::BlockVarying {
                blocks: block_count(block_of_node),
                order: *order,
            },
            FilterSpec::Hybrid { order, important } => {
                let mut mask = vec![false; shift.n_rows()];
                important
                    .iter()
                    .filter(|&&i| i < shift.n_rows())
                    .for_each(|&i| mask[i] = true);
                FilterKind::Hybrid {
                    important: mask.iter().filter(|&&b| b).count(),
                    important_edges: shift
                        .pattern()
                        .positions()
                        .filter(|&(i, j)| i != j && mask[i])
                        .count(),
                    order: *order,
                }
            }
            FilterSpec::ArmaJacobi {
                poles,
                direct_order,
                ..
            } => FilterKind::Arma {
                poles: *poles,
                order: *direct_order,
            },
            FilterSpec::Gat { tied, .. } => FilterKind::Gat { tied: *tied },
            FilterSpec::Gcat { order, tied, .. } => FilterKind::Gcat {
                order: *order,
                tied: *tied,
            },
            FilterSpec::EdgeVaryingGat { order, tied, .. } => FilterKind::EdgeVaryingGat {
                order: *order,
                tied: *tied,
            },
            FilterSpec::HybridGcat { order, tied, .. } => FilterKind::HybridGcat {
                order: *order,
                tied: *tied,
            },
        }
    }
}

fn block_count(block_of_node: &[usize]) -> usize {
    block_of_node.iter().max().map_or(0, |m| m + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub filter: FilterSpec,
    /// Output features of the layer.
    pub features: usize,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
}

/// Map from the last layer's `N x F` features to the model output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Readout {
    /// Output is the last layer's features as they are.
    None,
    /// Row-major flattening to `1 x NF`, then a dense map to `classes`.
    Flatten { classes: usize },
    /// Dense map applied at every node: `N x outputs`.
    PerNode { outputs: usize },
    /// Average over nodes, then a dense map to `classes`.
    MeanPool { classes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub input_features: usize,
    pub layers: Vec<LayerSpec>,
    pub readout: Readout,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_features == 0 {
            return Err(Error::Config("input_features must be positive".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.features == 0 {
                return Err(Error::Config(format!("layer {l} has zero features")));
            }
            match &layer.filter {
                FilterSpec::ArmaJacobi { poles: 0, .. } => {
                    return Err(Error::Config(format!("layer {l}: ARMA needs a pole")))
                }
                FilterSpec::Gcat {
                    order: 0,
                    tied: true,
                    ..
                } => {
                    return Err(Error::IncompatibleDims(format!(
                        "layer {l}: tying the attention transform to A_1 needs order >= 1"
                    )))
                }
                FilterSpec::BlockVarying { block_of_node, .. } => {
                    let b = block_count(block_of_node);
                    if (0..b).any(|id| !block_of_node.contains(&id)) {
                        return Err(Error::Config(format!("layer {l}: empty block")));
                    }
                }
                _ => {}
            }
        }
        match self.readout {
            Readout::Flatten { classes: 0 }
            | Readout::PerNode { outputs: 0 }
            | Readout::MeanPool { classes: 0 } => {
                Err(Error::Config("readout needs a positive output size".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn output_features(&self) -> usize {
        self.layers
            .last()
            .map_or(self.input_features, |l| l.features)
    }
}

/// Parameter indices of one layer.
#[derive(Debug, Clone, Default, PartialEq)]
struct LayerParams {
    /// `A_k`, block weights, hybrid `a_k`, or ARMA `α_k`.
    coeffs: Vec<usize>,
    /// Second mixing bank of the hybrid attention layer.
    coeffs_attn: Vec<usize>,
    /// Sparse value banks `Φ^(k)`.
    phis: Vec<usize>,
    /// Attention `(B, e)` pairs.
    heads: Vec<(usize, usize)>,
    beta: Option<usize>,
    gamma: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
struct ReadoutParams {
    weight: usize,
    bias: usize,
}

/// Training target for one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Loss {
    CrossEntropy(usize),
    SmoothL1 {
        target: DenseMatrix,
        mask: Option<Vec<bool>>,
        delta: f64,
    },
    /// `0.5 ‖output‖²`.
    HalfSquared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    n: usize,
    shift_hash: String,
    params: ParamStore,
    layers: Vec<LayerParams>,
    readout: Option<ReadoutParams>,
}

fn uniform(rng: &mut Rng, rows: usize, cols: usize, bound: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| {
        if bound > 0.0 {
            rng.gen_range(-bound..bound)
        } else {
            0.0
        }
    })
}

fn glorot(rng: &mut Rng, rows: usize, cols: usize) -> DenseMatrix {
    uniform(rng, rows, cols, (6.0 / (rows + cols) as f64).sqrt())
}

/// Entries of a value bank on `pattern`, `C` columns, each drawn from
/// `U(±scale / nnz(row))`.
fn row_scaled(rng: &mut Rng, pattern: &Pattern, cols: usize, scale: f64) -> DenseMatrix {
    let rows = pattern.row_of_positions();
    let counts: Vec<usize> = (0..pattern.n_rows())
        .map(|i| pattern.row_range(i).len())
        .collect();
    DenseMatrix::from_fn(pattern.nnz(), cols, |p, _| {
        let b = scale / counts[rows[p]] as f64;
        rng.gen_range(-b..b)
    })
}

fn hybrid_masks(ctx: &GraphContext, important: &[usize]) -> Result<(Rc<Pattern>, Rc<Pattern>)> {
    let n = ctx.n();
    let mut mask = vec![false; n];
    for &i in important {
        if i >= n {
            return Err(Error::InvalidArgument(format!("important node {i} >= {n}")));
        }
        mask[i] = true;
    }
    Ok((
        Rc::new(Pattern::diagonal(n).filter(|i, _| mask[i])),
        Rc::new(ctx.shift.pattern().filter(|i, j| i != j && mask[i])),
    ))
}

impl Model {
    /// Allocates and initializes every parameter for graph `ctx`.
    pub fn new(spec: ModelSpec, ctx: &GraphContext, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let n = ctx.n();
        let mut params = ParamStore::new();
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut fin = spec.input_features;
        for (l, layer) in spec.layers.iter().enumerate() {
            let fout = layer.features;
            let c = fin * fout;
            let mut lp = LayerParams::default();
            let name = |what: &str| format!("layer{l}.{what}");
            match &layer.filter {
                FilterSpec::Polynomial { order } => {
                    let b = 1.0 / (*order + 1) as f64;
                    for k in 0..=*order {
                        lp.coeffs.push(params.push(
                            name(&format!("a{k}")),
                            ParamClass::Polynomial,
                            uniform(rng, fin, fout, b),
                        ));
                    }
                }
                FilterSpec::BlockVarying {
                    order,
                    block_of_node,
                } => {
                    if block_of_node.len() != n {
                        return Err(Error::DimensionMismatch(format!(
                            "layer {l}: block map covers {} nodes, graph has {n}",
                            block_of_node.len()
                        )));
                    }
                    let b = 1.0 / (*order + 1) as f64;
                    let nb = block_count(block_of_node);
                    for k in 0..=*order {
                        lp.coeffs.push(params.push(
                            name(&format!("block{k}")),
                            ParamClass::Block,
                            uniform(rng, nb * fin, fout, b),
                        ));
                    }
                }
                FilterSpec::EdgeVarying { order } => {
                    let b = 1.0 / (*order + 1) as f64;
                    lp.phis.push(params.push(
                        name("phi0"),
                        ParamClass::EdgeVarying,
                        uniform(rng, n, c, b),
                    ));
                    for k in 1..=*order {
                        lp.phis.push(params.push(
                            name(&format!("phi{k}")),
                            ParamClass::EdgeVarying,
                            row_scaled(rng, &ctx.support, c, 1.0),
                        ));
                    }
                }
                FilterSpec::Hybrid { order, important } => {
                    let (diag, edges) = hybrid_masks(ctx, important)?;
                    let b = 1.0 / (*order + 1) as f64;
                    lp.phis.push(params.push(
                        name("phi0"),
                        ParamClass::Hybrid,
                        uniform(rng, diag.nnz(), c, b),
                    ));
                    for k in 1..=*order {
                        lp.phis.push(params.push(
                            name(&format!("phi{k}")),
                            ParamClass::Hybrid,
                            row_scaled(rng, &edges, c, 1.0),
                        ));
                    }
                    for k in 0..=*order {
                        lp.coeffs.push(params.push(
                            name(&format!("a{k}")),
                            ParamClass::Hybrid,
                            uniform(rng, fin, fout, b),
                        ));
                    }
                }
                FilterSpec::ArmaJacobi {
                    poles,
                    direct_order,
                    ..
                } => {
                    let width = fin * poles * fout;
                    let dmax = ctx
                        .jacobi
                        .diag
                        .iter()
                        .fold(0.0_f64, |m, d| m.max(d.abs()));
                    lp.beta = Some(params.push(
                        name("beta"),
                        ParamClass::ArmaBeta,
                        uniform(rng, 1, width, 0.1),
                    ));
                    let per_pole = poles * fout;
                    lp.gamma = Some(params.push(
                        name("gamma"),
                        ParamClass::ArmaGamma,
                        DenseMatrix::from_fn(1, width, |_, col| {
                            dmax + 1.0 + 0.5 * ((col % per_pole) / fout) as f64
                        }),
                    ));
                    for k in 0..=*direct_order {
                        lp.coeffs.push(params.push(
                            name(&format!("alpha{k}")),
                            ParamClass::ArmaAlpha,
                            uniform(rng, fin, fout, 0.1),
                        ));
                    }
                }
                FilterSpec::Gat { tied, .. } => {
                    let a = params.push(name("a1"), ParamClass::Mixing, glorot(rng, fin, fout));
                    lp.coeffs.push(a);
                    let b = if *tied {
                        a
                    } else {
                        params.push(name("b"), ParamClass::AttentionMixing, glorot(rng, fin, fout))
                    };
                    let e = params.push(name("e"), ParamClass::AttentionScore, glorot(rng, 2 * fout, 1));
                    lp.heads.push((b, e));
                }
                FilterSpec::Gcat { order, tied, .. } => {
                    for k in 0..=*order {
                        lp.coeffs.push(params.push(
                            name(&format!("a{k}")),
                            ParamClass::Mixing,
                            glorot(rng, fin, fout),
                        ));
                    }
                    let b = if *tied {
                        lp.coeffs[1]
                    } else {
                        params.push(name("b"), ParamClass::AttentionMixing, glorot(rng, fin, fout))
                    };
                    let e = params.push(name("e"), ParamClass::AttentionScore, glorot(rng, 2 * fout, 1));
                    lp.heads.push((b, e));
                }
                FilterSpec::EdgeVaryingGat {
                    order,
                    tied,
                    identity_phi0,
                    ..
                } => {
                    for k in 0..=*order {
                        lp.coeffs.push(params.push(
                            name(&format!("a{k}")),
                            ParamClass::Mixing,
                            glorot(rng, fin, fout),
                        ));
                    }
                    let first = usize::from(*identity_phi0);
                    for k in first..=*order {
                        lp.heads.push(attention_head(
                            &mut params,
                            rng,
                            &name(&format!("head{k}")),
                            *tied,
                            lp.coeffs[k],
                            fin,
                            fout,
                        ));
                    }
                }
                FilterSpec::HybridGcat { order, tied, .. } => {
                    for k in 0..=*order {
                        lp.coeffs.push(params.push(
                            name(&format!("a{k}")),
                            ParamClass::Mixing,
                            glorot(rng, fin, fout),
                        ));
                        lp.coeffs_attn.push(params.push(
                            name(&format!("a_attn{k}")),
                            ParamClass::Mixing,
                            glorot(rng, fin, fout),
                        ));
                    }
                    for k in 0..=*order {
                        lp.heads.push(attention_head(
                            &mut params,
                            rng,
                            &name(&format!("head{k}")),
                            *tied,
                            lp.coeffs_attn[k],
                            fin,
                            fout,
                        ));
                    }
                }
            }
            layers.push(lp);
            fin = fout;
        }
        let readout = match spec.readout {
            Readout::None => None,
            Readout::Flatten { classes } => Some((n * fin, classes)),
            Readout::PerNode { outputs } => Some((fin, outputs)),
            Readout::MeanPool { classes } => Some((fin, classes)),
        }
        .map(|(rows, cols)| ReadoutParams {
            weight: params.push("readout.weight", ParamClass::Readout, glorot(rng, rows, cols)),
            bias: params.push(
                "readout.bias",
                ParamClass::Readout,
                DenseMatrix::zeros(1, cols),
            ),
        });
        Ok(Self {
            spec,
            n,
            shift_hash: ctx.hash.clone(),
            params,
            layers,
            readout,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Hash of the shift the model was built for.
    pub fn shift_hash(&self) -> &str {
        &self.shift_hash
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Trainable scalars in the graph filtering layers, readout excluded.
    pub fn filter_param_count(&self) -> usize {
        self.param_count() - self.params.count_class(ParamClass::Readout)
    }

    /// Moves every ARMA `γ` at least `ARMA_GUARD_OFFSET` away from each
    /// diagonal entry it comes within `SINGULARITY_EPS` of.
    pub fn enforce_arma_guard(&mut self, ctx: &GraphContext) {
        let diag = &ctx.jacobi.diag;
        for p in self.params.iter_mut() {
            if p.class != ParamClass::ArmaGamma {
                continue;
            }
            for g in p.value.as_mut_slice() {
                for &d in diag {
                    if (d - *g).abs() <= SINGULARITY_EPS {
                        let side = if *g >= d { 1.0 } else { -1.0 };
                        *g = d + side * super::adam::ARMA_GUARD_OFFSET;
                    }
                }
            }
        }
    }

    fn check_context(&self, ctx: &GraphContext, x0: &DenseMatrix) -> Result<()> {
        if ctx.n() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "model built for {} nodes, graph has {}",
                self.n,
                ctx.n()
            )));
        }
        if x0.rows() != self.n || x0.cols() != self.spec.input_features {
            return Err(Error::DimensionMismatch(format!(
                "input is {}x{}, expected {}x{}",
                x0.rows(),
                x0.cols(),
                self.n,
                self.spec.input_features
            )));
        }
        Ok(())
    }

    /// Records the forward pass on `tape` and returns the output node.
    pub fn forward_on(&self, tape: &mut Tape, ctx: &GraphContext, x0: &DenseMatrix) -> Result<Var> {
        self.check_context(ctx, x0)?;
        let leaves: Vec<Var> = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| tape.param(i, p.value.clone()))
            .collect();
        let mut x = tape.constant(x0.clone());
        let mut fin = self.spec.input_features;
        for (layer, lp) in self.spec.layers.iter().zip(&self.layers) {
            let fout = layer.features;
            let y = layer_forward(tape, ctx, &layer.filter, lp, &leaves, x, fin, fout)?;
            x = match layer.nonlinearity {
                Nonlinearity::Relu => tape.relu(y),
                Nonlinearity::LeakyRelu => tape.leaky_relu(y, DEFAULT_LEAKY_SLOPE),
                Nonlinearity::Identity => y,
            };
            fin = fout;
        }
        let Some(ro) = &self.readout else {
            return Ok(x);
        };
        let (w, b) = (leaves[ro.weight], leaves[ro.bias]);
        let pre = match self.spec.readout {
            Readout::Flatten { .. } => tape.flatten(x),
            Readout::MeanPool { .. } => tape.mean_rows(x),
            _ => x,
        };
        let y = tape.matmul(pre, w)?;
        tape.add_row_bias(y, b)
    }

    pub fn forward(&self, ctx: &GraphContext, x0: &DenseMatrix) -> Result<(Tape, Var)> {
        let mut tape = Tape::new();
        let out = self.forward_on(&mut tape, ctx, x0)?;
        Ok((tape, out))
    }

    pub fn predict(&self, ctx: &GraphContext, x0: &DenseMatrix) -> Result<DenseMatrix> {
        let (tape, out) = self.forward(ctx, x0)?;
        Ok(tape.value(out).clone())
    }

    /// Loss and parameter gradients for one sample.
    pub fn loss_and_grad(
        &self,
        ctx: &GraphContext,
        x0: &DenseMatrix,
        loss: &Loss,
    ) -> Result<(f64, Gradients)> {
        let (mut tape, out) = self.forward(ctx, x0)?;
        let l = attach_loss(&mut tape, out, loss)?;
        let value = tape.value(l)[(0, 0)];
        let grads = tape.backward(l, self.params.len())?;
        Ok((value, grads))
    }

    /// Model output and loss for one sample.
    pub fn output_and_loss(
        &self,
        ctx: &GraphContext,
        x0: &DenseMatrix,
        loss: &Loss,
    ) -> Result<(DenseMatrix, f64)> {
        let (mut tape, out) = self.forward(ctx, x0)?;
        let l = attach_loss(&mut tape, out, loss)?;
        let value = tape.value(l)[(0, 0)];
        Ok((tape.value(out).clone(), value))
    }

    /// Loss without gradients.
    pub fn loss(&self, ctx: &GraphContext, x0: &DenseMatrix, loss: &Loss) -> Result<f64> {
        let (mut tape, out) = self.forward(ctx, x0)?;
        let l = attach_loss(&mut tape, out, loss)?;
        Ok(tape.value(l)[(0, 0)])
    }

    /// Mean loss and mean gradient over `batch`, accumulated in the given order.
    pub fn batch_gradient<'a>(
        &self,
        ctx: &GraphContext,
        batch: impl IntoIterator<Item = (&'a DenseMatrix, &'a Loss)>,
    ) -> Result<(f64, Vec<DenseMatrix>)> {
        let mut total = 0.0;
        let mut acc: Vec<DenseMatrix> = self
            .params
            .iter()
            .map(|p| DenseMatrix::zeros(p.value.rows(), p.value.cols()))
            .collect();
        let mut count = 0usize;
        for (x, loss) in batch {
            let (l, g) = self.loss_and_grad(ctx, x, loss)?;
            total += l;
            for (a, gi) in acc.iter_mut().zip(&g.grads) {
                if let Some(gi) = gi {
                    a.add_assign(gi);
                }
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let inv = 1.0 / count as f64;
        Ok((total * inv, acc.into_iter().map(|a| a.scale(inv)).collect()))
    }
}

fn attention_head(
    params: &mut ParamStore,
    rng: &mut Rng,
    name: &str,
    tied: bool,
    tie_to: usize,
    fin: usize,
    fout: usize,
) -> (usize, usize) {
    let b = if tied {
        tie_to
    } else {
        params.push(
            format!("{name}.b"),
            ParamClass::AttentionMixing,
            glorot(rng, fin, fout),
        )
    };
    let e = params.push(
        format!("{name}.e"),
        ParamClass::AttentionScore,
        glorot(rng, 2 * fout, 1),
    );
    (b, e)
}

pub(crate) fn attach_loss(tape: &mut Tape, out: Var, loss: &Loss) -> Result<Var> {
    match loss {
        Loss::CrossEntropy(label) => tape.cross_entropy(out, *label),
        Loss::SmoothL1 {
            target,
            mask,
            delta,
        } => tape.smooth_l1(
            out,
            Rc::new(target.clone()),
            mask.as_ref().map(|m| Rc::new(m.clone())),
            *delta,
        ),
        Loss::HalfSquared => Ok(tape.half_squared_norm(out)),
    }
}

fn check_param(tape: &Tape, v: Var, rows: usize, cols: usize, what: &str) -> Result<()> {
    let s = tape.value(v).shape();
    if s != (rows, cols) {
        return Err(Error::ShapeMismatch(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            s.0, s.1
        )));
    }
    Ok(())
}

/// `Σ_k P_k A_k` where `P_k` is produced by `step` from `P_{k-1}`.
fn mixed_powers(
    tape: &mut Tape,
    x: Var,
    coeffs: &[Var],
    mut step: impl FnMut(&mut Tape, Var) -> Result<Var>,
) -> Result<Var> {
    let mut power = x;
    let mut terms = Vec::with_capacity(coeffs.len());
    for (k, &a) in coeffs.iter().enumerate() {
        if k > 0 {
            power = step(tape, power)?;
        }
        terms.push(tape.matmul(power, a)?);
    }
    tape.sum(&terms)
}

/// Attention shift values on `supp(I + S)` from features `x`.
fn attention_values(
    tape: &mut Tape,
    ctx: &GraphContext,
    x: Var,
    head: (Var, Var),
    weighted: bool,
) -> Result<Var> {
    let h = tape.matmul(x, head.0)?;
    let mut scores = tape.edge_scores(&ctx.support, h, head.1, DEFAULT_LEAKY_SLOPE)?;
    if weighted {
        let w = tape.constant(ctx.softmax_weights.clone());
        scores = tape.hadamard(scores, w)?;
    }
    tape.pattern_softmax(&ctx.support, scores)
}

/// Edge-varying bank: `Σ_k Φ^(k:0)` applied per channel to the expanded
/// input, collapsed to `fout` columns.
fn edge_varying_bank(
    tape: &mut Tape,
    x: Var,
    fout: usize,
    first: (&Rc<Pattern>, Var),
    rest: (&Rc<Pattern>, &[Var]),
) -> Result<Var> {
    let expanded = tape.expand_columns(x, fout);
    let mut z = tape.pattern_mul(first.0, first.1, expanded)?;
    let mut acc = z;
    for &phi in rest.1 {
        z = tape.pattern_mul(rest.0, phi, z)?;
        acc = tape.add(acc, z)?;
    }
    tape.reduce_groups(acc, fout)
}

#[allow(clippy::too_many_arguments)]
fn layer_forward(
    tape: &mut Tape,
    ctx: &GraphContext,
    filter: &FilterSpec,
    lp: &LayerParams,
    leaves: &[Var],
    x: Var,
    fin: usize,
    fout: usize,
) -> Result<Var> {
    let pick = |idx: &[usize]| -> Vec<Var> { idx.iter().map(|&i| leaves[i]).collect() };
    let coeffs = pick(&lp.coeffs);
    let heads: Vec<(Var, Var)> = lp
        .heads
        .iter()
        .map(|&(b, e)| (leaves[b], leaves[e]))
        .collect();
    for (k, &a) in coeffs.iter().enumerate() {
        if !matches!(filter, FilterSpec::BlockVarying { .. }) {
            check_param(tape, a, fin, fout, &format!("coefficient {k}"))?;
        }
    }
    for &(b, e) in &heads {
        check_param(tape, b, fin, fout, "attention transform")?;
        check_param(tape, e, 2 * fout, 1, "attention score vector")?;
    }
    let shift = Rc::clone(&ctx.shift);
    let spmm = move |t: &mut Tape, p: Var| t.spmm(&shift, p);
    let c = fin * fout;
    match filter {
        FilterSpec::Polynomial { .. } => mixed_powers(tape, x, &coeffs, spmm),
        FilterSpec::BlockVarying { block_of_node, .. } => {
            let blocks = Rc::new(block_of_node.clone());
            let mut power = x;
            let mut terms = Vec::new();
            for (k, &w) in coeffs.iter().enumerate() {
                check_param(
                    tape,
                    w,
                    block_count(block_of_node) * fin,
                    fout,
                    "block weights",
                )?;
                if k > 0 {
                    power = tape.spmm(&ctx.shift, power)?;
                }
                terms.push(tape.block_matmul(power, w, &blocks)?);
            }
            tape.sum(&terms)
        }
        FilterSpec::EdgeVarying { .. } => {
            let phis = pick(&lp.phis);
            check_param(tape, phis[0], ctx.n(), c, "phi0")?;
            for &p in &phis[1..] {
                check_param(tape, p, ctx.support.nnz(), c, "edge-varying values")?;
            }
            edge_varying_bank(
                tape,
                x,
                fout,
                (&ctx.diagonal, phis[0]),
                (&ctx.support, &phis[1..]),
            )
        }
        FilterSpec::Hybrid { important, .. } => {
            let (diag, edges) = hybrid_masks(ctx, important)?;
            let phis = pick(&lp.phis);
            check_param(tape, phis[0], diag.nnz(), c, "hybrid phi0")?;
            for &p in &phis[1..] {
                check_param(tape, p, edges.nnz(), c, "hybrid values")?;
            }
            let local = edge_varying_bank(tape, x, fout, (&diag, phis[0]), (&edges, &phis[1..]))?;
            let global = mixed_powers(tape, x, &coeffs, spmm)?;
            tape.add(local, global)
        }
        FilterSpec::ArmaJacobi {
            poles,
            jacobi_order,
            ..
        } => {
            let width = fin * poles * fout;
            let beta = leaves[lp.beta.expect("ARMA layer has beta")];
            let gamma = leaves[lp.gamma.expect("ARMA layer has gamma")];
            check_param(tape, beta, 1, width, "ARMA beta")?;
            check_param(tape, gamma, 1, width, "ARMA gamma")?;
            for (i, &d) in ctx.jacobi.diag.iter().enumerate() {
                for &g in tape.value(gamma).as_slice() {
                    if (d - g).abs() <= SINGULARITY_EPS {
                        return Err(Error::SingularDiagonal { node: i, gap: d - g });
                    }
                }
            }
            let r = tape.jacobi_values(&ctx.jacobi, gamma)?;
            let mut z = tape.expand_columns(x, poles * fout);
            let mut acc = None;
            for k in 0..=*jacobi_order {
                if k > 0 {
                    z = tape.pattern_mul(&ctx.jacobi.pattern, r, z)?;
                }
                let term = if k < *jacobi_order {
                    tape.scale_columns(z, beta)?
                } else {
                    z
                };
                acc = Some(match acc {
                    None => term,
                    Some(a) => tape.add(a, term)?,
                });
            }
            let poles_out = tape.reduce_groups(acc.expect("at least one term"), fout)?;
            let direct = mixed_powers(tape, x, &coeffs, spmm)?;
            tape.add(poles_out, direct)
        }
        FilterSpec::Gat {
            weighted_softmax, ..
        } => {
            let phi = attention_values(tape, ctx, x, heads[0], *weighted_softmax)?;
            let shifted = tape.pattern_mul(&ctx.support, phi, x)?;
            tape.matmul(shifted, coeffs[0])
        }
        FilterSpec::Gcat {
            weighted_softmax, ..
        } => {
            let phi = attention_values(tape, ctx, x, heads[0], *weighted_softmax)?;
            let support = Rc::clone(&ctx.support);
            mixed_powers(tape, x, &coeffs, move |t, p| t.pattern_mul(&support, phi, p))
        }
        FilterSpec::EdgeVaryingGat {
            weighted_softmax,
            identity_phi0,
            ..
        } => {
            let mut phis = Vec::with_capacity(heads.len());
            for &h in &heads {
                phis.push(attention_values(tape, ctx, x, h, *weighted_softmax)?);
            }
            let mut phis = phis.into_iter();
            let mut z = x;
            let mut terms = Vec::with_capacity(coeffs.len());
            for (k, &a) in coeffs.iter().enumerate() {
                if k > 0 || !identity_phi0 {
                    let phi = phis.next().expect("one head per order");
                    z = tape.pattern_mul(&ctx.support, phi, z)?;
                }
                terms.push(tape.matmul(z, a)?);
            }
            tape.sum(&terms)
        }
        FilterSpec::HybridGcat {
            weighted_softmax, ..
        } => {
            let attn = pick(&lp.coeffs_attn);
            for &a in &attn {
                check_param(tape, a, fin, fout, "attention mixing")?;
            }
            let conv = mixed_powers(tape, x, &coeffs, spmm)?;
            let mut z = x;
            let mut terms = vec![conv];
            for (&h, &a) in heads.iter().zip(&attn) {
                let phi = attention_values(tape, ctx, x, h, *weighted_softmax)?;
                z = tape.pattern_mul(&ctx.support, phi, z)?;
                terms.push(tape.matmul(z, a)?);
            }
            tape.sum(&terms)
        }
    }
}
