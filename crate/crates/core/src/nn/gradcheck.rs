use std::collections::BTreeMap;

use rand::Rng as _;

use super::model::{FilterSpec, GraphContext, LayerSpec, Loss, Model, ModelSpec, Nonlinearity, Readout};
use super::params::ParamClass;
use crate::error::Result;
use crate::graph::CsrMatrix;
use crate::linalg::DenseMatrix;
use crate::rng::seeded;

/// Worst relative error per parameter class.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub per_class: BTreeMap<ParamClass, f64>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.per_class.values().cloned().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.per_class.values().all(|e| *e <= self.tol)
    }

    /// Classes whose error exceeds the tolerance.
    pub fn failures(&self) -> Vec<ParamClass> {
        self.per_class
            .iter()
            .filter(|(_, e)| **e > self.tol)
            .map(|(c, _)| *c)
            .collect()
    }
}

/// `|a - b| / max(|a|, |b|, 1e-2)`. The floor keeps entries whose true
/// derivative is near zero from reporting round-off as relative error.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-2)
}

/// Compares every scalar gradient against a central difference with step `h`.
pub fn finite_difference_check(
    model: &Model,
    ctx: &GraphContext,
    x0: &DenseMatrix,
    loss: &Loss,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let (_, grads) = model.loss_and_grad(ctx, x0, loss)?;
    let mut probe = model.clone();
    let mut per_class = BTreeMap::new();
    for idx in 0..model.params().len() {
        let param = model.params().get(idx);
        let analytic = grads.get(idx).cloned();
        let worst = per_class.entry(param.class).or_insert(0.0_f64);
        for k in 0..param.value.as_slice().len() {
            let base = param.value.as_slice()[k];
            probe.params_mut().value_mut(idx).as_mut_slice()[k] = base + h;
            let plus = probe.loss(ctx, x0, loss)?;
            probe.params_mut().value_mut(idx).as_mut_slice()[k] = base - h;
            let minus = probe.loss(ctx, x0, loss)?;
            probe.params_mut().value_mut(idx).as_mut_slice()[k] = base;
            let numeric = (plus - minus) / (2.0 * h);
            let exact = analytic.as_ref().map_or(0.0, |g| g.as_slice()[k]);
            *worst = worst.max(relative_error(numeric, exact));
        }
    }
    Ok(GradCheckReport { per_class, tol })
}

/// One filter of every family on a random 7-node graph, each with a
/// flattening readout and a cross-entropy loss. Errors are merged per class.
pub fn gradcheck_suite(seed: u64, h: f64, tol: f64) -> Result<GradCheckReport> {
    const N: usize = 7;
    let mut rng = seeded(seed);
    let mut triplets = Vec::new();
    for i in 0..N {
        let j = (i + 1) % N;
        let w = rng.gen_range(0.1..0.5);
        triplets.extend([(i, j, w), (j, i, w), (i, i, rng.gen_range(-0.3..0.3))]);
    }
    triplets.extend([(0, 3, 0.25), (3, 0, 0.25)]);
    let ctx = GraphContext::new(CsrMatrix::from_triplets(N, N, triplets)?)?;
    let filters = [
        FilterSpec::Polynomial { order: 2 },
        FilterSpec::BlockVarying {
            order: 2,
            block_of_node: vec![0, 0, 1, 1, 2, 2, 2],
        },
        FilterSpec::EdgeVarying { order: 2 },
        FilterSpec::Hybrid {
            order: 2,
            important: vec![1, 4],
        },
        FilterSpec::ArmaJacobi {
            poles: 2,
            jacobi_order: 3,
            direct_order: 1,
        },
        FilterSpec::Gat {
            tied: false,
            weighted_softmax: false,
        },
        FilterSpec::Gcat {
            order: 2,
            tied: false,
            weighted_softmax: true,
        },
        FilterSpec::EdgeVaryingGat {
            order: 1,
            tied: false,
            weighted_softmax: false,
            identity_phi0: false,
        },
        FilterSpec::HybridGcat {
            order: 1,
            tied: false,
            weighted_softmax: true,
        },
    ];
    let mut per_class: BTreeMap<ParamClass, f64> = BTreeMap::new();
    for filter in filters {
        let spec = ModelSpec {
            input_features: 2,
            layers: vec![LayerSpec {
                filter,
                features: 2,
                nonlinearity: Nonlinearity::LeakyRelu,
            }],
            readout: Readout::Flatten { classes: 3 },
        };
        let model = Model::new(spec, &ctx, &mut rng)?;
        let x = DenseMatrix::from_fn(N, 2, |_, _| rng.gen_range(-1.0..1.0));
        let label = rng.gen_range(0..3);
        let report = finite_difference_check(&model, &ctx, &x, &Loss::CrossEntropy(label), h, tol)?;
        for (class, err) in report.per_class {
            let e = per_class.entry(class).or_insert(0.0);
            *e = e.max(err);
        }
    }
    Ok(GradCheckReport { per_class, tol })
}
