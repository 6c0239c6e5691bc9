mod common;

use common::{matrix, sym_graph};
use edgenet::graph::{permute_rows, permute_shift, CsrMatrix, Graph, Normalization, Permutation};
use edgenet::harness::{
    evaluate, metrics_csv, train, ArchitectureConfig, Dataset, ExperimentConfig, Family, Sample,
    Split, Splits, TaskConfig, Target, TrainingConfig, METRICS_HEADER,
};
use edgenet::linalg::DenseMatrix;
use edgenet::nn::{
    model_from_json, model_to_json, Adam, FilterSpec, GraphContext, LayerSpec, Loss, Model,
    ModelSpec, Nonlinearity, Readout,
};
use edgenet::rng::seeded;
use proptest::prelude::*;
use rand::Rng as _;

fn gcnn_spec(fin: usize, orders: &[usize], widths: &[usize]) -> ModelSpec {
    ModelSpec {
        input_features: fin,
        layers: orders
            .iter()
            .zip(widths)
            .map(|(&order, &features)| LayerSpec {
                filter: FilterSpec::Polynomial { order },
                features,
                nonlinearity: Nonlinearity::Relu,
            })
            .collect(),
        readout: Readout::None,
    }
}

fn single(filter: FilterSpec, fin: usize, fout: usize, readout: Readout) -> ModelSpec {
    ModelSpec {
        input_features: fin,
        layers: vec![LayerSpec {
            filter,
            features: fout,
            nonlinearity: Nonlinearity::Relu,
        }],
        readout,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gcnn_forward_is_equivariant(
        n in 2usize..=20,
        orders in prop::collection::vec(0usize..=4, 1..=2),
        fin in 1usize..=3,
        seed: u64,
    ) {
        let s = sym_graph(n, 0.3, true, seed);
        let widths: Vec<usize> = orders.iter().enumerate().map(|(i, _)| 2 + i).collect();
        let ctx = GraphContext::new(s.clone()).unwrap();
        let model = Model::new(gcnn_spec(fin, &orders, &widths), &ctx, &mut seeded(seed)).unwrap();
        let x = matrix(n, fin, seed ^ 1);
        let p = Permutation::random(n, &mut seeded(seed ^ 2));
        let ctx_p = GraphContext::new(permute_shift(&s, &p).unwrap()).unwrap();
        let lhs = model.predict(&ctx_p, &permute_rows(&x, &p).unwrap()).unwrap();
        let rhs = permute_rows(&model.predict(&ctx, &x).unwrap(), &p).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10);
    }

    #[test]
    fn gcat_without_zero_term_is_gat(n in 2usize..=12, weighted: bool, seed: u64) {
        let s = sym_graph(n, 0.4, false, seed);
        let ctx = GraphContext::new(s).unwrap();
        let gcat = single(
            FilterSpec::Gcat { order: 1, tied: false, weighted_softmax: weighted },
            2, 3, Readout::None,
        );
        let gat = single(FilterSpec::Gat { tied: false, weighted_softmax: weighted }, 2, 3, Readout::None);
        let mut a = Model::new(gcat, &ctx, &mut seeded(seed)).unwrap();
        let b = Model::new(gat, &ctx, &mut seeded(seed ^ 1)).unwrap();
        for i in 0..a.params().len() {
            let name = a.params().get(i).name.clone();
            let value = match name.as_str() {
                "layer0.a0" => DenseMatrix::zeros(2, 3),
                other => b.params().iter().find(|p| p.name == other).unwrap().value.clone(),
            };
            *a.params_mut().value_mut(i) = value;
        }
        let x = matrix(n, 2, seed ^ 3);
        let ya = a.predict(&ctx, &x).unwrap();
        let yb = b.predict(&ctx, &x).unwrap();
        prop_assert!(ya.max_abs_diff(&yb) <= 1e-12);
    }

    #[test]
    fn serialization_round_trips(n in 2usize..=10, seed: u64) {
        let s = sym_graph(n, 0.4, true, seed);
        let ctx = GraphContext::new(s).unwrap();
        let spec = single(
            FilterSpec::ArmaJacobi { poles: 2, jacobi_order: 2, direct_order: 1 },
            2, 2, Readout::Flatten { classes: 3 },
        );
        let model = Model::new(spec, &ctx, &mut seeded(seed)).unwrap();
        let back = model_from_json(&model_to_json(&model).unwrap(), &ctx).unwrap();
        let x = matrix(n, 2, seed);
        prop_assert_eq!(model.predict(&ctx, &x).unwrap(), back.predict(&ctx, &x).unwrap());
    }
}

/// Two-community ring; class is the community holding the signal's mass.
fn toy_task(seed: u64) -> (CsrMatrix, Vec<(DenseMatrix, Loss)>) {
    let n = 8;
    let mut t = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        t.push((i, j, 0.5));
        t.push((j, i, 0.5));
    }
    let s = CsrMatrix::from_triplets(n, n, t).unwrap();
    let mut rng = seeded(seed);
    let samples = (0..24)
        .map(|k| {
            let class = k % 2;
            let x = DenseMatrix::from_fn(n, 1, |i, _| {
                let base = if i / 4 == class { 1.0 } else { 0.0 };
                base + rng.gen_range(-0.2..0.2)
            });
            (x, Loss::CrossEntropy(class))
        })
        .collect();
    (s, samples)
}

#[test]
fn five_adam_epochs_reduce_the_loss_for_every_family() {
    let (s, data) = toy_task(5);
    let ctx = GraphContext::new(s).unwrap();
    let families = [
        FilterSpec::Polynomial { order: 2 },
        FilterSpec::EdgeVarying { order: 2 },
        FilterSpec::BlockVarying { order: 2, block_of_node: vec![0, 0, 0, 0, 1, 1, 1, 1] },
        FilterSpec::Hybrid { order: 2, important: vec![0, 4] },
        FilterSpec::ArmaJacobi { poles: 1, jacobi_order: 2, direct_order: 1 },
        FilterSpec::Gat { tied: false, weighted_softmax: false },
        FilterSpec::Gcat { order: 2, tied: true, weighted_softmax: true },
        FilterSpec::EdgeVaryingGat { order: 1, tied: false, weighted_softmax: false, identity_phi0: true },
        FilterSpec::HybridGcat { order: 1, tied: false, weighted_softmax: true },
    ];
    for filter in families {
        let spec = single(filter.clone(), 1, 4, Readout::Flatten { classes: 2 });
        let mut model = Model::new(spec, &ctx, &mut seeded(11)).unwrap();
        let batch = || data.iter().map(|(x, l)| (x, l));
        let (before, _) = model.batch_gradient(&ctx, batch()).unwrap();
        let mut adam = Adam::new(1e-2, model.params());
        for _ in 0..5 {
            for chunk in data.chunks(6) {
                let (_, grads) = model.batch_gradient(&ctx, chunk.iter().map(|(x, l)| (x, l))).unwrap();
                adam.step(model.params_mut(), &grads).unwrap();
                model.enforce_arma_guard(&ctx);
            }
        }
        let (after, _) = model.batch_gradient(&ctx, batch()).unwrap();
        assert!(after < before, "{filter:?}: loss {before} -> {after}");
    }
}

fn capacity_dataset() -> Dataset {
    let n = 10;
    let mut graph = Graph::new(n, false);
    for i in 0..n {
        graph.add_edge(i, (i + 1) % n, 1.0).unwrap();
    }
    let shift = edgenet::graph::build_shift(&graph, Normalization::MaxEigenvalue).unwrap();
    let mut rng = seeded(3);
    let samples: Vec<Sample> = (0..100)
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let class = usize::from(x[0] + x[1] + x[2] > 0.0);
            Sample { x, target: Target::Class(class) }
        })
        .collect();
    Dataset {
        graph,
        normalization: Normalization::MaxEigenvalue,
        shift,
        samples,
        splits: Splits { train: (0..100).collect(), val: vec![], test: vec![] },
    }
}

fn capacity_config(epochs: usize) -> ExperimentConfig {
    let mut arch = ArchitectureConfig::new(Family::Polynomial);
    arch.order = 2;
    arch.features = 8;
    ExperimentConfig {
        task: TaskConfig::SbmSourceLocalization(Default::default()),
        architecture: arch,
        training: TrainingConfig {
            epochs,
            batch_size: 10,
            learning_rate: 1e-2,
            record_wall_time: false,
        },
        seed: 9,
    }
}

#[test]
fn overparameterized_model_fits_toy_training_set() {
    let data = capacity_dataset();
    let outcome = train(&capacity_config(60), &data).unwrap();
    let ctx = GraphContext::new(data.shift.clone()).unwrap();
    let eval = evaluate(&outcome.model, &ctx, &data, Split::Train, 1.0).unwrap();
    assert!(eval.metric < 0.05, "training error {}", eval.metric);
}

#[test]
fn metrics_csv_has_one_finite_row_per_epoch() {
    let data = capacity_dataset();
    let outcome = train(&capacity_config(7), &data).unwrap();
    let csv = metrics_csv(&outcome.metrics);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(METRICS_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 7);
    for row in rows {
        for field in row.split(',') {
            assert!(field.parse::<f64>().unwrap().is_finite(), "{row}");
        }
    }
    let again = train(&capacity_config(7), &data).unwrap();
    assert_eq!(metrics_csv(&again.metrics), csv);
}
