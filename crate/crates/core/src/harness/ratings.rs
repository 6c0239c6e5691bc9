use std::path::Path;

use super::config::RatingsConfig;
use super::data::{Dataset, Sample, Target};
use super::similarity::build_similarity_graph;
use crate::error::{Error, Result};
use crate::graph::{Graph, Normalization};
use crate::linalg::DenseMatrix;

/// Reads a dense numeric CSV; every row must have the same width.
pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix_csv(&text, Some(path))
}

pub fn parse_matrix_csv(text: &str, path: Option<&Path>) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let row = raw
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: path.map(Path::to_path_buf),
                    line: k + 1,
                    message: format!("bad value `{}`: {e}", f.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.map(Path::to_path_buf),
                    line: k + 1,
                    message: format!("{} columns, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("empty ratings matrix".into()));
    }
    Ok(DenseMatrix::from_rows(&rows))
}

/// Rating completion for one node.
///
/// Keeps the `nodes` rows with the most ratings (always including the
/// target), builds the normalized top-`k` Pearson graph over them, and turns
/// every column the target has rated into a sample: the input is the column
/// with the target's entry zeroed, the observed output is that entry.
pub fn ratings_from_matrix(ratings: &DenseMatrix, cfg: &RatingsConfig, seed: u64) -> Result<Dataset> {
    if cfg.target >= ratings.rows() {
        return Err(Error::InvalidArgument(format!(
            "target row {} outside a {}-row matrix",
            cfg.target,
            ratings.rows()
        )));
    }
    let counts: Vec<usize> = (0..ratings.rows())
        .map(|i| ratings.row(i).iter().filter(|v| **v != 0.0).count())
        .collect();
    let mut order: Vec<usize> = (0..ratings.rows()).filter(|&i| i != cfg.target).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    order.truncate(cfg.nodes.saturating_sub(1));
    order.push(cfg.target);
    order.sort_unstable();
    let target = order.binary_search(&cfg.target).expect("target kept");
    let sub = DenseMatrix::from_fn(order.len(), ratings.cols(), |i, j| ratings[(order[i], j)]);
    let shift = build_similarity_graph(&sub, cfg.top_k)?;
    let n = shift.n_rows();
    let graph = Graph::from_edges(
        n,
        false,
        shift.triplets().filter(|(i, j, _)| i < j).collect::<Vec<_>>(),
    )?;
    let samples = (0..sub.cols())
        .filter(|&j| sub[(target, j)] != 0.0)
        .map(|j| {
            let mut x = sub.column(j);
            let rating = x[target];
            x[target] = 0.0;
            let mut values = vec![0.0; n];
            let mut mask = vec![false; n];
            values[target] = rating;
            mask[target] = true;
            Sample {
                x,
                target: Target::Values { values, mask },
            }
        })
        .collect::<Vec<_>>();
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "the target node has no observed ratings".into(),
        ));
    }
    let mut d = Dataset {
        graph,
        normalization: Normalization::None,
        shift,
        samples,
        splits: Default::default(),
    };
    d.assign_random_split(cfg.val_fraction, cfg.test_fraction, seed);
    Ok(d)
}

pub fn ratings_dataset(cfg: &RatingsConfig, seed: u64) -> Result<Dataset> {
    ratings_from_matrix(&read_matrix_csv(&cfg.ratings)?, cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{evaluate_indices, Split};
    use crate::nn::{GraphContext, Model};
    use crate::rng::seeded;

    fn toy() -> DenseMatrix {
        DenseMatrix::from_fn(6, 12, |i, j| {
            if (i + j) % 4 == 0 {
                0.0
            } else {
                ((i * 7 + j * 3) % 5 + 1) as f64
            }
        })
    }

    fn cfg() -> RatingsConfig {
        RatingsConfig {
            ratings: "unused".into(),
            target: 2,
            nodes: 5,
            top_k: 3,
            delta: 1.0,
            val_fraction: 0.2,
            test_fraction: 0.2,
        }
    }

    #[test]
    fn one_sample_per_rated_column() {
        let r = toy();
        let d = ratings_from_matrix(&r, &cfg(), 1).unwrap();
        assert_eq!(d.n(), 5);
        let rated = (0..12).filter(|&j| r[(2, j)] != 0.0).count();
        assert_eq!(d.samples.len(), rated);
        assert!(d.is_regression());
        assert!(d.shift.is_symmetric(1e-15));
    }

    #[test]
    fn rmse_of_zero_predictions() {
        let d = ratings_from_matrix(&toy(), &cfg(), 1).unwrap();
        let ctx = GraphContext::new(d.shift.clone()).unwrap();
        let spec = crate::nn::ModelSpec {
            input_features: 1,
            layers: vec![],
            readout: crate::nn::Readout::PerNode { outputs: 1 },
        };
        let mut m = Model::new(spec, &ctx, &mut seeded(0)).unwrap();
        *m.params_mut().value_mut(0) = DenseMatrix::zeros(1, 1);
        let all: Vec<usize> = (0..d.samples.len()).collect();
        let e = evaluate_indices(&m, &ctx, &d, &all, 1.0).unwrap();
        let targets: Vec<f64> = d
            .samples
            .iter()
            .map(|s| match &s.target {
                Target::Values { values, mask } => {
                    values.iter().zip(mask).find(|(_, m)| **m).unwrap().0.to_owned()
                }
                Target::Class(_) => unreachable!(),
            })
            .collect();
        let want = (targets.iter().map(|t| t * t).sum::<f64>() / targets.len() as f64).sqrt();
        assert!((e.metric - want).abs() < 1e-12);
        let _ = Split::Test;
    }

    #[test]
    fn ragged_csv_rejected() {
        assert!(matches!(
            parse_matrix_csv("1,2\n3\n", None),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
