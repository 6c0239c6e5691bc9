use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use sha2::{Digest, Sha256};

use super::config::SourceLocalizationConfig;
use crate::error::{Error, Result};
use crate::graph::{
    build_shift, read_edge_list, sbm_generate, write_edge_list, CsrMatrix, Graph, Normalization,
};
use crate::linalg::DenseMatrix;
use crate::rng::{stream, streams};

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Class(usize),
    /// Per-node targets; only entries with `mask[i]` are observed.
    Values { values: Vec<f64>, mask: Vec<bool> },
}

/// One graph signal with its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub target: Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Checks that the three index sets are disjoint and below `len`.
    pub fn validate(&self, len: usize) -> Result<()> {
        let mut seen = vec![false; len];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= len {
                return Err(Error::InvalidArgument(format!(
                    "split index {i} >= {len} samples"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!(
                    "sample {i} appears in more than one split"
                )));
            }
        }
        Ok(())
    }
}

/// Graph, shift, samples, and split assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub normalization: Normalization,
    pub shift: CsrMatrix,
    pub samples: Vec<Sample>,
    pub splits: Splits,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.shift.n_rows()
    }

    /// Number of classes (one past the largest label); zero for regression.
    pub fn classes(&self) -> usize {
        self.samples
            .iter()
            .filter_map(|s| match s.target {
                Target::Class(c) => Some(c + 1),
                Target::Values { .. } => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn is_regression(&self) -> bool {
        matches!(
            self.samples.first().map(|s| &s.target),
            Some(Target::Values { .. })
        )
    }

    pub fn signal(&self, index: usize) -> DenseMatrix {
        DenseMatrix::column_vector(&self.samples[index].x)
    }

    /// Hex SHA-256 over the shift and every sample in order. Split
    /// membership does not enter the hash.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.shift.to_le_bytes());
        h.update((self.samples.len() as u64).to_le_bytes());
        for s in &self.samples {
            for v in &s.x {
                h.update(v.to_le_bytes());
            }
            match &s.target {
                Target::Class(c) => {
                    h.update([0u8]);
                    h.update((*c as u64).to_le_bytes());
                }
                Target::Values { values, mask } => {
                    h.update([1u8]);
                    for (v, m) in values.iter().zip(mask) {
                        h.update([u8::from(*m)]);
                        h.update(v.to_le_bytes());
                    }
                }
            }
        }
        h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Seeded random assignment of all samples to the three splits.
    pub fn assign_random_split(&mut self, val_fraction: f64, test_fraction: f64, seed: u64) {
        let len = self.samples.len();
        let mut idx: Vec<usize> = (0..len).collect();
        idx.shuffle(&mut stream(seed, streams::SPLIT));
        let n_val = (val_fraction * len as f64).round() as usize;
        let n_test = ((test_fraction * len as f64).round() as usize).min(len - n_val.min(len));
        let n_val = n_val.min(len);
        let mut val: Vec<usize> = idx[..n_val].to_vec();
        let mut test: Vec<usize> = idx[n_val..n_val + n_test].to_vec();
        let mut train: Vec<usize> = idx[n_val + n_test..].to_vec();
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        self.splits = Splits { train, val, test };
    }

    /// Edge list of the graph and signals CSV.
    ///
    /// Classification rows hold `N` signal values and the label; regression
    /// rows hold `N` signal values and `N` targets with unobserved targets
    /// left empty.
    pub fn export(&self, edges_path: &Path, signals_path: &Path) -> Result<()> {
        std::fs::write(edges_path, write_edge_list(&self.graph))?;
        std::fs::write(signals_path, self.signals_csv())?;
        Ok(())
    }

    pub fn signals_csv(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            let mut fields: Vec<String> = s.x.iter().map(|v| v.to_string()).collect();
            match &s.target {
                Target::Class(c) => fields.push(c.to_string()),
                Target::Values { values, mask } => {
                    fields.extend(values.iter().zip(mask).map(|(v, m)| {
                        if *m {
                            v.to_string()
                        } else {
                            String::new()
                        }
                    }))
                }
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Parses a signals CSV for a graph with `n` nodes. Rows with `n + 1`
/// fields are classification samples, rows with `2n` fields regression
/// samples. Lines are numbered from one.
pub fn parse_signals(text: &str, n: usize, path: Option<&Path>) -> Result<Vec<Sample>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.map(Path::to_path_buf),
        line,
        message,
    };
    let mut samples = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        let num = |f: &str| -> Result<f64> {
            f.parse::<f64>()
                .map_err(|e| err(line, format!("bad value `{f}`: {e}")))
        };
        if fields.len() == n + 1 {
            let x = fields[..n].iter().map(|f| num(f)).collect::<Result<Vec<_>>>()?;
            let label = fields[n]
                .parse::<usize>()
                .map_err(|e| err(line, format!("bad label `{}`: {e}", fields[n])))?;
            samples.push(Sample {
                x,
                target: Target::Class(label),
            });
        } else if fields.len() == 2 * n && n > 1 {
            let x = fields[..n].iter().map(|f| num(f)).collect::<Result<Vec<_>>>()?;
            let mut values = Vec::with_capacity(n);
            let mut mask = Vec::with_capacity(n);
            for f in &fields[n..] {
                if f.is_empty() {
                    values.push(0.0);
                    mask.push(false);
                } else {
                    values.push(num(f)?);
                    mask.push(true);
                }
            }
            samples.push(Sample {
                x,
                target: Target::Values { values, mask },
            });
        } else {
            return Err(Error::DimensionMismatch(format!(
                "line {line}: {} fields for a graph of {n} nodes",
                fields.len()
            )));
        }
    }
    Ok(samples)
}

/// Graph from an edge list, samples from a signals CSV. Every sample is
/// placed in the training split.
pub fn ingest_edge_list(
    edges_path: &Path,
    signals_path: &Path,
    directed: bool,
    normalization: Normalization,
) -> Result<Dataset> {
    let graph = read_edge_list(edges_path, directed)?;
    let shift = build_shift(&graph, normalization)?;
    let text = std::fs::read_to_string(signals_path)?;
    let samples = parse_signals(&text, graph.n(), Some(signals_path))?;
    let splits = Splits {
        train: (0..samples.len()).collect(),
        ..Splits::default()
    };
    Ok(Dataset {
        graph,
        normalization,
        shift,
        samples,
        splits,
    })
}

/// The first maximum-degree node of every community.
pub fn community_sources(graph: &Graph, block_of: &[usize], communities: usize) -> Vec<usize> {
    let degree = graph.adjacency().row_nnz();
    (0..communities)
        .map(|c| {
            (0..graph.n())
                .filter(|&i| block_of[i] == c)
                .max_by(|&a, &b| degree[a].cmp(&degree[b]).then(b.cmp(&a)))
                .expect("every community has a node")
        })
        .collect()
}

/// Community sizes for `nodes` split as evenly as possible, larger blocks first.
pub fn block_sizes(nodes: usize, communities: usize) -> Vec<usize> {
    (0..communities)
        .map(|c| nodes / communities + usize::from(c < nodes % communities))
        .collect()
}

/// Diffused-source classification on a connected SBM graph.
///
/// Graph draws use stream `GRAPH` of `seed`, sample draws stream `SAMPLES`.
/// Samples are generated in one sequence and split in order: train, val, test.
pub fn gen_source_localization(cfg: &SourceLocalizationConfig, seed: u64) -> Result<Dataset> {
    let sizes = block_sizes(cfg.nodes, cfg.communities);
    let graph = sbm_generate(
        &sizes,
        cfg.p_intra,
        cfg.p_inter,
        &mut stream(seed, streams::GRAPH),
    )?;
    let normalization = Normalization::MaxEigenvalue;
    let shift = build_shift(&graph, normalization)?;
    let block_of: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let sources = community_sources(&graph, &block_of, cfg.communities);
    // diffused[c][t] = S^t δ_{source(c)}
    let diffused: Vec<Vec<Vec<f64>>> = sources
        .iter()
        .map(|&src| {
            let mut x = vec![0.0; cfg.nodes];
            x[src] = 1.0;
            let mut out = vec![x.clone()];
            for _ in 0..cfg.max_diffusion {
                x = shift.spmv(&x).expect("square shift");
                out.push(x.clone());
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut rng = stream(seed, streams::SAMPLES);
    let total = cfg.train + cfg.val + cfg.test;
    let samples = (0..total)
        .map(|_| {
            let c = rng.gen_range(0..cfg.communities);
            let t = rng.gen_range(0..=cfg.max_diffusion);
            Sample {
                x: diffused[c][t].clone(),
                target: Target::Class(c),
            }
        })
        .collect();
    let splits = Splits {
        train: (0..cfg.train).collect(),
        val: (cfg.train..cfg.train + cfg.val).collect(),
        test: (cfg.train + cfg.val..total).collect(),
    };
    Ok(Dataset {
        graph,
        normalization,
        shift,
        samples,
        splits,
    })
}
