use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;

/// Which family a trainable tensor belongs to. Gradient checks report one
/// error per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamClass {
    Polynomial,
    Block,
    EdgeVarying,
    Hybrid,
    ArmaBeta,
    ArmaGamma,
    ArmaAlpha,
    AttentionMixing,
    AttentionScore,
    Mixing,
    Readout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub class: ParamClass,
    pub value: DenseMatrix,
}

/// Flat, ordered list of trainable tensors. Indices are stable and are what
/// tape leaves and gradients refer to.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, class: ParamClass, value: DenseMatrix) -> usize {
        self.params.push(Param {
            name: name.into(),
            class,
            value,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, index: usize) -> &Param {
        &self.params[index]
    }

    pub fn value_mut(&mut self, index: usize) -> &mut DenseMatrix {
        &mut self.params[index].value
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub(crate) fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    /// Total number of scalars.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.as_slice().len()).sum()
    }

    pub fn count_class(&self, class: ParamClass) -> usize {
        self.params
            .iter()
            .filter(|p| p.class == class)
            .map(|p| p.value.as_slice().len())
            .sum()
    }
}
