use serde::{Deserialize, Serialize};

use super::{GroupKey, Hyperparams, SIMPLEX_TOLERANCE};
use crate::error::{Error, Result};

/// Parameters of one Beta mixture component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub alpha: f64,
    pub beta: f64,
}

impl MixtureComponent {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() {
            Ok(MixtureComponent { alpha, beta })
        } else {
            Err(Error::Domain(format!(
                "component needs alpha, beta > 0; got ({alpha}, {beta})"
            )))
        }
    }

    /// Mean accuracy `α / (α + β)`.
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

/// Latent variables of one `(method, school, test)` group.
///
/// `assignments` hold zero-based component indices. `accuracies` are only
/// meaningful after the accuracies have been drawn from their conditional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupState {
    pub key: GroupKey,
    pub components: Vec<MixtureComponent>,
    pub weights: Vec<f64>,
    pub assignments: Vec<usize>,
    pub accuracies: Vec<f64>,
}

impl GroupState {
    /// `K`, the number of mixture components.
    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Dirichlet concentrations, all equal to `μ / K`.
    pub fn gamma(&self, hyper: &Hyperparams) -> Vec<f64> {
        vec![hyper.gamma(self.k()); self.k()]
    }

    /// Number of students assigned to each component.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k()];
        for &z in &self.assignments {
            c[z] += 1;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 || self.weights.len() != k {
            return Err(Error::Domain(format!(
                "{}: {} components with {} weights",
                self.key,
                k,
                self.weights.len()
            )));
        }
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(*w > 0.0)) || (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::Domain(format!(
                "{}: weights not on the simplex (sum {total})",
                self.key
            )));
        }
        if let Some(z) = self.assignments.iter().find(|&&z| z >= k) {
            return Err(Error::Domain(format!(
                "{}: assignment {z} out of range for {k} components",
                self.key
            )));
        }
        if self.accuracies.len() != self.assignments.len()
            || self.accuracies.iter().any(|p| !(*p > 0.0 && *p < 1.0))
        {
            return Err(Error::Domain(format!(
                "{}: accuracies must be one per student in (0, 1)",
                self.key
            )));
        }
        for c in &self.components {
            MixtureComponent::new(c.alpha, c.beta)?;
        }
        Ok(())
    }
}

/// One joint state of every group in a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub groups: Vec<GroupState>,
}

impl LatentState {
    pub fn group(&self, key: GroupKey) -> Option<&GroupState> {
        self.groups.iter().find(|g| g.key == key)
    }

    pub fn validate(&self) -> Result<()> {
        self.groups.iter().try_for_each(GroupState::validate)
    }
}
