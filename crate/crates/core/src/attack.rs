//! Nearest-enemy perturbations and their empirical success probability.
//!
//! Each origin point is moved a fixed Euclidean distance toward the closest
//! training point of the other class. The fitted GP's probability of putting
//! the result on the wrong side of zero is compared with the certificate for
//! the (origin, nearest enemy) pair.
//!
//! The origin is always treated as the `+1` side of the certificate, whatever
//! its label in the dataset; success means the classifier outputs the
//! opposite label.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{msp_certificate, nearest_in, CrossPair};
use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::kernel::{distance, KernelSpec};
use crate::normal::mass_below_zero;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OriginClass {
    #[default]
    Plus,
    Minus,
    Both,
}

impl OriginClass {
    pub fn origins(self, dataset: &LabeledDataset) -> Vec<usize> {
        match self {
            OriginClass::Plus => dataset.indices_of(Label::Plus),
            OriginClass::Minus => dataset.indices_of(Label::Minus),
            OriginClass::Both => (0..dataset.len()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackRecord {
    pub origin_index: usize,
    pub origin_label: Label,
    pub nearest_enemy_index: usize,
    pub distance_to_enemy: f64,
    pub perturbation_norm: f64,
    pub adversarial_point: Vec<f64>,
    pub empirical_prob: f64,
    pub theoretical_exact: f64,
    pub theoretical_phi: f64,
    pub valid: bool,
    pub follows_theorem: bool,
}

/// `origin + norm * (enemy - origin) / |enemy - origin|`.
pub fn craft_ae(origin: &[f64], enemy: &[f64], norm: f64) -> Result<Vec<f64>> {
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Domain(format!("perturbation norm must be positive, got {norm}")));
    }
    let d = distance(origin, enemy)?;
    if d == 0.0 {
        return Err(Error::DegeneratePair);
    }
    let scale = norm / d;
    Ok(origin
        .iter()
        .zip(enemy)
        .map(|(o, e)| o + scale * (e - o))
        .collect())
}

/// Probability that the classifier assigns `point` the label opposite to `origin_label`.
pub fn empirical_success_prob(model: &GpModel, point: &[f64], origin_label: Label) -> Result<f64> {
    let p = model.predict(point)?;
    Ok(match origin_label {
        Label::Plus => mass_below_zero(p.mean, p.variance),
        Label::Minus => mass_below_zero(-p.mean, p.variance),
    })
}

/// Closest opposite-label point to `dataset[i]` by Euclidean distance.
///
/// Returns `(index, distance)`; the lowest index wins ties.
pub fn nearest_enemy(dataset: &LabeledDataset, i: usize) -> (usize, f64) {
    let enemies = dataset.indices_of(dataset.label(i).opposite());
    let (j, d2) = nearest_in(dataset, i, &enemies);
    (j, d2.sqrt())
}

/// Opposite-label point with the largest kernel value to `dataset[i]` (lowest index on ties).
pub fn nearest_enemy_by_kernel(dataset: &LabeledDataset, i: usize, kernel: &KernelSpec) -> Result<usize> {
    let x = dataset.point(i);
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for j in dataset.indices_of(dataset.label(i).opposite()) {
        let k = kernel.eval(x, dataset.point(j))?;
        if k > best.1 {
            best = (j, k);
        }
    }
    Ok(best.0)
}

/// Mean distance from each origin point to its nearest enemy.
pub fn mean_nearest_enemy_distance(dataset: &LabeledDataset, origin_class: OriginClass) -> f64 {
    let origins = origin_class.origins(dataset);
    let total: f64 = origins.iter().map(|&i| nearest_enemy(dataset, i).1).sum();
    total / origins.len() as f64
}

pub struct AttackSweep<'a> {
    pub dataset: &'a LabeledDataset,
    pub kernel: KernelSpec,
    pub norm: f64,
    pub epsilon: f64,
    pub jitter: f64,
    pub origin_class: OriginClass,
}

impl AttackSweep<'_> {
    /// One GP fit on the whole dataset, then one record per origin point in index order.
    pub fn run(&self) -> Result<Vec<AttackRecord>> {
        let model = GpModel::fit(self.dataset, self.kernel, self.jitter)?;
        self.run_with_model(&model)
    }

    pub fn run_with_model(&self, model: &GpModel) -> Result<Vec<AttackRecord>> {
        if !(self.norm > 0.0 && self.norm.is_finite()) {
            return Err(Error::Domain(format!(
                "perturbation norm must be positive, got {}",
                self.norm
            )));
        }
        let r = self.kernel.eval_at_distance(self.norm);
        if !(r > 0.0 && r < self.kernel.theta1()) {
            return Err(Error::Domain(format!(
                "norm {} gives kernel value {r}, outside (0, theta1)",
                self.norm
            )));
        }
        let dataset = self.dataset;
        self.origin_class
            .origins(dataset)
            .par_iter()
            .map(|&i| {
                let (j, dist) = nearest_enemy(dataset, i);
                let origin_label = dataset.label(i);
                let adversarial_point = craft_ae(dataset.point(i), dataset.point(j), self.norm)?;
                let empirical_prob = empirical_success_prob(model, &adversarial_point, origin_label)?;
                let pair = CrossPair::from_dataset(dataset, i, j, &self.kernel)?;
                let cert = msp_certificate(&pair, r, self.epsilon, &self.kernel)?;
                Ok(AttackRecord {
                    origin_index: i,
                    origin_label,
                    nearest_enemy_index: j,
                    distance_to_enemy: dist,
                    perturbation_norm: self.norm,
                    adversarial_point,
                    empirical_prob,
                    theoretical_exact: cert.exact_tail,
                    theoretical_phi: cert.phi_bound,
                    valid: cert.valid,
                    follows_theorem: empirical_prob <= cert.exact_tail,
                })
            })
            .collect()
    }
}

pub fn run_attack_sweep(
    dataset: &LabeledDataset,
    kernel: KernelSpec,
    norm: f64,
    epsilon: f64,
    jitter: f64,
    origin_class: OriginClass,
) -> Result<Vec<AttackRecord>> {
    AttackSweep {
        dataset,
        kernel,
        norm,
        epsilon,
        jitter,
        origin_class,
    }
    .run()
}
