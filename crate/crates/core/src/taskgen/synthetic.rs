//! Synthetic latent-variable classification families.
//!
//! Each family samples latent binary factors per group, places the group's
//! examples around a latent-dependent mean, and labels every example with the
//! exact Bayes posterior of the class given its features (optionally mixed
//! with a symmetric label-flip rate). A weak linear signal ("leak") ties the
//! class to a fixed direction so that linear models are informative but
//! imperfect.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Example};
use crate::error::{LabError, Result};
use crate::rng::{derive_seed, rng_for, LabRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    NestedSpheres,
    XorOfSubsets,
    NoisyLinear,
    ParityOfKBits,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::NestedSpheres,
        Family::XorOfSubsets,
        Family::NoisyLinear,
        Family::ParityOfKBits,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::NestedSpheres => "nested-spheres",
            Family::XorOfSubsets => "xor-of-subsets",
            Family::NoisyLinear => "noisy-linear",
            Family::ParityOfKBits => "parity-of-k-bits",
        }
    }

    fn concept_names(self) -> [&'static str; 2] {
        match self {
            Family::NestedSpheres => ["inside_inner_sphere", "positive_mean_side"],
            Family::XorOfSubsets => ["subset_a_bit", "subset_b_bit"],
            Family::NoisyLinear => ["above_hyperplane", "first_coordinate_positive"],
            Family::ParityOfKBits => ["parity_bit_0", "parity_bit_1"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| LabError::InvalidTaskSpec(format!("unknown task family `{s}`")))
    }
}

/// Descriptor of one synthetic task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub family: Family,
    pub dim: usize,
    pub size: usize,
    pub n_classes: usize,
    /// Symmetric label-flip rate mixed into the soft labels.
    pub noise: f64,
    /// Examples per group (related datapoints share latent factors).
    pub group_size: usize,
    /// Standard deviation of the offset shared by a group.
    pub jitter: f64,
    /// Strength of the per-bit mean shift (xor/parity families).
    pub separation: f64,
    /// Strength of the linear class signal.
    pub leak: f64,
    /// Noise scale on the dedicated leak coordinates (spheres/xor/parity).
    pub leak_spread: f64,
    /// Number of parity bits (parity family; xor uses 2).
    pub bits: usize,
    /// Per-coordinate spread of the inner / outer component (spheres family).
    pub inner_scale: f64,
    pub outer_scale: f64,
}

impl TaskSpec {
    pub fn new(family: Family) -> Self {
        let base = TaskSpec {
            family,
            dim: 8,
            size: 4000,
            n_classes: 2,
            noise: 0.0,
            group_size: 4,
            jitter: 0.3,
            separation: 1.0,
            leak: 0.3,
            leak_spread: 0.35,
            bits: 2,
            inner_scale: 0.6,
            outer_scale: 1.6,
        };
        match family {
            Family::NestedSpheres => base,
            Family::XorOfSubsets => base,
            Family::NoisyLinear => TaskSpec {
                noise: 0.1,
                jitter: 0.5,
                ..base
            },
            Family::ParityOfKBits => TaskSpec {
                bits: 3,
                dim: 9,
                ..base
            },
        }
    }

    pub fn with_size(mut self, size: usize) -> Self {
        self.size = size;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    fn bit_count(&self) -> usize {
        match self.family {
            Family::XorOfSubsets => 2,
            Family::ParityOfKBits => self.bits,
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LabError::InvalidTaskSpec(format!("{}: {msg}", self.family)));
        if self.dim < 2 {
            return bad(format!("dimension {} < 2", self.dim));
        }
        if self.n_classes != 2 {
            return bad(format!("only binary tasks are supported, got {} classes", self.n_classes));
        }
        if self.size < 64 {
            return bad(format!("size {} < 64", self.size));
        }
        if self.group_size == 0 {
            return bad("group size must be positive".into());
        }
        if !(0.0..=0.5).contains(&self.noise) {
            return bad(format!("noise rate {} outside [0, 0.5]", self.noise));
        }
        if !(self.leak_spread > 0.0 && self.leak_spread.is_finite()) {
            return bad(format!("leak spread {} must be positive", self.leak_spread));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad(format!("jitter {} must be a finite non-negative number", self.jitter));
        }
        if self.family == Family::NoisyLinear && self.jitter >= 1.0 {
            return bad("noisy-linear jitter must be below 1".into());
        }
        if self.family == Family::NestedSpheres && !(self.inner_scale > 0.0 && self.outer_scale > 0.0) {
            return bad("sphere scales must be positive".into());
        }
        let bits = self.bit_count();
        if self.family == Family::ParityOfKBits && !(2..=12).contains(&bits) {
            return bad(format!("parity needs 2..=12 bits, got {bits}"));
        }
        if bits > 0 && self.dim - self.leak_dims() < bits {
            return bad(format!("dimension {} too small for {bits} bit groups", self.dim));
        }
        Ok(())
    }

    fn leak_dims(&self) -> usize {
        self.dim / 4
    }

    /// Coordinate groups carrying each latent bit, followed by the leak range.
    fn bit_layout(&self) -> (Vec<std::ops::Range<usize>>, std::ops::Range<usize>) {
        let k = self.bit_count();
        let body = self.dim - self.leak_dims();
        let mut groups = Vec::with_capacity(k);
        let mut start = 0;
        for i in 0..k {
            let len = body / k + usize::from(i < body % k);
            groups.push(start..start + len);
            start += len;
        }
        (groups, body..self.dim)
    }
}

/// Generates one dataset per task descriptor.
pub fn gen_synthetic_suite(suite: &[TaskSpec], seed: u64) -> Result<Vec<Dataset>> {
    if suite.is_empty() {
        return Err(LabError::InvalidTaskSpec("suite names no task".into()));
    }
    suite
        .iter()
        .enumerate()
        .map(|(i, spec)| gen_task(spec, derive_seed(seed, &format!("suite/{i}/{}", spec.family))))
        .collect()
}

/// Generates a single task dataset.
pub fn gen_task(spec: &TaskSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng_for(seed, spec.family.name());
    let hyperplane = noisy_linear_hyperplane(spec, seed);
    let mut examples = Vec::with_capacity(spec.size);
    let mut concepts = Vec::with_capacity(spec.size);
    let mut group = 0u64;
    while examples.len() < spec.size {
        let latent = sample_latent(spec, &mut rng);
        let offset_scale = match spec.family {
            // Group centres carry most of the variance; members scatter by `jitter`.
            Family::NoisyLinear => (1.0 - spec.jitter * spec.jitter).sqrt(),
            _ => spec.jitter,
        };
        let offset: Vec<f64> = (0..spec.dim).map(|_| offset_scale * normal(&mut rng)).collect();
        let members = spec.group_size.min(spec.size - examples.len());
        for _ in 0..members {
            let (x, concept_row) = sample_point(spec, &latent, &offset, &hyperplane, &mut rng);
            let p1 = posterior_positive(spec, &x, &hyperplane);
            let p1 = (1.0 - spec.noise) * p1 + spec.noise * (1.0 - p1);
            examples.push(Example::new(x, vec![1.0 - p1, p1], group)?);
            concepts.push(concept_row);
        }
        group += 1;
    }
    let names = spec.family.concept_names().iter().map(|s| s.to_string()).collect();
    Dataset::new(spec.family.name(), examples)?.with_concepts(names, concepts)
}

/// The fixed separating direction of the noisy-linear family for `seed`.
pub(crate) fn noisy_linear_hyperplane(spec: &TaskSpec, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, "noisy-linear/hyperplane");
    let w: Vec<f64> = (0..spec.dim).map(|_| normal(&mut rng)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    w.into_iter().map(|v| v / norm).collect()
}

fn normal(rng: &mut LabRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Latent factors of one group: the class followed by the latent bits.
struct Latent {
    class: usize,
    bits: Vec<usize>,
}

fn sample_latent(spec: &TaskSpec, rng: &mut LabRng) -> Latent {
    match spec.family {
        Family::NestedSpheres | Family::NoisyLinear => Latent {
            class: usize::from(rng.random_bool(0.5)),
            bits: Vec::new(),
        },
        Family::XorOfSubsets | Family::ParityOfKBits => {
            let bits: Vec<usize> = (0..spec.bit_count()).map(|_| usize::from(rng.random_bool(0.5))).collect();
            Latent {
                class: bits.iter().sum::<usize>() % 2,
                bits,
            }
        }
    }
}

fn sign(bit: usize) -> f64 {
    if bit == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Class-conditional mean for latent bits (xor/parity) or class (spheres).
fn latent_mean(spec: &TaskSpec, class: usize, bits: &[usize]) -> Vec<f64> {
    match spec.family {
        Family::NestedSpheres => {
            let (_, leak) = spec.bit_layout();
            let mut mu = vec![0.0; spec.dim];
            for v in &mut mu[leak] {
                *v = sign(class) * spec.leak;
            }
            mu
        }
        Family::XorOfSubsets | Family::ParityOfKBits => {
            let (groups, leak) = spec.bit_layout();
            let mut mu = vec![0.0; spec.dim];
            for (range, &b) in groups.iter().zip(bits) {
                for v in &mut mu[range.clone()] {
                    *v = sign(b) * spec.separation;
                }
            }
            for v in &mut mu[leak] {
                *v = sign(class) * spec.leak;
            }
            mu
        }
        Family::NoisyLinear => vec![0.0; spec.dim],
    }
}

fn sample_point(
    spec: &TaskSpec,
    latent: &Latent,
    offset: &[f64],
    hyperplane: &[f64],
    rng: &mut LabRng,
) -> (Vec<f64>, Vec<u8>) {
    match spec.family {
        Family::NoisyLinear => {
            let x: Vec<f64> = offset.iter().map(|o| o + spec.jitter * normal(rng)).collect();
            let above = dot(hyperplane, &x) > 0.0;
            let first_positive = x[0] > 0.0;
            (x, vec![u8::from(above), u8::from(first_positive)])
        }
        Family::NestedSpheres => {
            let mu = latent_mean(spec, latent.class, &[]);
            let spread = sphere_spread(spec, latent.class);
            let (_, leak) = spec.bit_layout();
            let x: Vec<f64> = (0..spec.dim)
                .map(|j| {
                    if leak.contains(&j) {
                        mu[j] + spread[j] * (offset[j] + normal(rng))
                    } else {
                        mu[j] + offset[j] + spread[j] * normal(rng)
                    }
                })
                .collect();
            let positive_side = x[leak].iter().sum::<f64>() > 0.0;
            (x, vec![latent.class as u8, u8::from(positive_side)])
        }
        Family::XorOfSubsets | Family::ParityOfKBits => {
            let mu = latent_mean(spec, latent.class, &latent.bits);
            let spread = coordinate_spread(spec);
            let x: Vec<f64> = mu
                .iter()
                .zip(offset)
                .zip(&spread)
                .map(|((m, o), s)| m + s * (o + normal(rng)))
                .collect();
            (x, vec![latent.bits[0] as u8, latent.bits[1] as u8])
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-coordinate noise scale of the xor/parity families.
fn coordinate_spread(spec: &TaskSpec) -> Vec<f64> {
    let (_, leak) = spec.bit_layout();
    (0..spec.dim)
        .map(|j| if leak.contains(&j) { spec.leak_spread } else { 1.0 })
        .collect()
}

/// Per-coordinate noise scale of the spheres family for one class.
fn sphere_spread(spec: &TaskSpec, class: usize) -> Vec<f64> {
    let (_, leak) = spec.bit_layout();
    let body = if class == 1 { spec.inner_scale } else { spec.outer_scale };
    (0..spec.dim)
        .map(|j| if leak.contains(&j) { spec.leak_spread } else { body })
        .collect()
}

/// Log density of a diagonal Gaussian, dropping the shared 2*pi term.
fn log_gauss_diag(x: &[f64], mu: &[f64], var: &[f64]) -> f64 {
    x.iter()
        .zip(mu)
        .zip(var)
        .map(|((a, m), v)| -0.5 * (a - m) * (a - m) / v - 0.5 * v.ln())
        .sum()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Exact posterior probability of class 1 given one example's features.
fn posterior_positive(spec: &TaskSpec, x: &[f64], hyperplane: &[f64]) -> f64 {
    let jitter_var = spec.jitter * spec.jitter;
    match spec.family {
        Family::NoisyLinear => {
            if dot(hyperplane, x) > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Family::NestedSpheres => {
            let (_, leak) = spec.bit_layout();
            let var = |class: usize| -> Vec<f64> {
                sphere_spread(spec, class)
                    .iter()
                    .enumerate()
                    .map(|(j, s)| if leak.contains(&j) { s * s * (1.0 + jitter_var) } else { s * s + jitter_var })
                    .collect()
            };
            let l1 = log_gauss_diag(x, &latent_mean(spec, 1, &[]), &var(1));
            let l0 = log_gauss_diag(x, &latent_mean(spec, 0, &[]), &var(0));
            logistic(l1 - l0)
        }
        Family::XorOfSubsets | Family::ParityOfKBits => {
            let k = spec.bit_count();
            let var: Vec<f64> = coordinate_spread(spec)
                .iter()
                .map(|s| s * s * (1.0 + jitter_var))
                .collect();
            let mut by_class = [Vec::new(), Vec::new()];
            for code in 0..(1usize << k) {
                let bits: Vec<usize> = (0..k).map(|i| (code >> i) & 1).collect();
                let class = bits.iter().sum::<usize>() % 2;
                by_class[class].push(log_gauss_diag(x, &latent_mean(spec, class, &bits), &var));
            }
            logistic(log_sum_exp(&by_class[1]) - log_sum_exp(&by_class[0]))
        }
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_specs() {
        let base = TaskSpec::new(Family::XorOfSubsets);
        assert!(gen_task(&base.clone().with_dim(1), 0).is_err());
        assert!(gen_task(&base.clone().with_size(63), 0).is_err());
        let mut multi = base.clone();
        multi.n_classes = 3;
        assert!(gen_task(&multi, 0).is_err());
        assert!(gen_synthetic_suite(&[], 0).is_err());
    }

    #[test]
    fn zero_noise_linear_labels_are_one_hot_and_follow_the_hyperplane() {
        let spec = TaskSpec::new(Family::NoisyLinear).with_noise(0.0).with_size(300);
        let ds = gen_task(&spec, 11).unwrap();
        let w = noisy_linear_hyperplane(&spec, 11);
        for ex in &ds.examples {
            let p = ex.soft_label();
            assert!(p == [0.0, 1.0] || p == [1.0, 0.0]);
            assert_eq!(ex.truth() == 1, dot(&w, &ex.features) > 0.0);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        for family in Family::ALL {
            let spec = TaskSpec::new(family).with_size(128);
            let a = gen_task(&spec, 5).unwrap();
            let b = gen_task(&spec, 5).unwrap();
            assert_eq!(a, b);
            let c = gen_task(&spec, 6).unwrap();
            assert_ne!(a.examples[0].features, c.examples[0].features);
        }
    }

    #[test]
    fn soft_labels_are_distributions_and_groups_share_concepts() {
        for family in Family::ALL {
            let spec = TaskSpec::new(family).with_size(200);
            let ds = gen_task(&spec, 3).unwrap();
            assert_eq!(ds.concept_names.len(), 2);
            for ex in &ds.examples {
                let p = ex.soft_label();
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            }
            let rows = ds.concept_labels.as_ref().unwrap();
            if family != Family::NoisyLinear {
                // Latent concepts are shared within a group.
                for (a, b) in ds.examples.iter().zip(rows).zip(ds.examples.iter().zip(rows).skip(1)).filter_map(
                    |((ea, ra), (eb, rb))| (ea.group_id == eb.group_id).then_some((ra, rb)),
                ) {
                    assert_eq!(a[0], b[0]);
                }
            }
        }
    }

    #[test]
    fn bit_layout_partitions_coordinates() {
        let spec = TaskSpec::new(Family::XorOfSubsets).with_dim(4);
        let (groups, leak) = spec.bit_layout();
        assert_eq!(groups, vec![0..2, 2..3]);
        assert_eq!(leak, 3..4);
        let spec = TaskSpec::new(Family::XorOfSubsets).with_dim(2);
        let (groups, leak) = spec.bit_layout();
        assert_eq!(groups, vec![0..1, 1..2]);
        assert!(leak.is_empty());
    }
}
