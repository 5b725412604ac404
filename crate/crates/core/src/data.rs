//! Synthetic Gaussian-mixture data and Dirichlet non-i.i.d. partitioning.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Softmax cross-entropy over one class per mixture component.
    #[default]
    Classification,
    /// Squared error against a noisy random linear map of the features.
    Regression,
}

/// Target of a single sample, borrowed from a [`SampleSet`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetRef<'a> {
    Class(usize),
    Values(&'a [f32]),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    Values { dim: usize, values: Vec<f32> },
}

impl Targets {
    fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values { dim, values } => values.len() / dim,
        }
    }

    /// Output width a model needs to fit these targets.
    pub fn output_dim(&self, num_classes: usize) -> usize {
        match self {
            Targets::Classes(_) => num_classes,
            Targets::Values { dim, .. } => *dim,
        }
    }
}

/// Row-major feature matrix plus targets.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    dim: usize,
    features: Vec<f32>,
    targets: Targets,
}

impl SampleSet {
    pub fn new(dim: usize, features: Vec<f32>, targets: Targets) -> Result<Self> {
        if dim == 0 || features.len() % dim != 0 || features.len() / dim != targets.len() {
            return Err(Error::ContractViolation(format!(
                "{} feature scalars of width {dim} do not match {} targets",
                features.len(),
                targets.len()
            )));
        }
        Ok(Self {
            dim,
            features,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn x(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> TargetRef<'_> {
        match &self.targets {
            Targets::Classes(c) => TargetRef::Class(c[i]),
            Targets::Values { dim, values } => TargetRef::Values(&values[i * dim..(i + 1) * dim]),
        }
    }

    fn subset(&self, idx: &[usize]) -> SampleSet {
        let mut features = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            features.extend_from_slice(self.x(i));
        }
        let targets = match &self.targets {
            Targets::Classes(c) => Targets::Classes(idx.iter().map(|&i| c[i]).collect()),
            Targets::Values { dim, values } => {
                let mut v = Vec::with_capacity(idx.len() * dim);
                for &i in idx {
                    v.extend_from_slice(&values[i * dim..(i + 1) * dim]);
                }
                Targets::Values {
                    dim: *dim,
                    values: v,
                }
            }
        };
        SampleSet {
            dim: self.dim,
            features,
            targets,
        }
    }
}

/// The full pool of samples before partitioning. `groups[i]` is the mixture
/// component of sample `i`, used as the class axis for Dirichlet skew.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: SampleSet,
    pub groups: Vec<usize>,
    pub num_groups: usize,
}

/// One client's local shard. `sample_ids` index into the full [`Dataset`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClientDataset {
    pub client_id: u32,
    pub sample_ids: Vec<usize>,
    pub samples: SampleSet,
}

impl ClientDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub task: Task,
    pub classes: usize,
    pub dim: usize,
    pub samples: usize,
    /// Standard deviation of the isotropic noise around each class mean.
    pub noise: f32,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            task: Task::Classification,
            classes: 10,
            dim: 32,
            samples: 5000,
            noise: 2.0,
            seed: 7,
        }
    }
}

/// Draws a balanced Gaussian mixture with one component per class. Class
/// means are standard normal vectors; regression targets are a fixed random
/// linear map of the features plus small noise.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.classes == 0 || spec.dim == 0 || spec.samples == 0 {
        return Err(Error::InvalidConfig(
            "data: classes, dim and samples must be positive".into(),
        ));
    }
    if !(spec.noise.is_finite() && spec.noise >= 0.0) {
        return Err(Error::InvalidConfig("data.noise must be finite and >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0f32, 1.0).expect("unit normal");

    let means: Vec<Vec<f32>> = (0..spec.classes)
        .map(|_| (0..spec.dim).map(|_| std_normal.sample(&mut rng)).collect())
        .collect();

    let mut groups: Vec<usize> = (0..spec.samples).map(|i| i % spec.classes).collect();
    groups.shuffle(&mut rng);

    let mut features = Vec::with_capacity(spec.samples * spec.dim);
    for &g in &groups {
        for &m in &means[g] {
            features.push(m + spec.noise * std_normal.sample(&mut rng));
        }
    }

    let targets = match spec.task {
        Task::Classification => Targets::Classes(groups.clone()),
        Task::Regression => {
            let out = spec.classes;
            let scale = 1.0 / (spec.dim as f32).sqrt();
            let map: Vec<f32> = (0..out * spec.dim)
                .map(|_| scale * std_normal.sample(&mut rng))
                .collect();
            let mut values = Vec::with_capacity(spec.samples * out);
            for x in features.chunks_exact(spec.dim) {
                for row in map.chunks_exact(spec.dim) {
                    let y: f32 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                    values.push(y + 0.1 * std_normal.sample(&mut rng));
                }
            }
            Targets::Values { dim: out, values }
        }
    };

    Ok(Dataset {
        samples: SampleSet::new(spec.dim, features, targets)?,
        groups,
        num_groups: spec.classes,
    })
}

const MAX_RESAMPLES: usize = 100;

/// Splits `full` across `num_clients` with per-class proportions drawn from
/// a symmetric Dirichlet(`alpha`). Proportions are redrawn while any client
/// ends up empty; after `MAX_RESAMPLES` attempts empty clients take one
/// sample from the currently largest client.
pub fn dirichlet_partition(
    full: &Dataset,
    num_clients: usize,
    alpha: f64,
    num_classes: usize,
    seed: u64,
) -> Result<Vec<ClientDataset>> {
    let total = full.samples.len();
    if num_clients == 0 {
        return Err(Error::InvalidConfig("num_clients must be positive".into()));
    }
    if num_clients > total {
        return Err(Error::InvalidConfig(format!(
            "num_clients ({num_clients}) exceeds total samples ({total})"
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "dirichlet alpha must be positive and finite, got {alpha}"
        )));
    }
    if num_classes == 0 || full.groups.iter().any(|&g| g >= num_classes) {
        return Err(Error::InvalidConfig(format!(
            "num_classes ({num_classes}) does not cover the dataset's labels"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::InvalidConfig(format!("dirichlet alpha: {e}")))?;

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &g) in full.groups.iter().enumerate() {
        by_class[g].push(i);
    }

    let mut assignment: Vec<Vec<usize>> = Vec::new();
    for _ in 0..MAX_RESAMPLES {
        assignment = vec![Vec::new(); num_clients];
        for members in &by_class {
            let mut members = members.clone();
            members.shuffle(&mut rng);
            let props = sample_dirichlet(&gamma, num_clients, &mut rng);
            let n = members.len();
            let mut start = 0usize;
            let mut acc = 0.0f64;
            for (c, p) in props.iter().enumerate() {
                acc += p;
                let end = if c + 1 == num_clients {
                    n
                } else {
                    ((acc * n as f64).floor() as usize).min(n)
                };
                let end = end.max(start);
                assignment[c].extend_from_slice(&members[start..end]);
                start = end;
            }
        }
        if assignment.iter().all(|a| !a.is_empty()) {
            break;
        }
    }

    while let Some(empty) = assignment.iter().position(Vec::is_empty) {
        let donor = (0..num_clients)
            .max_by_key(|&c| (assignment[c].len(), std::cmp::Reverse(c)))
            .expect("at least one client");
        let moved = assignment[donor].pop().expect("donor holds >1 sample");
        assignment[empty].push(moved);
    }

    Ok(assignment
        .into_iter()
        .enumerate()
        .map(|(c, mut ids)| {
            ids.sort_unstable();
            ids.shuffle(&mut rng);
            ClientDataset {
                client_id: c as u32,
                samples: full.samples.subset(&ids),
                sample_ids: ids,
            }
        })
        .collect())
}

fn sample_dirichlet<R: Rng>(gamma: &Gamma<f64>, k: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        draws.into_iter().map(|d| d / sum).collect()
    } else {
        // every draw underflowed; put the whole class on one client
        let mut p = vec![0.0; k];
        p[rng.random_range(0..k)] = 1.0;
        p
    }
}
