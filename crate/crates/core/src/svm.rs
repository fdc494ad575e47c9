//! Polynomial-kernel support vector machine.
//!
//! The dual `max Σαᵢ − ½ ΣΣ αᵢαⱼYᵢYⱼK(Xᵢ,Xⱼ)` subject to `Σ αᵢYᵢ = 0` and
//! `0 ≤ αᵢ ≤ C` is solved by sequential minimal optimization, picking the
//! maximal KKT-violating pair each step. Four classes are handled one-vs-one.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{dot, Matrix};
use crate::math::powi;
use crate::signal::ClassId;
use crate::{Error, Result};

/// Default soft-margin cap; large enough to behave as a hard margin on
/// separable data.
pub const DEFAULT_C_CAP: f64 = 1e6;
pub const DEFAULT_DEGREE: u32 = 2;
pub const SMO_TOL: f64 = 1e-6;
pub const SMO_MAX_ITER: usize = 100_000;
/// Multipliers at or below this are not kept as support vectors.
pub const ALPHA_TOL: f64 = 1e-12;

/// `K(x, y) = (xᵀy + 1)^degree`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelSpec {
    degree: u32,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { degree: DEFAULT_DEGREE }
    }
}

impl KernelSpec {
    pub fn new(degree: u32) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidSpec("kernel degree must be at least 1"));
        }
        Ok(Self { degree })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    #[inline]
    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        powi(dot(x, y) + 1.0, self.degree)
    }
}

pub fn kernel_eval(x: &[f64], y: &[f64], kernel: &KernelSpec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(kernel.eval_unchecked(x, y))
}

/// Gram matrix `K(xᵢ, xⱼ)`.
pub fn gram_matrix<F: AsRef<[f64]>>(xs: &[F], kernel: &KernelSpec) -> Matrix {
    let n = xs.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval_unchecked(xs[i].as_ref(), xs[j].as_ref());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// A trained two-class machine. Only support vectors are kept.
#[derive(Clone, Debug, PartialEq)]
pub struct BinarySvmModel {
    support_vectors: Vec<Vec<f64>>,
    labels: Vec<i8>,
    alphas: Vec<f64>,
    bias: f64,
    kernel: KernelSpec,
    c_cap: f64,
}

impl BinarySvmModel {
    /// Rebuilds a model from stored parts, checking the dual constraints.
    pub fn new(
        support_vectors: Vec<Vec<f64>>,
        labels: Vec<i8>,
        alphas: Vec<f64>,
        bias: f64,
        kernel: KernelSpec,
        c_cap: f64,
    ) -> Result<Self> {
        let n = support_vectors.len();
        if n == 0 {
            return Err(Error::InvalidSpec("a machine needs at least one support vector"));
        }
        if labels.len() != n || alphas.len() != n {
            return Err(Error::InvalidSpec("support vector, label and multiplier counts differ"));
        }
        let dim = support_vectors[0].len();
        if let Some(v) = support_vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        if labels.iter().any(|&y| y != 1 && y != -1) {
            return Err(Error::InvalidSpec("labels must be +1 or -1"));
        }
        if !(c_cap > 0.0) {
            return Err(Error::InvalidSpec("c_cap must be positive"));
        }
        if alphas.iter().any(|&a| !(a > 0.0 && a <= c_cap)) {
            return Err(Error::InvalidSpec("multipliers must lie in (0, c_cap]"));
        }
        let total: f64 = alphas.iter().sum();
        let balance: f64 = alphas.iter().zip(&labels).map(|(a, &y)| a * y as f64).sum();
        if balance.abs() > 1e-8 * total.max(1.0) {
            return Err(Error::InvalidSpec("multipliers violate sum(alpha * y) = 0"));
        }
        if !bias.is_finite() {
            return Err(Error::InvalidSpec("bias must be finite"));
        }
        Ok(Self {
            support_vectors,
            labels,
            alphas,
            bias,
            kernel,
            c_cap,
        })
    }

    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn c_cap(&self) -> f64 {
        self.c_cap
    }

    pub fn dim(&self) -> usize {
        self.support_vectors[0].len()
    }

    /// `W = Σ αᵢYᵢXᵢ`, meaningful only for the degree-1 kernel.
    pub fn primal_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        for ((x, &y), &a) in self.support_vectors.iter().zip(&self.labels).zip(&self.alphas) {
            for (wi, xi) in w.iter_mut().zip(x) {
                *wi += a * y as f64 * xi;
            }
        }
        w
    }

    #[inline]
    fn raw_value(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((sv, &y), &a) in self.support_vectors.iter().zip(&self.labels).zip(&self.alphas) {
            acc += a * y as f64 * self.kernel.eval_unchecked(sv, x);
        }
        acc + self.bias
    }
}

/// Everything the solver knows at exit, including multipliers that were
/// dropped from the model.
#[derive(Clone, Debug)]
pub struct SvmFit {
    pub model: BinarySvmModel,
    /// Multipliers for every training point, in input order.
    pub alphas: Vec<f64>,
    /// Dual objective `D(α)` at exit.
    pub objective: f64,
    pub iterations: usize,
}

/// Solver settings.
#[derive(Clone, Copy, Debug)]
pub struct SmoParams {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self {
            tol: SMO_TOL,
            max_iter: SMO_MAX_ITER,
        }
    }
}

pub fn fit_binary_svm<F: AsRef<[f64]>>(xs: &[F], ys: &[i8], kernel: KernelSpec, c_cap: f64) -> Result<BinarySvmModel> {
    fit_binary_svm_detailed(xs, ys, kernel, c_cap, SmoParams::default()).map(|f| f.model)
}

/// Dual objective `Σα − ½ αᵀQα` with `Qᵢⱼ = YᵢYⱼKᵢⱼ`.
pub fn dual_objective(alphas: &[f64], ys: &[i8], gram: &Matrix) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alphas[i] * alphas[j] * (ys[i] * ys[j]) as f64 * gram[(i, j)];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

pub fn fit_binary_svm_detailed<F: AsRef<[f64]>>(
    xs: &[F],
    ys: &[i8],
    kernel: KernelSpec,
    c_cap: f64,
    params: SmoParams,
) -> Result<SvmFit> {
    let n = xs.len();
    if ys.len() != n {
        return Err(Error::DimMismatch {
            expected: n,
            found: ys.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidSpec("need at least two training points"));
    }
    if ys.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::InvalidSpec("labels must be +1 or -1"));
    }
    if !(c_cap > 0.0) {
        return Err(Error::InvalidSpec("c_cap must be positive"));
    }
    let dim = xs[0].as_ref().len();
    if let Some(x) = xs.iter().find(|x| x.as_ref().len() != dim) {
        return Err(Error::DimMismatch {
            expected: dim,
            found: x.as_ref().len(),
        });
    }
    if ys.iter().all(|&y| y == ys[0]) {
        return Err(Error::SingleClass);
    }

    let gram = gram_matrix(xs, &kernel);
    let y: Vec<f64> = ys.iter().map(|&v| v as f64).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * gram[(i, j)];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let c = c_cap;
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt < 0.0 && a < c) || (yt > 0.0 && a > 0.0);

    let mut iterations = 0;
    loop {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < params.tol {
            break;
        }
        if iterations >= params.max_iter {
            return Err(Error::NoConvergence { iterations });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    // g(xᵢ) = Σⱼ αⱼYⱼK(xⱼ, xᵢ), recomputed to shed gradient drift
    let g: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| alpha[j] * y[j] * gram[(i, j)]).sum())
        .collect();
    let bias = extreme_value_bias(&g, &y, &alpha, c);
    let objective = dual_objective(&alpha, ys, &gram);

    let keep: Vec<usize> = (0..n).filter(|&t| alpha[t] > ALPHA_TOL).collect();
    let model = BinarySvmModel {
        support_vectors: keep.iter().map(|&t| xs[t].as_ref().to_vec()).collect(),
        labels: keep.iter().map(|&t| ys[t]).collect(),
        alphas: keep.iter().map(|&t| alpha[t]).collect(),
        bias,
        kernel,
        c_cap,
    };
    if model.support_vectors.is_empty() {
        return Err(Error::NoConvergence { iterations });
    }
    Ok(SvmFit {
        model,
        alphas: alpha,
        objective,
        iterations,
    })
}

/// `b = −(max_{Y=−1} g + min_{Y=+1} g) / 2`, taken over points whose
/// multiplier is below the cap (capped points sit inside the margin). A class
/// with every point capped falls back to all of its points.
fn extreme_value_bias(g: &[f64], y: &[f64], alpha: &[f64], c: f64) -> f64 {
    let extreme = |label: f64, free_only: bool| {
        let it = (0..g.len())
            .filter(|&t| y[t] == label && (!free_only || alpha[t] < c))
            .map(|t| g[t]);
        if label < 0.0 {
            it.fold(f64::NEG_INFINITY, f64::max)
        } else {
            it.fold(f64::INFINITY, f64::min)
        }
    };
    let mut neg_max = extreme(-1.0, true);
    if neg_max == f64::NEG_INFINITY {
        neg_max = extreme(-1.0, false);
    }
    let mut pos_min = extreme(1.0, true);
    if pos_min == f64::INFINITY {
        pos_min = extreme(1.0, false);
    }
    -(neg_max + pos_min) / 2.0
}

/// `Σ αᵢYᵢK(Xᵢ, x) + b`, before the sign.
pub fn decision_value(model: &BinarySvmModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.dim() {
        return Err(Error::DimMismatch {
            expected: model.dim(),
            found: x.len(),
        });
    }
    Ok(model.raw_value(x))
}

/// Sign of the decision value; zero maps to +1.
pub fn classify_binary(model: &BinarySvmModel, x: &[f64]) -> Result<i8> {
    Ok(if decision_value(model, x)? >= 0.0 { 1 } else { -1 })
}

/// One machine of a one-vs-one ensemble; `+1` votes for `pos`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairMachine {
    pub pos: ClassId,
    pub neg: ClassId,
    pub model: BinarySvmModel,
}

/// Six pairwise machines over four task classes.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiClassSvmModel {
    class_ids: [ClassId; 4],
    machines: Vec<PairMachine>,
}

/// Result of a one-vs-one vote.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub class: ClassId,
    /// Votes per class, aligned with [`MultiClassSvmModel::class_ids`].
    pub votes: [u32; 4],
    /// Winner's votes minus the runner-up's.
    pub vote_margin: u32,
}

/// Unordered pairs of four classes in lexicographic order.
pub fn class_pairs(ids: &[ClassId; 4]) -> Vec<(ClassId, ClassId)> {
    let mut pairs = Vec::with_capacity(6);
    for a in 0..4 {
        for b in (a + 1)..4 {
            pairs.push((ids[a], ids[b]));
        }
    }
    pairs
}

impl MultiClassSvmModel {
    pub fn from_machines(class_ids: [ClassId; 4], machines: Vec<PairMachine>) -> Result<Self> {
        let mut sorted = class_ids;
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpec("class ids must be distinct"));
        }
        if machines.len() != 6 {
            return Err(Error::InvalidSpec("a four-class model has exactly six machines"));
        }
        let dim = machines[0].model.dim();
        for (expect, m) in class_pairs(&sorted).into_iter().zip(&machines) {
            if (m.pos, m.neg) != expect {
                return Err(Error::InvalidSpec("machines must cover each class pair once, in order"));
            }
            if m.model.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: m.model.dim(),
                });
            }
        }
        Ok(Self {
            class_ids: sorted,
            machines,
        })
    }

    pub fn class_ids(&self) -> &[ClassId; 4] {
        &self.class_ids
    }

    pub fn machines(&self) -> &[PairMachine] {
        &self.machines
    }

    pub fn dim(&self) -> usize {
        self.machines[0].model.dim()
    }

    pub fn support_vector_count(&self) -> usize {
        self.machines.iter().map(|m| m.model.support_vectors().len()).sum()
    }

    fn slot(&self, c: ClassId) -> usize {
        self.class_ids.iter().position(|&k| k == c).unwrap_or(0)
    }
}

/// Validates a per-class training map and returns its sorted class ids.
pub fn check_four_classes<F: AsRef<[f64]>>(features_by_class: &BTreeMap<ClassId, Vec<F>>) -> Result<[ClassId; 4]> {
    if features_by_class.len() != 4 {
        return Err(Error::WrongClassCount {
            expected: 4,
            found: features_by_class.len(),
        });
    }
    let mut ids = [ClassId::all()[0]; 4];
    for (slot, (&id, samples)) in ids.iter_mut().zip(features_by_class) {
        match samples.len() {
            0 => return Err(Error::EmptyClass(id)),
            1 => return Err(Error::InvalidSpec("need at least two samples per class")),
            _ => {}
        }
        *slot = id;
    }
    Ok(ids)
}

/// Trains the machine separating `pos` (+1) from `neg` (−1).
pub fn fit_pair<F: AsRef<[f64]>>(
    pos: (ClassId, &[F]),
    neg: (ClassId, &[F]),
    kernel: KernelSpec,
    c_cap: f64,
) -> Result<PairMachine> {
    let xs: Vec<&[f64]> = pos.1.iter().chain(neg.1).map(|x| x.as_ref()).collect();
    let ys: Vec<i8> = core::iter::repeat_n(1i8, pos.1.len())
        .chain(core::iter::repeat_n(-1i8, neg.1.len()))
        .collect();
    let model = fit_binary_svm(&xs, &ys, kernel, c_cap).map_err(|e| Error::PairFit {
        pair: (pos.0, neg.0),
        source: Box::new(e),
    })?;
    Ok(PairMachine {
        pos: pos.0,
        neg: neg.0,
        model,
    })
}

/// One-vs-one training over exactly four classes.
pub fn fit_multiclass<F: AsRef<[f64]>>(
    features_by_class: &BTreeMap<ClassId, Vec<F>>,
    kernel: KernelSpec,
    c_cap: f64,
) -> Result<MultiClassSvmModel> {
    let ids = check_four_classes(features_by_class)?;
    let machines = class_pairs(&ids)
        .into_iter()
        .map(|(a, b)| fit_pair((a, &features_by_class[&a]), (b, &features_by_class[&b]), kernel, c_cap))
        .collect::<Result<Vec<_>>>()?;
    MultiClassSvmModel::from_machines(ids, machines)
}

/// Majority vote; ties go to the largest summed |decision value| over the
/// votes each tied class won, then to the lowest class id.
pub fn predict_multiclass(model: &MultiClassSvmModel, x: &[f64]) -> Result<Prediction> {
    if x.len() != model.dim() {
        return Err(Error::DimMismatch {
            expected: model.dim(),
            found: x.len(),
        });
    }
    let mut votes = [0u32; 4];
    let mut strength = [0.0f64; 4];
    for m in &model.machines {
        let v = m.model.raw_value(x);
        let winner = if v >= 0.0 { m.pos } else { m.neg };
        let s = model.slot(winner);
        votes[s] += 1;
        strength[s] += v.abs();
    }
    let mut best = 0;
    for s in 1..4 {
        if votes[s] > votes[best] || (votes[s] == votes[best] && strength[s] > strength[best]) {
            best = s;
        }
    }
    let runner_up = (0..4).filter(|&s| s != best).map(|s| votes[s]).max().unwrap_or(0);
    Ok(Prediction {
        class: model.class_ids[best],
        votes,
        vote_margin: votes[best] - runner_up,
    })
}
