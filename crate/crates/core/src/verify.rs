//! Seeded finite-difference suite over every differentiable component and
//! the composed training objective.
//!
//! Parameters behind the gradient reversal gate descend `-lambda * L_inv`
//! rather than `L_inv`, so for `f_inv.*` tensors the numeric reference is
//! `L_task - lambda * L_inv`; every other tensor is compared against
//! `L_total`.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{Ablation, Batch, DualEncoderModel, Mode, ModelSpec, TaskTargets};
use crate::nn::gradcheck::{check_input_gradient, check_named_params, check_params};
use crate::nn::{relu_backward, relu_forward, softmax_xent, AffineLayer, Matrix, Mlp, Parameters};
use crate::tasks::{DepHead, LabelSpace, PosHead, TaskKind};

pub const EPS: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-5;
pub const LAMBDAS: [f64; 4] = [0.0, 0.1, 0.5, 1.0];

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub fixtures: usize,
    pub max_error: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.max_error < TOLERANCE
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches data length")
}

/// Entries pushed away from zero so central differences never straddle a
/// ReLU kink.
fn kink_free_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let mut m = random_matrix(rng, rows, cols);
    for v in m.data_mut() {
        if v.abs() < 0.05 {
            *v += 0.1f64.copysign(*v);
        }
    }
    m
}

/// Fresh layers have zero biases, which can leave preactivations exactly on
/// a ReLU kink (a dead hidden layer feeds exact zeros downstream). Nonzero
/// biases keep fixtures generic.
fn randomize_biases<M: Parameters + ?Sized>(model: &mut M, rng: &mut ChaCha8Rng) {
    model.visit_params("", &mut |name, p| {
        if name.ends_with("bias") {
            for v in p.value.data_mut() {
                *v = rng.random_range(0.05..0.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            }
        }
    });
}

/// Smallest hidden preactivation magnitude of `mlp` on `x`.
fn kink_margin(mlp: &Mlp, x: &Matrix) -> f64 {
    let pre = mlp.hidden.forward(x).expect("fixture widths agree");
    pre.data().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
}

/// Fixtures with a preactivation this close to zero are redrawn.
const KINK_MARGIN: f64 = 1e-3;

fn weighted_sum(y: &Matrix, w: &Matrix) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

fn check_affine(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (n, i, o) = (rng.random_range(1..5), rng.random_range(1..6), rng.random_range(1..5));
    let mut layer = AffineLayer::glorot(i, o, rng);
    let x = random_matrix(rng, n, i);
    let w = random_matrix(rng, n, o);
    let p = check_params(&mut layer, EPS, |l, acc| {
        let y = l.forward(&x).unwrap();
        if acc {
            l.backward(&x, &w).unwrap();
        }
        weighted_sum(&y, &w)
    });
    let frozen = layer.clone();
    let g = check_input_gradient(&x, EPS, |x| {
        let y = frozen.forward(x).unwrap();
        (weighted_sum(&y, &w), frozen.gradients(x, &w).unwrap().input)
    });
    Ok(p.max(g))
}

fn check_relu(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (n, c) = (rng.random_range(1..5), rng.random_range(1..6));
    let z = kink_free_matrix(rng, n, c);
    let w = random_matrix(rng, n, c);
    Ok(check_input_gradient(&z, EPS, |z| {
        (weighted_sum(&relu_forward(z), &w), relu_backward(z, &w).unwrap())
    }))
}

fn check_mlp(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (n, i, h, o) = (
        rng.random_range(1..5),
        rng.random_range(1..6),
        rng.random_range(1..6),
        rng.random_range(1..5),
    );
    let mut mlp = Mlp::new(i, h, o, rng);
    randomize_biases(&mut mlp, rng);
    let x = loop {
        let x = random_matrix(rng, n, i);
        if kink_margin(&mlp, &x) > KINK_MARGIN {
            break x;
        }
    };
    let w = random_matrix(rng, n, o);
    let p = check_params(&mut mlp, EPS, |m, acc| {
        let (y, cache) = m.forward_cached(&x).unwrap();
        if acc {
            m.backward(&cache, &w).unwrap();
        }
        weighted_sum(&y, &w)
    });
    let mut frozen = mlp.clone();
    let g = check_input_gradient(&x, EPS, |x| {
        let (y, cache) = frozen.forward_cached(x).unwrap();
        let dx = frozen.backward(&cache, &w).unwrap();
        (weighted_sum(&y, &w), dx)
    });
    Ok(p.max(g))
}

fn check_softmax_xent(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (n, c) = (rng.random_range(1..5), rng.random_range(2..6));
    let mut logits = random_matrix(rng, n, c);
    logits.scale(3.0);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    Ok(check_input_gradient(&logits, EPS, |z| softmax_xent(z, &labels).unwrap()))
}

fn check_pos_head(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (n, d, t) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(2..5));
    let mut head = PosHead::new(d, t, rng);
    let h = random_matrix(rng, n, d);
    let gold: Vec<usize> = (0..n).map(|_| rng.random_range(0..t)).collect();
    let p = check_params(&mut head, EPS, |m, acc| m.loss(&h, &gold, acc).unwrap().0);
    let mut frozen = head.clone();
    let g = check_input_gradient(&h, EPS, |h| frozen.loss(h, &gold, true).unwrap());
    Ok(p.max(g))
}

fn random_heads(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n)
        .map(|i| loop {
            let h = rng.random_range(0..=n);
            if h != i + 1 {
                break h;
            }
        })
        .collect()
}

fn check_dep_head(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (n, d, a, r) = (
        rng.random_range(1..6),
        rng.random_range(2..6),
        rng.random_range(1..4),
        rng.random_range(1..4),
    );
    let mut head = DepHead::new(d, a, r, rng);
    let h = random_matrix(rng, n, d);
    let heads = random_heads(rng, n);
    let rels: Vec<usize> = (0..n).map(|_| rng.random_range(0..r)).collect();
    let scale = 1.0 / n as f64;
    let p = check_params(&mut head, EPS, |m, acc| m.loss(&h, &heads, &rels, scale, acc).unwrap().0);
    let mut frozen = head.clone();
    let g = check_input_gradient(&h, EPS, |h| frozen.loss(h, &heads, &rels, scale, true).unwrap());
    Ok(p.max(g))
}

/// Small random model and batch for the composed objective, redrawn until
/// no ReLU preactivation sits near its kink.
pub fn objective_fixture(
    rng: &mut ChaCha8Rng,
    task: TaskKind,
    mode: Mode,
    ablation: Ablation,
    lambda: f64,
) -> Result<(DualEncoderModel, Batch)> {
    loop {
        let (model, batch) = draw_objective_fixture(rng, task, mode, ablation, lambda)?;
        let h_inv = model.f_inv.forward(&batch.cls)?;
        let h_spc = model.f_spc.forward(&batch.cls)?;
        let margin = [
            kink_margin(&model.f_inv, &batch.tokens),
            kink_margin(&model.f_spc, &batch.tokens),
            kink_margin(&model.f_inv, &batch.cls),
            kink_margin(&model.f_spc, &batch.cls),
            kink_margin(&model.d_inv, &h_inv),
            kink_margin(&model.d_spc, &h_spc),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        if margin > KINK_MARGIN {
            return Ok((model, batch));
        }
    }
}

fn draw_objective_fixture(
    rng: &mut ChaCha8Rng,
    task: TaskKind,
    mode: Mode,
    ablation: Ablation,
    lambda: f64,
) -> Result<(DualEncoderModel, Batch)> {
    let dim = 2 * rng.random_range(1..4);
    let varieties = rng.random_range(1..4);
    let classes = rng.random_range(2..4);
    let labels = LabelSpace::from_labels((0..classes).map(|c| alloc::format!("L{c}")));
    let spec = ModelSpec {
        dim,
        hidden: rng.random_range(2..6),
        arc_dim: rng.random_range(1..4),
        task,
        varieties: (0..varieties).map(|v| alloc::format!("v{v}")).collect(),
        labels,
    };
    let mut model = DualEncoderModel::new(spec, mode, ablation, lambda, rng.random())?;
    randomize_biases(&mut model, rng);
    let sentences = rng.random_range(1..4);
    let mut spans = Vec::new();
    let mut heads = Vec::new();
    let mut rels = Vec::new();
    let mut tags = Vec::new();
    let mut row = 0;
    for _ in 0..sentences {
        let len = rng.random_range(1..5);
        spans.push((row, len));
        row += len;
        heads.extend(random_heads(rng, len));
        rels.extend((0..len).map(|_| rng.random_range(0..classes)));
        tags.extend((0..len).map(|_| rng.random_range(0..classes)));
    }
    let y_task = match task {
        TaskKind::Pos => TaskTargets::Pos(tags),
        TaskKind::Dep => TaskTargets::Dep { heads, rels },
    };
    let batch = Batch {
        tokens: random_matrix(rng, row, dim),
        spans,
        cls: random_matrix(rng, sentences, dim),
        y_var: (0..sentences).map(|_| rng.random_range(0..varieties)).collect(),
        y_task,
    };
    Ok((model, batch))
}

/// Maximum error of the composed objective's parameter gradients.
pub fn check_objective(model: &mut DualEncoderModel, batch: &Batch) -> f64 {
    let lambda = model.grl.lambda;
    check_named_params(model, EPS, |m, acc, name| {
        if acc {
            return m.loss_total(batch, true).unwrap().total;
        }
        let l = m.loss_total(batch, false).unwrap();
        if name.starts_with("f_inv.") {
            l.task + l.spc - lambda * l.inv
        } else {
            l.total
        }
    })
}

fn check_composed(rng: &mut ChaCha8Rng, task: TaskKind, mode: Mode) -> Result<f64> {
    let lambda = LAMBDAS[rng.random_range(0..LAMBDAS.len())];
    let ablation = Ablation {
        use_inv_loss: rng.random_bool(0.75),
        use_spc_loss: rng.random_bool(0.75),
    };
    let (mut model, batch) = objective_fixture(rng, task, mode, ablation, lambda)?;
    Ok(check_objective(&mut model, &batch))
}

type Check = fn(&mut ChaCha8Rng) -> Result<f64>;

/// Runs `fixtures` seeded instances of every check and reports the worst
/// error per check.
pub fn gradient_suite(fixtures: usize, seed: u64) -> Result<Vec<CheckRow>> {
    let kernels: [(&str, Check); 6] = [
        ("affine", check_affine),
        ("relu", check_relu),
        ("mlp", check_mlp),
        ("softmax_xent", check_softmax_xent),
        ("pos_head", check_pos_head),
        ("dep_head", check_dep_head),
    ];
    let composed: Vec<(String, TaskKind, Mode)> = [TaskKind::Pos, TaskKind::Dep]
        .into_iter()
        .flat_map(|t| {
            [Mode::Baseline, Mode::AlignmentOnly, Mode::Vacai]
                .into_iter()
                .map(move |m| (alloc::format!("objective_{}_{}", t.as_str(), m.as_str()), t, m))
        })
        .collect();
    let mut rows = Vec::new();
    let mut stream = 0u64;
    let mut next_rng = || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        stream += 1;
        rng
    };
    for (name, check) in kernels {
        let mut worst = 0.0f64;
        for _ in 0..fixtures {
            worst = worst.max(check(&mut next_rng())?);
        }
        rows.push(CheckRow {
            name: String::from(name),
            fixtures,
            max_error: worst,
        });
    }
    for (name, task, mode) in composed {
        let mut worst = 0.0f64;
        for _ in 0..fixtures {
            worst = worst.max(check_composed(&mut next_rng(), task, mode)?);
        }
        rows.push(CheckRow {
            name,
            fixtures,
            max_error: worst,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes_on_twenty_fixtures() {
        let rows = gradient_suite(20, 7).unwrap();
        assert_eq!(rows.len(), 12);
        for row in &rows {
            assert!(row.passed(), "{} max error {:e}", row.name, row.max_error);
        }
    }

    #[test]
    fn a_broken_reversal_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ablation = Ablation { use_inv_loss: true, use_spc_loss: true };
        let (mut model, batch) = objective_fixture(&mut rng, TaskKind::Pos, Mode::Vacai, ablation, 1.0).unwrap();
        assert!(check_objective(&mut model, &batch) < TOLERANCE);
        // the reported loss is not what f_inv descends
        let err = check_named_params(&mut model, EPS, |m, acc, _| m.loss_total(&batch, acc).unwrap().total);
        assert!(err > 1e-2, "{err}");
    }
}
