//! Acceptance criteria, one line each. Criterion 9 is informational: it prints
//! WARN instead of failing.
//!
//! cargo test --release --test acceptance
//! AEM_TREND_FULL=1 cargo test --release --test acceptance   (full-size trend run)

use std::time::{Duration, Instant};

use aem::cli::experiment::compare;
use aem::cli::{model_spec, Checkpoint, RunConfig};
use aem::data::{encode_corpus, toy, Batch, Corpus, DialoguePair, Vocabulary};
use aem::eval::{corpus_bleu, distinct_ngrams, g_score};
use aem::layers::{Attention, Embedding, LstmCell, MappingMlp};
use aem::model::{
    evaluate_pairs, total_loss, train_step, LossBreakdown, LossParts, LossWeights, Mapping, Model, ModelKind,
    ModelSpec, Trainer, TrainingConfig, GAMMA, PHI, THETA,
};
use aem::nn::gradcheck::{check_gradients, GradCheckReport};
use aem::nn::rng::SplitMix64;
use aem::nn::{uniform_init, AdamState, ParamStore, Tape, Tensor, Var};

mod common;
use common::{brute_bleu, brute_counts, enumerate_distinct, random_corpus};

const GRAD_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;
const COMPOSE_TOL: f64 = 1e-6;
const EQUIV_TOL: f64 = 1e-5;
const DETACH_MIN: f64 = 1e-8;
const G_TOL: f64 = 0.01;
const BLEU_REL_TOL: f64 = 1e-12;
const OVERFIT_LOSS: f64 = 0.1;
const OVERFIT_EXACT: f64 = 0.9;
const OVERFIT_STEPS: usize = 500;

enum Outcome {
    Pass(String),
    Fail(String),
    Warn(String),
}

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- 1

const V: usize = 7;
const E: usize = 3;
const H: usize = 4;
const B: usize = 2;

/// Weighted sum of every entry, so each output entry gets a distinct
/// upstream gradient.
fn project(g: &mut Tape<f64>, y: Var, seed: u64) -> aem::Result<Var> {
    let shape = g.value(y).shape().to_vec();
    let n: usize = shape.iter().product();
    let mut rng = SplitMix64::new(seed);
    let w: Vec<f64> = (0..n).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
    let w = g.constant(Tensor::new(shape, w)?);
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

fn store_with(shapes: &[(&str, &[usize])], seed: u64) -> ParamStore<f64> {
    let mut s = ParamStore::new();
    for (name, shape) in shapes {
        s.insert(*name, Tensor::zeros(shape)).unwrap();
    }
    uniform_init(&mut s, -1.0, 1.0, seed).unwrap();
    s
}

type OpLoss = Box<dyn Fn(&mut Tape<f64>, &ParamStore<f64>) -> aem::Result<Var>>;
type OpCase = (&'static str, Vec<(&'static str, &'static [usize])>, OpLoss);

fn op_cases() -> Vec<OpCase> {
    let mn: &'static [usize] = &[B, H];
    vec![
        ("matmul", vec![("a", mn), ("b", &[H, E])], Box::new(|g, s| {
            let (a, b) = (g.param(s, "a")?, g.param(s, "b")?);
            let y = g.matmul(a, b)?;
            project(g, y, 1)
        })),
        ("add", vec![("a", mn), ("b", mn)], Box::new(|g, s| {
            let (a, b) = (g.param(s, "a")?, g.param(s, "b")?);
            let y = g.add(a, b)?;
            project(g, y, 2)
        })),
        ("sub", vec![("a", mn), ("b", mn)], Box::new(|g, s| {
            let (a, b) = (g.param(s, "a")?, g.param(s, "b")?);
            let y = g.sub(a, b)?;
            project(g, y, 3)
        })),
        ("mul", vec![("a", mn), ("b", mn)], Box::new(|g, s| {
            let (a, b) = (g.param(s, "a")?, g.param(s, "b")?);
            let y = g.mul(a, b)?;
            project(g, y, 4)
        })),
        ("mul_self", vec![("a", mn)], Box::new(|g, s| {
            let a = g.param(s, "a")?;
            let y = g.mul(a, a)?;
            project(g, y, 5)
        })),
        ("sigmoid", vec![("a", mn)], Box::new(|g, s| {
            let a = g.param(s, "a")?;
            let y = g.sigmoid(a);
            project(g, y, 6)
        })),
        ("tanh", vec![("a", mn)], Box::new(|g, s| {
            let a = g.param(s, "a")?;
            let y = g.tanh(a);
            project(g, y, 7)
        })),
        ("add_bias", vec![("x", mn), ("b", &[1, H])], Box::new(|g, s| {
            let (x, b) = (g.param(s, "x")?, g.param(s, "b")?);
            let y = g.add_bias(x, b)?;
            project(g, y, 8)
        })),
        ("slice_cols", vec![("x", &[B, 2 * H])], Box::new(|g, s| {
            let x = g.param(s, "x")?;
            let y = g.slice_cols(x, 3, H)?;
            project(g, y, 9)
        })),
        ("concat_cols", vec![("a", mn), ("b", &[B, E])], Box::new(|g, s| {
            let (a, b) = (g.param(s, "a")?, g.param(s, "b")?);
            let y = g.concat_cols(&[a, b, a])?;
            project(g, y, 10)
        })),
        ("gather_rows", vec![("t", &[V, E])], Box::new(|g, s| {
            let t = g.param(s, "t")?;
            let y = g.gather_rows(t, &[4, 0, 4, 6])?;
            project(g, y, 11)
        })),
        ("softmax_cross_entropy", vec![("z", &[3, V])], Box::new(|g, s| {
            let z = g.param(s, "z")?;
            Ok(g.softmax_cross_entropy(z, &[2, 5, 0], &[true, false, true])?.sum)
        })),
        ("sum", vec![("a", mn)], Box::new(|g, s| {
            let a = g.param(s, "a")?;
            let sq = g.mul(a, a)?;
            Ok(g.sum(sq))
        })),
        ("scale", vec![("a", mn)], Box::new(|g, s| {
            let a = g.param(s, "a")?;
            let y = g.scale(a, -1.75);
            project(g, y, 12)
        })),
        ("row_dot", vec![("a", mn), ("b", mn)], Box::new(|g, s| {
            let (a, b) = (g.param(s, "a")?, g.param(s, "b")?);
            let y = g.row_dot(a, b)?;
            project(g, y, 13)
        })),
        ("scale_rows", vec![("x", mn), ("s", &[B, 1])], Box::new(|g, s| {
            let (x, k) = (g.param(s, "x")?, g.param(s, "s")?);
            let y = g.scale_rows(x, k)?;
            project(g, y, 14)
        })),
        ("masked_softmax", vec![("x", &[B, 3])], Box::new(|g, s| {
            let x = g.param(s, "x")?;
            let y = g.masked_softmax(x, &[true, true, true, true, false, true])?;
            project(g, y, 15)
        })),
        ("blend_rows", vec![("a", mn), ("b", mn)], Box::new(|g, s| {
            let (a, b) = (g.param(s, "a")?, g.param(s, "b")?);
            let y = g.blend_rows(a, b, &[true, false])?;
            project(g, y, 16)
        })),
    ]
}

fn worst(reports: &[(String, GradCheckReport)]) -> (String, f64) {
    reports
        .iter()
        .map(|(n, r)| (n.clone(), r.max_rel_error))
        .fold((String::new(), 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
}

fn tiny_batch() -> Batch {
    let a = DialoguePair::new(vec![4, 5, 6], vec![5, 4, 6]).unwrap();
    let b = DialoguePair::new(vec![6, 3], vec![4, 6]).unwrap();
    Batch::from_pairs(&[&a, &b], 50).unwrap()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut reports = Vec::new();
    for (name, shapes, f) in op_cases() {
        let mut s = store_with(&shapes, name.len() as u64 * 31);
        let r = check_gradients(&mut s, FD_STEP, |g, s| f(g, s)).map_err(e2s)?;
        reports.push((name.to_string(), r));
    }

    // layers
    let mut s = ParamStore::new();
    LstmCell::declare(&mut s, "cell", E, H).map_err(e2s)?;
    Embedding::declare(&mut s, "emb", V, E).map_err(e2s)?;
    s.insert("h0", Tensor::zeros(&[B, H])).map_err(e2s)?;
    s.insert("c0", Tensor::zeros(&[B, H])).map_err(e2s)?;
    uniform_init(&mut s, -0.8, 0.8, 5).map_err(e2s)?;
    let r = check_gradients(&mut s, FD_STEP, |g, s| {
        let emb = Embedding::bind(g, s, "emb")?;
        let cell = LstmCell::bind(g, s, "cell")?;
        let (mut h, mut c) = (g.param(s, "h0")?, g.param(s, "c0")?);
        for ids in [[1, 4], [6, 4], [2, 0]] {
            let x = emb.lookup(g, &ids)?;
            (h, c) = cell.step(g, x, h, c)?;
        }
        let hc = g.concat_cols(&[h, c])?;
        project(g, hc, 21)
    })
    .map_err(e2s)?;
    reports.push(("lstm_3_steps".into(), r));

    let mut s = ParamStore::new();
    MappingMlp::declare(&mut s, "g", 2 * H).map_err(e2s)?;
    s.insert("h", Tensor::zeros(&[B, 2 * H])).map_err(e2s)?;
    uniform_init(&mut s, -0.8, 0.8, 6).map_err(e2s)?;
    let r = check_gradients(&mut s, FD_STEP, |g, s| {
        let mlp = MappingMlp::bind(g, s, "g")?;
        let h = g.param(s, "h")?;
        let y = mlp.forward(g, h)?;
        project(g, y, 22)
    })
    .map_err(e2s)?;
    reports.push(("mapping_mlp".into(), r));

    let mut s = ParamStore::new();
    Attention::declare(&mut s, "attn", H).map_err(e2s)?;
    for n in ["h", "e0", "e1", "e2"] {
        s.insert(n, Tensor::zeros(&[B, H])).map_err(e2s)?;
    }
    uniform_init(&mut s, -1.0, 1.0, 7).map_err(e2s)?;
    let r = check_gradients(&mut s, FD_STEP, |g, s| {
        let attn = Attention::bind(g, s, "attn")?;
        let h = g.param(s, "h")?;
        let es = ["e0", "e1", "e2"].map(|n| g.param(s, n));
        let es = es.into_iter().collect::<aem::Result<Vec<_>>>()?;
        let (ctx, _) = attn.context(g, h, &es, &[true, true, true, true, true, false])?;
        let ht = attn.attentional_hidden(g, ctx, h)?;
        project(g, ht, 23)
    })
    .map_err(e2s)?;
    reports.push(("attention".into(), r));

    // full objective, every kind, detach off so the gradient is the true one
    let w = LossWeights {
        lambda1: 0.7,
        lambda2: 0.3,
        lambda3: 1.1,
    };
    let batch = tiny_batch();
    for kind in ModelKind::ALL {
        let m = Model::<f64>::initialized(ModelSpec::new(kind, V, E, H), 0.5, 11).map_err(e2s)?;
        let spec = *m.spec();
        let mut store = m.params.clone();
        let r = check_gradients(&mut store, FD_STEP, |g, p| {
            let m = Model::from_params(spec, p.clone())?;
            Ok(m.forward(g, &batch, &w, false)?.total)
        })
        .map_err(e2s)?;
        ensure(r.checked == m.params.num_scalars(), || format!("{kind}: not every parameter checked"))?;
        reports.push((format!("total_{kind}"), r));
    }

    let elapsed = start.elapsed();
    let (name, err) = worst(&reports);
    ensure(err < GRAD_TOL, || format!("{name}: rel error {err:.3e} >= {GRAD_TOL:.0e}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "{} checks, worst {err:.2e} ({name}), {elapsed:.1?}",
        reports.len()
    ))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Check {
    let mut rng = SplitMix64::new(2);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let mut u = |s: f64| rng.next_f64() * s;
        let w = LossWeights {
            lambda1: u(3.0),
            lambda2: u(1.0),
            lambda3: u(3.0),
        };
        let parts = LossParts {
            j1: u(10.0),
            j2: u(10.0),
            j3: u(50.0),
            j4: u(10.0),
            ..Default::default()
        };
        let got = total_loss(&parts, &w).map_err(e2s)?.total;
        let expect = w.lambda1 * parts.j1 + w.lambda1 * parts.j2 + w.lambda2 * parts.j3 + w.lambda3 * parts.j4;
        worst = worst.max((got - expect).abs() / expect.abs().max(f64::MIN_POSITIVE));
    }
    ensure(worst <= COMPOSE_TOL, || format!("random parts: rel error {worst:.2e}"))?;

    // the graph total agrees with its own reported parts
    let batch = tiny_batch();
    for kind in ModelKind::ALL {
        let w = LossWeights {
            lambda1: 0.4,
            lambda2: 1.7,
            lambda3: 0.9,
        };
        let m = Model::<f64>::initialized(ModelSpec::new(kind, V, E, H), 0.5, 3).map_err(e2s)?;
        let mut g = Tape::new();
        let f = m.forward(&mut g, &batch, &w, true).map_err(e2s)?;
        let b = f.breakdown(&g, &w).map_err(e2s)?;
        let expect = w.lambda1 * (b.j1 + b.j2) + w.lambda2 * b.j3 + w.lambda3 * b.j4;
        let graph = g.value(f.total).item();
        let err = ((graph - expect) / expect).abs().max(((b.total - expect) / expect).abs());
        ensure(err <= COMPOSE_TOL, || format!("{kind}: graph total off by {err:.2e}"))?;
    }

    let w = LossWeights {
        lambda1: 1.0,
        lambda2: 0.01,
        lambda3: 1.0,
    };
    let parts = LossParts {
        j1: 1.0,
        j2: 2.0,
        j3: 5.0,
        j4: 3.0,
        ..Default::default()
    };
    let t = total_loss(&parts, &w).map_err(e2s)?.total;
    ensure(t == 6.05, || format!("hand case gave {t:?}"))?;
    Ok(format!("10000 random cases, worst {worst:.1e}; hand case = {t}"))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Check {
    let start = Instant::now();
    let corpus = Corpus {
        pairs: toy::small_talk(),
        skipped: 0,
    };
    let vocab = Vocabulary::build(corpus.sentences(), 1000).map_err(e2s)?;
    let pairs = encode_corpus(&vocab, &corpus).map_err(e2s)?;
    let cfg = TrainingConfig {
        hidden_size: 32,
        embed_size: 16,
        vocab_size: vocab.len(),
        batch_size: pairs.len(),
        learning_rate: 0.002,
        ..Default::default()
    };
    let spec = ModelSpec::from_config(ModelKind::Aem, &cfg, vocab.len());
    let mut model = Model::<f32>::initialized(spec, cfg.init_range, cfg.seed).map_err(e2s)?;
    let mut adam = AdamState::new(cfg.adam());
    let refs: Vec<&DialoguePair> = pairs.iter().collect();
    let batch = Batch::from_pairs(&refs, cfg.max_seq_len).map_err(e2s)?;

    let below = |b: &LossBreakdown| b.j1 < OVERFIT_LOSS && b.j2 < OVERFIT_LOSS && b.j4 < OVERFIT_LOSS;
    let mut first_below = None;
    for step in 1..=OVERFIT_STEPS {
        let b = train_step(&mut model, &batch, &cfg, &mut adam).map_err(e2s)?;
        if first_below.is_none() && below(&b) {
            first_below = Some(step);
        }
    }
    let end = evaluate_pairs(&model, &pairs, &cfg).map_err(e2s)?;
    if first_below.is_none() && below(&end) {
        first_below = Some(OVERFIT_STEPS);
    }
    let sources: Vec<Vec<usize>> = pairs.iter().map(|p| p.source.clone()).collect();
    let out = model.generate_batch(&sources, cfg.max_gen_len).map_err(e2s)?;
    let exact = out.iter().zip(&pairs).filter(|(o, p)| **o == p.target).count();
    let elapsed = start.elapsed();

    let detail = format!(
        "after {OVERFIT_STEPS} steps j1={:.3} j2={:.3} j4={:.3}, {exact}/{} exact, {elapsed:.1?}",
        end.j1,
        end.j2,
        end.j4,
        pairs.len()
    );
    ensure(first_below.is_some(), || format!("losses not all < {OVERFIT_LOSS}: {detail}"))?;
    ensure(exact as f64 >= OVERFIT_EXACT * pairs.len() as f64, || format!("too few exact: {detail}"))?;
    ensure(elapsed < Duration::from_secs(300), || format!("too slow: {detail}"))?;
    Ok(detail)
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Check {
    let cfg = TrainingConfig {
        hidden_size: H,
        embed_size: E,
        vocab_size: V,
        batch_size: B,
        lambda1: 0.0,
        lambda2: 0.0,
        ..Default::default()
    };
    let aem_spec = ModelSpec {
        mapping: Mapping::Identity,
        ..ModelSpec::new(ModelKind::Aem, V, E, H)
    };
    let mut aem = Model::<f32>::initialized(aem_spec, cfg.init_range, 30).map_err(e2s)?;
    let mut s2s = Model::<f32>::initialized(ModelSpec::new(ModelKind::Seq2Seq, V, E, H), cfg.init_range, 30).map_err(e2s)?;
    let (mut a1, mut a2) = (AdamState::new(cfg.adam()), AdamState::new(cfg.adam()));
    let batch = tiny_batch();
    let mut worst = 0.0f64;
    for step in 0..50 {
        let x = train_step(&mut aem, &batch, &cfg, &mut a1).map_err(e2s)?;
        let y = train_step(&mut s2s, &batch, &cfg, &mut a2).map_err(e2s)?;
        let err = (x.total - y.total).abs() / y.total.abs();
        worst = worst.max(err);
        ensure(err <= EQUIV_TOL, || format!("step {step}: {} vs {}", x.total, y.total))?;
    }
    Ok(format!("50 steps, worst rel diff {worst:.1e}"))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Check {
    let grads = |kind, detach| -> std::result::Result<ParamStore<f64>, String> {
        let mut m = Model::<f64>::initialized(ModelSpec::new(kind, V, E, H), 0.5, 21).map_err(e2s)?;
        let mut g = Tape::new();
        let f = m.forward(&mut g, &tiny_batch(), &LossWeights::default(), detach).map_err(e2s)?;
        m.params.clear_grads();
        g.backward(f.j3.ok_or("no mapping loss")?, &mut m.params).map_err(e2s)?;
        Ok(m.params)
    };
    let max_abs = |p: &ParamStore<f64>, ns: &str| {
        p.namespace(ns)
            .flat_map(|(_, t)| t.grad().unwrap_or_default().iter().map(|g| g.abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    };
    let mut on = 0.0f64;
    for kind in [ModelKind::Aem, ModelKind::AemAttention] {
        let p = grads(kind, true)?;
        let (t, f) = (max_abs(&p, THETA), max_abs(&p, PHI));
        ensure(t == 0.0 && f == 0.0, || format!("{kind} detached: theta {t:e}, phi {f:e}"))?;
        ensure(max_abs(&p, GAMMA) > DETACH_MIN, || format!("{kind}: gamma receives nothing"))?;
        let p = grads(kind, false)?;
        let (t, f) = (max_abs(&p, THETA), max_abs(&p, PHI));
        ensure(t > DETACH_MIN && f > DETACH_MIN, || format!("{kind} attached: theta {t:e}, phi {f:e}"))?;
        on = on.max(t.min(f));
    }
    Ok(format!("detached: exactly 0; attached: min(max|g|) = {on:.2e}"))
}

// ---------------------------------------------------------------- 6

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn criterion_6() -> Check {
    let (hyps, refs) = random_corpus(6, 50);
    let report = corpus_bleu(&hyps, &refs, 4).map_err(e2s)?;
    for n in 1..=4 {
        let (mut m, mut t) = (0, 0);
        for (h, r) in hyps.iter().zip(&refs) {
            let (a, b) = brute_counts(h, r, n);
            m += a;
            t += b;
        }
        ensure(report.matches[n - 1] == m && report.totals[n - 1] == t, || {
            format!("order {n}: counts {}/{} vs {m}/{t}", report.matches[n - 1], report.totals[n - 1])
        })?;
        let expect = brute_bleu(&hyps, &refs, n);
        let got = report.bleu(n);
        ensure((got - expect).abs() <= BLEU_REL_TOL * expect.max(1.0), || {
            format!("BLEU-{n}: {got} vs oracle {expect}")
        })?;
    }

    let same = corpus_bleu(&hyps, &hyps, 4).map_err(e2s)?.bleu(4);
    ensure(same == 100.0, || format!("hyp = ref gave {same}"))?;

    let r = corpus_bleu(&[toks("a b c")], &[toks("a b c d")], 3).map_err(e2s)?;
    let b3 = format!("{:.2}", r.bleu(3));
    ensure(b3 == "71.65", || format!("short-hypothesis case gave {b3}"))?;
    ensure((r.brevity_penalty - (-1.0f64 / 3.0).exp()).abs() < 1e-15, || "brevity penalty".into())?;
    let r = corpus_bleu(&[toks("the the the")], &[toks("the cat")], 1).map_err(e2s)?;
    let b1 = format!("{:.2}", r.bleu(1));
    ensure(b1 == "33.33", || format!("clipping case gave {b1}"))?;

    for n in 1..=3 {
        let (got, expect) = (distinct_ngrams(&hyps, n), enumerate_distinct(&hyps, n));
        ensure(got == expect, || format!("distinct-{n}: {got} vs {expect}"))?;
    }
    Ok(format!("BLEU-4 {:.4} = oracle; 100.00, {b3}, {b1}; distinct-1..3 exact", report.bleu(4)))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Check {
    let table = [(6.97, 3.51, 4.95), (8.11, 4.18, 5.82), (5.11, 3.30, 4.10), (7.92, 4.97, 6.27)];
    let mut shown = Vec::new();
    for (f, c, expect) in table {
        let g = g_score(f, c).map_err(e2s)?;
        ensure((g - expect).abs() <= G_TOL, || format!("G({f}, {c}) = {g:.4}, expected {expect}"))?;
        shown.push(format!("{g:.4}"));
    }
    Ok(shown.join(" "))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Check {
    let text = toy::dialogues(120, 8);
    let corpus = Corpus {
        pairs: text[..100].to_vec(),
        skipped: 0,
    };
    let valid_text = Corpus {
        pairs: text[100..].to_vec(),
        skipped: 0,
    };
    let vocab = Vocabulary::build(corpus.sentences(), 1000).map_err(e2s)?;
    let train = encode_corpus(&vocab, &corpus).map_err(e2s)?;
    let valid = encode_corpus(&vocab, &valid_text).map_err(e2s)?;
    let sources: Vec<Vec<usize>> = valid.iter().map(|p| p.source.clone()).collect();

    let mut cfg = RunConfig {
        kind: ModelKind::AemAttention,
        ..Default::default()
    };
    cfg.train.hidden_size = 16;
    cfg.train.embed_size = 8;
    cfg.train.batch_size = 16;
    cfg.train.max_epochs = 3;

    type Run = (Vec<String>, Vec<Vec<usize>>, Trainer<f32>);
    let run = || -> std::result::Result<Run, String> {
        let model = Model::<f32>::initialized(model_spec(&cfg, &vocab), cfg.train.init_range, cfg.train.seed)
            .map_err(e2s)?;
        let mut t = Trainer::new(model, cfg.train.clone()).map_err(e2s)?;
        let mut log = Vec::new();
        while !t.finished() {
            log.push(t.run_epoch(&train, Some(&valid)).map_err(e2s)?.metrics_line());
        }
        let out = t.model.generate_batch(&sources, cfg.train.max_gen_len).map_err(e2s)?;
        Ok((log, out, t))
    };
    let (log_a, out_a, t) = run()?;
    let (log_b, out_b, _) = run()?;
    ensure(log_a == log_b, || "loss logs differ between runs".into())?;
    ensure(out_a == out_b, || "generations differ between runs".into())?;

    let dir = tempfile::tempdir().map_err(e2s)?;
    let path = dir.path().join("m.ckpt");
    let ck = Checkpoint {
        config: cfg.clone(),
        vocab: vocab.clone(),
        model: t.model.clone(),
        adam: Some(t.adam.clone()),
        state: t.state,
    };
    ck.save(&path).map_err(e2s)?;
    let back = Checkpoint::load(&path).map_err(e2s)?;
    ensure(back.model.params.bit_identical(&t.model.params), || "parameters changed on reload".into())?;
    let out_c = back.model.generate_batch(&sources, cfg.train.max_gen_len).map_err(e2s)?;
    ensure(out_c == out_a, || "generation differs after reload".into())?;
    let resaved = back.to_bytes().map_err(e2s)?;
    ensure(resaved == ck.to_bytes().map_err(e2s)?, || "re-saved checkpoint bytes differ".into())?;
    Ok(format!("{} epochs x2 identical, {} generations identical before/after reload", log_a.len(), out_a.len()))
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let full = std::env::var("AEM_TREND_FULL").is_ok_and(|v| v == "1");
    let (n_train, hidden, embed, batch, epochs) = if full { (5000, 128, 64, 64, 50) } else { (1000, 32, 16, 16, 25) };
    let n_valid = n_train / 10;
    let run = || -> aem::Result<(bool, String)> {
        let all = toy::dialogues(n_train + n_valid, 2024);
        let train_text = Corpus {
            pairs: all[..n_train].to_vec(),
            skipped: 0,
        };
        let valid_text = Corpus {
            pairs: all[n_train..].to_vec(),
            skipped: 0,
        };
        let vocab = Vocabulary::build(train_text.sentences(), 8000)?;
        let train = encode_corpus(&vocab, &train_text)?;
        let valid = encode_corpus(&vocab, &valid_text)?;
        let mut cfg = RunConfig::default();
        cfg.train.hidden_size = hidden;
        cfg.train.embed_size = embed;
        cfg.train.vocab_size = 8000;
        cfg.train.batch_size = batch;
        cfg.train.max_epochs = epochs;
        let start = Instant::now();
        let (cmp, _) = compare(
            &cfg,
            &vocab,
            &train,
            &valid,
            &[
                (ModelKind::Aem, ModelKind::Seq2Seq),
                (ModelKind::AemAttention, ModelKind::Seq2SeqAttention),
            ],
            &[1, 2, 3],
        )?;
        let mut parts = Vec::new();
        let mut ok = true;
        for c in &cmp {
            let scores: Vec<String> = c.per_seed.iter().map(|(_, p, b)| format!("{p:.1}/{b:.1}")).collect();
            parts.push(format!("{}>={}: {}/3 [{}]", c.proposed, c.baseline, c.wins(), scores.join(" ")));
            ok &= c.wins() >= 2;
        }
        let scale = if full { "full" } else { "reduced" };
        let line = format!("{scale} scale, {:.0?}; {}", start.elapsed(), parts.join("; "));
        Ok((ok, line))
    };
    match run() {
        Ok((true, s)) => Outcome::Pass(s),
        Ok((false, s)) => Outcome::Warn(s),
        Err(e) => Outcome::Warn(format!("run failed: {e}")),
    }
}

fn main() {
    type Criterion = (&'static str, fn() -> Check);
    let gated: [Criterion; 8] = [
        ("gradient correctness", criterion_1),
        ("loss composition", criterion_2),
        ("overfit 32 pairs", criterion_3),
        ("baseline equivalence", criterion_4),
        ("mapping-loss detachment", criterion_5),
        ("metric oracles", criterion_6),
        ("g-score arithmetic", criterion_7),
        ("determinism and persistence", criterion_8),
    ];
    let mut failed = 0;
    let mut print = |i: usize, name: &str, o: Outcome| {
        let (tag, msg) = match o {
            Outcome::Pass(m) => ("PASS", m),
            Outcome::Fail(m) => {
                failed += 1;
                ("FAIL", m)
            }
            Outcome::Warn(m) => ("WARN", m),
        };
        println!("criterion {i} {tag} {name}: {msg}");
    };
    for (i, (name, f)) in gated.iter().enumerate() {
        let o = match f() {
            Ok(m) => Outcome::Pass(m),
            Err(m) => Outcome::Fail(m),
        };
        print(i + 1, name, o);
    }
    print(9, "trend vs baselines (soft)", criterion_9());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
