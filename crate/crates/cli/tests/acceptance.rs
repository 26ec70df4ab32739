//! Acceptance criteria 1 to 10. Runs as a plain binary so each criterion
//! prints exactly one PASS or FAIL line.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ltn_offer::corpus::{chunk_document, generate_synthetic_corpus, ChunkConfig, Document};
use ltn_offer::evaluation::{
    ie_gates, ie_predicates, make_fold_plan, run_cv, EvalError, Guarded, IePatternBank, PipelineSpec, TfidfConfig,
};
use ltn_offer::fuzzy::{self, FuzzyBackend, Truth};
use ltn_offer::llm::{JsonCallPolicy, LlmClient, ModelEndpoint, ScriptedBackend};
use ltn_offer::ltn::{o_base, o_base_dual, o_base_generic, validate_report_json, GateParams};
use ltn_offer::predicates::{
    default_predicate_defs, oracle_estimates, to_channels, EstimateFlag, Extractor, ExtractorConfig, McsrVariant,
    PredicateKey, CHANNEL_COUNT,
};
use ltn_offer::prompts::PromptSet;
use ltn_offer::retrieval::{tokenize, Bm25Index, Bm25Params, JaccardReranker, TokenizedChunk};
use ltn_offer::training::{bce_loss, bce_with_gradient, calibrate_threshold, f1_at, score_all, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(started: Instant, limit: Duration) -> Result<Duration, String> {
    let t = started.elapsed();
    ensure(t < limit, || format!("took {t:.2?}, limit {limit:?}"))?;
    Ok(t)
}

// ---------------------------------------------------------------- 1

fn fuzzy_axioms() -> Outcome {
    let started = Instant::now();
    let tol = 1e-12;
    let n = 10_000;
    for backend in FuzzyBackend::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let and = |a, b| fuzzy::and(backend, a, b).unwrap();
        let or = |a, b| fuzzy::or(backend, a, b).unwrap();
        let not = |a| fuzzy::not(a).unwrap();
        let imp = |a, b| fuzzy::implies(backend, a, b).unwrap();
        for i in 0..n {
            // every 50th sample pins an operand to the boundary
            let mut draw = |k: usize| match (i + k) % 50 {
                0 => 0.0,
                1 => 1.0,
                _ => rng.random::<f64>(),
            };
            let (a, b, c) = (draw(0), draw(7), draw(13));
            let (lo, hi) = if a <= c { (a, c) } else { (c, a) };
            let name = backend.name();
            let close = |x: f64, y: f64| (x - y).abs() <= tol;
            ensure(close(and(a, 1.0), a) && close(and(a, 0.0), 0.0), || format!("{name}: and boundary at {a}"))?;
            ensure(close(or(a, 0.0), a) && close(or(a, 1.0), 1.0), || format!("{name}: or boundary at {a}"))?;
            ensure(close(imp(0.0, a), 1.0) && close(imp(a, 1.0), 1.0) && close(imp(1.0, a), a), || {
                format!("{name}: implication boundary at {a}")
            })?;
            ensure(and(a, b) == and(b, a) && or(a, b) == or(b, a), || format!("{name}: commutativity at ({a}, {b})"))?;
            ensure(and(lo, b) <= and(hi, b) + tol && or(lo, b) <= or(hi, b) + tol, || {
                format!("{name}: monotonicity at ({lo}, {hi}, {b})")
            })?;
            ensure(imp(hi, b) <= imp(lo, b) + tol && imp(b, lo) <= imp(b, hi) + tol, || {
                format!("{name}: implication monotonicity at ({lo}, {hi}, {b})")
            })?;
            ensure(close(not(not(a)), a), || format!("{name}: involution at {a}"))?;
            ensure(close(not(and(a, b)), or(not(a), not(b))) && close(not(or(a, b)), and(not(a), not(b))), || {
                format!("{name}: De Morgan at ({a}, {b})")
            })?;
            let r = [and(a, b), or(a, b), imp(a, b)];
            ensure(r.iter().all(|x| (0.0..=1.0).contains(x)), || format!("{name}: result outside [0, 1]"))?;
        }
    }
    let t = within(started, Duration::from_secs(5))?;
    Ok(format!("3 backends x {n} samples, tol {tol:e}, {t:.2?}"))
}

// ---------------------------------------------------------------- 2

/// Truth value that also carries its distance to the nearest kink (a tie in
/// min/max or a clamp boundary) over the whole computation.
#[derive(Clone, Copy, Debug)]
struct Kinked {
    v: f64,
    margin: f64,
}

impl Kinked {
    fn join(v: f64, margin: f64, parts: &[Kinked]) -> Self {
        Self {
            v,
            margin: parts.iter().fold(margin, |m, p| m.min(p.margin)),
        }
    }
}

impl Truth for Kinked {
    fn constant(v: f64) -> Self {
        Self { v, margin: f64::INFINITY }
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn and(self, b: Self, backend: FuzzyBackend) -> Self {
        let kink = match backend {
            FuzzyBackend::Godel => (self.v - b.v).abs(),
            FuzzyBackend::Product => f64::INFINITY,
            FuzzyBackend::Lukasiewicz => (self.v + b.v - 1.0).abs(),
        };
        Self::join(self.v.and(b.v, backend), kink, &[self, b])
    }
    fn or(self, b: Self, backend: FuzzyBackend) -> Self {
        let kink = match backend {
            FuzzyBackend::Godel => (self.v - b.v).abs(),
            FuzzyBackend::Product => f64::INFINITY,
            FuzzyBackend::Lukasiewicz => (self.v + b.v - 1.0).abs(),
        };
        Self::join(self.v.or(b.v, backend), kink, &[self, b])
    }
    fn not(self) -> Self {
        Self::join(1.0 - self.v, f64::INFINITY, &[self])
    }
    fn implies(self, b: Self, backend: FuzzyBackend) -> Self {
        let kink = match backend {
            FuzzyBackend::Product => (self.v - b.v).abs().min(self.v),
            _ => (self.v - b.v).abs(),
        };
        Self::join(self.v.implies(b.v, backend), kink, &[self, b])
    }
    fn mul(self, b: Self) -> Self {
        Self::join(self.v * b.v, f64::INFINITY, &[self, b])
    }
    fn sigmoid(self) -> Self {
        Self::join(self.v.sigmoid(), f64::INFINITY, &[self])
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn gradients() -> Outcome {
    let started = Instant::now();
    let (h, eps, min_margin, wanted) = (1e-5, 1e-6, 1e-3, 100);
    let mut worst = 0.0f64;
    let mut nonzero = 0usize;
    for backend in FuzzyBackend::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut accepted = 0;
        let mut tries = 0;
        while accepted < wanted {
            tries += 1;
            ensure(tries < 200_000, || format!("{}: too few kink-free samples", backend.name()))?;
            // small channel values keep Łukasiewicz sums away from the clamp
            let scale = if rng.random_bool(0.5) { 0.15 } else { 1.0 };
            let mut c = [0.0; CHANNEL_COUNT];
            for x in &mut c {
                *x = rng.random::<f64>() * scale;
            }
            let mut gates = GateParams::default();
            for a in &mut gates.alpha {
                *a = rng.random_range(-4.0..3.0);
            }
            let y: u8 = rng.random_range(0..=1);
            let k = o_base_generic(&c.map(Kinked::constant), &gates.alpha.map(Kinked::constant), backend);
            let o = k.v;
            if k.margin < min_margin || o < eps + min_margin || o > 1.0 - eps - min_margin {
                continue;
            }
            accepted += 1;
            let channels = ltn_offer::predicates::ChannelVector::new(c).unwrap();
            let dual = o_base_dual(&channels, &gates, backend);
            let (_, bce_grad) = bce_with_gradient(&[channels], &[y], &gates, backend, eps).unwrap();
            for (i, &grad) in bce_grad.iter().enumerate() {
                let (mut plus, mut minus) = (gates, gates);
                plus.alpha[i] += h;
                minus.alpha[i] -= h;
                let fd_o = (o_base(&channels, &plus, backend) - o_base(&channels, &minus, backend)) / (2.0 * h);
                let loss = |g: &GateParams| bce_loss(&score_all(&[channels], g, backend), &[y], eps).unwrap();
                let fd_l = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let (e1, e2) = (rel_err(dual.partials[i], fd_o), rel_err(grad, fd_l));
                worst = worst.max(e1).max(e2);
                nonzero += usize::from(dual.partials[i].abs() > 1e-8);
                ensure(e1 <= 1e-3 && e2 <= 1e-3, || {
                    format!(
                        "{} alpha[{i}]: O_base {} vs {fd_o}, BCE {} vs {fd_l}",
                        backend.name(),
                        dual.partials[i],
                        grad
                    )
                })?;
            }
        }
    }
    ensure(nonzero > 300, || format!("only {nonzero} nonzero partials checked"))?;
    let t = within(started, Duration::from_secs(10))?;
    Ok(format!("3 x {wanted} configurations, 11 partials each, worst rel err {worst:.2e}, {t:.2?}"))
}

// ---------------------------------------------------------------- 3

/// F1 as the exact fraction `2tp / (2tp + fp + fn)`; `(0, 1)` when tp = 0.
fn f1_fraction(scores: &[f64], labels: &[u8], t: f64) -> (u64, u64) {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= t, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        (0, 1)
    } else {
        (2 * tp, 2 * tp + fp + fn_)
    }
}

fn frac_cmp(a: (u64, u64), b: (u64, u64)) -> std::cmp::Ordering {
    (a.0 * b.1).cmp(&(b.0 * a.1))
}

fn random_set(rng: &mut ChaCha8Rng, lattice: bool) -> (Vec<f64>, Vec<u8>) {
    let n = rng.random_range(1..=200);
    let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
    labels[rng.random_range(0..n)] = 1;
    let scores = (0..n)
        .map(|_| {
            if lattice {
                f64::from(rng.random_range(0..=1000u32)) / 1000.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    (scores, labels)
}

fn calibration() -> Outcome {
    let started = Instant::now();
    let grid: Vec<f64> = (0..=10_000).map(|i| f64::from(i) / 10_000.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..200 {
        let (scores, labels) = random_set(&mut rng, true);
        let t = calibrate_threshold(&scores, &labels).map_err(|e| e.to_string())?;
        let got = f1_fraction(&scores, &labels, t);
        let best = grid
            .iter()
            .map(|&g| f1_fraction(&scores, &labels, g))
            .max_by(|a, b| frac_cmp(*a, *b))
            .unwrap();
        ensure(frac_cmp(got, best).is_eq(), || format!("lattice case {case}: {got:?} vs grid {best:?}"))?;
        ensure(f1_at(&scores, &labels, t) == got.0 as f64 / got.1 as f64, || format!("case {case}: f1_at disagrees"))?;
    }
    for case in 0..200 {
        let (scores, labels) = random_set(&mut rng, false);
        let t = calibrate_threshold(&scores, &labels).map_err(|e| e.to_string())?;
        let got = f1_fraction(&scores, &labels, t);
        let best = grid
            .iter()
            .map(|&g| f1_fraction(&scores, &labels, g))
            .max_by(|a, b| frac_cmp(*a, *b))
            .unwrap();
        ensure(frac_cmp(got, best).is_ge(), || format!("real-valued case {case}: {got:?} below grid {best:?}"))?;
    }
    let t = within(started, Duration::from_secs(10))?;
    Ok(format!("200 lattice sets equal the 10,001-point sweep exactly; 200 real-valued sets at or above it; {t:.2?}"))
}

// ---------------------------------------------------------------- 4

fn bm25_reference(chunks: &[Vec<String>], query: &[String], target: usize, k1: f64, b: f64) -> f64 {
    let n = chunks.len() as f64;
    let avg = chunks.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let len = chunks[target].len() as f64;
    let mut total = 0.0;
    for q in query {
        let df = chunks.iter().filter(|c| c.contains(q)).count() as f64;
        let tf = chunks[target].iter().filter(|t| *t == q).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        let denom = tf + k1 * (1.0 - b + b * len / if avg > 0.0 { avg } else { 1.0 });
        total += idf * tf * (k1 + 1.0) / denom;
    }
    total
}

fn bm25() -> Outcome {
    let started = Instant::now();
    let vocab = ["angebot", "preis", "rechnung", "gültig", "lieferung", "nr", "zahlung", "kontakt"];
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst = 0.0f64;
    for case in 0..500 {
        let n_chunks = rng.random_range(1..=10);
        let texts: Vec<String> = (0..n_chunks)
            .map(|_| {
                let len = rng.random_range(1..=12);
                (0..len).map(|_| vocab[rng.random_range(0..vocab.len())]).collect::<Vec<_>>().join(" ")
            })
            .collect();
        let tokenized: Vec<TokenizedChunk> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| TokenizedChunk {
                chunk_ref: ltn_offer::corpus::ChunkRef::new("d", i),
                tokens: tokenize(t),
            })
            .collect();
        let params = Bm25Params {
            k1: rng.random_range(0.5..2.0),
            b: rng.random_range(0.0..=1.0),
        };
        let index = Bm25Index::build(&tokenized, params).map_err(|e| e.to_string())?;
        let q_len = rng.random_range(1..=3);
        let query: Vec<String> = (0..q_len).map(|_| vocab[rng.random_range(0..vocab.len())].to_string()).collect();
        let plain: Vec<Vec<String>> = tokenized.iter().map(|t| t.tokens.clone()).collect();
        for (i, tc) in tokenized.iter().enumerate() {
            let got = index.score(&query, &tc.chunk_ref).map_err(|e| e.to_string())?;
            let want = bm25_reference(&plain, &query, i, params.k1, params.b);
            worst = worst.max((got - want).abs());
            ensure((got - want).abs() <= 1e-9, || format!("case {case} chunk {i}: {got} vs {want}"))?;
        }
    }
    let t = within(started, Duration::from_secs(5))?;
    Ok(format!("500 random corpora, max abs diff {worst:.1e}, {t:.2?}"))
}

// ---------------------------------------------------------------- 5

fn labels_of(docs: &[Document]) -> Vec<(String, u8)> {
    docs.iter().map(|d| (d.id.clone(), d.label.unwrap())).collect()
}

fn oracle_channels(docs: &[Document]) -> BTreeMap<String, ltn_offer::predicates::ChannelVector> {
    docs.iter()
        .map(|d| (d.id.clone(), to_channels(&oracle_estimates(d, ChunkConfig::default()).unwrap()).unwrap()))
        .collect()
}

fn cv_protocol() -> Outcome {
    let started = Instant::now();
    let docs = generate_synthetic_corpus(200, 0.35, 7).map_err(|e| e.to_string())?;
    let labels = labels_of(&docs);
    let y: BTreeMap<&str, u8> = labels.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let plan = make_fold_plan(&labels, 5, 5, 7).map_err(|e| e.to_string())?;
    ensure(plan.folds().len() == 25, || "expected 25 folds".into())?;
    for rep in 0..5 {
        let mut seen = BTreeSet::new();
        for fold in 0..5 {
            let test = plan.test_ids(rep, fold);
            let pos = test.iter().filter(|id| y[id.as_str()] == 1).count();
            ensure((pos, test.len() - pos) == (14, 26), || {
                format!("rep {rep} fold {fold}: {pos} positives, {} negatives", test.len() - pos)
            })?;
            for id in test {
                ensure(seen.insert(id.clone()), || format!("{id} in two folds of rep {rep}"))?;
            }
        }
        ensure(seen.len() == 200, || format!("rep {rep} covers {} documents", seen.len()))?;
    }

    // guard refuses a test id outright
    let map: BTreeMap<String, u8> = labels.iter().cloned().collect();
    let train = plan.train_ids(0, 0);
    let test = plan.test_ids(0, 0);
    let guard = Guarded::new(&map, &train);
    ensure(matches!(guard.get(&test[0]), Err(EvalError::Leakage(_))), || "guard let a test id through".into())?;

    // every fitting read stays inside the training split
    let fast = TrainConfig { epochs: 10, ..TrainConfig::default() };
    let specs = [
        PipelineSpec::Trained {
            channels: oracle_channels(&docs),
            backend: FuzzyBackend::Product,
            train: fast,
        },
        PipelineSpec::TfidfLtn {
            backend: FuzzyBackend::Godel,
            train: TrainConfig { epochs: 2, ..fast },
            tfidf: TfidfConfig::default(),
        },
    ];
    let mut reads = 0;
    for spec in &specs {
        let report = run_cv(&docs, spec, &plan, 0).map_err(|e| e.to_string())?;
        for f in &report.folds {
            let test: BTreeSet<String> = plan.test_ids(f.rep, f.fold).into_iter().collect();
            ensure(!f.training_access.is_empty(), || "no training reads were logged".into())?;
            if let Some(id) = f.training_access.iter().find(|id| test.contains(*id)) {
                return Err(format!("fold ({}, {}) read test document {id} while fitting", f.rep, f.fold));
            }
            reads += f.training_access.len();
        }
    }
    let t = within(started, Duration::from_secs(5))?;
    Ok(format!("25 folds x (14 pos, 26 neg); partitions exact; {reads} logged training reads, none from test folds; {t:.2?}"))
}

// ---------------------------------------------------------------- 6 and 7

struct SyntheticRuns {
    oracle: Vec<(FuzzyBackend, f64)>,
    ie: Vec<(FuzzyBackend, f64)>,
    elapsed: Duration,
}

fn synthetic_runs() -> Result<SyntheticRuns, String> {
    let started = Instant::now();
    let docs = generate_synthetic_corpus(200, 0.35, 7).map_err(|e| e.to_string())?;
    let plan = make_fold_plan(&labels_of(&docs), 5, 5, 7).map_err(|e| e.to_string())?;
    let oracle = oracle_channels(&docs);
    let bank = IePatternBank::embedded();
    let ie: BTreeMap<_, _> = docs
        .iter()
        .map(|d| (d.id.clone(), to_channels(&ie_predicates(d, &bank, ChunkConfig::default()).unwrap()).unwrap()))
        .collect();
    let mut runs = SyntheticRuns {
        oracle: Vec::new(),
        ie: Vec::new(),
        elapsed: Duration::ZERO,
    };
    for backend in FuzzyBackend::ALL {
        let spec = PipelineSpec::Trained {
            channels: oracle.clone(),
            backend,
            train: TrainConfig::default(),
        };
        let r = run_cv(&docs, &spec, &plan, 0).map_err(|e| e.to_string())?;
        ensure(r.folds.len() == 25, || "expected 25 folds".into())?;
        runs.oracle.push((backend, r.summary.mean.f1));
        let spec = PipelineSpec::FixedGates {
            channels: ie.clone(),
            gates: ie_gates(),
            backend,
        };
        runs.ie.push((backend, run_cv(&docs, &spec, &plan, 0).map_err(|e| e.to_string())?.summary.mean.f1));
    }
    runs.elapsed = started.elapsed();
    Ok(runs)
}

fn fmt_f1(rows: &[(FuzzyBackend, f64)]) -> String {
    rows.iter().map(|(b, f)| format!("{} {f:.3}", b.name())).collect::<Vec<_>>().join(", ")
}

fn end_to_end(runs: &Result<SyntheticRuns, String>) -> Outcome {
    let runs = runs.as_ref().map_err(Clone::clone)?;
    for (b, f1) in &runs.oracle {
        ensure(*f1 >= 0.95, || format!("oracle {} mean F1 {f1:.4} < 0.95", b.name()))?;
    }
    for (b, f1) in &runs.ie {
        ensure(*f1 >= 0.80, || format!("IE {} mean F1 {f1:.4} < 0.80", b.name()))?;
    }
    ensure(runs.elapsed < Duration::from_secs(120), || format!("took {:.2?}", runs.elapsed))?;
    Ok(format!("oracle [{}]; IE [{}]; {:.2?}", fmt_f1(&runs.oracle), fmt_f1(&runs.ie), runs.elapsed))
}

fn backend_spread(runs: &Result<SyntheticRuns, String>) -> Outcome {
    let runs = runs.as_ref().map_err(Clone::clone)?;
    let spread = |rows: &[(FuzzyBackend, f64)]| {
        let f: Vec<f64> = rows.iter().map(|r| r.1).collect();
        f.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - f.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let (so, si) = (spread(&runs.oracle), spread(&runs.ie));
    ensure(so < 0.15 && si < 0.15, || format!("spread oracle {so:.4}, IE {si:.4}"))?;
    Ok(format!("max - min mean F1: oracle {so:.4}, IE {si:.4}"))
}

// ---------------------------------------------------------------- 8

fn extractor(backend: Arc<ScriptedBackend>, samples: usize) -> Extractor {
    let client = LlmClient::new(
        backend,
        ModelEndpoint::new("http://stub", "primary"),
        Some(ModelEndpoint::new("http://stub", "fallback")),
        JsonCallPolicy::default(),
    );
    Extractor::new(
        client,
        PromptSet::embedded(),
        default_predicate_defs(),
        Box::new(JaccardReranker),
        ExtractorConfig {
            samples_per_chunk: samples,
            ..ExtractorConfig::default()
        },
    )
}

fn protocol_conformance() -> Outcome {
    let doc = Document::new(
        "p1",
        "Angebot Nr. 2024-17\nDieses Angebot ist gültig bis 31.12.2024.\nZahlungsbedingungen: 30 Tage netto.",
        Some(1),
    );
    let def = default_predicate_defs().into_iter().find(|d| d.key == PredicateKey::Validity).unwrap();
    let answer = r#"{"initial":[0.3,0.3,0.4],"reflected":[0.125,0.125,0.5],"evidence":["gültig bis 31.12.2024"]}"#;

    // three malformed primary answers, then the fallback answers
    let backend = Arc::new(ScriptedBackend::replies(["not json", "{\"initial\": 1}", "[]", answer]));
    let x = extractor(backend.clone(), 1);
    let set = x.chunk_set(&doc).map_err(|e| e.to_string())?;
    let best = x.mcsr_estimate(&doc, &set, &def, McsrVariant::BestConf).map_err(|e| e.to_string())?;
    let calls: Vec<String> = backend.calls().into_iter().map(|(m, _)| m).collect();
    ensure(calls == ["primary", "primary", "primary", "fallback"], || format!("call sequence {calls:?}"))?;
    // BestConf: winning class 2, its reflected confidence
    ensure(best.value == 0.5, || format!("BestConf value {}", best.value))?;

    // all four calls fail: no fifth call, flagged
    let backend = Arc::new(ScriptedBackend::replies(["x", "x", "x", "x", answer]));
    let x = extractor(backend.clone(), 1);
    let failed = x.mcsr_estimate(&doc, &set, &def, McsrVariant::BestConf).map_err(|e| e.to_string())?;
    ensure(backend.calls().len() == 4, || format!("{} calls after total failure", backend.calls().len()))?;
    ensure(failed.has_flag(EstimateFlag::ExtractionFailed) && failed.value == 0.0, || "failure not flagged".into())?;

    // TopProb: winning mass over the total, 0.5 / 0.75
    let x = extractor(Arc::new(ScriptedBackend::replies([answer])), 1);
    let top = x.mcsr_estimate(&doc, &set, &def, McsrVariant::TopProb).map_err(|e| e.to_string())?;
    ensure(top.value == 0.5 / 0.75, || format!("TopProb value {}", top.value))?;
    // a winning "absent" class maps to 0 under both rules
    let absent = r#"{"initial":[0.6,0.2,0.2],"reflected":[0.5,0.25,0.25],"evidence":[]}"#;
    for variant in [McsrVariant::BestConf, McsrVariant::TopProb] {
        let x = extractor(Arc::new(ScriptedBackend::replies([absent])), 1);
        let e = x.mcsr_estimate(&doc, &set, &def, variant).map_err(|e| e.to_string())?;
        ensure(e.value == 0.0, || format!("{variant:?} with absent winner gives {}", e.value))?;
    }

    // CISC: one chunk, four samples; weighted mean (0.75 + 0.25) / (0.75 + 0.5 + 0.25 + 0.5)
    let votes = [
        r#"{"vote":1,"confidence":0.75}"#,
        r#"{"vote":0,"confidence":0.5}"#,
        r#"{"vote":true,"confidence":0.25}"#,
        r#"{"vote":0,"confidence":0.5}"#,
    ];
    let backend = Arc::new(ScriptedBackend::replies(votes));
    let x = extractor(backend.clone(), 4);
    let cisc = x.cisc_estimate(&doc, &set, &def).map_err(|e| e.to_string())?;
    let expected = (0.75 + 0.25) / (0.75 + 0.5 + 0.25 + 0.5);
    ensure(cisc.value == expected, || format!("CISC value {} vs {expected}", cisc.value))?;
    ensure(cisc.votes.as_ref().map(Vec::len) == Some(4), || "expected 4 recorded votes".into())?;
    let seeds: Vec<u64> = backend.calls().iter().map(|(_, r)| r.seed).collect();
    ensure(seeds.iter().collect::<BTreeSet<_>>().len() == 4, || format!("sample seeds not distinct: {seeds:?}"))?;
    Ok("retry 3 + 1 fallback, BestConf 0.5, TopProb 2/3, absent winner 0, CISC 1/2 all exact".into())
}

// ---------------------------------------------------------------- 9

/// Minimal chat-completions server. Answers are a pure function of the
/// request; every seventh one is malformed so retries show up in transcripts.
fn spawn_stub_server() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut length = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        return;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap_or(0);
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut body = vec![0; length];
                if reader.read_exact(&mut body).is_err() {
                    return;
                }
                let req: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
                let user = req.pointer("/messages/1/content").and_then(Value::as_str).unwrap_or("");
                let seed = req.get("seed").and_then(Value::as_u64).unwrap_or(0);
                let h = user.bytes().fold(seed.wrapping_mul(0x9e37_79b9), |h, b| {
                    h.wrapping_mul(31).wrapping_add(u64::from(b))
                });
                let content = if h % 7 == 0 {
                    "I am not sure.".to_string()
                } else {
                    let vote = u8::from(user.contains("Angebot") || h % 3 == 0);
                    let conf = 0.5 + (h % 50) as f64 / 100.0;
                    format!(r#"{{"vote": {vote}, "confidence": {conf}}}"#)
                };
                let payload = serde_json::json!({
                    "choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
                })
                .to_string();
                let _ = write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    payload.len(),
                    payload
                );
            });
        }
    });
    format!("http://{addr}/v1")
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ltn-offer"))
        .args(args)
        .env_remove("LTN_OFFER_LLM_URL")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn determinism(work: &Path) -> Outcome {
    let started = Instant::now();
    let url = spawn_stub_server();
    let transcript = work.join("transcript.jsonl");
    let t = transcript.to_str().unwrap();
    let base = [
        "--set", "corpus.synthetic.n=40",
        "--set", "corpus.synthetic.positive_rate=0.35",
        "--set", "method=cisc",
        "--set", "extraction.samples_per_chunk=2",
        "--set", "ltn.backend=all",
        "--set", "train.epochs=60",
    ];
    let run_dir = |name: &str| work.join(name).to_str().unwrap().to_string();
    let (live, a, b) = (run_dir("live"), run_dir("a"), run_dir("b"));

    let mut args: Vec<&str> = base.to_vec();
    let url_set = format!("llm.base_url={url}");
    let rec_set = format!("llm.record={t}");
    let live_set = format!("output_dir={live}");
    args.extend(["--set", &url_set, "--set", &rec_set, "--set", &live_set, "extract"]);
    cli(&args)?;
    let entries = std::fs::read_to_string(&transcript).map_err(|e| e.to_string())?.lines().count();
    ensure(entries > 0, || "empty transcript".into())?;

    let replay_set = format!("llm.replay={t}");
    let mut outputs = Vec::new();
    for (dir, jobs) in [(&a, "1"), (&b, "4")] {
        let out_set = format!("output_dir={dir}");
        let mut args: Vec<&str> = base.to_vec();
        args.extend(["--set", &replay_set, "--set", &out_set, "--jobs", jobs, "evaluate"]);
        cli(&args)?;
        let mut files = BTreeMap::new();
        for backend in FuzzyBackend::ALL {
            let name = format!("results-{}.json", backend.name());
            let bytes = std::fs::read(Path::new(dir).join(&name)).map_err(|e| format!("{name}: {e}"))?;
            files.insert(name, bytes);
        }
        outputs.push(files);
    }
    ensure(outputs[0] == outputs[1], || "results differ between the two runs".into())?;
    let t = started.elapsed();
    Ok(format!("{entries} transcript entries; 3 results files byte-identical across runs (jobs 1 vs 4), {t:.2?}"))
}

// ---------------------------------------------------------------- 10

fn audit_completeness(work: &Path) -> Outcome {
    let mut checked = 0;
    for method in ["oracle", "ie"] {
        let dir = work.join(format!("audit-{method}"));
        let d = dir.to_str().unwrap();
        let sets = [
            "--set".to_string(), "corpus.synthetic.n=200".into(),
            "--set".into(), "corpus.synthetic.positive_rate=0.35".into(),
            "--set".into(), format!("method={method}"),
            "--set".into(), format!("output_dir={d}"),
        ];
        let mut args: Vec<&str> = sets.iter().map(String::as_str).collect();
        args.push("train");
        cli(&args)?;
        args.pop();
        args.extend(["explain", "--all"]);
        cli(&args)?;

        let docs = generate_synthetic_corpus(200, 0.35, 7).map_err(|e| e.to_string())?;
        let by_id: BTreeMap<&str, &Document> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
        let text = std::fs::read_to_string(dir.join("audit.jsonl")).map_err(|e| e.to_string())?;
        let mut ids = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let v: Value = serde_json::from_str(line).map_err(|e| format!("{method} line {i}: {e}"))?;
            validate_report_json(&v).map_err(|e| format!("{method} line {i}: {e}"))?;
            let id = v["doc_id"].as_str().unwrap();
            ids.insert(id.to_string());
            let preds = v["predicates"].as_array().unwrap();
            ensure(preds.len() == 8, || format!("{id}: {} predicates", preds.len()))?;
            for field in ["channels_pre", "channels_post", "gates"] {
                ensure(v[field].as_array().map(Vec::len) == Some(11), || format!("{id}: {field} length"))?;
            }
            let rules = v["rules"].as_object().unwrap();
            let n_rules = ["r1", "r2", "r3", "r4", "r5", "r6"].iter().filter(|r| rules[**r].is_f64()).count();
            ensure(n_rules == 6, || format!("{id}: {n_rules} rule values"))?;
            let chunks = chunk_document(by_id[id], ChunkConfig::default()).map_err(|e| e.to_string())?;
            for p in preds {
                for ev in p["evidence"].as_array().unwrap() {
                    let index = ev["chunk"]["index"].as_u64().unwrap() as usize;
                    let chunk = chunks.get(index).ok_or_else(|| format!("{id}: chunk {index} does not exist"))?;
                    ensure(ev["text"].as_str() == Some(chunk.text.as_str()), || {
                        format!("{id}: evidence text of chunk {index} differs from the document")
                    })?;
                }
            }
            checked += 1;
        }
        ensure(ids.len() == 200, || format!("{method}: {} distinct reports", ids.len()))?;
    }
    Ok(format!("{checked} reports (oracle and IE, 200 documents each) schema-valid with resolvable evidence"))
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful for this target
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let work = tempfile::tempdir().expect("temp dir");
    let synthetic = synthetic_runs();
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "fuzzy axioms", fuzzy_axioms()),
        (2, "gradient correctness", gradients()),
        (3, "threshold calibration optimality", calibration()),
        (4, "BM25 oracle equivalence", bm25()),
        (5, "CV protocol", cv_protocol()),
        (6, "end-to-end synthetic reproduction", end_to_end(&synthetic)),
        (7, "backend ordering sanity", backend_spread(&synthetic)),
        (8, "extraction-protocol conformance", protocol_conformance()),
        (9, "determinism", determinism(work.path())),
        (10, "audit completeness", audit_completeness(work.path())),
    ];
    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2} ({name}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n:>2} ({name}): {why}");
            }
        }
    }
    std::io::stdout().flush().ok();
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
