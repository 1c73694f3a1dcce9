//! One PASS/FAIL line per acceptance criterion. Exits nonzero on any failure.

mod common;

use std::collections::{HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use typeshift::learner::{self, max_violation_update, TrainingExample};
use typeshift::{
    evaluate, is_subtype, mr_equal, Action, Domain, EvalReport, FeatureTemplateSet, FeatureVector,
    Model, Parser, ParserState, Sentence, TrainerConfig, Type, TypeHierarchy, UNBOUNDED,
};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome, Duration);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn typed_replay(domain: &Domain, golden: &[(usize, &[&str])]) -> Outcome {
    let sent = Sentence::new(RUNNING_EXAMPLE);
    let p = Parser::new(domain);
    let actions = running_actions(&p, &sent);
    let states = p.replay(&sent, &actions).map_err(|e| e.to_string())?;
    for (step, want) in golden {
        let got = stack_types(&states[*step]);
        ensure!(got == *want, "step {}: got {:?}, want {:?}", step, got, want);
    }
    let top = states[13].top(0).ok_or("empty stack at step 13")?;
    ensure!(states[13].stack_len() == 1, "step 13 stack has {} items", states[13].stack_len());
    ensure!(
        top.result.expr.to_string() == "(capital (argmax state size))",
        "final expression {}",
        top.result.expr
    );
    let note = |i: usize| states[i].note.as_ref().map(|n| n.to_string()).unwrap_or_default();
    Ok(format!("13 steps; step 9 [{}]; step 12 [{}]; result {}", note(9), note(12), top.result))
}

fn c1_typed_golden() -> Outcome {
    let d = geo();
    let detail = typed_replay(
        &d,
        &[
            (4, &["st->ct"]),
            (7, &["st->ct", "('a->t)->('a->i)->'a"]),
            (8, &["st->ct", "('a->t)->('a->i)->'a", "st->t"]),
            (9, &["st->ct", "(st->i)->st"]),
            (11, &["st->ct", "(st->i)->st", "lo->i"]),
            (12, &["st->ct", "st"]),
            (13, &["ct"]),
        ],
    )?;
    let sent = Sentence::new(RUNNING_EXAMPLE);
    let p = Parser::new(&d);
    let states = p.replay(&sent, &running_actions(&p, &sent)).unwrap();
    let note = |i: usize| states[i].note.as_ref().map(|n| n.to_string()).unwrap_or_default();
    ensure!(note(9) == "binding: 'a=st", "step 9 note `{}`", note(9));
    ensure!(note(12) == "(lo->i)<:(st->i)", "step 12 note `{}`", note(12));
    Ok(detail)
}

fn c2_simple_golden() -> Outcome {
    let d = geo().simple_types(&["i"]).map_err(|e| e.to_string())?;
    typed_replay(
        &d,
        &[
            (4, &["e->e"]),
            (7, &["e->e", "(e->t)->(e->i)->e"]),
            (8, &["e->e", "(e->t)->(e->i)->e", "e->t"]),
            (9, &["e->e", "(e->i)->e"]),
            (11, &["e->e", "(e->i)->e", "e->i"]),
            (12, &["e->e", "e"]),
            (13, &["e"]),
        ],
    )
}

fn random_type(rng: &mut ChaCha8Rng, names: &[String], depth: usize) -> Type {
    if depth == 0 || rng.gen_bool(0.6) {
        Type::base(names.choose(rng).unwrap())
    } else {
        Type::arrow(random_type(rng, names, depth - 1), random_type(rng, names, depth - 1))
    }
}

fn contra_oracle(s: &Type, t: &Type, anc: &HashMap<String, HashSet<String>>) -> bool {
    match (s, t) {
        (Type::Base(a), Type::Base(b)) => anc[a.as_ref()].contains(b.as_ref()),
        (Type::Arrow(si, so), Type::Arrow(ti, to)) => {
            contra_oracle(ti, si, anc) && contra_oracle(so, to, anc)
        }
        _ => false,
    }
}

fn c3_type_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2016);
    let mut checks = 0usize;
    for tree in 0..1000 {
        let n = rng.gen_range(1..=30);
        let parents: Vec<Option<usize>> = (0..n)
            .map(|i| if i == 0 || rng.gen_bool(0.3) { None } else { Some(rng.gen_range(0..i)) })
            .collect();
        let lines: Vec<String> = parents
            .iter()
            .enumerate()
            .map(|(i, p)| match p {
                Some(j) => format!("type n{} <: n{}", i, j),
                None => format!("type n{} <: top", i),
            })
            .collect();
        let h = TypeHierarchy::from_lines(&lines).map_err(|e| e.to_string())?;
        let mut anc: HashMap<String, HashSet<String>> = HashMap::new();
        for i in 0..n {
            let mut set: HashSet<String> = ["top".to_string()].into();
            let mut cur = Some(i);
            while let Some(c) = cur {
                set.insert(format!("n{}", c));
                cur = parents[c];
            }
            anc.insert(format!("n{}", i), set);
        }
        anc.insert("top".into(), ["top".to_string()].into());
        anc.insert("t".into(), ["t".to_string()].into());
        let mut names: Vec<String> = (0..n).map(|i| format!("n{}", i)).collect();
        names.extend(["top".to_string(), "t".to_string()]);
        let mut tys: Vec<Type> = names.iter().map(|s| Type::base(s)).collect();
        tys.shuffle(&mut rng);
        tys.truncate(8);
        tys.extend((0..6).map(|_| random_type(&mut rng, &names, 2)));
        let sub = |a: &Type, b: &Type| is_subtype(a, b, &h).unwrap();
        for s in &tys {
            ensure!(sub(s, s), "tree {}: {} not reflexive", tree, s);
            for t in &tys {
                let st = sub(s, t);
                ensure!(st == contra_oracle(s, t, &anc), "tree {}: {} <: {} gave {}", tree, s, t, st);
                ensure!(!(st && sub(t, s)) || s == t, "tree {}: {} and {} mutual subtypes", tree, s, t);
                for u in &tys {
                    ensure!(!(st && sub(t, u)) || sub(s, u), "tree {}: {} <: {} <: {} not transitive", tree, s, t, u);
                    checks += 1;
                }
            }
        }
    }
    let d = geo();
    let h = d.hierarchy();
    let bases: Vec<&str> = h.nodes().collect();
    let mut contra = 0usize;
    for a in &bases {
        for b in &bases {
            for c in &bases {
                let (ta, tb, tc) = (Type::base(a), Type::base(b), Type::base(c));
                let lhs = is_subtype(&Type::arrow(ta.clone(), tc.clone()), &Type::arrow(tb.clone(), tc.clone()), h).unwrap();
                ensure!(lhs == h.is_base_subtype(b, a), "({}->{}) <: ({}->{}) gave {}", a, c, b, c, lhs);
                let rhs = is_subtype(&Type::arrow(tc.clone(), ta.clone()), &Type::arrow(tc, tb), h).unwrap();
                ensure!(rhs == h.is_base_subtype(a, b), "({}->{}) <: ({}->{}) gave {}", c, a, c, b, rhs);
                contra += 2;
            }
        }
    }
    Ok(format!("1000 trees, {} triple checks; {} geo arrow checks", checks, contra))
}

fn state_key(s: &ParserState) -> (usize, Vec<String>) {
    (
        s.queue_pos,
        s.stack()
            .iter()
            .map(|i| format!("{}@{:?}", i.result, i.span))
            .collect(),
    )
}

fn c4_reduce_determinism() -> Outcome {
    let d = geo();
    let p = Parser::new(&d);
    let mut states = 0usize;
    let mut both = 0usize;
    let mut sentences: Vec<Sentence> = toy_train(&d).into_iter().map(|e| e.sentence).collect();
    sentences.extend(toy_heldout(&d).into_iter().map(|e| e.sentence));
    for sent in &sentences {
        ensure!(sent.len() <= 8, "{} has more than 8 tokens", sent);
        let mut seen = HashSet::new();
        let mut todo = vec![ParserState::initial()];
        while let Some(s) = todo.pop() {
            if !seen.insert(state_key(&s)) {
                continue;
            }
            states += 1;
            let legal = p.legal_actions(&s, sent);
            let reduces = legal
                .iter()
                .filter(|a| matches!(a, Action::ReduceLeft | Action::ReduceRight))
                .count();
            if reduces > 1 {
                both += 1;
            }
            for a in legal {
                todo.push(p.step(&s, a, sent).unwrap());
            }
        }
    }
    ensure!(both == 0, "{} states allow both reduces", both);
    Ok(format!("{} sentences, {} distinct reachable states, 0 violations", sentences.len(), states))
}

fn c5_beam_vs_exhaustive() -> Outcome {
    let d = geo();
    let mut examples = toy_train(&d);
    examples.extend(toy_heldout(&d));
    let mut cases = 0;
    for ex in examples.iter().filter(|e| e.sentence.len() <= 6) {
        let feats = reachable_features(&d, &ex.sentence);
        for seed in 0..20u64 {
            let m = random_model(&feats, seed);
            let p = Parser::new(&d).with_model(&m);
            let best = all_final_scores(&p, &ex.sentence)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            let got = p.beam_decode(&ex.sentence, UNBOUNDED).map_err(|e| e.to_string())?;
            ensure!(
                (got.score - best).abs() <= 1e-9,
                "`{}` seed {}: beam {} vs exhaustive {}",
                ex.sentence,
                seed,
                got.score,
                best
            );
            cases += 1;
        }
    }
    Ok(format!("{} sentence/weight cases", cases))
}

fn c6_forced_decoding() -> Outcome {
    let d = geo();
    let mut examples: Vec<TrainingExample> = toy_train(&d).into_iter().map(TrainingExample::from).collect();
    let report = learner::forced_decode_pass1(&mut examples, &d, Duration::from_secs(60), 0);
    ensure!(report.covered == report.total, "covered {}/{}", report.covered, report.total);
    let p = Parser::new(&d);
    let mut refs = 0;
    for ex in &examples {
        for seq in ex.refs.sequences() {
            let got = p.replay_derivation(&ex.sentence, seq).map_err(|e| e.to_string())?;
            ensure!(mr_equal(&got.result.expr, &ex.gold.expr), "{}: {} vs {}", ex.sentence, got.result, ex.gold);
            refs += 1;
        }
    }
    Ok(format!("covered {}/{}; {} references replay to gold", report.covered, report.total, refs))
}

fn train_once(d: &Domain) -> Result<(Model, Vec<usize>), String> {
    let mut examples: Vec<TrainingExample> = toy_train(d).into_iter().map(TrainingExample::from).collect();
    let cfg = TrainerConfig::default();
    ensure!(cfg.iterations == 20 && cfg.beam_width == 16, "unexpected trainer defaults");
    let (model, report) = learner::train_pipeline(&mut examples, d, &cfg, &FeatureTemplateSet::default())
        .map_err(|e| e.to_string())?;
    Ok((model, report.epochs.iter().map(|e| e.updates).collect()))
}

fn c7_training() -> Outcome {
    let d = geo();
    let (model, updates) = train_once(&d)?;
    let train = toy_train(&d);
    let held = toy_heldout(&d);
    let (tr, _) = evaluate(&model, &train, &d, 16, None, 0);
    let (he, _) = evaluate(&model, &held, &d, 16, None, 0);
    let train_acc = tr.correct as f64 / tr.total as f64;
    let held_acc = he.correct as f64 / he.total as f64;
    ensure!(train_acc == 1.0, "train exact match {}/{}", tr.correct, tr.total);
    ensure!(held_acc >= 0.9, "held-out exact match {}/{}", he.correct, he.total);
    let (again, _) = train_once(&d)?;
    ensure!(model.save() == again.save(), "same-seed rerun differs");
    Ok(format!(
        "train {}/{}, held-out {}/{}, updates {:?}, rerun identical ({} weights)",
        tr.correct,
        tr.total,
        he.correct,
        he.total,
        updates,
        model.weights.len()
    ))
}

fn margin(m: &Model, p: &Parser, sent: &Sentence, plus: &[Action], minus: &[Action]) -> f64 {
    m.weights.dot(&m.derivation_features(p, sent, plus)) - m.weights.dot(&m.derivation_features(p, sent, minus))
}

fn c8_max_violation() -> Outcome {
    let d = Domain::parse("type e <: top\nconst a : e\nconst b : e\nlex \"x\" => a\nlex \"x\" => b\n")
        .map_err(|e| e.to_string())?;
    let templates = FeatureTemplateSet::parse("f: ACT,P").map_err(|e| e.to_string())?;
    let mut model = Model::new(templates);
    let sent = Sentence::new("x");
    let ex = typeshift::data::parse_dataset("x\ta\n", &d.signature).map_err(|e| e.to_string())?;
    let mut ex = TrainingExample::from(ex.into_iter().next().unwrap());
    let good = Action::Shift { consumed: 1, template: 0 };
    let bad = Action::Shift { consumed: 1, template: 1 };
    ex.add_reference(&d, &[good]).map_err(|e| e.to_string())?;
    let p = Parser::new(&d);
    let all = p.enumerate_derivations(&sent, Duration::from_secs(1), None);
    ensure!(all.derivations.len() == 2, "{} derivations", all.derivations.len());

    let before = margin(&model, &p, &sent, &[good], &[bad]);
    let rec = max_violation_update(&mut model, &d, &ex, 16, false).map_err(|e| e.to_string())?;
    ensure!(rec.step == Some(1), "update at {:?}", rec.step);
    let mut want = FeatureVector::new();
    want.add("f:ACT=sh|P=a".into(), 1);
    want.add("f:ACT=sh|P=b".into(), -1);
    ensure!(rec.delta == want, "delta {:?}", rec.delta);
    let w = model.weights.get("f:ACT=sh|P=a");
    ensure!(w == 1.0, "w[f] = {}", w);
    let after = margin(&model, &p, &sent, &[good], &[bad]);
    let gain = after - before;
    ensure!((gain - want.norm_sq()).abs() <= 1e-12, "margin gain {} vs {}", gain, want.norm_sq());
    let second = max_violation_update(&mut model, &d, &ex, 16, false).map_err(|e| e.to_string())?;
    ensure!(!second.updated(), "second call updated again");

    // The same identity from random nonzero weights on the toy corpus.
    let g = geo();
    let mut examples: Vec<TrainingExample> = toy_train(&g).into_iter().map(TrainingExample::from).collect();
    learner::forced_decode_pass1(&mut examples, &g, Duration::from_secs(60), 0);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (k, ex) in examples.iter().enumerate() {
        let mut m = random_model(&reachable_features(&g, &ex.sentence), k as u64);
        let rec = max_violation_update(&mut m.clone(), &g, ex, 4, false).map_err(|e| e.to_string())?;
        if !rec.updated() {
            continue;
        }
        let gp = Parser::new(&g);
        let before = margin(&m, &gp, &ex.sentence, &rec.plus, &rec.minus);
        m.weights.add(&rec.delta, 1.0);
        let after = margin(&m, &gp, &ex.sentence, &rec.plus, &rec.minus);
        let err = ((after - before) - rec.delta.norm_sq()).abs();
        worst = worst.max(err);
        ensure!(err <= 1e-12 * rec.delta.norm_sq().max(1.0), "{}: margin error {}", ex.sentence, err);
        checked += 1;
    }
    Ok(format!("w[f]=+1, gain {} = |dPhi|^2; {} corpus updates, max error {:e}", gain, checked, worst))
}

fn synthetic(rng: &mut ChaCha8Rng, words: &[String], n: usize) -> Vec<String> {
    let mut toks: Vec<String> = Vec::new();
    while toks.len() < n {
        let w = words.choose(rng).unwrap();
        toks.extend(w.split(' ').map(String::from));
    }
    toks.truncate(n);
    toks
}

/// Least squares fit of `a + b n + c n^2`.
fn quadratic_fit(xs: &[f64], ys: &[f64]) -> [f64; 3] {
    let mut m = [[0.0f64; 4]; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let row = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            m[i][3] += row[i] * y;
        }
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                let pivot = m[col];
                for (v, p) in m[r].iter_mut().zip(pivot).skip(col) {
                    *v -= f * p;
                }
            }
        }
    }
    [m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]]
}

fn c9_linear_time() -> Outcome {
    let d = geo();
    let mut examples = toy_train(&d);
    examples.extend(toy_heldout(&d));
    let p = Parser::new(&d);
    let mut derivations = 0;
    for ex in &examples {
        let n = ex.sentence.len();
        let all = p.enumerate_derivations(&ex.sentence, Duration::from_secs(60), None);
        for der in &all.derivations {
            ensure!(der.actions.len() < 2 * n, "`{}`: {} actions", ex.sentence, der.actions.len());
            derivations += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut words = d.vocabulary();
    words.extend(["the", "of", "in", "is", "what", "?"].map(String::from));
    let mut feats = std::collections::BTreeSet::new();
    for ex in examples.iter().filter(|e| e.sentence.len() <= 4) {
        feats.extend(reachable_features(&d, &ex.sentence));
    }
    let model = random_model(&feats, 1);
    let scored = Parser::new(&d).with_model(&model);
    let ns: Vec<usize> = (4..=16).collect();
    let long: Vec<Vec<String>> = (0..16).map(|_| synthetic(&mut rng, &words, 16)).collect();
    let batches: Vec<Vec<Sentence>> = ns
        .iter()
        .map(|&n| long.iter().map(|t| Sentence::from_tokens(&t[..n])).collect())
        .collect();
    // Each round visits every length in a fresh order, so background noise
    // and order effects hit each n alike.
    let mut times = vec![f64::INFINITY; ns.len()];
    let mut order: Vec<usize> = (0..ns.len()).collect();
    for _ in 0..25 {
        order.shuffle(&mut rng);
        for &i in &order {
            let t = Instant::now();
            for s in &batches[i] {
                if let Ok(der) = scored.beam_decode(s, 16) {
                    ensure!(der.actions.len() < 2 * ns[i], "`{}`: {} actions", s, der.actions.len());
                }
            }
            times[i] = times[i].min(t.elapsed().as_secs_f64());
        }
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let [a, b, c] = quadratic_fit(&xs, &times);
    let at16 = a + b * 16.0 + c * 256.0;
    let share = (c * 256.0).max(0.0) / at16;
    ensure!(share < 0.2, "quadratic share at n=16 is {:.1}% (a={:e} b={:e} c={:e})", 100.0 * share, a, b, c);
    Ok(format!(
        "{} enumerated derivations within 2n-1; slope {:.3} ms/token, quadratic share at n=16 {:.1}%",
        derivations,
        1e3 * b / 16.0,
        100.0 * share
    ))
}

fn c10_eval_arithmetic() -> Outcome {
    let r = EvalReport::from_counts(10, 8, 6);
    let (p, rc) = (6.0 / 8.0, 6.0 / 10.0);
    let f1 = 2.0 * p * rc / (p + rc);
    ensure!((r.precision - 0.75).abs() <= 1e-12 && (r.precision - p).abs() <= 1e-12, "P {}", r.precision);
    ensure!((r.recall - 0.6).abs() <= 1e-12 && (r.recall - rc).abs() <= 1e-12, "R {}", r.recall);
    ensure!((r.f1 - 2.0 / 3.0).abs() <= 1e-12 && (r.f1 - f1).abs() <= 1e-12, "F1 {}", r.f1);
    Ok(format!("P={} R={} F1={}", r.precision, r.recall, r.f1))
}

fn main() -> ExitCode {
    let criteria: [Check; 10] = [
        ("typed golden replay", c1_typed_golden, Duration::from_secs(1)),
        ("simple-type golden replay", c2_simple_golden, Duration::from_secs(1)),
        ("type-system properties", c3_type_properties, Duration::from_secs(10)),
        ("reduce determinism", c4_reduce_determinism, Duration::from_secs(60)),
        ("beam vs exhaustive", c5_beam_vs_exhaustive, Duration::from_secs(120)),
        ("forced decoding completeness", c6_forced_decoding, Duration::from_secs(120)),
        ("training convergence", c7_training, Duration::from_secs(300)),
        ("max-violation arithmetic", c8_max_violation, Duration::MAX),
        ("linear-time bound", c9_linear_time, Duration::MAX),
        ("evaluation arithmetic", c10_eval_arithmetic, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {}", msg))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > limit => Err(format!("took {:.2?}, limit {:.0?}", elapsed, limit)),
            r => r,
        };
        match result {
            Ok(detail) => println!("PASS {:>2}. {} ({:.2?}): {}", i + 1, name, elapsed, detail),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2}. {} ({:.2?}): {}", i + 1, name, elapsed, why);
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
