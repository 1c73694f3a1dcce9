use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use typeshift::data::{self, bundled, Sentence};
use typeshift::learner::{self, TrainingExample};
use typeshift::parser::TraceRow;
use typeshift::{
    evaluate, Action, Derivation, Domain, FeatureTemplateSet, Model, Parser, TrainerConfig, Type,
};

use crate::{DomainArgs, EvalArgs, ForceArgs, ParseArgs, TraceArgs, TrainArgs};

/// Exit status for input the parser could not handle.
const NO_PARSE: u8 = 1;
const USAGE: u8 = 2;

fn load_domain(args: &DomainArgs) -> Result<Domain> {
    let domain = match &args.domain {
        Some(path) => Domain::load(path).with_context(|| format!("loading domain {}", path.display()))?,
        None => Domain::parse(bundled::GEO_DOMAIN)?,
    };
    if args.simple_types {
        Ok(domain.simple_types(&["i"])?)
    } else {
        Ok(domain)
    }
}

fn load_model(path: Option<&std::path::Path>) -> Result<Model> {
    match path {
        Some(p) => Model::load(p).with_context(|| format!("loading model {}", p.display())),
        None => Ok(Model::default()),
    }
}

fn goal_type(domain: &Domain, text: Option<&str>) -> Result<Option<Type>> {
    let Some(text) = text else { return Ok(None) };
    let ty = Type::parse(text)?;
    if let Err(name) = domain.signature.check_type(&ty) {
        bail!("unknown type `{}` in --goal-type", name);
    }
    Ok(Some(ty))
}

fn sentence(words: &[String]) -> Option<Sentence> {
    let s = Sentence::new(&words.join(" "));
    (!s.is_empty()).then_some(s)
}

fn seconds(s: f64) -> Result<Duration> {
    if !(s > 0.0 && s.is_finite()) {
        bail!("time limit must be a positive number of seconds");
    }
    Ok(Duration::from_secs_f64(s))
}

fn print_trace(rows: &[TraceRow]) {
    for r in rows {
        println!("{}", r);
    }
}

pub fn parse(args: ParseArgs) -> Result<ExitCode> {
    let domain = load_domain(&args.domain)?;
    let model = load_model(args.model.as_deref())?;
    let goal = goal_type(&domain, args.goal_type.as_deref())?;
    let Some(sent) = sentence(&args.sentence) else {
        eprintln!("error: empty sentence");
        return Ok(ExitCode::from(USAGE));
    };
    let parser = Parser::new(&domain).with_model(&model).with_goal(goal.as_ref());
    match parser.beam_decode(&sent, args.beam as usize) {
        Ok(d) => {
            println!("{}", d.result.expr);
            if args.trace {
                print_trace(&parser.trace(&sent, &d.actions)?);
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("no parse: {}", e);
            Ok(ExitCode::from(NO_PARSE))
        }
    }
}

fn load_examples(path: &std::path::Path, domain: &Domain) -> Result<Vec<data::Example>> {
    data::load_dataset(path, &domain.signature).with_context(|| format!("loading data {}", path.display()))
}

pub fn train(args: TrainArgs) -> Result<ExitCode> {
    let domain = load_domain(&args.domain)?;
    let templates = match &args.templates {
        Some(p) => FeatureTemplateSet::load(p).with_context(|| format!("loading templates {}", p.display()))?,
        None => FeatureTemplateSet::default(),
    };
    let cfg = TrainerConfig {
        iterations: args.iters,
        beam_width: args.beam as usize,
        pass1_time_limit: seconds(args.time_limit)?,
        pass2_beam: args.pass2_beam as usize,
        averaging: !args.no_averaging,
        seed: args.seed,
        final_step_fallback: args.final_step_fallback,
        workers: args.workers,
    };
    let mut examples: Vec<TrainingExample> = load_examples(&args.data, &domain)?
        .into_iter()
        .map(TrainingExample::from)
        .collect();
    if let Some(cache) = args.refs.as_ref().filter(|p| p.exists()) {
        let text = std::fs::read_to_string(cache)?;
        let n = learner::load_references(&text, &mut examples, &domain)
            .with_context(|| format!("loading reference cache {}", cache.display()))?;
        log::info!("loaded {} cached references", n);
    }
    let (model, report) = match learner::train_pipeline(&mut examples, &domain, &cfg, &templates) {
        Ok(r) => r,
        Err(learner_err @ typeshift::error::LearnError::NoCoverage) => {
            bail!("{}: forced decoding found no derivation for any example; check the lexicon covers the gold MRs", learner_err)
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(p) = &report.pass1 {
        println!("pass1_covered={}/{}", p.covered, p.total);
        println!("pass1_timed_out={}", p.timed_out);
    }
    if let Some(p) = &report.pass2 {
        println!("pass2_newly_covered={}", p.newly_covered);
    }
    let covered = examples.iter().filter(|e| e.covered()).count();
    println!("coverage={}/{}", covered, examples.len());
    println!(
        "updates_per_epoch={}",
        report.epochs.iter().map(|e| e.updates.to_string()).collect::<Vec<_>>().join(",")
    );
    model.save_to(&args.model)?;
    if let Some(cache) = &args.refs {
        std::fs::write(cache, learner::save_references(&examples))?;
    }
    println!("model={}", args.model.display());
    Ok(ExitCode::SUCCESS)
}

pub fn eval(args: EvalArgs) -> Result<ExitCode> {
    let domain = load_domain(&args.domain)?;
    let model = load_model(Some(&args.model))?;
    let goal = goal_type(&domain, args.goal_type.as_deref())?;
    let examples = load_examples(&args.data, &domain)?;
    if examples.is_empty() {
        log::warn!("{} has no examples", args.data.display());
    }
    let (report, predictions) = evaluate(&model, &examples, &domain, args.beam as usize, goal.as_ref(), args.workers);
    if args.verbose {
        for (ex, p) in examples.iter().zip(&predictions) {
            let got = p.derivation.as_ref().map(|d: &Derivation| d.result.expr.to_string());
            println!(
                "{}\t{}\t{}\t{}",
                if p.correct { "ok" } else { "wrong" },
                ex.sentence,
                got.as_deref().unwrap_or("-"),
                ex.mr.expr
            );
        }
    }
    print!("{}", report.table());
    print!("{}", report.key_values());
    Ok(ExitCode::SUCCESS)
}

pub fn force_decode(args: ForceArgs) -> Result<ExitCode> {
    let domain = load_domain(&args.domain)?;
    let mut examples: Vec<TrainingExample> = load_examples(&args.data, &domain)?
        .into_iter()
        .map(TrainingExample::from)
        .collect();
    let report = learner::forced_decode_pass1(&mut examples, &domain, seconds(args.time_limit)?, args.workers);
    for ex in &examples {
        println!("{}\t{}\t{}", ex.id, ex.refs.len(), ex.sentence);
    }
    println!("covered={}/{}", report.covered, report.total);
    println!("timed_out={}", report.timed_out);
    println!("references={}", report.references);
    if let Some(cache) = &args.refs {
        std::fs::write(cache, learner::save_references(&examples))?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Resolves `sh` and `sh.K` against the shifts legal at each step.
fn resolve_actions(parser: &Parser, sent: &Sentence, text: &str) -> Result<Vec<Action>> {
    let mut state = typeshift::ParserState::initial();
    let mut out = Vec::new();
    for (i, tok) in text.split_whitespace().enumerate() {
        let nth = match tok {
            "sh" => Some(0),
            _ => tok.strip_prefix("sh.").map(|k| k.parse::<usize>()).transpose()?,
        };
        let action = match nth {
            Some(k) => parser
                .legal_actions(&state, sent)
                .into_iter()
                .filter(|a| matches!(a, Action::Shift { .. }))
                .nth(k)
                .with_context(|| format!("action {}: no shift number {} available", i + 1, k))?,
            None => tok.parse::<Action>().map_err(anyhow::Error::msg)?,
        };
        state = parser
            .step(&state, action, sent)
            .with_context(|| format!("action {} (`{}`)", i + 1, tok))?;
        out.push(action);
    }
    Ok(out)
}

pub fn trace(args: TraceArgs) -> Result<ExitCode> {
    let domain = load_domain(&args.domain)?;
    let model = load_model(args.model.as_deref())?;
    let goal = goal_type(&domain, args.goal_type.as_deref())?;
    let Some(sent) = sentence(&args.sentence) else {
        eprintln!("error: empty sentence");
        return Ok(ExitCode::from(USAGE));
    };
    let parser = Parser::new(&domain).with_model(&model).with_goal(goal.as_ref());
    let actions = match &args.actions {
        Some(text) => resolve_actions(&parser, &sent, text)?,
        None => match parser.beam_decode(&sent, args.beam as usize) {
            Ok(d) => d.actions,
            Err(e) => {
                eprintln!("no parse: {}", e);
                return Ok(ExitCode::from(NO_PARSE));
            }
        },
    };
    print_trace(&parser.trace(&sent, &actions)?);
    Ok(ExitCode::SUCCESS)
}
