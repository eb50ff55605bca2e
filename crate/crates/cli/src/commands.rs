//! Subcommand implementations. Each resolves its configuration, echoes it
//! to standard error and writes its tables.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use lingen_core::analysis::{cka_report, paired_indices, sentence_features};
use lingen_core::corpus::{Split, VarietyCorpus};
use lingen_core::model::DualEncoderModel;
use lingen_core::synth::{generate, triple_config, SynthConfig};
use lingen_core::tasks::TaskKind;
use lingen_core::topping::topping_pair;
use lingen_core::train::{ablation_suite, evaluate, lambda_sweep, train, TrainConfig};
use lingen_core::verify::gradient_suite;

use crate::args::Command;
use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::config::{
    echo, load_config, CkaSection, DataSection, GradcheckSection, Overlay, RunConfig, SelectSection, SynthSection,
    TrainSection,
};
use crate::data::{load_all, load_corpus, save_corpus, write, CorpusRef};
use crate::error::{CliError, CliResult};

pub const DEFAULT_CKA_SAMPLE: usize = 1000;
pub const DEFAULT_FIXTURES: usize = 20;

fn log(msg: impl std::fmt::Display) {
    eprintln!("lingen: {msg}");
}

fn require<T: Clone>(value: &Option<T>, what: &str) -> CliResult<T> {
    value.clone().ok_or_else(|| CliError::Usage(format!("missing {what}")))
}

fn emit(table: Option<&Path>, text: &str) -> CliResult<()> {
    match table {
        Some(path) => write(path, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|()| out.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| String::from("NA"), |m| format!("{m:.6}"))
}

fn read_model(path: &Path) -> CliResult<DualEncoderModel> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    read_checkpoint(&bytes).map_err(|e| CliError::format(path, e))
}

/// Merges flags over the config file, fills defaults for the sections the
/// command uses and drops the rest.
pub fn resolve(command: &Command) -> CliResult<RunConfig> {
    let file = load_config(command.config_path().map(PathBuf::as_path))?;
    let merged = command.flag_config().overlay(file);
    let data = merged.data.unwrap_or_default();
    let output = merged.output.unwrap_or_default();
    let train = || merged.train.clone().unwrap_or_default().resolved();
    Ok(match command {
        Command::SelectSources(_) => RunConfig {
            data: Some(data),
            output: Some(output),
            select: Some(SelectSection {
                force_distinct: Some(merged.select.and_then(|s| s.force_distinct).unwrap_or(false)),
            }),
            ..RunConfig::default()
        },
        Command::Train(_) => RunConfig {
            train: Some(TrainSection {
                lambda_grid: None,
                ..train()?
            }),
            data: Some(data),
            output: Some(output),
            ..RunConfig::default()
        },
        Command::Evaluate(_) | Command::Gradcheck(_) | Command::Synth(_) | Command::AnalyzeCka(_) => {
            let (synth, cka, gradcheck) = match command {
                Command::Synth(_) => {
                    let s = merged.synth.unwrap_or_default();
                    let kind = s.kind.clone().unwrap_or_else(|| String::from("triple"));
                    let base = synth_config(&kind, &s)?;
                    let pair = kind == "pair";
                    (
                        Some(SynthSection {
                            kind: Some(kind),
                            seed: Some(base.seed),
                            overlap: pair.then(|| base.overlap_rate.get(0, 1)),
                            spread: pair.then_some(base.centroid_spread),
                            sentences: Some(base.sentences_per_variety),
                            dev_sentences: Some(base.dev_sentences),
                            test_sentences: Some(base.test_sentences),
                        }),
                        None,
                        None,
                    )
                }
                Command::AnalyzeCka(_) => {
                    let c = merged.cka.unwrap_or_default();
                    let cka = CkaSection {
                        sample_size: Some(c.sample_size.unwrap_or(DEFAULT_CKA_SAMPLE)),
                        seed: Some(c.seed.unwrap_or(0)),
                    };
                    (None, Some(cka), None)
                }
                Command::Gradcheck(_) => {
                    let g = merged.gradcheck.unwrap_or_default();
                    let gradcheck = GradcheckSection {
                        fixtures: Some(g.fixtures.unwrap_or(DEFAULT_FIXTURES)),
                        seed: Some(g.seed.unwrap_or(0)),
                    };
                    (None, None, Some(gradcheck))
                }
                _ => (None, None, None),
            };
            RunConfig {
                data: (data != DataSection::default()).then_some(data),
                output: Some(output),
                synth,
                cka,
                gradcheck,
                ..RunConfig::default()
            }
        }
        Command::SweepLambda(_) | Command::Ablate(_) => {
            let mut t = train()?;
            if matches!(command, Command::Ablate(_)) {
                t.lambda_grid = None;
                t.mode = Some(String::from("vacai"));
                t.use_inv_loss = None;
                t.use_spc_loss = None;
            }
            RunConfig {
                train: Some(t),
                data: Some(data),
                output: Some(output),
                ..RunConfig::default()
            }
        }
    })
}

fn synth_config(kind: &str, s: &SynthSection) -> CliResult<SynthConfig> {
    let seed = s.seed.unwrap_or(0);
    let mut c = match kind {
        "triple" => {
            if s.overlap.is_some() || s.spread.is_some() {
                return Err(CliError::Usage(String::from("overlap and spread apply to the pair suite only")));
            }
            triple_config(seed)
        }
        "pair" => SynthConfig::pair(s.overlap.unwrap_or(0.5), s.spread.unwrap_or(1.0), seed),
        other => return Err(CliError::Usage(format!("unknown synth kind '{other}'"))),
    };
    c.sentences_per_variety = s.sentences.unwrap_or(c.sentences_per_variety);
    c.dev_sentences = s.dev_sentences.unwrap_or(c.dev_sentences);
    c.test_sentences = s.test_sentences.unwrap_or(c.test_sentences);
    c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(c)
}

pub fn execute(command: &Command) -> CliResult<()> {
    let config = resolve(command)?;
    eprint!("{}", echo(&config));
    let data = config.data.clone().unwrap_or_default();
    let output = config.output.clone().unwrap_or_default();
    let table = output.table.as_deref();
    match command {
        Command::SelectSources(_) => select_sources(&data, table, config.select.and_then(|s| s.force_distinct)),
        Command::Train(_) => run_train(&config, &data, &output),
        Command::Evaluate(_) => run_evaluate(&data, table, output.per_sentence.as_deref()),
        Command::AnalyzeCka(_) => run_cka(&data, &config.cka.unwrap_or_default(), table, output.features_dir.as_deref()),
        Command::Synth(_) => run_synth(&config.synth.unwrap_or_default(), table, output.dir.as_deref()),
        Command::Gradcheck(_) => run_gradcheck(&config.gradcheck.unwrap_or_default(), table),
        Command::SweepLambda(_) => run_sweep(&config, &data, table),
        Command::Ablate(_) => run_ablate(&config, &data, table),
    }
}

fn select_sources(data: &DataSection, table: Option<&Path>, force_distinct: Option<bool>) -> CliResult<()> {
    let target = load_corpus(&CorpusRef::parse(&require(&data.target, "--target")?)?, Split::Test)?;
    let candidates = load_all(&require(&data.candidates, "--candidate")?, Split::Train)?;
    let report = topping_pair(&target, &candidates, force_distinct.unwrap_or(false))?;
    log("tj_score uses the subword types of every sentence in each corpus");
    let mut out = String::from("variety_id\tcentroid_distance\ttj_score\n");
    for c in &candidates {
        let id = &c.variety_id;
        let d = report.distance_of(id).expect("every candidate is ranked");
        let tj = report.overlap_of(id).expect("every candidate is ranked");
        let _ = writeln!(out, "{id}\t{d:.6}\t{tj:.6}");
    }
    let (v_sim, v_overlap) = &report.selected_pair;
    let _ = writeln!(out, "pair\t{v_sim}\t{v_overlap}");
    emit(table, &out)
}

fn train_config(config: &RunConfig) -> CliResult<TrainConfig> {
    config.train.clone().unwrap_or_default().to_train_config()
}

fn dev_corpora(data: &DataSection) -> CliResult<Vec<VarietyCorpus>> {
    load_all(data.dev.as_deref().unwrap_or_default(), Split::Dev)
}

fn run_train(config: &RunConfig, data: &DataSection, output: &crate::config::OutputSection) -> CliResult<()> {
    let checkpoint = require(&output.checkpoint, "--checkpoint")?;
    let tc = train_config(config)?;
    let sources = load_all(&require(&data.sources, "--source")?, Split::Train)?;
    let dev = dev_corpora(data)?;
    let pool: usize = sources.iter().map(VarietyCorpus::len).sum();
    log(format_args!("training {} on {} sentences for {} steps", tc.mode, pool, tc.total_steps(pool)));
    let out = train(&sources, &dev, &tc)?;
    for p in &out.dev_trace {
        log(format_args!("step {} dev {:.6}", p.step, p.metric));
    }
    write(&checkpoint, write_checkpoint(&out.model))?;
    if let Some(path) = &output.trace {
        let mut t = String::from("step\tl_inv\tl_spc\tl_task\tl_total\tinv_accuracy\tspc_accuracy\n");
        for r in &out.trace {
            let _ = writeln!(
                t,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                r.step, r.l_inv, r.l_spc, r.l_task, r.l_total, r.inv_accuracy, r.spc_accuracy
            );
        }
        write(path, t)?;
    }
    let summary = format!(
        "steps\tbest_step\tdev_metric\n{}\t{}\t{}\n",
        out.trace.len(),
        out.best_step,
        fmt_metric(out.best_metric)
    );
    emit(output.table.as_deref(), &summary)
}

fn run_evaluate(data: &DataSection, table: Option<&Path>, per_sentence: Option<&Path>) -> CliResult<()> {
    let model = read_model(&require(&data.checkpoint, "--checkpoint")?)?;
    let tests = load_all(&require(&data.test, "--test")?, Split::Test)?;
    let dep = model.head_kind() == TaskKind::Dep;
    let mut out = String::from(if dep {
        "variety\ttask\tsentences\twords\tuas\tlas\n"
    } else {
        "variety\ttask\tsentences\twords\tf1\n"
    });
    let mut rows = String::from("variety\tsentence\twords\tcorrect\tcorrect_labeled\n");
    for c in &tests {
        let e = evaluate(&model, c)?;
        let _ = write!(out, "{}\t{}\t{}\t{}\t{:.6}", c.variety_id, e.task, e.sentences, e.words, e.primary);
        if let Some(las) = e.las {
            let _ = write!(out, "\t{las:.6}");
        }
        out.push('\n');
        for (i, (w, h, l)) in e.per_sentence.iter().enumerate() {
            let _ = writeln!(rows, "{}\t{i}\t{w}\t{h}\t{l}", c.variety_id);
        }
    }
    if let Some(path) = per_sentence {
        write(path, rows)?;
    }
    emit(table, &out)
}

fn run_cka(data: &DataSection, cka: &CkaSection, table: Option<&Path>, features_dir: Option<&Path>) -> CliResult<()> {
    let corpora = load_all(&require(&data.corpora, "--corpus")?, Split::Test)?;
    if corpora.len() < 2 {
        return Err(CliError::Usage(String::from("analyze-cka needs at least two corpora")));
    }
    let model = data.checkpoint.as_deref().map(read_model).transpose()?;
    let sample = cka.sample_size.unwrap_or(DEFAULT_CKA_SAMPLE);
    let seed = cka.seed.unwrap_or(0);
    let report = cka_report(model.as_ref(), &corpora, sample, seed)?;
    log(format_args!(
        "{} features, {} paired rows per variety",
        report.feature_stage.as_str(),
        report.sample_size
    ));
    let mut out = format!("variety\t{}\n", report.variety_ids.join("\t"));
    for (i, id) in report.variety_ids.iter().enumerate() {
        out.push_str(id);
        for j in 0..report.variety_ids.len() {
            let _ = write!(out, "\t{:.6}", report.matrix.get(i, j));
        }
        out.push('\n');
    }
    if let Some(dir) = features_dir {
        let idx = paired_indices(&corpora, sample, seed)?;
        for c in &corpora {
            let f = sentence_features(model.as_ref(), c, &idx)?;
            let mut csv = String::new();
            for r in 0..f.rows() {
                let row: Vec<String> = f.row(r).iter().map(|v| format!("{v:.6}")).collect();
                let _ = writeln!(csv, "{}", row.join(","));
            }
            write(&dir.join(format!("{}.csv", c.variety_id)), csv)?;
        }
    }
    emit(table, &out)
}

fn run_synth(s: &SynthSection, table: Option<&Path>, dir: Option<&Path>) -> CliResult<()> {
    let dir = dir.ok_or_else(|| CliError::Usage(String::from("missing --out-dir")))?;
    let config = synth_config(s.kind.as_deref().unwrap_or("triple"), s)?;
    let data = generate(&config)?;
    for v in &data.varieties {
        for split in [Split::Train, Split::Dev, Split::Test] {
            save_corpus(&dir.join(format!("{}.{}", v.id, split)), v.split(split))?;
        }
    }
    let manifest = data.manifest.to_text();
    write(&dir.join("manifest.tsv"), &manifest)?;
    log(format_args!("wrote {} varieties to {}", data.varieties.len(), dir.display()));
    emit(table, &manifest)
}

fn run_gradcheck(g: &GradcheckSection, table: Option<&Path>) -> CliResult<()> {
    let fixtures = g.fixtures.unwrap_or(DEFAULT_FIXTURES);
    let rows = gradient_suite(fixtures, g.seed.unwrap_or(0))?;
    let mut out = String::from("check\tfixtures\tmax_rel_error\tstatus\n");
    for r in &rows {
        let status = if r.passed() { "pass" } else { "FAIL" };
        let _ = writeln!(out, "{}\t{}\t{:.3e}\t{status}", r.name, r.fixtures, r.max_error);
    }
    emit(table, &out)?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("gradient check failed: {}", failed.join(", "))))
    }
}

fn eval_header(first: &str, ids: &[String], last: Option<&str>) -> String {
    let mut h = String::from(first);
    for id in ids {
        h.push('\t');
        h.push_str(id);
    }
    if let Some(l) = last {
        h.push('\t');
        h.push_str(l);
    }
    h.push('\n');
    h
}

fn run_sweep(config: &RunConfig, data: &DataSection, table: Option<&Path>) -> CliResult<()> {
    let tc = train_config(config)?;
    let sources = load_all(&require(&data.sources, "--source")?, Split::Train)?;
    let dev = dev_corpora(data)?;
    let tests = load_all(data.test.as_deref().unwrap_or_default(), Split::Test)?;
    let ids: Vec<String> = tests.iter().map(|c| c.variety_id.clone()).collect();
    let rows = lambda_sweep(&sources, &dev, &tests, &tc)?;
    let mut out = eval_header("lambda\tbest_step\tdev_metric", &ids, None);
    for r in &rows {
        let _ = write!(out, "{}\t{}\t{}", r.lambda, r.best_step, fmt_metric(r.dev_metric));
        for (_, v) in &r.eval {
            let _ = write!(out, "\t{v:.6}");
        }
        out.push('\n');
    }
    emit(table, &out)
}

fn run_ablate(config: &RunConfig, data: &DataSection, table: Option<&Path>) -> CliResult<()> {
    let tc = train_config(config)?;
    let sources = load_all(&require(&data.sources, "--source")?, Split::Train)?;
    let dev = dev_corpora(data)?;
    let tests = load_all(data.test.as_deref().unwrap_or_default(), Split::Test)?;
    let ids: Vec<String> = tests.iter().map(|c| c.variety_id.clone()).collect();
    let rows = ablation_suite(&sources, &dev, &tests, &tc)?;
    let mut out = eval_header("row\tuse_inv_loss\tuse_spc_loss\tbest_step\tdev_metric", &ids, Some("mean"));
    for r in &rows {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.label,
            r.ablation.use_inv_loss,
            r.ablation.use_spc_loss,
            r.best_step,
            fmt_metric(r.dev_metric)
        );
        for (_, v) in &r.eval {
            let _ = write!(out, "\t{v:.6}");
        }
        if !r.eval.is_empty() {
            let _ = write!(out, "\t{:.6}", r.mean());
        } else {
            out.push_str("\tNA");
        }
        out.push('\n');
    }
    emit(table, &out)
}
