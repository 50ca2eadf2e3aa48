use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde_json::json;

use btlab_core::augment::{
    generate_pseudo_corpus, run_controlled_scenario, MixedTrainingSet, PseudoCorpus, RowSpec, ScenarioConfig,
    TrainingView, ViewMode,
};
use btlab_core::corpus::{load_mono, load_parallel, read_text_lines, target_unigram, ParallelCorpus, Vocabulary};
use btlab_core::decode::{generate, GeneratorSpec, LengthCap, RenormMode};
use btlab_core::ibm1::{train_ibm1, translation_entropy};
use btlab_core::seqmodel::{train, ArchConfig, SeqModel, TrainConfig};
use btlab_core::toyharness::{make_toy_task, GrammarParams, ToyConfig};
use btlab_core::{analysis, rng};

use crate::args::*;
use crate::{usage, Artifacts, CliError};

type CmdResult = Result<Artifacts, CliError>;

const INIT_TAG: u64 = 0x494e_4954;
const TRANSLATE_TAG: u64 = 0x5452_414e;

pub(crate) fn dispatch(cmd: &Command) -> CmdResult {
    match cmd {
        Command::Vocab(a) => cmd_vocab(a),
        Command::Train(a) => cmd_train(a),
        Command::Translate(a) => cmd_translate(a),
        Command::Augment(a) => cmd_augment(a),
        Command::Ibm1(a) => cmd_ibm1(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Bleu(a) => cmd_bleu(a),
        Command::Toytask(a) => cmd_toytask(a),
        Command::Scenario(a) => cmd_scenario(a),
        Command::Replay(_) => usage("replay is handled before dispatch"),
    }
}

fn require_inputs(paths: &[&Path]) -> Result<(), CliError> {
    let missing: Vec<String> = paths
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        usage(format!("input file(s) not found: {}", missing.join(", ")))
    }
}

fn check_outputs(inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<(), CliError> {
    let canon = |p: &Path| p.canonicalize().unwrap_or_else(|_| p.to_owned());
    for o in outputs {
        if inputs.iter().any(|i| canon(i) == canon(o)) {
            return usage(format!("output {} would overwrite an input", o.display()));
        }
        if let Some(dir) = o.parent().filter(|d| !d.as_os_str().is_empty()) {
            if !dir.is_dir() {
                return usage(format!("output directory {} does not exist", dir.display()));
            }
        }
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).context("serializing")?;
    s.push('\n');
    Ok(s)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn vocab(path: &Path) -> Result<Vocabulary, CliError> {
    Ok(Vocabulary::load(path)?)
}

fn cmd_vocab(a: &VocabArgs) -> CmdResult {
    let inputs = a.input.clone();
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    require_inputs(&input_refs)?;
    check_outputs(&inputs, std::slice::from_ref(&a.output))?;
    let mut lines = Vec::new();
    for p in &inputs {
        lines.extend(read_text_lines(p)?);
    }
    let v = Vocabulary::build(&lines, a.min_count).map_err(|e| CliError::Usage(e.to_string()))?;
    v.save(&a.output)?;
    eprintln!("{} tokens ({} reserved)", v.len(), btlab_core::corpus::RESERVED.len());
    Ok(Artifacts {
        inputs,
        outputs: vec![a.output.clone()],
        config: json!({ "min_count": a.min_count }),
        seed: None,
        manifest: with_suffix(&a.output, ".manifest.json"),
    })
}

fn arch_from(base: ArchConfig, a: &ArchArgs) -> ArchConfig {
    ArchConfig {
        embed_dim: a.embed_dim.unwrap_or(base.embed_dim),
        hidden_dim: a.hidden_dim.unwrap_or(base.hidden_dim),
        max_positions: a.max_positions.unwrap_or(base.max_positions),
        attention: base.attention && !a.no_attention,
    }
}

fn arch_given(a: &ArchArgs) -> bool {
    a.embed_dim.is_some() || a.hidden_dim.is_some() || a.max_positions.is_some() || a.no_attention
}

fn train_config_from(base: TrainConfig, a: &TrainConfigArgs) -> Result<TrainConfig, CliError> {
    let mut c = match &a.train_config {
        Some(p) => read_json(p)?,
        None => base,
    };
    if let Some(v) = a.label_smoothing {
        c.label_smoothing = v;
    }
    if let Some(v) = a.learning_rate {
        c.learning_rate = v;
    }
    if let Some(v) = a.decay_factor {
        c.decay_factor = v;
    }
    if let Some(v) = a.plateau_patience {
        c.plateau_patience = v;
    }
    if let Some(v) = a.checkpoint_interval {
        c.checkpoint_interval = v;
    }
    if let Some(v) = a.batch_tokens {
        c.batch_tokens = v;
    }
    if let Some(v) = a.max_updates {
        c.max_updates = v;
    }
    c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(c)
}

fn cmd_train(a: &TrainArgs) -> CmdResult {
    let mut inputs = vec![
        a.src.clone(),
        a.tgt.clone(),
        a.dev_src.clone(),
        a.dev_tgt.clone(),
        a.src_vocab.clone(),
        a.tgt_vocab.clone(),
    ];
    inputs.extend(a.train.train_config.clone());
    inputs.extend(a.init_from.clone());
    let pseudo_json = a.pseudo.as_ref().map(|p| PseudoCorpus::paths(p, 1).2);
    inputs.extend(pseudo_json.clone());
    require_inputs(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    if a.init_from.is_some() && arch_given(&a.arch) {
        return usage("architecture flags cannot be combined with --init-from");
    }
    if !(a.pseudo_weight > 0.0 && a.pseudo_weight.is_finite()) {
        return usage("--pseudo-weight must be > 0");
    }
    let log_path = a.log.clone().unwrap_or_else(|| with_suffix(&a.output, ".log.jsonl"));
    let outputs = vec![a.output.clone(), log_path.clone()];

    let sv = vocab(&a.src_vocab)?;
    let tv = vocab(&a.tgt_vocab)?;
    let corpus = load_parallel(&a.src, &a.tgt, &sv, &tv)?;
    let dev = load_parallel(&a.dev_src, &a.dev_tgt, &sv, &tv)?;
    let tc = TrainConfig {
        seed: a.seed,
        ..train_config_from(TrainConfig::default(), &a.train)?
    };
    let (model, arch) = match &a.init_from {
        Some(p) => {
            let m = SeqModel::load(p, &sv, &tv)?;
            let arch = *m.arch();
            (m, arch)
        }
        None => {
            let arch = arch_from(ArchConfig::default(), &a.arch);
            (SeqModel::new(arch, &sv, &tv, rng::derive(a.seed, INIT_TAG))?, arch)
        }
    };

    let mut pseudo_info = serde_json::Value::Null;
    let (model, log) = match &a.pseudo {
        Some(prefix) => {
            let mut pc = PseudoCorpus::load(prefix, &sv, &tv)?;
            let (tgt, srcs, _) = PseudoCorpus::paths(prefix, pc.n());
            inputs.push(tgt);
            inputs.extend(srcs);
            require_inputs(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
            if a.drop_flagged {
                pc = pc.drop_flagged();
            }
            pseudo_info = json!({
                "prefix": prefix,
                "entries": pc.len(),
                "n": pc.n(),
                "weight": a.pseudo_weight,
                "drop_flagged": a.drop_flagged,
                "provenance": pc.provenance,
            });
            let mut mixed = MixedTrainingSet::new(corpus, pc);
            mixed.pseudo_weight = a.pseudo_weight;
            let view = TrainingView {
                mixed: &mixed,
                mode: ViewMode::Static,
            };
            check_outputs(&inputs, &outputs)?;
            train(model, &view, &dev, &tc)?
        }
        None => {
            check_outputs(&inputs, &outputs)?;
            train(model, &corpus, &dev, &tc)?
        }
    };
    model.save(&a.output)?;
    log.save_jsonl(&log_path)?;
    if let Some(r) = log.records.iter().find(|r| r.update == log.selected_update) {
        eprintln!(
            "selected update {}: dev ppl {:.4}, dev BLEU {:.2}",
            r.update, r.dev_perplexity, r.dev_bleu
        );
    }
    Ok(Artifacts {
        inputs,
        outputs,
        config: json!({
            "arch": arch,
            "train": tc,
            "init_from": a.init_from,
            "pseudo": pseudo_info,
        }),
        seed: Some(a.seed),
        manifest: with_suffix(&a.output, ".manifest.json"),
    })
}

fn merge_arg<T: PartialEq + std::fmt::Display>(
    strategy: &str,
    inline: Option<&str>,
    flag: Option<T>,
    flag_name: &str,
) -> Result<Option<String>, CliError> {
    match (inline, flag) {
        (Some(i), Some(f)) if i != f.to_string() => usage(format!(
            "--strategy {strategy} conflicts with {flag_name} {f}; give the value once"
        )),
        (Some(i), _) => Ok(Some(i.to_owned())),
        (None, Some(f)) => Ok(Some(f.to_string())),
        (None, None) => Ok(None),
    }
}

/// Resolves `--strategy` and the per-strategy flags into one spec. Flags
/// that do not apply to the chosen strategy are usage errors.
pub(crate) fn generator_spec(a: &GeneratorArgs) -> Result<GeneratorSpec, CliError> {
    let (name, inline) = match a.strategy.split_once(':') {
        Some((n, v)) => (n, Some(v)),
        None => (a.strategy.as_str(), None),
    };
    let allowed: &[&str] = match name {
        "beam" => &["--beam-size"],
        "nbest" => &["--nbest"],
        "topk" => &["--k"],
        "restricted" => &["--tau", "--renorm"],
        "sample" => &["--temperature"],
        "greedy" => &[],
        _ => return usage(format!("unknown strategy {:?}", a.strategy)),
    };
    let given = [
        ("--beam-size", a.beam_size.is_some()),
        ("--k", a.k.is_some()),
        ("--tau", a.tau.is_some()),
        ("--nbest", a.nbest.is_some()),
        ("--renorm", a.renorm.is_some()),
        ("--temperature", a.temperature.is_some()),
    ];
    for (flag, set) in given {
        if set && !allowed.contains(&flag) {
            return usage(format!("{flag} does not apply to strategy {name}"));
        }
    }
    let value = match name {
        "beam" => merge_arg(&a.strategy, inline, a.beam_size, "--beam-size")?,
        "nbest" => merge_arg(&a.strategy, inline, a.nbest, "--nbest")?,
        "topk" => merge_arg(&a.strategy, inline, a.k, "--k")?,
        "restricted" => merge_arg(&a.strategy, inline, a.tau, "--tau")?,
        _ => inline.map(str::to_owned),
    };
    let full = match value {
        Some(v) => format!("{name}:{v}"),
        None => name.to_owned(),
    };
    let mut spec = GeneratorSpec::parse_strategy(&full)?;
    if let Some(r) = a.renorm {
        spec.renorm = match r {
            RenormArg::L1 => RenormMode::L1,
            RenormArg::Softmax => RenormMode::SoftmaxOverProbs,
        };
    }
    if let Some(t) = a.temperature {
        spec.temperature = t;
    }
    let default = LengthCap::default();
    spec.max_len = LengthCap {
        scale: a.max_len_scale.unwrap_or(default.scale),
        offset: a.max_len_offset.unwrap_or(default.offset),
    };
    spec.seed = a.seed;
    spec.validate()?;
    Ok(spec)
}

fn cmd_translate(a: &TranslateArgs) -> CmdResult {
    let inputs = vec![a.model.clone(), a.src_vocab.clone(), a.tgt_vocab.clone(), a.input.clone()];
    require_inputs(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    let spec = generator_spec(&a.generator)?;
    check_outputs(&inputs, std::slice::from_ref(&a.output))?;
    let sv = vocab(&a.src_vocab)?;
    let tv = vocab(&a.tgt_vocab)?;
    let model = SeqModel::load(&a.model, &sv, &tv)?;
    let input = load_mono(&a.input, &sv)?;
    let seed = rng::derive(spec.seed, TRANSLATE_TAG);
    let hyps: Vec<_> = input
        .sentences()
        .par_iter()
        .enumerate()
        .map(|(i, s)| generate(&model, s.ids(), &spec, &mut rng::stream(seed, i as u64)))
        .collect::<btlab_core::Result<_>>()?;
    let mut text = String::new();
    for h in &hyps {
        text.push_str(&tv.decode(&h.ids));
        text.push('\n');
    }
    write(&a.output, text)?;
    let unfinished = hyps.iter().filter(|h| !h.is_finished()).count();
    if unfinished > 0 {
        log::warn!("{unfinished} of {} outputs hit the length cap", hyps.len());
    }
    Ok(Artifacts {
        inputs,
        outputs: vec![a.output.clone()],
        config: json!({ "generator": spec }),
        seed: Some(spec.seed),
        manifest: with_suffix(&a.output, ".manifest.json"),
    })
}

fn cmd_augment(a: &AugmentArgs) -> CmdResult {
    let inputs = vec![
        a.generator_model.clone(),
        a.mono.clone(),
        a.mono_vocab.clone(),
        a.out_vocab.clone(),
    ];
    require_inputs(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    let spec = generator_spec(&a.generator)?;
    if a.n == 0 {
        return usage("--n must be >= 1");
    }
    if spec.strategy.is_deterministic() && a.n > 1 {
        return usage(format!(
            "strategy {} is deterministic, so --n {} would only repeat the same source; use a sampling strategy or --n 1",
            spec.label(),
            a.n
        ));
    }
    let (tgt_path, src_paths, json_path) = PseudoCorpus::paths(&a.output, a.n);
    let mut outputs = vec![tgt_path];
    outputs.extend(src_paths);
    outputs.push(json_path);
    check_outputs(&inputs, &outputs)?;

    let mono_vocab = vocab(&a.mono_vocab)?;
    let out_vocab = vocab(&a.out_vocab)?;
    let generator = SeqModel::load(&a.generator_model, &mono_vocab, &out_vocab)?;
    let mono = load_mono(&a.mono, &mono_vocab)?;
    let mut pc = generate_pseudo_corpus(&generator, &mono, &spec, a.n, spec.seed)?;
    let flagged = pc.flagged_count();
    if a.drop_flagged {
        pc = pc.drop_flagged();
    }
    pc.save(&a.output, &out_vocab, &mono_vocab)?;
    eprintln!(
        "{} entries x {} sources, {} flagged{}",
        pc.len(),
        a.n,
        flagged,
        if a.drop_flagged { " (dropped)" } else { "" }
    );
    Ok(Artifacts {
        inputs,
        outputs,
        config: json!({ "generator": spec, "n": a.n, "drop_flagged": a.drop_flagged }),
        seed: Some(spec.seed),
        manifest: with_suffix(&a.output, ".manifest.json"),
    })
}

fn cmd_ibm1(a: &Ibm1Args) -> CmdResult {
    let inputs = vec![a.src.clone(), a.tgt.clone(), a.src_vocab.clone(), a.tgt_vocab.clone()];
    require_inputs(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    let meta = a.meta.clone().unwrap_or_else(|| with_suffix(&a.output, ".json"));
    let outputs = vec![a.output.clone(), meta.clone()];
    check_outputs(&inputs, &outputs)?;
    if a.iterations == 0 {
        return usage("--iterations must be >= 1");
    }
    let sv = vocab(&a.src_vocab)?;
    let tv = vocab(&a.tgt_vocab)?;
    let corpus = load_parallel(&a.src, &a.tgt, &sv, &tv)?;
    let t = train_ibm1(&corpus, a.iterations)?;
    let entropy = translation_entropy(&t.table, &target_unigram(&corpus)?)?;
    write(&a.output, t.table.to_tsv(&tv, &sv))?;
    let mut m: serde_json::Value = serde_json::from_str(&t.metadata_json()).context("metadata")?;
    m["entropy"] = json!(entropy);
    write(&meta, to_json(&m)?)?;
    println!("entropy {entropy:.6} nats");
    Ok(Artifacts {
        inputs,
        outputs,
        config: json!({ "iterations": a.iterations }),
        seed: None,
        manifest: with_suffix(&a.output, ".manifest.json"),
    })
}

fn cmd_stats(a: &StatsArgs) -> CmdResult {
    let mut inputs = vec![a.src.clone(), a.tgt.clone(), a.src_vocab.clone(), a.tgt_vocab.clone()];
    inputs.extend(a.model.clone());
    require_inputs(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    let mut outputs = vec![a.output.clone()];
    outputs.extend(a.mass_csv.clone());
    check_outputs(&inputs, &outputs)?;
    if a.ibm1_iterations == 0 {
        return usage("--ibm1-iterations must be >= 1");
    }
    let sv = vocab(&a.src_vocab)?;
    let tv = vocab(&a.tgt_vocab)?;
    let corpus = load_parallel(&a.src, &a.tgt, &sv, &tv)?;
    let ibm = train_ibm1(&corpus, a.ibm1_iterations)?;
    let entropy = translation_entropy(&ibm.table, &target_unigram(&corpus)?)?;
    let src_tokens: usize = corpus.pairs().iter().map(|p| p.source.len()).sum();
    let tgt_tokens: usize = corpus.pairs().iter().map(|p| p.target.len()).sum();
    let distinct_targets = corpus
        .pairs()
        .iter()
        .map(|p| p.target.ids())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let mut report = json!({
        "sentences": corpus.len(),
        "source_tokens": src_tokens,
        "target_tokens": tgt_tokens,
        "distinct_targets": distinct_targets,
        "ibm1_iterations": a.ibm1_iterations,
        "ibm1_entropy": entropy,
    });
    if let Some(mp) = &a.model {
        let model = SeqModel::load(mp, &sv, &tv)?;
        let ppl = analysis::corpus_perplexity(&model, &corpus)?;
        let mut ns = a.mass_ns.clone();
        ns.sort_unstable();
        ns.dedup();
        let curve = analysis::cumulative_mass_curve(&model, &corpus, &ns)
            .map_err(|e| CliError::Usage(format!("--mass-ns: {e}")))?;
        report["perplexity"] = json!(ppl);
        report["mass_curve"] = json!(curve.points);
        if let Some(csv) = &a.mass_csv {
            write(csv, curve.to_csv())?;
        }
    }
    write(&a.output, to_json(&report)?)?;
    print!("{}", to_json(&report)?);
    Ok(Artifacts {
        inputs,
        outputs,
        config: json!({ "mass_ns": a.mass_ns, "ibm1_iterations": a.ibm1_iterations }),
        seed: None,
        manifest: with_suffix(&a.output, ".manifest.json"),
    })
}

fn cmd_bleu(a: &BleuArgs) -> CmdResult {
    let inputs = vec![a.hyp.clone(), a.reference.clone()];
    require_inputs(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    check_outputs(&inputs, std::slice::from_ref(&a.output))?;
    let tok = |lines: Vec<String>| -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(str::to_owned).collect())
            .collect()
    };
    let hyp = tok(read_text_lines(&a.hyp)?);
    let refs = tok(read_text_lines(&a.reference)?);
    let report = analysis::corpus_bleu(&hyp, &refs).map_err(|e| CliError::Usage(e.to_string()))?;
    write(&a.output, to_json(&report)?)?;
    println!("BLEU {:.2}", report.score);
    Ok(Artifacts {
        inputs,
        outputs: vec![a.output.clone()],
        config: json!({}),
        seed: None,
        manifest: with_suffix(&a.output, ".manifest.json"),
    })
}

fn cmd_toytask(a: &ToyTaskArgs) -> CmdResult {
    let mut inputs = Vec::new();
    inputs.extend(a.config.clone());
    inputs.extend(a.grammar_params.clone());
    require_inputs(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    if a.config.is_some() && a.grammar_params.is_some() {
        return usage("--config and --grammar-params are mutually exclusive");
    }
    if a.grammar_params.is_some() && !matches!(a.grammar, GrammarKind::Generated) {
        return usage("--grammar-params requires --grammar generated");
    }
    let mut cfg = match (&a.config, a.grammar) {
        (Some(p), _) => ToyConfig::load(p).map_err(|e| CliError::Usage(e.to_string()))?,
        (None, GrammarKind::Standard) => ToyConfig::default(),
        (None, GrammarKind::Generated) => {
            let g: GrammarParams = match &a.grammar_params {
                Some(p) => read_json(p)?,
                None => GrammarParams::default(),
            };
            ToyConfig::generated(&g).map_err(|e| CliError::Usage(e.to_string()))?
        }
    };
    let s = cfg.sizes.clone();
    cfg = cfg.with_sizes(
        a.bilingual.unwrap_or(s.bilingual),
        a.mono.unwrap_or(s.mono),
        a.dev.unwrap_or(s.dev),
    );
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let task = make_toy_task(&cfg, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let d = |name: &str| a.out_dir.join(name);
    let save_pair = |c: &ParallelCorpus, stem: &str| -> Result<(), CliError> {
        c.save(
            d(&format!("{stem}.src")),
            d(&format!("{stem}.tgt")),
            &task.src_vocab,
            &task.tgt_vocab,
        )?;
        Ok(())
    };
    task.src_vocab.save(d("src.vocab"))?;
    task.tgt_vocab.save(d("tgt.vocab"))?;
    save_pair(&task.bilingual, "train")?;
    save_pair(&task.held_out, "heldout")?;
    save_pair(&task.dev, "dev")?;
    save_pair(&task.full_bilingual(), "full")?;
    task.mono.save(d("mono.tgt"), &task.tgt_vocab)?;
    write(&d("config.json"), to_json(&cfg)?)?;
    let names = [
        "src.vocab",
        "tgt.vocab",
        "train.src",
        "train.tgt",
        "heldout.src",
        "heldout.tgt",
        "dev.src",
        "dev.tgt",
        "full.src",
        "full.tgt",
        "mono.tgt",
        "config.json",
    ];
    eprintln!(
        "{} bilingual, {} mono, {} dev pairs in {}",
        task.bilingual.len(),
        task.mono.len(),
        task.dev.len(),
        a.out_dir.display()
    );
    Ok(Artifacts {
        inputs,
        outputs: names.iter().map(|n| d(n)).collect(),
        config: json!({ "toy": cfg }),
        seed: Some(a.seed),
        manifest: d("manifest.json"),
    })
}

fn cmd_scenario(a: &ScenarioArgs) -> CmdResult {
    let mut inputs = vec![
        a.src.clone(),
        a.tgt.clone(),
        a.dev_src.clone(),
        a.dev_tgt.clone(),
        a.src_vocab.clone(),
        a.tgt_vocab.clone(),
    ];
    inputs.extend(a.config.clone());
    inputs.extend(a.train.train_config.clone());
    require_inputs(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    let table = a.table.clone().unwrap_or_else(|| with_suffix(&a.output, ".txt"));
    let outputs = vec![a.output.clone(), table.clone()];
    check_outputs(&inputs, &outputs)?;
    if a.seeds.is_empty() {
        return usage("--seeds needs at least one seed");
    }

    let mut cfg: ScenarioConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = &a.strategies {
        cfg.rows = RowSpec::parse_list(s)?;
    }
    if let Some(r) = a.split_ratio {
        cfg.split_ratio = r;
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    cfg.arch = arch_from(cfg.arch, &a.arch);
    cfg.generator_train = train_config_from(cfg.generator_train, &a.train)?;
    cfg.model_train = train_config_from(cfg.model_train, &a.train)?;
    if !(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0) {
        return usage("--split-ratio must be in (0, 1)");
    }
    if cfg.n == 0 {
        return usage("--n must be >= 1");
    }

    let sv = vocab(&a.src_vocab)?;
    let tv = vocab(&a.tgt_vocab)?;
    let full = load_parallel(&a.src, &a.tgt, &sv, &tv)?;
    let dev = load_parallel(&a.dev_src, &a.dev_tgt, &sv, &tv)?;
    let mut reports = Vec::new();
    let mut text = String::new();
    for &seed in &a.seeds {
        let c = ScenarioConfig { seed, ..cfg.clone() };
        let r = run_controlled_scenario(&full, &dev, &sv, &tv, &c)?;
        let t = r.to_table();
        print!("{t}");
        text.push_str(&t);
        reports.push(r);
    }
    write(&a.output, to_json(&reports)?)?;
    write(&table, text)?;
    Ok(Artifacts {
        inputs,
        outputs,
        config: json!({ "scenario": cfg, "seeds": a.seeds }),
        seed: a.seeds.first().copied(),
        manifest: with_suffix(&a.output, ".manifest.json"),
    })
}
