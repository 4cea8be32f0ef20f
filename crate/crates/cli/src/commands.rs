use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use omrf_core::augment::{augment_seeded, sample_seed};
use omrf_core::data::{
    load_corpus, load_image, load_samples, preprocess_image, synth_generate, tensor_to_image, Sample, Split,
};
use omrf_core::metrics::{evaluate_pairs, MetricsReport, Pair};
use omrf_core::train::{self, load_checkpoint, Model, Trainer};
use omrf_core::{Error, Result};
use rand::SeedableRng;

use crate::config::{Overrides, RunConfig};

fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<RunConfig> {
    let cfg = RunConfig::resolve(file, flags)?;
    info!("resolved config: {}", serde_json::to_string(&cfg)?);
    Ok(cfg)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingRoot(dir.to_path_buf()));
    }
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn images_in(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let images: Vec<PathBuf> = read_dir_sorted(input)?
        .into_iter()
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("png" | "pgm")))
        .collect();
    if images.is_empty() {
        return Err(Error::EmptyCorpus(input.to_path_buf()));
    }
    Ok(images)
}

pub fn print_report(report: &MetricsReport) {
    for line in report.summary_lines() {
        println!("{line}");
    }
    println!();
    println!("{}", report.omr_ned);
}

pub fn synth(file: Option<&Path>, flags: &Overrides, out: &Path, n: usize, vocab_size: Option<usize>) -> Result<()> {
    let mut cfg = resolve(file, flags)?;
    if let Some(v) = vocab_size {
        cfg.synth.vocab_size = v;
    }
    let ids = synth_generate(out, n, cfg.seed, &cfg.synth)?;
    info!("wrote {} samples to {}", ids.len(), out.display());
    println!("samples={}", ids.len());
    Ok(())
}

pub fn train(
    file: Option<&Path>,
    flags: &Overrides,
    corpus_root: &Path,
    out: &Path,
    resume: Option<&Path>,
) -> Result<()> {
    let cfg = resolve(file, flags)?;
    let corpus = load_corpus(corpus_root, cfg.encoding)?;
    create_dir(out)?;
    let mut trainer = match resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            let mut t = Trainer::from_checkpoint(&ckpt)?;
            t.config.max_iters = cfg.train.max_iters;
            t.config.batch_size = cfg.train.batch_size;
            t.config.augment = cfg.train.augment;
            t
        }
        None => {
            let vocab = corpus.build_vocab();
            let mut model_cfg = cfg.model.clone();
            model_cfg.vocab_size = vocab.len();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            let model = Model::new(model_cfg, &mut rng)?;
            Trainer::new(model, cfg.train.clone(), vocab)
        }
    };
    trainer.vocab.save(&out.join("vocab.txt"))?;
    write(&out.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;

    let (samples, skipped) = load_samples(&corpus, &trainer.vocab);
    let (train_set, val_set): (Vec<Sample>, Vec<Sample>) = {
        let mut tr = Vec::new();
        let mut va = Vec::new();
        for s in samples {
            match cfg.split.split_of(&s.id) {
                Split::Train => tr.push(s),
                Split::Val => va.push(s),
                Split::Test => {}
            }
        }
        (tr, va)
    };
    info!(
        "{} training and {} validation samples ({} skipped while loading)",
        train_set.len(),
        val_set.len(),
        skipped + corpus.skipped
    );
    if train_set.is_empty() {
        return Err(Error::EmptyCorpus(corpus_root.to_path_buf()));
    }
    trainer.out_dir = Some(out.to_path_buf());
    let summary = trainer.run(&train_set, &val_set)?;
    let log: String = summary.log.iter().map(|l| format!("{l}\n")).collect();
    write(&out.join("train.log"), log)?;
    println!("iterations={}", summary.iterations);
    println!("final_loss={:.6}", summary.losses.last().copied().unwrap_or(f64::NAN));
    match summary.best_val_syer {
        Some(s) => println!("best_val_syer={s:.4}"),
        None => println!("best_val_syer=n/a"),
    }
    println!("seconds={:.1}", summary.seconds);
    Ok(())
}

pub fn evaluate(
    file: Option<&Path>,
    flags: &Overrides,
    corpus_root: &Path,
    checkpoint: &Path,
    subset: Option<Split>,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = resolve(file, flags)?;
    let ckpt = load_checkpoint(checkpoint)?;
    let mut model = ckpt.build_model()?;
    let vocab = ckpt.vocabulary.clone();
    let corpus = load_corpus(corpus_root, vocab.encoding())?;
    let (samples, _) = load_samples(&corpus, &vocab);
    let chosen: Vec<Sample> = samples
        .into_iter()
        .filter(|s| subset.is_none_or(|want| cfg.split.split_of(&s.id) == want))
        .collect();
    let eval = train::evaluate(&mut model, &chosen, &vocab)?;
    print_report(&eval.report);
    println!("seconds={:.2}", eval.seconds);
    if let Some(path) = out {
        write(path, serde_json::to_string_pretty(&eval)?)?;
    }
    Ok(())
}

pub fn predict(checkpoint: &Path, input: &Path, out: &Path) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let mut model = ckpt.build_model()?;
    let vocab = &ckpt.vocabulary;
    let mut samples = Vec::new();
    for path in images_in(input)? {
        samples.push(Sample {
            id: stem(&path),
            image: preprocess_image(&load_image(&path)?)?,
            target: Vec::new(),
        });
    }
    create_dir(out)?;
    let predictions = train::predict(&mut model, &samples, vocab)?;
    for (id, tokens) in &predictions {
        let path = out.join(format!("{id}.{}", vocab.encoding().extension()));
        write(&path, tokens.join(" ") + "\n")?;
    }
    println!("predicted={}", predictions.len());
    Ok(())
}

pub fn augment_preview(file: Option<&Path>, flags: &Overrides, input: &Path, out: &Path, n: usize) -> Result<()> {
    let cfg = resolve(file, flags)?;
    cfg.train.augmentation.validate()?;
    create_dir(out)?;
    let mut written = 0;
    for path in images_in(input)?.into_iter().take(n) {
        let id = stem(&path);
        let image = preprocess_image(&load_image(&path)?)?;
        let (aug, fired) = augment_seeded(&image, &cfg.train.augmentation, sample_seed(cfg.seed, &id, 0))?;
        let save = |suffix: &str, t| -> Result<()> {
            let p = out.join(format!("{id}_{suffix}.png"));
            tensor_to_image(t)?.save(&p).map_err(|source| Error::Image { path: p.clone(), source })
        };
        save("original", &image)?;
        save("augmented", &aug)?;
        let names: Vec<&str> = fired.iter().map(|k| k.name()).collect();
        println!("{id}: {}", if names.is_empty() { "none".to_string() } else { names.join(",") });
        written += 1;
    }
    println!("pairs={written}");
    Ok(())
}

pub fn score(file: Option<&Path>, flags: &Overrides, gt_dir: &Path, pred_dir: &Path) -> Result<()> {
    let cfg = resolve(file, flags)?;
    let ext = cfg.encoding.extension();
    let read_tokens = |p: &Path| -> Result<Vec<String>> {
        let text = fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?;
        Ok(text.split_whitespace().map(String::from).collect())
    };
    let mut pairs: Vec<Pair> = Vec::new();
    let mut missing = 0;
    for gt_path in read_dir_sorted(gt_dir)? {
        if gt_path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        let gt = read_tokens(&gt_path)?;
        let pred_path = pred_dir.join(format!("{}.{ext}", stem(&gt_path)));
        let pred = if pred_path.is_file() {
            read_tokens(&pred_path)?
        } else {
            missing += 1;
            Vec::new()
        };
        pairs.push((gt, pred));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus(gt_dir.to_path_buf()));
    }
    if missing > 0 {
        log::warn!("{missing} ground-truth file(s) have no prediction; scored as empty");
    }
    print_report(&evaluate_pairs(&pairs, cfg.encoding)?);
    Ok(())
}
