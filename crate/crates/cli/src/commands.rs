use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use seqrec::baselines::{ItemKnnModel, PopModel};
use seqrec::checkpoint::{Checkpoint, Fitted};
use seqrec::data::{
    ingest, preprocess as run_preprocess, read_dataset_cache, stats as dataset_stats, synth_generate,
    write_dataset_cache, IngestOptions, PreprocessOptions, Preprocessed, Vocabulary,
};
use seqrec::eval::{count_params, evaluate, metric_key, recommend_all, BayesOracle, EvalReport, ReportSpec};
use seqrec::layers::{Model, ModelConfig};
use seqrec::numkernel::Real;
use seqrec::optim::train_with;
use seqrec::{Error, ModelKind, Result};

use crate::config::{file_or_dir, Flavor, Precision, RunConfig};

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn load_data(cfg: &RunConfig) -> Result<Preprocessed> {
    let path = cfg
        .paths
        .data
        .as_ref()
        .ok_or_else(|| Error::Usage("a dataset is required (--data)".into()))?;
    read_dataset_cache(file_or_dir(path, "dataset.bin"))
}

fn write_split_stats(dir: &Path, data: &Preprocessed) -> Result<()> {
    for ds in [&data.train, &data.valid, &data.test] {
        let s = dataset_stats(ds);
        let name = ds.split.name();
        write(&dir.join(format!("stats_{name}.txt")), s.key_values())?;
        write(&dir.join(format!("lengths_{name}.tsv")), s.length_table())?;
        write(&dir.join(format!("cumulative_{name}.tsv")), s.cumulative_table())?;
    }
    Ok(())
}

fn split_counts(data: &Preprocessed) -> String {
    format!(
        "train={} valid={} test={} sequences, {} items",
        data.train.len(),
        data.valid.len(),
        data.test.len(),
        data.vocab.len()
    )
}

pub fn preprocess(cfg: &RunConfig) -> Result<()> {
    let input = cfg
        .paths
        .input
        .as_ref()
        .ok_or_else(|| Error::Usage("preprocess needs an input file".into()))?;
    let delimiter = match cfg.input.delimiter.as_bytes() {
        [b] => *b,
        _ => return Err(Error::Config(format!("delimiter must be one byte, got {:?}", cfg.input.delimiter))),
    };
    let opts = IngestOptions {
        delimiter,
        has_header: cfg.input.header,
        session_col: cfg.input.session_col,
        time_col: cfg.input.time_col,
        item_col: cfg.input.item_col,
    };
    let events = ingest(input, &opts)?;
    let popts = match cfg.dataset_flavor {
        Flavor::Yoochoose => PreprocessOptions::yoochoose(),
        Flavor::Internal => PreprocessOptions::internal(cfg.seed),
    };
    let data = run_preprocess(&events, &popts)?;
    let dir = cfg.create_run_dir("preprocess")?;
    write_dataset_cache(dir.join("dataset.bin"), &data)?;
    write_split_stats(&dir, &data)?;
    info!("{} events → {}", events.len(), split_counts(&data));
    println!("{}", dir.display());
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let d = synth_generate(&cfg.synth)?;
    let k = cfg.eval.k;
    let dir = cfg.create_run_dir("synth")?;
    let bayes = BayesOracle(&d.structure);
    let recs = recommend_all(&bayes, &d.test, k, cfg.threads)?;
    let buckets = cfg.buckets()?;
    let report = EvalReport::build(
        &recs,
        &d.test,
        &ReportSpec {
            model: "bayes",
            k,
            n_values: &cfg.eval.n,
            max_offset: cfg.eval.max_offset,
            buckets: &buckets,
            params: None,
        },
    )?;
    report.write(&dir.join("bayes"))?;
    let summary = format!(
        "order={:?}\nstationary_recall_history1={:.6}\nstationary_recall_history2={:.6}\nexpected_test_recall={:.6}\nempirical_test_recall={:.6}\n",
        cfg.synth.order,
        d.structure.stationary_recall(k, 1),
        d.structure.stationary_recall(k, 2),
        d.structure.expected_recall(&d.test, k)?,
        report.recall[&metric_key(k, 1)],
    )
    .to_lowercase();
    write(&dir.join("synth.txt"), &summary)?;
    let data = Preprocessed {
        train: d.train,
        valid: d.valid,
        test: d.test,
        vocab: Vocabulary::identity(cfg.synth.n_items),
    };
    write_dataset_cache(dir.join("dataset.bin"), &data)?;
    write_split_stats(&dir, &data)?;
    info!("{}", split_counts(&data));
    print!("{summary}");
    println!("{}", dir.display());
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let data = load_data(cfg)?;
    let n_o = data.vocab.len();
    let kind = cfg.model.kind;
    if kind.is_baseline_fit() {
        let fitted = match kind {
            ModelKind::Pop => Fitted::Pop(PopModel::fit(&data.train, n_o)?),
            _ => Fitted::ItemKnn(ItemKnnModel::fit(&data.train, n_o)?),
        };
        let dir = cfg.create_run_dir("train")?;
        Checkpoint {
            kind,
            epoch: None,
            fitted,
        }
        .write(dir.join("best.ckpt"))?;
        write(&dir.join("train_summary.txt"), format!("model={kind}\nparams=0\n"))?;
        println!("{}", dir.display());
        return Ok(());
    }
    let mc = kind
        .model_config(n_o, cfg.model.n_e, cfg.model.n_h)
        .expect("parametric kind has an architecture");
    mc.validate()?;
    let dir = cfg.create_run_dir("train")?;
    match cfg.precision {
        Precision::F32 => train_network::<f32>(cfg, &data, mc, &dir)?,
        Precision::F64 => train_network::<f64>(cfg, &data, mc, &dir)?,
    }
    println!("{}", dir.display());
    Ok(())
}

fn train_network<T>(cfg: &RunConfig, data: &Preprocessed, mc: ModelConfig, dir: &Path) -> Result<()>
where
    T: Real + Send + Sync,
    Fitted: From<Model<T>>,
{
    let kind = cfg.model.kind;
    let k = cfg.eval.k;
    let mut model = Model::<T>::new(mc, cfg.seed)?;
    info!("{kind}: {} parameters, {}", model.num_params(), split_counts(data));
    let validate = data.valid.sequences.iter().any(|s| s.len() >= 2);
    if !validate {
        warn!("validation split has no evaluation points; the last epoch is kept");
    }
    let mut epochs = format!("epoch\tmean_loss\tvalid_{}\n", metric_key(k, 1));
    let mut best: Option<(usize, f64)> = None;
    let log = train_with(&mut model, &data.train, &cfg.train, |epoch, m, log| {
        let path = dir.join(format!("epoch_{epoch:03}.ckpt"));
        Checkpoint {
            kind,
            epoch: Some(epoch),
            fitted: m.clone().into(),
        }
        .write(&path)?;
        let loss = log.epoch_means()[epoch];
        let recall = if validate {
            evaluate(m, &data.valid, k, &[1], cfg.threads)?[0]
        } else {
            f64::NAN
        };
        info!("epoch {epoch}: loss {loss:.4}, valid {} {recall:.4}", metric_key(k, 1));
        writeln!(epochs, "{epoch}\t{loss}\t{recall}").unwrap();
        if !validate || best.is_none_or(|(_, r)| recall > r) {
            best = Some((epoch, recall));
        }
        Ok(())
    })?;
    let (best_epoch, best_recall) = best.ok_or_else(|| Error::Config("no epoch was trained".into()))?;
    let best_path = dir.join("best.ckpt");
    let from = dir.join(format!("epoch_{best_epoch:03}.ckpt"));
    std::fs::copy(&from, &best_path).map_err(|e| Error::io(&best_path, e))?;

    let mut losses = String::from("step\tepoch\tlr\tloss_sum\tloss_mean\tevents\n");
    let mut timing = String::from("step\twall_seconds\n");
    for r in &log.records {
        writeln!(losses, "{}\t{}\t{}\t{}\t{}\t{}", r.step, r.epoch, r.lr, r.loss_sum, r.loss_mean, r.events).unwrap();
        writeln!(timing, "{}\t{:.3}", r.step, r.wall_time).unwrap();
    }
    write(&dir.join("loss_log.tsv"), losses)?;
    write(&dir.join("timing.tsv"), timing)?;
    write(&dir.join("epochs.tsv"), epochs)?;
    write(
        &dir.join("train_summary.txt"),
        format!(
            "model={kind}\nparams={}\nepochs={}\nsteps={}\nbest_epoch={best_epoch}\nbest_valid_{}={best_recall}\n",
            model.num_params(),
            cfg.train.epochs,
            log.records.len(),
            metric_key(k, 1),
        ),
    )?;
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let ck_arg = cfg
        .paths
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::Usage("eval needs --checkpoint".into()))?;
    let baseline = match &cfg.paths.baseline_report {
        Some(p) => {
            let path = file_or_dir(p, "report.json");
            if !path.is_file() {
                return Err(Error::Config(format!("baseline report {} not found", path.display())));
            }
            Some(EvalReport::read(&path)?)
        }
        None => None,
    };
    let ck = Checkpoint::read(file_or_dir(ck_arg, "best.ckpt"))?;
    let data = load_data(cfg)?;
    let rec = ck.fitted.as_recommender();
    if rec.n_items() != data.vocab.len() {
        return Err(Error::Config(format!(
            "checkpoint scores {} items but the dataset has {}",
            rec.n_items(),
            data.vocab.len()
        )));
    }
    let ds = data.split(cfg.eval.split);
    let buckets = cfg.buckets()?;
    let recs = recommend_all(rec, ds, cfg.eval.k, cfg.threads)?;
    let mut report = EvalReport::build(
        &recs,
        ds,
        &ReportSpec {
            model: ck.kind.name(),
            k: cfg.eval.k,
            n_values: &cfg.eval.n,
            max_offset: cfg.eval.max_offset,
            buckets: &buckets,
            params: Some(ck.fitted.num_params()),
        },
    )?;
    if let Some(b) = &baseline {
        report.attach_uplift(b, cfg.eval.resamples, cfg.seed)?;
    }
    let dir = cfg.create_run_dir("eval")?;
    report.write(&dir)?;
    print!("{}", report.summary());
    println!("{}", dir.display());
    Ok(())
}

pub fn params(cfg: &RunConfig, n_items: &[usize]) -> Result<()> {
    let sizes: Vec<usize> = if !n_items.is_empty() {
        n_items.to_vec()
    } else if cfg.paths.data.is_some() {
        vec![load_data(cfg)?.vocab.len()]
    } else {
        return Err(Error::Usage("params needs --n-items or --data".into()));
    };
    let (n_e, n_h) = (cfg.model.n_e, cfg.model.n_h);
    let mut out = String::from("model\tn_items\tparams\tmillions\n");
    for &n_o in &sizes {
        for kind in ModelKind::PARAMETRIC {
            let cfg = kind.model_config(n_o, n_e, n_h).expect("parametric");
            cfg.validate()?;
            let p = count_params(kind, n_o, n_e, n_h);
            writeln!(out, "{kind}\t{n_o}\t{p}\t{:.2}", p as f64 / 1e6).unwrap();
        }
    }
    print!("{out}");
    Ok(())
}

pub fn stats(cfg: &RunConfig) -> Result<()> {
    let data = load_data(cfg)?;
    let dir: PathBuf = cfg.create_run_dir("stats")?;
    write_split_stats(&dir, &data)?;
    for ds in [&data.train, &data.valid, &data.test] {
        println!("[{}]", ds.split.name());
        print!("{}", dataset_stats(ds).key_values());
    }
    println!("{}", dir.display());
    Ok(())
}
