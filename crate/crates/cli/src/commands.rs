use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use sigt_models::Model;
use sigt_phy::{write_binary, write_csv as write_dataset_csv, LinkSimulator, Split};
use sigt_train::evaluate;

use crate::args::{ExpArgs, ReportArgs};
use crate::error::{usage, CliError, Result};
use crate::experiment::{classic_aacc, dataset_spec_from, load_data, run, DataCache, Experiment, Receiver, MANIFEST};
use crate::report::{epoch_rows, failure_row, summary_row, write_csv, EPOCH_HEADER, SUMMARY_HEADER};
use crate::settings::Settings;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn generate(exp: &ExpArgs, out: &Path) -> Result<()> {
    let s = exp.settings()?;
    if s.is_set("data") {
        return usage("generate writes a dataset; `data` cannot be given");
    }
    let spec = dataset_spec_from(&s)?;
    let format = s.raw("format").unwrap_or("binary");
    if format != "binary" && format != "csv" {
        return usage(format!("unknown format `{format}`"));
    }
    let sim = LinkSimulator::new(spec.cfg)?;
    let pool = spec.pool();
    create_dir(out)?;
    for (split, name) in [(Split::Train, "train"), (Split::Test, "test")] {
        let data = spec.generate_split(&sim, &pool, split)?;
        if format == "binary" {
            let mut w = create(&out.join(format!("{name}.sigt")))?;
            write_binary(&mut w, &data)?;
            w.flush()?;
        } else {
            let mut w = create(&out.join(format!("{name}.csv")))?;
            write_dataset_csv(&mut w, &data)?;
            w.flush()?;
        }
    }
    let c = &spec.cfg;
    let mut m = create(&out.join(MANIFEST))?;
    writeln!(m, "# dataset parameters; usable as a --config file")?;
    for (k, v) in [
        ("ns", c.n_subcarriers.to_string()),
        ("nt", c.n_tx.to_string()),
        ("nr", c.n_rx.to_string()),
        ("ni", c.n_info.to_string()),
        ("cp", c.cp_len.to_string()),
        ("taps", c.n_taps.to_string()),
        ("snr", spec.snr_db.to_string()),
        ("train", spec.n_train.to_string()),
        ("test", spec.n_test.to_string()),
        ("pool", spec.pool_size.to_string()),
        ("seed", spec.seed.to_string()),
        ("format", format.to_string()),
    ] {
        writeln!(m, "{k} = {v}")?;
    }
    m.flush()?;
    eprintln!("wrote {} train and {} test samples to {}", spec.n_train, spec.n_test, out.display());
    Ok(())
}

fn progress_printer(run_id: &str, seed: u64, quiet: bool) -> impl FnMut(&sigt_train::Metrics) + '_ {
    move |m| {
        if !quiet {
            eprintln!(
                "{run_id} seed {seed} epoch {:>4} loss {:.5} train {:.4} test {:.4} ({:.1}s)",
                m.epoch, m.train_loss, m.train_aacc, m.test_aacc, m.seconds
            );
        }
    }
}

pub fn train(exp: &ExpArgs, report: &ReportArgs, out: Option<&Path>, run_id: Option<&str>) -> Result<()> {
    let s = exp.settings()?;
    let mut cache = DataCache::default();
    let (e, data) = Experiment::resolve(&s, &mut cache)?;
    let run_id = run_id.map_or_else(|| e.run_id(), str::to_string);
    let outcome = run(&e, &data, progress_printer(&run_id, e.seed, report.quiet))?;
    let summary = vec![summary_row(&run_id, &e, data.snr_db, data.train.len, &outcome, report.timing)];
    write_csv(std::io::stdout().lock(), &SUMMARY_HEADER, &summary)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        let rows = epoch_rows(&run_id, &e, &outcome.epochs, report.timing);
        write_csv(create(&dir.join("metrics.csv"))?, &EPOCH_HEADER, &rows)?;
        write_csv(create(&dir.join("summary.csv"))?, &SUMMARY_HEADER, &summary)?;
        if let Some(model) = &outcome.model {
            let mut w = create(&dir.join("model.sgtc"))?;
            model.save(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

pub fn eval(exp: &ExpArgs, checkpoint: Option<&Path>, split: &str) -> Result<()> {
    let split = match split {
        "train" => Split::Train,
        "test" => Split::Test,
        v => return usage(format!("unknown split `{v}`")),
    };
    let mut s = exp.settings()?;
    let mut cache = DataCache::default();
    let (kind, aacc, samples, seed) = match checkpoint {
        Some(path) => {
            let f = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let model = Model::load(std::io::BufReader::new(f))?;
            let f = model.frame();
            for (k, v) in [
                ("ns", f.n_subcarriers),
                ("nt", f.n_tx),
                ("nr", f.n_rx),
                ("ni", f.n_info),
                ("cp", f.cp_len),
                ("taps", f.n_taps),
            ] {
                if !s.is_set(k) && !s.is_set("data") {
                    s.set(k, v);
                }
            }
            let (_, data) = load_data(&s, &mut cache)?;
            if data.frame != *model.frame() {
                return Err(CliError::Data(format!(
                    "incompatible dataset: checkpoint frame {:?} differs from data frame {:?}",
                    model.frame(),
                    data.frame
                )));
            }
            let (batches, _) = data.split(split);
            (model.config().kind(), evaluate(&model, batches, 256)?, batches.len, data.seed)
        }
        None => {
            let (e, data) = Experiment::resolve(&s, &mut cache)?;
            let Receiver::Classic { detector, csi } = e.receiver else {
                return usage("eval needs --checkpoint unless --model classic");
            };
            let aacc = classic_aacc(&e, &data, split, detector, csi)?;
            ("classic", aacc, data.split(split).0.len, data.seed)
        }
    };
    let split_name = if split == Split::Train { "train" } else { "test" };
    let row = vec![
        kind.to_string(),
        split_name.to_string(),
        samples.to_string(),
        aacc.to_string(),
        (1.0 - aacc).to_string(),
        seed.to_string(),
    ];
    write_csv(
        std::io::stdout().lock(),
        &["model", "split", "samples", "aacc", "ber", "data_seed"],
        &[row],
    )
}

/// Settings key varied by each sweep axis.
fn axis_key(axis: &str) -> Result<&'static str> {
    Ok(match axis {
        "snr" => "snr",
        "nb" => "nb",
        "model" => "model",
        "aggregation" => "agg",
        "optimizer" => "opt",
        "dropout" => "dropout",
        v => return usage(format!("unknown sweep axis `{v}`")),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    exp: &ExpArgs,
    report: &ReportArgs,
    axis: &str,
    values: &[String],
    models: &[String],
    seeds: usize,
    out: Option<&Path>,
    runs_dir: Option<&Path>,
) -> Result<()> {
    let key = axis_key(axis)?;
    let values: Vec<&str> = values.iter().map(|v| v.trim()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return usage("sweep needs at least one value");
    }
    if seeds == 0 {
        return usage("seeds must be at least 1");
    }
    if key == "model" && !models.is_empty() {
        return usage("--models cannot be combined with --axis model");
    }
    let base = exp.settings()?;
    let base_seed = base.get("seed", 0u64)?;
    let model_list: Vec<Option<&str>> = if models.is_empty() {
        vec![None]
    } else {
        models.iter().map(|m| Some(m.as_str())).collect()
    };
    if let Some(dir) = runs_dir {
        create_dir(dir)?;
    }
    let mut cache = DataCache::default();
    let mut rows = Vec::new();
    let mut worst: Option<CliError> = None;
    for model in &model_list {
        for value in &values {
            let mut cell = base.clone();
            if let Some(m) = model {
                cell.set("model", m);
            }
            cell.set(key, value);
            match run_cell(&cell, &mut cache, base_seed, seeds, report, runs_dir) {
                Ok(row) => rows.push(row),
                Err((e, row)) => {
                    eprintln!("cell {key}={value} failed: {e}");
                    rows.push(row);
                    if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                        worst = Some(e);
                    }
                }
            }
        }
    }
    write_csv(std::io::stdout().lock(), &SUMMARY_HEADER, &rows)?;
    if let Some(path) = out {
        write_csv(create(path)?, &SUMMARY_HEADER, &rows)?;
    }
    worst.map_or(Ok(()), Err)
}

type CellResult = std::result::Result<Vec<String>, (CliError, Vec<String>)>;

/// Runs one cell at every seed and reports the run with the median test
/// AACC (the lower median for an even count).
fn run_cell(
    cell: &Settings,
    cache: &mut DataCache,
    base_seed: u64,
    seeds: usize,
    report: &ReportArgs,
    runs_dir: Option<&Path>,
) -> CellResult {
    let mut runs = Vec::with_capacity(seeds);
    let model = cell.raw("model").unwrap_or("sigt").to_string();
    for k in 0..seeds as u64 {
        let mut s = cell.clone();
        let seed = base_seed + k;
        s.set("seed", seed);
        let fail = |e: CliError, hash: &str, id: &str| {
            let msg = e.to_string();
            (e, failure_row(id, &model, seed, hash, &msg))
        };
        let (e, data) = Experiment::resolve(&s, cache).map_err(|e| fail(e, "", &model))?;
        let run_id = e.run_id();
        let outcome = run(&e, &data, progress_printer(&run_id, seed, report.quiet))
            .map_err(|err| fail(err, &e.config_hash(), &run_id))?;
        if let Some(dir) = runs_dir {
            let rows = epoch_rows(&run_id, &e, &outcome.epochs, report.timing);
            let path = dir.join(format!("{run_id}-seed{seed}.csv"));
            create(&path)
                .and_then(|w| write_csv(w, &EPOCH_HEADER, &rows))
                .map_err(|err| fail(err, &e.config_hash(), &run_id))?;
        }
        runs.push(summary_row(&run_id, &e, data.snr_db, data.train.len, &outcome, report.timing));
    }
    let test_col = SUMMARY_HEADER.iter().position(|&h| h == "test_aacc").unwrap_or(0);
    let aacc = |r: &Vec<String>| r[test_col].parse::<f64>().unwrap_or(f64::NAN);
    runs.sort_by(|a, b| aacc(a).total_cmp(&aacc(b)));
    Ok(runs.swap_remove((seeds - 1) / 2))
}
