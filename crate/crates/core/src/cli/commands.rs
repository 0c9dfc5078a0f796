use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::{json, Value};

use super::render::{explain, render};
use super::table::{encode_labels, Table};
use super::{BenchmarkArgs, Command, EstimateArgs, GenerateArgs, PrescribeArgs, ShowArgs, TrainArgs};
use crate::bench::{run_experiment, BenchMethod, Design, ExperimentConfig, GeneratorSpec, N_FEATURES};
use crate::error::{Error, Result};
use crate::estimation::{estimate_rewards, penalty_rewards, EstimationOptions, PenaltyMatrix};
use crate::forest::ForestConfig;
use crate::learner::{fit_optimal_with_report, tune_with_report, Method, TuneGrid};
use crate::model::{default_feature_names, document, Dataset, DoseRange, Hyperparameters, Matrix, RewardMatrix, TreatmentSpace, Treatments};
use crate::rng;

pub(super) fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::EstimateRewards(a) => estimate(a),
        Command::Train(a) => train(a),
        Command::Prescribe(a) => prescribe(a),
        Command::Show(a) => show(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Generate(a) => generate(a),
    }
}

/// The explicit seed, or one drawn from the clock and process id. Either way
/// the value is written to the command's report.
pub fn materialize_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        rng::derive_seed(&[nanos, std::process::id() as u64])
    })
}

/// Parses `name:lo:hi:size` into an evenly spaced grid.
pub fn parse_dose_spec(spec: &str) -> Result<DoseRange> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::config(format!("dose spec '{spec}' is not name:lo:hi:grid_size"));
    if parts.len() != 4 || parts[0].is_empty() {
        return Err(bad());
    }
    let lo: f64 = parts[1].parse().map_err(|_| bad())?;
    let hi: f64 = parts[2].parse().map_err(|_| bad())?;
    let size: usize = parts[3].parse().map_err(|_| bad())?;
    DoseRange::evenly_spaced(parts[0], lo, hi, size)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| Error::input(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Line-delimited JSON records.
fn write_report(path: Option<&Path>, records: &[Value]) -> Result<()> {
    let mut w = output(path)?;
    for r in records {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

fn read_tree(path: &Path) -> Result<crate::model::PolicyTree> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    document::from_str(&text)
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let seed = materialize_seed(a.seed);
    let table = Table::read(&a.data)?;
    let features = table.numeric(&a.features)?;
    let declared = (!a.labels.is_empty()).then_some(a.labels.as_slice());

    let (rewards, mut record) = if let Some(path) = &a.penalty {
        let class_col = a
            .treatment
            .as_ref()
            .ok_or_else(|| Error::config("weighted-loss mode needs --treatment naming the class column"))?;
        let ptable = Table::read(path)?;
        let k = ptable.header.len();
        if ptable.n_rows() != k {
            return Err(Error::input(format!(
                "penalty table must be square: {} classes in the header, {} rows",
                k,
                ptable.n_rows()
            )));
        }
        let penalty = PenaltyMatrix::new(ptable.numeric(&ptable.header)?)?;
        let labels = declared.map(<[String]>::to_vec).unwrap_or_else(|| ptable.header.clone());
        if labels != ptable.header {
            return Err(Error::input("declared labels differ from the penalty table header"));
        }
        let (z, labels) = encode_labels(&table.text_column(class_col)?, Some(&labels), class_col)?;
        let r = penalty_rewards(&z, &penalty, labels)?;
        let record = json!({"estimator": "weighted_loss", "n_rows": r.n_rows(), "n_candidates": r.n_candidates()});
        (r, record)
    } else {
        let outcome = a
            .outcome
            .as_ref()
            .ok_or_else(|| Error::config("--outcome is required unless --penalty is given"))?;
        let y = table.numeric_column(outcome)?;
        let (treatments, space) = match (&a.treatment, a.doses.is_empty()) {
            (Some(_), false) => return Err(Error::config("give either --treatment or --doses, not both")),
            (None, true) => return Err(Error::config("one of --treatment or --doses is required")),
            (Some(col), true) => {
                let (z, labels) = encode_labels(&table.text_column(col)?, declared, col)?;
                let space = TreatmentSpace::discrete(labels.clone())?;
                let t = labels.len();
                (Treatments::Discrete { labels: z, n_treatments: t }, space)
            }
            (None, false) => {
                let ranges: Vec<DoseRange> = a.doses.iter().map(|s| parse_dose_spec(s)).collect::<Result<_>>()?;
                let names: Vec<String> = ranges.iter().map(|r| r.name.clone()).collect();
                let doses = table.numeric(&names)?;
                (Treatments::Continuous(doses), TreatmentSpace::continuous(ranges)?)
            }
        };
        let mut ds = Dataset::new(features, y, treatments, a.features.clone())?;
        if a.maximize && !a.binary {
            ds = ds.negate_outcomes();
        }
        let forest = ForestConfig {
            n_trees: a.trees,
            min_leaf: a.forest_min_leaf,
            seed: rng::derive_seed(&[seed, 1]),
            ..Default::default()
        };
        let mut opts = EstimationOptions {
            forest,
            propensity_forest: ForestConfig {
                min_leaf: a.propensity_min_leaf,
                seed: rng::derive_seed(&[seed, 2]),
                ..forest
            },
            binary_outcome: a.binary,
            ..Default::default()
        };
        opts.propensity.k_folds = a.folds;
        opts.propensity.clip.0 = a.clip;
        opts.propensity.seed = seed;
        let (r, report) = estimate_rewards(&ds, &space, &opts)?;
        let r = if a.maximize && a.binary { r.negate() } else { r };
        (r, serde_json::to_value(report)?)
    };
    let rewards = if a.maximize && a.penalty.is_some() { rewards.negate() } else { rewards };
    rewards.write_table(create(&a.out)?)?;
    let obj = record.as_object_mut().expect("report is an object");
    obj.insert("event".into(), json!("estimation"));
    obj.insert("seed".into(), json!(seed));
    obj.insert("maximize".into(), json!(a.maximize));
    obj.insert("labels".into(), json!(rewards.labels()));
    write_report(a.report.as_deref(), &[record])
}

fn train(a: TrainArgs) -> Result<()> {
    let seed = materialize_seed(a.seed);
    let method: Method = a.method.parse()?;
    let table = Table::read(&a.data)?;
    let features = table.numeric(&a.features)?;
    let rewards = RewardMatrix::read_table(
        File::open(&a.rewards).map_err(|e| Error::input(format!("cannot read {}: {e}", a.rewards.display())))?,
    )?;
    if rewards.n_rows() != features.rows() {
        return Err(Error::input(format!(
            "rewards table has {} rows, data table has {}",
            rewards.n_rows(),
            features.rows()
        )));
    }
    let base = Hyperparameters {
        max_depth: a.depth,
        alpha: a.alpha,
        min_leaf: a.min_leaf,
        restarts: a.restarts,
        seed,
    };
    base.validate()?;

    let mut records = Vec::new();
    let (hp, validation) = if a.tune {
        let defaults = TuneGrid::default();
        let grid = TuneGrid {
            depths: if a.depths.is_empty() { defaults.depths.clone() } else { a.depths.clone() },
            alphas: if a.alphas.is_empty() { defaults.alphas.clone() } else { a.alphas.clone() },
            validation_fraction: a.validation_fraction.unwrap_or(defaults.validation_fraction),
            min_leaf: a.min_leaf,
        };
        let (hp, _, report) = tune_with_report(&rewards, &features, &grid, &base, method)?;
        for cell in &report.cells {
            let mut v = serde_json::to_value(cell)?;
            v.as_object_mut().expect("object").insert("event".into(), json!("tune_cell"));
            records.push(v);
        }
        let chosen = &report.cells[report.chosen];
        (hp, Some((chosen.validation_objective, report.n_train, report.n_validation)))
    } else {
        (base, None)
    };

    let tree = if method == Method::Optimal {
        let (tree, report) = fit_optimal_with_report(&rewards, &features, &hp)?;
        for r in &report.restarts {
            let mut v = serde_json::to_value(r)?;
            v.as_object_mut().expect("object").insert("event".into(), json!("restart"));
            records.push(v);
        }
        tree
    } else {
        method.fit(&rewards, &features, &hp)?
    };
    let tree = tree.with_feature_names(a.features.clone())?;
    let mut doc = document::to_string(&tree);
    doc.push('\n');
    std::fs::write(&a.out, doc).map_err(|e| Error::input(format!("cannot write {}: {e}", a.out.display())))?;

    let mut summary = json!({
        "event": "train",
        "method": a.method,
        "seed": seed,
        "n_rows": features.rows(),
        "hyperparams": hp,
        "train_objective": tree.objective_train(),
        "penalized_objective": tree.penalized_objective_train(),
        "n_branches": tree.n_branches(),
        "depth": tree.depth(),
    });
    if let Some((v, n_train, n_validation)) = validation {
        let obj = summary.as_object_mut().expect("object");
        obj.insert("validation_objective".into(), json!(v));
        obj.insert("n_tune_train".into(), json!(n_train));
        obj.insert("n_tune_validation".into(), json!(n_validation));
    }
    records.push(summary);
    write_report(a.report.as_deref(), &records)
}

fn prescribe(a: PrescribeArgs) -> Result<()> {
    let tree = read_tree(&a.tree)?;
    let table = Table::read(&a.data)?;
    let x = table.numeric(tree.feature_names())?;
    let treatments = tree.prescribe_batch(&x)?;
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    if a.explain {
        w.write_record(["prescription", "path"])?;
    } else {
        w.write_record(["prescription"])?;
    }
    for (i, &t) in treatments.iter().enumerate() {
        let label = &tree.treatment_labels()[t];
        if a.explain {
            w.write_record([label.as_str(), explain(&tree, x.row(i))?.as_str()])?;
        } else {
            w.write_record([label])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn show(a: ShowArgs) -> Result<()> {
    let tree = read_tree(&a.tree)?;
    let mut w = output(a.out.as_deref())?;
    w.write_all(render(&tree).as_bytes())?;
    w.flush()?;
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let seed = materialize_seed(a.seed);
    let defaults = ExperimentConfig::default();
    let methods = if a.methods.is_empty() {
        defaults.methods.clone()
    } else {
        a.methods.iter().map(|m| m.parse::<BenchMethod>()).collect::<Result<_>>()?
    };
    let mut cfg = ExperimentConfig {
        design: a.design.clone(),
        methods,
        n_grid: if a.n.is_empty() { defaults.n_grid.clone() } else { a.n.clone() },
        repetitions: a.reps,
        n_test: a.n_test,
        noise_sd: a.noise_sd,
        seed,
        restarts: a.restarts,
        ..defaults
    };
    if !a.depths.is_empty() {
        cfg.grid.depths = a.depths.clone();
    }
    if !a.alphas.is_empty() {
        cfg.grid.alphas = a.alphas.clone();
    }
    cfg.estimation.forest.n_trees = a.trees;
    cfg.estimation.propensity_forest.n_trees = a.trees;
    let table = run_experiment(&cfg)?;
    table.write_detail(create(&a.out)?)?;
    if let Some(p) = &a.summary {
        table.write_summary(create(p)?)?;
    }
    let record = json!({"event": "benchmark", "seed": seed, "config": cfg, "rows": table.rows.len()});
    write_report(a.report.as_deref(), &[record])
}

fn generate(a: GenerateArgs) -> Result<()> {
    let seed = materialize_seed(a.seed);
    let design: Design = a.design.parse()?;
    let spec = GeneratorSpec {
        design,
        n_train: a.n,
        noise_sd: a.noise_sd,
        seed,
    };
    let (ds, _) = spec.generate()?;
    let space = design.treatment_space();
    let mut header = default_feature_names(N_FEATURES);
    let treatment_cells: Matrix;
    let mut labels: Option<&[usize]> = None;
    match (ds.treatments(), &space) {
        (Treatments::Discrete { labels: z, .. }, TreatmentSpace::Discrete { .. }) => {
            header.push("z".into());
            labels = Some(z);
            treatment_cells = Matrix::zeros(ds.n_rows(), 0);
        }
        (Treatments::Continuous(d), TreatmentSpace::Continuous { doses }) => {
            header.extend(doses.iter().map(|r| r.name.clone()));
            treatment_cells = d.clone();
        }
        _ => return Err(Error::Internal("generated treatments do not match the design".into())),
    }
    header.push("y".into());
    let names = space.candidate_labels();
    let mut w = csv::Writer::from_writer(create(&a.out)?);
    w.write_record(&header)?;
    for i in 0..ds.n_rows() {
        let mut rec: Vec<String> = ds.features().row(i).iter().map(f64::to_string).collect();
        match labels {
            Some(z) => rec.push(names[z[i]].clone()),
            None => rec.extend(treatment_cells.row(i).iter().map(f64::to_string)),
        }
        rec.push(ds.outcomes()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
