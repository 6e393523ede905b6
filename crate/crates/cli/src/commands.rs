use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bqp::bmc::{sample_biased_bmc, sample_bmc_from, sample_spine, SamplerCaps};
use bqp::decorability::criteria_report;
use bqp::interlacement::{
    progeny_occupation_target, InterlacementSampler, ReplicaSummary, VectorMoments,
};
use bqp::io::{format_measure, parse_measure, stream_header};
use bqp::model::reference::REFERENCE_MODELS;
use bqp::model::{parse_models, ModelEntry};
use nalgebra::DMatrix;

use bqp::potential::{entrance_measure, green_row, taboo_return_kernel};
use bqp::replicas::{map_replicas, Workers};
use bqp::verify::{run_criterion, SuiteConfig, TestReport, CRITERIA};
use bqp::{Measure, Model, StateSet};

use crate::{
    Cli, Command, InspectArgs, InterlaceArgs, ModelArgs, SimulateArgs, SimulateKind, VerifyArgs,
};

/// Version line of every structured-text report.
pub const REPORT_HEADER: &str = "# bqp-report v1";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(PathBuf, std::io::Error),
    Core(bqp::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric_precondition() => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<bqp::Error> for CliError {
    fn from(e: bqp::Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Inspect(a) => inspect(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Interlace(a) => interlace(cli, a),
        Command::Verify(a) => verify(a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(cli: &Cli, args: &ModelArgs) -> Result<ModelEntry> {
    let (source, text) = match &cli.config {
        Some(p) => (p.display().to_string(), read(p)?),
        None => ("reference models".to_string(), REFERENCE_MODELS.to_string()),
    };
    let entries = parse_models(&text).map_err(|e| CliError::Usage(format!("{source}: {e}")))?;
    let entry = match &args.model {
        Some(name) => entries.into_iter().find(|e| &e.name == name),
        None => entries.into_iter().next(),
    };
    entry.ok_or_else(|| {
        CliError::Usage(format!(
            "{source}: no model {}",
            args.model.as_deref().unwrap_or("defined")
        ))
    })
}

fn states(model: &Model, names: &[String]) -> Result<StateSet> {
    model
        .state_set(names)
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn region(entry: &ModelEntry, args: &ModelArgs) -> Result<Option<StateSet>> {
    if args.region.is_empty() {
        Ok(entry.region.clone())
    } else {
        states(&entry.model, &args.region).map(Some)
    }
}

fn require_region(entry: &ModelEntry, args: &ModelArgs) -> Result<StateSet> {
    region(entry, args)?.ok_or_else(|| CliError::Usage("no norming region: pass --B".into()))
}

fn state(model: &Model, name: &str) -> Result<usize> {
    model
        .state_index(name)
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn caps(max_generations: usize, max_population: usize) -> Result<SamplerCaps> {
    SamplerCaps::new(max_generations, max_population).map_err(|e| CliError::Usage(e.to_string()))
}

fn set_names(model: &Model, set: &StateSet) -> String {
    set.iter()
        .map(|x| model.names()[x].as_str())
        .collect::<Vec<_>>()
        .join(",")
}

fn matrix_lines(
    s: &mut String,
    name: &str,
    m: &DMatrix<f64>,
    model: &Model,
    rows: impl Iterator<Item = usize>,
) {
    for x in rows {
        let vals: Vec<String> = (0..m.ncols()).map(|y| m[(x, y)].to_string()).collect();
        let _ = writeln!(s, "{name} {}: {}", model.names()[x], vals.join(" "));
    }
}

fn vector_line(s: &mut String, name: &str, v: &[f64]) {
    let vals: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    let _ = writeln!(s, "{name} {}", vals.join(" "));
}

fn inspect(cli: &Cli, args: &InspectArgs) -> Result<ExitCode> {
    let entry = load_model(cli, &args.model)?;
    let model = &entry.model;
    let set = region(&entry, &args.model)?;
    let n = model.n_states();
    let mut s = String::new();
    let _ = writeln!(s, "{REPORT_HEADER}");
    let _ = writeln!(s, "model {}", entry.name);
    let _ = writeln!(s, "states {}", model.names().join(" "));
    vector_line(&mut s, "mean", model.means());
    matrix_lines(&mut s, "Q", model.intensity().matrix(), model, 0..n);
    let _ = writeln!(s, "spectral-radius {}", model.spectral_radius());
    let result = inspect_exact(&mut s, args, model, set.as_ref());
    emit(args.out.as_ref(), &s)?;
    result.map(|_| ExitCode::SUCCESS)
}

fn inspect_exact(
    s: &mut String,
    args: &InspectArgs,
    model: &Model,
    set: Option<&StateSet>,
) -> Result<()> {
    let n = model.n_states();
    let g = model.green()?;
    matrix_lines(s, "G", g, model, 0..n);
    let Some(set) = set else {
        let _ = writeln!(s, "B none");
        return Ok(());
    };
    let _ = writeln!(s, "B {}", set_names(model, set));
    let ht = model.h_transform(set)?;
    vector_line(s, "h", ht.h().values());
    matrix_lines(
        s,
        "p^h",
        ht.kernel().matrix(),
        model,
        set.complement().iter(),
    );
    matrix_lines(
        s,
        "Q^B",
        taboo_return_kernel(model, set)?.matrix(),
        model,
        set.iter(),
    );
    let reference = match &args.reference {
        Some(r) => state(model, r)?,
        None => 0,
    };
    let rep = criteria_report(model, set, args.depth, reference);
    for line in rep.to_text().lines() {
        let _ = writeln!(s, "decorability {line}");
    }
    Ok(())
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<ExitCode> {
    let entry = load_model(cli, &args.model)?;
    let model = &entry.model;
    let x = state(model, &args.x)?;
    let sa = &args.sampling;
    let caps = caps(sa.max_generations, sa.max_population)?;
    let workers = Workers(sa.workers);
    let blocks: Vec<String> = match args.kind {
        SimulateKind::Bmc => map_replicas(args.n, sa.seed, workers, |i, rng| {
            let f = sample_bmc_from(model, x, rng, caps);
            format!(
                "{}\n{}",
                stream_header(sa.seed, i, caps, f.truncation()),
                f.to_records()
            )
        }),
        SimulateKind::Biased => {
            let ht = model.h_transform(&require_region(&entry, &args.model)?)?;
            map_replicas(args.n, sa.seed, workers, |i, rng| {
                let f = sample_biased_bmc(model, &ht, x, rng, caps);
                format!(
                    "{}\n{}",
                    stream_header(sa.seed, i, caps, f.truncation()),
                    f.to_records()
                )
            })
        }
        SimulateKind::Spine => {
            let ht = model.h_transform(&require_region(&entry, &args.model)?)?;
            map_replicas(args.n, sa.seed, workers, |i, rng| {
                let p = sample_spine(&ht, x, rng, caps);
                let mut s = stream_header(sa.seed, i, caps, p.status);
                s.push('\n');
                for (k, y) in p.states.iter().enumerate() {
                    let _ = writeln!(s, "{k} {y}");
                }
                s
            })
        }
    };
    emit(sa.out.as_ref(), &blocks.join("\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn parse_nu(spec: &str, model: &Model) -> Result<Measure> {
    if let Some(rest) = spec.strip_prefix("green-row") {
        let name = rest.trim_start_matches([':', ' ']).trim();
        return Ok(green_row(model, state(model, name)?)?);
    }
    let path = Path::new(spec);
    parse_measure(&read(path)?, model)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Per-replica tree records and Π_B-occupation.
type Replica = bqp::Result<(String, Vec<f64>)>;

fn interlace(cli: &Cli, args: &InterlaceArgs) -> Result<ExitCode> {
    let entry = load_model(cli, &args.model)?;
    let model = &entry.model;
    let set = require_region(&entry, &args.model)?;
    let bprime = if args.bprime.is_empty() {
        set.clone()
    } else {
        states(model, &args.bprime)?
    };
    if !set.is_subset_of(&bprime) {
        return Err(CliError::Usage("--Bprime must contain --B".into()));
    }
    if !(args.u >= 0.0 && args.u.is_finite()) {
        return Err(CliError::Usage(
            "--u must be finite and non-negative".into(),
        ));
    }
    let nu = parse_nu(&args.nu, model)?;
    let sa = &args.sampling;
    let caps = caps(sa.max_generations, sa.max_population)?;
    let sampler = InterlacementSampler::new(&nu, model, &bprime)?;
    let n_states = model.n_states();
    let replicas: Vec<Replica> = map_replicas(args.n, sa.seed, Workers(sa.workers), |i, rng| {
        let s = sampler.sample(args.u, rng, caps)?;
        let mut text = format!("# replica={i} paths={} trees={}\n", s.paths, s.trees.len());
        for (j, t) in s.trees.iter().enumerate() {
            let _ = writeln!(text, "# tree={j} flags={}", t.truncation());
            text.push_str(&t.to_records());
        }
        Ok((
            text,
            ReplicaSummary::of(&s, n_states, &set).progeny_occupation,
        ))
    });
    let mut moments = VectorMoments::new(n_states);
    let mut samples = String::new();
    let _ = writeln!(
        samples,
        "# bqp-interlacement v1 nu={} B={} Bprime={} u={} seed={} caps={} mass={}",
        args.nu.replace(' ', ":"),
        set_names(model, &set),
        set_names(model, &bprime),
        args.u,
        sa.seed,
        caps,
        sampler.paths().mass()
    );
    for r in replicas {
        let (text, occ) = r?;
        samples.push_str(&text);
        moments.push(&occ);
    }
    let target: Vec<f64> = progeny_occupation_target(&entrance_measure(&nu, model, &set)?, model)?
        .into_iter()
        .map(|t| t * args.u)
        .collect();
    let mean = moments.mean();
    let var = moments.variance();
    let mut csv = String::from("state,empirical_occupation,exact_target,z_score\n");
    for y in 0..n_states {
        let (m, t) = if moments.n == 0 {
            (0.0, target[y])
        } else {
            (mean[y], target[y])
        };
        let se = (var.get(y).copied().unwrap_or(0.0) / moments.n.max(1) as f64).sqrt();
        let z = if se > 0.0 {
            (m - t) / se
        } else if (m - t).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        let _ = writeln!(csv, "{},{},{},{}", model.names()[y], m, t, z);
    }
    if let Some(dir) = &sa.out {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.clone(), e))?;
        write(&dir.join("samples.txt"), &samples)?;
        write(&dir.join("occupation.csv"), &csv)?;
        write(
            &dir.join("entrance.txt"),
            &format_measure(sampler.paths().entrance(), model),
        )?;
    }
    print!("{csv}");
    Ok(ExitCode::SUCCESS)
}

fn verify(args: &VerifyArgs) -> Result<ExitCode> {
    if !(args.scale > 0.0 && args.scale.is_finite()) {
        return Err(CliError::Usage("--scale must be positive".into()));
    }
    if let Some(id) = args
        .criteria
        .iter()
        .find(|id| !CRITERIA.iter().any(|c| c.0 == **id))
    {
        return Err(CliError::Usage(format!("no criterion {id}")));
    }
    let cfg = SuiteConfig {
        seed: args.seed,
        workers: Workers(args.workers),
        scale: args.scale,
        corrupt_h: args.corrupt_h,
        ..SuiteConfig::default()
    };
    let mut out = format!("{REPORT_HEADER}\nid,title,{}\n", TestReport::csv_header());
    let mut failed = 0;
    for &(id, _) in CRITERIA.iter() {
        if !args.criteria.is_empty() && !args.criteria.contains(&id) {
            continue;
        }
        let r = run_criterion(id, &cfg);
        eprintln!("{}", r.line());
        if !r.report.passed {
            failed += 1;
            eprintln!("    {}", r.report);
        }
        let _ = writeln!(
            out,
            "{},{},{}",
            id,
            r.title.replace(',', ";"),
            r.report.csv_row()
        );
    }
    emit(None, &out)?;
    if let Some(p) = &args.out {
        write(p, &out)?;
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
