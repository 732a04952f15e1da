//! One function per subcommand. Each reads its inputs, runs the library and
//! writes its artifacts into the output directory.

use std::path::{Path, PathBuf};

use clap::Args;
use interaction_primitives::clustering::{cluster_mds_embedded, ClusterModel, Method};
use interaction_primitives::evaluation::{quality, run_method, stability_sweep, transfer_primitives, SweepParam};
use interaction_primitives::io::{
    write_embedding, write_interactions, write_segments, Dataset, SegmentManifest,
};
use interaction_primitives::mds;
use interaction_primitives::segmentation::{segment as segment_encounter, Encounter, Segmentation};
use interaction_primitives::synthetic::{generate_kinked, generate_planted, Family, KinkedSpec, PlantedSpec};
use interaction_primitives::transport::{empirical_measure, model_measure, wasserstein as wasserstein_distance, DiscreteMeasure};
use interaction_primitives::Interaction;
use rayon::prelude::*;
use serde::Serialize;

use crate::artifact::{self, load_data, read_json, write_csv, write_json, Loaded, Meta};
use crate::config::PipelineConfig;
use crate::error::CliError;

const SEGMENT_NOTES: [(&str, &str); 2] = [
    ("penalty", "L + 2 added once to the squared error pooled over the four coordinate series"),
    ("error_unit", "squared errors are measured in units of robust noise variance x 16 x ln(samples)"),
];

fn input(config: &PipelineConfig) -> Result<&Path, CliError> {
    config
        .input
        .as_deref()
        .ok_or_else(|| CliError::Config("no input file (set `input` or pass --input)".into()))
}

fn out(config: &PipelineConfig, name: &str) -> PathBuf {
    config.output_dir.join(name)
}

fn load(config: &PipelineConfig) -> Result<Loaded, CliError> {
    load_data(input(config)?, config.grid_len)
}

// ----------------------------------------------------------------- generate

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// `planted` families or `kinked` encounters.
    #[arg(long, default_value = "planted")]
    kind: String,
    /// Families to draw from, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "parallel,opposing,crossing")]
    families: Vec<String>,
    #[arg(long, default_value_t = 50)]
    per_family: usize,
    /// Positional noise standard deviation for planted sets.
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    /// Samples per encounter.
    #[arg(long)]
    samples: Option<usize>,
    /// Number of kinked encounters.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Planted knot indices of kinked encounters.
    #[arg(long, value_delimiter = ',', default_value = "60")]
    knots: Vec<usize>,
    /// Noise as a fraction of each coordinate's range, for kinked encounters.
    #[arg(long, default_value_t = 0.01)]
    noise_fraction: f64,
}

fn parse_family(name: &str) -> Result<Family, CliError> {
    serde_json::from_value(serde_json::Value::String(name.replace('-', "_")))
        .map_err(|_| CliError::Config(format!("unknown family `{name}`")))
}

#[derive(Serialize)]
struct KinkedEntry {
    id: String,
    seed: u64,
    knots: Vec<usize>,
}

pub fn generate(config: &PipelineConfig, args: &GenerateArgs) -> Result<(), CliError> {
    let meta = Meta::new("generate", config);
    let (data, manifest) = match args.kind.as_str() {
        "planted" => {
            let spec = PlantedSpec {
                families: args.families.iter().map(|f| parse_family(f)).collect::<Result<_, _>>()?,
                per_family: args.per_family,
                noise: args.noise,
                samples: args.samples.unwrap_or(101),
            };
            let set = generate_planted(&spec, config.seed).map_err(|e| CliError::Config(e.to_string()))?;
            let data = Dataset {
                ids: set.encounters.iter().map(|e| e.id.clone()).collect(),
                interactions: set.encounters.into_iter().map(|e| e.interaction).collect(),
            };
            (data, serde_json::to_value(set.manifest)?)
        }
        "kinked" => {
            let spec = KinkedSpec {
                samples: args.samples.unwrap_or(121),
                knots: args.knots.clone(),
                noise_fraction: args.noise_fraction,
            };
            let mut data = Dataset::default();
            let mut entries = Vec::new();
            for i in 0..args.count as u64 {
                let seed = config.seed.wrapping_add(i);
                let enc = generate_kinked(&spec, seed).map_err(|e| CliError::Config(e.to_string()))?;
                entries.push(KinkedEntry {
                    id: enc.id.clone(),
                    seed,
                    knots: spec.knots.clone(),
                });
                data.ids.push(enc.id);
                data.interactions.push(enc.interaction);
            }
            (data, serde_json::to_value(entries)?)
        }
        other => return Err(CliError::Config(format!("unknown synthetic kind `{other}`"))),
    };
    let mut body = Vec::new();
    write_interactions(&data, &mut body)?;
    write_csv(&out(config, "encounters.csv"), &meta, &body)?;
    write_json(&out(config, "manifest.json"), &meta, &manifest)
}

// ------------------------------------------------------------------ segment

pub fn segment(config: &PipelineConfig) -> Result<(), CliError> {
    let path = input(config)?;
    let bytes = artifact::read_bytes(path)?;
    let raw = interaction_primitives::io::read_interactions(&bytes[..])
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let encounters: Vec<Encounter> = raw
        .ids
        .into_iter()
        .zip(raw.interactions)
        .map(|(id, inter)| Encounter::new(id, inter))
        .collect::<Result<_, _>>()?;
    let results: Vec<Segmentation> = encounters
        .par_iter()
        .map(|e| segment_encounter(e, &config.epsilons, config.grid_len))
        .collect::<Result<_, _>>()?;
    let mut meta = Meta::new("segment", config).input("encounters", &artifact::sha256_hex(&bytes));
    for (k, v) in SEGMENT_NOTES {
        meta = meta.note(k, v);
    }
    let mut body = Vec::new();
    write_segments(&results, &mut body)?;
    write_csv(&out(config, "segments.csv"), &meta, &body)?;
    write_json(
        &out(config, "segments.json"),
        &meta,
        &SegmentManifest::from_segmentations(&results, config.grid_len),
    )
}

// ---------------------------------------------------------------- distances

pub fn distances(config: &PipelineConfig) -> Result<(), CliError> {
    let loaded = load(config)?;
    let d = artifact::distances(&loaded, config)?;
    let meta = Meta::new("distances", config).input("data", &loaded.digest);
    let mut body = Vec::new();
    d.write_csv(&mut body)?;
    write_csv(&out(config, "distances.csv"), &meta, &body)
}

// ------------------------------------------------------------------ cluster

pub fn cluster(config: &PipelineConfig) -> Result<(), CliError> {
    let loaded = load(config)?;
    let d = artifact::distances(&loaded, config)?;
    let params = config.method_params()?;
    let data = &loaded.data.interactions;
    let meta = Meta::new("cluster", config).input("data", &loaded.digest);
    let model = if params.method == Method::MdsMedoid {
        let embedding = mds::embed(&d, params.beta, params.seed)?;
        let mut body = Vec::new();
        write_embedding(&loaded.data.ids, &embedding, &mut body)?;
        write_csv(&out(config, "embedding.csv"), &meta, &body)?;
        write_json(&out(config, "embedding.json"), &meta, &EmbeddingSidecar::from(&embedding))?;
        cluster_mds_embedded(data, &d, &embedding, params.k, params.seed)?
    } else {
        run_method(data, &d, &loaded.mu, &params, None)?
    };
    write_json(&out(config, "model.json"), &meta, &model)?;
    let mut body = b"id,cluster\n".to_vec();
    for (id, z) in loaded.data.ids.iter().zip(&model.assignments) {
        body.extend_from_slice(format!("{id},{z}\n").as_bytes());
    }
    write_csv(&out(config, "assignments.csv"), &meta, &body)
}

#[derive(Serialize)]
struct EmbeddingSidecar {
    n: usize,
    beta: usize,
    stress: f64,
}

impl From<&mds::Embedding> for EmbeddingSidecar {
    fn from(e: &mds::Embedding) -> Self {
        Self {
            n: e.n(),
            beta: e.beta,
            stress: e.stress,
        }
    }
}

fn load_model(path: &Path, n: usize) -> Result<(ClusterModel, String), CliError> {
    let model: ClusterModel = read_json(path)?;
    model.validate()?;
    if model.n() != n {
        return Err(CliError::Data(format!(
            "{} covers {} interactions but the data has {n}",
            path.display(),
            model.n()
        )));
    }
    Ok((model, artifact::sha256_hex(&artifact::read_bytes(path)?)))
}

// ----------------------------------------------------------------- evaluate

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Fitted model (default: model.json in the output directory).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Measure distances to mean interactions instead of medoids.
    #[arg(long)]
    use_mean: bool,
}

pub fn evaluate(config: &PipelineConfig, args: &EvaluateArgs) -> Result<(), CliError> {
    let loaded = load(config)?;
    let d = artifact::distances(&loaded, config)?;
    let model_path = args.model.clone().unwrap_or_else(|| out(config, "model.json"));
    let (model, model_digest) = load_model(&model_path, loaded.data.len())?;
    let use_medoid = config.use_medoid && !args.use_mean;
    let report = quality(&loaded.data.interactions, &model, &d, &loaded.mu, use_medoid)?;
    let meta = Meta::new("evaluate", config)
        .input("data", &loaded.digest)
        .input("model", &model_digest)
        .note("variance", "sample variance (n - 1 denominator) of squared distances")
        .note("silhouette", "members of singleton clusters score 0");
    write_json(&out(config, "quality.json"), &meta, &report)?;
    if report.silhouettes.is_some() {
        let mut body = Vec::new();
        report.write_silhouette_csv(&loaded.data.ids, &model.assignments, &mut body)?;
        write_csv(&out(config, "silhouettes.csv"), &meta, &body)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- stability

#[derive(Debug, Args)]
pub struct StabilityArgs {
    /// Sweep axis as `name=v1,v2,..`; give exactly two to override the configuration.
    #[arg(long)]
    grid: Vec<String>,
}

fn parse_axis(spec: &str) -> Result<(SweepParam, Vec<usize>), CliError> {
    let bad = || CliError::Config(format!("bad grid `{spec}` (expected name=v1,v2,..)"));
    let (name, values) = spec.split_once('=').ok_or_else(bad)?;
    let param = name.trim().parse().map_err(|e: interaction_primitives::Error| CliError::Config(e.to_string()))?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(bad());
    }
    Ok((param, values))
}

pub fn stability(config: &PipelineConfig, args: &StabilityArgs) -> Result<(), CliError> {
    let (axis1, axis2) = match args.grid.as_slice() {
        [] => {
            let (p1, p2) = config.sweep_axes()?;
            ((p1, config.sweep_values1.clone()), (p2, config.sweep_values2.clone()))
        }
        [a, b] => (parse_axis(a)?, parse_axis(b)?),
        _ => return Err(CliError::Config("give --grid exactly twice or not at all".into())),
    };
    if axis1.0 == axis2.0 {
        return Err(CliError::Config("sweep axes must differ".into()));
    }
    let loaded = load(config)?;
    let d = artifact::distances(&loaded, config)?;
    let grid = stability_sweep(
        &loaded.data.interactions,
        &d,
        &loaded.mu,
        &config.method_params()?,
        (axis1.0, &axis1.1),
        (axis2.0, &axis2.1),
    )?;
    let meta = Meta::new("stability", config)
        .input("data", &loaded.digest)
        .note("axes", &format!("{}={:?}; {}={:?}", axis1.0.name(), axis1.1, axis2.0.name(), axis2.1));
    let mut body = Vec::new();
    grid.write_csv(&mut body)?;
    write_csv(&out(config, "stability.csv"), &meta, &body)?;
    write_json(&out(config, "stability.json"), &meta, &grid)
}

// -------------------------------------------------------------- wasserstein

#[derive(Debug, Args)]
pub struct WassersteinArgs {
    /// First measure: a model JSON (weighted representatives) or an interaction CSV (uniform).
    #[arg(long)]
    a: PathBuf,
    /// Second measure, in either form.
    #[arg(long)]
    b: PathBuf,
}

fn load_measure(path: &Path, config: &PipelineConfig) -> Result<(DiscreteMeasure, String), CliError> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let model: ClusterModel = read_json(path)?;
        model.validate()?;
        let digest = artifact::sha256_hex(&artifact::read_bytes(path)?);
        let atoms: Vec<Interaction> = model
            .representatives
            .iter()
            .map(|g| interaction_primitives::trajectory::resample(g, config.grid_len))
            .collect::<Result<_, _>>()?;
        let base = model_measure(&model, model.n())?;
        Ok((DiscreteMeasure::new(atoms, base.weights().to_vec())?, digest))
    } else {
        let loaded = load_data(path, config.grid_len)?;
        Ok((empirical_measure(&loaded.data.interactions)?, loaded.digest))
    }
}

#[derive(Serialize)]
struct WassersteinReport {
    r: f64,
    value: f64,
    atoms_a: usize,
    atoms_b: usize,
}

pub fn wasserstein(config: &PipelineConfig, args: &WassersteinArgs) -> Result<(), CliError> {
    let (fa, da) = load_measure(&args.a, config)?;
    let (fb, db) = load_measure(&args.b, config)?;
    let mu = interaction_primitives::trajectory::uniform_measure(config.grid_len)?;
    let value = wasserstein_distance(&fa, &fb, config.r, &mu)?;
    let meta = Meta::new("wasserstein", config).input("a", &da).input("b", &db);
    let report = WassersteinReport {
        r: config.r,
        value,
        atoms_a: fa.len(),
        atoms_b: fb.len(),
    };
    write_json(&out(config, "wasserstein.json"), &meta, &report)
}

// ----------------------------------------------------------------- transfer

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Model whose representatives serve as primitives.
    #[arg(long)]
    primitives: PathBuf,
}

pub fn transfer(config: &PipelineConfig, args: &TransferArgs) -> Result<(), CliError> {
    let loaded = load(config)?;
    let model: ClusterModel = read_json(&args.primitives)?;
    model.validate()?;
    let prims: Vec<Interaction> = model
        .representatives
        .iter()
        .map(|g| interaction_primitives::trajectory::resample(g, config.grid_len))
        .collect::<Result<_, _>>()?;
    let labels = transfer_primitives(&loaded.data.interactions, &prims, &loaded.mu)?;
    let meta = Meta::new("transfer", config)
        .input("data", &loaded.digest)
        .input("primitives", &artifact::sha256_hex(&artifact::read_bytes(&args.primitives)?));
    let mut body = b"id,primitive\n".to_vec();
    for (id, p) in loaded.data.ids.iter().zip(&labels) {
        body.extend_from_slice(format!("{id},{p}\n").as_bytes());
    }
    write_csv(&out(config, "transfer.csv"), &meta, &body)
}
