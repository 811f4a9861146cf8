//! Command-line surface for the hamvec toolkit: generate or ingest data,
//! extract features, binarize, build indexes, query, and benchmark.
//!
//! Diagnostics go to stderr, result rows to stdout, bulk data to files. Every
//! command is deterministic given its flags and seeds (timing columns in
//! benchmark output excepted).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hamvec::baselines::{linear_scan, BallTree, DEFAULT_LEAF_CAP};
use hamvec::bitcode::{read_codes_header, CodeSet};
use hamvec::eval::{
    miss_vs_penetration, run_benchmark, write_probe_csv, write_summary_csv, BenchOptions, Engine,
    IndexRunReport,
};
use hamvec::mih::{read_index_header, MihIndex};
use hamvec::ordinal::{extract_features, read_pgm, CombinerWeights, FilterBankSpec};
use hamvec::simhash::{read_embeddings, read_embeddings_header, write_embeddings, ProjectionBank};
use hamvec::synth::{generate, SynthSpec};

#[derive(Parser)]
#[command(name = "hamvec", version, about = "Hamming-space retrieval toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic gallery/probe code sets
    Gen(GenArgs),
    /// Extract embeddings from grayscale PGM strips
    Extract(ExtractArgs),
    /// Binarize an embeddings file into codes with a projection bank
    Binarize(BinarizeArgs),
    /// Build and persist a substring-hash index over a codes file
    Build(BuildArgs),
    /// Retrieve r-neighbors of probe codes
    Query(QueryArgs),
    /// Benchmark searchers: hit rate, penetration rate, query time
    Bench(BenchArgs),
    /// Dump the header of any hamvec artifact file
    Info(InfoArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Scale preset: iitd | interval | lamp | iitk
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 50)]
    classes: u32,
    /// Samples per class
    #[arg(long, default_value_t = 10)]
    spc: u32,
    /// Genuine per-bit flip probability
    #[arg(long, default_value_t = 0.05)]
    pg: f64,
    /// Code width in bits
    #[arg(long, default_value_t = 512)]
    k: u32,
    /// Fraction of samples enrolled in the gallery
    #[arg(long, default_value_t = 0.4)]
    gallery_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the gallery codes file
    #[arg(long)]
    gallery: PathBuf,
    /// Output path for the probe codes file
    #[arg(long)]
    probes: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory of .pgm strips (processed in filename order)
    #[arg(long)]
    images: PathBuf,
    /// Output embeddings file
    #[arg(long)]
    out: PathBuf,
    /// Combiner-weights file (defaults to uniform averaging)
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Seed of the output-projection stage
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BinarizeArgs {
    /// Input embeddings file
    #[arg(long)]
    embeddings: PathBuf,
    /// Output codes file
    #[arg(long)]
    out: PathBuf,
    /// Code width in bits
    #[arg(long, default_value_t = 512)]
    k: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Projection bank path; loaded when present, created and saved otherwise
    /// (default: `<out>.hvp`)
    #[arg(long)]
    bank: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    /// Input codes file
    #[arg(long)]
    gallery: PathBuf,
    /// Engine to build; only the mih family persists an index
    #[arg(long, default_value = "mih")]
    engine: String,
    /// Substring table count
    #[arg(long, default_value_t = 16)]
    t: u32,
    /// Output index file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// Persisted index file (mih engines)
    #[arg(long, conflicts_with = "gallery")]
    index: Option<PathBuf>,
    /// Codes file to search (any engine; index built in memory)
    #[arg(long)]
    gallery: Option<PathBuf>,
    /// Probe codes file
    #[arg(long)]
    probes: PathBuf,
    /// Hamming radius
    #[arg(long)]
    r: u32,
    /// linear | balltree | mih | mih_opt | mih_mcom
    #[arg(long, default_value = "mih")]
    engine: String,
    #[arg(long, default_value_t = 16)]
    t: u32,
    #[arg(long, default_value_t = DEFAULT_LEAF_CAP)]
    leaf_cap: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    gallery: PathBuf,
    #[arg(long)]
    probes: PathBuf,
    /// Engine to run; repeat the flag to compare engines
    #[arg(long = "engine", required = true)]
    engines: Vec<String>,
    /// Single radius to benchmark
    #[arg(long, conflicts_with = "sweep")]
    r: Option<u32>,
    /// Radius sweep min:max:step (inclusive)
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long, default_value_t = 16)]
    t: u32,
    #[arg(long, default_value_t = 4)]
    leaf_cap: usize,
    /// Worker threads (0 = machine parallelism)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Summary CSV output (one row per engine x radius)
    #[arg(long)]
    out: PathBuf,
    /// Also write per-probe CSVs to `<prefix>_<engine>_r<r>.csv`
    #[arg(long)]
    probe_csv: Option<PathBuf>,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long)]
    file: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Binarize(args) => cmd_binarize(args),
        Command::Build(args) => cmd_build(args),
        Command::Query(args) => cmd_query(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Info(args) => cmd_info(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let spec = match &args.preset {
        Some(name) => {
            let mut spec = SynthSpec::preset(name, args.seed)?;
            spec.genuine_flip_prob = args.pg;
            spec
        }
        None => {
            let mut spec = SynthSpec::new(args.classes, args.spc, args.k, args.pg, args.seed);
            spec.gallery_fraction = args.gallery_fraction;
            spec
        }
    };
    let (gallery, probes) = generate(&spec)?;
    gallery.save(&args.gallery, true)?;
    probes.save(&args.probes, true)?;
    eprintln!(
        "generated {} classes x {} samples, k={}: gallery {} -> {}, probes {} -> {}",
        spec.classes,
        spec.samples_per_class,
        spec.width,
        gallery.len(),
        args.gallery.display(),
        probes.len(),
        args.probes.display()
    );
    eprintln!(
        "expected genuine distance {:.1}, imposter distance {:.1}",
        spec.expected_genuine_distance(),
        spec.expected_imposter_distance()
    );
    Ok(())
}

fn cmd_extract(args: ExtractArgs) -> Result<()> {
    let mut spec = FilterBankSpec::default();
    if let Some(seed) = args.seed {
        spec.projection_seed = seed;
    }
    let weights = match &args.weights {
        Some(path) => {
            let w = CombinerWeights::load(path)
                .with_context(|| format!("reading weights {}", path.display()))?;
            if !w.matches(&spec) {
                bail!("combiner weights do not match the extractor's layer filter counts");
            }
            w
        }
        None => CombinerWeights::uniform(&spec),
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.images)
        .with_context(|| format!("reading directory {}", args.images.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("pgm"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .pgm files in {}", args.images.display());
    }
    let mut rows = Vec::with_capacity(paths.len());
    for path in &paths {
        let mut reader = BufReader::new(
            File::open(path).with_context(|| format!("opening {}", path.display()))?,
        );
        let strip = read_pgm(&mut reader).with_context(|| format!("parsing {}", path.display()))?;
        let feature = extract_features(&strip, &spec, &weights)
            .with_context(|| format!("extracting {}", path.display()))?;
        rows.push(feature);
    }
    let mut out = BufWriter::new(File::create(&args.out)?);
    write_embeddings(&mut out, &rows, None)?;
    out.flush()?;
    eprintln!(
        "extracted {} embeddings of dim {} -> {}",
        rows.len(),
        rows[0].dim(),
        args.out.display()
    );
    Ok(())
}

fn cmd_binarize(args: BinarizeArgs) -> Result<()> {
    let mut reader = BufReader::new(
        File::open(&args.embeddings)
            .with_context(|| format!("opening {}", args.embeddings.display()))?,
    );
    let (rows, labels) = read_embeddings(&mut reader)?;
    if rows.is_empty() {
        bail!("embeddings file is empty");
    }
    let dim = rows[0].dim() as u32;
    let bank_path = args
        .bank
        .clone()
        .unwrap_or_else(|| args.out.with_extension("hvp"));
    let bank = if bank_path.exists() {
        let bank = ProjectionBank::load(&bank_path)
            .with_context(|| format!("loading bank {}", bank_path.display()))?;
        if bank.input_dim() != dim {
            bail!(
                "embedding dim {dim} does not match persisted bank dim {}",
                bank.input_dim()
            );
        }
        eprintln!("reusing projection bank {}", bank_path.display());
        bank
    } else {
        let bank = ProjectionBank::new(dim, args.k, args.seed)?;
        bank.save(&bank_path)?;
        eprintln!(
            "created projection bank {} (n={dim}, k={}, seed={})",
            bank_path.display(),
            args.k,
            args.seed
        );
        bank
    };
    let mut set = CodeSet::new(bank.output_bits())?;
    for (i, row) in rows.iter().enumerate() {
        let label = labels.as_ref().map(|l| l[i]).unwrap_or(0);
        set.push(bank.binarize(row)?, label)?;
    }
    set.save(&args.out, labels.is_some())?;
    eprintln!(
        "binarized {} rows to {}-bit codes -> {}",
        set.len(),
        set.width(),
        args.out.display()
    );
    Ok(())
}

fn parse_engine(s: &str) -> Result<Engine> {
    Ok(s.parse::<Engine>()?)
}

fn cmd_build(args: BuildArgs) -> Result<()> {
    let engine = parse_engine(&args.engine)?;
    if !matches!(engine, Engine::Mih | Engine::MihOptimized | Engine::MihMcom) {
        bail!("engine '{engine}' does not persist an index; use bench/query with --gallery");
    }
    let codes = CodeSet::load(&args.gallery)?;
    let index = MihIndex::build(&codes, args.t)?;
    index.save(&args.out)?;
    eprintln!(
        "built {}-table index over {} codes of {} bits -> {}",
        index.table_count(),
        index.len(),
        index.width(),
        args.out.display()
    );
    Ok(())
}

fn cmd_query(args: QueryArgs) -> Result<()> {
    let engine = parse_engine(&args.engine)?;
    let probes = CodeSet::load(&args.probes)?;
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());

    enum Searcher {
        Mih(MihIndex),
        Tree(BallTree, CodeSet),
        Linear(CodeSet),
    }
    let searcher = match (&args.index, &args.gallery) {
        (Some(path), None) => {
            if !matches!(engine, Engine::Mih | Engine::MihOptimized | Engine::MihMcom) {
                bail!("--index requires a mih-family engine");
            }
            Searcher::Mih(MihIndex::load(path)?)
        }
        (None, Some(path)) => {
            let codes = CodeSet::load(path)?;
            match engine {
                Engine::Linear => Searcher::Linear(codes),
                Engine::BallTree => {
                    let tree = BallTree::build(&codes, args.leaf_cap)?;
                    Searcher::Tree(tree, codes)
                }
                _ => Searcher::Mih(MihIndex::build(&codes, args.t)?),
            }
        }
        _ => bail!("provide exactly one of --index or --gallery"),
    };

    writeln!(out, "probe,match_id,distance,label")?;
    for p in 0..probes.len() as u32 {
        let q = probes.code(p);
        match &searcher {
            Searcher::Mih(index) => match engine {
                Engine::MihOptimized | Engine::MihMcom => {
                    let (hit, _) = index.query_optimized(q, args.r)?;
                    if let Some(n) = hit {
                        writeln!(out, "{p},{},{},{}", n.id, n.distance, index.label(n.id))?;
                    }
                }
                _ => {
                    let (ids, _) = index.query_rneighbors(q, args.r)?;
                    for id in ids {
                        let d = index.code(id).hamming(q)?;
                        writeln!(out, "{p},{id},{d},{}", index.label(id))?;
                    }
                }
            },
            Searcher::Tree(tree, codes) => {
                let (ids, _) = tree.query(q, args.r)?;
                for id in ids {
                    let d = codes.code(id).hamming(q)?;
                    writeln!(out, "{p},{id},{d},{}", codes.label(id))?;
                }
            }
            Searcher::Linear(codes) => {
                for id in linear_scan(codes, q, args.r)? {
                    let d = codes.code(id).hamming(q)?;
                    writeln!(out, "{p},{id},{d},{}", codes.label(id))?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn parse_sweep(s: &str) -> Result<Vec<u32>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("--sweep expects min:max:step, got '{s}'");
    }
    let min: u32 = parts[0].parse().context("sweep min")?;
    let max: u32 = parts[1].parse().context("sweep max")?;
    let step: u32 = parts[2].parse().context("sweep step")?;
    if step == 0 || max < min {
        bail!("--sweep needs max >= min and step > 0");
    }
    Ok((min..=max).step_by(step as usize).collect())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let engines: Vec<Engine> = args
        .engines
        .iter()
        .map(|e| parse_engine(e))
        .collect::<Result<_>>()?;
    let radii = match (&args.r, &args.sweep) {
        (Some(r), None) => vec![*r],
        (None, Some(sweep)) => parse_sweep(sweep)?,
        (None, None) => bail!("provide --r or --sweep"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let gallery = CodeSet::load(&args.gallery)?;
    let probes = CodeSet::load(&args.probes)?;
    let opts = BenchOptions {
        t: args.t,
        leaf_cap: args.leaf_cap,
        threads: args.threads,
    };

    let mut reports: Vec<IndexRunReport> = Vec::new();
    for &engine in &engines {
        let mut engine_reports = Vec::new();
        for &r in &radii {
            let report = run_benchmark(&gallery, &probes, engine, r, &opts)?;
            eprintln!(
                "{engine} r={r}: hit {:.4} penetration {:.6} mean query {:.1}us",
                report.hit_rate,
                report.penetration_rate,
                report.mean_query_time * 1e6
            );
            if let Some(prefix) = &args.probe_csv {
                let path = probe_csv_path(prefix, engine, r);
                let mut w = BufWriter::new(File::create(&path)?);
                write_probe_csv(&mut w, &report)?;
                w.flush()?;
            }
            engine_reports.push(report);
        }
        if engine_reports.len() >= 2 {
            let rows = miss_vs_penetration(&engine_reports)?;
            for row in rows {
                eprintln!(
                    "  sweep {engine} r={}: miss {:.4} penetration {:.6}",
                    row.r, row.miss_rate, row.penetration_rate
                );
            }
        }
        reports.extend(engine_reports);
    }
    let mut w = BufWriter::new(File::create(&args.out)?);
    write_summary_csv(&mut w, &reports)?;
    w.flush()?;
    eprintln!(
        "wrote {} summary rows -> {}",
        reports.len(),
        args.out.display()
    );
    Ok(())
}

fn probe_csv_path(prefix: &Path, engine: Engine, r: u32) -> PathBuf {
    let stem = prefix.to_string_lossy();
    PathBuf::from(format!("{stem}_{engine}_r{r}.csv"))
}

fn cmd_info(args: InfoArgs) -> Result<()> {
    let mut file =
        File::open(&args.file).with_context(|| format!("opening {}", args.file.display()))?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic).context("reading magic")?;
    let reopen = || -> Result<BufReader<File>> { Ok(BufReader::new(File::open(&args.file)?)) };
    match &magic {
        b"HVC1" => {
            let h = read_codes_header(&mut reopen()?)?;
            println!(
                "codes file: count {}, width {} bits, labels {}",
                h.count, h.width, h.labeled
            );
        }
        b"HVP1" => {
            let bank = ProjectionBank::read_from(&mut reopen()?)?;
            println!(
                "projection bank: input dim {}, output bits {}, seed {}",
                bank.input_dim(),
                bank.output_bits(),
                bank.seed()
            );
        }
        b"HVE1" => {
            let h = read_embeddings_header(&mut reopen()?)?;
            println!(
                "embeddings file: count {}, dim {}, labels {}",
                h.count, h.dim, h.labeled
            );
        }
        b"HVMI" => {
            let h = read_index_header(&mut reopen()?)?;
            println!(
                "index file: width {} bits, {} tables, {} codes",
                h.width, h.t, h.size
            );
        }
        b"HVW1" => {
            let w = CombinerWeights::read_from(&mut reopen()?)?;
            let counts: Vec<String> = w.layers.iter().map(|l| l.len().to_string()).collect();
            println!(
                "combiner weights: {} layers, filter counts [{}]",
                w.layers.len(),
                counts.join(", ")
            );
        }
        other => bail!(
            "unrecognized magic {:?} in {}",
            String::from_utf8_lossy(other),
            args.file.display()
        ),
    }
    Ok(())
}
