//! `ctix`: build, query, inspect and benchmark trajectory indexes.

mod bench;
mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use trajectory_index::ingest::{self, NormalizeParams, SyntheticParams};
use trajectory_index::{Cell, Error, IndexParams, NormalizedDataset, Rect, TrajectoryIndex};

#[derive(Parser, Debug)]
#[command(
    name = "ctix",
    version,
    about = "Compressed index for moving-object trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build an index from a CSV of raw reports or normalized positions.
    Build(BuildArgs),
    /// Run a query against an index file.
    Query(QueryArgs),
    /// Print the size breakdown of an index file.
    Stats(StatsArgs),
    /// Sweep snapshot periods over a synthetic workload.
    Bench(bench::BenchArgs),
    /// Write a synthetic dataset as normalized CSV.
    Gen(GenArgs),
}

#[derive(Args, Debug, Default)]
pub(crate) struct BuildArgs {
    /// Input CSV: `id,timestamp,x,y` reports or `id,instant,row,col` cells.
    #[arg(long, short)]
    input: PathBuf,
    /// Index file to write.
    #[arg(long, short)]
    out: PathBuf,
    /// TOML file with defaults for the options below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    opts: BuildOptions,
}

#[derive(Args, Debug, Default, Clone)]
pub(crate) struct BuildOptions {
    /// Instants between snapshots [default: 120].
    #[arg(long)]
    pub period: Option<u32>,
    /// K²-tree arity [default: 2].
    #[arg(long)]
    pub k: Option<u32>,
    /// Upper bound on per-instant moves [default: from the data].
    #[arg(long)]
    pub max_step: Option<u32>,
    /// Store segment tails for backward replay.
    #[arg(long)]
    pub bidirectional: bool,
    /// Store accumulated displacements every this many instants.
    #[arg(long)]
    pub accumulators: Option<u32>,
    /// Cell side in input units, for raw reports [default: 30].
    #[arg(long)]
    pub cell_size: Option<f64>,
    /// Instant length in seconds, for raw reports [default: 60].
    #[arg(long)]
    pub bucket_seconds: Option<f64>,
    /// Speed limit in input units per second, for raw reports [default: 60 knots in m/s].
    #[arg(long)]
    pub max_speed: Option<f64>,
}

#[derive(Args, Debug)]
struct QueryArgs {
    /// Index file.
    #[arg(long, short, global = true)]
    index: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,
    #[command(subcommand)]
    kind: QueryKind,
}

#[derive(Subcommand, Debug)]
enum QueryKind {
    /// Position of one object at one instant.
    Obj {
        #[arg(long)]
        id: String,
        #[arg(long)]
        t: u32,
    },
    /// Positions of one object over an interval.
    Traj {
        #[arg(long)]
        id: String,
        #[arg(long)]
        from: u32,
        #[arg(long)]
        to: u32,
    },
    /// Objects inside a rectangle at one instant.
    Slice {
        /// `r1,c1,r2,c2`, inclusive.
        #[arg(long, value_parser = parse_rect)]
        rect: Rect,
        #[arg(long)]
        t: u32,
    },
    /// Objects inside a rectangle at some instant of an interval.
    Interval {
        #[arg(long, value_parser = parse_rect)]
        rect: Rect,
        #[arg(long)]
        from: u32,
        #[arg(long)]
        to: u32,
    },
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long, short)]
    index: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    objects: usize,
    #[arg(long, default_value_t = 2000)]
    instants: usize,
    #[arg(long, default_value_t = 256)]
    rows: u32,
    #[arg(long, default_value_t = 256)]
    cols: u32,
    #[arg(long, default_value_t = 3)]
    max_step: u32,
    #[arg(long, default_value_t = 0.002)]
    disappearance_rate: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub(crate) enum Format {
    /// Comma-separated lines.
    Csv,
    /// Aligned columns with a header.
    Table,
}

/// A failed command: message for stderr and process exit code.
#[derive(Debug)]
pub(crate) struct Failure {
    pub code: u8,
    pub message: String,
}

pub(crate) const USAGE: u8 = 2;
pub(crate) const CORRUPT: u8 = 3;
pub(crate) const INTERNAL: u8 = 4;

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(INTERNAL, format!("write failed: {e}"))
    }
}

type CmdResult = Result<(), Failure>;

fn parse_rect(s: &str) -> Result<Rect, String> {
    let v: Vec<u32> = s
        .split(',')
        .map(|x| x.trim().parse::<u32>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [r1, c1, r2, c2] => Ok(Rect::new(r1, c1, r2, c2)),
        _ => Err("expected r1,c1,r2,c2".into()),
    }
}

/// Failure for an error raised while reading user input.
fn input_failure(path: &Path, e: Error) -> Failure {
    match e {
        Error::Io(io) => Failure::new(USAGE, format!("{}: {io}", path.display())),
        e => Failure::new(CORRUPT, format!("{}: {e}", path.display())),
    }
}

/// Failure for an error raised while answering a query.
fn query_failure(e: Error) -> Failure {
    match e {
        Error::NotFound { .. } | Error::OutOfRange { .. } | Error::Validation(_) => {
            Failure::new(USAGE, e.to_string())
        }
        Error::Corrupt(_) | Error::UnknownSymbol(_) | Error::InvalidLeaf(_) => {
            Failure::new(CORRUPT, e.to_string())
        }
        e => Failure::new(INTERNAL, e.to_string()),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::new(USAGE, format!("{}: {e}", path.display())))
}

fn load_index(path: &Path) -> Result<TrajectoryIndex, Failure> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Failure::new(USAGE, format!("{}: {e}", path.display())))?;
    TrajectoryIndex::from_bytes(&bytes)
        .map_err(|e| Failure::new(CORRUPT, format!("{}: {e}", path.display())))
}

/// Reads either CSV flavour, picked by its header line.
fn read_dataset(path: &Path, opts: &BuildOptions) -> Result<NormalizedDataset, Failure> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| Failure::new(CORRUPT, format!("{}: {e}", path.display())))?;
    let header: String = text
        .lines()
        .next()
        .unwrap_or("")
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    if header == "id,instant,row,col" {
        return NormalizedDataset::read_csv(text.as_bytes(), None)
            .map_err(|e| input_failure(path, e));
    }
    let (reports, bad) =
        ingest::read_reports(text.as_bytes()).map_err(|e| input_failure(path, e))?;
    for b in bad.iter().take(5) {
        eprintln!("{}: line {}: {}", path.display(), b.line, b.message);
    }
    if bad.len() > 5 {
        eprintln!("{}: {} more malformed lines", path.display(), bad.len() - 5);
    }
    let defaults = NormalizeParams::default();
    let out = ingest::normalize(
        &reports,
        &NormalizeParams {
            cell_size: opts.cell_size.unwrap_or(defaults.cell_size),
            bucket_seconds: opts.bucket_seconds.unwrap_or(defaults.bucket_seconds),
            max_speed: opts.max_speed.unwrap_or(defaults.max_speed),
            ..defaults
        },
    )
    .map_err(|e| input_failure(path, e))?;
    eprintln!(
        "normalized {} reports: {} outliers, {} interpolated, {} filled",
        reports.len(),
        out.outliers,
        out.interpolated,
        out.filled
    );
    Ok(out.dataset)
}

pub(crate) fn index_params(o: &BuildOptions) -> IndexParams {
    let d = IndexParams::default();
    IndexParams {
        snapshot_period: o.period.unwrap_or(d.snapshot_period),
        k: o.k.unwrap_or(d.k),
        max_step: o.max_step,
        bidirectional: o.bidirectional,
        accumulator_interval: o.accumulators,
    }
}

fn cmd_build(args: BuildArgs) -> CmdResult {
    let opts = match &args.config {
        Some(path) => config::load(path)?.merge_under(args.opts),
        None => args.opts,
    };
    let data = read_dataset(&args.input, &opts)?;
    let idx = TrajectoryIndex::build(&data, &index_params(&opts)).map_err(|e| match e {
        Error::Validation(m) => Failure::new(CORRUPT, m),
        e => Failure::new(INTERNAL, e.to_string()),
    })?;
    let tmp = args.out.with_extension("partial");
    std::fs::write(&tmp, idx.to_bytes())
        .and_then(|_| std::fs::rename(&tmp, &args.out))
        .map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            Failure::new(USAGE, format!("{}: {e}", args.out.display()))
        })?;
    print_stats(&idx, Format::Table)
}

fn print_rows(format: Format, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut out = BufWriter::new(std::io::stdout().lock());
    match format {
        Format::Csv => {
            for r in rows {
                writeln!(out, "{}", r.join(","))?;
            }
        }
        Format::Table => {
            let widths: Vec<usize> = (0..header.len())
                .map(|i| {
                    rows.iter()
                        .map(|r| r[i].len())
                        .chain([header[i].len()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let line = |cells: Vec<&str>| {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            writeln!(out, "{}", line(header.to_vec()))?;
            for r in rows {
                writeln!(out, "{}", line(r.iter().map(String::as_str).collect()))?;
            }
        }
    }
    out.flush()
}

fn cell_row(idx: &TrajectoryIndex, oid: u32, c: Cell, instant: Option<u32>) -> Vec<String> {
    let mut r = vec![
        idx.id(oid).unwrap_or("?").to_string(),
        c.row.to_string(),
        c.col.to_string(),
    ];
    r.extend(instant.map(|t| t.to_string()));
    r
}

fn cmd_query(args: QueryArgs) -> CmdResult {
    let path = args
        .index
        .ok_or_else(|| Failure::new(USAGE, "query needs --index"))?;
    let idx = load_index(&path)?;
    let object = |id: &str| {
        idx.lookup(id)
            .ok_or_else(|| Failure::new(USAGE, format!("unknown object {id:?}")))
    };
    let (header, rows): (&[&str], Vec<Vec<String>>) = match args.kind {
        QueryKind::Obj { id, t } => {
            let oid = object(&id)?;
            let cell = idx.object_position(oid, t).map_err(query_failure)?;
            (
                &["id", "row", "col"],
                cell.map(|c| cell_row(&idx, oid, c, None))
                    .into_iter()
                    .collect(),
            )
        }
        QueryKind::Traj { id, from, to } => {
            let oid = object(&id)?;
            let cells = idx
                .object_trajectory(oid, from, to)
                .map_err(query_failure)?;
            let rows = (from..=to)
                .zip(cells)
                .filter_map(|(t, c)| c.map(|c| cell_row(&idx, oid, c, Some(t))))
                .collect();
            (&["id", "row", "col", "instant"], rows)
        }
        QueryKind::Slice { rect, t } => {
            let hits = idx.time_slice(rect, t).map_err(query_failure)?;
            (
                &["id", "row", "col"],
                hits.into_iter()
                    .map(|(o, c)| cell_row(&idx, o, c, None))
                    .collect(),
            )
        }
        QueryKind::Interval { rect, from, to } => {
            let hits = idx.time_interval(rect, from, to).map_err(query_failure)?;
            let rows = hits
                .into_iter()
                .map(|(o, t, c)| cell_row(&idx, o, c, Some(t)))
                .collect();
            (&["id", "row", "col", "instant"], rows)
        }
    };
    print_rows(args.format, header, &rows)?;
    Ok(())
}

fn print_stats(idx: &TrajectoryIndex, format: Format) -> CmdResult {
    let s = idx.stats();
    let p = idx.params();
    let ratio = s
        .ratio_percent
        .map_or("n/a".to_string(), |r| format!("{r:.2}"));
    let rows: Vec<Vec<String>> = [
        ("objects", idx.num_objects().to_string()),
        ("instants", idx.instants().to_string()),
        ("grid", format!("{}x{}", idx.rows(), idx.cols())),
        ("snapshot_period", p.snapshot_period.to_string()),
        ("k", p.k.to_string()),
        ("max_step", idx.max_step().to_string()),
        ("bidirectional", p.bidirectional.to_string()),
        (
            "accumulator_interval",
            p.accumulator_interval
                .map_or("none".into(), |d| d.to_string()),
        ),
        ("snapshots", s.snapshots.to_string()),
        ("scdc_stoppers", s.stopper_count.to_string()),
        ("vocabulary", s.vocabulary.to_string()),
        ("header_bytes", s.header_bytes.to_string()),
        ("id_bytes", s.id_bytes.to_string()),
        ("model_bytes", s.model_bytes.to_string()),
        ("offset_table_bytes", s.offset_table_bytes.to_string()),
        ("snapshot_tree_bytes", s.snapshot_tree_bytes.to_string()),
        (
            "snapshot_attachment_bytes",
            s.snapshot_attachment_bytes.to_string(),
        ),
        ("reappearance_bytes", s.reappearance_bytes.to_string()),
        ("log_bytes", s.log_bytes.to_string()),
        ("log_offset_bytes", s.log_offset_bytes.to_string()),
        ("tail_bytes", s.tail_bytes.to_string()),
        ("accumulator_bytes", s.accumulator_bytes.to_string()),
        (
            "segment_overhead_bytes",
            s.segment_overhead_bytes.to_string(),
        ),
        ("total_bytes", s.total_bytes.to_string()),
        ("baseline_bytes", s.baseline_bytes.to_string()),
        ("ratio_percent", ratio),
    ]
    .into_iter()
    .map(|(k, v)| vec![k.to_string(), v])
    .collect();
    print_rows(format, &["field", "value"], &rows)?;
    Ok(())
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    if a.rows == 0 || a.cols == 0 || a.instants == 0 || !(0.0..=1.0).contains(&a.disappearance_rate)
    {
        return Err(Failure::new(
            USAGE,
            "grid, instants and disappearance rate must be positive and sane",
        ));
    }
    let data = ingest::generate_synthetic(&SyntheticParams {
        objects: a.objects,
        instants: a.instants,
        rows: a.rows,
        cols: a.cols,
        max_step: a.max_step,
        disappearance_rate: a.disappearance_rate,
        seed: a.seed,
        ..Default::default()
    });
    let file = File::create(&a.out)
        .map_err(|e| Failure::new(USAGE, format!("{}: {e}", a.out.display())))?;
    data.write_csv(BufWriter::new(file))
        .map_err(|e| Failure::new(INTERNAL, e.to_string()))
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Query(a) => cmd_query(a),
        Command::Stats(a) => print_stats(&load_index(&a.index)?, a.format),
        Command::Bench(a) => bench::run(a),
        Command::Gen(a) => cmd_gen(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ctix: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
