use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aagen_core::engine::EngineConfig;
use aagen_core::harness::{
    classify, evaluate, generate, window, GenerateOptions, Mode, ModeError, ProfileSets,
};
use aagen_core::profile::{parse_profile, Layer, Profile};
use aagen_core::sim::{decide, load_scenarios, OperationRequest, Scenario};
use aagen_core::trace::{load_session_manifest, LoadError, LoadOptions, LoadedSession};
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

/// Generate AppArmor profiles for containers from recorded traces, and
/// replay exploit scenarios against them.
#[derive(Parser, Debug)]
#[command(name = "aagen", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Engine configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Skip malformed trace and audit lines instead of failing.
    #[arg(long, global = true)]
    lenient: bool,
    /// Keep only capability and network rules, merged onto the base profiles.
    #[arg(long, global = true)]
    docker_sec_compat: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate container and host profiles from a recorded session.
    Generate {
        /// Session manifest.
        #[arg(long)]
        session: PathBuf,
        /// Training mode: 1, 2 or 3.
        #[arg(long, default_value = "3")]
        mode: String,
        /// Starting container profile.
        #[arg(long)]
        base_container: Option<PathBuf>,
        /// Starting host profile.
        #[arg(long)]
        base_host: Option<PathBuf>,
    },
    /// Run scenarios against labelled profile sets.
    Evaluate {
        /// Scenario directories.
        #[arg(long = "scenarios", required = true, num_args = 1..)]
        scenarios: Vec<PathBuf>,
        /// Profile-set manifest.
        #[arg(long)]
        profile_sets: PathBuf,
        /// Restrict to these labels (comma separated).
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Decide a single request against a profile.
    Simulate {
        /// Profile file, or `unconfined`.
        #[arg(long)]
        profile: String,
        #[arg(long, default_value = "container")]
        layer: Layer,
        /// e.g. `exec:/bin/sh`, `capability:net_raw`, `network:inet:stream:tcp`.
        request: String,
    },
    /// Count scenarios per target and impact.
    Classify {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Show the markers and mode windows of a session.
    Session { manifest: PathBuf },
}

/// Error tagged with its exit status.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

trait Classified<T> {
    fn usage(self) -> Result<T, Failure>;
    fn data(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classified<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: 2,
            err: e.into(),
        })
    }

    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: 3,
            err: e.into(),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let g = &cli.global;
    match &cli.cmd {
        Command::Generate {
            session,
            mode,
            base_container,
            base_host,
        } => cmd_generate(
            g,
            session,
            mode,
            base_container.as_deref(),
            base_host.as_deref(),
        ),
        Command::Evaluate {
            scenarios,
            profile_sets,
            labels,
            json,
        } => cmd_evaluate(g, scenarios, profile_sets, labels, *json),
        Command::Simulate {
            profile,
            layer,
            request,
        } => cmd_simulate(profile, *layer, request),
        Command::Classify { dirs, json } => cmd_classify(dirs, *json),
        Command::Session { manifest } => cmd_session(g, manifest),
    }
}

fn config(g: &Global) -> Result<EngineConfig, Failure> {
    match &g.config {
        Some(p) => EngineConfig::from_file(p)
            .with_context(|| format!("config {}", p.display()))
            .data(),
        None => Ok(EngineConfig::default()),
    }
}

fn load(g: &Global, manifest: &Path) -> Result<LoadedSession, Failure> {
    let opts = LoadOptions { lenient: g.lenient };
    let loaded = match load_session_manifest(manifest, opts) {
        Ok(l) => l,
        Err(LoadError::Parse(errors)) => {
            for e in errors.iter().take(10) {
                eprintln!("{e}");
            }
            if errors.len() > 10 {
                eprintln!("... {} more", errors.len() - 10);
            }
            return Err(anyhow!(
                "{}: {} malformed lines (use --lenient to skip them)",
                manifest.display(),
                errors.len()
            ))
            .data();
        }
        Err(e) => {
            return Err(e)
                .with_context(|| manifest.display().to_string())
                .data()
        }
    };
    if !loaded.skipped.is_empty() {
        eprintln!("skipped {} malformed lines", loaded.skipped.len());
    }
    Ok(loaded)
}

fn read_profile(path: &Path, layer: Layer) -> Result<Profile, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .data()?;
    parse_profile(&text, layer)
        .with_context(|| path.display().to_string())
        .data()
}

fn write_out(dir: &Path, name: &str, body: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .data()?;
    let path = dir.join(name);
    fs::write(&path, body)
        .with_context(|| format!("writing {}", path.display()))
        .data()?;
    Ok(path)
}

fn cmd_generate(
    g: &Global,
    session: &Path,
    mode: &str,
    base_container: Option<&Path>,
    base_host: Option<&Path>,
) -> Result<u8, Failure> {
    let mode: Mode = mode.parse().usage()?;
    let cfg = config(g)?;
    let base_c = base_container
        .map(|p| read_profile(p, Layer::Container))
        .transpose()?;
    let base_h = base_host
        .map(|p| read_profile(p, Layer::Host))
        .transpose()?;
    let loaded = load(g, session)?;
    let s = &loaded.session;
    let w = window(s, mode).map_err(|e: ModeError| Failure {
        code: 2,
        err: e.into(),
    })?;
    let out = generate(
        w.records(s),
        w.audits(s),
        &cfg,
        base_c.as_ref(),
        base_h.as_ref(),
        GenerateOptions {
            docker_sec_compat: g.docker_sec_compat,
        },
    )
    .data()?;
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let c = write_out(&dir, "container.profile", &out.container.render())?;
    let h = write_out(&dir, "host.profile", &out.host.render())?;
    print!("{}", out.summary);
    println!("wrote {} and {}", c.display(), h.display());
    Ok(0)
}

fn scenarios(dirs: &[PathBuf]) -> Result<Vec<Scenario>, Failure> {
    let mut all = Vec::new();
    for d in dirs {
        all.extend(load_scenarios(d).data()?);
    }
    Ok(all)
}

fn cmd_evaluate(
    g: &Global,
    dirs: &[PathBuf],
    manifest: &Path,
    labels: &[String],
    json: bool,
) -> Result<u8, Failure> {
    let scenarios = scenarios(dirs)?;
    let mut sets = ProfileSets::load(manifest).data()?;
    if !labels.is_empty() {
        sets = sets.select(labels).usage()?;
    }
    let m = evaluate(&scenarios, &sets).data()?;
    let (text, js) = (m.render_text(), m.to_json());
    if let Some(dir) = &g.out {
        write_out(dir, "matrix.txt", &text)?;
        write_out(dir, "matrix.json", &js)?;
    }
    print!("{}", if json { js } else { text });
    Ok(0)
}

fn cmd_simulate(profile: &str, layer: Layer, request: &str) -> Result<u8, Failure> {
    let req: OperationRequest = request.parse().data()?;
    let p = if profile == "unconfined" {
        None
    } else {
        Some(read_profile(Path::new(profile), layer)?)
    };
    let d = decide(p.as_ref(), &req);
    println!("{d}");
    Ok(if d.is_allow() { 0 } else { 1 })
}

fn cmd_classify(dirs: &[PathBuf], json: bool) -> Result<u8, Failure> {
    let scenarios = scenarios(dirs)?;
    let report = classify(&scenarios).map_err(|e| anyhow!(e)).data()?;
    if json {
        let s = serde_json::to_string_pretty(&report).data()?;
        println!("{s}");
    } else {
        print!("{}", report.render_text());
    }
    Ok(0)
}

fn cmd_session(g: &Global, manifest: &Path) -> Result<u8, Failure> {
    let loaded = load(g, manifest)?;
    let s = &loaded.session;
    println!("records: {}", s.records.len());
    println!("audit events: {}", s.audits.len());
    for m in &s.markers {
        match m.audit_index {
            Some(a) => println!("marker {} at record {} (audit {a})", m.event, m.index),
            None => println!("marker {} at record {}", m.event, m.index),
        }
    }
    for mode in [Mode::Mode1, Mode::Mode2, Mode::Mode3] {
        match window(s, mode) {
            Ok(w) => println!(
                "{mode}: records {}..{}, audit events {}..{}",
                w.records.start, w.records.end, w.audits.start, w.audits.end
            ),
            Err(e) => println!("{mode}: unavailable ({e})"),
        }
    }
    Ok(0)
}
