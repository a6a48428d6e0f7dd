//! Experiment driver for the multirail simulator: collective sweeps,
//! chunk-granularity sensitivity, workload playback, exhaustive-oracle
//! comparisons and bandwidth-provisioning reports, all emitted as CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use multirail::collective::CollectiveKind;
use multirail::engine::{export_activity_csv, simulate, EnginePolicy, IntraDimPolicy};
use multirail::oracle::{exhaustive_report, export_oracle_csv, ideal_latency, DEFAULT_SPACE_CAP};
use multirail::provisioning::export_provisioning_csv;
use multirail::schedule::{
    baseline_schedule, dynamic_schedule, export_schedules_csv, SchedulerConfig,
};
use multirail::topology::{load_topology, preset, Topology, PRESET_NAMES};
use multirail::workload::{export_iteration_csv, load_workload, run_iteration, RunMode};

#[derive(Debug, Parser)]
#[command(
    name = "multirail",
    about = "Deterministic simulator for chunked hierarchical collectives on multi-dimensional fabrics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Topology preset name or path to a JSON config file (repeatable).
    #[arg(long, default_value = "3d_sw_sw_sw_homo")]
    topology: Vec<String>,

    /// Scheduling mode(s): baseline | dynamic-fifo | dynamic-scf | ideal | all.
    #[arg(long, default_value = "baseline")]
    mode: Vec<String>,

    /// Chunks per collective.
    #[arg(long, default_value_t = 64)]
    cpc: usize,

    /// Threshold divisor: the dynamic scheduler falls back to the baseline
    /// order while the load gap is below the predicted time of a
    /// chunk/divisor pass on the least-loaded dimension.
    #[arg(long, default_value_t = 16.0)]
    threshold_divisor: f64,

    /// Intra-dimension service policy for commands that do not pin one:
    /// fifo | scf.
    #[arg(long, default_value = "fifo")]
    policy: String,

    /// Stages a dimension may hold in flight at once; 0 means unbounded.
    #[arg(long, default_value_t = 1)]
    concurrency: usize,

    /// Output directory for CSV reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Reserved for future stochastic components; every simulator component
    /// is deterministic, so this flag is accepted and recorded only.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Makespan and utilization for each (topology, mode, size).
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Collective payload size(s), e.g. 100MB, 1GB, or plain bytes.
        #[arg(long, default_value = "1GB")]
        size: Vec<String>,
        /// Collective kind: all_reduce | reduce_scatter | all_gather.
        #[arg(long, default_value = "all_reduce")]
        collective: String,
        /// Also write per-dimension activity timelines with this window (seconds).
        #[arg(long)]
        activity_window: Option<f64>,
    },
    /// Utilization versus chunks-per-collective.
    Sensitivity {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "100MB")]
        size: String,
        /// Chunk counts to sweep.
        #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 8, 16, 32, 64, 128, 256, 512])]
        cpc_list: Vec<usize>,
    },
    /// Training-iteration decomposition for a workload trace.
    Workload {
        #[command(flatten)]
        common: CommonArgs,
        /// Path to the trace file.
        #[arg(long)]
        trace: PathBuf,
    },
    /// Exhaustive schedule search on a tiny instance.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "256MB")]
        size: String,
        #[arg(long, default_value = "all_reduce")]
        collective: String,
        /// Enumerate independent All-Gather orders too.
        #[arg(long)]
        full_space: bool,
        /// Assignment-count cap.
        #[arg(long, default_value_t = DEFAULT_SPACE_CAP)]
        cap: u128,
    },
    /// Bandwidth-provisioning verdicts for every dimension pair.
    Provision {
        #[command(flatten)]
        common: CommonArgs,
        /// Relative tolerance for the just-enough classification.
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
    },
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Sweep {
            common,
            size,
            collective,
            activity_window,
        } => cmd_sweep(&common, &size, &collective, activity_window),
        Command::Sensitivity {
            common,
            size,
            cpc_list,
        } => cmd_sensitivity(&common, &size, &cpc_list),
        Command::Workload { common, trace } => cmd_workload(&common, &trace),
        Command::Oracle {
            common,
            size,
            collective,
            full_space,
            cap,
        } => cmd_oracle(&common, &size, &collective, full_space, cap),
        Command::Provision { common, tolerance } => cmd_provision(&common, tolerance),
    }
}

// ---------------------------------------------------------------------------
// Shared parsing
// ---------------------------------------------------------------------------

fn resolve_topology(spec: &str) -> Result<Topology<f64>> {
    if PRESET_NAMES.contains(&spec) {
        return Ok(preset(spec)?);
    }
    let path = Path::new(spec);
    if path.exists() {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading topology file {}", path.display()))?;
        return Ok(load_topology(&text)?);
    }
    bail!(
        "'{spec}' is neither a preset ({}) nor an existing config file",
        PRESET_NAMES.join(", ")
    )
}

fn parse_size(text: &str) -> Result<f64> {
    let lower = text.trim().to_lowercase();
    let (digits, factor) = if let Some(v) = lower.strip_suffix("gb") {
        (v, 1e9)
    } else if let Some(v) = lower.strip_suffix("mb") {
        (v, 1e6)
    } else if let Some(v) = lower.strip_suffix("kb") {
        (v, 1e3)
    } else if let Some(v) = lower.strip_suffix('b') {
        (v, 1.0)
    } else {
        (lower.as_str(), 1.0)
    };
    let value: f64 = digits
        .trim()
        .parse()
        .map_err(|_| anyhow!("cannot parse size '{text}'"))?;
    if value <= 0.0 {
        bail!("size must be positive, got '{text}'");
    }
    Ok(value * factor)
}

fn parse_collective(text: &str) -> Result<CollectiveKind> {
    match text {
        "all_reduce" => Ok(CollectiveKind::AllReduce),
        "reduce_scatter" => Ok(CollectiveKind::ReduceScatter),
        "all_gather" => Ok(CollectiveKind::AllGather),
        other => bail!("unknown collective '{other}' (all_reduce | reduce_scatter | all_gather)"),
    }
}

fn parse_policy(text: &str) -> Result<IntraDimPolicy> {
    match text {
        "fifo" => Ok(IntraDimPolicy::Fifo),
        "scf" => Ok(IntraDimPolicy::Scf),
        other => bail!("unknown policy '{other}' (fifo | scf)"),
    }
}

fn parse_modes(specs: &[String]) -> Result<Vec<RunMode>> {
    let mut modes = Vec::new();
    for spec in specs {
        for part in spec.split(',') {
            let part = part.trim();
            if part == "all" {
                modes.extend(RunMode::all());
                continue;
            }
            modes.push(RunMode::parse(part).ok_or_else(|| {
                anyhow!("unknown mode '{part}' (baseline | dynamic-fifo | dynamic-scf | ideal)")
            })?);
        }
    }
    if modes.is_empty() {
        bail!("at least one mode is required");
    }
    Ok(modes)
}

/// Short report-file tag for a topology spec: the file stem for config
/// paths, the name itself for presets.
fn safe_name(spec: &str) -> String {
    Path::new(spec)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.replace('/', "_"))
}

fn concurrency_of(common: &CommonArgs) -> usize {
    if common.concurrency == 0 {
        usize::MAX
    } else {
        common.concurrency
    }
}

fn policy_for_mode(mode: RunMode, fallback: IntraDimPolicy, concurrency: usize) -> EnginePolicy {
    let intra_dim = match mode {
        RunMode::Baseline | RunMode::DynamicFifo => IntraDimPolicy::Fifo,
        RunMode::DynamicScf => IntraDimPolicy::Scf,
        RunMode::Ideal => fallback,
    };
    EnginePolicy {
        intra_dim,
        max_concurrency: concurrency,
    }
}

fn fingerprint(common: &CommonArgs, extra: &str) -> String {
    let seed = common
        .seed
        .map(|s| format!(" seed={s}"))
        .unwrap_or_default();
    format!(
        "# config: topologies={} modes={} cpc={} threshold_divisor={} policy={} concurrency={}{}{}{}",
        common.topology.join("|"),
        common.mode.join("|"),
        common.cpc,
        common.threshold_divisor,
        common.policy,
        common.concurrency,
        seed,
        if extra.is_empty() { "" } else { " " },
        extra
    )
}

fn write_report(dir: &Path, name: &str, fingerprint: &str, body: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    let contents = format!("{fingerprint}\n{body}");
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn schedules_for(
    mode: RunMode,
    kind: CollectiveKind,
    bytes: f64,
    config: &SchedulerConfig<f64>,
    topology: &Topology<f64>,
) -> Result<Vec<multirail::ChunkSchedule64>> {
    Ok(match mode {
        RunMode::Baseline => {
            baseline_schedule(kind, bytes, config.chunks_per_collective, topology)?
        }
        _ => dynamic_schedule(kind, bytes, config, topology)?,
    })
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_sweep(
    common: &CommonArgs,
    sizes: &[String],
    collective: &str,
    activity_window: Option<f64>,
) -> Result<()> {
    let kind = parse_collective(collective)?;
    let modes = parse_modes(&common.mode)?;
    let fallback = parse_policy(&common.policy)?;
    let concurrency = concurrency_of(common);
    let config = SchedulerConfig::new(common.cpc, common.threshold_divisor);
    let bytes: Vec<f64> = sizes.iter().map(|s| parse_size(s)).collect::<Result<_>>()?;

    let mut summary = String::from(
        "topology,mode,size_bytes,cpc,policy,concurrency,makespan_s,weighted_utilization,ideal_s\n",
    );
    let mut per_dim =
        String::from("topology,mode,size_bytes,dim,busy_s,idle_pending_s,bytes,utilization\n");
    for topo_name in &common.topology {
        let topology = resolve_topology(topo_name)?;
        let safe = safe_name(topo_name);
        for &size in &bytes {
            let ideal = ideal_latency(size, &topology);
            for &mode in &modes {
                let policy = policy_for_mode(mode, fallback, concurrency);
                if mode == RunMode::Ideal {
                    writeln!(
                        summary,
                        "{topo_name},{mode},{size},{},{},{},{ideal},1,{ideal}",
                        common.cpc, policy.intra_dim, common.concurrency
                    )
                    .unwrap();
                    continue;
                }
                let schedules = schedules_for(mode, kind, size, &config, &topology)?;
                let metrics = simulate(&topology, &schedules, &policy, None)?;
                writeln!(
                    summary,
                    "{topo_name},{mode},{size},{},{},{},{},{},{ideal}",
                    common.cpc,
                    policy.intra_dim,
                    common.concurrency,
                    metrics.makespan,
                    metrics.weighted_utilization
                )
                .unwrap();
                for (k, d) in metrics.per_dim.iter().enumerate() {
                    writeln!(
                        per_dim,
                        "{topo_name},{mode},{size},{},{},{},{},{}",
                        k + 1,
                        d.busy,
                        d.idle_while_pending,
                        d.bytes,
                        d.busy / metrics.makespan
                    )
                    .unwrap();
                }
                if let Some(window) = activity_window {
                    write_report(
                        &common.out,
                        &format!("activity_{safe}_{mode}_{size}.csv"),
                        &fingerprint(common, &format!("window={window}")),
                        &export_activity_csv(&metrics, window),
                    )?;
                }
            }
        }
    }
    let fp = fingerprint(
        common,
        &format!("collective={collective} sizes={}", sizes.join("|")),
    );
    write_report(&common.out, "sweep_summary.csv", &fp, &summary)?;
    write_report(&common.out, "sweep_per_dim.csv", &fp, &per_dim)?;
    Ok(())
}

fn cmd_sensitivity(common: &CommonArgs, size: &str, cpc_list: &[usize]) -> Result<()> {
    if cpc_list.is_empty() {
        bail!("at least one cpc value is required");
    }
    let bytes = parse_size(size)?;
    let modes = parse_modes(&common.mode)?;
    let fallback = parse_policy(&common.policy)?;
    let concurrency = concurrency_of(common);

    let mut body = String::from("topology,mode,cpc,makespan_s,weighted_utilization\n");
    for topo_name in &common.topology {
        let topology = resolve_topology(topo_name)?;
        for &mode in &modes {
            if mode == RunMode::Ideal {
                continue;
            }
            let policy = policy_for_mode(mode, fallback, concurrency);
            for &cpc in cpc_list {
                let config = SchedulerConfig::new(cpc, common.threshold_divisor);
                let schedules =
                    schedules_for(mode, CollectiveKind::AllReduce, bytes, &config, &topology)?;
                let metrics = simulate(&topology, &schedules, &policy, None)?;
                writeln!(
                    body,
                    "{topo_name},{mode},{cpc},{},{}",
                    metrics.makespan, metrics.weighted_utilization
                )
                .unwrap();
            }
        }
    }
    let fp = fingerprint(
        common,
        &format!(
            "size={size} cpc_list={}",
            cpc_list
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join("|")
        ),
    );
    write_report(&common.out, "sensitivity.csv", &fp, &body)?;
    Ok(())
}

fn cmd_workload(common: &CommonArgs, trace: &Path) -> Result<()> {
    let text =
        fs::read_to_string(trace).with_context(|| format!("reading trace {}", trace.display()))?;
    let workload = load_workload::<f64>(&text)?;
    let modes = parse_modes(&common.mode)?;
    let fallback = parse_policy(&common.policy)?;
    let concurrency = concurrency_of(common);
    let config = SchedulerConfig::new(common.cpc, common.threshold_divisor);

    for topo_name in &common.topology {
        let topology = resolve_topology(topo_name)?;
        let mut rows = Vec::new();
        let mut comm_body =
            String::from("mode,layer,pass,kind,bytes,dims,class,time_s,exposed_s\n");
        for &mode in &modes {
            let policy = policy_for_mode(mode, fallback, concurrency);
            let report = run_iteration(&workload, &topology, &config, &policy, mode)?;
            for c in &report.comms {
                writeln!(
                    comm_body,
                    "{mode},{},{},{},{},{}-{},{},{},{}",
                    c.layer,
                    if c.forward { "fwd" } else { "bwd" },
                    c.kind.as_str(),
                    c.bytes,
                    c.dims.0,
                    c.dims.1,
                    match c.class {
                        multirail::workload::CommClass::DataParallel => "dp",
                        multirail::workload::CommClass::ModelParallel => "mp",
                    },
                    c.time,
                    c.exposed
                )
                .unwrap();
            }
            rows.push((mode, report));
        }
        let fp = fingerprint(
            common,
            &format!("trace={} topology={topo_name}", trace.display()),
        );
        let safe = safe_name(topo_name);
        write_report(
            &common.out,
            &format!("workload_{safe}.csv"),
            &fp,
            &export_iteration_csv(&rows),
        )?;
        write_report(
            &common.out,
            &format!("workload_{safe}_collectives.csv"),
            &fp,
            &comm_body,
        )?;
    }
    Ok(())
}

fn cmd_oracle(
    common: &CommonArgs,
    size: &str,
    collective: &str,
    full_space: bool,
    cap: u128,
) -> Result<()> {
    let bytes = parse_size(size)?;
    let kind = parse_collective(collective)?;
    let fallback = parse_policy(&common.policy)?;
    let concurrency = concurrency_of(common);
    let config = SchedulerConfig::new(common.cpc, common.threshold_divisor);
    let policy = EnginePolicy {
        intra_dim: fallback,
        max_concurrency: concurrency,
    };

    for topo_name in &common.topology {
        let topology = resolve_topology(topo_name)?;
        let (result, candidates) =
            exhaustive_report(&topology, kind, bytes, common.cpc, &policy, full_space, cap)?;

        let baseline = baseline_schedule(kind, bytes, common.cpc, &topology)?;
        let baseline_makespan = simulate(&topology, &baseline, &policy, None)?.makespan;
        let dynamic = dynamic_schedule(kind, bytes, &config, &topology)?;
        let dynamic_makespan = simulate(&topology, &dynamic, &policy, None)?.makespan;

        println!(
            "{topo_name}: baseline {baseline_makespan:.6e} s, dynamic {dynamic_makespan:.6e} s, \
             optimal {:.6e} s over {} assignments",
            result.best_makespan, result.space_size
        );
        let mut body = export_oracle_csv(&result, &candidates);
        writeln!(body, "baseline,,{baseline_makespan}").unwrap();
        writeln!(body, "dynamic,,{dynamic_makespan}").unwrap();
        let fp = fingerprint(
            common,
            &format!("size={size} collective={collective} full_space={full_space} cap={cap}"),
        );
        let safe = safe_name(topo_name);
        write_report(&common.out, &format!("oracle_{safe}.csv"), &fp, &body)?;

        write_report(
            &common.out,
            &format!("oracle_{safe}_best_schedules.csv"),
            &fp,
            &export_schedules_csv(&result.best_schedules),
        )?;
    }
    Ok(())
}

fn cmd_provision(common: &CommonArgs, tolerance: f64) -> Result<()> {
    for topo_name in &common.topology {
        let topology = resolve_topology(topo_name)?;
        let mut body = export_provisioning_csv(&topology, tolerance)?;
        let recommended = multirail::provisioning::recommend(&topology);
        body.push_str("dim,recommended_balanced_bw_bytes_per_s,,\n");
        for (k, bw) in recommended.iter().enumerate() {
            writeln!(body, "{},{},,", k + 1, bw).unwrap();
        }
        let fp = fingerprint(
            common,
            &format!("tolerance={tolerance} topology={topo_name}"),
        );
        let safe = safe_name(topo_name);
        write_report(&common.out, &format!("provision_{safe}.csv"), &fp, &body)?;
    }
    Ok(())
}
