//! Experiment drivers behind the command-line subcommands.
//!
//! Each driver reads a resolved [`Config`], runs its repetitions in parallel
//! with seeds derived from the master seed, and writes LF-terminated CSV
//! artifacts plus a `manifest.txt` echo of the configuration. The per-run
//! functions (`warm_repetition`, `alloc_series`, ...) are public so tests can
//! inspect results without going through files.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::alloc::{
    random_baseline, run_best_response_dynamics, satisfied_links, selfish_baseline, Allocation,
    KnowledgeSet,
};
use crate::config::Config;
use crate::error::{ConfigError, Error, Result};
use crate::fixtures::{Municipality, TYNSET_FOCUS};
use crate::geo::NodeId;
use crate::metrics::{
    compute_ground_truth, degree_histogram, frequency_change_count, histogram_mode, mean_std,
    write_histogram, DegreeStats, GroundTruth, TraceLog,
};
use crate::rng::{streams, KeyedDraw, Seed};
use crate::sim::cycle::CycleSim;
use crate::sim::event::EventSim;
use crate::sim::NodeState;
use crate::time::SimTime;
use crate::topology::{
    gen_from_population_grid, gen_link_specs, gen_random_pairs, load_population_grid,
    load_topology, receiver_address, save_topology, transmitter_address, LinkSpec, Rect, Topology,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    GenTopology,
    GroundTruth,
    DiscoveryWarm,
    DiscoveryJoin,
    DiscoveryColdCycles,
    AllocOverTime,
    Domino,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::GenTopology,
        Self::GroundTruth,
        Self::DiscoveryWarm,
        Self::DiscoveryJoin,
        Self::DiscoveryColdCycles,
        Self::AllocOverTime,
        Self::Domino,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::GenTopology => "gen-topology",
            Self::GroundTruth => "ground-truth",
            Self::DiscoveryWarm => "discovery-warm",
            Self::DiscoveryJoin => "discovery-join",
            Self::DiscoveryColdCycles => "discovery-cold-cycles",
            Self::AllocOverTime => "alloc-over-time",
            Self::Domino => "domino",
        }
    }

    /// Settings applied on top of the global defaults before any file or
    /// override.
    pub fn presets(self) -> &'static [(&'static str, &'static str)] {
        match self {
            // Same link density as 500 000 pairs on 50 km x 50 km.
            Self::DiscoveryColdCycles => &[
                ("warm_start", "false"),
                ("n_pairs", "10000"),
                ("side_m", "7071.0678"),
            ],
            Self::AllocOverTime | Self::Domino => &[
                ("topology", "grid"),
                ("grid", "tynset"),
                ("focus", "tynset"),
            ],
            _ => &[],
        }
    }

    /// Default configuration for this experiment.
    pub fn config(self) -> Config {
        let mut c = Config::default();
        for (k, v) in self.presets() {
            c.set(k, v).expect("presets are valid");
        }
        c
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// Seed of repetition `rep`.
pub fn repetition_seed(cfg: &Config, rep: u32) -> u64 {
    Seed(cfg.u64("seed"))
        .child(streams::REPETITION, u64::from(rep))
        .0
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> Error {
    ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
    .into()
}

/// Topology described by `cfg`, generated with `seed`.
pub fn build_topology(cfg: &Config, seed: u64) -> Result<Topology> {
    let mld = cfg.f64("max_link_distance_m");
    let placement = cfg.receiver_placement();
    match cfg.get("topology") {
        "random" => {
            let side = cfg.f64("side_m");
            Ok(gen_random_pairs(
                cfg.usize("n_pairs"),
                Rect::square(side),
                mld,
                placement,
                seed,
            )?)
        }
        "grid" => {
            let name = cfg.get("grid");
            let grid = match Municipality::from_name(name) {
                Some(m) => m.grid(),
                None => load_population_grid(Path::new(name))?,
            };
            Ok(gen_from_population_grid(
                &grid,
                cfg.f64("persons_per_household"),
                mld,
                placement,
                seed,
            )?)
        }
        _ => {
            let path = cfg.get("topology_file");
            if path.is_empty() {
                return Err(bad("topology_file", path, "required when topology = file"));
            }
            Ok(load_topology(Path::new(path))?)
        }
    }
}

/// Area whose links the allocation updates; `None` means every link.
pub fn focus_area(cfg: &Config) -> Result<Option<Rect>> {
    let v = cfg.get("focus");
    match v {
        "tynset" => Ok(Some(TYNSET_FOCUS)),
        "all" => Ok(None),
        _ => {
            let parts: Vec<f64> = v
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad("focus", v, e.to_string()))?;
            match parts[..] {
                [a, b, c, d] => {
                    let r = Rect::new(a, b, c, d);
                    if r.is_valid() {
                        Ok(Some(r))
                    } else {
                        Err(bad("focus", v, "empty rectangle"))
                    }
                }
                _ => Err(bad("focus", v, "expected tynset, all or x0,y0,x1,y1")),
            }
        }
    }
}

fn focus_links(area: Option<&Rect>, topology: &Topology) -> Vec<usize> {
    match area {
        Some(r) => topology.links_in(r),
        None => (0..topology.len()).collect(),
    }
}

fn create_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create_file(path)?))
}

fn write_trace(path: &Path, trace: &TraceLog) -> Result<()> {
    trace.write_csv(create_file(path)?)?;
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// `mean` and `std` rows over the present values of one column.
fn mean_std_of(values: impl Iterator<Item = Option<f64>>) -> (String, String) {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        return (String::new(), String::new());
    }
    let (m, s) = mean_std(&v);
    (m.to_string(), s.to_string())
}

fn run_reps<T: Send>(cfg: &Config, f: impl Fn(u32) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..cfg.u32("repetitions"))
        .into_par_iter()
        .map(&f)
        .collect()
}

/// Runs `kind` and writes its artifacts into `out_dir`. Returns the files
/// written.
pub fn run(kind: ExperimentKind, cfg: &Config, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let manifest = out_dir.join("manifest.txt");
    let mut f = create_file(&manifest)?;
    let text = format!("# experiment = {kind}\n{}", cfg.manifest());
    f.write_all(text.as_bytes()).map_err(|source| Error::Io {
        path: manifest.clone(),
        source,
    })?;
    let mut files = vec![manifest];
    match kind {
        ExperimentKind::GenTopology => gen_topology(cfg, out_dir, &mut files)?,
        ExperimentKind::GroundTruth => ground_truth(cfg, out_dir, &mut files)?,
        ExperimentKind::DiscoveryWarm => discovery_warm(cfg, out_dir, &mut files)?,
        ExperimentKind::DiscoveryJoin => discovery_join(cfg, out_dir, &mut files)?,
        ExperimentKind::DiscoveryColdCycles => discovery_cold(cfg, out_dir, &mut files)?,
        ExperimentKind::AllocOverTime => alloc_over_time(cfg, out_dir, &mut files, false)?,
        ExperimentKind::Domino => alloc_over_time(cfg, out_dir, &mut files, true)?,
    }
    Ok(files)
}

fn gen_topology(cfg: &Config, out: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    let topo = build_topology(cfg, cfg.u64("seed"))?;
    let path = out.join("topology.csv");
    save_topology(&topo, &path)?;
    files.push(path);
    Ok(())
}

fn ground_truth(cfg: &Config, out: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    let topo = build_topology(cfg, cfg.u64("seed"))?;
    let truth = compute_ground_truth(&topo);
    let hist = degree_histogram(&truth);
    let path = out.join("degree_histogram.csv");
    write_histogram(&hist, create_file(&path)?)?;
    files.push(path);

    let stats = truth.stats();
    let path = out.join("degree_stats.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "links",
        "nodes",
        "mean_degree",
        "std_degree",
        "max_degree",
        "mode_degree",
    ])?;
    w.write_record([
        topo.len().to_string(),
        stats.nodes.to_string(),
        stats.mean.to_string(),
        stats.std_dev.to_string(),
        stats.max.to_string(),
        opt(histogram_mode(&hist)),
    ])?;
    w.flush().map_err(csv::Error::from)?;
    files.push(path);
    Ok(())
}

/// One warm-start discovery run.
#[derive(Debug, Clone)]
pub struct WarmRun {
    pub seed: u64,
    pub links: usize,
    pub degrees: DegreeStats,
    pub stable_time_s: Option<f64>,
    pub bytes_sent: u64,
    pub trace: TraceLog,
}

pub fn warm_repetition(cfg: &Config, rep: u32) -> Result<WarmRun> {
    let seed = repetition_seed(cfg, rep);
    let topo = build_topology(cfg, seed)?;
    let links = topo.len();
    let sim_cfg = crate::sim::SimConfig {
        seed,
        ..cfg.sim_config()
    };
    let mut sim = EventSim::new(topo, sim_cfg)?;
    let degrees = sim.truth().stats();
    let stable_time_s = sim.run();
    Ok(WarmRun {
        seed,
        links,
        degrees,
        stable_time_s,
        bytes_sent: sim.bytes_sent(),
        trace: sim.into_trace(),
    })
}

fn discovery_warm(cfg: &Config, out: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    let runs = run_reps(cfg, |r| warm_repetition(cfg, r))?;
    for (r, run) in runs.iter().enumerate() {
        let path = out.join(format!("trace_{r:03}.csv"));
        write_trace(&path, &run.trace)?;
        files.push(path);
    }
    let path = out.join("summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "repetition",
        "seed",
        "links",
        "mean_degree",
        "max_degree",
        "stable_time_s",
        "converged",
        "bytes_sent",
    ])?;
    for (r, run) in runs.iter().enumerate() {
        w.write_record([
            r.to_string(),
            run.seed.to_string(),
            run.links.to_string(),
            run.degrees.mean.to_string(),
            run.degrees.max.to_string(),
            opt(run.stable_time_s),
            run.stable_time_s.is_some().to_string(),
            run.bytes_sent.to_string(),
        ])?;
    }
    let (m, s) = mean_std_of(runs.iter().map(|r| r.stable_time_s));
    let (dm, ds) = mean_std_of(runs.iter().map(|r| Some(r.degrees.mean)));
    let converged = runs
        .iter()
        .filter(|r| r.stable_time_s.is_some())
        .count()
        .to_string();
    w.write_record(["mean", "", "", &dm, "", &m, &converged, ""])?;
    w.write_record(["std", "", "", &ds, "", &s, "", ""])?;
    w.flush().map_err(csv::Error::from)?;
    files.push(path);
    Ok(())
}

/// Picks a node to attach joining links to.
fn attach_node(topology: &Topology, rng: &mut impl Rng) -> NodeId {
    let i = rng.random_range(0..topology.len());
    if rng.random::<bool>() {
        topology.links[i].transmitter.id
    } else {
        topology.links[i].receiver.id
    }
}

fn numbered(mut specs: Vec<LinkSpec>, topology: &Topology) -> Vec<LinkSpec> {
    let next = topology
        .links
        .iter()
        .map(|l| l.link_id)
        .max()
        .map_or(0, |m| m + 1);
    for (i, s) in specs.iter_mut().enumerate() {
        s.link_id = next + i as u32;
    }
    specs
}

/// One join run: a warm start until stable, then new links.
#[derive(Debug, Clone)]
pub struct JoinRun {
    pub seed: u64,
    pub initial_stable_s: Option<f64>,
    pub joined_links: usize,
    /// Largest candidate count among the joining nodes.
    pub new_node_max_candidates: usize,
    /// Seconds from the join until every node knew all its candidates again.
    pub restable_s: Option<f64>,
    pub trace: TraceLog,
}

pub fn join_repetition(cfg: &Config, rep: u32) -> Result<JoinRun> {
    let seed = repetition_seed(cfg, rep);
    let topo = build_topology(cfg, seed)?;
    let sim_cfg = crate::sim::SimConfig {
        seed,
        ..cfg.sim_config()
    };
    let mut sim = EventSim::new(topo, sim_cfg)?;
    let initial_stable_s = sim.run();
    let n = cfg.usize("join_links");
    if initial_stable_s.is_none() || n == 0 {
        return Ok(JoinRun {
            seed,
            initial_stable_s,
            joined_links: 0,
            new_node_max_candidates: 0,
            restable_s: None,
            trace: sim.into_trace(),
        });
    }
    let mut rng = Seed(seed).stream(streams::JOIN);
    let bounds = sim.topology().bounds;
    let specs = gen_link_specs(
        n,
        &bounds,
        &bounds,
        cfg.f64("max_link_distance_m"),
        cfg.receiver_placement(),
        &mut rng,
    )?;
    let specs = numbered(specs, sim.topology());
    let attach = attach_node(sim.topology(), &mut rng);
    let first_new = sim.topology().node_count();
    let now = sim.now();
    sim.inject_links(&specs, attach, now)?;
    let restable_s = sim.run();
    let truth = sim.truth();
    let new_node_max_candidates = (first_new..truth.len())
        .map(|i| truth.degree(crate::geo::Address(i as u32)))
        .max()
        .unwrap_or(0);
    Ok(JoinRun {
        seed,
        initial_stable_s,
        joined_links: n,
        new_node_max_candidates,
        restable_s,
        trace: sim.into_trace(),
    })
}

fn discovery_join(cfg: &Config, out: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    let runs = run_reps(cfg, |r| join_repetition(cfg, r))?;
    for (r, run) in runs.iter().enumerate() {
        let path = out.join(format!("trace_{r:03}.csv"));
        write_trace(&path, &run.trace)?;
        files.push(path);
    }
    let path = out.join("summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "repetition",
        "seed",
        "initial_stable_s",
        "joined_links",
        "new_node_max_candidates",
        "stable_time_s",
        "converged",
    ])?;
    for (r, run) in runs.iter().enumerate() {
        w.write_record([
            r.to_string(),
            run.seed.to_string(),
            opt(run.initial_stable_s),
            run.joined_links.to_string(),
            run.new_node_max_candidates.to_string(),
            opt(run.restable_s),
            run.restable_s.is_some().to_string(),
        ])?;
    }
    let (im, is) = mean_std_of(runs.iter().map(|r| r.initial_stable_s));
    let (m, s) = mean_std_of(runs.iter().map(|r| r.restable_s));
    let converged = runs
        .iter()
        .filter(|r| r.restable_s.is_some())
        .count()
        .to_string();
    w.write_record(["mean", "", &im, "", "", &m, &converged])?;
    w.write_record(["std", "", &is, "", "", &s, ""])?;
    w.flush().map_err(csv::Error::from)?;
    files.push(path);
    Ok(())
}

/// One cold-start run of the cycle engine.
#[derive(Debug, Clone)]
pub struct ColdRun {
    pub seed: u64,
    pub links: usize,
    pub degrees: DegreeStats,
    pub iterations: Option<u32>,
    pub trace: TraceLog,
}

pub fn cold_repetition(cfg: &Config, rep: u32) -> Result<ColdRun> {
    let seed = repetition_seed(cfg, rep);
    let topo = build_topology(cfg, seed)?;
    let truth: GroundTruth = compute_ground_truth(&topo);
    let degrees = truth.stats();
    let sim_cfg = crate::sim::SimConfig {
        seed,
        ..cfg.sim_config()
    };
    let mut sim = CycleSim::with_truth(&topo, truth, sim_cfg)?;
    let iterations = sim.run();
    Ok(ColdRun {
        seed,
        links: topo.len(),
        degrees,
        iterations,
        trace: sim.into_trace(),
    })
}

fn discovery_cold(cfg: &Config, out: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    let runs = run_reps(cfg, |r| cold_repetition(cfg, r))?;
    for (r, run) in runs.iter().enumerate() {
        let path = out.join(format!("trace_{r:03}.csv"));
        write_trace(&path, &run.trace)?;
        files.push(path);
    }
    let path = out.join("summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "repetition",
        "seed",
        "links",
        "mean_degree",
        "max_degree",
        "iterations",
        "converged",
    ])?;
    for (r, run) in runs.iter().enumerate() {
        w.write_record([
            r.to_string(),
            run.seed.to_string(),
            run.links.to_string(),
            run.degrees.mean.to_string(),
            run.degrees.max.to_string(),
            opt(run.iterations),
            run.iterations.is_some().to_string(),
        ])?;
    }
    let (m, s) = mean_std_of(runs.iter().map(|r| r.iterations.map(f64::from)));
    let (dm, ds) = mean_std_of(runs.iter().map(|r| Some(r.degrees.mean)));
    let converged = runs
        .iter()
        .filter(|r| r.iterations.is_some())
        .count()
        .to_string();
    w.write_record(["mean", "", "", &dm, "", &m, &converged])?;
    w.write_record(["std", "", "", &ds, "", &s, ""])?;
    w.flush().map_err(csv::Error::from)?;
    files.push(path);
    Ok(())
}

/// Which receivers each transmitter takes into account.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnowledgeMode {
    /// Candidates in the transmitter's important table at sample time.
    Discovered,
    /// All true candidates.
    Full,
    Empty,
}

impl KnowledgeMode {
    fn from_config(cfg: &Config) -> Self {
        match cfg.get("knowledge") {
            "full" => Self::Full,
            "empty" => Self::Empty,
            _ => Self::Discovered,
        }
    }
}

/// Knowledge each transmitter holds, taken from discovery state.
pub fn discovered_knowledge(n_links: usize, states: &[NodeState]) -> KnowledgeSet {
    KnowledgeSet::from_known_nodes(n_links, |a| {
        states[a.index()]
            .important
            .candidates()
            .iter()
            .map(|e| e.node)
            .collect::<Vec<_>>()
    })
}

/// One sample of an allocation time series.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocSample {
    pub time_s: f64,
    pub focus_links: usize,
    /// Focus-area nodes that do not yet know all their candidates.
    pub focus_nodes_missing: usize,
    /// Receivers known by focus transmitters, summed.
    pub known_receivers: usize,
    pub proposed_satisfied: usize,
    pub proposed_iterations: u32,
    pub proposed_converged: bool,
    pub random_satisfied: usize,
    pub selfish_satisfied: usize,
    /// Pre-existing links whose channel differs from the previous sample.
    pub frequency_changes: usize,
}

#[derive(Debug, Clone)]
pub struct AllocSeries {
    pub seed: u64,
    pub samples: Vec<AllocSample>,
    /// Time at which links were inserted, if any.
    pub inserted_at_s: Option<f64>,
}

/// Allocation quality over time while discovery runs.
///
/// At every sample the best-response dynamics restart from the same initial
/// allocation and update order, with the knowledge available at that moment.
/// With `insert`, that many links are added inside the focus area at
/// `insert_at_s`.
pub fn alloc_series(cfg: &Config, rep: u32, insert: bool) -> Result<AllocSeries> {
    let seed = repetition_seed(cfg, rep);
    let topo = build_topology(cfg, seed)?;
    let area = focus_area(cfg)?;
    let params = cfg.radio_params();
    params.validate()?;
    let mode = KnowledgeMode::from_config(cfg);
    let sim_cfg = crate::sim::SimConfig {
        seed,
        stop_when_stable: false,
        ..cfg.sim_config()
    };
    let mut sim = EventSim::new(topo, sim_cfg)?;
    let init_draw = KeyedDraw::new(Seed(seed), streams::ALLOCATION_INIT);
    let step = cfg.u32("sample_interval_s").max(1);
    let duration = cfg.u32("duration_s");
    let insert_at = insert.then(|| cfg.u32("insert_at_s"));
    let mut samples = Vec::new();
    let mut previous: Option<Vec<Option<u16>>> = None;
    let mut t = 0;
    while t <= duration {
        if insert_at == Some(t) {
            let n = cfg.usize("insert_links");
            let mut rng = Seed(seed).stream(streams::JOIN);
            let bounds = sim.topology().bounds;
            let region = area.unwrap_or(bounds);
            let specs = gen_link_specs(
                n,
                &region,
                &bounds,
                cfg.f64("max_link_distance_m"),
                cfg.receiver_placement(),
                &mut rng,
            )?;
            let specs = numbered(specs, sim.topology());
            let attach = attach_node(sim.topology(), &mut rng);
            sim.inject_links(&specs, attach, SimTime::from_secs(t))?;
        }
        sim.run_until(SimTime::from_secs(t));
        let topo = sim.topology();
        let truth = sim.truth();
        let n = topo.len();
        let focus = focus_links(area.as_ref(), topo);
        let knowledge = match mode {
            KnowledgeMode::Discovered => discovered_knowledge(n, sim.states()),
            KnowledgeMode::Full => KnowledgeSet::full(topo, truth),
            KnowledgeMode::Empty => KnowledgeSet::empty(n),
        };
        let initial = Allocation::random_full_power(n, &params, &init_draw);
        let (proposed, outcome) = run_best_response_dynamics(
            topo,
            initial.clone(),
            &knowledge,
            focus.clone(),
            &params,
            seed,
        )?;
        let random = random_baseline(topo, initial.clone(), focus.clone(), &params, seed)?;
        let selfish = selfish_baseline(topo, initial, focus.clone(), &params, seed)?;
        let channels = proposed.channel_numbers();
        let frequency_changes = previous
            .as_ref()
            .map_or(0, |p| frequency_change_count(&channels[..p.len()], p));
        let states = sim.states();
        let focus_nodes_missing = focus
            .iter()
            .flat_map(|&i| [transmitter_address(i), receiver_address(i)])
            .filter(|&a| states[a.index()].important.candidate_count() < truth.degree(a))
            .count();
        samples.push(AllocSample {
            time_s: f64::from(t),
            focus_links: focus.len(),
            focus_nodes_missing,
            known_receivers: focus.iter().map(|&i| knowledge.known(i).len()).sum(),
            proposed_satisfied: satisfied_links(topo, &proposed, &focus, &params),
            proposed_iterations: outcome.iterations,
            proposed_converged: outcome.converged,
            random_satisfied: satisfied_links(topo, &random, &focus, &params),
            selfish_satisfied: satisfied_links(topo, &selfish, &focus, &params),
            frequency_changes,
        });
        previous = Some(channels);
        t += step;
    }
    Ok(AllocSeries {
        seed,
        samples,
        inserted_at_s: insert_at.filter(|&a| a <= duration).map(f64::from),
    })
}

/// Frequency-change statistics around a link insertion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominoStats {
    /// Largest per-interval change count in the window before the insertion.
    pub steady_changes: usize,
    /// Changes in the interval ending at the insertion sample.
    pub insertion_changes: usize,
    /// Seconds from the insertion until the count stayed at or below the
    /// steady level, or `None` if it had not by the end of the series.
    pub settled_after_s: Option<f64>,
}

/// Evaluates a domino series. The steady level is taken from samples in
/// `[insert_at - window_s, insert_at)`.
pub fn domino_stats(series: &AllocSeries, window_s: f64) -> Option<DominoStats> {
    let at = series.inserted_at_s?;
    let samples = &series.samples;
    let steady_changes = samples
        .iter()
        .filter(|s| s.time_s > 0.0 && s.time_s >= at - window_s && s.time_s < at)
        .map(|s| s.frequency_changes)
        .max()?;
    let insertion_changes = samples.iter().find(|s| s.time_s == at)?.frequency_changes;
    let after: Vec<&AllocSample> = samples.iter().filter(|s| s.time_s >= at).collect();
    let settled_after_s = match after
        .iter()
        .rposition(|s| s.frequency_changes > steady_changes)
    {
        None => Some(0.0),
        Some(last) => after.get(last + 1).map(|s| s.time_s - at),
    };
    Some(DominoStats {
        steady_changes,
        insertion_changes,
        settled_after_s,
    })
}

fn alloc_over_time(cfg: &Config, out: &Path, files: &mut Vec<PathBuf>, insert: bool) -> Result<()> {
    let runs = run_reps(cfg, |r| alloc_series(cfg, r, insert))?;
    for (r, run) in runs.iter().enumerate() {
        let path = out.join(format!("series_{r:03}.csv"));
        let mut w = csv_writer(&path)?;
        w.write_record([
            "time_s",
            "focus_links",
            "focus_nodes_missing",
            "known_receivers",
            "proposed_satisfied",
            "proposed_iterations",
            "proposed_converged",
            "random_satisfied",
            "selfish_satisfied",
            "frequency_changes",
        ])?;
        for s in &run.samples {
            w.write_record([
                s.time_s.to_string(),
                s.focus_links.to_string(),
                s.focus_nodes_missing.to_string(),
                s.known_receivers.to_string(),
                s.proposed_satisfied.to_string(),
                s.proposed_iterations.to_string(),
                s.proposed_converged.to_string(),
                s.random_satisfied.to_string(),
                s.selfish_satisfied.to_string(),
                s.frequency_changes.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        files.push(path);
    }

    let path = out.join("summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "time_s",
        "proposed_mean",
        "proposed_std",
        "random_mean",
        "random_std",
        "selfish_mean",
        "selfish_std",
        "iterations_mean",
        "frequency_changes_mean",
        "focus_nodes_missing_mean",
    ])?;
    let len = runs.first().map_or(0, |r| r.samples.len());
    for i in 0..len {
        let col = |f: &dyn Fn(&AllocSample) -> f64| {
            mean_std_of(runs.iter().map(|r| Some(f(&r.samples[i]))))
        };
        let (pm, ps) = col(&|s| s.proposed_satisfied as f64);
        let (rm, rs) = col(&|s| s.random_satisfied as f64);
        let (sm, ss) = col(&|s| s.selfish_satisfied as f64);
        let (im, _) = col(&|s| f64::from(s.proposed_iterations));
        let (fm, _) = col(&|s| s.frequency_changes as f64);
        let (mm, _) = col(&|s| s.focus_nodes_missing as f64);
        w.write_record([
            runs[0].samples[i].time_s.to_string(),
            pm,
            ps,
            rm,
            rs,
            sm,
            ss,
            im,
            fm,
            mm,
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    files.push(path);

    if insert {
        let path = out.join("domino.csv");
        let mut w = csv_writer(&path)?;
        w.write_record([
            "repetition",
            "seed",
            "steady_changes",
            "insertion_changes",
            "settled_after_s",
        ])?;
        for (r, run) in runs.iter().enumerate() {
            let window = 6.0 * f64::from(cfg.u32("sample_interval_s").max(1));
            let st = domino_stats(run, window);
            w.write_record([
                r.to_string(),
                run.seed.to_string(),
                opt(st.map(|s| s.steady_changes)),
                opt(st.map(|s| s.insertion_changes)),
                opt(st.and_then(|s| s.settled_after_s)),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        files.push(path);
    }
    Ok(())
}
