//! Experiment protocol descriptions and their file format.
//!
//! A protocol file is line-oriented `key value...` text; `#` starts a
//! comment. Unknown keys are errors — a typo must not silently fall back
//! to a default. Example:
//!
//! ```text
//! network ../networks/alarm.bif
//! name alarm
//! hypothesis natural
//! evidence natural
//! draws 10
//! repetitions 5
//! seed 20260823
//! solvers map ann mfe mfe+
//! table-budget 1000
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::engine::ModeChoice;
use crate::error::{Error, Result};
use crate::solvers::{SamplingMeasure, SolverKind, DEFAULT_MFE_SAMPLES};

/// How to pick the hypothesis or evidence variable set of a query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetSpec {
    /// The network's conventional diagnostic partition (supported for
    /// networks shipping one, i.e. the 37-variable monitoring network).
    Natural,
    /// The first `k` parentless variables, ascending by id.
    Roots(usize),
    /// Every leaf (childless variable with at least one parent).
    Leaves,
    /// Explicit variable names.
    Names(Vec<String>),
}

/// Whether relevance tables are recomputed per evidence draw or built
/// once from the first draw and reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMode {
    PerDraw,
    Shared,
}

/// Distribution of the random evidence assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvidenceDist {
    /// Forward sampling of the network restricted to the evidence
    /// variables; drawn evidence always has positive probability.
    Ancestral,
    /// Independent uniform states; may have zero probability under
    /// deterministic networks.
    Uniform,
}

/// Optional overrides of the size-derived annealing schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AnnealOverrides {
    pub t0: Option<f64>,
    pub cooling: Option<f64>,
    pub steps_per_temp: Option<usize>,
    pub t_min: Option<f64>,
    pub restarts: Option<usize>,
}

/// A full experiment description: which network, which query family,
/// which solvers, and every tunable the harness honours.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    /// Label used in records and reports.
    pub name: String,
    /// Network file, resolved relative to the protocol file on load.
    pub network_path: PathBuf,
    pub hypothesis: SetSpec,
    pub evidence: SetSpec,
    pub draws: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub solvers: Vec<SolverKind>,
    /// MFE iterations (Algorithm N) per solver call.
    pub n_samples: usize,
    /// Relevance threshold for table-based partitions.
    pub threshold: f64,
    /// Samples per variable when precomputing relevance tables.
    pub table_budget: u32,
    pub table_mode: TableMode,
    pub evidence_dist: EvidenceDist,
    /// Determinism-patch epsilon for the MFE-family graph.
    pub epsilon: f64,
    pub mfe_sampling: SamplingMeasure,
    pub mode: ModeChoice,
    pub cell_budget: Option<u64>,
    pub anneal: AnnealOverrides,
}

impl Protocol {
    /// A protocol with every tunable at its default, ready for overrides.
    pub fn new(
        name: impl Into<String>,
        network_path: impl Into<PathBuf>,
        hypothesis: SetSpec,
        evidence: SetSpec,
        solvers: Vec<SolverKind>,
    ) -> Protocol {
        Protocol {
            name: name.into(),
            network_path: network_path.into(),
            hypothesis,
            evidence,
            draws: 10,
            repetitions: 5,
            seed: 0,
            solvers,
            n_samples: DEFAULT_MFE_SAMPLES,
            threshold: 0.1,
            table_budget: 1000,
            table_mode: TableMode::PerDraw,
            evidence_dist: EvidenceDist::Ancestral,
            epsilon: 1e-9,
            mfe_sampling: SamplingMeasure::Uniform,
            mode: ModeChoice::Auto,
            cell_budget: None,
            anneal: AnnealOverrides::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::validation("protocol needs at least one evidence draw"));
        }
        if self.repetitions == 0 {
            return Err(Error::validation("protocol needs at least one repetition"));
        }
        if self.solvers.is_empty() {
            return Err(Error::validation("protocol needs at least one solver"));
        }
        for (i, s) in self.solvers.iter().enumerate() {
            if self.solvers[..i].contains(s) {
                return Err(Error::validation(format!("solver `{s}` listed twice")));
            }
        }
        if self.n_samples == 0 {
            return Err(Error::validation("n-samples must be positive"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::validation("threshold must lie in [0, 1]"));
        }
        if self.table_budget == 0 {
            return Err(Error::validation("table-budget must be positive"));
        }
        Ok(())
    }
}

impl FromStr for SetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<SetSpec> {
        parse_set_spec(s, 1)
    }
}

impl FromStr for TableMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<TableMode> {
        match s {
            "per-draw" => Ok(TableMode::PerDraw),
            "shared" => Ok(TableMode::Shared),
            _ => Err(Error::validation(format!(
                "bad table mode `{s}` (expected per-draw or shared)"
            ))),
        }
    }
}

impl FromStr for EvidenceDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<EvidenceDist> {
        match s {
            "ancestral" => Ok(EvidenceDist::Ancestral),
            "uniform" => Ok(EvidenceDist::Uniform),
            _ => Err(Error::validation(format!(
                "bad evidence distribution `{s}` (expected ancestral or uniform)"
            ))),
        }
    }
}

fn parse_set_spec(rest: &str, line: usize) -> Result<SetSpec> {
    let rest = rest.trim();
    if rest == "natural" {
        return Ok(SetSpec::Natural);
    }
    if rest == "leaves" {
        return Ok(SetSpec::Leaves);
    }
    if let Some(k) = rest.strip_prefix("roots:") {
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| Error::parse_at(line, format!("bad root count `{k}`")))?;
        if k == 0 {
            return Err(Error::parse_at(line, "root count must be positive"));
        }
        return Ok(SetSpec::Roots(k));
    }
    if let Some(names) = rest.strip_prefix("names ") {
        let names: Vec<String> = names
            .split(',')
            .map(|n| n.trim().to_string())
            .filter(|n| !n.is_empty())
            .collect();
        if names.is_empty() {
            return Err(Error::parse_at(line, "empty name list"));
        }
        return Ok(SetSpec::Names(names));
    }
    Err(Error::parse_at(
        line,
        format!("expected `natural`, `leaves`, `roots:<k>` or `names ...`, found `{rest}`"),
    ))
}

/// Parse protocol text; `base` is the directory the network path is
/// resolved against (the protocol file's directory).
pub fn parse_protocol(text: &str, base: &Path) -> Result<Protocol> {
    let mut network: Option<PathBuf> = None;
    let mut name: Option<String> = None;
    let mut hypothesis: Option<SetSpec> = None;
    let mut evidence: Option<SetSpec> = None;
    let mut solvers: Option<Vec<SolverKind>> = None;
    // start from defaults and overwrite as keys appear
    let mut p = Protocol::new("", "", SetSpec::Leaves, SetSpec::Leaves, Vec::new());

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = match line.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (line, ""),
        };
        if rest.is_empty() {
            return Err(Error::parse_at(line_no, format!("`{key}` needs a value")));
        }
        let bad = |what: &str| Error::parse_at(line_no, format!("bad {what} `{rest}`"));
        match key {
            "network" => network = Some(base.join(rest)),
            "name" => name = Some(rest.to_string()),
            "hypothesis" => hypothesis = Some(parse_set_spec(rest, line_no)?),
            "evidence" => evidence = Some(parse_set_spec(rest, line_no)?),
            "draws" => p.draws = rest.parse().map_err(|_| bad("draw count"))?,
            "repetitions" => p.repetitions = rest.parse().map_err(|_| bad("repetition count"))?,
            "seed" => p.seed = rest.parse().map_err(|_| bad("seed"))?,
            "solvers" => {
                let list: Result<Vec<SolverKind>> = rest
                    .split_whitespace()
                    .map(|s| {
                        SolverKind::from_str(s)
                            .map_err(|_| Error::parse_at(line_no, format!("unknown solver `{s}`")))
                    })
                    .collect();
                solvers = Some(list?);
            }
            "n-samples" => p.n_samples = rest.parse().map_err(|_| bad("sample count"))?,
            "threshold" => p.threshold = rest.parse().map_err(|_| bad("threshold"))?,
            "table-budget" => p.table_budget = rest.parse().map_err(|_| bad("table budget"))?,
            "table-mode" => {
                p.table_mode = match rest {
                    "per-draw" => TableMode::PerDraw,
                    "shared" => TableMode::Shared,
                    _ => return Err(bad("table mode")),
                }
            }
            "evidence-dist" => {
                p.evidence_dist = match rest {
                    "ancestral" => EvidenceDist::Ancestral,
                    "uniform" => EvidenceDist::Uniform,
                    _ => return Err(bad("evidence distribution")),
                }
            }
            "epsilon" => p.epsilon = rest.parse().map_err(|_| bad("epsilon"))?,
            "mfe-sampling" => {
                p.mfe_sampling = match rest {
                    "uniform" => SamplingMeasure::Uniform,
                    "prior" => SamplingMeasure::Prior,
                    _ => return Err(bad("sampling measure")),
                }
            }
            "log-space" => {
                p.mode = match rest {
                    "auto" => ModeChoice::Auto,
                    "on" => ModeChoice::Log,
                    "off" => ModeChoice::Linear,
                    _ => return Err(bad("log-space setting")),
                }
            }
            "cell-budget" => {
                p.cell_budget = Some(rest.parse().map_err(|_| bad("cell budget"))?)
            }
            "anneal-t0" => p.anneal.t0 = Some(rest.parse().map_err(|_| bad("temperature"))?),
            "anneal-cooling" => {
                p.anneal.cooling = Some(rest.parse().map_err(|_| bad("cooling rate"))?)
            }
            "anneal-steps" => {
                p.anneal.steps_per_temp = Some(rest.parse().map_err(|_| bad("step count"))?)
            }
            "anneal-tmin" => p.anneal.t_min = Some(rest.parse().map_err(|_| bad("temperature"))?),
            "anneal-restarts" => {
                p.anneal.restarts = Some(rest.parse().map_err(|_| bad("restart count"))?)
            }
            _ => return Err(Error::parse_at(line_no, format!("unknown key `{key}`"))),
        }
    }

    p.network_path = network.ok_or_else(|| Error::validation("protocol is missing `network`"))?;
    p.hypothesis =
        hypothesis.ok_or_else(|| Error::validation("protocol is missing `hypothesis`"))?;
    p.evidence = evidence.ok_or_else(|| Error::validation("protocol is missing `evidence`"))?;
    p.solvers = solvers.ok_or_else(|| Error::validation("protocol is missing `solvers`"))?;
    p.name = match name {
        Some(n) => n,
        None => p
            .network_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "unnamed".to_string()),
    };
    p.validate()?;
    Ok(p)
}

/// Load a protocol from disk; the network path inside is resolved
/// relative to the protocol file's directory.
pub fn load_protocol(path: &Path) -> Result<Protocol> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_protocol(&text, base)
}
