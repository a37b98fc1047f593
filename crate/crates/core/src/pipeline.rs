//! End-to-end orchestration: parse, train or load a model, discover the
//! PMS, annotate, select, instrument and verify.
//!
//! Each stage is a plain function so that the CLI subcommands and
//! [`run_stages`] produce byte-identical artifacts from the same inputs.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::callgraph::{build_call_graph, CallGraph, CallGraphDoc};
use crate::classifier::{
    discover_pms, train_on_corpus, ClassifierError, FeatureLexicon, Labels, SvmModel, SvmParams,
};
use crate::corpus::{Corpus, MethodId};
use crate::defaults;
use crate::instrument::{instrument, InstrumentError, Manifest};
use crate::io::{self, IoError};
use crate::mapping::Layer1Map;
use crate::oal::{annotate, MethodAoMap, OalTable};
use crate::selector::{plan_hooks, HookPlan, SelectInputs, DEFAULT_CHAIN_CAP};
use crate::simulate::Scenario;
use crate::uppt::{parse_uppt, Uppt};
use crate::verify::{adversarial_suite, fuzz_scenarios, verify, Report, VerifyInputs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_STAGE_FAILURE: i32 = 3;
pub const EXIT_VIOLATIONS: i32 = 4;

pub const DEFAULT_FUZZ: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Parse,
    Train,
    Discover,
    Annotate,
    Select,
    Instrument,
    Verify,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Parse => "parse",
            Stage::Train => "train",
            Stage::Discover => "discover",
            Stage::Annotate => "annotate",
            Stage::Select => "select",
            Stage::Instrument => "instrument",
            Stage::Verify => "verify",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: malformed file, unknown word, missing artifact.
    Validation,
    /// A stage could not complete on valid input.
    Failure,
}

#[derive(Debug, Error)]
#[error("{stage} stage: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn validation(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError {
            stage,
            kind: ErrorKind::Validation,
            message: e.to_string(),
        }
    }

    pub fn failure(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError {
            stage,
            kind: ErrorKind::Failure,
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => EXIT_VALIDATION,
            ErrorKind::Failure => EXIT_STAGE_FAILURE,
        }
    }
}

/// Hyperparameter overrides on top of [`SvmParams::defaults_for`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SvmOverrides {
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub tol: Option<f64>,
    pub max_passes: Option<usize>,
}

impl SvmOverrides {
    pub fn params(&self, dim: usize, seed: u64) -> SvmParams {
        let mut p = SvmParams::defaults_for(dim);
        p.seed = seed;
        if let Some(c) = self.c {
            p.c = c;
        }
        if let Some(g) = self.gamma {
            p.gamma = g;
        }
        if let Some(t) = self.tol {
            p.tol = t;
        }
        if let Some(m) = self.max_passes {
            p.max_passes = m;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub seed: u64,
    pub svm: SvmOverrides,
    /// Number of seeded random scenarios added to the verify stage.
    pub fuzz: usize,
    /// Also run one witness scenario per non-allow UPPT row.
    pub adversarial: bool,
    pub closure: bool,
    pub chain_cap: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            seed: 0,
            svm: SvmOverrides::default(),
            fuzz: DEFAULT_FUZZ,
            adversarial: true,
            closure: false,
            chain_cap: DEFAULT_CHAIN_CAP,
        }
    }
}

/// Loaded inputs of a run.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub corpus: Corpus,
    pub lexicon: FeatureLexicon,
    pub labels: Option<Labels>,
    pub model: Option<SvmModel>,
    pub oal: OalTable,
    pub layer1: Layer1Map,
    pub uppt: Uppt,
    pub scenarios: Vec<Scenario>,
}

impl Inputs {
    /// Shipped sample corpus, labels and tables with one of the sample
    /// UPPTs.
    pub fn sample(uppt: Uppt) -> Self {
        Inputs {
            corpus: defaults::sample_corpus(),
            lexicon: defaults::lexicon(),
            labels: Some(defaults::labels()),
            model: None,
            oal: defaults::oal(),
            layer1: defaults::layer1(),
            uppt,
            scenarios: Vec::new(),
        }
    }
}

/// Every artifact a run produces.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub corpus: Corpus,
    pub model: SvmModel,
    pub pms: BTreeSet<MethodId>,
    pub graph: CallGraphDoc,
    pub aomap: MethodAoMap,
    pub plan: HookPlan,
    pub instrumented: Corpus,
    pub manifest: Manifest,
    pub report: Report,
}

impl Artifacts {
    pub fn exit_code(&self) -> i32 {
        if self.report.is_clean() {
            EXIT_OK
        } else {
            EXIT_VIOLATIONS
        }
    }
}

pub fn stage_train(
    corpus: &Corpus,
    labels: Option<&Labels>,
    lex: &FeatureLexicon,
    params: &SvmParams,
) -> Result<SvmModel, PipelineError> {
    let labels = labels.ok_or_else(|| {
        PipelineError::validation(Stage::Train, "no model given and no labels to train on")
    })?;
    train_on_corpus(corpus, labels, lex, params).map_err(|e| match e {
        ClassifierError::UnknownMethod(_) | ClassifierError::InvalidLabel(_) => {
            PipelineError::validation(Stage::Train, e)
        }
        _ => PipelineError::failure(Stage::Train, e),
    })
}

pub fn stage_discover(
    corpus: &Corpus,
    model: &SvmModel,
    lex: &FeatureLexicon,
) -> Result<BTreeSet<MethodId>, PipelineError> {
    discover_pms(corpus, model, lex).map_err(|e| match e {
        ClassifierError::LexiconMismatch { .. } => PipelineError::failure(
            Stage::Discover,
            format!("train and discover stages disagree on the lexicon: {e}"),
        ),
        _ => PipelineError::failure(Stage::Discover, e),
    })
}

pub fn stage_annotate(
    corpus: &Corpus,
    pms: &BTreeSet<MethodId>,
    oal: &OalTable,
) -> (CallGraph, MethodAoMap) {
    let g = build_call_graph(corpus);
    let aomap = annotate(corpus, &g, pms, oal);
    (g, aomap)
}

#[allow(clippy::too_many_arguments)]
pub fn stage_select(
    corpus: &Corpus,
    graph: &CallGraph,
    aomap: &MethodAoMap,
    oal: &OalTable,
    layer1: &Layer1Map,
    uppt: &Uppt,
    opt: &Options,
) -> Result<HookPlan, PipelineError> {
    plan_hooks(&SelectInputs {
        corpus,
        graph,
        aomap,
        oal,
        layer1,
        uppt,
        closure: opt.closure,
        chain_cap: opt.chain_cap,
    })
    .map_err(|e| PipelineError::failure(Stage::Select, e))
}

pub fn stage_instrument(
    corpus: &Corpus,
    plan: &HookPlan,
) -> Result<(Corpus, Manifest), PipelineError> {
    instrument(corpus, plan).map_err(|e| match e {
        InstrumentError::FingerprintMismatch { .. } => PipelineError::failure(
            Stage::Instrument,
            format!("select and instrument stages disagree on the corpus: {e}"),
        ),
        _ => PipelineError::failure(Stage::Instrument, e),
    })
}

/// Scenario list for the verify stage: given scenarios, then the
/// adversarial suite, then `fuzz` seeded random ones.
pub fn verify_scenarios(
    corpus: &Corpus,
    uppt: &Uppt,
    given: &[Scenario],
    opt: &Options,
) -> Vec<Scenario> {
    let mut all = given.to_vec();
    if opt.adversarial {
        all.extend(adversarial_suite(corpus, uppt));
    }
    all.extend(fuzz_scenarios(corpus, uppt, opt.fuzz, opt.seed));
    all
}

#[allow(clippy::too_many_arguments)]
pub fn stage_verify(
    instrumented: &Corpus,
    plan: &HookPlan,
    uppt: &Uppt,
    aomap: &MethodAoMap,
    oal: &OalTable,
    layer1: &Layer1Map,
    scenarios: &[Scenario],
    seed: u64,
) -> Result<Report, PipelineError> {
    verify(
        &VerifyInputs {
            corpus: instrumented,
            plan,
            uppt,
            aomap,
            oal,
            layer1,
            seed,
        },
        scenarios,
    )
    .map_err(|e| PipelineError::validation(Stage::Verify, e))
}

/// Runs every stage in memory. A loaded model takes precedence over labels.
pub fn run_stages(inp: &Inputs, opt: &Options) -> Result<Artifacts, PipelineError> {
    let model = match &inp.model {
        Some(m) => m.clone(),
        None => {
            let params = opt.svm.params(inp.lexicon.len(), opt.seed);
            stage_train(&inp.corpus, inp.labels.as_ref(), &inp.lexicon, &params)?
        }
    };
    let pms = stage_discover(&inp.corpus, &model, &inp.lexicon)?;
    let (graph, aomap) = stage_annotate(&inp.corpus, &pms, &inp.oal);
    let plan = stage_select(
        &inp.corpus,
        &graph,
        &aomap,
        &inp.oal,
        &inp.layer1,
        &inp.uppt,
        opt,
    )?;
    let (instrumented, manifest) = stage_instrument(&inp.corpus, &plan)?;
    let scenarios = verify_scenarios(&inp.corpus, &inp.uppt, &inp.scenarios, opt);
    let report = stage_verify(
        &instrumented,
        &plan,
        &inp.uppt,
        &aomap,
        &inp.oal,
        &inp.layer1,
        &scenarios,
        opt.seed,
    )?;
    Ok(Artifacts {
        corpus: inp.corpus.clone(),
        model,
        pms,
        graph: graph.to_doc(),
        aomap,
        plan,
        instrumented,
        manifest,
        report,
    })
}

/// File locations for [`run_pipeline`]. `None` selects the shipped data.
#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub oal: Option<PathBuf>,
    pub layer1: Option<PathBuf>,
    /// A UPPT file or the name of a shipped sample UPPT.
    pub uppt: String,
    pub scenarios: Option<PathBuf>,
    pub out: PathBuf,
    pub options: Options,
}

fn load<T>(stage: Stage, r: Result<T, IoError>) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::validation(stage, e))
}

pub fn load_uppt(spec: &str) -> Result<Uppt, PipelineError> {
    if let Some(u) = defaults::sample_uppt(spec) {
        return Ok(u);
    }
    let text = load(Stage::Select, io::read_text(Path::new(spec)))?;
    parse_uppt(&text).map_err(|e| PipelineError::validation(Stage::Select, format!("{spec}: {e}")))
}

pub fn load_layer1(path: Option<&Path>, oal: &OalTable) -> Result<Layer1Map, PipelineError> {
    match path {
        None => Ok(defaults::layer1()),
        Some(p) => {
            let text = load(Stage::Select, io::read_text(p))?;
            Layer1Map::from_json(&text, oal).map_err(|e| {
                PipelineError::validation(Stage::Select, format!("{}: {e}", p.display()))
            })
        }
    }
}

pub fn load_oal(path: Option<&Path>) -> Result<OalTable, PipelineError> {
    path.map_or_else(
        || Ok(defaults::oal()),
        |p| load(Stage::Annotate, io::read_json(p)),
    )
}

pub fn load_lexicon(path: Option<&Path>) -> Result<FeatureLexicon, PipelineError> {
    path.map_or_else(
        || Ok(defaults::lexicon()),
        |p| load(Stage::Train, io::read_json(p)),
    )
}

/// Scenarios from a directory of JSON files (sorted by name) or from one
/// file holding a scenario or an array of them.
pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>, PipelineError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<Scenario>),
        One(Scenario),
    }
    let files: Vec<PathBuf> = if path.is_dir() {
        let rd = std::fs::read_dir(path).map_err(|e| {
            PipelineError::validation(Stage::Verify, format!("{}: {e}", path.display()))
        })?;
        let mut v: Vec<PathBuf> = rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    let mut out = Vec::new();
    for f in files {
        match load(Stage::Verify, io::read_json::<OneOrMany>(&f))? {
            OneOrMany::Many(v) => out.extend(v),
            OneOrMany::One(s) => out.push(s),
        }
    }
    Ok(out)
}

pub fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs, PipelineError> {
    let corpus = match &cfg.corpus {
        Some(p) => load(Stage::Parse, io::read_corpus(p))?,
        None => defaults::sample_corpus(),
    };
    let lexicon = load_lexicon(cfg.lexicon.as_deref())?;
    let labels = match (&cfg.labels, &cfg.corpus) {
        (Some(p), _) => Some(load(Stage::Train, io::read_json(p))?),
        (None, None) => Some(defaults::labels()),
        (None, Some(_)) => None,
    };
    let model = cfg
        .model
        .as_deref()
        .map(|p| load(Stage::Train, io::read_json(p)))
        .transpose()?;
    let oal = load_oal(cfg.oal.as_deref())?;
    let layer1 = load_layer1(cfg.layer1.as_deref(), &oal)?;
    let uppt = load_uppt(&cfg.uppt)?;
    let scenarios = cfg
        .scenarios
        .as_deref()
        .map(load_scenarios)
        .transpose()?
        .unwrap_or_default();
    Ok(Inputs {
        corpus,
        lexicon,
        labels,
        model,
        oal,
        layer1,
        uppt,
        scenarios,
    })
}

/// Artifact file names inside the output directory.
pub mod files {
    pub const CORPUS: &str = "corpus.json";
    pub const MODEL: &str = "model.json";
    pub const PMS: &str = "pms.json";
    pub const CALLGRAPH: &str = "callgraph.json";
    pub const AO_MAP: &str = "ao_map.json";
    pub const PLAN: &str = "plan.json";
    pub const INSTRUMENTED: &str = "instrumented";
    pub const MANIFEST: &str = "manifest.json";
    pub const REPORT: &str = "report.json";
}

pub fn write_artifacts(dir: &Path, a: &Artifacts) -> Result<(), IoError> {
    io::write_json(&dir.join(files::CORPUS), &a.corpus)?;
    io::write_json(&dir.join(files::MODEL), &a.model)?;
    io::write_json(&dir.join(files::PMS), &a.pms)?;
    io::write_json(&dir.join(files::CALLGRAPH), &a.graph)?;
    io::write_json(&dir.join(files::AO_MAP), &a.aomap)?;
    io::write_json(&dir.join(files::PLAN), &a.plan)?;
    io::write_corpus_dir(&dir.join(files::INSTRUMENTED), &a.instrumented)?;
    io::write_json(&dir.join(files::MANIFEST), &a.manifest)?;
    io::write_json(&dir.join(files::REPORT), &a.report)?;
    Ok(())
}

/// Loads inputs, runs every stage and writes all artifacts to `cfg.out`.
/// Violations are not an error; check [`Artifacts::exit_code`].
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Artifacts, PipelineError> {
    let inp = load_inputs(cfg)?;
    let a = run_stages(&inp, &cfg.options)?;
    write_artifacts(&cfg.out, &a).map_err(|e| PipelineError::failure(Stage::Verify, e))?;
    Ok(a)
}
