//! `hookplace` command-line driver.
//!
//! Every subcommand reads and writes the same artifact formats as
//! `hookplace pipeline`, so a run can be replayed stage by stage.

use std::collections::BTreeSet;
use std::io::{self as stdio, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hookplace::callgraph::build_call_graph;
use hookplace::classifier::{
    cross_validate, cross_validate_against, training_set, Labels, SvmModel,
};
use hookplace::corpus::{Corpus, MethodId};
use hookplace::io::{self, IoError};
use hookplace::oal::{annotate, MethodAoMap};
use hookplace::pipeline::{
    self as pl, files, Options, PipelineConfig, PipelineError, Stage, SvmOverrides,
};
use hookplace::selector::{HookPlan, DEFAULT_CHAIN_CAP};
use hookplace::synth::generate_synthetic_corpus;
use hookplace::uppt::wizard::{run_wizard, StdioDriver, WizardError};

#[derive(Parser)]
#[command(
    name = "hookplace",
    version,
    about = "Context-aware hook placement over a mini-framework corpus"
)]
struct Cli {
    /// Seed for every random choice (SMO, cross-validation, fuzzing, obfuscation).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file or directory, depending on the subcommand. JSON goes to
    /// stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress the summary line on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Hyper {
    /// SVM box constraint.
    #[arg(long = "C")]
    c: Option<f64>,
    /// RBF kernel width; defaults to 1/|lexicon|.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_passes: Option<usize>,
}

impl Hyper {
    fn overrides(&self) -> SvmOverrides {
        SvmOverrides {
            c: self.c,
            gamma: self.gamma,
            tol: self.tol,
            max_passes: self.max_passes,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a directory of .mfw files into corpus JSON.
    Parse { dir: PathBuf },
    /// Generate a labelled synthetic corpus into the --out directory.
    GenCorpus {
        #[arg(long, default_value_t = 1000)]
        methods: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
    /// Train the method classifier.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[command(flatten)]
        hyper: Hyper,
    },
    /// K-fold cross-validation of the classifier.
    Crossval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Score predictions against these labels instead of the training ones.
        #[arg(long)]
        eval_labels: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[command(flatten)]
        hyper: Hyper,
    },
    /// Predict the potential method set with a trained model.
    Discover {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Map methods to abstract operations.
    Annotate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        pms: PathBuf,
        #[arg(long)]
        oal: Option<PathBuf>,
        /// Also write the call graph here.
        #[arg(long)]
        callgraph: Option<PathBuf>,
    },
    /// Choose hook locations for a UPPT.
    Select {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        ao_map: PathBuf,
        /// UPPT file or shipped sample name.
        #[arg(long)]
        uppt: String,
        #[arg(long)]
        oal: Option<PathBuf>,
        #[arg(long)]
        layer1: Option<PathBuf>,
        /// Select over the call closure of #TM instead of its induced sub-graph.
        #[arg(long)]
        closure: bool,
        #[arg(long, default_value_t = DEFAULT_CHAIN_CAP)]
        chain_cap: usize,
    },
    /// Insert hooks; writes instrumented/ and manifest.json under --out.
    Instrument {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Simulate scenarios against an instrumented corpus and check for mistakes.
    Verify {
        #[arg(long)]
        corpus_dir: PathBuf,
        #[arg(long)]
        uppt: String,
        #[arg(long)]
        plan: PathBuf,
        /// Directory of scenario JSON files, or one file.
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long, default_value_t = pl::DEFAULT_FUZZ)]
        fuzz: usize,
        /// Skip the per-row witness scenarios.
        #[arg(long)]
        no_adversarial: bool,
        /// Operation map from `annotate`; without it every method counts as a PMS member.
        #[arg(long)]
        ao_map: Option<PathBuf>,
        #[arg(long)]
        oal: Option<PathBuf>,
        #[arg(long)]
        layer1: Option<PathBuf>,
        /// Report path; same as --out.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build a UPPT interactively on stdin/stdout.
    Wizard,
    /// Run every stage and write all artifacts to the --out directory.
    Pipeline {
        /// Corpus directory or corpus.json; the shipped sample when omitted.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        oal: Option<PathBuf>,
        #[arg(long)]
        layer1: Option<PathBuf>,
        /// UPPT file or shipped sample name.
        #[arg(long)]
        uppt: String,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long, default_value_t = pl::DEFAULT_FUZZ)]
        fuzz: usize,
        #[arg(long)]
        no_adversarial: bool,
        #[arg(long)]
        closure: bool,
        #[arg(long, default_value_t = DEFAULT_CHAIN_CAP)]
        chain_cap: usize,
        #[command(flatten)]
        hyper: Hyper,
    },
}

type Outcome = Result<i32, PipelineError>;

fn v<T>(stage: Stage, r: Result<T, IoError>) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::validation(stage, e))
}

fn emit<T: serde::Serialize + ?Sized>(
    out: Option<&Path>,
    stage: Stage,
    value: &T,
) -> Result<(), PipelineError> {
    match out {
        Some(p) => v(stage, io::write_json(p, value)),
        None => {
            print!("{}", io::to_json_string(value));
            Ok(())
        }
    }
}

fn require_out(out: Option<&Path>, stage: Stage) -> Result<&Path, PipelineError> {
    out.ok_or_else(|| PipelineError::validation(stage, "--out <dir> is required"))
}

fn run(cli: Cli) -> Outcome {
    let out = cli.out.as_deref();
    let say = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    match cli.cmd {
        Cmd::Parse { dir } => {
            let c = v(Stage::Parse, io::read_corpus(&dir))?;
            emit(out, Stage::Parse, &c)?;
            say(format!(
                "parsed {} units, {} methods",
                c.units().len(),
                c.method_count()
            ));
        }
        Cmd::GenCorpus { methods, noise } => {
            if methods < hookplace::synth::MIN_METHODS || !(0.0..0.5).contains(&noise) {
                return Err(PipelineError::validation(
                    Stage::Parse,
                    format!(
                        "need --methods >= {} and 0 <= --noise < 0.5",
                        hookplace::synth::MIN_METHODS
                    ),
                ));
            }
            let dir = require_out(out, Stage::Parse)?;
            let s = generate_synthetic_corpus(cli.seed, methods, noise);
            v(Stage::Parse, io::write_corpus_dir(dir, &s.corpus))?;
            v(
                Stage::Parse,
                io::write_json(&dir.join("labels.json"), &s.labels),
            )?;
            v(
                Stage::Parse,
                io::write_json(&dir.join("clean_labels.json"), &s.clean_labels),
            )?;
            v(Stage::Parse, io::write_json(&dir.join("oal.json"), &s.oal))?;
            let pos = s.labels.values().filter(|&&l| l == 1).count();
            say(format!(
                "generated {methods} methods, {pos} labelled positive"
            ));
        }
        Cmd::Train {
            corpus,
            labels,
            lexicon,
            hyper,
        } => {
            let c = v(Stage::Parse, io::read_corpus(&corpus))?;
            let labels: Labels = v(Stage::Train, io::read_json(&labels))?;
            let lex = pl::load_lexicon(lexicon.as_deref())?;
            let params = hyper.overrides().params(lex.len(), cli.seed);
            let model = pl::stage_train(&c, Some(&labels), &lex, &params)?;
            emit(out, Stage::Train, &model)?;
            say(format!(
                "trained on {} methods, {} support vectors",
                labels.len(),
                model.support_vectors.len()
            ));
        }
        Cmd::Crossval {
            corpus,
            labels,
            eval_labels,
            lexicon,
            folds,
            hyper,
        } => {
            let c = v(Stage::Parse, io::read_corpus(&corpus))?;
            let labels: Labels = v(Stage::Train, io::read_json(&labels))?;
            let lex = pl::load_lexicon(lexicon.as_deref())?;
            let params = hyper.overrides().params(lex.len(), cli.seed);
            let data = training_set(&c, &labels, &lex)
                .map_err(|e| PipelineError::validation(Stage::Train, e))?;
            let m = match eval_labels {
                Some(p) => {
                    let eval: Labels = v(Stage::Train, io::read_json(&p))?;
                    let ys = labels
                        .keys()
                        .map(|id| match eval.get(id) {
                            Some(1) => Ok(1),
                            Some(0) => Ok(-1),
                            _ => Err(PipelineError::validation(
                                Stage::Train,
                                format!("no 0/1 evaluation label for {id}"),
                            )),
                        })
                        .collect::<Result<Vec<i8>, _>>()?;
                    cross_validate_against(&data, &ys, folds, &params, cli.seed)
                }
                None => cross_validate(&data, folds, &params, cli.seed),
            }
            .map_err(|e| PipelineError::failure(Stage::Train, e))?;
            emit(out, Stage::Train, &m)?;
            say(format!(
                "{folds}-fold precision {:.4} recall {:.4}",
                m.precision, m.recall
            ));
        }
        Cmd::Discover {
            corpus,
            model,
            lexicon,
        } => {
            let c = v(Stage::Parse, io::read_corpus(&corpus))?;
            let model: SvmModel = v(Stage::Discover, io::read_json(&model))?;
            let lex = pl::load_lexicon(lexicon.as_deref())?;
            let pms = pl::stage_discover(&c, &model, &lex)?;
            emit(out, Stage::Discover, &pms)?;
            say(format!(
                "PMS has {} of {} methods",
                pms.len(),
                c.method_count()
            ));
        }
        Cmd::Annotate {
            corpus,
            pms,
            oal,
            callgraph,
        } => {
            let c = v(Stage::Parse, io::read_corpus(&corpus))?;
            let pms: BTreeSet<MethodId> = v(Stage::Annotate, io::read_json(&pms))?;
            let oal = pl::load_oal(oal.as_deref())?;
            let (g, aomap) = pl::stage_annotate(&c, &pms, &oal);
            if let Some(p) = callgraph {
                v(Stage::Annotate, io::write_json(&p, &g.to_doc()))?;
            }
            emit(out, Stage::Annotate, &aomap)?;
            let with_ops = aomap.iter().filter(|(_, a)| !a.ops.is_empty()).count();
            say(format!("{with_ops} methods perform at least one operation"));
        }
        Cmd::Select {
            corpus,
            ao_map,
            uppt,
            oal,
            layer1,
            closure,
            chain_cap,
        } => {
            let c = v(Stage::Parse, io::read_corpus(&corpus))?;
            let aomap: MethodAoMap = v(Stage::Select, io::read_json(&ao_map))?;
            let oal = pl::load_oal(oal.as_deref())?;
            let l1 = pl::load_layer1(layer1.as_deref(), &oal)?;
            let u = pl::load_uppt(&uppt)?;
            let g = build_call_graph(&c);
            let opt = Options {
                closure,
                chain_cap,
                ..Options::default()
            };
            let plan = pl::stage_select(&c, &g, &aomap, &oal, &l1, &u, &opt)?;
            emit(out, Stage::Select, &plan)?;
            for w in &plan.warnings {
                say(format!("warning: {w}"));
            }
            say(format!("{} hooks selected", plan.entries.len()));
        }
        Cmd::Instrument { corpus, plan } => {
            let dir = require_out(out, Stage::Instrument)?;
            let c = v(Stage::Parse, io::read_corpus(&corpus))?;
            let plan: HookPlan = v(Stage::Instrument, io::read_json(&plan))?;
            let (ic, manifest) = pl::stage_instrument(&c, &plan)?;
            v(
                Stage::Instrument,
                io::write_corpus_dir(&dir.join(files::INSTRUMENTED), &ic),
            )?;
            v(
                Stage::Instrument,
                io::write_json(&dir.join(files::MANIFEST), &manifest),
            )?;
            for w in &manifest.warnings {
                say(format!("warning: {w}"));
            }
            say(format!("placed {} hooks", manifest.entries.len()));
        }
        Cmd::Verify {
            corpus_dir,
            uppt,
            plan,
            scenarios,
            fuzz,
            no_adversarial,
            ao_map,
            oal,
            layer1,
            report,
        } => {
            let c: Corpus = v(Stage::Parse, io::read_corpus(&corpus_dir))?;
            let u = pl::load_uppt(&uppt)?;
            let plan: HookPlan = v(Stage::Verify, io::read_json(&plan))?;
            let oal = pl::load_oal(oal.as_deref())?;
            let l1 = pl::load_layer1(layer1.as_deref(), &oal)?;
            let aomap: MethodAoMap = match ao_map {
                Some(p) => v(Stage::Verify, io::read_json(&p))?,
                None => {
                    let all: BTreeSet<MethodId> = c.method_ids().into_iter().collect();
                    annotate(&c, &build_call_graph(&c), &all, &oal)
                }
            };
            let given = scenarios
                .as_deref()
                .map(pl::load_scenarios)
                .transpose()?
                .unwrap_or_default();
            let opt = Options {
                seed: cli.seed,
                fuzz,
                adversarial: !no_adversarial,
                ..Options::default()
            };
            let all = pl::verify_scenarios(&c, &u, &given, &opt);
            let r = pl::stage_verify(&c, &plan, &u, &aomap, &oal, &l1, &all, cli.seed)?;
            emit(report.as_deref().or(out), Stage::Verify, &r)?;
            say(format!(
                "{} scenarios: {} bypass, {} useless, {} isolation",
                r.scenarios,
                r.bypass.len(),
                r.useless.len(),
                r.isolation.len()
            ));
            return Ok(if r.is_clean() {
                pl::EXIT_OK
            } else {
                pl::EXIT_VIOLATIONS
            });
        }
        Cmd::Wizard => {
            let stdin = stdio::stdin();
            let mut d = StdioDriver::new(BufReader::new(stdin.lock()), stdio::stderr());
            let u = run_wizard(&mut d).map_err(|e| match e {
                WizardError::Invalid(_) => PipelineError::failure(Stage::Select, e),
                _ => PipelineError::validation(Stage::Select, e),
            })?;
            emit(out, Stage::Select, &u)?;
            say(format!("UPPT with {} rows", u.rows().len()));
        }
        Cmd::Pipeline {
            corpus,
            labels,
            model,
            lexicon,
            oal,
            layer1,
            uppt,
            scenarios,
            fuzz,
            no_adversarial,
            closure,
            chain_cap,
            hyper,
        } => {
            let cfg = PipelineConfig {
                corpus,
                lexicon,
                labels,
                model,
                oal,
                layer1,
                uppt,
                scenarios,
                out: require_out(out, Stage::Parse)?.to_path_buf(),
                options: Options {
                    seed: cli.seed,
                    svm: hyper.overrides(),
                    fuzz,
                    adversarial: !no_adversarial,
                    closure,
                    chain_cap,
                },
            };
            let a = pl::run_pipeline(&cfg)?;
            for w in a.plan.warnings.iter().chain(&a.manifest.warnings) {
                say(format!("warning: {w}"));
            }
            say(format!(
                "PMS {} / {} methods, {} hooks, {} scenarios: {} bypass, {} useless, {} isolation",
                a.pms.len(),
                a.corpus.method_count(),
                a.plan.entries.len(),
                a.report.scenarios,
                a.report.bypass.len(),
                a.report.useless.len(),
                a.report.isolation.len()
            ));
            return Ok(a.exit_code());
        }
    }
    Ok(pl::EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
