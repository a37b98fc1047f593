//! Three-step elicitation of a UPPT: pick resources, pick control measures
//! for each picked resource, then describe the context of each measure.

use std::io::{BufRead, Write};

use thiserror::Error;

use super::{
    Clock, ContextSpec, Control, Resource, StatusSpec, TimeWindow, Uppt, UpptError, UpptRow,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WizardError {
    #[error("no resources selected")]
    NoResources,
    #[error("aborted by user")]
    Aborted,
    #[error(transparent)]
    Invalid(#[from] UpptError),
}

/// Source of answers. `ask` returns `None` at end of input.
pub trait PromptDriver {
    fn ask(&mut self, prompt: &str) -> Option<String>;

    /// Informational output that expects no answer.
    fn say(&mut self, message: &str);
}

/// Answers from a fixed script; records every prompt and message.
#[derive(Debug, Clone, Default)]
pub struct ScriptedDriver {
    answers: std::collections::VecDeque<String>,
    pub transcript: Vec<String>,
}

impl ScriptedDriver {
    pub fn new<I, S>(answers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedDriver {
            answers: answers.into_iter().map(Into::into).collect(),
            transcript: Vec::new(),
        }
    }

    /// One answer per line.
    pub fn from_script(text: &str) -> Self {
        ScriptedDriver::new(text.lines())
    }
}

impl PromptDriver for ScriptedDriver {
    fn ask(&mut self, prompt: &str) -> Option<String> {
        self.transcript.push(prompt.to_string());
        self.answers.pop_front()
    }

    fn say(&mut self, message: &str) {
        self.transcript.push(message.to_string());
    }
}

/// Prompts on a writer and reads answers line by line.
pub struct StdioDriver<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> StdioDriver<R, W> {
    pub fn new(input: R, output: W) -> Self {
        StdioDriver { input, output }
    }
}

impl<R: BufRead, W: Write> PromptDriver for StdioDriver<R, W> {
    fn ask(&mut self, prompt: &str) -> Option<String> {
        let _ = write!(self.output, "{prompt} ");
        let _ = self.output.flush();
        let mut line = String::new();
        match self.input.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(line.trim_end_matches(['\r', '\n']).to_string()),
        }
    }

    fn say(&mut self, message: &str) {
        let _ = writeln!(self.output, "{message}");
    }
}

fn answer(d: &mut dyn PromptDriver, prompt: &str) -> Result<String, WizardError> {
    match d.ask(prompt) {
        None => Err(WizardError::Aborted),
        Some(a) if a.trim() == "q" => Err(WizardError::Aborted),
        Some(a) => Ok(a.trim().to_string()),
    }
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',')
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .collect()
}

/// Asks until the answer parses as a non-empty list of words.
fn ask_words<T: std::str::FromStr<Err = UpptError> + Ord>(
    d: &mut dyn PromptDriver,
    prompt: &str,
    allow_empty: bool,
) -> Result<Vec<T>, WizardError> {
    loop {
        let a = answer(d, prompt)?;
        let parsed: Result<Vec<T>, UpptError> =
            split_list(&a).into_iter().map(str::parse).collect();
        match parsed {
            Ok(mut v) => {
                v.sort();
                v.dedup();
                if v.is_empty() && !allow_empty {
                    d.say("please choose at least one option");
                    continue;
                }
                return Ok(v);
            }
            Err(e) => d.say(&e.to_string()),
        }
    }
}

fn ask_context(
    d: &mut dyn PromptDriver,
    r: Resource,
    c: Control,
) -> Result<ContextSpec, WizardError> {
    let label = format!("{r}/{c}");
    loop {
        let time = loop {
            let a = answer(
                d,
                &format!("[{label}] time window HH:MM-HH:MM (blank for any):"),
            )?;
            if a.is_empty() {
                break None;
            }
            let parsed = a
                .split_once('-')
                .ok_or_else(|| UpptError::BadTime(a.clone()))
                .and_then(|(s, e)| {
                    let start: Clock = s.trim().parse()?;
                    let end: Clock = e.trim().parse()?;
                    if start >= end {
                        return Err(UpptError::EmptyWindow {
                            start: start.to_string(),
                            end: end.to_string(),
                        });
                    }
                    Ok(TimeWindow { start, end })
                });
            match parsed {
                Ok(w) => break Some(w),
                Err(e) => d.say(&e.to_string()),
            }
        };
        let opt = |s: String| (!s.is_empty()).then_some(s);
        let location = opt(answer(
            d,
            &format!("[{label}] location label (blank for any):"),
        )?);
        let foreground_app = opt(answer(
            d,
            &format!("[{label}] foreground app (blank for any, * for every app):"),
        )?);
        let category = opt(answer(
            d,
            &format!("[{label}] app category (blank for any):"),
        )?);
        let stack = answer(
            d,
            &format!(
                "[{label}] apps that must be on the back stack, comma-separated (blank for none):"
            ),
        )?;
        let back_stack: Vec<String> = split_list(&stack).into_iter().map(String::from).collect();
        let status = StatusSpec {
            foreground_app,
            category,
            back_stack: (!back_stack.is_empty()).then_some(back_stack),
        };
        let spec = ContextSpec {
            time,
            location,
            status: (status != StatusSpec::default()).then_some(status),
        };
        if spec == ContextSpec::default() {
            d.say("a context needs at least one of time, location or status");
            continue;
        }
        return Ok(spec);
    }
}

/// Runs the dialogue. Steps 2 and 3 only ever mention resources picked in
/// step 1. Answering `q` or closing the input aborts.
pub fn run_wizard(d: &mut dyn PromptDriver) -> Result<Uppt, WizardError> {
    let all: Vec<&str> = Resource::ALL.iter().map(|r| r.as_str()).collect();
    let resources: Vec<Resource> = ask_words(
        d,
        &format!(
            "Step 1: which sensor resources concern you? ({}; comma-separated)",
            all.join(", ")
        ),
        true,
    )?;
    if resources.is_empty() {
        return Err(WizardError::NoResources);
    }
    let controls: Vec<&str> = Control::ALL.iter().map(|c| c.as_str()).collect();
    let mut picks = Vec::new();
    for &r in &resources {
        let cs: Vec<Control> = ask_words(
            d,
            &format!(
                "Step 2: control measures for {r}? ({}; comma-separated)",
                controls.join(", ")
            ),
            false,
        )?;
        picks.extend(cs.into_iter().map(|c| (r, c)));
    }
    let mut rows = Vec::new();
    for (r, c) in picks {
        d.say(&format!(
            "Step 3: in which context should {r} be set to {c}?"
        ));
        rows.push(UpptRow {
            context: ask_context(d, r, c)?,
            resource: r,
            control: c,
        });
    }
    Ok(Uppt::new(rows)?)
}
