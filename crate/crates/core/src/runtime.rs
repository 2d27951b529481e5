//! Multiple-model online monitor: one classifier per component, each with a
//! debounced Green/Red lamp.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{Algorithm, Hyperparams, TrainedModel};
use crate::dataset::{Dataset, FEATURE_COUNT};
use crate::error::{FdiError, Result};
use crate::signals::Signal;

pub const DEFAULT_DEBOUNCE: usize = 5;

/// Fraction of malformed input rows above which a stream is rejected.
pub const MAX_MALFORMED_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankEntry {
    pub component: String,
    pub model: PathBuf,
    /// Signal names the model may see; the others are held at the model's
    /// training mean. All twelve when absent.
    #[serde(default)]
    pub features: Option<Vec<String>>,
    /// Consecutive-sample count; the bank default when absent.
    #[serde(default)]
    pub debounce: Option<usize>,
}

/// Bank configuration, read from TOML:
///
/// ```toml
/// dt = 0.1
/// debounce = 5
///
/// [[entry]]
/// component = "T2"
/// model = "t2.json"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_debounce")]
    pub debounce: usize,
    #[serde(default, rename = "entry")]
    pub entries: Vec<BankEntry>,
}

fn default_dt() -> f64 {
    0.1
}

fn default_debounce() -> usize {
    DEFAULT_DEBOUNCE
}

impl BankConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| FdiError::Configuration(format!("bank config: {e}")))
    }

    /// Reads a config file; relative model paths resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| FdiError::Configuration(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for e in &mut cfg.entries {
            if e.model.is_relative() {
                e.model = base.join(&e.model);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FdiError::Configuration(format!("bank config: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct BankMember {
    pub component: String,
    pub model: TrainedModel,
    /// Raw-feature replacement applied before prediction: `(index, value)`.
    masked: Vec<(usize, f64)>,
    pub debounce: usize,
}

impl BankMember {
    fn verdict(&self, raw: &[f64; FEATURE_COUNT]) -> Result<usize> {
        if self.masked.is_empty() {
            return self.model.predict_raw(raw);
        }
        let mut x = *raw;
        for &(i, v) in &self.masked {
            x[i] = v;
        }
        self.model.predict_raw(&x)
    }

    pub fn class_name(&self, class: usize) -> &str {
        &self.model.class_names[class]
    }
}

/// Immutable set of loaded component models.
#[derive(Debug, Clone)]
pub struct Bank {
    pub members: Vec<BankMember>,
    pub dt: f64,
}

fn bank_error(entry: &str, detail: impl Into<String>) -> FdiError {
    FdiError::Bank {
        entry: entry.to_string(),
        detail: detail.into(),
    }
}

/// Loads and checks every entry of a configuration.
pub fn build_bank(config: &BankConfig) -> Result<Bank> {
    if config.entries.is_empty() {
        return Err(FdiError::Configuration(
            "a bank must monitor at least one component".into(),
        ));
    }
    if !(config.dt.is_finite() && config.dt > 0.0) {
        return Err(FdiError::Configuration(format!(
            "dt must be positive, got {}",
            config.dt
        )));
    }
    let mut members = Vec::with_capacity(config.entries.len());
    for e in &config.entries {
        let model = TrainedModel::load(&e.model).map_err(|err| bank_error(&e.component, err.to_string()))?;
        members.push(member(e, model, config.debounce)?);
    }
    let bank = Bank { members, dt: config.dt };
    bank.check_unique()?;
    Ok(bank)
}

/// A bank from models already in memory, all with the same debounce.
pub fn bank_from_models(models: Vec<(String, TrainedModel)>, debounce: usize, dt: f64) -> Result<Bank> {
    let config = BankConfig {
        dt,
        debounce,
        entries: models
            .iter()
            .map(|(c, _)| BankEntry {
                component: c.clone(),
                model: PathBuf::new(),
                features: None,
                debounce: None,
            })
            .collect(),
    };
    if models.is_empty() {
        return Err(FdiError::Configuration(
            "a bank must monitor at least one component".into(),
        ));
    }
    let members = config
        .entries
        .iter()
        .zip(models)
        .map(|(e, (_, m))| member(e, m, debounce))
        .collect::<Result<Vec<_>>>()?;
    let bank = Bank { members, dt };
    bank.check_unique()?;
    Ok(bank)
}

fn member(e: &BankEntry, model: TrainedModel, default_debounce: usize) -> Result<BankMember> {
    let name = e.component.as_str();
    if name.trim().is_empty() {
        return Err(bank_error(name, "empty component name"));
    }
    let debounce = e.debounce.unwrap_or(default_debounce);
    if debounce == 0 {
        return Err(bank_error(name, "debounce must be >= 1"));
    }
    let Some(stats) = &model.norm_stats else {
        return Err(bank_error(name, "model carries no normalization statistics"));
    };
    let names: Vec<&str> = stats.features.iter().map(|f| f.name.as_str()).collect();
    if names != Dataset::feature_names() {
        return Err(bank_error(
            name,
            format!("model expects features {names:?}, the stream carries the twelve monitored signals"),
        ));
    }
    if model.class_names.len() < 2 {
        return Err(bank_error(
            name,
            "model must know a healthy class and at least one fault class",
        ));
    }
    let mut masked = Vec::new();
    if let Some(subset) = &e.features {
        let mut keep = [false; FEATURE_COUNT];
        for f in subset {
            let s: Signal = f.parse().map_err(|err: FdiError| bank_error(name, err.to_string()))?;
            keep[s.index()] = true;
        }
        masked = stats
            .features
            .iter()
            .enumerate()
            .filter(|(i, _)| !keep[*i])
            .map(|(i, f)| (i, f.mean))
            .collect();
    }
    Ok(BankMember {
        component: e.component.clone(),
        model,
        masked,
        debounce,
    })
}

impl Bank {
    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for m in &self.members {
            if !seen.insert(m.component.as_str()) {
                return Err(bank_error(&m.component, "duplicate component name"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn components(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.component.as_str()).collect()
    }
}

/// One binary model per named fault class of `train`: that class against
/// everything else, healthy samples and other faults alike.
pub fn train_component_models(
    train: &Dataset,
    components: &[&str],
    algorithm: Algorithm,
    hp: &Hyperparams,
) -> Result<Vec<(String, TrainedModel)>> {
    components
        .iter()
        .map(|&c| {
            let class = train
                .class_index(c)
                .filter(|&i| i > 0)
                .ok_or_else(|| bank_error(c, format!("no fault class named '{c}' in {:?}", train.class_names)))?;
            let model = TrainedModel::fit(algorithm, &train.relabel_binary(class, c)?, hp)?;
            Ok((c.to_string(), model))
        })
        .collect()
}

/// Predicted class index of every member for one sample, in bank order.
pub fn process_sample(bank: &Bank, features: &[f64; FEATURE_COUNT]) -> Result<Vec<usize>> {
    if let Some(i) = features.iter().position(|v| !v.is_finite()) {
        return Err(FdiError::Stream(format!(
            "non-finite value in feature {}",
            Signal::ALL[i].name()
        )));
    }
    bank.members.iter().map(|m| m.verdict(features)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lamp {
    Green,
    Red,
}

/// Symmetric hysteresis: the lamp changes colour after `m` consecutive raw
/// verdicts of the other colour.
#[derive(Debug, Clone, PartialEq)]
pub struct Debouncer {
    m: usize,
    state: Lamp,
    streak: usize,
    streak_start: f64,
}

/// A change of lamp colour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub to: Lamp,
    /// Time of the first raw verdict of the streak that caused it.
    pub streak_start: f64,
}

impl Debouncer {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(FdiError::Configuration("debounce count must be >= 1".into()));
        }
        Ok(Self {
            m,
            state: Lamp::Green,
            streak: 0,
            streak_start: 0.0,
        })
    }

    pub fn state(&self) -> Lamp {
        self.state
    }

    pub fn update(&mut self, faulty: bool, t: f64) -> Option<Transition> {
        let wanted = if faulty { Lamp::Red } else { Lamp::Green };
        if wanted == self.state {
            self.streak = 0;
            return None;
        }
        if self.streak == 0 {
            self.streak_start = t;
        }
        self.streak += 1;
        if self.streak < self.m {
            return None;
        }
        self.state = wanted;
        self.streak = 0;
        Some(Transition {
            to: wanted,
            streak_start: self.streak_start,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    /// Time the lamp turned red.
    pub onset: f64,
    /// Time of the first faulty raw verdict leading to the onset.
    pub first_raw: f64,
    /// `onset - first_raw`.
    pub latency: f64,
    /// Time the lamp returned to green; `None` if still red at the end.
    pub end: Option<f64>,
    /// Fault class predicted when the lamp turned red.
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub component: String,
    pub red_samples: u64,
    pub episodes: Vec<Episode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub samples: u64,
    pub malformed: u64,
    pub non_finite: u64,
    pub components: Vec<ComponentSummary>,
}

impl StreamSummary {
    pub fn episode_count(&self) -> usize {
        self.components.iter().map(|c| c.episodes.len()).sum()
    }
}

/// Debounced state of every component after one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthStatus {
    pub t: f64,
    pub lamps: Vec<Lamp>,
    /// Raw class index per component.
    pub raw: Vec<usize>,
}

/// One output line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusRecord<'a> {
    pub t: f64,
    pub component: &'a str,
    pub status: Lamp,
    pub class: &'a str,
}

/// Stateful monitor over an ordered stream of samples.
pub struct Monitor<'a> {
    bank: &'a Bank,
    debouncers: Vec<Debouncer>,
    summary: StreamSummary,
}

impl<'a> Monitor<'a> {
    pub fn new(bank: &'a Bank) -> Result<Self> {
        bank.check_unique()?;
        Ok(Self {
            bank,
            debouncers: bank
                .members
                .iter()
                .map(|m| Debouncer::new(m.debounce))
                .collect::<Result<_>>()?,
            summary: StreamSummary {
                samples: 0,
                malformed: 0,
                non_finite: 0,
                components: bank
                    .members
                    .iter()
                    .map(|m| ComponentSummary {
                        component: m.component.clone(),
                        red_samples: 0,
                        episodes: Vec::new(),
                    })
                    .collect(),
            },
        })
    }

    /// Feeds one sample. Samples with non-finite values are counted and
    /// skipped (`None`).
    pub fn process(&mut self, t: f64, features: &[f64; FEATURE_COUNT]) -> Result<Option<HealthStatus>> {
        if !t.is_finite() || features.iter().any(|v| !v.is_finite()) {
            self.summary.non_finite += 1;
            return Ok(None);
        }
        let raw = process_sample(self.bank, features)?;
        self.summary.samples += 1;
        let mut lamps = Vec::with_capacity(raw.len());
        for (i, &class) in raw.iter().enumerate() {
            let comp = &mut self.summary.components[i];
            match self.debouncers[i].update(class != 0, t) {
                Some(Transition {
                    to: Lamp::Red,
                    streak_start,
                }) => comp.episodes.push(Episode {
                    onset: t,
                    first_raw: streak_start,
                    latency: t - streak_start,
                    end: None,
                    class: self.bank.members[i].class_name(class).to_string(),
                }),
                Some(Transition { to: Lamp::Green, .. }) => {
                    if let Some(ep) = comp.episodes.last_mut() {
                        ep.end = Some(t);
                    }
                }
                None => {}
            }
            let lamp = self.debouncers[i].state();
            if lamp == Lamp::Red {
                comp.red_samples += 1;
            }
            lamps.push(lamp);
        }
        Ok(Some(HealthStatus { t, lamps, raw }))
    }

    pub fn record_malformed(&mut self) {
        self.summary.malformed += 1;
    }

    pub fn summary(&self) -> &StreamSummary {
        &self.summary
    }

    pub fn finish(self) -> StreamSummary {
        self.summary
    }

    /// Output records of one status, one per component.
    pub fn records<'s>(&'s self, status: &HealthStatus) -> Vec<StatusRecord<'s>> {
        self.bank
            .members
            .iter()
            .zip(&status.lamps)
            .zip(&status.raw)
            .map(|((m, &lamp), &class)| StatusRecord {
                t: status.t,
                component: &m.component,
                status: lamp,
                class: m.class_name(class),
            })
            .collect()
    }
}

#[derive(Deserialize)]
struct JsonSample {
    t: f64,
    features: Vec<f64>,
}

enum Format {
    Csv { t: usize, features: [usize; FEATURE_COUNT] },
    Jsonl,
}

fn csv_format(header: &str) -> Result<Format> {
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| FdiError::Stream(format!("CSV header lacks column '{name}'")))
    };
    let t = find("t")?;
    let mut features = [0; FEATURE_COUNT];
    for (slot, s) in features.iter_mut().zip(Signal::ALL) {
        *slot = find(s.name())?;
    }
    Ok(Format::Csv { t, features })
}

fn parse_line(format: &Format, line: &str) -> Option<(f64, [f64; FEATURE_COUNT])> {
    match format {
        Format::Csv { t, features } => {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let get = |i: usize| fields.get(i).and_then(|v| v.parse::<f64>().ok());
            let mut x = [0.0; FEATURE_COUNT];
            for (slot, &i) in x.iter_mut().zip(features) {
                *slot = get(i)?;
            }
            Some((get(*t)?, x))
        }
        Format::Jsonl => {
            let s: JsonSample = serde_json::from_str(line).ok()?;
            let x: [f64; FEATURE_COUNT] = s.features.try_into().ok()?;
            Some((s.t, x))
        }
    }
}

/// Reads trajectory CSV (header required, extra columns ignored) or JSONL
/// `{"t":..,"features":[..]}` records, writes one JSONL status record per
/// component and sample, and returns the summary. More than
/// [`MAX_MALFORMED_FRACTION`] malformed rows reject the stream.
pub fn monitor_stream<R: BufRead, W: Write>(input: R, bank: &Bank, mut output: W) -> Result<StreamSummary> {
    let mut monitor = Monitor::new(bank)?;
    let mut format = None;
    let mut rows = 0u64;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fmt = match &format {
            Some(f) => f,
            None => {
                if line.starts_with('{') {
                    format.insert(Format::Jsonl)
                } else {
                    format = Some(csv_format(line)?);
                    continue;
                }
            }
        };
        rows += 1;
        match parse_line(fmt, line) {
            Some((t, x)) => {
                if let Some(status) = monitor.process(t, &x)? {
                    for rec in monitor.records(&status) {
                        serde_json::to_writer(&mut output, &rec)?;
                        output.write_all(b"\n")?;
                    }
                }
            }
            None => monitor.record_malformed(),
        }
    }
    output.flush()?;
    let summary = monitor.finish();
    if rows > 0 && summary.malformed as f64 > MAX_MALFORMED_FRACTION * rows as f64 {
        return Err(FdiError::Stream(format!(
            "{} of {rows} rows malformed (limit {:.0}%)",
            summary.malformed,
            100.0 * MAX_MALFORMED_FRACTION
        )));
    }
    Ok(summary)
}

/// Fraction of samples on which every component's verdict matches the
/// truth (faulty or healthy); the joint score of simultaneous monitoring.
pub fn joint_accuracy(truth: &[Vec<bool>], predicted: &[Vec<bool>]) -> Result<f64> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(FdiError::Shape {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    let hits = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    Ok(100.0 * hits as f64 / truth.len() as f64)
}
