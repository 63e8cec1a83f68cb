//! Flat `key = value` config files for the CLI.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Unknown and duplicate keys are hard errors so typos cannot silently
//! fall back to defaults.

use super::ExperimentSpec;
use crate::error::{Error, Result};
use crate::selection::SelectionStrategy;
use crate::trainers::Method;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::str::FromStr;

#[derive(Debug)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

pub fn parse_config(text: &str) -> Result<ConfigMap> {
    let mut values = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!(
                "config line {}: expected `key = value`, got `{line}`",
                lineno + 1
            ))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::config(format!("config line {}: empty key", lineno + 1)));
        }
        if values.insert(key.clone(), value).is_some() {
            return Err(Error::config(format!(
                "config line {}: duplicate key `{key}`",
                lineno + 1
            )));
        }
    }
    Ok(ConfigMap {
        values,
        used: BTreeSet::new(),
    })
}

impl ConfigMap {
    fn raw(&mut self, key: &str) -> Option<&str> {
        if self.values.contains_key(key) {
            self.used.insert(key.to_string());
            self.values.get(key).map(|s| s.as_str())
        } else {
            None
        }
    }

    /// Parses `key` into `T` if present; a present-but-unparsable value is
    /// a config error.
    pub fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| {
                Error::config(format!("config key `{key}`: cannot parse `{v}`: {e}"))
            }),
        }
    }

    /// Comma-separated list variant of [`ConfigMap::get`].
    pub fn get_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => {
                let owned = v.to_string();
                let mut out = Vec::new();
                for part in owned.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    out.push(part.parse::<T>().map_err(|e| {
                        Error::config(format!(
                            "config key `{key}`: cannot parse `{part}`: {e}"
                        ))
                    })?);
                }
                if out.is_empty() {
                    return Err(Error::config(format!("config key `{key}`: empty list")));
                }
                Ok(Some(out))
            }
        }
    }

    /// Errors on any key that no `get` call consumed.
    pub fn finish(self) -> Result<()> {
        let unknown: Vec<&String> = self
            .values
            .keys()
            .filter(|k| !self.used.contains(*k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "unknown config keys: {}",
                unknown
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )))
        }
    }
}

/// Applies every recognized key onto `spec`, consuming the map. The full
/// key list doubles as the config-file reference (see the README).
pub fn apply_config(mut cfg: ConfigMap, spec: &mut ExperimentSpec) -> Result<()> {
    // Dataset.
    if let Some(v) = cfg.get("n")? {
        spec.n = v;
    }
    if let Some(v) = cfg.get("dim")? {
        spec.dim = v;
    }
    if let Some(v) = cfg.get("pi")? {
        spec.pi_p = v;
    }
    if let Some(v) = cfg.get("mu_sep")? {
        spec.mu_sep = v;
    }
    if let Some(v) = cfg.get::<String>("data")? {
        spec.data_path = Some(v.into());
    }
    // Split.
    if let Some(v) = cfg.get("train_frac")? {
        spec.split.train = v;
    }
    if let Some(v) = cfg.get("val_frac")? {
        spec.split.val = v;
    }
    if let Some(v) = cfg.get("test_frac")? {
        spec.split.test = v;
    }
    // Harness.
    if let Some(v) = cfg.get::<String>("methods")? {
        let mut methods = Vec::new();
        for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            methods.push(Method::from_key(part).ok_or_else(|| {
                Error::config(format!("config key `methods`: unknown method `{part}`"))
            })?);
        }
        if methods.is_empty() {
            return Err(Error::config("config key `methods`: empty list"));
        }
        spec.methods = methods;
    }
    if let Some(v) = cfg.get_list("r_values")? {
        spec.r_values = v;
    }
    if let Some(v) = cfg.get("n_runs")? {
        spec.n_runs = v;
    }
    if let Some(v) = cfg.get("base_seed")? {
        spec.base_seed = v;
    }
    // Trainer.
    if let Some(v) = cfg.get::<String>("method")? {
        spec.trainer.method = Method::from_key(&v)
            .ok_or_else(|| Error::config(format!("config key `method`: unknown method `{v}`")))?;
    }
    if let Some(v) = cfg.get("lr")? {
        spec.trainer.lr = v;
    }
    if let Some(v) = cfg.get("momentum")? {
        spec.trainer.momentum = v;
    }
    if let Some(v) = cfg.get("batch_size")? {
        spec.trainer.batch_size = v;
    }
    if let Some(v) = cfg.get("epochs")? {
        spec.trainer.epochs = v;
    }
    if let Some(v) = cfg.get("alpha")? {
        spec.trainer.alpha = v;
    }
    if let Some(v) = cfg.get("beta")? {
        spec.trainer.beta = v;
    }
    if let Some(v) = cfg.get_list("hidden_dims")? {
        spec.trainer.hidden_dims = v;
    }
    if let Some(v) = cfg.get("seed")? {
        spec.trainer.seed = v;
    }
    // Selection.
    if let Some(v) = cfg.get::<String>("strategy")? {
        spec.trainer.selection.strategy = SelectionStrategy::from_name(&v).ok_or_else(|| {
            Error::config(format!("config key `strategy`: unknown strategy `{v}`"))
        })?;
    }
    if let Some(v) = cfg.get("max_trust_frac")? {
        spec.trainer.selection.max_trust_frac = v;
    }
    if let Some(v) = cfg.get("bootstrap_frac")? {
        spec.trainer.selection.bootstrap_frac = v;
    }
    if let Some(v) = cfg.get("warmup_epochs")? {
        spec.trainer.selection.warmup_epochs = v;
    }
    if let Some(v) = cfg.get("selection_seed")? {
        spec.trainer.selection.seed = v;
    }
    // Pipeline branches.
    if let Some(v) = cfg.get("use_trusted")? {
        spec.trainer.selfpu.use_trusted = v;
    }
    if let Some(v) = cfg.get("use_student_loss")? {
        spec.trainer.selfpu.use_student_loss = v;
    }
    if let Some(v) = cfg.get("use_teacher")? {
        spec.trainer.selfpu.use_teacher = v;
    }
    // Sweeps.
    if let Some(v) = cfg.get_list("alphas")? {
        spec.alphas = v;
    }
    if let Some(v) = cfg.get_list("betas")? {
        spec.betas = v;
    }
    cfg.finish()
}
