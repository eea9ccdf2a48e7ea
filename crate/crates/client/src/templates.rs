//! Prompt templates shipped as plain-text assets and hashed for provenance.

use std::collections::BTreeMap;
use std::path::Path;

use stepsvg_core::dataset::sha256_hex;

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplates {
    pub system: String,
    /// Request for t_g, sent with the final frame.
    pub global: String,
    /// History turn carrying t_g; `{t_g}` is substituted.
    pub global_context: String,
    /// Per-transition request; `{i}` and `{transitions}` are substituted.
    pub step: String,
}

const NAMES: [&str; 4] = ["system", "global", "global_context", "step"];

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            system: include_str!("../templates/system.txt").trim_end().to_owned(),
            global: include_str!("../templates/global.txt").trim_end().to_owned(),
            global_context: include_str!("../templates/global_context.txt").trim_end().to_owned(),
            step: include_str!("../templates/step.txt").trim_end().to_owned(),
        }
    }
}

impl PromptTemplates {
    /// Loads `system.txt`, `global.txt`, `global_context.txt` and `step.txt`
    /// from `dir`; missing files keep the built-in text.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut t = Self::default();
        for name in NAMES {
            let path = dir.join(format!("{name}.txt"));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(path)?.trim_end().to_owned();
            match name {
                "system" => t.system = text,
                "global" => t.global = text,
                "global_context" => t.global_context = text,
                _ => t.step = text,
            }
        }
        Ok(t)
    }

    pub fn hashes(&self) -> BTreeMap<String, String> {
        [&self.system, &self.global, &self.global_context, &self.step]
            .into_iter()
            .zip(NAMES)
            .map(|(text, name)| (name.to_owned(), sha256_hex(text)))
            .collect()
    }

    pub fn global_context(&self, t_g: &str) -> String {
        self.global_context.replace("{t_g}", t_g)
    }

    pub fn step(&self, i: usize, transitions: usize) -> String {
        self.step.replace("{i}", &i.to_string()).replace("{transitions}", &transitions.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_and_hashes() {
        let t = PromptTemplates::default();
        assert!(t.step(2, 5).starts_with("Drawing step 2 of 5."));
        assert!(t.global_context("a cat").ends_with("a cat"));
        let h = t.hashes();
        assert_eq!(h.len(), 4);
        assert_eq!(h["system"], sha256_hex(&t.system));
    }
}
