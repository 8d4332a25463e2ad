//! Prompt templates with `{placeholder}` substitution.
//!
//! `{{` and `}}` produce literal braces. A `{word}` naming an undeclared
//! placeholder is rejected when the template is built; any other brace is
//! literal text, so code snippets can appear in bodies unescaped.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PLACEHOLDERS: [&str; 4] = ["user_query", "macro", "error_message", "caption"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("missing binding for placeholder '{0}'")]
    MissingBinding(String),
    #[error("template '{template}' references undeclared placeholder '{placeholder}'")]
    Undeclared {
        template: String,
        placeholder: String,
    },
    #[error("cannot load template set: {0}")]
    Load(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    pub placeholders: Vec<String>,
    pub exemplars: Vec<Exemplar>,
    segments: Vec<Segment>,
}

fn is_word(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c == '_')
}

fn segment(body: &str) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut text = String::new();
    let mut rest = body;
    while let Some(c) = rest.chars().next() {
        if rest.starts_with("{{") || rest.starts_with("}}") {
            text.push(c);
            rest = &rest[2..];
            continue;
        }
        if c == '{' {
            if let Some(end) = rest[1..].find('}') {
                let word = &rest[1..1 + end];
                if is_word(word) {
                    if !text.is_empty() {
                        out.push(Segment::Text(std::mem::take(&mut text)));
                    }
                    out.push(Segment::Slot(word.to_string()));
                    rest = &rest[end + 2..];
                    continue;
                }
            }
        }
        text.push(c);
        rest = &rest[c.len_utf8()..];
    }
    if !text.is_empty() {
        out.push(Segment::Text(text));
    }
    out
}

impl PromptTemplate {
    pub fn new(
        name: impl Into<String>,
        body: impl Into<String>,
        placeholders: Vec<String>,
        exemplars: Vec<Exemplar>,
    ) -> Result<Self, TemplateError> {
        let name = name.into();
        let body = body.into();
        let segments = segment(&body);
        for s in &segments {
            if let Segment::Slot(p) = s {
                if !placeholders.contains(p) {
                    return Err(TemplateError::Undeclared {
                        template: name,
                        placeholder: p.clone(),
                    });
                }
            }
        }
        Ok(Self {
            name,
            body,
            placeholders,
            exemplars,
            segments,
        })
    }

    /// Placeholders that actually occur in the body, in order of first use.
    pub fn used_placeholders(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for s in &self.segments {
            if let Segment::Slot(p) = s {
                if !seen.contains(&p.as_str()) {
                    seen.push(p);
                }
            }
        }
        seen
    }
}

/// Renders exemplars (in order) followed by the body with bindings substituted.
pub fn render_prompt(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
) -> Result<String, TemplateError> {
    let mut out = String::new();
    for ex in &template.exemplars {
        out.push_str("Example request:\n");
        out.push_str(&ex.input);
        out.push_str("\n\nExample response:\n");
        out.push_str(&ex.output);
        out.push_str("\n\n---\n\n");
    }
    for s in &template.segments {
        match s {
            Segment::Text(t) => out.push_str(t),
            Segment::Slot(p) => {
                let v = bindings
                    .get(p)
                    .ok_or_else(|| TemplateError::MissingBinding(p.clone()))?;
                out.push_str(v);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    file: String,
    placeholders: Vec<String>,
    #[serde(default)]
    exemplars: Vec<Exemplar>,
}

#[derive(Debug, Deserialize)]
struct Manifest {
    name: String,
    system: String,
    initial: ManifestEntry,
    error_refine: ManifestEntry,
    caption_refine: ManifestEntry,
}

/// The three prompts used by a run plus the system message.
#[derive(Debug, Clone)]
pub struct PromptSet {
    pub name: String,
    pub system: String,
    pub initial: PromptTemplate,
    pub error_refine: PromptTemplate,
    pub caption_refine: PromptTemplate,
}

macro_rules! builtin_set {
    ($dir:literal) => {
        [
            (
                "manifest.json",
                include_str!(concat!("../../assets/prompts/", $dir, "/manifest.json")),
            ),
            (
                "system.txt",
                include_str!(concat!("../../assets/prompts/", $dir, "/system.txt")),
            ),
            (
                "initial.txt",
                include_str!(concat!("../../assets/prompts/", $dir, "/initial.txt")),
            ),
            (
                "error_refine.txt",
                include_str!(concat!("../../assets/prompts/", $dir, "/error_refine.txt")),
            ),
            (
                "caption_refine.txt",
                include_str!(concat!(
                    "../../assets/prompts/",
                    $dir,
                    "/caption_refine.txt"
                )),
            ),
        ]
    };
}

impl PromptSet {
    /// Built-in sets: `freecad` and `mock`.
    pub fn builtin(name: &str) -> Result<Self, TemplateError> {
        let files = match name {
            "freecad" => builtin_set!("freecad"),
            "mock" => builtin_set!("mock"),
            other => {
                return Err(TemplateError::Load(format!(
                    "unknown built-in prompt set '{other}'"
                )))
            }
        };
        Self::from_files(|f| {
            files
                .iter()
                .find(|(n, _)| *n == f)
                .map(|(_, c)| c.to_string())
                .ok_or_else(|| TemplateError::Load(format!("missing {f}")))
        })
    }

    /// Loads a set from a directory holding `manifest.json` and the files it names.
    pub fn load(dir: &Path) -> Result<Self, TemplateError> {
        Self::from_files(|f| {
            std::fs::read_to_string(dir.join(f))
                .map_err(|e| TemplateError::Load(format!("{}: {e}", dir.join(f).display())))
        })
    }

    /// A built-in name or a directory path.
    pub fn resolve(name_or_dir: &str) -> Result<Self, TemplateError> {
        let path = Path::new(name_or_dir);
        if path.is_dir() {
            Self::load(path)
        } else {
            Self::builtin(name_or_dir)
        }
    }

    fn from_files(
        read: impl Fn(&str) -> Result<String, TemplateError>,
    ) -> Result<Self, TemplateError> {
        let manifest: Manifest = serde_json::from_str(&read("manifest.json")?)
            .map_err(|e| TemplateError::Load(format!("manifest.json: {e}")))?;
        let build = |name: &str, entry: ManifestEntry| -> Result<PromptTemplate, TemplateError> {
            for p in &entry.placeholders {
                if !PLACEHOLDERS.contains(&p.as_str()) {
                    return Err(TemplateError::Load(format!(
                        "{name}: unknown placeholder '{p}'"
                    )));
                }
            }
            PromptTemplate::new(
                name,
                read(&entry.file)?,
                entry.placeholders,
                entry.exemplars,
            )
        };
        Ok(Self {
            system: read(&manifest.system)?,
            initial: build("initial", manifest.initial)?,
            error_refine: build("error_refine", manifest.error_refine)?,
            caption_refine: build("caption_refine", manifest.caption_refine)?,
            name: manifest.name,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(body: &str, ph: &[&str]) -> PromptTemplate {
        PromptTemplate::new(
            "t",
            body,
            ph.iter().map(|s| s.to_string()).collect(),
            vec![],
        )
        .unwrap()
    }

    fn b(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn simple_substitution() {
        let tpl = t("Q: {user_query}", &["user_query"]);
        assert_eq!(
            render_prompt(&tpl, &b(&[("user_query", "a torus")])).unwrap(),
            "Q: a torus"
        );
    }

    #[test]
    fn missing_binding_names_placeholder() {
        let tpl = t("{user_query}\n{macro}", &["user_query", "macro"]);
        let err = render_prompt(&tpl, &b(&[("user_query", "x")])).unwrap_err();
        assert_eq!(err, TemplateError::MissingBinding("macro".into()));
    }

    #[test]
    fn undeclared_placeholder_rejected() {
        let err =
            PromptTemplate::new("t", "{caption}", vec!["user_query".into()], vec![]).unwrap_err();
        assert!(matches!(err, TemplateError::Undeclared { .. }));
    }

    #[test]
    fn braces_and_escapes() {
        let tpl = t(
            "d = {{'a': 1}} {user_query} {not a slot} {",
            &["user_query"],
        );
        assert_eq!(
            render_prompt(&tpl, &b(&[("user_query", "q")])).unwrap(),
            "d = {'a': 1} q {not a slot} {"
        );
    }

    #[test]
    fn bindings_are_not_rescanned() {
        let tpl = t("{user_query}", &["user_query"]);
        assert_eq!(
            render_prompt(&tpl, &b(&[("user_query", "{macro}")])).unwrap(),
            "{macro}"
        );
    }

    #[test]
    fn exemplars_precede_body() {
        let tpl = PromptTemplate::new(
            "t",
            "Q: {user_query}",
            vec!["user_query".into()],
            vec![Exemplar {
                input: "a cube".into(),
                output: "box".into(),
            }],
        )
        .unwrap();
        let out = render_prompt(&tpl, &b(&[("user_query", "a ball")])).unwrap();
        assert!(out.starts_with("Example request:\na cube"));
        assert!(out.ends_with("Q: a ball"));
        assert!(out.find("a cube").unwrap() < out.find("a ball").unwrap());
    }

    #[test]
    fn zero_exemplars_is_body_only() {
        let tpl = t("only {user_query}", &["user_query"]);
        assert_eq!(
            render_prompt(&tpl, &b(&[("user_query", "x")])).unwrap(),
            "only x"
        );
    }

    #[test]
    fn builtin_sets_load() {
        for name in ["freecad", "mock"] {
            let set = PromptSet::builtin(name).unwrap();
            assert_eq!(set.name, name);
            assert_eq!(set.initial.used_placeholders(), vec!["user_query"]);
            let mut err = set.error_refine.used_placeholders();
            err.sort();
            assert_eq!(err, vec!["error_message", "macro", "user_query"]);
            let mut cap = set.caption_refine.used_placeholders();
            cap.sort();
            assert_eq!(cap, vec!["caption", "macro", "user_query"]);
            assert!(!set.initial.exemplars.is_empty());
        }
        assert!(PromptSet::builtin("nope").is_err());
    }
}
