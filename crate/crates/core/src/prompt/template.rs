//! Versioned prompt template.
//!
//! The default text is a reconstruction of a three-part query layout:
//! constant system context, retrieved exemplars with their answers filled
//! in, and the current query with answers left blank. It can be replaced by
//! a TOML file containing every field below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptTemplate {
    pub version: String,
    pub system: String,
    /// Header of each exemplar block; `{n}` is the 1-based rank.
    pub example_header: String,
    pub query_header: String,
    /// `{control}` receives the serialized control signals.
    pub control_line: String,
    /// `{video}` receives `video_token`.
    pub video_line: String,
    pub video_token: String,
    pub question_prefix: String,
    pub answer_prefix: String,
    pub action_question: String,
    pub justification_question: String,
    pub control_question: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            version: "raicl-template v1".into(),
            system: "You are a driving assistant that explains the behaviour of the ego vehicle. \
                     Each example below gives the vehicle's control signals and a driving video, \
                     followed by questions and answers about the current action, the reason for \
                     it, and the control signals for the next step. Answer the questions of the \
                     current query in the same way."
                .into(),
            example_header: "Example {n}:".into(),
            query_header: "Current query:".into(),
            control_line: "Control Signal: {control}".into(),
            video_line: "Video: {video}".into(),
            video_token: "<video>".into(),
            question_prefix: "Q: ".into(),
            answer_prefix: "A:".into(),
            action_question: "What is the current action of the ego vehicle?".into(),
            justification_question: "Why does the ego vehicle take this action?".into(),
            control_question: "Predict the speed and course of the ego vehicle for the next step."
                .into(),
        }
    }
}

/// On-disk form; every field is optional so a missing one can be named.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    version: Option<String>,
    system: Option<String>,
    example_header: Option<String>,
    query_header: Option<String>,
    control_line: Option<String>,
    video_line: Option<String>,
    video_token: Option<String>,
    question_prefix: Option<String>,
    answer_prefix: Option<String>,
    action_question: Option<String>,
    justification_question: Option<String>,
    control_question: Option<String>,
}

fn required(v: Option<String>, name: &'static str) -> Result<String> {
    match v {
        Some(s) if !s.trim().is_empty() => Ok(s),
        _ => Err(Error::MissingTemplateField(name)),
    }
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawTemplate =
            toml::from_str(text).map_err(|e| Error::Config(format!("template: {e}")))?;
        let t = Self {
            version: required(raw.version, "version")?,
            system: required(raw.system, "system")?,
            example_header: required(raw.example_header, "example_header")?,
            query_header: required(raw.query_header, "query_header")?,
            control_line: required(raw.control_line, "control_line")?,
            video_line: required(raw.video_line, "video_line")?,
            video_token: required(raw.video_token, "video_token")?,
            question_prefix: raw.question_prefix.unwrap_or_default(),
            answer_prefix: required(raw.answer_prefix, "answer_prefix")?,
            action_question: required(raw.action_question, "action_question")?,
            justification_question: required(raw.justification_question, "justification_question")?,
            control_question: required(raw.control_question, "control_question")?,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fsio::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("template serializes")
    }

    /// Placeholders present, and the video token confined to `video_line`.
    pub fn validate(&self) -> Result<()> {
        if !self.example_header.contains("{n}") {
            return Err(Error::MissingTemplateField("example_header"));
        }
        if !self.control_line.contains("{control}") {
            return Err(Error::MissingTemplateField("control_line"));
        }
        if !self.video_line.contains("{video}") {
            return Err(Error::MissingTemplateField("video_line"));
        }
        if self.video_token.is_empty() {
            return Err(Error::MissingTemplateField("video_token"));
        }
        let others = [
            &self.system,
            &self.example_header,
            &self.query_header,
            &self.control_line,
            &self.action_question,
            &self.justification_question,
            &self.control_question,
            &self.question_prefix,
            &self.answer_prefix,
        ];
        if others.iter().any(|s| s.contains(&self.video_token)) {
            return Err(Error::Config(format!(
                "video token {:?} may only appear through video_line",
                self.video_token
            )));
        }
        if self
            .video_line
            .replace("{video}", "")
            .contains(&self.video_token)
        {
            return Err(Error::Config("video_line repeats the video token".into()));
        }
        Ok(())
    }
}
