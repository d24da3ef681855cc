//! In-context prompt assembly and the generator interface.
//!
//! A prompt has three parts, always in this order: the constant system
//! text, one block per retrieved exemplar (best match first, answers
//! filled in), and the current query with its answers left blank.

mod control;
mod generator;
mod template;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::ScenarioRecord;

pub use control::{
    format_value, parse_control_signals, parse_list, parse_number, render_lists,
    serialize_control_signals, ControlLayout,
};
pub use generator::{
    echo_generate, external_generate, parse_response, render_request, EchoGenerator, Endpoint,
    ExternalGenerator, GeneratedAnswer, Generator, GeneratorRequest,
};
pub use template::PromptTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Action,
    Justification,
    Control,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Action, Task::Justification, Task::Control];
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Action => "action",
            Task::Justification => "justification",
            Task::Control => "control",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "action" => Ok(Task::Action),
            "justification" => Ok(Task::Justification),
            "control" => Ok(Task::Control),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

/// Labels of the next-step control answer.
pub const SPEED_LABEL: &str = "Speed";
pub const COURSE_LABEL: &str = "Course";

/// `Speed: [x] Course: [y]`.
pub fn render_control_answer(speed: f64, course: f64) -> String {
    render_lists(&[(SPEED_LABEL, &[speed]), (COURSE_LABEL, &[course])])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub system_text: String,
    pub icl_blocks: Vec<String>,
    pub query_block: String,
    pub tasks: Vec<Task>,
    /// Exemplar ids in block order.
    pub exemplar_ids: Vec<String>,
    pub query_id: String,
}

impl PromptBundle {
    /// System text, exemplar blocks and query block separated by blank lines.
    pub fn render(&self) -> String {
        let mut parts: Vec<&str> = vec![&self.system_text];
        parts.extend(self.icl_blocks.iter().map(String::as_str));
        parts.push(&self.query_block);
        let mut out = parts.join("\n\n");
        out.push('\n');
        out
    }
}

fn block_lines(
    t: &PromptTemplate,
    header: String,
    r: &ScenarioRecord,
    layout: &ControlLayout,
) -> Result<Vec<String>> {
    Ok(vec![
        header,
        t.control_line.replace(
            "{control}",
            &serialize_control_signals(&r.control_vec, layout)?,
        ),
        t.video_line.replace("{video}", &t.video_token),
    ])
}

fn question(t: &PromptTemplate, task: Task) -> String {
    let q = match task {
        Task::Action => &t.action_question,
        Task::Justification => &t.justification_question,
        Task::Control => &t.control_question,
    };
    format!("{}{}", t.question_prefix, q)
}

fn answer(t: &PromptTemplate, text: &str) -> String {
    if text.is_empty() {
        t.answer_prefix.trim_end().to_string()
    } else if t.answer_prefix.ends_with(char::is_whitespace) {
        format!("{}{}", t.answer_prefix, text)
    } else {
        format!("{} {}", t.answer_prefix, text)
    }
}

/// Renders the exemplars (in the given rank order) with their ground-truth
/// answers, then the query with blank answers for `tasks`.
pub fn assemble_prompt(
    query: &ScenarioRecord,
    neighbors: &[&ScenarioRecord],
    template: &PromptTemplate,
    layout: &ControlLayout,
    tasks: &[Task],
) -> Result<PromptBundle> {
    template.validate()?;
    if tasks.is_empty() {
        return Err(Error::Config("at least one task must be requested".into()));
    }
    let mut tasks: Vec<Task> = tasks.to_vec();
    tasks.sort();
    tasks.dedup();

    let mut icl_blocks = Vec::with_capacity(neighbors.len());
    for (rank, r) in neighbors.iter().enumerate() {
        let header = template
            .example_header
            .replace("{n}", &(rank + 1).to_string());
        let mut lines = block_lines(template, header, r, layout)?;
        for task in Task::ALL {
            lines.push(question(template, task));
            let a = match task {
                Task::Action => r.action_text.clone(),
                Task::Justification => r.justification_text.clone(),
                Task::Control => render_control_answer(r.target_speed, r.target_course),
            };
            lines.push(answer(template, &a));
        }
        icl_blocks.push(lines.join("\n"));
    }

    let mut lines = block_lines(template, template.query_header.clone(), query, layout)?;
    for &task in &tasks {
        lines.push(question(template, task));
        lines.push(answer(template, ""));
    }

    Ok(PromptBundle {
        system_text: template.system.clone(),
        icl_blocks,
        query_block: lines.join("\n"),
        tasks,
        exemplar_ids: neighbors.iter().map(|r| r.id.clone()).collect(),
        query_id: query.id.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, action: &str, just: &str, speed: f64, course: f64) -> ScenarioRecord {
        ScenarioRecord {
            id: id.into(),
            video_emb: vec![1.0, 0.0],
            control_vec: vec![5.0, 1.5, 0.0, 0.01],
            action_text: action.into(),
            justification_text: just.into(),
            target_speed: speed,
            target_course: course,
        }
    }

    #[test]
    fn zero_exemplars_is_query_only() {
        let q = rec("q", "a", "b", 1.0, 0.0);
        let b = assemble_prompt(
            &q,
            &[],
            &PromptTemplate::default(),
            &ControlLayout::with_intervals(1),
            &Task::ALL,
        )
        .unwrap();
        assert!(b.icl_blocks.is_empty());
        assert_eq!(b.render().matches("<video>").count(), 1);
    }

    #[test]
    fn query_has_one_question_per_task() {
        let q = rec("q", "a", "b", 1.0, 0.0);
        let n = rec("n", "c", "d", 2.0, 0.5);
        let t = PromptTemplate::default();
        let b = assemble_prompt(
            &q,
            &[&n],
            &t,
            &ControlLayout::with_intervals(1),
            &[Task::Control, Task::Action, Task::Control],
        )
        .unwrap();
        assert_eq!(b.tasks, vec![Task::Action, Task::Control]);
        assert_eq!(b.query_block.matches(&t.action_question).count(), 1);
        assert_eq!(b.query_block.matches(&t.control_question).count(), 1);
        assert_eq!(b.query_block.matches(&t.justification_question).count(), 0);
        for block in b.icl_blocks.iter().chain([&b.query_block]) {
            assert_eq!(block.matches("<video>").count(), 1);
        }
        assert!(b.icl_blocks[0].ends_with("A: Speed: [2.00] Course: [0.50]"));
    }

    #[test]
    fn layout_mismatch_is_error() {
        let q = rec("q", "a", "b", 1.0, 0.0);
        assert!(assemble_prompt(
            &q,
            &[],
            &PromptTemplate::default(),
            &ControlLayout::with_intervals(2),
            &Task::ALL
        )
        .is_err());
    }
}
