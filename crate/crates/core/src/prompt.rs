//! Deterministic planner-prompt assembly and the skill registry.
//!
//! A prompt is seven sections in fixed order: role preamble, skill API
//! listing, task-decomposition examples, memory-importance note, the
//! instruction, recalled short-term unit texts, and the serialized scene
//! graph. Default section texts ship as data files and can be swapped by
//! callers; they are fixtures, not normative.

use std::fmt::Write as _;

use thiserror::Error;

/// Fixture texts shipped with the crate.
pub const DEFAULT_ROLE_TEXT: &str = include_str!("../data/role.txt");
pub const DEFAULT_EXAMPLES_TEXT: &str = include_str!("../data/decomposition_examples.txt");
pub const DEFAULT_MEMORY_NOTE_TEXT: &str = include_str!("../data/memory_note.txt");

/// Section headers in their fixed order.
pub const SECTION_HEADERS: [&str; 7] = [
    "## Role",
    "## Skill API",
    "## Task Decomposition Examples",
    "## Memory Note",
    "## Instruction",
    "## Short-Term Memory",
    "## Long-Term Memory",
];

/// Placeholder emitted when no short-term units were recalled.
pub const NO_SHORT_TERM_MARKER: &str = "(no short-term memory recalled)";

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("skill {0:?} is already registered")]
    DuplicateSkill(String),
    #[error("instruction must be non-empty")]
    EmptyInstruction,
    #[error("task must be non-empty")]
    EmptyTask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkillCategory {
    Manipulation,
    Navigation,
}

/// One pre-programmed agent skill exposed to the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillSpec {
    pub name: String,
    pub params: Vec<String>,
    pub doc: String,
    pub category: SkillCategory,
}

impl SkillSpec {
    fn new(name: &str, params: &[&str], doc: &str, category: SkillCategory) -> Self {
        Self {
            name: name.to_string(),
            params: params.iter().map(|p| p.to_string()).collect(),
            doc: doc.to_string(),
            category,
        }
    }

    /// `def Name(params):` signature line.
    pub fn signature(&self) -> String {
        format!("def {}({}):", self.name, self.params.join(", "))
    }
}

/// Closed set of skills; names are unique.
#[derive(Debug, Clone, Default)]
pub struct SkillRegistry {
    skills: Vec<SkillSpec>,
}

impl SkillRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, skill: SkillSpec) -> Result<(), PromptError> {
        if self.skills.iter().any(|s| s.name == skill.name) {
            return Err(PromptError::DuplicateSkill(skill.name));
        }
        self.skills.push(skill);
        Ok(())
    }

    pub fn specs(&self) -> &[SkillSpec] {
        &self.skills
    }

    pub fn get(&self, name: &str) -> Option<&SkillSpec> {
        self.skills.iter().find(|s| s.name == name)
    }

    /// Render the skill API section: one stub function per skill with its
    /// doc comment.
    pub fn render_api(&self) -> String {
        let mut out = String::new();
        for skill in &self.skills {
            let _ = writeln!(out, "{}", skill.signature());
            for line in skill.doc.lines() {
                let _ = writeln!(out, "    # {line}");
            }
            let _ = writeln!(out, "    pass");
            let _ = writeln!(out);
        }
        out.trim_end().to_string()
    }
}

/// The thirteen built-in skills with their canonical parameter names.
pub fn default_skill_registry() -> SkillRegistry {
    use SkillCategory::{Manipulation, Navigation};
    let mut registry = SkillRegistry::new();
    let skills = [
        SkillSpec::new(
            "GoToObject",
            &["robots", "dest_obj"],
            "Navigate to the object, if its location is already known.",
            Navigation,
        ),
        SkillSpec::new(
            "PickupObject",
            &["robot", "pick_obj"],
            "Pick up the object; it must be within the agent's line of sight.",
            Manipulation,
        ),
        SkillSpec::new(
            "PutObject",
            &["robot", "put_obj", "recp"],
            "Put the currently held object in the designated location.",
            Manipulation,
        ),
        SkillSpec::new("SwitchOn", &["robot", "sw_obj"], "Turn on a switch.", Manipulation),
        SkillSpec::new("SwitchOff", &["robot", "sw_obj"], "Turn off a switch.", Manipulation),
        SkillSpec::new(
            "OpenObject",
            &["robot", "sw_obj"],
            "Open the interaction object, e.g. a fridge, cabinet, or drawer.",
            Manipulation,
        ),
        SkillSpec::new(
            "CloseObject",
            &["robot", "sw_obj"],
            "Close the interaction object; it must already be open.",
            Manipulation,
        ),
        SkillSpec::new("BreakObject", &["robot", "sw_obj"], "Break the interactable object.", Manipulation),
        SkillSpec::new(
            "SliceObject",
            &["robot", "sw_obj"],
            "Slice the interactable object, e.g. an apple, tomato, or bread.",
            Manipulation,
        ),
        SkillSpec::new(
            "ThrowObject",
            &["robot", "sw_obj"],
            "Throw away the object; it must already be picked up.",
            Manipulation,
        ),
        SkillSpec::new(
            "Explore",
            &["robot", "sw_obj", "position"],
            "Explore the environment in the given sequence of locations until the target object becomes visible.",
            Navigation,
        ),
        SkillSpec::new("ToggleOn", &["robot", "sw_obj"], "Toggle on the interaction object, e.g. a lamp, stove, or microwave.", Manipulation),
        SkillSpec::new("ToggleOff", &["robot", "sw_obj"], "Toggle off the interaction object.", Manipulation),
    ];
    for skill in skills {
        registry.register(skill).expect("built-in names are unique");
    }
    registry
}

/// Everything that goes into one planner prompt, in section order.
#[derive(Debug, Clone)]
pub struct PromptBundle {
    pub role_text: String,
    pub skill_api_text: String,
    pub examples_text: String,
    pub memory_note_text: String,
    pub instruction: String,
    pub recalled_units: Vec<String>,
    pub scene_graph_text: String,
}

impl PromptBundle {
    /// A bundle with the default fixture texts and the default registry's
    /// skill API listing.
    pub fn with_defaults(
        instruction: impl Into<String>,
        recalled_units: Vec<String>,
        scene_graph_text: impl Into<String>,
    ) -> Self {
        Self {
            role_text: DEFAULT_ROLE_TEXT.trim_end().to_string(),
            skill_api_text: default_skill_registry().render_api(),
            examples_text: DEFAULT_EXAMPLES_TEXT.trim_end().to_string(),
            memory_note_text: DEFAULT_MEMORY_NOTE_TEXT.trim_end().to_string(),
            instruction: instruction.into(),
            recalled_units,
            scene_graph_text: scene_graph_text.into(),
        }
    }
}

/// Concatenate the bundle into the final prompt, sections in fixed order.
pub fn build_prompt(bundle: &PromptBundle) -> Result<String, PromptError> {
    if bundle.instruction.trim().is_empty() {
        return Err(PromptError::EmptyInstruction);
    }
    let short_term = if bundle.recalled_units.is_empty() {
        NO_SHORT_TERM_MARKER.to_string()
    } else {
        bundle
            .recalled_units
            .iter()
            .map(|u| format!("- {u}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let sections = [
        bundle.role_text.as_str(),
        bundle.skill_api_text.as_str(),
        bundle.examples_text.as_str(),
        bundle.memory_note_text.as_str(),
        bundle.instruction.as_str(),
        short_term.as_str(),
        bundle.scene_graph_text.trim_end(),
    ];
    let mut out = String::new();
    for (header, body) in SECTION_HEADERS.iter().zip(sections) {
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{body}");
        let _ = writeln!(out);
    }
    Ok(out.trim_end().to_string() + "\n")
}

/// The step-by-step image-analysis prompt, with the task substituted and
/// the [Image] placeholder left for the caller to fill.
pub fn vlm_state_prompt(task: &str) -> Result<String, PromptError> {
    if task.trim().is_empty() {
        return Err(PromptError::EmptyTask);
    }
    Ok(format!(
        "<System Role> As an image analysis expert, your task is to infer the state of objects in the image through step-by-step reasoning.\n\
         \n\
         <User Role>\n\
         1. Provide a detailed description of this image [Image].\n\
         2. From the given task \"{task}\", extract the relevant content from the first step's image description that pertains to the mentioned objects.\n\
         3. Based on the object descriptions extracted in the second step, match each object to one of the following states: heated, cooked, sliced, cleaned, dirty, filled, used up, off, on, opened, closed, none.\n\
         4. Summarize the results from step three in the following format: object: state.\n"
    ))
}
