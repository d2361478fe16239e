use super::{is_label, FormatError, Story, StoryStep};

/// Parses `stories.md` (and `conversationtest.md`, which shares the grammar).
///
/// ```text
/// ## story name
/// * intent
///   - action
/// * intent: optional test utterance
///   - action
/// ```
pub fn parse_stories_markdown(text: &str) -> Result<Vec<Story>, FormatError> {
    let mut stories: Vec<(usize, Story)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix("## ") {
            let name = name.trim();
            if name.is_empty() {
                return Err(FormatError::parse(line_no, "story header without a name"));
            }
            stories.push((line_no, Story::new(name, Vec::new())));
        } else if let Some(rest) = trimmed.strip_prefix("* ") {
            let Some((_, story)) = stories.last_mut() else {
                return Err(FormatError::parse(line_no, "intent line before any story header"));
            };
            let (intent, utterance) = match rest.split_once(':') {
                Some((i, u)) => (i.trim(), Some(u.trim().to_string()).filter(|u| !u.is_empty())),
                None => (rest.trim(), None),
            };
            if !is_label(intent) {
                return Err(FormatError::parse(
                    line_no,
                    format!("intent name {intent:?} must match [a-z0-9_]+"),
                ));
            }
            story.steps.push(StoryStep {
                intent: intent.to_string(),
                utterance,
                actions: Vec::new(),
            });
        } else if let Some(action) = trimmed.strip_prefix("- ") {
            let step = stories.last_mut().and_then(|(_, s)| s.steps.last_mut());
            let Some(step) = step else {
                return Err(FormatError::parse(line_no, "action line before any intent line"));
            };
            let action = action.trim();
            if !is_label(action) {
                return Err(FormatError::parse(
                    line_no,
                    format!("action name {action:?} must match [a-z0-9_]+"),
                ));
            }
            step.actions.push(action.to_string());
        } else {
            return Err(FormatError::parse(line_no, format!("unexpected line {trimmed:?}")));
        }
    }

    stories
        .into_iter()
        .map(|(line, story)| {
            if story.steps.is_empty() {
                return Err(FormatError::validation(
                    Some(line),
                    format!("story {:?} has no steps", story.name),
                ));
            }
            if let Some(step) = story.steps.iter().find(|s| s.actions.is_empty()) {
                return Err(FormatError::validation(
                    Some(line),
                    format!("story {:?}: intent {:?} has no actions", story.name, step.intent),
                ));
            }
            Ok(story)
        })
        .collect()
}

pub fn write_stories_markdown(stories: &[Story]) -> String {
    let mut out = String::new();
    for story in stories {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&format!("## {}\n", story.name));
        for step in &story.steps {
            match &step.utterance {
                Some(u) => out.push_str(&format!("* {}: {}\n", step.intent, u)),
                None => out.push_str(&format!("* {}\n", step.intent)),
            }
            for action in &step.actions {
                out.push_str(&format!("  - {action}\n"));
            }
        }
    }
    out
}
