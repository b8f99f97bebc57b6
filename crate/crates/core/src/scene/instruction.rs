use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noun phrases extracted from a grasp command.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub context: String,
    pub object: String,
}

const VERBS: [&str; 3] = ["grasp the ", "pick up the ", "pick the "];
const PREPS: [&str; 2] = [" from the ", " on the "];

/// Parses `grasp|pick [up] the <object> from|on the <context>`, matching
/// keywords case-insensitively and returning both phrases verbatim.
pub fn parse_instruction(command: &str) -> Result<Instruction> {
    let err = || Error::Instruction {
        input: command.to_string(),
    };
    let text = command.trim();
    let text = text.strip_suffix('.').unwrap_or(text).trim_end();
    // ASCII lowering keeps byte offsets aligned with `text`.
    let lower = text.to_ascii_lowercase();
    let start = VERBS
        .iter()
        .find(|v| lower.starts_with(*v))
        .map(|v| v.len())
        .ok_or_else(err)?;
    let (split, prep_len) = PREPS
        .iter()
        .filter_map(|p| lower[start..].find(p).map(|i| (start + i, p.len())))
        .min()
        .ok_or_else(err)?;
    let object = text[start..split].trim();
    let context = text[split + prep_len..].trim();
    if object.is_empty() || context.is_empty() {
        return Err(err());
    }
    Ok(Instruction {
        context: context.to_string(),
        object: object.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(s: &str) -> (String, String) {
        let i = parse_instruction(s).unwrap();
        (i.context, i.object)
    }

    #[test]
    fn canonical_command() {
        assert_eq!(
            pair("Grasp the green bottle from the steel table"),
            ("steel table".into(), "green bottle".into())
        );
    }

    #[test]
    fn template_variants() {
        assert_eq!(pair("pick the mug from the shelf"), ("shelf".into(), "mug".into()));
        assert_eq!(pair("PICK UP THE Red Cup on the Desk."), ("Desk".into(), "Red Cup".into()));
        assert_eq!(pair("  grasp the box on the top shelf "), ("top shelf".into(), "box".into()));
    }

    #[test]
    fn rejects_non_matching() {
        for bad in ["hello world", "grasp the from the table", "grasp the mug", "take the mug from the shelf", "grasp the mug from the "] {
            let e = parse_instruction(bad).unwrap_err();
            assert!(e.to_string().contains("grasp|pick the <object>"), "{bad}");
        }
    }
}
