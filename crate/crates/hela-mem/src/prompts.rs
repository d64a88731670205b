//! Prompt templates used for knowledge distillation and answer generation.
//! The templates live as plain text files under `prompts/` and are filled by
//! simple placeholder substitution.

pub const EXTRACTION_SYSTEM: &str = include_str!("../prompts/extraction_system.txt");
pub const EXTRACTION_USER_TEMPLATE: &str = include_str!("../prompts/extraction_user.txt");
pub const RESPONSE_SYSTEM: &str = include_str!("../prompts/response_system.txt");
pub const RESPONSE_USER_TEMPLATE: &str = include_str!("../prompts/response_user.txt");

/// Fill the knowledge-extraction template with a rendered memory cluster.
pub fn render_extraction_prompt(conversation: &str) -> String {
    EXTRACTION_USER_TEMPLATE.replace("{conversation}", conversation)
}

/// Fill the answer-generation template with the three context blocks and the
/// question.
pub fn render_response_prompt(
    episodic_context: &str,
    semantic_knowledge: &str,
    user_model: &str,
    query: &str,
) -> String {
    RESPONSE_USER_TEMPLATE
        .replace("{episodic_context}", episodic_context)
        .replace("{semantic_knowledge}", semantic_knowledge)
        .replace("{user_model}", user_model)
        .replace("{query}", query)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extraction_template_has_expected_sections() {
        assert!(EXTRACTION_SYSTEM.contains("knowledge extraction engine"));
        assert!(EXTRACTION_USER_TEMPLATE.contains("1. USER CHARACTERISTICS:"));
        assert!(EXTRACTION_USER_TEMPLATE.contains("2. FACTUAL INFORMATION:"));
        assert!(EXTRACTION_USER_TEMPLATE.contains("Memory Cluster: {conversation}"));
    }

    #[test]
    fn response_template_has_expected_placeholders() {
        assert!(RESPONSE_SYSTEM.contains("15 July 2023"));
        for placeholder in [
            "{episodic_context}",
            "{semantic_knowledge}",
            "{user_model}",
            "{query}",
        ] {
            assert!(RESPONSE_USER_TEMPLATE.contains(placeholder));
        }
    }

    #[test]
    fn rendering_substitutes_every_placeholder() {
        let filled = render_response_prompt("E", "S", "U", "Q?");
        assert!(!filled.contains('{'));
        assert!(filled.contains("<EPISODIC MEMORIES>\nE"));
        assert!(filled.contains("Question: Q?"));
    }
}
