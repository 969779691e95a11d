/// Candidate ABC tunes in model output, in order of appearance.
///
/// Fenced blocks (```` ``` ````, with or without a language tag) win when at
/// least one of them has a line starting with `X:`; their contents are
/// returned verbatim without the fences. Otherwise bare regions are taken:
/// from an `X:` line up to the first blank line after some body text, a
/// fence line, or the end of input.
pub fn extract_abc_blocks(transcript: &str) -> Vec<String> {
    let lines: Vec<&str> = transcript.lines().collect();
    let fenced = fenced_blocks(&lines);
    if !fenced.is_empty() {
        return fenced;
    }
    bare_regions(&lines)
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn is_reference_line(line: &str) -> bool {
    line.trim_start().starts_with("X:")
}

fn fenced_blocks(lines: &[&str]) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if !is_fence(lines[i]) {
            i += 1;
            continue;
        }
        let start = i + 1;
        let mut end = start;
        while end < lines.len() && !is_fence(lines[end]) {
            end += 1;
        }
        let body = &lines[start..end];
        if body.iter().any(|l| is_reference_line(l)) {
            blocks.push(body.join("\n"));
        }
        i = end + 1;
    }
    blocks
}

fn bare_regions(lines: &[&str]) -> Vec<String> {
    let mut regions = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if !is_reference_line(lines[i]) {
            i += 1;
            continue;
        }
        let start = i;
        let mut seen_body = false;
        i += 1;
        while i < lines.len() {
            let line = lines[i];
            if is_fence(line) {
                break;
            }
            if line.trim().is_empty() {
                if seen_body {
                    break;
                }
            } else if !is_field_line(line) {
                seen_body = true;
            }
            i += 1;
        }
        let region: Vec<&str> = lines[start..i].to_vec();
        regions.push(region.join("\n").trim_end().to_string());
    }
    regions
}

fn is_field_line(line: &str) -> bool {
    let mut chars = line.trim_start().chars();
    matches!((chars.next(), chars.next()), (Some(c), Some(':')) if c.is_ascii_alphabetic())
        || line.trim_start().starts_with('%')
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEMPLATE: &str = "X:1\nT:Title\nC:Composer\nM:4/4\nL:1/8\nK:C\n|:GABc d2e2|f2d2 e4|g4 f2e2|d6 z2:|\n|:c2A2 B2G2|A2F2 G4|E2c2 D2B,2|C6 z2:|";

    #[test]
    fn single_fenced_template() {
        let text = format!("Here is the melody:\n```\n{TEMPLATE}\n```\nEnjoy.");
        assert_eq!(extract_abc_blocks(&text), vec![TEMPLATE.to_string()]);
    }

    #[test]
    fn empty_transcript() {
        assert!(extract_abc_blocks("").is_empty());
        assert!(extract_abc_blocks("no music here\n```\nplain code\n```").is_empty());
    }

    #[test]
    fn only_qualifying_fences() {
        let text = "```\nsome notes\n```\ntext\n```abc\nX:1\nK:C\nC8|\n```\n";
        assert_eq!(extract_abc_blocks(text), vec!["X:1\nK:C\nC8|".to_string()]);
    }

    #[test]
    fn several_fences_in_order() {
        let text = "```\nX:1\nK:C\nC|\n```\n```\nX:2\nK:G\nG|\n```";
        let blocks = extract_abc_blocks(text);
        assert_eq!(blocks.len(), 2);
        assert!(blocks[1].starts_with("X:2"));
    }

    #[test]
    fn unclosed_fence_runs_to_end() {
        let text = "```abc\nX:1\nK:C\nC8|";
        assert_eq!(extract_abc_blocks(text), vec!["X:1\nK:C\nC8|".to_string()]);
    }

    #[test]
    fn bare_region_fallback() {
        let text = "Sure!\nX:1\nT:t\n\nM:4/4\nL:1/8\nK:C\nC8|\nD8|\n\nThat is all.\nX:2\nK:C\nE8|";
        let regions = extract_abc_blocks(text);
        assert_eq!(regions.len(), 2);
        assert_eq!(regions[0], "X:1\nT:t\n\nM:4/4\nL:1/8\nK:C\nC8|\nD8|");
        assert_eq!(regions[1], "X:2\nK:C\nE8|");
    }

    #[test]
    fn idempotent_on_own_output() {
        let text = format!("a\n```\n{TEMPLATE}\n```\n");
        let first = extract_abc_blocks(&text);
        let again = extract_abc_blocks(&format!("```\n{}\n```", first[0]));
        assert_eq!(again, first);
    }
}
