use std::fmt::Write;

use serde::Serialize;

use super::issues::Issue;

pub const JSON_VERSION: u32 = 1;

#[derive(Serialize)]
struct JsonReport<'a> {
    version: u32,
    tool: String,
    k: u32,
    issues: &'a [Issue],
}

/// Machine-readable report; issues keep their location order.
pub fn to_json(issues: &[Issue], k: u32) -> String {
    let r = JsonReport {
        version: JSON_VERSION,
        tool: format!("diverge {}", env!("CARGO_PKG_VERSION")),
        k,
        issues,
    };
    let mut s = serde_json::to_string_pretty(&r).expect("report serializes");
    s.push('\n');
    s
}

fn rank(i: &Issue) -> u8 {
    match (i.intended, i.reachable_from_entry) {
        (false, true) => 0,
        (false, false) => 1,
        (true, _) => 2,
    }
}

/// Human-readable report, most relevant issues first.
pub fn to_text(issues: &[Issue]) -> String {
    let mut ordered: Vec<&Issue> = issues.iter().collect();
    ordered.sort_by_key(|i| rank(i));
    let mut out = String::new();
    for i in ordered {
        let mut tags = Vec::new();
        if i.intended {
            tags.push("intended");
        }
        if !i.reachable_from_entry {
            tags.push("not reached from entry");
        }
        let tags = if tags.is_empty() {
            String::new()
        } else {
            format!(" [{}]", tags.join(", "))
        };
        let _ = writeln!(
            out,
            "{}:{}: {} in `{}`{}",
            i.file, i.line, i.issue_type, i.procedure, tags
        );
        let _ = writeln!(out, "  when: {}", i.witness_precondition);
        if !i.cycle.is_empty() {
            let _ = writeln!(out, "  cycle: {}", i.cycle.join(" -> "));
        }
        for t in &i.trace {
            let _ = writeln!(out, "    {}:{}: {}", t.file, t.line, t.description);
        }
    }
    let unintended = issues.iter().filter(|i| !i.intended).count();
    let _ = writeln!(
        out,
        "{} issue{} ({} unintended)",
        issues.len(),
        if issues.len() == 1 { "" } else { "s" },
        unintended
    );
    out
}
