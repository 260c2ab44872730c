use std::collections::BTreeSet;
use std::fmt;

use super::issues::{Issue, IssueType};
use crate::frontend::Program;

/// What a `//@ expect:` comment promises about its file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Expectation {
    Issue {
        file: String,
        issue_type: IssueType,
        line: u32,
    },
    Clean {
        file: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mismatch {
    Missing {
        file: String,
        issue_type: IssueType,
        line: u32,
    },
    Unexpected {
        file: String,
        issue_type: IssueType,
        line: u32,
        procedure: String,
    },
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::Missing {
                file,
                issue_type,
                line,
            } => write!(f, "{file}:{line}: expected {issue_type}, not reported"),
            Mismatch::Unexpected {
                file,
                issue_type,
                line,
                procedure,
            } => write!(f, "{file}:{line}: unexpected {issue_type} in `{procedure}`"),
        }
    }
}

/// `expect: clean` or `expect: <issue_type> @ <line>`.
pub fn parse_expectations(program: &Program) -> Result<Vec<Expectation>, String> {
    let mut out = Vec::new();
    for a in &program.annotations {
        let Some(rest) = a.text.strip_prefix("expect:") else {
            continue;
        };
        let file = program.file_path(a.file).to_string();
        let rest = rest.trim();
        if rest == "clean" {
            out.push(Expectation::Clean { file });
            continue;
        }
        let bad = || format!("{file}:{}: malformed expectation `{}`", a.line, a.text);
        let (ty, line) = rest.split_once('@').ok_or_else(bad)?;
        let issue_type: IssueType = ty
            .trim()
            .parse()
            .map_err(|e| format!("{file}:{}: {e}", a.line))?;
        let line: u32 = line.trim().parse().map_err(|_| bad())?;
        out.push(Expectation::Issue {
            file,
            issue_type,
            line,
        });
    }
    out.sort();
    Ok(out)
}

/// Compare issues against expectations, for files that carry any.
pub fn check_expectations(expectations: &[Expectation], issues: &[Issue]) -> Vec<Mismatch> {
    let mut files = BTreeSet::new();
    let mut wanted = BTreeSet::new();
    for e in expectations {
        match e {
            Expectation::Clean { file } => {
                files.insert(file.clone());
            }
            Expectation::Issue {
                file,
                issue_type,
                line,
            } => {
                files.insert(file.clone());
                wanted.insert((file.clone(), *line, *issue_type));
            }
        }
    }
    let mut got = BTreeSet::new();
    let mut out = Vec::new();
    for i in issues.iter().filter(|i| files.contains(&i.file)) {
        let key = (i.file.clone(), i.line, i.issue_type);
        if !wanted.contains(&key) {
            out.push(Mismatch::Unexpected {
                file: i.file.clone(),
                issue_type: i.issue_type,
                line: i.line,
                procedure: i.procedure.clone(),
            });
        }
        got.insert(key);
    }
    for (file, line, issue_type) in wanted {
        if !got.contains(&(file.clone(), line, issue_type)) {
            out.push(Mismatch::Missing {
                file,
                issue_type,
                line,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_sources;

    fn issue(file: &str, line: u32, t: IssueType) -> Issue {
        Issue {
            issue_type: t,
            procedure: "f".into(),
            file: file.into(),
            line,
            trace: Vec::new(),
            witness_precondition: "true".into(),
            reachable_from_entry: true,
            intended: false,
            cycle: Vec::new(),
            k_used: 3,
        }
    }

    #[test]
    fn parses_and_checks() {
        let p = parse_sources(&[
            (
                "a.mc".into(),
                "//@ expect: infinite_loop @ 3\nvoid f() {\n while (1) { }\n}\n".into(),
            ),
            ("b.mc".into(), "//@ expect: clean\nvoid g() { }\n".into()),
            ("c.mc".into(), "void h() { }\n".into()),
        ])
        .unwrap();
        let ex = parse_expectations(&p).unwrap();
        assert_eq!(ex.len(), 2);
        let ok = [
            issue("a.mc", 3, IssueType::InfiniteLoop),
            issue("c.mc", 1, IssueType::InfiniteGoto),
        ];
        assert!(check_expectations(&ex, &ok).is_empty());
        let bad = [issue("b.mc", 2, IssueType::InfiniteLoop)];
        let m = check_expectations(&ex, &bad);
        assert_eq!(m.len(), 2);
        assert!(matches!(m[0], Mismatch::Unexpected { .. }));
        assert!(matches!(m[1], Mismatch::Missing { line: 3, .. }));
    }

    #[test]
    fn rejects_malformed() {
        let p = parse_sources(&[(
            "a.mc".into(),
            "//@ expect: infinite_loop\nvoid f() { }\n".into(),
        )])
        .unwrap();
        assert!(parse_expectations(&p).is_err());
        let p = parse_sources(&[(
            "a.mc".into(),
            "//@ expect: forever @ 2\nvoid f() { }\n".into(),
        )])
        .unwrap();
        assert!(parse_expectations(&p).is_err());
    }
}
