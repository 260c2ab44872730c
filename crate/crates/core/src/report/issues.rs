use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::models::{ModelKind, ModelTable};
use crate::frontend::Program;
use crate::symstate::{Divergence, DivergenceKind, SpecKind, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueType {
    InfiniteGoto,
    InfiniteLoop,
    InfiniteRecursion,
    MutualRecursion,
}

impl IssueType {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueType::InfiniteGoto => "infinite_goto",
            IssueType::InfiniteLoop => "infinite_loop",
            IssueType::InfiniteRecursion => "infinite_recursion",
            IssueType::MutualRecursion => "mutual_recursion",
        }
    }

    pub fn of(kind: &DivergenceKind) -> IssueType {
        match kind {
            DivergenceKind::Loop { goto: true } => IssueType::InfiniteGoto,
            DivergenceKind::Loop { goto: false } => IssueType::InfiniteLoop,
            DivergenceKind::Recursion { cycle } if cycle.len() <= 1 => IssueType::InfiniteRecursion,
            DivergenceKind::Recursion { .. } => IssueType::MutualRecursion,
        }
    }
}

impl fmt::Display for IssueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for IssueType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "infinite_goto" => IssueType::InfiniteGoto,
            "infinite_loop" => IssueType::InfiniteLoop,
            "infinite_recursion" => IssueType::InfiniteRecursion,
            "mutual_recursion" => IssueType::MutualRecursion,
            other => return Err(format!("unknown issue type `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub file: String,
    pub line: u32,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub issue_type: IssueType,
    pub procedure: String,
    pub file: String,
    pub line: u32,
    pub trace: Vec<TraceEntry>,
    pub witness_precondition: String,
    pub reachable_from_entry: bool,
    pub intended: bool,
    pub cycle: Vec<String>,
    pub k_used: u32,
}

impl Issue {
    fn sort_key(&self) -> (&str, u32, IssueType, &str) {
        (&self.file, self.line, self.issue_type, &self.procedure)
    }
}

/// Entry points used for reachability: the given ones, else `main` if defined,
/// else every function.
pub fn default_entries(program: &Program, requested: &[String]) -> Vec<String> {
    if !requested.is_empty() {
        return requested.to_vec();
    }
    if program.function("main").is_some() {
        return vec!["main".to_string()];
    }
    program.functions.iter().map(|f| f.name.clone()).collect()
}

fn same_origin(a: &Divergence, b: &Divergence) -> bool {
    a.origin() == b.origin()
}

/// One issue per divergence found in a procedure's own body, deduplicated and
/// sorted by location.
pub fn derive_issues(
    program: &Program,
    summaries: &BTreeMap<String, Arc<Summary>>,
    models: &ModelTable,
    entries: &[String],
) -> Vec<Issue> {
    let file_of = |proc_name: &str| {
        program
            .function(proc_name)
            .map(|f| program.file_path(f.span.file).to_string())
            .unwrap_or_default()
    };
    let entry_divergences: Vec<&Divergence> = entries
        .iter()
        .filter_map(|e| summaries.get(e))
        .flat_map(|s| s.specs.iter())
        .filter_map(|s| s.divergence.as_ref())
        .collect();

    let mut seen_loops = BTreeSet::new();
    let mut seen_cycles = BTreeSet::new();
    let mut issues = Vec::new();
    for f in &program.functions {
        let Some(summary) = summaries.get(&f.name) else {
            continue;
        };
        for spec in &summary.specs {
            if spec.kind != SpecKind::InfiniteProgram {
                continue;
            }
            let Some(d) = &spec.divergence else {
                continue;
            };
            if d.propagated {
                continue;
            }
            let issue_type = IssueType::of(&d.kind);
            let cycle = match &d.kind {
                DivergenceKind::Recursion { cycle } => {
                    let set: BTreeSet<String> = cycle.iter().cloned().collect();
                    if !seen_cycles.insert(set) {
                        continue;
                    }
                    cycle.clone()
                }
                DivergenceKind::Loop { .. } => {
                    if !seen_loops.insert((d.procedure.clone(), d.line, issue_type)) {
                        continue;
                    }
                    Vec::new()
                }
            };
            let reachable = entries.contains(&d.procedure)
                || entry_divergences.iter().any(|e| same_origin(e, d));
            let blocking = d.trace.iter().any(|s| {
                s.call
                    .as_deref()
                    .is_some_and(|c| models.get(c) == Some(ModelKind::Blocking))
            });
            let marked = program.function(&d.procedure).is_some_and(|f| f.intended);
            issues.push(Issue {
                issue_type,
                procedure: d.procedure.clone(),
                file: file_of(&d.procedure),
                line: d.line,
                trace: d
                    .trace
                    .iter()
                    .map(|s| TraceEntry {
                        file: file_of(&s.procedure),
                        line: s.line,
                        description: s.description.clone(),
                    })
                    .collect(),
                witness_precondition: spec.precondition_string(&summary.params),
                reachable_from_entry: reachable,
                intended: marked || blocking,
                cycle,
                k_used: d.k,
            });
        }
    }
    issues.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    issues
}
