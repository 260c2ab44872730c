use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use sha2::{Digest, Sha256};

use super::db::SummaryDb;
use super::SummaryResult;
use crate::exec::{analyze_procedure, SummaryOracle, WidenConfig};
use crate::frontend::{Cfg, Program};
use crate::report::ModelTable;
use crate::symstate::Summary;

/// Strongly connected components of the call graph, callees before callers.
/// Members are listed in declaration order.
pub fn call_graph_sccs(program: &Program, cfgs: &BTreeMap<String, Cfg>) -> Vec<Vec<String>> {
    let (graph, _) = call_graph(program, cfgs);
    let order: BTreeMap<&str, usize> = program
        .functions
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.as_str(), i))
        .collect();
    let mut sccs: Vec<Vec<String>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut names: Vec<String> = c.into_iter().map(|n| graph[n].clone()).collect();
            names.sort_by_key(|n| order[n.as_str()]);
            names
        })
        .collect();
    // Tarjan yields a reverse topological order; fix ties by declaration.
    let pos: BTreeMap<String, usize> = sccs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |n| (n.clone(), i)))
        .collect();
    let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); sccs.len()];
    for e in graph.edge_indices() {
        let (a, b) = graph.edge_endpoints(e).expect("edge exists");
        let (ca, cb) = (pos[&graph[a]], pos[&graph[b]]);
        if ca != cb {
            deps[ca].insert(cb);
        }
    }
    let mut done = vec![false; sccs.len()];
    let mut out = Vec::with_capacity(sccs.len());
    while out.len() < sccs.len() {
        let next = (0..sccs.len())
            .filter(|&i| !done[i] && deps[i].iter().all(|&d| done[d]))
            .min_by_key(|&i| order[sccs[i][0].as_str()])
            .expect("component graph is acyclic");
        done[next] = true;
        out.push(next);
    }
    out.into_iter()
        .map(|i| std::mem::take(&mut sccs[i]))
        .collect()
}

fn call_graph(
    program: &Program,
    cfgs: &BTreeMap<String, Cfg>,
) -> (DiGraph<String, ()>, BTreeMap<String, NodeIndex>) {
    let mut graph = DiGraph::new();
    let mut index = BTreeMap::new();
    for f in &program.functions {
        index.insert(f.name.clone(), graph.add_node(f.name.clone()));
    }
    for f in &program.functions {
        for c in cfgs[&f.name].callees() {
            if let Some(&to) = index.get(&c) {
                graph.add_edge(index[&f.name], to, ());
            }
        }
    }
    (graph, index)
}

/// Summaries of a whole program, plus how many were taken from the database.
#[derive(Debug, Clone, Default)]
pub struct AnalysisRun {
    pub summaries: BTreeMap<String, Arc<Summary>>,
    /// Content key per procedure, for storing in a database.
    pub keys: BTreeMap<String, String>,
    pub reused: usize,
}

impl AnalysisRun {
    pub fn to_db(&self) -> SummaryDb {
        let mut db = SummaryDb::default();
        for (name, s) in &self.summaries {
            db.insert(name.clone(), self.keys[name].clone(), s.clone());
        }
        db
    }
}

/// Content keys: a procedure's key covers its component, the analysis settings,
/// the models and the keys of everything it calls.
fn content_keys(
    program: &Program,
    cfgs: &BTreeMap<String, Cfg>,
    sccs: &[Vec<String>],
    models: &ModelTable,
    config: &WidenConfig,
) -> BTreeMap<String, String> {
    let mut keys: BTreeMap<String, String> = BTreeMap::new();
    let mut settings = Sha256::new();
    settings.update(format!("{config:?}"));
    for (n, k) in models.iter() {
        settings.update(format!("{n}:{k};"));
    }
    for scc in sccs {
        let mut h = settings.clone();
        let members: BTreeSet<&String> = scc.iter().collect();
        let mut callees = BTreeSet::new();
        for name in scc {
            let f = program.function(name).expect("scc members are defined");
            h.update(program.file_path(f.span.file));
            h.update(format!("{f:?}"));
            for c in cfgs[name].callees() {
                if !members.contains(&c) {
                    if let Some(k) = keys.get(&c) {
                        callees.insert(k.clone());
                    }
                }
            }
        }
        for c in callees {
            h.update(c);
        }
        let digest = h.finalize();
        let key: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        for name in scc {
            keys.insert(name.clone(), key.clone());
        }
    }
    keys
}

/// Analysis of one component, with everything it calls already summarized.
struct Scheduler<'a> {
    cfgs: &'a BTreeMap<String, Cfg>,
    models: &'a ModelTable,
    config: &'a WidenConfig,
    done: &'a BTreeMap<String, Arc<Summary>>,
    summaries: BTreeMap<String, Arc<Summary>>,
    active: Vec<String>,
}

impl SummaryOracle for Scheduler<'_> {
    fn is_defined(&self, name: &str) -> bool {
        self.cfgs.contains_key(name)
    }

    fn request(&mut self, name: &str) -> SummaryResult {
        if let Some(s) = self.summaries.get(name).or_else(|| self.done.get(name)) {
            return SummaryResult::Found(s.clone());
        }
        if self.active.iter().any(|a| a == name) {
            return SummaryResult::MutualRecursion;
        }
        if !self.cfgs.contains_key(name) {
            return SummaryResult::UnknownProcedure;
        }
        SummaryResult::Found(self.analyze(name))
    }
}

impl Scheduler<'_> {
    fn analyze(&mut self, name: &str) -> Arc<Summary> {
        let cfgs = self.cfgs;
        let (models, config) = (self.models, self.config);
        self.active.push(name.to_string());
        let s = Arc::new(analyze_procedure(&cfgs[name], models, config, self));
        self.active.pop();
        self.summaries.insert(name.to_string(), s.clone());
        s
    }
}

struct Shared<'a> {
    cfgs: &'a BTreeMap<String, Cfg>,
    models: &'a ModelTable,
    config: &'a WidenConfig,
}

/// Summaries of one component. Members are entered in declaration order, so the
/// result depends only on the component and the summaries of its callees.
fn analyze_scc(
    scc: &[String],
    env: &Shared<'_>,
    done: &BTreeMap<String, Arc<Summary>>,
) -> Vec<(String, Arc<Summary>)> {
    let mut s = Scheduler {
        cfgs: env.cfgs,
        models: env.models,
        config: env.config,
        done,
        summaries: BTreeMap::new(),
        active: Vec::new(),
    };
    for name in scc {
        if !s.summaries.contains_key(name) {
            s.analyze(name);
        }
    }
    s.summaries
        .into_iter()
        .filter(|(n, _)| scc.contains(n))
        .collect()
}

const WORKER_STACK: usize = 256 << 20;

/// Summarize every function. Components of the call graph are analyzed in waves:
/// each wave holds the components whose callees are all summarized, and runs on
/// up to `jobs` threads. Results do not depend on `jobs`.
pub fn analyze_program(
    program: &Program,
    cfgs: &BTreeMap<String, Cfg>,
    models: &ModelTable,
    config: &WidenConfig,
    jobs: usize,
    db: Option<&SummaryDb>,
) -> AnalysisRun {
    let sccs = call_graph_sccs(program, cfgs);
    let keys = content_keys(program, cfgs, &sccs, models, config);

    let mut summaries: BTreeMap<String, Arc<Summary>> = BTreeMap::new();
    let mut reused = 0;
    let mut pending: Vec<&Vec<String>> = Vec::new();
    for scc in &sccs {
        let stored: Option<Vec<Arc<Summary>>> =
            db.and_then(|db| scc.iter().map(|n| db.lookup(n, &keys[n])).collect());
        match stored {
            Some(found) => {
                reused += found.len();
                summaries.extend(scc.iter().cloned().zip(found));
            }
            None => pending.push(scc),
        }
    }

    let pos: BTreeMap<&str, usize> = pending
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |n| (n.as_str(), i)))
        .collect();
    let deps: Vec<BTreeSet<usize>> = pending
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.iter()
                .flat_map(|n| cfgs[n].callees())
                .filter_map(|callee| pos.get(callee.as_str()).copied())
                .filter(|&d| d != i)
                .collect()
        })
        .collect();

    let env = Shared {
        cfgs,
        models,
        config,
    };
    let mut finished = vec![false; pending.len()];
    let mut remaining = pending.len();
    on_workers(jobs, || {
        while remaining > 0 {
            let wave: Vec<usize> = (0..pending.len())
                .filter(|&i| !finished[i] && deps[i].iter().all(|&d| finished[d]))
                .collect();
            let results = run_wave(&wave, &pending, &env, &summaries, jobs);
            for (i, r) in wave.iter().zip(results) {
                finished[*i] = true;
                summaries.extend(r);
            }
            remaining -= wave.len();
        }
    });
    AnalysisRun {
        summaries,
        keys,
        reused,
    }
}

#[cfg(feature = "parallel")]
fn on_workers(jobs: usize, f: impl FnOnce() + Send) {
    if jobs <= 1 {
        return on_big_stack(f);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .stack_size(WORKER_STACK)
        .build()
        .expect("thread pool");
    pool.install(f);
}

#[cfg(not(feature = "parallel"))]
fn on_workers(_jobs: usize, f: impl FnOnce() + Send) {
    on_big_stack(f)
}

// Deeply nested programs recurse deeply in the executor.
fn on_big_stack(f: impl FnOnce() + Send) {
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(WORKER_STACK)
            .spawn_scoped(scope, f)
            .expect("analysis thread")
            .join()
            .expect("analysis thread panicked")
    })
}

type WaveResult = Vec<Vec<(String, Arc<Summary>)>>;

#[cfg(feature = "parallel")]
fn run_wave(
    wave: &[usize],
    sccs: &[&Vec<String>],
    env: &Shared<'_>,
    done: &BTreeMap<String, Arc<Summary>>,
    jobs: usize,
) -> WaveResult {
    use rayon::prelude::*;
    if jobs <= 1 || wave.len() == 1 {
        return wave
            .iter()
            .map(|&i| analyze_scc(sccs[i], env, done))
            .collect();
    }
    wave.par_iter()
        .map(|&i| analyze_scc(sccs[i], env, done))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_wave(
    wave: &[usize],
    sccs: &[&Vec<String>],
    env: &Shared<'_>,
    done: &BTreeMap<String, Arc<Summary>>,
    _jobs: usize,
) -> WaveResult {
    wave.iter()
        .map(|&i| analyze_scc(sccs[i], env, done))
        .collect()
}
