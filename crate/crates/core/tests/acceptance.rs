//! End-to-end acceptance checks. Each check prints one `PASS`/`FAIL` line; the
//! test fails if any check does.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use diverge::cli::{
    analyze, load_program, main_with_args, synth_corpus, Analysis, AnalysisOptions, SynthConfig,
};
use diverge::exec::{concrete_run, ConcreteOutcome, WidenConfig};
use diverge::frontend::cfg::{Instr, PLValue, Terminator};
use diverge::frontend::{build_cfg, Cfg, Program};
use diverge::report::{check_expectations, parse_expectations, IssueType, ModelTable};
use diverge::solver::{oracle_sat, Atom, LinTerm, OracleResult, PathCondition, SymValue};
use diverge::symstate::{DivergenceKind, Spec, SpecKind};

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

fn models() -> ModelTable {
    ModelTable::parse(&std::fs::read_to_string(corpus().join("models.txt")).unwrap()).unwrap()
}

fn corpus_files() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(corpus())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "mc"))
        .collect();
    v.sort();
    v
}

fn run_file(name: &str, k: u32) -> (Program, Analysis) {
    let program = load_program(&[corpus().join(name)]).unwrap();
    let opts = AnalysisOptions {
        config: WidenConfig {
            k,
            ..WidenConfig::default()
        },
        ..AnalysisOptions::default()
    };
    let a = analyze(&program, &models(), &opts, None).unwrap();
    (program, a)
}

fn types_of(a: &Analysis) -> Vec<IssueType> {
    a.issues.iter().map(|i| i.issue_type).collect()
}

/// The spec behind a reported loop or recursion at `line` in `procedure`.
fn spec_at<'a>(a: &'a Analysis, procedure: &str, line: u32) -> Option<&'a Spec> {
    a.run.summaries.get(procedure)?.specs.iter().find(|s| {
        s.kind == SpecKind::InfiniteProgram
            && s.divergence
                .as_ref()
                .is_some_and(|d| !d.propagated && d.procedure == procedure && d.line == line)
    })
}

fn expectations_hold(program: &Program, a: &Analysis) -> Result<(), String> {
    let exp = parse_expectations(program)?;
    let mismatches = check_expectations(&exp, &a.issues);
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(mismatches
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join("; "))
    }
}

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn basic_table() -> Check {
    let start = Instant::now();
    let want: [(&str, &[IssueType]); 6] = [
        ("goto_self_loop.mc", &[IssueType::InfiniteGoto]),
        ("constant_guard_loop.mc", &[IssueType::InfiniteLoop]),
        ("unbounded_recursion.mc", &[IssueType::InfiniteRecursion]),
        ("forward_goto.mc", &[]),
        ("counting_loop.mc", &[]),
        ("bounded_recursion.mc", &[]),
    ];
    for (file, expected) in want {
        let (_, a) = run_file(file, 3);
        let got = types_of(&a);
        ensure(
            got == expected,
            format!("{file}: got {got:?}, want {expected:?}"),
        )?;
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(1), format!("took {took:?}"))?;
    Ok(format!("6 programs in {took:?}"))
}

fn loop_family() -> Check {
    let (program, a) = run_file("stuck_counters.mc", 3);
    for name in [
        "optim",
        "non_optim",
        "loop_cond_nonterm",
        "loop_pointer_nonterm",
    ] {
        let n = a
            .issues
            .iter()
            .filter(|i| i.procedure == name && i.issue_type == IssueType::InfiniteLoop)
            .count();
        ensure(n >= 1, format!("{name}: no infinite_loop"))?;
    }
    let issue = a
        .issues
        .iter()
        .find(|i| i.procedure == "non_optim")
        .unwrap();
    let spec = spec_at(&a, "non_optim", issue.line).ok_or("non_optim: no spec")?;
    let params = &a.run.summaries["non_optim"].params;
    let i0 = spec
        .entry_value(params, "i")
        .ok_or("non_optim: no entry value for i")?;
    ensure(
        spec.pc.entails(&Atom::lt(i0, LinTerm::constant(20))),
        format!(
            "witness `{}` does not entail i < 20",
            issue.witness_precondition
        ),
    )?;
    expectations_hold(&program, &a)?;
    Ok(format!("non_optim witness: {}", issue.witness_precondition))
}

fn recursion_family() -> Check {
    let (_, a) = run_file("trivial_recursion.mc", 3);
    ensure(
        a.issues.len() == 1,
        format!("trivial: {} issues", a.issues.len()),
    )?;
    let t = &a.issues[0];
    ensure(
        t.issue_type == IssueType::InfiniteRecursion && t.cycle == ["trivial"],
        format!("trivial: {:?} {:?}", t.issue_type, t.cycle),
    )?;

    let (_, a) = run_file("pointer_swap_cycle.mc", 3);
    let m = a
        .issues
        .iter()
        .find(|i| i.issue_type == IssueType::MutualRecursion)
        .ok_or("f/g/h: no mutual_recursion")?;
    let set: BTreeSet<&str> = m.cycle.iter().map(String::as_str).collect();
    ensure(
        set == BTreeSet::from(["f", "g", "h"]),
        format!("cycle {:?}", m.cycle),
    )?;
    let spec = spec_at(&a, &m.procedure, m.line).ok_or("f/g/h: no spec")?;
    let params = &a.run.summaries[&m.procedure].params;
    let (x, y) = (
        spec.entry_value(params, &format!("*{}", params[0]))
            .ok_or("no *x")?,
        spec.entry_value(params, &format!("*{}", params[1]))
            .ok_or("no *y")?,
    );
    ensure(
        spec.pc.entails(&Atom::gt(x, y)),
        format!(
            "witness `{}` does not entail *x > *y",
            m.witness_precondition
        ),
    )?;
    Ok(format!(
        "cycle {}; witness {}",
        m.cycle.join(" -> "),
        m.witness_precondition
    ))
}

fn ported_bugs() -> Check {
    let mut found = Vec::new();
    for file in [
        "svg_path_dump.mc",
        "usb_config_retry.mc",
        "byte_reader_recursion.mc",
    ] {
        let (program, a) = run_file(file, 3);
        ensure(!a.issues.is_empty(), format!("{file}: nothing reported"))?;
        expectations_hold(&program, &a).map_err(|e| format!("{file}: {e}"))?;
        found.extend(
            a.issues
                .iter()
                .map(|i| format!("{}:{}", i.procedure, i.issue_type)),
        );
    }
    Ok(found.join(", "))
}

/// No pointers, no memory and only calls to defined procedures.
fn pointer_free(cfg: &Cfg, cfgs: &BTreeMap<String, Cfg>) -> bool {
    cfg.blocks.iter().all(|b| {
        let term_ok = match &b.term {
            Terminator::Branch { cond, .. } => {
                !cond.lhs.mentions_address() && !cond.rhs.mentions_address()
            }
            _ => true,
        };
        term_ok
            && b.instrs.iter().all(|i| match i {
                Instr::Assign { target, value, .. } => {
                    matches!(target, PLValue::Var(_)) && !value.mentions_address()
                }
                Instr::Call { name, args, .. } => {
                    cfgs.contains_key(name) && args.iter().all(|a| !a.mentions_address())
                }
                Instr::Alloc { .. } | Instr::Free { .. } | Instr::Havoc { .. } => false,
                Instr::Assume { .. } | Instr::Return { .. } => true,
            })
    })
}

fn callees_closed(entry: &str, cfgs: &BTreeMap<String, Cfg>) -> bool {
    let mut todo = vec![entry.to_string()];
    let mut seen = BTreeSet::new();
    while let Some(f) = todo.pop() {
        if !seen.insert(f.clone()) {
            continue;
        }
        let Some(cfg) = cfgs.get(&f) else {
            return false;
        };
        if !pointer_free(cfg, cfgs) {
            return false;
        }
        for b in &cfg.blocks {
            for i in &b.instrs {
                if let Instr::Call { name, .. } = i {
                    todo.push(name.clone());
                }
            }
        }
    }
    true
}

fn witnesses_replay() -> Check {
    let models = models();
    let mut checked = 0;
    for path in corpus_files() {
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let (program, a) = run_file(&name, 3);
        let cfgs: BTreeMap<String, Cfg> = program
            .functions
            .iter()
            .map(|f| (f.name.clone(), build_cfg(f)))
            .collect();
        for issue in &a.issues {
            if !matches!(
                issue.issue_type,
                IssueType::InfiniteLoop | IssueType::InfiniteGoto
            ) {
                continue;
            }
            if !callees_closed(&issue.procedure, &cfgs) {
                continue;
            }
            let spec =
                spec_at(&a, &issue.procedure, issue.line).ok_or(format!("{name}: no spec"))?;
            let Some(args) = spec.witness_args() else {
                continue;
            };
            let out = concrete_run(&cfgs, &models, &issue.procedure, &args, 100_000);
            ensure(
                out == ConcreteOutcome::RepeatedState,
                format!(
                    "{name}:{} {} on {args:?} gave {out:?}",
                    issue.line, issue.procedure
                ),
            )?;
            checked += 1;
        }
    }
    ensure(
        checked >= 5,
        format!("only {checked} witnesses were replayable"),
    )?;
    Ok(format!("{checked} witnesses replayed"))
}

fn k_monotone() -> Check {
    let mut counts = [0usize; 3];
    for path in corpus_files() {
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let keys = |k: u32| -> BTreeSet<(String, u32, IssueType)> {
            let (_, a) = run_file(&name, k);
            a.issues
                .iter()
                .map(|i| (i.procedure.clone(), i.line, i.issue_type))
                .collect()
        };
        let (s3, s5, s10) = (keys(3), keys(5), keys(10));
        ensure(
            s3.len() <= s5.len() && s5.len() <= s10.len(),
            format!("{name}: counts {} {} {}", s3.len(), s5.len(), s10.len()),
        )?;
        ensure(
            s3.is_subset(&s10),
            format!(
                "{name}: k=3 finds {:?} missing at k=10",
                s3.difference(&s10)
            ),
        )?;
        counts[0] += s3.len();
        counts[1] += s5.len();
        counts[2] += s10.len();
    }
    ensure(counts[0] < counts[2], "raising k found nothing new")?;
    Ok(format!(
        "issues at k=3/5/10: {}/{}/{}",
        counts[0], counts[1], counts[2]
    ))
}

fn random_atom(rng: &mut StdRng) -> Atom {
    let term = |rng: &mut StdRng| {
        let n = rng.random_range(0..3);
        let cs: Vec<(SymValue, i64)> = (0..n)
            .map(|_| (SymValue(rng.random_range(0..3)), rng.random_range(-3..=3)))
            .collect();
        LinTerm::from_parts(cs, rng.random_range(-4..=4)).unwrap()
    };
    let (l, r) = (term(rng), term(rng));
    match rng.random_range(0..6) {
        0 => Atom::eq(l, r),
        1 => Atom::ne(l, r),
        2 => Atom::lt(l, r),
        3 => Atom::le(l, r),
        4 => Atom::gt(l, r),
        _ => Atom::ge(l, r),
    }
}

fn solver_agrees() -> Check {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let (mut sat, total) = (0, 10_000);
    for _ in 0..total {
        let n = rng.random_range(1..=5);
        let atoms: Vec<Atom> = (0..n).map(|_| random_atom(&mut rng)).collect();
        if let OracleResult::Sat(_) = oracle_sat(&atoms, 4) {
            sat += 1;
            let mut pc = PathCondition::new();
            let ok = atoms.iter().all(|a| pc.assume(a)) && pc.is_sat();
            ensure(
                ok,
                format!("answered unsat on a satisfiable conjunction: {atoms:?}"),
            )?;
        }
    }
    Ok(format!(
        "{total} conjunctions, {sat} satisfiable within the oracle bound"
    ))
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = main_with_args(
        std::iter::once("diverge").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, String::from_utf8(out).unwrap())
}

fn deterministic_output() -> Check {
    let models = corpus().join("models.txt");
    let models = models.to_str().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth.mc");
    std::fs::write(&synth, synth_corpus(&SynthConfig::default())).unwrap();
    let mut total = 0;
    let mut inputs: Vec<PathBuf> = corpus_files();
    inputs.push(synth);
    for input in &inputs {
        let input = input.to_str().unwrap();
        let base = ["--models", models, "--format", "json", input];
        let (c1, a) = cli(&base);
        let (c2, b) = cli(&base);
        let (c3, c) = cli(&[&base[..], &["--jobs", "4"]].concat());
        ensure(
            c1 != 2 && c1 == c2 && c2 == c3,
            format!("{input}: exit codes {c1} {c2} {c3}"),
        )?;
        ensure(a == b, format!("{input}: two sequential runs differ"))?;
        ensure(a == c, format!("{input}: the parallel run differs"))?;
        total += a.len();
    }
    Ok(format!(
        "{} inputs, {total} bytes of identical JSON",
        inputs.len()
    ))
}

fn scales() -> Check {
    let src = synth_corpus(&SynthConfig::default());
    let lines = src.lines().count();
    let program = diverge::frontend::parse(&src).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let a = analyze(&program, &models(), &AnalysisOptions::default(), None)
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(
        program.functions.len() >= 200,
        format!("{} functions", program.functions.len()),
    )?;
    ensure(took < Duration::from_secs(60), format!("took {took:?}"))?;
    ensure(!a.issues.is_empty(), "the planted bugs were not found")?;
    Ok(format!(
        "{} functions, {lines} lines, {} issues in {took:?}",
        program.functions.len(),
        a.issues.len()
    ))
}

fn warm_database() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth.mc");
    std::fs::write(&synth, synth_corpus(&SynthConfig::default())).unwrap();
    let db = dir.path().join("summaries.db");
    let models = corpus().join("models.txt");
    let args = [
        "--models",
        models.to_str().unwrap(),
        "--format",
        "json",
        "--db",
        db.to_str().unwrap(),
        synth.to_str().unwrap(),
    ];
    let (_, cold) = cli(&args);
    ensure(db.exists(), "no database written")?;
    let (_, warm) = cli(&args);
    ensure(cold == warm, "warm run reports different issues")?;

    let program = load_program(&[synth]).unwrap();
    let stored = diverge::interproc::SummaryDb::load(&db).map_err(|e| e.to_string())?;
    let a = analyze(
        &program,
        &self::models(),
        &AnalysisOptions::default(),
        Some(&stored),
    )
    .unwrap();
    ensure(
        a.run.reused == program.functions.len(),
        format!("reused {} of {}", a.run.reused, program.functions.len()),
    )?;
    Ok(format!(
        "{} summaries reused, identical report",
        a.run.reused
    ))
}

#[test]
fn acceptance() {
    type Named = (&'static str, fn() -> Check);
    let checks: [Named; 10] = [
        ("basic goto, loop and recursion table", basic_table),
        ("loop family and witness", loop_family),
        ("self and mutual recursion", recursion_family),
        ("ported real-world bugs", ported_bugs),
        ("witnesses replay concretely", witnesses_replay),
        ("monotone in k", k_monotone),
        (
            "solver never refutes a satisfiable conjunction",
            solver_agrees,
        ),
        (
            "byte-identical output across runs and jobs",
            deterministic_output,
        ),
        ("200-function corpus under a minute", scales),
        ("warm database rerun", warm_database),
    ];
    let mut failed = Vec::new();
    for (n, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[{}] PASS {name}: {detail}", n + 1),
            Err(why) => {
                println!("[{}] FAIL {name}: {why}", n + 1);
                failed.push(n + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}

// Recursion issues carry the call cycle in order.
#[test]
fn mutual_cycle_is_ordered_from_the_reporting_procedure() {
    let (_, a) = run_file("pointer_swap_cycle.mc", 3);
    let m = &a.issues[0];
    assert_eq!(m.cycle.first(), Some(&m.procedure));
    assert!(matches!(
        spec_at(&a, &m.procedure, m.line)
            .and_then(|s| s.divergence.as_ref())
            .map(|d| &d.kind),
        Some(DivergenceKind::Recursion { .. })
    ));
}
