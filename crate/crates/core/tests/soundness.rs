//! Every loop the analysis reports on a random pointer-free program must loop
//! forever when run concretely from its witness.

use std::collections::BTreeMap;

use proptest::prelude::*;

use diverge::cli::{analyze, AnalysisOptions};
use diverge::exec::{concrete_run, ConcreteOutcome, WidenConfig};
use diverge::frontend::{build_cfg, parse, Cfg};
use diverge::report::{IssueType, ModelTable};
use diverge::symstate::SpecKind;

fn rel() -> impl Strategy<Value = &'static str> {
    prop_oneof![
        Just("<"),
        Just("<="),
        Just(">"),
        Just(">="),
        Just("!="),
        Just("==")
    ]
}

fn var() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("x"), Just("y"), Just("z")]
}

fn update() -> impl Strategy<Value = String> {
    (var(), var(), -2i64..=2).prop_map(|(t, s, c)| format!("{t} = {s} + {c};"))
}

fn program() -> impl Strategy<Value = String> {
    (
        (var(), rel(), -5i64..=5),
        (var(), rel(), -5i64..=5),
        prop::collection::vec(update(), 1..3),
        prop::collection::vec(update(), 0..3),
        any::<bool>(),
    )
        .prop_map(|((a, r1, c1), (b, r2, c2), then_ups, else_ups, goto)| {
            let body = format!(
                "if ({b} {r2} {c2}) {{ {} }} else {{ {} }}",
                then_ups.join(" "),
                else_ups.join(" ")
            );
            if goto {
                format!("void p(int x, int y) {{\n    int z = 0;\ntop:\n    if ({a} {r1} {c1}) {{ {body} goto top; }}\n}}\n")
            } else {
                format!("void p(int x, int y) {{\n    int z = 0;\n    while ({a} {r1} {c1}) {{ {body} }}\n}}\n")
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn reported_loops_diverge_concretely(src in program(), k in 2u32..6) {
        let prog = parse(&src).unwrap();
        let models = ModelTable::new();
        let opts = AnalysisOptions {
            config: WidenConfig { k, ..WidenConfig::default() },
            ..AnalysisOptions::default()
        };
        let a = analyze(&prog, &models, &opts, None).unwrap();
        let cfgs: BTreeMap<String, Cfg> = prog.functions.iter().map(|f| (f.name.clone(), build_cfg(f))).collect();
        for issue in &a.issues {
            prop_assert!(matches!(issue.issue_type, IssueType::InfiniteLoop | IssueType::InfiniteGoto));
            let summary = &a.run.summaries["p"];
            for spec in summary.specs.iter().filter(|s| s.kind == SpecKind::InfiniteProgram) {
                let args = spec.witness_args().expect("pointer-free specs have a model");
                let out = concrete_run(&cfgs, &models, "p", &args, 100_000);
                prop_assert_eq!(out, ConcreteOutcome::RepeatedState, "{}\nwitness {:?}\n{}", src, args, spec);
            }
        }
    }

    #[test]
    fn terminating_runs_are_never_reported_for_that_input(src in program(), x in -6i64..=6, y in -6i64..=6) {
        let prog = parse(&src).unwrap();
        let models = ModelTable::new();
        let a = analyze(&prog, &models, &AnalysisOptions::default(), None).unwrap();
        let cfgs: BTreeMap<String, Cfg> = prog.functions.iter().map(|f| (f.name.clone(), build_cfg(f))).collect();
        if let ConcreteOutcome::Terminated(_) = concrete_run(&cfgs, &models, "p", &[x, y], 100_000) {
            for spec in a.run.summaries["p"].specs.iter().filter(|s| s.kind == SpecKind::InfiniteProgram) {
                let mut pc = spec.pc.clone();
                let bound = pc.assume(&diverge::solver::Atom::eq(spec.params[0].clone(), x))
                    && pc.assume(&diverge::solver::Atom::eq(spec.params[1].clone(), y));
                prop_assert!(!bound || !pc.is_sat(), "{}\n({}, {}) terminates but matches {}", src, x, y, spec);
            }
        }
    }
}
