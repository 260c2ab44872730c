use std::fmt::Write;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Shape of a generated corpus.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub functions: usize,
    /// Straight-line statements per function, roughly lines minus a dozen.
    pub body_lines: usize,
    /// Every n-th function gets a loop that never exits; 0 for none.
    pub bug_every: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            functions: 200,
            body_lines: 38,
            bug_every: 20,
            seed: 7,
        }
    }
}

/// A deterministic MiniC program whose call graph is a DAG over `fN` plus a `main`.
pub fn synth_corpus(cfg: &SynthConfig) -> String {
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let mut out = String::new();
    for i in 0..cfg.functions {
        let _ = writeln!(out, "int f{i}(int a, int *p) {{");
        let _ = writeln!(out, "    int s = a + {};", rng.random_range(0..9));
        out.push_str("    int t = 0;\n    int i = 0;\n");
        let bound = rng.random_range(1..3);
        let _ = writeln!(
            out,
            "    while (i < {bound}) {{\n        t = t + i * 2;\n        i++;\n    }}"
        );
        for _ in 0..cfg.body_lines {
            let c = rng.random_range(1..7);
            let line = match rng.random_range(0..4) {
                0 => format!("    s = s + {c};"),
                1 => format!("    t = t - s + {c};"),
                2 => format!("    s = s * {c} - t;"),
                _ => format!("    t = {c} - t;"),
            };
            out.push_str(&line);
            out.push('\n');
        }
        if i > 0 {
            let callee = rng.random_range(i.saturating_sub(8)..i);
            let _ = writeln!(
                out,
                "    if (a > {}) {{\n        s = f{callee}(s, p);\n    }} else {{\n        s = s + 1;\n    }}",
                rng.random_range(0..20)
            );
        }
        out.push_str("    if (*p > 0) {\n        *p = *p - 1;\n    }\n");
        if cfg.bug_every > 0 && i % cfg.bug_every == cfg.bug_every - 1 {
            out.push_str("    while (a > 100) {\n        t++;\n    }\n");
        }
        out.push_str("    return s + t;\n}\n\n");
    }
    out.push_str("int main() {\n    int x = nondet();\n");
    for i in (0..cfg.functions).rev().take(4) {
        let _ = writeln!(out, "    x = f{i}(x, &x);");
    }
    out.push_str("    return x;\n}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    #[test]
    fn deterministic_and_parseable() {
        let cfg = SynthConfig {
            functions: 12,
            ..SynthConfig::default()
        };
        let a = synth_corpus(&cfg);
        assert_eq!(a, synth_corpus(&cfg));
        let p = parse(&a).unwrap();
        assert_eq!(p.functions.len(), 13);
    }
}
