use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// One step of an explanation shown to the user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TraceStep {
    pub procedure: String,
    pub line: u32,
    pub description: String,
    /// Callee name when the step is a call.
    pub call: Option<String>,
}

struct Node {
    step: TraceStep,
    prev: Option<Arc<Node>>,
    len: usize,
}

/// Persistent append-only list; cloning is O(1).
#[derive(Clone, Default)]
pub struct Trace(Option<Arc<Node>>);

impl Trace {
    pub fn push(&mut self, step: TraceStep) {
        let len = self.len() + 1;
        self.0 = Some(Arc::new(Node {
            step,
            prev: self.0.take(),
            len,
        }));
    }

    pub fn len(&self) -> usize {
        self.0.as_ref().map_or(0, |n| n.len)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    /// Steps from position `from` (inclusive) to the end, oldest first.
    pub fn since(&self, from: usize) -> Vec<TraceStep> {
        let mut out = Vec::new();
        let mut cur = self.0.as_ref();
        while let Some(n) = cur {
            if n.len <= from {
                break;
            }
            out.push(n.step.clone());
            cur = n.prev.as_ref();
        }
        out.reverse();
        out
    }

    pub fn to_vec(&self) -> Vec<TraceStep> {
        self.since(0)
    }
}

impl std::fmt::Debug for Trace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.to_vec()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(line: u32) -> TraceStep {
        TraceStep {
            procedure: "f".into(),
            line,
            description: String::new(),
            call: None,
        }
    }

    #[test]
    fn clones_share_prefixes() {
        let mut a = Trace::default();
        a.push(step(1));
        a.push(step(2));
        let mut b = a.clone();
        b.push(step(3));
        a.push(step(4));
        assert_eq!(
            a.to_vec().iter().map(|s| s.line).collect::<Vec<_>>(),
            [1, 2, 4]
        );
        assert_eq!(b.since(2).iter().map(|s| s.line).collect::<Vec<_>>(), [3]);
    }
}
