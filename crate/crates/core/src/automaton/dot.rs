use std::fmt::Write;

use super::Dfa;

impl Dfa {
    /// Graphviz rendering; parallel edges are merged into one labelled edge.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dfa {\n  rankdir=LR;\n  node [shape=circle];\n");
        out.push_str("  init [shape=point];\n");
        let _ = writeln!(out, "  init -> {};", self.start());
        for s in 0..self.num_states() as u32 {
            if self.is_accepting(s) {
                let _ = writeln!(out, "  {s} [shape=doublecircle];");
            }
        }
        for s in 0..self.num_states() as u32 {
            let mut targets: Vec<(u32, Vec<char>)> = Vec::new();
            for (a, &c) in self.alphabet().iter().enumerate() {
                let t = self.step(s, a);
                match targets.iter_mut().find(|(x, _)| *x == t) {
                    Some((_, cs)) => cs.push(c),
                    None => targets.push((t, vec![c])),
                }
            }
            for (t, cs) in targets {
                let label = if cs.len() == self.alphabet().len() {
                    "*".to_string()
                } else {
                    escape(&cs.iter().collect::<String>())
                };
                let _ = writeln!(out, "  {s} -> {t} [label=\"{label}\"];");
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
