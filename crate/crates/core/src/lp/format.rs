use std::fmt::Write;

use super::{Integrality, LinearModel, Relation, Sense, VarId};
use crate::scalar::Scalar;

fn sanitize(name: &str, idx: usize) -> String {
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    if clean.is_empty() || clean.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        format!("x{idx}_{clean}")
    } else {
        clean
    }
}

fn linear<T: Scalar>(out: &mut String, names: &[String], terms: &[(VarId, T)]) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        let neg = c < T::zero();
        let mag = c.abs();
        let op = match (k, neg) {
            (0, false) => "",
            (0, true) => "-",
            (_, false) => "+ ",
            (_, true) => "- ",
        };
        let _ = write!(out, " {op}{mag} {}", names[v.0]);
    }
}

pub(super) fn write_lp<T: Scalar>(m: &LinearModel<T>) -> String {
    let names: Vec<String> = m
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| sanitize(&v.name, i))
        .collect();
    let mut out = String::new();
    out.push_str(match m.sense {
        Sense::Maximize => "Maximize\n",
        Sense::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    linear(&mut out, &names, &m.objective);
    out.push_str("\nSubject To\n");
    for (i, c) in m.constraints.iter().enumerate() {
        let _ = write!(out, " {}:", sanitize(&c.name, i));
        linear(&mut out, &names, &c.coeffs);
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, name) in m.variables.iter().zip(&names) {
        match (v.lower, v.upper) {
            (None, None) => {
                let _ = writeln!(out, " {name} free");
            }
            (Some(l), Some(u)) => {
                let _ = writeln!(out, " {l} <= {name} <= {u}");
            }
            (Some(l), None) => {
                let _ = writeln!(out, " {name} >= {l}");
            }
            (None, Some(u)) => {
                let _ = writeln!(out, " -inf <= {name} <= {u}");
            }
        }
    }
    let bins: Vec<&str> = m
        .variables
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.integrality == Integrality::Binary)
        .map(|(_, n)| n.as_str())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binary\n");
        for b in bins {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::super::*;

    #[test]
    fn lp_text() {
        let mut m = LinearModel::<f64>::new(Sense::Maximize);
        let x = m.add_binary("x");
        let v = m.add_free("v(root)");
        m.add_constraint("row", vec![(v, 1.0), (x, -2.5)], Relation::Le, 0.0);
        m.set_objective(Sense::Maximize, vec![(v, 1.0)]);
        let text = m.to_lp_string();
        assert_eq!(
            text,
            "Maximize\n obj: 1 v_root_\nSubject To\n row: 1 v_root_ - 2.5 x <= 0\nBounds\n 0 <= x <= 1\n v_root_ free\nBinary\n x\nEnd\n"
        );
    }
}
