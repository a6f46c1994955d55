//! Fixed-column MPS export for cross-checking against external solvers.

use std::fmt::Write as _;

use super::{LpProblem, Relation};

#[derive(Clone, Debug, Default)]
pub struct MpsOptions {
    /// Problem name written on the NAME card.
    pub name: String,
    /// Optional label per column, emitted as `*` comment lines.
    pub column_labels: Vec<String>,
}

fn col_name(j: usize) -> String {
    format!("X{:07}", j + 1)
}

fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

/// Formats `v` into at most 12 characters.
fn num(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    for prec in (0..=8).rev() {
        let s = format!("{v:.prec$e}");
        if s.len() <= 12 {
            return s;
        }
    }
    format!("{v:.0e}")
}

fn field_line(out: &mut String, a: &str, b: &str, c: &str, d: &str) {
    // Fields start at columns 2, 5, 15, 25 (1-based).
    let _ = writeln!(out, " {a:<2} {b:<8}  {c:<8}  {d:>12}");
}

/// Renders `lp` in fixed MPS with an `OBJSENSE MAX` section.
pub fn write_mps(lp: &LpProblem, opts: &MpsOptions) -> String {
    let mut out = String::new();
    let name = if opts.name.is_empty() { "LP" } else { opts.name.as_str() };
    let _ = writeln!(out, "NAME          {name}");
    for (j, label) in opts.column_labels.iter().enumerate() {
        let _ = writeln!(out, "* {} {label}", col_name(j));
    }
    out.push_str("OBJSENSE\n    MAX\n");
    out.push_str("ROWS\n N  OBJ\n");
    for (i, c) in lp.constraints.iter().enumerate() {
        let kind = match c.relation {
            Relation::Eq => "E",
            Relation::Le => "L",
            Relation::Ge => "G",
        };
        let _ = writeln!(out, " {kind}  {}", row_name(i));
    }
    out.push_str("COLUMNS\n");
    for j in 0..lp.num_vars {
        let col = col_name(j);
        let mut wrote = false;
        if lp.objective[j] != 0.0 {
            field_line(&mut out, "", &col, "OBJ", &num(lp.objective[j]));
            wrote = true;
        }
        for (i, c) in lp.constraints.iter().enumerate() {
            if c.coeffs[j] != 0.0 {
                field_line(&mut out, "", &col, &row_name(i), &num(c.coeffs[j]));
                wrote = true;
            }
        }
        if !wrote {
            // keep empty columns visible so indices stay aligned
            field_line(&mut out, "", &col, "OBJ", "0");
        }
    }
    out.push_str("RHS\n");
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.rhs != 0.0 {
            field_line(&mut out, "", "RHS", &row_name(i), &num(c.rhs));
        }
    }
    // Default MPS bounds are already x >= 0.
    out.push_str("BOUNDS\nENDATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_fit_the_field() {
        for v in [1.0, -0.1, 1.0 / 3.0, 1e-300, -123456789.123456, 0.95] {
            let s = num(v);
            assert!(s.len() <= 12, "{s}");
            let back: f64 = s.parse().unwrap();
            assert!((back - v).abs() <= 1e-6 * v.abs().max(1e-300));
        }
        assert_eq!(num(0.95), "0.95");
    }

    #[test]
    fn sections_and_entries() {
        let mut lp = LpProblem::with_objective(vec![1.0, 0.0]);
        lp.add(vec![1.0, 1.0], Relation::Le, 4.0);
        lp.add(vec![1.0, -1.0], Relation::Eq, 0.0);
        let text = write_mps(
            &lp,
            &MpsOptions {
                name: "demo".into(),
                column_labels: vec!["x(s0,a)".into(), "d(s1)".into()],
            },
        );
        let sections: Vec<&str> = text.lines().filter(|l| !l.starts_with([' ', '*'])).collect();
        assert_eq!(
            sections,
            [
                "NAME          demo",
                "OBJSENSE",
                "ROWS",
                "COLUMNS",
                "RHS",
                "BOUNDS",
                "ENDATA"
            ]
        );
        assert!(text.contains("* X0000002 d(s1)"));
        assert!(text.contains(" E  R0000002"));
        assert_eq!(text.matches("X0000002").count(), 3);
        assert!(text
            .lines()
            .any(|l| l.contains("RHS") && l.contains("R0000001") && l.ends_with('4')));
    }
}
