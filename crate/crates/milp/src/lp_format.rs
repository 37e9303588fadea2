//! Debug dump of a model in a subset of the CPLEX LP text format.
//!
//! Emitted sections: `Minimize`, `Subject To`, `Bounds`, `Generals`, `End`.
//! Variables are named `x<index>`, rows `r<index>`; infinite bounds are
//! written as `-inf`/`+inf`.

use std::fmt::Write;

use crate::bnb::MilpModel;
use crate::lp::Sense;

fn term(out: &mut String, first: bool, a: f64, j: usize) {
    if a < 0.0 {
        let _ = write!(out, " - {} x{j}", -a);
    } else if first {
        let _ = write!(out, " {a} x{j}");
    } else {
        let _ = write!(out, " + {a} x{j}");
    }
}

pub fn write_lp_format(model: &MilpModel) -> String {
    let lp = &model.lp;
    let mut out = String::from("Minimize\n obj:");
    let mut first = true;
    for (j, &c) in lp.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, first, c, j);
            first = false;
        }
    }
    if first {
        out.push_str(" 0 x0");
    }
    out.push_str("\nSubject To\n");
    for (i, row) in lp.constraints.iter().enumerate() {
        let _ = write!(out, " r{i}:");
        for (k, &(j, a)) in row.coeffs.iter().enumerate() {
            term(&mut out, k == 0, a, j);
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {op} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        let fmt = |v: f64| {
            if v == f64::INFINITY {
                "+inf".to_string()
            } else if v == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                v.to_string()
            }
        };
        let _ = writeln!(out, " {} <= x{j} <= {}", fmt(lp.lower[j]), fmt(lp.upper[j]));
    }
    let ints: Vec<String> = model
        .integer
        .iter()
        .enumerate()
        .filter(|(_, &i)| i)
        .map(|(j, _)| format!("x{j}"))
        .collect();
    if !ints.is_empty() {
        let _ = writeln!(out, "Generals\n {}", ints.join(" "));
    }
    out.push_str("End\n");
    out
}
