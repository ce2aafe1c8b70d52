//! A small subset of the CPLEX LP text format: one maximized objective, named
//! linear rows, variable bounds and a binary section.
//!
//! Coefficients are written with the shortest representation that parses
//! back to the same `f64`, so write → parse → write is byte-stable.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("variable name collision: `{0}`")]
    NameCollision(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn as_str(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `lower <= var <= upper`; `None` means unbounded on that side.
#[derive(Debug, Clone, PartialEq)]
pub struct Bound {
    pub var: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<(String, f64)>,
    pub rows: Vec<Row>,
    pub bounds: Vec<Bound>,
    pub binaries: Vec<String>,
}

/// Keeps `[A-Za-z0-9_.]` and maps everything else to `_`.
pub fn sanitize(id: &str) -> String {
    id.chars()
        .map(|ch| {
            if ch.is_ascii_alphanumeric() || ch == '_' || ch == '.' {
                ch
            } else {
                '_'
            }
        })
        .collect()
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v == 0.0 {
        // drop the sign of negative zero
        "0".to_string()
    } else {
        format!("{v}")
    }
}

const TERMS_PER_LINE: usize = 8;

fn write_expr(out: &mut String, terms: &[(String, f64)]) {
    for (k, (var, coef)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        if k == 0 {
            let _ = write!(out, " {} {}", num(*coef), var);
        } else if coef.is_sign_negative() && *coef != 0.0 {
            let _ = write!(out, " - {} {}", num(-coef), var);
        } else {
            let _ = write!(out, " + {} {}", num(*coef), var);
        }
    }
}

impl LpProblem {
    /// Every variable name referenced anywhere, sorted.
    pub fn variables(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .objective
            .iter()
            .map(|t| t.0.clone())
            .chain(self.rows.iter().flat_map(|r| r.terms.iter().map(|t| t.0.clone())))
            .chain(self.bounds.iter().map(|b| b.var.clone()))
            .chain(self.binaries.iter().cloned())
            .collect();
        names.sort();
        names.dedup();
        names
    }

    pub fn write(&self) -> String {
        let mut out = String::from("Maximize\n obj:");
        write_expr(&mut out, &self.objective);
        out.push_str("\nSubject To\n");
        for row in &self.rows {
            let _ = write!(out, " {}:", row.name);
            write_expr(&mut out, &row.terms);
            let _ = writeln!(out, " {} {}", row.sense.as_str(), num(row.rhs));
        }
        out.push_str("Bounds\n");
        for b in &self.bounds {
            match (b.lower, b.upper) {
                (None, None) => {
                    let _ = writeln!(out, " {} free", b.var);
                }
                (Some(l), Some(u)) if l == u => {
                    let _ = writeln!(out, " {} = {}", b.var, num(l));
                }
                (l, Some(u)) => {
                    let _ = writeln!(out, " {} <= {} <= {}", num(l.unwrap_or(f64::NEG_INFINITY)), b.var, num(u));
                }
                (Some(l), None) => {
                    let _ = writeln!(out, " {} >= {}", b.var, num(l));
                }
            }
        }
        out.push_str("Binary\n");
        for chunk in self.binaries.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
        out.push_str("End\n");
        out
    }

    /// Objective value at `values`; absent variables count as zero.
    pub fn objective_value(&self, values: &BTreeMap<String, f64>) -> f64 {
        self.objective
            .iter()
            .map(|(v, c)| c * values.get(v).copied().unwrap_or(0.0))
            .sum()
    }

    /// Names of rows and bounds violated by more than `tol` at `values`.
    pub fn violations(&self, values: &BTreeMap<String, f64>, tol: f64) -> Vec<String> {
        let val = |v: &str| values.get(v).copied().unwrap_or(0.0);
        let mut bad = Vec::new();
        for r in &self.rows {
            let lhs: f64 = r.terms.iter().map(|(v, c)| c * val(v)).sum();
            let ok = match r.sense {
                Sense::Le => lhs <= r.rhs + tol,
                Sense::Ge => lhs >= r.rhs - tol,
                Sense::Eq => (lhs - r.rhs).abs() <= tol,
            };
            if !ok {
                bad.push(r.name.clone());
            }
        }
        let bounded: BTreeMap<&str, &Bound> = self.bounds.iter().map(|b| (b.var.as_str(), b)).collect();
        for var in self.variables() {
            let x = val(&var);
            let (lo, hi) = match bounded.get(var.as_str()) {
                Some(b) => (b.lower.unwrap_or(f64::NEG_INFINITY), b.upper.unwrap_or(f64::INFINITY)),
                None => (0.0, f64::INFINITY),
            };
            if x < lo - tol || x > hi + tol {
                bad.push(format!("bound:{var}"));
            }
        }
        bad
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binary,
    End,
}

fn section_header(line: &str) -> Option<Section> {
    match line.trim().to_ascii_lowercase().as_str() {
        "maximize" | "maximise" | "max" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" => Some(Section::Bounds),
        "binary" | "binaries" | "bin" => Some(Section::Binary),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn parse_num(tok: &str, line: usize) -> Result<f64, LpError> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().map_err(|_| LpError::Parse {
            line,
            message: format!("expected a number, found `{tok}`"),
        }),
    }
}

fn is_number(tok: &str) -> bool {
    tok.parse::<f64>().is_ok() || matches!(tok.to_ascii_lowercase().as_str(), "inf" | "-inf" | "+inf")
}

/// A named statement: `name: tokens...` gathered across continuation lines.
struct Statement {
    line: usize,
    name: String,
    tokens: Vec<String>,
}

fn parse_expr(tokens: &[String], line: usize) -> Result<Vec<(String, f64)>, LpError> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for tok in tokens {
        match tok.as_str() {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            t if is_number(t) => coef = Some(parse_num(t, line)?),
            var => {
                terms.push((var.to_string(), sign * coef.unwrap_or(1.0)));
                sign = 1.0;
                coef = None;
            }
        }
    }
    if coef.is_some() {
        return Err(LpError::Parse {
            line,
            message: "constant terms are not supported".into(),
        });
    }
    Ok(terms)
}

fn gather(lines: &[(usize, String)]) -> Result<Vec<Statement>, LpError> {
    let mut out: Vec<Statement> = Vec::new();
    for (line, text) in lines {
        let mut toks = text.split_whitespace().peekable();
        if let Some(first) = toks.peek() {
            if let Some(name) = first.strip_suffix(':') {
                let name = name.to_string();
                toks.next();
                out.push(Statement {
                    line: *line,
                    name,
                    tokens: toks.map(str::to_string).collect(),
                });
                continue;
            }
        }
        match out.last_mut() {
            Some(st) => st.tokens.extend(toks.map(str::to_string)),
            None => {
                return Err(LpError::Parse {
                    line: *line,
                    message: "expression without a row name".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Parses text produced by [`LpProblem::write`] (and the common subset of the
/// format it uses).
pub fn parse_lp(text: &str) -> Result<LpProblem, LpError> {
    let mut section = Section::None;
    let mut buckets: BTreeMap<u8, Vec<(usize, String)>> = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('\\').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_header(body) {
            section = s;
            continue;
        }
        let key = match section {
            Section::None => {
                return Err(LpError::Parse {
                    line,
                    message: "content before the objective section".into(),
                })
            }
            Section::Objective => 0,
            Section::Constraints => 1,
            Section::Bounds => 2,
            Section::Binary => 3,
            Section::End => {
                return Err(LpError::Parse {
                    line,
                    message: "content after End".into(),
                })
            }
        };
        buckets.entry(key).or_default().push((line, body.to_string()));
    }
    if section != Section::End {
        return Err(LpError::Parse {
            line: text.lines().count(),
            message: "missing End".into(),
        });
    }
    let mut lp = LpProblem::default();

    if let Some(lines) = buckets.get(&0) {
        let stmts = gather(lines)?;
        if stmts.len() != 1 {
            return Err(LpError::Parse {
                line: lines[0].0,
                message: "expected exactly one objective".into(),
            });
        }
        lp.objective = parse_expr(&stmts[0].tokens, stmts[0].line)?;
    }
    if let Some(lines) = buckets.get(&1) {
        for st in gather(lines)? {
            let pos = st
                .tokens
                .iter()
                .position(|t| matches!(t.as_str(), "<=" | ">=" | "=" | "=<" | "=>" | "<" | ">"))
                .ok_or_else(|| LpError::Parse {
                    line: st.line,
                    message: format!("row `{}` has no comparison", st.name),
                })?;
            let sense = match st.tokens[pos].as_str() {
                "<=" | "=<" | "<" => Sense::Le,
                ">=" | "=>" | ">" => Sense::Ge,
                _ => Sense::Eq,
            };
            let rhs_toks = &st.tokens[pos + 1..];
            let rhs_text: String = rhs_toks.concat();
            let rhs = parse_num(&rhs_text, st.line)?;
            lp.rows.push(Row {
                name: st.name,
                terms: parse_expr(&st.tokens[..pos], st.line)?,
                sense,
                rhs,
            });
        }
    }
    if let Some(lines) = buckets.get(&2) {
        for (line, text) in lines {
            let toks: Vec<&str> = text.split_whitespace().collect();
            let bound = match toks.as_slice() {
                [v, free] if free.eq_ignore_ascii_case("free") => Bound {
                    var: v.to_string(),
                    lower: None,
                    upper: None,
                },
                [l, "<=", v, "<=", u] => Bound {
                    var: v.to_string(),
                    lower: Some(parse_num(l, *line)?).filter(|x| x.is_finite()),
                    upper: Some(parse_num(u, *line)?).filter(|x| x.is_finite()),
                },
                [v, "<=", u] => Bound {
                    var: v.to_string(),
                    lower: Some(0.0),
                    upper: Some(parse_num(u, *line)?),
                },
                [v, ">=", l] => Bound {
                    var: v.to_string(),
                    lower: Some(parse_num(l, *line)?).filter(|x| x.is_finite()),
                    upper: None,
                },
                [v, "=", x] => {
                    let x = parse_num(x, *line)?;
                    Bound {
                        var: v.to_string(),
                        lower: Some(x),
                        upper: Some(x),
                    }
                }
                _ => {
                    return Err(LpError::Parse {
                        line: *line,
                        message: format!("unrecognized bound `{}`", text.trim()),
                    })
                }
            };
            lp.bounds.push(bound);
        }
    }
    if let Some(lines) = buckets.get(&3) {
        for (_, text) in lines {
            lp.binaries.extend(text.split_whitespace().map(str::to_string));
        }
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_problem() {
        let lp = LpProblem::default();
        let text = lp.write();
        assert_eq!(text, "Maximize\n obj:\nSubject To\nBounds\nBinary\nEnd\n");
        assert_eq!(parse_lp(&text).unwrap(), lp);
    }

    #[test]
    fn single_variable_objective_line() {
        let lp = LpProblem {
            objective: vec![("x_p1_r1".into(), 0.5)],
            binaries: vec!["x_p1_r1".into()],
            ..Default::default()
        };
        let text = lp.write();
        assert!(text.contains("obj: 0.5 x_p1_r1\n"));
        assert_eq!(parse_lp(&text).unwrap(), lp);
    }

    #[test]
    fn rows_bounds_and_signs() {
        let lp = LpProblem {
            objective: vec![("a".into(), -0.05), ("b".into(), 1e-17), ("c".into(), 123456.789)],
            rows: vec![
                Row {
                    name: "r1".into(),
                    terms: vec![("a".into(), 1.0), ("b".into(), -1.0)],
                    sense: Sense::Le,
                    rhs: -2.5,
                },
                Row {
                    name: "r2".into(),
                    terms: vec![("c".into(), 3.0)],
                    sense: Sense::Eq,
                    rhs: 1.0,
                },
            ],
            bounds: vec![
                Bound { var: "a".into(), lower: Some(0.0), upper: Some(4.0) },
                Bound { var: "b".into(), lower: Some(2.0), upper: None },
                Bound { var: "c".into(), lower: None, upper: None },
                Bound { var: "d".into(), lower: Some(1.0), upper: Some(1.0) },
                Bound { var: "e".into(), lower: None, upper: Some(3.0) },
            ],
            binaries: (0..20).map(|i| format!("x{i}")).collect(),
        };
        let text = lp.write();
        let back = parse_lp(&text).unwrap();
        assert_eq!(back, lp);
        assert_eq!(back.write(), text);
    }

    #[test]
    fn sanitize_replaces_unsafe_chars() {
        assert_eq!(sanitize("p-1 a/b"), "p_1_a_b");
        assert_eq!(sanitize("r.2_x"), "r.2_x");
    }

    #[test]
    fn parse_errors_name_lines() {
        assert!(matches!(parse_lp("Maximize\n obj: x\n"), Err(LpError::Parse { .. })));
        assert!(matches!(
            parse_lp("Maximize\n obj: x\nSubject To\n c1: x 1\nEnd\n"),
            Err(LpError::Parse { line: 4, .. })
        ));
    }
}
