use std::collections::BTreeSet;

use thiserror::Error;

use super::{Axis, CircuitProgram, Instruction, Opcode, PauliTerm, RecordRef, Target};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    /// 1-based line number.
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown opcode {0:?}")]
    UnknownOpcode(String),
    #[error("malformed Pauli product {0:?}")]
    MalformedProduct(String),
    #[error("record reference {0} out of range")]
    RecordOutOfRange(String),
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

/// Parses the line-oriented circuit text.
///
/// The `QUBITS n` header is optional; without it the qubit count is one more
/// than the largest qubit index mentioned.
pub fn parse_program(text: &str) -> Result<CircuitProgram, ParseError> {
    let mut prog = CircuitProgram::new(0);
    let mut declared: Option<usize> = None;
    let mut max_qubit: Option<usize> = None;
    let mut measured = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let (body, comment) = match raw.find('#') {
            Some(i) => (&raw[..i], Some(&raw[i + 1..])),
            None => (raw, None),
        };
        let body = body.trim();
        let tags = comment.and_then(parse_tag_comment);
        if body.is_empty() {
            if tags.is_some() {
                return Err(err(line_no, ParseErrorKind::Syntax("tag without instruction".into())));
            }
            continue;
        }

        let (head, rest) = split_head(body);
        if head == "QUBITS" {
            if declared.is_some() || !prog.instructions.is_empty() {
                return Err(err(line_no, ParseErrorKind::Syntax("QUBITS must be the first line".into())));
            }
            let n = rest
                .trim()
                .parse::<usize>()
                .map_err(|_| err(line_no, ParseErrorKind::Syntax(format!("bad qubit count {:?}", rest.trim()))))?;
            declared = Some(n);
            continue;
        }

        let (name, params) = parse_head(head, line_no)?;
        let opcode = Opcode::from_name(name)
            .ok_or_else(|| err(line_no, ParseErrorKind::UnknownOpcode(name.to_string())))?;

        let mut targets = Vec::new();
        for tok in rest.split_whitespace() {
            let t = parse_target(tok, line_no)?;
            match &t {
                Target::Qubit(q) => bump(&mut max_qubit, *q),
                Target::Product(terms) => terms.iter().for_each(|p| bump(&mut max_qubit, p.qubit)),
                Target::Rec(r) => {
                    if r.resolve(measured).is_none() {
                        return Err(err(line_no, ParseErrorKind::RecordOutOfRange(r.to_string())));
                    }
                }
            }
            targets.push(t);
        }
        let inst = Instruction::new(opcode, targets, params);
        measured += inst.measurement_count();
        match tags {
            Some(t) => prog.push_tagged(inst, t),
            None => prog.push(inst),
        };
    }

    prog.qubit_count = declared.unwrap_or_else(|| max_qubit.map_or(0, |q| q + 1));
    Ok(prog)
}

fn bump(max: &mut Option<usize>, q: usize) {
    *max = Some(max.map_or(q, |m| m.max(q)));
}

fn parse_tag_comment(comment: &str) -> Option<BTreeSet<String>> {
    let rest = comment.trim_start().strip_prefix("tag:")?;
    Some(rest.split_whitespace().map(str::to_string).collect())
}

/// Splits off the opcode token, which may contain a parenthesised parameter
/// list with embedded spaces.
fn split_head(body: &str) -> (&str, &str) {
    let end = match body.find('(') {
        Some(open) if body[..open].chars().all(|c| !c.is_whitespace()) => {
            body[open..].find(')').map_or(body.len(), |close| open + close + 1)
        }
        _ => body.find(char::is_whitespace).unwrap_or(body.len()),
    };
    (&body[..end], &body[end..])
}

fn parse_head(head: &str, line: usize) -> Result<(&str, Vec<f64>), ParseError> {
    let Some(open) = head.find('(') else {
        return Ok((head, Vec::new()));
    };
    let Some(inner) = head[open + 1..].strip_suffix(')') else {
        return Err(err(line, ParseErrorKind::Syntax("unclosed parameter list".into())));
    };
    let mut params = Vec::new();
    for piece in inner.split(',') {
        let piece = piece.trim();
        let v: f64 = piece
            .parse()
            .map_err(|_| err(line, ParseErrorKind::Syntax(format!("bad parameter {piece:?}"))))?;
        if !v.is_finite() {
            return Err(err(line, ParseErrorKind::Syntax(format!("non-finite parameter {piece:?}"))));
        }
        params.push(v);
    }
    Ok((&head[..open], params))
}

fn parse_target(tok: &str, line: usize) -> Result<Target, ParseError> {
    if let Some(inner) = tok.strip_prefix("rec[") {
        let inner = inner
            .strip_suffix(']')
            .ok_or_else(|| err(line, ParseErrorKind::Syntax(format!("bad record target {tok:?}"))))?;
        let offset: i64 = inner
            .parse()
            .map_err(|_| err(line, ParseErrorKind::Syntax(format!("bad record target {tok:?}"))))?;
        if offset >= 0 {
            return Err(err(
                line,
                ParseErrorKind::Syntax(format!("record offsets must be negative, got {tok}")),
            ));
        }
        return Ok(Target::Rec(RecordRef { offset }));
    }
    if tok.bytes().all(|b| b.is_ascii_digit()) {
        return tok
            .parse()
            .map(Target::Qubit)
            .map_err(|_| err(line, ParseErrorKind::Syntax(format!("bad qubit {tok:?}"))));
    }
    let mut terms = Vec::new();
    for piece in tok.split('*') {
        let mut chars = piece.chars();
        let axis = chars
            .next()
            .and_then(Axis::from_letter)
            .ok_or_else(|| err(line, ParseErrorKind::MalformedProduct(tok.to_string())))?;
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err(line, ParseErrorKind::MalformedProduct(tok.to_string())));
        }
        let qubit = digits
            .parse()
            .map_err(|_| err(line, ParseErrorKind::MalformedProduct(tok.to_string())))?;
        terms.push(PauliTerm { qubit, axis });
    }
    Ok(Target::Product(terms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_program() {
        let p = parse_program("QUBITS 2\nH 0\nCX 0 1\nM 0 1\nDETECTOR rec[-1] rec[-2]").unwrap();
        assert_eq!(p.qubit_count, 2);
        assert_eq!(p.instructions.len(), 4);
        assert_eq!(p.instructions[3].opcode, Opcode::Detector);
    }

    #[test]
    fn correlated_error_exact_probability() {
        let p = parse_program("CORRELATED_ERROR(0.0000001953125) X0*Z3*Y5").unwrap();
        assert_eq!(p.instructions.len(), 1);
        assert_eq!(p.instructions[0].params, vec![1e-4 / 512.0]);
        match &p.instructions[0].targets[0] {
            Target::Product(t) => assert_eq!(t.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_negative_record_rejected() {
        let e = parse_program("COND_X rec[0] 1").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.to_string().contains("negative"));
    }

    #[test]
    fn record_out_of_range_rejected() {
        let e = parse_program("QUBITS 1\nM 0\nDETECTOR rec[-2]").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(matches!(e.kind, ParseErrorKind::RecordOutOfRange(_)));
    }

    #[test]
    fn unknown_opcode() {
        let e = parse_program("QUBITS 1\n\nFOO 0").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(matches!(e.kind, ParseErrorKind::UnknownOpcode(_)));
    }

    #[test]
    fn malformed_product() {
        assert!(matches!(
            parse_program("MPP X0*Q1").unwrap_err().kind,
            ParseErrorKind::MalformedProduct(_)
        ));
        assert!(matches!(
            parse_program("MPP X*Z1").unwrap_err().kind,
            ParseErrorKind::MalformedProduct(_)
        ));
    }

    #[test]
    fn tags_and_comments() {
        let p = parse_program("QUBITS 1\n# a note\nDEPOLARIZE1(0.5) 0 # tag: dropout round=3\n").unwrap();
        assert!(p.has_tag(0, "dropout"));
        assert!(p.has_tag(0, "round=3"));
    }
}
