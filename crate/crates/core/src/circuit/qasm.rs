//! OpenQASM 2 subset: one `qreg`, one `creg`, and the gates
//! `x`, `sx`, `rz(expr)`, `cx`, `delay(int)`, `barrier`, `measure`.

use std::fmt::Write as _;

use thiserror::Error;

use super::{CircuitError, Gate, GateKind, QuantumCircuit, Qubit};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct QasmError {
    pub line: usize,
    pub col: usize,
    pub kind: QasmErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QasmErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("index {index} out of range for register `{register}` of size {size}")]
    IndexOutOfRange { register: String, index: usize, size: usize },
    #[error("unsupported gate `{0}`")]
    UnsupportedGate(String),
    #[error("undeclared register `{0}`")]
    UndeclaredRegister(String),
    #[error("{0}")]
    Register(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Real(f64),
    Str(String),
    Punct(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, QasmError> {
    const PUNCT: [&str; 11] = ["->", ";", ",", "[", "]", "(", ")", "+", "-", "*", "/"];
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i, &mut col);
            }
            continue;
        }
        let push = |tok: Tok, tokens: &mut Vec<Token>| tokens.push(Token { tok, line: start_line, col: start_col });
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            push(Tok::Ident(chars[i..j].iter().collect()), &mut tokens);
            advance(j - i, &mut i, &mut col);
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i;
            let mut real = false;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j < chars.len() && chars[j] == '.' {
                real = true;
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    real = true;
                    j = k;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
            }
            let lexeme: String = chars[i..j].iter().collect();
            let tok = if real {
                Tok::Real(lexeme.parse().map_err(|_| QasmError {
                    line,
                    col,
                    kind: QasmErrorKind::Syntax(format!("bad number `{lexeme}`")),
                })?)
            } else {
                Tok::Int(lexeme.parse().map_err(|_| QasmError {
                    line,
                    col,
                    kind: QasmErrorKind::Syntax(format!("integer `{lexeme}` too large")),
                })?)
            };
            push(tok, &mut tokens);
            advance(j - i, &mut i, &mut col);
            continue;
        }
        if c == '"' {
            let mut j = i + 1;
            while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                j += 1;
            }
            if j >= chars.len() || chars[j] != '"' {
                return Err(QasmError { line, col, kind: QasmErrorKind::Syntax("unterminated string".into()) });
            }
            push(Tok::Str(chars[i + 1..j].iter().collect()), &mut tokens);
            advance(j + 1 - i, &mut i, &mut col);
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        if let Some(p) = PUNCT.iter().find(|p| rest.starts_with(**p)) {
            push(Tok::Punct(p), &mut tokens);
            advance(p.len(), &mut i, &mut col);
            continue;
        }
        return Err(QasmError { line, col, kind: QasmErrorKind::Syntax(format!("unexpected character `{c}`")) });
    }
    Ok(tokens)
}

struct Register {
    name: String,
    size: usize,
}

enum Operand {
    Index(usize),
    Whole,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: (usize, usize),
    qreg: Option<Register>,
    creg: Option<Register>,
    circuit: Option<QuantumCircuit>,
}

impl Parser {
    fn err_at(&self, tok: Option<&Token>, kind: QasmErrorKind) -> QasmError {
        let (line, col) = tok.map(|t| (t.line, t.col)).unwrap_or(self.end);
        QasmError { line, col, kind }
    }

    fn syntax(&self, msg: impl Into<String>) -> QasmError {
        self.err_at(self.tokens.get(self.pos), QasmErrorKind::Syntax(msg.into()))
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), QasmError> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{p}`")))
        }
    }

    fn ident(&mut self) -> Result<Token, QasmError> {
        match self.peek() {
            Some(Tok::Ident(_)) => Ok(self.next().unwrap()),
            _ => Err(self.syntax("expected identifier")),
        }
    }

    fn int(&mut self) -> Result<u64, QasmError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.syntax("expected integer")),
        }
    }

    fn parse(mut self) -> Result<QuantumCircuit, QasmError> {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == "OPENQASM") {
            self.pos += 1;
            match self.next().map(|t| t.tok) {
                Some(Tok::Real(v)) if (v - 2.0).abs() < 1e-9 => {}
                _ => return Err(self.syntax("only OPENQASM 2.0 is supported")),
            }
            self.expect(";")?;
        }
        while self.pos < self.tokens.len() {
            self.statement()?;
        }
        self.circuit.ok_or_else(|| QasmError {
            line: self.end.0,
            col: self.end.1,
            kind: QasmErrorKind::Register("no qreg declared".into()),
        })
    }

    fn statement(&mut self) -> Result<(), QasmError> {
        let head = self.ident()?;
        let Tok::Ident(name) = &head.tok else { unreachable!() };
        match name.as_str() {
            "include" => {
                match self.next().map(|t| t.tok) {
                    Some(Tok::Str(_)) => {}
                    _ => return Err(self.syntax("expected include path")),
                }
                self.expect(";")
            }
            "qreg" | "creg" => self.declaration(&head, name == "qreg"),
            "x" | "sx" | "rz" | "cx" | "delay" | "barrier" | "measure" => {
                let name = name.clone();
                self.gate_statement(&head, &name)
            }
            other => Err(self.err_at(Some(&head), QasmErrorKind::UnsupportedGate(other.into()))),
        }
    }

    fn declaration(&mut self, head: &Token, quantum: bool) -> Result<(), QasmError> {
        let name_tok = self.ident()?;
        let Tok::Ident(name) = name_tok.tok else { unreachable!() };
        self.expect("[")?;
        let size = self.int()? as usize;
        self.expect("]")?;
        self.expect(";")?;
        let slot = if quantum { &mut self.qreg } else { &mut self.creg };
        if slot.is_some() {
            let kind =
                QasmErrorKind::Register(format!("only one {} is supported", if quantum { "qreg" } else { "creg" }));
            return Err(QasmError { line: head.line, col: head.col, kind });
        }
        *slot = Some(Register { name, size });
        if quantum {
            self.circuit = Some(QuantumCircuit::new(size));
        }
        Ok(())
    }

    fn operand(&mut self, quantum: bool) -> Result<Operand, QasmError> {
        let tok = self.ident()?;
        let Tok::Ident(name) = &tok.tok else { unreachable!() };
        let reg = if quantum { &self.qreg } else { &self.creg };
        let Some(reg) = reg.as_ref().filter(|r| &r.name == name) else {
            return Err(self.err_at(Some(&tok), QasmErrorKind::UndeclaredRegister(name.clone())));
        };
        let (reg_name, size) = (reg.name.clone(), reg.size);
        if !self.eat("[") {
            return Ok(Operand::Whole);
        }
        let index_tok = self.tokens.get(self.pos).cloned();
        let index = self.int()? as usize;
        self.expect("]")?;
        if index >= size {
            return Err(
                self.err_at(index_tok.as_ref(), QasmErrorKind::IndexOutOfRange { register: reg_name, index, size })
            );
        }
        Ok(Operand::Index(index))
    }

    fn qubits_of(&self, op: &Operand) -> Vec<Qubit> {
        match op {
            Operand::Index(i) => vec![*i],
            Operand::Whole => (0..self.qreg.as_ref().map_or(0, |r| r.size)).collect(),
        }
    }

    fn gate_statement(&mut self, head: &Token, name: &str) -> Result<(), QasmError> {
        let mut param = None;
        if name == "rz" || name == "delay" {
            self.expect("(")?;
            param = Some(self.expr()?);
            self.expect(")")?;
        }
        let mut gates = Vec::new();
        match name {
            "x" | "sx" | "rz" | "delay" => {
                let op = self.operand(true)?;
                for q in self.qubits_of(&op) {
                    gates.push(match name {
                        "x" => Gate::x(q),
                        "sx" => Gate::sx(q),
                        "rz" => Gate::rz(q, param.unwrap()),
                        _ => {
                            let d = param.unwrap();
                            if d < 0.0 || d.fract() != 0.0 {
                                return Err(self.err_at(
                                    Some(head),
                                    QasmErrorKind::Syntax(format!("delay must be a non-negative integer, got {d}")),
                                ));
                            }
                            Gate::delay(q, d as u64)
                        }
                    });
                }
            }
            "cx" => {
                let a = self.operand(true)?;
                self.expect(",")?;
                let b = self.operand(true)?;
                match (a, b) {
                    (Operand::Index(c), Operand::Index(t)) => gates.push(Gate::cx(c, t)),
                    _ => return Err(self.syntax("cx needs indexed qubit operands")),
                }
            }
            "barrier" => {
                let mut qubits = Vec::new();
                loop {
                    let op = self.operand(true)?;
                    qubits.extend(self.qubits_of(&op));
                    if !self.eat(",") {
                        break;
                    }
                }
                gates.push(Gate::barrier(qubits));
            }
            "measure" => {
                let q = self.operand(true)?;
                self.expect("->")?;
                let c = self.operand(false)?;
                match (q, c) {
                    (Operand::Index(q), Operand::Index(_)) => gates.push(Gate::measure(q)),
                    (Operand::Whole, Operand::Whole) => {
                        let (nq, nc) =
                            (self.qreg.as_ref().map_or(0, |r| r.size), self.creg.as_ref().map_or(0, |r| r.size));
                        if nq != nc {
                            return Err(self.err_at(
                                Some(head),
                                QasmErrorKind::Register("register-wide measure needs equal register sizes".into()),
                            ));
                        }
                        gates.extend((0..nq).map(Gate::measure));
                    }
                    _ => return Err(self.syntax("mismatched measure operands")),
                }
            }
            _ => unreachable!(),
        }
        self.expect(";")?;
        let circuit = self.circuit.as_mut().expect("operand() requires a declared qreg");
        for g in gates {
            circuit.push(g).map_err(|e| QasmError { line: head.line, col: head.col, kind: e.into() })?;
        }
        Ok(())
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<f64, QasmError> {
        let mut v = self.term()?;
        loop {
            if self.eat("+") {
                v += self.term()?;
            } else if self.eat("-") {
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> Result<f64, QasmError> {
        let mut v = self.unary()?;
        loop {
            if self.eat("*") {
                v *= self.unary()?;
            } else if self.eat("/") {
                let d = self.unary()?;
                if d == 0.0 {
                    return Err(self.syntax("division by zero"));
                }
                v /= d;
            } else {
                return Ok(v);
            }
        }
    }

    fn unary(&mut self) -> Result<f64, QasmError> {
        if self.eat("-") {
            Ok(-self.unary()?)
        } else if self.eat("+") {
            self.unary()
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> Result<f64, QasmError> {
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(v as f64)
            }
            Some(Tok::Real(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Ident(s)) if s == "pi" => {
                self.pos += 1;
                Ok(std::f64::consts::PI)
            }
            Some(Tok::Punct("(")) => {
                self.pos += 1;
                let v = self.expr()?;
                self.expect(")")?;
                Ok(v)
            }
            _ => Err(self.syntax("expected expression")),
        }
    }
}

/// Parses the supported OpenQASM 2 subset, preserving statement order.
pub fn parse_qasm(text: &str) -> Result<QuantumCircuit, QasmError> {
    let tokens = lex(text)?;
    let lines: Vec<&str> = text.lines().collect();
    let end = (lines.len().max(1), lines.last().map_or(1, |l| l.chars().count() + 1));
    Parser { tokens, pos: 0, end, qreg: None, creg: None, circuit: None }.parse()
}

/// Serializes a circuit as OpenQASM 2 text. Gate origins are not written,
/// so decoys and user gates are indistinguishable in the output.
pub fn emit_qasm(circuit: &QuantumCircuit) -> String {
    let n = circuit.n_qubits();
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(out, "qreg q[{n}];");
    if !circuit.measured_qubits().is_empty() {
        let _ = writeln!(out, "creg c[{n}];");
    }
    for gate in circuit.gates() {
        let qs = &gate.qubits;
        let _ = match &gate.kind {
            GateKind::X => writeln!(out, "x q[{}];", qs[0]),
            GateKind::Sx => writeln!(out, "sx q[{}];", qs[0]),
            // `{:?}` is the shortest representation that parses back exactly
            GateKind::Rz(angle) => writeln!(out, "rz({angle:?}) q[{}];", qs[0]),
            GateKind::Cx => writeln!(out, "cx q[{}],q[{}];", qs[0], qs[1]),
            GateKind::Delay(d) => writeln!(out, "delay({d}) q[{}];", qs[0]),
            GateKind::Measure => writeln!(out, "measure q[{0}] -> c[{0}];", qs[0]),
            GateKind::Barrier => {
                let list: Vec<String> = qs.iter().map(|q| format!("q[{q}]")).collect();
                writeln!(out, "barrier {};", list.join(","))
            }
            GateKind::Opaque(name) => {
                let list: Vec<String> = qs.iter().map(|q| format!("q[{q}]")).collect();
                writeln!(out, "{name} {};", list.join(","))
            }
        };
    }
    out
}
