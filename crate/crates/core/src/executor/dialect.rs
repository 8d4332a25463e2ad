//! The mock macro dialect.
//!
//! One command per line, `#` starts a comment, all lengths in millimetres:
//!
//! ```text
//! box <name> <l> <w> <h>
//! sphere <name> <r>
//! cylinder <name> <r> <h>
//! move <name> <dx> <dy> <dz>
//! union <name> <a> <b>
//! cut <name> <a> <b>
//! ```
//!
//! `union` and `cut` consume their operands: after `union u a b` only `u` is
//! in scope. Names may never be reused.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Box {
        name: String,
        size: [f64; 3],
    },
    Sphere {
        name: String,
        radius: f64,
    },
    Cylinder {
        name: String,
        radius: f64,
        height: f64,
    },
    Move {
        name: String,
        offset: [f64; 3],
    },
    Union {
        name: String,
        a: String,
        b: String,
    },
    Cut {
        name: String,
        a: String,
        b: String,
    },
}

impl Command {
    /// The name this command introduces, if any.
    pub fn defines(&self) -> Option<&str> {
        match self {
            Command::Box { name, .. }
            | Command::Sphere { name, .. }
            | Command::Cylinder { name, .. }
            | Command::Union { name, .. }
            | Command::Cut { name, .. } => Some(name),
            Command::Move { .. } => None,
        }
    }

    /// Names this command reads.
    pub fn references(&self) -> Vec<&str> {
        match self {
            Command::Move { name, .. } => vec![name],
            Command::Union { a, b, .. } | Command::Cut { a, b, .. } => vec![a, b],
            _ => Vec::new(),
        }
    }
}

/// A parsed mock macro.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub reason: String,
}

impl ParseError {
    fn new(line: usize, reason: impl Into<String>) -> Self {
        Self {
            line,
            reason: reason.into(),
        }
    }
}

pub fn parse(text: &str) -> Result<Program, ParseError> {
    let mut commands = Vec::new();
    let mut scope = Scope::default();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let Some((&keyword, args)) = tokens.split_first() else {
            continue;
        };
        let cmd = parse_command(keyword, args, line_no)?;
        scope.apply(&cmd, line_no)?;
        commands.push(cmd);
    }

    if commands.is_empty() {
        return Err(ParseError::new(last_line.max(1), "empty macro"));
    }
    Ok(Program { commands })
}

fn parse_command(keyword: &str, args: &[&str], line: usize) -> Result<Command, ParseError> {
    let arity = match keyword {
        "box" => 4,
        "sphere" => 2,
        "cylinder" => 3,
        "move" => 4,
        "union" | "cut" => 3,
        other => return Err(ParseError::new(line, format!("unknown command '{other}'"))),
    };
    if args.len() != arity {
        return Err(ParseError::new(
            line,
            format!(
                "arity mismatch: '{keyword}' takes {arity} arguments, got {}",
                args.len()
            ),
        ));
    }
    let name = ident(args[0], line)?;
    let num = |i: usize| number(args[i], line);

    let cmd = match keyword {
        "box" => {
            let size = [num(1)?, num(2)?, num(3)?];
            if size.iter().any(|v| *v <= 0.0) {
                return Err(ParseError::new(line, "box dimensions must be positive"));
            }
            Command::Box { name, size }
        }
        "sphere" => {
            let radius = num(1)?;
            if radius <= 0.0 {
                return Err(ParseError::new(line, "radius must be positive"));
            }
            Command::Sphere { name, radius }
        }
        "cylinder" => {
            let radius = num(1)?;
            let height = num(2)?;
            if radius <= 0.0 {
                return Err(ParseError::new(line, "radius must be positive"));
            }
            if height <= 0.0 {
                return Err(ParseError::new(line, "height must be positive"));
            }
            Command::Cylinder {
                name,
                radius,
                height,
            }
        }
        "move" => Command::Move {
            name,
            offset: [num(1)?, num(2)?, num(3)?],
        },
        "union" | "cut" => {
            let a = ident(args[1], line)?;
            let b = ident(args[2], line)?;
            if a == b {
                return Err(ParseError::new(line, "operands must be distinct"));
            }
            if keyword == "union" {
                Command::Union { name, a, b }
            } else {
                Command::Cut { name, a, b }
            }
        }
        _ => unreachable!(),
    };
    Ok(cmd)
}

fn ident(token: &str, line: usize) -> Result<String, ParseError> {
    let mut chars = token.chars();
    let valid = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !valid || is_keyword(token) {
        return Err(ParseError::new(line, format!("invalid name '{token}'")));
    }
    Ok(token.to_string())
}

fn is_keyword(token: &str) -> bool {
    matches!(
        token,
        "box" | "sphere" | "cylinder" | "move" | "union" | "cut"
    )
}

fn number(token: &str, line: usize) -> Result<f64, ParseError> {
    // f64::from_str accepts "inf" and "NaN"; the dialect does not.
    let looks_numeric = token
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    match token.parse::<f64>() {
        Ok(v) if looks_numeric && v.is_finite() => Ok(v),
        _ => Err(ParseError::new(
            line,
            format!("non-numeric argument '{token}'"),
        )),
    }
}

#[derive(Default)]
struct Scope {
    live: HashSet<String>,
    ever: HashSet<String>,
}

impl Scope {
    fn apply(&mut self, cmd: &Command, line: usize) -> Result<(), ParseError> {
        for r in cmd.references() {
            if !self.live.contains(r) {
                return Err(ParseError::new(line, format!("undefined name '{r}'")));
            }
        }
        if let Some(name) = cmd.defines() {
            if !self.ever.insert(name.to_string()) {
                return Err(ParseError::new(line, format!("duplicate name '{name}'")));
            }
        }
        if let Command::Union { a, b, .. } | Command::Cut { a, b, .. } = cmd {
            self.live.remove(a);
            self.live.remove(b);
        }
        if let Some(name) = cmd.defines() {
            self.live.insert(name.to_string());
        }
        Ok(())
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Box { name, size } => {
                write!(f, "box {name} {} {} {}", size[0], size[1], size[2])
            }
            Command::Sphere { name, radius } => write!(f, "sphere {name} {radius}"),
            Command::Cylinder {
                name,
                radius,
                height,
            } => write!(f, "cylinder {name} {radius} {height}"),
            Command::Move { name, offset } => {
                write!(f, "move {name} {} {} {}", offset[0], offset[1], offset[2])
            }
            Command::Union { name, a, b } => write!(f, "union {name} {a} {b}"),
            Command::Cut { name, a, b } => write!(f, "cut {name} {a} {b}"),
        }
    }
}

/// Canonical text form; `parse(&pretty_print(p)) == Ok(p)` for every valid program.
pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for cmd in &program.commands {
        out.push_str(&cmd.to_string());
        out.push('\n');
    }
    out
}
