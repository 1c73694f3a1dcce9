//! A minimal s-expression reader shared by the type, MR and domain-file parsers.

use std::fmt;

use crate::error::SyntaxError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{}", item)?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Token {
    Open,
    Close,
    Atom(String),
}

fn is_atom_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '\'' | '$' | '?')
}

fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '(' {
            tokens.push(Token::Open);
            chars.next();
        } else if c == ')' {
            tokens.push(Token::Close);
            chars.next();
        } else if c == ':' {
            tokens.push(Token::Atom(":".into()));
            chars.next();
        } else if c == '-' {
            chars.next();
            match chars.next() {
                Some((_, '>')) => tokens.push(Token::Atom("->".into())),
                _ => return Err(SyntaxError::new(pos, "expected `->`")),
            }
        } else if is_atom_char(c) {
            let mut atom = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if !is_atom_char(c) {
                    break;
                }
                atom.push(c);
                chars.next();
            }
            tokens.push(Token::Atom(atom));
        } else {
            return Err(SyntaxError::new(pos, format!("unexpected character `{}`", c)));
        }
    }
    Ok(tokens)
}

/// Reads a whitespace-separated sequence of s-expressions.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, SyntaxError> {
    let tokens = tokenize(text)?;
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for tok in tokens {
        match tok {
            Token::Open => stack.push(Vec::new()),
            Token::Close => {
                if stack.len() == 1 {
                    return Err(SyntaxError::new(0, "unbalanced `)`"));
                }
                let list = stack.pop().unwrap();
                stack.last_mut().unwrap().push(Sexp::List(list));
            }
            Token::Atom(a) => stack.last_mut().unwrap().push(Sexp::Atom(a)),
        }
    }
    if stack.len() != 1 {
        return Err(SyntaxError::new(text.len(), "unbalanced `(`"));
    }
    Ok(stack.pop().unwrap())
}

/// Reads exactly one s-expression.
pub fn read_one(text: &str) -> Result<Sexp, SyntaxError> {
    let mut items = read_all(text)?;
    match items.len() {
        1 => Ok(items.pop().unwrap()),
        0 => Err(SyntaxError::new(0, "empty expression")),
        _ => Err(SyntaxError::new(0, "trailing input after expression")),
    }
}

/// True for names usable as base types, predicates, constants and bound variables.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphanumeric() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '$' | '?'))
}
